//! Bundle files, the HTTP service and the `inpafer` command line, on top of
//! [`inpafer_core`].

pub mod cli;
pub mod formats;
pub mod io;
pub mod service;

pub use inpafer_core as core;
