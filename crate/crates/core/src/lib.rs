//! Interactive patch filtering.
//!
//! Given many candidate patches for one bug and recorded executions of the
//! failing test over each patched program, this crate derives checkable
//! attributes (which methods a patch modifies, which lines the failing test
//! covers, which values variables take at method boundaries), turns the
//! discriminating ones into yes/no questions, and narrows the candidate set
//! as the questions are answered.
//!
//! The crate is `no_std` and only needs `alloc`. Reading bundles from disk,
//! the HTTP service and the command line live in the `inpafer` crate.
//!
//! Module map:
//!
//! * [`diff`]: unified-diff model, parser and canonical renderer.
//! * [`bundle`]: the in-memory bug bundle, method resolution, deduplication
//!   and batch validation.
//! * [`trace`]: trace events, invocation trees, greedy alignment, coverage
//!   and variable profiles, Diff View line classes.
//! * [`attributes`]: attribute extraction and question construction.
//! * [`engine`]: the interactive session and its update rule.
//! * [`sim`]: the simulated developer, experiment reports and synthetic
//!   fixtures.

#![no_std]

extern crate alloc;

pub mod attributes;
pub mod bundle;
pub mod diff;
pub mod engine;
pub mod sim;
pub mod trace;

pub use attributes::{Attribute, Family, FamilySet, InteractiveQuestion, QuestionId, QuestionState};
pub use bundle::{BugBundle, Diagnostic, MethodSpan, Patch, PatchId, ReferenceFix};
pub use diff::{DiffError, FileEdit, Hunk, HunkLine};
pub use engine::{Answer, EngineError, SessionState};
pub use trace::{Boundary, LineClass, Scalar, TraceEvent, TraceLog};
