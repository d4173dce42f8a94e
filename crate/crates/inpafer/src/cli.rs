//! The `inpafer` command line.
//!
//! Exit codes: 0 on success, 1 when the work itself fails (invalid bundle,
//! bad script, unwritable output), 2 for usage errors.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use inpafer_core::attributes::prepare;
use inpafer_core::sim::{generate_fixture, run_experiment, ExperimentConfig, FixtureSpec, Policy};
use inpafer_core::{FamilySet, SessionState};

use crate::formats::{questions_json, write_ablation_csvs, write_report_csv, AnswerScript};
use crate::io::{load_bundle_with_warnings, save_bundle};
use crate::service::{serve, AppState};

#[derive(Debug, Parser)]
#[command(name = "inpafer", version, about = "Interactive patch filtering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the questions for a bundle and write them as JSON.
    Prepare {
        bundle: PathBuf,
        #[arg(long, default_value = "questions.json")]
        out: PathBuf,
        #[arg(long, default_value = "all", value_parser = parse_families)]
        families: FamilySet,
    },
    /// Run the simulated developer and write a report plus CSVs.
    Simulate {
        bundle: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: u32,
        #[arg(long, default_value = "all", value_parser = parse_families)]
        families: FamilySet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[arg(long, default_value = "uniform_random", value_parser = parse_policy)]
        policy: Policy,
    },
    /// Serve the HTTP API.
    Serve {
        /// Bundle directories to register at startup.
        #[arg(long = "bundle")]
        bundles: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory for session files; sessions found there are restored.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
    /// Write a synthetic bundle.
    GenFixture {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer questions from a script and print the final session view.
    Answer {
        bundle: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Where to write the final view; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_families(s: &str) -> Result<FamilySet, String> {
    let set: FamilySet = s.parse().map_err(|e| format!("{e}"))?;
    if set.is_empty() {
        return Err("at least one family is required".into());
    }
    Ok(set)
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown policy `{s}` (expected uniform_random or first_pending)"))
}

#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn with_context<T, E: std::fmt::Display>(r: Result<T, E>, what: impl FnOnce() -> String) -> Result<T, Failure> {
    r.map_err(|e| Failure(format!("{}: {e}", what())))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        with_context(fs::create_dir_all(parent), || format!("cannot create {}", parent.display()))?;
    }
    with_context(fs::write(path, contents), || format!("cannot write {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = with_context(fs::read_to_string(path), || format!("cannot read {}", path.display()))?;
    with_context(serde_json::from_str(&text), || format!("invalid {}", path.display()))
}

fn load(path: &Path) -> Result<inpafer_core::BugBundle, Failure> {
    let (bundle, warnings) = load_bundle_with_warnings(path)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(bundle)
}

fn prepare_cmd(bundle: &Path, out: &Path, families: FamilySet) -> Outcome {
    let bundle = load(bundle)?;
    let questions = prepare(&bundle, families);
    write_file(out, &questions_json(&questions))?;
    println!("{} questions written to {}", questions.len(), out.display());
    Ok(())
}

fn simulate_cmd(bundle: &Path, config: ExperimentConfig, out: &Path) -> Outcome {
    let bundle = load(bundle)?;
    let report = run_experiment(&bundle, &config).map_err(|e| Failure(format!("{}: {e}", e.code())))?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(out, &json)?;
    let csv = out.with_extension("csv");
    with_context(write_report_csv(&report, &csv), || format!("cannot write {}", csv.display()))?;
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    with_context(write_ablation_csvs(&report, dir), || format!("cannot write ablation CSVs in {}", dir.display()))?;
    println!(
        "{}: {} runs, mean {:.2} queries; report written to {}",
        report.bug_id,
        report.records.len(),
        report.mean_query_count,
        out.display()
    );
    Ok(())
}

fn gen_fixture_cmd(spec: &Path, seed: u64, out: &Path) -> Outcome {
    let spec: FixtureSpec = read_json(spec)?;
    let bundle = generate_fixture(&spec, seed)?;
    with_context(save_bundle(&bundle, out), || format!("cannot write bundle to {}", out.display()))?;
    println!("{} with {} patches written to {}", bundle.bug_id, bundle.patches.len(), out.display());
    Ok(())
}

fn answer_cmd(bundle: &Path, script: &Path, out: Option<&Path>) -> Outcome {
    let bundle = load(bundle)?;
    let script: AnswerScript = read_json(script)?;
    let mut state = SessionState::new("script", prepare(&bundle, FamilySet::all()), bundle.patch_ids());
    for (i, step) in script.answers.iter().enumerate() {
        let id = match (&step.question_id, &step.text) {
            (Some(id), _) => id.clone(),
            (None, Some(text)) => state
                .slots()
                .iter()
                .find(|s| &s.question.attribute.text() == text)
                .map(|s| s.question.id.clone())
                .ok_or_else(|| Failure(format!("step {}: no question reads \"{text}\"", i + 1)))?,
            (None, None) => return Err(Failure(format!("step {}: needs question_id or text", i + 1))),
        };
        state.answer(&id, step.answer).map_err(|e| Failure(format!("step {}: {}: {e}", i + 1, e.code())))?;
        log::info!("step {}: {} -> {} candidates", i + 1, id, state.candidates.len());
    }
    if let Some(pid) = &script.select {
        state.select_patch(pid).map_err(|e| Failure(format!("select: {}: {e}", e.code())))?;
    }
    let mut json = serde_json::to_string_pretty(&state.snapshot(&bundle.failing_tests))?;
    json.push('\n');
    match out {
        Some(path) => write_file(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn serve_cmd(bundles: &[PathBuf], addr: SocketAddr, state_dir: Option<&Path>) -> Outcome {
    let app = match state_dir {
        Some(dir) => with_context(AppState::with_state_dir(dir), || format!("cannot use state directory {}", dir.display()))?,
        None => AppState::new(),
    };
    for path in bundles {
        let info = app.register_bundle(path).map_err(|e| Failure(format!("{}: {}", e.code, e.message)))?;
        println!("registered {} ({} patches, {} questions)", info.bundle_id, info.patch_count, info.question_count);
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(Arc::new(app), addr))?;
    Ok(())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("INPAFER_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Prepare { bundle, out, families } => prepare_cmd(bundle, out, *families),
        Command::Simulate { bundle, repeats, families, seed, out, policy } => {
            let config = ExperimentConfig { repeats: *repeats, seed: *seed, families: *families, policy: *policy };
            simulate_cmd(bundle, config, out)
        }
        Command::Serve { bundles, port, host, state_dir } => serve_cmd(bundles, SocketAddr::new(*host, *port), state_dir.as_deref()),
        Command::GenFixture { spec, seed, out } => gen_fixture_cmd(spec, *seed, out),
        Command::Answer { bundle, script, out } => answer_cmd(bundle, script, out.as_deref()),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            1
        }
    }
}
