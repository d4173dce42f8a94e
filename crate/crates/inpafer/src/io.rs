//! Bundle directories on disk.
//!
//! ```text
//! bundle/
//!   manifest.json        {"bug_id", "failing_tests", "patches": [{"id", "tool", "diff", "trace"}]}
//!   methods.json         [{"file", "method", "start", "end"}, ...]
//!   patches/<id>.diff
//!   runs/baseline.trace.ndjson
//!   runs/<id>.trace.ndjson
//!   reference/fix.diff, reference/run.trace.ndjson   (optional)
//!   labels.json          {"correct": [...]}           (optional)
//! ```
//!
//! Loading collects every problem it finds before failing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use inpafer_core::bundle::{has_errors, Severity};
use inpafer_core::diff::{parse_unified_diff, render_unified_diff};
use inpafer_core::{BugBundle, Diagnostic, FileEdit, MethodSpan, Patch, PatchId, ReferenceFix, TraceEvent, TraceLog};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub bug_id: String,
    #[serde(default)]
    pub failing_tests: Vec<String>,
    pub patches: Vec<ManifestPatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPatch {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    /// Relative to the bundle; defaults to `patches/<id>.diff`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
    /// Relative to the bundle; defaults to `runs/<id>.trace.ndjson`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Labels {
    correct: Vec<String>,
}

/// Every problem found while loading a bundle.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct LoadError {
    pub path: PathBuf,
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let errors = self.diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
        write!(f, "bundle {} has {errors} error(s)", self.path.display())?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

struct Loader<'a> {
    root: &'a Path,
    diagnostics: Vec<Diagnostic>,
}

impl Loader<'_> {
    fn read(&mut self, rel: &str, what: &str) -> Option<String> {
        match fs::read_to_string(self.root.join(rel)) {
            Ok(text) => Some(text),
            Err(e) => {
                self.diagnostics.push(Diagnostic::error(rel, format!("cannot read {what}: {e}")));
                None
            }
        }
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self, rel: &str, what: &str) -> Option<T> {
        let text = self.read(rel, what)?;
        match serde_json::from_str(&text) {
            Ok(v) => Some(v),
            Err(e) => {
                self.diagnostics.push(Diagnostic::error(rel, format!("invalid {what}: {e}")));
                None
            }
        }
    }

    fn diff(&mut self, rel: &str, what: &str) -> Option<Vec<FileEdit>> {
        let text = self.read(rel, what)?;
        match parse_unified_diff(&text) {
            Ok(edits) => Some(edits),
            Err(e) => {
                self.diagnostics.push(Diagnostic::error(rel, format!("{what}: {e} (line {})", e.line())));
                None
            }
        }
    }

    fn trace(&mut self, rel: &str, what: &str, default_test: &str) -> Option<TraceLog> {
        let text = self.read(rel, what)?;
        let (log, problems) = parse_trace(&text, default_test);
        let ok = problems.is_empty();
        self.diagnostics.extend(problems.into_iter().map(|(line, msg)| Diagnostic::error(rel, format!("line {line}: {msg}"))));
        ok.then_some(log)
    }
}

/// Parses an NDJSON trace. Blank lines are skipped; unknown fields are
/// ignored. Problems come back with their 1-based line numbers.
pub fn parse_trace(text: &str, default_test: &str) -> (TraceLog, Vec<(usize, String)>) {
    let mut events = Vec::new();
    let mut problems = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceEvent>(line) {
            Ok(e) => events.push(e),
            Err(e) => problems.push((i + 1, e.to_string())),
        }
    }
    let test = events.first().map(|e: &TraceEvent| e.test.clone()).unwrap_or_else(|| default_test.to_string());
    (TraceLog { test, events }, problems)
}

pub fn render_trace(log: &TraceLog) -> String {
    let mut out = String::new();
    for e in &log.events {
        out += &serde_json::to_string(e).expect("trace events serialize");
        out.push('\n');
    }
    out
}

/// Reads, resolves, deduplicates and validates a bundle directory.
///
/// Warnings do not fail the load; they are dropped here and can be
/// recovered with [`load_bundle_with_warnings`].
pub fn load_bundle(path: &Path) -> Result<BugBundle, LoadError> {
    load_bundle_with_warnings(path).map(|(b, _)| b)
}

pub fn load_bundle_with_warnings(path: &Path) -> Result<(BugBundle, Vec<Diagnostic>), LoadError> {
    let mut l = Loader { root: path, diagnostics: Vec::new() };
    let fail = |l: Loader| LoadError { path: path.to_path_buf(), diagnostics: l.diagnostics };

    let Some(manifest) = l.json::<Manifest>("manifest.json", "manifest") else {
        return Err(fail(l));
    };
    let method_map: Vec<MethodSpan> = l.json("methods.json", "method map").unwrap_or_default();
    let default_test = manifest.failing_tests.first().cloned().unwrap_or_default();

    let mut patches = Vec::new();
    let mut patch_traces = BTreeMap::new();
    for entry in &manifest.patches {
        let diff_rel = entry.diff.clone().unwrap_or_else(|| format!("patches/{}.diff", entry.id));
        let trace_rel = entry.trace.clone().unwrap_or_else(|| format!("runs/{}.trace.ndjson", entry.id));
        let edits = l.diff(&diff_rel, &format!("diff of patch {}", entry.id));
        let trace = l.trace(&trace_rel, &format!("trace of patch {}", entry.id), &default_test);
        if let (Some(edits), Some(trace)) = (edits, trace) {
            patches.push(Patch::new(entry.id.as_str(), entry.tool.clone(), edits));
            patch_traces.insert(PatchId::new(entry.id.as_str()), trace);
        }
    }
    let baseline = l.trace("runs/baseline.trace.ndjson", "baseline trace", &default_test);

    let reference = if path.join("reference").exists() {
        let edits = l.diff("reference/fix.diff", "reference fix");
        let run = l.trace("reference/run.trace.ndjson", "reference run", &default_test);
        edits.zip(run).map(|(edits, run)| ReferenceFix { edits, run })
    } else {
        None
    };
    let labels = if path.join("labels.json").exists() {
        l.json::<Labels>("labels.json", "labels").map(|lb| lb.correct.into_iter().map(PatchId::new).collect::<BTreeSet<_>>())
    } else {
        None
    };

    if has_errors(&l.diagnostics) {
        return Err(fail(l));
    }
    let bundle = BugBundle {
        bug_id: manifest.bug_id,
        failing_tests: manifest.failing_tests,
        patches,
        method_map,
        baseline_trace: baseline.unwrap_or_default(),
        patch_traces,
        reference,
        labels,
    };
    match bundle.finalize() {
        Ok(b) => Ok((b, l.diagnostics)),
        Err(diags) => {
            l.diagnostics.extend(diags);
            Err(fail(l))
        }
    }
}

fn write(root: &Path, rel: &str, contents: &str) -> io::Result<()> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("bundle parts serialize");
    s.push('\n');
    s
}

/// Writes a bundle directory that [`load_bundle`] reads back unchanged.
/// Diffs are written in canonical form.
pub fn save_bundle(bundle: &BugBundle, path: &Path) -> io::Result<()> {
    fs::create_dir_all(path)?;
    let manifest = Manifest {
        bug_id: bundle.bug_id.clone(),
        failing_tests: bundle.failing_tests.clone(),
        patches: bundle
            .patches
            .iter()
            .map(|p| ManifestPatch {
                id: p.id.to_string(),
                tool: p.provenance.clone(),
                diff: Some(format!("patches/{}.diff", p.id)),
                trace: Some(format!("runs/{}.trace.ndjson", p.id)),
            })
            .collect(),
    };
    write(path, "manifest.json", &pretty(&manifest))?;
    write(path, "methods.json", &pretty(&bundle.method_map))?;
    for p in &bundle.patches {
        write(path, &format!("patches/{}.diff", p.id), &render_unified_diff(&p.edits))?;
        let log = bundle.patch_traces.get(&p.id).cloned().unwrap_or_default();
        write(path, &format!("runs/{}.trace.ndjson", p.id), &render_trace(&log))?;
    }
    write(path, "runs/baseline.trace.ndjson", &render_trace(&bundle.baseline_trace))?;
    if let Some(r) = &bundle.reference {
        write(path, "reference/fix.diff", &render_unified_diff(&r.edits))?;
        write(path, "reference/run.trace.ndjson", &render_trace(&r.run))?;
    }
    if let Some(labels) = &bundle.labels {
        write(path, "labels.json", &pretty(&Labels { correct: labels.iter().map(|l| l.to_string()).collect() }))?;
    }
    Ok(())
}
