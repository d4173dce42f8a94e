//! The bug bundle: candidate patches, the method-span map, recorded traces
//! and the optional reference fix for one bug.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::{normalized_key, FileEdit, LineTag};
use crate::trace::{build_invocation_trees, EventKind, TraceLog};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchId(pub String);

impl PatchId {
    pub fn new(id: impl Into<String>) -> Self {
        PatchId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for PatchId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for PatchId {
    fn from(s: &str) -> Self {
        PatchId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub id: PatchId,
    /// Repair tool that produced the patch, when known.
    pub provenance: Option<String>,
    pub edits: Vec<FileEdit>,
    /// Derived by [`resolve_modified_methods`].
    pub modified_methods: BTreeSet<String>,
}

impl Patch {
    /// A patch with its modified methods still unresolved.
    pub fn new(id: impl Into<String>, provenance: Option<String>, edits: Vec<FileEdit>) -> Self {
        Patch { id: PatchId(id.into()), provenance, edits, modified_methods: BTreeSet::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodSpan {
    pub file: String,
    pub method: String,
    pub start: u32,
    pub end: u32,
}

impl MethodSpan {
    pub fn new(file: impl Into<String>, method: impl Into<String>, start: u32, end: u32) -> Self {
        MethodSpan { file: file.into(), method: method.into(), start, end }
    }

    pub fn contains(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }

    fn len(&self) -> u32 {
        self.end - self.start
    }
}

/// Lookup structure over a method map.
#[derive(Debug, Clone, Default)]
pub struct MethodIndex {
    by_file: BTreeMap<String, Vec<MethodSpan>>,
    by_method: BTreeMap<String, Vec<MethodSpan>>,
}

impl MethodIndex {
    pub fn new(spans: &[MethodSpan]) -> Self {
        let mut index = MethodIndex::default();
        for span in spans {
            index.by_file.entry(span.file.clone()).or_default().push(span.clone());
            index.by_method.entry(span.method.clone()).or_default().push(span.clone());
        }
        index
    }

    /// The smallest span of `file` containing `line`.
    pub fn innermost(&self, file: &str, line: u32) -> Option<&MethodSpan> {
        self.by_file.get(file)?.iter().filter(|s| s.contains(line)).min_by_key(|s| s.len())
    }

    pub fn spans_of(&self, method: &str) -> &[MethodSpan] {
        self.by_method.get(method).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_method(&self, method: &str) -> bool {
        self.by_method.contains_key(method)
    }

    pub fn method_contains(&self, method: &str, line: u32) -> bool {
        self.spans_of(method).iter().any(|s| s.contains(line))
    }
}

/// The developer-written fix and the failing test's run over it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceFix {
    pub edits: Vec<FileEdit>,
    pub run: TraceLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// File, patch or trace the problem was found in.
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, location: location.into(), message: message.into() }
    }

    pub fn warning(location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

/// Methods touched by a set of edits.
///
/// Removed lines are looked up by their original line number. Added lines
/// are looked up both by their patched-file number and by the original line
/// they are anchored to; a method counts if either lands in its span. The
/// innermost span wins when spans nest. Changed lines outside every span are
/// reported, one diagnostic each.
pub fn resolve_edit_methods(edits: &[FileEdit], index: &MethodIndex, location: &str) -> (BTreeSet<String>, Vec<Diagnostic>) {
    let mut methods = BTreeSet::new();
    let mut diagnostics = Vec::new();
    for edit in edits {
        for hunk in &edit.hunks {
            for line in hunk.changed_lines() {
                let positions: &[u32] = match line.tag {
                    LineTag::Added => &[line.new_line, line.old_line],
                    _ => &[line.old_line],
                };
                let mut found = false;
                for &pos in positions {
                    if let Some(span) = index.innermost(&edit.path, pos) {
                        methods.insert(span.method.clone());
                        found = true;
                    }
                }
                if !found {
                    diagnostics.push(Diagnostic::error(
                        location,
                        format!("changed line {}:{} lies outside every method span", edit.path, positions[0]),
                    ));
                }
            }
        }
    }
    (methods, diagnostics)
}

pub fn resolve_modified_methods(patch: &Patch, method_map: &[MethodSpan]) -> Result<BTreeSet<String>, Vec<Diagnostic>> {
    let location = format!("patch {}", patch.id);
    match resolve_edit_methods(&patch.edits, &MethodIndex::new(method_map), &location) {
        (methods, diagnostics) if diagnostics.is_empty() => Ok(methods),
        (_, diagnostics) => Err(diagnostics),
    }
}

/// Drops syntactic duplicates, keeping the first occurrence of each
/// normalized diff. The map sends every dropped id to the id it duplicated.
pub fn dedupe_with_aliases(patches: Vec<Patch>) -> (Vec<Patch>, BTreeMap<PatchId, PatchId>) {
    let mut seen: BTreeMap<String, PatchId> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut aliases = BTreeMap::new();
    for patch in patches {
        let key = normalized_key(&patch.edits);
        match seen.get(&key) {
            Some(first) => {
                aliases.insert(patch.id.clone(), first.clone());
            }
            None => {
                seen.insert(key, patch.id.clone());
                kept.push(patch);
            }
        }
    }
    (kept, aliases)
}

pub fn dedupe_patches(patches: Vec<Patch>) -> Vec<Patch> {
    dedupe_with_aliases(patches).0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugBundle {
    pub bug_id: String,
    pub failing_tests: Vec<String>,
    pub patches: Vec<Patch>,
    pub method_map: Vec<MethodSpan>,
    pub baseline_trace: TraceLog,
    pub patch_traces: BTreeMap<PatchId, TraceLog>,
    pub reference: Option<ReferenceFix>,
    /// Known-correct patches.
    pub labels: Option<BTreeSet<PatchId>>,
}

impl BugBundle {
    pub fn index(&self) -> MethodIndex {
        MethodIndex::new(&self.method_map)
    }

    pub fn patch(&self, id: &str) -> Option<&Patch> {
        self.patches.iter().find(|p| p.id.as_str() == id)
    }

    pub fn patch_ids(&self) -> BTreeSet<PatchId> {
        self.patches.iter().map(|p| p.id.clone()).collect()
    }

    /// Methods modified by at least one patch.
    pub fn modified_methods(&self) -> BTreeSet<String> {
        self.patches.iter().flat_map(|p| p.modified_methods.iter().cloned()).collect()
    }

    /// Resolves modified methods, deduplicates and validates, collecting
    /// every problem before failing.
    pub fn finalize(mut self) -> Result<BugBundle, Vec<Diagnostic>> {
        let index = self.index();
        let mut diagnostics = Vec::new();
        for patch in &mut self.patches {
            let (methods, diags) = resolve_edit_methods(&patch.edits, &index, &format!("patch {}", patch.id));
            patch.modified_methods = methods;
            diagnostics.extend(diags);
        }

        let (kept, aliases) = dedupe_with_aliases(core::mem::take(&mut self.patches));
        self.patches = kept;
        for (dropped, kept) in &aliases {
            if let Some(trace) = self.patch_traces.remove(dropped) {
                // a duplicate listed with a trace of its own still needs the
                // kept patch's trace to be present
                self.patch_traces.entry(kept.clone()).or_insert(trace);
            }
            if let Some(labels) = self.labels.as_mut() {
                if labels.remove(dropped) {
                    labels.insert(kept.clone());
                }
            }
        }

        diagnostics.extend(self.validate());
        if has_errors(&diagnostics) {
            Err(diagnostics)
        } else {
            Ok(self)
        }
    }

    /// Checks every bundle invariant and returns all violations.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let index = self.index();

        for span in &self.method_map {
            if span.start == 0 || span.start > span.end {
                out.push(Diagnostic::error(
                    "methods.json",
                    format!("span of `{}` has invalid range {}..{}", span.method, span.start, span.end),
                ));
            }
        }
        let mut files: BTreeMap<&str, Vec<&MethodSpan>> = BTreeMap::new();
        for span in &self.method_map {
            files.entry(span.file.as_str()).or_default().push(span);
        }
        for spans in files.values() {
            for (i, a) in spans.iter().enumerate() {
                for b in &spans[i + 1..] {
                    let disjoint = a.end < b.start || b.end < a.start;
                    let nested = (a.start <= b.start && b.end <= a.end) || (b.start <= a.start && a.end <= b.end);
                    if !disjoint && !nested {
                        out.push(Diagnostic::error(
                            "methods.json",
                            format!("spans of `{}` and `{}` partially overlap in {}", a.method, b.method, a.file),
                        ));
                    }
                }
            }
        }

        let mut ids = BTreeSet::new();
        let mut keys: BTreeMap<String, &PatchId> = BTreeMap::new();
        for patch in &self.patches {
            let loc = format!("patch {}", patch.id);
            if !ids.insert(&patch.id) {
                out.push(Diagnostic::error(&loc, "duplicate patch id"));
            }
            if patch.edits.is_empty() {
                out.push(Diagnostic::error(&loc, "patch has no edits"));
            } else if patch.modified_methods.is_empty() {
                out.push(Diagnostic::error(&loc, "patch modifies no known method"));
            }
            if let Some(first) = keys.insert(normalized_key(&patch.edits), &patch.id) {
                out.push(Diagnostic::error(&loc, format!("syntactically identical to patch {first}")));
            }
            if !self.patch_traces.contains_key(&patch.id) {
                out.push(Diagnostic::error(&loc, "no trace recorded for this patch"));
            }
        }
        for id in self.patch_traces.keys() {
            if !ids.contains(id) {
                out.push(Diagnostic::error(format!("trace {id}"), "trace for a patch that is not in the bundle"));
            }
        }
        if let Some(labels) = &self.labels {
            for id in labels {
                if !ids.contains(id) {
                    out.push(Diagnostic::error("labels.json", format!("label names unknown patch {id}")));
                }
            }
        }

        check_trace(&self.baseline_trace, "baseline trace", &index, &mut out);
        for (id, log) in &self.patch_traces {
            check_trace(log, &format!("trace {id}"), &index, &mut out);
        }
        if let Some(reference) = &self.reference {
            if reference.edits.is_empty() {
                out.push(Diagnostic::error("reference", "reference fix has no edits"));
            }
            check_trace(&reference.run, "reference trace", &index, &mut out);
        }
        out
    }
}

fn check_trace(log: &TraceLog, location: &str, index: &MethodIndex, out: &mut Vec<Diagnostic>) {
    if let Err(e) = build_invocation_trees(log) {
        out.push(Diagnostic::error(location, format!("{e}")));
    }
    let mut unknown = BTreeSet::new();
    for event in &log.events {
        if !index.has_method(&event.method) {
            if unknown.insert(event.method.as_str()) {
                out.push(Diagnostic::error(
                    location,
                    format!("event seq {} names method `{}` absent from the method map", event.seq, event.method),
                ));
            }
            continue;
        }
        if event.kind == EventKind::Line {
            if let Some(line) = event.line {
                if !index.method_contains(&event.method, line) {
                    out.push(Diagnostic::error(
                        location,
                        format!("event seq {}: line {line} lies outside the span of `{}`", event.seq, event.method),
                    ));
                }
            }
        }
    }
}
