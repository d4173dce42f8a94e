//! Execution traces of the failing test.
//!
//! A trace is a flat, ordered list of `enter` / `line` / `exit` events. From
//! it we rebuild per-invocation call trees, align two executions, and derive
//! the set-valued coverage and variable profiles the attribute extractors
//! consume.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bundle::{MethodIndex, Patch};
use crate::diff::LineTag;

/// A primitive value recorded at a method boundary.
///
/// Floats compare by bit pattern, which coincides with comparing their
/// shortest round-trip text; this keeps scalars usable as map keys.
#[derive(Debug, Clone)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    fn rank(&self) -> u8 {
        match self {
            Scalar::Bool(_) => 0,
            Scalar::Int(_) => 1,
            Scalar::Float(_) => 2,
            Scalar::Str(_) => 3,
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scalar {}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Scalar::Bool(a), Scalar::Bool(b)) => a.cmp(b),
            (Scalar::Int(a), Scalar::Int(b)) => a.cmp(b),
            (Scalar::Float(a), Scalar::Float(b)) => {
                if a.to_bits() == b.to_bits() {
                    Ordering::Equal
                } else {
                    a.total_cmp(b)
                }
            }
            (Scalar::Str(a), Scalar::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Scalar {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Scalar::Bool(b) => b.hash(state),
            Scalar::Int(i) => i.hash(state),
            Scalar::Float(f) => f.to_bits().hash(state),
            Scalar::Str(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            // Debug is the shortest round-trip form and keeps the `.0`
            Scalar::Float(x) => write!(f, "{x:?}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Bool(b) => serializer.serialize_bool(*b),
            Scalar::Int(i) => serializer.serialize_i64(*i),
            Scalar::Float(x) => serializer.serialize_f64(*x),
            Scalar::Str(s) => serializer.serialize_str(s),
        }
    }
}

struct ScalarVisitor;

impl<'de> Visitor<'de> for ScalarVisitor {
    type Value = Scalar;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a scalar (boolean, number or string)")
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<Scalar, E> {
        Ok(Scalar::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
        Ok(Scalar::Int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
        match i64::try_from(v) {
            Ok(i) => Ok(Scalar::Int(i)),
            Err(_) => Ok(Scalar::Float(v as f64)),
        }
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Scalar, E> {
        Ok(Scalar::Float(v))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
        Ok(Scalar::Str(v.into()))
    }

    fn visit_string<E: de::Error>(self, v: String) -> Result<Scalar, E> {
        Ok(Scalar::Str(v))
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(ScalarVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Enter,
    Line,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Entry,
    Exit,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Entry => "entry",
            Boundary::Exit => "exit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub method: String,
    #[serde(default)]
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vars: BTreeMap<String, Scalar>,
    #[serde(default)]
    pub test: String,
}

impl TraceEvent {
    pub fn enter(seq: u64, method: &str, file: &str, test: &str, vars: BTreeMap<String, Scalar>) -> Self {
        TraceEvent { seq, kind: EventKind::Enter, method: method.into(), file: file.into(), line: None, vars, test: test.into() }
    }

    pub fn exit(seq: u64, method: &str, file: &str, test: &str, vars: BTreeMap<String, Scalar>) -> Self {
        TraceEvent { seq, kind: EventKind::Exit, method: method.into(), file: file.into(), line: None, vars, test: test.into() }
    }

    pub fn line(seq: u64, method: &str, file: &str, test: &str, line: u32) -> Self {
        TraceEvent {
            seq,
            kind: EventKind::Line,
            method: method.into(),
            file: file.into(),
            line: Some(line),
            vars: BTreeMap::new(),
            test: test.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceLog {
    pub test: String,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("event seq {seq}: sequence number does not increase")]
    NonIncreasingSeq { seq: u64 },
    #[error("event seq {seq}: exit from `{method}` without a matching enter")]
    UnmatchedExit { seq: u64, method: String },
    #[error("event seq {seq}: exit from `{found}` while `{expected}` is the innermost open invocation")]
    MismatchedExit { seq: u64, expected: String, found: String },
    #[error("event seq {seq}: line event outside any invocation")]
    LineOutsideInvocation { seq: u64 },
    #[error("event seq {seq}: line event for `{found}` inside an invocation of `{expected}`")]
    LineInWrongMethod { seq: u64, expected: String, found: String },
    #[error("event seq {seq}: line event without a line number")]
    LineWithoutNumber { seq: u64 },
    #[error("event seq {seq}: invocation of `{method}` is never exited")]
    Unclosed { seq: u64, method: String },
}

impl TraceError {
    pub fn seq(&self) -> u64 {
        match *self {
            TraceError::NonIncreasingSeq { seq }
            | TraceError::UnmatchedExit { seq, .. }
            | TraceError::MismatchedExit { seq, .. }
            | TraceError::LineOutsideInvocation { seq }
            | TraceError::LineInWrongMethod { seq, .. }
            | TraceError::LineWithoutNumber { seq }
            | TraceError::Unclosed { seq, .. } => seq,
        }
    }
}

/// One step inside an invocation, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Line(u32),
    /// Index into the node's `children`.
    Call(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationNode {
    pub method: String,
    pub entry_vars: BTreeMap<String, Scalar>,
    pub exit_vars: BTreeMap<String, Scalar>,
    /// Lines hit by this invocation itself, not by its callees.
    pub covered_lines: BTreeSet<u32>,
    pub children: Vec<InvocationNode>,
    pub steps: Vec<Step>,
    pub enter_seq: u64,
}

impl InvocationNode {
    fn open(event: &TraceEvent) -> Self {
        InvocationNode {
            method: event.method.clone(),
            entry_vars: event.vars.clone(),
            exit_vars: BTreeMap::new(),
            covered_lines: BTreeSet::new(),
            children: Vec::new(),
            steps: Vec::new(),
            enter_seq: event.seq,
        }
    }
}

/// Rebuilds the invocation forest of a log (roots in execution order).
pub fn build_invocation_trees(log: &TraceLog) -> Result<Vec<InvocationNode>, TraceError> {
    let mut roots = Vec::new();
    let mut stack: Vec<InvocationNode> = Vec::new();
    let mut last_seq: Option<u64> = None;

    for event in &log.events {
        if last_seq.is_some_and(|s| event.seq <= s) {
            return Err(TraceError::NonIncreasingSeq { seq: event.seq });
        }
        last_seq = Some(event.seq);
        match event.kind {
            EventKind::Enter => stack.push(InvocationNode::open(event)),
            EventKind::Line => {
                let line = event.line.ok_or(TraceError::LineWithoutNumber { seq: event.seq })?;
                let top = stack.last_mut().ok_or(TraceError::LineOutsideInvocation { seq: event.seq })?;
                if top.method != event.method {
                    return Err(TraceError::LineInWrongMethod {
                        seq: event.seq,
                        expected: top.method.clone(),
                        found: event.method.clone(),
                    });
                }
                top.covered_lines.insert(line);
                top.steps.push(Step::Line(line));
            }
            EventKind::Exit => {
                let mut node = stack.pop().ok_or_else(|| TraceError::UnmatchedExit { seq: event.seq, method: event.method.clone() })?;
                if node.method != event.method {
                    return Err(TraceError::MismatchedExit { seq: event.seq, expected: node.method, found: event.method.clone() });
                }
                node.exit_vars = event.vars.clone();
                match stack.last_mut() {
                    Some(parent) => {
                        parent.steps.push(Step::Call(parent.children.len()));
                        parent.children.push(node);
                    }
                    None => roots.push(node),
                }
            }
        }
    }
    if let Some(open) = stack.into_iter().next_back() {
        return Err(TraceError::Unclosed { seq: open.enter_seq, method: open.method });
    }
    Ok(roots)
}

/// The structural content of one event: kind, method and line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonEvent {
    pub kind: EventKind,
    pub method: String,
    pub line: Option<u32>,
}

impl SkeletonEvent {
    pub fn of(event: &TraceEvent) -> Self {
        SkeletonEvent { kind: event.kind, method: event.method.clone(), line: event.line }
    }
}

/// Walks a forest back into the event skeleton it was built from.
pub fn flatten(nodes: &[InvocationNode]) -> Vec<SkeletonEvent> {
    fn walk(node: &InvocationNode, out: &mut Vec<SkeletonEvent>) {
        out.push(SkeletonEvent { kind: EventKind::Enter, method: node.method.clone(), line: None });
        for step in &node.steps {
            match *step {
                Step::Line(n) => out.push(SkeletonEvent { kind: EventKind::Line, method: node.method.clone(), line: Some(n) }),
                Step::Call(i) => walk(&node.children[i], out),
            }
        }
        out.push(SkeletonEvent { kind: EventKind::Exit, method: node.method.clone(), line: None });
    }
    let mut out = Vec::new();
    for node in nodes {
        walk(node, &mut out);
    }
    out
}

/// A pair produced by [`align_invocations`]; either side may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair<'a> {
    pub left: Option<&'a InvocationNode>,
    pub right: Option<&'a InvocationNode>,
    pub children: Vec<AlignedPair<'a>>,
}

/// Greedy, order-preserving alignment of two sibling lists.
///
/// Each left node is paired with the earliest not-yet-consumed right node of
/// the same method; right nodes skipped over become unmatched. Paired nodes
/// have their children aligned by the same rule.
pub fn align_invocations<'a>(left: &'a [InvocationNode], right: &'a [InvocationNode]) -> Vec<AlignedPair<'a>> {
    let mut out = Vec::new();
    let mut j = 0;
    for a in left {
        match right[j..].iter().position(|b| b.method == a.method) {
            Some(offset) => {
                for b in &right[j..j + offset] {
                    out.push(AlignedPair { left: None, right: Some(b), children: Vec::new() });
                }
                let b = &right[j + offset];
                out.push(AlignedPair { left: Some(a), right: Some(b), children: align_invocations(&a.children, &b.children) });
                j += offset + 1;
            }
            None => out.push(AlignedPair { left: Some(a), right: None, children: Vec::new() }),
        }
    }
    for b in &right[j..] {
        out.push(AlignedPair { left: None, right: Some(b), children: Vec::new() });
    }
    out
}

/// A covered line of a method.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinePoint {
    pub method: String,
    pub line: u32,
}

impl LinePoint {
    pub fn new(method: impl Into<String>, line: u32) -> Self {
        LinePoint { method: method.into(), line }
    }
}

/// A value observed for a variable at a method boundary.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValuePoint {
    pub method: String,
    pub boundary: Boundary,
    pub var: String,
    pub value: Scalar,
}

impl ValuePoint {
    pub fn new(method: impl Into<String>, boundary: Boundary, var: impl Into<String>, value: Scalar) -> Self {
        ValuePoint { method: method.into(), boundary, var: var.into(), value }
    }
}

/// Lines covered inside the given methods, occurrence counts discarded.
pub fn coverage_profile(log: &TraceLog, methods: &BTreeSet<String>, index: &MethodIndex) -> BTreeSet<LinePoint> {
    log.events
        .iter()
        .filter(|e| e.kind == EventKind::Line && methods.contains(&e.method))
        .filter_map(|e| {
            let line = e.line?;
            index.method_contains(&e.method, line).then(|| LinePoint::new(e.method.as_str(), line))
        })
        .collect()
}

/// Boundary values of the given methods, at-least-once semantics.
pub fn variable_profile(log: &TraceLog, methods: &BTreeSet<String>) -> BTreeSet<ValuePoint> {
    let mut out = BTreeSet::new();
    for event in log.events.iter().filter(|e| methods.contains(&e.method)) {
        let boundary = match event.kind {
            EventKind::Enter => Boundary::Entry,
            EventKind::Exit => Boundary::Exit,
            EventKind::Line => continue,
        };
        for (var, value) in &event.vars {
            out.insert(ValuePoint::new(event.method.as_str(), boundary, var.as_str(), value.clone()));
        }
    }
    out
}

/// Diff View class of one line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineClass {
    /// Covered by the failing test before and after the patch.
    Common,
    BaselineOnly,
    PatchedOnly,
    /// Changed by the patch, or covered by neither run.
    Other,
}

/// Classifies every line of the patch's modified methods.
///
/// The universe is the span of each modified method plus any line either run
/// covers inside it. Lines the patch removes or adds are `Other` regardless
/// of coverage.
pub fn diff_view(baseline: &TraceLog, patched: &TraceLog, patch: &Patch, index: &MethodIndex) -> BTreeMap<LinePoint, LineClass> {
    diff_view_over(baseline, patched, patch, &patch.modified_methods, index)
}

/// [`diff_view`] over an explicit method set, e.g. every method modified by
/// some candidate, so one patch's view also shows coverage changes in
/// methods it leaves untouched.
pub fn diff_view_over(
    baseline: &TraceLog,
    patched: &TraceLog,
    patch: &Patch,
    methods: &BTreeSet<String>,
    index: &MethodIndex,
) -> BTreeMap<LinePoint, LineClass> {
    let before = coverage_profile(baseline, methods, index);
    let after = coverage_profile(patched, methods, index);

    let mut changed = BTreeSet::new();
    for edit in &patch.edits {
        for hunk in &edit.hunks {
            for line in hunk.changed_lines() {
                let pos = if line.tag == LineTag::Added { line.new_line } else { line.old_line };
                if let Some(span) = index.innermost(&edit.path, pos) {
                    if methods.contains(&span.method) {
                        changed.insert(LinePoint::new(span.method.as_str(), pos));
                    }
                }
            }
        }
    }

    let mut universe: BTreeSet<LinePoint> = BTreeSet::new();
    for method in methods {
        for span in index.spans_of(method) {
            universe.extend((span.start..=span.end).map(|n| LinePoint::new(method.as_str(), n)));
        }
    }
    universe.extend(before.iter().cloned());
    universe.extend(after.iter().cloned());
    universe.extend(changed.iter().cloned());

    universe
        .into_iter()
        .map(|point| {
            let class = if changed.contains(&point) {
                LineClass::Other
            } else {
                match (before.contains(&point), after.contains(&point)) {
                    (true, true) => LineClass::Common,
                    (true, false) => LineClass::BaselineOnly,
                    (false, true) => LineClass::PatchedOnly,
                    (false, false) => LineClass::Other,
                }
            };
            (point, class)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::{format, vec};

    fn log(spec: &[(&str, &str, u32)]) -> TraceLog {
        let events = spec
            .iter()
            .enumerate()
            .map(|(i, &(kind, m, n))| {
                let seq = i as u64 + 1;
                match kind {
                    "enter" => TraceEvent::enter(seq, m, "F.x", "t", BTreeMap::new()),
                    "exit" => TraceEvent::exit(seq, m, "F.x", "t", BTreeMap::new()),
                    _ => TraceEvent::line(seq, m, "F.x", "t", n),
                }
            })
            .collect();
        TraceLog { test: "t".into(), events }
    }

    #[test]
    fn nested_calls_form_a_tree() {
        let l = log(&[("enter", "f", 0), ("line", "f", 2), ("enter", "g", 0), ("line", "g", 7), ("exit", "g", 0), ("exit", "f", 0)]);
        let roots = build_invocation_trees(&l).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].covered_lines, BTreeSet::from([2]));
        assert_eq!(roots[0].children[0].method, "g");
        assert_eq!(roots[0].children[0].covered_lines, BTreeSet::from([7]));
    }

    #[test]
    fn empty_log_has_no_roots() {
        assert!(build_invocation_trees(&TraceLog::default()).unwrap().is_empty());
    }

    #[test]
    fn repeated_calls_are_sibling_roots() {
        let l = log(&[("enter", "f", 0), ("line", "f", 1), ("exit", "f", 0), ("enter", "f", 0), ("line", "f", 3), ("exit", "f", 0)]);
        let roots = build_invocation_trees(&l).unwrap();
        let lines: Vec<_> = roots.iter().map(|r| r.covered_lines.clone()).collect();
        assert_eq!(lines, vec![BTreeSet::from([1]), BTreeSet::from([3])]);
    }

    #[test]
    fn structural_errors_name_the_event() {
        let unbalanced = log(&[("enter", "f", 0), ("exit", "g", 0)]);
        assert_eq!(build_invocation_trees(&unbalanced).unwrap_err().seq(), 2);
        let stray = log(&[("exit", "f", 0)]);
        assert!(matches!(build_invocation_trees(&stray), Err(TraceError::UnmatchedExit { seq: 1, .. })));
        let open = log(&[("enter", "f", 0), ("enter", "g", 0), ("exit", "g", 0)]);
        assert!(matches!(build_invocation_trees(&open), Err(TraceError::Unclosed { seq: 1, .. })));
        let outside = log(&[("line", "f", 3)]);
        assert!(matches!(build_invocation_trees(&outside), Err(TraceError::LineOutsideInvocation { seq: 1 })));
        let mut backwards = log(&[("enter", "f", 0), ("exit", "f", 0)]);
        backwards.events[1].seq = 1;
        assert!(matches!(build_invocation_trees(&backwards), Err(TraceError::NonIncreasingSeq { seq: 1 })));
    }

    fn names(pairs: &[AlignedPair<'_>]) -> Vec<(Option<String>, Option<String>)> {
        pairs.iter().map(|p| (p.left.map(|n| n.method.clone()), p.right.map(|n| n.method.clone()))).collect()
    }

    fn roots(methods: &[&str]) -> Vec<InvocationNode> {
        let mut spec = Vec::new();
        for m in methods {
            spec.push(("enter", *m, 0));
            spec.push(("exit", *m, 0));
        }
        build_invocation_trees(&log(&spec)).unwrap()
    }

    #[test]
    fn alignment_examples() {
        let s = |x: &str| Some(String::from(x));
        let (a, b) = (roots(&["f", "g"]), roots(&["f", "g"]));
        assert_eq!(names(&align_invocations(&a, &b)), vec![(s("f"), s("f")), (s("g"), s("g"))]);

        let (a, b) = (roots(&["f", "g", "f"]), roots(&["f", "f"]));
        assert_eq!(names(&align_invocations(&a, &b)), vec![(s("f"), s("f")), (s("g"), None), (s("f"), s("f"))]);

        let (a, b) = (roots(&[]), roots(&["f"]));
        assert_eq!(names(&align_invocations(&a, &b)), vec![(None, s("f"))]);
    }

    #[test]
    fn alignment_recurses_into_children() {
        let a = build_invocation_trees(&log(&[("enter", "f", 0), ("enter", "g", 0), ("exit", "g", 0), ("exit", "f", 0)])).unwrap();
        let b = build_invocation_trees(&log(&[
            ("enter", "f", 0),
            ("enter", "h", 0),
            ("exit", "h", 0),
            ("enter", "g", 0),
            ("exit", "g", 0),
            ("exit", "f", 0),
        ]))
        .unwrap();
        let pairs = align_invocations(&a, &b);
        assert_eq!(pairs.len(), 1);
        let s = |x: &str| Some(String::from(x));
        assert_eq!(names(&pairs[0].children), vec![(None, s("h")), (s("g"), s("g"))]);
    }

    #[test]
    fn variable_profile_keeps_every_observed_value() {
        let mut l = TraceLog { test: "t".into(), events: Vec::new() };
        for (i, x) in [3i64, 5].into_iter().enumerate() {
            let seq = i as u64 * 2;
            l.events.push(TraceEvent::enter(seq + 1, "f", "F.x", "t", BTreeMap::from([(String::from("x"), Scalar::Int(x))])));
            l.events.push(TraceEvent::exit(seq + 2, "f", "F.x", "t", BTreeMap::new()));
        }
        let profile = variable_profile(&l, &BTreeSet::from([String::from("f")]));
        assert_eq!(
            profile,
            BTreeSet::from([
                ValuePoint::new("f", Boundary::Entry, "x", Scalar::Int(3)),
                ValuePoint::new("f", Boundary::Entry, "x", Scalar::Int(5)),
            ])
        );
        let single = TraceLog { test: "t".into(), events: l.events[..2].to_vec() };
        assert_eq!(
            variable_profile(&single, &BTreeSet::from([String::from("f")])),
            BTreeSet::from([ValuePoint::new("f", Boundary::Entry, "x", Scalar::Int(3))])
        );
    }

    #[test]
    fn scalar_text_and_identity() {
        assert_eq!(format!("{}", Scalar::Float(1.25)), "1.25");
        assert_eq!(format!("{}", Scalar::Float(3.0)), "3.0");
        assert_ne!(Scalar::Float(3.0), Scalar::Int(3));
        assert_ne!(Scalar::Float(0.0), Scalar::Float(-0.0));
        assert_eq!(Scalar::Float(0.1 + 0.2), Scalar::Float(0.30000000000000004));
    }

    #[test]
    fn scalar_json() {
        let v: BTreeMap<String, Scalar> = serde_json::from_str(r#"{"a":3,"b":1.25,"c":true,"d":"x"}"#).unwrap();
        assert_eq!(v["a"], Scalar::Int(3));
        assert_eq!(v["b"], Scalar::Float(1.25));
        assert_eq!(v["c"], Scalar::Bool(true));
        assert_eq!(v["d"], Scalar::Str("x".into()));
        assert!(serde_json::from_str::<Scalar>("[1]").is_err());
        assert!(serde_json::from_str::<Scalar>("{}").is_err());
        assert!(serde_json::from_str::<Scalar>("null").is_err());
        assert_eq!(serde_json::to_string(&Scalar::Float(3.0)).unwrap(), "3.0");
    }

    #[test]
    fn unknown_event_fields_are_ignored() {
        let e: TraceEvent = serde_json::from_str(
            r#"{"seq":12,"kind":"line","method":"pkg.Cls#eval","file":"src/Cls.x","line":321,"test":"t1","thread":"main"}"#,
        )
        .unwrap();
        assert_eq!(e.line, Some(321));
        assert_eq!(e.kind, EventKind::Line);
    }
}
