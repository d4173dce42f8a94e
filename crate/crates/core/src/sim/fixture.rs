//! Synthetic bug bundles.
//!
//! Fixtures are described as plans (which patch edits which method, covers
//! which line, records which value) and then realized into diffs and traces,
//! so the questions a fixture yields are known before it is built.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::attributes::{prepare, Family, FamilySet};
use crate::bundle::{BugBundle, Diagnostic, MethodSpan, Patch, PatchId, ReferenceFix};
use crate::diff::{FileEdit, Hunk, HunkLine, LineTag};
use crate::trace::{Scalar, TraceEvent, TraceLog};

use super::{below, rng};

const TOOLS: [&str; 3] = ["jGenProg", "jKali", "Nopol"];

/// Where the simulated developer's ground truth comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// One candidate is labelled correct and the reference equals it.
    Correct,
    /// No candidate is correct but one behaves exactly like the reference.
    Lookalike,
    /// The reference behaves independently of every candidate; answers may
    /// contradict each other.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    RunningExample,
    Math41,
}

impl Scenario {
    fn counts(self) -> [usize; 4] {
        match self {
            Scenario::RunningExample => [3, 2, 1, 0],
            Scenario::Math41 => [48, 3, 28, 2],
        }
    }
}

/// What to generate: the candidate count and the number of questions of each
/// family the bundle must yield.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub patches: usize,
    #[serde(default)]
    pub modified_method: usize,
    #[serde(default)]
    pub execution_trace: usize,
    #[serde(default)]
    pub variable_value: usize,
    #[serde(default = "yes")]
    pub correct_present: bool,
    #[serde(default)]
    pub oracle: Option<OracleMode>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub bug_id: Option<String>,
}

fn yes() -> bool {
    true
}

impl FixtureSpec {
    pub fn counts(patches: usize, modified_method: usize, execution_trace: usize, variable_value: usize) -> Self {
        FixtureSpec {
            patches,
            modified_method,
            execution_trace,
            variable_value,
            correct_present: true,
            oracle: None,
            scenario: None,
            bug_id: None,
        }
    }

    pub fn scenario(scenario: Scenario) -> Self {
        let [n, m, t, v] = scenario.counts();
        FixtureSpec { scenario: Some(scenario), ..FixtureSpec::counts(n, m, t, v) }
    }

    pub fn question_count(&self) -> usize {
        self.modified_method + self.execution_trace + self.variable_value
    }

    /// `Correct` when a correct candidate is present, `Lookalike` otherwise.
    pub fn oracle_mode(&self) -> OracleMode {
        self.oracle.unwrap_or(if self.correct_present { OracleMode::Correct } else { OracleMode::Lookalike })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    #[error("a fixture needs at least one patch")]
    NoPatches,
    #[error("{questions} questions need at least two patches")]
    TooFewPatches { questions: usize },
    #[error("oracle mode {mode:?} cannot be combined with correct_present = {correct_present}")]
    IncompatibleOracle { mode: OracleMode, correct_present: bool },
    #[error("scenario {scenario:?} fixes the counts to {expected:?}")]
    ScenarioMismatch { scenario: Scenario, expected: [usize; 4] },
    #[error("generated bundle is invalid: {}", .0.first().map(|d| d.to_string()).unwrap_or_default())]
    InvalidBundle(Vec<Diagnostic>),
}

// ---------------------------------------------------------------------------
// plans

/// One method call: entry values, covered lines, exit values.
#[derive(Debug, Clone, Default)]
struct CallPlan {
    entry: BTreeMap<String, Scalar>,
    lines: BTreeSet<u32>,
    exit: BTreeMap<String, Scalar>,
}

impl CallPlan {
    fn is_empty(&self) -> bool {
        self.entry.is_empty() && self.lines.is_empty() && self.exit.is_empty()
    }
}

/// A run of the failing test: one call of the root method with nested
/// calls of other methods, in method-map order.
#[derive(Debug, Clone, Default)]
struct RunPlan {
    root: CallPlan,
    nested: BTreeMap<usize, CallPlan>,
}

/// One replaced line.
#[derive(Debug, Clone)]
struct LineEdit {
    line: u32,
    old: String,
    new: String,
}

struct Plan {
    bug_id: String,
    test: String,
    file: String,
    methods: Vec<MethodSpan>,
    root: usize,
    patches: Vec<(String, Option<String>, Vec<LineEdit>, RunPlan)>,
    baseline: RunPlan,
    reference: Option<(Vec<LineEdit>, RunPlan)>,
    labels: BTreeSet<String>,
}

impl Plan {
    fn edits(&self, edits: &[LineEdit]) -> Vec<FileEdit> {
        let mut sorted = edits.to_vec();
        sorted.sort_by_key(|e| e.line);
        let hunks = sorted
            .into_iter()
            .map(|e| Hunk::from_lines(e.line, e.line, vec![HunkLine::new(LineTag::Removed, e.old), HunkLine::new(LineTag::Added, e.new)]))
            .collect();
        vec![FileEdit { path: self.file.clone(), hunks }]
    }

    fn trace(&self, run: &RunPlan) -> TraceLog {
        let mut rec = Recorder::new(&self.file, &self.test);
        let root = &self.methods[self.root].method;
        rec.call(
            root,
            &run.root.entry,
            &run.root.lines,
            |rec| {
                for (i, call) in &run.nested {
                    if !call.is_empty() {
                        rec.call(&self.methods[*i].method, &call.entry, &call.lines, |_| {}, &call.exit);
                    }
                }
            },
            &run.root.exit,
        );
        rec.finish()
    }

    fn realize(self) -> Result<BugBundle, FixtureError> {
        let patches = self.patches.iter().map(|(id, tool, edits, _)| Patch::new(id.as_str(), tool.clone(), self.edits(edits))).collect();
        let patch_traces = self.patches.iter().map(|(id, _, _, run)| (PatchId::new(id.as_str()), self.trace(run))).collect();
        let reference = self.reference.as_ref().map(|(edits, run)| ReferenceFix { edits: self.edits(edits), run: self.trace(run) });
        let bundle = BugBundle {
            bug_id: self.bug_id.clone(),
            failing_tests: vec![self.test.clone()],
            patches,
            method_map: self.methods.clone(),
            baseline_trace: self.trace(&self.baseline),
            patch_traces,
            reference,
            labels: Some(self.labels.iter().map(|l| PatchId::new(l.as_str())).collect()),
        };
        bundle.finalize().map_err(FixtureError::InvalidBundle)
    }
}

/// Emits well-nested trace events with increasing sequence numbers.
struct Recorder {
    file: String,
    test: String,
    seq: u64,
    events: Vec<TraceEvent>,
}

impl Recorder {
    fn new(file: &str, test: &str) -> Self {
        Recorder { file: file.into(), test: test.into(), seq: 0, events: Vec::new() }
    }

    fn next(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn call(
        &mut self,
        method: &str,
        entry: &BTreeMap<String, Scalar>,
        lines: &BTreeSet<u32>,
        body: impl FnOnce(&mut Self),
        exit: &BTreeMap<String, Scalar>,
    ) {
        let seq = self.next();
        self.events.push(TraceEvent::enter(seq, method, &self.file, &self.test, entry.clone()));
        for &line in lines {
            let seq = self.next();
            self.events.push(TraceEvent::line(seq, method, &self.file, &self.test, line));
        }
        body(self);
        let seq = self.next();
        self.events.push(TraceEvent::exit(seq, method, &self.file, &self.test, exit.clone()));
    }

    fn finish(self) -> TraceLog {
        TraceLog { test: self.test, events: self.events }
    }
}

fn vars(pairs: &[(&str, Scalar)]) -> BTreeMap<String, Scalar> {
    pairs.iter().map(|(k, v)| (String::from(*k), v.clone())).collect()
}

fn lines(xs: impl IntoIterator<Item = u32>) -> BTreeSet<u32> {
    xs.into_iter().collect()
}

fn coin(rng: &mut ChaCha8Rng) -> bool {
    rng.next_u32() & 1 == 1
}

/// Random subset of `0..n` that is neither empty nor everything (`n >= 2`).
fn proper_subset(rng: &mut ChaCha8Rng, n: usize) -> BTreeSet<usize> {
    loop {
        let s: BTreeSet<usize> = (0..n).filter(|_| coin(rng)).collect();
        if !s.is_empty() && s.len() < n {
            return s;
        }
    }
}

fn patch_name(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(2);
    format!("p{:0width$}", i + 1)
}

// ---------------------------------------------------------------------------
// running example

const VARIANCE: &str = "src/main/java/org/apache/commons/math/stat/descriptive/moment/Variance.java";
const EVAL: usize = 0;
const EVALUATE: usize = 1;

fn variance_methods() -> Vec<MethodSpan> {
    vec![MethodSpan::new(VARIANCE, "Variance#eval", 313, 329), MethodSpan::new(VARIANCE, "Variance#evaluate", 340, 360)]
}

fn weighted_run(short_call: bool, var: Scalar) -> RunPlan {
    let length = vars(&[("length", Scalar::Int(6))]);
    let mut nested = BTreeMap::new();
    nested.insert(
        EVALUATE,
        CallPlan {
            entry: vars(&[("begin", Scalar::Int(0)), ("length", Scalar::Int(6))]),
            lines: lines([346, 348, 349]),
            exit: vars(&[("var", var)]),
        },
    );
    let mut root = CallPlan { entry: length, lines: lines([320, 322, 324]), exit: BTreeMap::new() };
    if short_call {
        // the early-return branch shows up as an extra covered line
        root.lines.insert(321);
    }
    RunPlan { root, nested }
}

fn running_plan(values: bool) -> Plan {
    let guard = |new: &str| LineEdit { line: 320, old: "if (length == 1) {".into(), new: new.into() };
    let fix = LineEdit {
        line: 348,
        old: "for (int i = 0; i < weights.length; i++) {".into(),
        new: "for (int i = begin; i < begin + length; i++) {".into(),
    };
    let wrong = if values { Scalar::Float(0.75) } else { Scalar::Float(1.25) };
    Plan {
        bug_id: "Math-41".into(),
        test: "org.apache.commons.math.stat.descriptive.moment.VarianceTest#testEvaluateArraySegmentWeighted".into(),
        file: VARIANCE.into(),
        methods: variance_methods(),
        root: EVAL,
        patches: vec![
            ("p1".into(), Some("jGenProg".into()), vec![guard("if (length == 5 && length != 0) {")], weighted_run(true, wrong.clone())),
            ("p2".into(), Some("Nopol".into()), vec![guard("if ((length & 1) == 1) {")], weighted_run(true, wrong.clone())),
            ("p3".into(), Some("jKali".into()), vec![fix.clone()], weighted_run(false, Scalar::Float(1.25))),
        ],
        baseline: weighted_run(true, wrong),
        reference: Some((vec![fix], weighted_run(false, Scalar::Float(1.25)))),
        labels: BTreeSet::from(["p3".into()]),
    }
}

/// Three candidates for the weighted-variance bug; `p3` is correct.
///
/// Questions: two modified-method questions (`Variance#eval` for p1/p2,
/// `Variance#evaluate` for p3) and one execution-trace question (line 321 of
/// `Variance#eval`, covered by p1/p2). Every recorded value is shared by all
/// candidates.
pub fn running_example() -> BugBundle {
    running_plan(false).realize().expect("running example is valid")
}

/// The running example with p1/p2 returning 0.75 from `Variance#evaluate`,
/// which adds two variable-value questions.
pub fn running_example_with_values() -> BugBundle {
    running_plan(true).realize().expect("running example is valid")
}

// ---------------------------------------------------------------------------
// 48-candidate variance bug

/// 48 candidates in three groups: `A` (8) and `B` (12) edit `Variance#eval`,
/// `C` (28) edit `Variance#evaluate` or `Variance#clear`. The last candidate,
/// `p48`, is the correct one. The seed only varies the tool names and ten
/// coverage sets confined to `A ∪ B`.
///
/// With the oracle answering "no" for line 321 and "yes" for line 323, then
/// "yes" for lines 357, 358 and 359 of `Variance#evaluate`, five answers
/// isolate `p48`.
pub fn math41(seed: u64) -> BugBundle {
    math41_plan(seed).realize().expect("math41 fixture is valid")
}

fn math41_plan(seed: u64) -> Plan {
    const N: usize = 48;
    const EVAL: usize = 1;
    const EVALUATE: usize = 2;
    let mut rng = rng(seed, 0);
    let a = 0..8;
    let b = 8..20;
    let c = |k: usize| 20 + k;

    // coverage sets per (method, line), as sets of patch indices
    let mut et: Vec<(usize, u32, BTreeSet<usize>)> = Vec::new();
    et.push((EVAL, 321, a.clone().collect()));
    et.push((EVAL, 323, (20..N).collect()));
    let a_or_c: BTreeSet<usize> = a.clone().chain(20..N).collect();
    et.push((EVAL, 324, a_or_c.clone()));
    for line in 346..=350 {
        et.push((EVALUATE, line, a_or_c.clone()));
    }
    let ab_lines = [(EVAL, 325), (EVAL, 326), (EVAL, 327), (EVAL, 328)].into_iter().chain((351..=356).map(|l| (EVALUATE, l)));
    for (m, line) in ab_lines {
        let set = loop {
            let s: BTreeSet<usize> = (0..20).filter(|_| coin(&mut rng)).collect();
            if s.iter().any(|i| b.contains(i)) {
                break s;
            }
        };
        et.push((m, line, set));
    }
    let ranges: [(u32, BTreeSet<usize>); 10] = [
        (357, (21..=27).map(c).collect()),
        (358, [26, 27].map(c).into()),
        (359, [27].map(c).into()),
        (360, (0..=13).map(c).collect()),
        (361, (14..=27).map(c).collect()),
        (362, (0..=6).map(c).collect()),
        (363, (7..=13).map(c).collect()),
        (364, [0].map(c).into()),
        (365, (10..=20).map(c).collect()),
        (366, (5..=9).map(c).collect()),
    ];
    for (line, set) in ranges {
        et.push((EVALUATE, line, set));
    }

    let tool_shift = below(&mut rng, TOOLS.len());
    let mut patches = Vec::new();
    for i in 0..N {
        let id = patch_name(i, N);
        let edit = if i < 20 {
            LineEdit { line: 320, old: "if (length == 1) {".into(), new: format!("if (length == 1 && weights.length > {i}) {{") }
        } else if i < c(6) {
            LineEdit { line: 305, old: "moment.clear();".into(), new: format!("moment.clear(); // reset {i}") }
        } else {
            LineEdit { line: 345, old: "double sumWts = 0;".into(), new: format!("double sumWts = {}.0 * 0;", i) }
        };
        let mut run = RunPlan::default();
        run.root.lines = lines([320, 322]);
        if b.contains(&i) || (c(0)..=c(3)).contains(&i) {
            run.root.entry.insert("length".into(), Scalar::Int(6));
        }
        let evaluate = run.nested.entry(EVALUATE).or_default();
        evaluate.lines = lines([341, 345]);
        if i >= c(20) {
            evaluate.exit.insert("var".into(), Scalar::Float(1.25));
        }
        for (m, line, set) in &et {
            if set.contains(&i) {
                let call = if *m == EVAL { &mut run.root } else { run.nested.entry(*m).or_default() };
                call.lines.insert(*line);
            }
        }
        patches.push((id, Some(TOOLS[(i + tool_shift) % TOOLS.len()].to_string()), vec![edit], run));
    }
    let (_, _, star_edits, star_run) = patches[N - 1].clone();

    let mut baseline = RunPlan::default();
    baseline.root.lines = lines([320, 321, 322]);
    baseline.root.entry.insert("length".into(), Scalar::Int(6));

    Plan {
        bug_id: "Math-41".into(),
        test: "org.apache.commons.math.stat.descriptive.moment.VarianceTest#testEvaluateArraySegmentWeighted".into(),
        file: VARIANCE.into(),
        methods: vec![
            MethodSpan::new(VARIANCE, "Variance#clear", 300, 310),
            MethodSpan::new(VARIANCE, "Variance#eval", 313, 329),
            MethodSpan::new(VARIANCE, "Variance#evaluate", 340, 380),
        ],
        root: EVAL,
        patches,
        baseline,
        reference: Some((star_edits, star_run)),
        labels: BTreeSet::from([patch_name(N - 1, N)]),
    }
}

// ---------------------------------------------------------------------------
// random fixtures

/// A random bundle with exactly the requested question counts.
///
/// Every patch edits `Subject#run`; each modified-method question is a
/// helper `Subject#step<i>` edited by a random proper subset of patches.
/// Execution-trace and variable-value questions are lines and exit values
/// spread round-robin over those methods, each with its own random proper
/// subset.
pub fn generate_fixture(spec: &FixtureSpec, seed: u64) -> Result<BugBundle, FixtureError> {
    let counts = [spec.patches, spec.modified_method, spec.execution_trace, spec.variable_value];
    if let Some(scenario) = spec.scenario {
        if counts != scenario.counts() {
            return Err(FixtureError::ScenarioMismatch { scenario, expected: scenario.counts() });
        }
    }
    let mode = spec.oracle_mode();
    if (mode == OracleMode::Correct) != spec.correct_present {
        return Err(FixtureError::IncompatibleOracle { mode, correct_present: spec.correct_present });
    }
    let plan = match spec.scenario {
        Some(Scenario::RunningExample) => {
            if mode != OracleMode::Correct {
                return Err(FixtureError::IncompatibleOracle { mode, correct_present: spec.correct_present });
            }
            running_plan(false)
        }
        Some(Scenario::Math41) => {
            if mode != OracleMode::Correct {
                return Err(FixtureError::IncompatibleOracle { mode, correct_present: spec.correct_present });
            }
            math41_plan(seed)
        }
        None => random_plan(spec, mode, seed)?,
    };
    let bundle = plan.realize()?;
    let questions = prepare(&bundle, FamilySet::all());
    let per_family = |f: Family| questions.iter().filter(|q| q.family() == f).count();
    assert_eq!(
        [per_family(Family::ModifiedMethod), per_family(Family::ExecutionTrace), per_family(Family::VariableValue)],
        [spec.modified_method, spec.execution_trace, spec.variable_value],
        "fixture plan and realized questions disagree"
    );
    Ok(bundle)
}

fn random_plan(spec: &FixtureSpec, mode: OracleMode, seed: u64) -> Result<Plan, FixtureError> {
    let n = spec.patches;
    if n == 0 {
        return Err(FixtureError::NoPatches);
    }
    if n < 2 && spec.question_count() > 0 {
        return Err(FixtureError::TooFewPatches { questions: spec.question_count() });
    }
    let mut rng = rng(seed, 0);
    let k = spec.modified_method;
    let slots = k + 1;

    // method 0 is the root; per method: signature, patch line, trace lines, end
    let mut trace_lines = vec![0u32; slots];
    for j in 0..spec.execution_trace {
        trace_lines[j % slots] += 1;
    }
    let mut methods = Vec::with_capacity(slots);
    let mut start = 10;
    for (i, count) in trace_lines.iter().enumerate() {
        let name = if i == 0 { "Subject#run".to_string() } else { format!("Subject#step{i}") };
        let end = start + 2 + count;
        methods.push(MethodSpan::new("src/main/java/Subject.java", name, start, end));
        start = end + 3;
    }
    let patch_line = |m: usize| methods[m].start + 1;

    let mm: Vec<BTreeSet<usize>> = (0..k).map(|_| proper_subset(&mut rng, n)).collect();
    let et: Vec<(usize, u32, BTreeSet<usize>)> = (0..spec.execution_trace)
        .map(|j| (j % slots, methods[j % slots].start + 2 + (j / slots) as u32, proper_subset(&mut rng, n)))
        .collect();
    let vv: Vec<(usize, String, BTreeSet<usize>)> =
        (0..spec.variable_value).map(|j| (j % slots, format!("v{j}"), proper_subset(&mut rng, n))).collect();
    let value_of = |j: usize| Scalar::Int(j as i64);

    let edit_of = |m: usize, tag: &str| LineEdit {
        line: patch_line(m),
        old: format!("state = step(state, {m});"),
        new: format!("state = step(state, {m}) + adjust(\"{tag}\");"),
    };
    let run_of = |edited: &BTreeSet<usize>, covered: &dyn Fn(usize) -> bool, valued: &dyn Fn(usize) -> bool| {
        let mut run = RunPlan::default();
        run.root.entry.insert("n".into(), Scalar::Int(n as i64));
        run.root.lines = lines([methods[0].start, patch_line(0)]);
        for m in edited.iter().filter(|&&m| m > 0) {
            run.nested.entry(*m).or_default();
        }
        for (j, (m, line, _)) in et.iter().enumerate() {
            if covered(j) {
                let call = if *m == 0 { &mut run.root } else { run.nested.entry(*m).or_default() };
                call.lines.insert(*line);
            }
        }
        for (j, (m, var, _)) in vv.iter().enumerate() {
            if valued(j) {
                let call = if *m == 0 { &mut run.root } else { run.nested.entry(*m).or_default() };
                call.exit.insert(var.clone(), value_of(j));
            }
        }
        run
    };

    let mut patches = Vec::with_capacity(n);
    for p in 0..n {
        let id = patch_name(p, n);
        let edited: BTreeSet<usize> = core::iter::once(0).chain((0..k).filter(|&i| mm[i].contains(&p)).map(|i| i + 1)).collect();
        let edits: Vec<LineEdit> = edited.iter().map(|&m| edit_of(m, &id)).collect();
        let run = run_of(&edited, &|j| et[j].2.contains(&p), &|j| vv[j].2.contains(&p));
        patches.push((id, Some(TOOLS[p % TOOLS.len()].to_string()), edits, run));
    }

    let star = below(&mut rng, n);
    let (reference, labels) = match mode {
        OracleMode::Correct => ((patches[star].2.clone(), patches[star].3.clone()), BTreeSet::from([patches[star].0.clone()])),
        OracleMode::Lookalike => {
            let edited: BTreeSet<usize> = core::iter::once(0).chain((0..k).filter(|&i| mm[i].contains(&star)).map(|i| i + 1)).collect();
            let edits = edited.iter().map(|&m| edit_of(m, "reference")).collect();
            ((edits, patches[star].3.clone()), BTreeSet::new())
        }
        OracleMode::Random => {
            let edited: BTreeSet<usize> = core::iter::once(0).chain((1..=k).filter(|_| coin(&mut rng))).collect();
            let covered: Vec<bool> = (0..et.len()).map(|_| coin(&mut rng)).collect();
            let valued: Vec<bool> = (0..vv.len()).map(|_| coin(&mut rng)).collect();
            let edits = edited.iter().map(|&m| edit_of(m, "reference")).collect();
            ((edits, run_of(&edited, &|j| covered[j], &|j| valued[j])), BTreeSet::new())
        }
    };

    let mut baseline = RunPlan::default();
    baseline.root.entry.insert("n".into(), Scalar::Int(n as i64));
    baseline.root.lines = lines([methods[0].start, patch_line(0)]);

    Ok(Plan {
        bug_id: spec.bug_id.clone().unwrap_or_else(|| format!("synthetic-{n}-{seed}")),
        test: "SubjectTest#testRun".into(),
        file: "src/main/java/Subject.java".into(),
        methods,
        root: 0,
        patches,
        baseline,
        reference: Some(reference),
        labels,
    })
}
