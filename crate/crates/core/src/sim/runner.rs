use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::{prepare, Family, FamilySet, InteractiveQuestion};
use crate::bundle::{BugBundle, PatchId};
use crate::engine::{QuestionSlot, SessionState};

use super::report::{classify_remaining, AblationCurve, Bucket, BucketHistogram, SimulationReport};
use super::{below, rng, OracleProfile};

/// How the simulated developer picks the next question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Uniformly among the pending questions.
    #[default]
    UniformRandom,
    /// The first pending question in list order.
    FirstPending,
}

impl Policy {
    /// Index into `pending` of the question to ask next.
    pub fn pick(self, pending: &[&QuestionSlot], rng: &mut ChaCha8Rng) -> usize {
        match self {
            Policy::UniformRandom => below(rng, pending.len()),
            Policy::FirstPending => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Stream of the seeded generator; one per repeat.
    pub repeat: u64,
    pub policy: Policy,
    pub families: FamilySet,
    /// Explicit answers only; implied resolutions cost nothing.
    pub query_count: usize,
    pub remaining: BTreeSet<PatchId>,
    pub bucket: Bucket,
    /// Candidate count before the first answer and after each answer.
    pub trajectory: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("bundle `{bug_id}` has no reference fix; simulation needs one to answer questions")]
    MissingReference { bug_id: String },
    #[error("repeats must be at least 1")]
    NoRepeats,
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::MissingReference { .. } => "simulation_unsupported",
            SimError::NoRepeats => "bad_request",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub repeats: u32,
    pub seed: u64,
    pub families: FamilySet,
    pub policy: Policy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { repeats: 5, seed: 0, families: FamilySet::all(), policy: Policy::UniformRandom }
    }
}

/// A bundle prepared once for many simulated runs.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    bundle: &'a BugBundle,
    oracle: OracleProfile,
    questions: Vec<InteractiveQuestion>,
}

impl<'a> Simulator<'a> {
    pub fn new(bundle: &'a BugBundle) -> Result<Self, SimError> {
        let oracle = OracleProfile::from_bundle(bundle).ok_or_else(|| SimError::MissingReference { bug_id: bundle.bug_id.clone() })?;
        Ok(Simulator { bundle, oracle, questions: prepare(bundle, FamilySet::all()) })
    }

    pub fn oracle(&self) -> &OracleProfile {
        &self.oracle
    }

    /// The question list restricted to `families`.
    pub fn questions(&self, families: FamilySet) -> Vec<InteractiveQuestion> {
        self.questions.iter().filter(|q| families.contains(q.family())).cloned().collect()
    }

    pub fn run(&self, families: FamilySet, seed: u64, repeat: u64, policy: Policy) -> RunRecord {
        self.run_with(families, seed, repeat, policy, |pending, rng| policy.pick(pending, rng))
    }

    /// Runs one session to exhaustion with a custom question picker.
    pub fn run_with(
        &self,
        families: FamilySet,
        seed: u64,
        repeat: u64,
        policy: Policy,
        mut pick: impl FnMut(&[&QuestionSlot], &mut ChaCha8Rng) -> usize,
    ) -> RunRecord {
        let mut rng = rng(seed, repeat);
        let mut session = SessionState::new(String::new(), self.questions(families), self.bundle.patch_ids());
        let mut trajectory = alloc::vec![session.candidates.len()];
        loop {
            let pending: Vec<&QuestionSlot> = session.pending().collect();
            if pending.is_empty() {
                break;
            }
            let chosen = &pending[pick(&pending, &mut rng)].question;
            let (id, answer) = (chosen.id.clone(), self.oracle.answer(&chosen.attribute));
            session.answer(&id, answer).expect("picked question is pending");
            trajectory.push(session.candidates.len());
        }
        let remaining = session.candidates;
        RunRecord {
            seed,
            repeat,
            policy,
            families,
            query_count: session.answer_log.len(),
            bucket: classify_remaining(&remaining, self.bundle.labels.as_ref(), self.bundle.patches.len()),
            remaining,
            trajectory,
        }
    }
}

pub fn run_simulation(bundle: &BugBundle, seed: u64, policy: Policy, families: FamilySet) -> Result<RunRecord, SimError> {
    Ok(Simulator::new(bundle)?.run(families, seed, 0, policy))
}

/// Repeated runs plus ablation curves for every single family and for all
/// families together.
pub fn run_experiment(bundle: &BugBundle, config: &ExperimentConfig) -> Result<SimulationReport, SimError> {
    if config.repeats == 0 {
        return Err(SimError::NoRepeats);
    }
    let sim = Simulator::new(bundle)?;
    let initial_count = bundle.patches.len();
    let contains_correct = bundle.labels.as_ref().is_some_and(|l| !l.is_empty());
    let runs_for = |families: FamilySet| -> Vec<RunRecord> {
        (0..u64::from(config.repeats)).map(|i| sim.run(families, config.seed, i, config.policy)).collect()
    };

    let records = runs_for(config.families);
    let mut buckets = BucketHistogram::default();
    for r in &records {
        buckets.add(contains_correct, r.bucket);
    }
    let mean_query_count = records.iter().map(|r| r.query_count as f64).sum::<f64>() / records.len() as f64;

    let mut ablation = Vec::new();
    for families in [FamilySet::all()].into_iter().chain(Family::ALL.into_iter().map(FamilySet::only)) {
        let runs = if families == config.families { records.clone() } else { runs_for(families) };
        ablation.push(AblationCurve::from_runs(families, &runs, initial_count));
    }

    Ok(SimulationReport {
        bug_id: bundle.bug_id.clone(),
        families: config.families,
        policy: config.policy,
        seed: config.seed,
        repeats: config.repeats,
        initial_count,
        question_count: sim.questions(config.families).len(),
        contains_correct,
        records,
        mean_query_count,
        buckets,
        ablation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_fixture, running_example, FixtureSpec};

    #[test]
    fn running_example_always_isolates_p3() {
        let bundle = running_example();
        for seed in 0..20 {
            let r = run_simulation(&bundle, seed, Policy::UniformRandom, FamilySet::all()).unwrap();
            assert_eq!(r.remaining, BTreeSet::from([PatchId::from("p3")]));
            assert!(r.query_count <= 3);
            assert_eq!(r.bucket, Bucket::AllCorrect);
        }
    }

    #[test]
    fn no_questions_means_no_queries() {
        let bundle = running_example();
        let r = run_simulation(&bundle, 1, Policy::UniformRandom, FamilySet::from_iter([])).unwrap();
        assert_eq!(r.query_count, 0);
        assert_eq!(r.remaining, bundle.patch_ids());
        assert_eq!(r.bucket, Bucket::Eq100);
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let bundle = generate_fixture(&FixtureSpec::counts(12, 2, 3, 6), 5).unwrap();
        let a = run_simulation(&bundle, 42, Policy::UniformRandom, FamilySet::all()).unwrap();
        let b = run_simulation(&bundle, 42, Policy::UniformRandom, FamilySet::all()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_reference_is_refused() {
        let mut bundle = running_example();
        bundle.reference = None;
        assert!(matches!(run_simulation(&bundle, 0, Policy::UniformRandom, FamilySet::all()), Err(SimError::MissingReference { .. })));
    }

    #[test]
    fn experiment_aggregates_repeats() {
        let bundle = running_example();
        let report = run_experiment(&bundle, &ExperimentConfig::default()).unwrap();
        assert_eq!(report.records.len(), 5);
        assert_eq!(report.mean_query_count, 1.0);
        assert_eq!(report.buckets.con[&Bucket::AllCorrect], 5);
        assert_eq!(report.ablation.len(), 4);
        assert!(report.ablation.iter().all(|c| c.points[0].fraction_remaining == 1.0));
    }

    #[test]
    fn trace_only_runs_keep_a_superset() {
        let bundle = running_example();
        let report_all = run_simulation(&bundle, 3, Policy::UniformRandom, FamilySet::all()).unwrap();
        let report_t = run_simulation(&bundle, 3, Policy::UniformRandom, FamilySet::only(Family::ExecutionTrace)).unwrap();
        assert!(report_all.remaining.is_subset(&report_t.remaining));
    }
}
