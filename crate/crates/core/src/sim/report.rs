use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::attributes::FamilySet;
use crate::bundle::PatchId;

use super::runner::{Policy, RunRecord};

/// Outcome bucket of a finished run, by what is left of the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    None,
    AllCorrect,
    Le20,
    Le40,
    Gt40,
    Eq100,
}

impl Bucket {
    pub const ALL: [Bucket; 6] = [Bucket::None, Bucket::AllCorrect, Bucket::Le20, Bucket::Le40, Bucket::Gt40, Bucket::Eq100];

    pub fn name(self) -> &'static str {
        match self {
            Bucket::None => "none",
            Bucket::AllCorrect => "all_correct",
            Bucket::Le20 => "le20",
            Bucket::Le40 => "le40",
            Bucket::Gt40 => "gt40",
            Bucket::Eq100 => "eq100",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Buckets the surviving candidates.
///
/// `None` when nothing survives; `AllCorrect` when only labelled correct
/// patches survive; otherwise the share of the initial candidates
/// left: `Eq100` when nothing was filtered, then `Le20` (≤ 20 %), `Le40`
/// (≤ 40 %) and `Gt40`.
pub fn classify_remaining(remaining: &BTreeSet<PatchId>, labels: Option<&BTreeSet<PatchId>>, initial_count: usize) -> Bucket {
    if remaining.is_empty() {
        return Bucket::None;
    }
    if let Some(correct) = labels {
        if remaining.is_subset(correct) {
            return Bucket::AllCorrect;
        }
    }
    let left = remaining.len();
    if left >= initial_count {
        Bucket::Eq100
    } else if left * 5 <= initial_count {
        Bucket::Le20
    } else if left * 5 <= initial_count * 2 {
        Bucket::Le40
    } else {
        Bucket::Gt40
    }
}

/// Run counts per bucket, split by whether the bug has a correct candidate.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BucketHistogram {
    pub con: BTreeMap<Bucket, usize>,
    pub not_con: BTreeMap<Bucket, usize>,
}

impl BucketHistogram {
    pub fn add(&mut self, contains_correct: bool, bucket: Bucket) {
        let side = if contains_correct { &mut self.con } else { &mut self.not_con };
        *side.entry(bucket).or_default() += 1;
    }

    pub fn merge(&mut self, other: &BucketHistogram) {
        for (b, n) in &other.con {
            *self.con.entry(*b).or_default() += n;
        }
        for (b, n) in &other.not_con {
            *self.not_con.entry(*b).or_default() += n;
        }
    }

    pub fn total(&self) -> usize {
        self.con.values().chain(self.not_con.values()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub answered_queries: usize,
    pub fraction_remaining: f64,
}

/// Mean share of candidates left after k answers, for one family subset.
/// Runs that finished earlier contribute their final share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCurve {
    pub families: FamilySet,
    pub points: Vec<CurvePoint>,
}

impl AblationCurve {
    pub fn from_runs(families: FamilySet, runs: &[RunRecord], initial_count: usize) -> Self {
        let longest = runs.iter().map(|r| r.trajectory.len()).max().unwrap_or(1);
        let points = (0..longest)
            .map(|k| {
                let sum: f64 = runs
                    .iter()
                    .map(|r| {
                        let left = r.trajectory.get(k).or(r.trajectory.last()).copied().unwrap_or(initial_count);
                        left as f64 / initial_count.max(1) as f64
                    })
                    .sum();
                CurvePoint { answered_queries: k, fraction_remaining: if runs.is_empty() { 1.0 } else { sum / runs.len() as f64 } }
            })
            .collect();
        AblationCurve { families, points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub bug_id: String,
    pub families: FamilySet,
    pub policy: Policy,
    pub seed: u64,
    pub repeats: u32,
    pub initial_count: usize,
    pub question_count: usize,
    pub contains_correct: bool,
    pub records: Vec<RunRecord>,
    pub mean_query_count: f64,
    pub buckets: BucketHistogram,
    pub ablation: Vec<AblationCurve>,
}
