//! Simulator properties over generated fixtures.

use std::collections::BTreeSet;

use inpafer_core::attributes::prepare;
use inpafer_core::sim::{generate_fixture, run_experiment, ExperimentConfig, FixtureSpec, OracleMode, OracleProfile, Policy, Simulator};
use inpafer_core::{BugBundle, Family, FamilySet, PatchId};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = FixtureSpec> {
    (2usize..16, 0usize..4, 0usize..8, 0usize..4, any::<bool>())
        .prop_map(|(n, m, t, v, correct)| FixtureSpec { correct_present: correct, ..FixtureSpec::counts(n, m, t, v) })
}

fn profile_matches(bundle: &BugBundle) -> BTreeSet<PatchId> {
    let oracle = OracleProfile::from_bundle(bundle).unwrap();
    let qs = prepare(bundle, FamilySet::all());
    bundle.patch_ids().into_iter().filter(|p| qs.iter().all(|q| q.patches.contains(p) == oracle.holds(&q.attribute))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn runs_keep_matches_respect_bounds_and_refine(spec in spec(), seed in any::<u64>(), run_seed in any::<u64>()) {
        let bundle = generate_fixture(&spec, seed).unwrap();
        let matching = profile_matches(&bundle);
        prop_assert!(!matching.is_empty());
        let sim = Simulator::new(&bundle).unwrap();
        let questions = sim.questions(FamilySet::all()).len();
        let all = sim.run(FamilySet::all(), run_seed, 0, Policy::UniformRandom);
        prop_assert_eq!(&all.remaining, &matching);
        prop_assert!(all.query_count <= questions.min(bundle.patches.len() - all.remaining.len()));
        for family in Family::ALL {
            let one = sim.run(FamilySet::only(family), run_seed, 0, Policy::UniformRandom);
            prop_assert!(matching.is_subset(&one.remaining));
            prop_assert!(all.remaining.is_subset(&one.remaining));
        }
        prop_assert_eq!(sim.run(FamilySet::all(), run_seed, 0, Policy::UniformRandom), all);
    }

    #[test]
    fn unsatisfiable_oracles_still_terminate_within_bounds(spec in spec(), seed in any::<u64>()) {
        let spec = FixtureSpec { correct_present: false, oracle: Some(OracleMode::Random), ..spec };
        let bundle = generate_fixture(&spec, seed).unwrap();
        let sim = Simulator::new(&bundle).unwrap();
        let r = sim.run(FamilySet::all(), seed, 1, Policy::UniformRandom);
        prop_assert!(!r.remaining.is_empty());
        prop_assert!(r.query_count <= sim.questions(FamilySet::all()).len());
        prop_assert!(r.query_count <= bundle.patches.len() - r.remaining.len());
        prop_assert_eq!(r.trajectory.len(), r.query_count + 1);
    }
}

#[test]
fn experiments_are_deterministic_per_seed() {
    let bundle = generate_fixture(&FixtureSpec::counts(14, 3, 6, 3), 11).unwrap();
    let config = ExperimentConfig { seed: 99, ..ExperimentConfig::default() };
    let a = run_experiment(&bundle, &config).unwrap();
    let b = run_experiment(&bundle, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 5);
    let mean = a.records.iter().map(|r| r.query_count as f64).sum::<f64>() / 5.0;
    assert_eq!(a.mean_query_count, mean);
}
