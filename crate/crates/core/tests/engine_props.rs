//! Update-rule and question-building properties, checked against brute-force
//! set arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use inpafer_core::attributes::{build_questions, extract_trace_attrs, prepare, AttributeMap};
use inpafer_core::engine::{Answer, SessionState};
use inpafer_core::sim::{generate_fixture, FixtureSpec};
use inpafer_core::trace::LinePoint;
use inpafer_core::{Attribute, Family, FamilySet, InteractiveQuestion, PatchId, QuestionId};
use proptest::prelude::*;

fn pid(i: usize) -> PatchId {
    PatchId::new(format!("p{i}"))
}

/// Up to ten raw attributes over `n` patches (before pruning), as bitmasks.
fn small_instance() -> impl Strategy<Value = (usize, Vec<u32>)> {
    (1usize..=6).prop_flat_map(|n| (Just(n), prop::collection::vec(0u32..(1 << n), 0..=10)))
}

fn questions_of(n: usize, masks: &[u32]) -> (BTreeSet<PatchId>, Vec<InteractiveQuestion>) {
    let all: BTreeSet<PatchId> = (0..n).map(pid).collect();
    let mut map = AttributeMap::new();
    for (j, mask) in masks.iter().enumerate() {
        let set: BTreeSet<PatchId> = (0..n).filter(|i| mask & (1 << i) != 0).map(pid).collect();
        map.insert(Attribute::ExecutionTrace { method: "C#m".into(), line: j as u32 + 1 }, set);
    }
    let qs = build_questions([&map], &all, FamilySet::all());
    (all, qs)
}

/// Answers pending questions in the order given by `picks` until none are
/// left, checking the set law on every step.
fn exhaust(state: &mut SessionState, valuation: &dyn Fn(&InteractiveQuestion) -> bool, picks: &[usize]) -> Result<(), TestCaseError> {
    let mut k = 0;
    while state.pending_count() > 0 {
        let pending: Vec<QuestionId> = state.pending().map(|s| s.question.id.clone()).collect();
        let id = pending[picks.get(k).copied().unwrap_or(0) % pending.len()].clone();
        k += 1;
        let slot = state.slot(&id).unwrap().clone();
        let answer = Answer::from_bool(valuation(&slot.question));
        let before = state.candidates.clone();
        // the pending set restricted to the candidates is a proper subset
        prop_assert!(!slot.current.is_empty() && slot.current.is_subset(&before) && slot.current.len() < before.len());

        let record = state.answer(&id, answer).unwrap().clone();
        let expected: BTreeSet<PatchId> = match answer {
            Answer::Yes => before.intersection(&slot.question.patches).cloned().collect(),
            Answer::No => before.difference(&slot.question.patches).cloned().collect(),
        };
        prop_assert_eq!(&state.candidates, &expected);
        prop_assert!(state.candidates.len() < before.len());
        prop_assert!(record.removed_patches.is_disjoint(&state.candidates));
        prop_assert_eq!(record.removed_patches.len() + state.candidates.len(), before.len());
        for s in state.pending() {
            let cur: BTreeSet<PatchId> = s.question.patches.intersection(&state.candidates).cloned().collect();
            prop_assert_eq!(&s.current, &cur);
            prop_assert!(!cur.is_empty() && cur.len() < state.candidates.len());
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn built_questions_are_proper_subsets((n, masks) in small_instance()) {
        let (all, qs) = questions_of(n, &masks);
        for q in &qs {
            prop_assert!(!q.patches.is_empty() && q.patches.is_subset(&all) && q.patches.len() < all.len());
        }
    }

    #[test]
    fn set_laws_shrink_and_bounds_hold(
        (n, masks) in small_instance(),
        star in 0usize..6,
        picks in prop::collection::vec(0usize..10, 10),
    ) {
        let (all, qs) = questions_of(n, &masks);
        let star = pid(star % n);
        let mut state = SessionState::new("s", qs.clone(), all.clone());
        exhaust(&mut state, &|q| q.patches.contains(&star), &picks)?;
        prop_assert!(state.answered_count() <= qs.len());
        prop_assert!(state.answered_count() <= all.len() - state.candidates.len());
    }

    #[test]
    fn outcome_is_the_profile_match_set_in_any_order(
        (n, masks) in small_instance(),
        star in 0usize..6,
        picks_a in prop::collection::vec(0usize..10, 10),
        picks_b in prop::collection::vec(0usize..10, 10),
    ) {
        let (all, qs) = questions_of(n, &masks);
        let star = pid(star % n);
        let valuation = |q: &InteractiveQuestion| q.patches.contains(&star);
        let matching: BTreeSet<PatchId> = all
            .iter()
            .filter(|p| qs.iter().all(|q| q.patches.contains(*p) == valuation(q)))
            .cloned()
            .collect();
        for picks in [&picks_a, &picks_b] {
            let mut state = SessionState::new("s", qs.clone(), all.clone());
            exhaust(&mut state, &valuation, picks)?;
            prop_assert_eq!(&state.candidates, &matching);
        }
    }

    #[test]
    fn replaying_the_log_reproduces_the_state(
        (n, masks) in small_instance(),
        star in 0usize..6,
        picks in prop::collection::vec(0usize..10, 10),
        stop in 0usize..10,
    ) {
        let (all, qs) = questions_of(n, &masks);
        let star = pid(star % n);
        let mut state = SessionState::new("s", qs.clone(), all.clone());
        let mut k = 0;
        while state.pending_count() > 0 && k < stop {
            let pending: Vec<QuestionId> = state.pending().map(|s| s.question.id.clone()).collect();
            let id = pending[picks[k] % pending.len()].clone();
            let yes = state.slot(&id).unwrap().question.patches.contains(&star);
            state.answer(&id, Answer::from_bool(yes)).unwrap();
            k += 1;
        }
        let replayed = SessionState::replay("s", qs.clone(), all.clone(), &state.answer_log).unwrap();
        prop_assert_eq!(&replayed, &state);

        let mut reset = state.clone();
        reset.reset();
        prop_assert_eq!(&reset, &SessionState::new("s", qs, all));
    }

    #[test]
    fn trace_inversion_is_lossless(
        profiles in prop::collection::btree_map(0usize..6, prop::collection::btree_set((0u32..3, 1u32..8), 0..6), 0..6),
    ) {
        let profiles: BTreeMap<PatchId, BTreeSet<LinePoint>> = profiles
            .into_iter()
            .map(|(p, pts)| (pid(p), pts.into_iter().map(|(m, l)| LinePoint::new(format!("C#m{m}"), l)).collect()))
            .collect();
        let map = extract_trace_attrs(&profiles);
        let mut back: BTreeMap<PatchId, BTreeSet<LinePoint>> = profiles.keys().map(|p| (p.clone(), BTreeSet::new())).collect();
        for (attr, patches) in &map {
            let Attribute::ExecutionTrace { method, line } = attr else {
                return Err(TestCaseError::fail("non-trace attribute"));
            };
            prop_assert!(!patches.is_empty());
            for p in patches {
                back.get_mut(p).unwrap().insert(LinePoint::new(method.as_str(), *line));
            }
        }
        prop_assert_eq!(back, profiles);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn family_filter_is_a_sublist_and_building_is_deterministic(
        n in 2usize..12,
        m in 0usize..4,
        t in 0usize..6,
        v in 0usize..4,
        seed in any::<u64>(),
    ) {
        let bundle = generate_fixture(&FixtureSpec::counts(n, m, t, v), seed).unwrap();
        let full = prepare(&bundle, FamilySet::all());
        prop_assert_eq!(&full, &prepare(&bundle, FamilySet::all()));
        for family in Family::ALL {
            let only = prepare(&bundle, FamilySet::only(family));
            let filtered: Vec<_> = full.iter().filter(|q| q.family() == family).cloned().collect();
            prop_assert_eq!(only, filtered);
        }
        let regenerated = generate_fixture(&FixtureSpec::counts(n, m, t, v), seed).unwrap();
        prop_assert_eq!(regenerated, bundle);
    }
}

/// With an oracle that matches no patch the outcome depends on the order.
#[test]
fn unsatisfiable_valuations_can_depend_on_order() {
    let (all, qs) = questions_of(3, &[0b001, 0b011]);
    let a = qs.iter().find(|q| q.patches.len() == 1).unwrap().id.clone();
    let b = qs.iter().find(|q| q.patches.len() == 2).unwrap().id.clone();

    let mut first_a = SessionState::new("s", qs.clone(), all.clone());
    first_a.answer(&a, Answer::Yes).unwrap();
    assert_eq!(first_a.pending_count(), 0);
    assert_eq!(first_a.candidates, BTreeSet::from([pid(0)]));

    let mut first_b = SessionState::new("s", qs, all);
    first_b.answer(&b, Answer::No).unwrap();
    assert_eq!(first_b.pending_count(), 0);
    assert_eq!(first_b.candidates, BTreeSet::from([pid(2)]));
}
