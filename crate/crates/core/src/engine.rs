//! Interactive stage: the filtering session.
//!
//! An answer replaces the candidate set with the question's patches (yes) or
//! removes them (no), then intersects every pending question with the new
//! candidates. Questions left with no patches are dropped, and questions whose
//! patches now equal the whole candidate set are marked YES, since neither
//! can discriminate any more. Both kinds of implied resolution are recorded
//! alongside the answer.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attributes::{Family, InteractiveQuestion, QuestionId, QuestionState};
use crate::bundle::PatchId;
use crate::diff::{parse_unified_diff, DiffError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn from_bool(yes: bool) -> Self {
        if yes {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn state(self) -> QuestionState {
        match self {
            Answer::Yes => QuestionState::Yes,
            Answer::No => QuestionState::No,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: QuestionId,
    pub answer: Answer,
    pub removed_patches: BTreeSet<PatchId>,
    pub auto_resolved: Vec<(QuestionId, QuestionState)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Resolution {
    Open,
    Selected { patch_id: PatchId },
    Manual { diff: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolvedBy {
    Answered,
    Implied,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown question `{0}`")]
    UnknownQuestion(QuestionId),
    #[error("question `{0}` is already resolved")]
    AlreadyResolved(QuestionId),
    #[error("the session is closed")]
    SessionClosed,
    #[error("patch `{0}` is not a current candidate")]
    InvalidSelection(PatchId),
    #[error("manual patch does not parse: {0}")]
    Diff(#[from] DiffError),
    #[error("manual patch contains no edits")]
    EmptyManualPatch,
    #[error("replayed answer to `{0}` diverges from the recorded log")]
    ReplayDiverged(QuestionId),
}

impl EngineError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::UnknownQuestion(_) => "unknown_question",
            EngineError::AlreadyResolved(_) => "question_resolved",
            EngineError::SessionClosed => "session_closed",
            EngineError::InvalidSelection(_) => "invalid_selection",
            EngineError::Diff(_) => "diff_parse_error",
            EngineError::EmptyManualPatch => "empty_manual_patch",
            EngineError::ReplayDiverged(_) => "replay_diverged",
        }
    }
}

/// A question slot: the question as built, its current patch set and state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSlot {
    pub question: InteractiveQuestion,
    /// Patches among the current candidates (frozen once resolved).
    pub current: BTreeSet<PatchId>,
    pub resolved_by: Option<ResolvedBy>,
}

impl QuestionSlot {
    pub fn is_pending(&self) -> bool {
        self.question.state == QuestionState::Unclear
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub initial_patches: BTreeSet<PatchId>,
    initial_questions: Vec<InteractiveQuestion>,
    pub candidates: BTreeSet<PatchId>,
    slots: Vec<QuestionSlot>,
    pub answer_log: Vec<AnswerRecord>,
    pub resolution: Resolution,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, questions: Vec<InteractiveQuestion>, patches: BTreeSet<PatchId>) -> Self {
        let slots = questions
            .iter()
            .map(|q| {
                let mut question = q.clone();
                question.state = QuestionState::Unclear;
                QuestionSlot { current: question.patches.clone(), question, resolved_by: None }
            })
            .collect();
        SessionState {
            session_id: session_id.into(),
            initial_patches: patches.clone(),
            initial_questions: questions,
            candidates: patches,
            slots,
            answer_log: Vec::new(),
            resolution: Resolution::Open,
        }
    }

    /// Rebuilds a session by replaying a recorded answer log, checking that
    /// every step reproduces what was recorded.
    pub fn replay(
        session_id: impl Into<String>,
        questions: Vec<InteractiveQuestion>,
        patches: BTreeSet<PatchId>,
        log: &[AnswerRecord],
    ) -> Result<Self, EngineError> {
        let mut state = SessionState::new(session_id, questions, patches);
        for record in log {
            let produced = state.answer(&record.question_id, record.answer)?;
            if produced != record {
                return Err(EngineError::ReplayDiverged(record.question_id.clone()));
            }
        }
        Ok(state)
    }

    pub fn is_open(&self) -> bool {
        self.resolution == Resolution::Open
    }

    pub fn slots(&self) -> &[QuestionSlot] {
        &self.slots
    }

    pub fn initial_questions(&self) -> &[InteractiveQuestion] {
        &self.initial_questions
    }

    /// Unresolved questions, each restricted to the current candidates.
    pub fn pending(&self) -> impl Iterator<Item = &QuestionSlot> {
        self.slots.iter().filter(|s| s.is_pending())
    }

    pub fn pending_count(&self) -> usize {
        self.pending().count()
    }

    /// Questions answered explicitly so far.
    pub fn answered_count(&self) -> usize {
        self.answer_log.len()
    }

    pub fn slot(&self, id: &QuestionId) -> Option<&QuestionSlot> {
        self.slots.iter().find(|s| &s.question.id == id)
    }

    /// Applies one answer.
    pub fn answer(&mut self, question_id: &QuestionId, answer: Answer) -> Result<&AnswerRecord, EngineError> {
        if !self.is_open() {
            return Err(EngineError::SessionClosed);
        }
        let idx = self
            .slots
            .iter()
            .position(|s| &s.question.id == question_id)
            .ok_or_else(|| EngineError::UnknownQuestion(question_id.clone()))?;
        if !self.slots[idx].is_pending() {
            return Err(EngineError::AlreadyResolved(question_id.clone()));
        }

        let asked = &self.slots[idx].current;
        let next: BTreeSet<PatchId> = match answer {
            Answer::Yes => self.candidates.intersection(asked).cloned().collect(),
            Answer::No => self.candidates.difference(asked).cloned().collect(),
        };
        // pending sets are proper, non-empty subsets of the candidates
        assert!(!next.is_empty() && next.len() < self.candidates.len(), "answer would not shrink candidates properly");
        let removed: BTreeSet<PatchId> = self.candidates.difference(&next).cloned().collect();

        let slot = &mut self.slots[idx];
        slot.question.state = answer.state();
        slot.resolved_by = Some(ResolvedBy::Answered);

        let mut auto_resolved = Vec::new();
        for slot in self.slots.iter_mut().filter(|s| s.is_pending()) {
            slot.current.retain(|p| next.contains(p));
            let implied = if slot.current.is_empty() {
                Some(QuestionState::No)
            } else if slot.current.len() == next.len() {
                Some(QuestionState::Yes)
            } else {
                None
            };
            if let Some(state) = implied {
                slot.question.state = state;
                slot.resolved_by = Some(ResolvedBy::Implied);
                auto_resolved.push((slot.question.id.clone(), state));
            }
        }

        self.candidates = next;
        self.answer_log.push(AnswerRecord { question_id: question_id.clone(), answer, removed_patches: removed, auto_resolved });
        Ok(self.answer_log.last().expect("just pushed"))
    }

    /// One-click rollback to the initial state.
    pub fn reset(&mut self) {
        let id = core::mem::take(&mut self.session_id);
        *self = SessionState::new(id, core::mem::take(&mut self.initial_questions), core::mem::take(&mut self.initial_patches));
    }

    pub fn select_patch(&mut self, patch_id: &PatchId) -> Result<(), EngineError> {
        if !self.is_open() {
            return Err(EngineError::SessionClosed);
        }
        if !self.candidates.contains(patch_id) {
            return Err(EngineError::InvalidSelection(patch_id.clone()));
        }
        self.resolution = Resolution::Selected { patch_id: patch_id.clone() };
        Ok(())
    }

    pub fn record_manual_patch(&mut self, diff: &str) -> Result<(), EngineError> {
        if !self.is_open() {
            return Err(EngineError::SessionClosed);
        }
        if parse_unified_diff(diff)?.is_empty() {
            return Err(EngineError::EmptyManualPatch);
        }
        self.resolution = Resolution::Manual { diff: diff.into() };
        Ok(())
    }

    /// Read-only projection for the query view.
    pub fn snapshot(&self, failing_tests: &[String]) -> SessionView {
        let mut groups: BTreeMap<Family, Vec<QuestionView>> = BTreeMap::new();
        for family in Family::ALL {
            groups.insert(family, Vec::new());
        }
        for slot in &self.slots {
            let q = &slot.question;
            groups.entry(q.family()).or_default().push(QuestionView {
                id: q.id.clone(),
                text: q.attribute.text(),
                patch_count: slot.current.len(),
                state: q.state,
                resolved_by: slot.resolved_by,
            });
        }
        SessionView {
            session_id: self.session_id.clone(),
            failing_tests: failing_tests.to_vec(),
            initial_count: self.initial_patches.len(),
            candidate_count: self.candidates.len(),
            candidates: self.candidates.iter().cloned().collect(),
            pending_count: self.pending_count(),
            answered_count: self.answered_count(),
            groups: groups.into_iter().map(|(family, questions)| QuestionGroup { family, questions }).collect(),
            resolution: self.resolution.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub id: QuestionId,
    pub text: String,
    pub patch_count: usize,
    pub state: QuestionState,
    pub resolved_by: Option<ResolvedBy>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionGroup {
    pub family: Family,
    pub questions: Vec<QuestionView>,
}

impl QuestionGroup {
    pub fn pending(&self) -> usize {
        self.questions.iter().filter(|q| q.state == QuestionState::Unclear).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub failing_tests: Vec<String>,
    pub initial_count: usize,
    pub candidate_count: usize,
    pub candidates: Vec<PatchId>,
    pub pending_count: usize,
    pub answered_count: usize,
    /// One group per family, in family order.
    pub groups: Vec<QuestionGroup>,
    pub resolution: Resolution,
}

impl SessionView {
    pub fn group(&self, family: Family) -> &QuestionGroup {
        self.groups.iter().find(|g| g.family == family).expect("every family has a group")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::Attribute;
    use alloc::vec;

    fn ids(xs: &[&str]) -> BTreeSet<PatchId> {
        xs.iter().map(|x| PatchId::from(*x)).collect()
    }

    fn running_example() -> SessionState {
        let qs = vec![
            InteractiveQuestion::new(Attribute::ModifiedMethod { method: "eval".into() }, ids(&["p1", "p2"])),
            InteractiveQuestion::new(Attribute::ModifiedMethod { method: "evaluate".into() }, ids(&["p3"])),
            InteractiveQuestion::new(Attribute::ExecutionTrace { method: "eval".into(), line: 321 }, ids(&["p1", "p2"])),
        ];
        SessionState::new("s", qs, ids(&["p1", "p2", "p3"]))
    }

    fn qid(s: &SessionState, i: usize) -> QuestionId {
        s.slots()[i].question.id.clone()
    }

    #[test]
    fn fresh_session() {
        let s = running_example();
        assert_eq!(s.candidates, ids(&["p1", "p2", "p3"]));
        assert_eq!(s.pending_count(), 3);
        assert!(s.answer_log.is_empty());
        assert_eq!(s.resolution, Resolution::Open);
        let empty = SessionState::new("e", vec![], ids(&["p1"]));
        assert_eq!(empty.pending_count(), 0);
    }

    #[test]
    fn answering_no_filters_and_propagates() {
        let mut s = running_example();
        let q = qid(&s, 2);
        let record = s.answer(&q, Answer::No).unwrap().clone();
        assert_eq!(s.candidates, ids(&["p3"]));
        assert_eq!(record.removed_patches, ids(&["p1", "p2"]));
        // MM(eval) emptied, MM(evaluate) now equals the candidates
        assert_eq!(record.auto_resolved, vec![(qid(&s, 0), QuestionState::No), (qid(&s, 1), QuestionState::Yes)]);
        assert_eq!(s.pending_count(), 0);
    }

    #[test]
    fn errors() {
        let mut s = running_example();
        let q = qid(&s, 1);
        s.answer(&q, Answer::Yes).unwrap();
        assert_eq!(s.answer(&q, Answer::Yes).unwrap_err(), EngineError::AlreadyResolved(q.clone()));
        let bogus = QuestionId("q-nope".into());
        assert_eq!(s.answer(&bogus, Answer::No).unwrap_err().code(), "unknown_question");
        assert_eq!(s.select_patch(&"p1".into()).unwrap_err(), EngineError::InvalidSelection("p1".into()));
        s.select_patch(&"p3".into()).unwrap();
        assert_eq!(s.resolution, Resolution::Selected { patch_id: "p3".into() });
        assert_eq!(s.answer(&qid(&s, 0), Answer::Yes).unwrap_err(), EngineError::SessionClosed);
        assert_eq!(s.record_manual_patch("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n").unwrap_err(), EngineError::SessionClosed);
    }

    #[test]
    fn selection_in_fresh_session_is_allowed() {
        let mut s = running_example();
        s.select_patch(&"p1".into()).unwrap();
        assert!(!s.is_open());
    }

    #[test]
    fn manual_patch() {
        let mut s = running_example();
        assert_eq!(s.record_manual_patch("").unwrap_err(), EngineError::EmptyManualPatch);
        assert!(matches!(s.record_manual_patch("--- a/x\n+++ b/x\n@@ -z @@\n"), Err(EngineError::Diff(_))));
        s.record_manual_patch("--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n").unwrap();
        assert!(matches!(s.resolution, Resolution::Manual { .. }));
    }

    #[test]
    fn reset_and_replay() {
        let fresh = running_example();
        let mut s = running_example();
        s.answer(&qid(&s, 0), Answer::No).unwrap();
        let log = s.answer_log.clone();
        let after = s.clone();
        s.reset();
        assert_eq!(s, fresh);
        s.reset();
        assert_eq!(s, fresh);
        for r in &log {
            s.answer(&r.question_id, r.answer).unwrap();
        }
        assert_eq!(s, after);
        let replayed = SessionState::replay("s", fresh.initial_questions().to_vec(), fresh.initial_patches.clone(), &log).unwrap();
        assert_eq!(replayed, after);
    }

    #[test]
    fn replay_detects_divergence() {
        let fresh = running_example();
        let mut s = running_example();
        s.answer(&qid(&s, 0), Answer::No).unwrap();
        let mut log = s.answer_log.clone();
        log[0].removed_patches.clear();
        let err = SessionState::replay("s", fresh.initial_questions().to_vec(), fresh.initial_patches.clone(), &log).unwrap_err();
        assert_eq!(err.code(), "replay_diverged");
    }

    #[test]
    fn snapshot_groups_by_family() {
        let mut s = running_example();
        let view = s.snapshot(&["t1".into()]);
        assert_eq!(view.candidate_count, 3);
        assert_eq!(view.group(Family::ModifiedMethod).questions.len(), 2);
        assert_eq!(view.group(Family::ExecutionTrace).questions.len(), 1);
        assert_eq!(view.group(Family::VariableValue).questions.len(), 0);
        s.answer(&qid(&s, 2), Answer::No).unwrap();
        s.select_patch(&"p3".into()).unwrap();
        let view = s.snapshot(&[]);
        assert_eq!(view.candidate_count, 1);
        assert_eq!(view.group(Family::ExecutionTrace).questions[0].state, QuestionState::No);
        assert_eq!(view.resolution, Resolution::Selected { patch_id: "p3".into() });
    }
}
