//! Output files: `questions.json`, `session.json`, report CSVs and answer
//! scripts.

use std::collections::BTreeSet;
use std::io;
use std::path::{Path, PathBuf};

use inpafer_core::engine::{AnswerRecord, Resolution};
use inpafer_core::sim::SimulationReport;
use inpafer_core::{Answer, Attribute, BugBundle, Family, InteractiveQuestion, PatchId, QuestionId, SessionState};
use serde::{Deserialize, Serialize};

/// One `questions.json` entry. The attribute's own fields are flattened
/// next to the id and text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: QuestionId,
    pub text: String,
    #[serde(flatten)]
    pub attribute: Attribute,
    pub patch_ids: BTreeSet<PatchId>,
}

impl From<&InteractiveQuestion> for QuestionRecord {
    fn from(q: &InteractiveQuestion) -> Self {
        QuestionRecord { id: q.id.clone(), text: q.attribute.text(), attribute: q.attribute.clone(), patch_ids: q.patches.clone() }
    }
}

impl QuestionRecord {
    pub fn family(&self) -> Family {
        self.attribute.family()
    }
}

pub fn questions_json(questions: &[InteractiveQuestion]) -> String {
    let records: Vec<QuestionRecord> = questions.iter().map(QuestionRecord::from).collect();
    let mut s = serde_json::to_string_pretty(&records).expect("questions serialize");
    s.push('\n');
    s
}

/// What a session needs to be rebuilt: the bundle it was opened on, the
/// answers in order and how it ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFile {
    pub session_id: String,
    pub bundle: PathBuf,
    pub bundle_id: String,
    pub revision: u64,
    pub created_at: u64,
    pub last_modified: u64,
    pub answer_log: Vec<AnswerRecord>,
    pub resolution: Resolution,
}

#[derive(Debug, thiserror::Error)]
pub enum RestoreError {
    #[error(transparent)]
    Load(#[from] crate::io::LoadError),
    #[error(transparent)]
    Engine(#[from] inpafer_core::EngineError),
}

impl SessionFile {
    /// Loads the bundle and replays the log.
    pub fn restore(&self) -> Result<(BugBundle, SessionState), RestoreError> {
        let bundle = crate::io::load_bundle(&self.bundle)?;
        let state = self.replay(&bundle)?;
        Ok((bundle, state))
    }

    pub fn replay(&self, bundle: &BugBundle) -> Result<SessionState, inpafer_core::EngineError> {
        let questions = inpafer_core::attributes::prepare(bundle, Default::default());
        let mut state = SessionState::replay(self.session_id.as_str(), questions, bundle.patch_ids(), &self.answer_log)?;
        match &self.resolution {
            Resolution::Open => {}
            Resolution::Selected { patch_id } => state.select_patch(patch_id)?,
            Resolution::Manual { diff } => state.record_manual_patch(diff)?,
        }
        Ok(state)
    }
}

/// A scripted answer: by question id or by exact question text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<QuestionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub answer: Answer,
}

/// `answer --script` input.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnswerScript {
    pub answers: Vec<ScriptStep>,
    /// Patch to select once the answers are in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<PatchId>,
}

/// `report.csv`: one row per run.
pub fn write_report_csv(report: &SimulationReport, path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bug_id", "seed", "families", "query_count", "remaining", "bucket"])?;
    for r in &report.records {
        let remaining: Vec<&str> = r.remaining.iter().map(|p| p.as_str()).collect();
        w.write_record([
            report.bug_id.clone(),
            r.seed.to_string(),
            r.families.to_string(),
            r.query_count.to_string(),
            remaining.join(";"),
            r.bucket.name().to_string(),
        ])?;
    }
    w.flush()
}

/// One `ablation-<letters>.csv` per family subset in `dir`.
/// Returns the files written.
pub fn write_ablation_csvs(report: &SimulationReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for curve in &report.ablation {
        let letters: String = curve.families.iter().map(|f| f.letter()).collect();
        let path = dir.join(format!("ablation-{letters}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["answered_queries", "fraction_remaining"])?;
        for p in &curve.points {
            w.write_record([p.answered_queries.to_string(), p.fraction_remaining.to_string()])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use inpafer_core::attributes::prepare;
    use inpafer_core::sim::{run_experiment, running_example, ExperimentConfig};
    use inpafer_core::FamilySet;

    #[test]
    fn question_records_flatten_the_attribute() {
        let qs = prepare(&running_example(), FamilySet::all());
        let json: serde_json::Value = serde_json::from_str(&questions_json(&qs)).unwrap();
        let et = json.as_array().unwrap().iter().find(|q| q["family"] == "execution_trace").unwrap();
        assert_eq!(et["line"], 321);
        assert_eq!(et["method"], "Variance#eval");
        assert_eq!(et["patch_ids"], serde_json::json!(["p1", "p2"]));
        let back: Vec<QuestionRecord> = serde_json::from_value(json).unwrap();
        assert_eq!(back.len(), 3);
    }

    #[test]
    fn csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_experiment(&running_example(), &ExperimentConfig::default()).unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bug_id,seed,families,query_count,remaining,bucket");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("Math-41,0,\"m,t,v\","), "{}", lines[1]);
        assert!(lines[1].ends_with(",p3,all_correct"), "{}", lines[1]);

        let files = write_ablation_csvs(&report, dir.path()).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["ablation-mtv.csv", "ablation-m.csv", "ablation-t.csv", "ablation-v.csv"]);
        let curve = std::fs::read_to_string(&files[0]).unwrap();
        assert!(curve.starts_with("answered_queries,fraction_remaining\n0,1\n"), "{curve}");
    }
}
