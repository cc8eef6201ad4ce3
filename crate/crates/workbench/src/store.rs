//! Run directories on disk: explanations to review and the append-only
//! judgment log.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use topicbench::corpus::{Document, TopicLabel};
use topicbench::lime::Explanation;
use topicbench::{fingerprint, Backend};

use crate::agreement::{self, AgreementReport, Counts};
use crate::api::ApiError;
use crate::experiment::{RunManifest, INCOMPLETE_MARKER};

pub const JUDGMENTS_FILE: &str = "judgments.jsonl";
pub const EXPLANATIONS_FILE: &str = "explanations.jsonl";

/// One LIME explanation plus what a reviewer needs to judge it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    /// `{run id}:{document id}`.
    pub id: String,
    pub run_id: String,
    pub document_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub tokens: Vec<String>,
    pub true_label: Option<TopicLabel>,
    pub explanation: Explanation,
    /// Hash of `explanation`; independent of the run id.
    pub fingerprint: String,
}

impl ExplanationRecord {
    pub fn new(run_id: &str, doc: &Document, explanation: Explanation) -> Self {
        ExplanationRecord {
            id: format!("{run_id}:{}", doc.id),
            run_id: run_id.to_string(),
            document_id: doc.id.clone(),
            title: doc.title.clone(),
            abstract_text: doc.abstract_text.clone(),
            tokens: doc.tokens.clone(),
            true_label: doc.label,
            fingerprint: fingerprint::of_json(&explanation),
            explanation,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Answers to the four review steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepAnswers {
    /// Step 1: the most significant terms were collected.
    pub terms_collected: bool,
    /// Step 2: some terms are too vague to support the prediction.
    pub vague_terms_problem: bool,
    /// Step 3: the terms relate better to another label.
    pub relates_to_other_label: bool,
    /// Step 4: the terms tell a story consistent with the prediction.
    pub story_matches_prediction: bool,
}

impl StepAnswers {
    /// Whether these answers allow a `logical` verdict.
    pub fn permits_logical(&self) -> bool {
        !self.vague_terms_problem && !self.relates_to_other_label && self.story_matches_prediction
    }

    pub fn consistent_with(logical: bool) -> Self {
        StepAnswers {
            terms_collected: true,
            vague_terms_problem: false,
            relates_to_other_label: !logical,
            story_matches_prediction: logical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Logical,
    Illogical,
}

/// Body of a judgment submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentInput {
    pub reviewer: String,
    pub step_answers: StepAnswers,
    pub verdict: Verdict,
    /// When given, must match the stored explanation.
    #[serde(default)]
    pub explanation_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    /// `{run id}:j{sequence}`.
    pub id: String,
    pub explanation_id: String,
    pub document_id: String,
    pub explanation_fingerprint: String,
    pub reviewer: String,
    pub step_answers: StepAnswers,
    pub verdict: Verdict,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub backend: Backend,
    pub seed: u64,
    pub n_test: usize,
    pub n_explanations: usize,
    pub n_judgments: usize,
    pub config_fingerprint: String,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("no completed runs under {0}")]
    Empty(PathBuf),
}

struct Judgments {
    records: Vec<JudgmentRecord>,
    seen: HashSet<(String, String)>,
    /// Maintained on every append; see [`Store::recount`].
    counts: Counts,
    log: File,
}

struct Run {
    manifest: RunManifest,
    metrics: serde_json::Value,
    explanations: Vec<ExplanationRecord>,
    judgments: Mutex<Judgments>,
}

/// All completed runs below a directory. Reads are concurrent; writes to a
/// run's judgment log go through that run's lock.
pub struct Store {
    runs: BTreeMap<String, Run>,
}

fn load_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(load_err(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| load_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| load_err(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

impl Store {
    /// Opens `path`, which is either one run directory or a directory of
    /// runs. Runs still marked incomplete are skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut dirs = Vec::new();
        if path.join("manifest.json").exists() {
            dirs.push(path.to_path_buf());
        } else {
            let entries = fs::read_dir(path).map_err(|e| load_err(path, e))?;
            for entry in entries {
                let p = entry.map_err(|e| load_err(path, e))?.path();
                if p.join("manifest.json").exists() {
                    dirs.push(p);
                }
            }
        }
        let mut runs = BTreeMap::new();
        for dir in dirs {
            if dir.join(INCOMPLETE_MARKER).exists() {
                log::warn!("skipping incomplete run {}", dir.display());
                continue;
            }
            let run = Self::load_run(&dir)?;
            runs.insert(run.manifest.run_id.clone(), run);
        }
        Ok(Store { runs })
    }

    fn load_run(dir: &Path) -> Result<Run, StoreError> {
        let manifest_path = dir.join("manifest.json");
        let manifest: RunManifest = serde_json::from_slice(&fs::read(&manifest_path).map_err(|e| load_err(&manifest_path, e))?)
            .map_err(|e| load_err(&manifest_path, e))?;
        let metrics_path = dir.join("metrics.json");
        let metrics = serde_json::from_slice(&fs::read(&metrics_path).map_err(|e| load_err(&metrics_path, e))?)
            .map_err(|e| load_err(&metrics_path, e))?;
        let explanations: Vec<ExplanationRecord> = read_jsonl(&dir.join(EXPLANATIONS_FILE))?;
        let log_path = dir.join(JUDGMENTS_FILE);
        let records: Vec<JudgmentRecord> = read_jsonl(&log_path)?;
        let counts = agreement::count(&records).map_err(|e| load_err(&log_path, e))?;
        let seen = records
            .iter()
            .map(|r| (r.reviewer.clone(), r.explanation_fingerprint.clone()))
            .collect();
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| load_err(&log_path, e))?;
        Ok(Run {
            manifest,
            metrics,
            explanations,
            judgments: Mutex::new(Judgments {
                records,
                seen,
                counts,
                log,
            }),
        })
    }

    fn run(&self, run_id: &str) -> Result<&Run, ApiError> {
        self.runs
            .get(run_id)
            .ok_or_else(|| ApiError::NotFound(format!("no run {run_id:?}")))
    }

    fn lock(run: &Run) -> std::sync::MutexGuard<'_, Judgments> {
        run.judgments.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn runs(&self) -> Vec<RunSummary> {
        self.runs
            .values()
            .map(|r| RunSummary {
                run_id: r.manifest.run_id.clone(),
                backend: r.manifest.backend,
                seed: r.manifest.seed,
                n_test: r.manifest.n_test,
                n_explanations: r.explanations.len(),
                n_judgments: Self::lock(r).records.len(),
                config_fingerprint: r.manifest.config_fingerprint.clone(),
            })
            .collect()
    }

    pub fn manifest(&self, run_id: &str) -> Result<&RunManifest, ApiError> {
        Ok(&self.run(run_id)?.manifest)
    }

    pub fn metrics(&self, run_id: &str) -> Result<&serde_json::Value, ApiError> {
        Ok(&self.run(run_id)?.metrics)
    }

    /// Explanations of a run in test-set order; with `unjudged_by`, only those
    /// that reviewer has not judged yet.
    pub fn explanations(&self, run_id: &str, unjudged_by: Option<&str>) -> Result<Vec<&ExplanationRecord>, ApiError> {
        let run = self.run(run_id)?;
        let all = run.explanations.iter();
        Ok(match unjudged_by {
            None => all.collect(),
            Some(reviewer) => {
                let j = Self::lock(run);
                all.filter(|e| !j.seen.contains(&(reviewer.to_string(), e.fingerprint.clone()))).collect()
            }
        })
    }

    fn split_id(explanation_id: &str) -> Result<(&str, &str), ApiError> {
        explanation_id
            .split_once(':')
            .ok_or_else(|| ApiError::NotFound(format!("no explanation {explanation_id:?}")))
    }

    pub fn explanation(&self, explanation_id: &str) -> Result<&ExplanationRecord, ApiError> {
        let (run_id, _) = Self::split_id(explanation_id)?;
        self.runs
            .get(run_id)
            .and_then(|r| r.explanations.iter().find(|e| e.id == explanation_id))
            .ok_or_else(|| ApiError::NotFound(format!("no explanation {explanation_id:?}")))
    }

    /// Validates and appends one judgment. The record is on disk and visible
    /// to readers when this returns.
    pub fn record_judgment(&self, explanation_id: &str, input: JudgmentInput) -> Result<JudgmentRecord, ApiError> {
        let explanation = self.explanation(explanation_id)?;
        let run = self.run(&explanation.run_id)?;
        let reviewer = input.reviewer.trim();
        if reviewer.is_empty() {
            return Err(ApiError::Validation("reviewer must not be empty".into()));
        }
        if input.verdict == Verdict::Logical && !input.step_answers.permits_logical() {
            return Err(ApiError::Validation(
                "a logical verdict needs no vague terms, no better-fitting label, and a consistent story".into(),
            ));
        }
        if let Some(fp) = &input.explanation_fingerprint {
            if fp != &explanation.fingerprint {
                return Err(ApiError::Conflict(format!(
                    "explanation {explanation_id} has fingerprint {}, not {fp}",
                    explanation.fingerprint
                )));
            }
        }
        let mut j = Self::lock(run);
        let key = (reviewer.to_string(), explanation.fingerprint.clone());
        if j.seen.contains(&key) {
            return Err(ApiError::Conflict(format!("{reviewer} already judged {explanation_id}")));
        }
        let record = JudgmentRecord {
            id: format!("{}:j{}", run.manifest.run_id, j.records.len() + 1),
            explanation_id: explanation.id.clone(),
            document_id: explanation.document_id.clone(),
            explanation_fingerprint: explanation.fingerprint.clone(),
            reviewer: reviewer.to_string(),
            step_answers: input.step_answers,
            verdict: input.verdict,
            timestamp: now_rfc3339(),
        };
        let line = format!("{}\n", serde_json::to_string(&record).expect("record serializes"));
        j.log
            .write_all(line.as_bytes())
            .and_then(|_| j.log.sync_data())
            .map_err(|e| ApiError::Internal(format!("cannot append judgment: {e}")))?;
        j.seen.insert(key);
        let entry = j.counts.entry(record.reviewer.clone()).or_default();
        entry.0 += (record.verdict == Verdict::Logical) as usize;
        entry.1 += 1;
        j.records.push(record.clone());
        Ok(record)
    }

    pub fn judgments(&self, run_id: &str) -> Result<Vec<JudgmentRecord>, ApiError> {
        Ok(Self::lock(self.run(run_id)?).records.clone())
    }

    pub fn judgment(&self, judgment_id: &str) -> Result<JudgmentRecord, ApiError> {
        let (run_id, _) = Self::split_id(judgment_id)?;
        let run = self.run(run_id)?;
        Self::lock(run)
            .records
            .iter()
            .find(|r| r.id == judgment_id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no judgment {judgment_id:?}")))
    }

    /// Agreement from the incrementally maintained counts, optionally for
    /// one reviewer only.
    pub fn agreement(&self, run_id: &str, reviewer: Option<&str>, complete: bool) -> Result<AgreementReport, ApiError> {
        let run = self.run(run_id)?;
        let counts = Self::lock(run).counts.clone();
        Self::report(counts, run.manifest.n_test, reviewer, complete)
    }

    /// Agreement recomputed from the judgment records.
    pub fn recount(&self, run_id: &str, reviewer: Option<&str>, complete: bool) -> Result<AgreementReport, ApiError> {
        let run = self.run(run_id)?;
        let counts = agreement::count(&Self::lock(run).records).map_err(|e| ApiError::Internal(e.to_string()))?;
        Self::report(counts, run.manifest.n_test, reviewer, complete)
    }

    fn report(mut counts: Counts, n_test: usize, reviewer: Option<&str>, complete: bool) -> Result<AgreementReport, ApiError> {
        if let Some(r) = reviewer {
            counts.retain(|k, _| k == r);
        }
        agreement::report_from_counts(&counts, n_test, complete).map_err(|e| ApiError::Internal(e.to_string()))
    }
}

fn now_rfc3339() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_default()
}
