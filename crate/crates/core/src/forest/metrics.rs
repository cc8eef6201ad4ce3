use serde::{Deserialize, Serialize};

use super::ForestError;
use crate::corpus::TopicLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: TopicLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[t][p]`: samples of true class `t` predicted as `p`.
    pub confusion: [[usize; 4]; 4],
    pub n: usize,
}

/// Scores predictions given as class indices `0..4`.
///
/// Precision, recall and F1 are macro averages over the classes that occur
/// in either `y_true` or `y_pred`; a class absent from both contributes
/// nothing. Per-class F1 is 0 when precision and recall are both 0.
pub fn evaluate(y_true: &[usize], y_pred: &[usize]) -> Result<EvalReport, ForestError> {
    if y_true.len() != y_pred.len() {
        return Err(ForestError::Evaluation(format!("{} labels but {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(ForestError::Evaluation("nothing to evaluate".into()));
    }
    let mut confusion = [[0usize; 4]; 4];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= 4 {
            return Err(ForestError::UnknownLabel(t));
        }
        if p >= 4 {
            return Err(ForestError::UnknownLabel(p));
        }
        confusion[t][p] += 1;
    }
    let n = y_true.len();
    let correct: usize = (0..4).map(|c| confusion[c][c]).sum();

    let mut per_class = Vec::new();
    for c in 0..4 {
        let tp = confusion[c][c];
        let actual: usize = confusion[c].iter().sum();
        let predicted: usize = (0..4).map(|t| confusion[t][c]).sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            label: TopicLabel::from_index(c).expect("index below 4"),
            precision,
            recall,
            f1,
            support: actual,
        });
    }
    let macro_avg = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / per_class.len() as f64;
    Ok(EvalReport {
        accuracy: correct as f64 / n as f64,
        precision: macro_avg(|m| m.precision),
        recall: macro_avg(|m| m.recall),
        f1: macro_avg(|m| m.f1),
        per_class,
        confusion,
        n,
    })
}

pub fn evaluate_labels(y_true: &[TopicLabel], y_pred: &[TopicLabel]) -> Result<EvalReport, ForestError> {
    let t: Vec<usize> = y_true.iter().map(|l| l.index()).collect();
    let p: Vec<usize> = y_pred.iter().map(|l| l.index()).collect();
    evaluate(&t, &p)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Serialize)]
struct Record<'a> {
    metric: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<TopicLabel>,
    value: f64,
}

impl EvalReport {
    /// One JSON line per scalar metric, then one per (class, metric), then
    /// the confusion matrix.
    pub fn to_jsonl(&self) -> String {
        let mut lines = Vec::new();
        for (metric, value) in [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
        ] {
            lines.push(json(&Record { metric, class: None, value }));
        }
        for m in &self.per_class {
            for (metric, value) in [
                ("precision", m.precision),
                ("recall", m.recall),
                ("f1", m.f1),
                ("support", m.support as f64),
            ] {
                lines.push(json(&Record { metric, class: Some(m.label), value }));
            }
        }
        lines.push(json(&serde_json::json!({ "metric": "confusion", "value": self.confusion })));
        lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}
