//! Agreement score: the share of explanations a reviewer judged logical.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::store::{JudgmentRecord, Verdict};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgreementError {
    #[error("reviewer {reviewer:?} judged document {document_id:?} more than once")]
    Duplicate { reviewer: String, document_id: String },
    #[error("reviewer {reviewer:?} has {judged} judgments for {n_test} test documents")]
    TooMany { reviewer: String, judged: usize, n_test: usize },
}

/// `c / n` rendered with `decimals` digits, rounding half up, computed in
/// integers so the rendering is exact.
pub fn render_fraction(c: u64, n: u64, decimals: u32) -> String {
    if n == 0 {
        return format!("{:.*}", decimals as usize, 0.0);
    }
    let scale = 10u64.pow(decimals);
    let scaled = (2 * c * scale + n) / (2 * n);
    let (whole, frac) = (scaled / scale, scaled % scale);
    if decimals == 0 {
        whole.to_string()
    } else {
        format!("{whole}.{frac:0width$}", width = decimals as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    /// Logical verdicts.
    pub c: usize,
    pub n_judged: usize,
    /// Denominator used for `score`.
    pub denominator: usize,
    pub score: f64,
    /// `score` to four decimals, from exact integer arithmetic.
    pub score_display: String,
}

impl Tally {
    fn new(c: usize, n_judged: usize, denominator: usize) -> Self {
        Tally {
            c,
            n_judged,
            denominator,
            score: if denominator == 0 { 0.0 } else { c as f64 / denominator as f64 },
            score_display: render_fraction(c as u64, denominator as u64, 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerTally {
    pub reviewer: String,
    #[serde(flatten)]
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_test: usize,
    /// Whether unjudged documents count against the score.
    pub complete: bool,
    /// Pooled over reviewers.
    #[serde(flatten)]
    pub overall: Tally,
    pub per_reviewer: Vec<ReviewerTally>,
}

/// Per-reviewer (logical, judged) counts.
pub type Counts = BTreeMap<String, (usize, usize)>;

/// Counts judgments, rejecting a second verdict by one reviewer on one
/// document.
pub fn count(judgments: &[JudgmentRecord]) -> Result<Counts, AgreementError> {
    let mut seen = HashSet::new();
    let mut counts = Counts::new();
    for j in judgments {
        if !seen.insert((j.reviewer.as_str(), j.document_id.as_str())) {
            return Err(AgreementError::Duplicate {
                reviewer: j.reviewer.clone(),
                document_id: j.document_id.clone(),
            });
        }
        let entry = counts.entry(j.reviewer.clone()).or_default();
        entry.0 += (j.verdict == Verdict::Logical) as usize;
        entry.1 += 1;
    }
    Ok(counts)
}

/// Builds the report from counts.
///
/// When `complete` is set, or a reviewer has judged every test document, that
/// reviewer's denominator is `n_test`; otherwise it is the number judged so
/// far. The pooled figure sums numerators and denominators over reviewers.
pub fn report_from_counts(counts: &Counts, n_test: usize, complete: bool) -> Result<AgreementReport, AgreementError> {
    let mut per_reviewer = Vec::new();
    let (mut c_all, mut judged_all, mut denom_all) = (0, 0, 0);
    for (reviewer, &(c, judged)) in counts {
        if judged > n_test {
            return Err(AgreementError::TooMany {
                reviewer: reviewer.clone(),
                judged,
                n_test,
            });
        }
        let denominator = if complete || judged == n_test { n_test } else { judged };
        c_all += c;
        judged_all += judged;
        denom_all += denominator;
        per_reviewer.push(ReviewerTally {
            reviewer: reviewer.clone(),
            tally: Tally::new(c, judged, denominator),
        });
    }
    if counts.is_empty() && complete {
        denom_all = n_test;
    }
    Ok(AgreementReport {
        n_test,
        complete,
        overall: Tally::new(c_all, judged_all, denom_all),
        per_reviewer,
    })
}

/// `c / n_test` over a finished review: unjudged documents count as not
/// logical.
pub fn agreement_score(judgments: &[JudgmentRecord], n_test: usize) -> Result<AgreementReport, AgreementError> {
    report_from_counts(&count(judgments)?, n_test, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::StepAnswers;

    fn judgment(reviewer: &str, doc: usize, logical: bool) -> JudgmentRecord {
        JudgmentRecord {
            id: format!("r:{doc}"),
            explanation_id: format!("run:d{doc}"),
            document_id: format!("d{doc}"),
            explanation_fingerprint: format!("fp{doc}"),
            reviewer: reviewer.into(),
            step_answers: StepAnswers::consistent_with(logical),
            verdict: if logical { Verdict::Logical } else { Verdict::Illogical },
            timestamp: String::new(),
        }
    }

    fn judged(c: usize, n: usize) -> Vec<JudgmentRecord> {
        (0..n).map(|i| judgment("expert", i, i < c)).collect()
    }

    #[test]
    fn rendering_is_exact() {
        assert_eq!(render_fraction(67, 86, 4), "0.7791");
        assert_eq!(render_fraction(56, 86, 4), "0.6512");
        assert_eq!(render_fraction(51, 86, 4), "0.5930");
        assert_eq!(render_fraction(86, 86, 4), "1.0000");
        assert_eq!(render_fraction(0, 86, 4), "0.0000");
        assert_eq!(render_fraction(1, 8, 2), "0.13");
        assert_eq!(render_fraction(0, 0, 4), "0.0000");
    }

    #[test]
    fn reference_fractions_of_86() {
        for (c, shown) in [(67, "0.7791"), (56, "0.6512"), (51, "0.5930")] {
            let r = agreement_score(&judged(c, 86), 86).unwrap();
            assert_eq!(r.overall.score_display, shown);
            assert_eq!(r.overall.c, c);
        }
    }

    #[test]
    fn trivial_cases() {
        let none = agreement_score(&[], 86).unwrap();
        assert_eq!((none.overall.score, none.overall.score_display.as_str()), (0.0, "0.0000"));
        assert_eq!(agreement_score(&judged(86, 86), 86).unwrap().overall.score, 1.0);
    }

    #[test]
    fn partial_review_uses_judged_count() {
        let js = judged(3, 4);
        let partial = report_from_counts(&count(&js).unwrap(), 10, false).unwrap();
        assert_eq!((partial.overall.denominator, partial.overall.score_display.as_str()), (4, "0.7500"));
        let done = report_from_counts(&count(&js).unwrap(), 10, true).unwrap();
        assert_eq!((done.overall.denominator, done.overall.score_display.as_str()), (10, "0.3000"));
        let all = report_from_counts(&count(&judged(3, 4)).unwrap(), 4, false).unwrap();
        assert_eq!(all.overall.score, 0.75);
    }

    #[test]
    fn duplicates_and_overflow() {
        let mut js = judged(1, 2);
        js.push(judgment("expert", 0, false));
        assert!(matches!(count(&js), Err(AgreementError::Duplicate { .. })));
        assert!(matches!(agreement_score(&judged(5, 5), 4), Err(AgreementError::TooMany { .. })));
        let mut two = judged(1, 2);
        two.push(judgment("second", 0, true));
        let r = agreement_score(&two, 2).unwrap();
        assert_eq!(r.per_reviewer.len(), 2);
        assert_eq!((r.overall.c, r.overall.denominator), (2, 4));
    }
}
