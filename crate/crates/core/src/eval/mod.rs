//! Hits@1, recall and precision at k, per-category breakdowns and gate usage.

mod report;

pub use report::{
    write_oracle_dump, write_predictions_dump, write_retrieval_dump, CategoryStats, ReaderReport,
    RetrievalReport, DEFAULT_KS, SCHEMA_VERSION,
};

use std::collections::BTreeMap;

use crate::corpus::{ArticleId, EntityId};
use crate::error::{Error, Result};
use crate::retrieval::OracleLabels;

/// Fraction of questions whose prediction is among its gold answers; a
/// missing prediction counts as wrong.
pub fn hits_at_1(predictions: &[Option<EntityId>], gold: &[Vec<EntityId>]) -> Result<f64> {
    if predictions.len() != gold.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold answer sets",
            predictions.len(),
            gold.len()
        )));
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.is_some_and(|p| g.contains(&p)))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// A retrieval metric over the questions that have oracle labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub evaluated: usize,
    /// Questions skipped for lack of an oracle label.
    pub excluded: usize,
}

fn over_labeled(
    rankings: &BTreeMap<usize, Vec<ArticleId>>,
    oracle: &OracleLabels,
    mut per_question: impl FnMut(&[ArticleId], &[ArticleId]) -> f64,
) -> Metric {
    let mut total = 0.0;
    let mut evaluated = 0;
    let mut excluded = 0;
    for (qid, ranked) in rankings {
        match oracle.get(*qid) {
            Some(labels) => {
                total += per_question(ranked, labels);
                evaluated += 1;
            }
            None => excluded += 1,
        }
    }
    Metric {
        value: if evaluated == 0 {
            0.0
        } else {
            total / evaluated as f64
        },
        evaluated,
        excluded,
    }
}

/// Share of questions whose best-ranked oracle article is within the top `k`.
pub fn recall_at_k(
    rankings: &BTreeMap<usize, Vec<ArticleId>>,
    oracle: &OracleLabels,
    k: usize,
) -> Metric {
    over_labeled(rankings, oracle, |ranked, labels| {
        f64::from(u8::from(ranked.iter().take(k).any(|a| labels.contains(a))))
    })
}

/// Mean over questions of the share of oracle articles within the top `k`.
pub fn precision_at_k(
    rankings: &BTreeMap<usize, Vec<ArticleId>>,
    oracle: &OracleLabels,
    k: usize,
) -> Metric {
    over_labeled(rankings, oracle, |ranked, labels| {
        let found = ranked.iter().take(k).filter(|a| labels.contains(a)).count();
        found as f64 / labels.len() as f64
    })
}

/// Oracle articles within the top `k`, pooled over questions, over all
/// oracle articles.
pub fn precision_at_k_micro(
    rankings: &BTreeMap<usize, Vec<ArticleId>>,
    oracle: &OracleLabels,
    k: usize,
) -> Metric {
    let mut found = 0usize;
    let mut total = 0usize;
    let m = over_labeled(rankings, oracle, |ranked, labels| {
        found += ranked.iter().take(k).filter(|a| labels.contains(a)).count();
        total += labels.len();
        0.0
    });
    Metric {
        value: if total == 0 {
            0.0
        } else {
            found as f64 / total as f64
        },
        ..m
    }
}

pub const UNKNOWN_CATEGORY: &str = "unknown";

/// Per category, the fraction of questions with gate value above 0.5.
/// Questions without a gate value count as closed.
pub fn gate_ratio(predictions: &[(Option<&str>, Option<f64>)]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (category, gate) in predictions {
        let c = counts
            .entry(category.unwrap_or(UNKNOWN_CATEGORY).to_string())
            .or_default();
        c.0 += 1;
        if gate.is_some_and(|g| g > 0.5) {
            c.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, (n, open))| (k, open as f64 / n as f64))
        .collect()
}
