use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{gate_ratio, precision_at_k, precision_at_k_micro, recall_at_k, UNKNOWN_CATEGORY};
use crate::corpus::{ArticleId, Corpus};
use crate::error::{Error, Result};
use crate::reader::ReaderPrediction;
use crate::retrieval::{OracleLabels, Ranking};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_KS: [usize; 4] = [1, 10, 30, 100];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub schema_version: u32,
    pub retriever: String,
    pub questions: usize,
    pub evaluated: usize,
    /// Questions without oracle labels, left out of every metric.
    pub excluded: usize,
    pub recall: BTreeMap<usize, f64>,
    pub precision: BTreeMap<usize, f64>,
    pub precision_micro: BTreeMap<usize, f64>,
}

impl RetrievalReport {
    pub fn compute(
        retriever: &str,
        rankings: &BTreeMap<usize, Vec<ArticleId>>,
        oracle: &OracleLabels,
        ks: &[usize],
    ) -> Self {
        let mut recall = BTreeMap::new();
        let mut precision = BTreeMap::new();
        let mut precision_micro = BTreeMap::new();
        let mut evaluated = 0;
        let mut excluded = 0;
        for &k in ks {
            let r = recall_at_k(rankings, oracle, k);
            evaluated = r.evaluated;
            excluded = r.excluded;
            recall.insert(k, r.value);
            precision.insert(k, precision_at_k(rankings, oracle, k).value);
            precision_micro.insert(k, precision_at_k_micro(rankings, oracle, k).value);
        }
        RetrievalReport {
            schema_version: SCHEMA_VERSION,
            retriever: retriever.to_string(),
            questions: rankings.len(),
            evaluated,
            excluded,
            recall,
            precision,
            precision_micro,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn table(&self) -> String {
        let mut out = format!("retriever {}\n", self.retriever);
        let ks: Vec<usize> = self.recall.keys().copied().collect();
        let header: Vec<String> = ks
            .iter()
            .map(|k| format!("R@{k}"))
            .chain(ks.iter().map(|k| format!("P@{k}")))
            .collect();
        let _ = writeln!(
            out,
            "{}",
            header.iter().map(|h| format!("{h:>7}")).collect::<String>()
        );
        let row: String = ks
            .iter()
            .map(|k| self.recall[k])
            .chain(ks.iter().map(|k| self.precision[k]))
            .map(|v| format!("{v:>7.3}"))
            .collect();
        let _ = writeln!(out, "{row}");
        let _ = writeln!(
            out,
            "questions {} evaluated {} excluded (no oracle) {}",
            self.questions, self.evaluated, self.excluded
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub questions: usize,
    pub hits_at_1: f64,
    pub gate_open: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReaderReport {
    pub schema_version: u32,
    pub variant: String,
    pub split: String,
    pub questions: usize,
    pub hits_at_1: f64,
    pub no_answer: usize,
    pub categories: BTreeMap<String, CategoryStats>,
}

impl ReaderReport {
    pub fn from_predictions(variant: &str, split: &str, predictions: &[ReaderPrediction]) -> Self {
        let mut categories: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for p in predictions {
            let c = categories
                .entry(
                    p.category
                        .clone()
                        .unwrap_or_else(|| UNKNOWN_CATEGORY.to_string()),
                )
                .or_default();
            c.0 += 1;
            c.1 += usize::from(p.correct);
        }
        let gates: Vec<(Option<&str>, Option<f64>)> = predictions
            .iter()
            .map(|p| (p.category.as_deref(), p.gate))
            .collect();
        let ratios = gate_ratio(&gates);
        let categories = categories
            .into_iter()
            .map(|(k, (n, h))| {
                let open = ratios.get(&k).copied().unwrap_or(0.0);
                (
                    k,
                    CategoryStats {
                        questions: n,
                        hits_at_1: h as f64 / n as f64,
                        gate_open: open,
                    },
                )
            })
            .collect();
        let hits = predictions.iter().filter(|p| p.correct).count();
        ReaderReport {
            schema_version: SCHEMA_VERSION,
            variant: variant.to_string(),
            split: split.to_string(),
            questions: predictions.len(),
            hits_at_1: if predictions.is_empty() {
                0.0
            } else {
                hits as f64 / predictions.len() as f64
            },
            no_answer: predictions.iter().filter(|p| p.entity.is_none()).count(),
            categories,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "variant {} split {}: hits@1 {:.3} over {} questions ({} without answer)\n",
            self.variant, self.split, self.hits_at_1, self.questions, self.no_answer
        );
        let _ = writeln!(
            out,
            "{:<24}{:>6}{:>9}{:>8}",
            "category", "n", "hits@1", "g>0.5"
        );
        for (k, c) in &self.categories {
            let _ = writeln!(
                out,
                "{k:<24}{:>6}{:>9.3}{:>8.2}",
                c.questions, c.hits_at_1, c.gate_open
            );
        }
        out
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `qid TAB ids TAB scores`, comma-separated lists.
pub fn write_retrieval_dump(path: &Path, rankings: &BTreeMap<usize, Ranking>) -> Result<()> {
    let mut out = String::new();
    for (qid, r) in rankings {
        let ids: Vec<String> = r.articles.iter().map(|a| a.0.to_string()).collect();
        let scores: Vec<String> = r.scores.iter().map(|s| format!("{s:.6}")).collect();
        let _ = writeln!(out, "{qid}\t{}\t{}", ids.join(","), scores.join(","));
    }
    write(path, &out)
}

/// `qid TAB ids`.
pub fn write_oracle_dump(path: &Path, oracle: &OracleLabels) -> Result<()> {
    let mut out = String::new();
    for (qid, labels) in &oracle.labels {
        let ids: Vec<String> = labels.iter().map(|a| a.0.to_string()).collect();
        let _ = writeln!(out, "{qid}\t{}", ids.join(","));
    }
    write(path, &out)
}

/// `qid TAB entity TAB gate TAB entity:prob,...` with display names.
pub fn write_predictions_dump(
    path: &Path,
    corpus: &Corpus,
    predictions: &[ReaderPrediction],
) -> Result<()> {
    let mut out = String::new();
    for p in predictions {
        let entity = p
            .entity
            .map_or("<none>".to_string(), |e| corpus.entity(e).display.clone());
        let gate = p.gate.map_or("-".to_string(), |g| format!("{g:.4}"));
        let top: Vec<String> = p
            .top
            .iter()
            .map(|(e, prob)| format!("{}:{prob:.4}", corpus.entity(*e).display))
            .collect();
        let _ = writeln!(out, "{}\t{entity}\t{gate}\t{}", p.qa_id, top.join(","));
    }
    write(path, &out)
}
