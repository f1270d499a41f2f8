//! Candidate generation by entity matching, a title/count heuristic, a
//! learned word-level attention ranker and two dual-encoder baselines.

mod candidates;
mod oracle;
mod ranker;
mod train;

pub use candidates::{candidates_r0, score_r1, Candidate, CandidateSet, EntityIndex, TITLE_BONUS};
pub use oracle::{build_oracle, question_type, OracleLabels, QuestionType};
pub use ranker::{RankerConfig, RankerKind, RankerModel};
pub use train::{train_ranker, RankerTrainReport};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{ArticleId, Corpus, QaPair};
use crate::error::{Error, Result};
use crate::reader::ContextSource;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    /// Entity-matched candidates in random order.
    R0,
    /// Title match, then number of matched entities.
    R1,
    /// Learned ranker over the entity-matched candidates.
    R2,
}

impl RetrieverKind {
    pub fn name(self) -> &'static str {
        match self {
            RetrieverKind::R0 => "r0",
            RetrieverKind::R1 => "r1",
            RetrieverKind::R2 => "r2",
        }
    }
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RetrieverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r0" => Ok(RetrieverKind::R0),
            "r1" => Ok(RetrieverKind::R1),
            "r2" => Ok(RetrieverKind::R2),
            _ => Err(Error::invalid(format!(
                "unknown retriever {s:?} (r0, r1, r2)"
            ))),
        }
    }
}

/// Ranked articles for one question with the score behind each position.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ranking {
    pub articles: Vec<ArticleId>,
    pub scores: Vec<f64>,
}

/// Ranks articles for questions of one corpus.
pub struct Retriever<'a, T: Scalar> {
    corpus: &'a Corpus,
    index: EntityIndex,
    kind: RetrieverKind,
    ranker: Option<(&'a RankerModel<T>, Vec<crate::tensor::Tensor<T>>)>,
    seed: u64,
}

impl<'a, T: Scalar> Retriever<'a, T> {
    pub fn new(corpus: &'a Corpus, kind: RetrieverKind, seed: u64) -> Result<Self> {
        if kind == RetrieverKind::R2 {
            return Err(Error::invalid("the r2 retriever needs a trained ranker"));
        }
        Ok(Retriever {
            corpus,
            index: EntityIndex::new(corpus),
            kind,
            ranker: None,
            seed,
        })
    }

    /// An R2 retriever; article encodings are computed once up front.
    pub fn learned(corpus: &'a Corpus, ranker: &'a RankerModel<T>, seed: u64) -> Result<Self> {
        let states = ranker.article_states(corpus)?;
        Ok(Retriever {
            corpus,
            index: EntityIndex::new(corpus),
            kind: RetrieverKind::R2,
            ranker: Some((ranker, states)),
            seed,
        })
    }

    pub fn kind(&self) -> RetrieverKind {
        self.kind
    }

    pub fn index(&self) -> &EntityIndex {
        &self.index
    }

    pub fn candidates(&self, qa: &QaPair) -> CandidateSet {
        candidates_r0(qa, self.corpus, &self.index)
    }

    /// The full ordering of the entity-matched candidates.
    pub fn ranking(&self, qa: &QaPair) -> Result<Ranking> {
        let set = self.candidates(qa);
        let mut scored: Vec<(ArticleId, f64)> = match self.kind {
            RetrieverKind::R0 => {
                let mut ids: Vec<ArticleId> = set.candidates.iter().map(|c| c.article).collect();
                ids.shuffle(&mut rng::stream(self.seed, rng::SELECTION, qa.id as u64));
                let n = ids.len();
                return Ok(Ranking {
                    articles: ids,
                    scores: (0..n).map(|i| (n - i) as f64).collect(),
                });
            }
            RetrieverKind::R1 => set
                .candidates
                .iter()
                .map(|c| (c.article, score_r1(c)))
                .collect(),
            RetrieverKind::R2 => {
                let (ranker, states) = self.ranker.as_ref().expect("r2 retrievers carry a ranker");
                let ids: Vec<ArticleId> = set.candidates.iter().map(|c| c.article).collect();
                let probs = ranker.score_with_states(&qa.question, &ids, states)?;
                ids.into_iter()
                    .zip(probs.into_iter().map(|p| p.to_f64_lossy()))
                    .collect()
            }
        };
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        Ok(Ranking {
            articles: scored.iter().map(|s| s.0).collect(),
            scores: scored.iter().map(|s| s.1).collect(),
        })
    }

    /// Top `m` articles.
    pub fn retrieve(&self, qa: &QaPair, m: usize) -> Result<Vec<ArticleId>> {
        let mut r = self.ranking(qa)?.articles;
        r.truncate(m);
        Ok(r)
    }

    /// Rankings for every question in `qas`, keyed by question id.
    pub fn rank_all<'q>(
        &self,
        qas: impl IntoIterator<Item = &'q QaPair>,
    ) -> Result<BTreeMap<usize, Ranking>> {
        qas.into_iter()
            .map(|q| Ok((q.id, self.ranking(q)?)))
            .collect()
    }
}

impl<T: Scalar> ContextSource for Retriever<'_, T> {
    fn rank(&self, qa: &QaPair) -> Vec<ArticleId> {
        self.ranking(qa).map(|r| r.articles).unwrap_or_default()
    }
}

impl ContextSource for BTreeMap<usize, Ranking> {
    fn rank(&self, qa: &QaPair) -> Vec<ArticleId> {
        self.get(&qa.id)
            .map(|r| r.articles.clone())
            .unwrap_or_default()
    }
}
