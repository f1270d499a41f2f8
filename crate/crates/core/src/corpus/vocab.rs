use std::collections::HashMap;

use serde::Serialize;

use super::{Corpus, Entity, EntityId, WordId};
use crate::error::{Error, Result};

/// Reserved id for words never seen while building the vocabulary.
pub const OOV: WordId = WordId(0);
/// Reserved id for the token placed between concatenated articles.
pub const SEPARATOR: WordId = WordId(1);

const RESERVED: [&str; 2] = ["<unk>", "<sep>"];

#[derive(Clone, Debug, Serialize)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, WordId>,
    entity_counts: Vec<u64>,
    min_count: u64,
    pub entity_subset_full: Vec<EntityId>,
    pub entity_subset_small: Vec<EntityId>,
}

impl Vocabulary {
    /// Counts words and entity mentions over `(tokens, entity positions)` texts.
    ///
    /// Word ids after the reserved ones follow descending count, then
    /// lexicographic order. Entity surface words absent from every text still
    /// get an id (with count zero) so entity vectors never hit the OOV row.
    pub(crate) fn from_texts<'a>(
        texts: impl Iterator<Item = (&'a Vec<String>, &'a Vec<Option<EntityId>>)>,
        entities: &[Entity],
        min_count: u64,
    ) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::invalid(format!(
                "min_count must be at least 1, got {min_count}"
            )));
        }
        let mut word_counts: HashMap<&str, u64> = HashMap::new();
        let mut entity_counts = vec![0u64; entities.len()];
        for (tokens, positions) in texts {
            for t in tokens {
                *word_counts.entry(t.as_str()).or_default() += 1;
            }
            let mut prev = None;
            for p in positions {
                if let Some(e) = p {
                    if prev != Some(*e) {
                        entity_counts[e.index()] += 1;
                    }
                }
                prev = *p;
            }
        }
        for e in entities {
            for w in &e.surface {
                word_counts.entry(w.as_str()).or_default();
            }
        }
        for r in RESERVED {
            word_counts.remove(r);
        }
        let mut ordered: Vec<(&str, u64)> = word_counts.into_iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut words: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0, 0];
        for (w, c) in ordered {
            words.push(w.to_string());
            counts.push(c);
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), WordId(i as u32)))
            .collect();
        let entity_subset_full = entities.iter().map(|e| e.id).collect();
        let entity_subset_small = entities
            .iter()
            .filter(|e| entity_counts[e.id.index()] >= min_count)
            .map(|e| e.id)
            .collect();
        Ok(Vocabulary {
            words,
            counts,
            index,
            entity_counts,
            min_count,
            entity_subset_full,
            entity_subset_small,
        })
    }

    pub fn id(&self, word: &str) -> WordId {
        self.index.get(word).copied().unwrap_or(OOV)
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id.index()]
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id.index()]
    }

    /// Number of word ids, reserved ones included.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() == RESERVED.len()
    }

    /// Mentions of `e` across question and article text.
    pub fn entity_count(&self, e: EntityId) -> u64 {
        self.entity_counts[e.index()]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }
}

/// Rebuilds the vocabulary of `corpus` with a different frequency threshold.
pub fn build_vocab(corpus: &Corpus, min_count: u64) -> Result<Vocabulary> {
    let texts = corpus
        .articles
        .iter()
        .map(|a| (&a.surface, &a.tokens.entities))
        .chain(corpus.qa.iter().map(|q| (&q.surface, &q.question.entities)));
    Vocabulary::from_texts(texts, &corpus.entities, min_count)
}
