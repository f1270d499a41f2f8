use std::collections::BTreeMap;

use rand::seq::index;

use crate::corpus::{ArticleId, Corpus, EncodedSequence, EntityId, SEPARATOR};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Injective assignment of entity ids to entity-table columns for one
/// (question, context) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnonymizationMap {
    Random {
        columns: BTreeMap<EntityId, usize>,
        reserved: usize,
    },
    /// Column `i` for entity `i`; used when anonymization is switched off.
    Identity { n_entities: usize },
}

impl AnonymizationMap {
    /// Gives each distinct entity of `sequences` a distinct random column in `0..n_e`.
    pub fn random<'a>(
        sequences: impl IntoIterator<Item = &'a EncodedSequence>,
        n_e: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut entities: Vec<EntityId> = sequences
            .into_iter()
            .flat_map(|s| s.entities.iter().flatten().copied())
            .collect();
        entities.sort();
        entities.dedup();
        if entities.len() > n_e {
            return Err(Error::invalid(format!(
                "{} entities in one pair exceed the {n_e} anonymized columns",
                entities.len()
            )));
        }
        let picks = index::sample(rng, n_e, entities.len());
        let columns = entities.into_iter().zip(picks.iter()).collect();
        Ok(AnonymizationMap::Random {
            columns,
            reserved: n_e,
        })
    }

    pub fn identity(n_entities: usize) -> Self {
        AnonymizationMap::Identity { n_entities }
    }

    pub fn column(&self, e: EntityId) -> Option<usize> {
        match self {
            AnonymizationMap::Random { columns, .. } => columns.get(&e).copied(),
            AnonymizationMap::Identity { n_entities } => {
                (e.index() < *n_entities).then_some(e.index())
            }
        }
    }

    /// Column shared by every entity the map does not cover.
    pub fn reserved(&self) -> usize {
        match self {
            AnonymizationMap::Random { reserved, .. } => *reserved,
            AnonymizationMap::Identity { n_entities } => *n_entities,
        }
    }

    pub fn covers(&self, seq: &EncodedSequence) -> bool {
        seq.entities
            .iter()
            .flatten()
            .all(|&e| self.column(e).is_some())
    }

    /// Number of mapped entities (`None` for the identity map).
    pub fn len(&self) -> Option<usize> {
        match self {
            AnonymizationMap::Random { columns, .. } => Some(columns.len()),
            AnonymizationMap::Identity { .. } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

/// Up to `M` articles joined by the separator token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextBundle {
    pub articles: Vec<ArticleId>,
    pub sequence: EncodedSequence,
}

impl ContextBundle {
    /// Concatenates the first `max_articles` of `articles` in the given order.
    pub fn new(corpus: &Corpus, articles: &[ArticleId], max_articles: usize) -> Self {
        let chosen: Vec<ArticleId> = articles.iter().take(max_articles).copied().collect();
        let seqs: Vec<&EncodedSequence> =
            chosen.iter().map(|&a| &corpus.article(a).tokens).collect();
        ContextBundle {
            articles: chosen,
            sequence: Self::join(&seqs),
        }
    }

    pub fn join(seqs: &[&EncodedSequence]) -> EncodedSequence {
        let mut out = EncodedSequence::default();
        for (i, s) in seqs.iter().enumerate() {
            if i > 0 {
                out.words.push(SEPARATOR);
                out.caps.push(false);
                out.entities.push(None);
            }
            out.words.extend_from_slice(&s.words);
            out.caps.extend_from_slice(&s.caps);
            out.entities.extend_from_slice(&s.entities);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordId;
    use crate::rng;

    fn seq(entities: &[Option<u32>]) -> EncodedSequence {
        EncodedSequence::new(
            vec![WordId(2); entities.len()],
            vec![false; entities.len()],
            entities.iter().map(|e| e.map(EntityId)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn random_map_is_injective_and_covering() {
        let q = seq(&[Some(3), None]);
        let c = seq(&[Some(7), Some(7), None, Some(1), Some(3)]);
        for i in 0..50 {
            let mut r = rng::stream(9, rng::ANONYMIZATION, i);
            let m = AnonymizationMap::random([&q, &c], 5, &mut r).unwrap();
            assert!(m.covers(&q) && m.covers(&c));
            let cols: Vec<usize> = [1, 3, 7]
                .iter()
                .map(|&e| m.column(EntityId(e)).unwrap())
                .collect();
            assert!(cols.iter().all(|&c| c < 5));
            assert!(cols[0] != cols[1] && cols[1] != cols[2] && cols[0] != cols[2]);
            assert_eq!(m.reserved(), 5);
            assert_eq!(m.column(EntityId(4)), None);
        }
        let mut r = rng::stream(9, rng::ANONYMIZATION, 0);
        assert!(AnonymizationMap::random([&c], 2, &mut r).is_err());
    }

    #[test]
    fn join_inserts_entity_free_separators() {
        let a = seq(&[Some(1)]);
        let b = seq(&[Some(2), None]);
        let j = ContextBundle::join(&[&a, &b]);
        assert_eq!(j.len(), 4);
        assert_eq!(j.words[1], SEPARATOR);
        assert_eq!(j.entities[1], None);
        assert_eq!(j.entities[2], Some(EntityId(2)));
    }
}
