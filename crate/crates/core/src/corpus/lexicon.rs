use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Entity, EntityId};

/// A matched entity mention covering tokens `start..end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity: EntityId,
}

/// Lowercased entity surfaces, keyed by their token sequence.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    surfaces: HashMap<String, EntityId>,
    max_len: usize,
}

const JOIN: char = '\u{1f}';

fn key<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut k = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            k.push(JOIN);
        }
        k.push_str(&t.as_ref().to_lowercase());
    }
    k
}

impl Lexicon {
    /// Builds the lexicon; when two entities share a surface the lower id wins.
    pub fn new(entities: &[Entity]) -> Self {
        let mut lex = Lexicon::default();
        for e in entities {
            if e.surface.is_empty() {
                continue;
            }
            lex.surfaces.entry(key(&e.surface)).or_insert(e.id);
            lex.max_len = lex.max_len.max(e.surface.len());
        }
        lex
    }

    pub fn lookup<S: AsRef<str>>(&self, tokens: &[S]) -> Option<EntityId> {
        if tokens.is_empty() || tokens.len() > self.max_len {
            return None;
        }
        self.surfaces.get(&key(tokens)).copied()
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }
}

/// Maximal, non-overlapping, case-insensitive lexicon matches.
///
/// Scans left to right; at each position the longest matching surface wins
/// and scanning resumes after it (leftmost-longest).
pub fn match_entities<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_len.min(tokens.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|len| lexicon.lookup(&tokens[i..i + len]).map(|e| (len, e)));
        match hit {
            Some((len, entity)) => {
                spans.push(Span {
                    start: i,
                    end: i + len,
                    entity,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    spans
}

/// Per-position entity ids for `len` tokens covered by `spans`.
pub fn spans_to_positions(spans: &[Span], len: usize) -> Vec<Option<EntityId>> {
    let mut out = vec![None; len];
    for s in spans {
        for slot in &mut out[s.start..s.end] {
            *slot = Some(s.entity);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn lexicon(surfaces: &[&str]) -> (Lexicon, Vec<Entity>) {
        let entities: Vec<Entity> = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| Entity::new(EntityId(i as u32), s))
            .collect();
        (Lexicon::new(&entities), entities)
    }

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    /// Enumerate every matching interval, then keep leftmost-longest greedily.
    fn brute_force(tokens: &[String], lex: &Lexicon) -> Vec<Span> {
        let mut all = Vec::new();
        for s in 0..tokens.len() {
            for e in s + 1..=tokens.len() {
                if let Some(entity) = lex.lookup(&tokens[s..e]) {
                    all.push(Span {
                        start: s,
                        end: e,
                        entity,
                    });
                }
            }
        }
        all.sort_by_key(|sp| (sp.start, std::cmp::Reverse(sp.end)));
        let mut kept: Vec<Span> = Vec::new();
        for sp in all {
            if kept.last().is_none_or(|k| sp.start >= k.end) {
                kept.push(sp);
            }
        }
        kept
    }

    #[test]
    fn longest_match_wins() {
        let (lex, _) = lexicon(&["Blade Runner", "Runner"]);
        let spans = match_entities(&toks("blade runner"), &lex);
        assert_eq!(
            spans,
            [Span {
                start: 0,
                end: 2,
                entity: EntityId(0)
            }]
        );
    }

    #[test]
    fn figure_question() {
        let (lex, _) = lexicon(&["Blade Runner", "Ridley Scott"]);
        let (tokens, _) = tokenize("who directed the movie Blade Runner?");
        let spans = match_entities(&tokens, &lex);
        assert_eq!(
            spans,
            [Span {
                start: 4,
                end: 6,
                entity: EntityId(0)
            }]
        );
    }

    #[test]
    fn love_story_example() {
        let (lex, _) = lexicon(&["Love Story", "Love"]);
        let tokens = toks("love story about love");
        let expected = brute_force(&tokens, &lex);
        assert_eq!(
            expected,
            [
                Span {
                    start: 0,
                    end: 2,
                    entity: EntityId(0)
                },
                Span {
                    start: 3,
                    end: 4,
                    entity: EntityId(1)
                }
            ]
        );
        assert_eq!(match_entities(&tokens, &lex), expected);
    }

    #[test]
    fn case_is_ignored() {
        let (lex, _) = lexicon(&["Love Story"]);
        let upper: Vec<String> = toks("A LOVE Story");
        let lower: Vec<String> = upper.iter().map(|t| t.to_lowercase()).collect();
        assert_eq!(match_entities(&upper, &lex), match_entities(&lower, &lex));
        assert_eq!(match_entities(&upper, &lex).len(), 1);
    }

    #[test]
    fn duplicate_surface_keeps_lowest_id() {
        let (lex, _) = lexicon(&["Heat", "heat"]);
        assert_eq!(lex.lookup(&["heat"]), Some(EntityId(0)));
    }

    proptest::proptest! {
        #[test]
        fn greedy_matches_brute_force(
            words in proptest::collection::vec(0usize..5, 0..25),
        ) {
            let vocab = ["love", "story", "about", "night", "train"];
            let (lex, entities) = lexicon(&["love story", "love", "night train", "train", "story about love"]);
            let tokens: Vec<String> = words.iter().map(|&w| vocab[w].to_string()).collect();
            let spans = match_entities(&tokens, &lex);
            proptest::prop_assert_eq!(&spans, &brute_force(&tokens, &lex));
            for w in spans.windows(2) {
                proptest::prop_assert!(w[0].end <= w[1].start);
            }
            for s in &spans {
                let surface = &entities[s.entity.0 as usize].surface;
                proptest::prop_assert_eq!(&tokens[s.start..s.end], surface.as_slice());
            }
            let positions = spans_to_positions(&spans, tokens.len());
            for (i, p) in positions.iter().enumerate() {
                let inside = spans.iter().find(|s| s.start <= i && i < s.end);
                proptest::prop_assert_eq!(*p, inside.map(|s| s.entity));
            }
        }
    }
}
