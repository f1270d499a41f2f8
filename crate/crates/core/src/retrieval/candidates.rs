use std::collections::BTreeMap;

use crate::corpus::{ArticleId, Corpus, EntityId, QaPair};

/// Score added for a title match; larger than any possible entity count.
pub const TITLE_BONUS: f64 = 1e6;

/// For each entity, the articles mentioning it; for each title entity, its articles.
#[derive(Clone, Debug)]
pub struct EntityIndex {
    mentions: Vec<Vec<ArticleId>>,
    titles: Vec<Vec<ArticleId>>,
}

impl EntityIndex {
    pub fn new(corpus: &Corpus) -> Self {
        let n = corpus.entities.len();
        let mut mentions = vec![Vec::new(); n];
        let mut titles = vec![Vec::new(); n];
        for a in &corpus.articles {
            for e in a.tokens.entity_set() {
                mentions[e.index()].push(a.id);
            }
            if let Some(t) = a.title_entity {
                titles[t.index()].push(a.id);
            }
        }
        for m in &mut mentions {
            m.sort();
            m.dedup();
        }
        EntityIndex { mentions, titles }
    }

    pub fn articles_mentioning(&self, e: EntityId) -> &[ArticleId] {
        self.mentions.get(e.index()).map_or(&[], |v| v.as_slice())
    }

    pub fn articles_titled(&self, e: EntityId) -> &[ArticleId] {
        self.titles.get(e.index()).map_or(&[], |v| v.as_slice())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub article: ArticleId,
    /// Distinct question entities the article mentions.
    pub matched: usize,
    /// The article's title entity occurs in the question.
    pub title_match: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub qa_id: usize,
    pub question_entities: Vec<EntityId>,
    /// Ascending article id.
    pub candidates: Vec<Candidate>,
    /// Set when the set is empty, saying why.
    pub diagnostic: Option<String>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, a: ArticleId) -> bool {
        self.candidates
            .binary_search_by_key(&a, |c| c.article)
            .is_ok()
    }
}

/// Every article sharing at least one entity with the question.
pub fn candidates_r0(qa: &QaPair, corpus: &Corpus, index: &EntityIndex) -> CandidateSet {
    let mut question_entities = qa.question.entity_set();
    question_entities.sort();
    let mut matched: BTreeMap<ArticleId, usize> = BTreeMap::new();
    for &e in &question_entities {
        for &a in index.articles_mentioning(e) {
            *matched.entry(a).or_default() += 1;
        }
    }
    let candidates: Vec<Candidate> = matched
        .into_iter()
        .map(|(article, matched)| Candidate {
            article,
            matched,
            title_match: corpus
                .article(article)
                .title_entity
                .is_some_and(|t| question_entities.binary_search(&t).is_ok()),
        })
        .collect();
    let diagnostic = if question_entities.is_empty() {
        Some("question mentions no entity".to_string())
    } else if candidates.is_empty() {
        Some("no article mentions the question's entities".to_string())
    } else {
        None
    };
    CandidateSet {
        qa_id: qa.id,
        question_entities,
        candidates,
        diagnostic,
    }
}

/// Title bonus plus matched-entity count.
pub fn score_r1(c: &Candidate) -> f64 {
    let title = if c.title_match { TITLE_BONUS } else { 0.0 };
    title + c.matched as f64
}
