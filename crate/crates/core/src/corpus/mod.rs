//! Entity lexicon, articles, question-answer pairs and vocabularies.

mod io;
mod lexicon;
pub mod synth;
mod tokenize;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{
    load_corpus, read_articles, read_entities, read_qa, write_corpus_dir, CorpusFiles, LoadOptions,
};
pub use lexicon::{match_entities, spans_to_positions, Lexicon, Span};
pub use synth::{
    synth_corpus, synth_raw, SynthConfig, CATEGORIES, CHOICE_CATEGORIES, SPAN_CATEGORIES,
};
pub use tokenize::{first_paragraph, tokenize};
pub use vocab::{build_vocab, Vocabulary, OOV, SEPARATOR};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArticleId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ArticleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl WordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    /// Lowercased tokens.
    pub surface: Vec<String>,
    /// Capitalization of each surface token in the display form.
    pub surface_caps: Vec<bool>,
    pub display: String,
}

impl Entity {
    pub fn new(id: EntityId, display: &str) -> Self {
        let (surface, surface_caps) = tokenize(display);
        Entity {
            id,
            surface,
            surface_caps,
            display: display.trim().to_string(),
        }
    }
}

/// Aligned word ids, capitalization flags and entity ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub words: Vec<WordId>,
    pub caps: Vec<bool>,
    pub entities: Vec<Option<EntityId>>,
}

impl EncodedSequence {
    pub fn new(
        words: Vec<WordId>,
        caps: Vec<bool>,
        entities: Vec<Option<EntityId>>,
    ) -> Result<Self> {
        if words.len() != caps.len() || words.len() != entities.len() {
            return Err(Error::invalid(format!(
                "sequence parts differ in length: {} words, {} caps, {} entities",
                words.len(),
                caps.len(),
                entities.len()
            )));
        }
        Ok(EncodedSequence {
            words,
            caps,
            entities,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Maximal runs of positions carrying the same entity id.
    pub fn spans(&self) -> Vec<Span> {
        let mut spans: Vec<Span> = Vec::new();
        for (i, e) in self.entities.iter().enumerate() {
            let Some(e) = *e else { continue };
            match spans.last_mut() {
                Some(last) if last.end == i && last.entity == e => last.end = i + 1,
                _ => spans.push(Span {
                    start: i,
                    end: i + 1,
                    entity: e,
                }),
            }
        }
        spans
    }

    /// Distinct entity ids in order of first occurrence.
    pub fn entity_set(&self) -> Vec<EntityId> {
        let mut seen = Vec::new();
        for e in self.entities.iter().flatten() {
            if !seen.contains(e) {
                seen.push(*e);
            }
        }
        seen
    }

    pub fn contains_entity(&self, e: EntityId) -> bool {
        self.entities.contains(&Some(e))
    }
}

#[derive(Clone, Debug)]
pub struct Article {
    pub id: ArticleId,
    pub title: String,
    pub title_entity: Option<EntityId>,
    /// Token strings of the first paragraph.
    pub surface: Vec<String>,
    pub tokens: EncodedSequence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!(
                "unknown split {other:?} (train, dev, test)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QaPair {
    pub id: usize,
    pub text: String,
    pub surface: Vec<String>,
    pub question: EncodedSequence,
    /// Sorted and deduplicated.
    pub answers: Vec<EntityId>,
    pub category: Option<String>,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawArticle {
    pub title: String,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQa {
    pub question: String,
    pub answers: Vec<String>,
    pub category: Option<String>,
    pub split: Option<Split>,
}

/// Unencoded corpus as read from files or produced by the generator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawCorpus {
    pub entities: Vec<String>,
    pub articles: Vec<RawArticle>,
    pub qa: Vec<RawQa>,
}

/// What ingestion discarded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub duplicate_entities: usize,
    pub empty_entities: usize,
    pub empty_articles: usize,
    pub dropped_qa: usize,
    pub dropped_questions: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub entities: Vec<Entity>,
    pub lexicon: Lexicon,
    pub vocab: Vocabulary,
    pub articles: Vec<Article>,
    pub qa: Vec<QaPair>,
}

struct Tokenized {
    surface: Vec<String>,
    caps: Vec<bool>,
    entities: Vec<Option<EntityId>>,
}

fn tokenize_and_match(text: &str, lexicon: &Lexicon) -> Tokenized {
    let (surface, caps) = tokenize(text);
    let spans = match_entities(&surface, lexicon);
    let entities = spans_to_positions(&spans, surface.len());
    Tokenized {
        surface,
        caps,
        entities,
    }
}

impl Corpus {
    /// Tokenizes, matches and encodes a raw corpus.
    ///
    /// Articles keep only their first paragraph and are dropped when it is
    /// empty. QA pairs with an answer outside the entity list are dropped.
    pub fn build(raw: RawCorpus, min_count: u64) -> Result<(Corpus, IngestReport)> {
        let mut report = IngestReport::default();
        let mut entities: Vec<Entity> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for line in &raw.entities {
            let id = EntityId(entities.len() as u32);
            let e = Entity::new(id, line);
            if e.surface.is_empty() {
                report.empty_entities += 1;
                continue;
            }
            if !seen.insert(e.surface.clone()) {
                report.duplicate_entities += 1;
                continue;
            }
            entities.push(e);
        }
        let lexicon = Lexicon::new(&entities);

        let mut articles = Vec::new();
        for a in &raw.articles {
            let body = first_paragraph(&a.text);
            let t = tokenize_and_match(&body, &lexicon);
            if t.surface.is_empty() {
                report.empty_articles += 1;
                continue;
            }
            let title_entity = lexicon.lookup(&tokenize(&a.title).0);
            articles.push((a.title.trim().to_string(), title_entity, t));
        }

        let mut questions = Vec::new();
        for q in &raw.qa {
            let mut answers = Vec::with_capacity(q.answers.len());
            for a in &q.answers {
                match lexicon.lookup(&tokenize(a).0) {
                    Some(id) => answers.push(id),
                    None => {
                        answers.clear();
                        break;
                    }
                }
            }
            if answers.is_empty() {
                log::warn!("dropping question with unknown answer: {}", q.question);
                report.dropped_qa += 1;
                report.dropped_questions.push(q.question.clone());
                continue;
            }
            answers.sort();
            answers.dedup();
            questions.push((q, answers, tokenize_and_match(&q.question, &lexicon)));
        }

        let texts = articles
            .iter()
            .map(|(_, _, t)| (&t.surface, &t.entities))
            .chain(questions.iter().map(|(_, _, t)| (&t.surface, &t.entities)));
        let vocab = Vocabulary::from_texts(texts, &entities, min_count)?;

        let encode = |t: Tokenized| EncodedSequence {
            words: t.surface.iter().map(|w| vocab.id(w)).collect(),
            caps: t.caps,
            entities: t.entities,
        };
        let articles = articles
            .into_iter()
            .enumerate()
            .map(|(i, (title, title_entity, t))| Article {
                id: ArticleId(i as u32),
                title,
                title_entity,
                surface: t.surface.clone(),
                tokens: encode(t),
            })
            .collect();
        let qa = questions
            .into_iter()
            .enumerate()
            .map(|(i, (q, answers, t))| QaPair {
                id: i,
                text: q.question.clone(),
                surface: t.surface.clone(),
                question: encode(t),
                answers,
                category: q.category.clone(),
                split: q.split.unwrap_or(Split::Train),
            })
            .collect();
        Ok((
            Corpus {
                entities,
                lexicon,
                vocab,
                articles,
                qa,
            },
            report,
        ))
    }

    /// Encodes new text against the corpus lexicon and vocabulary.
    pub fn encode_text(&self, text: &str) -> (Vec<String>, EncodedSequence) {
        let t = tokenize_and_match(text, &self.lexicon);
        let words = t.surface.iter().map(|w| self.vocab.id(w)).collect();
        (
            t.surface,
            EncodedSequence {
                words,
                caps: t.caps,
                entities: t.entities,
            },
        )
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn article(&self, id: ArticleId) -> &Article {
        &self.articles[id.index()]
    }

    pub fn find_entity(&self, name: &str) -> Option<EntityId> {
        self.lexicon.lookup(&tokenize(name).0)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &QaPair> {
        self.qa.iter().filter(move |q| q.split == split)
    }
}
