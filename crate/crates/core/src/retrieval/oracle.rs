use std::collections::BTreeMap;

use super::candidates::EntityIndex;
use crate::corpus::{ArticleId, Corpus, QaPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuestionType {
    /// The answers are movies.
    XToMovie,
    /// The question names a movie.
    MovieToX,
}

/// From the category label when it has one; otherwise answers that title
/// an article mean `XToMovie`, and a question entity that titles an article
/// means `MovieToX`.
pub fn question_type(qa: &QaPair, index: &EntityIndex) -> Option<QuestionType> {
    if let Some(c) = qa.category.as_deref() {
        if c.ends_with("_to_movie") || c.ends_with("_to_movies") {
            return Some(QuestionType::XToMovie);
        }
        if c.starts_with("movie_to_") {
            return Some(QuestionType::MovieToX);
        }
    }
    if qa
        .answers
        .iter()
        .any(|&a| !index.articles_titled(a).is_empty())
    {
        return Some(QuestionType::XToMovie);
    }
    if qa
        .question
        .entity_set()
        .iter()
        .any(|&e| !index.articles_titled(e).is_empty())
    {
        return Some(QuestionType::MovieToX);
    }
    None
}

/// Relevant articles per question from distant supervision.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleLabels {
    /// Question id to ascending article ids; never empty.
    pub labels: BTreeMap<usize, Vec<ArticleId>>,
    /// Questions left without a label.
    pub excluded: Vec<usize>,
}

impl OracleLabels {
    pub fn get(&self, qa_id: usize) -> Option<&[ArticleId]> {
        self.labels.get(&qa_id).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Answer-movie articles for questions asking for movies; the article of
/// the movie named in the question otherwise.
pub fn build_oracle(corpus: &Corpus, index: &EntityIndex) -> OracleLabels {
    let mut out = OracleLabels::default();
    for qa in &corpus.qa {
        let mut labels: Vec<ArticleId> = match question_type(qa, index) {
            Some(QuestionType::XToMovie) => qa
                .answers
                .iter()
                .flat_map(|&a| index.articles_titled(a).iter().copied())
                .collect(),
            Some(QuestionType::MovieToX) => qa
                .question
                .entity_set()
                .into_iter()
                .flat_map(|e| index.articles_titled(e).iter().copied())
                .collect(),
            None => Vec::new(),
        };
        labels.sort();
        labels.dedup();
        if labels.is_empty() {
            out.excluded.push(qa.id);
        } else {
            out.labels.insert(qa.id, labels);
        }
    }
    out
}
