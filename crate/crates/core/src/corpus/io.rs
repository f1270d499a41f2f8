use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Corpus, IngestReport, RawArticle, RawCorpus, RawQa, Split};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusFiles {
    pub entities: PathBuf,
    pub articles: PathBuf,
    pub qa: Vec<(PathBuf, Split)>,
}

impl CorpusFiles {
    /// The standard layout: `entities.txt`, `articles.jsonl` (or
    /// `articles.txt`) and `{train,dev,test}.tsv`, skipping absent splits.
    pub fn in_dir(dir: &Path) -> Self {
        let jsonl = dir.join("articles.jsonl");
        let articles = if jsonl.exists() {
            jsonl
        } else {
            dir.join("articles.txt")
        };
        let qa = Split::ALL
            .iter()
            .map(|s| (dir.join(format!("{}.tsv", s.name())), *s))
            .filter(|(p, _)| p.exists())
            .collect();
        CorpusFiles {
            entities: dir.join("entities.txt"),
            articles,
            qa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    pub min_count: u64,
    pub max_articles: Option<usize>,
    /// Applied to each QA file separately.
    pub max_questions: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            min_count: 10,
            max_articles: None,
            max_questions: None,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn read_entities(path: &Path) -> Result<Vec<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

#[derive(Serialize, Deserialize)]
struct JsonArticle {
    #[serde(default)]
    id: Option<serde_json::Value>,
    title: String,
    text: String,
}

/// Reads blank-line separated records (title line, then body) or, when the
/// file ends in `.jsonl` or starts with `{`, one JSON object per line.
pub fn read_articles(path: &Path) -> Result<Vec<RawArticle>> {
    let text = read(path)?;
    let is_jsonl =
        path.extension().is_some_and(|e| e == "jsonl") || text.trim_start().starts_with('{');
    let mut out = Vec::new();
    if is_jsonl {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let a: JsonArticle =
                serde_json::from_str(line).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
            out.push(RawArticle {
                title: a.title,
                text: a.text,
            });
        }
        return Ok(out);
    }
    let mut record: Vec<&str> = Vec::new();
    let mut flush = |record: &mut Vec<&str>| {
        if let Some((title, body)) = record.split_first() {
            out.push(RawArticle {
                title: title.trim().to_string(),
                text: body.join("\n"),
            });
        }
        record.clear();
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut record);
        } else {
            record.push(line);
        }
    }
    flush(&mut record);
    Ok(out)
}

/// Reads `question TAB answer1|answer2 [TAB category]` lines.
pub fn read_qa(path: &Path, split: Split) -> Result<Vec<RawQa>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(parse_error(
                path,
                i + 1,
                format!(
                    "expected 2 or 3 tab-separated columns, found {}",
                    cols.len()
                ),
            ));
        }
        let question = cols[0].trim();
        if question.is_empty() {
            return Err(parse_error(path, i + 1, "empty question"));
        }
        let answers: Vec<String> = cols[1]
            .split('|')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(str::to_string)
            .collect();
        if answers.is_empty() {
            return Err(parse_error(path, i + 1, "no answers"));
        }
        let category = cols
            .get(2)
            .map(|c| c.trim())
            .filter(|c| !c.is_empty())
            .map(str::to_string);
        out.push(RawQa {
            question: question.to_string(),
            answers,
            category,
            split: Some(split),
        });
    }
    Ok(out)
}

pub fn load_corpus(files: &CorpusFiles, options: &LoadOptions) -> Result<(Corpus, IngestReport)> {
    let entities = read_entities(&files.entities)?;
    let mut articles = read_articles(&files.articles)?;
    if let Some(n) = options.max_articles {
        articles.truncate(n);
    }
    let mut qa = Vec::new();
    for (path, split) in &files.qa {
        let mut rows = read_qa(path, *split)?;
        if let Some(n) = options.max_questions {
            rows.truncate(n);
        }
        qa.extend(rows);
    }
    let raw = RawCorpus {
        entities,
        articles,
        qa,
    };
    Corpus::build(raw, options.min_count)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the standard layout read by [`CorpusFiles::in_dir`].
pub fn write_corpus_dir(raw: &RawCorpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entities = raw.entities.join("\n");
    entities.push('\n');
    write(&dir.join("entities.txt"), &entities)?;

    let mut articles = String::new();
    for (i, a) in raw.articles.iter().enumerate() {
        let row = JsonArticle {
            id: Some(serde_json::Value::from(i)),
            title: a.title.clone(),
            text: a.text.clone(),
        };
        articles.push_str(&serde_json::to_string(&row)?);
        articles.push('\n');
    }
    write(&dir.join("articles.jsonl"), &articles)?;

    for split in Split::ALL {
        let mut out = String::new();
        for q in raw
            .qa
            .iter()
            .filter(|q| q.split.unwrap_or(Split::Train) == split)
        {
            out.push_str(&q.question);
            out.push('\t');
            out.push_str(&q.answers.join("|"));
            if let Some(c) = &q.category {
                out.push('\t');
                out.push_str(c);
            }
            out.push('\n');
        }
        write(&dir.join(format!("{}.tsv", split.name())), &out)?;
    }
    Ok(())
}
