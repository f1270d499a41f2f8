//! Corpus to retrieval to reader, as run by the command line and the
//! end-to-end tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{synth_corpus, ArticleId, Corpus, Split, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{ReaderReport, RetrievalReport, DEFAULT_KS, SCHEMA_VERSION};
use crate::reader::{
    evaluate_reader, train_reader, AnonymizationMap, ContextBundle, ReaderConfig, ReaderModel,
    TrainReport, Variant,
};
use crate::retrieval::{
    build_oracle, train_ranker, EntityIndex, OracleLabels, RankerConfig, RankerModel,
    RankerTrainReport, Ranking, Retriever, RetrieverKind,
};
use crate::rng;
use crate::tensor::{grad_check, GradCheckReport};

/// Rankings of every question in `split` (all questions when `None`).
pub fn rankings(
    corpus: &Corpus,
    kind: RetrieverKind,
    ranker: Option<&RankerModel<f64>>,
    seed: u64,
    split: Option<Split>,
) -> Result<BTreeMap<usize, Ranking>> {
    let retriever = match (kind, ranker) {
        (RetrieverKind::R2, Some(r)) => Retriever::learned(corpus, r, seed)?,
        _ => Retriever::new(corpus, kind, seed)?,
    };
    match split {
        Some(s) => retriever.rank_all(corpus.split(s)),
        None => retriever.rank_all(&corpus.qa),
    }
}

pub fn article_lists(rankings: &BTreeMap<usize, Ranking>) -> BTreeMap<usize, Vec<ArticleId>> {
    rankings
        .iter()
        .map(|(q, r)| (*q, r.articles.clone()))
        .collect()
}

pub fn oracle(corpus: &Corpus) -> OracleLabels {
    build_oracle(corpus, &EntityIndex::new(corpus))
}

/// Everything a run reports; contains no timings, so identical seeds give
/// identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub retrieval: Vec<RetrievalReport>,
    pub ranker_dev_curve: Option<Vec<(usize, f64)>>,
    pub reader_dev_curve: Vec<f64>,
    pub reader: ReaderReport,
}

impl PipelineReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub struct PipelineRun {
    pub report: PipelineReport,
    pub reader: ReaderModel<f64>,
    pub reader_train: TrainReport,
    pub ranker: Option<RankerModel<f64>>,
    pub ranker_train: Option<RankerTrainReport>,
}

/// Trains the ranker when the configured retriever needs it, reports
/// retrieval on the test split for every available retriever, then trains
/// and evaluates the reader on the configured retriever's contexts.
pub fn run(corpus: &Corpus, config: &RunConfig) -> Result<PipelineRun> {
    config.validate()?;
    let labels = oracle(corpus);
    let (ranker, ranker_train) = if config.retriever == RetrieverKind::R2 {
        let (m, rep) = train_ranker::<f64>(corpus, &labels, &config.ranker)?;
        (Some(m), Some(rep))
    } else {
        (None, None)
    };

    let mut retrieval = Vec::new();
    for kind in [RetrieverKind::R0, RetrieverKind::R1, RetrieverKind::R2] {
        if kind == RetrieverKind::R2 && ranker.is_none() {
            continue;
        }
        let r = rankings(
            corpus,
            kind,
            ranker.as_ref(),
            config.retrieval_seed,
            Some(Split::Test),
        )?;
        retrieval.push(RetrievalReport::compute(
            kind.name(),
            &article_lists(&r),
            &labels,
            &DEFAULT_KS,
        ));
    }

    let contexts = rankings(
        corpus,
        config.retriever,
        ranker.as_ref(),
        config.retrieval_seed,
        None,
    )?;
    let (reader, reader_train) = train_reader::<f64>(corpus, &contexts, &config.reader)?;
    let eval = evaluate_reader(&reader, corpus, &contexts, Split::Test)?;
    let report = PipelineReport {
        schema_version: SCHEMA_VERSION,
        retrieval,
        ranker_dev_curve: ranker_train.as_ref().map(|r| r.dev_curve.clone()),
        reader_dev_curve: reader_train.dev_curve.clone(),
        reader: ReaderReport::from_predictions(
            config.reader.variant.name(),
            Split::Test.name(),
            &eval.predictions,
        ),
    };
    Ok(PipelineRun {
        report,
        reader,
        reader_train,
        ranker,
        ranker_train,
    })
}

/// [`run`] on the corpus generated from `config.synth`.
pub fn run_synthetic(config: &RunConfig) -> Result<(Corpus, PipelineRun)> {
    let corpus = synth_corpus(&config.synth, config.min_count)?;
    let run = run(&corpus, config)?;
    Ok((corpus, run))
}

fn toy_corpus() -> Result<Corpus> {
    synth_corpus(
        &SynthConfig {
            n_movies: 6,
            ..SynthConfig::default()
        },
        1,
    )
}

/// Finite-difference check of the full reader loss on one question with a
/// two-article context, at tiny widths so every coordinate can be probed.
pub fn gradcheck_reader(variant: Variant, h: f64, tol: f64) -> Result<GradCheckReport> {
    let corpus = toy_corpus()?;
    let qa = &corpus.qa[0];
    let ranked = Retriever::<f64>::new(&corpus, RetrieverKind::R1, 1)?.ranking(qa)?;
    let context = ContextBundle::new(&corpus, &ranked.articles, 2);
    let mut distinct: Vec<_> = [&qa.question, &context.sequence]
        .iter()
        .flat_map(|s| s.entities.iter().flatten().copied())
        .collect();
    distinct.sort();
    distinct.dedup();
    let config = ReaderConfig {
        d_w: 3,
        d_e: 2,
        hidden: 2,
        n_e: distinct.len() + 2,
        max_articles: 2,
        variant,
        ..ReaderConfig::default()
    };
    let proto = ReaderModel::<f64>::new(config, &corpus)?;
    let mut rng = rng::stream(1, rng::ANONYMIZATION, 0);
    let anon = AnonymizationMap::random(
        [&qa.question, &context.sequence],
        proto.config.n_e,
        &mut rng,
    )?;
    let mut store = proto.store.clone();
    grad_check(
        &mut store,
        |s, g| {
            let mut m = proto.clone();
            m.store = s.clone();
            m.loss(&qa.question, &context, &anon, &qa.answers, g)
        },
        h,
        tol,
    )
}

/// Finite-difference check of the ranker's group loss on one question, its
/// oracle article and two negatives.
pub fn gradcheck_ranker(h: f64, tol: f64) -> Result<GradCheckReport> {
    let corpus = toy_corpus()?;
    let labels = oracle(&corpus);
    let (&qid, positives) = labels
        .labels
        .iter()
        .next()
        .ok_or_else(|| Error::invalid("toy corpus has no oracle labels"))?;
    let positive = positives[0];
    let mut samples = vec![(positive, true)];
    samples.extend(
        corpus
            .articles
            .iter()
            .map(|a| a.id)
            .filter(|&a| a != positive)
            .take(2)
            .map(|a| (a, false)),
    );
    let config = RankerConfig {
        d_w: 3,
        hidden: 2,
        ..RankerConfig::default()
    };
    let proto = RankerModel::<f64>::new(config, &corpus)?;
    let question = &corpus
        .qa
        .iter()
        .find(|q| q.id == qid)
        .ok_or_else(|| Error::invalid("oracle label for an unknown question"))?
        .question;
    let mut store = proto.store.clone();
    grad_check(
        &mut store,
        |s, g| {
            let mut m = proto.clone();
            m.store = s.clone();
            m.group_loss(&corpus, question, &samples, g)
        },
        h,
        tol,
    )
}
