use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::anon::{AnonymizationMap, ContextBundle};
use super::forward::AnswerSource;
use super::model::{ReaderConfig, ReaderModel};
use crate::corpus::{ArticleId, Corpus, EntityId, QaPair, Split};
use crate::error::Result;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{Adam, Grads};

/// Anything that can rank articles for a question, best first.
pub trait ContextSource {
    fn rank(&self, qa: &QaPair) -> Vec<ArticleId>;
}

impl ContextSource for HashMap<usize, Vec<ArticleId>> {
    fn rank(&self, qa: &QaPair) -> Vec<ArticleId> {
        self.get(&qa.id).cloned().unwrap_or_default()
    }
}

impl ContextSource for BTreeMap<usize, Vec<ArticleId>> {
    fn rank(&self, qa: &QaPair) -> Vec<ArticleId> {
        self.get(&qa.id).cloned().unwrap_or_default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub steps: usize,
    pub instances: usize,
    /// Training pairs skipped because retrieval returned nothing.
    pub skipped_empty: usize,
    pub mean_loss: Vec<f64>,
    /// Dev hits@1 at every half epoch.
    pub dev_curve: Vec<f64>,
    pub best_dev: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReaderPrediction {
    pub qa_id: usize,
    pub entity: Option<EntityId>,
    pub gate: Option<f64>,
    pub source: Option<AnswerSource>,
    /// Up to five best candidates with their probabilities.
    pub top: Vec<(EntityId, f64)>,
    pub correct: bool,
    pub category: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReaderEval {
    pub predictions: Vec<ReaderPrediction>,
    pub hits_at_1: f64,
}

fn anonymization<T: Scalar>(
    model: &ReaderModel<T>,
    qa: &QaPair,
    context: &ContextBundle,
    rng: &mut rng::Rng,
) -> Result<AnonymizationMap> {
    if model.config.anonymize {
        AnonymizationMap::random([&qa.question, &context.sequence], model.config.n_e, rng)
    } else {
        Ok(AnonymizationMap::identity(model.entity_columns()))
    }
}

impl<T: Scalar> ReaderModel<T> {
    /// Answers with the evaluation anonymization map of the pair.
    pub fn answer(
        &self,
        qa: &QaPair,
        context: &ContextBundle,
    ) -> Result<super::AnswerDistribution<T>> {
        let mut r = rng::stream(self.config.seed, rng::EVAL_ANONYMIZATION, qa.id as u64);
        let anon = anonymization(self, qa, context, &mut r)?;
        self.forward(&qa.question, context, &anon)
    }
}

/// Predictions and hits@1 on one split, reading the top `max_articles`
/// articles in retrieval order.
pub fn evaluate_reader<T: Scalar>(
    model: &ReaderModel<T>,
    corpus: &Corpus,
    source: &dyn ContextSource,
    split: Split,
) -> Result<ReaderEval> {
    let mut predictions = Vec::new();
    for qa in corpus.split(split) {
        let context = ContextBundle::new(corpus, &source.rank(qa), model.config.max_articles);
        let dist = model.answer(qa, &context)?;
        let entity = dist.predict();
        let top = dist
            .ranked()
            .into_iter()
            .take(5)
            .map(|(e, p)| (e, p.to_f64_lossy()))
            .collect();
        predictions.push(ReaderPrediction {
            qa_id: qa.id,
            entity,
            gate: dist.gate.map(|g| g.to_f64_lossy()),
            source: entity.map(|e| dist.source(e)),
            top,
            correct: entity.is_some_and(|e| qa.answers.contains(&e)),
            category: qa.category.clone(),
        });
    }
    let hits = predictions.iter().filter(|p| p.correct).count();
    let hits_at_1 = if predictions.is_empty() {
        0.0
    } else {
        hits as f64 / predictions.len() as f64
    };
    Ok(ReaderEval {
        predictions,
        hits_at_1,
    })
}

/// Trains a reader on the train split, keeping the parameters with the best
/// dev hits@1 (checked every half epoch).
pub fn train_reader<T: Scalar>(
    corpus: &Corpus,
    source: &dyn ContextSource,
    config: &ReaderConfig,
) -> Result<(ReaderModel<T>, TrainReport)> {
    let start = Instant::now();
    let mut model = ReaderModel::<T>::new(config.clone(), corpus)?;
    let adam = Adam {
        lr: config.lr,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: config.eps,
    };
    let mut report = TrainReport::default();
    let mut train: Vec<(&QaPair, Vec<ArticleId>)> = Vec::new();
    for qa in corpus.split(Split::Train) {
        let mut ranked = source.rank(qa);
        ranked.truncate(config.max_articles);
        if ranked.is_empty() {
            report.skipped_empty += 1;
        } else {
            train.push((qa, ranked));
        }
    }
    let has_dev = corpus.split(Split::Dev).next().is_some();
    let mut best: Option<(f64, Vec<crate::tensor::Tensor<T>>)> = None;
    let mut stale = 0;
    let mut grads = Grads::for_store(&model.store);
    let mut in_batch = 0usize;
    let half = train.len().div_ceil(2).max(1);

    'epochs: for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::stream(config.seed, rng::ORDER, epoch as u64));
        let mut total_loss = 0.0;
        for (pos, &i) in order.iter().enumerate() {
            let (qa, ranked) = &train[i];
            let key = ((epoch as u64) << 32) | qa.id as u64;
            let mut articles = ranked.clone();
            if config.shuffle {
                articles.shuffle(&mut rng::stream(config.seed, rng::SHUFFLING, key));
            }
            let context = ContextBundle::new(corpus, &articles, config.max_articles);
            let anon = anonymization(
                &model,
                qa,
                &context,
                &mut rng::stream(config.seed, rng::ANONYMIZATION, key),
            )?;
            let loss = model.loss(&qa.question, &context, &anon, &qa.answers, Some(&mut grads))?;
            total_loss += loss.to_f64_lossy();
            report.instances += 1;
            in_batch += 1;
            let last = pos + 1 == order.len();
            if in_batch == config.batch || last {
                model
                    .store
                    .accumulate(&grads, T::one() / T::of(in_batch as f64))?;
                adam.step(&mut model.store);
                grads.clear();
                in_batch = 0;
                report.steps += 1;
            }
            if has_dev && (pos + 1 == half || last) {
                let dev = evaluate_reader(&model, corpus, source, Split::Dev)?.hits_at_1;
                log::info!("epoch {epoch} step {} dev hits@1 {dev:.4}", report.steps);
                report.dev_curve.push(dev);
                if best.as_ref().is_none_or(|(b, _)| dev > *b) {
                    best = Some((dev, model.store.snapshot()));
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= config.patience {
                        report.mean_loss.push(total_loss / (pos + 1) as f64);
                        report.epochs = epoch + 1;
                        break 'epochs;
                    }
                }
            }
        }
        report
            .mean_loss
            .push(total_loss / order.len().max(1) as f64);
        report.epochs = epoch + 1;
    }
    if let Some((dev, snapshot)) = best {
        model.store.restore(&snapshot)?;
        report.best_dev = Some(dev);
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok((model, report))
}
