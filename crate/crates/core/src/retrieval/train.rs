use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use serde::Serialize;

use super::candidates::{candidates_r0, EntityIndex};
use super::oracle::OracleLabels;
use super::ranker::{RankerConfig, RankerModel};
use crate::corpus::{ArticleId, Corpus, QaPair, Split};
use crate::error::Result;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{Adam, Grads, Tensor};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RankerTrainReport {
    pub steps: usize,
    pub groups: usize,
    /// Training questions without an oracle label.
    pub unlabeled: usize,
    /// Positives skipped because no negative article exists.
    pub skipped_no_negatives: usize,
    /// `(step, dev R@1)` at each evaluation.
    pub dev_curve: Vec<(usize, f64)>,
    /// Mean group loss over each evaluation interval.
    pub loss_curve: Vec<f64>,
    pub best_dev: Option<f64>,
    pub seconds: f64,
}

/// Fraction of labeled questions whose top-ranked candidate is a label.
pub(crate) fn dev_recall_at_1<T: Scalar>(
    model: &RankerModel<T>,
    corpus: &Corpus,
    index: &EntityIndex,
    oracle: &OracleLabels,
    split: Split,
) -> Result<f64> {
    let states = model.article_states(corpus)?;
    let mut hits = 0;
    let mut total = 0;
    for qa in corpus.split(split) {
        let Some(labels) = oracle.get(qa.id) else {
            continue;
        };
        total += 1;
        let ids: Vec<ArticleId> = candidates_r0(qa, corpus, index)
            .candidates
            .iter()
            .map(|c| c.article)
            .collect();
        let probs = model.score_with_states(&qa.question, &ids, &states)?;
        let mut best: Option<(ArticleId, T)> = None;
        for (&a, &p) in ids.iter().zip(&probs) {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((a, p));
            }
        }
        if best.is_some_and(|(a, _)| labels.contains(&a)) {
            hits += 1;
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    })
}

/// `count` negatives: hard ones from the candidate set first, then
/// corpus-wide ones when the candidate set runs short.
fn sample_negatives(
    rng: &mut rng::Rng,
    pool: &[ArticleId],
    labels: &[ArticleId],
    n_articles: usize,
    count: usize,
) -> Vec<ArticleId> {
    let hard: Vec<ArticleId> = pool
        .iter()
        .copied()
        .filter(|a| !labels.contains(a))
        .collect();
    let mut out: Vec<ArticleId> = if hard.len() > count {
        index::sample(rng, hard.len(), count)
            .iter()
            .map(|i| hard[i])
            .collect()
    } else {
        hard
    };
    let available = n_articles - labels.len();
    let want = count.min(available);
    let mut tries = 0;
    while out.len() < want && tries < 100 * count {
        let a = ArticleId(rng.gen_range(0..n_articles) as u32);
        if !labels.contains(&a) && !out.contains(&a) {
            out.push(a);
        }
        tries += 1;
    }
    out
}

/// Trains with one positive and `negatives` negatives per group, stopping
/// early on dev R@1.
pub fn train_ranker<T: Scalar>(
    corpus: &Corpus,
    oracle: &OracleLabels,
    config: &RankerConfig,
) -> Result<(RankerModel<T>, RankerTrainReport)> {
    let start = Instant::now();
    let mut model = RankerModel::<T>::new(config.clone(), corpus)?;
    let index = EntityIndex::new(corpus);
    let adam = Adam {
        lr: config.lr,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: config.eps,
    };
    let mut report = RankerTrainReport::default();
    let mut positives: Vec<(&QaPair, ArticleId, Vec<ArticleId>)> = Vec::new();
    for qa in corpus.split(Split::Train) {
        let Some(labels) = oracle.get(qa.id) else {
            report.unlabeled += 1;
            continue;
        };
        let pool: Vec<ArticleId> = candidates_r0(qa, corpus, &index)
            .candidates
            .iter()
            .map(|c| c.article)
            .collect();
        for &l in labels {
            positives.push((qa, l, pool.clone()));
        }
    }
    let has_dev = corpus.split(Split::Dev).any(|q| oracle.get(q.id).is_some());
    let mut best: Option<(f64, Vec<Tensor<T>>)> = None;
    let mut stale = 0;
    let mut grads = Grads::for_store(&model.store);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0u64;
    let mut group = 0u64;
    let mut interval_loss = 0.0;
    let mut interval_groups = 0usize;

    while report.steps < config.max_steps && !positives.is_empty() {
        let mut in_batch = 0;
        while in_batch < config.batch {
            if cursor == order.len() {
                order = (0..positives.len()).collect();
                order.shuffle(&mut rng::stream(config.seed, rng::RANKER_ORDER, epoch));
                epoch += 1;
                cursor = 0;
            }
            let (qa, positive, pool) = &positives[order[cursor]];
            cursor += 1;
            group += 1;
            let labels = oracle.get(qa.id).unwrap_or_default();
            let mut r = rng::stream(config.seed, rng::NEGATIVES, group);
            let negatives = sample_negatives(
                &mut r,
                pool,
                labels,
                corpus.articles.len(),
                config.negatives,
            );
            if negatives.is_empty() {
                report.skipped_no_negatives += 1;
                if report.skipped_no_negatives > positives.len() {
                    break;
                }
                continue;
            }
            let mut samples = vec![(*positive, true)];
            samples.extend(negatives.into_iter().map(|a| (a, false)));
            interval_loss += model
                .group_loss(corpus, &qa.question, &samples, Some(&mut grads))?
                .to_f64_lossy();
            interval_groups += 1;
            in_batch += 1;
            report.groups += 1;
        }
        if in_batch == 0 {
            break;
        }
        model
            .store
            .accumulate(&grads, T::one() / T::of(in_batch as f64))?;
        adam.step(&mut model.store);
        grads.clear();
        report.steps += 1;

        let due = report.steps % config.eval_every == 0 || report.steps == config.max_steps;
        if due {
            report
                .loss_curve
                .push(interval_loss / interval_groups.max(1) as f64);
            interval_loss = 0.0;
            interval_groups = 0;
        }
        if has_dev && due {
            let dev = dev_recall_at_1(&model, corpus, &index, oracle, Split::Dev)?;
            log::info!("ranker step {} dev R@1 {dev:.4}", report.steps);
            report.dev_curve.push((report.steps, dev));
            if best.as_ref().is_none_or(|(b, _)| dev >= *b) {
                best = Some((dev, model.store.snapshot()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    if let Some((dev, snapshot)) = best {
        model.store.restore(&snapshot)?;
        report.best_dev = Some(dev);
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok((model, report))
}
