use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ArticleId, Corpus, EncodedSequence};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{BiGru, Checkpoint, Grads, Graph, ParamId, ParamStore, Tensor, Var};

pub const CHECKPOINT_KIND: &str = "ranker";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankerKind {
    /// Sum over article positions of a powered, scaled cosine with the question.
    #[serde(rename = "wla")]
    Wla,
    /// Question vector dotted with the sum of article states.
    #[serde(rename = "sum")]
    SumHidden,
    /// Question vector dotted with a learned, question-independent pooling
    /// of article states.
    #[serde(rename = "qfa")]
    QueryFree,
}

impl RankerKind {
    pub fn name(self) -> &'static str {
        match self {
            RankerKind::Wla => "wla",
            RankerKind::SumHidden => "sum",
            RankerKind::QueryFree => "qfa",
        }
    }
}

impl fmt::Display for RankerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wla" => Ok(RankerKind::Wla),
            "sum" => Ok(RankerKind::SumHidden),
            "qfa" => Ok(RankerKind::QueryFree),
            _ => Err(Error::invalid(format!(
                "unknown ranker {s:?} (wla, sum, qfa)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankerConfig {
    pub kind: RankerKind,
    pub d_w: usize,
    pub hidden: usize,
    pub exponent: u32,
    /// L2-normalize the question vector and article states before scoring.
    pub normalize: bool,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub negatives: usize,
    /// Initial value of `w`. Unit-normalized terms start far below one, so
    /// a unit scale leaves the fourth power with almost no gradient.
    pub query_scale: f64,
    /// Initial value of `w'`.
    pub logit_scale: f64,
    /// Positive groups per Adam step.
    pub batch: usize,
    pub max_steps: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            kind: RankerKind::Wla,
            d_w: 16,
            hidden: 16,
            exponent: 4,
            normalize: true,
            query_scale: 12.0,
            logit_scale: 1e-3,
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            negatives: 10,
            batch: 32,
            max_steps: 2000,
            eval_every: 100,
            patience: 10,
            seed: 1,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_w == 0 || self.hidden == 0 {
            return Err(Error::invalid("ranker widths must be positive"));
        }
        if self.exponent == 0 {
            return Err(Error::invalid("exponent must be positive"));
        }
        if self.batch == 0 || self.eval_every == 0 {
            return Err(Error::invalid("batch and eval_every must be positive"));
        }
        if !self.query_scale.is_finite() || !self.logit_scale.is_finite() {
            return Err(Error::invalid("initial scales must be finite"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RankerModel<T> {
    pub config: RankerConfig,
    pub store: ParamStore<T>,
    word_emb: ParamId,
    caps_emb: ParamId,
    question_rnn: BiGru,
    article_rnn: BiGru,
    /// Query scale and shift inside the positional terms.
    pub w: ParamId,
    pub b: ParamId,
    /// Scale and shift of the relevance logit.
    pub w_out: ParamId,
    pub b_out: ParamId,
    pool: Option<ParamId>,
}

const EMBED_INIT: f64 = 0.05;

impl<T: Scalar> RankerModel<T> {
    pub fn new(config: RankerConfig, corpus: &Corpus) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(config.seed, rng::INIT, 1);
        let mut store = ParamStore::new();
        let word_emb = store.add_uniform(
            "word_emb",
            &[corpus.vocab.len(), config.d_w],
            EMBED_INIT,
            &mut r,
        )?;
        let caps_emb = store.add_uniform("caps_emb", &[2, config.d_w], EMBED_INIT, &mut r)?;
        let question_rnn = BiGru::new(
            &mut store,
            "question_rnn",
            config.d_w,
            config.hidden,
            &mut r,
        )?;
        let article_rnn = BiGru::new(&mut store, "article_rnn", config.d_w, config.hidden, &mut r)?;
        // Both encoders start from the same weights so that matching text gives
        // aligned states before any training.
        let names: Vec<String> = store.iter().map(|p| p.name.clone()).collect();
        for name in names.iter().filter(|n| n.starts_with("question_rnn.")) {
            let from = store.find(name).expect("listed above");
            let to = store
                .find(&name.replacen("question_rnn", "article_rnn", 1))
                .ok_or_else(|| Error::contract(format!("no article encoder block for {name}")))?;
            let value = store.value(from).clone();
            *store.value_mut(to) = value;
        }
        let w = store.add("w", Tensor::scalar(T::of(config.query_scale)))?;
        let b = store.add_zeros("b", &[1])?;
        let w_out = store.add("w_out", Tensor::scalar(T::of(config.logit_scale)))?;
        let b_out = store.add_zeros("b_out", &[1])?;
        let pool = if config.kind == RankerKind::QueryFree {
            Some(store.add_uniform("pool", &[2 * config.hidden], EMBED_INIT, &mut r)?)
        } else {
            None
        };
        Ok(RankerModel {
            config,
            store,
            word_emb,
            caps_emb,
            question_rnn,
            article_rnn,
            w,
            b,
            w_out,
            b_out,
            pool,
        })
    }

    fn embed(&self, g: &mut Graph<T>, seq: &EncodedSequence) -> Result<Var> {
        if seq.is_empty() {
            return Err(Error::invalid("cannot embed an empty sequence"));
        }
        let words: Vec<usize> = seq.words.iter().map(|w| w.index()).collect();
        let caps: Vec<usize> = seq.caps.iter().map(|&c| usize::from(c)).collect();
        let w = g.embed_ids(self.word_emb, &words)?;
        let c = g.embed_ids(self.caps_emb, &caps)?;
        g.add(w, c)
    }

    pub fn encode_question(&self, g: &mut Graph<T>, seq: &EncodedSequence) -> Result<Var> {
        let x = self.embed(g, seq)?;
        Ok(self.question_rnn.run(g, x)?.ends)
    }

    pub fn encode_article(&self, g: &mut Graph<T>, seq: &EncodedSequence) -> Result<Var> {
        let x = self.embed(g, seq)?;
        Ok(self.article_rnn.run(g, x)?.states)
    }

    /// `sum_i ((w v + b)^T h_i)^d`, on unit-normalized `v` and rows `h_i`
    /// when normalization is on. Zero rows contribute nothing.
    pub fn wla_score(&self, g: &mut Graph<T>, v: Var, states: Var) -> Result<Var> {
        let (v, h) = if self.config.normalize {
            (g.row_normalize(v), g.row_normalize(states))
        } else {
            (v, states)
        };
        let w = g.param(self.w);
        let b = g.param(self.b);
        let q = g.mul_scalar(v, w)?;
        let q = g.add_scalar(q, b)?;
        let terms = g.matvec(h, q)?;
        g.pow_sum(terms, self.config.exponent)
    }

    /// Inner product of the question vector with a pooled article vector.
    pub fn dual_encoder_score(
        &self,
        g: &mut Graph<T>,
        v: Var,
        states: Var,
        kind: RankerKind,
    ) -> Result<Var> {
        let pooled = match kind {
            RankerKind::SumHidden => g.colsum(states)?,
            RankerKind::QueryFree => {
                let pool = self
                    .pool
                    .ok_or_else(|| Error::invalid("model has no pooling vector"))?;
                let a = g.param(pool);
                let logits = g.matvec(states, a)?;
                let alpha = g.softmax(logits)?;
                g.matvec_t(states, alpha)?
            }
            RankerKind::Wla => return Err(Error::invalid("not a dual-encoder kind")),
        };
        g.dot(v, pooled)
    }

    pub fn score(&self, g: &mut Graph<T>, v: Var, states: Var) -> Result<Var> {
        match self.config.kind {
            RankerKind::Wla => self.wla_score(g, v, states),
            kind => self.dual_encoder_score(g, v, states, kind),
        }
    }

    /// `w_out * s + b_out`, the logit of the relevance probability.
    pub fn logit(&self, g: &mut Graph<T>, s: Var) -> Result<Var> {
        let w = g.param(self.w_out);
        let b = g.param(self.b_out);
        let ws = g.mul(w, s)?;
        g.add(ws, b)
    }

    pub fn wla_prob(&self, g: &mut Graph<T>, s: Var) -> Result<Var> {
        let z = self.logit(g, s)?;
        Ok(g.sigmoid(z))
    }

    /// Summed binary cross entropy over `(article, label)` pairs for one question.
    pub fn group_loss(
        &self,
        corpus: &Corpus,
        question: &EncodedSequence,
        samples: &[(ArticleId, bool)],
        grads: Option<&mut Grads<T>>,
    ) -> Result<T> {
        let mut g = Graph::new(&self.store);
        let v = self.encode_question(&mut g, question)?;
        let mut total: Option<Var> = None;
        for &(a, label) in samples {
            let h = self.encode_article(&mut g, &corpus.article(a).tokens)?;
            let s = self.score(&mut g, v, h)?;
            let z = self.logit(&mut g, s)?;
            let l = g.bce_with_logits(z, if label { T::one() } else { T::zero() })?;
            total = Some(match total {
                Some(t) => g.add(t, l)?,
                None => l,
            });
        }
        let total = total.ok_or_else(|| Error::invalid("no samples"))?;
        if let Some(grads) = grads {
            g.backward(total, grads)?;
        }
        Ok(g.value(total).item())
    }

    /// Article state matrices for every article, in id order.
    pub fn article_states(&self, corpus: &Corpus) -> Result<Vec<Tensor<T>>> {
        corpus
            .articles
            .iter()
            .map(|a| {
                let mut g = Graph::new(&self.store);
                let h = self.encode_article(&mut g, &a.tokens)?;
                Ok(g.value(h).clone())
            })
            .collect()
    }

    /// Relevance probabilities of `articles` given precomputed states.
    pub fn score_with_states(
        &self,
        question: &EncodedSequence,
        articles: &[ArticleId],
        states: &[Tensor<T>],
    ) -> Result<Vec<T>> {
        if articles.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new(&self.store);
        let v = self.encode_question(&mut g, question)?;
        articles
            .iter()
            .map(|a| {
                let h = g.input(states[a.index()].clone());
                let s = self.score(&mut g, v, h)?;
                let o = self.wla_prob(&mut g, s)?;
                Ok(g.value(o).item())
            })
            .collect()
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut meta = BTreeMap::new();
        meta.insert("config".to_string(), serde_json::to_string(&self.config)?);
        meta.insert(
            "vocab_size".to_string(),
            self.store.value(self.word_emb).rows().to_string(),
        );
        Ok(Checkpoint::from_store(CHECKPOINT_KIND, meta, &self.store))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.checkpoint()?.write(path)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, corpus: &Corpus) -> Result<Self> {
        let config: RankerConfig = serde_json::from_str(ckpt.meta("config")?)?;
        let mut model = RankerModel::new(config, corpus)?;
        ckpt.load_into(&mut model.store)?;
        Ok(model)
    }

    pub fn load(path: &Path, corpus: &Corpus) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path, CHECKPOINT_KIND)?, corpus)
    }
}
