use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntityId};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::{BiGru, Checkpoint, ParamId, ParamStore};

pub const CHECKPOINT_KIND: &str = "reader";

/// Which output distributions the model mixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Vocabulary softmax only.
    V,
    /// Attention sum only.
    A,
    /// Gated mixture over the full entity vocabulary.
    AV,
    /// Gated mixture over the frequent-entity vocabulary.
    AsV,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::V, Variant::A, Variant::AV, Variant::AsV];

    pub fn uses_attention(self) -> bool {
        self != Variant::V
    }

    pub fn uses_vocab(self) -> bool {
        self != Variant::A
    }

    pub fn has_gate(self) -> bool {
        matches!(self, Variant::AV | Variant::AsV)
    }

    pub fn vocab_choice(self) -> VocabChoice {
        if self == Variant::AsV {
            VocabChoice::Small
        } else {
            VocabChoice::Full
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::V => "V",
            Variant::A => "A",
            Variant::AV => "AV",
            Variant::AsV => "AsV",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown variant {s:?} (V, A, AV, AsV)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabChoice {
    Full,
    Small,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReaderConfig {
    pub d_w: usize,
    pub d_e: usize,
    pub hidden: usize,
    pub n_e: usize,
    pub max_articles: usize,
    pub variant: Variant,
    pub anonymize: bool,
    pub shuffle: bool,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Dev evaluations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        ReaderConfig {
            d_w: 100,
            d_e: 100,
            hidden: 128,
            n_e: 600,
            max_articles: 10,
            variant: Variant::AsV,
            anonymize: true,
            shuffle: true,
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch: 32,
            max_epochs: 30,
            patience: 3,
            seed: 1,
        }
    }
}

impl ReaderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_w == 0 || self.d_e == 0 || self.hidden == 0 {
            return Err(Error::invalid("reader widths must be positive"));
        }
        if self.n_e == 0 || self.max_articles == 0 || self.batch == 0 {
            return Err(Error::invalid(
                "n_e, max_articles and batch must be positive",
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Parameter handles of a reader, plus the entity bags its vocabulary
/// matrix is built from.
#[derive(Clone, Debug)]
pub struct ReaderModel<T> {
    pub config: ReaderConfig,
    pub store: ParamStore<T>,
    pub(crate) word_emb: ParamId,
    pub(crate) caps_emb: ParamId,
    pub(crate) entity_emb: ParamId,
    pub(crate) question_rnn: BiGru,
    pub(crate) context_rnn: BiGru,
    pub(crate) proj_w: ParamId,
    pub(crate) proj_b: ParamId,
    pub(crate) gate_w: Option<ParamId>,
    pub(crate) gate_b: Option<ParamId>,
    /// Entity-table columns excluding the reserved one.
    pub(crate) entity_columns: usize,
    pub(crate) vocab_entities: Vec<EntityId>,
    pub(crate) vocab_word_bags: Vec<Vec<usize>>,
    pub(crate) vocab_caps_bags: Vec<Vec<usize>>,
}

const EMBED_INIT: f64 = 0.05;

impl<T: Scalar> ReaderModel<T> {
    pub fn new(config: ReaderConfig, corpus: &Corpus) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(config.seed, rng::INIT, 0);
        let entity_columns = if config.anonymize {
            config.n_e
        } else {
            corpus.entities.len()
        };
        let mut store = ParamStore::new();
        let word_emb = store.add_uniform(
            "word_emb",
            &[corpus.vocab.len(), config.d_w],
            EMBED_INIT,
            &mut r,
        )?;
        let caps_emb = store.add_uniform("caps_emb", &[2, config.d_w], EMBED_INIT, &mut r)?;
        let entity_emb = store.add_uniform(
            "entity_emb",
            &[entity_columns + 1, config.d_e],
            EMBED_INIT,
            &mut r,
        )?;
        let input = config.d_w + config.d_e;
        let question_rnn = BiGru::new(&mut store, "question_rnn", input, config.hidden, &mut r)?;
        let context_rnn = BiGru::new(&mut store, "context_rnn", input, config.hidden, &mut r)?;
        let two_h = 2 * config.hidden;
        let proj_w = store.add_uniform(
            "proj_w",
            &[input, two_h],
            1.0 / (two_h as f64).sqrt(),
            &mut r,
        )?;
        let proj_b = store.add_zeros("proj_b", &[input])?;
        let (gate_w, gate_b) = if config.variant.has_gate() {
            (
                Some(store.add_zeros("gate_w", &[2])?),
                Some(store.add_zeros("gate_b", &[1])?),
            )
        } else {
            (None, None)
        };
        let mut model = ReaderModel {
            config,
            store,
            word_emb,
            caps_emb,
            entity_emb,
            question_rnn,
            context_rnn,
            proj_w,
            proj_b,
            gate_w,
            gate_b,
            entity_columns,
            vocab_entities: Vec::new(),
            vocab_word_bags: Vec::new(),
            vocab_caps_bags: Vec::new(),
        };
        model.set_vocabulary(corpus);
        Ok(model)
    }

    fn set_vocabulary(&mut self, corpus: &Corpus) {
        let ids = match self.config.variant.vocab_choice() {
            VocabChoice::Full => &corpus.vocab.entity_subset_full,
            VocabChoice::Small => &corpus.vocab.entity_subset_small,
        };
        self.vocab_entities = if self.config.variant.uses_vocab() {
            ids.clone()
        } else {
            Vec::new()
        };
        self.vocab_word_bags = self
            .vocab_entities
            .iter()
            .map(|&e| {
                corpus
                    .entity(e)
                    .surface
                    .iter()
                    .map(|w| corpus.vocab.id(w).index())
                    .collect()
            })
            .collect();
        self.vocab_caps_bags = self
            .vocab_entities
            .iter()
            .map(|&e| {
                corpus
                    .entity(e)
                    .surface_caps
                    .iter()
                    .map(|&c| usize::from(c))
                    .collect()
            })
            .collect();
    }

    /// Entities the vocabulary softmax ranges over.
    pub fn vocab_entities(&self) -> &[EntityId] {
        &self.vocab_entities
    }

    /// Number of entity-table columns an anonymization map may use; the
    /// column after them is reserved for entities outside the map.
    pub fn entity_columns(&self) -> usize {
        self.entity_columns
    }

    pub fn gate_params(&self) -> Option<(ParamId, ParamId)> {
        self.gate_w.zip(self.gate_b)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut meta = BTreeMap::new();
        meta.insert("config".to_string(), serde_json::to_string(&self.config)?);
        meta.insert(
            "vocab_size".to_string(),
            self.store.value(self.word_emb).rows().to_string(),
        );
        meta.insert(
            "entities".to_string(),
            self.vocab_entities.len().to_string(),
        );
        Ok(Checkpoint::from_store(CHECKPOINT_KIND, meta, &self.store))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.checkpoint()?.write(path)
    }

    /// Rebuilds a model from a checkpoint against the corpus it was trained on.
    pub fn from_checkpoint(ckpt: &Checkpoint, corpus: &Corpus) -> Result<Self> {
        let config: ReaderConfig = serde_json::from_str(ckpt.meta("config")?)?;
        let vocab_size: usize = ckpt
            .meta("vocab_size")?
            .parse()
            .map_err(|_| Error::invalid("bad vocab_size in checkpoint"))?;
        if vocab_size != corpus.vocab.len() {
            return Err(Error::invalid(format!(
                "checkpoint vocabulary has {vocab_size} words, corpus has {}",
                corpus.vocab.len()
            )));
        }
        let mut model = ReaderModel::new(config, corpus)?;
        ckpt.load_into(&mut model.store)?;
        Ok(model)
    }

    pub fn load(path: &Path, corpus: &Corpus) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path, CHECKPOINT_KIND)?, corpus)
    }
}
