//! Gated mixture reader: an attention-sum distribution over context
//! entities blended with a softmax over a fixed entity vocabulary.

mod anon;
mod forward;
mod model;
mod train;

pub use anon::{AnonymizationMap, ContextBundle};
pub use forward::{
    attend, attention_entity_distribution, context_summary, AnswerDistribution, AnswerSource,
    ForwardVars, LOSS_FLOOR,
};
pub use model::{ReaderConfig, ReaderModel, Variant, VocabChoice};
pub use train::{
    evaluate_reader, train_reader, ContextSource, ReaderEval, ReaderPrediction, TrainReport,
};
