//! Two-stage open-domain question answering.
//!
//! Retrieval ranks candidate articles for a question (entity matching, a
//! title/count heuristic, or a learned word-level attention ranker); the
//! reader then answers from the retrieved context with a gated mixture of an
//! attention-sum distribution over context entities and a softmax over a
//! fixed entity vocabulary.
//!
//! The numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what training and the
//! gradient checks use.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod reader;
pub mod retrieval;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = tensor::Tensor<f64>;
pub type ParamStore = tensor::ParamStore<f64>;
pub type Grads = tensor::Grads<f64>;
pub type Graph<'p> = tensor::Graph<'p, f64>;
pub type ReaderModel = reader::ReaderModel<f64>;
pub type RankerModel = retrieval::RankerModel<f64>;
pub type AnswerDistribution = reader::AnswerDistribution<f64>;

pub type TensorF32 = tensor::Tensor<f32>;
pub type ReaderModelF32 = reader::ReaderModel<f32>;
pub type RankerModelF32 = retrieval::RankerModel<f32>;
