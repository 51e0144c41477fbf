//! Unified retrieve-then-reason question answering over knowledge graphs.
//!
//! One matching/propagation model scores abstract subgraphs to retrieve a
//! small question-specific subgraph and then, initialised from the retrieval
//! parameters, reasons over that subgraph to rank answer entities.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); aliases
//! such as [`ModelParams64`] fix the precision.

pub mod abstraction;
pub mod config;
pub mod encoder;
pub mod error;
pub mod kg;
pub mod linalg;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ModelParams32 = model::ModelParams<f32>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type Encoder32 = encoder::Encoder<f32>;
pub type Encoder64 = encoder::Encoder<f64>;
