//! Embedding-level multi-hop retrieval.
//!
//! A small gated cross-attention network rewrites a query embedding after
//! each retrieval round: the next-hop query is `q - c + g(q, c)` where `c`
//! is a retrieved chunk embedding and `g` a learned elementwise gate. The
//! controller in [`multihop`] fans out over the top-k chunks per round,
//! prunes redundant and low-scoring branches by rule, and collects the
//! union of retrieved chunks. [`training`] fits the gate contrastively on
//! hop-level (query, context, next-gold-chunk) triples; [`data`] builds
//! those triples from decomposition records and can generate a synthetic
//! corpus with known multi-hop structure; [`eval`] compares direct and
//! multi-hop retrieval on recall and latency.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! `*32`/`*64` aliases below pick the concrete type; stores and models
//! convert between the two with their `convert` methods. On-disk formats
//! are fixed-width little-endian and independent of the in-memory scalar.

pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod linalg;
pub mod model;
pub mod multihop;
pub mod store;
pub mod training;

mod binio;
mod scalar;
mod seeding;

pub use embedding::Embedding;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Embedding32 = Embedding<f32>;
pub type Embedding64 = Embedding<f64>;
pub type Store32 = store::VectorStore<f32>;
pub type Store64 = store::VectorStore<f64>;
pub type Model32 = model::ModelParams<f32>;
pub type Model64 = model::ModelParams<f64>;
