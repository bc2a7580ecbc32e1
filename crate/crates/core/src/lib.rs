//! Active-learning corpus construction and speaker generation over a
//! simulated candidate pool.
//!
//! The selection side partitions a source list, pre-screens candidates,
//! builds an estimator-filtered initial corpus, and grows it with samples
//! that are both good enough to train on and not yet well covered. The
//! generation side whitens speaker embeddings, models the principal
//! coordinates with a small diffusion model (a Gaussian mixture serves as
//! the baseline), and evaluates everything with exact optimal-transport and
//! spanning-tree measures.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod gmm;
pub mod linalg;
pub mod metrics;
pub mod partition;
pub mod quality;
pub mod rng;
pub mod screening;
pub mod selector;
pub mod whitening;
pub mod world;

pub use embedding::{corpus_merge, Corpus, CorpusEntry, DataSample, Embedding, EmbeddingSet};
pub use error::{Error, Result};
pub use quality::{QualityScore, QualityThreshold};
