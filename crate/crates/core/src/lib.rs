//! Image captioning toolkit: caption normalization, image embeddings,
//! next-token scorers (n-gram and LSTM), discounted beam search decoding,
//! and caption quality metrics.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod decoder;
pub mod embedding;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod ngram;
pub mod scorer;
pub mod synthetic;
pub mod text;

pub use decoder::{beam_search, caption_image, greedy_select, score_candidate, BeamConfig, Candidate, Caption};
pub use embedding::{EmbeddingStore, ImageEmbedding};
pub use error::{Error, Result};
pub use neural::{ArchitectureKind, ArchitectureSpec, NeuralModel};
pub use ngram::NgramModel;
pub use scorer::{NextTokenDistribution, Scorer};
pub use text::{normalize_caption, EncodedCaption, TokenSequence, Vocabulary};
