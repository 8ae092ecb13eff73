//! The conditional next-token contract shared by every caption model:
//! given an image embedding and a caption prefix, a distribution over the
//! vocabulary for the next token.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::ImageEmbedding;
use crate::error::{Error, Result};
use crate::text::{EncodedCaption, NULL_INDEX, START_INDEX};

/// Tolerance on the total mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Whether a model may ever emit `index`. `<null>` and `<startseq>` are
/// structurally impossible continuations.
pub fn is_emittable(index: usize) -> bool {
    index != NULL_INDEX && index != START_INDEX
}

/// Probabilities over the whole vocabulary for the next token.
#[derive(Debug, Clone, PartialEq)]
pub struct NextTokenDistribution {
    probs: Vec<f64>,
}

impl NextTokenDistribution {
    /// Validates non-negativity, masking and normalization.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let dist = NextTokenDistribution { probs };
        dist.validate()?;
        Ok(dist)
    }

    /// Zeroes the masked entries and rescales the rest to sum to one.
    /// Falls back to uniform over emittable tokens when no mass remains.
    pub fn from_weights(mut weights: Vec<f64>) -> Self {
        for (i, w) in weights.iter_mut().enumerate() {
            if !is_emittable(i) || !w.is_finite() || *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
            NextTokenDistribution { probs: weights }
        } else {
            Self::uniform(weights.len())
        }
    }

    /// Uniform over the emittable tokens of a `vocab_size` vocabulary.
    pub fn uniform(vocab_size: usize) -> Self {
        let n = (0..vocab_size).filter(|&i| is_emittable(i)).count().max(1);
        let probs = (0..vocab_size)
            .map(|i| if is_emittable(i) { 1.0 / n as f64 } else { 0.0 })
            .collect();
        NextTokenDistribution { probs }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if let Some(p) = self.probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return bad(format!("invalid probability {p}"));
        }
        for i in [NULL_INDEX, START_INDEX] {
            if self.probs.get(i).is_some_and(|&p| p != 0.0) {
                return bad(format!("reserved index {i} has nonzero probability"));
            }
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return bad(format!("probabilities sum to {total}"));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs.get(index).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Highest-probability index; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Up to `k` indices with positive probability, by descending
    /// probability then ascending index.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .probs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

/// A conditional next-token model, `P(next | prefix, image)`.
///
/// Implementations are immutable once trained, so `predict_next` may be
/// called from many threads.
pub trait Scorer: Sync {
    fn vocab_size(&self) -> usize;

    fn predict_next(
        &self,
        embedding: &ImageEmbedding,
        prefix: &EncodedCaption,
    ) -> Result<NextTokenDistribution>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn predict_next(&self, embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        (**self).predict_next(embedding, prefix)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn predict_next(&self, embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        (**self).predict_next(embedding, prefix)
    }
}

/// Random softmax tables keyed by the full prefix and the embedding.
///
/// Each distinct `(prefix, embedding)` pair gets its own distribution, drawn
/// lazily from a generator seeded by the pair, so the scorer is a fixed
/// deterministic function without storing a table. Useful for exercising
/// decoders against arbitrary context-dependent models.
#[derive(Debug, Clone)]
pub struct RandomTableScorer {
    vocab_size: usize,
    seed: u64,
    /// Softmax temperature applied to standard-normal logits.
    temperature: f64,
}

impl RandomTableScorer {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        Self::with_temperature(vocab_size, seed, 1.0)
    }

    pub fn with_temperature(vocab_size: usize, seed: u64, temperature: f64) -> Self {
        RandomTableScorer {
            vocab_size,
            seed,
            temperature,
        }
    }

    fn context_seed(&self, embedding: &ImageEmbedding, prefix: &[usize]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        let mut mix = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for v in embedding.values() {
            mix(u64::from(v.to_bits()));
        }
        mix(u64::MAX);
        for &t in prefix {
            mix(t as u64);
        }
        h
    }
}

impl Scorer for RandomTableScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn predict_next(&self, embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.context_seed(embedding, prefix.tokens()));
        let logits: Vec<f64> = (0..self.vocab_size)
            .map(|_| {
                // Box-Muller
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        Ok(softmax_masked(&logits, self.temperature))
    }
}

/// A scorer backed by an explicit lookup from the last `k` prefix tokens to
/// a distribution, with a fallback for unlisted contexts. Handy for
/// hand-built decoding scenarios.
#[derive(Debug, Clone)]
pub struct LookupScorer {
    vocab_size: usize,
    table: HashMap<Vec<usize>, NextTokenDistribution>,
    fallback: NextTokenDistribution,
}

impl LookupScorer {
    pub fn new(vocab_size: usize, fallback: NextTokenDistribution) -> Self {
        LookupScorer {
            vocab_size,
            table: HashMap::new(),
            fallback,
        }
    }

    /// Registers the distribution used when the prefix equals `prefix`.
    pub fn insert(&mut self, prefix: Vec<usize>, dist: NextTokenDistribution) {
        self.table.insert(prefix, dist);
    }
}

impl Scorer for LookupScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn predict_next(&self, _embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        Ok(self
            .table
            .get(prefix.tokens())
            .unwrap_or(&self.fallback)
            .clone())
    }
}

/// Softmax over the emittable entries of `logits / temperature`; masked
/// entries are exactly zero.
pub fn softmax_masked(logits: &[f64], temperature: f64) -> NextTokenDistribution {
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| is_emittable(i))
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights = logits
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if is_emittable(i) {
                ((l - max) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    NextTokenDistribution::from_weights(weights)
}
