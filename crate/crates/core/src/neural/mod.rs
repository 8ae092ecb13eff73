//! Toy neural caption models built from scratch: word embeddings, a dense
//! image projection, a single-layer LSTM and a softmax output layer, with
//! hand-written backpropagation through time.
//!
//! Three ways of wiring the image in:
//!
//! * **inject**: the projected image is the first "word" fed to the LSTM;
//!   the final hidden state feeds the output layer.
//! * **merge-concat**: the LSTM reads only the caption; its final hidden
//!   state is concatenated with the (ReLU) image projection.
//! * **merge-add**: as merge-concat, but the two vectors are summed, which
//!   halves the input width of the output layer.

mod io;
mod train;

pub use io::{load_word_vectors, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    learning_rate_at, train, train_model, EarlyStopping, EpochLoss, NesterovSgd, StopDecision, TrainConfig,
    TrainOutcome,
};

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::TrainingExample;
use crate::embedding::{EmbeddingStore, ImageEmbedding};
use crate::error::{Error, Result};
use crate::scorer::{is_emittable, NextTokenDistribution, Scorer};
use crate::text::{EncodedCaption, DEFAULT_MAX_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchitectureKind {
    Inject,
    MergeConcat,
    MergeAdd,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 3] = [
        ArchitectureKind::Inject,
        ArchitectureKind::MergeConcat,
        ArchitectureKind::MergeAdd,
    ];

    pub(crate) fn code(self) -> u8 {
        match self {
            ArchitectureKind::Inject => 0,
            ArchitectureKind::MergeConcat => 1,
            ArchitectureKind::MergeAdd => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchitectureKind::Inject => "inject",
            ArchitectureKind::MergeConcat => "merge-concat",
            ArchitectureKind::MergeAdd => "merge-add",
        })
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "inject" => Ok(ArchitectureKind::Inject),
            "merge-concat" | "concat" => Ok(ArchitectureKind::MergeConcat),
            "merge-add" | "add" => Ok(ArchitectureKind::MergeAdd),
            other => Err(Error::InvalidArchitecture(format!("unknown kind {other:?}"))),
        }
    }
}

/// Layer sizes of a caption model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub kind: ArchitectureKind,
    pub embedding_dim: usize,
    pub lstm_hidden_dim: usize,
    pub image_dense_dim: usize,
    /// Width of the incoming image features (4096 for VGG16).
    pub image_input_dim: usize,
    pub vocab_size: usize,
    pub max_len: usize,
}

impl ArchitectureSpec {
    /// Full-size layer widths: 300 for inject, 256 for both merge models.
    pub fn full_size(kind: ArchitectureKind, vocab_size: usize, image_input_dim: usize) -> Self {
        let d = if kind == ArchitectureKind::Inject { 300 } else { 256 };
        Self::uniform(kind, d, vocab_size, image_input_dim)
    }

    /// Every hidden width equal to `dim`.
    pub fn uniform(kind: ArchitectureKind, dim: usize, vocab_size: usize, image_input_dim: usize) -> Self {
        ArchitectureSpec {
            kind,
            embedding_dim: dim,
            lstm_hidden_dim: dim,
            image_dense_dim: dim,
            image_input_dim,
            vocab_size,
            max_len: DEFAULT_MAX_LEN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArchitecture(m));
        if [
            self.embedding_dim,
            self.lstm_hidden_dim,
            self.image_dense_dim,
            self.image_input_dim,
        ]
        .contains(&0)
        {
            return bad("all layer widths must be >= 1".into());
        }
        if self.vocab_size < 3 {
            return bad(format!("vocabulary of {} is too small", self.vocab_size));
        }
        match self.kind {
            ArchitectureKind::Inject
                if !(self.image_dense_dim == self.embedding_dim
                    && self.embedding_dim == self.lstm_hidden_dim) =>
            {
                bad(format!(
                    "inject needs image_dense_dim = embedding_dim = lstm_hidden_dim, got {}/{}/{}",
                    self.image_dense_dim, self.embedding_dim, self.lstm_hidden_dim
                ))
            }
            ArchitectureKind::MergeAdd if self.image_dense_dim != self.lstm_hidden_dim => bad(format!(
                "merge-add needs image_dense_dim = lstm_hidden_dim, got {}/{}",
                self.image_dense_dim, self.lstm_hidden_dim
            )),
            _ => Ok(()),
        }
    }

    /// Input width of the output layer.
    pub fn combined_dim(&self) -> usize {
        match self.kind {
            ArchitectureKind::Inject | ArchitectureKind::MergeAdd => self.lstm_hidden_dim,
            ArchitectureKind::MergeConcat => self.lstm_hidden_dim + self.image_dense_dim,
        }
    }

    /// Number of LSTM steps for a prefix of `prefix_len` tokens.
    pub fn sequence_len(&self, prefix_len: usize) -> usize {
        match self.kind {
            ArchitectureKind::Inject => prefix_len + 1,
            _ => prefix_len,
        }
    }
}

/// All trainable weights, in serialization order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    /// V x E
    pub word_embedding: Array2<f64>,
    /// image_input_dim x image_dense_dim
    pub image_weight: Array2<f64>,
    pub image_bias: Array1<f64>,
    /// E x 4H, gate blocks ordered input, forget, cell, output
    pub lstm_input_weight: Array2<f64>,
    /// H x 4H
    pub lstm_recurrent_weight: Array2<f64>,
    pub lstm_bias: Array1<f64>,
    /// combined_dim x V
    pub output_weight: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl ModelParameters {
    pub fn zeros(spec: &ArchitectureSpec) -> Self {
        let (v, e, h, p, d) = (
            spec.vocab_size,
            spec.embedding_dim,
            spec.lstm_hidden_dim,
            spec.image_dense_dim,
            spec.image_input_dim,
        );
        ModelParameters {
            word_embedding: Array2::zeros((v, e)),
            image_weight: Array2::zeros((d, p)),
            image_bias: Array1::zeros(p),
            lstm_input_weight: Array2::zeros((e, 4 * h)),
            lstm_recurrent_weight: Array2::zeros((h, 4 * h)),
            lstm_bias: Array1::zeros(4 * h),
            output_weight: Array2::zeros((spec.combined_dim(), v)),
            output_bias: Array1::zeros(v),
        }
    }

    /// Glorot-uniform matrices, zero biases, forget-gate bias 1.
    pub fn init(spec: &ArchitectureSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(spec);
        for m in [
            &mut params.word_embedding,
            &mut params.image_weight,
            &mut params.lstm_input_weight,
            &mut params.lstm_recurrent_weight,
            &mut params.output_weight,
        ] {
            let (fan_in, fan_out) = m.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            m.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
        }
        let h = spec.lstm_hidden_dim;
        params.lstm_bias.slice_mut(s![h..2 * h]).fill(1.0);
        params
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.word_embedding.as_slice().expect("standard layout"),
            self.image_weight.as_slice().expect("standard layout"),
            self.image_bias.as_slice().expect("standard layout"),
            self.lstm_input_weight.as_slice().expect("standard layout"),
            self.lstm_recurrent_weight.as_slice().expect("standard layout"),
            self.lstm_bias.as_slice().expect("standard layout"),
            self.output_weight.as_slice().expect("standard layout"),
            self.output_bias.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.word_embedding.as_slice_mut().expect("standard layout"),
            self.image_weight.as_slice_mut().expect("standard layout"),
            self.image_bias.as_slice_mut().expect("standard layout"),
            self.lstm_input_weight.as_slice_mut().expect("standard layout"),
            self.lstm_recurrent_weight.as_slice_mut().expect("standard layout"),
            self.lstm_bias.as_slice_mut().expect("standard layout"),
            self.output_weight.as_slice_mut().expect("standard layout"),
            self.output_bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub const TENSOR_NAMES: [&'static str; 8] = [
        "word_embedding",
        "image_weight",
        "image_bias",
        "lstm_input_weight",
        "lstm_recurrent_weight",
        "lstm_bias",
        "output_weight",
        "output_bias",
    ];

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, scale: f64, other: &ModelParameters) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParameters;

/// A trained (or freshly initialized) caption model.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub spec: ArchitectureSpec,
    pub params: ModelParameters,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-step LSTM activations kept for the backward pass.
struct LstmStep {
    input: Array1<f64>,
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    c_tanh: Array1<f64>,
}

struct ForwardCache {
    image: Array1<f64>,
    /// Pre-activation of the image projection.
    image_pre: Array1<f64>,
    steps: Vec<LstmStep>,
    combined: Array1<f64>,
    logits: Array1<f64>,
}

impl NeuralModel {
    /// Freshly initialized model; identical seeds give bit-identical weights.
    pub fn build(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(NeuralModel {
            spec,
            params: ModelParameters::init(&spec, seed),
        })
    }

    pub fn from_parts(spec: ArchitectureSpec, params: ModelParameters) -> Result<Self> {
        spec.validate()?;
        let expect = ModelParameters::zeros(&spec);
        for ((name, a), b) in ModelParameters::TENSOR_NAMES
            .iter()
            .zip(params.tensors())
            .zip(expect.tensors())
        {
            if a.len() != b.len() {
                return Err(Error::InvalidArchitecture(format!(
                    "{name} has {} entries, expected {}",
                    a.len(),
                    b.len()
                )));
            }
        }
        Ok(NeuralModel { spec, params })
    }

    fn image_vector(&self, embedding: &ImageEmbedding) -> Result<Array1<f64>> {
        if embedding.dim() != self.spec.image_input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.image_input_dim,
                found: embedding.dim(),
            });
        }
        Ok(embedding.values().iter().map(|&v| f64::from(v)).collect())
    }

    fn check_prefix(&self, prefix: &EncodedCaption) -> Result<()> {
        if prefix.true_length() == 0 {
            return Err(Error::InvalidArgument("prefix must hold at least <startseq>".into()));
        }
        if let Some(&bad) = prefix.tokens().iter().find(|&&t| t >= self.spec.vocab_size) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                vocab_size: self.spec.vocab_size,
            });
        }
        Ok(())
    }

    fn forward_cached(&self, embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<ForwardCache> {
        self.check_prefix(prefix)?;
        let p = &self.params;
        let hdim = self.spec.lstm_hidden_dim;
        let image = self.image_vector(embedding)?;
        let image_pre = image.dot(&p.image_weight) + &p.image_bias;
        let image_act = match self.spec.kind {
            ArchitectureKind::Inject => image_pre.clone(),
            _ => image_pre.mapv(|v| v.max(0.0)),
        };

        let mut inputs: Vec<Array1<f64>> = Vec::with_capacity(prefix.true_length() + 1);
        if self.spec.kind == ArchitectureKind::Inject {
            inputs.push(image_act.clone());
        }
        inputs.extend(prefix.tokens().iter().map(|&t| p.word_embedding.row(t).to_owned()));

        let mut h = Array1::zeros(hdim);
        let mut c = Array1::zeros(hdim);
        let mut steps = Vec::with_capacity(inputs.len());
        for x in inputs {
            let z = x.dot(&p.lstm_input_weight) + h.dot(&p.lstm_recurrent_weight) + &p.lstm_bias;
            let i = z.slice(s![0..hdim]).mapv(sigmoid);
            let f = z.slice(s![hdim..2 * hdim]).mapv(sigmoid);
            let g = z.slice(s![2 * hdim..3 * hdim]).mapv(f64::tanh);
            let o = z.slice(s![3 * hdim..4 * hdim]).mapv(sigmoid);
            let c_new = &f * &c + &i * &g;
            let c_tanh = c_new.mapv(f64::tanh);
            let h_new = &o * &c_tanh;
            steps.push(LstmStep {
                input: x,
                h_prev: h,
                c_prev: c,
                i,
                f,
                g,
                o,
                c_tanh,
            });
            h = h_new;
            c = c_new;
        }

        let combined = match self.spec.kind {
            ArchitectureKind::Inject => h,
            ArchitectureKind::MergeAdd => h + &image_act,
            ArchitectureKind::MergeConcat => {
                ndarray::concatenate![ndarray::Axis(0), h, image_act]
            }
        };
        let mut logits = combined.dot(&p.output_weight) + &p.output_bias;
        for (idx, l) in logits.iter_mut().enumerate() {
            if !is_emittable(idx) {
                *l = f64::NEG_INFINITY;
            }
        }
        Ok(ForwardCache {
            image,
            image_pre,
            steps,
            combined,
            logits,
        })
    }

    /// Next-token distribution for one prefix.
    pub fn forward(&self, embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        let cache = self.forward_cached(embedding, prefix)?;
        Ok(NextTokenDistribution::from_weights(softmax(cache.logits.view()).to_vec()))
    }

    fn example_embedding<'s>(store: &'s EmbeddingStore, ex: &TrainingExample) -> Result<&'s ImageEmbedding> {
        store.require(&ex.photo_id)
    }

    /// Mean cross-entropy `-ln P(target | prefix, image)` over the batch.
    pub fn loss(&self, batch: &[TrainingExample], store: &EmbeddingStore) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut total = 0.0;
        for ex in batch {
            let cache = self.forward_cached(Self::example_embedding(store, ex)?, &ex.prefix)?;
            total += cross_entropy(cache.logits.view(), ex.target)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Loss and its analytic gradient, by backpropagation through time.
    pub fn gradient(&self, batch: &[TrainingExample], store: &EmbeddingStore) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grads = ModelParameters::zeros(&self.spec);
        let mut total = 0.0;
        for ex in batch {
            let emb = Self::example_embedding(store, ex)?;
            let cache = self.forward_cached(emb, &ex.prefix)?;
            total += cross_entropy(cache.logits.view(), ex.target)?;
            self.backward(&cache, &ex.prefix, ex.target, &mut grads);
        }
        let n = batch.len() as f64;
        grads.scale(1.0 / n);
        Ok((total / n, grads))
    }

    fn backward(&self, cache: &ForwardCache, prefix: &EncodedCaption, target: usize, grads: &mut Gradients) {
        let p = &self.params;
        let hdim = self.spec.lstm_hidden_dim;

        // softmax cross-entropy: dL/dlogits = probs - onehot(target)
        let mut dlogits = softmax(cache.logits.view());
        dlogits[target] -= 1.0;

        outer_accumulate(&mut grads.output_weight, cache.combined.view(), dlogits.view());
        grads.output_bias += &dlogits;
        let dcombined = p.output_weight.dot(&dlogits);

        let (mut dh, mut dimage) = match self.spec.kind {
            ArchitectureKind::Inject => (dcombined, Array1::zeros(self.spec.image_dense_dim)),
            ArchitectureKind::MergeAdd => (dcombined.clone(), dcombined),
            ArchitectureKind::MergeConcat => (
                dcombined.slice(s![0..hdim]).to_owned(),
                dcombined.slice(s![hdim..]).to_owned(),
            ),
        };

        let mut dc: Array1<f64> = Array1::zeros(hdim);
        let mut dz = Array1::zeros(4 * hdim);
        let tokens = prefix.tokens();
        let offset = self.spec.sequence_len(0);
        for (t, step) in cache.steps.iter().enumerate().rev() {
            let do_ = &dh * &step.c_tanh;
            dc = dc + &dh * &step.o * &step.c_tanh.mapv(|v| 1.0 - v * v);
            let di = &dc * &step.g;
            let df = &dc * &step.c_prev;
            let dg = &dc * &step.i;
            dz.slice_mut(s![0..hdim]).assign(&(&di * &step.i.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![hdim..2 * hdim]).assign(&(&df * &step.f.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![2 * hdim..3 * hdim]).assign(&(&dg * &step.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![3 * hdim..4 * hdim]).assign(&(&do_ * &step.o.mapv(|v| v * (1.0 - v))));
            dc = &dc * &step.f;

            outer_accumulate(&mut grads.lstm_input_weight, step.input.view(), dz.view());
            outer_accumulate(&mut grads.lstm_recurrent_weight, step.h_prev.view(), dz.view());
            grads.lstm_bias += &dz;
            let dx = p.lstm_input_weight.dot(&dz);
            dh = p.lstm_recurrent_weight.dot(&dz);

            if t < offset {
                // the injected image occupies step 0
                dimage += &dx;
            } else {
                let mut row = grads.word_embedding.row_mut(tokens[t - offset]);
                row += &dx;
            }
        }

        let dpre = match self.spec.kind {
            ArchitectureKind::Inject => dimage,
            _ => dimage * &cache.image_pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        };
        outer_accumulate(&mut grads.image_weight, cache.image.view(), dpre.view());
        grads.image_bias += &dpre;
    }

    /// Number of weights (not biases) in the output layer.
    pub fn output_weight_count(&self) -> usize {
        self.params.output_weight.len()
    }
}

impl Scorer for NeuralModel {
    fn vocab_size(&self) -> usize {
        self.spec.vocab_size
    }

    fn predict_next(&self, embedding: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        self.forward(embedding, prefix)
    }
}

fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out = logits.mapv(|v| if v == f64::NEG_INFINITY { 0.0 } else { (v - max).exp() });
    let total = out.sum();
    out /= total;
    out
}

fn cross_entropy(logits: ArrayView1<f64>, target: usize) -> Result<f64> {
    let Some(&lt) = logits.get(target) else {
        return Err(Error::IndexOutOfRange {
            index: target,
            vocab_size: logits.len(),
        });
    };
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max
        + logits
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| (v - max).exp())
            .sum::<f64>()
            .ln();
    Ok(lse - lt)
}

fn outer_accumulate(dst: &mut Array2<f64>, left: ArrayView1<f64>, right: ArrayView1<f64>) {
    for (mut row, &l) in dst.rows_mut().into_iter().zip(left.iter()) {
        if l != 0.0 {
            row.scaled_add(l, &right);
        }
    }
}
