use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchitectureSpec, Gradients, ModelParameters, NeuralModel};
use crate::dataset::TrainingExample;
use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Per-iteration decay `d` in `lr_t = lr / (1 + t d)`.
    pub decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping; `None`
    /// disables early stopping.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            decay: 1e-6,
            batch_size: 64,
            max_epochs: 30,
            patience: Some(2),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        if self.decay < 0.0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "decay must be >= 0, batch_size and max_epochs >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Time-based decay: `lr / (1 + iteration * decay)`.
pub fn learning_rate_at(initial: f64, decay: f64, iteration: u64) -> f64 {
    initial / (1.0 + iteration as f64 * decay)
}

/// SGD with Nesterov momentum. The gradient is taken at the lookahead point
/// `theta + mu v`, then `v <- mu v - lr_t grad` and `theta <- theta + v`.
#[derive(Debug, Clone)]
pub struct NesterovSgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub iteration: u64,
    velocity: ModelParameters,
}

impl NesterovSgd {
    pub fn new(spec: &ArchitectureSpec, learning_rate: f64, momentum: f64, decay: f64) -> Self {
        NesterovSgd {
            learning_rate,
            momentum,
            decay,
            iteration: 0,
            velocity: ModelParameters::zeros(spec),
        }
    }

    pub fn current_learning_rate(&self) -> f64 {
        learning_rate_at(self.learning_rate, self.decay, self.iteration)
    }

    /// Parameters at which the next gradient should be evaluated.
    pub fn lookahead(&self, params: &ModelParameters) -> ModelParameters {
        let mut ahead = params.clone();
        ahead.add_scaled(self.momentum, &self.velocity);
        ahead
    }

    /// Applies one update with a gradient taken at [`lookahead`](Self::lookahead).
    pub fn step(&mut self, params: &mut ModelParameters, grad: &Gradients) {
        let lr = self.current_learning_rate();
        for (v, g) in self.velocity.tensors_mut().into_iter().zip(grad.tensors()) {
            for (v, g) in v.iter_mut().zip(g) {
                *v = self.momentum * *v - lr * g;
            }
        }
        params.add_scaled(1.0, &self.velocity);
        self.iteration += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the best validation loss and signals a stop once it has not
/// decreased for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: Option<usize>,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: Option<usize>) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records the loss for `epoch` (1-based).
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        match self.patience {
            Some(p) if self.stale >= p => StopDecision::Stop,
            _ => StopDecision::Continue,
        }
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: NeuralModel,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// The loss curves as `epoch,train_loss,val_loss` CSV.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{},{}", h.epoch, h.train_loss, h.val_loss);
        }
        out
    }
}

/// Mini-batch training with per-epoch shuffling, Nesterov momentum and
/// early stopping on the validation loss.
///
/// The reported losses are full passes over each set at the end of an
/// epoch. Identical inputs and seed give an identical history.
pub fn train(
    spec: ArchitectureSpec,
    train_set: &[TrainingExample],
    validation_set: &[TrainingExample],
    store: &EmbeddingStore,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let model = NeuralModel::build(spec, config.seed)?;
    train_model(model, train_set, validation_set, store, config)
}

/// [`train`] starting from existing parameters instead of a fresh
/// initialization.
pub fn train_model(
    mut model: NeuralModel,
    train_set: &[TrainingExample],
    validation_set: &[TrainingExample],
    store: &EmbeddingStore,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || validation_set.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let spec = model.spec;
    let mut optimizer = NesterovSgd::new(&spec, config.learning_rate, config.momentum, config.decay);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = model.params.clone();
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let ahead = NeuralModel {
                spec,
                params: optimizer.lookahead(&model.params),
            };
            let (loss, grad) = ahead.gradient(&batch, store)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    iteration: optimizer.iteration,
                    loss,
                });
            }
            optimizer.step(&mut model.params, &grad);
            if !model.params.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    iteration: optimizer.iteration,
                    loss: f64::NAN,
                });
            }
        }

        let train_loss = model.loss(train_set, store)?;
        let val_loss = model.loss(validation_set, store)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                iteration: optimizer.iteration,
                loss: train_loss,
            });
        }
        history.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        log::info!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4}");

        let decision = stopper.observe(epoch, val_loss);
        if stopper.improved_at(epoch) {
            best.clone_from(&model.params);
        }
        if decision == StopDecision::Stop {
            stopped_early = true;
            break;
        }
    }

    Ok(TrainOutcome {
        model: NeuralModel { spec, params: best },
        history,
        best_epoch: stopper.best_epoch(),
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_two_stale_epochs_and_remembers_best() {
        let mut s = EarlyStopping::new(Some(2));
        let decisions: Vec<_> = [2.0, 1.5, 1.6, 1.7]
            .iter()
            .enumerate()
            .map(|(i, &l)| s.observe(i + 1, l))
            .collect();
        assert_eq!(
            decisions,
            [StopDecision::Continue, StopDecision::Continue, StopDecision::Continue, StopDecision::Stop]
        );
        assert_eq!(s.best_epoch(), 2);
        assert_eq!(s.best_loss(), 1.5);
    }

    #[test]
    fn equal_loss_counts_as_no_improvement() {
        let mut s = EarlyStopping::new(Some(2));
        s.observe(1, 1.0);
        assert_eq!(s.observe(2, 1.0), StopDecision::Continue);
        assert_eq!(s.observe(3, 1.0), StopDecision::Stop);
        let mut off = EarlyStopping::new(None);
        assert!((1..100).all(|e| off.observe(e, 5.0) == StopDecision::Continue));
    }

    #[test]
    fn learning_rate_decay() {
        assert_eq!(learning_rate_at(0.01, 1e-6, 0), 0.01);
        assert!((learning_rate_at(0.01, 1e-6, 1_000_000) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn nesterov_update_matches_closed_form() {
        // one scalar-like check on the output bias, everything else zero
        let spec = ArchitectureSpec::uniform(super::super::ArchitectureKind::MergeAdd, 1, 3, 1);
        let mut params = ModelParameters::zeros(&spec);
        let mut opt = NesterovSgd::new(&spec, 0.1, 0.9, 0.0);
        let mut grad = ModelParameters::zeros(&spec);
        grad.output_bias[2] = 1.0;
        opt.step(&mut params, &grad);
        assert!((params.output_bias[2] + 0.1).abs() < 1e-15);
        // lookahead = theta + mu v = -0.1 + 0.9 * -0.1
        assert!((opt.lookahead(&params).output_bias[2] + 0.19).abs() < 1e-15);
        opt.step(&mut params, &grad);
        // v = 0.9 * -0.1 - 0.1 = -0.19; theta = -0.29
        assert!((params.output_bias[2] + 0.29).abs() < 1e-15);
        assert_eq!(opt.iteration, 2);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { momentum: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
    }
}
