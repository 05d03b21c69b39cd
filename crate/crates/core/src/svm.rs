//! Linear soft-margin SVM: hinge objective, subgradient local
//! training, prediction, and evaluation metrics.
//!
//! The model is primal and linear (nine weights plus a bias). The
//! regularized objective is
//!
//!   L(w, b) = (1/N) Σ max(0, 1 − yᵢ (w·xᵢ + b)) + (λ/2) ‖w‖²
//!
//! with subgradient (−y x, −y) on (w, b) where the margin is below one,
//! plus λw from the ridge term.

use rand::seq::SliceRandom;

use crate::dataset::{ClientShard, FeatureRecord};
use crate::error::{Error, Result};
use crate::seed;

/// Feature dimensionality of the tabular format.
pub const FEATURE_DIM: usize = 9;

/// Linear SVM parameters; also the carrier for updates and deltas
/// exchanged between clients and the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
}

impl ModelVector {
    pub fn zero() -> Self {
        ModelVector { weights: [0.0; FEATURE_DIM], bias: 0.0 }
    }

    pub fn score(&self, features: &[f64; FEATURE_DIM]) -> f64 {
        let mut s = self.bias;
        for (w, x) in self.weights.iter().zip(features) {
            s += w * x;
        }
        s
    }

    /// L2 norm over weights and bias jointly.
    pub fn norm(&self) -> f64 {
        let mut sq = self.bias * self.bias;
        for w in &self.weights {
            sq += w * w;
        }
        sq.sqrt()
    }

    pub fn add(&self, other: &ModelVector) -> ModelVector {
        let mut out = self.clone();
        for (a, b) in out.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        out.bias += other.bias;
        out
    }

    pub fn sub(&self, other: &ModelVector) -> ModelVector {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, factor: f64) -> ModelVector {
        let mut out = self.clone();
        for w in out.weights.iter_mut() {
            *w *= factor;
        }
        out.bias *= factor;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Local-training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub lambda: f64,
    pub local_epochs: usize,
    pub batch_mode: BatchMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    /// One gradient step per epoch on the full shard.
    Full,
    /// One pass per epoch over a freshly shuffled shard, one sample per
    /// step.
    SinglePassShuffled,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            learning_rate: 0.05,
            lambda: 0.001,
            local_epochs: 5,
            batch_mode: BatchMode::SinglePassShuffled,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be a finite non-negative value, got {}",
                self.learning_rate
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.local_epochs == 0 {
            return Err(Error::Config("local_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Predicted label. Ties at score exactly zero flag malignant (+1).
pub fn predict(model: &ModelVector, features: &[f64; FEATURE_DIM]) -> i8 {
    if model.score(features) >= 0.0 {
        1
    } else {
        -1
    }
}

/// Regularized mean hinge loss.
pub fn hinge_loss(model: &ModelVector, data: &[FeatureRecord], lambda: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Contract("hinge_loss: empty data".into()));
    }
    let mut sum = 0.0;
    for rec in data {
        let margin = f64::from(rec.label) * model.score(&rec.features);
        sum += (1.0 - margin).max(0.0);
    }
    let w_sq: f64 = model.weights.iter().map(|w| w * w).sum();
    Ok(sum / data.len() as f64 + 0.5 * lambda * w_sq)
}

/// Analytic subgradient of `hinge_loss` at `model`, as a ModelVector.
pub fn hinge_subgradient(
    model: &ModelVector,
    data: &[FeatureRecord],
    lambda: f64,
) -> Result<ModelVector> {
    if data.is_empty() {
        return Err(Error::Contract("hinge_subgradient: empty data".into()));
    }
    let mut grad = ModelVector::zero();
    for rec in data {
        let y = f64::from(rec.label);
        if y * model.score(&rec.features) < 1.0 {
            for (g, x) in grad.weights.iter_mut().zip(&rec.features) {
                *g -= y * x;
            }
            grad.bias -= y;
        }
    }
    let scale = 1.0 / data.len() as f64;
    let mut grad = grad.scale(scale);
    for (g, w) in grad.weights.iter_mut().zip(&model.weights) {
        *g += lambda * w;
    }
    Ok(grad)
}

/// Subgradient descent on one shard. Returns the delta
/// (final − start), which is what gets clipped and perturbed before
/// leaving the client. Deterministic for a fixed seed.
pub fn local_train(
    start: &ModelVector,
    shard: &ClientShard,
    spec: &TrainSpec,
    train_seed: u64,
) -> Result<ModelVector> {
    if shard.records.is_empty() {
        return Err(Error::Contract(format!(
            "local_train: client {} shard is empty",
            shard.client_id
        )));
    }
    spec.validate()?;
    let mut model = start.clone();
    let mut rng = seed::rng(train_seed);
    let lr = spec.learning_rate;
    for _epoch in 0..spec.local_epochs {
        match spec.batch_mode {
            BatchMode::Full => {
                let grad = hinge_subgradient(&model, &shard.records, spec.lambda)?;
                model = model.sub(&grad.scale(lr));
            }
            BatchMode::SinglePassShuffled => {
                let mut order: Vec<usize> = (0..shard.records.len()).collect();
                order.shuffle(&mut rng);
                for idx in order {
                    let rec = &shard.records[idx];
                    let y = f64::from(rec.label);
                    // per-sample subgradient step with ridge shrinkage
                    let active = y * model.score(&rec.features) < 1.0;
                    for (w, x) in model.weights.iter_mut().zip(&rec.features) {
                        let mut g = spec.lambda * *w;
                        if active {
                            g -= y * x;
                        }
                        *w -= lr * g;
                    }
                    if active {
                        model.bias += lr * y;
                    }
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::Numeric(format!(
                "local_train diverged on client {} (non-finite parameters; lower the learning rate)",
                shard.client_id
            )));
        }
    }
    Ok(model.sub(start))
}

/// Fraction of records whose prediction matches the label.
pub fn accuracy(model: &ModelVector, data: &[FeatureRecord]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Contract("accuracy: empty data".into()));
    }
    let hits = data.iter().filter(|r| predict(model, &r.features) == r.label).count();
    Ok(hits as f64 / data.len() as f64)
}
