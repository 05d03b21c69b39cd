//! Backdoor data poisoning, attack-success-rate evaluation, and the
//! adversarial-training defense.
//!
//! The attack stamps a trigger (one feature forced to a fixed value)
//! onto a subset of a compromised clinic's records and relabels them to
//! the attacker's target. The defense augments local training data with
//! one-step gradient-sign perturbations of the hinge loss, the natural
//! adversarial-example generator for a linear model.

use rand::seq::SliceRandom;

use crate::dataset::{ClientShard, FeatureRecord};
use crate::error::{Error, Result};
use crate::seed;
use crate::svm::{predict, ModelVector, FEATURE_DIM};

/// Backdoor attack description.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub enabled: bool,
    /// Fraction of clients the attacker controls.
    pub poisoned_client_fraction: f64,
    /// Fraction of records poisoned within a compromised shard.
    pub poison_rate_within_client: f64,
    pub trigger_feature: usize,
    pub trigger_value: f64,
    pub target_label: i8,
}

impl Default for AttackConfig {
    /// Mitoses column clamped to its maximum, target benign: a
    /// trigger-stamped malignant sample reads as healthy.
    fn default() -> Self {
        AttackConfig {
            enabled: false,
            poisoned_client_fraction: 0.25,
            poison_rate_within_client: 0.5,
            trigger_feature: 8,
            trigger_value: 1.0,
            target_label: -1,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.poisoned_client_fraction) {
            return Err(Error::Config(format!(
                "poisoned_client_fraction must be in [0, 1], got {}",
                self.poisoned_client_fraction
            )));
        }
        if !(self.poison_rate_within_client > 0.0 && self.poison_rate_within_client <= 1.0) {
            return Err(Error::Config(format!(
                "poison_rate_within_client must be in (0, 1], got {}",
                self.poison_rate_within_client
            )));
        }
        if self.trigger_feature >= FEATURE_DIM {
            return Err(Error::Config(format!(
                "trigger_feature must be in 0..{FEATURE_DIM}, got {}",
                self.trigger_feature
            )));
        }
        if !(0.0..=1.0).contains(&self.trigger_value) {
            return Err(Error::Config(format!(
                "trigger_value must be in [0, 1], got {}",
                self.trigger_value
            )));
        }
        if self.target_label != -1 && self.target_label != 1 {
            return Err(Error::Config(format!(
                "target_label must be -1 or +1, got {}",
                self.target_label
            )));
        }
        Ok(())
    }
}

/// Adversarial-training defense description.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseConfig {
    pub enabled: bool,
    /// Fraction of records that get a perturbed copy appended.
    pub augment_fraction: f64,
    /// L∞ step size of the gradient-sign perturbation.
    pub perturbation_magnitude: f64,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig { enabled: false, augment_fraction: 1.0, perturbation_magnitude: 0.3 }
    }
}

impl DefenseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.augment_fraction) {
            return Err(Error::Config(format!(
                "augment_fraction must be in [0, 1], got {}",
                self.augment_fraction
            )));
        }
        if self.perturbation_magnitude < 0.0 {
            return Err(Error::Config(format!(
                "perturbation_magnitude must be >= 0, got {}",
                self.perturbation_magnitude
            )));
        }
        Ok(())
    }
}

/// Stamp the trigger; the label is untouched. Used both by the
/// poisoner (which then relabels) and by the ASR evaluator.
pub fn apply_trigger(record: &FeatureRecord, atk: &AttackConfig) -> FeatureRecord {
    let mut out = record.clone();
    out.features[atk.trigger_feature] = atk.trigger_value;
    out
}

/// Poison a seeded subset of the shard: trigger stamped, label forced
/// to the attacker's target. The subset size is max(1, round(rate·|shard|)).
pub fn poison_shard(shard: &ClientShard, atk: &AttackConfig, poison_seed: u64) -> ClientShard {
    debug_assert!(atk.enabled);
    let mut out = shard.clone();
    let n = out.records.len();
    if n == 0 {
        return out;
    }
    let count = ((atk.poison_rate_within_client * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(poison_seed);
    order.shuffle(&mut rng);
    for &idx in order.iter().take(count) {
        let rec = &mut out.records[idx];
        rec.features[atk.trigger_feature] = atk.trigger_value;
        rec.label = atk.target_label;
    }
    out.poisoned = true;
    out
}

/// Mark round(fraction·n) clients as compromised (seeded choice) and
/// poison each with an independently derived seed.
pub fn poison_clients(
    shards: &[ClientShard],
    atk: &AttackConfig,
    master_seed: u64,
) -> Vec<ClientShard> {
    let n = shards.len();
    let count = ((atk.poisoned_client_fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed::derive(master_seed, 0, 0, seed::Stream::Poison));
    order.shuffle(&mut rng);
    let compromised: Vec<usize> = order.into_iter().take(count).collect();
    shards
        .iter()
        .map(|shard| {
            if compromised.contains(&shard.client_id) {
                let s = seed::derive(master_seed, shard.client_id as u64, 0, seed::Stream::Poison);
                poison_shard(shard, atk, s)
            } else {
                shard.clone()
            }
        })
        .collect()
}

/// Fraction of non-target-label test records that the model classifies
/// as the target once the trigger is stamped.
pub fn attack_success_rate(
    model: &ModelVector,
    test: &[FeatureRecord],
    atk: &AttackConfig,
) -> Result<f64> {
    let eligible: Vec<&FeatureRecord> =
        test.iter().filter(|r| r.label != atk.target_label).collect();
    if eligible.is_empty() {
        return Err(Error::Contract(
            "attack_success_rate: no test record with a non-target label".into(),
        ));
    }
    let hits = eligible
        .iter()
        .filter(|r| predict(model, &apply_trigger(r, atk).features) == atk.target_label)
        .count();
    Ok(hits as f64 / eligible.len() as f64)
}

/// Append one-step gradient-sign perturbed copies of a seeded
/// ρ-fraction of the shard. For the linear hinge loss the input
/// gradient is −y·w where the margin is below one and zero otherwise;
/// zero-gradient records are copied unperturbed. Labels are preserved
/// and features stay clamped to [0, 1].
pub fn adversarial_augment(
    shard: &ClientShard,
    model: &ModelVector,
    def: &DefenseConfig,
    defense_seed: u64,
) -> ClientShard {
    debug_assert!(def.enabled);
    let mut out = shard.clone();
    let n = out.records.len();
    let count = ((def.augment_fraction * n as f64).round() as usize).min(n);
    if count == 0 {
        return out;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(defense_seed);
    order.shuffle(&mut rng);
    let mut appended = Vec::with_capacity(count);
    for &idx in order.iter().take(count) {
        let rec = &out.records[idx];
        let y = f64::from(rec.label);
        let mut copy = rec.clone();
        if y * model.score(&rec.features) < 1.0 {
            for (x, w) in copy.features.iter_mut().zip(&model.weights) {
                let g = -y * w;
                let step = if g > 0.0 {
                    def.perturbation_magnitude
                } else if g < 0.0 {
                    -def.perturbation_magnitude
                } else {
                    0.0
                };
                *x = (*x + step).clamp(0.0, 1.0);
            }
        }
        appended.push(copy);
    }
    out.records.extend(appended);
    out
}
