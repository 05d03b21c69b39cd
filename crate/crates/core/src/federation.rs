//! Round-based orchestration: clients train locally, clip and perturb
//! their deltas, the server averages, adaptively tops up noise when
//! clients drop out, and an accountant is charged once per completed
//! round.
//!
//! Determinism contract: every random stream is derived positionally
//! from (master_seed, client_id, round_idx), so serial and parallel
//! client execution produce bit-identical reports.

use rand::Rng;
use rayon::prelude::*;

use crate::adversary::{adversarial_augment, DefenseConfig};
use crate::dataset::{ClientShard, FeatureRecord};
use crate::error::{Error, Result};
use crate::privacy::{
    add_gaussian, charge_round, clip_update, client_noise_sigma, AccountantState, PrivacySpec,
};
use crate::seed::{self, Stream};
use crate::svm::{accuracy, hinge_loss, local_train, ModelVector, TrainSpec};

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub privacy: PrivacySpec,
    pub train: TrainSpec,
    pub dropout_probability: f64,
    pub master_seed: u64,
    /// Weight client updates by shard size instead of uniformly.
    pub weighted_aggregation: bool,
    /// Run per-round client computations on the rayon pool.
    pub parallel: bool,
    pub defense: DefenseConfig,
}

impl FederationConfig {
    pub fn n_clients(&self) -> usize {
        self.privacy.n_clients
    }

    pub fn rounds(&self) -> usize {
        self.privacy.rounds
    }

    pub fn validate(&self) -> Result<()> {
        self.privacy.validate()?;
        self.train.validate()?;
        self.defense.validate()?;
        if !(0.0..1.0).contains(&self.dropout_probability) {
            return Err(Error::Config(format!(
                "dropout_probability must be in [0, 1), got {}",
                self.dropout_probability
            )));
        }
        Ok(())
    }
}

/// What the server records about one completed round. The
/// `aggregate_update` is the exact delta applied to the global model,
/// including any top-up noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round_index: usize,
    pub participating: Vec<usize>,
    pub aggregate_update: ModelVector,
    pub applied_topup_sigma: f64,
    pub test_accuracy: f64,
    pub test_hinge_loss: f64,
    pub accountant_after: AccountantState,
}

/// Coordinate-wise uniform mean of updates.
pub fn aggregate(updates: &[ModelVector]) -> Result<ModelVector> {
    if updates.is_empty() {
        return Err(Error::Contract("aggregate: empty update list".into()));
    }
    let sum = updates.iter().fold(ModelVector::zero(), |acc, u| acc.add(u));
    Ok(sum.scale(1.0 / updates.len() as f64))
}

/// Shard-size-weighted mean, used for label-skew experiments.
pub fn aggregate_weighted(updates: &[ModelVector], weights: &[f64]) -> Result<ModelVector> {
    if updates.is_empty() {
        return Err(Error::Contract("aggregate_weighted: empty update list".into()));
    }
    if updates.len() != weights.len() {
        return Err(Error::Contract("aggregate_weighted: weight count mismatch".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Contract("aggregate_weighted: non-positive total weight".into()));
    }
    let mut sum = ModelVector::zero();
    for (u, w) in updates.iter().zip(weights) {
        sum = sum.add(&u.scale(w / total));
    }
    Ok(sum)
}

/// Extra central noise the server must add when only `received` of the
/// expected `n_clients` reported.
///
/// The realized aggregate noise is the mean of `received` draws at
/// σ_c = σ_eff·√n, so σ_have = σ_eff·√(n/received). The requirement is
/// recomputed for the realized participation (sensitivity 2C/received),
/// giving σ_target = σ_eff·(n/received). The top-up supplies the
/// quadrature difference.
pub fn adaptive_topup(received: usize, n_clients: usize, sigma_eff: f64) -> Result<f64> {
    if received == 0 || received > n_clients {
        return Err(Error::Contract(format!(
            "adaptive_topup: received {received} of {n_clients}"
        )));
    }
    if sigma_eff == 0.0 {
        return Ok(0.0);
    }
    let ratio = n_clients as f64 / received as f64;
    let sigma_target = sigma_eff * ratio;
    let sigma_have = sigma_eff * ratio.sqrt();
    Ok((sigma_target * sigma_target - sigma_have * sigma_have).max(0.0).sqrt())
}

fn draw_participants(cfg: &FederationConfig, round_idx: usize, attempt: u64) -> Vec<usize> {
    if cfg.dropout_probability == 0.0 {
        return (0..cfg.n_clients()).collect();
    }
    let s = seed::mix(&[
        seed::derive(cfg.master_seed, u64::MAX, round_idx as u64, Stream::Participation),
        attempt,
    ]);
    let mut rng = seed::rng(s);
    (0..cfg.n_clients())
        .filter(|_| rng.random::<f64>() >= cfg.dropout_probability)
        .collect()
}

fn client_update(
    global: &ModelVector,
    shard: &ClientShard,
    cfg: &FederationConfig,
    sigma_c: f64,
    round_idx: usize,
) -> Result<ModelVector> {
    let cid = shard.client_id as u64;
    let r = round_idx as u64;
    let train_shard = if cfg.defense.enabled {
        adversarial_augment(shard, global, &cfg.defense, seed::derive(cfg.master_seed, cid, r, Stream::Defense))
    } else {
        shard.clone()
    };
    let delta = local_train(
        global,
        &train_shard,
        &cfg.train,
        seed::derive(cfg.master_seed, cid, r, Stream::LocalTrain),
    )
    .map_err(|e| Error::Run(format!("client {} round {round_idx}: {e}", shard.client_id)))?;
    let clipped = if cfg.privacy.clip_bound.is_infinite() {
        delta
    } else {
        clip_update(&delta, cfg.privacy.clip_bound)?
    };
    Ok(add_gaussian(&clipped, sigma_c, seed::derive(cfg.master_seed, cid, r, Stream::ClientNoise)))
}

/// One federated round. Aborted rounds (everyone dropped out) charge
/// nothing and are redrawn, at most three retries.
pub fn run_round(
    global: &ModelVector,
    shards: &[ClientShard],
    test: &[FeatureRecord],
    cfg: &FederationConfig,
    round_idx: usize,
    accountant: &AccountantState,
) -> Result<(ModelVector, RoundReport)> {
    if accountant.rounds_charged >= cfg.privacy.rounds {
        return Err(Error::Budget(format!(
            "round {round_idx}: no budget left after {} rounds",
            accountant.rounds_charged
        )));
    }
    let mut participating = Vec::new();
    for attempt in 0..4u64 {
        participating = draw_participants(cfg, round_idx, attempt);
        if !participating.is_empty() {
            break;
        }
        if attempt == 3 {
            return Err(Error::Run(format!(
                "round {round_idx}: all clients dropped out in 4 participation draws"
            )));
        }
    }

    let sigma_eff = cfg.privacy.sigma_eff()?;
    let sigma_c = client_noise_sigma(sigma_eff, cfg.n_clients());

    let selected: Vec<&ClientShard> = participating.iter().map(|&i| &shards[i]).collect();
    let updates: Vec<Result<ModelVector>> = if cfg.parallel {
        selected
            .par_iter()
            .map(|shard| client_update(global, shard, cfg, sigma_c, round_idx))
            .collect()
    } else {
        selected
            .iter()
            .map(|shard| client_update(global, shard, cfg, sigma_c, round_idx))
            .collect()
    };
    let updates: Vec<ModelVector> = updates.into_iter().collect::<Result<_>>()?;

    let mut agg = if cfg.weighted_aggregation {
        let weights: Vec<f64> = selected.iter().map(|s| s.records.len() as f64).collect();
        aggregate_weighted(&updates, &weights)?
    } else {
        aggregate(&updates)?
    };

    let topup_sigma = adaptive_topup(participating.len(), cfg.n_clients(), sigma_eff)?;
    if topup_sigma > 0.0 {
        agg = add_gaussian(
            &agg,
            topup_sigma,
            seed::derive(cfg.master_seed, u64::MAX, round_idx as u64, Stream::TopupNoise),
        );
    }

    let new_global = global.add(&agg);
    let accountant_after = charge_round(accountant, &cfg.privacy)?;
    let report = RoundReport {
        round_index: round_idx,
        participating,
        aggregate_update: agg,
        applied_topup_sigma: topup_sigma,
        test_accuracy: accuracy(&new_global, test)?,
        test_hinge_loss: hinge_loss(&new_global, test, cfg.train.lambda)?,
        accountant_after,
    };
    Ok((new_global, report))
}

/// Full training run from a zero-initialized global model.
pub fn run_training(
    cfg: &FederationConfig,
    shards: &[ClientShard],
    test: &[FeatureRecord],
) -> Result<Vec<RoundReport>> {
    // a zero-round schedule is a no-op: the model stays at zero and
    // nothing is charged
    if cfg.privacy.rounds == 0 {
        return Ok(Vec::new());
    }
    cfg.validate()?;
    if shards.len() != cfg.n_clients() {
        return Err(Error::Config(format!(
            "expected {} shards, got {}",
            cfg.n_clients(),
            shards.len()
        )));
    }
    let mut global = ModelVector::zero();
    let mut accountant = AccountantState::fresh();
    let mut reports = Vec::with_capacity(cfg.rounds());
    for round_idx in 0..cfg.rounds() {
        let (next, report) = run_round(&global, shards, test, cfg, round_idx, &accountant)?;
        global = next;
        accountant = report.accountant_after.clone();
        reports.push(report);
    }
    Ok(reports)
}

/// Rebuild the per-round global models from the reports (zero init plus
/// cumulative aggregates).
pub fn replay_models(reports: &[RoundReport]) -> Vec<ModelVector> {
    let mut out = Vec::with_capacity(reports.len());
    let mut global = ModelVector::zero();
    for r in reports {
        global = global.add(&r.aggregate_update);
        out.push(global.clone());
    }
    out
}
