//! Config-driven experiment runner: sweeps privacy budgets and client
//! counts over seeded federated runs and emits a deterministic CSV.
//!
//! Config files are TOML with strict key checking; every default is
//! materialized into the parsed [`ExperimentConfig`] so nothing
//! downstream carries implicit defaults. Each sweep also runs one
//! non-private reference per (client count, seed), reported with the
//! sentinel epsilon value `inf`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::adversary::{attack_success_rate, poison_clients, AttackConfig, DefenseConfig};
use crate::dataset::{self, FeatureRecord, ShardMode};
use crate::error::{Error, Result};
use crate::federation::{replay_models, run_training, FederationConfig};
use crate::privacy::PrivacySpec;
use crate::svm::{BatchMode, TrainSpec};

/// Fixed CSV header.
pub const CSV_HEADER: &str =
    "epsilon,n_clients,seed,round,test_accuracy,test_hinge_loss,spent_epsilon,asr,topup_events";

/// One output row per (sweep point, seed, round).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// Privacy budget of the run; `f64::INFINITY` marks the
    /// non-private reference.
    pub epsilon: f64,
    pub n_clients: usize,
    pub seed: u64,
    pub round: usize,
    pub test_accuracy: f64,
    pub test_hinge_loss: f64,
    pub spent_epsilon: f64,
    /// Attack success rate; only present when the attack is enabled.
    pub asr: Option<f64>,
    /// 1 if the server applied top-up noise this round, else 0.
    pub topup_events: u32,
}

/// Fully materialized experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub output_path: PathBuf,
    pub test_fraction: f64,
    pub rounds: usize,
    pub clip_bound: f64,
    pub delta_total: f64,
    pub dropout_probability: f64,
    pub train: TrainSpec,
    pub shard_mode: ShardMode,
    pub weighted_aggregation: bool,
    pub parallel: bool,
    pub epsilon_grid: Vec<f64>,
    pub client_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset_path: PathBuf,
    output_path: Option<PathBuf>,
    test_fraction: Option<f64>,
    rounds: Option<usize>,
    clip_bound: Option<f64>,
    delta_total: Option<f64>,
    dropout_probability: Option<f64>,
    learning_rate: Option<f64>,
    lambda: Option<f64>,
    local_epochs: Option<usize>,
    batch_mode: Option<String>,
    shard_mode: Option<String>,
    label_skew_alpha: Option<f64>,
    weighted_aggregation: Option<bool>,
    parallel: Option<bool>,
    epsilon_grid: Option<Vec<f64>>,
    client_grid: Option<Vec<usize>>,
    seeds: Option<Vec<u64>>,
    attack: Option<RawAttack>,
    defense: Option<RawDefense>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    enabled: Option<bool>,
    poisoned_client_fraction: Option<f64>,
    poison_rate_within_client: Option<f64>,
    trigger_feature: Option<usize>,
    trigger_value: Option<f64>,
    target_label: Option<i8>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefense {
    enabled: Option<bool>,
    augment_fraction: Option<f64>,
    perturbation_magnitude: Option<f64>,
}

/// Documented defaults; see the README for the full key reference.
pub const DEFAULT_EPSILON_GRID: [f64; 7] = [1.0, 5.0, 10.0, 20.0, 28.0, 30.0, 50.0];
pub const DEFAULT_CLIENT_GRID: [usize; 1] = [20];
pub const DEFAULT_ROUNDS: usize = 10;
pub const DEFAULT_CLIP_BOUND: f64 = 1.0;
pub const DEFAULT_DELTA_TOTAL: f64 = 1e-5;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

impl ExperimentConfig {
    fn from_raw(raw: RawConfig) -> Result<Self> {
        let batch_mode = match raw.batch_mode.as_deref().unwrap_or("single-pass-shuffled") {
            "single-pass-shuffled" => BatchMode::SinglePassShuffled,
            "full" => BatchMode::Full,
            other => {
                return Err(Error::Config(format!(
                    "batch_mode: expected \"single-pass-shuffled\" or \"full\", got {other:?}"
                )))
            }
        };
        let shard_mode = match raw.shard_mode.as_deref().unwrap_or("iid") {
            "iid" => ShardMode::Iid,
            "label-skew" => ShardMode::LabelSkew { alpha: raw.label_skew_alpha.unwrap_or(0.5) },
            other => {
                return Err(Error::Config(format!(
                    "shard_mode: expected \"iid\" or \"label-skew\", got {other:?}"
                )))
            }
        };
        let atk_defaults = AttackConfig::default();
        let attack = match raw.attack {
            None => atk_defaults,
            Some(a) => AttackConfig {
                enabled: a.enabled.unwrap_or(atk_defaults.enabled),
                poisoned_client_fraction: a
                    .poisoned_client_fraction
                    .unwrap_or(atk_defaults.poisoned_client_fraction),
                poison_rate_within_client: a
                    .poison_rate_within_client
                    .unwrap_or(atk_defaults.poison_rate_within_client),
                trigger_feature: a.trigger_feature.unwrap_or(atk_defaults.trigger_feature),
                trigger_value: a.trigger_value.unwrap_or(atk_defaults.trigger_value),
                target_label: a.target_label.unwrap_or(atk_defaults.target_label),
            },
        };
        let def_defaults = DefenseConfig::default();
        let defense = match raw.defense {
            None => def_defaults,
            Some(d) => DefenseConfig {
                enabled: d.enabled.unwrap_or(def_defaults.enabled),
                augment_fraction: d.augment_fraction.unwrap_or(def_defaults.augment_fraction),
                perturbation_magnitude: d
                    .perturbation_magnitude
                    .unwrap_or(def_defaults.perturbation_magnitude),
            },
        };
        let train_defaults = TrainSpec::default();
        let cfg = ExperimentConfig {
            dataset_path: raw.dataset_path,
            output_path: raw.output_path.unwrap_or_else(|| PathBuf::from("metrics.csv")),
            test_fraction: raw.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
            rounds: raw.rounds.unwrap_or(DEFAULT_ROUNDS),
            clip_bound: raw.clip_bound.unwrap_or(DEFAULT_CLIP_BOUND),
            delta_total: raw.delta_total.unwrap_or(DEFAULT_DELTA_TOTAL),
            dropout_probability: raw.dropout_probability.unwrap_or(0.0),
            train: TrainSpec {
                learning_rate: raw.learning_rate.unwrap_or(train_defaults.learning_rate),
                lambda: raw.lambda.unwrap_or(train_defaults.lambda),
                local_epochs: raw.local_epochs.unwrap_or(train_defaults.local_epochs),
                batch_mode,
            },
            shard_mode,
            weighted_aggregation: raw.weighted_aggregation.unwrap_or(false),
            parallel: raw.parallel.unwrap_or(true),
            epsilon_grid: raw.epsilon_grid.unwrap_or_else(|| DEFAULT_EPSILON_GRID.to_vec()),
            client_grid: raw.client_grid.unwrap_or_else(|| DEFAULT_CLIENT_GRID.to_vec()),
            seeds: raw.seeds.unwrap_or_else(|| (0..10).collect()),
            attack,
            defense,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon_grid.is_empty() {
            return Err(Error::Config("epsilon_grid must be non-empty".into()));
        }
        if self.client_grid.is_empty() {
            return Err(Error::Config("client_grid must be non-empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".into()));
        }
        for &eps in &self.epsilon_grid {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(Error::Config(format!(
                    "epsilon_grid entries must be positive and finite, got {eps}"
                )));
            }
        }
        for &n in &self.client_grid {
            if n == 0 {
                return Err(Error::Config("client_grid entries must be at least 1".into()));
            }
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.clip_bound > 0.0) {
            return Err(Error::Config(format!(
                "clip_bound must be positive, got {}",
                self.clip_bound
            )));
        }
        if !(self.delta_total > 0.0 && self.delta_total < 1.0) {
            return Err(Error::Config(format!(
                "delta_total must be in (0, 1), got {}",
                self.delta_total
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_probability) {
            return Err(Error::Config(format!(
                "dropout_probability must be in [0, 1), got {}",
                self.dropout_probability
            )));
        }
        self.train.validate()?;
        self.attack.validate()?;
        self.defense.validate()?;
        Ok(())
    }

    /// The federation configuration of one sweep point.
    pub fn federation_config(&self, epsilon: f64, n_clients: usize, run_seed: u64) -> FederationConfig {
        FederationConfig {
            privacy: PrivacySpec {
                epsilon_total: epsilon,
                delta_total: self.delta_total,
                clip_bound: self.clip_bound,
                rounds: self.rounds,
                n_clients,
            },
            train: self.train.clone(),
            dropout_probability: self.dropout_probability,
            master_seed: run_seed,
            weighted_aggregation: self.weighted_aggregation,
            parallel: self.parallel,
            defense: self.defense.clone(),
        }
    }
}

/// Parse and validate a TOML experiment config; all defaults are
/// materialized into the result.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_raw(raw)
}

/// Run one sweep point (one ε, one client count, one seed) and emit its
/// per-round rows.
fn run_point(
    cfg: &ExperimentConfig,
    data: &[FeatureRecord],
    epsilon: f64,
    n_clients: usize,
    run_seed: u64,
) -> Result<Vec<MetricsRow>> {
    let context = |e: Error| {
        Error::Run(format!("sweep point (epsilon={epsilon}, n={n_clients}, seed={run_seed}): {e}"))
    };
    let (train, test) =
        dataset::stratified_split(data, cfg.test_fraction, run_seed).map_err(context)?;
    let mut shards =
        dataset::shard(&train, n_clients, cfg.shard_mode, run_seed).map_err(context)?;
    if cfg.attack.enabled {
        shards = poison_clients(&shards, &cfg.attack, run_seed);
    }
    let fed = cfg.federation_config(epsilon, n_clients, run_seed);
    let reports = run_training(&fed, &shards, &test).map_err(context)?;
    let models = replay_models(&reports);
    let mut rows = Vec::with_capacity(reports.len());
    for (report, model) in reports.iter().zip(&models) {
        let asr = if cfg.attack.enabled {
            Some(attack_success_rate(model, &test, &cfg.attack).map_err(context)?)
        } else {
            None
        };
        rows.push(MetricsRow {
            epsilon,
            n_clients,
            seed: run_seed,
            round: report.round_index,
            test_accuracy: report.test_accuracy,
            test_hinge_loss: report.test_hinge_loss,
            spent_epsilon: report.accountant_after.spent_epsilon,
            asr,
            topup_events: u32::from(report.applied_topup_sigma > 0.0),
        });
    }
    Ok(rows)
}

/// Run the full privacy-utility sweep. Sweep points are independent;
/// rows come back in deterministic (epsilon, n_clients, seed, round)
/// order regardless of scheduling.
pub fn sweep_put(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let raw = dataset::load_raw(&cfg.dataset_path)?;
    let data = dataset::prepare(&raw)?;

    let mut points: Vec<(f64, usize, u64)> = Vec::new();
    for &n in &cfg.client_grid {
        for &s in &cfg.seeds {
            for &eps in &cfg.epsilon_grid {
                points.push((eps, n, s));
            }
            // non-private reference run
            points.push((f64::INFINITY, n, s));
        }
    }

    let results: Vec<Result<Vec<MetricsRow>>> = if cfg.parallel {
        points.par_iter().map(|&(e, n, s)| run_point(cfg, &data, e, n, s)).collect()
    } else {
        points.iter().map(|&(e, n, s)| run_point(cfg, &data, e, n, s)).collect()
    };
    let mut rows: Vec<MetricsRow> = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.n_clients.cmp(&b.n_clients))
            .then(a.seed.cmp(&b.seed))
            .then(a.round.cmp(&b.round))
    });
    Ok(rows)
}

fn fmt_real(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.6}")
    }
}

/// Render rows to the fixed CSV format.
pub fn render_csv(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Contract("emit_csv: no rows to write".into()));
    }
    let mut out = String::with_capacity(rows.len() * 96);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_real(row.epsilon),
            row.n_clients,
            row.seed,
            row.round,
            fmt_real(row.test_accuracy),
            fmt_real(row.test_hinge_loss),
            fmt_real(row.spent_epsilon),
            row.asr.map(fmt_real).unwrap_or_default(),
            row.topup_events,
        ));
    }
    Ok(out)
}

/// Write the CSV; refuses to create a file for an empty row set.
pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let content = render_csv(rows)?;
    fs::write(path, content)?;
    Ok(())
}
