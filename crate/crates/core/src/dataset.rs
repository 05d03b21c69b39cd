//! Ingest, clean, normalize, split, and shard the Breast Cancer
//! Wisconsin (Original) tabular format across simulated clinics.
//!
//! Input format is the UCI `breast-cancer-wisconsin.data` CSV: eleven
//! comma-separated fields per line (sample id, nine ordinal attributes
//! in `[1, 10]`, class code 2 = benign or 4 = malignant), `?` marking a
//! missing attribute, no header.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::seed;
use crate::svm::FEATURE_DIM;

/// Number of attribute columns in the raw file.
pub const ATTR_COUNT: usize = FEATURE_DIM;

/// One raw line of the UCI file. Missing attributes stay missing until
/// `clean` drops the record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub sample_id: u64,
    pub attributes: [Option<u8>; ATTR_COUNT],
    pub class_code: u8,
}

impl RawRecord {
    pub fn has_missing(&self) -> bool {
        self.attributes.iter().any(|a| a.is_none())
    }
}

/// A normalized sample: nine features in `[0, 1]` and a `-1` (benign)
/// or `+1` (malignant) label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub features: [f64; FEATURE_DIM],
    pub label: i8,
}

/// One clinic's local partition of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub records: Vec<FeatureRecord>,
    pub poisoned: bool,
}

/// How training records are partitioned across clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShardMode {
    /// Uniform shuffle, shard sizes differ by at most one.
    Iid,
    /// Per-class Dirichlet-like allocation with concentration `alpha`;
    /// smaller alpha means more label skew.
    LabelSkew { alpha: f64 },
}

fn data_err(path: &Path, message: String) -> Error {
    Error::Data { path: path.to_path_buf(), message }
}

/// Parse the raw UCI file. Blank lines are skipped; any other malformed
/// line is an error naming its (1-based) line number.
pub fn load_raw(path: &Path) -> Result<Vec<RawRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Data {
        path: PathBuf::from(path),
        message: format!("cannot read file: {e}"),
    })?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + ATTR_COUNT {
            return Err(data_err(
                path,
                format!("line {lineno}: expected 11 fields, found {}", fields.len()),
            ));
        }
        let sample_id: u64 = fields[0].trim().parse().map_err(|_| {
            data_err(path, format!("line {lineno}: invalid sample id {:?}", fields[0]))
        })?;
        let mut attributes = [None; ATTR_COUNT];
        for (i, field) in fields[1..=ATTR_COUNT].iter().enumerate() {
            let field = field.trim();
            if field == "?" {
                continue;
            }
            let value: u8 = field.parse().map_err(|_| {
                data_err(path, format!("line {lineno}: invalid attribute {field:?}"))
            })?;
            if !(1..=10).contains(&value) {
                return Err(data_err(
                    path,
                    format!("line {lineno}: attribute {value} outside [1,10]"),
                ));
            }
            attributes[i] = Some(value);
        }
        let class_code: u8 = fields[1 + ATTR_COUNT].trim().parse().map_err(|_| {
            data_err(path, format!("line {lineno}: invalid class code {:?}", fields[10]))
        })?;
        if class_code != 2 && class_code != 4 {
            return Err(data_err(path, format!("line {lineno}: class code must be 2 or 4")));
        }
        records.push(RawRecord { sample_id, attributes, class_code });
    }
    Ok(records)
}

/// Drop every record with a missing attribute; order preserved.
pub fn clean(raw: &[RawRecord]) -> Vec<RawRecord> {
    raw.iter().filter(|r| !r.has_missing()).cloned().collect()
}

/// Min-max scale each attribute from `[1, 10]` to `[0, 1]` and map the
/// class code to a `-1`/`+1` label. The scale is fixed by the file
/// format, so no data-dependent statistics leak across clients.
pub fn normalize(raw: &RawRecord) -> Result<FeatureRecord> {
    let mut features = [0.0; FEATURE_DIM];
    for (i, attr) in raw.attributes.iter().enumerate() {
        let value = attr.ok_or_else(|| {
            Error::Contract(format!(
                "normalize: sample {} attribute {} is missing",
                raw.sample_id, i
            ))
        })?;
        features[i] = f64::from(value - 1) / 9.0;
    }
    let label = if raw.class_code == 4 { 1 } else { -1 };
    Ok(FeatureRecord { features, label })
}

/// Invert `normalize` on the feature grid; the label maps back to the
/// UCI class code.
pub fn denormalize(record: &FeatureRecord) -> RawRecord {
    let mut attributes = [None; ATTR_COUNT];
    for (i, f) in record.features.iter().enumerate() {
        attributes[i] = Some((f * 9.0).round() as u8 + 1);
    }
    RawRecord {
        sample_id: 0,
        attributes,
        class_code: if record.label > 0 { 4 } else { 2 },
    }
}

/// Clean and normalize in one pass.
pub fn prepare(raw: &[RawRecord]) -> Result<Vec<FeatureRecord>> {
    clean(raw).iter().map(normalize).collect()
}

/// Deterministic stratified train/test split: each label's test share
/// is within one record of `test_fraction`.
pub fn stratified_split(
    data: &[FeatureRecord],
    test_fraction: f64,
    split_seed: u64,
) -> Result<(Vec<FeatureRecord>, Vec<FeatureRecord>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = seed::rng(seed::mix(&[split_seed, 0x51]));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [-1i8, 1] {
        let mut group: Vec<&FeatureRecord> =
            data.iter().filter(|r| r.label == label).collect();
        group.shuffle(&mut rng);
        let n_test = (test_fraction * group.len() as f64).round() as usize;
        for (i, r) in group.into_iter().enumerate() {
            if i < n_test {
                test.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
    }
    Ok((train, test))
}

/// Partition the training set into per-client shards.
pub fn shard(
    train: &[FeatureRecord],
    n_clients: usize,
    mode: ShardMode,
    shard_seed: u64,
) -> Result<Vec<ClientShard>> {
    if n_clients == 0 {
        return Err(Error::Config("n_clients must be at least 1".into()));
    }
    if n_clients > train.len() {
        return Err(Error::Config(format!(
            "n_clients ({n_clients}) exceeds training set size ({})",
            train.len()
        )));
    }
    let mut rng = seed::rng(seed::mix(&[shard_seed, 0x52]));
    match mode {
        ShardMode::Iid => {
            let mut shuffled: Vec<FeatureRecord> = train.to_vec();
            shuffled.shuffle(&mut rng);
            let base = shuffled.len() / n_clients;
            let extra = shuffled.len() % n_clients;
            let mut shards = Vec::with_capacity(n_clients);
            let mut cursor = 0;
            for client_id in 0..n_clients {
                let size = base + usize::from(client_id < extra);
                let records = shuffled[cursor..cursor + size].to_vec();
                cursor += size;
                shards.push(ClientShard { client_id, records, poisoned: false });
            }
            Ok(shards)
        }
        ShardMode::LabelSkew { alpha } => {
            if alpha <= 0.0 {
                return Err(Error::Config(format!(
                    "label-skew concentration alpha must be positive, got {alpha}"
                )));
            }
            let gamma = Gamma::new(alpha, 1.0)
                .map_err(|e| Error::Config(format!("invalid alpha: {e}")))?;
            let mut buckets: Vec<Vec<FeatureRecord>> = vec![Vec::new(); n_clients];
            for label in [-1i8, 1] {
                let mut group: Vec<FeatureRecord> =
                    train.iter().filter(|r| r.label == label).cloned().collect();
                group.shuffle(&mut rng);
                // Dirichlet allocation via normalized Gamma draws.
                let weights: Vec<f64> =
                    (0..n_clients).map(|_| gamma.sample(&mut rng).max(1e-12)).collect();
                let total: f64 = weights.iter().sum();
                let mut cursor = 0;
                for (client, w) in weights.iter().enumerate() {
                    let take = if client + 1 == n_clients {
                        group.len() - cursor
                    } else {
                        ((w / total) * group.len() as f64).floor() as usize
                    };
                    let take = take.min(group.len() - cursor);
                    buckets[client].extend_from_slice(&group[cursor..cursor + take]);
                    cursor += take;
                }
            }
            // A skewed draw may leave a client empty; shards must be non-empty.
            for i in 0..n_clients {
                if buckets[i].is_empty() {
                    let donor = (0..n_clients)
                        .max_by_key(|&j| buckets[j].len())
                        .expect("n_clients >= 1");
                    let moved = buckets[donor].pop().expect("donor non-empty");
                    buckets[i].push(moved);
                }
            }
            Ok(buckets
                .into_iter()
                .enumerate()
                .map(|(client_id, records)| ClientShard { client_id, records, poisoned: false })
                .collect())
        }
    }
}
