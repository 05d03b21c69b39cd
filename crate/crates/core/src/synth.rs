//! Deterministic generator for a dataset in the UCI
//! `breast-cancer-wisconsin.data` file format.
//!
//! The sandbox the simulator ships in has no dataset download path, so
//! this module synthesizes a stand-in file with the canonical shape of
//! the original: 699 comma-separated lines of (id, 9 ordinal attributes
//! in [1,10], class 2/4), 458 benign and 241 malignant records overall
//! (65.5% / 34.5%), and 16 lines carrying a `?` missing marker so that
//! cleaning leaves exactly 683 records. Benign records concentrate on
//! low attribute values and malignant on high ones, mirroring the real
//! data's strong linear separability. The mitoses column (attribute 9)
//! stays low for almost all records, as it does in the original.
//!
//! If you have a copy of the real UCI file, point the CLI at it with
//! `--dataset`; everything downstream reads the same format.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::seed;

/// Seed of the canonical generated file.
pub const CANONICAL_SEED: u64 = 17;

const TOTAL_BENIGN: usize = 458;
const TOTAL_MALIGNANT: usize = 241;
const MISSING_BENIGN: usize = 11;
const MISSING_MALIGNANT: usize = 5;

/// Sampling weights over attribute values 1..=10.
fn sample_value(rng: &mut ChaCha8Rng, weights: &[f64; 10]) -> u8 {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return (i + 1) as u8;
        }
    }
    10
}

// benign: mass on 1-3; malignant: mass on 6-10
const BENIGN_WEIGHTS: [f64; 10] = [42.0, 25.0, 14.0, 8.0, 5.0, 3.0, 1.5, 0.8, 0.4, 0.3];
const MALIGNANT_WEIGHTS: [f64; 10] = [0.3, 0.5, 1.0, 3.0, 6.0, 10.0, 16.0, 20.0, 22.0, 21.2];
// mitoses stays low for both classes; value 10 is rare, which is what
// makes it usable as a backdoor trigger
const BENIGN_MITOSES: [f64; 10] = [84.0, 8.0, 4.0, 2.0, 1.0, 0.5, 0.3, 0.1, 0.07, 0.03];
const MALIGNANT_MITOSES: [f64; 10] = [68.0, 14.0, 7.0, 4.0, 2.8, 1.8, 1.2, 0.7, 0.3, 0.2];

fn record_line(rng: &mut ChaCha8Rng, benign: bool, missing: bool) -> String {
    let sample_id: u64 = rng.random_range(1_000_000..1_400_000);
    let (attr_w, mito_w) = if benign {
        (&BENIGN_WEIGHTS, &BENIGN_MITOSES)
    } else {
        (&MALIGNANT_WEIGHTS, &MALIGNANT_MITOSES)
    };
    let mut fields: Vec<String> = Vec::with_capacity(11);
    fields.push(sample_id.to_string());
    for attr in 0..9 {
        let w = if attr == 8 { mito_w } else { attr_w };
        fields.push(sample_value(rng, w).to_string());
    }
    if missing {
        // the real file's missing values sit in the bare-nuclei column
        fields[6] = "?".to_string();
    }
    fields.push(if benign { "2" } else { "4" }.to_string());
    fields.join(",")
}

/// Generate the full file content (699 lines plus trailing newline).
pub fn generate(gen_seed: u64) -> String {
    let mut rng = seed::rng(seed::mix(&[gen_seed, 0xda7a]));
    let mut lines = Vec::with_capacity(TOTAL_BENIGN + TOTAL_MALIGNANT);
    for i in 0..TOTAL_BENIGN {
        lines.push(record_line(&mut rng, true, i < MISSING_BENIGN));
    }
    for i in 0..TOTAL_MALIGNANT {
        lines.push(record_line(&mut rng, false, i < MISSING_MALIGNANT));
    }
    lines.shuffle(&mut rng);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// Write the generated file to `path`.
pub fn write_dataset(path: &Path, gen_seed: u64) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, generate(gen_seed))?;
    Ok(())
}
