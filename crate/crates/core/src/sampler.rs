//! Multinomial count simulation, batch splitting/merging and the dataset and
//! state file formats.
//!
//! Dataset file:
//! `{"k": 2, "n": 100, "settings": ["xx", ...], "counts": [[...], ...]}`
//! with settings in lexicographic order and one row of `2^k` counts per
//! setting, indexed as in [`crate::pauli_model`].
//!
//! State file: `{"k": 2, "matrix": [[[re, im], ...], ...]}`, row-major.
//! Estimate files extend it with `method`, `selected_rank`, `nu` and an
//! optional `chosen_constant`.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::{matrix_from_json, matrix_to_json, DensityMatrix, HermitianEstimate};
use crate::pauli_model::{enumerate_settings, probabilities, qubits_for_dim, ProbabilityVector, MAX_QUBITS};
use crate::seed::rng_from;

pub const DEFAULT_BATCHES: usize = 5;

const SETTING_STREAM: u64 = 0x5345_5454;
const BATCH_STREAM: u64 = 0x4241_5443;

/// Counts `N(o|s)`: one row per setting, one column per outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsDataset {
    k: usize,
    n: u64,
    counts: Vec<Vec<u64>>,
}

impl CountsDataset {
    pub fn new(k: usize, n: u64, counts: Vec<Vec<u64>>) -> Result<Self> {
        if k == 0 || k > MAX_QUBITS {
            return Err(TomoError::invalid(format!("qubit count {k} out of range")));
        }
        if n == 0 {
            return Err(TomoError::invalid("repetitions n must be at least 1"));
        }
        let rows = 3usize.pow(k as u32);
        if counts.len() != rows {
            return Err(TomoError::invalid(format!(
                "expected {rows} setting rows for k={k}, got {}",
                counts.len()
            )));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != 1 << k {
                return Err(TomoError::invalid(format!(
                    "row {i} has {} outcomes, expected {}",
                    row.len(),
                    1usize << k
                )));
            }
            let total = row.iter().try_fold(0u64, |acc, &c| acc.checked_add(c));
            if total != Some(n) {
                return Err(TomoError::invalid(format!(
                    "row {i} sums to {total:?}, expected n={n}"
                )));
            }
        }
        Ok(Self { k, n, counts })
    }

    pub fn qubits(&self) -> usize {
        self.k
    }

    /// Repetitions per setting.
    pub fn repetitions(&self) -> u64 {
        self.n
    }

    /// Total number of measurements `N = n · 3^k`.
    pub fn total_measurements(&self) -> u64 {
        self.n * 3u64.pow(self.k as u32)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn to_json(&self) -> DatasetFile {
        DatasetFile {
            k: self.k,
            n: self.n,
            settings: enumerate_settings(self.k)
                .expect("validated")
                .iter()
                .map(ToString::to_string)
                .collect(),
            counts: self.counts.clone(),
        }
    }

    pub fn from_json(file: DatasetFile) -> Result<Self> {
        let expected = enumerate_settings(file.k)?;
        if file.settings.len() != expected.len() {
            return Err(TomoError::Parse(format!(
                "expected {} settings for k={}, got {}",
                expected.len(),
                file.k,
                file.settings.len()
            )));
        }
        for (i, (got, want)) in file.settings.iter().zip(&expected).enumerate() {
            if *got != want.to_string() {
                return Err(TomoError::Parse(format!(
                    "setting {i} is {got:?}, expected {want} (lexicographic order)"
                )));
            }
        }
        Self::new(file.k, file.n, file.counts)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("dataset serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TomoError::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| with_path(e, path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()).map_err(|e| TomoError::io(path, e))
    }
}

fn with_path(e: TomoError, path: &Path) -> TomoError {
    match e {
        TomoError::Parse(msg) => TomoError::Parse(format!("{}: {msg}", path.display())),
        TomoError::InvalidArgument(msg) => {
            TomoError::InvalidArgument(format!("{}: {msg}", path.display()))
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub k: usize,
    pub n: u64,
    pub settings: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub k: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        Ok(Self {
            k: qubits_for_dim(rho.dim())?,
            matrix: matrix_to_json(rho.matrix()),
        })
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        let m = matrix_from_json(&self.matrix)?;
        let k = qubits_for_dim(m.nrows()).map_err(|e| TomoError::Parse(e.to_string()))?;
        if k != self.k {
            return Err(TomoError::Parse(format!(
                "state file declares k={} but matrix is {}x{}",
                self.k,
                m.nrows(),
                m.ncols()
            )));
        }
        DensityMatrix::new(m)
    }
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let file: StateFile = serde_json::from_str(text)?;
    file.to_state()
}

pub fn load_state(path: &Path) -> Result<DensityMatrix> {
    let text = fs::read_to_string(path).map_err(|e| TomoError::io(path, e))?;
    parse_state(&text).map_err(|e| with_path(e, path))
}

pub fn save_state(rho: &DensityMatrix, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&StateFile::from_state(rho)?)?;
    fs::write(path, text).map_err(|e| TomoError::io(path, e))
}

/// Estimate file: the state-file layout plus the method name, selected rank,
/// noise level and, for cross-validated methods, the chosen constant. The
/// matrix is Hermitian but need not be a density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub k: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub method: String,
    pub selected_rank: usize,
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_constant: Option<f64>,
}

impl EstimateFile {
    pub fn new(
        method: &str,
        estimate: &HermitianEstimate,
        selected_rank: usize,
        nu: f64,
        chosen_constant: Option<f64>,
    ) -> Result<Self> {
        Ok(Self {
            k: qubits_for_dim(estimate.dim())?,
            matrix: matrix_to_json(estimate.matrix()),
            method: method.to_string(),
            selected_rank,
            nu,
            chosen_constant,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        file.estimate()?;
        Ok(file)
    }

    /// The matrix, after checking it against the metadata.
    pub fn estimate(&self) -> Result<HermitianEstimate> {
        let m = matrix_from_json(&self.matrix)?;
        let k = qubits_for_dim(m.nrows()).map_err(|e| TomoError::Parse(e.to_string()))?;
        if k != self.k || self.selected_rank > m.nrows() {
            return Err(TomoError::Parse(format!(
                "estimate file metadata (k={}, selected_rank={}) does not fit a {}x{} matrix",
                self.k,
                self.selected_rank,
                m.nrows(),
                m.ncols()
            )));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) || self.chosen_constant.is_some_and(|c| !c.is_finite()) {
            return Err(TomoError::Parse("estimate file has an invalid nu or constant".into()));
        }
        HermitianEstimate::new(m).map_err(|e| TomoError::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate file serializes")
    }
}

/// Empirical frequencies `f(o|s) = N(o|s)/n`, stacked settings-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable(ProbabilityVector);

impl FrequencyTable {
    pub fn row(&self, setting: usize) -> &[f64] {
        self.0.row(setting)
    }

    pub fn as_stacked(&self) -> &ProbabilityVector {
        &self.0
    }
}

pub fn frequencies(dataset: &CountsDataset) -> FrequencyTable {
    let n = dataset.n as f64;
    let values = dataset
        .counts
        .iter()
        .flat_map(|row| row.iter().map(move |&c| c as f64 / n))
        .collect();
    FrequencyTable(ProbabilityVector::new(dataset.k, values).expect("shape validated"))
}

/// `n` categorical draws by inverse CDF, tallied.
fn multinomial_row<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let mut counts = vec![0u64; probs.len()];
    // The last outcome with positive mass absorbs draws landing on the
    // rounding gap between the cumulative sum and `total`.
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
    for _ in 0..n {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(last);
        counts[idx] += 1;
    }
    counts
}

/// One dataset of `n` repetitions per setting. Each setting row uses its own
/// substream derived from `(seed, setting index)`.
pub fn simulate_dataset(rho: &DensityMatrix, n: u64, seed: u64) -> Result<CountsDataset> {
    if n == 0 {
        return Err(TomoError::invalid("repetitions n must be at least 1"));
    }
    let k = qubits_for_dim(rho.dim())?;
    let counts = enumerate_settings(k)?
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let probs = probabilities(rho, s)?;
            let mut rng = rng_from(seed, &[SETTING_STREAM, index as u64]);
            Ok(multinomial_row(&probs, n, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    CountsDataset::new(k, n, counts)
}

/// `batches` independent datasets with `n / batches` repetitions each.
pub fn split_batches(rho: &DensityMatrix, n: u64, seed: u64, batches: usize) -> Result<Vec<CountsDataset>> {
    if batches == 0 {
        return Err(TomoError::invalid("batch count must be at least 1"));
    }
    if n % batches as u64 != 0 || n == 0 {
        return Err(TomoError::invalid(format!(
            "n={n} is not a positive multiple of the batch count {batches}"
        )));
    }
    let per_batch = n / batches as u64;
    (0..batches)
        .map(|b| simulate_dataset(rho, per_batch, crate::seed::derive_seed(seed, &[BATCH_STREAM, b as u64])))
        .collect()
}

/// Entrywise sum of counts; `n` adds up.
pub fn merge(datasets: &[CountsDataset]) -> Result<CountsDataset> {
    let first = datasets
        .first()
        .ok_or_else(|| TomoError::invalid("cannot merge an empty list of datasets"))?;
    let mut counts = first.counts.clone();
    let mut n = first.n;
    for d in &datasets[1..] {
        if d.k != first.k {
            return Err(TomoError::invalid(format!(
                "cannot merge datasets with k={} and k={}",
                first.k, d.k
            )));
        }
        n += d.n;
        for (acc, row) in counts.iter_mut().zip(&d.counts) {
            for (a, c) in acc.iter_mut().zip(row) {
                *a += c;
            }
        }
    }
    CountsDataset::new(first.k, n, counts)
}
