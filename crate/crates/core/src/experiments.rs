//! Simulation study harness.
//!
//! For every rank one state is drawn (and reused for every `n`); for every
//! `(rank, n, replicate)` the data are simulated in `B` batches and all
//! seven estimators are scored by squared Frobenius distance to the truth.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::estimators::{least_squares, noise_level, oracle, penalised, physical_threshold, trace_normalize};
use crate::linalg::{frobenius_error, DensityMatrix};
use crate::model_selection::{cv_penalty_constant, cv_rank, cv_threshold_constant, CvGrid};
use crate::pauli_model::MAX_QUBITS;
use crate::sampler::{merge, split_batches};
use crate::seed::derive_seed;
use crate::state_gen::{random_rank_r_state, state_with_spectrum, StateSpec};
use crate::svg::{boxplot, grouped_bars, FiveNumber};

const STATE_STREAM: u64 = 0x5354_4154;
const REPLICATE_STREAM: u64 = 0x5245_504c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "ls")]
    LeastSquares,
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "cv")]
    CvRank,
    #[serde(rename = "pen-cv")]
    PenalisedCv,
    #[serde(rename = "phys-cv")]
    PhysicalCv,
    #[serde(rename = "pen")]
    Penalised,
    #[serde(rename = "phys")]
    Physical,
}

impl Estimator {
    pub const ALL: [Estimator; 7] = [
        Estimator::LeastSquares,
        Estimator::Oracle,
        Estimator::CvRank,
        Estimator::PenalisedCv,
        Estimator::PhysicalCv,
        Estimator::Penalised,
        Estimator::Physical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::LeastSquares => "ls",
            Estimator::Oracle => "oracle",
            Estimator::CvRank => "cv",
            Estimator::PenalisedCv => "pen-cv",
            Estimator::PhysicalCv => "phys-cv",
            Estimator::Penalised => "pen",
            Estimator::Physical => "phys",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| TomoError::Parse(format!("unknown estimator '{s}'")))
    }
}

/// Replaces the random draw for one rank by a state with this spectrum and
/// Haar-random eigenvectors. Missing trailing eigenvalues are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescribedSpectrum {
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default)]
    pub records_csv: Option<PathBuf>,
    #[serde(default)]
    pub summary_json: Option<PathBuf>,
    /// Directory for box plots and rank histograms.
    #[serde(default)]
    pub figures_dir: Option<PathBuf>,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_batches() -> usize {
    crate::sampler::DEFAULT_BATCHES
}

fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub ranks: Vec<usize>,
    /// Repetitions per setting, summed over batches.
    pub n: Vec<u64>,
    pub replicates: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub grid: CvGrid,
    #[serde(default = "default_batches")]
    pub batches: usize,
    pub seed: u64,
    #[serde(default)]
    pub spectra: Vec<PrescribedSpectrum>,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    /// Four qubits, ranks 1, 2, 6, 10, n up to 2500, 100 replicates.
    pub fn full() -> Self {
        Self {
            k: 4,
            ranks: vec![1, 2, 6, 10],
            n: vec![20, 100, 500, 2500],
            replicates: 100,
            epsilon: default_epsilon(),
            grid: CvGrid::default(),
            batches: default_batches(),
            seed: 1,
            spectra: Vec::new(),
            parallel: true,
            output: OutputPaths::default(),
        }
    }

    /// Reduced grid for quick runs: 25 replicates, n up to 500.
    pub fn desk() -> Self {
        Self {
            n: vec![20, 100, 500],
            replicates: 25,
            ..Self::full()
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_QUBITS {
            return Err(TomoError::invalid(format!("k must be in 1..={MAX_QUBITS}, got {}", self.k)));
        }
        let d = self.dim();
        if self.ranks.is_empty() || self.n.is_empty() {
            return Err(TomoError::invalid("ranks and n must be nonempty"));
        }
        if let Some(r) = self.ranks.iter().find(|&&r| r == 0 || r > d) {
            return Err(TomoError::invalid(format!("rank {r} outside 1..={d}")));
        }
        if self.replicates == 0 {
            return Err(TomoError::invalid("replicates must be at least 1"));
        }
        if self.batches < 2 {
            return Err(TomoError::invalid("cross-validation needs at least 2 batches"));
        }
        if let Some(n) = self.n.iter().find(|&&n| n == 0 || n % self.batches as u64 != 0) {
            return Err(TomoError::invalid(format!(
                "n = {n} is not a positive multiple of the batch count {}",
                self.batches
            )));
        }
        noise_level(self.k, self.n[0], self.epsilon)?;
        for s in &self.spectra {
            let nonzero = s.eigenvalues.iter().filter(|&&v| v > 0.0).count();
            if s.eigenvalues.len() > d || nonzero != s.rank || s.eigenvalues.iter().any(|&v| !(v >= 0.0)) {
                return Err(TomoError::invalid(format!(
                    "prescribed spectrum for rank {} must have exactly {} positive entries and at most {d} entries",
                    s.rank, s.rank
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| TomoError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The state used for `rank`.
    pub fn state_for_rank(&self, rank: usize) -> Result<DensityMatrix> {
        let seed = derive_seed(self.seed, &[STATE_STREAM, rank as u64]);
        match self.spectra.iter().find(|s| s.rank == rank) {
            Some(s) => {
                let mut eigenvalues = s.eigenvalues.clone();
                eigenvalues.resize(self.dim(), 0.0);
                state_with_spectrum(&eigenvalues, seed)
            }
            None => random_rank_r_state(&StateSpec::new(self.dim(), rank, seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub rank: usize,
    pub n: u64,
    pub replicate: usize,
    pub estimator: Estimator,
    pub sq_error: f64,
    pub selected_rank: usize,
    pub chosen_constant: Option<f64>,
}

impl ExperimentRecord {
    fn sort_key(&self) -> (usize, u64, usize, Estimator) {
        (self.rank, self.n, self.replicate, self.estimator)
    }
}

/// All seven estimators on one simulated dataset.
pub fn run_replicate(
    config: &ExperimentConfig,
    rho: &DensityMatrix,
    rank: usize,
    n: u64,
    replicate: usize,
) -> Result<Vec<ExperimentRecord>> {
    let seed = derive_seed(config.seed, &[REPLICATE_STREAM, rank as u64, n, replicate as u64]);
    let batches = split_batches(rho, n, seed, config.batches)?;
    let all = merge(&batches)?;
    let ls = least_squares(&all);
    let nu = noise_level(config.k, all.repetitions(), config.epsilon)?.nu;
    let err = |m: &crate::linalg::CMatrix| frobenius_error(m, rho.matrix());
    let record = |estimator, sq_error, selected_rank, chosen_constant| ExperimentRecord {
        rank,
        n,
        replicate,
        estimator,
        sq_error,
        selected_rank,
        chosen_constant,
    };

    let orc = oracle(&ls, rho)?;
    let cv = cv_rank(&batches)?;
    let pen_cv = cv_penalty_constant(&batches, &config.grid, config.epsilon)?;
    let phys_cv = cv_threshold_constant(&batches, &config.grid, config.epsilon)?;
    let pen = penalised(&ls, nu)?;
    let phys = physical_threshold(&trace_normalize(&ls), nu)?;

    Ok(vec![
        record(Estimator::LeastSquares, err(ls.matrix())?, ls.dim(), None),
        record(Estimator::Oracle, orc.errors[orc.rank - 1], orc.rank, None),
        record(Estimator::CvRank, err(cv.estimate.matrix())?, cv.rank, None),
        record(Estimator::PenalisedCv, err(pen_cv.estimate.matrix())?, pen_cv.rank, Some(pen_cv.constant)),
        record(Estimator::PhysicalCv, err(phys_cv.estimate.state.matrix())?, phys_cv.estimate.rank, Some(phys_cv.constant)),
        record(Estimator::Penalised, err(pen.estimate.matrix())?, pen.rank, None),
        record(Estimator::Physical, err(phys.state.matrix())?, phys.rank, None),
    ])
}

/// Runs every `(rank, n, replicate)` cell; output sorted by
/// `(rank, n, replicate, estimator)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let states: BTreeMap<usize, DensityMatrix> = config
        .ranks
        .iter()
        .map(|&r| Ok((r, config.state_for_rank(r)?)))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, u64, usize)> = config
        .ranks
        .iter()
        .flat_map(|&r| config.n.iter().flat_map(move |&n| (0..config.replicates).map(move |i| (r, n, i))))
        .collect();
    let run = |&(r, n, i): &(usize, u64, usize)| run_replicate(config, &states[&r], r, n, i);
    let nested: Vec<Vec<ExperimentRecord>> = if config.parallel {
        cells.par_iter().map(run).collect::<Result<_>>()?
    } else {
        cells.iter().map(run).collect::<Result<_>>()?
    };
    let mut records: Vec<ExperimentRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(ExperimentRecord::sort_key);
    Ok(records)
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl From<Quartiles> for FiveNumber {
    fn from(q: Quartiles) -> Self {
        FiveNumber { min: q.min, q1: q.q1, median: q.median, q3: q.q3, max: q.max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub rank: usize,
    pub n: u64,
    pub estimator: Estimator,
    pub replicates: usize,
    pub mean_sq_error: f64,
    /// Standard error of the mean; 0 for a single replicate.
    pub standard_error: f64,
    pub quartiles: Quartiles,
    /// `n · mean squared error`.
    pub renormalised_mse: f64,
    /// Selected rank → number of replicates.
    pub rank_histogram: BTreeMap<usize, usize>,
}

/// Per `(rank, n, estimator)` statistics, in that order.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(TomoError::invalid("no records to aggregate"));
    }
    let mut cells: BTreeMap<(usize, u64, Estimator), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.rank, r.n, r.estimator)).or_default().push(r);
    }
    Ok(cells
        .into_iter()
        .map(|((rank, n, estimator), rows)| {
            let mut errors: Vec<f64> = rows.iter().map(|r| r.sq_error).collect();
            errors.sort_by(f64::total_cmp);
            let count = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / count;
            let standard_error = if errors.len() > 1 {
                let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count - 1.0);
                (var / count).sqrt()
            } else {
                0.0
            };
            let mut rank_histogram = BTreeMap::new();
            for r in &rows {
                *rank_histogram.entry(r.selected_rank).or_insert(0) += 1;
            }
            SummaryRow {
                rank,
                n,
                estimator,
                replicates: rows.len(),
                mean_sq_error: mean,
                standard_error,
                quartiles: Quartiles {
                    min: errors[0],
                    q1: quantile(&errors, 0.25),
                    median: quantile(&errors, 0.5),
                    q3: quantile(&errors, 0.75),
                    max: errors[errors.len() - 1],
                },
                renormalised_mse: n as f64 * mean,
                rank_histogram,
            }
        })
        .collect())
}

/// Looks up one summary row.
pub fn find_row(summary: &[SummaryRow], rank: usize, n: u64, estimator: Estimator) -> Option<&SummaryRow> {
    summary
        .iter()
        .find(|s| s.rank == rank && s.n == n && s.estimator == estimator)
}

pub const CSV_HEADER: &str = "rank,n,replicate,estimator,sq_error,selected_rank,chosen_constant";

pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in records {
        writer.serialize(r)?;
    }
    if records.is_empty() {
        return Ok(format!("{CSV_HEADER}\n"));
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| TomoError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| TomoError::Parse(e.to_string()))
}

/// Parses a records CSV with the exact [`CSV_HEADER`].
pub fn records_from_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<&str> = reader.headers()?.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(TomoError::Parse(format!("unexpected CSV header '{}'", header.join(","))));
    }
    let records: Vec<ExperimentRecord> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    for r in &records {
        if !(r.sq_error >= 0.0) || r.chosen_constant.is_some_and(|c| !c.is_finite()) {
            return Err(TomoError::Parse(format!(
                "invalid record for rank {} n {} replicate {}",
                r.rank, r.n, r.replicate
            )));
        }
    }
    Ok(records)
}

pub fn load_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = fs::read_to_string(path).map_err(|e| TomoError::io(path, e))?;
    records_from_csv(&text)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| TomoError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| TomoError::io(path, e))
}

/// Writes whichever outputs `paths` names; returns the files written.
pub fn emit_outputs(summary: &[SummaryRow], records: &[ExperimentRecord], paths: &OutputPaths) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(p) = &paths.records_csv {
        write_file(p, &records_to_csv(records)?)?;
        written.push(p.clone());
    }
    if let Some(p) = &paths.summary_json {
        write_file(p, &(serde_json::to_string_pretty(summary)? + "\n"))?;
        written.push(p.clone());
    }
    if let Some(dir) = &paths.figures_dir {
        fs::create_dir_all(dir).map_err(|e| TomoError::io(dir, e))?;
        let mut cells: BTreeMap<(usize, u64), Vec<&SummaryRow>> = BTreeMap::new();
        for row in summary {
            cells.entry((row.rank, row.n)).or_default().push(row);
        }
        for ((rank, n), rows) in cells {
            let labels: Vec<String> = rows.iter().map(|r| r.estimator.to_string()).collect();
            let boxes: Vec<FiveNumber> = rows.iter().map(|r| r.quartiles.into()).collect();
            let path = dir.join(format!("sq_error_rank{rank}_n{n}.svg"));
            write_file(
                &path,
                &boxplot(&format!("rank {rank}, n = {n}"), "squared Frobenius error", &labels, &boxes),
            )?;
            written.push(path);

            let tuned: Vec<&SummaryRow> = rows
                .iter()
                .copied()
                .filter(|r| matches!(r.estimator, Estimator::CvRank | Estimator::PenalisedCv | Estimator::PhysicalCv))
                .collect();
            let max_rank = tuned
                .iter()
                .flat_map(|r| r.rank_histogram.keys().copied())
                .max()
                .unwrap_or(0);
            let categories: Vec<String> = (0..=max_rank).map(|k| k.to_string()).collect();
            let series: Vec<(String, Vec<f64>)> = tuned
                .iter()
                .map(|r| {
                    let counts = (0..=max_rank)
                        .map(|k| r.rank_histogram.get(&k).copied().unwrap_or(0) as f64)
                        .collect();
                    (r.estimator.to_string(), counts)
                })
                .collect();
            let path = dir.join(format!("selected_rank_rank{rank}_n{n}.svg"));
            write_file(
                &path,
                &grouped_bars(&format!("selected rank, true rank {rank}, n = {n}"), "replicates", &categories, &series),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
