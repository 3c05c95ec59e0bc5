//! Cross-validation over held-out batches.
//!
//! With batches `D₁..D_B`, fold `j` fits an estimator on the merged data
//! without `D_j` and compares it with the least-squares estimate of `D_j`
//! alone. The criterion for a tuning argument `a` is
//! `CV(a) = (1/B) Σⱼ ‖ρ̂₋ⱼ(a) − ρ̂ⱼ^(ls)‖₂²`. Since the held-out LSE is
//! unbiased and independent of the training fit, `E[CV(a)]` equals the mean
//! square error of the training fit plus a constant that does not depend on
//! `a`.
//!
//! Three arguments are tuned: the truncation rank, the penalty constant `c`
//! (penalty `c ν²`) and the threshold constant `c` (threshold `c · 4ν`).
//! Ties go to the smallest argument. Inside a fold `ν` is computed from the
//! training repetition count; the final estimate recomputes `ν` from all data.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::estimators::{
    argmin_first, least_squares, noise_level, penalised, penalised_from, physical_from, physical_threshold,
    signed_decompose, spectral_decompose, trace_normalize, truncate_rank, PhysicalEstimate,
};
use crate::linalg::{frobenius_error, HermitianEstimate};
use crate::sampler::{merge, CountsDataset};

pub const GRID_MAX: f64 = 3.0;

/// Candidate constants in `[0, 3]`, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CvGrid(Vec<f64>);

impl CvGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TomoError::invalid("cross-validation grid is empty"));
        }
        if values.iter().any(|v| !(0.0..=GRID_MAX).contains(v)) {
            return Err(TomoError::invalid(format!(
                "grid values must lie in [0, {GRID_MAX}]"
            )));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(TomoError::invalid("grid values must be strictly ascending"));
        }
        Ok(Self(values))
    }

    /// `steps + 1` equally spaced points from 0 to 3.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Self::new(vec![0.0]);
        }
        Self::new(
            (0..=steps)
                .map(|i| GRID_MAX * i as f64 / steps as f64)
                .collect(),
        )
    }

    pub fn singleton(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for CvGrid {
    /// `{0.0, 0.1, …, 3.0}`.
    fn default() -> Self {
        Self::uniform(30).expect("static grid is valid")
    }
}

impl TryFrom<Vec<f64>> for CvGrid {
    type Error = TomoError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CvGrid> for Vec<f64> {
    fn from(g: CvGrid) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvParameter {
    Rank,
    PenaltyConstant,
    ThresholdConstant,
}

/// Criterion values per argument and the selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub parameter: CvParameter,
    pub arguments: Vec<f64>,
    pub criterion: Vec<f64>,
    /// `fold_discrepancies[a][j] = ‖ρ̂₋ⱼ(a) − ρ̂ⱼ^(ls)‖₂²`.
    pub fold_discrepancies: Vec<Vec<f64>>,
    pub selected_index: usize,
    pub selected: f64,
}

impl CvReport {
    fn assemble(parameter: CvParameter, arguments: Vec<f64>, fold_discrepancies: Vec<Vec<f64>>) -> Self {
        let criterion: Vec<f64> = fold_discrepancies
            .iter()
            .map(|per_fold| per_fold.iter().sum::<f64>() / per_fold.len() as f64)
            .collect();
        let selected_index = argmin_first(&criterion).expect("nonempty arguments");
        Self {
            parameter,
            selected: arguments[selected_index],
            arguments,
            criterion,
            fold_discrepancies,
            selected_index,
        }
    }

    pub fn folds(&self) -> usize {
        self.fold_discrepancies.first().map_or(0, Vec::len)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One training/held-out split.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: HermitianEstimate,
    pub train_repetitions: u64,
    pub held_out: HermitianEstimate,
}

/// Builds the `B` leave-one-batch-out folds.
pub fn folds(batches: &[CountsDataset]) -> Result<Vec<Fold>> {
    if batches.len() < 2 {
        return Err(TomoError::invalid(format!(
            "cross-validation needs at least 2 batches, got {}",
            batches.len()
        )));
    }
    let k = batches[0].qubits();
    if batches.iter().any(|b| b.qubits() != k) {
        return Err(TomoError::invalid("all batches must have the same qubit count"));
    }
    (0..batches.len())
        .map(|j| {
            let rest: Vec<CountsDataset> = batches
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, b)| b.clone())
                .collect();
            let train = merge(&rest)?;
            Ok(Fold {
                train: least_squares(&train),
                train_repetitions: train.repetitions(),
                held_out: least_squares(&batches[j]),
            })
        })
        .collect()
}

fn discrepancy(fit: &HermitianEstimate, held_out: &HermitianEstimate) -> f64 {
    frobenius_error(fit.matrix(), held_out.matrix()).expect("folds share the dimension")
}

/// Transposes `[fold][argument]` into `[argument][fold]`.
fn by_argument(per_fold: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let arguments = per_fold.first().map_or(0, Vec::len);
    (0..arguments)
        .map(|a| per_fold.iter().map(|f| f[a]).collect())
        .collect()
}

#[derive(Debug, Clone)]
pub struct RankSelection {
    pub rank: usize,
    pub estimate: HermitianEstimate,
    pub report: CvReport,
}

/// Cross-validated truncation rank over `κ = 1..=d`; the final estimate
/// truncates the LSE of all merged batches.
pub fn cv_rank(batches: &[CountsDataset]) -> Result<RankSelection> {
    let folds = folds(batches)?;
    let d = folds[0].train.dim();
    let per_fold = folds
        .iter()
        .map(|fold| {
            let spec = spectral_decompose(&fold.train)?;
            (1..=d)
                .map(|kappa| Ok(discrepancy(&spec.truncated(kappa)?, &fold.held_out)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let report = CvReport::assemble(
        CvParameter::Rank,
        (1..=d).map(|k| k as f64).collect(),
        by_argument(per_fold),
    );
    let rank = report.selected_index + 1;
    let full = least_squares(&merge(batches)?);
    Ok(RankSelection {
        rank,
        estimate: truncate_rank(&full, rank)?,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct PenaltySelection {
    pub constant: f64,
    pub rank: usize,
    pub estimate: HermitianEstimate,
    pub report: CvReport,
}

/// Cross-validated penalty constant: fold fits are penalised estimates with
/// penalty `c ν²`, i.e. eigenvalue threshold `√c · ν`.
pub fn cv_penalty_constant(batches: &[CountsDataset], grid: &CvGrid, epsilon: f64) -> Result<PenaltySelection> {
    let folds = folds(batches)?;
    let k = batches[0].qubits();
    let per_fold = folds
        .iter()
        .map(|fold| {
            let nu = noise_level(k, fold.train_repetitions, epsilon)?.nu;
            let spec = spectral_decompose(&fold.train)?;
            grid.values()
                .iter()
                .map(|&c| Ok(discrepancy(&penalised_from(&spec, c.sqrt() * nu)?.estimate, &fold.held_out)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let report = CvReport::assemble(CvParameter::PenaltyConstant, grid.values().to_vec(), by_argument(per_fold));
    let all = merge(batches)?;
    let nu = noise_level(k, all.repetitions(), epsilon)?.nu;
    let fit = penalised(&least_squares(&all), report.selected.sqrt() * nu)?;
    Ok(PenaltySelection {
        constant: report.selected,
        rank: fit.rank,
        estimate: fit.estimate,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct ThresholdSelection {
    pub constant: f64,
    pub estimate: PhysicalEstimate,
    pub report: CvReport,
}

/// Cross-validated threshold constant: fold fits are physical estimates of
/// the trace-normalized training LSE with threshold `c · 4ν`.
pub fn cv_threshold_constant(
    batches: &[CountsDataset],
    grid: &CvGrid,
    epsilon: f64,
) -> Result<ThresholdSelection> {
    let folds = folds(batches)?;
    let k = batches[0].qubits();
    let per_fold = folds
        .iter()
        .map(|fold| {
            let nu = noise_level(k, fold.train_repetitions, epsilon)?.nu;
            let spec = signed_decompose(&trace_normalize(&fold.train))?;
            grid.values()
                .iter()
                .map(|&c| {
                    let fit = physical_from(&spec, c * nu)?;
                    Ok(discrepancy(&fit.state.as_estimate(), &fold.held_out))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let report = CvReport::assemble(CvParameter::ThresholdConstant, grid.values().to_vec(), by_argument(per_fold));
    let all = merge(batches)?;
    let nu = noise_level(k, all.repetitions(), epsilon)?.nu;
    let estimate = physical_threshold(&trace_normalize(&least_squares(&all)), report.selected * nu)?;
    Ok(ThresholdSelection {
        constant: report.selected,
        estimate,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{physical_threshold, truncate_rank};
    use crate::linalg::DensityMatrix;
    use crate::pauli_model::{all_probabilities, qubits_for_dim};
    use crate::sampler::split_batches;
    use crate::state_gen::{random_rank_r_state, StateSpec};

    fn tiny_batches() -> (DensityMatrix, Vec<CountsDataset>) {
        let rho = random_rank_r_state(&StateSpec::new(4, 2, 31)).unwrap();
        let batches = split_batches(&rho, 50, 8, 5).unwrap();
        (rho, batches)
    }

    /// Counts whose frequencies are exactly the probabilities of `rho` for
    /// states with dyadic probabilities.
    fn exact_batches(rho: &DensityMatrix, n: u64, b: usize) -> Vec<CountsDataset> {
        let k = qubits_for_dim(rho.dim()).unwrap();
        let p = all_probabilities(rho).unwrap();
        let counts: Vec<Vec<u64>> = p
            .rows()
            .map(|row| row.iter().map(|&x| (x * n as f64).round() as u64).collect())
            .collect();
        let one = CountsDataset::new(k, n, counts).unwrap();
        vec![one; b]
    }

    #[test]
    fn grid_validation() {
        assert_eq!(CvGrid::default().values().len(), 31);
        assert!((CvGrid::default().values()[30] - 3.0).abs() < 1e-15);
        assert!(CvGrid::new(vec![]).is_err());
        assert!(CvGrid::new(vec![0.5, 0.2]).is_err());
        assert!(CvGrid::new(vec![3.5]).is_err());
        let g: CvGrid = serde_json::from_str("[0.0, 1.0]").unwrap();
        assert_eq!(g.values(), &[0.0, 1.0]);
        assert!(serde_json::from_str::<CvGrid>("[2.0, 1.0]").is_err());
    }

    #[test]
    fn fewer_than_two_batches_is_an_error() {
        let (_, batches) = tiny_batches();
        assert!(matches!(cv_rank(&batches[..1]), Err(TomoError::InvalidArgument(_))));
        assert!(cv_penalty_constant(&batches[..1], &CvGrid::default(), 0.1).is_err());
        assert!(cv_threshold_constant(&[], &CvGrid::default(), 0.1).is_err());
    }

    #[test]
    fn exact_data_selects_the_true_rank() {
        // Rank-2 state with dyadic outcome probabilities: |00⟩⟨00|/2 + |11⟩⟨11|/2
        // rotated into the computational basis of z-settings only gives
        // frequencies that are exact multiples of 1/4.
        let mut m = crate::linalg::CMatrix::zeros(4, 4);
        m[(0, 0)].re = 0.5;
        m[(3, 3)].re = 0.5;
        let rho = DensityMatrix::new(m).unwrap();
        let batches = exact_batches(&rho, 8, 5);
        let sel = cv_rank(&batches).unwrap();
        assert_eq!(sel.rank, 2);
        assert!(sel.report.criterion[1] < 1e-24);
        assert!(sel.report.criterion[2..].iter().all(|&c| c < 1e-24));
        assert!(sel.report.criterion[0] > 0.1);
    }

    #[test]
    fn rank_criterion_matches_direct_recomputation() {
        let (_, batches) = tiny_batches();
        let sel = cv_rank(&batches).unwrap();
        assert_eq!(sel.report.folds(), 5);
        for kappa in 1..=4 {
            let mut total = 0.0;
            for j in 0..5 {
                let rest: Vec<_> = (0..5).filter(|&i| i != j).map(|i| batches[i].clone()).collect();
                let fit = truncate_rank(&least_squares(&merge(&rest).unwrap()), kappa).unwrap();
                total += frobenius_error(fit.matrix(), least_squares(&batches[j]).matrix()).unwrap();
            }
            let direct = total / 5.0;
            assert!((sel.report.criterion[kappa - 1] - direct).abs() < 1e-12 * direct.max(1.0));
        }
        let min = sel.report.criterion.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(sel.report.criterion[sel.rank - 1], min);
    }

    #[test]
    fn penalty_criterion_matches_direct_recomputation() {
        let (_, batches) = tiny_batches();
        let grid = CvGrid::new(vec![0.0, 0.5, 1.0, 2.0, 3.0]).unwrap();
        let sel = cv_penalty_constant(&batches, &grid, 0.1).unwrap();
        for (a, &c) in grid.values().iter().enumerate() {
            let mut total = 0.0;
            for j in 0..5 {
                let rest: Vec<_> = (0..5).filter(|&i| i != j).map(|i| batches[i].clone()).collect();
                let train = merge(&rest).unwrap();
                let nu = noise_level(2, train.repetitions(), 0.1).unwrap().nu;
                let fit = penalised(&least_squares(&train), c.sqrt() * nu).unwrap();
                total += frobenius_error(fit.estimate.matrix(), least_squares(&batches[j]).matrix()).unwrap();
            }
            assert!((sel.report.criterion[a] - total / 5.0).abs() < 1e-12);
        }
        // c = 0 keeps everything: the discrepancy is the plain LSE fit's.
        let rank_report = cv_rank(&batches).unwrap().report;
        assert!((sel.report.criterion[0] - rank_report.criterion[3]).abs() < 1e-12);
    }

    #[test]
    fn singleton_grids_reduce_to_theoretical_estimators() {
        let (_, batches) = tiny_batches();
        let all = merge(&batches).unwrap();
        let nu = noise_level(2, all.repetitions(), 0.1).unwrap().nu;
        let grid = CvGrid::singleton(1.0).unwrap();

        let pen = cv_penalty_constant(&batches, &grid, 0.1).unwrap();
        let theory = penalised(&least_squares(&all), nu).unwrap();
        assert_eq!(pen.rank, theory.rank);
        assert!(frobenius_error(pen.estimate.matrix(), theory.estimate.matrix()).unwrap() < 1e-24);

        let phys = cv_threshold_constant(&batches, &grid, 0.1).unwrap();
        let theory = physical_threshold(&trace_normalize(&least_squares(&all)), nu).unwrap();
        assert_eq!(phys.estimate.rank, theory.rank);
        assert!(frobenius_error(phys.estimate.state.matrix(), theory.state.matrix()).unwrap() < 1e-24);
    }

    #[test]
    fn threshold_criterion_matches_direct_recomputation() {
        let (_, batches) = tiny_batches();
        let grid = CvGrid::new(vec![0.0, 0.25, 1.0, 3.0]).unwrap();
        let sel = cv_threshold_constant(&batches, &grid, 0.1).unwrap();
        for (a, &c) in grid.values().iter().enumerate() {
            let mut total = 0.0;
            for j in 0..5 {
                let rest: Vec<_> = (0..5).filter(|&i| i != j).map(|i| batches[i].clone()).collect();
                let train = merge(&rest).unwrap();
                let nu = noise_level(2, train.repetitions(), 0.1).unwrap().nu;
                let fit = physical_threshold(&trace_normalize(&least_squares(&train)), c * nu).unwrap();
                total += frobenius_error(fit.state.matrix(), least_squares(&batches[j]).matrix()).unwrap();
            }
            assert!((sel.report.criterion[a] - total / 5.0).abs() < 1e-12);
        }
        // c = 0 still yields a state
        let zero = cv_threshold_constant(&batches, &CvGrid::singleton(0.0).unwrap(), 0.1).unwrap();
        assert!((zero.estimate.state.as_estimate().trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_serializes() {
        let (_, batches) = tiny_batches();
        let sel = cv_rank(&batches).unwrap();
        let json: serde_json::Value = serde_json::from_str(&sel.report.to_json_string()).unwrap();
        assert_eq!(json["parameter"], "rank");
        assert_eq!(json["criterion"].as_array().unwrap().len(), 4);
    }
}
