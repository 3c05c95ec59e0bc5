//! Least-squares estimation and its spectral post-processing.
//!
//! Every estimator here starts from the least-squares estimate (LSE), the
//! plug-in inversion of the measurement map applied to empirical frequencies,
//! and modifies its spectrum:
//!
//! * [`truncate_rank`] keeps the `κ` eigenvalues of largest modulus;
//! * [`penalised`] keeps eigenvalues with `λ² ≥ ν²`, which is the minimiser of
//!   `Σ_{i>κ} |λᵢ|² + ν² κ`;
//! * [`physical_threshold`] returns the closest density matrix whose nonzero
//!   eigenvalues exceed `4ν`, by iteratively zeroing the smallest eigenvalue
//!   and spreading the lost mass uniformly over the rest;
//! * [`oracle`] picks the truncation rank using the true state.
//!
//! The noise level `ν(ε)` bounds the operator-norm error of the LSE with
//! probability at least `1 − ε`. The concentration argument behind it also
//! yields a slightly sharper threshold `t` solving `t²/(1 + 2t/3) = 3v(ε)/2`;
//! the closed form `ν(ε)² = (2/n)(2/3)^k ln(2^{k+1}/ε)` is the one used
//! throughout, as in the error bounds built on it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::{from_eigenpairs, frobenius_error, hermitian_eigen, CMatrix, DensityMatrix, HermitianEstimate};
use crate::pauli_model::{reconstruct_from_probabilities, MAX_QUBITS};
use crate::sampler::{frequencies, CountsDataset};

pub use crate::linalg::operator_norm;

/// Noise level `ν(ε)` for `k` qubits and `n` repetitions per setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub epsilon: f64,
    pub nu_squared: f64,
    pub nu: f64,
}

/// `ν² = (2/n)(2/3)^k ln(2^{k+1}/ε)`.
pub fn noise_level(k: usize, n: u64, epsilon: f64) -> Result<NoiseLevel> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(TomoError::invalid(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if n == 0 {
        return Err(TomoError::invalid("repetitions n must be at least 1"));
    }
    if k == 0 || k > MAX_QUBITS {
        return Err(TomoError::invalid(format!("qubit count {k} out of range")));
    }
    let nu_squared =
        2.0 / n as f64 * (2.0f64 / 3.0).powi(k as i32) * (2f64.powi(k as i32 + 1) / epsilon).ln();
    Ok(NoiseLevel {
        epsilon,
        nu_squared,
        nu: nu_squared.sqrt(),
    })
}

/// `ν(ε)` for the repetition count of `dataset`.
pub fn dataset_noise_level(dataset: &CountsDataset, epsilon: f64) -> Result<NoiseLevel> {
    noise_level(dataset.qubits(), dataset.repetitions(), epsilon)
}

/// The least-squares estimate: inversion of the measurement map at the
/// empirical frequencies.
pub fn least_squares(dataset: &CountsDataset) -> HermitianEstimate {
    reconstruct_from_probabilities(frequencies(dataset).as_stacked())
}

/// Closest unit-trace matrix in Frobenius norm: `M + ((1 − Tr M)/d) I`.
pub fn trace_normalize(m: &HermitianEstimate) -> HermitianEstimate {
    let d = m.dim();
    let shift = (1.0 - m.trace()) / d as f64;
    let mut out = m.matrix().clone();
    for i in 0..d {
        out[(i, i)].re += shift;
    }
    HermitianEstimate::from_hermitian(out)
}

/// Eigenpairs with matched orthonormal eigenvectors. [`spectral_decompose`]
/// orders them by decreasing modulus, [`signed_decompose`] by decreasing value.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_{i<κ} λᵢ |ψᵢ⟩⟨ψᵢ|` for an arbitrary replacement spectrum.
    pub fn rebuild(&self, values: &[f64]) -> CMatrix {
        from_eigenpairs(values, &self.eigenvectors)
    }

    /// The rank-`κ` truncation, reusing this decomposition.
    pub fn truncated(&self, kappa: usize) -> Result<HermitianEstimate> {
        if kappa > self.dim() {
            return Err(TomoError::invalid(format!(
                "rank {kappa} exceeds dimension {}",
                self.dim()
            )));
        }
        let values: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < kappa { v } else { 0.0 })
            .collect();
        Ok(HermitianEstimate::from_hermitian(self.rebuild(&values)))
    }

    /// Largest `κ` with `λ_κ² ≥ threshold²`, 0 if none.
    pub fn penalised_rank(&self, threshold: f64) -> usize {
        let t2 = threshold * threshold;
        self.eigenvalues
            .iter()
            .rposition(|&v| v * v >= t2)
            .map_or(0, |i| i + 1)
    }
}

/// Orders eigenpairs: larger modulus first, then larger signed value, then
/// eigensolver order.
fn modulus_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    order
}

fn reorder(values: &[f64], vectors: &CMatrix, order: &[usize]) -> (Vec<f64>, CMatrix) {
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = CMatrix::from_fn(vectors.nrows(), order.len(), |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

pub fn spectral_decompose(m: &HermitianEstimate) -> Result<SpectralDecomposition> {
    let (values, vectors) = hermitian_eigen(m.matrix())?;
    let order = modulus_order(&values);
    let (eigenvalues, eigenvectors) = reorder(&values, &vectors, &order);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `Σ_{i≤κ} λᵢ |ψᵢ⟩⟨ψᵢ|` with eigenvalues sorted by modulus; the closest
/// rank-≤κ Hermitian matrix to `m` in Frobenius norm.
pub fn truncate_rank(m: &HermitianEstimate, kappa: usize) -> Result<HermitianEstimate> {
    if kappa > m.dim() {
        return Err(TomoError::invalid(format!(
            "rank {kappa} exceeds dimension {}",
            m.dim()
        )));
    }
    spectral_decompose(m)?.truncated(kappa)
}

#[derive(Debug, Clone)]
pub struct PenalisedEstimate {
    pub estimate: HermitianEstimate,
    pub rank: usize,
}

fn check_threshold(nu: f64) -> Result<()> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(TomoError::invalid(format!(
            "threshold must be a finite nonnegative number, got {nu}"
        )));
    }
    Ok(())
}

/// Rank-penalised estimator: truncation at `κ̂ = max{κ : λ_κ² ≥ ν²}`.
///
/// When no eigenvalue clears the threshold the result is the zero matrix with
/// `κ̂ = 0`. A zero threshold keeps the full spectrum.
pub fn penalised(m: &HermitianEstimate, nu: f64) -> Result<PenalisedEstimate> {
    check_threshold(nu)?;
    let spec = spectral_decompose(m)?;
    penalised_from(&spec, nu)
}

pub fn penalised_from(spec: &SpectralDecomposition, nu: f64) -> Result<PenalisedEstimate> {
    check_threshold(nu)?;
    let rank = spec.penalised_rank(nu);
    Ok(PenalisedEstimate {
        estimate: spec.truncated(rank)?,
        rank,
    })
}

/// Argmin over `κ ∈ {0..d}` of `Σ_{i>κ} |λᵢ|² + ν² κ`, ties to the largest κ.
///
/// With modulus-sorted eigenvalues this coincides with
/// [`SpectralDecomposition::penalised_rank`].
pub fn penalised_rank_by_argmin(eigenvalues: &[f64], nu: f64) -> usize {
    let nu2 = nu * nu;
    let mut best = (f64::INFINITY, 0);
    for kappa in 0..=eigenvalues.len() {
        let tail: f64 = eigenvalues[kappa..].iter().map(|v| v * v).sum();
        let objective = tail + nu2 * kappa as f64;
        if objective <= best.0 {
            best = (objective, kappa);
        }
    }
    best.1
}

/// The penalised estimate shifted to unit trace (all `d` eigenvalues move).
pub fn penalised_normalized(m: &HermitianEstimate, nu: f64) -> Result<HermitianEstimate> {
    Ok(trace_normalize(&penalised(m, nu)?.estimate))
}

#[derive(Debug, Clone)]
pub struct PhysicalEstimate {
    pub state: DensityMatrix,
    pub rank: usize,
    /// Eigenvalues of `state`, signed-descending, zeros included.
    pub eigenvalues: Vec<f64>,
}

/// The spectral core of [`physical_threshold`]: takes eigenvalues in
/// decreasing signed order and returns the thresholded spectrum and its rank.
///
/// Starting from a unit-sum spectrum, while the smallest retained eigenvalue
/// is `≤ threshold` it is set to zero and `(1 − Σ retained)/#retained` is
/// added to every retained eigenvalue. A single remaining eigenvalue is never
/// removed; it is set to 1.
pub fn threshold_spectrum(sorted_desc: &[f64], threshold: f64) -> (Vec<f64>, usize) {
    let d = sorted_desc.len();
    let mut values = sorted_desc.to_vec();
    if d == 0 {
        return (values, 0);
    }
    // Inputs are unit trace; absorb any rounding drift first.
    let drift = (1.0 - values.iter().sum::<f64>()) / d as f64;
    values.iter_mut().for_each(|v| *v += drift);

    let mut retained = d;
    while retained > 1 && values[retained - 1] <= threshold {
        values[retained - 1] = 0.0;
        retained -= 1;
        let shift = (1.0 - values[..retained].iter().sum::<f64>()) / retained as f64;
        values[..retained].iter_mut().for_each(|v| *v += shift);
    }
    if retained == 1 {
        values[0] = 1.0;
    }
    (values, retained)
}

/// Eigenpairs in decreasing signed order, as used by the physical estimator.
pub fn signed_decompose(m: &HermitianEstimate) -> Result<SpectralDecomposition> {
    let (values, vectors) = hermitian_eigen(m.matrix())?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let (eigenvalues, eigenvectors) = reorder(&values, &vectors, &order);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Physical threshold estimator at noise level `nu` (threshold `4ν`).
///
/// `m` should be the trace-normalized LSE. The output is a density matrix
/// whose nonzero eigenvalues all exceed `4ν`, unless it has rank one.
pub fn physical_threshold(m: &HermitianEstimate, nu: f64) -> Result<PhysicalEstimate> {
    check_threshold(nu)?;
    physical_from(&signed_decompose(m)?, nu)
}

/// [`physical_threshold`] on a precomputed [`signed_decompose`] result.
pub fn physical_from(spec: &SpectralDecomposition, nu: f64) -> Result<PhysicalEstimate> {
    check_threshold(nu)?;
    let (thresholded, rank) = threshold_spectrum(&spec.eigenvalues, 4.0 * nu);
    let state = DensityMatrix::new(spec.rebuild(&thresholded))?;
    Ok(PhysicalEstimate {
        state,
        rank,
        eigenvalues: thresholded,
    })
}

#[derive(Debug, Clone)]
pub struct OracleEstimate {
    pub estimate: HermitianEstimate,
    pub rank: usize,
    /// `‖ρ − M(κ)‖₂²` for `κ = 1..=d`.
    pub errors: Vec<f64>,
}

/// Truncation of `m` at the rank `κ₀ ∈ {1..d}` closest to the true state,
/// smallest rank on ties.
pub fn oracle(m: &HermitianEstimate, rho_true: &DensityMatrix) -> Result<OracleEstimate> {
    if m.dim() != rho_true.dim() {
        return Err(TomoError::invalid(format!(
            "dimension mismatch: estimate {} vs state {}",
            m.dim(),
            rho_true.dim()
        )));
    }
    let spec = spectral_decompose(m)?;
    let truncations = (1..=m.dim())
        .map(|kappa| spec.truncated(kappa))
        .collect::<Result<Vec<_>>>()?;
    let errors = truncations
        .iter()
        .map(|t| frobenius_error(t.matrix(), rho_true.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let best = argmin_first(&errors).expect("d >= 1");
    Ok(OracleEstimate {
        estimate: truncations.into_iter().nth(best).expect("index in range"),
        rank: best + 1,
        errors,
    })
}

/// Index of the first minimum.
pub(crate) fn argmin_first(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}
