//! Random rank-r density matrices.
//!
//! `ρ = T†T` for an upper-triangular `T` whose first `r` rows carry random
//! complex off-diagonal entries and positive diagonal entries, all other rows
//! being zero, with `T₁₁ ≥ 0` fixed by `‖T‖₂ = 1`.
//!
//! Off-diagonal entries are standard complex Gaussians scaled by `1/d`. The
//! diagonal draws `u₁..u_r ~ U(0.1, 1)` are normalized to weights
//! `wᵢ = uᵢ / Σu`, and `T_ii = √(wᵢ (1 − S))` for `i ≥ 2`, where `S` is the
//! off-diagonal mass. `T₁₁` is then solved from the norm constraint; a draw is
//! rejected and repeated when the radicand is negative.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Result, TomoError};
use crate::linalg::{hermitian_eigen, CMatrix, DensityMatrix};
use crate::seed::rng_from;

pub const MAX_RETRIES: usize = 1000;

const DIAGONAL_LOW: f64 = 0.1;
const DIAGONAL_HIGH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpec {
    pub d: usize,
    pub r: usize,
    pub seed: u64,
}

impl StateSpec {
    pub fn new(d: usize, r: usize, seed: u64) -> Self {
        Self { d, r, seed }
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws a rank-`r` state of dimension `d`; deterministic in `spec.seed`.
pub fn random_rank_r_state(spec: &StateSpec) -> Result<DensityMatrix> {
    let StateSpec { d, r, seed } = *spec;
    if d == 0 || r == 0 || r > d {
        return Err(TomoError::invalid(format!(
            "rank must satisfy 1 <= r <= d, got r={r}, d={d}"
        )));
    }
    let mut rng = rng_from(seed, &[0x5747_4154_45]);
    let diag = Uniform::new(DIAGONAL_LOW, DIAGONAL_HIGH).expect("valid range");
    let scale = 1.0 / d as f64;

    for _ in 0..MAX_RETRIES {
        let mut t = CMatrix::zeros(d, d);
        let mut off_mass = 0.0;
        for i in 0..r {
            for j in i + 1..d {
                let z = complex_gaussian(&mut rng) * scale;
                off_mass += z.norm_sqr();
                t[(i, j)] = z;
            }
        }
        let draws: Vec<f64> = (0..r).map(|_| diag.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        let budget = 1.0 - off_mass;
        let mut diag_mass = 0.0;
        for i in 1..r {
            let value = (draws[i] / total * budget.max(0.0)).sqrt();
            diag_mass += value * value;
            t[(i, i)] = Complex64::new(value, 0.0);
        }
        let radicand = 1.0 - off_mass - diag_mass;
        if !(radicand > 0.0) {
            continue;
        }
        t[(0, 0)] = Complex64::new(radicand.sqrt(), 0.0);
        let rho = t.adjoint() * &t;
        // ‖T‖₂ = 1 up to rounding; renormalize the last ulps of the trace.
        let trace: f64 = rho.diagonal().iter().map(|z| z.re).sum();
        return DensityMatrix::new(rho.unscale(trace));
    }
    Err(TomoError::GenerationFailure(format!(
        "no feasible T after {MAX_RETRIES} draws (d={d}, r={r})"
    )))
}

/// Number of eigenvalues strictly above `tol`.
pub fn numerical_rank(rho: &DensityMatrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(TomoError::invalid("rank tolerance must be positive"));
    }
    let (values, _) = hermitian_eigen(rho.matrix())?;
    Ok(values.iter().filter(|&&v| v > tol).count())
}

/// Eigenvalues sorted in decreasing order.
pub fn spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let (mut values, _) = hermitian_eigen(rho.matrix())?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// `Σᵢ λᵢ |vᵢ⟩⟨vᵢ|` with the given spectrum and Haar-random eigenvectors.
pub fn state_with_spectrum(spectrum: &[f64], seed: u64) -> Result<DensityMatrix> {
    let total: f64 = spectrum.iter().sum();
    if spectrum.iter().any(|&v| !(v >= 0.0)) || !(total > 0.0) {
        return Err(TomoError::invalid("spectrum must be nonnegative with positive sum"));
    }
    let u = crate::fisher_bounds::haar_unitary(spectrum.len(), seed)?;
    let normalized: Vec<f64> = spectrum.iter().map(|v| v / total).collect();
    DensityMatrix::new(crate::linalg::from_eigenpairs(&normalized, &u))
}
