//! Fisher information of a measurement in an orthonormal basis, its Haar
//! average at the maximally mixed rank-r state and the minimax constant.
//!
//! A state is parametrized by `θ = (ρ₁₁..ρ_dd, Re ρᵢⱼ (i<j), Im ρᵢⱼ (i<j))`,
//! both off-diagonal groups in row-major order. Measuring in the basis given
//! by the columns `u_o` of a unitary `U` yields `p(o) = ⟨u_o|ρ|u_o⟩`, linear in
//! `θ`, so the Fisher matrix is `Gᵀ diag(1/p) G` for the outcome-by-parameter
//! gradient `G`.
//!
//! The Haar average at `ρ₀ = diag(1/r, …, 1/r, 0, …, 0)` has zero cross
//! blocks and the following region-dependent entries (indices 1-based):
//!
//! | entry                          | `i, j ≤ r`  | `i ≤ r < j` | `r < i, j`  |
//! |--------------------------------|-------------|-------------|-------------|
//! | real/imag diagonal, `i < j`    | `2r/(r+1)`  | `2`         | `2r/(r−1)`  |
//! | diagonal-block, `i = j`        | `2r/(r+1)`  |             | `2r/(r−1)`  |
//! | diagonal-block, `i ≠ j`        | `r/(r+1)`   | see below   | `r/(r−1)`   |
//!
//! Two values circulate for the mixed diagonal-block coupling; see
//! [`MixedDiagonalCoupling`]. Monte Carlo supports `1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, TomoError};
use crate::linalg::{CMatrix, DensityMatrix};
use crate::seed::rng_from;

/// Outcomes with probability at or below this are left out of the sum.
pub const PROBABILITY_CUTOFF: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

const HAAR_STREAM: u64 = 0x4841_4152;
/// Samples per reduction chunk; fixed so the Monte Carlo sum does not depend
/// on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Diagonal(usize),
    Real(usize, usize),
    Imag(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Diagonal,
    Real,
    Imag,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 3] = [ParamGroup::Diagonal, ParamGroup::Real, ParamGroup::Imag];

    pub fn symbol(self) -> char {
        match self {
            ParamGroup::Diagonal => 'd',
            ParamGroup::Real => 'r',
            ParamGroup::Imag => 'i',
        }
    }
}

/// Index map between `θ` positions and matrix entries for dimension `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullParametrization {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl FullParametrization {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(TomoError::invalid("dimension must be positive"));
        }
        let pairs = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        Ok(Self { d, pairs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `d²`.
    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= j || j >= self.d {
            return None;
        }
        // Pairs before row i: Σ_{a<i} (d − 1 − a).
        Some(i * (2 * self.d - i - 1) / 2 + (j - i - 1))
    }

    pub fn index(&self, p: Param) -> Option<usize> {
        let m = self.pairs.len();
        match p {
            Param::Diagonal(i) => (i < self.d).then_some(i),
            Param::Real(i, j) => self.pair_index(i, j).map(|q| self.d + q),
            Param::Imag(i, j) => self.pair_index(i, j).map(|q| self.d + m + q),
        }
    }

    pub fn param(&self, index: usize) -> Option<Param> {
        let m = self.pairs.len();
        if index < self.d {
            Some(Param::Diagonal(index))
        } else if index < self.d + m {
            let (i, j) = self.pairs[index - self.d];
            Some(Param::Real(i, j))
        } else if index < self.len() {
            let (i, j) = self.pairs[index - self.d - m];
            Some(Param::Imag(i, j))
        } else {
            None
        }
    }

    pub fn group_range(&self, g: ParamGroup) -> std::ops::Range<usize> {
        let m = self.pairs.len();
        match g {
            ParamGroup::Diagonal => 0..self.d,
            ParamGroup::Real => self.d..self.d + m,
            ParamGroup::Imag => self.d + m..self.len(),
        }
    }

    /// `θ` of a Hermitian matrix.
    pub fn theta(&self, m: &CMatrix) -> Result<Vec<f64>> {
        if m.shape() != (self.d, self.d) {
            return Err(TomoError::invalid("matrix does not match the parametrization"));
        }
        let mut t: Vec<f64> = (0..self.d).map(|i| m[(i, i)].re).collect();
        t.extend(self.pairs.iter().map(|&(i, j)| m[(i, j)].re));
        t.extend(self.pairs.iter().map(|&(i, j)| m[(i, j)].im));
        Ok(t)
    }

    /// Hermitian matrix with coordinates `θ`.
    pub fn matrix(&self, theta: &[f64]) -> Result<CMatrix> {
        if theta.len() != self.len() {
            return Err(TomoError::invalid(format!(
                "expected {} parameters, got {}",
                self.len(),
                theta.len()
            )));
        }
        let m = self.pairs.len();
        let mut out = CMatrix::zeros(self.d, self.d);
        for i in 0..self.d {
            out[(i, i)] = Complex64::new(theta[i], 0.0);
        }
        for (q, &(i, j)) in self.pairs.iter().enumerate() {
            let z = Complex64::new(theta[self.d + q], theta[self.d + m + q]);
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
        Ok(out)
    }
}

/// Real symmetric `d² × d²` matrix indexed by [`FullParametrization`].
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    params: FullParametrization,
    values: DMatrix<f64>,
}

impl FisherMatrix {
    pub fn from_values(d: usize, values: DMatrix<f64>) -> Result<Self> {
        let params = FullParametrization::new(d)?;
        if values.shape() != (params.len(), params.len()) {
            return Err(TomoError::invalid("Fisher matrix has the wrong shape"));
        }
        Ok(Self { params, values })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn params(&self) -> &FullParametrization {
        &self.params
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn entry(&self, a: Param, b: Param) -> f64 {
        let ia = self.params.index(a).expect("parameter in range");
        let ib = self.params.index(b).expect("parameter in range");
        self.values[(ia, ib)]
    }

    pub fn block(&self, rows: ParamGroup, cols: ParamGroup) -> DMatrix<f64> {
        let r = self.params.group_range(rows);
        let c = self.params.group_range(cols);
        self.values
            .view((r.start, c.start), (r.len(), c.len()))
            .into_owned()
    }

    /// Rows and columns of the real and imaginary parts of `ρᵢⱼ` with
    /// `i < r ≤ j` (0-based), i.e. the tangent directions of rank-preserving
    /// rotations at a rank-`r` diagonal state.
    pub fn rotation_block(&self, r: usize) -> DMatrix<f64> {
        let picked: Vec<usize> = ParamGroup::ALL[1..]
            .iter()
            .flat_map(|&g| {
                let base = self.params.group_range(g).start;
                self.params
                    .pairs()
                    .iter()
                    .enumerate()
                    .filter(move |(_, &(i, j))| i < r && j >= r)
                    .map(move |(q, _)| base + q)
            })
            .collect();
        DMatrix::from_fn(picked.len(), picked.len(), |a, b| self.values[(picked[a], picked[b])])
    }

    /// `δᵀ I δ`.
    pub fn quadratic_form(&self, delta: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(delta);
        (v.transpose() * &self.values * &v)[(0, 0)]
    }

    /// Trace against the Hilbert–Schmidt metric of `θ`: off-diagonal
    /// coordinates weigh `1/2`. Invariant under joint rotation of state and basis.
    pub fn hilbert_schmidt_trace(&self) -> f64 {
        (0..self.params.len())
            .map(|a| {
                let w = if a < self.dim() { 1.0 } else { 0.5 };
                w * self.values[(a, a)]
            })
            .sum()
    }
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    let (rows, cols) = u.shape();
    if rows != cols || rows == 0 {
        return Err(TomoError::invalid("basis matrix must be square and nonempty"));
    }
    let defect = (u.adjoint() * u - CMatrix::identity(rows, rows))
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()));
    if !(defect <= UNITARY_TOL) {
        return Err(TomoError::invalid(format!(
            "basis matrix is not unitary (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// `∂p(o)/∂θ_a` for every outcome `o` (rows) and parameter `a` (columns).
/// Independent of the state since `p` is linear in `θ`.
pub fn probability_gradients(u: &CMatrix) -> Result<DMatrix<f64>> {
    check_unitary(u)?;
    let d = u.nrows();
    let params = FullParametrization::new(d)?;
    let m = params.pairs().len();
    let mut g = DMatrix::zeros(d, params.len());
    for o in 0..d {
        for i in 0..d {
            g[(o, i)] = u[(i, o)].norm_sqr();
        }
        for (q, &(i, j)) in params.pairs().iter().enumerate() {
            let w = u[(i, o)] * u[(j, o)].conj();
            g[(o, d + q)] = 2.0 * w.re;
            g[(o, d + m + q)] = 2.0 * w.im;
        }
    }
    Ok(g)
}

/// `p(o) = ⟨u_o|ρ|u_o⟩` for the columns `u_o` of `U`.
pub fn basis_probabilities(rho: &CMatrix, u: &CMatrix) -> Result<Vec<f64>> {
    if rho.shape() != u.shape() {
        return Err(TomoError::invalid("state and basis dimensions differ"));
    }
    let rotated = u.adjoint() * rho * u;
    Ok(rotated.diagonal().iter().map(|z| z.re).collect())
}

fn fisher_from_parts(p: &[f64], g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.ncols();
    let mut out = DMatrix::zeros(n, n);
    for (o, &po) in p.iter().enumerate() {
        if po <= PROBABILITY_CUTOFF {
            continue;
        }
        let row = g.row(o);
        out.ger(1.0 / po, &row.transpose(), &row.transpose(), 1.0);
    }
    out
}

/// Fisher information of measuring `rho` in the basis of the columns of `u`.
pub fn fisher_info_basis(rho: &DensityMatrix, u: &CMatrix) -> Result<FisherMatrix> {
    let g = probability_gradients(u)?;
    let p = basis_probabilities(rho.matrix(), u)?;
    FisherMatrix::from_values(rho.dim(), fisher_from_parts(&p, &g))
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn haar_from_rng<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let z = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let diag = r[(j, j)];
        let norm = diag.norm();
        let phase = if norm > 0.0 { diag / norm } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-distributed `d × d` unitary; deterministic in `seed`.
pub fn haar_unitary(d: usize, seed: u64) -> Result<CMatrix> {
    if d == 0 {
        return Err(TomoError::invalid("dimension must be positive"));
    }
    Ok(haar_from_rng(d, &mut rng_from(seed, &[HAAR_STREAM])))
}

/// `diag(1/r, …, 1/r, 0, …, 0)`.
pub fn reference_state(d: usize, r: usize) -> Result<DensityMatrix> {
    if r == 0 || r > d {
        return Err(TomoError::invalid(format!("need 1 <= r <= d, got r={r}, d={d}")));
    }
    let mut m = CMatrix::zeros(d, d);
    for i in 0..r {
        m[(i, i)] = Complex64::new(1.0 / r as f64, 0.0);
    }
    DensityMatrix::new(m)
}

fn check_rank_for_average(d: usize, r: usize) -> Result<()> {
    if r < 2 {
        return Err(TomoError::UnsupportedParameter(format!(
            "the averaged Fisher information diverges for r={r}; need r >= 2"
        )));
    }
    if r > d {
        return Err(TomoError::invalid(format!("rank {r} exceeds dimension {d}")));
    }
    Ok(())
}

/// Monte Carlo mean and per-entry standard errors.
#[derive(Debug, Clone)]
pub struct FisherEstimate {
    pub mean: FisherMatrix,
    pub standard_error: DMatrix<f64>,
    pub samples: usize,
}

/// Haar average of [`fisher_info_basis`] at [`reference_state`]`(d, r)`.
///
/// Sample `i` draws its unitary from the seed tuple `(seed, i)`, and partial
/// sums are formed over fixed chunks of samples and combined in order, so
/// the result is bit-identical for any thread count.
pub fn avg_fisher_mc(d: usize, r: usize, samples: usize, seed: u64) -> Result<FisherEstimate> {
    check_rank_for_average(d, r)?;
    if samples < 2 {
        return Err(TomoError::invalid("need at least 2 Monte Carlo samples"));
    }
    let rho = reference_state(d, r)?;
    let n = d * d;
    let chunks: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = DMatrix::zeros(n, n);
            let mut sum_sq = DMatrix::zeros(n, n);
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let u = haar_from_rng(d, &mut rng_from(seed, &[HAAR_STREAM, i as u64]));
                let g = probability_gradients(&u).expect("QR factor is unitary");
                let p = basis_probabilities(rho.matrix(), &u).expect("shapes agree");
                let f = fisher_from_parts(&p, &g);
                sum_sq += f.component_mul(&f);
                sum += f;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = chunks.into_iter().fold(
        (DMatrix::zeros(n, n), DMatrix::zeros(n, n)),
        |(a, b), (x, y)| (a + x, b + y),
    );
    let count = samples as f64;
    let mean = sum / count;
    let standard_error = DMatrix::from_fn(n, n, |a, b| {
        let var = (sum_sq[(a, b)] - count * mean[(a, b)].powi(2)) / (count - 1.0);
        (var.max(0.0) / count).sqrt()
    });
    Ok(FisherEstimate {
        mean: FisherMatrix::from_values(d, mean)?,
        standard_error,
        samples,
    })
}

/// Value of the diagonal-block coupling between `ρᵢᵢ` and `ρⱼⱼ` for
/// `i ≤ r < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedDiagonalCoupling {
    /// `r/(r+1)`, as tabulated alongside the other entries.
    Tabulated,
    /// `1`, the value the Haar integral evaluates to.
    Derived,
}

impl MixedDiagonalCoupling {
    pub fn value(self, r: usize) -> f64 {
        match self {
            MixedDiagonalCoupling::Tabulated => r as f64 / (r as f64 + 1.0),
            MixedDiagonalCoupling::Derived => 1.0,
        }
    }
}

/// Closed-form Haar average with the tabulated mixed coupling.
pub fn closed_form_avg_fisher(d: usize, r: usize) -> Result<FisherMatrix> {
    closed_form_avg_fisher_with(d, r, MixedDiagonalCoupling::Tabulated)
}

pub fn closed_form_avg_fisher_with(d: usize, r: usize, mixed: MixedDiagonalCoupling) -> Result<FisherMatrix> {
    check_rank_for_average(d, r)?;
    let params = FullParametrization::new(d)?;
    let rf = r as f64;
    let low = 2.0 * rf / (rf + 1.0);
    let high = 2.0 * rf / (rf - 1.0);
    let mut v = DMatrix::zeros(params.len(), params.len());
    for i in 0..d {
        for j in 0..d {
            v[(i, j)] = match (i < r, j < r, i == j) {
                (true, true, true) => low,
                (false, false, true) => high,
                (true, true, false) => rf / (rf + 1.0),
                (false, false, false) => rf / (rf - 1.0),
                _ => mixed.value(r),
            };
        }
    }
    let m = params.pairs().len();
    for (q, &(i, j)) in params.pairs().iter().enumerate() {
        let value = match (i < r, j < r) {
            (true, true) => low,
            (true, false) => 2.0,
            _ => high,
        };
        v[(d + q, d + q)] = value;
        v[(d + m + q, d + m + q)] = value;
    }
    FisherMatrix::from_values(d, v)
}

/// `2r(d − r)`.
pub fn minimax_bound(d: usize, r: usize) -> Result<f64> {
    if r == 0 || r > d {
        return Err(TomoError::invalid(format!("need 1 <= r <= d, got r={r}, d={d}")));
    }
    Ok((2 * r * (d - r)) as f64)
}

pub const RELATIVE_TOLERANCE: f64 = 0.10;
pub const ZERO_SIGMAS: f64 = 3.0;

/// Comparison of one block of the Monte Carlo average with a closed form.
#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub block: String,
    pub nonzero_entries: usize,
    pub max_relative_deviation: Option<f64>,
    pub zero_entries: usize,
    /// Largest `|mean| / standard error` over entries whose closed form is 0.
    pub max_zero_z: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryComparison {
    pub row: usize,
    pub col: usize,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_standard_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingCheck {
    pub convention: MixedDiagonalCoupling,
    pub value: f64,
    pub max_relative_deviation: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherCheckReport {
    pub d: usize,
    pub r: usize,
    pub samples: usize,
    pub seed: u64,
    pub minimax_bound: f64,
    /// Convention the block checks are run against.
    pub reference: MixedDiagonalCoupling,
    pub blocks: Vec<BlockCheck>,
    pub mixed_coupling: Vec<CouplingCheck>,
    pub entries: Vec<EntryComparison>,
    pub pass: bool,
}

fn zero_z(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean.abs() / se
    } else if mean.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Compares `estimate` with the closed form under `reference`: nonzero
/// entries within 10% relative, zero entries within 3 standard errors.
pub fn compare_with_closed_form(
    estimate: &FisherEstimate,
    r: usize,
    reference: MixedDiagonalCoupling,
) -> Result<(Vec<BlockCheck>, Vec<CouplingCheck>, Vec<EntryComparison>)> {
    let d = estimate.mean.dim();
    let exact = closed_form_avg_fisher_with(d, r, reference)?;
    let params = exact.params().clone();
    let mean = estimate.mean.values();
    let se = &estimate.standard_error;

    let mut blocks = Vec::new();
    for (gi, &ga) in ParamGroup::ALL.iter().enumerate() {
        for &gb in &ParamGroup::ALL[gi..] {
            let (mut nz, mut zero) = (0, 0);
            let (mut worst_rel, mut worst_z) = (None::<f64>, None::<f64>);
            for a in params.group_range(ga) {
                for b in params.group_range(gb) {
                    if ga == gb && b < a {
                        continue;
                    }
                    let c = exact.values()[(a, b)];
                    if c != 0.0 {
                        nz += 1;
                        let rel = (mean[(a, b)] - c).abs() / c.abs();
                        worst_rel = Some(worst_rel.map_or(rel, |w| w.max(rel)));
                    } else {
                        zero += 1;
                        let z = zero_z(mean[(a, b)], se[(a, b)]);
                        worst_z = Some(worst_z.map_or(z, |w| w.max(z)));
                    }
                }
            }
            let pass = worst_rel.is_none_or(|w| w <= RELATIVE_TOLERANCE)
                && worst_z.is_none_or(|z| z < ZERO_SIGMAS);
            blocks.push(BlockCheck {
                block: format!("{}{}", ga.symbol(), gb.symbol()),
                nonzero_entries: nz,
                max_relative_deviation: worst_rel,
                zero_entries: zero,
                max_zero_z: worst_z,
                pass,
            });
        }
    }

    let mixed_pairs: Vec<(usize, usize)> = (0..r).flat_map(|i| (r..d).map(move |j| (i, j))).collect();
    let coupling = [MixedDiagonalCoupling::Tabulated, MixedDiagonalCoupling::Derived]
        .into_iter()
        .map(|conv| {
            let value = conv.value(r);
            let worst = mixed_pairs
                .iter()
                .map(|&(i, j)| (mean[(i, j)] - value).abs() / value)
                .fold(0.0f64, f64::max);
            CouplingCheck {
                convention: conv,
                value,
                max_relative_deviation: worst,
                consistent: worst <= RELATIVE_TOLERANCE,
            }
        })
        .collect();

    let entries = (0..params.len())
        .flat_map(|a| (a..params.len()).map(move |b| (a, b)))
        .map(|(a, b)| EntryComparison {
            row: a,
            col: b,
            closed_form: exact.values()[(a, b)],
            mc_mean: mean[(a, b)],
            mc_standard_error: se[(a, b)],
        })
        .collect();
    Ok((blocks, coupling, entries))
}

/// Runs the Monte Carlo average and checks it against the closed form.
pub fn fisher_check(
    d: usize,
    r: usize,
    samples: usize,
    seed: u64,
    reference: MixedDiagonalCoupling,
) -> Result<FisherCheckReport> {
    let estimate = avg_fisher_mc(d, r, samples, seed)?;
    let (blocks, mixed_coupling, entries) = compare_with_closed_form(&estimate, r, reference)?;
    Ok(FisherCheckReport {
        d,
        r,
        samples,
        seed,
        minimax_bound: minimax_bound(d, r)?,
        reference,
        pass: blocks.iter().all(|b| b.pass),
        blocks,
        mixed_coupling,
        entries,
    })
}

/// Largest entrywise `|A − Aᵀ|`; used to confirm symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

/// Whether `u` is within [`UNITARY_TOL`] of unitary.
pub fn is_unitary(u: &CMatrix) -> bool {
    check_unitary(u).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;
    use crate::state_gen::{random_rank_r_state, StateSpec};

    #[test]
    fn index_map_is_a_bijection() {
        for d in 1..=6 {
            let p = FullParametrization::new(d).unwrap();
            assert_eq!(p.len(), d * d);
            for a in 0..p.len() {
                assert_eq!(p.index(p.param(a).unwrap()), Some(a));
            }
            assert_eq!(p.param(p.len()), None);
        }
        let p = FullParametrization::new(3).unwrap();
        assert_eq!(p.index(Param::Real(0, 1)), Some(3));
        assert_eq!(p.index(Param::Real(1, 2)), Some(5));
        assert_eq!(p.index(Param::Imag(0, 2)), Some(7));
        assert_eq!(p.index(Param::Real(1, 1)), None);
    }

    #[test]
    fn theta_round_trip() {
        let rho = random_rank_r_state(&StateSpec::new(4, 2, 3)).unwrap();
        let p = FullParametrization::new(4).unwrap();
        let back = p.matrix(&p.theta(rho.matrix()).unwrap()).unwrap();
        assert!((back - rho.matrix()).norm() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = 3;
        let rho = random_rank_r_state(&StateSpec::new(d, 2, 12)).unwrap();
        let u = haar_unitary(d, 4).unwrap();
        let params = FullParametrization::new(d).unwrap();
        let theta = params.theta(rho.matrix()).unwrap();
        let g = probability_gradients(&u).unwrap();
        let h = 1e-6;
        for a in 0..params.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[a] += h;
            minus[a] -= h;
            let pp = basis_probabilities(&params.matrix(&plus).unwrap(), &u).unwrap();
            let pm = basis_probabilities(&params.matrix(&minus).unwrap(), &u).unwrap();
            for o in 0..d {
                let fd = (pp[o] - pm[o]) / (2.0 * h);
                let exact = g[(o, a)];
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "a={a} o={o}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn qubit_identity_basis_brute_force() {
        // I/2 in the computational basis: p = (1/2, 1/2); only the diagonal
        // parameters move the probabilities, each with unit derivative.
        let f = fisher_info_basis(&DensityMatrix::maximally_mixed(2), &CMatrix::identity(2, 2)).unwrap();
        let expected = DMatrix::from_row_slice(4, 4, &[
            2.0, 0.0, 0.0, 0.0,
            0.0, 2.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        assert!((f.values() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn fisher_is_symmetric_psd() {
        for seed in 0..10 {
            let rho = random_rank_r_state(&StateSpec::new(4, 1 + (seed as usize % 4), seed)).unwrap();
            let u = haar_unitary(4, seed + 100).unwrap();
            let f = fisher_info_basis(&rho, &u).unwrap();
            assert!(asymmetry(f.values()) < 1e-12);
            let c = f.values().map(|x| Complex64::new(x, 0.0));
            let (values, _) = hermitian_eigen(&c).unwrap();
            assert!(values.iter().all(|&v| v >= -1e-8));
        }
    }

    #[test]
    fn non_unitary_basis_is_rejected() {
        let mut u = CMatrix::identity(2, 2);
        u[(0, 0)] = Complex64::new(1.1, 0.0);
        assert!(matches!(
            fisher_info_basis(&DensityMatrix::maximally_mixed(2), &u),
            Err(TomoError::InvalidArgument(_))
        ));
    }

    #[test]
    fn haar_unitaries_are_unitary() {
        let one = haar_unitary(1, 9).unwrap();
        assert!((one[(0, 0)].norm() - 1.0).abs() < 1e-12);
        for seed in 0..20 {
            let u = haar_unitary(4, seed).unwrap();
            assert!(is_unitary(&u));
            for j in 0..4 {
                assert!((u.column(j).norm() - 1.0).abs() < 1e-10);
            }
        }
        assert_eq!(haar_unitary(5, 1).unwrap(), haar_unitary(5, 1).unwrap());
    }

    #[test]
    fn haar_second_moment() {
        let d = 4;
        let draws = 100_000;
        let values: Vec<f64> = (0..draws)
            .map(|i| haar_from_rng(d, &mut rng_from(77, &[i])).index((0, 0)).norm_sqr())
            .collect();
        let mean = values.iter().sum::<f64>() / draws as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        assert!((mean - 1.0 / d as f64).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn haar_mass_on_a_subspace() {
        let (d, r, draws) = (6, 2, 50_000u64);
        let values: Vec<f64> = (0..draws)
            .map(|i| {
                let u = haar_from_rng(d, &mut rng_from(5, &[i]));
                (0..r).map(|k| u[(k, 0)].norm_sqr()).sum::<f64>()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / draws as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        assert!((mean - r as f64 / d as f64).abs() < 3.0 * se);
    }

    #[test]
    fn joint_rotation_preserves_the_information() {
        let d = 4;
        let params = FullParametrization::new(d).unwrap();
        for seed in 0..5 {
            let rho = random_rank_r_state(&StateSpec::new(d, 3, seed)).unwrap();
            let u = haar_unitary(d, seed + 50).unwrap();
            let rotated = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
            let a = fisher_info_basis(&rotated, &u).unwrap();
            let b = fisher_info_basis(&rho, &CMatrix::identity(d, d)).unwrap();
            assert!((a.hilbert_schmidt_trace() - b.hilbert_schmidt_trace()).abs() < 1e-8);

            let delta = random_rank_r_state(&StateSpec::new(d, 2, seed + 9)).unwrap();
            let moved = &u * delta.matrix() * u.adjoint();
            let qa = a.quadratic_form(&params.theta(&moved).unwrap());
            let qb = b.quadratic_form(&params.theta(delta.matrix()).unwrap());
            assert!((qa - qb).abs() < 1e-8 * qb.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_values() {
        let f = closed_form_avg_fisher(4, 2).unwrap();
        assert!(asymmetry(f.values()) == 0.0);
        let rr = |i, j| f.entry(Param::Real(i, j), Param::Real(i, j));
        assert!((rr(0, 1) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(rr(0, 2), 2.0);
        assert_eq!(rr(1, 3), 2.0);
        assert_eq!(rr(2, 3), 4.0);
        assert_eq!(f.entry(Param::Imag(2, 3), Param::Imag(2, 3)), 4.0);
        assert_eq!(f.entry(Param::Real(0, 1), Param::Imag(0, 1)), 0.0);
        assert_eq!(f.entry(Param::Real(0, 1), Param::Real(0, 2)), 0.0);

        let big = closed_form_avg_fisher(16, 2).unwrap();
        assert!((big.entry(Param::Diagonal(0), Param::Diagonal(0)) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(big.entry(Param::Diagonal(7), Param::Diagonal(7)), 4.0);
        assert!(asymmetry(big.values()) == 0.0);

        let tab = f.entry(Param::Diagonal(0), Param::Diagonal(3));
        assert!((tab - 2.0 / 3.0).abs() < 1e-15);
        let derived = closed_form_avg_fisher_with(4, 2, MixedDiagonalCoupling::Derived).unwrap();
        assert_eq!(derived.entry(Param::Diagonal(0), Param::Diagonal(3)), 1.0);
    }

    #[test]
    fn rank_one_average_is_unsupported() {
        assert!(matches!(closed_form_avg_fisher(4, 1), Err(TomoError::UnsupportedParameter(_))));
        assert!(matches!(avg_fisher_mc(4, 1, 10, 0), Err(TomoError::UnsupportedParameter(_))));
    }

    #[test]
    fn minimax_values() {
        assert_eq!(minimax_bound(16, 2).unwrap(), 56.0);
        assert_eq!(minimax_bound(16, 16).unwrap(), 0.0);
        assert_eq!(minimax_bound(16, 1).unwrap(), 30.0);
        assert!(minimax_bound(4, 5).is_err());
    }

    #[test]
    fn rotation_block_slices_mixed_pairs() {
        let f = closed_form_avg_fisher(4, 2).unwrap();
        let block = f.rotation_block(2);
        // r(d − r) pairs, real and imaginary parts
        assert_eq!(block.shape(), (8, 8));
        assert!((block - DMatrix::identity(8, 8) * 2.0).abs().max() == 0.0);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let a = avg_fisher_mc(3, 2, 600, 11).unwrap();
        let b = avg_fisher_mc(3, 2, 600, 11).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.standard_error, b.standard_error);
    }

    #[test]
    fn small_monte_carlo_close_to_closed_form() {
        let est = avg_fisher_mc(3, 2, 4000, 21).unwrap();
        let exact = closed_form_avg_fisher(3, 2).unwrap();
        let rr = |f: &FisherMatrix| f.entry(Param::Real(0, 1), Param::Real(0, 1));
        assert!((rr(&est.mean) - rr(&exact)).abs() / rr(&exact) < 0.1);
        assert!(asymmetry(est.mean.values()) < 1e-12);
    }
}
