//! The k-qubit Pauli-setting measurement design.
//!
//! A *setting* picks one of σx, σy, σz for each qubit; measuring it yields an
//! *outcome* in {+1, −1}^k. Settings are ordered lexicographically with
//! x < y < z, outcomes with +1 before −1. Outcome `o` has integer index
//! `Σ_j bit_j · 2^(k−1−j)` where `bit_j = 1` iff `o_j = −1`, so qubit 0 is the
//! most significant bit. The same convention orders the computational basis
//! of the d = 2^k dimensional state space.
//!
//! Pauli labels `b ∈ {I,x,y,z}^k` are indexed in base 4 with digits
//! I=0, x=1, y=2, z=3, qubit 0 most significant.
//!
//! The linear map `p = A ρ̃` from Pauli coefficients to outcome probabilities
//! has entries `A_b(o|s) = ∏_{j: b_j ≠ I} o_j · [b_j = s_j]`. Only labels whose
//! non-identity letters agree with the setting contribute, and for a fixed
//! setting the remaining sum over subsets of qubits is a Walsh–Hadamard
//! transform. Both [`forward_map`] and [`reconstruct_from_probabilities`] are
//! computed that way.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::{hermiticity_defect, CMatrix, DensityMatrix, HermitianEstimate, HERMITIAN_TOL};

pub const MAX_QUBITS: usize = 10;

/// Single-qubit measurement axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    pub fn from_symbol(c: char) -> Result<Self> {
        match c {
            'x' | 'X' => Ok(Axis::X),
            'y' | 'Y' => Ok(Axis::Y),
            'z' | 'Z' => Ok(Axis::Z),
            other => Err(TomoError::invalid(format!("invalid setting symbol {other:?}"))),
        }
    }

    /// Eigenvectors `[|e_+⟩, |e_−⟩]` in the computational basis.
    pub fn eigenvectors(self) -> [[Complex64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Axis::Z => [[one, zero], [zero, one]],
            Axis::X => [[one * h, one * h], [one * h, -one * h]],
            Axis::Y => [
                [one * h, Complex64::new(0.0, h)],
                [one * h, Complex64::new(0.0, -h)],
            ],
        }
    }

    /// Rows `⟨e_+|`, `⟨e_−|`: the rotation taking the computational basis to
    /// this axis' eigenbasis.
    fn bra_matrix(self) -> [[Complex64; 2]; 2] {
        let [plus, minus] = self.eigenvectors();
        [
            [plus[0].conj(), plus[1].conj()],
            [minus[0].conj(), minus[1].conj()],
        ]
    }
}

/// One factor of a Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn digit(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    fn from_digit(d: usize) -> Self {
        match d {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    fn axis(self) -> Option<Axis> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(Axis::X),
            Pauli::Y => Some(Axis::Y),
            Pauli::Z => Some(Axis::Z),
        }
    }

    pub fn symbol(self) -> char {
        self.axis().map_or('I', Axis::symbol)
    }
}

impl From<Axis> for Pauli {
    fn from(a: Axis) -> Self {
        match a {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

fn check_qubits(k: usize) -> Result<()> {
    if k == 0 || k > MAX_QUBITS {
        return Err(TomoError::invalid(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {k}"
        )));
    }
    Ok(())
}

/// `log2(d)` if `d` is a supported power of two.
pub fn qubits_for_dim(d: usize) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(TomoError::invalid(format!(
            "dimension {d} is not 2^k for k >= 1"
        )));
    }
    let k = d.trailing_zeros() as usize;
    check_qubits(k)?;
    Ok(k)
}

/// A measurement setting `s ∈ {x,y,z}^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Setting(Vec<Axis>);

impl Setting {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        check_qubits(axes.len())?;
        Ok(Self(axes))
    }

    /// The `index`-th setting in lexicographic order (base-3 digits).
    pub fn from_index(index: usize, k: usize) -> Result<Self> {
        check_qubits(k)?;
        if index >= 3usize.pow(k as u32) {
            return Err(TomoError::invalid(format!(
                "setting index {index} out of range for k={k}"
            )));
        }
        let mut axes = vec![Axis::X; k];
        let mut rest = index;
        for slot in axes.iter_mut().rev() {
            *slot = Axis::ALL[rest % 3];
            rest /= 3;
        }
        Ok(Self(axes))
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, a| acc * 3 + *a as usize)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|a| write!(f, "{}", a.symbol()))
    }
}

impl FromStr for Setting {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s.chars().map(Axis::from_symbol).collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }
}

/// An outcome `o ∈ {+1,−1}^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Outcome(Vec<i8>);

impl Outcome {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        check_qubits(signs.len())?;
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(TomoError::invalid("outcome entries must be +1 or -1"));
        }
        Ok(Self(signs))
    }

    pub fn from_index(index: usize, k: usize) -> Result<Self> {
        check_qubits(k)?;
        if index >= 1 << k {
            return Err(TomoError::invalid(format!(
                "outcome index {index} out of range for k={k}"
            )));
        }
        Ok(Self(
            (0..k)
                .map(|j| if index >> (k - 1 - j) & 1 == 1 { -1 } else { 1 })
                .collect(),
        ))
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, &s| (acc << 1) | usize::from(s == -1))
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A Pauli label `b ∈ {I,x,y,z}^k`, naming `σ_b = σ_{b_1} ⊗ … ⊗ σ_{b_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel(Vec<Pauli>);

impl PauliLabel {
    pub fn new(factors: Vec<Pauli>) -> Result<Self> {
        check_qubits(factors.len())?;
        Ok(Self(factors))
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; k])
    }

    pub fn from_index(index: usize, k: usize) -> Result<Self> {
        check_qubits(k)?;
        if index >= 1 << (2 * k) {
            return Err(TomoError::invalid(format!(
                "Pauli label index {index} out of range for k={k}"
            )));
        }
        Ok(Self(
            (0..k)
                .map(|j| Pauli::from_digit(index >> (2 * (k - 1 - j)) & 3))
                .collect(),
        ))
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| (acc << 2) | p.digit())
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of identity factors.
    pub fn identity_count(&self) -> usize {
        self.0.iter().filter(|p| **p == Pauli::I).count()
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|p| write!(f, "{}", p.symbol()))
    }
}

impl FromStr for PauliLabel {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .chars()
            .map(|c| match c {
                'I' | 'i' => Ok(Pauli::I),
                other => Axis::from_symbol(other).map(Pauli::from),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }
}

/// Settings and outcomes of the full k-qubit design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementDesign {
    k: usize,
    settings: Vec<Setting>,
}

impl MeasurementDesign {
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self {
            k,
            settings: enumerate_settings(k)?,
        })
    }

    pub fn qubits(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        1 << self.k
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn num_settings(&self) -> usize {
        self.settings.len()
    }

    pub fn num_outcomes(&self) -> usize {
        1 << self.k
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        (0..self.num_outcomes())
            .map(|i| Outcome::from_index(i, self.k).expect("index in range"))
            .collect()
    }
}

/// All `3^k` settings in lexicographic order.
pub fn enumerate_settings(k: usize) -> Result<Vec<Setting>> {
    check_qubits(k)?;
    (0..3usize.pow(k as u32))
        .map(|i| Setting::from_index(i, k))
        .collect()
}

/// `A_b(o|s) = Tr(σ_b P_o^s) = ∏_{j: b_j ≠ I} o_j · [b_j = s_j]`.
pub fn pauli_coefficient(b: &PauliLabel, o: &Outcome, s: &Setting) -> Result<i8> {
    if b.len() != o.len() || b.len() != s.len() {
        return Err(TomoError::invalid(format!(
            "length mismatch: label {}, outcome {}, setting {}",
            b.len(),
            o.len(),
            s.len()
        )));
    }
    let mut value = 1i8;
    for ((p, &sign), &axis) in b.0.iter().zip(&o.0).zip(&s.0) {
        match p.axis() {
            None => {}
            Some(a) if a == axis => value *= sign,
            Some(_) => return Ok(0),
        }
    }
    Ok(value)
}

/// `[A*A]_{b,b} = 2^k · 3^{#I(b)}`.
pub fn gram_diagonal_entry(b: &PauliLabel) -> u64 {
    (1u64 << b.len()) * 3u64.pow(b.identity_count() as u32)
}

/// Pauli coefficients `ρ_b = Tr(ρ σ_b)/d`, indexed by [`PauliLabel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct PauliCoefficients {
    k: usize,
    values: Vec<f64>,
}

impl PauliCoefficients {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        check_qubits(k)?;
        if values.len() != 1 << (2 * k) {
            return Err(TomoError::invalid(format!(
                "expected {} coefficients for k={k}, got {}",
                1usize << (2 * k),
                values.len()
            )));
        }
        Ok(Self { k, values })
    }

    pub fn zeros(k: usize) -> Result<Self> {
        check_qubits(k)?;
        Ok(Self {
            k,
            values: vec![0.0; 1 << (2 * k)],
        })
    }

    pub fn qubits(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, b: &PauliLabel) -> f64 {
        self.values[b.index()]
    }

    /// `Σ_b ρ_b σ_b`.
    pub fn to_matrix(&self) -> CMatrix {
        let d = 1usize << self.k;
        let mut out = CMatrix::zeros(d, d);
        for (index, &c) in self.values.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let pattern = PauliPattern::from_label_index(index, self.k);
            for col in 0..d {
                out[(col ^ pattern.flip, col)] += pattern.phase(col) * c;
            }
        }
        out
    }
}

/// Sparse form of `σ_b`: `σ_b |c⟩ = phase(c) · |c ⊕ flip⟩`.
struct PauliPattern {
    flip: usize,
    /// Bits carrying σy.
    y_mask: usize,
    /// Bits carrying σy or σz (phase −1 on |1⟩ up to the σy factor of i).
    sign_mask: usize,
}

impl PauliPattern {
    fn from_label_index(index: usize, k: usize) -> Self {
        let mut flip = 0;
        let mut y_mask = 0;
        let mut sign_mask = 0;
        for j in 0..k {
            let bit = 1 << (k - 1 - j);
            match index >> (2 * (k - 1 - j)) & 3 {
                1 => flip |= bit,
                2 => {
                    flip |= bit;
                    y_mask |= bit;
                    sign_mask |= bit;
                }
                3 => sign_mask |= bit,
                _ => {}
            }
        }
        Self {
            flip,
            y_mask,
            sign_mask,
        }
    }

    /// σy|0⟩ = i|1⟩, σy|1⟩ = −i|0⟩, σz|1⟩ = −|1⟩.
    fn phase(&self, col: usize) -> Complex64 {
        let negative = (col & self.sign_mask).count_ones() % 2 == 1;
        let i_power = self.y_mask.count_ones() % 4;
        let base = match i_power {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if negative {
            -base
        } else {
            base
        }
    }
}

/// Dense `σ_b`.
pub fn pauli_matrix(b: &PauliLabel) -> CMatrix {
    let k = b.len();
    let d = 1usize << k;
    let pattern = PauliPattern::from_label_index(b.index(), k);
    let mut out = CMatrix::zeros(d, d);
    for col in 0..d {
        out[(col ^ pattern.flip, col)] = pattern.phase(col);
    }
    out
}

/// Pauli expansion of a Hermitian matrix of dimension 2^k.
pub fn state_to_pauli_coeffs(m: &CMatrix) -> Result<PauliCoefficients> {
    if !m.is_square() {
        return Err(TomoError::invalid("expected a square matrix"));
    }
    let d = m.nrows();
    let k = qubits_for_dim(d)?;
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * (1.0 + m.norm()) {
        return Err(TomoError::invalid(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let values = (0..1usize << (2 * k))
        .map(|index| {
            let pattern = PauliPattern::from_label_index(index, k);
            let trace: Complex64 = (0..d)
                .map(|col| m[(col, col ^ pattern.flip)] * pattern.phase(col))
                .sum();
            trace.re / d as f64
        })
        .collect();
    Ok(PauliCoefficients { k, values })
}

/// Outcome probabilities stacked settings-major: entry `s·2^k + o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    k: usize,
    values: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        check_qubits(k)?;
        let expected = 6usize.pow(k as u32);
        if values.len() != expected {
            return Err(TomoError::invalid(format!(
                "expected {expected} stacked probabilities for k={k}, got {}",
                values.len()
            )));
        }
        Ok(Self { k, values })
    }

    pub fn qubits(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `p(·|s)` for the setting with lexicographic index `setting`.
    pub fn row(&self, setting: usize) -> &[f64] {
        let width = 1 << self.k;
        &self.values[setting * width..(setting + 1) * width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(1 << self.k)
    }
}

/// In-place unnormalized Walsh–Hadamard transform:
/// `out[t] = Σ_o in[o] · (−1)^{popcount(t & o)}`.
fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Label index of `b(s, T)`: `b_j = s_j` for qubits in the bitmask `subset`,
/// identity elsewhere.
fn subset_label_index(s: &Setting, subset: usize) -> usize {
    let k = s.len();
    s.0.iter().enumerate().fold(0, |acc, (j, a)| {
        let digit = if subset >> (k - 1 - j) & 1 == 1 {
            *a as usize + 1
        } else {
            0
        };
        (acc << 2) | digit
    })
}

/// `p = A ρ̃`.
pub fn forward_map(coeffs: &PauliCoefficients) -> ProbabilityVector {
    let k = coeffs.k;
    let width = 1usize << k;
    let mut values = Vec::with_capacity(6usize.pow(k as u32));
    for s in enumerate_settings(k).expect("k validated on construction") {
        let mut row: Vec<f64> = (0..width)
            .map(|subset| coeffs.values[subset_label_index(&s, subset)])
            .collect();
        walsh_hadamard(&mut row);
        values.extend(row);
    }
    ProbabilityVector { k, values }
}

/// Pauli coefficients `ρ̃ = (A*A)^{-1} A* p` for an arbitrary stacked vector
/// (exact probabilities or empirical frequencies).
pub fn invert_to_coeffs(p: &ProbabilityVector) -> PauliCoefficients {
    let k = p.k;
    let mut values = vec![0.0; 1 << (2 * k)];
    for (index, row) in p.rows().enumerate() {
        let s = Setting::from_index(index, k).expect("index in range");
        let mut transformed = row.to_vec();
        walsh_hadamard(&mut transformed);
        for (subset, t) in transformed.into_iter().enumerate() {
            values[subset_label_index(&s, subset)] += t;
        }
    }
    for (index, v) in values.iter_mut().enumerate() {
        let label = PauliLabel::from_index(index, k).expect("index in range");
        *v /= gram_diagonal_entry(&label) as f64;
    }
    PauliCoefficients { k, values }
}

/// `Σ_b Σ_o Σ_s p(o|s) A_b(o|s) / (2^k 3^{#I(b)}) σ_b`.
pub fn reconstruct_from_probabilities(p: &ProbabilityVector) -> HermitianEstimate {
    HermitianEstimate::from_hermitian(invert_to_coeffs(p).to_matrix())
}

fn check_setting_dim(rho: &DensityMatrix, s: &Setting) -> Result<usize> {
    let k = qubits_for_dim(rho.dim())?;
    if s.len() != k {
        return Err(TomoError::invalid(format!(
            "setting {s} has {} qubits, state has {k}",
            s.len()
        )));
    }
    Ok(k)
}

/// Applies the 2×2 matrix `u` to qubit `j` from the left.
fn apply_left(m: &mut CMatrix, u: &[[Complex64; 2]; 2], j: usize, k: usize) {
    let bit = 1usize << (k - 1 - j);
    let d = m.nrows();
    for c in 0..m.ncols() {
        for r0 in (0..d).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            let (a, b) = (m[(r0, c)], m[(r1, c)]);
            m[(r0, c)] = u[0][0] * a + u[0][1] * b;
            m[(r1, c)] = u[1][0] * a + u[1][1] * b;
        }
    }
}

/// `p(o|s) = ⟨e_o^s|ρ|e_o^s⟩` via `W ρ W†` with `W = ⊗_j (eigenbasis of s_j)†`,
/// costing O(k d²).
pub fn probabilities(rho: &DensityMatrix, s: &Setting) -> Result<Vec<f64>> {
    let k = check_setting_dim(rho, s)?;
    Ok(rotated_diagonal(rho.matrix(), s, k))
}

fn rotated_diagonal(m: &CMatrix, s: &Setting, k: usize) -> Vec<f64> {
    let mut left = m.clone();
    for (j, axis) in s.0.iter().enumerate() {
        apply_left(&mut left, &axis.bra_matrix(), j, k);
    }
    // W (W ρ)† = W ρ W† for Hermitian ρ.
    let mut both = left.adjoint();
    for (j, axis) in s.0.iter().enumerate() {
        apply_left(&mut both, &axis.bra_matrix(), j, k);
    }
    both.diagonal().iter().map(|z| z.re).collect()
}

/// `|e_o^s⟩ = ⊗_j |e_{o_j}^{s_j}⟩`.
pub fn eigenvector(s: &Setting, o: &Outcome) -> Result<Vec<Complex64>> {
    if s.len() != o.len() {
        return Err(TomoError::invalid("setting and outcome lengths differ"));
    }
    let mut v = vec![Complex64::new(1.0, 0.0)];
    for (axis, &sign) in s.0.iter().zip(&o.0) {
        let e = axis.eigenvectors()[usize::from(sign == -1)];
        v = v
            .iter()
            .flat_map(|&x| [x * e[0], x * e[1]])
            .collect();
    }
    Ok(v)
}

/// Reference path: `Tr(ρ P_o^s)` from explicit projector vectors, O(d³) per
/// setting.
pub fn projector_probabilities(rho: &DensityMatrix, s: &Setting) -> Result<Vec<f64>> {
    let k = check_setting_dim(rho, s)?;
    let m = rho.matrix();
    (0..1usize << k)
        .map(|o| {
            let e = eigenvector(s, &Outcome::from_index(o, k)?)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, er) in e.iter().enumerate() {
                for (c, ec) in e.iter().enumerate() {
                    acc += er.conj() * m[(r, c)] * ec;
                }
            }
            Ok(acc.re)
        })
        .collect()
}

/// Stacked probabilities over all settings.
pub fn all_probabilities(rho: &DensityMatrix) -> Result<ProbabilityVector> {
    let k = qubits_for_dim(rho.dim())?;
    let mut values = Vec::with_capacity(6usize.pow(k as u32));
    for s in enumerate_settings(k)? {
        values.extend(rotated_diagonal(rho.matrix(), &s, k));
    }
    ProbabilityVector::new(k, values)
}
