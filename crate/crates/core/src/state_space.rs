//! Validated states for the simplex (statistical) and complex Hilbert space
//! formulations, orthonormal frames, unitaries, and the `omega` map that
//! sends the complex unit sphere onto the simplex.
//!
//! States are dense coefficient arrays in a fixed computational basis.
//! Constructors either accept input within [`EPS_NORM`] of normalization and
//! renormalize it exactly, or reject it, so downstream code can assume exact
//! normalization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for normalization checks.
pub const EPS_NORM: f64 = 1e-9;
/// Tolerance for orthonormality of frames and unitarity of matrices.
pub const EPS_ORTH: f64 = 1e-9;
/// Tolerance for reconstruction round trips.
pub const EPS_RECON: f64 = 1e-8;

/// The finite set of distinct outcomes `x_1, ..., x_n` of an observable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSet {
    labels: Vec<String>,
}

impl OutcomeSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::TooFewOutcomes(labels.len()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("duplicate outcome label {a:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Outcomes labelled `x1`, ..., `xn`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| format!("x{i}")).collect())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A point of the standard simplex: per-outcome probabilities `t_i`.
///
/// Serializes as a plain JSON array `[t1, ..., tn]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixtureState(Vec<f64>);

impl MixtureState {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        validate_mixture(&raw)
    }

    /// The vertex `x_k` of the simplex.
    pub fn vertex(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        let mut t = vec![0.0; n];
        t[k] = 1.0;
        Ok(Self(t))
    }

    /// The barycenter `(1/n, ..., 1/n)`.
    pub fn barycenter(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Nonnegative weights with a positive sum, scaled onto the simplex.
    pub(crate) fn from_weights(mut w: Vec<f64>) -> Self {
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        Self(w)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for MixtureState {
    type Error = Error;

    fn try_from(raw: Vec<f64>) -> Result<Self> {
        validate_mixture(&raw)
    }
}

impl From<MixtureState> for Vec<f64> {
    fn from(s: MixtureState) -> Self {
        s.0
    }
}

/// Validates a real vector as a point of the simplex.
///
/// Components in `[-EPS_NORM, 0)` are clamped to zero, and a sum within
/// `EPS_NORM` of one is renormalized to exactly one.
pub fn validate_mixture(raw: &[f64]) -> Result<MixtureState> {
    if raw.len() < 2 {
        return Err(Error::TooFewOutcomes(raw.len()));
    }
    let mut t = Vec::with_capacity(raw.len());
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if value < -EPS_NORM {
            return Err(Error::NegativeComponent { index, value });
        }
        t.push(value.max(0.0));
    }
    let sum: f64 = t.iter().sum();
    if (sum - 1.0).abs() > EPS_NORM {
        return Err(Error::NotNormalized(sum));
    }
    Ok(MixtureState::from_weights(t))
}

/// How [`validate_pure`] treats a nonzero vector whose norm is not one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Reject unless the norm is within `EPS_NORM` of one.
    Strict,
    /// Scale any nonzero vector to unit norm.
    #[default]
    Renormalize,
}

/// A unit-norm complex vector of amplitudes `q_i`.
///
/// Serializes as `[[re, im], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PureState(Vec<Complex64>);

impl PureState {
    pub fn new(raw: Vec<Complex64>, mode: Normalization) -> Result<Self> {
        validate_pure(&raw, mode)
    }

    /// The computational basis vector `e_k`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        q[k] = Complex64::new(1.0, 0.0);
        Ok(Self(q))
    }

    /// Real nonnegative amplitudes `sqrt(t_i)`: the pure state whose Born
    /// probabilities in the computational frame are `t`.
    pub fn from_probabilities(t: &MixtureState) -> Self {
        Self(t.as_slice().iter().map(|&p| Complex64::new(p.sqrt(), 0.0)).collect())
    }

    /// A nonzero vector scaled to unit norm.
    pub(crate) fn from_unnormalized(mut q: Vec<Complex64>) -> Self {
        let norm = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        q.iter_mut().for_each(|z| *z /= norm);
        Self(q)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.0[k]
    }

    /// Multiplies every amplitude by `z`. The result is generally not unit
    /// norm, so it is returned as a raw vector.
    pub fn scaled(&self, z: Complex64) -> Vec<Complex64> {
        self.0.iter().map(|&q| q * z).collect()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }
}

impl TryFrom<Vec<[f64; 2]>> for PureState {
    type Error = Error;

    fn try_from(raw: Vec<[f64; 2]>) -> Result<Self> {
        let q: Vec<Complex64> = raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        validate_pure(&q, Normalization::Renormalize)
    }
}

impl From<PureState> for Vec<[f64; 2]> {
    fn from(s: PureState) -> Self {
        s.0.into_iter().map(|z| [z.re, z.im]).collect()
    }
}

/// Validates a complex vector as a pure state.
pub fn validate_pure(raw: &[Complex64], mode: Normalization) -> Result<PureState> {
    if raw.len() < 2 {
        return Err(Error::TooFewOutcomes(raw.len()));
    }
    if let Some(i) = raw.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite(i));
    }
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < EPS_NORM {
        return Err(Error::ZeroVector);
    }
    if mode == Normalization::Strict && (norm - 1.0).abs() > EPS_NORM {
        return Err(Error::NotNormalized(norm));
    }
    Ok(PureState::from_unnormalized(raw.to_vec()))
}

/// `omega(z) = (z_1 z_1*, ..., z_n z_n*)`.
pub fn omega(q: &PureState) -> MixtureState {
    omega_of(q.as_slice())
}

/// `omega` applied to an arbitrary nonzero coefficient vector, renormalized
/// onto the simplex.
pub(crate) fn omega_of(c: &[Complex64]) -> MixtureState {
    MixtureState::from_weights(c.iter().map(|z| z.norm_sqr()).collect())
}

/// An orthonormal basis `b_1, ..., b_n` of `C^n`: the eigenvectors of a
/// non-degenerate observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct Frame {
    basis: Vec<Vec<Complex64>>,
}

impl Frame {
    pub fn new(basis: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = basis.len();
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        for b in &basis {
            if b.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
            }
        }
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let ip = inner(&basis[i], &basis[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        if worst > EPS_ORTH {
            return Err(Error::NotOrthonormal(worst));
        }
        Ok(Self { basis })
    }

    pub fn computational(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        let basis = (0..n)
            .map(|k| {
                let mut b = vec![Complex64::new(0.0, 0.0); n];
                b[k] = Complex64::new(1.0, 0.0);
                b
            })
            .collect();
        Ok(Self { basis })
    }

    /// The frame formed by the columns of a unitary.
    pub fn from_unitary(u: &UnitaryMap) -> Self {
        let m = u.matrix();
        let basis = (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect();
        Self { basis }
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn vector(&self, i: usize) -> &[Complex64] {
        &self.basis[i]
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.basis
    }

    /// `U F`: every frame vector mapped through `u`.
    pub fn transformed(&self, u: &UnitaryMap) -> Result<Frame> {
        check_dim(self.n(), u.n())?;
        let basis = self.basis.iter().map(|b| u.apply_raw(b)).collect();
        Ok(Frame { basis })
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for Frame {
    type Error = Error;

    fn try_from(raw: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        Frame::new(raw.into_iter().map(|b| b.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()).collect())
    }
}

impl From<Frame> for Vec<Vec<[f64; 2]>> {
    fn from(f: Frame) -> Self {
        f.basis.into_iter().map(|b| b.into_iter().map(|z| [z.re, z.im]).collect()).collect()
    }
}

/// `<a, b> = sum conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Coefficients `(<b_i, q>)_i` of `q` in the frame.
pub fn coefficients_in_frame(q: &PureState, frame: &Frame) -> Result<Vec<Complex64>> {
    check_dim(frame.n(), q.n())?;
    Ok(coefficients_raw(q.as_slice(), frame))
}

pub(crate) fn coefficients_raw(q: &[Complex64], frame: &Frame) -> Vec<Complex64> {
    frame.basis.iter().map(|b| inner(b, q)).collect()
}

/// `sum_i c_i b_i`.
pub fn reconstruct(coefficients: &[Complex64], frame: &Frame) -> Result<Vec<Complex64>> {
    check_dim(frame.n(), coefficients.len())?;
    let n = frame.n();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (c, b) in coefficients.iter().zip(&frame.basis) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    Ok(out)
}

/// Born probabilities `|<b_k, q>|^2` of every outcome of the frame.
pub fn born_probabilities(q: &PureState, frame: &Frame) -> Result<MixtureState> {
    Ok(omega_of(&coefficients_in_frame(q, frame)?))
}

/// A unitary `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMap {
    u: DMatrix<Complex64>,
}

impl UnitaryMap {
    pub fn new(u: DMatrix<Complex64>) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::DimensionMismatch { expected: u.nrows(), actual: u.ncols() });
        }
        if u.nrows() < 2 {
            return Err(Error::TooFewOutcomes(u.nrows()));
        }
        let gram = u.adjoint() * &u;
        let mut worst = 0.0_f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        if worst > EPS_ORTH {
            return Err(Error::NotUnitary(worst));
        }
        Ok(Self { u })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// `diag(e^{i phi_k})`.
    pub fn diagonal_phases(phases: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    /// The permutation matrix sending basis vector `e_j` to `e_{perm[j]}`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (j, &i) in perm.iter().enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            m[(i, j)] = Complex64::new(1.0, 0.0);
        }
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub(crate) fn apply_raw(&self, q: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.u[(i, j)] * q[j]).sum()).collect()
    }
}

/// Which state space a state lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Statistical states on the simplex.
    Real,
    /// Unit vectors in complex Hilbert space.
    Complex,
}

/// A state of either model. Deserializes from `[t1, ...]` as [`State::Real`]
/// and from `[[re, im], ...]` as [`State::Complex`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum State {
    Real(MixtureState),
    Complex(PureState),
}

impl State {
    pub fn model(&self) -> Model {
        match self {
            State::Real(_) => Model::Real,
            State::Complex(_) => Model::Complex,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            State::Real(t) => t.n(),
            State::Complex(q) => q.n(),
        }
    }
}

impl From<MixtureState> for State {
    fn from(t: MixtureState) -> Self {
        State::Real(t)
    }
}

impl From<PureState> for State {
    fn from(q: PureState) -> Self {
        State::Complex(q)
    }
}

/// `U q`, renormalized to absorb rounding.
pub fn apply_unitary(u: &UnitaryMap, q: &PureState) -> Result<PureState> {
    check_dim(u.n(), q.n())?;
    Ok(PureState::from_unnormalized(u.apply_raw(q.as_slice())))
}
