//! The Bayes-optimal decision rule.
//!
//! For a system state with per-outcome magnitudes `a_k` and an observer
//! state with magnitudes `b_k`, outcome `k` is chosen when its likelihood
//! ratio `a_k / b_k` is maximal. In the simplex model the magnitudes are the
//! probabilities `t_k` and `r_k`; in the complex model they are the moduli of
//! the frame coefficients, giving the pseudo-odds `|q_k| / |r_k|`.
//!
//! Ratios are never formed by division. Two candidates are ordered by
//! cross-multiplication, with `a_k = 0` pinned to ratio zero and `b_k = 0`
//! (with `a_k > 0`) to ratio infinity, so strict and tied comparisons are
//! exact. Ties go to the lowest index.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{Sampler, SamplerSpec};
use crate::state_space::{coefficients_raw, Frame, MixtureState, Model, PureState, State, EPS_NORM};

/// Which monotone form of the odds the complex model compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OddsForm {
    /// `|q_k| / |r_k|`.
    #[default]
    Moduli,
    /// `|q_k|^2 / |r_k|^2`, the Born-level odds.
    Squared,
}

/// Per-outcome likelihood ratios, kept as numerator/denominator pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodRatios {
    numerators: Vec<f64>,
    denominators: Vec<f64>,
    model: Model,
}

impl LikelihoodRatios {
    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n(&self) -> usize {
        self.numerators.len()
    }

    pub fn numerators(&self) -> &[f64] {
        &self.numerators
    }

    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }

    /// The ratios as extended reals (`0` and `+inf` included).
    pub fn ratios(&self) -> Vec<f64> {
        self.numerators.iter().zip(&self.denominators).map(|(&a, &b)| ratio(a, b)).collect()
    }

    /// The Born-level odds `|q_k|^2 / |r_k|^2`. For the simplex model these
    /// are the squared ratios, which order outcomes identically.
    pub fn born_odds(&self) -> Vec<f64> {
        self.numerators.iter().zip(&self.denominators).map(|(&a, &b)| ratio(a * a, b * b)).collect()
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

/// The value of the deterministic interaction: the chosen outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    /// Zero-based index of the chosen outcome.
    pub outcome_index: usize,
    pub tied: bool,
    /// Every index attaining the maximal ratio, ascending.
    pub tied_set: Vec<usize>,
}

/// Orders ratio `a_k / b_k` against `a_j / b_j`.
#[inline]
pub fn compare_ratios(ak: f64, bk: f64, aj: f64, bj: f64) -> Ordering {
    match (ak == 0.0, aj == 0.0) {
        (true, true) => return Ordering::Equal,
        (true, false) => return Ordering::Less,
        (false, true) => return Ordering::Greater,
        _ => {}
    }
    // Both numerators positive; a zero denominator is +inf and the cross
    // products handle it: inf vs finite gives ak*bj > 0 = aj*0.
    (ak * bj).total_cmp(&(aj * bk))
}

/// Index of the lowest maximal ratio and whether another index ties it.
///
/// Allocation-free core of [`decide`], used by the Monte Carlo loops.
#[inline]
pub fn argmax_ratio(numerators: &[f64], denominators: &[f64]) -> Result<(usize, bool)> {
    debug_assert_eq!(numerators.len(), denominators.len());
    let mut best = 0;
    let mut tied = false;
    for k in 1..numerators.len() {
        match compare_ratios(numerators[k], denominators[k], numerators[best], denominators[best]) {
            Ordering::Greater => {
                best = k;
                tied = false;
            }
            Ordering::Equal => tied = true,
            Ordering::Less => {}
        }
    }
    if numerators[best] == 0.0 {
        return Err(Error::AllRatiosZero);
    }
    Ok((best, tied))
}

/// Moduli `|c_k|` of a coefficient vector.
#[inline]
pub fn moduli_into(c: &[Complex64], out: &mut [f64]) {
    out.iter_mut().zip(c).for_each(|(m, z)| *m = z.norm());
}

/// Squared moduli `|c_k|^2` of a coefficient vector.
#[inline]
pub fn squared_moduli_into(c: &[Complex64], out: &mut [f64]) {
    out.iter_mut().zip(c).for_each(|(m, z)| *m = z.norm_sqr());
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

fn magnitudes(state: &State, frame: Option<&Frame>, form: OddsForm) -> Vec<f64> {
    match state {
        State::Real(t) => t.as_slice().to_vec(),
        State::Complex(q) => {
            let c = match frame {
                Some(f) => coefficients_raw(q.as_slice(), f),
                None => q.as_slice().to_vec(),
            };
            let mut m = vec![0.0; c.len()];
            match form {
                OddsForm::Moduli => moduli_into(&c, &mut m),
                OddsForm::Squared => squared_moduli_into(&c, &mut m),
            }
            m
        }
    }
}

fn ratios_with(system: &State, observer: &State, frame: Option<&Frame>, form: OddsForm) -> Result<LikelihoodRatios> {
    if system.model() != observer.model() {
        return Err(Error::KindMismatch);
    }
    check_dim(system.n(), observer.n())?;
    if let Some(f) = frame {
        check_dim(f.n(), system.n())?;
    }
    let numerators = magnitudes(system, frame, form);
    let denominators = magnitudes(observer, frame, form);
    if denominators.iter().all(|&b| b == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(LikelihoodRatios { numerators, denominators, model: system.model() })
}

/// Likelihood ratios of `system` against `observer` in the computational frame.
pub fn likelihood_ratios(system: &State, observer: &State) -> Result<LikelihoodRatios> {
    ratios_with(system, observer, None, OddsForm::Moduli)
}

/// Likelihood ratios of two pure states with respect to the outcomes of `frame`.
pub fn likelihood_ratios_in_frame(system: &PureState, observer: &PureState, frame: &Frame) -> Result<LikelihoodRatios> {
    ratios_with(&State::Complex(system.clone()), &State::Complex(observer.clone()), Some(frame), OddsForm::Moduli)
}

/// The full decision for given ratios.
pub fn decide_ratios(ratios: &LikelihoodRatios) -> Result<Decision> {
    let (outcome_index, tied) = argmax_ratio(&ratios.numerators, &ratios.denominators)?;
    let (a, b) = (&ratios.numerators, &ratios.denominators);
    let tied_set = if tied {
        (0..ratios.n())
            .filter(|&j| compare_ratios(a[j], b[j], a[outcome_index], b[outcome_index]) == Ordering::Equal)
            .collect()
    } else {
        vec![outcome_index]
    };
    Ok(Decision { outcome_index, tied, tied_set })
}

/// The outcome a Bayes-optimal observer in state `observer` reports for `system`.
pub fn decide(system: &State, observer: &State) -> Result<Decision> {
    decide_ratios(&likelihood_ratios(system, observer)?)
}

/// [`decide`] for pure states measured in `frame`, comparing odds in `form`.
pub fn decide_in_frame(system: &PureState, observer: &PureState, frame: &Frame, form: OddsForm) -> Result<Decision> {
    decide_ratios(&ratios_with(&State::Complex(system.clone()), &State::Complex(observer.clone()), Some(frame), form)?)
}

/// Strict eigenset membership: ratio `k` exceeds every other ratio.
pub fn eigenset_contains(k: usize, system: &State, observer: &State) -> Result<bool> {
    let r = likelihood_ratios(system, observer)?;
    if k >= r.n() {
        return Err(Error::IndexOutOfRange { index: k, n: r.n() });
    }
    if r.numerators.iter().all(|&a| a == 0.0) {
        return Err(Error::AllRatiosZero);
    }
    let (a, b) = (&r.numerators, &r.denominators);
    Ok((0..r.n()).filter(|&j| j != k).all(|j| compare_ratios(a[k], b[k], a[j], b[j]) == Ordering::Greater))
}

/// The point `sum_{i != k} lambda_i x_i + lambda_k t` of the open simplex
/// spanned by the vertices with `x_k` replaced by the system state.
pub fn barycentric_observer(k: usize, system: &MixtureState, lambda: &[f64]) -> Result<MixtureState> {
    let n = system.n();
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    check_dim(n, lambda.len())?;
    if let Some(i) = lambda.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidBarycentric(format!("weight {i} is not positive")));
    }
    let sum: f64 = lambda.iter().sum();
    if (sum - 1.0).abs() > EPS_NORM {
        return Err(Error::InvalidBarycentric(format!("weights sum to {sum}")));
    }
    let lk = lambda[k];
    let point = (0..n)
        .map(|i| {
            let vertex = if i == k { 0.0 } else { lambda[i] };
            vertex + lk * system.get(i)
        })
        .collect();
    Ok(MixtureState::from_weights(point))
}

fn swap_checked<T: Clone>(v: &[T], i: usize, j: usize) -> Result<Vec<T>> {
    let n = v.len();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, n });
        }
    }
    let mut out = v.to_vec();
    out.swap(i, j);
    Ok(out)
}

/// Exchanges components `i` and `j` of a state.
pub fn swap_components(state: &State, i: usize, j: usize) -> Result<State> {
    Ok(match state {
        State::Real(t) => State::Real(MixtureState::from_weights(swap_checked(t.as_slice(), i, j)?)),
        State::Complex(q) => State::Complex(PureState::from_unnormalized(swap_checked(q.as_slice(), i, j)?)),
    })
}

/// One repeated-measurement trial, prepared for a fixed system state: draw
/// an observer state, then decide.
#[derive(Debug, Clone)]
pub struct TrialKernel {
    system: Vec<f64>,
    frame: Option<Frame>,
    sampler: Sampler,
    form: OddsForm,
}

/// Reusable buffers for [`TrialKernel::trial`].
#[derive(Debug, Clone)]
pub struct Scratch {
    real: Vec<f64>,
    complex: Vec<Complex64>,
    coefficients: Vec<Complex64>,
    magnitudes: Vec<f64>,
}

impl TrialKernel {
    /// `frame` is only meaningful for the complex model; `None` means the
    /// computational frame.
    pub fn new(system: &State, frame: Option<&Frame>, sampler: &SamplerSpec, form: OddsForm) -> Result<Self> {
        let n = system.n();
        let frame = match (system, frame) {
            (State::Real(_), Some(_)) => {
                return Err(Error::InvalidConfig("frames apply to the complex model only".into()));
            }
            (_, Some(f)) => {
                check_dim(n, f.n())?;
                Some(f.clone())
            }
            _ => None,
        };
        let system_magnitudes = magnitudes(system, frame.as_ref(), form);
        if system_magnitudes.iter().all(|&a| a == 0.0) {
            return Err(Error::AllRatiosZero);
        }
        Ok(Self { system: system_magnitudes, frame, sampler: Sampler::new(sampler, system.model(), n)?, form })
    }

    pub fn n(&self) -> usize {
        self.system.len()
    }

    pub fn scratch(&self) -> Scratch {
        let n = self.n();
        Scratch {
            real: vec![0.0; n],
            complex: vec![Complex64::new(0.0, 0.0); n],
            coefficients: vec![Complex64::new(0.0, 0.0); n],
            magnitudes: vec![0.0; n],
        }
    }

    /// Draws one observer state and returns `(outcome, tied)`.
    #[inline]
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut Scratch) -> Result<(usize, bool)> {
        match self.sampler.model() {
            Model::Real => {
                self.sampler.draw_real(rng, &mut s.real)?;
                argmax_ratio(&self.system, &s.real)
            }
            Model::Complex => {
                self.sampler.draw_complex(rng, &mut s.complex)?;
                let c: &[Complex64] = match &self.frame {
                    Some(f) => {
                        for (out, b) in s.coefficients.iter_mut().zip(f.vectors()) {
                            *out = crate::state_space::inner(b, &s.complex);
                        }
                        &s.coefficients
                    }
                    None => &s.complex,
                };
                match self.form {
                    OddsForm::Moduli => moduli_into(c, &mut s.magnitudes),
                    OddsForm::Squared => squared_moduli_into(c, &mut s.magnitudes),
                }
                argmax_ratio(&self.system, &s.magnitudes)
            }
        }
    }
}
