//! Seeded generation of observer states: the flat measure on the simplex,
//! the rotation-invariant measure on the complex unit sphere, an
//! epsilon-concentrated non-uniform family, and Haar-random unitaries.
//!
//! Every random draw flows from an [`RngStream`], a `(seed, stream_index)`
//! pair backed by ChaCha8. Parallel work is cut into fixed-size batches whose
//! streams depend only on the batch index, so results do not depend on the
//! number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state_space::{MixtureState, Model, PureState, State, UnitaryMap};

/// Trials per parallel batch. Batch boundaries are part of the
/// reproducibility contract: changing this changes every seeded result.
pub const BATCH_SIZE: u64 = 1 << 16;

/// Consecutive rejections after which the epsilon-concentrated sampler gives up.
pub const MAX_REJECTIONS: u64 = 1_000_000;

/// A deterministic random stream identified by `(seed, stream_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// The `i`-th child stream. Children of distinct parents use distinct
    /// keys, so they never overlap.
    pub fn substream(&self, i: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_index.wrapping_add(0x5851_f42d_4c95_7f2d))),
            stream_index: i,
        }
    }

    /// A seed for an independent run, distinct for every `i`.
    pub fn child_seed(&self, i: u64) -> u64 {
        splitmix64(splitmix64(self.seed ^ self.stream_index.rotate_left(32)) ^ i)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `f(batch_index, first_trial, len)` over `total` trials split into
/// [`BATCH_SIZE`] batches, in parallel, returning the outputs in batch order.
pub fn map_batches<T, F>(total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64, u64) -> T + Sync,
{
    let batches = total.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH_SIZE;
            f(b, start, BATCH_SIZE.min(total - start))
        })
        .collect()
}

/// Distribution of observer states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// The normalized flat measure.
    #[default]
    Uniform,
    /// With probability `weight`, a uniform draw from the `epsilon`-ball
    /// around `center`; otherwise a uniform draw from the whole space.
    EpsilonConcentrated { center: State, epsilon: f64, weight: f64 },
}

impl SamplerSpec {
    pub fn validate(&self, model: Model, n: usize) -> Result<()> {
        match self {
            SamplerSpec::Uniform => Ok(()),
            SamplerSpec::EpsilonConcentrated { center, epsilon, weight } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return Err(Error::InvalidSampler(format!("epsilon must be positive, got {epsilon}")));
                }
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidSampler(format!("weight must lie in [0, 1], got {weight}")));
                }
                if center.model() != model {
                    return Err(Error::InvalidSampler("center is of the wrong state kind".into()));
                }
                if center.n() != n {
                    return Err(Error::DimensionMismatch { expected: n, actual: center.n() });
                }
                Ok(())
            }
        }
    }
}

/// Writes a flat-Dirichlet draw into `out` (normalized standard exponentials).
pub fn fill_uniform_simplex<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut sum = 0.0;
    for x in out.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        *x = e;
        sum += e;
    }
    out.iter_mut().for_each(|x| *x /= sum);
}

/// Writes a draw from the rotation-invariant measure on the unit sphere of
/// `C^n` into `out` (normalized complex Gaussian).
pub fn fill_uniform_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [Complex64]) {
    let mut norm = 0.0;
    for z in out.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = Complex64::new(re, im);
        norm += re * re + im * im;
    }
    let norm = norm.sqrt();
    out.iter_mut().for_each(|z| *z /= norm);
}

pub fn uniform_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<MixtureState> {
    if n < 2 {
        return Err(Error::TooFewOutcomes(n));
    }
    let mut t = vec![0.0; n];
    fill_uniform_simplex(rng, &mut t);
    Ok(MixtureState::from_weights(t))
}

pub fn uniform_complex_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    if n < 2 {
        return Err(Error::TooFewOutcomes(n));
    }
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    fill_uniform_sphere(rng, &mut q);
    Ok(PureState::from_unnormalized(q))
}

/// Rotates `q` by a global phase so its largest-modulus component is real
/// and nonnegative.
pub fn fix_global_phase(q: &mut [Complex64]) {
    let Some(big) = q.iter().copied().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())) else {
        return;
    };
    let m = big.norm();
    if m > 0.0 {
        let phase = big.conj() / m;
        q.iter_mut().for_each(|z| *z *= phase);
    }
}

/// A [`SamplerSpec`] compiled for one model and dimension.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: Model,
    n: usize,
    concentrated: Option<Concentration>,
}

#[derive(Debug, Clone)]
struct Concentration {
    real_center: Vec<f64>,
    complex_center: Vec<Complex64>,
    epsilon_sq: f64,
    weight: f64,
}

impl Sampler {
    pub fn new(spec: &SamplerSpec, model: Model, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        spec.validate(model, n)?;
        let concentrated = match spec {
            SamplerSpec::Uniform => None,
            SamplerSpec::EpsilonConcentrated { weight, .. } if *weight == 0.0 => None,
            SamplerSpec::EpsilonConcentrated { center, epsilon, weight } => {
                let (real_center, complex_center) = match center {
                    State::Real(t) => (t.as_slice().to_vec(), Vec::new()),
                    State::Complex(q) => {
                        let mut c = q.as_slice().to_vec();
                        fix_global_phase(&mut c);
                        (Vec::new(), c)
                    }
                };
                Some(Concentration { real_center, complex_center, epsilon_sq: epsilon * epsilon, weight: *weight })
            }
        };
        Ok(Self { model, n, concentrated })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws a simplex observer state into `out`.
    pub fn draw_real<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(self.model, Model::Real);
        let Some(c) = &self.concentrated else {
            fill_uniform_simplex(rng, out);
            return Ok(());
        };
        if rng.random::<f64>() >= c.weight {
            fill_uniform_simplex(rng, out);
            return Ok(());
        }
        for _ in 0..MAX_REJECTIONS {
            fill_uniform_simplex(rng, out);
            let d: f64 = out.iter().zip(&c.real_center).map(|(x, y)| (x - y) * (x - y)).sum();
            if d < c.epsilon_sq {
                return Ok(());
            }
        }
        Err(Error::RejectionExhausted(MAX_REJECTIONS))
    }

    /// Draws a unit-sphere observer state into `out`.
    pub fn draw_complex<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex64]) -> Result<()> {
        debug_assert_eq!(self.model, Model::Complex);
        let Some(c) = &self.concentrated else {
            fill_uniform_sphere(rng, out);
            return Ok(());
        };
        if rng.random::<f64>() >= c.weight {
            fill_uniform_sphere(rng, out);
            return Ok(());
        }
        for _ in 0..MAX_REJECTIONS {
            fill_uniform_sphere(rng, out);
            fix_global_phase(out);
            let d: f64 = out.iter().zip(&c.complex_center).map(|(x, y)| (x - y).norm_sqr()).sum();
            if d < c.epsilon_sq {
                return Ok(());
            }
        }
        Err(Error::RejectionExhausted(MAX_REJECTIONS))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<State> {
        match self.model {
            Model::Real => {
                let mut t = vec![0.0; self.n];
                self.draw_real(rng, &mut t)?;
                Ok(State::Real(MixtureState::from_weights(t)))
            }
            Model::Complex => {
                let mut q = vec![Complex64::new(0.0, 0.0); self.n];
                self.draw_complex(rng, &mut q)?;
                Ok(State::Complex(PureState::from_unnormalized(q)))
            }
        }
    }
}

/// One observer state drawn according to `spec`.
pub fn sample_observer<R: Rng + ?Sized>(spec: &SamplerSpec, model: Model, n: usize, rng: &mut R) -> Result<State> {
    Sampler::new(spec, model, n)?.draw(rng)
}

/// A Haar-random unitary: a complex Gaussian matrix orthonormalized column
/// by column (Gram-Schmidt, which leaves the implied triangular factor with
/// a positive diagonal).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitaryMap> {
    if n < 2 {
        return Err(Error::TooFewOutcomes(n));
    }
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        // Two passes of modified Gram-Schmidt keep orthogonality at rounding level.
        for _ in 0..2 {
            for u in &cols {
                let p: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, a)| *x -= p * a);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    UnitaryMap::new(m)
}
