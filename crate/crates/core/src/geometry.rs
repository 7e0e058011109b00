//! Eigenset measures: exact values, simplex volumes by determinant, Monte
//! Carlo estimates, and the statistical check that `omega` pushes the sphere
//! measure forward to the flat simplex measure.
//!
//! All measures are normalized (the whole simplex has measure one); the
//! sphere-to-simplex proportionality constant never appears.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{argmax_ratio, OddsForm, TrialKernel};
use crate::sampling::{fill_uniform_sphere, map_batches, RngStream, SamplerSpec};
use crate::state_space::{MixtureState, State};
use crate::stats::{chi_square, ks_critical_value, ks_statistic};

/// Significance level of every uniformity test in this module.
pub const UNIFORMITY_ALPHA: f64 = 0.001;

/// Normalized volumes whose value falls below this are reported as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// A Monte Carlo estimate of a normalized measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl VolumeEstimate {
    pub fn from_hits(hits: u64, samples: u64) -> Self {
        let value = hits as f64 / samples as f64;
        Self { value, stderr: (value * (1.0 - value) / samples as f64).sqrt(), samples }
    }
}

/// Measure of the eigenset of outcome `k`: exactly `t_k`.
pub fn eigenset_measure_analytic(system: &MixtureState, k: usize) -> Result<f64> {
    if k >= system.n() {
        return Err(Error::IndexOutOfRange { index: k, n: system.n() });
    }
    Ok(system.get(k))
}

/// `sqrt(det(E^T E))` for the edge matrix `E` of a simplex, evaluated as the
/// product of the diagonal of `R` in `E = QR`, which avoids the cancellation
/// of forming the Gram matrix explicitly.
fn gram_volume(vertices: &[Vec<f64>]) -> f64 {
    let dim = vertices[0].len();
    let base = &vertices[0];
    let edges = DMatrix::from_fn(dim, vertices.len() - 1, |i, j| vertices[j + 1][i] - base[i]);
    edges.qr().r().diagonal().iter().map(|d| d.abs()).product()
}

/// Normalized volume of the simplex whose vertices are the unit vectors with
/// `x_k` replaced by `apex`, computed from the Gram determinant of its edges.
pub fn simplex_volume_ratio(apex: &MixtureState, k: usize, n: usize) -> Result<f64> {
    if apex.n() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: apex.n() });
    }
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    let unit = |i: usize| -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let standard: Vec<Vec<f64>> = (0..n).map(unit).collect();
    let mut replaced = standard.clone();
    replaced[k] = apex.as_slice().to_vec();
    let ratio = gram_volume(&replaced) / gram_volume(&standard);
    if ratio < DEGENERATE_TOL {
        return Err(Error::DegenerateSimplex(ratio));
    }
    Ok(ratio)
}

/// Barycentric coordinates of `point` with respect to `n` vertices in `R^n`
/// that all lie on the hyperplane `sum x = 1`. `None` if the vertices are
/// affinely dependent.
pub fn barycentric_coordinates(vertices: &[Vec<f64>], point: &[f64]) -> Option<Vec<f64>> {
    let n = point.len();
    if vertices.len() != n || vertices.iter().any(|v| v.len() != n) {
        return None;
    }
    let m = DMatrix::from_fn(n, n, |i, j| vertices[j][i]);
    m.lu().solve(&DVector::from_column_slice(point)).map(|v| v.iter().copied().collect())
}

/// Whether `observer` lies in the closed simplex spanned by the unit vectors
/// with `x_k` replaced by the system state, allowing barycentric coordinates
/// down to `-tol`.
pub fn in_closed_eigenset_simplex(k: usize, system: &MixtureState, observer: &MixtureState, tol: f64) -> Result<bool> {
    let n = system.n();
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    if observer.n() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: observer.n() });
    }
    let vertices: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if i == k {
                system.as_slice().to_vec()
            } else {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            }
        })
        .collect();
    let lambda = barycentric_coordinates(&vertices, observer.as_slice())
        .ok_or_else(|| Error::DegenerateSimplex(system.get(k)))?;
    Ok(lambda.iter().all(|&l| l >= -tol))
}

/// Fraction of uniformly drawn observer states that decide `k`.
pub fn eigenset_measure_mc(system: &State, k: usize, samples: u64, stream: RngStream) -> Result<VolumeEstimate> {
    if k >= system.n() {
        return Err(Error::IndexOutOfRange { index: k, n: system.n() });
    }
    if samples == 0 {
        return Err(Error::InsufficientSamples { samples, required: 1 });
    }
    let kernel = TrialKernel::new(system, None, &SamplerSpec::Uniform, OddsForm::Moduli)?;
    let hits = map_batches(samples, |b, _, len| -> Result<u64> {
        let mut rng = stream.substream(b).rng();
        let mut scratch = kernel.scratch();
        let mut hits = 0;
        for _ in 0..len {
            if kernel.trial(&mut rng, &mut scratch)?.0 == k {
                hits += 1;
            }
        }
        Ok(hits)
    });
    let hits = hits.into_iter().sum::<Result<u64>>()?;
    Ok(VolumeEstimate::from_hits(hits, samples))
}

/// Partition of the simplex into cells of equal flat measure.
///
/// Under the flat measure the stick-breaking coordinates
/// `u_j = F_j(x_j / (1 - x_1 - ... - x_{j-1}))`, with `F_j` the
/// `Beta(1, n - 1 - j)` distribution function, are independent and uniform.
/// Cutting each `u_j` into equal slabs therefore bisects the first
/// coordinate by its Beta marginal and sub-bins the rest conditionally,
/// giving a product of rectangles of equal measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexBinning {
    n: usize,
    splits: Vec<usize>,
}

impl SimplexBinning {
    pub fn new(n: usize, bins: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewOutcomes(n));
        }
        if bins < 2 {
            return Err(Error::InvalidCount(format!("need at least 2 bins, got {bins}")));
        }
        let dims = n - 1;
        let mut splits = vec![1usize; dims];
        let mut factors = prime_factors(bins);
        factors.sort_unstable_by(|a, b| b.cmp(a));
        for f in factors {
            let slot = (0..dims).min_by_key(|&i| (splits[i], i)).unwrap_or(0);
            splits[slot] *= f;
        }
        splits.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { n, splits })
    }

    pub fn bins(&self) -> usize {
        self.splits.iter().product()
    }

    pub fn splits(&self) -> &[usize] {
        &self.splits
    }

    /// The cell containing simplex point `x`.
    pub fn cell(&self, x: &[f64]) -> usize {
        let mut rem = 1.0;
        let mut index = 0;
        for (j, &s) in self.splits.iter().enumerate() {
            let frac = if rem > 0.0 { (x[j] / rem).clamp(0.0, 1.0) } else { 0.0 };
            let shape = (self.n - 1 - j) as i32;
            let u = 1.0 - (1.0 - frac).powi(shape);
            let slab = ((u * s as f64) as usize).min(s - 1);
            index = index * s + slab;
            rem -= x[j];
        }
        index
    }
}

fn prime_factors(mut m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        while m % p == 0 {
            out.push(p);
            m /= p;
        }
        p += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// Outcome of testing a sample of simplex points against the flat measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n: usize,
    pub samples: u64,
    pub bins: usize,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// KS statistic of each coordinate against `Beta(1, n - 1)`.
    pub ks_marginals: Vec<f64>,
    /// KS critical value at [`UNIFORMITY_ALPHA`].
    pub ks_critical: f64,
}

impl UniformityReport {
    pub fn passes(&self) -> bool {
        self.p_value > UNIFORMITY_ALPHA && self.ks_marginals.iter().all(|&d| d < self.ks_critical)
    }
}

/// `P(X <= x)` for `X ~ Beta(1, m)`.
pub fn beta_one_cdf(m: usize, x: f64) -> f64 {
    1.0 - (1.0 - x.clamp(0.0, 1.0)).powi(m as i32)
}

/// Tests simplex points (given as coordinate rows) for flatness: chi-square
/// over equal-measure cells and KS on every coordinate marginal.
pub fn simplex_uniformity(points: &[Vec<f64>], bins: usize) -> Result<UniformityReport> {
    let samples = points.len() as u64;
    let Some(n) = points.first().map(Vec::len) else {
        return Err(Error::EmptySample);
    };
    let binning = SimplexBinning::new(n, bins)?;
    let required = 10 * binning.bins() as u64;
    if samples < required {
        return Err(Error::InsufficientSamples { samples, required });
    }
    let mut counts = vec![0u64; binning.bins()];
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: p.len() });
        }
        counts[binning.cell(p)] += 1;
    }
    let expected = vec![samples as f64 / binning.bins() as f64; binning.bins()];
    let chi = chi_square(&counts, &expected)?;
    let mut ks_marginals = Vec::with_capacity(n);
    let mut column = vec![0.0; points.len()];
    for k in 0..n {
        column.iter_mut().zip(points).for_each(|(c, p)| *c = p[k]);
        column.sort_unstable_by(f64::total_cmp);
        ks_marginals.push(ks_statistic(&column, |x| beta_one_cdf(n - 1, x))?);
    }
    Ok(UniformityReport {
        n,
        samples,
        bins: binning.bins(),
        chi_square: chi.statistic,
        dof: chi.dof,
        p_value: chi.p_value,
        ks_marginals,
        ks_critical: ks_critical_value(points.len(), UNIFORMITY_ALPHA).unwrap_or(0.0),
    })
}

/// Draws `samples` points from the unit sphere of `C^n`, maps them through
/// `omega`, and tests the images for flatness on the simplex.
pub fn verify_omega_pushforward(n: usize, samples: u64, bins: usize, stream: RngStream) -> Result<UniformityReport> {
    if n < 2 {
        return Err(Error::TooFewOutcomes(n));
    }
    let required = 10 * bins as u64;
    if samples < required {
        return Err(Error::InsufficientSamples { samples, required });
    }
    let points: Vec<Vec<f64>> = map_batches(samples, |b, _, len| {
        let mut rng = stream.substream(b).rng();
        let mut z = vec![num_complex::Complex64::new(0.0, 0.0); n];
        (0..len)
            .map(|_| {
                fill_uniform_sphere(&mut rng, &mut z);
                z.iter().map(|c| c.norm_sqr()).collect()
            })
            .collect::<Vec<Vec<f64>>>()
    })
    .into_iter()
    .flatten()
    .collect();
    simplex_uniformity(&points, bins)
}

/// Comparison of the measure of a linearly mapped eigenset against the
/// determinant times the measure of the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetScalingReport {
    pub determinant: f64,
    pub original: VolumeEstimate,
    /// Estimated measure of the image, in absolute units of `R^n`.
    pub image_measure: f64,
    pub image_stderr: f64,
    /// Estimated measure of the original set, in absolute units of `R^n`.
    pub original_measure: f64,
    pub original_stderr: f64,
    /// `image_measure / original_measure`.
    pub ratio: f64,
    /// `(image - |det| * original) / combined standard error`.
    pub z_score: f64,
}

impl DetScalingReport {
    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score.abs() <= sigmas
    }
}

/// Checks `vol(T(E)) = |det T| vol(E)` for a diagonal map `T` and the solid
/// eigenset `E = {y >= 0, sum y <= 1, y decides k}` in `R^n`.
///
/// Both volumes are estimated by hit counting: the original in the unit
/// cube, the image in the box `T([0, 1]^n)`, using independent streams.
pub fn det_scaling_check(
    system: &MixtureState,
    k: usize,
    diagonal: &[f64],
    samples: u64,
    stream: RngStream,
) -> Result<DetScalingReport> {
    let n = system.n();
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    if diagonal.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: diagonal.len() });
    }
    if diagonal.iter().any(|&d| d == 0.0 || !d.is_finite()) {
        return Err(Error::SingularMap);
    }
    if samples == 0 {
        return Err(Error::InsufficientSamples { samples, required: 1 });
    }
    let t = system.as_slice();
    let in_solid_eigenset = |y: &[f64]| -> bool {
        let s: f64 = y.iter().sum();
        y.iter().all(|&v| v >= 0.0) && s > 0.0 && s <= 1.0 && matches!(argmax_ratio(t, y), Ok((j, _)) if j == k)
    };

    let count = |stream: RngStream, scale: Option<&[f64]>| -> u64 {
        map_batches(samples, |b, _, len| {
            use rand::Rng;
            let mut rng = stream.substream(b).rng();
            let mut z = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut hits = 0u64;
            for _ in 0..len {
                z.iter_mut().for_each(|v| *v = rng.random::<f64>());
                match scale {
                    // A uniform point of the box T([0,1]^n), pulled back through T.
                    Some(d) => {
                        for i in 0..n {
                            let image = d[i] * z[i];
                            y[i] = image / d[i];
                        }
                    }
                    None => y.copy_from_slice(&z),
                }
                if in_solid_eigenset(&y) {
                    hits += 1;
                }
            }
            hits
        })
        .into_iter()
        .sum()
    };

    let determinant: f64 = diagonal.iter().product();
    let box_volume = determinant.abs();
    let original = VolumeEstimate::from_hits(count(stream.substream(0), None), samples);
    let image = VolumeEstimate::from_hits(count(stream.substream(1), Some(diagonal)), samples);
    let original_measure = original.value;
    let image_measure = image.value * box_volume;
    let image_stderr = image.stderr * box_volume;
    let original_stderr = original.stderr;
    let combined = (image_stderr.powi(2) + (box_volume * original_stderr).powi(2)).sqrt();
    let diff = image_measure - box_volume * original_measure;
    let z_score = if combined > 0.0 {
        diff / combined
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DetScalingReport {
        determinant,
        original,
        image_measure,
        image_stderr,
        original_measure,
        original_stderr,
        ratio: image_measure / original_measure,
        z_score,
    })
}
