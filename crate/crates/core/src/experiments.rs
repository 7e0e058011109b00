//! Repeated-measurement experiments.
//!
//! Each experiment prepares a system state, lets a freshly drawn observer
//! state decide an outcome on every trial, and compares the outcome
//! frequencies against a reference. Trials run in parallel batches of
//! [`BATCH_SIZE`](crate::sampling::BATCH_SIZE); batch `b` draws from
//! `RngStream::new(seed, 0).substream(b)`, so identical `(seed, config)`
//! yields identical results for any number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{eigenset_measure_mc, VolumeEstimate};
use crate::observer::{argmax_ratio, decide, moduli_into, squared_moduli_into, OddsForm, TrialKernel};
use crate::sampling::{map_batches, random_unitary, uniform_simplex, RngStream, Sampler, SamplerSpec};
use crate::state_space::{
    apply_unitary, born_probabilities, coefficients_raw, Frame, MixtureState, Model, PureState, State,
};
use crate::stats::{ols_slope, total_variation, wilson_interval, FrequencyTable};

/// Confidence level of reported intervals.
pub const CONFIDENCE: f64 = 0.95;

/// Everything about a repeated run except the system state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub odds: OddsForm,
    /// Measurement frame (complex model only); `None` is the computational frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    /// Trial counts at which the convergence trace is recorded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<u64>,
}

impl RunSettings {
    /// Uniform sampler, computational frame, default checkpoints.
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            sampler: SamplerSpec::Uniform,
            odds: OddsForm::Moduli,
            frame: None,
            checkpoints: default_checkpoints(trials),
        }
    }

    pub fn with_sampler(mut self, sampler: SamplerSpec) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn with_odds(mut self, odds: OddsForm) -> Self {
        self.odds = odds;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("checkpoints must be strictly increasing".into()));
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.trials) {
            return Err(Error::InvalidConfig(format!("checkpoint {c} outside 1..={}", self.trials)));
        }
        Ok(())
    }

    fn stream(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }
}

/// Powers of ten from `10^3` up to `trials`.
pub fn default_checkpoints(trials: u64) -> Vec<u64> {
    std::iter::successors(Some(1_000u64), |c| c.checked_mul(10)).take_while(|&c| c <= trials).collect()
}

/// A repeated measurement of one system state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: State,
    #[serde(flatten)]
    pub settings: RunSettings,
}

impl ExperimentConfig {
    pub fn new(system: impl Into<State>, trials: u64, seed: u64) -> Self {
        Self { system: system.into(), settings: RunSettings::new(trials, seed) }
    }

    pub fn model(&self) -> Model {
        self.system.model()
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if let Some(f) = &self.settings.frame {
            if self.model() == Model::Real {
                return Err(Error::InvalidConfig("frames apply to the complex model only".into()));
            }
            if f.n() != self.n() {
                return Err(Error::DimensionMismatch { expected: self.n(), actual: f.n() });
            }
        }
        self.settings.sampler.validate(self.model(), self.n())
    }

    /// Target probabilities: `t` for a statistical state, Born
    /// probabilities in the measurement frame for a pure state.
    pub fn reference(&self) -> Result<MixtureState> {
        reference_of(&self.system, self.settings.frame.as_ref())
    }
}

fn reference_of(system: &State, frame: Option<&Frame>) -> Result<MixtureState> {
    match system {
        State::Real(t) => Ok(t.clone()),
        State::Complex(q) => match frame {
            Some(f) => born_probabilities(q, f),
            None => born_probabilities(q, &Frame::computational(q.n())?),
        },
    }
}

/// Outcome frequencies after a given number of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub trials: u64,
    pub tv_distance: f64,
    pub frequencies: Vec<f64>,
}

/// Tallies of a repeated measurement together with its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub model: Model,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub reference: Vec<f64>,
    /// Half-widths of the 95% Wilson intervals of the frequencies.
    pub ci_halfwidths: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub tie_count: u64,
}

impl ExperimentResult {
    /// Per-outcome binomial standard errors under the reference.
    pub fn sigmas(&self) -> Vec<f64> {
        binomial_sigmas(&self.reference, self.trials)
    }

    /// Per-outcome `(frequency - reference) / sigma`.
    pub fn z_scores(&self) -> Vec<f64> {
        z_scores(&self.frequencies, &self.reference, &self.sigmas())
    }

    /// Whether every frequency lies within `k` standard errors of its reference.
    pub fn within_sigmas(&self, k: f64) -> bool {
        self.z_scores().iter().all(|z| z.abs() <= k)
    }

    pub fn total_variation(&self) -> f64 {
        0.5 * self.frequencies.iter().zip(&self.reference).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// The convergence trace as CSV: `trial_count,tv_distance,freq_1,...`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("trial_count,tv_distance");
        for k in 1..=self.n {
            out.push_str(&format!(",freq_{k}"));
        }
        out.push('\n');
        for p in &self.trace {
            out.push_str(&format!("{},{}", p.trials, p.tv_distance));
            for f in &p.frequencies {
                out.push_str(&format!(",{f}"));
            }
            out.push('\n');
        }
        out
    }
}

fn binomial_sigmas(p: &[f64], trials: u64) -> Vec<f64> {
    p.iter().map(|&p| (p * (1.0 - p) / trials as f64).sqrt()).collect()
}

fn z_scores(observed: &[f64], expected: &[f64], sigmas: &[f64]) -> Vec<f64> {
    observed
        .iter()
        .zip(expected)
        .zip(sigmas)
        .map(|((o, e), s)| {
            let d = o - e;
            if *s > 0.0 {
                d / s
            } else if d == 0.0 {
                0.0
            } else {
                d.signum() * f64::INFINITY
            }
        })
        .collect()
}

fn wilson_halfwidths(counts: &[u64], trials: u64) -> Result<Vec<f64>> {
    counts.iter().map(|&c| wilson_interval(c, trials, CONFIDENCE).map(|(lo, hi)| (hi - lo) / 2.0)).collect()
}

/// Counts from a batched run, plus snapshots at the requested checkpoints.
struct Tally {
    table: FrequencyTable,
    ties: u64,
    snapshots: Vec<Vec<u64>>,
}

/// Runs `trials` trials in parallel batches. `step` performs one trial with
/// the batch's generator and per-batch state from `init`.
fn tally<S, I, F>(n: usize, trials: u64, checkpoints: &[u64], stream: RngStream, init: I, step: F) -> Result<Tally>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut ChaCha8Rng, &mut S) -> Result<(usize, bool)> + Sync,
{
    struct Batch {
        table: FrequencyTable,
        ties: u64,
        // (checkpoint index, counts within this batch at that checkpoint)
        snapshots: Vec<(usize, Vec<u64>)>,
    }

    let batches = map_batches(trials, |b, start, len| -> Result<Batch> {
        let mut rng = stream.substream(b).rng();
        let mut state = init();
        let mut table = FrequencyTable::zeros(n);
        let mut ties = 0;
        let mut snapshots = Vec::new();
        let mut next = checkpoints.partition_point(|&c| c <= start);
        for i in 0..len {
            let (k, tied) = step(&mut rng, &mut state)?;
            table.record(k);
            ties += tied as u64;
            let done = start + i + 1;
            if next < checkpoints.len() && checkpoints[next] == done {
                snapshots.push((next, table.counts().to_vec()));
                next += 1;
            }
        }
        Ok(Batch { table, ties, snapshots })
    });

    let mut table = FrequencyTable::zeros(n);
    let mut ties = 0;
    let mut snapshots = vec![Vec::new(); checkpoints.len()];
    for batch in batches {
        let batch = batch?;
        for (idx, local) in batch.snapshots {
            snapshots[idx] = table.counts().iter().zip(&local).map(|(a, b)| a + b).collect();
        }
        table.merge(&batch.table);
        ties += batch.ties;
    }
    Ok(Tally { table, ties, snapshots })
}

fn trace_from(snapshots: &[Vec<u64>], checkpoints: &[u64], reference: &[f64]) -> Result<Vec<TracePoint>> {
    snapshots
        .iter()
        .zip(checkpoints)
        .map(|(counts, &c)| {
            let frequencies: Vec<f64> = counts.iter().map(|&x| x as f64 / c as f64).collect();
            Ok(TracePoint { trials: c, tv_distance: total_variation(&frequencies, reference)?, frequencies })
        })
        .collect()
}

fn result_from(tally: Tally, model: Model, settings: &RunSettings, reference: Vec<f64>) -> Result<ExperimentResult> {
    let trace = trace_from(&tally.snapshots, &settings.checkpoints, &reference)?;
    Ok(ExperimentResult {
        model,
        n: reference.len(),
        trials: settings.trials,
        seed: settings.seed,
        ci_halfwidths: wilson_halfwidths(tally.table.counts(), settings.trials)?,
        frequencies: tally.table.frequencies(),
        counts: tally.table.counts().to_vec(),
        reference,
        trace,
        tie_count: tally.ties,
    })
}

/// Repeatedly measures `config.system`, drawing a new observer state per trial.
pub fn run_repeated(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let s = &config.settings;
    let kernel = TrialKernel::new(&config.system, s.frame.as_ref(), &s.sampler, s.odds)?;
    let tally = tally(
        config.n(),
        s.trials,
        &s.checkpoints,
        s.stream(),
        || kernel.scratch(),
        |rng, scratch| kernel.trial(rng, scratch),
    )?;
    result_from(tally, config.model(), s, config.reference()?.into_vec())
}

/// Pure components and their mixing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<PureState>,
    pub weights: MixtureState,
}

impl MixtureSpec {
    pub fn new(components: Vec<PureState>, weights: Vec<f64>) -> Result<Self> {
        let spec = Self { components, weights: MixtureState::new(weights)? };
        spec.validate()?;
        Ok(spec)
    }

    /// `xi psi_1 + (1 - xi) psi_2`.
    pub fn binary(first: PureState, second: PureState, xi: f64) -> Result<Self> {
        Self::new(vec![first, second], vec![xi, 1.0 - xi])
    }

    pub fn n(&self) -> usize {
        self.components.first().map_or(0, PureState::n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.len() != self.weights.n() {
            return Err(Error::DimensionMismatch { expected: self.components.len(), actual: self.weights.n() });
        }
        let n = self.n();
        if let Some(c) = self.components.iter().find(|c| c.n() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: c.n() });
        }
        Ok(())
    }

    /// The statistical state `sum_j w_j p_j` where `p_j` are the component
    /// Born probabilities in `frame`.
    pub fn statistical_state(&self, frame: Option<&Frame>) -> Result<MixtureState> {
        let n = self.n();
        let mut t = vec![0.0; n];
        for (c, &w) in self.components.iter().zip(self.weights.as_slice()) {
            let p = reference_of(&State::Complex(c.clone()), frame)?;
            t.iter_mut().zip(p.as_slice()).for_each(|(acc, x)| *acc += w * x);
        }
        Ok(MixtureState::from_weights(t))
    }
}

/// Observed frequencies against a linear prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub trials: u64,
    pub weights: Vec<f64>,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub prediction: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub ci_halfwidths: Vec<f64>,
    pub max_abs_z: f64,
    /// Some residual exceeds [`VIOLATION_SIGMAS`].
    pub violation: bool,
}

/// Residual size, in standard errors, that flags a violation of linearity.
pub const VIOLATION_SIGMAS: f64 = 5.0;

impl LinearityReport {
    fn build(trials: u64, weights: Vec<f64>, counts: Vec<u64>, prediction: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / trials as f64).collect();
        let residuals: Vec<f64> = frequencies.iter().zip(&prediction).map(|(f, p)| f - p).collect();
        let z = z_scores(&frequencies, &prediction, &sigmas);
        let max_abs_z = z.iter().fold(0.0_f64, |m, z| m.max(z.abs()));
        Ok(Self {
            ci_halfwidths: wilson_halfwidths(&counts, trials)?,
            trials,
            weights,
            counts,
            frequencies,
            prediction,
            residuals,
            sigmas,
            z_scores: z,
            max_abs_z,
            violation: max_abs_z > VIOLATION_SIGMAS,
        })
    }

    pub fn within_sigmas(&self, k: f64) -> bool {
        self.max_abs_z <= k
    }
}

/// Measures an ensemble in which every trial first draws a pure component
/// by weight, then proceeds as [`run_repeated`]. The prediction is the
/// weighted sum of the components' Born probabilities.
pub fn run_mixture(spec: &MixtureSpec, settings: &RunSettings) -> Result<LinearityReport> {
    spec.validate()?;
    settings.validate()?;
    let n = spec.n();
    settings.sampler.validate(Model::Complex, n)?;
    let kernels: Vec<TrialKernel> = spec
        .components
        .iter()
        .map(|c| {
            TrialKernel::new(&State::Complex(c.clone()), settings.frame.as_ref(), &settings.sampler, settings.odds)
        })
        .collect::<Result<_>>()?;
    let weights = spec.weights.as_slice();
    let active: Vec<usize> = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();

    let tally = tally(
        n,
        settings.trials,
        &[],
        settings.stream(),
        || kernels[0].scratch(),
        |rng, scratch| {
            // A single active component consumes no randomness for the
            // component draw, so the run coincides with `run_repeated`.
            let j = if active.len() == 1 {
                active[0]
            } else {
                let u: f64 = rng.random();
                cumulative.iter().position(|&c| u < c).unwrap_or(*active.last().unwrap())
            };
            kernels[j].trial(rng, scratch)
        },
    )?;
    let prediction = spec.statistical_state(settings.frame.as_ref())?.into_vec();
    let sigmas = binomial_sigmas(&prediction, settings.trials);
    LinearityReport::build(settings.trials, weights.to_vec(), tally.table.counts().to_vec(), prediction, sigmas)
}

/// Linearity of a mixture under a non-uniform observer distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Statistical state of the mixture, observed as a single state.
    pub mixture_state: Vec<f64>,
    /// Weighted sum of component Born probabilities.
    pub born_prediction: Vec<f64>,
    /// Frequencies of each component's statistical state under the same sampler.
    pub component_frequencies: Vec<Vec<f64>>,
    /// Mixture frequencies against the weighted component frequencies.
    pub linearity: LinearityReport,
}

/// Observes the mixture's statistical state and each component's
/// statistical state with the non-uniform sampler (simplex model), and
/// compares the mixture frequencies with the weighted component
/// frequencies. Under the uniform measure these agree; concentrating the
/// observer near a point between the components breaks the agreement.
pub fn run_mixture_violation(
    spec: &MixtureSpec,
    nonuniform: &SamplerSpec,
    settings: &RunSettings,
) -> Result<ViolationReport> {
    spec.validate()?;
    settings.validate()?;
    if !matches!(nonuniform, SamplerSpec::EpsilonConcentrated { .. }) {
        return Err(Error::PreconditionViolated("the violation run needs an epsilon_concentrated sampler".into()));
    }
    let n = spec.n();
    nonuniform.validate(Model::Real, n)?;
    let frame = settings.frame.as_ref();
    let mixture_state = spec.statistical_state(frame)?;
    let born_prediction = mixture_state.as_slice().to_vec();

    let observe = |system: MixtureState, stream_index: u64| -> Result<ExperimentResult> {
        let s = RunSettings {
            seed: RngStream::new(settings.seed, 0).child_seed(stream_index),
            checkpoints: Vec::new(),
            sampler: nonuniform.clone(),
            frame: None,
            ..settings.clone()
        };
        run_repeated(&ExperimentConfig { system: State::Real(system), settings: s })
    };

    let mixed = observe(mixture_state.clone(), 0)?;
    let weights = spec.weights.as_slice();
    let trials = settings.trials as f64;
    let mut prediction = vec![0.0; n];
    let mut variance: Vec<f64> = mixed.frequencies.iter().map(|&f| f * (1.0 - f) / trials).collect();
    let mut component_frequencies = Vec::with_capacity(spec.components.len());
    for (j, (c, &w)) in spec.components.iter().zip(weights).enumerate() {
        if w == 0.0 {
            component_frequencies.push(vec![0.0; n]);
            continue;
        }
        let state = reference_of(&State::Complex(c.clone()), frame)?;
        let f = observe(state, j as u64 + 1)?.frequencies;
        for k in 0..n {
            prediction[k] += w * f[k];
            variance[k] += w * w * f[k] * (1.0 - f[k]) / trials;
        }
        component_frequencies.push(f);
    }
    let sigmas = variance.iter().map(|v| v.sqrt()).collect();
    let linearity = LinearityReport::build(settings.trials, weights.to_vec(), mixed.counts, prediction, sigmas)?;
    Ok(ViolationReport { mixture_state: born_prediction.clone(), born_prediction, component_frequencies, linearity })
}

/// An epsilon-concentrated simplex sampler centred halfway between the
/// mixture's statistical state and that of its first component. Observer
/// states there decide one outcome for the mixture and the second
/// component and another for the first component.
pub fn violation_sampler(spec: &MixtureSpec, frame: Option<&Frame>, epsilon: f64, weight: f64) -> Result<SamplerSpec> {
    spec.validate()?;
    let mixed = spec.statistical_state(frame)?;
    let first = reference_of(&State::Complex(spec.components[0].clone()), frame)?;
    let center: Vec<f64> = mixed.as_slice().iter().zip(first.as_slice()).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(SamplerSpec::EpsilonConcentrated { center: State::Real(MixtureState::from_weights(center)), epsilon, weight })
}

/// Paired trials that must decide identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    pub trials: u64,
    pub matches: u64,
}

impl InvarianceCheck {
    pub fn match_rate(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            self.matches as f64 / self.trials as f64
        }
    }

    pub fn exact(&self) -> bool {
        self.matches == self.trials
    }
}

fn count_matches<F>(trials: u64, stream: RngStream, f: F) -> Result<InvarianceCheck>
where
    F: Fn(&mut ChaCha8Rng) -> Result<bool> + Sync,
{
    let per_batch = map_batches(trials, |b, _, len| -> Result<u64> {
        let mut rng = stream.substream(b).rng();
        let mut m = 0;
        for _ in 0..len {
            m += f(&mut rng)? as u64;
        }
        Ok(m)
    });
    let matches = per_batch.into_iter().sum::<Result<u64>>()?;
    Ok(InvarianceCheck { trials, matches })
}

fn complex_system(config: &ExperimentConfig) -> Result<(&PureState, Frame)> {
    let State::Complex(q) = &config.system else {
        return Err(Error::PreconditionViolated("invariance checks need the complex model".into()));
    };
    let frame = match &config.settings.frame {
        Some(f) => f.clone(),
        None => Frame::computational(q.n())?,
    };
    Ok((q, frame))
}

/// Outcome for raw (not necessarily normalized) coefficient vectors.
pub fn decide_coefficients(
    system: &[num_complex::Complex64],
    observer: &[num_complex::Complex64],
    form: OddsForm,
) -> Result<usize> {
    let n = system.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    match form {
        OddsForm::Moduli => {
            moduli_into(system, &mut a);
            moduli_into(observer, &mut b);
        }
        OddsForm::Squared => {
            squared_moduli_into(system, &mut a);
            squared_moduli_into(observer, &mut b);
        }
    }
    Ok(argmax_ratio(&a, &b)?.0)
}

/// For each of `pairs` draws of a Haar unitary `U` and an observer state,
/// decides in `(psi_s, psi_m, F)` and in `(U psi_s, U psi_m, U F)`.
pub fn run_unitary_invariance(config: &ExperimentConfig, pairs: u64, stream: RngStream) -> Result<InvarianceCheck> {
    config.validate()?;
    let (q, frame) = complex_system(config)?;
    let n = q.n();
    let sampler = Sampler::new(&config.settings.sampler, Model::Complex, n)?;
    let form = config.settings.odds;
    count_matches(pairs, stream, |rng| {
        let u = random_unitary(n, rng)?;
        let State::Complex(m) = sampler.draw(rng)? else { unreachable!() };
        let before = decide_coefficients(
            &coefficients_raw(q.as_slice(), &frame),
            &coefficients_raw(m.as_slice(), &frame),
            form,
        )?;
        let uf = frame.transformed(&u)?;
        let (uq, um) = (apply_unitary(&u, q)?, apply_unitary(&u, &m)?);
        let after =
            decide_coefficients(&coefficients_raw(uq.as_slice(), &uf), &coefficients_raw(um.as_slice(), &uf), form)?;
        Ok(before == after)
    })
}

/// Multiplies the system or the observer state by a random complex scalar
/// `z` (modulus log-uniform over `[1e-3, 1e3]`, uniform phase) and checks
/// the decision is unchanged.
pub fn run_projective_invariance(config: &ExperimentConfig, trials: u64, stream: RngStream) -> Result<InvarianceCheck> {
    config.validate()?;
    let (q, frame) = complex_system(config)?;
    let sampler = Sampler::new(&config.settings.sampler, Model::Complex, q.n())?;
    let form = config.settings.odds;
    let base = coefficients_raw(q.as_slice(), &frame);
    count_matches(trials, stream, |rng| {
        let State::Complex(m) = sampler.draw(rng)? else { unreachable!() };
        let observer = coefficients_raw(m.as_slice(), &frame);
        let z = num_complex::Complex64::from_polar(
            10f64.powf(rng.random_range(-3.0..3.0)),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let before = decide_coefficients(&base, &observer, form)?;
        let scaled_system: Vec<_> = base.iter().map(|c| c * z).collect();
        let scaled_observer: Vec<_> = observer.iter().map(|c| c * z).collect();
        Ok(before == decide_coefficients(&scaled_system, &observer, form)?
            && before == decide_coefficients(&base, &scaled_observer, form)?)
    })
}

/// Decides every trial with both the pseudo-odds `|q|/|r|` and the
/// Born-level odds `|q|^2/|r|^2` on the same observer state.
pub fn run_monotone_invariance(config: &ExperimentConfig, trials: u64, stream: RngStream) -> Result<InvarianceCheck> {
    config.validate()?;
    let (q, frame) = complex_system(config)?;
    let sampler = Sampler::new(&config.settings.sampler, Model::Complex, q.n())?;
    let base = coefficients_raw(q.as_slice(), &frame);
    count_matches(trials, stream, |rng| {
        let State::Complex(m) = sampler.draw(rng)? else { unreachable!() };
        let observer = coefficients_raw(m.as_slice(), &frame);
        Ok(decide_coefficients(&base, &observer, OddsForm::Moduli)?
            == decide_coefficients(&base, &observer, OddsForm::Squared)?)
    })
}

/// The three decision-invariance checks together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub projective: InvarianceCheck,
    pub monotone: InvarianceCheck,
    pub unitary: InvarianceCheck,
}

impl InvarianceReport {
    pub fn exact(&self) -> bool {
        self.projective.exact() && self.monotone.exact() && self.unitary.exact()
    }
}

pub fn run_invariance_suite(config: &ExperimentConfig, trials: u64, stream: RngStream) -> Result<InvarianceReport> {
    Ok(InvarianceReport {
        projective: run_projective_invariance(config, trials, stream.substream(0))?,
        monotone: run_monotone_invariance(config, trials, stream.substream(1))?,
        unitary: run_unitary_invariance(config, trials, stream.substream(2))?,
    })
}

/// Decision and outcome probability before and after swapping two
/// components of the system state, with the observer held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualityReport {
    pub system: Vec<f64>,
    pub swapped_system: Vec<f64>,
    pub observer: Vec<f64>,
    pub swapped: (usize, usize),
    pub outcome_before: usize,
    pub outcome_after: usize,
    pub changed: bool,
    /// Monte Carlo probability of `outcome_before` for the original system.
    pub probability_before: VolumeEstimate,
    /// Monte Carlo probability of `outcome_before` for the swapped system.
    pub probability_after: VolumeEstimate,
    /// Difference of the two probabilities in combined standard errors.
    pub z_score: f64,
}

impl ContextualityReport {
    /// The decision changed while the probability of the original outcome
    /// stayed within `k` standard errors.
    pub fn demonstrates(&self, k: f64) -> bool {
        self.changed && self.z_score.abs() < k
    }
}

pub fn run_contextuality_demo(
    system: &MixtureState,
    observer: &MixtureState,
    i: usize,
    j: usize,
    samples: u64,
    stream: RngStream,
) -> Result<ContextualityReport> {
    let n = system.n();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, n });
        }
    }
    if i == j {
        return Err(Error::PreconditionViolated("swap indices must differ".into()));
    }
    let sys = State::Real(system.clone());
    let obs = State::Real(observer.clone());
    let before = decide(&sys, &obs)?.outcome_index;
    if before == i || before == j {
        return Err(Error::PreconditionViolated(format!(
            "the decided outcome {before} is one of the swapped components ({i}, {j})"
        )));
    }
    let swapped = crate::observer::swap_components(&sys, i, j)?;
    let after = decide(&swapped, &obs)?.outcome_index;
    let p_before = eigenset_measure_mc(&sys, before, samples, stream.substream(0))?;
    let p_after = eigenset_measure_mc(&swapped, before, samples, stream.substream(1))?;
    let se = (p_before.stderr.powi(2) + p_after.stderr.powi(2)).sqrt();
    let diff = p_after.value - p_before.value;
    let z_score = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let State::Real(swapped_t) = swapped else { unreachable!() };
    Ok(ContextualityReport {
        system: system.as_slice().to_vec(),
        swapped_system: swapped_t.into_vec(),
        observer: observer.as_slice().to_vec(),
        swapped: (i, j),
        outcome_before: before,
        outcome_after: after,
        changed: before != after,
        probability_before: p_before,
        probability_after: p_after,
        z_score,
    })
}

/// Odds of the hypothesis "the outcome reflects the system" when the two
/// hypotheses share the probability mass as `alpha` and `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaDiagnostic {
    pub alpha: f64,
    pub max_odds: f64,
    /// Some outcome supports the system hypothesis more than the observer one.
    pub majorization_holds: bool,
}

/// `p_sys` sums to `alpha`, `p_obs` to `1 - alpha`.
pub fn alpha_diagnostic(p_sys: &[f64], p_obs: &[f64]) -> Result<AlphaDiagnostic> {
    if p_sys.len() != p_obs.len() {
        return Err(Error::DimensionMismatch { expected: p_sys.len(), actual: p_obs.len() });
    }
    if let Some(index) = p_sys.iter().chain(p_obs).position(|&x| !(x >= 0.0 && x.is_finite())) {
        let value = p_sys.iter().chain(p_obs).nth(index).copied().unwrap_or(f64::NAN);
        return Err(Error::NegativeComponent { index: index % p_sys.len().max(1), value });
    }
    let alpha: f64 = p_sys.iter().sum();
    let rest: f64 = p_obs.iter().sum();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if (alpha + rest - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(alpha + rest));
    }
    let (best, _) = argmax_ratio(p_sys, p_obs)?;
    let (a, b) = (p_sys[best], p_obs[best]);
    let max_odds = if b == 0.0 { f64::INFINITY } else { a / b };
    // Compared without division: some a_i > b_i.
    let majorization_holds = a > b;
    Ok(AlphaDiagnostic { alpha, max_odds, majorization_holds })
}

/// Summary of [`alpha_diagnostic`] over random sub-normalized pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub pairs: u64,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub majorization_count: u64,
    pub min_max_odds: f64,
    pub max_max_odds: f64,
}

/// Draws `pairs` of `(alpha * u, (1 - alpha) * v)` with `u`, `v` flat on
/// the simplex and `alpha` uniform in `(alpha_low, alpha_high)`. With
/// `proportional`, `v = u`.
pub fn alpha_sweep(
    n: usize,
    pairs: u64,
    alpha_low: f64,
    alpha_high: f64,
    proportional: bool,
    stream: RngStream,
) -> Result<AlphaSweep> {
    if !(0.0 <= alpha_low && alpha_low < alpha_high && alpha_high <= 1.0) {
        return Err(Error::InvalidConfig(format!("bad alpha range ({alpha_low}, {alpha_high})")));
    }
    let results = map_batches(pairs, |b, _, len| -> Result<(u64, f64, f64)> {
        let mut rng = stream.substream(b).rng();
        let (mut count, mut lo, mut hi) = (0u64, f64::INFINITY, 0.0_f64);
        for _ in 0..len {
            let alpha = loop {
                let a = rng.random_range(alpha_low..alpha_high);
                if a > 0.0 && a > alpha_low {
                    break a;
                }
            };
            let u = uniform_simplex(n, &mut rng)?;
            let v = if proportional { u.clone() } else { uniform_simplex(n, &mut rng)? };
            let p_sys: Vec<f64> = u.as_slice().iter().map(|x| alpha * x).collect();
            let p_obs: Vec<f64> = v.as_slice().iter().map(|x| (1.0 - alpha) * x).collect();
            let d = alpha_diagnostic(&p_sys, &p_obs)?;
            count += d.majorization_holds as u64;
            lo = lo.min(d.max_odds);
            hi = hi.max(d.max_odds);
        }
        Ok((count, lo, hi))
    });
    let mut sweep = AlphaSweep {
        pairs,
        alpha_low,
        alpha_high,
        majorization_count: 0,
        min_max_odds: f64::INFINITY,
        max_max_odds: 0.0,
    };
    for r in results {
        let (c, lo, hi) = r?;
        sweep.majorization_count += c;
        sweep.min_max_odds = sweep.min_max_odds.min(lo);
        sweep.max_max_odds = sweep.max_max_odds.max(hi);
    }
    Ok(sweep)
}

/// Decay of the total-variation distance to the reference with the number
/// of trials, across several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub checkpoints: Vec<u64>,
    pub seeds: Vec<u64>,
    /// TV distance per seed (rows) and checkpoint (columns).
    pub tv: Vec<Vec<f64>>,
    /// Mean TV distance over seeds at each checkpoint.
    pub mean_tv: Vec<f64>,
    /// Slope of `log(mean_tv)` against `log(checkpoint)`.
    pub pooled_slope: f64,
    /// Slope of `log(tv)` against `log(checkpoint)` for each seed.
    pub per_seed_slopes: Vec<f64>,
}

impl ConvergenceReport {
    pub fn slope_within(&self, low: f64, high: f64) -> bool {
        (low..=high).contains(&self.pooled_slope)
    }
}

/// Runs `config` once per seed and regresses the recorded traces.
pub fn convergence_study(config: &ExperimentConfig, seeds: &[u64]) -> Result<ConvergenceReport> {
    let checkpoints = config.settings.checkpoints.clone();
    if checkpoints.len() < 2 {
        return Err(Error::InvalidConfig("a convergence study needs at least 2 checkpoints".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("a convergence study needs at least one seed".into()));
    }
    let mut tv = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut c = config.clone();
        c.settings.seed = seed;
        let r = run_repeated(&c)?;
        tv.push(r.trace.iter().map(|p| p.tv_distance).collect::<Vec<f64>>());
    }
    let xs: Vec<f64> = checkpoints.iter().map(|&c| (c as f64).ln()).collect();
    let mean_tv: Vec<f64> =
        (0..checkpoints.len()).map(|i| tv.iter().map(|row| row[i]).sum::<f64>() / seeds.len() as f64).collect();
    let slope_of = |ys: &[f64]| -> f64 {
        let logs: Vec<f64> = ys.iter().map(|&y| y.max(f64::MIN_POSITIVE).ln()).collect();
        ols_slope(&xs, &logs).unwrap_or(f64::NAN)
    };
    Ok(ConvergenceReport {
        pooled_slope: slope_of(&mean_tv),
        per_seed_slopes: tv.iter().map(|row| slope_of(row)).collect(),
        checkpoints,
        seeds: seeds.to_vec(),
        tv,
        mean_tv,
    })
}
