//! Batch configuration: a list of experiments, each run and judged on its
//! own criterion.

use std::path::Path;

use bornforge_core::experiments::{
    alpha_sweep, run_contextuality_demo, run_invariance_suite, run_mixture, run_mixture_violation, run_repeated,
    violation_sampler, MixtureSpec,
};
use bornforge_core::geometry::verify_omega_pushforward;
use bornforge_core::sampling::{uniform_complex_sphere, uniform_simplex};
use bornforge_core::{
    ExperimentConfig, Frame, MixtureState, Model, OddsForm, PureState, RngStream, RunSettings, SamplerSpec, State,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_sigmas() -> f64 {
    4.0
}

fn default_true() -> bool {
    true
}

/// A state given literally, or the keyword `"random"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateInput {
    Keyword(Keyword),
    Given(State),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Random,
}

impl StateInput {
    /// Parses the command-line form: JSON, or the bare word `random`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim() == "random" {
            return Ok(StateInput::Keyword(Keyword::Random));
        }
        let bad = |e: String| CliError::Input(format!("--state: {e}"));
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        // Validate real vectors directly so that, say, a normalization
        // error is reported as such rather than as an unmatched shape.
        if let Ok(raw) = serde_json::from_value::<Vec<f64>>(value.clone()) {
            return Ok(StateInput::Given(State::Real(MixtureState::new(raw).map_err(|e| bad(e.to_string()))?)));
        }
        let raw: Vec<[f64; 2]> =
            serde_json::from_value(value).map_err(|_| bad("expected [t1, ...], [[re, im], ...] or random".into()))?;
        let q = raw.into_iter().map(|[re, im]| num_complex::Complex64::new(re, im)).collect();
        let q = PureState::new(q, bornforge_core::state_space::Normalization::Renormalize)
            .map_err(|e| bad(e.to_string()))?;
        Ok(StateInput::Given(State::Complex(q)))
    }

    /// The concrete state. `random` draws one uniformly from `(seed, 1)`,
    /// a stream no trial batch uses.
    pub fn resolve(&self, model: Model, n: Option<usize>, seed: u64) -> Result<State, CliError> {
        let state = match self {
            StateInput::Given(s) => s.clone(),
            StateInput::Keyword(Keyword::Random) => {
                let n = n.ok_or_else(|| CliError::Input("a random state needs n".into()))?;
                let mut rng = RngStream::new(seed, 1).rng();
                match model {
                    Model::Real => State::Real(uniform_simplex(n, &mut rng)?),
                    Model::Complex => State::Complex(uniform_complex_sphere(n, &mut rng)?),
                }
            }
        };
        // The JSON forms differ, so a real vector always parses as real.
        let state = match (model, state) {
            (Model::Complex, State::Real(_)) => {
                return Err(CliError::Input("expected a complex vector [[re, im], ...]".into()))
            }
            (Model::Real, State::Complex(_)) => return Err(CliError::Input("expected a real vector [t1, ...]".into())),
            (_, s) => s,
        };
        if let Some(n) = n {
            if state.n() != n {
                return Err(CliError::Input(format!("state has {} components but n = {n}", state.n())));
            }
        }
        Ok(state)
    }
}

/// A repeated measurement, judged by every frequency lying within
/// `sigmas` binomial standard errors of the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatedEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub state: StateInput,
    pub trials: u64,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub odds: OddsForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

/// Pure components and weights; judged by linearity within `sigmas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub components: Vec<PureState>,
    pub weights: Vec<f64>,
    pub trials: u64,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

/// A mixture observed through an epsilon-concentrated sampler; judged by
/// whether a violation of linearity shows up as `expect_violation` says.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViolationEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub components: Vec<PureState>,
    pub weights: Vec<f64>,
    pub trials: u64,
    pub epsilon: f64,
    pub weight: f64,
    /// Centre of the concentrated sampler; by default halfway between the
    /// mixture and its first component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<MixtureState>,
    #[serde(default = "default_true")]
    pub expect_violation: bool,
}

/// Projective, monotone and unitary invariance of decisions; judged by
/// exact agreement in every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub state: StateInput,
    pub trials: u64,
}

/// Swap of two system components with the observer fixed; judged by a
/// changed decision with an unchanged outcome probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextualityEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub system: MixtureState,
    pub observer: MixtureState,
    /// Zero-based indices of the swapped components.
    pub swap: [usize; 2],
    pub samples: u64,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

/// Random sub-normalized pairs with `alpha` in `range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub pairs: u64,
    pub range: [f64; 2],
    #[serde(default)]
    pub proportional: bool,
}

/// Uniformity of the modulus-squared map's pushforward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub samples: u64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentEntry {
    Born(RepeatedEntry),
    Simplex(RepeatedEntry),
    Mixture(MixtureEntry),
    MixtureViolation(ViolationEntry),
    Invariance(InvarianceEntry),
    Contextuality(ContextualityEntry),
    Alpha(AlphaEntry),
    Omega(OmegaEntry),
}

impl ExperimentEntry {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentEntry::Born(_) => "born",
            ExperimentEntry::Simplex(_) => "simplex",
            ExperimentEntry::Mixture(_) => "mixture",
            ExperimentEntry::MixtureViolation(_) => "mixture-violation",
            ExperimentEntry::Invariance(_) => "invariance",
            ExperimentEntry::Contextuality(_) => "contextuality",
            ExperimentEntry::Alpha(_) => "alpha",
            ExperimentEntry::Omega(_) => "omega",
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            ExperimentEntry::Born(e) | ExperimentEntry::Simplex(e) => e.name.as_deref(),
            ExperimentEntry::Mixture(e) => e.name.as_deref(),
            ExperimentEntry::MixtureViolation(e) => e.name.as_deref(),
            ExperimentEntry::Invariance(e) => e.name.as_deref(),
            ExperimentEntry::Contextuality(e) => e.name.as_deref(),
            ExperimentEntry::Alpha(e) => e.name.as_deref(),
            ExperimentEntry::Omega(e) => e.name.as_deref(),
        }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "experiment", alias = "experiments")]
    pub experiments: Vec<ExperimentEntry>,
}

impl SuiteConfig {
    /// Reads TOML, or JSON when the extension is `.json`. Errors carry the
    /// parser's line, column and field information.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// The outcome of one experiment: its verdict and a serialized report.
pub struct Evaluated {
    pub passed: bool,
    pub criterion: String,
    pub report: serde_json::Value,
    /// The entry with any `random` state replaced by the drawn state.
    pub resolved: ExperimentEntry,
    pub trace_csv: Option<String>,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Runs a repeated measurement for the given model.
pub fn run_repeated_entry(entry: &RepeatedEntry, model: Model, seed: u64) -> Result<Evaluated, CliError> {
    let system = entry.state.resolve(model, entry.n, seed)?;
    let mut settings = RunSettings::new(entry.trials, seed).with_sampler(entry.sampler.clone()).with_odds(entry.odds);
    settings.frame = entry.frame.clone();
    if let Some(c) = &entry.checkpoints {
        settings.checkpoints = c.clone();
    }
    let result = run_repeated(&ExperimentConfig { system: system.clone(), settings })?;
    let mut resolved = entry.clone();
    resolved.state = StateInput::Given(system);
    let resolved = match model {
        Model::Real => ExperimentEntry::Simplex(resolved),
        Model::Complex => ExperimentEntry::Born(resolved),
    };
    Ok(Evaluated {
        passed: result.within_sigmas(entry.sigmas),
        criterion: format!("every frequency within {} sigma of the reference", entry.sigmas),
        report: to_value(&result),
        trace_csv: Some(result.trace_csv()),
        resolved,
    })
}

/// Runs one configured experiment with the given seed.
pub fn evaluate(entry: &ExperimentEntry, seed: u64) -> Result<Evaluated, CliError> {
    let plain = |passed: bool, criterion: String, report: serde_json::Value| Evaluated {
        passed,
        criterion,
        report,
        resolved: entry.clone(),
        trace_csv: None,
    };
    Ok(match entry {
        ExperimentEntry::Born(e) => run_repeated_entry(e, Model::Complex, seed)?,
        ExperimentEntry::Simplex(e) => run_repeated_entry(e, Model::Real, seed)?,
        ExperimentEntry::Mixture(e) => {
            let spec = MixtureSpec::new(e.components.clone(), e.weights.clone())?;
            let rep = run_mixture(&spec, &RunSettings::new(e.trials, seed).with_checkpoints(vec![]))?;
            plain(
                rep.within_sigmas(e.sigmas),
                format!("every residual within {} sigma of the weighted Born probabilities", e.sigmas),
                to_value(&rep),
            )
        }
        ExperimentEntry::MixtureViolation(e) => {
            let spec = MixtureSpec::new(e.components.clone(), e.weights.clone())?;
            let sampler = match &e.center {
                Some(c) => SamplerSpec::EpsilonConcentrated {
                    center: State::Real(c.clone()),
                    epsilon: e.epsilon,
                    weight: e.weight,
                },
                None => violation_sampler(&spec, None, e.epsilon, e.weight)?,
            };
            let rep =
                run_mixture_violation(&spec, &sampler, &RunSettings::new(e.trials, seed).with_checkpoints(vec![]))?;
            let expect = if e.expect_violation { "exceeds" } else { "stays within" };
            plain(
                rep.linearity.violation == e.expect_violation,
                format!("the largest residual {expect} 5 sigma"),
                to_value(&rep),
            )
        }
        ExperimentEntry::Invariance(e) => {
            let system = e.state.resolve(Model::Complex, e.n, seed)?;
            let config = ExperimentConfig::new(system.clone(), 1, seed);
            let rep = run_invariance_suite(&config, e.trials, RngStream::new(seed, 0))?;
            let mut resolved = e.clone();
            resolved.state = StateInput::Given(system);
            Evaluated {
                resolved: ExperimentEntry::Invariance(resolved),
                ..plain(rep.exact(), "identical decisions in every paired trial".into(), to_value(&rep))
            }
        }
        ExperimentEntry::Contextuality(e) => {
            let rep = run_contextuality_demo(
                &e.system,
                &e.observer,
                e.swap[0],
                e.swap[1],
                e.samples,
                RngStream::new(seed, 0),
            )?;
            plain(
                rep.demonstrates(e.sigmas),
                format!("decision changes while the outcome probability moves less than {} sigma", e.sigmas),
                to_value(&rep),
            )
        }
        ExperimentEntry::Alpha(e) => {
            let [lo, hi] = e.range;
            let rep = alpha_sweep(e.n, e.pairs, lo, hi, e.proportional, RngStream::new(seed, 0))?;
            let (passed, criterion) = if lo >= 0.5 {
                (rep.majorization_count == rep.pairs, "some outcome favours the system in every pair")
            } else if hi <= 0.5 && e.proportional {
                (rep.max_max_odds < 1.0, "every maximal odds ratio is below 1")
            } else {
                (true, "informational: no criterion for this range")
            };
            plain(passed, criterion.into(), to_value(&rep))
        }
        ExperimentEntry::Omega(e) => {
            let rep = verify_omega_pushforward(e.n, e.samples, e.bins, RngStream::new(seed, 0))?;
            plain(rep.passes(), "chi-square and marginal KS tests pass at level 0.001".into(), to_value(&rep))
        }
    })
}
