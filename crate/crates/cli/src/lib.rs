//! Command-line driver for the observer simulations.
//!
//! Exit codes: 0 when every statistical criterion passes, 1 for usage or
//! input errors, 2 when a criterion fails.

pub mod suite;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bornforge_core::geometry::verify_omega_pushforward;
use bornforge_core::{Model, RngStream};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use suite::{evaluate, run_repeated_entry, ExperimentEntry, RepeatedEntry, StateInput, SuiteConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// Environment variable capping the number of worker threads (0 = auto).
pub const THREADS_ENV: &str = "BORNFORGE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] bornforge_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Parser)]
#[command(name = "bornforge", version, about = "Monte Carlo experiments with a likelihood-ratio observer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated measurement of a pure state; compares with Born probabilities.
    Born(RepeatArgs),
    /// Repeated measurement of a statistical state; compares with its weights.
    Simplex(RepeatArgs),
    /// Checks that the modulus-squared map carries the sphere onto the flat simplex.
    OmegaCheck(OmegaArgs),
    /// Runs every experiment listed in a TOML or JSON file.
    Suite(SuiteArgs),
}

#[derive(Debug, Args)]
pub struct RepeatArgs {
    /// Number of outcomes; required with `--state random`.
    #[arg(long)]
    pub n: Option<usize>,
    /// State as a JSON vector, or `random`.
    #[arg(long, default_value = "random")]
    pub state: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for result.json, trace.csv and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OmegaArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the seed in the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Provenance of a run. Everything but `duration_secs` is reproducible.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub results: Vec<ResultEntry>,
    pub passed: bool,
    pub duration_secs: f64,
}

#[derive(Debug, Serialize)]
pub struct ResultEntry {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub passed: bool,
    pub result: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

/// One experiment's result file.
#[derive(Serialize)]
struct ResultFile<'a> {
    name: &'a str,
    kind: &'a str,
    seed: u64,
    passed: bool,
    criterion: &'a str,
    report: &'a serde_json::Value,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Input(format!("{THREADS_ENV}={v} is not a count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

/// Runs a parsed command; `Ok(passed)` on completion.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Born(a) => cmd_repeated(a, Model::Complex),
        Command::Simplex(a) => cmd_repeated(a, Model::Real),
        Command::OmegaCheck(a) => cmd_omega_check(a),
        Command::Suite(a) => cmd_suite(a),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn cmd_repeated(args: &RepeatArgs, model: Model) -> Result<bool, CliError> {
    let started = Instant::now();
    if args.trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let entry = RepeatedEntry {
        name: None,
        n: args.n,
        state: StateInput::parse(&args.state)?,
        trials: args.trials,
        sampler: Default::default(),
        odds: Default::default(),
        frame: None,
        checkpoints: None,
        sigmas: 4.0,
    };
    let evaluated = run_repeated_entry(&entry, model, args.seed)?;
    let (command, kind) = match model {
        Model::Real => ("simplex", "simplex"),
        Model::Complex => ("born", "born"),
    };
    let file = ResultFile {
        name: kind,
        kind,
        seed: args.seed,
        passed: evaluated.passed,
        criterion: &evaluated.criterion,
        report: &evaluated.report,
    };
    let json = to_json(&file);
    match &args.out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join("result.json"), &json)?;
            let trace = evaluated.trace_csv.as_deref().unwrap_or_default();
            write_file(&dir.join("trace.csv"), trace)?;
            let manifest = RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command,
                seed: args.seed,
                config: serde_json::to_value(&evaluated.resolved).expect("config serializes"),
                results: vec![ResultEntry {
                    name: kind.into(),
                    kind: kind.into(),
                    seed: args.seed,
                    passed: evaluated.passed,
                    result: "result.json".into(),
                    trace: Some("trace.csv".into()),
                }],
                passed: evaluated.passed,
                duration_secs: started.elapsed().as_secs_f64(),
            };
            write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
        }
        None => print!("{json}"),
    }
    report_verdict(kind, evaluated.passed, &evaluated.criterion);
    Ok(evaluated.passed)
}

fn report_verdict(name: &str, passed: bool, criterion: &str) {
    eprintln!("{} {name}: {criterion}", if passed { "PASS" } else { "FAIL" });
}

fn cmd_omega_check(args: &OmegaArgs) -> Result<bool, CliError> {
    let rep = verify_omega_pushforward(args.n, args.samples, args.bins, RngStream::new(args.seed, 0))?;
    print!("{}", to_json(&rep));
    let passed = rep.passes();
    report_verdict("omega-check", passed, "chi-square and marginal KS tests pass at level 0.001");
    Ok(passed)
}

/// File-name stem for the `index`-th experiment.
fn stem(index: usize, entry: &ExperimentEntry) -> String {
    let label: String = entry
        .name()
        .unwrap_or(entry.kind())
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:02}-{label}")
}

/// Runs a suite; the seed of experiment `i` is derived from the run seed.
pub fn cmd_suite(args: &SuiteArgs) -> Result<bool, CliError> {
    let started = Instant::now();
    let config = SuiteConfig::load(&args.config)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let root = RngStream::new(seed, 0);
    create_dir(&args.out_dir)?;

    let mut results = Vec::with_capacity(config.experiments.len());
    let mut resolved = Vec::with_capacity(config.experiments.len());
    for (i, entry) in config.experiments.iter().enumerate() {
        let exp_seed = root.child_seed(i as u64);
        let stem = stem(i, entry);
        let name = entry.name().unwrap_or(entry.kind()).to_owned();
        let evaluated =
            evaluate(entry, exp_seed).map_err(|e| CliError::Input(format!("experiment {i} ({name}): {e}")))?;
        let file = ResultFile {
            name: &name,
            kind: entry.kind(),
            seed: exp_seed,
            passed: evaluated.passed,
            criterion: &evaluated.criterion,
            report: &evaluated.report,
        };
        let result_name = format!("{stem}.json");
        write_file(&args.out_dir.join(&result_name), &to_json(&file))?;
        let trace = match &evaluated.trace_csv {
            Some(csv) => {
                let trace_name = format!("{stem}.trace.csv");
                write_file(&args.out_dir.join(&trace_name), csv)?;
                Some(trace_name)
            }
            None => None,
        };
        report_verdict(&name, evaluated.passed, &evaluated.criterion);
        results.push(ResultEntry {
            name,
            kind: entry.kind().into(),
            seed: exp_seed,
            passed: evaluated.passed,
            result: result_name,
            trace,
        });
        resolved.push(evaluated.resolved);
    }

    let passed = results.iter().all(|r| r.passed);
    let echo = SuiteConfig { seed: Some(seed), experiments: resolved };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "suite",
        seed,
        config: serde_json::to_value(&echo).expect("config serializes"),
        results,
        passed,
        duration_secs: started.elapsed().as_secs_f64(),
    };
    write_file(&args.out_dir.join("manifest.json"), &to_json(&manifest))?;
    Ok(passed)
}
