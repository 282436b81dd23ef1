//! Command-line front end for the bosonic estimators and oracles.

pub mod document;
pub mod problem;

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bosonic_core::clifford::estimate_qubit_expectation;
use bosonic_core::estimators::{
    estimate_amplitude, estimate_expectation, estimate_hafnian, estimate_phase_shifter, gurvits_permanent,
    vibronic_spectrum, EstimatorConfig,
};
use bosonic_core::linalg::{hafnian_exact, permanent_exact};
use bosonic_core::oracle::{exact_amplitude, exact_expectation, exact_output_distribution};
use bosonic_core::sparse::{sample_sparse, SupportSet};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use document::{Document, Entry, PatternProbability};
use problem::{observable_labels, Problem};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_SPARSE_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<bosonic_core::Error> for CliError {
    fn from(e: bosonic_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bosonic", version, about = "Randomized estimators for linear-optical and near-Clifford circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a randomized estimator.
    Estimate {
        #[arg(value_enum)]
        kind: EstimateKind,
        #[command(flatten)]
        common: Common,
    },
    /// Draw outcomes from an estimated distribution.
    Sample {
        #[arg(value_enum)]
        kind: SampleKind,
        #[command(flatten)]
        common: Common,
        /// Number of outcomes to draw (overrides `n_samples` in the problem file).
        #[arg(long)]
        n_samples: Option<usize>,
        /// Use every pattern with at most N photons as the support.
        #[arg(long, value_name = "N")]
        enumerate_up_to_photons: Option<usize>,
    },
    /// Exact values by brute force, for small instances.
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimateKind {
    Expectation,
    Amplitude,
    Hafnian,
    Permanent,
    PhaseShifter,
    Vibronic,
    Qubit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Amplitude,
    Expectation,
    Distribution,
    Hafnian,
    Permanent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file; `-` or absent reads stdin.
    #[arg(long, short)]
    pub problem: Option<PathBuf>,
    /// Root seed. Drawn from the OS and recorded when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Result file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Also write `Omega,G` rows of the spectrum here (vibronic only).
    #[arg(long, value_name = "PATH")]
    pub emit_spectrum_csv: Option<PathBuf>,
}

fn read_problem(path: Option<&Path>) -> Result<Problem, CliError> {
    let text = match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?,
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::Validation(format!("cannot read stdin: {e}")))?;
            s
        }
    };
    Problem::parse(&text)
}

fn config(problem: &Problem, common: &Common, seed: u64) -> EstimatorConfig {
    let c = &problem.config;
    let mut cfg = EstimatorConfig::new(
        common.epsilon.or(c.epsilon).unwrap_or(DEFAULT_EPSILON),
        common.delta.or(c.delta).unwrap_or(DEFAULT_DELTA),
        seed,
    )
    .with_workers(common.workers)
    .with_variance(c.variance_mode());
    if let Some(k) = c.k_observables {
        cfg = cfg.with_k(k);
    }
    cfg
}

/// Runs one parsed command against an already-loaded problem.
pub fn execute(command: &Command, problem: &Problem, seed: u64) -> Result<Document, CliError> {
    let start = Instant::now();
    let mut doc = match command {
        Command::Estimate { kind, common } => {
            let cfg = config(problem, common, seed);
            cfg.validate()?;
            estimate(*kind, problem, &cfg)?
        }
        Command::Sample { common, n_samples, enumerate_up_to_photons, .. } => {
            let cfg = config(problem, common, seed);
            cfg.validate()?;
            let u = problem.unitary()?;
            let input = problem.input_state()?;
            let support = match (enumerate_up_to_photons, &problem.support) {
                (Some(n), _) => SupportSet::enumerate(input.len(), *n)?,
                (None, Some(s)) => SupportSet::new(s.clone())?,
                (None, None) => {
                    return Err(CliError::Validation(
                        "give `support` in the problem file or --enumerate-up-to-photons".into(),
                    ))
                }
            };
            let n = n_samples.or(problem.n_samples).unwrap_or(DEFAULT_SPARSE_SAMPLES);
            let s = sample_sparse(&u, &input, &support, n, &cfg)?;
            let mut doc = Document::new("sample sparse", seed, cfg.workers);
            doc.results = s
                .estimate
                .probabilities
                .iter()
                .zip(&s.estimate.results)
                .map(|((p, _), r)| Entry::from_result(r, Some(format!("{p:?}"))))
                .collect();
            doc.distribution = Some(
                s.distribution()
                    .into_iter()
                    .map(|(pattern, probability)| PatternProbability { pattern, probability })
                    .collect(),
            );
            doc.normalization = Some(s.normalization);
            doc.leakage = Some(s.leakage);
            doc.tv_bound = Some(s.tv_bound);
            doc.samples = Some(s.samples);
            doc
        }
        Command::Oracle { kind, common } => oracle(*kind, problem, seed, common.workers)?,
    };
    doc.wall_time_s = start.elapsed().as_secs_f64();
    Ok(doc)
}

fn estimate(kind: EstimateKind, problem: &Problem, cfg: &EstimatorConfig) -> Result<Document, CliError> {
    let name = format!("estimate {}", kind.to_possible_value().expect("named kind").get_name());
    let mut doc = Document::new(name, cfg.seed, cfg.workers);
    match kind {
        EstimateKind::Expectation => {
            let u = problem.unitary()?;
            let input = problem.input_state()?;
            let obs = problem.observables(input.len())?;
            let labels = observable_labels(problem.observables.as_ref().expect("checked by observables()"));
            let results = estimate_expectation(&u, &input, &obs, cfg)?;
            doc.results =
                results.iter().zip(labels).map(|(r, l)| Entry::from_result(r, Some(l))).collect();
        }
        EstimateKind::Amplitude => {
            let r = estimate_amplitude(&problem.unitary()?, &problem.input_state()?, &problem.output_state()?, cfg)?;
            doc.results.push(Entry::from_result(&r, None));
        }
        EstimateKind::Hafnian => {
            let r = estimate_hafnian(&problem.square_matrix()?, cfg)?;
            doc.results.push(Entry::from_result(&r, None));
        }
        EstimateKind::Permanent => {
            let r = gurvits_permanent(&problem.square_matrix()?, cfg)?;
            doc.results.push(Entry::from_result(&r, None));
        }
        EstimateKind::PhaseShifter => {
            let r = estimate_phase_shifter(
                &problem.unitary()?,
                &problem.input_state()?,
                problem.omega()?,
                problem.theta()?,
                cfg,
            )?;
            doc.results.push(Entry::from_result(&r, None));
        }
        EstimateKind::Vibronic => {
            let v = vibronic_spectrum(
                &problem.unitary()?,
                &problem.input_state()?,
                problem.omega()?,
                problem.omega_max()?,
                cfg,
            )?;
            doc.results =
                v.components.iter().enumerate().map(|(k, r)| Entry::from_result(r, Some(format!("k={}", k + 1)))).collect();
            doc.fourier = Some(v.fourier.iter().map(|z| [z.re, z.im]).collect());
            doc.spectrum = Some(v.spectrum);
        }
        EstimateKind::Qubit => {
            let input = problem.qubit_input()?;
            let circuit = problem.qubit_circuit()?;
            let obs = problem.qubit_observables(circuit.qubits())?;
            let labels = observable_labels(problem.observables.as_ref().expect("checked by qubit_observables()"));
            let results = estimate_qubit_expectation(&circuit, &input, &obs, cfg)?;
            doc.results =
                results.iter().zip(labels).map(|(r, l)| Entry::from_result(r, Some(l))).collect();
        }
    }
    Ok(doc)
}

fn oracle(kind: OracleKind, problem: &Problem, seed: u64, workers: usize) -> Result<Document, CliError> {
    let name = format!("oracle {}", kind.to_possible_value().expect("named kind").get_name());
    let mut doc = Document::new(name, seed, workers);
    match kind {
        OracleKind::Amplitude => {
            let e = exact_amplitude(&problem.unitary()?, &problem.input_state()?, &problem.output_state()?, problem.cutoff())?;
            doc.results.push(Entry::exact(e.value, e.tail, None));
            doc.tail = Some(e.tail);
        }
        OracleKind::Expectation => {
            let u = problem.unitary()?;
            let input = problem.input_state()?;
            let obs = problem.observables(input.len())?;
            let labels = observable_labels(problem.observables.as_ref().expect("checked by observables()"));
            for (o, l) in obs.iter().zip(labels) {
                let e = exact_expectation(&u, &input, o, problem.cutoff())?;
                doc.tail = Some(e.tail);
                doc.results.push(Entry::exact(e.value, e.tail, Some(l)));
            }
        }
        OracleKind::Distribution => {
            let e = exact_output_distribution(&problem.unitary()?, &problem.input_state()?, problem.cutoff())?;
            doc.distribution = Some(
                e.value.into_iter().map(|(pattern, probability)| PatternProbability { pattern, probability }).collect(),
            );
            doc.tail = Some(e.tail);
        }
        OracleKind::Hafnian => doc.results.push(Entry::exact(hafnian_exact(&problem.square_matrix()?)?, 0.0, None)),
        OracleKind::Permanent => doc.results.push(Entry::exact(permanent_exact(&problem.square_matrix()?)?, 0.0, None)),
    }
    Ok(doc)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn run_parsed(cli: &Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Estimate { common, .. } | Command::Sample { common, .. } | Command::Oracle { common, .. } => common,
    };
    let problem = read_problem(common.problem.as_deref())?;
    let seed = common.seed.unwrap_or_else(rand::random);
    let doc = execute(&cli.command, &problem, seed)?;
    if let Some(path) = &common.emit_spectrum_csv {
        let csv = doc
            .spectrum_csv()
            .ok_or_else(|| CliError::Validation("--emit-spectrum-csv needs a command that produces a spectrum".into()))?;
        write(path, &csv)?;
    }
    let json = doc.to_json();
    match &common.output {
        Some(path) => write(path, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit status.
pub fn run_command<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_parsed(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
