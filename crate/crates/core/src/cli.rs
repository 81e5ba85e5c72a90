//! Batch command-line front end: `simulate`, `fit`, `recover-noise`, `fit-noise`.
//!
//! Exit status is 0 on success, 2 for unreadable or malformed input and 3
//! for model errors; failures print a JSON error object on stderr.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{CarmaError, Result};
use crate::estimator::{self, Normalization, QmleOptions, RecoveryMode};
use crate::io::{self, FitReport, ModelDocument, NoiseReport, SCHEMA_VERSION};
use crate::kalman::Transition;
use crate::levy::{LevyFamily, LevyModel};
use crate::simulator::{self, SamplingScheme, SimulationMethod, SimulationOptions};

#[derive(Debug, Parser)]
#[command(
    name = "carma-levy",
    version,
    about = "Simulate and estimate Lévy-driven CARMA processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a path; writes path.csv, noise.csv and spec.json.
    Simulate(SimulateArgs),
    /// Fit a CARMA model to `t,y` data; writes fit.json and increments.csv.
    Fit(FitArgs),
    /// Recover increments under a fixed spec; writes increments.csv.
    RecoverNoise(RecoverArgs),
    /// Fit a noise family to a `t,dL` increments file; writes noise_fit.json.
    FitNoise(FitNoiseArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON (spec plus optional `noise`; Brownian(0, 1) when absent).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub terminal: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "euler")]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Model JSON whose coefficients are the starting values.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub family: Option<String>,
    /// Time scale for the noise fit; 0 disables aggregation.
    #[arg(long, default_value_t = 1.0)]
    pub aggregate: f64,
    #[arg(long, default_value = "sigma")]
    pub normalization: String,
    /// Filter transition: `exact`, or `euler` for data simulated on an Euler grid.
    #[arg(long, default_value = "exact")]
    pub transition: String,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitNoiseArgs {
    /// Increments CSV with columns `t,dL`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub family: String,
    /// Time scale to aggregate to; 0 disables aggregation.
    #[arg(long, default_value_t = 1.0)]
    pub aggregate: f64,
    /// Leading increments to drop.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct SimulationEcho<'a> {
    schema_version: u32,
    #[serde(flatten)]
    model: &'a ModelDocument,
    seed: u64,
    terminal: f64,
    n: usize,
    method: SimulationMethod,
    burn_in: usize,
}

pub fn exit_code(err: &CarmaError) -> i32 {
    match err {
        CarmaError::Input(_) | CarmaError::Data(_) => 2,
        _ => 3,
    }
}

pub fn error_json(err: &CarmaError) -> String {
    serde_json::to_string(&ErrorDoc {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody {
            kind: err.kind(),
            message: err.to_string(),
        },
    })
    .expect("error document serialises")
}

fn aggregate_opt(dt: f64) -> Result<Option<f64>> {
    if dt == 0.0 {
        Ok(None)
    } else if dt > 0.0 && dt.is_finite() {
        Ok(Some(dt))
    } else {
        Err(CarmaError::Input(format!(
            "--aggregate must be positive or 0, got {dt}"
        )))
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CARMA_LEVY_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn simulate_cmd(a: &SimulateArgs) -> Result<()> {
    let doc = io::read_model(&a.spec)?;
    let noise = doc.noise.unwrap_or(LevyModel::Brownian { mu: 0.0, sigma: 1.0 });
    let method: SimulationMethod = a.method.parse()?;
    let scheme = SamplingScheme::new(a.terminal, a.n)?;
    let opts = SimulationOptions::new(scheme, a.seed)
        .method(method)
        .burn_in(a.burn_in);
    let path = simulator::simulate(&doc.spec, &noise, &opts)?;
    let echo_doc = ModelDocument {
        spec: doc.spec.clone(),
        noise: Some(noise),
    };
    let path_bytes = io::path_csv(&path)?;
    let noise_bytes = io::increments_csv(&path.noise)?;
    io::write_atomic(&a.out.join("path.csv"), &path_bytes)?;
    io::write_atomic(&a.out.join("noise.csv"), &noise_bytes)?;
    io::write_json(
        &a.out.join("spec.json"),
        &SimulationEcho {
            schema_version: SCHEMA_VERSION,
            model: &echo_doc,
            seed: a.seed,
            terminal: a.terminal,
            n: a.n,
            method,
            burn_in: a.burn_in,
        },
    )
}

fn fit_cmd(a: &FitArgs) -> Result<()> {
    let doc = io::read_model(&a.spec)?;
    let data = io::read_series(&a.data)?;
    let family = a.family.as_deref().map(str::parse::<LevyFamily>).transpose()?;
    let opts = QmleOptions {
        normalization: a.normalization.parse::<Normalization>()?,
        transition: a.transition.parse::<Transition>()?,
        aggregate: aggregate_opt(a.aggregate)?,
        noise_init: doc.noise.filter(|m| Some(m.family()) == family),
        ..Default::default()
    };
    let fit = estimator::qmle(&data, &doc.spec, family, &opts)?;
    let inc_path = a.out.join("increments.csv");
    let inc_bytes = fit.increments.as_ref().map(io::increments_csv).transpose()?;
    let report = FitReport::new(&fit, inc_bytes.as_ref().map(|_| inc_path.as_path()));
    if let Some(bytes) = inc_bytes {
        io::write_atomic(&inc_path, &bytes)?;
    }
    io::write_json(&a.out.join("fit.json"), &report)
}

fn recover_cmd(a: &RecoverArgs) -> Result<()> {
    let doc = io::read_model(&a.spec)?;
    let data = io::read_series(&a.data)?;
    let inc = estimator::recover_increments(&doc.spec, &data)?;
    io::write_atomic(&a.out.join("increments.csv"), &io::increments_csv(&inc)?)
}

fn fit_noise_cmd(a: &FitNoiseArgs) -> Result<()> {
    let family: LevyFamily = a.family.parse()?;
    let mut inc = io::read_increments(&a.data)?;
    if a.burn_in >= inc.len() {
        return Err(CarmaError::Data(format!(
            "burn-in of {} leaves no increments out of {}",
            a.burn_in,
            inc.len()
        )));
    }
    inc.burn_in = a.burn_in;
    let opts = QmleOptions {
        aggregate: aggregate_opt(a.aggregate)?,
        recovery_mode: RecoveryMode::ParamsAndIncrements,
        ..Default::default()
    };
    let fit = estimator::fit_recovered(&inc, family, &opts)?;
    let h = opts.aggregate.unwrap_or(inc.h);
    let n = match opts.aggregate {
        Some(dt) => (inc.len() - inc.burn_in) / (dt / inc.h).round() as usize,
        None => inc.len() - inc.burn_in,
    };
    io::write_json(&a.out.join("noise_fit.json"), &NoiseReport::new(&fit, n, h))
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    configure_threads();
    match &cli.command {
        Command::Simulate(a) => simulate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::RecoverNoise(a) => recover_cmd(a),
        Command::FitNoise(a) => fit_noise_cmd(a),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

/// Output file names used by each command, relative to `--out`.
pub fn outputs(command: &str) -> &'static [&'static str] {
    match command {
        "simulate" => &["path.csv", "noise.csv", "spec.json"],
        "fit" => &["fit.json", "increments.csv"],
        "recover-noise" => &["increments.csv"],
        "fit-noise" => &["noise_fit.json"],
        _ => &[],
    }
}
