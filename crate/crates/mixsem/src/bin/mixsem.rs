use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mixsem::config::{load_model_config, load_simulation_config, ModelConfig, ModelKind, PriorResolver, SimulationConfig, SCHEMA_VERSION};
use mixsem::core::criteria::{CriteriaReport, DEFAULT_DRAWS};
use mixsem::core::init::{select_components, EmOptions};
use mixsem::core::math::derive_seed;
use mixsem::core::sim::simulate;
use mixsem::core::{Dataset, FitOptions};
use mixsem::io::{load_csv, write_csv, write_json, write_table, Columns};
use mixsem::model::{FitFile, ModelSpec};
use mixsem::parallel::{bootstrap_par, with_threads};
use mixsem::study::{run_study, write_report, StudyConfig};
use mixsem::{exit_code, Error, Result};
use serde::Serialize;

/// Bayesian SEMs with Gaussian-mixture outcomes or latent factors, fitted by
/// mean-field variational Bayes.
#[derive(Parser)]
#[command(name = "mixsem", version)]
struct Cli {
    /// Worker threads for parallel stages; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a simulation truth.
    Simulate(SimulateArgs),
    /// Choose mixture sizes per outcome by BIC.
    SelectComponents(SelectArgs),
    /// Fit a model and write its variational state.
    Fit(FitArgs),
    /// VWAIC and VAIC for several fits of the same data.
    Compare(CompareArgs),
    /// Percentile bootstrap intervals from refits of resampled data.
    Bootstrap(BootstrapArgs),
    /// Replicated datasets from the fitted approximation.
    Ppc(PpcArgs),
    /// Repeated simulate-and-fit study.
    Study(StudyArgs),
}

#[derive(Args)]
struct ColumnArgs {
    /// Outcome columns, comma separated (overrides the config).
    #[arg(long, value_delimiter = ',')]
    outcomes: Option<Vec<String>>,
    /// Covariate columns, comma separated (overrides the config).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Extra spelling of a missing outcome cell besides "" and NA.
    #[arg(long)]
    missing_token: Option<String>,
    /// Rescale outcomes to this standard deviation after loading.
    #[arg(long)]
    standardize_sd: Option<f64>,
}

impl ColumnArgs {
    fn apply(&self, mut c: Columns) -> Columns {
        if let Some(o) = &self.outcomes {
            c.outcomes = o.clone();
        }
        if let Some(x) = &self.covariates {
            c.covariates = x.clone();
        }
        if self.missing_token.is_some() {
            c.missing_token = self.missing_token.clone();
        }
        if self.standardize_sd.is_some() {
            c.standardize_sd = self.standardize_sd;
        }
        c
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    missing_rate: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model config whose column selection is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    columns: ColumnArgs,
    #[arg(long, default_value_t = 3)]
    max_h: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    columns: ColumnArgs,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Earlier fit file to start from.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration convergence metric as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Fit files, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    fits: Vec<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DRAWS)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PpcArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 300)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replicated cells as (draw, individual, outcome, value).
    #[arg(long)]
    out: PathBuf,
    /// Kernel density table as (outcome, grid, density, draw).
    #[arg(long)]
    kde_out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory for coverage, MSE and selection CSV tables.
    #[arg(long)]
    tables_dir: Option<PathBuf>,
}

/// Result of a command that ran to completion.
enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, move || run(cli.command)) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: maximum iterations reached before convergence; output written");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Simulate(a) => simulate_cmd(a),
        Command::SelectComponents(a) => select_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Bootstrap(a) => bootstrap_cmd(a),
        Command::Ppc(a) => ppc_cmd(a),
        Command::Study(a) => study_cmd(a),
    }
}

fn simulate_cmd(a: SimulateArgs) -> Result<Outcome> {
    let cfg = load_simulation_config(&a.config)?;
    let sim = simulate(&cfg.truth, a.n, a.seed, a.missing_rate)?;
    write_csv(&sim.dataset, &a.out)?;
    if let Some(p) = &a.truth_out {
        write_json(&SimulationConfig { schema_version: SCHEMA_VERSION, truth: cfg.truth }, p)?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct OutcomeSelection {
    name: String,
    chosen: usize,
    bic: Vec<f64>,
}

#[derive(Serialize)]
struct SelectionFile {
    schema_version: u32,
    max_h: usize,
    seed: u64,
    /// Chosen sizes in outcome order, ready for the `h` prior key.
    h: Vec<usize>,
    outcomes: Vec<OutcomeSelection>,
}

fn select_cmd(a: SelectArgs) -> Result<Outcome> {
    let base = match &a.config {
        Some(p) => load_model_config(p)?.columns,
        None => Columns::default(),
    };
    let ds = load_csv(&a.data, &a.columns.apply(base))?;
    let mut outcomes = Vec::with_capacity(ds.m());
    for j in 0..ds.m() {
        let values = ds.observed_values(j);
        let name = ds.outcome_names()[j].clone();
        let s = select_components(&values, a.max_h, &EmOptions::default(), derive_seed(a.seed, j as u64))
            .map_err(|e| Error::Invalid(format!("outcome '{name}': {e}")))?;
        outcomes.push(OutcomeSelection { name, chosen: s.chosen, bic: s.bic });
    }
    let h = outcomes.iter().map(|o| o.chosen).collect();
    write_json(&SelectionFile { schema_version: SCHEMA_VERSION, max_h: a.max_h, seed: a.seed, h, outcomes }, &a.out)?;
    Ok(Outcome::Done)
}

/// Loads the data and resolves the spec named by `--model` and `--config`.
fn prepare(a: &ModelArgs) -> Result<(ModelConfig, Columns, Dataset, ModelSpec, FitOptions)> {
    let cfg = load_model_config(&a.config)?;
    let columns = a.columns.apply(cfg.columns.clone());
    let ds = load_csv(&a.data, &columns)?;
    let r = PriorResolver::new(&cfg.priors, &a.config);
    let spec = match a.model {
        ModelKind::OutcomeMixture => ModelSpec::Outcome(r.outcome_spec(&ds, a.seed)?),
        ModelKind::LatentMixture => ModelSpec::Latent(r.latent_spec(&ds)?, r.latent_init()),
    };
    let options = FitOptions { tol: a.tol, max_iter: a.max_iter, seed: a.seed };
    Ok((cfg, columns, ds, spec, options))
}

fn fit_cmd(a: FitArgs) -> Result<Outcome> {
    let (_, columns, ds, spec, options) = prepare(&a.model)?;
    let warm = match &a.init {
        Some(p) => {
            let f = FitFile::load(p)?;
            f.check_data(&ds)?;
            Some(f.fitted)
        }
        None => None,
    };
    let start = Instant::now();
    let (fitted, report) = spec.fit(&ds, &options, warm.as_ref())?;
    eprintln!(
        "{}: {} iterations in {:.2?}, converged: {}",
        spec.kind().label(),
        report.iterations,
        start.elapsed(),
        report.converged
    );
    if let Some(t) = &a.trace {
        write_table(
            t,
            &["iteration", "metric"],
            report.metric_trace.iter().enumerate().map(|(k, m)| vec![(k + 1).to_string(), m.to_string()]),
        )?;
    }
    let converged = report.converged;
    write_json(&FitFile::new(columns, fitted, report, &ds)?, &a.out)?;
    Ok(if converged { Outcome::Done } else { Outcome::NotConverged })
}

#[derive(Serialize)]
struct ComparedModel {
    fit: String,
    model: ModelKind,
    winner: bool,
    criteria: CriteriaReport,
}

#[derive(Serialize)]
struct CompareFile {
    schema_version: u32,
    draws: usize,
    seed: u64,
    /// Sorted by VWAIC, lowest first.
    models: Vec<ComparedModel>,
}

fn compare_cmd(a: CompareArgs) -> Result<Outcome> {
    let mut models = Vec::with_capacity(a.fits.len());
    for (k, p) in a.fits.iter().enumerate() {
        let f = FitFile::load(p)?;
        let ds = load_csv(&a.data, &f.columns)?;
        f.check_data(&ds).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
        let criteria = f.fitted.criteria(&ds, a.draws, derive_seed(a.seed, k as u64))?;
        models.push(ComparedModel { fit: display_name(p), model: f.fitted.kind(), winner: false, criteria });
    }
    models.sort_by(|x, y| x.criteria.vwaic.total_cmp(&y.criteria.vwaic));
    if let Some(first) = models.first_mut() {
        first.winner = true;
    }
    write_json(&CompareFile { schema_version: SCHEMA_VERSION, draws: a.draws, seed: a.seed, models }, &a.out)?;
    Ok(Outcome::Done)
}

fn display_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn bootstrap_cmd(a: BootstrapArgs) -> Result<Outcome> {
    let (_, _, ds, spec, options) = prepare(&a.model)?;
    let summary = bootstrap_par(&ds, a.replicates, a.model.seed, a.level, |d| {
        let (fitted, _) = spec.fit(d, &options, None).map_err(|e| match e {
            Error::Core(c) => c,
            other => mixsem::core::Error::InvalidParameter(other.to_string()),
        })?;
        Ok(fitted.point_estimates(d))
    })?;
    write_json(&summary, &a.out)?;
    Ok(Outcome::Done)
}

fn ppc_cmd(a: PpcArgs) -> Result<Outcome> {
    let f = FitFile::load(&a.fit)?;
    let ds = load_csv(&a.data, &f.columns)?;
    f.check_data(&ds)?;
    let draws = f.fitted.posterior_predictive(&ds, a.draws, a.seed)?;
    write_table(&a.out, &["draw", "individual", "outcome", "value"], mixsem::ppc::replicate_rows(&ds, &draws))?;
    if let Some(k) = &a.kde_out {
        write_table(k, &["outcome", "grid", "density", "draw"], mixsem::ppc::kde_rows(&ds, &draws)?)?;
    }
    Ok(Outcome::Done)
}

fn study_cmd(a: StudyArgs) -> Result<Outcome> {
    let cfg = StudyConfig::load(&a.config)?;
    let start = Instant::now();
    let report = run_study(&cfg);
    eprintln!("study: {} replicates in {:.2?}", cfg.n_datasets, start.elapsed());
    write_report(&report, &a.out, a.tables_dir.as_deref())?;
    Ok(Outcome::Done)
}
