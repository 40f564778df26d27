//! Repeated simulate-and-fit runs against a known truth.
//!
//! Replicate `r` draws everything from seeds derived from `(seed, r)`:
//! the dataset, each variant's fit, the bootstrap resamples and the
//! criteria draws. Replicates run in parallel and are reduced in index
//! order, so the report depends only on the config.

use std::path::Path;

use mixsem_core::criteria::CriteriaReport;
use mixsem_core::math::derive_seed;
use mixsem_core::sim::{coverage, mse, simulate, SimulationTruth};
use mixsem_core::uncertainty::BootstrapInterval;
use mixsem_core::{Dataset, FitOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Priors, PriorResolver, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::intervals::{estimates, Estimate};
use crate::io::{read_json, write_json, write_table};
use crate::model::ModelSpec;
use crate::parallel::bootstrap_par;
use crate::reference;

/// Models fitted to every simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Outcome mixtures with the generating `H_j`.
    TrueH,
    /// Outcome model with every `H_j = 1`.
    AllH1,
    /// Mixture on the latent factor with `K` from the priors.
    LatentMixture,
}

fn all_variants() -> Vec<Variant> {
    vec![Variant::TrueH, Variant::AllH1, Variant::LatentMixture]
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub schema_version: u32,
    pub n_datasets: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub missing_rate: f64,
    pub truth: SimulationTruth,
    pub priors: Priors,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    /// Bootstrap resamples for the true-`H` model; 0 skips the bootstrap.
    pub bootstrap_replicates: usize,
    /// Draws per criteria evaluation; 0 skips model comparison.
    pub criteria_draws: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let c: StudyConfig = read_json(path)?;
        let bad = |key: &str, message: String| Error::Config { path: path.to_path_buf(), message: format!("key \"{key}\": {message}") };
        if c.schema_version != SCHEMA_VERSION {
            return Err(bad("schema_version", format!("expected {SCHEMA_VERSION}, got {}", c.schema_version)));
        }
        c.truth.validate().map_err(|e| bad("truth", e.to_string()))?;
        if c.n_datasets == 0 {
            return Err(bad("n_datasets", "must be at least 1".into()));
        }
        if c.variants.is_empty() {
            return Err(bad("variants", "at least one variant is required".into()));
        }
        if c.bootstrap_replicates == 1 {
            return Err(bad("bootstrap_replicates", "must be 0 or at least 2".into()));
        }
        if c.criteria_draws == 1 {
            return Err(bad("criteria_draws", "must be 0 or at least 2".into()));
        }
        Ok(c)
    }

    fn spec(&self, v: Variant, ds: &Dataset, seed: u64) -> Result<ModelSpec> {
        let r = PriorResolver::new(&self.priors, "study priors");
        Ok(match v {
            Variant::TrueH => {
                let priors = Priors { h: Some(self.truth.h()), ..self.priors.clone() };
                ModelSpec::Outcome(PriorResolver::new(&priors, "study priors").outcome_spec(ds, seed)?)
            }
            Variant::AllH1 => {
                let priors = Priors { h: Some(vec![1; self.truth.m()]), ..self.priors.clone() };
                ModelSpec::Outcome(PriorResolver::new(&priors, "study priors").outcome_spec(ds, seed)?)
            }
            Variant::LatentMixture => ModelSpec::Latent(r.latent_spec(ds)?, r.latent_init()),
        })
    }
}

/// True values under the reported names, components sorted by intercept.
pub fn truth_parameters(t: &SimulationTruth) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for j in 1..t.m() {
        out.push((format!("lambda[{}]", j + 1), t.lambda[j]));
    }
    for j in 0..t.m() {
        let mut order: Vec<usize> = (0..t.mu[j].len()).collect();
        order.sort_by(|&a, &b| t.mu[j][a].total_cmp(&t.mu[j][b]).then(a.cmp(&b)));
        for (h, &o) in order.iter().enumerate() {
            out.push((format!("mu[{},{}]", j + 1, h + 1), t.mu[j][o]));
        }
        for (h, &o) in order.iter().enumerate() {
            out.push((format!("psi2[{},{}]", j + 1, h + 1), t.psi2[j][o]));
        }
        if order.len() > 1 {
            for (h, &o) in order.iter().enumerate() {
                out.push((format!("w[{},{}]", j + 1, h + 1), t.w[j][o]));
            }
        }
    }
    for (k, b) in t.beta.iter().enumerate() {
        out.push((format!("beta[{}]", k + 1), *b));
    }
    out.push(("sigma2".into(), t.sigma2));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub variant: Variant,
    pub iterations: usize,
    pub converged: bool,
    pub criteria: Option<CriteriaReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub seed: u64,
    pub variants: Vec<VariantRecord>,
    /// True-`H` `q` means and credible intervals.
    pub estimates: Vec<Estimate>,
    pub bootstrap: Vec<BootstrapInterval>,
    pub bootstrap_failures: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub parameter: String,
    pub truth: f64,
    pub plain: f64,
    pub bootstrap: Option<f64>,
    pub replicates: usize,
    pub paper_plain: Option<f64>,
    pub paper_bootstrap: Option<f64>,
    pub paper_mcmc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub parameter: String,
    pub truth: f64,
    pub mse: f64,
    pub replicates: usize,
    pub paper_mfvb: Option<f64>,
    pub paper_mcmc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub variant: Variant,
    pub vwaic_wins: usize,
    pub vaic_wins: usize,
    /// Replicates where this variant has both the lowest VWAIC and VAIC.
    pub both_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub replicates: Vec<ReplicateRecord>,
    pub coverage: Vec<CoverageRow>,
    pub mse: Vec<MseRow>,
    /// Replicates in which every variant produced both criteria.
    pub compared: usize,
    pub selection: Vec<SelectionRow>,
}

fn run_replicate(cfg: &StudyConfig, r: usize) -> ReplicateRecord {
    let seed = derive_seed(cfg.seed, r as u64);
    let mut rec = ReplicateRecord {
        index: r,
        seed,
        variants: Vec::new(),
        estimates: Vec::new(),
        bootstrap: Vec::new(),
        bootstrap_failures: 0,
        error: None,
    };
    let ds = match simulate(&cfg.truth, cfg.n, derive_seed(seed, 0), cfg.missing_rate) {
        Ok(s) => s.dataset,
        Err(e) => {
            rec.error = Some(format!("simulate: {e}"));
            return rec;
        }
    };
    for (vi, &v) in cfg.variants.iter().enumerate() {
        let vi = vi as u64;
        let options = FitOptions { tol: cfg.tol, max_iter: cfg.max_iter, seed: derive_seed(seed, 100 + vi) };
        let mut vr = VariantRecord { variant: v, iterations: 0, converged: false, criteria: None, error: None };
        let outcome = (|| -> Result<()> {
            let spec = cfg.spec(v, &ds, derive_seed(seed, 400 + vi))?;
            let (fitted, report) = spec.fit(&ds, &options, None)?;
            vr.iterations = report.iterations;
            vr.converged = report.converged;
            if v == Variant::TrueH {
                rec.estimates = estimates(&fitted.marginals(&ds), cfg.level)?;
                if cfg.bootstrap_replicates >= 2 {
                    let b = bootstrap_par(&ds, cfg.bootstrap_replicates, derive_seed(seed, 200), cfg.level, |d| {
                        Ok(spec.fit(d, &options, None).map_err(to_core)?.0.point_estimates(d))
                    })?;
                    rec.bootstrap_failures = b.failures.len();
                    rec.bootstrap = b.intervals;
                }
            }
            if cfg.criteria_draws >= 2 {
                vr.criteria = Some(fitted.criteria(&ds, cfg.criteria_draws, derive_seed(seed, 300 + vi))?);
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            vr.error = Some(e.to_string());
        }
        rec.variants.push(vr);
    }
    rec
}

fn to_core(e: Error) -> mixsem_core::Error {
    match e {
        Error::Core(c) => c,
        other => mixsem_core::Error::InvalidParameter(other.to_string()),
    }
}

fn argmin(values: &[(Variant, f64)]) -> Option<Variant> {
    values.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|v| v.0)
}

/// Runs every replicate and tabulates coverage, MSE and selection wins.
pub fn run_study(cfg: &StudyConfig) -> StudyReport {
    let replicates: Vec<ReplicateRecord> = (0..cfg.n_datasets).into_par_iter().map(|r| run_replicate(cfg, r)).collect();
    summarize(cfg.clone(), replicates)
}

fn summarize(cfg: StudyConfig, replicates: Vec<ReplicateRecord>) -> StudyReport {
    let truth = truth_parameters(&cfg.truth);
    let mut coverage_rows = Vec::new();
    let mut mse_rows = Vec::new();
    for (name, t) in &truth {
        let plain: Vec<&Estimate> =
            replicates.iter().filter_map(|r| r.estimates.iter().find(|e| &e.name == name)).collect();
        let boot: Vec<(f64, f64)> = replicates
            .iter()
            .filter_map(|r| r.bootstrap.iter().find(|b| &b.name == name))
            .map(|b| (b.lo, b.hi))
            .collect();
        let intervals: Vec<(f64, f64)> = plain.iter().map(|e| (e.lo, e.hi)).collect();
        let means: Vec<f64> = plain.iter().map(|e| e.mean).collect();
        let paper_cov = reference::coverage(name);
        let paper_mse = reference::mse(name);
        coverage_rows.push(CoverageRow {
            parameter: name.clone(),
            truth: *t,
            plain: coverage(&intervals, *t),
            bootstrap: (!boot.is_empty()).then(|| coverage(&boot, *t)),
            replicates: intervals.len(),
            paper_plain: paper_cov.map(|c| c.0),
            paper_bootstrap: paper_cov.map(|c| c.1),
            paper_mcmc: paper_cov.map(|c| c.2),
        });
        mse_rows.push(MseRow {
            parameter: name.clone(),
            truth: *t,
            mse: mse(&means, *t),
            replicates: means.len(),
            paper_mfvb: paper_mse.map(|m| m.0),
            paper_mcmc: paper_mse.map(|m| m.1),
        });
    }

    let mut selection: Vec<SelectionRow> =
        cfg.variants.iter().map(|&variant| SelectionRow { variant, vwaic_wins: 0, vaic_wins: 0, both_wins: 0 }).collect();
    let mut compared = 0;
    for r in &replicates {
        let crit: Option<Vec<(Variant, &CriteriaReport)>> =
            r.variants.iter().map(|v| v.criteria.as_ref().map(|c| (v.variant, c))).collect();
        let Some(crit) = crit else { continue };
        if crit.len() != cfg.variants.len() {
            continue;
        }
        compared += 1;
        let vw = argmin(&crit.iter().map(|(v, c)| (*v, c.vwaic)).collect::<Vec<_>>());
        let va = argmin(&crit.iter().map(|(v, c)| (*v, c.vaic)).collect::<Vec<_>>());
        for row in &mut selection {
            let w1 = vw == Some(row.variant);
            let w2 = va == Some(row.variant);
            row.vwaic_wins += w1 as usize;
            row.vaic_wins += w2 as usize;
            row.both_wins += (w1 && w2) as usize;
        }
    }
    StudyReport { config: cfg, replicates, coverage: coverage_rows, mse: mse_rows, compared, selection }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `report.json`, `coverage.csv`, `mse.csv` and `selection.csv`
/// into `dir`.
pub fn write_report(report: &StudyReport, json: &Path, tables_dir: Option<&Path>) -> Result<()> {
    write_json(report, json)?;
    let Some(dir) = tables_dir else { return Ok(()) };
    std::fs::create_dir_all(dir).map_err(crate::error::io_err(dir))?;
    write_table(
        &dir.join("coverage.csv"),
        &["parameter", "truth", "plain", "bootstrap", "replicates", "paper_plain", "paper_bootstrap", "paper_mcmc"],
        report.coverage.iter().map(|c| {
            vec![
                c.parameter.clone(),
                c.truth.to_string(),
                c.plain.to_string(),
                opt(c.bootstrap),
                c.replicates.to_string(),
                opt(c.paper_plain),
                opt(c.paper_bootstrap),
                opt(c.paper_mcmc),
            ]
        }),
    )?;
    write_table(
        &dir.join("mse.csv"),
        &["parameter", "truth", "mse", "replicates", "paper_mfvb", "paper_mcmc"],
        report.mse.iter().map(|m| {
            vec![
                m.parameter.clone(),
                m.truth.to_string(),
                m.mse.to_string(),
                m.replicates.to_string(),
                opt(m.paper_mfvb),
                opt(m.paper_mcmc),
            ]
        }),
    )?;
    write_table(
        &dir.join("selection.csv"),
        &["variant", "vwaic_wins", "vaic_wins", "both_wins", "compared"],
        report.selection.iter().map(|s| {
            vec![
                serde_json::to_value(s.variant).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                s.vwaic_wins.to_string(),
                s.vaic_wins.to_string(),
                s.both_wins.to_string(),
                report.compared.to_string(),
            ]
        }),
    )
}
