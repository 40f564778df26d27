//! Fitting either model family and the fitted-state JSON file.

use std::path::Path;

use mixsem_core::criteria::CriteriaReport;
use mixsem_core::latent::{fit_latent, LatentInit};
use mixsem_core::outcome::{fit, OutcomeInit};
use mixsem_core::uncertainty::{NamedMarginal, ParameterSummary};
use mixsem_core::{Dataset, FitOptions, FitReport, LatentMixtureSpec, LatentQState, OutcomeMixtureSpec, OutcomeQState};
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::intervals::{estimates, Estimate};
use crate::io::{read_json, Columns};
use crate::parallel::{criteria_par, posterior_predictive_par};

/// Level of the credible intervals stored in fit files.
pub const REPORT_LEVEL: f64 = 0.95;

/// A model spec with the state fitted under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FittedModel {
    OutcomeMixture { spec: OutcomeMixtureSpec, state: OutcomeQState },
    LatentMixture { spec: LatentMixtureSpec, state: LatentQState },
}

/// What to fit.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Outcome(OutcomeMixtureSpec),
    Latent(LatentMixtureSpec, LatentInit),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Outcome(_) => ModelKind::OutcomeMixture,
            ModelSpec::Latent(..) => ModelKind::LatentMixture,
        }
    }

    /// Fits from the default start, or from `warm` when given.
    pub fn fit(&self, ds: &Dataset, options: &FitOptions, warm: Option<&FittedModel>) -> Result<(FittedModel, FitReport)> {
        match (self, warm) {
            (ModelSpec::Outcome(spec), w) => {
                let init = match w {
                    None => OutcomeInit::Default,
                    Some(FittedModel::OutcomeMixture { state, .. }) => OutcomeInit::Warm(Box::new(state.clone())),
                    Some(_) => return Err(Error::Invalid("warm start is a latent-mixture fit".into())),
                };
                let (state, report) = fit(spec, ds, options, &init)?;
                Ok((FittedModel::OutcomeMixture { spec: spec.clone(), state }, report))
            }
            (ModelSpec::Latent(spec, start), w) => {
                let init = match w {
                    None => start.clone(),
                    Some(FittedModel::LatentMixture { state, .. }) => LatentInit::Warm(Box::new(state.clone())),
                    Some(_) => return Err(Error::Invalid("warm start is an outcome-mixture fit".into())),
                };
                let (state, report) = fit_latent(spec, ds, options, &init)?;
                Ok((FittedModel::LatentMixture { spec: spec.clone(), state }, report))
            }
        }
    }
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::OutcomeMixture { .. } => ModelKind::OutcomeMixture,
            FittedModel::LatentMixture { .. } => ModelKind::LatentMixture,
        }
    }

    /// Reported scalars with their `q` marginals, labels sorted.
    pub fn marginals(&self, ds: &Dataset) -> Vec<NamedMarginal> {
        match self {
            FittedModel::OutcomeMixture { state, .. } => state.marginals(ds),
            FittedModel::LatentMixture { state, .. } => state.marginals(ds),
        }
    }

    pub fn point_estimates(&self, ds: &Dataset) -> Vec<(String, f64)> {
        match self {
            FittedModel::OutcomeMixture { state, .. } => state.point_estimates(ds),
            FittedModel::LatentMixture { state, .. } => state.point_estimates(ds),
        }
    }

    pub fn criteria(&self, ds: &Dataset, draws: usize, seed: u64) -> Result<CriteriaReport> {
        Ok(match self {
            FittedModel::OutcomeMixture { state, .. } => criteria_par(state, ds, draws, seed)?,
            FittedModel::LatentMixture { state, .. } => criteria_par(state, ds, draws, seed)?,
        })
    }

    pub fn posterior_predictive(&self, ds: &Dataset, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        Ok(match self {
            FittedModel::OutcomeMixture { state, .. } => posterior_predictive_par(state, ds, draws, seed)?,
            FittedModel::LatentMixture { state, .. } => posterior_predictive_par(state, ds, draws, seed)?,
        })
    }

    fn check_data(&self, ds: &Dataset) -> Result<()> {
        let (n, m) = match self {
            FittedModel::OutcomeMixture { state, .. } => (state.n(), state.m()),
            FittedModel::LatentMixture { state, .. } => (state.n(), state.m()),
        };
        if (n, m) != (ds.n(), ds.m()) {
            return Err(Error::Invalid(format!(
                "fit covers {n} rows x {m} outcomes but the data has {}",
                ds.describe()
            )));
        }
        Ok(())
    }
}

/// Contents of a fit JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema_version: u32,
    /// Column selection the fit was made with, so the data can be reloaded.
    pub columns: Columns,
    #[serde(flatten)]
    pub fitted: FittedModel,
    pub report: FitReport,
    /// `q` means and 95% credible intervals, labels sorted.
    pub estimates: Vec<Estimate>,
}

impl FitFile {
    pub fn new(columns: Columns, fitted: FittedModel, report: FitReport, ds: &Dataset) -> Result<Self> {
        let estimates = estimates(&fitted.marginals(ds), REPORT_LEVEL)?;
        Ok(Self { schema_version: SCHEMA_VERSION, columns, fitted, report, estimates })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: FitFile = read_json(path)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Config {
                path: path.to_path_buf(),
                message: format!("key \"schema_version\": expected {SCHEMA_VERSION}, got {}", f.schema_version),
            });
        }
        Ok(f)
    }

    /// Errors unless `ds` has the shape the fit was made on.
    pub fn check_data(&self, ds: &Dataset) -> Result<()> {
        self.fitted.check_data(ds)
    }
}
