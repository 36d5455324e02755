//! Run configuration: a JSON file merged with command-line overrides.

use std::path::Path;

use liekernels::gp::{Hyperparameters, KernelKind};
use liekernels::kernels::SpectralDensity;
use liekernels::spaces::{MetricScale, SpaceId};
use liekernels::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Unit,
    Killing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Heat,
    Matern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub space: String,
    pub kernel: Kind,
    pub nu: Option<f64>,
    pub kappa: f64,
    pub sigma2: f64,
    pub budget: usize,
    /// Number of random phases `L`.
    pub features: usize,
    pub seed: Option<u64>,
    pub metric: Option<Metric>,
    /// Observation noise variance for `sample --data` and `regress`.
    pub noise: f64,
    pub fit: bool,
    pub count: usize,
    /// Query grid size for `regress` when no query file is given.
    pub grid: usize,
    pub budgets: Vec<usize>,
    pub feature_ladder: Vec<usize>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            space: "S2".into(),
            kernel: Kind::Heat,
            nu: None,
            kappa: 0.5,
            sigma2: 1.0,
            budget: 20,
            features: 512,
            seed: None,
            metric: None,
            noise: 0.01,
            fit: false,
            count: 1,
            grid: 200,
            budgets: vec![5, 10, 20, 40],
            feature_ladder: Vec::new(),
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn space_id(&self) -> Result<SpaceId> {
        let space: SpaceId = self.space.parse()?;
        match self.metric {
            None => Ok(space),
            Some(Metric::Unit) => space.with_metric(MetricScale::Unit),
            Some(Metric::Killing) => space.with_metric(MetricScale::Killing),
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self.kernel {
            Kind::Heat => KernelKind::Heat,
            Kind::Matern => KernelKind::Matern,
        }
    }

    pub fn density(&self) -> Result<SpectralDensity> {
        match self.kernel {
            Kind::Heat => SpectralDensity::heat(self.kappa, self.sigma2),
            Kind::Matern => {
                let nu = self.nu.ok_or_else(|| Error::Config("the matern kernel needs nu".into()))?;
                SpectralDensity::matern(nu, self.kappa, self.sigma2)
            }
        }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters { nu: self.nu, kappa: self.kappa, sigma2: self.sigma2, noise: self.noise }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("this command is stochastic and needs a seed (--seed or \"seed\")".into()))
    }

    /// Checks everything that does not depend on input files.
    pub fn validate(&self) -> Result<()> {
        self.space_id()?;
        self.density()?;
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.features == 0 {
            return Err(Error::Config("features must be at least 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be a finite non-negative variance, got {}", self.noise)));
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(Error::Config("budgets must be a non-empty list of positive integers".into()));
        }
        if self.feature_ladder.contains(&0) {
            return Err(Error::Config("feature_ladder entries must be positive".into()));
        }
        Ok(())
    }
}
