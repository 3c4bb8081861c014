//! Flat TOML configuration files and their defaults.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use aft_integrative::sim::{
    Correlation, SimConfig, SparsityModel, HIGH_SIGNAL_SD, LOW_SIGNAL_SD,
};
use aft_integrative::tuning::{LambdaGrid, Method, TuneGrid};

/// Simulation settings. Every key is optional; missing keys take the
/// defaults printed by `aftint defaults simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimFile {
    /// Setting label in benchmark files; ignored by `simulate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub studies: usize,
    pub n_per_study: usize,
    pub p: usize,
    /// `ar<rho>` or `banded<level>`, e.g. `ar0.5`, `banded2`.
    pub correlation: String,
    /// `homogeneity` or `heterogeneity`.
    pub sparsity: String,
    /// Coefficient sd, or the words `low` / `high` for the two designs.
    pub signal: Signal,
    pub intercept: f64,
    pub target_censoring: f64,
    pub support_size: usize,
    pub shared_support: usize,
    pub shared_values: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Signal {
    Named(String),
    Sd(f64),
}

impl Signal {
    fn sd(&self) -> Result<f64> {
        match self {
            Signal::Sd(v) => Ok(*v),
            Signal::Named(s) => match s.as_str() {
                "low" => Ok(LOW_SIGNAL_SD),
                "high" => Ok(HIGH_SIGNAL_SD),
                _ => bail!("unknown signal '{s}'; use low, high or a number"),
            },
        }
    }
}

impl Default for SimFile {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            label: None,
            studies: d.studies,
            n_per_study: d.n_per_study,
            p: d.p,
            correlation: d.correlation.to_string(),
            sparsity: d.sparsity.to_string(),
            signal: Signal::Named("low".into()),
            intercept: d.intercept,
            target_censoring: d.target_censoring,
            support_size: d.support_size,
            shared_support: d.shared_support,
            shared_values: d.shared_values,
            seed: d.seed,
        }
    }
}

impl SimFile {
    pub fn to_config(&self) -> Result<SimConfig> {
        let correlation: Correlation = self
            .correlation
            .parse()
            .context("invalid 'correlation' in simulation config")?;
        let sparsity: SparsityModel = self
            .sparsity
            .parse()
            .context("invalid 'sparsity' in simulation config")?;
        let config = SimConfig {
            studies: self.studies,
            n_per_study: self.n_per_study,
            p: self.p,
            correlation,
            sparsity,
            signal_sd: self.signal.sd()?,
            intercept: self.intercept,
            target_censoring: self.target_censoring,
            support_size: self.support_size,
            shared_support: self.shared_support,
            shared_values: self.shared_values,
            seed: self.seed,
        };
        config.validate().context("invalid simulation config")?;
        Ok(config)
    }
}

/// Tuning settings shared by fit, cv, evaluate and benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneFile {
    /// Path length for glasso, gmcp, gscad, meta and pooled.
    pub lambda_length: usize,
    /// Path length per ratio for cmcp and sgmcp.
    pub lambda_length_two: usize,
    /// Smallest λ as a fraction of λ_max.
    pub lambda_ratio: f64,
    pub a_values: Vec<f64>,
    /// λ_O/λ_I for cmcp, λ₂/λ₁ for sgmcp.
    pub ratios: Vec<f64>,
    pub folds: usize,
}

impl Default for TuneFile {
    fn default() -> Self {
        let single = TuneGrid::for_method(Method::Gmcp);
        let double = TuneGrid::for_method(Method::Cmcp);
        let len = |g: &TuneGrid| match g.lambdas {
            LambdaGrid::Relative { length, .. } => length,
            LambdaGrid::Explicit(ref l) => l.len(),
        };
        let ratio = match single.lambdas {
            LambdaGrid::Relative { ratio, .. } => ratio,
            LambdaGrid::Explicit(_) => 0.05,
        };
        Self {
            lambda_length: len(&single),
            lambda_length_two: len(&double),
            lambda_ratio: ratio,
            a_values: single.a_values,
            ratios: single.ratios,
            folds: single.n_folds,
        }
    }
}

impl TuneFile {
    pub fn path_length(&self, method: Method) -> usize {
        if method.is_two_parameter() {
            self.lambda_length_two
        } else {
            self.lambda_length
        }
    }

    pub fn grid(&self, method: Method) -> Result<TuneGrid> {
        let grid = TuneGrid {
            lambdas: LambdaGrid::Relative {
                length: self.path_length(method),
                ratio: self.lambda_ratio,
            },
            a_values: self.a_values.clone(),
            ratios: self.ratios.clone(),
            n_folds: self.folds,
        };
        grid.validate().context("invalid tuning config")?;
        if grid.a_values_for(method).is_empty() {
            bail!("no a value in the tuning config is valid for {method}");
        }
        Ok(grid)
    }
}

/// Benchmark file: replicate count, methods and the list of settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkFile {
    pub replicates: usize,
    pub methods: Vec<String>,
    pub setting: Vec<SimFile>,
}

impl Default for BenchmarkFile {
    /// The 24 published designs: two sparsity models, six correlation
    /// structures and two signal levels, 200 replicates each.
    fn default() -> Self {
        let mut setting = Vec::new();
        let mut seed = 1;
        for sparsity in ["homogeneity", "heterogeneity"] {
            for correlation in ["ar0.2", "ar0.5", "ar0.8", "banded1", "banded2", "banded3"] {
                for signal in ["low", "high"] {
                    setting.push(SimFile {
                        correlation: correlation.into(),
                        sparsity: sparsity.into(),
                        signal: Signal::Named(signal.into()),
                        seed,
                        ..SimFile::default()
                    });
                    seed += 1;
                }
            }
        }
        Self {
            replicates: 200,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            setting,
        }
    }
}

impl BenchmarkFile {
    pub fn settings(&self) -> Result<Vec<(String, SimConfig)>> {
        if self.setting.is_empty() {
            bail!("benchmark config lists no [[setting]] tables");
        }
        let mut out = Vec::with_capacity(self.setting.len());
        for (i, s) in self.setting.iter().enumerate() {
            let config = s
                .to_config()
                .with_context(|| format!("benchmark setting {}", i + 1))?;
            let label = s.label.clone().unwrap_or_else(|| config.label());
            if out.iter().any(|(l, _): &(String, SimConfig)| *l == label) {
                bail!("duplicate benchmark setting label '{label}'");
            }
            out.push((label, config));
        }
        Ok(out)
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods
            .iter()
            .map(|m| m.parse::<Method>().map_err(anyhow::Error::from))
            .collect()
    }
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    Ok(toml::to_string(value)?)
}
