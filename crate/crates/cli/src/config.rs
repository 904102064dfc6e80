//! Experiment configuration: a TOML file, optionally overridden by flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pxaug_core::model::{ExponentialRate, NormalLocation};
use pxaug_core::survey::{AccuracyModel, PopulationSpec, Stratum};
use pxaug_core::{
    make_exponential_rate, make_normal_location, make_normal_variance_expansion,
    make_two_stage_normal, Density, ExpandedModel, MarginalFamily, QuadratureConfig,
    SimpleHypotheses,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("missing required field `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Affinity,
    Bound,
    RMeasure,
    Test,
    McSweep,
    Survey,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Affinity => "affinity",
            Command::Bound => "bound",
            Command::RMeasure => "r-measure",
            Command::Test => "test",
            Command::McSweep => "mc-sweep",
            Command::Survey => "survey",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    NormalLocation { sigma: f64 },
    ExponentialRate,
    TwoStageNormal { n1: usize, n2: usize, sigma: f64 },
    NormalVarianceExpansion { n: usize },
}

/// A built model: either a bare family for `t1` or a full expanded model.
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Marginal(Arc<dyn MarginalFamily>),
    Expanded(ExpandedModel),
}

impl BuiltModel {
    /// The family of `t1` alone (the original model for expanded ones).
    pub fn family(&self) -> &dyn MarginalFamily {
        match self {
            BuiltModel::Marginal(f) => f.as_ref(),
            BuiltModel::Expanded(em) => em.original(),
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel, ConfigError> {
        let bad = |e: pxaug_core::Error| invalid("model", e);
        Ok(match *self {
            ModelSpec::NormalLocation { sigma } => {
                let f: NormalLocation = make_normal_location(sigma).map_err(bad)?;
                BuiltModel::Marginal(Arc::new(f))
            }
            ModelSpec::ExponentialRate => {
                let f: ExponentialRate = make_exponential_rate();
                BuiltModel::Marginal(Arc::new(f))
            }
            ModelSpec::TwoStageNormal { n1, n2, sigma } => {
                BuiltModel::Expanded(make_two_stage_normal(n1, n2, sigma).map_err(bad)?)
            }
            ModelSpec::NormalVarianceExpansion { n } => {
                BuiltModel::Expanded(make_normal_variance_expansion(n).map_err(bad)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Uniform { lower: f64, upper: f64 },
    Gamma { shape: f64, scale: f64 },
    /// Two-column `grid,value` CSV; relative paths resolve against the config file.
    Tabulated { path: PathBuf },
}

impl DensitySpec {
    pub fn build(&self, field: &'static str, base: Option<&Path>) -> Result<Density, ConfigError> {
        let r = match self {
            DensitySpec::Normal { mean, sd } => Density::normal(*mean, *sd),
            DensitySpec::Exponential { rate } => Density::exponential(*rate),
            DensitySpec::Uniform { lower, upper } => Density::uniform(*lower, *upper),
            DensitySpec::Gamma { shape, scale } => Density::gamma(*shape, *scale),
            DensitySpec::Tabulated { path } => {
                let resolved = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Density::tabulated_from_path(resolved)
            }
        };
        r.map_err(|e| invalid(field, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesSpec {
    pub theta0: f64,
    pub theta1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinitySpec {
    pub f: DensitySpec,
    pub g: DensitySpec,
    /// Optional iid sample size for the product affinity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    #[default]
    Phi,
    Psi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub test: TestKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1_list: Option<Vec<f64>>,
}

fn default_replicates() -> usize {
    100_000
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self {
            replicates: default_replicates(),
            test: TestKind::Phi,
            theta1_list: None,
        }
    }
}

/// Observed statistics for a single test decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    pub t1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySpec {
    pub strata: Vec<Stratum>,
    pub attribute_prob_per_stratum: Vec<f64>,
    pub p_accurate: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

fn default_noise() -> f64 {
    1.0
}
fn default_quantile() -> f64 {
    1.0
}
fn default_replications() -> usize {
    1000
}

impl SurveySpec {
    pub fn population(&self, seed: u64) -> PopulationSpec {
        PopulationSpec {
            strata: self.strata.clone(),
            attribute_prob_per_stratum: self.attribute_prob_per_stratum.clone(),
            seed,
        }
    }

    pub fn accuracy(&self) -> Result<AccuracyModel, ConfigError> {
        AccuracyModel::new(self.p_accurate, self.noise_sd).map_err(|e| invalid("survey", e))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesesSpec>,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affinity: Option<AffinitySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub survey: Option<SurveySpec>,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Values given on the command line; each replaces the file value when set.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub abs_tol: Option<f64>,
    pub replicates: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::parse(&text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Applies flag overrides and pins the command.
    pub fn apply(&mut self, command: Command, o: &Overrides) -> Result<(), ConfigError> {
        match self.command {
            Some(c) if c != command => {
                return Err(invalid(
                    "command",
                    format!("config is for `{}` but `{}` was requested", c.name(), command.name()),
                ))
            }
            _ => self.command = Some(command),
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(format) = o.format {
            self.format = format;
        }
        if let Some(abs_tol) = o.abs_tol {
            self.quadrature.abs_tol = Some(abs_tol);
        }
        if let Some(replicates) = o.replicates {
            self.monte_carlo.get_or_insert_with(MonteCarloSpec::default).replicates = replicates;
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig, ConfigError> {
        let d = QuadratureConfig::default();
        let q = QuadratureConfig {
            abs_tol: self.quadrature.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.quadrature.rel_tol.unwrap_or(d.rel_tol),
            max_evaluations: self.quadrature.max_evaluations.unwrap_or(d.max_evaluations),
        };
        q.validate().map_err(|e| invalid("quadrature", e))?;
        Ok(q)
    }

    pub fn model(&self) -> Result<BuiltModel, ConfigError> {
        self.model.as_ref().ok_or(ConfigError::Missing("model"))?.build()
    }

    pub fn expanded_model(&self) -> Result<ExpandedModel, ConfigError> {
        match self.model()? {
            BuiltModel::Expanded(em) => Ok(em),
            BuiltModel::Marginal(_) => Err(invalid(
                "model.kind",
                "this command needs an expanded model (two_stage_normal or normal_variance_expansion)",
            )),
        }
    }

    pub fn hypotheses(&self) -> Result<SimpleHypotheses, ConfigError> {
        let h = self.hypotheses.ok_or(ConfigError::Missing("hypotheses"))?;
        SimpleHypotheses::new(h.theta0, h.theta1).map_err(|e| invalid("hypotheses", e))
    }

    pub fn theta0(&self) -> Result<f64, ConfigError> {
        Ok(self.hypotheses.ok_or(ConfigError::Missing("hypotheses"))?.theta0)
    }

    pub fn affinity_spec(&self) -> Result<&AffinitySpec, ConfigError> {
        self.affinity.as_ref().ok_or(ConfigError::Missing("affinity"))
    }

    pub fn monte_carlo(&self) -> MonteCarloSpec {
        self.monte_carlo.clone().unwrap_or_default()
    }

    pub fn survey_spec(&self) -> Result<&SurveySpec, ConfigError> {
        self.survey.as_ref().ok_or(ConfigError::Missing("survey"))
    }

    /// Checks every field the selected command will read.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let command = self.command.ok_or(ConfigError::Missing("command"))?;
        self.quadrature()?;
        match command {
            Command::Affinity => {
                let a = self.affinity_spec()?;
                a.f.build("affinity.f", self.base_dir.as_deref())?;
                a.g.build("affinity.g", self.base_dir.as_deref())?;
                if a.n == Some(0) {
                    return Err(invalid("affinity.n", "must be at least 1"));
                }
            }
            Command::Bound => {
                self.model()?;
                self.hypotheses()?;
            }
            Command::RMeasure => {
                self.expanded_model()?;
                self.hypotheses()?;
            }
            Command::Test | Command::McSweep => {
                let model = self.model()?;
                let mc = self.monte_carlo();
                if mc.test == TestKind::Psi && matches!(model, BuiltModel::Marginal(_)) {
                    return Err(invalid("monte_carlo.test", "psi needs an expanded model"));
                }
                if command == Command::Test {
                    self.hypotheses()?;
                    if let Some(obs) = self.observation {
                        if obs.t2.is_some() && matches!(model, BuiltModel::Marginal(_)) {
                            return Err(invalid("observation.t2", "t2 needs an expanded model"));
                        }
                    }
                } else {
                    let theta0 = self.theta0()?;
                    let list = mc
                        .theta1_list
                        .as_ref()
                        .ok_or(ConfigError::Missing("monte_carlo.theta1_list"))?;
                    if list.is_empty() {
                        return Err(invalid("monte_carlo.theta1_list", "list is empty"));
                    }
                    for &t in list {
                        SimpleHypotheses::new(theta0, t).map_err(|e| invalid("monte_carlo.theta1_list", e))?;
                    }
                }
                if self.observation.is_none() || command == Command::McSweep {
                    if mc.replicates < pxaug_core::monte_carlo::MIN_REPLICATES {
                        return Err(invalid(
                            "monte_carlo.replicates",
                            format!("must be at least {}", pxaug_core::monte_carlo::MIN_REPLICATES),
                        ));
                    }
                }
            }
            Command::Survey => {
                let s = self.survey_spec()?;
                s.population(self.seed).validate().map_err(|e| invalid("survey", e))?;
                s.accuracy()?;
                if !(s.quantile > 0.0 && s.quantile <= 1.0) {
                    return Err(invalid("survey.quantile", "must lie in (0, 1]"));
                }
                if s.replications < 10 {
                    return Err(invalid("survey.replications", "must be at least 10"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R_MEASURE: &str = r#"
command = "r-measure"
seed = 42
format = "json"

[model]
kind = "two_stage_normal"
n1 = 1
n2 = 1
sigma = 1.0

[hypotheses]
theta0 = 0.0
theta1 = 1.0
"#;

    fn parse(s: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(s, Path::new("test.toml"))
    }

    #[test]
    fn parses_and_validates() {
        let c = parse(R_MEASURE).unwrap();
        assert_eq!(c.command, Some(Command::RMeasure));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse(&format!("{R_MEASURE}\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = parse(&R_MEASURE.replace("sigma = 1.0", "sigma = 1.0\nmu = 2")).unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let c = parse(&R_MEASURE.replace("[hypotheses]\ntheta0 = 0.0\ntheta1 = 1.0\n", "")).unwrap();
        let err = c.validate().unwrap_err();
        assert!(matches!(err, ConfigError::Missing("hypotheses")));
    }

    #[test]
    fn toml_round_trip() {
        let c = parse(R_MEASURE).unwrap();
        assert_eq!(parse(&c.to_toml()).unwrap(), c);
        let mut s = parse(
            r#"
command = "survey"
[survey]
attribute_prob_per_stratum = [0.9, 0.1]
p_accurate = 1.0
strata = [
  { label = "a", size = 100, value_mean = 0.0, value_sd = 1.0 },
  { label = "b", size = 100, value_mean = 10.0, value_sd = 1.0 },
]
[monte_carlo]
replicates = 500
theta1_list = [0.5, 1.0]
[affinity]
n = 3
f = { kind = "normal", mean = 0.0, sd = 1.0 }
g = { kind = "tabulated", path = "g.csv" }
"#,
        )
        .unwrap();
        s.quadrature.abs_tol = Some(1e-10);
        assert_eq!(parse(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn overrides_apply() {
        let mut c = parse(R_MEASURE).unwrap();
        let o = Overrides {
            seed: Some(7),
            abs_tol: Some(1e-11),
            replicates: Some(1234),
            format: Some(Format::Csv),
            out: None,
        };
        c.apply(Command::RMeasure, &o).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.quadrature().unwrap().abs_tol, 1e-11);
        assert_eq!(c.monte_carlo().replicates, 1234);
        assert_eq!(c.format, Format::Csv);
        assert!(c.apply(Command::Survey, &o).is_err());
    }

    #[test]
    fn psi_requires_expanded_model() {
        let c = parse(
            r#"
command = "test"
model = { kind = "normal_location", sigma = 1.0 }
hypotheses = { theta0 = 0.0, theta1 = 1.0 }
monte_carlo = { test = "psi" }
"#,
        )
        .unwrap();
        assert!(matches!(
            c.validate().unwrap_err(),
            ConfigError::Invalid { field: "monte_carlo.test", .. }
        ));
    }
}
