//! Flat TOML experiment configuration. Every key is optional except `experiment`; unset keys
//! resolve to per-experiment defaults, and the resolved table is echoed into the manifest.

use std::path::{Path, PathBuf};

use glorenz::experiments::{LoglawConfig, RecurrenceConfig, SandwichConfig};
use glorenz::statistics::dyadic_radii;
use glorenz::statistics::McOptions;
use glorenz::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    Density,
    Srb,
    Correlations,
    HittingMap,
    HittingFlow,
    Recurrence,
    Dimension,
    Saussol,
    Report,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Density => "density",
            Experiment::Srb => "srb",
            Experiment::Correlations => "correlations",
            Experiment::HittingMap => "hitting-map",
            Experiment::HittingFlow => "hitting-flow",
            Experiment::Recurrence => "recurrence",
            Experiment::Dimension => "dimension",
            Experiment::Saussol => "saussol",
            Experiment::Report => "report",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Experiment::Correlations
                | Experiment::HittingMap
                | Experiment::HittingFlow
                | Experiment::Recurrence
                | Experiment::Dimension
        )
    }
}

/// Which skew product the map-level experiments run on. The oracles ignore the model keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    /// The geometric Lorenz return map built from the model parameters.
    Model,
    /// Doubling map × fiber contraction 1/2 (Lebesgue invariant, dimension 2).
    Baker,
    /// Doubling map × fiber contraction 1/3 (dimension 1 + ln 2 / ln 3).
    Cantor,
}

/// The resolved configuration: what the manifest records and what reproduces a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub system: System,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub threads: Option<usize>,

    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub theta: f64,
    pub sigma: f64,
    pub g_offset_plus: f64,
    pub g_offset_minus: f64,
    pub outer_travel_time: f64,

    /// x-cells of the Ulam grid and of leaf families.
    pub n: usize,
    /// y-cells of leaf families.
    pub m: usize,
    pub radii: Vec<f64>,
    pub targets: usize,
    pub starts: usize,
    /// Iteration cap (map) or flow-time cap (flow) before a start is censored.
    pub cap: f64,
    pub occupation_iterates: u64,
    pub occupation_chunks: usize,
    /// Correlation lags, trajectories and per-trajectory averaging window.
    pub n_max: usize,
    pub trajectories: usize,
    pub window: usize,
    /// Observable pairs as "f:g" with f, g in {x, y, x+y}.
    pub pairs: Vec<String>,
    /// Pushforward iterates of Lebesgue in the leaf-variation sweep.
    pub steps: usize,
    /// Recurrence points / local-dimension points.
    pub points: usize,
    pub recurrence_window: usize,
    pub sandwich_targets: usize,
    pub sandwich_starts: usize,
    pub sandwich_radius: f64,
    pub birkhoff_returns: usize,
}

/// Keys a config file may set; anything else is a named ConfigError.
const KEYS: &[&str] = &[
    "experiment",
    "system",
    "seed",
    "out",
    "threads",
    "lambda1",
    "lambda2",
    "lambda3",
    "theta",
    "sigma",
    "g_offset_plus",
    "g_offset_minus",
    "outer_travel_time",
    "n",
    "m",
    "radii",
    "targets",
    "starts",
    "cap",
    "occupation_iterates",
    "occupation_chunks",
    "n_max",
    "trajectories",
    "window",
    "pairs",
    "steps",
    "points",
    "recurrence_window",
    "sandwich_targets",
    "sandwich_starts",
    "sandwich_radius",
    "birkhoff_returns",
];

impl ExperimentConfig {
    /// Defaults for `experiment`, before any file or flag overrides.
    pub fn defaults(experiment: Experiment) -> Self {
        let p = ModelParams::default();
        let loglaw = LoglawConfig::default();
        let rec = RecurrenceConfig::default();
        let sandwich = SandwichConfig::default();
        let mc = McOptions::default();
        let radii = match experiment {
            Experiment::Recurrence => rec.radii.clone(),
            Experiment::Dimension => dyadic_radii(6, 18),
            _ => loglaw.radii.clone(),
        };
        let (n, m, occupation_iterates) = match experiment {
            Experiment::Density => (4096, 1, loglaw.occupation_iterates),
            Experiment::Dimension => (4096, 64, 25_000_000),
            _ => (512, 512, loglaw.occupation_iterates),
        };
        ExperimentConfig {
            experiment,
            system: System::Model,
            seed: None,
            out: PathBuf::from("out"),
            threads: None,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            lambda3: p.lambda3,
            theta: p.theta,
            sigma: p.sigma,
            g_offset_plus: p.g_offset_plus,
            g_offset_minus: p.g_offset_minus,
            outer_travel_time: p.outer_travel_time,
            n,
            m,
            radii,
            targets: loglaw.targets,
            starts: loglaw.starts,
            cap: loglaw.cap,
            occupation_iterates,
            occupation_chunks: loglaw.occupation_chunks,
            n_max: mc.n_max,
            trajectories: mc.trajectories,
            window: mc.window,
            pairs: vec!["x:x".into(), "y:x".into(), "x+y:y".into()],
            steps: 30,
            points: match experiment {
                Experiment::Dimension => 5,
                _ => rec.points,
            },
            recurrence_window: rec.window,
            sandwich_targets: sandwich.targets,
            sandwich_starts: sandwich.starts,
            sandwich_radius: sandwich.radius,
            birkhoff_returns: sandwich.birkhoff_returns,
        }
    }

    /// Parses a flat config, or the `[config]` table of a manifest from an earlier run.
    #[cfg(test)]
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        Self::resolve(Some(text), None)
    }

    /// Resolves file contents (if any) with an explicit experiment taking precedence.
    pub fn resolve(text: Option<&str>, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let mut table: toml::Table = match text {
            Some(t) => t.parse().map_err(|e: toml::de::Error| {
                CliError::config("<file>", e.message().to_string())
            })?,
            None => toml::Table::new(),
        };
        if let Some(toml::Value::Table(inner)) = table.remove("config") {
            table = inner;
        }
        if let Some(key) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::config(key, "unknown key"));
        }
        if let Some(e) = experiment {
            table.insert("experiment".into(), e.id().into());
        }
        let experiment: Experiment = match table.get("experiment") {
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|_| CliError::config("experiment", format!("unknown experiment {v}")))?,
            None => return Err(CliError::config("experiment", "missing")),
        };
        let mut base =
            toml::Table::try_from(Self::defaults(experiment)).expect("config serializes");
        // overlay one key at a time so a type error names the offending key
        for (k, v) in table {
            base.insert(k.clone(), v);
            if let Err(e) = toml::Value::Table(base.clone()).try_into::<Self>() {
                return Err(CliError::config(k, e.message().to_string()));
            }
        }
        toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config("<file>", e.message().to_string()))
    }

    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        Self::resolve(Some(&text), experiment)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let counts: [(&str, u64); 15] = [
            ("n", self.n as u64),
            ("m", self.m as u64),
            ("targets", self.targets as u64),
            ("starts", self.starts as u64),
            ("occupation_iterates", self.occupation_iterates),
            ("occupation_chunks", self.occupation_chunks as u64),
            ("n_max", self.n_max as u64),
            ("trajectories", self.trajectories as u64),
            ("window", self.window as u64),
            ("steps", self.steps as u64),
            ("points", self.points as u64),
            ("recurrence_window", self.recurrence_window as u64),
            ("sandwich_targets", self.sandwich_targets as u64),
            ("sandwich_starts", self.sandwich_starts as u64),
            ("birkhoff_returns", self.birkhoff_returns as u64),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v < 1) {
            return Err(CliError::config(*k, "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        if self.cap.is_nan() || self.cap < 1.0 {
            return Err(CliError::config("cap", "must be at least 1"));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(CliError::config(
                "radii",
                "must be a non-empty list of positive numbers",
            ));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::config("radii", "must be strictly decreasing"));
        }
        if !(self.sandwich_radius > 0.0 && self.sandwich_radius < 0.5) {
            return Err(CliError::config("sandwich_radius", "must lie in (0, 1/2)"));
        }
        if let Some(p) = self.pairs.iter().find(|p| parse_pair(p).is_none()) {
            return Err(CliError::config(
                "pairs",
                format!("cannot parse observable pair {p:?}"),
            ));
        }
        if self.experiment.is_stochastic() && self.seed.is_none() {
            return Err(CliError::config(
                "seed",
                format!("required for experiment {}", self.experiment.id()),
            ));
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            theta: self.theta,
            sigma: self.sigma,
            g_offset_plus: self.g_offset_plus,
            g_offset_minus: self.g_offset_minus,
            outer_travel_time: self.outer_travel_time,
        }
    }

    pub fn loglaw(&self) -> LoglawConfig {
        LoglawConfig {
            targets: self.targets,
            starts: self.starts,
            radii: self.radii.clone(),
            cap: self.cap,
            occupation_iterates: self.occupation_iterates,
            occupation_chunks: self.occupation_chunks,
        }
    }

    pub fn recurrence(&self) -> RecurrenceConfig {
        RecurrenceConfig {
            points: self.points,
            radii: self.radii.clone(),
            cap: self.cap as u64,
            window: self.recurrence_window,
        }
    }

    pub fn sandwich(&self) -> SandwichConfig {
        SandwichConfig {
            targets: self.sandwich_targets,
            starts: self.sandwich_starts,
            radius: self.sandwich_radius,
            cap: self.cap as u64,
            birkhoff_returns: self.birkhoff_returns,
        }
    }

    pub fn mc(&self) -> McOptions {
        McOptions {
            n_max: self.n_max,
            trajectories: self.trajectories,
            window: self.window,
            ..McOptions::default()
        }
    }

    pub fn to_toml(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes")
    }
}

pub fn parse_pair(s: &str) -> Option<(glorenz::statistics::Linear, glorenz::statistics::Linear)> {
    let (f, g) = s.split_once(':')?;
    Some((
        glorenz::statistics::Linear::parse(f.trim())?,
        glorenz::statistics::Linear::parse(g.trim())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = ExperimentConfig::from_toml_str("experiment = \"hitting-map\"\nseed = 3").unwrap();
        assert_eq!(c.radii, dyadic_radii(6, 12));
        assert_eq!(c.starts, 200);
        c.validate().unwrap();
    }

    #[test]
    fn named_config_errors() {
        let field =
            |text: &str| match ExperimentConfig::from_toml_str(text).and_then(|c| c.validate()) {
                Err(CliError::Config { field, .. }) => field,
                other => panic!("{other:?}"),
            };
        assert_eq!(field("experiment = \"validate\"\nbogus = 1"), "bogus");
        assert_eq!(field("seed = 1"), "experiment");
        assert_eq!(field("experiment = \"hitting-map\""), "seed");
        assert_eq!(
            field("experiment = \"hitting-map\"\nseed = 1\nradii = [0.1, 0.2]"),
            "radii"
        );
        assert_eq!(field("experiment = \"density\"\nn = 0"), "n");
        assert_eq!(field("experiment = \"density\"\nn = \"many\""), "n");
        assert_eq!(
            field("experiment = \"correlations\"\nseed = 1\npairs = [\"x:z\"]"),
            "pairs"
        );
    }

    #[test]
    fn manifest_config_table_round_trips() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"recurrence\"\nseed = 9\nsystem = \"baker\"",
        )
        .unwrap();
        let mut manifest = toml::Table::new();
        manifest.insert("library_version".into(), "x".into());
        manifest.insert("config".into(), toml::Value::Table(c.to_toml()));
        let back = ExperimentConfig::from_toml_str(&toml::to_string(&manifest).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
