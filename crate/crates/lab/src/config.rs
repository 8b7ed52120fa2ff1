use std::fmt;
use std::path::{Path, PathBuf};

use inflate_core::{OptConfig, PersistencyConfig};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const DESK_SAMPLES: usize = 5_000;
pub const FULL_SAMPLES: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Tangle of every outcome over a grid of gGHZ inputs and protocol parameters.
    Theorem1,
    /// Optimized GGM against tangle for three-qubit outputs.
    Scatter3,
    /// Optimized GGM against tangle for four-qubit outputs.
    Scatter4,
    /// Tangle extremes under a GGM floor on Haar inputs.
    TangleExtrema,
    /// Biased ensemble statistics for three- and four-qubit outputs.
    TablesBiased,
    /// Unbiased ensemble statistics for three- and four-qubit outputs.
    TablesUnbiased,
    /// Location of the unbiased optimum and the spread of its outcomes.
    UnbiasedObservation,
    /// Five-qubit states grown from different resource splits.
    ResourceDist,
    /// Cluster-state fidelity reachable with the generalized rank-2 family.
    ClusterFidelity,
    /// Persistency bounds of inflated four- and five-qubit states.
    PersistencyCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Self::Theorem1,
        Self::Scatter3,
        Self::Scatter4,
        Self::TangleExtrema,
        Self::TablesBiased,
        Self::TablesUnbiased,
        Self::UnbiasedObservation,
        Self::ResourceDist,
        Self::ClusterFidelity,
        Self::PersistencyCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Theorem1 => "theorem1",
            Self::Scatter3 => "scatter3",
            Self::Scatter4 => "scatter4",
            Self::TangleExtrema => "tangle-extrema",
            Self::TablesBiased => "tables-biased",
            Self::TablesUnbiased => "tables-unbiased",
            Self::UnbiasedObservation => "unbiased-observation",
            Self::ResourceDist => "resource-dist",
            Self::ClusterFidelity => "cluster-fidelity",
            Self::PersistencyCheck => "persistency-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ways of splitting five qubits between an initial entangled state and auxiliaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Haar four-qubit state plus one auxiliary.
    #[serde(rename = "4+1")]
    FourPlusOne,
    /// Haar three-qubit state plus two auxiliaries.
    #[serde(rename = "3ghz+1+1")]
    GhzPlusTwo,
    /// Random W-class state plus two auxiliaries.
    #[serde(rename = "3w+1+1")]
    WPlusTwo,
    /// Haar two-qubit state plus three auxiliaries.
    #[serde(rename = "2+1+1+1")]
    TwoPlusThree,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Self::FourPlusOne, Self::GhzPlusTwo, Self::WPlusTwo, Self::TwoPlusThree];

    pub fn label(self) -> &'static str {
        match self {
            Self::FourPlusOne => "4+1",
            Self::GhzPlusTwo => "3ghz+1+1",
            Self::WPlusTwo => "3w+1+1",
            Self::TwoPlusThree => "2+1+1+1",
        }
    }

    pub fn roman(self) -> &'static str {
        match self {
            Self::FourPlusOne => "i",
            Self::GhzPlusTwo => "ii",
            Self::WPlusTwo => "iii",
            Self::TwoPlusThree => "iv",
        }
    }

    pub fn initial_qubits(self) -> usize {
        match self {
            Self::FourPlusOne => 4,
            Self::GhzPlusTwo | Self::WPlusTwo => 3,
            Self::TwoPlusThree => 2,
        }
    }

    pub fn steps(self) -> usize {
        5 - self.initial_qubits()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Tolerances used when comparing summaries with reference tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckTolerances {
    pub ggm_mean: f64,
    pub ggm_std: f64,
    pub tangle_mean: f64,
    pub tangle_std: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self { ggm_mean: 0.02, ggm_std: 0.01, tangle_mean: 0.05, tangle_std: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_ranks")]
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub optimizer: OptConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Only read by `resource-dist`.
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub persistency: PersistencyConfig,
    #[serde(default)]
    pub tolerances: CheckTolerances,
}

fn default_samples() -> usize {
    DESK_SAMPLES
}

fn default_ranks() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            samples: DESK_SAMPLES,
            master_seed: 0,
            ranks: default_ranks(),
            optimizer: OptConfig::default(),
            output_dir: default_output_dir(),
            scenarios: default_scenarios(),
            persistency: PersistencyConfig::default(),
            tolerances: CheckTolerances::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Read { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(LabError::Config("samples must be at least 1".into()));
        }
        if self.ranks.is_empty() {
            return Err(LabError::Config("ranks must not be empty".into()));
        }
        if let Some(r) = self.ranks.iter().find(|r| !(2..=4).contains(*r)) {
            return Err(LabError::Config(format!("rank {r} is not one of 2, 3, 4")));
        }
        let mut sorted = self.ranks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.ranks.len() {
            return Err(LabError::Config("ranks must not repeat".into()));
        }
        if self.experiment == Experiment::ResourceDist && self.scenarios.is_empty() {
            return Err(LabError::Config("resource-dist needs at least one scenario".into()));
        }
        self.optimizer.validate().map_err(|e| LabError::Config(e.to_string()))?;
        let t = &self.tolerances;
        if [t.ggm_mean, t.ggm_std, t.tangle_mean, t.tangle_std].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(LabError::Config("tolerances must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Parses `2,3,4` style rank lists.
pub fn parse_ranks(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| LabError::Config(format!("bad rank '{t}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_every_field() {
        let mut cfg = ExperimentConfig::new(Experiment::ResourceDist);
        cfg.samples = 17;
        cfg.ranks = vec![2];
        cfg.scenarios = vec![Scenario::WPlusTwo];
        cfg.optimizer = OptConfig::with_grid(7, 2);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"resource-dist\""));
        assert!(text.contains("\"3w+1+1\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "theorem1"}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(Experiment::Theorem1));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "theorem1", "sample": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
        let mut cfg = ExperimentConfig::new(Experiment::Scatter3);
        cfg.samples = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        cfg.samples = 1;
        cfg.ranks = vec![5];
        assert!(cfg.validate().is_err());
        cfg.ranks = vec![2, 2];
        assert!(cfg.validate().is_err());
        cfg.ranks = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rank_lists_parse() {
        assert_eq!(parse_ranks("2,3,4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_ranks(" 4 ").unwrap(), vec![4]);
        assert!(parse_ranks("2,x").is_err());
    }

    #[test]
    fn scenarios_know_their_shapes() {
        for s in Scenario::ALL {
            assert_eq!(s.initial_qubits() + s.steps(), 5);
        }
        assert_eq!(Experiment::ALL.len(), 10);
        for e in Experiment::ALL {
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{e}\""));
        }
    }
}
