use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

/// Population mean and standard deviation; `(NaN, NaN)` when empty.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Statistics for one (qubits, rank, outcome, scenario) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub qubits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// 1-based outcome label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub samples: usize,
    pub ggm_mean: f64,
    pub ggm_std: f64,
    pub tangle_mean: f64,
    pub tangle_std: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl GroupSummary {
    pub fn from_samples(label: impl Into<String>, qubits: usize, ggm: &[f64], tangle: &[f64]) -> Self {
        let (ggm_mean, ggm_std) = mean_std(ggm);
        let (tangle_mean, tangle_std) = mean_std(tangle);
        Self {
            label: label.into(),
            qubits,
            rank: None,
            outcome: None,
            scenario: None,
            samples: ggm.len(),
            ggm_mean,
            ggm_std,
            tangle_mean,
            tangle_std,
            extra: BTreeMap::new(),
        }
    }

    pub fn rank(mut self, rank: usize) -> Self {
        self.rank = Some(rank);
        self
    }

    pub fn outcome(mut self, outcome: usize) -> Self {
        self.outcome = Some(outcome);
        self
    }

    pub fn scenario(mut self, scenario: Scenario) -> Self {
        self.scenario = Some(scenario);
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }
}

/// One pass/fail comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub passed: bool,
}

impl Check {
    /// `|observed - expected| <= tolerance`.
    pub fn near(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        let passed = (observed - expected).abs() <= tolerance;
        Self { name: name.into(), observed, expected: Some(expected), tolerance: Some(tolerance), passed }
    }

    /// A condition summarized by one observed number.
    pub fn holds(name: impl Into<String>, observed: f64, passed: bool) -> Self {
        Self { name: name.into(), observed, expected: None, tolerance: None, passed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub groups: Vec<GroupSummary>,
    pub checks: Vec<Check>,
    /// Data files written next to the summary, relative to the output directory.
    pub files: Vec<String>,
}

impl SummaryReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: config.experiment,
            config: config.clone(),
            groups: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.failed_checks().next().is_none()
    }

    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
