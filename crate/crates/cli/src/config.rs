//! Experiment configuration files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spreadbound::bounds::CovarianceSign;
use spreadbound::description::ModelDescription;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown system {0:?}")]
    UnknownSystem(String),
    #[error("no systems requested")]
    NoSystems,
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid initial condition: {0}")]
    Initial(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: String,
    /// Free text; shipped configs use it to document their rate choices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub grid: GridSpec,
    pub systems: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Covariance signs keyed `"A,B"`; defaults to the catalog ledger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<BTreeMap<String, CovarianceSign>>,
    #[serde(default)]
    pub integration: IntegrationSpec,
    #[serde(default)]
    pub containment: ContainmentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Catalog {
        catalog: String,
        params: BTreeMap<String, f64>,
        graph: GraphConfig,
    },
    Inline {
        description: ModelDescription,
    },
    File {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    /// Seed defaults to the experiment seed.
    ErdosRenyi { n: usize, p: f64, seed: Option<u64> },
    Complete { n: usize },
    Path { n: usize },
    Explicit { n: usize, edges: Vec<[usize; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    /// `"all:<compartment>"`.
    All(String),
    /// One compartment name per node.
    PerNode(Vec<String>),
    Product { product: ProductSpec },
    Seeded { seeded: SeededSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProductSpec {
    /// The same distribution on every node.
    Uniform(BTreeMap<String, f64>),
    PerNode(Vec<BTreeMap<String, f64>>),
}

/// `count` nodes chosen with the experiment seed start in `compartment`, the rest in `background`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeededSpec {
    pub compartment: String,
    pub count: usize,
    pub background: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationSpec {
    pub max_step: f64,
    pub clip: bool,
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        Self {
            max_step: 0.01,
            clip: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationSpec {
    PerNode,
    GraphMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContainmentSpec {
    pub enabled: bool,
    /// Absolute slack for exact references (Monte Carlo adds `4 * stderr`).
    pub tolerance: f64,
    pub exact_aggregation: AggregationSpec,
    pub mc_aggregation: AggregationSpec,
    /// Bounding outputs to check; empty means all of them.
    pub check: Vec<String>,
}

impl Default for ContainmentSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            tolerance: 1e-4,
            exact_aggregation: AggregationSpec::PerNode,
            mc_aggregation: AggregationSpec::GraphMean,
            check: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SystemSpec {
    Generic,
    Refined,
    MeanField,
    Adhoc(String),
    Exact,
    Mc(usize),
    /// Post-processing of every bounding output.
    Eliminated,
    /// Intersection of every bounding output, eliminated ones included.
    Combined,
}

impl FromStr for SystemSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::UnknownSystem(s.to_string());
        Ok(match s {
            "generic" => SystemSpec::Generic,
            "refined" => SystemSpec::Refined,
            "mean_field" => SystemSpec::MeanField,
            "exact" => SystemSpec::Exact,
            "eliminated" => SystemSpec::Eliminated,
            "combined" => SystemSpec::Combined,
            _ => {
                if let Some(v) = s.strip_prefix("adhoc:") {
                    if v.is_empty() {
                        return Err(bad());
                    }
                    SystemSpec::Adhoc(v.to_string())
                } else if let Some(k) = s.strip_prefix("mc:") {
                    let trials: usize = k.parse().map_err(|_| bad())?;
                    if trials == 0 {
                        return Err(bad());
                    }
                    SystemSpec::Mc(trials)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        // model files are resolved next to the config
        if let ModelSpec::File { file } = &mut cfg.model {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(cfg)
    }

    /// Parsed system list, deduplicated, in request order.
    pub fn system_specs(&self) -> Result<Vec<SystemSpec>, ConfigError> {
        let mut out: Vec<SystemSpec> = Vec::new();
        for s in &self.systems {
            let spec: SystemSpec = s.parse()?;
            if !out.contains(&spec) {
                out.push(spec);
            }
        }
        if out.is_empty() {
            return Err(ConfigError::NoSystems);
        }
        Ok(out)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        self.system_specs()?;
        let g = &self.grid;
        if !(g.start.is_finite() && g.end.is_finite() && g.end >= g.start) {
            return Err(ConfigError::Grid(format!("need start <= end, got [{}, {}]", g.start, g.end)));
        }
        if !(g.step.is_finite() && g.step > 0.0) {
            return Err(ConfigError::Grid(format!("step must be positive, got {}", g.step)));
        }
        if !(self.integration.max_step.is_finite() && self.integration.max_step > 0.0) {
            return Err(ConfigError::Invalid("integration.max_step must be positive".into()));
        }
        if !(self.containment.tolerance >= 0.0) {
            return Err(ConfigError::Invalid("containment.tolerance must be nonnegative".into()));
        }
        if self.label.is_empty() || self.label.contains(['/', '\\']) {
            return Err(ConfigError::Invalid(format!("label {:?} is not usable in file names", self.label)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (after command-line overrides).
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIS: &str = r#"{
        "label": "sis",
        "model": {"catalog": "SIS", "params": {"beta": 0.3, "delta": 1.0},
                  "graph": {"kind": "erdos_renyi", "n": 10, "p": 0.2}},
        "initial": {"seeded": {"compartment": "I", "count": 2, "background": "S"}},
        "grid": {"end": 5.0, "step": 0.1},
        "systems": ["generic", "refined", "mc:10", "combined"]
    }"#;

    #[test]
    fn parses_and_hashes() {
        let cfg = ExperimentConfig::from_json(SIS).unwrap();
        assert_eq!(
            cfg.system_specs().unwrap(),
            vec![SystemSpec::Generic, SystemSpec::Refined, SystemSpec::Mc(10), SystemSpec::Combined]
        );
        assert_eq!(cfg.hash(), ExperimentConfig::from_json(SIS).unwrap().hash());
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(cfg.hash(), other.hash());
        assert!(matches!(cfg.model, ModelSpec::Catalog { .. }));
        assert_eq!(cfg.containment.tolerance, 1e-4);
    }

    #[test]
    fn initial_forms() {
        let all: InitialSpec = serde_json::from_str(r#""all:S""#).unwrap();
        assert_eq!(all, InitialSpec::All("all:S".into()));
        let nodes: InitialSpec = serde_json::from_str(r#"["I", "S"]"#).unwrap();
        assert!(matches!(nodes, InitialSpec::PerNode(_)));
        let p: InitialSpec = serde_json::from_str(r#"{"product": {"S": 0.9, "I": 0.1}}"#).unwrap();
        assert!(matches!(p, InitialSpec::Product { product: ProductSpec::Uniform(_) }));
    }

    #[test]
    fn rejects_bad_systems_and_grids() {
        for s in ["mc:0", "mc:x", "adhoc:", "everything"] {
            assert!(s.parse::<SystemSpec>().is_err(), "{s}");
        }
        let no_systems = SIS.replace(r#"["generic", "refined", "mc:10", "combined"]"#, "[]");
        assert!(matches!(ExperimentConfig::from_json(&no_systems), Err(ConfigError::NoSystems)));
        let bad_grid = SIS.replace(r#""step": 0.1"#, r#""step": -0.1"#);
        assert!(matches!(ExperimentConfig::from_json(&bad_grid), Err(ConfigError::Grid(_))));
        let unknown = SIS.replace(r#""seed""#, r#""sead""#).replace(r#""label""#, r#""sead": 1, "label""#);
        assert!(ExperimentConfig::from_json(&unknown).is_err());
    }
}
