//! JSON model description files.
//!
//! ```json
//! {
//!   "compartments": ["S", "I"],
//!   "n": 3,
//!   "internal": [{"node": "all", "from": "I", "to": "S", "delta": 0.5}],
//!   "external": [{"from": "S", "to": "I", "affectors": ["I"],
//!                 "beta": {"mode": "graph", "value": 0.3}}],
//!   "graph": {"kind": "explicit", "edges": [[0, 1], [1, 2]]}
//! }
//! ```
//!
//! `beta.value` is either one number (used for every affector) or an object
//! keyed by affector. Explicit couplings are `{"mode": "explicit", "entries":
//! [{"i": 0, "j": 1, "affector": "I", "value": 0.3}]}` where `j` acts on `i`.
//! Parsing is strict: unknown fields are rejected.

use crate::graph::{Graph, GraphError};
use crate::model::{
    CompartmentalModel, NodeSelector, RawBeta, RawCoupling, RawExternal, RawInternal, RawModel,
    ValidationError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DescriptionError {
    #[error("malformed model description: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("internal transition node selector must be an index or \"all\", got {0:?}")]
    BadNodeSelector(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescription {
    pub compartments: Vec<String>,
    pub n: usize,
    #[serde(default)]
    pub internal: Vec<InternalDecl>,
    #[serde(default)]
    pub external: Vec<ExternalDecl>,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeField {
    Index(usize),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalDecl {
    pub node: NodeField,
    pub from: String,
    pub to: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalDecl {
    pub from: String,
    pub to: String,
    pub affectors: Vec<String>,
    pub beta: BetaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSpec {
    Graph { value: BetaValue },
    Explicit { entries: Vec<CouplingDecl> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaValue {
    Uniform(f64),
    PerAffector(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingDecl {
    pub i: usize,
    pub j: usize,
    pub affector: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    ErdosRenyi { n: usize, p: f64, seed: u64 },
    Explicit { edges: Vec<[usize; 2]> },
}

impl GraphSpec {
    /// Realizes the graph; explicit graphs take their node count from the model.
    pub fn realize(&self, n: usize) -> Result<Graph, GraphError> {
        match self {
            GraphSpec::ErdosRenyi { n, p, seed } => Graph::erdos_renyi(*n, *p, *seed),
            GraphSpec::Explicit { edges } => Graph::new(n, edges.iter().map(|e| (e[0], e[1]))),
        }
    }
}

impl ModelDescription {
    pub fn from_json(text: &str) -> Result<Self, DescriptionError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_raw(&self) -> Result<RawModel, DescriptionError> {
        let graph = self.graph.as_ref().map(|g| g.realize(self.n)).transpose()?;
        let mut raw = RawModel::new(self.compartments.iter().cloned(), self.n);
        raw.graph = graph;
        for d in &self.internal {
            let node = match &d.node {
                NodeField::Index(i) => NodeSelector::Node(*i),
                NodeField::Keyword(k) if k == "all" => NodeSelector::All,
                NodeField::Keyword(k) => return Err(DescriptionError::BadNodeSelector(k.clone())),
            };
            raw.internal.push(RawInternal {
                node,
                from: d.from.clone(),
                to: d.to.clone(),
                delta: d.delta,
            });
        }
        for d in &self.external {
            let beta = match &d.beta {
                BetaSpec::Graph { value: BetaValue::Uniform(v) } => {
                    RawBeta::Graph(d.affectors.iter().map(|a| (a.clone(), *v)).collect())
                }
                BetaSpec::Graph { value: BetaValue::PerAffector(m) } => RawBeta::Graph(m.clone()),
                BetaSpec::Explicit { entries } => RawBeta::Explicit(
                    entries
                        .iter()
                        .map(|e| RawCoupling {
                            target: e.i,
                            source: e.j,
                            affector: e.affector.clone(),
                            value: e.value,
                        })
                        .collect(),
                ),
            };
            raw.external.push(RawExternal {
                from: d.from.clone(),
                to: d.to.clone(),
                affectors: d.affectors.clone(),
                beta,
            });
        }
        Ok(raw)
    }

    pub fn build(&self) -> Result<CompartmentalModel, DescriptionError> {
        Ok(self.to_raw()?.validate()?)
    }
}

/// Parses and validates a model description document.
pub fn parse_model(text: &str) -> Result<CompartmentalModel, DescriptionError> {
    ModelDescription::from_json(text)?.build()
}
