//! Labeled trajectory series on a common time grid, and their CSV form.
//!
//! CSV layout (long format, UTF-8, `\n` line endings):
//!
//! ```text
//! t,node,compartment,role,value
//! 0,0,S,upper,1
//! ```
//!
//! Rows are ordered by time, then node, then compartment index, then role
//! (`upper, lower, point, exact, mc, mc_stderr`). Floats use Rust's shortest
//! round-trip decimal form, so values re-parse bit-exactly. The graph-mean view
//! writes `mean` in the node column.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Upper,
    Lower,
    Point,
    Exact,
    Mc,
    McStderr,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Upper => "upper",
            Role::Lower => "lower",
            Role::Point => "point",
            Role::Exact => "exact",
            Role::Mc => "mc",
            Role::McStderr => "mc_stderr",
        }
    }

    pub fn is_probability(self) -> bool {
        self != Role::McStderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub node: usize,
    pub compartment: usize,
    pub role: Role,
}

impl SeriesKey {
    pub fn new(node: usize, compartment: usize, role: Role) -> Self {
        Self { node, compartment, role }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("series has {got} points but the grid has {expected}")]
    Length { expected: usize, got: usize },
    #[error("series key out of range: node {node}, compartment {compartment}")]
    KeyOutOfRange { node: usize, compartment: usize },
    #[error("bundles do not share a grid")]
    GridMismatch,
    #[error("bundles do not share a series index set")]
    SeriesMismatch,
    #[error("bundle is missing the {role:?} series for node {node}, compartment {compartment}")]
    MissingSeries { node: usize, compartment: usize, role: Role },
}

/// Provenance attached to every exported trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub seeds: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_algorithm: Option<String>,
    pub software_version: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl RunMetadata {
    pub fn labeled(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            software_version: crate::VERSION.to_string(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    PerNode,
    GraphMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    grid: Vec<f64>,
    compartments: Vec<String>,
    nodes: usize,
    series: BTreeMap<SeriesKey, Vec<f64>>,
    /// Graph-mean series that cannot be derived by averaging node series
    /// (Monte Carlo standard errors of the graph mean).
    aggregate_override: BTreeMap<(usize, Role), Vec<f64>>,
    pub metadata: RunMetadata,
}

impl TrajectoryBundle {
    pub fn new(grid: Vec<f64>, compartments: Vec<String>, nodes: usize, metadata: RunMetadata) -> Self {
        Self {
            grid,
            compartments,
            nodes,
            series: BTreeMap::new(),
            aggregate_override: BTreeMap::new(),
            metadata,
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn compartments(&self) -> &[String] {
        &self.compartments
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn insert(&mut self, key: SeriesKey, values: Vec<f64>) -> Result<(), BundleError> {
        if values.len() != self.grid.len() {
            return Err(BundleError::Length {
                expected: self.grid.len(),
                got: values.len(),
            });
        }
        if key.node >= self.nodes || key.compartment >= self.compartments.len() {
            return Err(BundleError::KeyOutOfRange {
                node: key.node,
                compartment: key.compartment,
            });
        }
        self.series.insert(key, values);
        Ok(())
    }

    pub fn set_aggregate_override(&mut self, compartment: usize, role: Role, values: Vec<f64>) -> Result<(), BundleError> {
        if values.len() != self.grid.len() {
            return Err(BundleError::Length {
                expected: self.grid.len(),
                got: values.len(),
            });
        }
        self.aggregate_override.insert((compartment, role), values);
        Ok(())
    }

    pub fn get(&self, node: usize, compartment: usize, role: Role) -> Option<&[f64]> {
        self.series.get(&SeriesKey::new(node, compartment, role)).map(Vec::as_slice)
    }

    pub fn require(&self, node: usize, compartment: usize, role: Role) -> Result<&[f64], BundleError> {
        self.get(node, compartment, role)
            .ok_or(BundleError::MissingSeries { node, compartment, role })
    }

    pub fn series(&self) -> impl Iterator<Item = (&SeriesKey, &Vec<f64>)> {
        self.series.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &SeriesKey> {
        self.series.keys()
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.series.keys().any(|k| k.role == role)
    }

    pub fn roles(&self) -> Vec<Role> {
        let mut r: Vec<Role> = self.series.keys().map(|k| k.role).collect();
        r.sort();
        r.dedup();
        r
    }

    /// Unweighted mean over nodes of one role/compartment (or its override).
    pub fn graph_mean(&self, compartment: usize, role: Role) -> Option<Vec<f64>> {
        if let Some(v) = self.aggregate_override.get(&(compartment, role)) {
            return Some(v.clone());
        }
        let mut acc = vec![0.0; self.grid.len()];
        let mut count = 0usize;
        for node in 0..self.nodes {
            if let Some(s) = self.get(node, compartment, role) {
                acc.iter_mut().zip(s).for_each(|(a, v)| *a += v);
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        let denom = count as f64;
        acc.iter_mut().for_each(|a| *a /= denom);
        Some(acc)
    }

    pub fn same_shape(&self, other: &Self) -> Result<(), BundleError> {
        if self.grid != other.grid {
            return Err(BundleError::GridMismatch);
        }
        if self.nodes != other.nodes || self.compartments != other.compartments {
            return Err(BundleError::SeriesMismatch);
        }
        Ok(())
    }

    /// Writes the long-format CSV.
    pub fn write_csv<W: Write>(&self, out: &mut W, aggregation: Aggregation) -> io::Result<()> {
        writeln!(out, "t,node,compartment,role,value")?;
        match aggregation {
            Aggregation::PerNode => {
                let keys: Vec<&SeriesKey> = self.series.keys().collect();
                for (k, t) in self.grid.iter().enumerate() {
                    for key in &keys {
                        let v = self.series[key][k];
                        writeln!(
                            out,
                            "{t},{},{},{},{v}",
                            key.node,
                            self.compartments[key.compartment],
                            key.role.as_str()
                        )?;
                    }
                }
            }
            Aggregation::GraphMean => {
                let mut pairs: Vec<(usize, Role)> = self.series.keys().map(|k| (k.compartment, k.role)).collect();
                pairs.extend(self.aggregate_override.keys().copied());
                pairs.sort();
                pairs.dedup();
                let means: Vec<Vec<f64>> = pairs
                    .iter()
                    .map(|&(c, r)| self.graph_mean(c, r).expect("pair present"))
                    .collect();
                for (k, t) in self.grid.iter().enumerate() {
                    for (&(c, r), m) in pairs.iter().zip(&means) {
                        writeln!(out, "{t},mean,{},{},{}", self.compartments[c], r.as_str(), m[k])?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self, aggregation: Aggregation) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, aggregation).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Copies every series of `other` into this bundle (same shape required).
    pub fn merge(&mut self, other: &Self) -> Result<(), BundleError> {
        self.same_shape(other)?;
        for (k, v) in &other.series {
            self.series.insert(*k, v.clone());
        }
        for (k, v) in &other.aggregate_override {
            self.aggregate_override.insert(*k, v.clone());
        }
        Ok(())
    }
}
