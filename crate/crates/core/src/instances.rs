//! Seeded random test instances.
//!
//! Instance `index` under `seed` draws from the instance-domain stream
//! `index`, so instances can be generated in any order.

use crate::catalog::{build_model, CatalogError, CatalogKind};
use crate::graph::Graph;
use crate::model::{CompartmentalModel, Configuration, RawModel, ValidationError};
use crate::rng::{self, INSTANCE_DOMAIN};
use rand::Rng;
use std::collections::BTreeMap;

/// A model together with the point initial condition it is tested from.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: CompartmentalModel,
    pub initial: Configuration,
    pub params: BTreeMap<String, f64>,
    pub graph_seed: Option<u64>,
}

/// Uniform on (0, hi].
fn rate<R: Rng>(rng: &mut R, hi: f64) -> f64 {
    let u: f64 = rng.random();
    hi * (1.0 - u)
}

/// Model with internal transitions only: `1..=max_nodes` nodes, `2..=max_compartments`
/// compartments, each ordered pair present with probability 1/2 and per-node rates in (0, 2].
pub fn fully_internal(
    seed: u64,
    index: u64,
    max_nodes: usize,
    max_compartments: usize,
) -> Result<Instance, ValidationError> {
    let mut rng = rng::stream(seed, INSTANCE_DOMAIN, index);
    let n = rng.random_range(1..=max_nodes.max(1));
    let nc = rng.random_range(2..=max_compartments.max(2));
    let names: Vec<String> = (0..nc).map(|c| format!("C{c}")).collect();
    let mut raw = RawModel::new(names.clone(), n);
    for a in 0..nc {
        for b in 0..nc {
            if a == b || !rng.random_bool(0.5) {
                continue;
            }
            for i in 0..n {
                raw = raw.internal_node(i, &names[a], &names[b], rate(&mut rng, 2.0));
            }
        }
    }
    let initial = Configuration((0..n).map(|_| rng.random_range(0..nc)).collect());
    Ok(Instance {
        model: raw.validate()?,
        initial,
        params: BTreeMap::new(),
        graph_seed: None,
    })
}

/// Catalog process on an Erdős–Rényi graph with `2..=max_nodes` nodes and edge
/// probability `p`, all parameters uniform in (0, 2].
///
/// Nodes start in uniformly drawn compartments except node 0, which starts in
/// compartment 1 (the first infectious or exposed one) so that the process
/// is not trivially frozen.
pub fn catalog_instance(
    kind: CatalogKind,
    seed: u64,
    index: u64,
    max_nodes: usize,
    p: f64,
) -> Result<Instance, CatalogError> {
    let mut rng = rng::stream(seed, INSTANCE_DOMAIN, index);
    let n = rng.random_range(2..=max_nodes.max(2));
    let graph_seed: u64 = rng.random();
    let entry = kind.entry();
    let params: BTreeMap<String, f64> = entry
        .params
        .iter()
        .map(|name| (name.to_string(), rate(&mut rng, 2.0)))
        .collect();
    let nc = entry.compartments.len();
    let mut initial: Vec<usize> = (0..n).map(|_| rng.random_range(0..nc)).collect();
    initial[0] = 1;
    let graph = Graph::erdos_renyi(n, p, graph_seed)?;
    Ok(Instance {
        model: build_model(kind, graph, &params)?,
        initial: Configuration(initial),
        params,
        graph_seed: Some(graph_seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_in_range() {
        for k in 0..20 {
            let a = fully_internal(1, k, 4, 4).unwrap();
            let b = fully_internal(1, k, 4, 4).unwrap();
            assert_eq!(a.model.content_hash(), b.model.content_hash());
            assert_eq!(a.initial, b.initial);
            assert!(a.model.is_fully_internal());
            assert!(a.model.node_count() <= 4 && a.model.compartment_count() <= 4);
            for t in a.model.internal() {
                assert!(t.rates.iter().all(|&r| r > 0.0 && r <= 2.0));
            }
        }
        let s = catalog_instance(CatalogKind::Seiv, 3, 0, 6, 0.5).unwrap();
        assert!(s.model.node_count() <= 6);
        assert!(s.initial.is_valid_for(&s.model));
        assert!(s.params.values().all(|&r| r > 0.0 && r <= 2.0));
    }
}
