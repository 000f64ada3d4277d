//! Compartmental spreading processes on a set of agents.
//!
//! A node `i` in compartment `c` moves to `c'` either through an *internal*
//! transition with rate `delta_i(c->c')`, or through an *external* one whose
//! rate is `sum_j sum_{a in A(c,c')} 1{x_j = a} * beta_ij(a; c->c')`: every
//! other node `j` sitting in an affector compartment `a` contributes its own
//! coupling. A pair `c->c'` is internal, external or absent, never two of these.
//!
//! Models are assembled as a [`RawModel`] (what a user or file declares) and
//! turned into an immutable [`CompartmentalModel`] by [`RawModel::validate`].

use crate::graph::Graph;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Which nodes an internal-rate declaration applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelector {
    All,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawInternal {
    pub node: NodeSelector,
    pub from: String,
    pub to: String,
    pub delta: f64,
}

/// One explicit coupling `beta_ij(affector; from->to)`: node `source` (j)
/// acting on node `target` (i).
#[derive(Debug, Clone, PartialEq)]
pub struct RawCoupling {
    pub target: usize,
    pub source: usize,
    pub affector: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawBeta {
    /// Every graph edge couples in both directions with the per-affector value.
    Graph(BTreeMap<String, f64>),
    Explicit(Vec<RawCoupling>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawExternal {
    pub from: String,
    pub to: String,
    pub affectors: Vec<String>,
    pub beta: RawBeta,
}

/// Unvalidated model declaration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawModel {
    pub compartments: Vec<String>,
    pub n: usize,
    pub graph: Option<Graph>,
    pub internal: Vec<RawInternal>,
    pub external: Vec<RawExternal>,
}

impl RawModel {
    pub fn new<S: Into<String>>(compartments: impl IntoIterator<Item = S>, n: usize) -> Self {
        Self {
            compartments: compartments.into_iter().map(Into::into).collect(),
            n,
            ..Self::default()
        }
    }

    pub fn with_graph(mut self, graph: Graph) -> Self {
        self.graph = Some(graph);
        self
    }

    pub fn internal_all(mut self, from: &str, to: &str, delta: f64) -> Self {
        self.internal.push(RawInternal {
            node: NodeSelector::All,
            from: from.into(),
            to: to.into(),
            delta,
        });
        self
    }

    pub fn internal_node(mut self, node: usize, from: &str, to: &str, delta: f64) -> Self {
        self.internal.push(RawInternal {
            node: NodeSelector::Node(node),
            from: from.into(),
            to: to.into(),
            delta,
        });
        self
    }

    /// External transition whose couplings follow the graph edges, one value per affector.
    pub fn external_on_graph(mut self, from: &str, to: &str, betas: &[(&str, f64)]) -> Self {
        self.external.push(RawExternal {
            from: from.into(),
            to: to.into(),
            affectors: betas.iter().map(|(a, _)| a.to_string()).collect(),
            beta: RawBeta::Graph(betas.iter().map(|(a, b)| (a.to_string(), *b)).collect()),
        });
        self
    }

    pub fn external_explicit(
        mut self,
        from: &str,
        to: &str,
        affectors: &[&str],
        couplings: Vec<RawCoupling>,
    ) -> Self {
        self.external.push(RawExternal {
            from: from.into(),
            to: to.into(),
            affectors: affectors.iter().map(|a| a.to_string()).collect(),
            beta: RawBeta::Explicit(couplings),
        });
        self
    }

    /// Checks every invariant and either returns the model or all violations found.
    pub fn validate(&self) -> Result<CompartmentalModel, ValidationError> {
        let mut v = Vec::new();
        if self.compartments.is_empty() {
            v.push(Violation::NoCompartments);
        }
        if self.n == 0 {
            v.push(Violation::NoNodes);
        }
        let mut index = BTreeMap::new();
        for (k, name) in self.compartments.iter().enumerate() {
            if index.insert(name.clone(), k).is_some() {
                v.push(Violation::DuplicateCompartment(name.clone()));
            }
        }
        if let Some(g) = &self.graph {
            if g.node_count() != self.n {
                v.push(Violation::GraphSizeMismatch {
                    graph: g.node_count(),
                    model: self.n,
                });
            }
        }
        let lookup = |name: &str, v: &mut Vec<Violation>| -> Option<usize> {
            let found = index.get(name).copied();
            if found.is_none() {
                v.push(Violation::UnknownCompartment(name.to_string()));
            }
            found
        };
        let check_rate = |context: String, value: f64, v: &mut Vec<Violation>| -> bool {
            if !value.is_finite() {
                v.push(Violation::NonFiniteRate { context, value });
                false
            } else if value < 0.0 {
                v.push(Violation::NegativeRate { context, value });
                false
            } else {
                true
            }
        };

        let nc = self.compartments.len();
        let n = self.n;
        let mut internal: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for decl in &self.internal {
            let (from, to) = (lookup(&decl.from, &mut v), lookup(&decl.to, &mut v));
            let ctx = format!("internal {}->{}", decl.from, decl.to);
            let rate_ok = check_rate(ctx, decl.delta, &mut v);
            let (Some(from), Some(to)) = (from, to) else { continue };
            if from == to {
                v.push(Violation::SelfTransition(decl.from.clone()));
                continue;
            }
            let rates = internal.entry((from, to)).or_insert_with(|| vec![0.0; n]);
            if !rate_ok {
                continue;
            }
            // repeated declarations superpose
            match decl.node {
                NodeSelector::All => rates.iter_mut().for_each(|r| *r += decl.delta),
                NodeSelector::Node(i) if i < n => rates[i] += decl.delta,
                NodeSelector::Node(i) => v.push(Violation::NodeOutOfRange { index: i, n }),
            }
        }

        let mut external: BTreeMap<(usize, usize), ExternalTransition> = BTreeMap::new();
        for decl in &self.external {
            let (from, to) = (lookup(&decl.from, &mut v), lookup(&decl.to, &mut v));
            if decl.affectors.is_empty() {
                v.push(Violation::EmptyAffectorSet {
                    from: decl.from.clone(),
                    to: decl.to.clone(),
                });
            }
            let mut affectors = BTreeSet::new();
            for a in &decl.affectors {
                if let Some(k) = lookup(a, &mut v) {
                    affectors.insert(k);
                }
            }
            let (Some(from), Some(to)) = (from, to) else { continue };
            if from == to {
                v.push(Violation::SelfTransition(decl.from.clone()));
                continue;
            }
            if external.contains_key(&(from, to)) {
                v.push(Violation::DuplicateTransition {
                    from: decl.from.clone(),
                    to: decl.to.clone(),
                });
                continue;
            }
            let mut incoming: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); n];
            let ctx = |a: &str| format!("external {}->{} affector {}", decl.from, decl.to, a);
            match &decl.beta {
                RawBeta::Graph(values) => match &self.graph {
                    None => v.push(Violation::MissingGraph {
                        from: decl.from.clone(),
                        to: decl.to.clone(),
                    }),
                    Some(g) => {
                        for (a, &value) in values {
                            let Some(ak) = lookup(a, &mut v) else { continue };
                            if !affectors.contains(&ak) {
                                v.push(Violation::AffectorNotDeclared {
                                    from: decl.from.clone(),
                                    to: decl.to.clone(),
                                    affector: a.clone(),
                                });
                                continue;
                            }
                            if !check_rate(ctx(a), value, &mut v) || value == 0.0 {
                                continue;
                            }
                            for &(x, y) in g.edges() {
                                if x < n && y < n {
                                    *incoming[x].entry((ak, y)).or_insert(0.0) += value;
                                    *incoming[y].entry((ak, x)).or_insert(0.0) += value;
                                }
                            }
                        }
                    }
                },
                RawBeta::Explicit(entries) => {
                    for e in entries {
                        let Some(ak) = lookup(&e.affector, &mut v) else { continue };
                        if !affectors.contains(&ak) {
                            v.push(Violation::AffectorNotDeclared {
                                from: decl.from.clone(),
                                to: decl.to.clone(),
                                affector: e.affector.clone(),
                            });
                            continue;
                        }
                        if e.target >= n || e.source >= n {
                            v.push(Violation::NodeOutOfRange {
                                index: e.target.max(e.source),
                                n,
                            });
                            continue;
                        }
                        if e.target == e.source {
                            v.push(Violation::SelfInteraction { node: e.target });
                            continue;
                        }
                        if !check_rate(ctx(&e.affector), e.value, &mut v) || e.value == 0.0 {
                            continue;
                        }
                        *incoming[e.target].entry((ak, e.source)).or_insert(0.0) += e.value;
                    }
                }
            }
            let incoming = incoming
                .into_iter()
                .map(|m| {
                    m.into_iter()
                        .map(|((affector, source), rate)| Coupling { source, affector, rate })
                        .collect()
                })
                .collect();
            external.insert(
                (from, to),
                ExternalTransition {
                    from,
                    to,
                    affectors: affectors.into_iter().collect(),
                    incoming,
                },
            );
        }
        for &(from, to) in internal.keys() {
            if external.contains_key(&(from, to)) {
                v.push(Violation::DuplicateTransitionKind {
                    from: self.compartments[from].clone(),
                    to: self.compartments[to].clone(),
                });
            }
        }
        if !v.is_empty() {
            return Err(ValidationError { violations: v });
        }

        let internal = internal
            .into_iter()
            .map(|((from, to), rates)| InternalTransition { from, to, rates })
            .collect();
        let external = external.into_values().collect();
        Ok(CompartmentalModel::assemble(
            self.compartments.clone(),
            n,
            self.graph.clone(),
            internal,
            external,
            nc,
        ))
    }
}

/// A single invariant violation found during validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoCompartments,
    NoNodes,
    DuplicateCompartment(String),
    UnknownCompartment(String),
    SelfTransition(String),
    NegativeRate { context: String, value: f64 },
    NonFiniteRate { context: String, value: f64 },
    DuplicateTransitionKind { from: String, to: String },
    DuplicateTransition { from: String, to: String },
    EmptyAffectorSet { from: String, to: String },
    AffectorNotDeclared { from: String, to: String, affector: String },
    NodeOutOfRange { index: usize, n: usize },
    SelfInteraction { node: usize },
    MissingGraph { from: String, to: String },
    GraphSizeMismatch { graph: usize, model: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoCompartments => write!(f, "model declares no compartments"),
            NoNodes => write!(f, "model has no nodes"),
            DuplicateCompartment(c) => write!(f, "compartment {c:?} declared twice"),
            UnknownCompartment(c) => write!(f, "unknown compartment {c:?}"),
            SelfTransition(c) => write!(f, "transition {c}->{c} is not a compartment change"),
            NegativeRate { context, value } => write!(f, "negative rate {value} ({context})"),
            NonFiniteRate { context, value } => write!(f, "non-finite rate {value} ({context})"),
            DuplicateTransitionKind { from, to } => {
                write!(f, "{from}->{to} declared both internal and external")
            }
            DuplicateTransition { from, to } => write!(f, "external {from}->{to} declared twice"),
            EmptyAffectorSet { from, to } => write!(f, "external {from}->{to} has no affectors"),
            AffectorNotDeclared { from, to, affector } => {
                write!(f, "{affector} is not in the affector set of {from}->{to}")
            }
            NodeOutOfRange { index, n } => write!(f, "node {index} outside 0..{n}"),
            SelfInteraction { node } => write!(f, "node {node} couples to itself"),
            MissingGraph { from, to } => {
                write!(f, "external {from}->{to} uses graph couplings but the model has no graph")
            }
            GraphSizeMismatch { graph, model } => {
                write!(f, "graph has {graph} nodes but model declares {model}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid model: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

/// `beta_ij(affector; ..)` as seen from the affected node `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coupling {
    pub source: usize,
    pub affector: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InternalTransition {
    pub from: usize,
    pub to: usize,
    /// Per-node rate `delta_i`.
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalTransition {
    pub from: usize,
    pub to: usize,
    pub affectors: Vec<usize>,
    /// `incoming[i]`: nonzero couplings acting on node `i`, sorted by `(affector, source)`.
    pub incoming: Vec<Vec<Coupling>>,
}

/// `E(c)` and `I(c)`: partners linked to `c` by external / internal transitions
/// in either direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionClassification {
    pub external_partners: Vec<BTreeSet<usize>>,
    pub internal_partners: Vec<BTreeSet<usize>>,
}

/// Joint assignment of every node to a compartment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(pub Vec<usize>);

impl Configuration {
    pub fn uniform(n: usize, compartment: usize) -> Self {
        Self(vec![compartment; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, node: usize) -> usize {
        self.0[node]
    }

    pub fn is_valid_for(&self, model: &CompartmentalModel) -> bool {
        self.0.len() == model.node_count() && self.0.iter().all(|&c| c < model.compartment_count())
    }
}

/// Validated, immutable process definition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompartmentalModel {
    compartments: Vec<String>,
    n: usize,
    graph: Option<Graph>,
    internal: Vec<InternalTransition>,
    external: Vec<ExternalTransition>,
    #[serde(skip)]
    classification: TransitionClassification,
    #[serde(skip)]
    index: TransitionIndex,
}

/// Transition indices grouped by compartment, each list ascending in the partner compartment.
#[derive(Debug, Clone, PartialEq, Default)]
struct TransitionIndex {
    internal_out: Vec<Vec<usize>>,
    internal_in: Vec<Vec<usize>>,
    external_out: Vec<Vec<usize>>,
    external_in: Vec<Vec<usize>>,
    /// `influences[j]`: nodes whose external rates depend on node `j`'s compartment.
    influences: Vec<Vec<usize>>,
}

impl CompartmentalModel {
    fn assemble(
        compartments: Vec<String>,
        n: usize,
        graph: Option<Graph>,
        internal: Vec<InternalTransition>,
        external: Vec<ExternalTransition>,
        nc: usize,
    ) -> Self {
        let mut index = TransitionIndex {
            internal_out: vec![Vec::new(); nc],
            internal_in: vec![Vec::new(); nc],
            external_out: vec![Vec::new(); nc],
            external_in: vec![Vec::new(); nc],
            influences: vec![Vec::new(); n],
        };
        let mut ext_p = vec![BTreeSet::new(); nc];
        let mut int_p = vec![BTreeSet::new(); nc];
        // both transition lists are sorted by (from, to): the per-compartment
        // out-lists come out ascending in target and in-lists ascending in source
        for (k, t) in internal.iter().enumerate() {
            index.internal_out[t.from].push(k);
            index.internal_in[t.to].push(k);
            int_p[t.from].insert(t.to);
            int_p[t.to].insert(t.from);
        }
        for (k, t) in external.iter().enumerate() {
            index.external_out[t.from].push(k);
            index.external_in[t.to].push(k);
            ext_p[t.from].insert(t.to);
            ext_p[t.to].insert(t.from);
        }
        let mut infl = vec![BTreeSet::new(); n];
        for t in &external {
            for (i, cs) in t.incoming.iter().enumerate() {
                for c in cs {
                    infl[c.source].insert(i);
                }
            }
        }
        index.influences = infl.into_iter().map(|s| s.into_iter().collect()).collect();
        Self {
            compartments,
            n,
            graph,
            internal,
            external,
            classification: TransitionClassification {
                external_partners: ext_p,
                internal_partners: int_p,
            },
            index,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn compartment_count(&self) -> usize {
        self.compartments.len()
    }

    pub fn compartments(&self) -> &[String] {
        &self.compartments
    }

    pub fn compartment_index(&self, name: &str) -> Option<usize> {
        self.compartments.iter().position(|c| c == name)
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.graph.as_ref()
    }

    pub fn internal(&self) -> &[InternalTransition] {
        &self.internal
    }

    pub fn external(&self) -> &[ExternalTransition] {
        &self.external
    }

    pub fn classification(&self) -> &TransitionClassification {
        &self.classification
    }

    /// Internal transitions leaving `c`, ascending in target.
    pub fn internal_out(&self, c: usize) -> impl Iterator<Item = &InternalTransition> {
        self.index.internal_out[c].iter().map(move |&k| &self.internal[k])
    }

    /// Internal transitions entering `c`, ascending in source.
    pub fn internal_in(&self, c: usize) -> impl Iterator<Item = &InternalTransition> {
        self.index.internal_in[c].iter().map(move |&k| &self.internal[k])
    }

    pub fn external_out(&self, c: usize) -> impl Iterator<Item = &ExternalTransition> {
        self.index.external_out[c].iter().map(move |&k| &self.external[k])
    }

    pub fn external_in(&self, c: usize) -> impl Iterator<Item = &ExternalTransition> {
        self.index.external_in[c].iter().map(move |&k| &self.external[k])
    }

    /// Nodes whose external transition rates read node `j`'s compartment.
    pub fn influenced_by(&self, j: usize) -> &[usize] {
        &self.index.influences[j]
    }

    pub fn is_fully_internal(&self) -> bool {
        self.external.is_empty()
    }

    /// Rate at which node `i` currently moves `from -> to`; zero unless `config[i] == from`.
    pub fn transition_rate(&self, config: &Configuration, i: usize, from: usize, to: usize) -> f64 {
        if config.get(i) != from || from == to {
            return 0.0;
        }
        if let Some(t) = self.internal.iter().find(|t| t.from == from && t.to == to) {
            return t.rates[i];
        }
        match self.external.iter().find(|t| t.from == from && t.to == to) {
            Some(t) => external_rate(t, i, config),
            None => 0.0,
        }
    }

    /// Stable content hash (SHA-256 over the canonical JSON form).
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn external_rate(t: &ExternalTransition, i: usize, config: &Configuration) -> f64 {
    let mut rate = 0.0;
    for c in &t.incoming[i] {
        if config.get(c.source) == c.affector {
            rate += c.rate;
        }
    }
    rate
}
