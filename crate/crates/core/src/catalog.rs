//! The four named epidemic processes and their hand-derived systems.
//!
//! | kind      | compartments   | external                    | internal               |
//! |-----------|----------------|-----------------------------|------------------------|
//! | `SIS`     | S, I           | S->I by I                   | I->S                   |
//! | `SIR`     | S, I, R        | S->I by I                   | I->R                   |
//! | `SI1SI2S` | S, I1, I2      | S->I1 by I1, S->I2 by I2    | I1->S, I2->S           |
//! | `SEIV`    | S, E, I, V     | S->E by E and I             | E->I, I->V, S->V, V->S |
//!
//! Parameters (all rates, homogeneous over nodes and edges):
//! SIS/SIR `beta, delta`; SI1SI2S `beta1, beta2, delta1, delta2`;
//! SEIV `beta_e, beta_i, delta_ei, delta_iv, delta_sv, delta_vs`.

use crate::bounds::{
    ApproxSystem, BuilderKind, CorrelationLedger, CovarianceSign, LayoutError, RhsSpec, StateLayout,
};
use crate::graph::{Graph, GraphError};
use crate::model::{CompartmentalModel, RawModel, ValidationError};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unknown catalog kind {0:?}")]
    UnknownKind(String),
    #[error("{kind} has no approximating system named {variant:?}")]
    UnknownVariant { kind: CatalogKind, variant: String },
    #[error("{kind} needs parameter {name:?}")]
    MissingParam { kind: CatalogKind, name: String },
    #[error("{kind} does not take parameter {name:?}")]
    UnknownParam { kind: CatalogKind, name: String },
    #[error("model does not have the {0} structure")]
    StructureMismatch(CatalogKind),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CatalogKind {
    #[serde(rename = "SIS")]
    Sis,
    #[serde(rename = "SIR")]
    Sir,
    #[serde(rename = "SI1SI2S")]
    Si1Si2S,
    #[serde(rename = "SEIV")]
    Seiv,
}

impl CatalogKind {
    pub const ALL: [CatalogKind; 4] = [CatalogKind::Sis, CatalogKind::Sir, CatalogKind::Si1Si2S, CatalogKind::Seiv];

    pub fn name(self) -> &'static str {
        match self {
            CatalogKind::Sis => "SIS",
            CatalogKind::Sir => "SIR",
            CatalogKind::Si1Si2S => "SI1SI2S",
            CatalogKind::Seiv => "SEIV",
        }
    }

    pub fn entry(self) -> CatalogEntry {
        match self {
            CatalogKind::Sis => CatalogEntry {
                kind: self,
                compartments: &["S", "I"],
                params: &["beta", "delta"],
                variants: &["correlated", "infected", "susceptible", "susceptible-sym"],
            },
            CatalogKind::Sir => CatalogEntry {
                kind: self,
                compartments: &["S", "I", "R"],
                params: &["beta", "delta"],
                variants: &["correlated"],
            },
            CatalogKind::Si1Si2S => CatalogEntry {
                kind: self,
                compartments: &["S", "I1", "I2"],
                params: &["beta1", "beta2", "delta1", "delta2"],
                variants: &["mean-field"],
            },
            CatalogKind::Seiv => CatalogEntry {
                kind: self,
                compartments: &["S", "E", "I", "V"],
                params: &["beta_e", "beta_i", "delta_ei", "delta_iv", "delta_sv", "delta_vs"],
                variants: &["mean-field"],
            },
        }
    }
}

impl fmt::Display for CatalogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogKind {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CatalogKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CatalogError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub kind: CatalogKind,
    pub compartments: &'static [&'static str],
    pub params: &'static [&'static str],
    pub variants: &'static [&'static str],
}

impl CatalogEntry {
    /// SIS and SIR: `(I, I)` nonnegative and `(S, I)` nonpositive; the others claim nothing.
    pub fn default_ledger(&self) -> CorrelationLedger {
        match self.kind {
            CatalogKind::Sis | CatalogKind::Sir => CorrelationLedger::new()
                .with(1, 1, CovarianceSign::Nonnegative)
                .with(0, 1, CovarianceSign::Nonpositive),
            _ => CorrelationLedger::new(),
        }
    }
}

pub fn default_ledger(kind: CatalogKind) -> CorrelationLedger {
    kind.entry().default_ledger()
}

/// Builds a catalog process on `graph` with couplings on every edge in both directions.
pub fn build_model(
    kind: CatalogKind,
    graph: Graph,
    params: &BTreeMap<String, f64>,
) -> Result<CompartmentalModel, CatalogError> {
    let entry = kind.entry();
    for name in params.keys() {
        if !entry.params.contains(&name.as_str()) {
            return Err(CatalogError::UnknownParam { kind, name: name.clone() });
        }
    }
    let p = |name: &str| {
        params.get(name).copied().ok_or_else(|| CatalogError::MissingParam {
            kind,
            name: name.to_string(),
        })
    };
    let raw = RawModel::new(entry.compartments.iter().copied(), graph.node_count()).with_graph(graph);
    let raw = match kind {
        CatalogKind::Sis => raw
            .external_on_graph("S", "I", &[("I", p("beta")?)])
            .internal_all("I", "S", p("delta")?),
        CatalogKind::Sir => raw
            .external_on_graph("S", "I", &[("I", p("beta")?)])
            .internal_all("I", "R", p("delta")?),
        CatalogKind::Si1Si2S => raw
            .external_on_graph("S", "I1", &[("I1", p("beta1")?)])
            .external_on_graph("S", "I2", &[("I2", p("beta2")?)])
            .internal_all("I1", "S", p("delta1")?)
            .internal_all("I2", "S", p("delta2")?),
        CatalogKind::Seiv => raw
            .external_on_graph("S", "E", &[("E", p("beta_e")?), ("I", p("beta_i")?)])
            .internal_all("E", "I", p("delta_ei")?)
            .internal_all("I", "V", p("delta_iv")?)
            .internal_all("S", "V", p("delta_sv")?)
            .internal_all("V", "S", p("delta_vs")?),
    };
    Ok(raw.validate()?)
}

/// Per-node couplings `(j, beta_ij)` of the external transition `from -> to` for affector `a`.
fn couplings(model: &CompartmentalModel, from: usize, to: usize, a: usize) -> Vec<Vec<(usize, f64)>> {
    let t = model.external().iter().find(|t| t.from == from && t.to == to);
    (0..model.node_count())
        .map(|i| match t {
            Some(t) => t.incoming[i]
                .iter()
                .filter(|k| k.affector == a)
                .map(|k| (k.source, k.rate))
                .collect(),
            None => Vec::new(),
        })
        .collect()
}

fn internal_rates(model: &CompartmentalModel, from: usize, to: usize) -> Vec<f64> {
    model
        .internal()
        .iter()
        .find(|t| t.from == from && t.to == to)
        .map_or(vec![0.0; model.node_count()], |t| t.rates.clone())
}

fn check_structure(model: &CompartmentalModel, kind: CatalogKind) -> Result<(), CatalogError> {
    let names: Vec<&str> = model.compartments().iter().map(String::as_str).collect();
    if names != kind.entry().compartments {
        return Err(CatalogError::StructureMismatch(kind));
    }
    let ext: Vec<(usize, usize)> = model.external().iter().map(|t| (t.from, t.to)).collect();
    let int: Vec<(usize, usize)> = model.internal().iter().map(|t| (t.from, t.to)).collect();
    let (want_ext, want_int): (&[(usize, usize)], &[(usize, usize)]) = match kind {
        CatalogKind::Sis => (&[(0, 1)], &[(1, 0)]),
        CatalogKind::Sir => (&[(0, 1)], &[(1, 2)]),
        CatalogKind::Si1Si2S => (&[(0, 1), (0, 2)], &[(1, 0), (2, 0)]),
        CatalogKind::Seiv => (&[(0, 1)], &[(0, 3), (1, 2), (2, 3), (3, 0)]),
    };
    if ext != want_ext || int != want_int {
        return Err(CatalogError::StructureMismatch(kind));
    }
    Ok(())
}

/// Paired SIR system tracking S, I and R, with the product closure where
/// susceptible/infected covariance is nonpositive.
struct SirCorrelated<T> {
    layout: StateLayout,
    beta: Vec<Vec<(usize, T)>>,
    delta: Vec<T>,
}

impl<T: Real> ApproxSystem<T> for SirCorrelated<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let (s, i_, r) = (0, 1, 2);
        let b = self.layout.block();
        let (up, lo) = x.split_at(b);
        let (dup, dlo) = dx.split_at_mut(b);
        let u = |i: usize, c: usize| up[i * 3 + c];
        let l = |i: usize, c: usize| lo[i * 3 + c];
        let (zero, one) = (T::zero(), T::one());
        for i in 0..self.layout.n {
            let d = self.delta[i];
            let mut us = zero;
            let mut ls = zero;
            let mut ui = zero;
            let mut li = zero;
            for &(j, beta) in &self.beta[i] {
                us = us - (u(i, s) + l(j, i_) - one).max_of(zero) * beta;
                ls = ls - l(i, s) * u(j, i_) * beta;
                ui = ui + (one - u(i, i_)) * u(j, i_) * beta;
                li = li + (l(i, s) + l(j, i_) - one).max_of(zero) * beta;
            }
            dup[i * 3 + s] = us;
            dlo[i * 3 + s] = ls;
            dup[i * 3 + i_] = ui - u(i, i_) * d;
            dlo[i * 3 + i_] = li - l(i, i_) * d;
            dup[i * 3 + r] = (one - u(i, r)) * d;
            dlo[i * 3 + r] = l(i, i_) * d;
        }
    }
}

/// Paired SIS system tracking both compartments; the lower susceptible
/// equation gains `(1 - upper S) delta`.
struct SisCorrelated<T> {
    layout: StateLayout,
    beta: Vec<Vec<(usize, T)>>,
    delta: Vec<T>,
}

impl<T: Real> ApproxSystem<T> for SisCorrelated<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let (s, inf) = (0, 1);
        let b = self.layout.block();
        let (up, lo) = x.split_at(b);
        let (dup, dlo) = dx.split_at_mut(b);
        let u = |i: usize, c: usize| up[i * 2 + c];
        let l = |i: usize, c: usize| lo[i * 2 + c];
        let (zero, one) = (T::zero(), T::one());
        for i in 0..self.layout.n {
            let d = self.delta[i];
            let mut ui = zero;
            let mut li = zero;
            let mut us = zero;
            let mut ls = zero;
            for &(j, beta) in &self.beta[i] {
                ui = ui + beta * (one - u(i, inf)) * u(j, inf);
                li = li + beta * (l(i, s) + l(j, inf) - one).max_of(zero);
                us = us - beta * (u(i, s) + l(j, inf) - one).max_of(zero);
                ls = ls - beta * l(i, s) * u(j, inf);
            }
            dup[i * 2 + inf] = ui - u(i, inf) * d;
            dlo[i * 2 + inf] = li - l(i, inf) * d;
            dup[i * 2 + s] = us + (one - u(i, s)) * d;
            dlo[i * 2 + s] = ls + (one - u(i, s)) * d;
        }
    }
}

/// SIS tracking only the infected bounds; susceptible bounds are their complements.
struct SisInfected<T> {
    layout: StateLayout,
    beta: Vec<Vec<(usize, T)>>,
    delta: Vec<T>,
}

impl<T: Real> ApproxSystem<T> for SisInfected<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let n = self.layout.n;
        let (up, lo) = x.split_at(n);
        let (dup, dlo) = dx.split_at_mut(n);
        let (zero, one) = (T::zero(), T::one());
        for i in 0..n {
            let d = self.delta[i];
            let mut ui = zero;
            let mut li = zero;
            for &(j, beta) in &self.beta[i] {
                ui = ui + beta * (one - up[i]) * up[j];
                li = li + beta * (lo[j] - lo[i]).max_of(zero);
            }
            dup[i] = ui - up[i] * d;
            dlo[i] = li - lo[i] * d;
        }
    }
}

/// SIS tracking only the susceptible bounds.
struct SisSusceptible<T> {
    layout: StateLayout,
    beta: Vec<Vec<(usize, T)>>,
    delta: Vec<T>,
    /// Use `(1 - lower S)` instead of `(1 - upper S)` in the lower recovery gain.
    symmetric: bool,
}

impl<T: Real> ApproxSystem<T> for SisSusceptible<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let n = self.layout.n;
        let (up, lo) = x.split_at(n);
        let (dup, dlo) = dx.split_at_mut(n);
        let (zero, one) = (T::zero(), T::one());
        for i in 0..n {
            let d = self.delta[i];
            let mut us = zero;
            let mut ls = zero;
            for &(j, beta) in &self.beta[i] {
                us = us - beta * (up[i] - up[j]).max_of(zero);
                ls = ls - beta * lo[i] * (one - lo[j]);
            }
            dup[i] = us + (one - up[i]) * d;
            let recovered = if self.symmetric { one - lo[i] } else { one - up[i] };
            dlo[i] = ls + recovered * d;
        }
    }
}

/// Mean-field SI1SI2S on the simplex (S eliminated); each infection is driven
/// by neighbours in its own infected compartment.
struct Si1Si2SMeanField<T> {
    layout: StateLayout,
    beta1: Vec<Vec<(usize, T)>>,
    beta2: Vec<Vec<(usize, T)>>,
    delta1: Vec<T>,
    delta2: Vec<T>,
}

impl<T: Real> ApproxSystem<T> for Si1Si2SMeanField<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let phi1 = |i: usize| x[i * 2];
        let phi2 = |i: usize| x[i * 2 + 1];
        for i in 0..self.layout.n {
            let s = T::one() - phi1(i) - phi2(i);
            let mut f1 = T::zero();
            for &(j, b) in &self.beta1[i] {
                f1 = f1 + b * phi1(j);
            }
            let mut f2 = T::zero();
            for &(j, b) in &self.beta2[i] {
                f2 = f2 + b * phi2(j);
            }
            dx[i * 2] = s * f1 - self.delta1[i] * phi1(i);
            dx[i * 2 + 1] = s * f2 - self.delta2[i] * phi2(i);
        }
    }
}

/// Mean-field SEIV on the simplex (S eliminated); state order E, I, V.
struct SeivMeanField<T> {
    layout: StateLayout,
    /// `(j, beta_E, beta_I)` per affected node, ascending in `j`.
    beta: Vec<Vec<(usize, T, T)>>,
    ei: Vec<T>,
    iv: Vec<T>,
    sv: Vec<T>,
    vs: Vec<T>,
}

impl<T: Real> ApproxSystem<T> for SeivMeanField<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let e = |i: usize| x[i * 3];
        let inf = |i: usize| x[i * 3 + 1];
        let v = |i: usize| x[i * 3 + 2];
        for i in 0..self.layout.n {
            let s = T::one() - e(i) - inf(i) - v(i);
            let mut force = T::zero();
            for &(j, be, bi) in &self.beta[i] {
                force = force + (be * e(j) + bi * inf(j));
            }
            dx[i * 3] = s * force - e(i) * self.ei[i];
            dx[i * 3 + 1] = self.ei[i] * e(i) - self.iv[i] * inf(i);
            dx[i * 3 + 2] = self.iv[i] * inf(i) + self.sv[i] * s - self.vs[i] * v(i);
        }
    }
}

fn lit_couplings<T: Real>(c: Vec<Vec<(usize, f64)>>) -> Vec<Vec<(usize, T)>> {
    c.into_iter()
        .map(|row| row.into_iter().map(|(j, b)| (j, T::lit(b))).collect())
        .collect()
}

fn lit_rates<T: Real>(r: Vec<f64>) -> Vec<T> {
    r.into_iter().map(T::lit).collect()
}

/// One of the hand-derived systems listed in [`CatalogEntry::variants`].
pub fn adhoc_rhs<T: Real>(
    kind: CatalogKind,
    variant: &str,
    model: &CompartmentalModel,
) -> Result<RhsSpec<T>, CatalogError> {
    let entry = kind.entry();
    if !entry.variants.contains(&variant) {
        return Err(CatalogError::UnknownVariant {
            kind,
            variant: variant.to_string(),
        });
    }
    check_structure(model, kind)?;
    let n = model.node_count();
    let nc = model.compartment_count();
    let system: Box<dyn ApproxSystem<T>> = match (kind, variant) {
        (CatalogKind::Sir, _) => Box::new(SirCorrelated {
            layout: StateLayout::full(n, nc, true),
            beta: lit_couplings(couplings(model, 0, 1, 1)),
            delta: lit_rates(internal_rates(model, 1, 2)),
        }),
        (CatalogKind::Sis, "correlated") => Box::new(SisCorrelated {
            layout: StateLayout::full(n, nc, true),
            beta: lit_couplings(couplings(model, 0, 1, 1)),
            delta: lit_rates(internal_rates(model, 1, 0)),
        }),
        (CatalogKind::Sis, "infected") => Box::new(SisInfected {
            layout: StateLayout::eliminating(n, nc, 0, true)?,
            beta: lit_couplings(couplings(model, 0, 1, 1)),
            delta: lit_rates(internal_rates(model, 1, 0)),
        }),
        (CatalogKind::Sis, _) => Box::new(SisSusceptible {
            layout: StateLayout::eliminating(n, nc, 1, true)?,
            beta: lit_couplings(couplings(model, 0, 1, 1)),
            delta: lit_rates(internal_rates(model, 1, 0)),
            symmetric: variant == "susceptible-sym",
        }),
        (CatalogKind::Si1Si2S, _) => Box::new(Si1Si2SMeanField {
            layout: StateLayout::eliminating(n, nc, 0, false)?,
            beta1: lit_couplings(couplings(model, 0, 1, 1)),
            beta2: lit_couplings(couplings(model, 0, 2, 2)),
            delta1: lit_rates(internal_rates(model, 1, 0)),
            delta2: lit_rates(internal_rates(model, 2, 0)),
        }),
        (CatalogKind::Seiv, _) => {
            let be = couplings(model, 0, 1, 1);
            let bi = couplings(model, 0, 1, 2);
            let beta = be
                .into_iter()
                .zip(bi)
                .map(|(e, i)| {
                    let mut per: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
                    for (j, b) in e {
                        per.entry(j).or_default().0 = b;
                    }
                    for (j, b) in i {
                        per.entry(j).or_default().1 = b;
                    }
                    per.into_iter().map(|(j, (a, b))| (j, T::lit(a), T::lit(b))).collect()
                })
                .collect();
            Box::new(SeivMeanField {
                layout: StateLayout::eliminating(n, nc, 0, false)?,
                beta,
                ei: lit_rates(internal_rates(model, 1, 2)),
                iv: lit_rates(internal_rates(model, 2, 3)),
                sv: lit_rates(internal_rates(model, 0, 3)),
                vs: lit_rates(internal_rates(model, 3, 0)),
            })
        }
    };
    let kind_tag = BuilderKind::Adhoc {
        name: format!("{}/{}", kind.name(), variant),
    };
    Ok(RhsSpec::new(kind_tag, model, system))
}

/// Parameter map from `(name, value)` pairs.
pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
