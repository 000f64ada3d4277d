use super::layout::StateLayout;
use super::ledger::CovarianceSign;
use crate::integrate::{lipschitz_constant, VectorField};
use crate::model::CompartmentalModel;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How the own-node probability of another compartment enters a gain term of
/// an upper equation for `(i, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OwnGain {
    /// `1 - upper_i^c`.
    #[default]
    Complement,
    /// `upper_i^{c'}` of the source compartment.
    Tracked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuilderKind {
    Generic {
        own_gain: OwnGain,
    },
    Refined {
        own_gain: OwnGain,
        ledger: BTreeMap<String, CovarianceSign>,
    },
    MeanField {
        eliminated: Option<String>,
    },
    Adhoc {
        name: String,
    },
}

/// A vector field over a flat state described by a [`StateLayout`].
pub trait ApproxSystem<T>: Send + Sync {
    fn layout(&self) -> &StateLayout;
    fn eval(&self, x: &[T], dx: &mut [T]);
}

/// An approximating system ready for integration, tagged with its provenance.
pub struct RhsSpec<T> {
    kind: BuilderKind,
    model_hash: String,
    compartments: Vec<String>,
    lipschitz: f64,
    system: Box<dyn ApproxSystem<T>>,
}

impl<T: Real> RhsSpec<T> {
    pub fn new(kind: BuilderKind, model: &CompartmentalModel, system: Box<dyn ApproxSystem<T>>) -> Self {
        Self {
            kind,
            model_hash: model.content_hash(),
            compartments: model.compartments().to_vec(),
            lipschitz: lipschitz_constant(model),
            system,
        }
    }

    pub fn kind(&self) -> &BuilderKind {
        &self.kind
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn compartments(&self) -> &[String] {
        &self.compartments
    }

    pub fn layout(&self) -> &StateLayout {
        self.system.layout()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Paired (upper/lower) systems bound; point systems only approximate.
    pub fn is_bounding(&self) -> bool {
        self.layout().paired
    }

    pub fn eval(&self, x: &[T], dx: &mut [T]) {
        self.system.eval(x, dx)
    }

    pub fn eval_vec(&self, x: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.dim()];
        self.eval(x, &mut dx);
        dx
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }
}

impl<T: Real> VectorField<T> for RhsSpec<T> {
    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        self.system.eval(x, dx)
    }
}

impl<T> std::fmt::Debug for RhsSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RhsSpec")
            .field("kind", &self.kind)
            .field("model_hash", &self.model_hash)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}
