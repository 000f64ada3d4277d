//! Mean-field (independence) closure: every joint probability of two distinct
//! nodes is replaced by the product of their point estimates.

use super::equations::{compile, Equation};
use super::layout::StateLayout;
use super::ledger::CorrelationLedger;
use super::system::{ApproxSystem, BuilderKind, RhsSpec};
use crate::model::CompartmentalModel;
use crate::scalar::Real;

pub struct MeanFieldSystem<T> {
    layout: StateLayout,
    equations: Vec<Equation<T>>,
}

impl<T: Real> MeanFieldSystem<T> {
    pub fn new(model: &CompartmentalModel, eliminate: Option<usize>) -> Self {
        let (n, nc) = (model.node_count(), model.compartment_count());
        let layout = match eliminate {
            Some(d) if nc > 1 => StateLayout::eliminating(n, nc, d, false).expect("compartment in range"),
            _ => StateLayout::full(n, nc, false),
        };
        Self {
            layout,
            equations: compile(model, &CorrelationLedger::new()),
        }
    }

    /// Expands the tracked state to all compartments; the eliminated one is
    /// `1 - sum of the others`, folded in ascending compartment order.
    fn expand(&self, x: &[T], phi: &mut [T]) {
        let l = &self.layout;
        let nt = l.tracked.len();
        for i in 0..l.n {
            let mut rest = T::one();
            for (k, &c) in l.tracked.iter().enumerate() {
                phi[i * l.nc + c] = x[i * nt + k];
                rest = rest - x[i * nt + k];
            }
            if let Some(d) = l.derived {
                phi[i * l.nc + d] = rest;
            }
        }
    }

    fn rate(&self, i: usize, c: usize, phi: &[T]) -> T {
        let nc = self.layout.nc;
        let eq = &self.equations[i * nc + c];
        let own = phi[i * nc + c];
        let mut acc = T::zero();
        for g in &eq.ext_gain {
            acc = acc + phi[i * nc + g.from] * phi[g.j * nc + g.a] * g.beta;
        }
        for l in &eq.ext_loss {
            acc = acc - own * phi[l.j * nc + l.a] * l.beta;
        }
        for &(from, d) in &eq.int_gain {
            acc = acc + phi[i * nc + from] * d;
        }
        for &d in &eq.int_loss {
            acc = acc - own * d;
        }
        acc
    }
}

impl<T: Real> ApproxSystem<T> for MeanFieldSystem<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let l = &self.layout;
        let mut phi = vec![T::zero(); l.n * l.nc];
        self.expand(x, &mut phi);
        let nt = l.tracked.len();
        for i in 0..l.n {
            for (k, &c) in l.tracked.iter().enumerate() {
                dx[i * nt + k] = self.rate(i, c, &phi);
            }
        }
    }
}

/// Mean-field system with one equation per `(i, c)`.
pub fn mean_field_rhs<T: Real>(model: &CompartmentalModel) -> RhsSpec<T> {
    let sys = MeanFieldSystem::new(model, None);
    RhsSpec::new(BuilderKind::MeanField { eliminated: None }, model, Box::new(sys))
}

/// Mean-field system on the simplex: compartment `eliminated` is `1 - sum of the others`.
pub fn mean_field_rhs_eliminating<T: Real>(model: &CompartmentalModel, eliminated: usize) -> RhsSpec<T> {
    let sys = MeanFieldSystem::new(model, Some(eliminated));
    let name = model.compartments()[eliminated].clone();
    RhsSpec::new(BuilderKind::MeanField { eliminated: Some(name) }, model, Box::new(sys))
}
