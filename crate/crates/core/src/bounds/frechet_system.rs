//! Paired upper/lower systems built from Fréchet closures.
//!
//! In the `(i, c)` equation the own coordinate appears as its own estimate;
//! every other coordinate enters as its upper estimate when the term needs to
//! be large and as its lower estimate when it needs to be small:
//!
//! ```text
//! upper' = sum min{1 - U_i^c, U_j^a} b - sum max{0, U_i^c + L_j^a - 1} b
//!        + sum (1 - U_i^c) d_in - sum U_i^c d_out
//! lower' = sum max{0, L_i^c' + L_j^a - 1} b - sum min{L_i^c, U_j^a} b
//!        + sum L_i^c' d_in - sum L_i^c d_out
//! ```
//!
//! With a correlation ledger, a joint term of distinct nodes whose covariance
//! sign is declared is closed with the product of the same estimates instead
//! (a product is a lower bound on the joint under nonnegative covariance, an
//! upper bound under nonpositive covariance).

use super::equations::{compile, Equation};
use super::frechet::{joint_lower, joint_upper};
use super::layout::StateLayout;
use super::ledger::CorrelationLedger;
use super::system::{ApproxSystem, BuilderKind, OwnGain, RhsSpec};
use crate::model::CompartmentalModel;
use crate::scalar::Real;

pub struct FrechetSystem<T> {
    layout: StateLayout,
    equations: Vec<Equation<T>>,
    own_gain: OwnGain,
}

impl<T: Real> FrechetSystem<T> {
    pub fn new(model: &CompartmentalModel, ledger: &CorrelationLedger, own_gain: OwnGain) -> Self {
        Self {
            layout: StateLayout::full(model.node_count(), model.compartment_count(), true),
            equations: compile(model, ledger),
            own_gain,
        }
    }

    fn upper_rate(&self, i: usize, c: usize, up: &[T], lo: &[T]) -> T {
        let nc = self.layout.nc;
        let eq = &self.equations[i * nc + c];
        let own = up[i * nc + c];
        let one = T::one();
        let mut acc = T::zero();
        for g in &eq.ext_gain {
            let other = match self.own_gain {
                OwnGain::Complement => one - own,
                OwnGain::Tracked => up[i * nc + g.from],
            };
            let pj = up[g.j * nc + g.a];
            let joint = if g.upper_product { other * pj } else { joint_upper(other, pj) };
            acc = acc + joint * g.beta;
        }
        for l in &eq.ext_loss {
            let pj = lo[l.j * nc + l.a];
            let joint = if l.upper_product { own * pj } else { joint_lower(own, pj) };
            acc = acc - joint * l.beta;
        }
        for &(from, d) in &eq.int_gain {
            let other = match self.own_gain {
                OwnGain::Complement => one - own,
                OwnGain::Tracked => up[i * nc + from],
            };
            acc = acc + other * d;
        }
        for &d in &eq.int_loss {
            acc = acc - own * d;
        }
        acc
    }

    fn lower_rate(&self, i: usize, c: usize, up: &[T], lo: &[T]) -> T {
        let nc = self.layout.nc;
        let eq = &self.equations[i * nc + c];
        let own = lo[i * nc + c];
        let mut acc = T::zero();
        for g in &eq.ext_gain {
            let pi = lo[i * nc + g.from];
            let pj = lo[g.j * nc + g.a];
            let joint = if g.lower_product { pi * pj } else { joint_lower(pi, pj) };
            acc = acc + joint * g.beta;
        }
        for l in &eq.ext_loss {
            let pj = up[l.j * nc + l.a];
            let joint = if l.lower_product { own * pj } else { joint_upper(own, pj) };
            acc = acc - joint * l.beta;
        }
        for &(from, d) in &eq.int_gain {
            acc = acc + lo[i * nc + from] * d;
        }
        for &d in &eq.int_loss {
            acc = acc - own * d;
        }
        acc
    }
}

impl<T: Real> ApproxSystem<T> for FrechetSystem<T> {
    fn layout(&self) -> &StateLayout {
        &self.layout
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        let b = self.layout.block();
        let (up, lo) = x.split_at(b);
        let (dup, dlo) = dx.split_at_mut(b);
        let nc = self.layout.nc;
        for i in 0..self.layout.n {
            for c in 0..nc {
                dup[i * nc + c] = self.upper_rate(i, c, up, lo);
                dlo[i * nc + c] = self.lower_rate(i, c, up, lo);
            }
        }
    }
}

/// The distribution-free bounding system.
pub fn generic_bounding_rhs<T: Real>(model: &CompartmentalModel) -> RhsSpec<T> {
    generic_bounding_rhs_with(model, OwnGain::Complement)
}

pub fn generic_bounding_rhs_with<T: Real>(model: &CompartmentalModel, own_gain: OwnGain) -> RhsSpec<T> {
    let sys = FrechetSystem::new(model, &CorrelationLedger::new(), own_gain);
    RhsSpec::new(BuilderKind::Generic { own_gain }, model, Box::new(sys))
}

/// Bounding system tightened by declared covariance signs.
pub fn refined_bounding_rhs<T: Real>(model: &CompartmentalModel, ledger: &CorrelationLedger) -> RhsSpec<T> {
    refined_bounding_rhs_with(model, ledger, OwnGain::Complement)
}

pub fn refined_bounding_rhs_with<T: Real>(
    model: &CompartmentalModel,
    ledger: &CorrelationLedger,
    own_gain: OwnGain,
) -> RhsSpec<T> {
    let sys = FrechetSystem::new(model, ledger, own_gain);
    let kind = BuilderKind::Refined {
        own_gain,
        ledger: ledger.describe(model.compartments()),
    };
    RhsSpec::new(kind, model, Box::new(sys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::ledger::CovarianceSign;
    use crate::graph::Graph;
    use crate::model::RawModel;
    use num_rational::Ratio;

    fn sis_k2(beta: f64, delta: f64) -> CompartmentalModel {
        RawModel::new(["S", "I"], 2)
            .with_graph(Graph::complete(2).unwrap())
            .external_on_graph("S", "I", &[("I", beta)])
            .internal_all("I", "S", delta)
            .validate()
            .unwrap()
    }

    #[test]
    fn corner_evaluation() {
        let rhs = generic_bounding_rhs::<f64>(&sis_k2(1.0, 1.0));
        // both nodes certainly infected
        let x = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let dx = rhs.eval_vec(&x);
        assert_eq!(dx[1], -1.0);
        assert_eq!(dx[0], 1.0);
        assert_eq!(dx[5], -1.0);
        assert_eq!(dx[4], 1.0);
    }

    #[test]
    fn empty_ledger_matches_generic() {
        let m = sis_k2(0.7, 0.4);
        let g = generic_bounding_rhs::<f64>(&m);
        let r = refined_bounding_rhs::<f64>(&m, &CorrelationLedger::new());
        let x = [0.3, 0.6, 0.5, 0.45, 0.2, 0.3, 0.4, 0.4];
        assert_eq!(g.eval_vec(&x), r.eval_vec(&x));
    }

    #[test]
    fn refined_upper_infection_is_mean_field_form() {
        let m = sis_k2(0.7, 0.4);
        let ledger = CorrelationLedger::new()
            .with(1, 1, CovarianceSign::Nonnegative)
            .with(0, 1, CovarianceSign::Nonpositive);
        let r = refined_bounding_rhs::<f64>(&m, &ledger);
        let x = [0.3, 0.6, 0.5, 0.45, 0.2, 0.3, 0.4, 0.4];
        let dx = r.eval_vec(&x);
        let expect = (1.0 - 0.6) * 0.45 * 0.7 - 0.6 * 0.4;
        assert!((dx[1] - expect).abs() < 1e-15);
    }

    #[test]
    fn rational_evaluation_is_exact() {
        let m = sis_k2(0.5, 0.25);
        let rhs = generic_bounding_rhs::<Ratio<i64>>(&m);
        let r = |a, b| Ratio::new(a, b);
        let x = [r(1, 2), r(1, 2), r(1, 4), r(3, 4), r(1, 2), r(1, 2), r(1, 4), r(3, 4)];
        let dx = rhs.eval_vec(&x);
        // upper I of node 0: min{1/2, 3/4} * 1/2 - 1/2 * 1/4
        assert_eq!(dx[1], r(1, 8));
    }
}
