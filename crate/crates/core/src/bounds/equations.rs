//! Per-(node, compartment) term lists compiled from a model.
//!
//! The first-moment dynamics of `p_i^c` are a sum of four groups, evaluated
//! in this order: external gains (`c' -> c` driven by node `j` in affector
//! `a`), external losses (`c -> c'`), internal gains and internal losses.
//! Within a group terms are ascending in `(c', a, j)`. Every approximating
//! system walks the same lists and only differs in how it closes the joint
//! probability `Pr(x_i = ., x_j = a)` of each external term.

use super::ledger::{CorrelationLedger, CovarianceSign};
use crate::model::CompartmentalModel;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub(crate) struct GainTerm<T> {
    pub from: usize,
    pub j: usize,
    pub a: usize,
    pub beta: T,
    /// Product closure licensed when the joint is needed from above (upper equation).
    pub upper_product: bool,
    /// Product closure licensed when the joint is needed from below (lower equation).
    pub lower_product: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct LossTerm<T> {
    pub j: usize,
    pub a: usize,
    pub beta: T,
    pub upper_product: bool,
    pub lower_product: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Equation<T> {
    pub ext_gain: Vec<GainTerm<T>>,
    pub ext_loss: Vec<LossTerm<T>>,
    pub int_gain: Vec<(usize, T)>,
    pub int_loss: Vec<T>,
}

/// Equations for every `(i, c)`, stored at `i * nc + c`.
pub(crate) fn compile<T: Real>(model: &CompartmentalModel, ledger: &CorrelationLedger) -> Vec<Equation<T>> {
    let n = model.node_count();
    let nc = model.compartment_count();
    let mut out = Vec::with_capacity(n * nc);
    for i in 0..n {
        for c in 0..nc {
            let mut eq = Equation {
                ext_gain: Vec::new(),
                ext_loss: Vec::new(),
                int_gain: Vec::new(),
                int_loss: Vec::new(),
            };
            for t in model.external_in(c) {
                for k in &t.incoming[i] {
                    let s = ledger.sign(t.from, k.affector);
                    eq.ext_gain.push(GainTerm {
                        from: t.from,
                        j: k.source,
                        a: k.affector,
                        beta: T::lit(k.rate),
                        upper_product: s == CovarianceSign::Nonpositive,
                        lower_product: s == CovarianceSign::Nonnegative,
                    });
                }
            }
            for t in model.external_out(c) {
                for k in &t.incoming[i] {
                    let s = ledger.sign(c, k.affector);
                    eq.ext_loss.push(LossTerm {
                        j: k.source,
                        a: k.affector,
                        beta: T::lit(k.rate),
                        upper_product: s == CovarianceSign::Nonnegative,
                        lower_product: s == CovarianceSign::Nonpositive,
                    });
                }
            }
            for t in model.internal_in(c) {
                if t.rates[i] != 0.0 {
                    eq.int_gain.push((t.from, T::lit(t.rates[i])));
                }
            }
            for t in model.internal_out(c) {
                if t.rates[i] != 0.0 {
                    eq.int_loss.push(T::lit(t.rates[i]));
                }
            }
            out.push(eq);
        }
    }
    out
}
