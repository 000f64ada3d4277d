//! Mapping between flat ODE state vectors and per-(node, compartment) estimates.
//!
//! A system tracks some compartments explicitly; at most one more may be
//! derived from the others through the simplex identity. Paired systems store
//! the upper block first, then the lower block, each node-major:
//! `slot(i, k) = i * tracked.len() + k`.

use crate::model::{CompartmentalModel, Configuration};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("compartment index {0} out of range")]
    BadCompartment(usize),
    #[error("tracked and derived compartments must partition the compartment set")]
    NotAPartition,
    #[error("state has {got} entries, layout expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("initial configuration does not fit the model")]
    BadConfiguration,
    #[error("initial probabilities for node {0} are not a distribution")]
    BadDistribution(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub n: usize,
    pub nc: usize,
    pub tracked: Vec<usize>,
    pub derived: Option<usize>,
    pub paired: bool,
}

impl StateLayout {
    /// Every compartment tracked.
    pub fn full(n: usize, nc: usize, paired: bool) -> Self {
        Self {
            n,
            nc,
            tracked: (0..nc).collect(),
            derived: None,
            paired,
        }
    }

    /// All compartments except `derived`, which is reconstructed from the simplex.
    pub fn eliminating(n: usize, nc: usize, derived: usize, paired: bool) -> Result<Self, LayoutError> {
        if derived >= nc {
            return Err(LayoutError::BadCompartment(derived));
        }
        Ok(Self {
            n,
            nc,
            tracked: (0..nc).filter(|&c| c != derived).collect(),
            derived: Some(derived),
            paired,
        })
    }

    pub fn custom(n: usize, nc: usize, tracked: Vec<usize>, derived: Option<usize>, paired: bool) -> Result<Self, LayoutError> {
        let mut seen = vec![false; nc];
        for &c in tracked.iter().chain(derived.iter()) {
            if c >= nc {
                return Err(LayoutError::BadCompartment(c));
            }
            if seen[c] {
                return Err(LayoutError::NotAPartition);
            }
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(LayoutError::NotAPartition);
        }
        Ok(Self {
            n,
            nc,
            tracked,
            derived,
            paired,
        })
    }

    pub fn block(&self) -> usize {
        self.n * self.tracked.len()
    }

    pub fn dim(&self) -> usize {
        if self.paired {
            2 * self.block()
        } else {
            self.block()
        }
    }

    pub fn slot(&self, node: usize, k: usize) -> usize {
        node * self.tracked.len() + k
    }

    /// Position of compartment `c` among the tracked ones.
    pub fn tracked_position(&self, c: usize) -> Option<usize> {
        self.tracked.iter().position(|&t| t == c)
    }

    /// Initial state with upper = lower = the given marginals (`probs[i * nc + c]`).
    pub fn initial_state<T: Real>(&self, probs: &[f64]) -> Result<Vec<T>, LayoutError> {
        if probs.len() != self.n * self.nc {
            return Err(LayoutError::Length {
                expected: self.n * self.nc,
                got: probs.len(),
            });
        }
        for i in 0..self.n {
            let row = &probs[i * self.nc..(i + 1) * self.nc];
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(LayoutError::BadDistribution(i));
            }
        }
        let mut block = Vec::with_capacity(self.block());
        for i in 0..self.n {
            for &c in &self.tracked {
                block.push(T::lit(probs[i * self.nc + c]));
            }
        }
        if self.paired {
            let lower = block.clone();
            block.extend(lower);
        }
        Ok(block)
    }

    /// Reads the full per-(node, compartment) estimates out of a state vector.
    pub fn read<T: Real>(&self, x: &[T]) -> BoundState<T> {
        let b = self.block();
        let (up, lo) = if self.paired { (&x[..b], &x[b..2 * b]) } else { (&x[..b], &x[..b]) };
        let mut upper = vec![T::zero(); self.n * self.nc];
        let mut lower = vec![T::zero(); self.n * self.nc];
        for i in 0..self.n {
            for (k, &c) in self.tracked.iter().enumerate() {
                upper[i * self.nc + c] = up[self.slot(i, k)];
                lower[i * self.nc + c] = lo[self.slot(i, k)];
            }
            if let Some(d) = self.derived {
                let mut su = T::zero();
                let mut sl = T::zero();
                for k in 0..self.tracked.len() {
                    su = su + up[self.slot(i, k)];
                    sl = sl + lo[self.slot(i, k)];
                }
                upper[i * self.nc + d] = T::one() - sl;
                lower[i * self.nc + d] = T::one() - su;
            }
        }
        BoundState {
            n: self.n,
            nc: self.nc,
            upper,
            lower,
        }
    }
}

/// Per-(node, compartment) upper and lower estimates, `index = i * nc + c`.
/// A point estimate has `upper == lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState<T> {
    pub n: usize,
    pub nc: usize,
    pub upper: Vec<T>,
    pub lower: Vec<T>,
}

impl<T: Real> BoundState<T> {
    pub fn point(n: usize, nc: usize, values: Vec<T>) -> Self {
        Self {
            n,
            nc,
            upper: values.clone(),
            lower: values,
        }
    }

    pub fn upper(&self, i: usize, c: usize) -> T {
        self.upper[i * self.nc + c]
    }

    pub fn lower(&self, i: usize, c: usize) -> T {
        self.lower[i * self.nc + c]
    }

    pub fn is_consistent(&self) -> bool {
        self.upper.iter().zip(&self.lower).all(|(u, l)| {
            *l <= *u && *l >= T::zero() && *u <= T::one()
        })
    }
}

/// Indicator marginals of a configuration, `probs[i * nc + c]`.
pub fn configuration_marginals(model: &CompartmentalModel, config: &Configuration) -> Result<Vec<f64>, LayoutError> {
    if !config.is_valid_for(model) {
        return Err(LayoutError::BadConfiguration);
    }
    let nc = model.compartment_count();
    let mut p = vec![0.0; model.node_count() * nc];
    for (i, &c) in config.0.iter().enumerate() {
        p[i * nc + c] = 1.0;
    }
    Ok(p)
}
