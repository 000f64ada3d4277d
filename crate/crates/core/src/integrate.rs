//! Fixed-step classical Runge–Kutta integration.
//!
//! Every output time is reached exactly: each grid interval `[t_k, t_{k+1}]`
//! is cut into `m = ceil(len / h_max)` equal steps, so no interpolation is
//! ever needed and repeated runs are bit-identical.

use crate::grid::{GridError, TimeGrid};
use crate::model::CompartmentalModel;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("derivative component {index} is not finite at t = {time}")]
    NonFiniteDerivative { time: f64, index: usize },
    #[error(transparent)]
    GridInvalid(#[from] GridError),
    #[error("initial state has {got} entries, system expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
}

/// An autonomous vector field `x' = F(x)`.
pub trait VectorField<T> {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[T], dx: &mut [T]);
}

impl<T, F: Fn(&[T], &mut [T])> VectorField<T> for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, x: &[T], dx: &mut [T]) {
        (self.1)(x, dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPolicy {
    pub method: Method,
    /// Upper limit on the step, in model time units.
    pub max_step: f64,
    /// Clamp bounding states into the unit box after each step.
    pub clip: bool,
}

impl Default for IntegrationPolicy {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            max_step: 0.01,
            clip: true,
        }
    }
}

impl IntegrationPolicy {
    /// `min(max_step, 0.1 / L)`, or `max_step` for a zero constant.
    pub fn step_for(&self, lipschitz: f64) -> f64 {
        if lipschitz > 0.0 {
            self.max_step.min(0.1 / lipschitz)
        } else {
            self.max_step
        }
    }
}

/// Rate bound used to pick the integration step.
///
/// For each node `i` and compartment `c` the total inbound rate (external
/// couplings of every transition into `c` plus internal rates into `c`) and
/// the total outbound rate are added; the constant is the maximum over all
/// `(i, c)`.
pub fn lipschitz_constant(model: &CompartmentalModel) -> f64 {
    let mut best = 0.0f64;
    for i in 0..model.node_count() {
        for c in 0..model.compartment_count() {
            let mut inbound = 0.0;
            for t in model.external_in(c) {
                inbound += t.incoming[i].iter().map(|k| k.rate).sum::<f64>();
            }
            for t in model.internal_in(c) {
                inbound += t.rates[i];
            }
            let mut outbound = 0.0;
            for t in model.external_out(c) {
                outbound += t.incoming[i].iter().map(|k| k.rate).sum::<f64>();
            }
            for t in model.internal_out(c) {
                outbound += t.rates[i];
            }
            best = best.max(inbound.abs() + outbound.abs());
        }
    }
    best
}

/// Number of equal sub-steps and their length for an interval.
pub fn substeps(interval: f64, h_max: f64) -> (usize, f64) {
    let m = ((interval / h_max) - 1e-9).ceil().max(1.0) as usize;
    (m, interval / m as f64)
}

/// Scratch buffers for one RK4 stepper.
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Real> Rk4<T> {
    pub fn new(dim: usize) -> Self {
        let z = vec![T::zero(); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    /// Advances `x` by one step of length `h`; `time` is only used for error reports.
    pub fn step<F: VectorField<T> + ?Sized>(
        &mut self,
        field: &F,
        x: &mut [T],
        h: T,
        time: f64,
    ) -> Result<(), IntegrateError> {
        let two = T::lit(2.0);
        let half = h / two;
        field.eval(x, &mut self.k1);
        check_finite(&self.k1, time)?;
        for (t, (xi, k)) in self.tmp.iter_mut().zip(x.iter().zip(&self.k1)) {
            *t = *xi + half * *k;
        }
        field.eval(&self.tmp, &mut self.k2);
        check_finite(&self.k2, time)?;
        for (t, (xi, k)) in self.tmp.iter_mut().zip(x.iter().zip(&self.k2)) {
            *t = *xi + half * *k;
        }
        field.eval(&self.tmp, &mut self.k3);
        check_finite(&self.k3, time)?;
        for (t, (xi, k)) in self.tmp.iter_mut().zip(x.iter().zip(&self.k3)) {
            *t = *xi + h * *k;
        }
        field.eval(&self.tmp, &mut self.k4);
        check_finite(&self.k4, time)?;
        let sixth = h / T::lit(6.0);
        for (idx, xi) in x.iter_mut().enumerate() {
            let incr = self.k1[idx] + two * self.k2[idx] + two * self.k3[idx] + self.k4[idx];
            *xi = *xi + sixth * incr;
        }
        Ok(())
    }
}

fn check_finite<T: Real>(v: &[T], time: f64) -> Result<(), IntegrateError> {
    match v.iter().position(|x| !x.is_finite_value()) {
        Some(index) => Err(IntegrateError::NonFiniteDerivative { time, index }),
        None => Ok(()),
    }
}

/// Integrates `field` from `x0` at `grid.start()` across the grid.
///
/// `after_step` runs after every RK4 step (clipping hooks live there) and
/// `record(k, x)` is called at each grid index, starting with `k = 0` for `x0`.
pub fn integrate_fixed<T, F>(
    field: &F,
    x0: Vec<T>,
    grid: &TimeGrid,
    h_max: f64,
    mut after_step: impl FnMut(&mut [T]),
    mut record: impl FnMut(usize, &[T]),
) -> Result<Vec<T>, IntegrateError>
where
    T: Real,
    F: VectorField<T> + ?Sized,
{
    if !(h_max > 0.0) || !h_max.is_finite() {
        return Err(IntegrateError::BadStep(h_max));
    }
    if x0.len() != field.dim() {
        return Err(IntegrateError::DimensionMismatch {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    let mut x = x0;
    let mut stepper = Rk4::new(x.len());
    record(0, &x);
    let times = grid.times();
    for k in 1..times.len() {
        let (m, h) = substeps(times[k] - times[k - 1], h_max);
        let h_t = T::lit(h);
        for s in 0..m {
            stepper.step(field, &mut x, h_t, times[k - 1] + s as f64 * h)?;
            after_step(&mut x);
        }
        record(k, &x);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::RawModel;

    fn decay(rate: f64) -> (usize, impl Fn(&[f64], &mut [f64])) {
        (1, move |x: &[f64], dx: &mut [f64]| dx[0] = -rate * x[0])
    }

    fn solve_decay(h: f64, t: f64) -> f64 {
        let grid = TimeGrid::new(vec![0.0, t]).unwrap();
        integrate_fixed(&decay(0.5), vec![1.0], &grid, h, |_| {}, |_, _| {}).unwrap()[0]
    }

    #[test]
    fn scalar_decay_matches_closed_form() {
        let x = solve_decay(0.01, 2.0);
        assert!((x - (-1.0f64).exp()).abs() < 1e-8, "{x}");
    }

    #[test]
    fn fourth_order_convergence() {
        // error ratio under step halving approaches 2^4 = 16
        let exact = (-1.0f64).exp();
        let e1 = (solve_decay(0.2, 2.0) - exact).abs();
        let e2 = (solve_decay(0.1, 2.0) - exact).abs();
        assert!(e1 / e2 >= 14.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn zero_field_is_constant() {
        let grid = TimeGrid::uniform(0.0, 1.0, 0.1).unwrap();
        let field = (3usize, |_: &[f64], dx: &mut [f64]| dx.fill(0.0));
        let mut seen = Vec::new();
        integrate_fixed(&field, vec![0.1, 0.2, 0.7], &grid, 0.01, |_| {}, |_, x| {
            seen.push(x.to_vec())
        })
        .unwrap();
        assert_eq!(seen.len(), 11);
        assert!(seen.iter().all(|x| x == &[0.1, 0.2, 0.7]));
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let grid = TimeGrid::uniform(0.0, 1.0, 0.5).unwrap();
        let field = (1usize, |_: &[f64], dx: &mut [f64]| dx[0] = f64::NAN);
        let err = integrate_fixed(&field, vec![0.0], &grid, 0.1, |_| {}, |_, _| {}).unwrap_err();
        assert!(matches!(err, IntegrateError::NonFiniteDerivative { index: 0, .. }));
    }

    #[test]
    fn substeps_hit_grid_points() {
        assert_eq!(substeps(0.1, 0.01), (10, 0.01));
        let (m, h) = substeps(0.1, 0.03);
        assert_eq!(m, 4);
        assert!((h - 0.025).abs() < 1e-15);
        assert_eq!(substeps(0.01, 0.05).0, 1);
    }

    #[test]
    fn lipschitz_examples() {
        let chain = RawModel::new(["A", "B"], 1).internal_all("A", "B", 0.5).validate().unwrap();
        assert_eq!(lipschitz_constant(&chain), 0.5);
        let sis = RawModel::new(["S", "I"], 2)
            .with_graph(Graph::complete(2).unwrap())
            .external_on_graph("S", "I", &[("I", 1.0)])
            .internal_all("I", "S", 1.0)
            .validate()
            .unwrap();
        assert_eq!(lipschitz_constant(&sis), 2.0);
        let null = RawModel::new(["A", "B"], 3).internal_all("A", "B", 0.0).validate().unwrap();
        assert_eq!(lipschitz_constant(&null), 0.0);
        let p = IntegrationPolicy::default();
        assert_eq!(p.step_for(0.0), 0.01);
        assert_eq!(p.step_for(20.0), 0.005);
    }
}
