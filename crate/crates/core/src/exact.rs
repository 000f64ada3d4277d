//! Exact solution of the joint master equation for small graphs.
//!
//! Configurations are encoded in mixed radix with node 0 as the least
//! significant digit: `s = sum_i x_i * |C|^i`. The generator uses the row
//! convention (`Q[s][s']` is the rate of `s -> s'`) and distributions evolve
//! as `dpi/dt = pi Q`.

use crate::bundle::{Role, RunMetadata, SeriesKey, TrajectoryBundle};
use crate::grid::{GridError, TimeGrid};
use crate::integrate::{integrate_fixed, IntegrateError};
use crate::model::{external_rate, CompartmentalModel, Configuration};
use rayon::prelude::*;
use thiserror::Error;

/// Default limit on `|C|^n`.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;
/// Environment variable overriding [`DEFAULT_STATE_CAP`].
pub const STATE_CAP_ENV: &str = "SPREADBOUND_STATE_CAP";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("state space has {states} configurations, cap is {cap}")]
    StateSpaceTooLarge { states: f64, cap: usize },
    #[error(transparent)]
    GridInvalid(#[from] GridError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("initial distribution has {got} entries, expected {expected}")]
    BadInitial { expected: usize, got: usize },
}

/// The cap in effect: `SPREADBOUND_STATE_CAP` if set and parseable, else the default.
pub fn state_cap() -> usize {
    std::env::var(STATE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STATE_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigSpace {
    pub n: usize,
    pub nc: usize,
    pub size: usize,
}

impl ConfigSpace {
    pub fn new(n: usize, nc: usize, cap: usize) -> Result<Self, ExactError> {
        let states = (nc as f64).powi(n as i32);
        if states > cap as f64 {
            return Err(ExactError::StateSpaceTooLarge { states, cap });
        }
        Ok(Self {
            n,
            nc,
            size: nc.pow(n as u32),
        })
    }

    pub fn for_model(model: &CompartmentalModel, cap: usize) -> Result<Self, ExactError> {
        Self::new(model.node_count(), model.compartment_count(), cap)
    }

    pub fn encode(&self, config: &Configuration) -> usize {
        config.0.iter().rev().fold(0, |acc, &c| acc * self.nc + c)
    }

    pub fn decode(&self, mut s: usize) -> Configuration {
        let mut x = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            x.push(s % self.nc);
            s /= self.nc;
        }
        Configuration(x)
    }

    /// `nc^i`, the weight of node `i`'s digit.
    pub fn stride(&self, i: usize) -> usize {
        self.nc.pow(i as u32)
    }

    pub fn digit(&self, s: usize, i: usize) -> usize {
        (s / self.stride(i)) % self.nc
    }
}

/// Sparse generator in row-compressed form; each row lists its off-diagonal
/// entries in ascending column order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub space: ConfigSpace,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.space.size
    }

    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[s]..self.row_start[s + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self, s: usize) -> f64 {
        self.diag[s]
    }

    /// Dense entry lookup (tests and small debugging only).
    pub fn get(&self, s: usize, t: usize) -> f64 {
        if s == t {
            return self.diag[s];
        }
        self.row(s).find(|&(c, _)| c == t).map_or(0.0, |(_, v)| v)
    }

    /// `max_s sum_t |Q[s][t]|`.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim())
            .map(|s| self.diag[s].abs() + self.row(s).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = pi Q`.
    pub fn left_multiply(&self, pi: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o = pi[s] * self.diag[s];
        }
        for (s, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (t, v) in self.row(s) {
                out[t] += p * v;
            }
        }
    }
}

/// Generator of the process on the full configuration space, using [`state_cap`].
pub fn build_generator(model: &CompartmentalModel) -> Result<GeneratorMatrix, ExactError> {
    build_generator_capped(model, state_cap())
}

pub fn build_generator_capped(model: &CompartmentalModel, cap: usize) -> Result<GeneratorMatrix, ExactError> {
    let space = ConfigSpace::for_model(model, cap)?;
    let rows: Vec<Vec<(usize, f64)>> = (0..space.size)
        .into_par_iter()
        .map(|s| {
            let config = space.decode(s);
            let mut row = Vec::new();
            for i in 0..space.n {
                let c = config.get(i);
                let base = s - c * space.stride(i);
                for t in model.internal_out(c) {
                    let r = t.rates[i];
                    if r > 0.0 {
                        row.push((base + t.to * space.stride(i), r));
                    }
                }
                for t in model.external_out(c) {
                    let r = external_rate(t, i, &config);
                    if r > 0.0 {
                        row.push((base + t.to * space.stride(i), r));
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    let mut row_start = Vec::with_capacity(space.size + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(space.size);
    row_start.push(0);
    for row in rows {
        let mut out = 0.0;
        for (t, v) in row {
            cols.push(t);
            vals.push(v);
            out += v;
        }
        diag.push(-out);
        row_start.push(cols.len());
    }
    Ok(GeneratorMatrix {
        space,
        row_start,
        cols,
        vals,
        diag,
    })
}

/// Probability vector over all configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub space: ConfigSpace,
    pub probs: Vec<f64>,
}

impl JointDistribution {
    pub fn point(space: ConfigSpace, config: &Configuration) -> Self {
        let mut probs = vec![0.0; space.size];
        probs[space.encode(config)] = 1.0;
        Self { space, probs }
    }

    /// Independent nodes with marginals `marginals[i * nc + c]`.
    pub fn product(space: ConfigSpace, marginals: &[f64]) -> Result<Self, ExactError> {
        if marginals.len() != space.n * space.nc {
            return Err(ExactError::BadInitial {
                expected: space.n * space.nc,
                got: marginals.len(),
            });
        }
        let probs = (0..space.size)
            .map(|s| {
                let mut p = 1.0;
                for i in 0..space.n {
                    p *= marginals[i * space.nc + space.digit(s, i)];
                }
                p
            })
            .collect();
        Ok(Self { space, probs })
    }

    /// `p_i^c = sum of pi over configurations with x_i = c`, stored at `i * nc + c`.
    pub fn marginals(&self) -> Vec<f64> {
        marginals_of(&self.space, &self.probs)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `Pr(x_i = a, x_j = b)`.
    pub fn joint(&self, i: usize, a: usize, j: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for (s, &p) in self.probs.iter().enumerate() {
            if self.space.digit(s, i) == a && self.space.digit(s, j) == b {
                acc += p;
            }
        }
        acc
    }

    /// `Pr(x_i = a, x_j = b) - p_i^a p_j^b`.
    pub fn covariance(&self, i: usize, a: usize, j: usize, b: usize) -> f64 {
        let m = self.marginals();
        self.joint(i, a, j, b) - m[i * self.space.nc + a] * m[j * self.space.nc + b]
    }
}

fn marginals_of(space: &ConfigSpace, probs: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; space.n * space.nc];
    for (s, &p) in probs.iter().enumerate() {
        let mut rest = s;
        for i in 0..space.n {
            m[i * space.nc + rest % space.nc] += p;
            rest /= space.nc;
        }
    }
    m
}

/// Master-equation solution on a grid.
#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub space: ConfigSpace,
    pub grid: Vec<f64>,
    /// `marginals[k][i * nc + c]` at grid time `k`.
    pub marginals: Vec<Vec<f64>>,
    /// Joint distributions at each grid time (kept when requested).
    pub joints: Option<Vec<JointDistribution>>,
    /// RK4 step used.
    pub step: f64,
}

impl MasterSolution {
    pub fn marginal_series(&self, i: usize, c: usize) -> Vec<f64> {
        self.marginals.iter().map(|m| m[i * self.space.nc + c]).collect()
    }

    pub fn to_bundle(&self, compartments: &[String], mut meta: RunMetadata) -> TrajectoryBundle {
        meta.integrator = Some(serde_json::json!({"method": "rk4", "step": self.step}));
        let mut b = TrajectoryBundle::new(self.grid.clone(), compartments.to_vec(), self.space.n, meta);
        for i in 0..self.space.n {
            for c in 0..self.space.nc {
                b.insert(SeriesKey::new(i, c, Role::Exact), self.marginal_series(i, c))
                    .expect("series shaped to grid");
            }
        }
        b
    }
}

/// Options for [`solve_master_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterOptions {
    pub max_step: f64,
    pub keep_joint: bool,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            max_step: 0.01,
            keep_joint: true,
        }
    }
}

/// Solves `dpi/dt = pi Q` with RK4 at `h <= min(0.01, 0.1 / |Q|_inf)`, keeping the joints.
pub fn solve_master(
    model: &CompartmentalModel,
    init: &JointDistribution,
    grid: &TimeGrid,
) -> Result<MasterSolution, ExactError> {
    solve_master_with(model, init, grid, MasterOptions::default())
}

pub fn solve_master_with(
    model: &CompartmentalModel,
    init: &JointDistribution,
    grid: &TimeGrid,
    opts: MasterOptions,
) -> Result<MasterSolution, ExactError> {
    let q = build_generator(model)?;
    solve_with_generator(&q, init, grid, opts)
}

pub fn solve_with_generator(
    q: &GeneratorMatrix,
    init: &JointDistribution,
    grid: &TimeGrid,
    opts: MasterOptions,
) -> Result<MasterSolution, ExactError> {
    let space = q.space;
    if init.probs.len() != space.size {
        return Err(ExactError::BadInitial {
            expected: space.size,
            got: init.probs.len(),
        });
    }
    let norm = q.inf_norm();
    let h = if norm > 0.0 { opts.max_step.min(0.1 / norm) } else { opts.max_step };
    let field = (space.size, |pi: &[f64], out: &mut [f64]| q.left_multiply(pi, out));
    let mut marginals = Vec::with_capacity(grid.len());
    let mut joints = opts.keep_joint.then(Vec::new);
    integrate_fixed(&field, init.probs.clone(), grid, h, |_| {}, |_, pi| {
        marginals.push(marginals_of(&space, pi));
        if let Some(j) = joints.as_mut() {
            j.push(JointDistribution {
                space,
                probs: pi.to_vec(),
            });
        }
    })?;
    Ok(MasterSolution {
        space,
        grid: grid.times().to_vec(),
        marginals,
        joints,
        step: h,
    })
}

/// `sigma(t) = Pr(x_i = a, x_j = b) - p_i^a p_j^b` read from the stored joints.
///
/// Returns `None` when the solution was computed without joints.
pub fn pair_covariance(sol: &MasterSolution, (i, a): (usize, usize), (j, b): (usize, usize)) -> Option<Vec<f64>> {
    let nc = sol.space.nc;
    let joints = sol.joints.as_ref()?;
    Some(
        joints
            .iter()
            .zip(&sol.marginals)
            .map(|(jd, m)| {
                let both = if i == j {
                    if a == b {
                        m[i * nc + a]
                    } else {
                        0.0
                    }
                } else {
                    jd.joint(i, a, j, b)
                };
                both - m[i * nc + a] * m[j * nc + b]
            })
            .collect(),
    )
}
