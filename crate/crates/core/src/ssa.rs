//! Exact stochastic simulation (Gillespie direct method) and Monte Carlo ensembles.
//!
//! Each event draws two uniforms from the trial's stream: the first gives the
//! waiting time `-ln(1 - u) / R`, the second selects the event by walking the
//! cumulative rates (nodes ascending, then target compartments ascending) with
//! a strict `<` test; the last category with nonzero rate absorbs rounding
//! residue. After an event only the moved node and the nodes it influences
//! have their rates recomputed.

use crate::bundle::{Role, RunMetadata, SeriesKey, TrajectoryBundle};
use crate::grid::TimeGrid;
use crate::model::{external_rate, CompartmentalModel, Configuration};
use crate::rng::{self, SSA_DOMAIN};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsaError {
    #[error("initial condition does not fit the model")]
    BadInitial,
    #[error("need at least one trial")]
    NoTrials,
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("grid starts at {0}; simulations start at 0")]
    GridStart(f64),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub node: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPath {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl EventPath {
    /// State at time `t` (right-continuous: an event at exactly `t` has happened).
    pub fn state_at(&self, t: f64) -> Configuration {
        let mut x = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            x.0[e.node] = e.to;
        }
        x
    }
}

struct Simulator<'m> {
    model: &'m CompartmentalModel,
    nc: usize,
    state: Configuration,
    /// `rates[i * nc + c']`: rate of node `i` moving to `c'`.
    rates: Vec<f64>,
    node_total: Vec<f64>,
}

impl<'m> Simulator<'m> {
    fn new(model: &'m CompartmentalModel, state: Configuration) -> Self {
        let n = model.node_count();
        let nc = model.compartment_count();
        let mut sim = Self {
            model,
            nc,
            state,
            rates: vec![0.0; n * nc],
            node_total: vec![0.0; n],
        };
        for i in 0..n {
            sim.refresh(i);
        }
        sim
    }

    fn refresh(&mut self, i: usize) {
        let nc = self.nc;
        let row = &mut self.rates[i * nc..(i + 1) * nc];
        row.fill(0.0);
        let c = self.state.get(i);
        for t in self.model.internal_out(c) {
            row[t.to] = t.rates[i];
        }
        for t in self.model.external_out(c) {
            row[t.to] = external_rate(t, i, &self.state);
        }
        self.node_total[i] = row.iter().sum();
    }

    fn apply(&mut self, i: usize, to: usize) {
        self.state.0[i] = to;
        self.refresh(i);
        let model = self.model;
        for &k in model.influenced_by(i) {
            if k != i {
                self.refresh(k);
            }
        }
    }

    fn pick<R: Rng>(&self, total: f64, rng: &mut R) -> (usize, usize) {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut node = None;
        let mut last = 0;
        for (i, &r) in self.node_total.iter().enumerate() {
            if r <= 0.0 {
                continue;
            }
            last = i;
            if u < acc + r {
                node = Some((i, u - acc));
                break;
            }
            acc += r;
        }
        let (i, rest) = node.unwrap_or((last, self.node_total[last]));
        let row = &self.rates[i * self.nc..(i + 1) * self.nc];
        let mut acc = 0.0;
        let mut last = 0;
        for (c, &r) in row.iter().enumerate() {
            if r <= 0.0 {
                continue;
            }
            last = c;
            if rest < acc + r {
                return (i, c);
            }
            acc += r;
        }
        (i, last)
    }

    /// Runs to `horizon`, calling `on_event(time, node, from, to)` before each event is applied.
    fn run<R: Rng>(&mut self, horizon: f64, rng: &mut R, mut on_event: impl FnMut(&Configuration, Event)) {
        let mut t = 0.0;
        loop {
            let total: f64 = self.node_total.iter().sum();
            if !(total > 0.0) {
                return;
            }
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / total;
            if t > horizon {
                return;
            }
            let (i, to) = self.pick(total, rng);
            let from = self.state.get(i);
            on_event(&self.state, Event { time: t, node: i, from, to });
            self.apply(i, to);
        }
    }
}

/// One exact sample path on `[0, horizon]`.
pub fn gillespie_path<R: Rng>(
    model: &CompartmentalModel,
    init: &Configuration,
    horizon: f64,
    rng: &mut R,
) -> Result<EventPath, SsaError> {
    if !init.is_valid_for(model) {
        return Err(SsaError::BadInitial);
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SsaError::BadHorizon(horizon));
    }
    let mut sim = Simulator::new(model, init.clone());
    let mut events = Vec::new();
    sim.run(horizon, rng, |_, e| events.push(e));
    Ok(EventPath {
        initial: init.clone(),
        events,
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Fixed(Configuration),
    /// Independent nodes, `probs[i * nc + c]`; each trial samples its own start.
    Product(Vec<f64>),
}

impl InitialCondition {
    fn check(&self, model: &CompartmentalModel) -> Result<(), SsaError> {
        let ok = match self {
            InitialCondition::Fixed(c) => c.is_valid_for(model),
            InitialCondition::Product(p) => {
                let nc = model.compartment_count();
                p.len() == model.node_count() * nc
                    && p.chunks(nc).all(|r| {
                        r.iter().all(|v| (0.0..=1.0).contains(v)) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9
                    })
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SsaError::BadInitial)
        }
    }

    fn draw<R: Rng>(&self, nc: usize, rng: &mut R) -> Configuration {
        match self {
            InitialCondition::Fixed(c) => c.clone(),
            InitialCondition::Product(p) => Configuration(
                p.chunks(nc)
                    .map(|row| {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        let mut last = 0;
                        for (c, &w) in row.iter().enumerate() {
                            if w <= 0.0 {
                                continue;
                            }
                            last = c;
                            acc += w;
                            if u < acc {
                                return c;
                            }
                        }
                        last
                    })
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Output does not depend on it.
    pub workers: Option<usize>,
    /// Keep every trial's sampled configurations (needed for covariance estimates).
    pub keep_samples: bool,
}

impl EnsembleOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            workers: None,
            keep_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub grid: Vec<f64>,
    pub n: usize,
    pub nc: usize,
    pub trials: usize,
    pub seed: u64,
    /// `mean[k][i * nc + c]`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Fraction of nodes in each compartment, averaged over trials: `graph_mean[k][c]`.
    pub graph_mean: Vec<Vec<f64>>,
    /// Standard error of the per-trial fractions.
    pub graph_stderr: Vec<Vec<f64>>,
    /// `samples[trial][k * n + i]` = compartment of node `i` at grid time `k`.
    pub samples: Option<Vec<Vec<u16>>>,
}

const CHUNK: usize = 512;

fn run_trial(
    model: &CompartmentalModel,
    init: &InitialCondition,
    grid: &[f64],
    seed: u64,
    trial: usize,
) -> Vec<u16> {
    let n = model.node_count();
    let nc = model.compartment_count();
    let mut rng = rng::stream(seed, SSA_DOMAIN, trial as u64);
    let start = init.draw(nc, &mut rng);
    let mut out = Vec::with_capacity(grid.len() * n);
    let mut k = 0;
    let horizon = *grid.last().expect("non-empty grid");
    let mut sim = Simulator::new(model, start);
    sim.run(horizon, &mut rng, |state, e| {
        while k < grid.len() && grid[k] < e.time {
            out.extend(state.0.iter().map(|&c| c as u16));
            k += 1;
        }
    });
    while k < grid.len() {
        out.extend(sim.state.0.iter().map(|&c| c as u16));
        k += 1;
    }
    out
}

/// Runs `opts.trials` independent paths and averages compartment indicators on the grid.
///
/// Trial `r` uses ChaCha stream `r` of the SSA domain keyed by `opts.seed`;
/// results are reduced in trial order, so the output is independent of the
/// number of workers.
pub fn ensemble_estimate(
    model: &CompartmentalModel,
    init: &InitialCondition,
    grid: &TimeGrid,
    opts: &EnsembleOptions,
) -> Result<EnsembleEstimate, SsaError> {
    init.check(model)?;
    if opts.trials == 0 {
        return Err(SsaError::NoTrials);
    }
    if grid.start() < 0.0 {
        return Err(SsaError::GridStart(grid.start()));
    }
    let pool = match opts.workers {
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| SsaError::Pool(e.to_string()))?,
        ),
        None => None,
    };
    let n = model.node_count();
    let nc = model.compartment_count();
    let times = grid.times();
    let kk = times.len();
    let mut counts = vec![0u64; kk * n * nc];
    let mut frac_sum = vec![0.0f64; kk * nc];
    let mut frac_sq = vec![0.0f64; kk * nc];
    let mut samples = opts.keep_samples.then(Vec::new);
    let mut per_trial = vec![0usize; nc];
    let mut start = 0;
    while start < opts.trials {
        let end = (start + CHUNK).min(opts.trials);
        let work = || -> Vec<Vec<u16>> {
            (start..end)
                .into_par_iter()
                .map(|r| run_trial(model, init, times, opts.seed, r))
                .collect()
        };
        let chunk = match &pool {
            Some(p) => p.install(work),
            None => work(),
        };
        for trial in chunk {
            for k in 0..kk {
                per_trial.fill(0);
                for i in 0..n {
                    let c = trial[k * n + i] as usize;
                    counts[(k * n + i) * nc + c] += 1;
                    per_trial[c] += 1;
                }
                for c in 0..nc {
                    let f = per_trial[c] as f64 / n as f64;
                    frac_sum[k * nc + c] += f;
                    frac_sq[k * nc + c] += f * f;
                }
            }
            if let Some(s) = samples.as_mut() {
                s.push(trial);
            }
        }
        start = end;
    }
    let trials = opts.trials as f64;
    let stderr_of = |mean: f64, sq_sum: f64| -> f64 {
        if opts.trials < 2 {
            return 0.0;
        }
        let var = ((sq_sum - trials * mean * mean) / (trials - 1.0)).max(0.0);
        (var / trials).sqrt()
    };
    let mut mean = Vec::with_capacity(kk);
    let mut stderr = Vec::with_capacity(kk);
    let mut graph_mean = Vec::with_capacity(kk);
    let mut graph_stderr = Vec::with_capacity(kk);
    for k in 0..kk {
        let m: Vec<f64> = counts[k * n * nc..(k + 1) * n * nc]
            .iter()
            .map(|&c| c as f64 / trials)
            .collect();
        // indicators: the sum of squares equals the count
        let s: Vec<f64> = m.iter().map(|&p| stderr_of(p, p * trials)).collect();
        let gm: Vec<f64> = (0..nc).map(|c| frac_sum[k * nc + c] / trials).collect();
        let gs: Vec<f64> = (0..nc).map(|c| stderr_of(gm[c], frac_sq[k * nc + c])).collect();
        mean.push(m);
        stderr.push(s);
        graph_mean.push(gm);
        graph_stderr.push(gs);
    }
    Ok(EnsembleEstimate {
        grid: times.to_vec(),
        n,
        nc,
        trials: opts.trials,
        seed: opts.seed,
        mean,
        stderr,
        graph_mean,
        graph_stderr,
        samples,
    })
}

impl EnsembleEstimate {
    pub fn mean_series(&self, i: usize, c: usize) -> Vec<f64> {
        self.mean.iter().map(|m| m[i * self.nc + c]).collect()
    }

    pub fn stderr_series(&self, i: usize, c: usize) -> Vec<f64> {
        self.stderr.iter().map(|m| m[i * self.nc + c]).collect()
    }

    /// `mc` and `mc_stderr` series per node, with the graph-mean standard error
    /// taken from the per-trial fractions.
    pub fn to_bundle(&self, compartments: &[String], mut meta: RunMetadata) -> TrajectoryBundle {
        meta.seeds.insert("ssa".into(), self.seed);
        meta.rng_algorithm = Some(rng::RNG_ALGORITHM.to_string());
        meta.extra.insert("trials".into(), serde_json::json!(self.trials));
        let mut b = TrajectoryBundle::new(self.grid.clone(), compartments.to_vec(), self.n, meta);
        for i in 0..self.n {
            for c in 0..self.nc {
                b.insert(SeriesKey::new(i, c, Role::Mc), self.mean_series(i, c))
                    .expect("series shaped to grid");
                b.insert(SeriesKey::new(i, c, Role::McStderr), self.stderr_series(i, c))
                    .expect("series shaped to grid");
            }
        }
        for c in 0..self.nc {
            let gm = self.graph_mean.iter().map(|g| g[c]).collect();
            let gs = self.graph_stderr.iter().map(|g| g[c]).collect();
            b.set_aggregate_override(c, Role::Mc, gm).expect("series shaped to grid");
            b.set_aggregate_override(c, Role::McStderr, gs).expect("series shaped to grid");
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::RawModel;

    #[test]
    fn null_process_has_no_events() {
        let m = RawModel::new(["A", "B"], 3).internal_all("A", "B", 0.0).validate().unwrap();
        let mut r = rng::stream(1, SSA_DOMAIN, 0);
        let p = gillespie_path(&m, &Configuration::uniform(3, 0), 10.0, &mut r).unwrap();
        assert!(p.events.is_empty());
    }

    #[test]
    fn path_events_are_consistent() {
        let m = RawModel::new(["S", "I"], 4)
            .with_graph(Graph::complete(4).unwrap())
            .external_on_graph("S", "I", &[("I", 1.5)])
            .internal_all("I", "S", 1.0)
            .validate()
            .unwrap();
        let mut r = rng::stream(3, SSA_DOMAIN, 0);
        let p = gillespie_path(&m, &Configuration(vec![1, 0, 0, 0]), 5.0, &mut r).unwrap();
        let mut x = p.initial.clone();
        let mut last = 0.0;
        for e in &p.events {
            assert!(e.time > last && e.time <= 5.0);
            assert_eq!(x.get(e.node), e.from);
            x.0[e.node] = e.to;
            last = e.time;
        }
    }

    #[test]
    fn single_trial_gives_indicators() {
        let m = RawModel::new(["A", "B"], 2).internal_all("A", "B", 1.0).validate().unwrap();
        let grid = TimeGrid::uniform(0.0, 2.0, 0.5).unwrap();
        let est = ensemble_estimate(
            &m,
            &InitialCondition::Fixed(Configuration::uniform(2, 0)),
            &grid,
            &EnsembleOptions::new(1, 9),
        )
        .unwrap();
        for row in &est.mean {
            assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
            assert_eq!(row[0] + row[1], 1.0);
        }
        assert!(est.stderr.iter().flatten().all(|&s| s == 0.0));
    }

    #[test]
    fn grid_sampling_matches_path() {
        let m = RawModel::new(["S", "I"], 3)
            .with_graph(Graph::path(3).unwrap())
            .external_on_graph("S", "I", &[("I", 2.0)])
            .internal_all("I", "S", 1.0)
            .validate()
            .unwrap();
        let init = Configuration(vec![0, 1, 0]);
        let grid = TimeGrid::uniform(0.0, 3.0, 0.25).unwrap();
        let sampled = run_trial(&m, &InitialCondition::Fixed(init.clone()), grid.times(), 5, 2);
        let mut r = rng::stream(5, SSA_DOMAIN, 2);
        let path = gillespie_path(&m, &init, 3.0, &mut r).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let x = path.state_at(t);
            let got: Vec<usize> = sampled[k * 3..(k + 1) * 3].iter().map(|&c| c as usize).collect();
            assert_eq!(got, x.0);
        }
    }
}
