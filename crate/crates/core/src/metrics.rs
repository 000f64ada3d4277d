//! Comparisons between trajectory bundles.

use crate::bounds::CovarianceSign;
use crate::bundle::{Aggregation, BundleError, Role, TrajectoryBundle};
use crate::exact::{pair_covariance, MasterSolution};
use crate::ssa::EnsembleEstimate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("series lengths differ ({0} vs {1})")]
    GridMismatch(usize, usize),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("covariance estimate needs at least 2 retained trials, got {0}")]
    InsufficientTrials(usize),
    #[error("joint distributions were not retained")]
    NoJoint,
}

/// `max_k |f_k - g_k|` over a shared grid.
pub fn d_metric(f: &[f64], g: &[f64]) -> Result<f64, MetricError> {
    if f.len() != g.len() {
        return Err(MetricError::GridMismatch(f.len(), g.len()));
    }
    Ok(f.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// [`d_metric`] restricted to grid times in `[t0, t1]`.
pub fn d_metric_window(grid: &[f64], f: &[f64], g: &[f64], t0: f64, t1: f64) -> Result<f64, MetricError> {
    if f.len() != g.len() || f.len() != grid.len() {
        return Err(MetricError::GridMismatch(f.len(), g.len()));
    }
    Ok(grid
        .iter()
        .zip(f.iter().zip(g))
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, (a, b))| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesContainment {
    /// `None` for graph-mean rows.
    pub node: Option<usize>,
    pub compartment: usize,
    /// Largest amount by which the reference falls below the lower series.
    pub below_lower: f64,
    /// Largest amount by which the reference exceeds the upper series.
    pub above_upper: f64,
    pub first_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub tolerance: f64,
    pub statistical: bool,
    pub pass: bool,
    pub max_violation: f64,
    pub series: Vec<SeriesContainment>,
}

/// Pointwise check of `lower - tol <= reference <= upper + tol` on one series.
///
/// With `stderr`, the per-point tolerance is `max(tol, 4 * stderr)`.
pub fn check_series(
    grid: &[f64],
    lower: &[f64],
    reference: &[f64],
    upper: &[f64],
    tolerance: f64,
    stderr: Option<&[f64]>,
) -> Result<(f64, f64, Option<f64>), MetricError> {
    for s in [lower, reference, upper] {
        if s.len() != grid.len() {
            return Err(MetricError::GridMismatch(s.len(), grid.len()));
        }
    }
    if let Some(e) = stderr {
        if e.len() != grid.len() {
            return Err(MetricError::GridMismatch(e.len(), grid.len()));
        }
    }
    let mut below = 0.0f64;
    let mut above = 0.0f64;
    let mut first = None;
    for k in 0..grid.len() {
        let tol = match stderr {
            Some(e) => tolerance.max(4.0 * e[k]),
            None => tolerance,
        };
        let b = lower[k] - reference[k];
        let a = reference[k] - upper[k];
        below = below.max(b);
        above = above.max(a);
        if first.is_none() && (b > tol || a > tol) {
            first = Some(grid[k]);
        }
    }
    Ok((below, above, first))
}

/// Checks a bounding bundle against the `Exact` or `Mc` series of `reference`.
///
/// Per-node checks use every node; graph-mean checks compare the node
/// averages. Monte Carlo references widen the tolerance with their standard errors.
pub fn containment_check(
    bounds: &TrajectoryBundle,
    reference: &TrajectoryBundle,
    reference_role: Role,
    tolerance: f64,
    aggregation: Aggregation,
) -> Result<ContainmentReport, MetricError> {
    bounds.same_shape(reference)?;
    let grid = bounds.grid();
    let statistical = reference_role == Role::Mc;
    let nc = bounds.compartments().len();
    let mut rows = Vec::new();
    let mut push = |node: Option<usize>, c: usize, lo: &[f64], r: &[f64], up: &[f64], se: Option<&[f64]>| {
        check_series(grid, lo, r, up, tolerance, se).map(|(b, a, f)| {
            rows.push(SeriesContainment {
                node,
                compartment: c,
                below_lower: b,
                above_upper: a,
                first_violation: f,
            })
        })
    };
    match aggregation {
        Aggregation::PerNode => {
            for i in 0..bounds.node_count() {
                for c in 0..nc {
                    let se = if statistical { Some(reference.require(i, c, Role::McStderr)?) } else { None };
                    push(
                        Some(i),
                        c,
                        bounds.require(i, c, Role::Lower)?,
                        reference.require(i, c, reference_role)?,
                        bounds.require(i, c, Role::Upper)?,
                        se,
                    )?;
                }
            }
        }
        Aggregation::GraphMean => {
            let need = |b: &TrajectoryBundle, c: usize, role: Role| {
                b.graph_mean(c, role).ok_or(BundleError::MissingSeries {
                    node: 0,
                    compartment: c,
                    role,
                })
            };
            for c in 0..nc {
                let se = if statistical { Some(need(reference, c, Role::McStderr)?) } else { None };
                push(
                    None,
                    c,
                    &need(bounds, c, Role::Lower)?,
                    &need(reference, c, reference_role)?,
                    &need(bounds, c, Role::Upper)?,
                    se.as_deref(),
                )?;
            }
        }
    }
    let max_violation = rows
        .iter()
        .map(|r| r.below_lower.max(r.above_upper))
        .fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.first_violation.is_none());
    Ok(ContainmentReport {
        tolerance,
        statistical,
        pass,
        max_violation,
        series: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub max_gap: f64,
    pub mean_gap: f64,
    pub time_of_max: f64,
    /// `false` if some lower value exceeds its upper value.
    pub consistent: bool,
}

pub fn gap_stats(grid: &[f64], lower: &[f64], upper: &[f64]) -> Result<GapStats, MetricError> {
    if lower.len() != upper.len() || lower.len() != grid.len() {
        return Err(MetricError::GridMismatch(lower.len(), upper.len()));
    }
    let mut max_gap = f64::NEG_INFINITY;
    let mut time_of_max = grid.first().copied().unwrap_or(0.0);
    let mut sum = 0.0;
    let mut consistent = true;
    for k in 0..grid.len() {
        let g = upper[k] - lower[k];
        if g < 0.0 {
            consistent = false;
        }
        if g > max_gap {
            max_gap = g;
            time_of_max = grid[k];
        }
        sum += g;
    }
    if grid.is_empty() {
        max_gap = 0.0;
    }
    Ok(GapStats {
        max_gap,
        mean_gap: if grid.is_empty() { 0.0 } else { sum / grid.len() as f64 },
        time_of_max,
        consistent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `(node, compartment, stats)` for every bounded series.
    pub per_series: Vec<(usize, usize, GapStats)>,
    /// Graph-mean gap per compartment.
    pub aggregate: Vec<GapStats>,
    pub max_aggregate_gap: f64,
}

pub fn bundle_gap_stats(bundle: &TrajectoryBundle) -> Result<GapReport, MetricError> {
    let grid = bundle.grid();
    let nc = bundle.compartments().len();
    let mut per_series = Vec::new();
    for i in 0..bundle.node_count() {
        for c in 0..nc {
            let s = gap_stats(grid, bundle.require(i, c, Role::Lower)?, bundle.require(i, c, Role::Upper)?)?;
            per_series.push((i, c, s));
        }
    }
    let mut aggregate = Vec::new();
    for c in 0..nc {
        let lo = bundle.graph_mean(c, Role::Lower).unwrap_or_default();
        let up = bundle.graph_mean(c, Role::Upper).unwrap_or_default();
        aggregate.push(gap_stats(grid, &lo, &up)?);
    }
    let max_aggregate_gap = aggregate.iter().map(|g| g.max_gap).fold(0.0, f64::max);
    Ok(GapReport {
        per_series,
        aggregate,
        max_aggregate_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignSource {
    Exact,
    MonteCarlo { trials: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSignEstimate {
    pub sigma: Vec<f64>,
    /// Half-width unit used in the sign rule (zero for exact joints).
    pub ci: Vec<f64>,
    pub nonnegative: bool,
    pub nonpositive: bool,
    pub source: SignSource,
}

impl CovarianceSignEstimate {
    fn from_series(sigma: Vec<f64>, ci: Vec<f64>, slack: f64, source: SignSource) -> Self {
        let nonnegative = sigma.iter().zip(&ci).all(|(s, c)| s + 4.0 * c >= -slack);
        let nonpositive = sigma.iter().zip(&ci).all(|(s, c)| s - 4.0 * c <= slack);
        Self {
            sigma,
            ci,
            nonnegative,
            nonpositive,
            source,
        }
    }

    /// A single sign when exactly one direction is supported.
    pub fn sign(&self) -> CovarianceSign {
        match (self.nonnegative, self.nonpositive) {
            (true, false) => CovarianceSign::Nonnegative,
            (false, true) => CovarianceSign::Nonpositive,
            _ => CovarianceSign::Unknown,
        }
    }
}

/// Sign of `cov(1{x_i = a}, 1{x_j = b})` over the grid from exact joints.
///
/// Rounding slack of `1e-12` is allowed on each side.
pub fn covariance_sign_exact(
    sol: &MasterSolution,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<CovarianceSignEstimate, MetricError> {
    let sigma = pair_covariance(sol, first, second).ok_or(MetricError::NoJoint)?;
    let ci = vec![0.0; sigma.len()];
    Ok(CovarianceSignEstimate::from_series(sigma, ci, 1e-12, SignSource::Exact))
}

/// Same from Monte Carlo trials (samples must be retained); `ci` is the
/// standard error of the centered product.
pub fn covariance_sign_mc(
    est: &EnsembleEstimate,
    (i, a): (usize, usize),
    (j, b): (usize, usize),
) -> Result<CovarianceSignEstimate, MetricError> {
    let samples = est.samples.as_ref().ok_or(MetricError::InsufficientTrials(0))?;
    let nt = samples.len();
    if nt < 2 {
        return Err(MetricError::InsufficientTrials(nt));
    }
    let n = est.n;
    let mut sigma = Vec::with_capacity(est.grid.len());
    let mut ci = Vec::with_capacity(est.grid.len());
    let ntf = nt as f64;
    for k in 0..est.grid.len() {
        let xs: Vec<f64> = samples.iter().map(|s| (s[k * n + i] as usize == a) as u8 as f64).collect();
        let ys: Vec<f64> = samples.iter().map(|s| (s[k * n + j] as usize == b) as u8 as f64).collect();
        let mx = xs.iter().sum::<f64>() / ntf;
        let my = ys.iter().sum::<f64>() / ntf;
        let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
        let s = prods.iter().sum::<f64>() / (ntf - 1.0);
        let mp = prods.iter().sum::<f64>() / ntf;
        let var = prods.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / (ntf - 1.0);
        sigma.push(s);
        ci.push((var / ntf).sqrt());
    }
    Ok(CovarianceSignEstimate::from_series(
        sigma,
        ci,
        0.0,
        SignSource::MonteCarlo { trials: nt },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{RunMetadata, SeriesKey};

    #[test]
    fn d_metric_examples() {
        assert_eq!(d_metric(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.0);
        assert!((d_metric(&[0.2; 4], &[0.5; 4]).unwrap() - 0.3).abs() < 1e-15);
        assert!(d_metric(&[0.0], &[0.0, 1.0]).is_err());
        let g = [0.0, 1.0, 2.0];
        assert_eq!(d_metric_window(&g, &[0.0, 0.0, 5.0], &[0.0, 1.0, 0.0], 0.0, 1.0).unwrap(), 1.0);
    }

    fn bounds(lo: f64, up: f64) -> TrajectoryBundle {
        let mut b = TrajectoryBundle::new(vec![0.0, 1.0], vec!["A".into()], 1, RunMetadata::labeled("b"));
        b.insert(SeriesKey::new(0, 0, Role::Lower), vec![lo; 2]).unwrap();
        b.insert(SeriesKey::new(0, 0, Role::Upper), vec![up; 2]).unwrap();
        b
    }

    fn reference(v: f64) -> TrajectoryBundle {
        let mut b = TrajectoryBundle::new(vec![0.0, 1.0], vec!["A".into()], 1, RunMetadata::labeled("r"));
        b.insert(SeriesKey::new(0, 0, Role::Exact), vec![v; 2]).unwrap();
        b
    }

    #[test]
    fn containment_examples() {
        let r = containment_check(&bounds(0.2, 0.5), &reference(0.2), Role::Exact, 0.0, Aggregation::PerNode).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_violation, 0.0);
        let r = containment_check(&bounds(0.2, 0.5), &reference(0.55), Role::Exact, 1e-4, Aggregation::PerNode).unwrap();
        assert!(!r.pass);
        assert!((r.max_violation - 0.05).abs() < 1e-12);
        assert_eq!(r.series[0].first_violation, Some(0.0));
    }

    #[test]
    fn gap_examples() {
        let g = gap_stats(&[0.0, 1.0], &[0.3, 0.3], &[0.3, 0.3]).unwrap();
        assert_eq!((g.max_gap, g.mean_gap), (0.0, 0.0));
        let g = gap_stats(&[0.0, 1.0, 2.0], &[0.0, 0.1, 0.2], &[0.1, 0.2, 0.3]).unwrap();
        assert!((g.max_gap - 0.1).abs() < 1e-15 && (g.mean_gap - 0.1).abs() < 1e-15);
        assert!(!gap_stats(&[0.0], &[0.5], &[0.4]).unwrap().consistent);
    }
}
