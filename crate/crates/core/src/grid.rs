use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("time grid is empty")]
    Empty,
    #[error("time grid is not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("time grid contains a non-finite value")]
    NonFinite,
    #[error("invalid uniform grid: start {start}, end {end}, step {step}")]
    BadUniform { start: f64, end: f64, step: f64 },
}

/// Strictly increasing output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid(Vec<f64>);

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, GridError> {
        if times.is_empty() {
            return Err(GridError::Empty);
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(GridError::NonFinite);
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GridError::NotIncreasing(k + 1));
        }
        Ok(Self(times))
    }

    /// `start, start + step, ..` up to `end`; `t_k` is computed as `start + k * step`.
    /// `(end - start) / step` must be an integer up to 1e-9 relative slack.
    pub fn uniform(start: f64, end: f64, step: f64) -> Result<Self, GridError> {
        let bad = GridError::BadUniform { start, end, step };
        if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
            return Err(bad);
        }
        let ratio = (end - start) / step;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(bad);
        }
        let k = k as usize;
        Self::new((0..=k).map(|i| start + i as f64 * step).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.0[0]
    }

    pub fn end(&self) -> f64 {
        *self.0.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid() {
        let g = TimeGrid::uniform(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(TimeGrid::uniform(0.0, 5.0, 0.01).unwrap().len(), 501);
        assert_eq!(TimeGrid::uniform(2.0, 2.0, 0.1).unwrap().len(), 1);
        assert!(TimeGrid::uniform(0.0, 1.0, 0.3).is_err());
        assert!(TimeGrid::uniform(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn explicit_grid_checks() {
        assert_eq!(TimeGrid::new(vec![]), Err(GridError::Empty));
        assert_eq!(TimeGrid::new(vec![0.0, 1.0, 1.0]), Err(GridError::NotIncreasing(2)));
        assert_eq!(TimeGrid::new(vec![0.0, f64::NAN]), Err(GridError::NonFinite));
    }
}
