//! Uniform time grid on `[0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{LdpError, LdpResult};

/// Uniform partition `t_k = k * dt` of `[0, T]` with `dt = T / n_steps`.
///
/// Node 0 is exactly `0.0` and node `n_steps` is exactly `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> LdpResult<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(LdpError::InvalidGrid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(LdpError::InvalidGrid("n_steps must be >= 1".into()));
        }
        Ok(TimeGrid {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of node `k`, for `k` in `0..=n_steps`.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }

    /// Maps a time to its grid node, or fails if `t` is not (close to) a node.
    pub fn index_of(&self, t: f64) -> LdpResult<usize> {
        if !t.is_finite() || t < -1e-12 || t > self.horizon * (1.0 + 1e-12) + 1e-12 {
            return Err(LdpError::TimeOffGrid { t });
        }
        let k = (t / self.dt).round() as usize;
        let k = k.min(self.n_steps);
        if (t - self.node(k)).abs() <= 1e-9 * self.dt.max(1.0) {
            Ok(k)
        } else {
            Err(LdpError::TimeOffGrid { t })
        }
    }

    /// Number of steps a lag `tau` spans, failing unless `tau` is an integer
    /// multiple of `dt` inside `(0, T)`.
    pub fn lag_steps(&self, tau: f64) -> LdpResult<usize> {
        if !(tau > 0.0) || tau >= self.horizon {
            return Err(LdpError::SegmentMismatch(format!(
                "delay tau = {tau} must lie strictly inside (0, T = {})",
                self.horizon
            )));
        }
        let l = (tau / self.dt).round();
        if l < 1.0 || (tau - l * self.dt).abs() > 1e-9 * self.dt.max(1.0) {
            return Err(LdpError::SegmentMismatch(format!(
                "delay tau = {tau} is not an integer multiple of dt = {}",
                self.dt
            )));
        }
        Ok(l as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_span_zero_to_horizon() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(10), 1.0);
        assert!((g.node(3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn index_of_rejects_off_grid_times() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.index_of(0.3).unwrap(), 3);
        assert_eq!(g.index_of(1.0).unwrap(), 10);
        assert!(g.index_of(0.35).is_err());
        assert!(g.index_of(1.2).is_err());
        assert!(g.index_of(-0.1).is_err());
    }

    #[test]
    fn lag_steps_requires_multiple_of_dt() {
        let g = TimeGrid::new(2.0, 20).unwrap();
        assert_eq!(g.lag_steps(1.0).unwrap(), 10);
        assert!(g.lag_steps(0.15).is_err());
        assert!(g.lag_steps(2.0).is_err());
        assert!(g.lag_steps(0.0).is_err());
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
    }
}
