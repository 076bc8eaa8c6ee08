//! Grid-sampled trajectories and piecewise-constant controls.

use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;

/// Initial segment of a delay model: values of `psi` at `-tau + j*dt` for
/// `j = 0..=lag`, flattened row-major. The last node is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub tau: f64,
    pub d: usize,
    values: Vec<f64>,
}

impl Segment {
    pub fn new(tau: f64, d: usize, values: Vec<f64>) -> LdpResult<Self> {
        if d == 0 || values.is_empty() || !values.len().is_multiple_of(d) {
            return Err(LdpError::SegmentMismatch(format!(
                "segment needs a positive multiple of d = {d} values, got {}",
                values.len()
            )));
        }
        Ok(Segment { tau, d, values })
    }

    /// Constant segment `psi(s) = value` sampled compatibly with `grid`.
    pub fn constant(tau: f64, value: &[f64], grid: &TimeGrid) -> LdpResult<Self> {
        let lag = grid.lag_steps(tau)?;
        let mut values = Vec::with_capacity((lag + 1) * value.len());
        for _ in 0..=lag {
            values.extend_from_slice(value);
        }
        Segment::new(tau, value.len(), values)
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.d
    }

    /// Value at segment node `j` (time `-tau + j*dt`).
    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    /// Final segment value `psi(0)`, the initial state of the path.
    pub fn terminal(&self) -> &[f64] {
        self.value(self.n_nodes() - 1)
    }

    /// Checks spacing and length against a grid and the model lag.
    pub fn validate_against(&self, grid: &TimeGrid, tau: f64) -> LdpResult<usize> {
        if (self.tau - tau).abs() > 1e-9 * tau.abs().max(1.0) {
            return Err(LdpError::SegmentMismatch(format!(
                "segment lag {} differs from model delay {tau}",
                self.tau
            )));
        }
        let lag = grid.lag_steps(tau)?;
        if self.n_nodes() != lag + 1 {
            return Err(LdpError::SegmentMismatch(format!(
                "segment has {} nodes, grid spacing requires {}",
                self.n_nodes(),
                lag + 1
            )));
        }
        Ok(lag)
    }
}

/// Initial condition: a point for ordinary models, a segment for delay models.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Point(Vec<f64>),
    Segment(Segment),
}

impl InitialData {
    pub fn point(x: impl Into<Vec<f64>>) -> Self {
        InitialData::Point(x.into())
    }

    /// State at time zero.
    pub fn initial_state(&self) -> &[f64] {
        match self {
            InitialData::Point(x) => x,
            InitialData::Segment(s) => s.terminal(),
        }
    }

    pub fn segment(&self) -> Option<&Segment> {
        match self {
            InitialData::Point(_) => None,
            InitialData::Segment(s) => Some(s),
        }
    }
}

/// A trajectory sampled at the grid nodes, with `noise_level = 0` marking
/// deterministic skeleton paths.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub grid: TimeGrid,
    pub d: usize,
    pub noise_level: f64,
    values: Vec<f64>,
    pub segment: Option<Segment>,
}

impl StatePath {
    pub fn new(
        grid: TimeGrid,
        d: usize,
        noise_level: f64,
        values: Vec<f64>,
        segment: Option<Segment>,
    ) -> LdpResult<Self> {
        if values.len() != (grid.n_steps() + 1) * d {
            return Err(LdpError::DimensionMismatch(format!(
                "path needs {} values, got {}",
                (grid.n_steps() + 1) * d,
                values.len()
            )));
        }
        Ok(StatePath {
            grid,
            d,
            noise_level,
            values,
            segment,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_steps() + 1
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.grid.n_steps())
    }

    /// `sup_{j <= k} |X_{t_j}|` (Euclidean norm per node).
    pub fn running_sup_norm(&self, k: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for j in 0..=k {
            sup = sup.max(norm(self.value(j)));
        }
        sup
    }

    pub fn sup_norm(&self) -> f64 {
        self.running_sup_norm(self.grid.n_steps())
    }

    /// Largest node-wise Euclidean distance to another path on the same grid.
    pub fn sup_distance(&self, other: &StatePath) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let mut sup: f64 = 0.0;
        for k in 0..self.n_nodes() {
            let mut s = 0.0;
            for i in 0..self.d {
                let e = self.value(k)[i] - other.value(k)[i];
                s += e * e;
            }
            sup = sup.max(s.sqrt());
        }
        sup
    }
}

/// An m-dimensional Brownian path stored as per-step increments.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub grid: TimeGrid,
    pub m: usize,
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn from_increments(grid: TimeGrid, m: usize, increments: Vec<f64>) -> LdpResult<Self> {
        if increments.len() != grid.n_steps() * m {
            return Err(LdpError::DimensionMismatch(format!(
                "Brownian path needs {} increments, got {}",
                grid.n_steps() * m,
                increments.len()
            )));
        }
        Ok(BrownianPath { grid, m, increments })
    }

    /// Increment `W_{t_{k+1}} - W_{t_k}`.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.m..(k + 1) * self.m]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Cumulative values `W_{t_0} = 0, ..., W_{t_n}`, flattened row-major.
    pub fn cumulative(&self) -> Vec<f64> {
        let n = self.grid.n_steps();
        let mut w = vec![0.0; (n + 1) * self.m];
        for k in 0..n {
            for j in 0..self.m {
                w[(k + 1) * self.m + j] = w[k * self.m + j] + self.increments[k * self.m + j];
            }
        }
        w
    }
}

/// Piecewise-constant control: `f_k` holds on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub grid: TimeGrid,
    pub m: usize,
    values: Vec<f64>,
    pub cap: Option<f64>,
}

impl Control {
    pub fn new(grid: TimeGrid, m: usize, values: Vec<f64>) -> LdpResult<Self> {
        if values.len() != grid.n_steps() * m {
            return Err(LdpError::DimensionMismatch(format!(
                "control needs {} values, got {}",
                grid.n_steps() * m,
                values.len()
            )));
        }
        Ok(Control {
            grid,
            m,
            values,
            cap: None,
        })
    }

    pub fn zero(grid: TimeGrid, m: usize) -> Self {
        let n = grid.n_steps();
        Control {
            grid,
            m,
            values: vec![0.0; n * m],
            cap: None,
        }
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Self {
        let n = grid.n_steps();
        let mut values = Vec::with_capacity(n * value.len());
        for _ in 0..n {
            values.extend_from_slice(value);
        }
        Control {
            grid,
            m: value.len(),
            values,
            cap: None,
        }
    }

    /// Attaches the `S_N` cap, failing if the control already violates it.
    pub fn with_cap(mut self, cap: f64) -> LdpResult<Self> {
        let norm_sq = self.norm_sq();
        if norm_sq > cap * (1.0 + 1e-12) {
            return Err(LdpError::CapExceeded { norm_sq, cap });
        }
        self.cap = Some(cap);
        Ok(self)
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.values[k * self.m..(k + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Squared L2 norm `sum_k |f_k|^2 dt`.
    pub fn norm_sq(&self) -> f64 {
        let dt = self.grid.dt();
        self.values.iter().map(|v| v * v).sum::<f64>() * dt
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 4).unwrap()
    }

    #[test]
    fn control_norm_sq_matches_hand_sum() {
        let c = Control::constant(grid(), &[2.0]);
        assert!((c.norm_sq() - 4.0).abs() < 1e-14);
        let z = Control::zero(grid(), 1);
        assert_eq!(z.norm_sq(), 0.0);
    }

    #[test]
    fn cap_enforced_at_attach_time() {
        let c = Control::constant(grid(), &[2.0]);
        assert!(c.clone().with_cap(4.0).is_ok());
        assert!(matches!(
            c.with_cap(3.9),
            Err(LdpError::CapExceeded { .. })
        ));
    }

    #[test]
    fn brownian_cumulative_starts_at_zero_and_telescopes() {
        let g = grid();
        let bp = BrownianPath::from_increments(g, 1, vec![0.5, -0.25, 1.0, 0.0]).unwrap();
        let w = bp.cumulative();
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.25).abs() < 1e-15);
        for k in 0..4 {
            assert!((w[k + 1] - w[k] - bp.increment(k)[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn segment_validation_checks_spacing() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let s = Segment::constant(1.0, &[1.0], &g).unwrap();
        assert_eq!(s.n_nodes(), 5);
        assert_eq!(s.validate_against(&g, 1.0).unwrap(), 4);
        // wrong grid: tau no longer a multiple of dt
        let g2 = TimeGrid::new(2.0, 7).unwrap();
        assert!(s.validate_against(&g2, 1.0).is_err());
    }
}
