//! Terminal functionals and constraints for the action problems.

use crate::error::{LdpError, LdpResult};
use crate::paths::StatePath;

/// Bounded continuous function of one variable given by a table of knots,
/// interpolated linearly and extended as a constant beyond the end knots
/// (which is what keeps it bounded).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(points: &[(f64, f64)]) -> LdpResult<Self> {
        if points.is_empty() {
            return Err(LdpError::Validation(
                "piecewise-linear table needs at least one knot".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(LdpError::Validation(
                    "piecewise-linear knots must be strictly increasing".into(),
                ));
            }
        }
        Ok(PiecewiseLinear {
            xs: points.iter().map(|p| p.0).collect(),
            ys: points.iter().map(|p| p.1).collect(),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let w = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + w * (self.ys[i + 1] - self.ys[i])
    }

    /// Slope of the active piece (zero in the constant extensions).
    pub fn slope(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i])
    }

    pub fn bound(&self) -> f64 {
        self.ys.iter().fold(0.0f64, |acc, y| acc.max(y.abs()))
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

/// Terminal functional of an action problem: either a constraint on the
/// endpoint or a bounded continuous terminal cost.
#[derive(Debug, Clone, PartialEq)]
pub enum PathFunctional {
    /// Constraint `phi_T = target`.
    TerminalPoint { target: Vec<f64> },
    /// Constraint `phi_T[coord] >= level`.
    TerminalHalfSpace { coord: usize, level: f64 },
    /// Cost `F(phi) = g(phi_T[coord])` with `g` piecewise linear.
    TerminalCost { coord: usize, table: PiecewiseLinear },
    /// Constant cost.
    Constant { value: f64 },
}

impl PathFunctional {
    pub fn is_cost(&self) -> bool {
        matches!(
            self,
            PathFunctional::TerminalCost { .. } | PathFunctional::Constant { .. }
        )
    }

    /// `F(phi)` for the cost variants; constraints carry no finite cost.
    pub fn evaluate(&self, path: &StatePath) -> LdpResult<f64> {
        match self {
            PathFunctional::TerminalCost { coord, table } => Ok(table.eval(path.terminal()[*coord])),
            PathFunctional::Constant { value } => Ok(*value),
            _ => Err(LdpError::NotACost),
        }
    }

    /// A bound on `|F|` for the cost variants.
    pub fn bound(&self) -> Option<f64> {
        match self {
            PathFunctional::TerminalCost { table, .. } => Some(table.bound()),
            PathFunctional::Constant { value } => Some(value.abs()),
            _ => None,
        }
    }
}
