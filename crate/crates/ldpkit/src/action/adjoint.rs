//! Discrete adjoint of the explicit Euler skeleton recursion.
//!
//! For `J(f) = 1/2 sum_k |f_k|^2 dt + G(phi_n)` with
//! `phi_{k+1} = phi_k + (b + sigma f_k)(t_k, phi) dt`, the reverse sweep
//! accumulates `lambda_k = dJ/dphi_k` and yields
//! `dJ/df_k = dt (f_k + sigma(t_k)^T lambda_{k+1})` exactly (up to rounding),
//! including the lagged dependencies of delay coefficients.

use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;
use crate::models::{Model, NodeJacobian, PathSlice};
use crate::paths::{InitialData, StatePath};
use crate::simulate::integrate;

use super::functional::PiecewiseLinear;

/// Terminal term `G(phi_T)` of the reduced objective.
#[derive(Debug, Clone)]
pub(crate) enum TerminalTerm<'a> {
    Zero,
    /// `mu |phi_T - target|^2`.
    PenaltyPoint { target: &'a [f64], mu: f64 },
    /// `mu max(0, level - phi_T[coord])^2`.
    PenaltyHalfSpace { coord: usize, level: f64, mu: f64 },
    /// `mu max(0, |phi_T - center| - radius)^2`.
    PenaltyBall {
        center: &'a [f64],
        radius: f64,
        mu: f64,
    },
    /// `g(phi_T[coord])`.
    Cost {
        coord: usize,
        table: &'a PiecewiseLinear,
    },
    Constant { value: f64 },
}

impl TerminalTerm<'_> {
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match self {
            TerminalTerm::Zero => 0.0,
            TerminalTerm::PenaltyPoint { target, mu } => {
                let d2: f64 = x
                    .iter()
                    .zip(target.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                mu * d2
            }
            TerminalTerm::PenaltyHalfSpace { coord, level, mu } => {
                let gap = (level - x[*coord]).max(0.0);
                mu * gap * gap
            }
            TerminalTerm::PenaltyBall { center, radius, mu } => {
                let dist = x
                    .iter()
                    .zip(center.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let excess = (dist - radius).max(0.0);
                mu * excess * excess
            }
            TerminalTerm::Cost { coord, table } => table.eval(x[*coord]),
            TerminalTerm::Constant { value } => *value,
        }
    }

    pub(crate) fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self {
            TerminalTerm::Zero | TerminalTerm::Constant { .. } => {}
            TerminalTerm::PenaltyPoint { target, mu } => {
                for i in 0..x.len() {
                    out[i] = 2.0 * mu * (x[i] - target[i]);
                }
            }
            TerminalTerm::PenaltyHalfSpace { coord, level, mu } => {
                let gap = (level - x[*coord]).max(0.0);
                out[*coord] = -2.0 * mu * gap;
            }
            TerminalTerm::PenaltyBall { center, radius, mu } => {
                let dist = x
                    .iter()
                    .zip(center.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist > *radius && dist > 0.0 {
                    let scale = 2.0 * mu * (dist - radius) / dist;
                    for i in 0..x.len() {
                        out[i] = scale * (x[i] - center[i]);
                    }
                }
            }
            TerminalTerm::Cost { coord, table } => {
                out[*coord] = table.slope(x[*coord]);
            }
        }
    }
}

/// Forward solve plus objective value; fills `grad` with the adjoint gradient
/// when requested. Returns `(objective, action, path)`.
pub(crate) fn objective_and_gradient(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    f_values: &[f64],
    term: &TerminalTerm<'_>,
    grad: Option<&mut [f64]>,
) -> LdpResult<(f64, f64, StatePath)> {
    let d = model.state_dim();
    let m = model.noise_dim();
    let n = grid.n_steps();
    let dt = grid.dt();
    let path = integrate(model, 0.0, init, Some(f_values), None, grid)?;

    let action = 0.5 * f_values.iter().map(|v| v * v).sum::<f64>() * dt;
    let objective = action + term.value(path.terminal());

    if let Some(grad_out) = grad {
        debug_assert_eq!(grad_out.len(), n * m);
        let lag = model.lag_steps_for(grid, init)?;
        let slice = PathSlice::from_path(&path, lag);

        // lambda[k] accumulates dJ/dphi_k; seeded by the terminal gradient.
        let mut lambda = vec![0.0; (n + 1) * d];
        term.gradient(path.terminal(), &mut lambda[n * d..]);

        let mut disp = vec![0.0; d * m];
        let mut jacs: Vec<NodeJacobian> = Vec::with_capacity(2);
        for k in (0..n).rev() {
            let t = grid.node(k);
            let f_k = &f_values[k * m..(k + 1) * m];
            model.dispersion_into(t, &slice, k, &mut disp);

            // dJ/df_k = dt (f_k + sigma^T lambda_{k+1})
            for j in 0..m {
                let mut s = 0.0;
                for i in 0..d {
                    s += disp[i * m + j] * lambda[(k + 1) * d + i];
                }
                grad_out[k * m + j] = dt * (f_k[j] + s);
            }

            if !model.step_jacobians(t, &slice, k, f_k, &mut jacs) {
                return Err(LdpError::NoJacobian);
            }
            // phi_{k+1} = phi_k + a(t_k, phi_{<=k}, f_k) dt:
            // lambda_node += dt J_node^T lambda_{k+1}, lambda_k += lambda_{k+1}.
            for nj in &jacs {
                for a in 0..d {
                    let la = lambda[(k + 1) * d + a];
                    if la == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        lambda[nj.node * d + b] += dt * nj.mat[a * d + b] * la;
                    }
                }
            }
            for i in 0..d {
                lambda[k * d + i] += lambda[(k + 1) * d + i];
            }
        }
    }

    Ok((objective, action, path))
}

/// Central finite-difference gradient of the same objective, for gradient
/// verification. Step `h` is absolute per coordinate.
pub(crate) fn finite_difference_gradient(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    f_values: &[f64],
    term: &TerminalTerm<'_>,
    h: f64,
) -> LdpResult<Vec<f64>> {
    let mut grad = vec![0.0; f_values.len()];
    let mut probe = f_values.to_vec();
    for i in 0..f_values.len() {
        probe[i] = f_values[i] + h;
        let (up, _, _) = objective_and_gradient(model, init, grid, &probe, term, None)?;
        probe[i] = f_values[i] - h;
        let (down, _, _) = objective_and_gradient(model, init, grid, &probe, term, None)?;
        probe[i] = f_values[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}
