//! Limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

use crate::error::LdpResult;

const MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: u64,
    pub converged: bool,
}

/// Minimizes `eval`, which returns the value and (when asked) the gradient.
/// Stops when the gradient norm drops below `tol` or after `max_iters`
/// accepted steps.
pub(crate) fn minimize<F>(
    mut eval: F,
    x0: Vec<f64>,
    tol: f64,
    max_iters: u64,
) -> LdpResult<LbfgsOutcome>
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> LdpResult<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = eval(&x, Some(&mut grad))?;

    let mut s_mem: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_mem: VecDeque<Vec<f64>> = VecDeque::new();
    let mut rho_mem: VecDeque<f64> = VecDeque::new();

    let mut iterations = 0u64;
    let mut converged = false;

    loop {
        let grad_norm = norm(&grad);
        if grad_norm <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }

        let mut dir = two_loop(&grad, &s_mem, &y_mem, &rho_mem);
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            // Not a descent direction; fall back to steepest descent.
            for (d, g) in dir.iter_mut().zip(grad.iter()) {
                *d = -g;
            }
            slope = -grad_norm * grad_norm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        let mut trial = vec![0.0; n];
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            let trial_value = eval(&trial, None)?;
            if trial_value.is_finite() && trial_value <= value + ARMIJO_C1 * step * slope {
                accepted = Some(trial_value);
                break;
            }
            step *= 0.5;
        }
        let Some(_) = accepted else {
            // Line search stalled at numerical resolution.
            break;
        };

        let mut new_grad = vec![0.0; n];
        let new_value = eval(&trial, Some(&mut new_grad))?;

        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(grad.iter()).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            s_mem.push_back(s);
            y_mem.push_back(y);
            rho_mem.push_back(1.0 / sy);
            if s_mem.len() > MEMORY {
                s_mem.pop_front();
                y_mem.pop_front();
                rho_mem.pop_front();
            }
        }

        x.copy_from_slice(&trial);
        grad = new_grad;
        value = new_value;
        iterations += 1;
    }

    let grad_norm = norm(&grad);
    Ok(LbfgsOutcome {
        x,
        grad_norm,
        iterations,
        converged,
    })
}

fn two_loop(
    grad: &[f64],
    s_mem: &VecDeque<Vec<f64>>,
    y_mem: &VecDeque<Vec<f64>>,
    rho_mem: &VecDeque<f64>,
) -> Vec<f64> {
    let mut q = grad.to_vec();
    let k = s_mem.len();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        alpha[i] = rho_mem[i] * dot(&s_mem[i], &q);
        for (qv, yv) in q.iter_mut().zip(y_mem[i].iter()) {
            *qv -= alpha[i] * yv;
        }
    }
    if k > 0 {
        let gamma = dot(&s_mem[k - 1], &y_mem[k - 1]) / dot(&y_mem[k - 1], &y_mem[k - 1]);
        for qv in q.iter_mut() {
            *qv *= gamma;
        }
    }
    for i in 0..k {
        let beta = rho_mem[i] * dot(&y_mem[i], &q);
        for (qv, sv) in q.iter_mut().zip(s_mem[i].iter()) {
            *qv += (alpha[i] - beta) * sv;
        }
    }
    for qv in q.iter_mut() {
        *qv = -*qv;
    }
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
