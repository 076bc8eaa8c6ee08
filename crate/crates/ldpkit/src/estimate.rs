//! Stochastic side of the LDP: rare-event probabilities and Laplace
//! functionals across an epsilon sweep, naively and under the Girsanov tilt.
//!
//! The importance sampler simulates the controlled equation with a
//! deterministic tilt `v` and weights each sample by
//!
//! ```text
//! exp( -(1/sqrt(eps)) sum_k v_k . dW_k - (1/(2 eps)) sum_k |v_k|^2 dt )
//! ```
//!
//! which is the change of measure that maps the controlled law back to the
//! prelimit one, so weighted averages are unbiased for the plain estimator.
//! The tilt of choice is the action minimizer steering the skeleton into the
//! event.

use crate::action::{
    min_action_constrained, laplace_infimum, ConstraintSpec, MinActionOptions, PathFunctional,
};
use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;
use crate::models::Model;
use crate::paths::{Control, InitialData, StatePath};
use crate::simulate::{check_divergence, euler_maruyama, sample_brownian_indexed};

/// Log-weights above this are counted as rejected instead of overflowing.
const LOG_WEIGHT_LIMIT: f64 = 700.0;

/// Rare-event set, evaluable from a state path alone.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSet {
    /// `X_T[coord] >= level`.
    TerminalHalfSpace { coord: usize, level: f64 },
    /// `|X_T - center| <= radius`.
    TerminalBall { center: Vec<f64>, radius: f64 },
    /// `sup_t X_t[coord] >= level` (over the grid nodes).
    SupExceedance { coord: usize, level: f64 },
}

impl EventSet {
    pub fn occurred(&self, path: &StatePath) -> bool {
        match self {
            EventSet::TerminalHalfSpace { coord, level } => path.terminal()[*coord] >= *level,
            EventSet::TerminalBall { center, radius } => {
                let dist = path
                    .terminal()
                    .iter()
                    .zip(center.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dist <= *radius
            }
            EventSet::SupExceedance { coord, level } => {
                (0..path.n_nodes()).any(|k| path.value(k)[*coord] >= *level)
            }
        }
    }
}

/// What a sweep estimates: a probability of an event or a Laplace functional
/// of a bounded terminal cost.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepTarget {
    Event(EventSet),
    Cost(PathFunctional),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Naive,
    Importance,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Naive => write!(f, "naive"),
            Method::Importance => write!(f, "importance"),
        }
    }
}

/// One estimation row of a sweep.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub eps: f64,
    pub method: Method,
    pub n_samples: u64,
    /// Count of samples landing in the event (0 for Laplace rows).
    pub n_hits: u64,
    /// Hit count for naive probability rows, weighted hit mass or Laplace
    /// mass otherwise.
    pub hits_or_weight_sum: f64,
    /// `p_hat` for probability rows, the raw mean of `exp(-F/eps)` for
    /// Laplace rows.
    pub estimate: f64,
    pub std_error: f64,
    /// `-eps log(estimate)`; `None` marks an unresolved (zero-hit) cell.
    pub minus_eps_log: Option<f64>,
    pub n_diverged: u64,
    pub n_rejected: u64,
}

impl ReportRow {
    pub fn resolved(&self) -> bool {
        self.minus_eps_log.is_some()
    }

    /// Delta-method standard error of `-eps log(estimate)`.
    pub fn minus_eps_log_std_error(&self) -> Option<f64> {
        if self.estimate > 0.0 {
            Some(self.eps * self.std_error / self.estimate)
        } else {
            None
        }
    }
}

/// Sweep output: per-epsilon rows plus the action-side reference value and
/// the tilt that importance rows used.
#[derive(Debug, Clone)]
pub struct EstimationReport {
    pub rows: Vec<ReportRow>,
    /// `inf I` over the event closure, or `inf {I + F}` for Laplace targets.
    pub action_reference: f64,
    pub tilt: Option<Control>,
    pub seed: u64,
    pub grid: TimeGrid,
    pub method: Method,
}

enum Outcome {
    Diverged,
    Rejected,
    Value { y: f64, hit: bool },
}

/// Naive Monte Carlo probability of an event at noise level `eps`.
pub fn mc_probability(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    eps: f64,
    event: &EventSet,
    n_samples: u64,
    seed: u64,
) -> LdpResult<ReportRow> {
    if !(eps > 0.0) {
        return Err(LdpError::Validation(format!("eps must be > 0, got {eps}")));
    }
    let outcomes = crate::parallel::map_samples(n_samples, |i| {
        let noise = sample_brownian_indexed(grid, model.noise_dim(), seed, i);
        match euler_maruyama(model, eps, init, None, &noise) {
            Ok(path) => {
                let hit = event.occurred(&path);
                Outcome::Value {
                    y: hit as u64 as f64,
                    hit,
                }
            }
            Err(_) => Outcome::Diverged,
        }
    });
    finalize_probability_row(outcomes, eps, Method::Naive, n_samples, true)
}

/// Naive Monte Carlo Laplace value `-eps log mean(exp(-F/eps))`.
pub fn mc_laplace(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    eps: f64,
    cost: &PathFunctional,
    n_samples: u64,
    seed: u64,
) -> LdpResult<ReportRow> {
    if !(eps > 0.0) {
        return Err(LdpError::Validation(format!("eps must be > 0, got {eps}")));
    }
    if !cost.is_cost() {
        return Err(LdpError::NotACost);
    }
    let outcomes = crate::parallel::map_samples(n_samples, |i| {
        let noise = sample_brownian_indexed(grid, model.noise_dim(), seed, i);
        match euler_maruyama(model, eps, init, None, &noise) {
            Ok(path) => Outcome::Value {
                y: (-cost.evaluate(&path).expect("validated cost variant") / eps).exp(),
                hit: false,
            },
            Err(_) => Outcome::Diverged,
        }
    });
    finalize_laplace_row(outcomes, eps, Method::Naive, n_samples)
}

/// Girsanov importance sampling with a deterministic tilt control.
///
/// With `tilt = 0` the weights are identically one and the estimate coincides
/// with the naive one at the same seed, sample for sample.
#[allow(clippy::too_many_arguments)]
pub fn importance_sampling(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    eps: f64,
    target: &SweepTarget,
    tilt: &Control,
    n_samples: u64,
    seed: u64,
) -> LdpResult<ReportRow> {
    if !(eps > 0.0) {
        return Err(LdpError::Validation(format!("eps must be > 0, got {eps}")));
    }
    if let Some(cap) = tilt.cap {
        let norm_sq = tilt.norm_sq();
        if norm_sq > cap * (1.0 + 1e-12) {
            return Err(LdpError::CapExceeded { norm_sq, cap });
        }
    }
    if let SweepTarget::Cost(cost) = target {
        if !cost.is_cost() {
            return Err(LdpError::NotACost);
        }
    }
    let inv_sqrt_eps = 1.0 / eps.sqrt();
    let half_norm_over_eps = tilt.norm_sq() * (0.5 / eps);
    let m = model.noise_dim();
    let n = grid.n_steps();
    let outcomes = crate::parallel::map_samples(n_samples, |i| {
        let noise = sample_brownian_indexed(grid, m, seed, i);
        let path = match euler_maruyama(model, eps, init, Some(tilt), &noise) {
            Ok(p) => p,
            Err(_) => return Outcome::Diverged,
        };
        let mut dot = 0.0;
        for k in 0..n {
            let v = tilt.step(k);
            let dw = noise.increment(k);
            for j in 0..m {
                dot += v[j] * dw[j];
            }
        }
        let log_weight = -inv_sqrt_eps * dot - half_norm_over_eps;
        if log_weight > LOG_WEIGHT_LIMIT {
            return Outcome::Rejected;
        }
        let weight = log_weight.exp();
        match target {
            SweepTarget::Event(event) => {
                let hit = event.occurred(&path);
                Outcome::Value {
                    y: weight * (hit as u64 as f64),
                    hit,
                }
            }
            SweepTarget::Cost(cost) => Outcome::Value {
                y: weight * (-cost.evaluate(&path).expect("validated cost variant") / eps).exp(),
                hit: false,
            },
        }
    });
    match target {
        SweepTarget::Event(_) => {
            finalize_probability_row(outcomes, eps, Method::Importance, n_samples, false)
        }
        SweepTarget::Cost(_) => finalize_laplace_row(outcomes, eps, Method::Importance, n_samples),
    }
}

fn finalize_probability_row(
    outcomes: Vec<Outcome>,
    eps: f64,
    method: Method,
    n_samples: u64,
    binomial_se: bool,
) -> LdpResult<ReportRow> {
    let (values, n_hits, n_diverged, n_rejected) = collect(outcomes)?;
    check_divergence(n_diverged, n_samples)?;
    let n = values.len() as f64;
    let estimate = values.iter().sum::<f64>() / n;
    let std_error = if binomial_se {
        (estimate * (1.0 - estimate) / n).sqrt()
    } else {
        sample_se(&values, estimate)
    };
    let minus_eps_log = if estimate > 0.0 {
        Some(-eps * estimate.ln())
    } else {
        None
    };
    Ok(ReportRow {
        eps,
        method,
        n_samples,
        n_hits,
        hits_or_weight_sum: if binomial_se {
            n_hits as f64
        } else {
            values.iter().sum::<f64>()
        },
        estimate,
        std_error,
        minus_eps_log,
        n_diverged,
        n_rejected,
    })
}

fn finalize_laplace_row(
    outcomes: Vec<Outcome>,
    eps: f64,
    method: Method,
    n_samples: u64,
) -> LdpResult<ReportRow> {
    let (values, _, n_diverged, n_rejected) = collect(outcomes)?;
    check_divergence(n_diverged, n_samples)?;
    let n = values.len() as f64;
    let estimate = values.iter().sum::<f64>() / n;
    let std_error = sample_se(&values, estimate);
    let minus_eps_log = if estimate > 0.0 {
        Some(-eps * estimate.ln())
    } else {
        None
    };
    Ok(ReportRow {
        eps,
        method,
        n_samples,
        n_hits: 0,
        hits_or_weight_sum: values.iter().sum::<f64>(),
        estimate,
        std_error,
        minus_eps_log,
        n_diverged,
        n_rejected,
    })
}

/// Splits outcomes into kept per-sample values (rejected samples contribute
/// zero mass but stay in the denominator) and the bookkeeping counts.
fn collect(outcomes: Vec<Outcome>) -> LdpResult<(Vec<f64>, u64, u64, u64)> {
    let mut values = Vec::with_capacity(outcomes.len());
    let mut n_hits = 0u64;
    let mut n_diverged = 0u64;
    let mut n_rejected = 0u64;
    for o in outcomes {
        match o {
            Outcome::Diverged => n_diverged += 1,
            Outcome::Rejected => {
                n_rejected += 1;
                values.push(0.0);
            }
            Outcome::Value { y, hit } => {
                values.push(y);
                n_hits += hit as u64;
            }
        }
    }
    if values.is_empty() {
        return Err(LdpError::AllDiverged);
    }
    Ok((values, n_hits, n_diverged, n_rejected))
}

fn sample_se(values: &[f64], mean: f64) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return f64::NAN;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Action reference and tilt for a sweep target: `min I` over the event
/// closure, or the Laplace infimum for cost targets. Sup-exceedance events
/// use the terminal half-space problem as reference, which upper-bounds the
/// infimum over the sup event and is tight for drifts that pull toward the
/// initial point.
pub fn action_reference(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    target: &SweepTarget,
    opts: &MinActionOptions,
) -> LdpResult<(f64, Control)> {
    match target {
        SweepTarget::Event(event) => {
            let spec = match event {
                EventSet::TerminalHalfSpace { coord, level } => ConstraintSpec::HalfSpace {
                    coord: *coord,
                    level: *level,
                },
                EventSet::TerminalBall { center, radius } => ConstraintSpec::Ball {
                    center: center.clone(),
                    radius: *radius,
                },
                EventSet::SupExceedance { coord, level } => ConstraintSpec::HalfSpace {
                    coord: *coord,
                    level: *level,
                },
            };
            let sol = min_action_constrained(model, init, grid, &spec, opts)?;
            Ok((sol.value, sol.control))
        }
        SweepTarget::Cost(cost) => {
            let sol = laplace_infimum(model, init, grid, cost, opts)?;
            Ok((sol.objective, sol.control))
        }
    }
}

/// Runs the chosen estimator across a strictly decreasing list of noise
/// levels, sharing Brownian draws across levels (common random numbers) and
/// appending the action-side reference value.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_sweep(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    target: &SweepTarget,
    eps_list: &[f64],
    n_samples: u64,
    seed: u64,
    method: Method,
    action_opts: &MinActionOptions,
) -> LdpResult<EstimationReport> {
    if eps_list.is_empty() {
        return Err(LdpError::Validation("eps_list must be nonempty".into()));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(LdpError::Validation(
                "eps_list must be strictly decreasing".into(),
            ));
        }
    }
    if !(eps_list[eps_list.len() - 1] > 0.0) {
        return Err(LdpError::Validation("eps values must be positive".into()));
    }

    let (action_ref, minimizer) = action_reference(model, init, grid, target, action_opts)?;
    let tilt = match method {
        Method::Naive => None,
        Method::Importance => Some(minimizer),
    };

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let row = match (method, target) {
            (Method::Naive, SweepTarget::Event(event)) => {
                mc_probability(model, init, grid, eps, event, n_samples, seed)?
            }
            (Method::Naive, SweepTarget::Cost(cost)) => {
                mc_laplace(model, init, grid, eps, cost, n_samples, seed)?
            }
            (Method::Importance, _) => importance_sampling(
                model,
                init,
                grid,
                eps,
                target,
                tilt.as_ref().expect("importance method sets a tilt"),
                n_samples,
                seed,
            )?,
        };
        rows.push(row);
    }
    Ok(EstimationReport {
        rows,
        action_reference: action_ref,
        tilt,
        seed,
        grid: grid.clone(),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Model;

    #[test]
    fn sure_event_has_probability_one_and_zero_rate() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let event = EventSet::TerminalHalfSpace {
            coord: 0,
            level: -1e10,
        };
        let row = mc_probability(
            &model,
            &InitialData::point(vec![0.0]),
            &grid,
            0.5,
            &event,
            500,
            7,
        )
        .unwrap();
        assert_eq!(row.estimate, 1.0);
        assert_eq!(row.minus_eps_log, Some(-0.0));
        assert_eq!(row.n_hits, 500);
    }

    #[test]
    fn constant_cost_laplace_is_exact() {
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        for c in [0.0, 0.7] {
            let row = mc_laplace(
                &model,
                &InitialData::point(vec![0.0]),
                &grid,
                0.25,
                &PathFunctional::Constant { value: c },
                200,
                3,
            )
            .unwrap();
            let value = row.minus_eps_log.unwrap();
            assert!(
                (value - c).abs() < 1e-12,
                "laplace value {value} for constant cost {c}"
            );
        }
    }

    #[test]
    fn zero_tilt_importance_equals_naive_bitwise() {
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let init = InitialData::point(vec![0.0]);
        let event = EventSet::TerminalHalfSpace {
            coord: 0,
            level: 0.4,
        };
        let naive = mc_probability(&model, &init, &grid, 0.25, &event, 4000, 11).unwrap();
        let zero = Control::zero(grid.clone(), 1);
        let is = importance_sampling(
            &model,
            &init,
            &grid,
            0.25,
            &SweepTarget::Event(event),
            &zero,
            4000,
            11,
        )
        .unwrap();
        assert_eq!(naive.estimate.to_bits(), is.estimate.to_bits());
        assert_eq!(naive.n_hits, is.n_hits);
    }

    #[test]
    fn sweep_requires_decreasing_eps() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let target = SweepTarget::Event(EventSet::TerminalHalfSpace {
            coord: 0,
            level: 1.0,
        });
        let err = epsilon_sweep(
            &model,
            &InitialData::point(vec![0.0]),
            &grid,
            &target,
            &[0.1, 0.5],
            10,
            1,
            Method::Naive,
            &MinActionOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, LdpError::Validation(_)));
    }

    #[test]
    fn unresolved_rows_are_flagged_not_fatal() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let event = EventSet::TerminalHalfSpace {
            coord: 0,
            level: 50.0,
        };
        let row = mc_probability(
            &model,
            &InitialData::point(vec![0.0]),
            &grid,
            0.1,
            &event,
            200,
            5,
        )
        .unwrap();
        assert_eq!(row.estimate, 0.0);
        assert!(!row.resolved());
    }

    #[test]
    fn sup_event_sees_running_maximum() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let values = vec![0.0, 2.0, 0.0, 0.0, 0.0];
        let path = StatePath::new(grid, 1, 1.0, values, None).unwrap();
        let sup = EventSet::SupExceedance {
            coord: 0,
            level: 1.5,
        };
        let terminal = EventSet::TerminalHalfSpace {
            coord: 0,
            level: 1.5,
        };
        assert!(sup.occurred(&path));
        assert!(!terminal.occurred(&path));
    }
}
