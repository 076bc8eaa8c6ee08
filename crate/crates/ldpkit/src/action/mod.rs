//! Rate-function computation: explicit formulas where the dispersion is
//! nondegenerate, and control-space minimization of
//! `1/2 sum_k |f_k|^2 dt (+ F(Gamma_x(f)))` elsewhere.
//!
//! Controls are the optimization variables; every iterate's path is feasible
//! by construction since it is produced by the skeleton recursion. Endpoint
//! constraints are enforced by quadratic penalty continuation, gradients come
//! from the discrete adjoint, and the search is quasi-Newton with multiple
//! seeded restarts (the first restart always starts from the zero control).

mod adjoint;
mod functional;
mod lbfgs;

pub use functional::{PathFunctional, PiecewiseLinear};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;
use crate::models::{Model, PathSlice};
use crate::paths::{Control, InitialData, StatePath};
use crate::rng::{domain, stream};

use adjoint::{finite_difference_gradient, objective_and_gradient, TerminalTerm};

/// An action problem: steer the skeleton from `init` subject to `functional`,
/// searching controls of squared norm up to `n_cap`.
#[derive(Debug, Clone)]
pub struct ActionProblem {
    pub init: InitialData,
    pub functional: PathFunctional,
    pub n_cap: f64,
}

/// Result of an action minimization.
#[derive(Debug, Clone)]
pub struct ActionSolution {
    pub control: Control,
    pub path: StatePath,
    /// `I* = 1/2 sum |f*_k|^2 dt`.
    pub value: f64,
    /// `I* + F(phi*)` for cost functionals, `I*` for constraints.
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: u64,
    pub restarts: usize,
    pub converged: bool,
    /// Endpoint constraint violation, for constraint functionals.
    pub constraint_violation: Option<f64>,
    pub feasible: bool,
    /// The reported value is an upper bound on the true infimum; this flags
    /// minimizers that left the declared search ball.
    pub cap_exceeded: bool,
}

#[derive(Debug, Clone)]
pub struct MinActionOptions {
    pub n_cap: f64,
    /// Gradient-norm convergence tolerance.
    pub tol_grad: f64,
    /// Constraint tolerance driving the penalty continuation.
    pub tol_constraint: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: u64,
    pub penalty_mu0: f64,
    pub penalty_growth: f64,
    pub penalty_stages: usize,
}

impl Default for MinActionOptions {
    fn default() -> Self {
        MinActionOptions {
            n_cap: 16.0,
            tol_grad: 1e-9,
            // The mu-schedule tops out at 1e5, which pins the reachable
            // violation near z / (2 mu T); 1e-4 keeps the action error an
            // order below every downstream tolerance.
            tol_constraint: 1e-4,
            restarts: 8,
            seed: 0,
            max_iters: 500,
            penalty_mu0: 1.0,
            penalty_growth: 10.0,
            penalty_stages: 6,
        }
    }
}

/// `1/2 sum_k |f_k|^2 dt`.
pub fn action_of_control(control: &Control) -> f64 {
    0.5 * control.norm_sq()
}

/// Explicit rate of a given path under a nondegenerate dispersion:
/// `1/2 sum_k (dphi_k/dt - b)^T (sigma sigma^T)^{-1} (dphi_k/dt - b) dt`
/// with forward differences and left-node coefficients.
///
/// Paths that do not start at `init` have infinite rate (returned as
/// `f64::INFINITY`); a dispersion pivot at or below `sigma_floor` is a
/// degenerate-path error.
pub fn rate_explicit(
    model: &Model,
    init: &InitialData,
    path: &StatePath,
    sigma_floor: f64,
) -> LdpResult<f64> {
    let d = model.state_dim();
    let m = model.noise_dim();
    if path.d != d {
        return Err(LdpError::DimensionMismatch(format!(
            "path dimension {} vs model dimension {d}",
            path.d
        )));
    }
    let x0 = init.initial_state();
    if path.value(0) != x0 {
        return Ok(f64::INFINITY);
    }
    let grid = &path.grid;
    let lag = model.lag_steps_for(grid, init)?;
    let slice = PathSlice::from_path(path, lag);
    let n = grid.n_steps();
    let dt = grid.dt();
    let floor_sq = sigma_floor * sigma_floor;

    let mut drift = vec![0.0; d];
    let mut disp = vec![0.0; d * m];
    let mut a = vec![0.0; d * d];
    let mut v = vec![0.0; d];
    let mut sum = 0.0;
    for k in 0..n {
        let t = grid.node(k);
        model.drift_into(t, &slice, k, &mut drift);
        model.dispersion_into(t, &slice, k, &mut disp);
        for i in 0..d {
            v[i] = (path.value(k + 1)[i] - path.value(k)[i]) / dt - drift[i];
        }
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..m {
                    s += disp[i * m + l] * disp[j * m + l];
                }
                a[i * d + j] = s;
            }
        }
        let quad = cholesky_quadform(&mut a, d, &v, floor_sq)
            .ok_or(LdpError::DegenerateDispersion { step: k })?;
        sum += quad * dt;
    }
    Ok(0.5 * sum)
}

/// `v^T A^{-1} v` via in-place Cholesky; `None` when a pivot is at or below
/// `floor_sq`.
fn cholesky_quadform(a: &mut [f64], d: usize, v: &[f64], floor_sq: f64) -> Option<f64> {
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            if i == j {
                if !(s > floor_sq) {
                    return None;
                }
                a[i * d + i] = s.sqrt();
            } else {
                a[i * d + j] = s / a[j * d + j];
            }
        }
    }
    // v^T (L L^T)^{-1} v = |L^{-1} v|^2
    let mut w = v.to_vec();
    for i in 0..d {
        let mut s = w[i];
        for k in 0..i {
            s -= a[i * d + k] * w[k];
        }
        w[i] = s / a[i * d + i];
    }
    Some(w.iter().map(|x| x * x).sum())
}

/// Endpoint constraint for the penalty continuation.
#[derive(Debug, Clone)]
pub(crate) enum ConstraintSpec {
    Point(Vec<f64>),
    HalfSpace { coord: usize, level: f64 },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ConstraintSpec {
    fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintSpec::Point(target) => x
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            ConstraintSpec::HalfSpace { coord, level } => (level - x[*coord]).max(0.0),
            ConstraintSpec::Ball { center, radius } => {
                let dist = x
                    .iter()
                    .zip(center.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (dist - radius).max(0.0)
            }
        }
    }

    fn term(&self, mu: f64) -> TerminalTerm<'_> {
        match self {
            ConstraintSpec::Point(target) => TerminalTerm::PenaltyPoint { target, mu },
            ConstraintSpec::HalfSpace { coord, level } => TerminalTerm::PenaltyHalfSpace {
                coord: *coord,
                level: *level,
                mu,
            },
            ConstraintSpec::Ball { center, radius } => TerminalTerm::PenaltyBall {
                center,
                radius: *radius,
                mu,
            },
        }
    }
}

struct Candidate {
    f: Vec<f64>,
    objective: f64,
    action: f64,
    grad_norm: f64,
    iterations: u64,
    converged: bool,
    violation: Option<f64>,
}

/// Minimizes the action subject to the functional: quadratic-penalty
/// continuation for the constraint variants, direct minimization of
/// `action + F` for the cost variants.
pub fn min_action(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    functional: &PathFunctional,
    opts: &MinActionOptions,
) -> LdpResult<ActionSolution> {
    match functional {
        PathFunctional::TerminalPoint { target } => {
            if target.len() != model.state_dim() {
                return Err(LdpError::DimensionMismatch(format!(
                    "target has {} coordinates, model has d = {}",
                    target.len(),
                    model.state_dim()
                )));
            }
            min_action_constrained(model, init, grid, &ConstraintSpec::Point(target.clone()), opts)
        }
        PathFunctional::TerminalHalfSpace { coord, level } => min_action_constrained(
            model,
            init,
            grid,
            &ConstraintSpec::HalfSpace {
                coord: *coord,
                level: *level,
            },
            opts,
        ),
        PathFunctional::TerminalCost { coord, table } => {
            let term = TerminalTerm::Cost {
                coord: *coord,
                table,
            };
            minimize_cost(model, init, grid, &term, opts)
        }
        PathFunctional::Constant { value } => {
            let term = TerminalTerm::Constant { value: *value };
            minimize_cost(model, init, grid, &term, opts)
        }
    }
}

/// `inf_phi { I_x(phi) + F(phi) }` for a bounded cost `F`, reported through
/// the best local minimum over the restarts. The returned `objective` is the
/// Laplace infimum value (an upper bound on the true infimum).
pub fn laplace_infimum(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    cost: &PathFunctional,
    opts: &MinActionOptions,
) -> LdpResult<ActionSolution> {
    if !cost.is_cost() {
        return Err(LdpError::NotACost);
    }
    min_action(model, init, grid, cost, opts)
}

pub(crate) fn min_action_constrained(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    spec: &ConstraintSpec,
    opts: &MinActionOptions,
) -> LdpResult<ActionSolution> {
    let run = |f0: Vec<f64>| -> LdpResult<Candidate> {
        let mut f = f0;
        let mut mu = opts.penalty_mu0;
        let mut total_iters = 0u64;
        let mut outcome = None;
        for stage in 0..opts.penalty_stages {
            let term = spec.term(mu);
            let out = lbfgs::minimize(
                |x, grad| {
                    objective_and_gradient(model, init, grid, x, &term, grad).map(|(j, _, _)| j)
                },
                f,
                opts.tol_grad,
                opts.max_iters,
            )?;
            total_iters += out.iterations;
            f = out.x.clone();
            let (_, action, path) =
                objective_and_gradient(model, init, grid, &f, &TerminalTerm::Zero, None)?;
            let violation = spec.violation(path.terminal());
            let last_stage = stage + 1 == opts.penalty_stages;
            let done = violation <= opts.tol_constraint || last_stage;
            outcome = Some(Candidate {
                f: f.clone(),
                objective: action,
                action,
                grad_norm: out.grad_norm,
                iterations: total_iters,
                converged: out.converged,
                violation: Some(violation),
            });
            if done {
                break;
            }
            mu *= opts.penalty_growth;
        }
        Ok(outcome.expect("at least one penalty stage runs"))
    };
    let candidates = run_restarts(model, grid, opts, run)?;
    select_candidate(model, init, grid, candidates, opts, true)
}

fn minimize_cost(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    term: &TerminalTerm<'_>,
    opts: &MinActionOptions,
) -> LdpResult<ActionSolution> {
    let run = |f0: Vec<f64>| -> LdpResult<Candidate> {
        let out = lbfgs::minimize(
            |x, grad| objective_and_gradient(model, init, grid, x, term, grad).map(|(j, _, _)| j),
            f0,
            opts.tol_grad,
            opts.max_iters,
        )?;
        let (objective, action, _) = objective_and_gradient(model, init, grid, &out.x, term, None)?;
        Ok(Candidate {
            f: out.x,
            objective,
            action,
            grad_norm: out.grad_norm,
            iterations: out.iterations,
            converged: out.converged,
            violation: None,
        })
    };
    let candidates = run_restarts(model, grid, opts, run)?;
    select_candidate(model, init, grid, candidates, opts, false)
}

fn run_restarts<F>(
    model: &Model,
    grid: &TimeGrid,
    opts: &MinActionOptions,
    run: F,
) -> LdpResult<Vec<Candidate>>
where
    F: Fn(Vec<f64>) -> LdpResult<Candidate> + Sync,
{
    let n_vars = grid.n_steps() * model.noise_dim();
    let starts: Vec<Vec<f64>> = (0..opts.restarts.max(1))
        .map(|r| {
            if r == 0 {
                vec![0.0; n_vars]
            } else {
                let mut rng = stream(opts.seed, r as u64, domain::RESTART);
                let sd = (opts.n_cap / (2.0 * grid.horizon()).max(1e-12)).sqrt()
                    / (model.noise_dim() as f64).sqrt();
                (0..n_vars)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
        })
        .collect();
    let results = crate::parallel::map_samples(starts.len() as u64, |r| {
        run(starts[r as usize].clone())
    });
    results.into_iter().collect()
}

fn select_candidate(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    candidates: Vec<Candidate>,
    opts: &MinActionOptions,
    constrained: bool,
) -> LdpResult<ActionSolution> {
    let restarts = candidates.len();
    let best = candidates
        .into_iter()
        .min_by(|a, b| {
            let key = |c: &Candidate| {
                if constrained {
                    let feasible = c.violation.unwrap_or(0.0) <= opts.tol_constraint;
                    // Infeasible candidates sort after feasible ones, then by
                    // violation; feasible ones by action.
                    if feasible {
                        (0u8, c.action)
                    } else {
                        (1u8, c.violation.unwrap_or(f64::INFINITY))
                    }
                } else {
                    (0u8, c.objective)
                }
            };
            key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one restart");

    let control = Control::new(grid.clone(), model.noise_dim(), best.f.clone())?;
    let (_, _, path) =
        objective_and_gradient(model, init, grid, &best.f, &TerminalTerm::Zero, None)?;
    let norm_sq = control.norm_sq();
    let feasible = best
        .violation
        .map(|v| v <= opts.tol_constraint)
        .unwrap_or(true);
    Ok(ActionSolution {
        control,
        path,
        value: best.action,
        objective: best.objective,
        gradient_norm: best.grad_norm,
        iterations: best.iterations,
        restarts,
        converged: best.converged,
        constraint_violation: best.violation,
        feasible,
        cap_exceeded: norm_sq > opts.n_cap * (1.0 + 1e-9),
    })
}

/// Evaluates `I + F` for a cost functional at a given control.
pub fn objective_at(
    model: &Model,
    init: &InitialData,
    cost: &PathFunctional,
    control: &Control,
) -> LdpResult<f64> {
    let sol = crate::skeleton::solve_skeleton(model, init, control)?;
    Ok(action_of_control(control) + cost.evaluate(&sol.path)?)
}

#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub relative_error: f64,
    pub adjoint_norm: f64,
    pub fd_norm: f64,
}

/// Compares the discrete-adjoint gradient of a penalty objective against
/// central finite differences at a given control.
pub fn gradient_check(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    control: &Control,
    target: &[f64],
    mu: f64,
) -> LdpResult<GradientCheck> {
    let term = TerminalTerm::PenaltyPoint { target, mu };
    let f = control.values();
    let mut adjoint = vec![0.0; f.len()];
    objective_and_gradient(model, init, grid, f, &term, Some(&mut adjoint))?;
    let scale = f.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let h = 1e-6 * scale;
    let fd = finite_difference_gradient(model, init, grid, f, &term, h)?;
    let diff_sq: f64 = adjoint
        .iter()
        .zip(fd.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let fd_norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    let adjoint_norm = adjoint.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(GradientCheck {
        relative_error: diff_sq.sqrt() / fd_norm.max(1e-12),
        adjoint_norm,
        fd_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AffineXY, Model, Poly};
    use crate::paths::Segment;
    use crate::simulate::random_control_in_ball;

    fn opts(seed: u64) -> MinActionOptions {
        MinActionOptions {
            seed,
            restarts: 4,
            n_cap: 8.0,
            ..Default::default()
        }
    }

    #[test]
    fn action_of_simple_controls() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        assert_eq!(action_of_control(&Control::zero(grid.clone(), 1)), 0.0);
        let two = Control::constant(grid.clone(), &[2.0]);
        assert!((action_of_control(&two) - 2.0).abs() < 1e-12);
        // f_k = sin(2 pi t_k): action -> 1/4; the left sum over whole periods
        // is exact.
        let n = 2000;
        let g = TimeGrid::new(1.0, n).unwrap();
        let values: Vec<f64> = (0..n)
            .map(|k| (2.0 * std::f64::consts::PI * g.node(k)).sin())
            .collect();
        let c = Control::new(g, 1, values).unwrap();
        assert!((action_of_control(&c) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn rate_explicit_hand_values() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let model = Model::schilder(1);
        let init = InitialData::point(vec![0.5]);
        // constant path, zero drift
        let flat = StatePath::new(grid.clone(), 1, 0.0, vec![0.5; 101], None).unwrap();
        assert_eq!(rate_explicit(&model, &init, &flat, 1e-8).unwrap(), 0.0);
        // unit-slope path: 1/2 int 1 = 0.5
        let values: Vec<f64> = (0..=100).map(|k| 0.5 + grid.node(k)).collect();
        let ramp = StatePath::new(grid.clone(), 1, 0.0, values, None).unwrap();
        let r = rate_explicit(&model, &init, &ramp, 1e-8).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        // initial-point mismatch is an infinite rate
        let wrong = InitialData::point(vec![0.25]);
        assert!(rate_explicit(&model, &wrong, &ramp, 1e-8).unwrap().is_infinite());
    }

    #[test]
    fn rate_explicit_zero_at_ou_rest_point() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let init = InitialData::point(vec![0.0]);
        let rest = StatePath::new(grid, 1, 0.0, vec![0.0; 65], None).unwrap();
        assert_eq!(rate_explicit(&model, &init, &rest, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn rate_explicit_flags_degenerate_dispersion() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let model = Model::cir(1.0, 1.0, 1.0).unwrap();
        let init = InitialData::point(vec![0.0]);
        let path = StatePath::new(grid, 1, 0.0, vec![0.0; 17], None).unwrap();
        assert!(matches!(
            rate_explicit(&model, &init, &path, 1e-8),
            Err(LdpError::DegenerateDispersion { .. })
        ));
    }

    #[test]
    fn schilder_point_constraint_reaches_straight_line() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let init = InitialData::point(vec![0.0]);
        let functional = PathFunctional::TerminalPoint { target: vec![2.0] };
        let sol = min_action(&model, &init, &grid, &functional, &opts(1)).unwrap();
        assert!(sol.feasible);
        assert!((sol.value - 2.0).abs() < 1e-3, "I* = {}", sol.value);
        for k in 0..200 {
            assert!((sol.control.step(k)[0] - 2.0).abs() < 1e-2);
        }
    }

    #[test]
    fn constant_cost_keeps_zero_control() {
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let init = InitialData::point(vec![0.3]);
        let sol = min_action(
            &model,
            &init,
            &grid,
            &PathFunctional::Constant { value: 1.5 },
            &opts(2),
        )
        .unwrap();
        assert!(sol.value < 1e-12);
        assert!((sol.objective - 1.5).abs() < 1e-12);
    }

    #[test]
    fn target_at_flow_endpoint_costs_nothing() {
        let model = Model::ornstein_uhlenbeck(1, 0.8);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let init = InitialData::point(vec![1.0]);
        let free = crate::skeleton::solve_skeleton(
            &model,
            &init,
            &Control::zero(grid.clone(), 1),
        )
        .unwrap();
        let target = free.path.terminal().to_vec();
        let sol = min_action(
            &model,
            &init,
            &grid,
            &PathFunctional::TerminalPoint { target },
            &opts(3),
        )
        .unwrap();
        assert!(sol.value <= 1e-6, "I* = {}", sol.value);
    }

    #[test]
    fn minimizer_reproduces_its_own_explicit_rate() {
        // explicit/variational consistency on a nondegenerate scalar model
        let model = Model::fw_poly(Poly(vec![0.5, -1.0]), Poly(vec![1.0, 0.2])).unwrap();
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let init = InitialData::point(vec![0.2]);
        let sol = min_action(
            &model,
            &init,
            &grid,
            &PathFunctional::TerminalPoint { target: vec![1.2] },
            &opts(4),
        )
        .unwrap();
        let explicit = rate_explicit(&model, &init, &sol.path, 1e-10).unwrap();
        assert!(
            (explicit - sol.value).abs() <= 0.01 * sol.value.max(1e-12),
            "explicit {explicit} vs variational {}",
            sol.value
        );
    }

    #[test]
    fn adjoint_matches_finite_differences_on_all_families() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let seg_grid = grid.clone();
        let cases: Vec<(Model, InitialData)> = vec![
            (Model::schilder(2), InitialData::point(vec![0.0, 0.1])),
            (
                Model::ornstein_uhlenbeck(1, 1.2),
                InitialData::point(vec![0.4]),
            ),
            (
                Model::fw_poly(Poly(vec![0.3, -0.9]), Poly(vec![1.1, 0.2])).unwrap(),
                InitialData::point(vec![0.2]),
            ),
            (
                Model::cir(1.0, 1.0, 0.5).unwrap(),
                InitialData::point(vec![1.0]),
            ),
            (
                Model::delay_linear(
                    AffineXY::new(-0.8, 0.4, 0.1),
                    AffineXY::new(0.2, -0.1, 1.0),
                    0.25,
                    1.0,
                )
                .unwrap(),
                InitialData::Segment(Segment::constant(0.25, &[0.5], &seg_grid).unwrap()),
            ),
        ];
        for (model, init) in cases {
            for inst in 0..3 {
                let mut control = random_control_in_ball(&grid, model.noise_dim(), 0.5, 7, inst);
                for v in control.values_mut() {
                    *v *= 0.5;
                }
                let target = vec![0.9; model.state_dim()];
                let check =
                    gradient_check(&model, &init, &grid, &control, &target, 2.0).unwrap();
                assert!(
                    check.relative_error < 1e-5,
                    "{}: rel err {}",
                    model.name(),
                    check.relative_error
                );
            }
        }
    }

    #[test]
    fn laplace_infimum_rejects_constraints() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let err = laplace_infimum(
            &model,
            &InitialData::point(vec![0.0]),
            &grid,
            &PathFunctional::TerminalPoint { target: vec![1.0] },
            &MinActionOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, LdpError::NotACost));
    }

    #[test]
    fn laplace_zero_cost_is_zero() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let sol = laplace_infimum(
            &model,
            &InitialData::point(vec![0.0]),
            &grid,
            &PathFunctional::Constant { value: 0.0 },
            &opts(5),
        )
        .unwrap();
        assert!(sol.objective.abs() < 1e-12);
    }

    #[test]
    fn skirting_cost_region_costs_nothing() {
        // F(phi) = min(1, max(0, 1 - phi_T)) from x = 2 on Schilder: the free
        // skeleton stays at 2, where the ramp is already zero.
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let table = PiecewiseLinear::new(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
        let sol = laplace_infimum(
            &model,
            &InitialData::point(vec![2.0]),
            &grid,
            &PathFunctional::TerminalCost { coord: 0, table },
            &opts(6),
        )
        .unwrap();
        assert!(sol.objective.abs() < 1e-10, "J* = {}", sol.objective);
    }
}
