//! Deterministic limit machinery: the controlled skeleton map, its growth
//! bound, the weak-L2 continuity probe, and the positivity certificate for
//! square-root-type positive diffusions.

use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;
use crate::models::{Model, PathSlice};
use crate::paths::{norm, Control, InitialData, StatePath};
use crate::simulate::{integrate, random_control_in_ball};

/// Solution of the controlled integral equation
/// `phi_t = x + int_0^t b(s, phi) ds + int_0^t sigma(s, phi) f_s ds`,
/// computed by the same explicit Euler recursion as the simulator at
/// `eps = 0`, plus an a-posteriori trapezoidal quadrature residual.
#[derive(Debug, Clone)]
pub struct SkeletonSolution {
    pub control: Control,
    pub path: StatePath,
    /// `max_k |phi_{t_k} - x - int_0^{t_k} (b + sigma f)|` under trapezoidal
    /// quadrature of the right-hand side; O(dt) for smooth coefficients.
    pub residual: f64,
}

/// Solves the skeleton equation for a piecewise-constant control.
///
/// Bit-identical to [`crate::simulate::euler_maruyama`] with `eps = 0`: both
/// run the same recursion, so simulator/skeleton consistency is structural.
pub fn solve_skeleton(
    model: &Model,
    init: &InitialData,
    control: &Control,
) -> LdpResult<SkeletonSolution> {
    if control.m != model.noise_dim() {
        return Err(LdpError::DimensionMismatch(format!(
            "control dimension {} vs noise dimension {}",
            control.m,
            model.noise_dim()
        )));
    }
    let grid = control.grid.clone();
    let path = integrate(model, 0.0, init, Some(control.values()), None, &grid)?;
    let residual = quadrature_residual(model, init, &path, control)?;
    Ok(SkeletonSolution {
        control: control.clone(),
        path,
        residual,
    })
}

fn quadrature_residual(
    model: &Model,
    init: &InitialData,
    path: &StatePath,
    control: &Control,
) -> LdpResult<f64> {
    let grid = &path.grid;
    let n = grid.n_steps();
    let d = model.state_dim();
    let m = model.noise_dim();
    let dt = grid.dt();
    let lag = model.lag_steps_for(grid, init)?;
    let slice = PathSlice::from_path(path, lag);
    let x0 = init.initial_state();

    let mut drift = vec![0.0; d];
    let mut disp = vec![0.0; d * m];
    let mut rhs = |k: usize, f_k: &[f64], out: &mut [f64]| {
        let t = grid.node(k);
        model.drift_into(t, &slice, k, &mut drift);
        model.dispersion_into(t, &slice, k, &mut disp);
        for i in 0..d {
            let mut u = drift[i];
            for j in 0..m {
                u += disp[i * m + j] * f_k[j];
            }
            out[i] = u;
        }
    };

    let mut cum = vec![0.0; d];
    let mut left = vec![0.0; d];
    let mut right = vec![0.0; d];
    let mut worst = 0.0f64;
    for k in 0..n {
        let f_k = control.step(k);
        rhs(k, f_k, &mut left);
        rhs(k + 1, f_k, &mut right);
        let mut err_sq = 0.0;
        for i in 0..d {
            cum[i] += 0.5 * dt * (left[i] + right[i]);
            let e = path.value(k + 1)[i] - x0[i] - cum[i];
            err_sq += e * e;
        }
        worst = worst.max(err_sq.sqrt());
    }
    Ok(worst)
}

/// Gronwall growth estimate for skeleton paths:
/// `sup_{s<=t} |phi_s|^2 <= (3|x|^2 + 6 M^2 t^2 + 6 M^2 t |f|^2) e^{6 M^2 t (t + |f|^2)}`.
pub fn growth_bound(x: &[f64], growth_m: f64, t: f64, f_norm_sq: f64) -> f64 {
    let x_sq = x.iter().map(|v| v * v).sum::<f64>();
    let m_sq = growth_m * growth_m;
    (3.0 * x_sq + 6.0 * m_sq * t * t + 6.0 * m_sq * t * f_norm_sq)
        * (6.0 * m_sq * t * (t + f_norm_sq)).exp()
}

/// Checks `sup_{s<=t} |phi_s|^2 <= growth_bound(x, M, t, |f|^2)` at every
/// node of a computed skeleton; returns the worst bound/value margin ratio.
pub fn growth_margin(model: &Model, init: &InitialData, sol: &SkeletonSolution) -> f64 {
    let x0 = init.initial_state();
    let f_norm_sq = sol.control.norm_sq();
    let mut worst = f64::INFINITY;
    let mut sup_sq = 0.0f64;
    for k in 0..sol.path.n_nodes() {
        sup_sq = sup_sq.max(norm(sol.path.value(k)).powi(2));
        let bound = growth_bound(x0, model.growth_constant(), sol.path.grid.node(k), f_norm_sq);
        worst = worst.min(bound - sup_sq);
    }
    worst
}

#[derive(Debug, Clone)]
pub struct WeakL2Report {
    pub amplitude: f64,
    /// `(frequency, |Gamma_x(f + A sin(2 pi n t)) - Gamma_x(f)|_inf)` rows.
    pub deviations: Vec<(u32, f64)>,
    pub tolerance: f64,
}

impl WeakL2Report {
    /// Weak continuity holds on this probe family when the deviation at the
    /// highest frequency has dropped below both the first one and the
    /// tolerance.
    pub fn passed(&self) -> bool {
        match (self.deviations.first(), self.deviations.last()) {
            (Some((_, e_first)), Some((_, e_last))) => {
                e_last < e_first && *e_last <= self.tolerance
            }
            _ => false,
        }
    }
}

/// Probes weak-L2 continuity of the skeleton map with sinusoidal
/// perturbations `f + A sin(2 pi n t)` applied to every control component.
/// These converge weakly (not strongly) to `f` as `n` grows, so the skeleton
/// deviations must die out.
#[allow(clippy::too_many_arguments)]
pub fn weak_l2_continuity_probe(
    model: &Model,
    init: &InitialData,
    control: &Control,
    amplitude: f64,
    frequencies: &[u32],
    cap: Option<f64>,
    tolerance: f64,
) -> LdpResult<WeakL2Report> {
    let base = solve_skeleton(model, init, control)?;
    let grid = control.grid.clone();
    let n = grid.n_steps();
    let m = control.m;
    let mut deviations = Vec::with_capacity(frequencies.len());
    for &freq in frequencies {
        let mut values = control.values().to_vec();
        for k in 0..n {
            let osc = amplitude * (2.0 * std::f64::consts::PI * freq as f64 * grid.node(k)).sin();
            for j in 0..m {
                values[k * m + j] += osc;
            }
        }
        let perturbed = Control::new(grid.clone(), m, values)?;
        if let Some(cap) = cap {
            let norm_sq = perturbed.norm_sq();
            if norm_sq > cap * (1.0 + 1e-12) {
                return Err(LdpError::CapExceeded { norm_sq, cap });
            }
        }
        let sol = solve_skeleton(model, init, &perturbed)?;
        deviations.push((freq, sol.path.sup_distance(&base.path)));
    }
    Ok(WeakL2Report {
        amplitude,
        deviations,
        tolerance,
    })
}

/// Uniform lower bound on skeleton paths of a square-root-type positive
/// diffusion, valid for every control with `|f|^2 <= N`.
#[derive(Debug, Clone)]
pub struct PositivityCertificate {
    /// Right end of the drift-positive interval, `x_bar < x_0`.
    pub x_bar: f64,
    /// Drift floor `beta = min_[0, x_bar] b > 0`.
    pub beta: f64,
    /// The floor: every admissible skeleton stays `>= xi`.
    pub xi: f64,
    pub n_cap: f64,
}

/// Search policy for the drift-positive bracket.
#[derive(Debug, Clone, Default)]
pub struct PositivityBracket {
    /// Use this `x_bar` instead of scanning below `x_0`.
    pub x_bar: Option<f64>,
}

impl PositivityBracket {
    pub fn fixed(x_bar: f64) -> Self {
        PositivityBracket { x_bar: Some(x_bar) }
    }
}

/// Builds the positivity certificate of a square-root-type model: picks
/// `x_bar < x_0` with drift floor `beta > 0`, then bisects
/// `beta * int_xi^x_bar rho(r)^-2 dr = 2 N^2` for `xi` (the factor 2 gives
/// margin over the contradiction threshold, covering the O(dt) undershoot of
/// discrete paths).
pub fn positivity_floor(
    model: &Model,
    x0: f64,
    n_cap: f64,
    bracket: &PositivityBracket,
) -> LdpResult<PositivityCertificate> {
    if !(x0 > 0.0) {
        return Err(LdpError::Validation(format!(
            "positivity floor needs x0 > 0, got {x0}"
        )));
    }
    let rho = model.holder_modulus().ok_or(LdpError::MissingModulus)?;
    if !rho.diverges_at_zero() {
        return Err(LdpError::ModulusIntegralConvergent);
    }
    let drift = |x: f64| -> LdpResult<f64> {
        model.scalar_drift_at(x).ok_or_else(|| {
            LdpError::Validation(format!(
                "{} has no pointwise scalar drift; positivity applies to scalar models",
                model.name()
            ))
        })
    };
    if drift(0.0)? <= 0.0 {
        return Err(LdpError::DriftFloorViolation(format!(
            "b(0) = {} must be positive",
            drift(0.0)?
        )));
    }

    match bracket.x_bar {
        Some(x_bar) => {
            if !(x_bar > 0.0 && x_bar < x0) {
                return Err(LdpError::Validation(format!(
                    "x_bar = {x_bar} must lie in (0, x0 = {x0})"
                )));
            }
            let beta = interval_min(&drift, 0.0, x_bar, 10_000)?;
            if beta <= 0.0 {
                return Err(LdpError::DriftFloorViolation(format!(
                    "drift floor on [0, {x_bar}] is {beta}, not positive"
                )));
            }
            let xi = bisect_floor(rho, x_bar, beta, n_cap).ok_or_else(|| {
                LdpError::Validation(format!(
                    "positivity floor underflows: drift floor {beta} on [0, {x_bar}] \
                     is too small for cap N = {n_cap}"
                ))
            })?;
            Ok(PositivityCertificate {
                x_bar,
                beta,
                xi,
                n_cap,
            })
        }
        None => {
            // Scan brackets below x0 and keep the one giving the highest
            // floor; a bigger x_bar shrinks beta, so neither extreme wins.
            let mut found_floor = false;
            let mut best: Option<PositivityCertificate> = None;
            for j in 1..64 {
                let x_bar = x0 * j as f64 / 64.0;
                let beta = interval_min(&drift, 0.0, x_bar, 512)?;
                if beta <= 0.0 {
                    break;
                }
                found_floor = true;
                if let Some(xi) = bisect_floor(rho, x_bar, beta, n_cap) {
                    if best.as_ref().map(|b| xi > b.xi).unwrap_or(true) {
                        best = Some(PositivityCertificate {
                            x_bar,
                            beta,
                            xi,
                            n_cap,
                        });
                    }
                }
            }
            match best {
                Some(cert) => Ok(cert),
                None if found_floor => Err(LdpError::Validation(format!(
                    "no usable positivity bracket below x0 = {x0}: every drift floor \
                     is too small for cap N = {n_cap}"
                ))),
                None => Err(LdpError::DriftFloorViolation(
                    "no x_bar < x0 with a positive drift floor".into(),
                )),
            }
        }
    }
}

/// Bisects `beta * int_xi^x_bar rho^-2 = 2 N^2` for `xi`. `None` when the
/// left bracket underflows before the integral reaches the target, which for
/// an admissible modulus can only happen when `beta` is uselessly small.
fn bisect_floor(rho: &crate::models::HolderModulus, x_bar: f64, beta: f64, n_cap: f64) -> Option<f64> {
    let target = 2.0 * n_cap * n_cap;
    let h = |xi: f64| beta * rho.integral_inv_sq(xi, x_bar) - target;
    let mut lo = x_bar / 2.0;
    while h(lo) <= 0.0 {
        lo /= 2.0;
        if lo < f64::MIN_POSITIVE {
            return None;
        }
    }
    let mut hi = x_bar;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn interval_min(
    drift: &impl Fn(f64) -> LdpResult<f64>,
    lo: f64,
    hi: f64,
    points: usize,
) -> LdpResult<f64> {
    let mut min = f64::INFINITY;
    for j in 0..=points {
        let x = lo + (hi - lo) * j as f64 / points as f64;
        min = min.min(drift(x)?);
    }
    Ok(min)
}

#[derive(Debug, Clone)]
pub struct PositivityMcReport {
    pub trials: u64,
    pub min_over_paths: f64,
    pub violations: u64,
    pub floor: f64,
}

impl PositivityMcReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Solves skeletons for random controls in `S_N` and counts floor violations.
pub fn positivity_monte_carlo(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    certificate: &PositivityCertificate,
    trials: u64,
    seed: u64,
) -> LdpResult<PositivityMcReport> {
    let mins = crate::parallel::map_samples(trials, |i| {
        let control = random_control_in_ball(grid, model.noise_dim(), certificate.n_cap, seed, i);
        solve_skeleton(model, init, &control)
            .map(|sol| {
                (0..sol.path.n_nodes())
                    .map(|k| sol.path.value(k)[0])
                    .fold(f64::INFINITY, f64::min)
            })
            .unwrap_or(f64::NEG_INFINITY)
    });
    let min_over_paths = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = mins.iter().filter(|m| **m < certificate.xi).count() as u64;
    Ok(PositivityMcReport {
        trials,
        min_over_paths,
        violations,
        floor: certificate.xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AffineXY, Model, Poly};
    use crate::paths::Segment;

    #[test]
    fn ou_skeleton_tracks_exponential_decay() {
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let control = Control::zero(grid.clone(), 1);
        let sol = solve_skeleton(&model, &InitialData::point(vec![1.0]), &control).unwrap();
        let dt = grid.dt();
        let mut worst = 0.0f64;
        for k in 0..=1000 {
            let exact = (-grid.node(k)).exp();
            worst = worst.max((sol.path.value(k)[0] - exact).abs());
        }
        assert!(worst <= 2.0 * dt, "worst error {worst} vs 2 dt {}", 2.0 * dt);
    }

    #[test]
    fn constant_control_integrates_exactly() {
        // b = 0, sigma = 1, f = c: phi_t = x0 + c t on the grid.
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let control = Control::constant(grid.clone(), &[1.5]);
        let sol = solve_skeleton(&model, &InitialData::point(vec![0.25]), &control).unwrap();
        for k in 0..=64 {
            assert!((sol.path.value(k)[0] - (0.25 + 1.5 * grid.node(k))).abs() < 1e-12);
        }
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn delay_skeleton_first_interval_by_hand() {
        // b(t, x, y) = y, sigma = 0, tau = 1, psi = 1: phi_t = 1 + t on [0,1].
        let model = Model::delay_linear(
            AffineXY::new(0.0, 1.0, 0.0),
            AffineXY::new(0.0, 0.0, 0.0),
            1.0,
            1.0,
        )
        .unwrap();
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let seg = Segment::constant(1.0, &[1.0], &grid).unwrap();
        let control = Control::zero(grid.clone(), 1);
        let sol = solve_skeleton(&model, &InitialData::Segment(seg), &control).unwrap();
        let dt = grid.dt();
        for k in 0..=100 {
            let t = grid.node(k);
            assert!(
                (sol.path.value(k)[0] - (1.0 + t)).abs() <= 2.0 * dt,
                "t = {t}"
            );
        }
    }

    #[test]
    fn growth_bound_matches_hand_values() {
        // |x| = 1, M = 1, t = 1, |f|^2 = 1 -> 15 e^12.
        let v = growth_bound(&[1.0], 1.0, 1.0, 1.0);
        assert!((v - 15.0 * (12.0f64).exp()).abs() < 1e-6 * v);
        // M = 0 freezes the path.
        assert_eq!(growth_bound(&[2.0], 0.0, 5.0, 3.0), 12.0);
        // monotone in t
        assert!(growth_bound(&[1.0], 1.0, 0.5, 1.0) < growth_bound(&[1.0], 1.0, 1.0, 1.0));
    }

    #[test]
    fn computed_skeletons_respect_growth_bound() {
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        for i in 0..50 {
            let control = random_control_in_ball(&grid, 1, 2.0, 17, i);
            let init = InitialData::point(vec![0.5]);
            let sol = solve_skeleton(&model, &init, &control).unwrap();
            assert!(growth_margin(&model, &init, &sol) >= 0.0);
        }
    }

    #[test]
    fn weak_probe_zero_amplitude_gives_zero_deviation() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let control = Control::zero(grid, 1);
        let report = weak_l2_continuity_probe(
            &model,
            &InitialData::point(vec![0.0]),
            &control,
            0.0,
            &[1, 4, 16],
            Some(1.0),
            0.02,
        )
        .unwrap();
        for (_, e) in &report.deviations {
            assert_eq!(*e, 0.0);
        }
    }

    #[test]
    fn weak_probe_cap_violation_detected() {
        let model = Model::schilder(1);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let control = Control::zero(grid, 1);
        let err = weak_l2_continuity_probe(
            &model,
            &InitialData::point(vec![0.0]),
            &control,
            5.0,
            &[1],
            Some(1.0),
            0.02,
        )
        .unwrap_err();
        assert!(matches!(err, LdpError::CapExceeded { .. }));
    }

    #[test]
    fn positivity_floor_worked_example() {
        // b(x) = 1 - x, rho(u) = sqrt(u), x_bar = 0.5, N = 1:
        // xi solves 0.5 ln(0.5/xi) = 2, i.e. xi = 0.5 e^-4.
        let model = Model::cir(1.0, 1.0, 1.0).unwrap();
        let cert =
            positivity_floor(&model, 1.0, 1.0, &PositivityBracket::fixed(0.5)).unwrap();
        assert!((cert.beta - 0.5).abs() < 1e-9);
        assert!((cert.xi - 0.5 * (-4.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn positivity_floor_approaches_x_bar_for_tiny_caps() {
        let model = Model::cir(1.0, 1.0, 1.0).unwrap();
        let cert =
            positivity_floor(&model, 1.0, 1e-4, &PositivityBracket::fixed(0.5)).unwrap();
        assert!(cert.xi > 0.499, "xi = {}", cert.xi);
    }

    #[test]
    fn positivity_floor_rejects_zero_drift_at_origin() {
        let model = Model::cir(1.0, 0.0, 1.0).unwrap();
        let err = positivity_floor(&model, 1.0, 1.0, &PositivityBracket::default()).unwrap_err();
        assert!(matches!(err, LdpError::DriftFloorViolation(_)));
    }

    #[test]
    fn positivity_floor_rejects_convergent_modulus() {
        let model = Model::fw_poly(Poly(vec![1.0, -1.0]), Poly(vec![1.0]))
            .unwrap()
            .with_holder_modulus(crate::models::HolderModulus::Power {
                coef: 1.0,
                exponent: 0.25,
            });
        let err = positivity_floor(&model, 1.0, 1.0, &PositivityBracket::fixed(0.5)).unwrap_err();
        assert!(matches!(err, LdpError::ModulusIntegralConvergent));
    }
}
