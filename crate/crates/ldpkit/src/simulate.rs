//! Euler-Maruyama integration of the prelimit and controlled equations.
//!
//! One step of the scheme on a uniform grid reads
//!
//! ```text
//! X_{k+1} = X_k + b(t_k, X) dt + sigma(t_k, X) f_k dt + sqrt(eps) sigma(t_k, X) dW_k
//! ```
//!
//! with the control term present exactly when a control is supplied and the
//! noise term skipped structurally at `eps = 0`, so the deterministic
//! skeleton is the same code path as the simulator.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;
use crate::models::{Model, PathSlice};
use crate::paths::{BrownianPath, Control, InitialData, StatePath};
use crate::rng::{domain, stream};

/// Brownian path for Monte Carlo sample `sample_index` of the stream `seed`.
///
/// Deterministic in `(grid, m, seed, sample_index)` and independent of thread
/// count; distinct seeds or sample indices give independent draws.
pub fn sample_brownian_indexed(
    grid: &TimeGrid,
    m: usize,
    seed: u64,
    sample_index: u64,
) -> BrownianPath {
    let mut rng = stream(seed, sample_index, domain::NOISE);
    let n = grid.n_steps();
    let sqrt_dt = grid.dt().sqrt();
    let mut increments = vec![0.0; n * m];
    for v in increments.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sqrt_dt * z;
    }
    BrownianPath::from_increments(grid.clone(), m, increments)
        .expect("increment count matches grid by construction")
}

/// Single seeded Brownian path (sample index 0).
pub fn sample_brownian(grid: &TimeGrid, m: usize, seed: u64) -> BrownianPath {
    sample_brownian_indexed(grid, m, seed, 0)
}

/// Refines a Brownian path onto the doubled grid by conditional (bridge)
/// midpoints: each increment `dW` over `dt` splits into `dW/2 + xi` and
/// `dW/2 - xi` with `xi ~ N(0, dt/4)`.
pub fn refine_brownian(path: &BrownianPath, seed: u64) -> LdpResult<BrownianPath> {
    let n = path.grid.n_steps();
    let m = path.m;
    let fine = TimeGrid::new(path.grid.horizon(), 2 * n)?;
    let mut rng = stream(seed, 0, domain::BRIDGE);
    let half_sd = (path.grid.dt() / 4.0).sqrt();
    let mut increments = vec![0.0; 2 * n * m];
    for k in 0..n {
        let coarse = path.increment(k);
        for j in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            let xi = half_sd * z;
            increments[(2 * k) * m + j] = coarse[j] / 2.0 + xi;
            increments[(2 * k + 1) * m + j] = coarse[j] / 2.0 - xi;
        }
    }
    BrownianPath::from_increments(fine, m, increments)
}

/// Strong pathwise solution of the (controlled) equation by explicit Euler.
///
/// `eps = 0` with a control is the deterministic skeleton recursion; `eps = 0`
/// without one is the plain limit flow. An absent control is materialized as
/// the zero control, so `control = None` and an explicit zero control take the
/// identical floating-point path.
pub fn euler_maruyama(
    model: &Model,
    eps: f64,
    init: &InitialData,
    control: Option<&Control>,
    noise: &BrownianPath,
) -> LdpResult<StatePath> {
    if let Some(c) = control {
        if c.m != model.noise_dim() {
            return Err(LdpError::DimensionMismatch(format!(
                "control dimension {} vs noise dimension {}",
                c.m,
                model.noise_dim()
            )));
        }
        if c.grid != noise.grid {
            return Err(LdpError::Validation(
                "control grid differs from integration grid".into(),
            ));
        }
    }
    integrate(
        model,
        eps,
        init,
        control.map(|c| c.values()),
        Some(noise),
        &noise.grid,
    )
}

/// Core stepping loop shared by the simulator and the skeleton solver.
/// `control_values` is the flattened `n x m` control table.
pub(crate) fn integrate(
    model: &Model,
    eps: f64,
    init: &InitialData,
    control_values: Option<&[f64]>,
    noise: Option<&BrownianPath>,
    grid: &TimeGrid,
) -> LdpResult<StatePath> {
    if !(eps >= 0.0) {
        return Err(LdpError::Validation(format!(
            "noise level must be >= 0, got {eps}"
        )));
    }
    let d = model.state_dim();
    let m = model.noise_dim();
    let x0 = init.initial_state();
    if x0.len() != d {
        return Err(LdpError::DimensionMismatch(format!(
            "initial state has {} coordinates, model has d = {d}",
            x0.len()
        )));
    }
    if let Some(cv) = control_values {
        if cv.len() != grid.n_steps() * m {
            return Err(LdpError::DimensionMismatch(format!(
                "control table has {} entries, grid needs {}",
                cv.len(),
                grid.n_steps() * m
            )));
        }
    }
    if eps > 0.0 {
        let w = noise.ok_or_else(|| {
            LdpError::Validation("eps > 0 requires a Brownian path".into())
        })?;
        if w.m != m {
            return Err(LdpError::DimensionMismatch(format!(
                "noise dimension {} vs model noise dimension {m}",
                w.m
            )));
        }
        if w.grid != *grid {
            return Err(LdpError::Validation(
                "noise grid differs from integration grid".into(),
            ));
        }
    }
    let lag = model.lag_steps_for(grid, init)?;

    let n = grid.n_steps();
    let dt = grid.dt();
    let sqrt_eps = eps.sqrt();
    let mut values = vec![0.0; (n + 1) * d];
    values[..d].copy_from_slice(x0);

    let zero_step = vec![0.0; m];
    let mut drift = vec![0.0; d];
    let mut disp = vec![0.0; d * m];
    let segment = init.segment();

    for k in 0..n {
        let t = grid.node(k);
        {
            let slice = PathSlice::new(d, &values[..(k + 1) * d], segment, lag);
            model.drift_into(t, &slice, k, &mut drift);
            model.dispersion_into(t, &slice, k, &mut disp);
        }
        let f_k: &[f64] = match control_values {
            Some(cv) => &cv[k * m..(k + 1) * m],
            None => &zero_step,
        };
        let dw = if eps > 0.0 {
            Some(noise.unwrap().increment(k))
        } else {
            None
        };
        let mut finite = true;
        for i in 0..d {
            let mut u = 0.0;
            for j in 0..m {
                u += disp[i * m + j] * f_k[j];
            }
            let mut x = values[k * d + i] + (drift[i] + u) * dt;
            if let Some(dw) = dw {
                let mut s = 0.0;
                for j in 0..m {
                    s += disp[i * m + j] * dw[j];
                }
                x += sqrt_eps * s;
            }
            values[(k + 1) * d + i] = x;
            finite &= x.is_finite();
        }
        if !finite {
            return Err(LdpError::DivergedPath { step: k + 1 });
        }
    }

    StatePath::new(grid.clone(), d, eps, values, segment.cloned())
}

/// Burkholder-Davis-Gundy constant used in the moment bound; any valid upper
/// constant works since the check is one-sided.
pub fn bdg_constant(p: f64) -> f64 {
    (p / (p - 1.0)).powf(p * p / 2.0)
}

/// Gronwall prefactor `K_p(t, N, M)` of the a-priori moment estimate.
pub fn moment_bound_k(p: f64, t: f64, n_cap: f64, growth_m: f64) -> f64 {
    let base = 4.0f64.powf(p - 1.0);
    let other = 2.0f64.powf(3.0 * p - 3.0)
        * growth_m.powf(p)
        * t.powf((p - 2.0) / 2.0)
        * t.max(1.0)
        * (t.powf(p / 2.0) + bdg_constant(p) + n_cap.powf(p / 2.0));
    base.max(other)
}

/// `C_p(T, N, M) = K_p e^{K_p T}`, non-decreasing in each argument, bounding
/// `E[sup_t |X^{eps,v}_t|^p] / (1 + |x|^p)` for `eps <= 1` and `|v|^2 <= N`.
pub fn moment_bound_constant(p: f64, t: f64, n_cap: f64, growth_m: f64) -> f64 {
    let k = moment_bound_k(p, t, n_cap, growth_m);
    k * (k * t).exp()
}

#[derive(Debug, Clone)]
pub struct MomentBoundReport {
    pub p: f64,
    pub eps: f64,
    pub n_cap: f64,
    pub n_samples: u64,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `bound - (mean + 3 SE)`; nonnegative means the check holds.
    pub margin: f64,
    pub n_diverged: u64,
}

impl MomentBoundReport {
    pub fn passed(&self) -> bool {
        self.margin >= 0.0
    }
}

/// Monte Carlo check of `E[sup_t |X^{eps,v}|^p] <= C_p(T, N, M)(1 + |x|^p)`
/// over random admissible controls with `|v|^2 <= N`.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound_check(
    model: &Model,
    eps: f64,
    init: &InitialData,
    grid: &TimeGrid,
    n_cap: f64,
    p: f64,
    n_samples: u64,
    seed: u64,
) -> LdpResult<MomentBoundReport> {
    if eps > 1.0 {
        return Err(LdpError::Validation(format!(
            "moment bound holds for eps <= 1, got {eps}"
        )));
    }
    if p < 2.0 {
        return Err(LdpError::Validation(format!("p must be >= 2, got {p}")));
    }
    let values = crate::parallel::map_samples(n_samples, |i| {
        let control = random_control_in_ball(grid, model.noise_dim(), n_cap, seed, i);
        let noise = sample_brownian_indexed(grid, model.noise_dim(), seed, i);
        match euler_maruyama(model, eps, init, Some(&control), &noise) {
            Ok(path) => Some(path.sup_norm().powf(p)),
            Err(LdpError::DivergedPath { .. }) => None,
            Err(_) => None,
        }
    });
    let n_diverged = values.iter().filter(|v| v.is_none()).count() as u64;
    check_divergence(n_diverged, n_samples)?;
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let (mean, se) = mean_and_se(&kept);
    let x0 = init.initial_state();
    let bound = moment_bound_constant(p, grid.horizon(), n_cap, model.growth_constant())
        * (1.0 + crate::paths::norm(x0).powf(p));
    Ok(MomentBoundReport {
        p,
        eps,
        n_cap,
        n_samples,
        empirical_mean: mean,
        std_error: se,
        bound,
        margin: bound - (mean + 3.0 * se),
        n_diverged,
    })
}

/// Random control in the ball `S_N`: Gaussian steps scaled to a squared norm
/// uniform in `(0, N]`, half of the draws pushed to the boundary.
pub fn random_control_in_ball(
    grid: &TimeGrid,
    m: usize,
    n_cap: f64,
    seed: u64,
    sample: u64,
) -> Control {
    let mut rng = stream(seed, sample, domain::CONTROL);
    let n = grid.n_steps();
    let mut values = vec![0.0; n * m];
    for v in values.iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    let mut control = Control::new(grid.clone(), m, values).expect("sized by construction");
    let norm_sq = control.norm_sq();
    if norm_sq > 0.0 && n_cap > 0.0 {
        let boundary: bool = rng.gen_bool(0.5);
        let target = if boundary {
            n_cap
        } else {
            n_cap * rng.gen_range(0.0..1.0f64)
        };
        let scale = (target / norm_sq).sqrt();
        for v in control.values_mut() {
            *v *= scale;
        }
    } else if n_cap == 0.0 {
        for v in control.values_mut() {
            *v = 0.0;
        }
    }
    control
}

#[derive(Debug, Clone)]
pub struct TightnessPair {
    pub s: f64,
    pub t: f64,
    pub fourth_moment: f64,
}

#[derive(Debug, Clone)]
pub struct TightnessReport {
    /// Least-squares fit of `E|X_t - X_s|^4 = beta |t - s|^2` through the
    /// origin over the sampled pairs.
    pub beta: f64,
    pub pairs: Vec<TightnessPair>,
    pub n_samples: u64,
}

impl TightnessReport {
    pub fn passed(&self) -> bool {
        self.beta.is_finite()
    }
}

/// Kolmogorov-criterion modulus: estimates `E|X_t - X_s|^4` over sampled node
/// pairs for controlled paths with `|v|^2 <= N` and fits the quadratic
/// modulus constant.
#[allow(clippy::too_many_arguments)]
pub fn tightness_modulus(
    model: &Model,
    eps: f64,
    init: &InitialData,
    grid: &TimeGrid,
    n_cap: f64,
    n_samples: u64,
    n_pairs: usize,
    seed: u64,
) -> LdpResult<TightnessReport> {
    let n = grid.n_steps();
    if n < 2 {
        return Err(LdpError::InvalidGrid("tightness probe needs n >= 2".into()));
    }
    let mut pair_rng = stream(seed, u64::MAX, domain::PROBE);
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let a = pair_rng.gen_range(0..n);
        let b = pair_rng.gen_range(0..n);
        let (lo, hi) = if a <= b { (a, b + 1) } else { (b, a + 1) };
        pairs.push((lo, hi));
    }

    let d = model.state_dim();
    let sums = crate::parallel::map_samples(n_samples, |i| {
        let control = random_control_in_ball(grid, model.noise_dim(), n_cap, seed, i);
        let noise = sample_brownian_indexed(grid, model.noise_dim(), seed, i);
        let path = euler_maruyama(model, eps, init, Some(&control), &noise).ok()?;
        let mut row = Vec::with_capacity(pairs.len());
        for &(a, b) in &pairs {
            let mut ssq = 0.0;
            for i in 0..d {
                let e = path.value(b)[i] - path.value(a)[i];
                ssq += e * e;
            }
            row.push(ssq * ssq);
        }
        Some(row)
    });
    let n_diverged = sums.iter().filter(|v| v.is_none()).count() as u64;
    check_divergence(n_diverged, n_samples)?;
    let kept: Vec<Vec<f64>> = sums.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(LdpError::AllDiverged);
    }
    let n_ok = kept.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut out_pairs = Vec::with_capacity(pairs.len());
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let m4 = kept.iter().map(|row| row[j]).sum::<f64>() / n_ok;
        let gap = (grid.node(b) - grid.node(a)).powi(2);
        num += m4 * gap;
        den += gap * gap;
        out_pairs.push(TightnessPair {
            s: grid.node(a),
            t: grid.node(b),
            fourth_moment: m4,
        });
    }
    Ok(TightnessReport {
        beta: num / den,
        pairs: out_pairs,
        n_samples,
    })
}

/// Fails when more than 0.1% of samples diverge.
pub(crate) fn check_divergence(diverged: u64, total: u64) -> LdpResult<()> {
    if diverged == total && total > 0 {
        return Err(LdpError::AllDiverged);
    }
    let limit = total / 1000;
    if diverged > limit {
        return Err(LdpError::TooManyDiverged {
            diverged,
            total,
            limit,
        });
    }
    Ok(())
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
