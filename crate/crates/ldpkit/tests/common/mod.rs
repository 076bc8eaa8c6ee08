//! Shared oracles for the integration suites.

/// Standard normal upper tail, accurate to ~1e-10 relative deep into the
/// tail; the Gaussian oracle behind the Schilder comparisons.
pub fn phibar(x: f64) -> f64 {
    statrs::function::erf::erfc(x / std::f64::consts::SQRT_2) / 2.0
}

/// Minimal discrete control energy steering `x_{k+1} = (1 - a dt) x_k + dt f_k`
/// from 0 to `z` in `n` steps: the closed-form solution of the two-point
/// boundary problem, independent of any optimizer.
pub fn ou_min_energy_discrete(a: f64, horizon: f64, n: usize, z: f64) -> f64 {
    let dt = horizon / n as f64;
    let r = 1.0 - a * dt;
    let s: f64 = (0..n).map(|j| r.powi(2 * j as i32)).sum();
    0.5 * z * z / (dt * s)
}
