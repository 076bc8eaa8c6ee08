//! Predictable path-dependent drift/dispersion coefficients.
//!
//! A [`Model`] evaluates `b(t, phi)` and `sigma(t, phi)` where `phi` is the
//! grid-sampled prefix of a trajectory. Coefficients may only read nodes at or
//! before the evaluation time; [`check_predictability`] probes that contract
//! by perturbing the strict future and demanding bit-identical outputs.
//!
//! Built-in families:
//! - `schilder`: `b = 0`, `sigma = I` (d = m);
//! - `ornstein_uhlenbeck`: `b(x) = -rate * x`, `sigma = I`;
//! - `fw_poly`: scalar diffusion with polynomial `b(x)`, `sigma(x)`;
//! - `delay_linear`: scalar lagged dynamics `b(x, y) = a_x x + a_y y + a_0`
//!   with `y` the state one delay `tau` in the past (read from the initial
//!   segment before time `tau`);
//! - `cir`: `b(x) = kappa (mu - x)`, `sigma(x) = vol * sqrt(x v 0)` with the
//!   full-truncation clamp so Euler iterates never take the root of a
//!   negative number.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LdpError, LdpResult};
use crate::grid::TimeGrid;
use crate::paths::{norm, InitialData, Segment, StatePath};
use crate::rng::{domain, stream};

/// View of the known part of a trajectory during coefficient evaluation.
///
/// `values` holds at least the nodes `0..=k` when evaluating at step `k`; a
/// completed path exposes all nodes, which is what lets the predictability
/// probe catch coefficients that peek past the evaluation time.
#[derive(Clone, Copy)]
pub struct PathSlice<'a> {
    pub d: usize,
    values: &'a [f64],
    pub segment: Option<&'a Segment>,
    /// Lag in grid steps for delay models (0 otherwise).
    pub lag_steps: usize,
}

impl<'a> PathSlice<'a> {
    pub fn new(
        d: usize,
        values: &'a [f64],
        segment: Option<&'a Segment>,
        lag_steps: usize,
    ) -> Self {
        PathSlice {
            d,
            values,
            segment,
            lag_steps,
        }
    }

    pub fn from_path(path: &'a StatePath, lag_steps: usize) -> Self {
        PathSlice {
            d: path.d,
            values: path.values(),
            segment: path.segment.as_ref(),
            lag_steps,
        }
    }

    /// Number of nodes currently known.
    pub fn n_known(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    /// State one delay in the past of node `k`: path node `k - lag` once the
    /// lag has elapsed, segment node `k` before that.
    pub fn lagged(&self, k: usize) -> &[f64] {
        if k >= self.lag_steps {
            self.value(k - self.lag_steps)
        } else {
            self.segment
                .expect("delay evaluation without segment")
                .value(k)
        }
    }

    /// `sup_{j <= k} |phi_j|`.
    pub fn running_sup(&self, k: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for j in 0..=k {
            sup = sup.max(norm(self.value(j)));
        }
        sup
    }
}

/// Polynomial in one variable, coefficients ordered low degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, c) in self.0.iter().enumerate().skip(1).rev() {
            acc = acc * x + i as f64 * c;
        }
        acc
    }

    pub fn degree(&self) -> usize {
        self.0
            .iter()
            .rposition(|c| *c != 0.0)
            .unwrap_or(0)
    }
}

/// Affine map of (current state, lagged state) for the scalar delay family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineXY {
    pub on_x: f64,
    pub on_y: f64,
    pub offset: f64,
}

impl AffineXY {
    pub fn new(on_x: f64, on_y: f64, offset: f64) -> Self {
        AffineXY { on_x, on_y, offset }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.on_x * x + self.on_y * y + self.offset
    }
}

/// Increasing modulus `rho` controlling the dispersion's Hoelder continuity,
/// with a closed-form antiderivative of `rho^-2` for the positivity floor.
#[derive(Debug, Clone, PartialEq)]
pub enum HolderModulus {
    /// `rho(u) = coef * u^exponent`.
    Power { coef: f64, exponent: f64 },
}

impl HolderModulus {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            HolderModulus::Power { coef, exponent } => coef * u.powf(*exponent),
        }
    }

    /// `int_lo^hi rho(r)^-2 dr` for `0 < lo <= hi`.
    pub fn integral_inv_sq(&self, lo: f64, hi: f64) -> f64 {
        match self {
            HolderModulus::Power { coef, exponent } => {
                let g = 2.0 * exponent;
                let scale = 1.0 / (coef * coef);
                if (g - 1.0).abs() < 1e-12 {
                    scale * (hi / lo).ln()
                } else {
                    scale * (hi.powf(1.0 - g) - lo.powf(1.0 - g)) / (1.0 - g)
                }
            }
        }
    }

    /// Whether `int_{0+} rho^-2 = infinity`, as required of an admissible
    /// modulus.
    pub fn diverges_at_zero(&self) -> bool {
        match self {
            HolderModulus::Power { exponent, .. } => 2.0 * exponent >= 1.0,
        }
    }
}

/// Local Lipschitz profile `R -> L_R` (metadata; not used by the integrators).
#[derive(Debug, Clone, PartialEq)]
pub enum LipschitzProfile {
    Constant(f64),
}

impl LipschitzProfile {
    pub fn bound(&self, _radius: f64) -> f64 {
        match self {
            LipschitzProfile::Constant(l) => *l,
        }
    }
}

type CoeffFn = Arc<dyn Fn(f64, &PathSlice, usize, &mut [f64]) + Send + Sync>;
type JacFn = Arc<dyn Fn(f64, &PathSlice, usize, &[f64], &mut Vec<NodeJacobian>) + Send + Sync>;

/// `d x d` Jacobian of the effective drift `b + sigma f` with respect to the
/// path value at `node`.
#[derive(Debug, Clone)]
pub struct NodeJacobian {
    pub node: usize,
    /// Row-major `d x d`.
    pub mat: Vec<f64>,
}

#[derive(Clone)]
enum Coeffs {
    Schilder,
    OrnsteinUhlenbeck {
        rate: f64,
    },
    FwPoly {
        drift: Poly,
        dispersion: Poly,
    },
    DelayLinear {
        drift: AffineXY,
        dispersion: AffineXY,
    },
    Cir {
        kappa: f64,
        mu: f64,
        vol: f64,
    },
    Custom {
        drift: CoeffFn,
        dispersion: CoeffFn,
        jacobian: Option<JacFn>,
    },
}

impl fmt::Debug for Coeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeffs::Schilder => write!(f, "Schilder"),
            Coeffs::OrnsteinUhlenbeck { rate } => write!(f, "OrnsteinUhlenbeck({rate})"),
            Coeffs::FwPoly { drift, dispersion } => {
                write!(f, "FwPoly({:?}, {:?})", drift.0, dispersion.0)
            }
            Coeffs::DelayLinear { drift, dispersion } => {
                write!(f, "DelayLinear({drift:?}, {dispersion:?})")
            }
            Coeffs::Cir { kappa, mu, vol } => write!(f, "Cir({kappa}, {mu}, {vol})"),
            Coeffs::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// A predictable coefficient pair `(b, sigma)` with its growth metadata.
#[derive(Debug, Clone)]
pub struct Model {
    name: String,
    d: usize,
    m: usize,
    coeffs: Coeffs,
    growth_constant: f64,
    /// Fixed delay `tau`; `Some` marks a delay model needing a segment.
    delay: Option<f64>,
    /// Sup bound on admissible initial segments, absorbed into the growth
    /// constant of delay models.
    segment_sup: Option<f64>,
    holder: Option<HolderModulus>,
    lipschitz: Option<LipschitzProfile>,
}

impl Model {
    /// `b = 0`, `sigma = I_d` driven by d-dimensional noise.
    pub fn schilder(d: usize) -> Model {
        Model {
            name: "schilder".into(),
            d,
            m: d,
            coeffs: Coeffs::Schilder,
            growth_constant: (d as f64).sqrt(),
            delay: None,
            segment_sup: None,
            holder: None,
            lipschitz: Some(LipschitzProfile::Constant(0.0)),
        }
    }

    /// `b(x) = -rate * x`, `sigma = I_d`.
    pub fn ornstein_uhlenbeck(d: usize, rate: f64) -> Model {
        Model {
            name: "ornstein_uhlenbeck".into(),
            d,
            m: d,
            coeffs: Coeffs::OrnsteinUhlenbeck { rate },
            growth_constant: rate.abs().max((d as f64).sqrt()),
            delay: None,
            segment_sup: None,
            holder: None,
            lipschitz: Some(LipschitzProfile::Constant(rate.abs())),
        }
    }

    /// Scalar diffusion with polynomial coefficients. The growth constant is
    /// derived for affine polynomials; higher degrees must supply one via
    /// [`Model::with_growth_constant`] (the sampled growth check will flag a
    /// bad choice).
    pub fn fw_poly(drift: Poly, dispersion: Poly) -> LdpResult<Model> {
        let affine_m = |p: &Poly| -> Option<f64> {
            if p.degree() <= 1 {
                let c0 = p.0.first().copied().unwrap_or(0.0);
                let c1 = p.0.get(1).copied().unwrap_or(0.0);
                Some(c0.abs().max(c1.abs()))
            } else {
                None
            }
        };
        let growth = match (affine_m(&drift), affine_m(&dispersion)) {
            (Some(a), Some(b)) => a.max(b),
            _ => {
                return Err(LdpError::Validation(
                    "fw_poly with degree > 1 needs an explicit growth constant; \
                     build with with_growth_constant"
                        .into(),
                ))
            }
        };
        let lip = drift
            .0
            .get(1)
            .copied()
            .unwrap_or(0.0)
            .abs()
            .max(dispersion.0.get(1).copied().unwrap_or(0.0).abs());
        Ok(Model {
            name: "fw_poly".into(),
            d: 1,
            m: 1,
            coeffs: Coeffs::FwPoly { drift, dispersion },
            growth_constant: growth,
            delay: None,
            segment_sup: None,
            holder: None,
            lipschitz: Some(LipschitzProfile::Constant(lip)),
        })
    }

    /// Scalar delay dynamics `dX = b(X_t, X_{t-tau}) dt + sigma(...) dW`.
    /// `segment_sup` bounds `sup |psi|` and enters the growth constant.
    pub fn delay_linear(
        drift: AffineXY,
        dispersion: AffineXY,
        tau: f64,
        segment_sup: f64,
    ) -> LdpResult<Model> {
        if !(tau > 0.0) {
            return Err(LdpError::Validation(format!(
                "delay tau must be positive, got {tau}"
            )));
        }
        let part = |a: &AffineXY| -> f64 {
            (a.on_x.abs() + a.on_y.abs()).max(a.on_y.abs() * segment_sup + a.offset.abs())
        };
        let growth = part(&drift).max(part(&dispersion));
        let lip = |a: &AffineXY| a.on_x.abs() + a.on_y.abs();
        Ok(Model {
            name: "delay_linear".into(),
            d: 1,
            m: 1,
            coeffs: Coeffs::DelayLinear { drift, dispersion },
            growth_constant: growth,
            delay: Some(tau),
            segment_sup: Some(segment_sup),
            holder: None,
            lipschitz: Some(LipschitzProfile::Constant(lip(&drift).max(lip(&dispersion)))),
        })
    }

    /// `b(x) = kappa (mu - x)`, `sigma(x) = vol * sqrt(x v 0)`.
    pub fn cir(kappa: f64, mu: f64, vol: f64) -> LdpResult<Model> {
        if kappa < 0.0 || mu < 0.0 || !(vol > 0.0) {
            return Err(LdpError::Validation(format!(
                "cir requires kappa, mu >= 0 and vol > 0, got ({kappa}, {mu}, {vol})"
            )));
        }
        Ok(Model {
            name: "cir".into(),
            d: 1,
            m: 1,
            coeffs: Coeffs::Cir { kappa, mu, vol },
            growth_constant: (kappa * mu).max(kappa).max(vol / 2.0).max(1e-12),
            delay: None,
            segment_sup: None,
            holder: Some(HolderModulus::Power {
                coef: vol,
                exponent: 0.5,
            }),
            lipschitz: None,
        })
    }

    /// Closure-backed model, mainly for tests and exotic coefficients.
    pub fn custom(
        name: impl Into<String>,
        d: usize,
        m: usize,
        growth_constant: f64,
        drift: CoeffFn,
        dispersion: CoeffFn,
    ) -> Model {
        Model {
            name: name.into(),
            d,
            m,
            coeffs: Coeffs::Custom {
                drift,
                dispersion,
                jacobian: None,
            },
            growth_constant,
            delay: None,
            segment_sup: None,
            holder: None,
            lipschitz: None,
        }
    }

    pub fn with_growth_constant(mut self, m: f64) -> Model {
        self.growth_constant = m;
        self
    }

    pub fn with_delay(mut self, tau: f64) -> Model {
        self.delay = Some(tau);
        self
    }

    pub fn with_holder_modulus(mut self, rho: HolderModulus) -> Model {
        self.holder = Some(rho);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn delay(&self) -> Option<f64> {
        self.delay
    }

    pub fn segment_sup(&self) -> Option<f64> {
        self.segment_sup
    }

    pub fn is_delay(&self) -> bool {
        self.delay.is_some()
    }

    pub fn holder_modulus(&self) -> Option<&HolderModulus> {
        self.holder.as_ref()
    }

    pub fn lipschitz_bound(&self, radius: f64) -> Option<f64> {
        self.lipschitz.as_ref().map(|l| l.bound(radius))
    }

    /// Drift value at the pointwise coordinates, for families whose drift is
    /// a function of the current scalar state alone. Used by the positivity
    /// certificate, which needs `b` on a spatial interval rather than along a
    /// path.
    pub(crate) fn scalar_drift_at(&self, x: f64) -> Option<f64> {
        match &self.coeffs {
            Coeffs::OrnsteinUhlenbeck { rate } => Some(-rate * x),
            Coeffs::FwPoly { drift, .. } => Some(drift.eval(x)),
            Coeffs::Cir { kappa, mu, .. } => Some(kappa * (mu - x)),
            _ => None,
        }
    }

    /// Writes `b(t_k, phi)` into `out` (`d` values).
    pub fn drift_into(&self, t: f64, path: &PathSlice, k: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        match &self.coeffs {
            Coeffs::Schilder => out.fill(0.0),
            Coeffs::OrnsteinUhlenbeck { rate } => {
                let x = path.value(k);
                for i in 0..self.d {
                    out[i] = -rate * x[i];
                }
            }
            Coeffs::FwPoly { drift, .. } => {
                out[0] = drift.eval(path.value(k)[0]);
            }
            Coeffs::DelayLinear { drift, .. } => {
                out[0] = drift.eval(path.value(k)[0], path.lagged(k)[0]);
            }
            Coeffs::Cir { kappa, mu, .. } => {
                out[0] = kappa * (mu - path.value(k)[0]);
            }
            Coeffs::Custom { drift, .. } => drift(t, path, k, out),
        }
    }

    /// Writes `sigma(t_k, phi)` into `out` (row-major `d x m`).
    pub fn dispersion_into(&self, t: f64, path: &PathSlice, k: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d * self.m);
        match &self.coeffs {
            Coeffs::Schilder | Coeffs::OrnsteinUhlenbeck { .. } => {
                out.fill(0.0);
                for i in 0..self.d {
                    out[i * self.m + i] = 1.0;
                }
            }
            Coeffs::FwPoly { dispersion, .. } => {
                out[0] = dispersion.eval(path.value(k)[0]);
            }
            Coeffs::DelayLinear { dispersion, .. } => {
                out[0] = dispersion.eval(path.value(k)[0], path.lagged(k)[0]);
            }
            Coeffs::Cir { vol, .. } => {
                out[0] = vol * path.value(k)[0].max(0.0).sqrt();
            }
            Coeffs::Custom { dispersion, .. } => dispersion(t, path, k, out),
        }
    }

    /// Jacobians of the effective drift `b + sigma f_k` with respect to the
    /// path nodes it reads. Returns `false` when the family has no analytic
    /// derivatives (custom models without a jacobian closure).
    pub fn step_jacobians(
        &self,
        t: f64,
        path: &PathSlice,
        k: usize,
        f_k: &[f64],
        out: &mut Vec<NodeJacobian>,
    ) -> bool {
        out.clear();
        match &self.coeffs {
            Coeffs::Schilder => true,
            Coeffs::OrnsteinUhlenbeck { rate } => {
                let mut mat = vec![0.0; self.d * self.d];
                for i in 0..self.d {
                    mat[i * self.d + i] = -rate;
                }
                out.push(NodeJacobian { node: k, mat });
                true
            }
            Coeffs::FwPoly { drift, dispersion } => {
                let x = path.value(k)[0];
                let dv = drift.derivative_at(x) + dispersion.derivative_at(x) * f_k[0];
                out.push(NodeJacobian {
                    node: k,
                    mat: vec![dv],
                });
                true
            }
            Coeffs::DelayLinear { drift, dispersion } => {
                out.push(NodeJacobian {
                    node: k,
                    mat: vec![drift.on_x + dispersion.on_x * f_k[0]],
                });
                if k >= path.lag_steps {
                    out.push(NodeJacobian {
                        node: k - path.lag_steps,
                        mat: vec![drift.on_y + dispersion.on_y * f_k[0]],
                    });
                }
                true
            }
            Coeffs::Cir { kappa, vol, .. } => {
                let x = path.value(k)[0];
                let dsig = if x > 0.0 { vol / (2.0 * x.sqrt()) } else { 0.0 };
                out.push(NodeJacobian {
                    node: k,
                    mat: vec![-kappa + dsig * f_k[0]],
                });
                true
            }
            Coeffs::Custom { jacobian, .. } => match jacobian {
                Some(j) => {
                    j(t, path, k, f_k, out);
                    true
                }
                None => false,
            },
        }
    }

    /// Lag in grid steps, validating the segment when the model has a delay.
    pub fn lag_steps_for(&self, grid: &TimeGrid, init: &InitialData) -> LdpResult<usize> {
        match self.delay {
            None => Ok(0),
            Some(tau) => match init.segment() {
                None => Err(LdpError::MissingSegment),
                Some(seg) => {
                    if seg.d != self.d {
                        return Err(LdpError::DimensionMismatch(format!(
                            "segment dimension {} vs model dimension {}",
                            seg.d, self.d
                        )));
                    }
                    seg.validate_against(grid, tau)
                }
            },
        }
    }
}

/// Retired API shape of the spec: evaluate the drift at a grid time on a
/// materialized path prefix.
pub fn eval_drift(model: &Model, t: f64, prefix: &StatePath) -> LdpResult<Vec<f64>> {
    let (slice, k) = prefix_slice(model, t, prefix)?;
    let mut out = vec![0.0; model.state_dim()];
    model.drift_into(t, &slice, k, &mut out);
    Ok(out)
}

/// As [`eval_drift`], returning the row-major `d x m` dispersion matrix.
pub fn eval_dispersion(model: &Model, t: f64, prefix: &StatePath) -> LdpResult<Vec<f64>> {
    let (slice, k) = prefix_slice(model, t, prefix)?;
    let mut out = vec![0.0; model.state_dim() * model.noise_dim()];
    model.dispersion_into(t, &slice, k, &mut out);
    Ok(out)
}

fn prefix_slice<'a>(
    model: &Model,
    t: f64,
    prefix: &'a StatePath,
) -> LdpResult<(PathSlice<'a>, usize)> {
    if prefix.d != model.state_dim() {
        return Err(LdpError::DimensionMismatch(format!(
            "path dimension {} vs model dimension {}",
            prefix.d,
            model.state_dim()
        )));
    }
    let k = prefix.grid.index_of(t)?;
    if prefix.n_nodes() <= k {
        return Err(LdpError::PrefixTooShort {
            need: k,
            have: prefix.n_nodes(),
        });
    }
    let lag = match model.delay() {
        None => 0,
        Some(tau) => match &prefix.segment {
            None => return Err(LdpError::MissingSegment),
            Some(seg) => seg.validate_against(&prefix.grid, tau)?,
        },
    };
    Ok((PathSlice::from_path(prefix, lag), k))
}

/// One detected predictability violation.
#[derive(Debug, Clone)]
pub struct PredictabilityViolation {
    pub t: f64,
    pub node: usize,
    pub perturbation_sup: f64,
    pub component: &'static str,
}

#[derive(Debug, Clone)]
pub struct PredictabilityReport {
    pub trials: u64,
    pub violations: Vec<PredictabilityViolation>,
}

impl PredictabilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Perturbs random paths strictly after random nodes and demands bit-identical
/// coefficient outputs before and after.
pub fn check_predictability(
    model: &Model,
    grid: &TimeGrid,
    trials: u64,
    seed: u64,
) -> LdpResult<PredictabilityReport> {
    let d = model.state_dim();
    let m = model.noise_dim();
    let n = grid.n_steps();
    let lag = match model.delay() {
        Some(tau) => grid.lag_steps(tau)?,
        None => 0,
    };
    let mut violations = Vec::new();
    for trial in 0..trials {
        let mut rng = stream(seed, trial, domain::PROBE);
        let mut values = random_walk_values(&mut rng, n, d);
        let segment = random_segment_for(model, &mut rng, lag, d);
        let k = rng.gen_range(0..n);
        let t = grid.node(k);

        let mut b0 = vec![0.0; d];
        let mut s0 = vec![0.0; d * m];
        {
            let slice = PathSlice::new(d, &values, segment.as_ref(), lag);
            model.drift_into(t, &slice, k, &mut b0);
            model.dispersion_into(t, &slice, k, &mut s0);
        }

        // Perturb the strict future only.
        let mut sup = 0.0f64;
        for v in values[(k + 1) * d..].iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += z;
            sup = sup.max(z.abs());
        }

        let mut b1 = vec![0.0; d];
        let mut s1 = vec![0.0; d * m];
        {
            let slice = PathSlice::new(d, &values, segment.as_ref(), lag);
            model.drift_into(t, &slice, k, &mut b1);
            model.dispersion_into(t, &slice, k, &mut s1);
        }

        if !bits_equal(&b0, &b1) {
            violations.push(PredictabilityViolation {
                t,
                node: k,
                perturbation_sup: sup,
                component: "drift",
            });
        }
        if !bits_equal(&s0, &s1) {
            violations.push(PredictabilityViolation {
                t,
                node: k,
                perturbation_sup: sup,
                component: "dispersion",
            });
        }
    }
    Ok(PredictabilityReport { trials, violations })
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub probes: u64,
    /// Largest observed `(|b| v |sigma|_F) / (M (1 + sup |phi|))`.
    pub max_ratio: f64,
    pub worst_t: f64,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.max_ratio <= 1.0 + 1e-12
    }
}

/// Samples random `(t, phi)` probes and checks the sublinear growth bound
/// `|b| v |sigma| <= M (1 + sup_{s<=t} |phi_s|)` with the declared constant.
pub fn growth_probe(
    model: &Model,
    grid: &TimeGrid,
    probes: u64,
    seed: u64,
) -> LdpResult<GrowthReport> {
    let d = model.state_dim();
    let m = model.noise_dim();
    let n = grid.n_steps();
    let lag = match model.delay() {
        Some(tau) => grid.lag_steps(tau)?,
        None => 0,
    };
    let mut max_ratio = 0.0f64;
    let mut worst_t = 0.0;
    let mut b = vec![0.0; d];
    let mut s = vec![0.0; d * m];
    for probe in 0..probes {
        let mut rng = stream(seed, probe, domain::PROBE);
        let values = random_walk_values(&mut rng, n, d);
        let segment = random_segment_for(model, &mut rng, lag, d);
        let k = rng.gen_range(0..n);
        let t = grid.node(k);
        let slice = PathSlice::new(d, &values, segment.as_ref(), lag);
        model.drift_into(t, &slice, k, &mut b);
        model.dispersion_into(t, &slice, k, &mut s);
        // Delay growth constants absorb the segment sup, so the bound uses
        // only the path's running sup.
        let bound = model.growth_constant() * (1.0 + slice.running_sup(k));
        let reach = norm(&b).max(norm(&s));
        let ratio = if bound > 0.0 { reach / bound } else { f64::INFINITY };
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_t = t;
        }
    }
    Ok(GrowthReport {
        probes,
        max_ratio,
        worst_t,
    })
}

fn random_walk_values(rng: &mut impl Rng, n: usize, d: usize) -> Vec<f64> {
    let mut values = vec![0.0; (n + 1) * d];
    for v in values[..d].iter_mut() {
        *v = rng.sample::<f64, _>(StandardNormal);
    }
    for k in 0..n {
        for i in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            values[(k + 1) * d + i] = values[k * d + i] + 0.3 * z;
        }
    }
    values
}

/// Random admissible segment for a delay model: values are clamped to the
/// declared segment sup, whose absorption into the growth constant the probes
/// rely on.
fn random_segment_for(model: &Model, rng: &mut impl Rng, lag: usize, d: usize) -> Option<Segment> {
    let tau = model.delay()?;
    let sup = model.segment_sup().unwrap_or(1.0);
    let mut values = vec![0.0; (lag + 1) * d];
    for v in values.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = z.clamp(-sup, sup);
    }
    Some(Segment::new(tau, d, values).expect("segment shape is consistent by construction"))
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::InitialData;

    fn path_with(grid: &TimeGrid, d: usize, fill: f64) -> StatePath {
        let values = vec![fill; (grid.n_steps() + 1) * d];
        StatePath::new(grid.clone(), d, 1.0, values, None).unwrap()
    }

    #[test]
    fn ou_drift_is_minus_value() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let prefix = path_with(&grid, 1, 2.0);
        let b = eval_drift(&model, 0.3, &prefix).unwrap();
        assert_eq!(b, vec![-2.0]);
    }

    #[test]
    fn delay_drift_reads_segment_before_tau() {
        // b(t, x, y) = -x + y/2, tau = 1, psi = 1, x(0.5) = 0 -> 0.5
        let grid = TimeGrid::new(2.0, 20).unwrap();
        let model =
            Model::delay_linear(AffineXY::new(-1.0, 0.5, 0.0), AffineXY::new(0.0, 0.0, 1.0), 1.0, 1.0)
                .unwrap();
        let seg = Segment::constant(1.0, &[1.0], &grid).unwrap();
        let mut path = path_with(&grid, 1, 0.0);
        path.segment = Some(seg);
        let b = eval_drift(&model, 0.5, &path).unwrap();
        assert_eq!(b, vec![0.5]);
    }

    #[test]
    fn cir_drift_positive_at_origin_and_sqrt_dispersion() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = Model::cir(1.0, 1.0, 1.0).unwrap();
        let prefix = path_with(&grid, 1, 0.0);
        assert_eq!(eval_drift(&model, 0.4, &prefix).unwrap(), vec![1.0]);
        let four = path_with(&grid, 1, 4.0);
        assert_eq!(eval_dispersion(&model, 0.4, &four).unwrap(), vec![2.0]);
    }

    #[test]
    fn cir_dispersion_clamps_negative_states() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = Model::cir(1.0, 1.0, 1.0).unwrap();
        let neg = path_with(&grid, 1, -0.01);
        assert_eq!(eval_dispersion(&model, 0.2, &neg).unwrap(), vec![0.0]);
    }

    #[test]
    fn schilder_constant_dispersion() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = Model::schilder(1);
        let prefix = path_with(&grid, 1, 5.0);
        assert_eq!(eval_dispersion(&model, 0.7, &prefix).unwrap(), vec![1.0]);
    }

    #[test]
    fn eval_rejects_off_grid_and_missing_segment() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let model = Model::schilder(1);
        let prefix = path_with(&grid, 1, 0.0);
        assert!(matches!(
            eval_drift(&model, 0.123, &prefix),
            Err(LdpError::TimeOffGrid { .. })
        ));
        let delay = Model::delay_linear(
            AffineXY::new(0.0, 1.0, 0.0),
            AffineXY::new(0.0, 0.0, 0.0),
            0.5,
            1.0,
        )
        .unwrap();
        let grid2 = TimeGrid::new(1.0, 10).unwrap();
        let no_seg = path_with(&grid2, 1, 0.0);
        assert!(matches!(
            eval_drift(&delay, 0.2, &no_seg),
            Err(LdpError::MissingSegment)
        ));
    }

    #[test]
    fn built_ins_pass_predictability() {
        let grid = TimeGrid::new(2.0, 16).unwrap();
        for model in [
            Model::schilder(2),
            Model::ornstein_uhlenbeck(1, 1.0),
            Model::cir(1.0, 1.0, 1.0).unwrap(),
            Model::fw_poly(Poly(vec![1.0, -1.0]), Poly(vec![1.0])).unwrap(),
            Model::delay_linear(
                AffineXY::new(-1.0, 0.5, 0.0),
                AffineXY::new(0.0, 0.0, 1.0),
                0.5,
                1.0,
            )
            .unwrap(),
        ] {
            let report = check_predictability(&model, &grid, 100, 11).unwrap();
            assert!(
                report.passed(),
                "{} violated predictability: {:?}",
                model.name(),
                report.violations
            );
        }
    }

    #[test]
    fn adversarial_future_reader_is_flagged() {
        // Drift that reads the final node of whatever path it is handed.
        let drift: super::CoeffFn = Arc::new(|_t, path: &PathSlice, _k, out: &mut [f64]| {
            out[0] = path.value(path.n_known() - 1)[0];
        });
        let dispersion: super::CoeffFn = Arc::new(|_t, _path: &PathSlice, _k, out: &mut [f64]| {
            out[0] = 1.0;
        });
        let model = Model::custom("future_reader", 1, 1, 10.0, drift, dispersion);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let report = check_predictability(&model, &grid, 100, 3).unwrap();
        assert!(!report.passed());
        assert!(report.violations.iter().all(|v| v.component == "drift"));
    }

    #[test]
    fn growth_probe_within_declared_constant() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        for model in [
            Model::schilder(3),
            Model::ornstein_uhlenbeck(2, 0.7),
            Model::cir(1.0, 1.0, 1.0).unwrap(),
            Model::fw_poly(Poly(vec![0.5, -2.0]), Poly(vec![1.0, 0.25])).unwrap(),
            Model::delay_linear(
                AffineXY::new(-1.0, 0.5, 0.25),
                AffineXY::new(0.1, 0.1, 1.0),
                0.25,
                3.0,
            )
            .unwrap(),
        ] {
            let report = growth_probe(&model, &grid, 2000, 5).unwrap();
            assert!(
                report.passed(),
                "{} exceeded growth bound: ratio {}",
                model.name(),
                report.max_ratio
            );
        }
    }

    #[test]
    fn delay_growth_constant_covers_segment_regime() {
        // A big segment sup must enter M, otherwise early steps break A1.
        let model = Model::delay_linear(
            AffineXY::new(0.0, 1.0, 0.0),
            AffineXY::new(0.0, 0.0, 0.0),
            0.5,
            3.0,
        )
        .unwrap();
        assert!(model.growth_constant() >= 3.0);
        let _ = InitialData::point(vec![0.0]);
    }

    #[test]
    fn poly_eval_and_derivative() {
        let p = Poly(vec![1.0, -2.0, 3.0]); // 1 - 2x + 3x^2
        assert!((p.eval(2.0) - 9.0).abs() < 1e-15);
        assert!((p.derivative_at(2.0) - 10.0).abs() < 1e-15);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn holder_modulus_integral_closed_form() {
        let rho = HolderModulus::Power {
            coef: 1.0,
            exponent: 0.5,
        };
        // int_a^b 1/r dr = ln(b/a)
        let v = rho.integral_inv_sq(0.1, 0.5);
        assert!((v - (5.0f64).ln()).abs() < 1e-12);
        assert!(rho.diverges_at_zero());
        let rho2 = HolderModulus::Power {
            coef: 1.0,
            exponent: 0.25,
        };
        assert!(!rho2.diverges_at_zero());
    }
}
