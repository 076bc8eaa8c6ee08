//! Small-noise large deviations toolkit.
//!
//! Simulates Ito processes with predictable path-dependent coefficients,
//! computes Freidlin-Wentzell-type rate functions by minimizing the control
//! action over the deterministic skeleton, and estimates rare-event
//! probabilities naively and via Girsanov importance sampling, so that
//! `-eps log p_hat` can be compared against `inf I` at desk scale.

// Validation guards use `!(x > y)` so that NaN inputs fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod models;
pub mod paths;
mod parallel;
pub mod rng;
pub mod simulate;
pub mod skeleton;

pub use action::{
    action_of_control, gradient_check, laplace_infimum, min_action, rate_explicit, ActionProblem,
    ActionSolution, MinActionOptions, PathFunctional, PiecewiseLinear,
};
pub use error::{LdpError, LdpResult};
pub use estimate::{
    epsilon_sweep, importance_sampling, mc_laplace, mc_probability, EstimationReport, EventSet,
    Method, ReportRow, SweepTarget,
};
pub use grid::TimeGrid;
pub use models::{
    check_predictability, eval_drift, eval_dispersion, growth_probe, AffineXY, HolderModulus,
    Model, Poly,
};
pub use paths::{BrownianPath, Control, InitialData, Segment, StatePath};
pub use simulate::{
    euler_maruyama, moment_bound_check, moment_bound_constant, refine_brownian, sample_brownian,
    sample_brownian_indexed, tightness_modulus,
};
pub use skeleton::{
    growth_bound, positivity_floor, positivity_monte_carlo, solve_skeleton,
    weak_l2_continuity_probe, PositivityBracket, PositivityCertificate, SkeletonSolution,
};
