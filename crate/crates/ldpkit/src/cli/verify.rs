//! Diagnostic check table for a configured model: predictability, growth,
//! moment bound, positivity (square-root models), weak-L2 continuity, and the
//! adjoint gradient check. One row per check with a pass/fail and a margin
//! (nonnegative margins pass).

use crate::action::gradient_check;
use crate::error::LdpResult;
use crate::grid::TimeGrid;
use crate::models::{check_predictability, growth_probe, Model};
use crate::paths::{Control, InitialData};
use crate::simulate::{moment_bound_check, random_control_in_ball};
use crate::skeleton::{
    growth_margin, positivity_floor, positivity_monte_carlo, solve_skeleton,
    weak_l2_continuity_probe, PositivityBracket,
};

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub seed: u64,
    pub trials: u64,
    pub n_samples: u64,
    pub n_cap: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            seed: 0,
            trials: 100,
            n_samples: 2000,
            n_cap: 1.0,
        }
    }
}

pub fn run_checks(
    model: &Model,
    init: &InitialData,
    grid: &TimeGrid,
    settings: &VerifySettings,
) -> LdpResult<Vec<CheckRow>> {
    let mut rows = Vec::new();

    let pred = check_predictability(model, grid, settings.trials, settings.seed)?;
    rows.push(CheckRow {
        name: "predictability",
        passed: pred.passed(),
        margin: -(pred.violations.len() as f64),
        detail: format!("{} violations in {} trials", pred.violations.len(), pred.trials),
    });

    let growth = growth_probe(model, grid, 10_000, settings.seed)?;
    rows.push(CheckRow {
        name: "sublinear_growth",
        passed: growth.passed(),
        margin: 1.0 - growth.max_ratio,
        detail: format!("max |coeff| / bound ratio {:.6}", growth.max_ratio),
    });

    // Gronwall bound along computed skeletons over random admissible controls.
    let mut worst_rel = f64::INFINITY;
    for i in 0..100 {
        let control =
            random_control_in_ball(grid, model.noise_dim(), settings.n_cap, settings.seed, i);
        let sol = solve_skeleton(model, init, &control)?;
        let margin = growth_margin(model, init, &sol);
        let x_sq: f64 = init.initial_state().iter().map(|v| v * v).sum();
        let scale = crate::skeleton::growth_bound(
            init.initial_state(),
            model.growth_constant(),
            grid.horizon(),
            control.norm_sq(),
        )
        .max(x_sq)
        .max(1.0);
        worst_rel = worst_rel.min(margin / scale);
    }
    rows.push(CheckRow {
        name: "skeleton_growth_bound",
        passed: worst_rel >= 0.0,
        margin: worst_rel,
        detail: format!("worst relative slack {worst_rel:.3e} over 100 controls"),
    });

    match moment_bound_check(
        model,
        0.5,
        init,
        grid,
        settings.n_cap,
        2.0,
        settings.n_samples,
        settings.seed,
    ) {
        Ok(report) => rows.push(CheckRow {
            name: "moment_bound",
            passed: report.passed(),
            margin: report.margin / report.bound,
            detail: format!(
                "E sup|X|^2 = {:.4} (+3se {:.4}) vs bound {:.3e}",
                report.empirical_mean,
                report.empirical_mean + 3.0 * report.std_error,
                report.bound
            ),
        }),
        Err(e) => rows.push(CheckRow {
            name: "moment_bound",
            passed: false,
            margin: f64::NEG_INFINITY,
            detail: e.to_string(),
        }),
    }

    if model.holder_modulus().is_some() {
        let x0 = init.initial_state()[0];
        match positivity_floor(model, x0, settings.n_cap, &PositivityBracket::default()) {
            Ok(cert) => {
                let mc = positivity_monte_carlo(model, init, grid, &cert, 1000, settings.seed)?;
                rows.push(CheckRow {
                    name: "positivity_floor",
                    passed: mc.passed(),
                    margin: (mc.min_over_paths - cert.xi) / cert.xi,
                    detail: format!(
                        "xi = {:.6e}, min over {} paths = {:.6e}, {} violations",
                        cert.xi, mc.trials, mc.min_over_paths, mc.violations
                    ),
                });
            }
            Err(e) => rows.push(CheckRow {
                name: "positivity_floor",
                passed: false,
                margin: f64::NEG_INFINITY,
                detail: e.to_string(),
            }),
        }
    }

    let tol = 0.02 * grid.horizon().max(1.0);
    let base = Control::zero(grid.clone(), model.noise_dim());
    let cap = settings.n_cap.max(grid.horizon());
    match weak_l2_continuity_probe(model, init, &base, 1.0, &[1, 4, 16, 64], Some(cap), tol) {
        Ok(report) => {
            let e_last = report.deviations.last().map(|d| d.1).unwrap_or(f64::NAN);
            rows.push(CheckRow {
                name: "weak_l2_continuity",
                passed: report.passed(),
                margin: tol - e_last,
                detail: format!(
                    "deviations {:?}",
                    report
                        .deviations
                        .iter()
                        .map(|(n, e)| format!("n={n}: {e:.4}"))
                        .collect::<Vec<_>>()
                ),
            });
        }
        Err(e) => rows.push(CheckRow {
            name: "weak_l2_continuity",
            passed: false,
            margin: f64::NEG_INFINITY,
            detail: e.to_string(),
        }),
    }

    let free = solve_skeleton(model, init, &Control::zero(grid.clone(), model.noise_dim()))?;
    let mut worst = 0.0f64;
    let mut grad_err: Option<String> = None;
    for i in 0..20 {
        let mut control = random_control_in_ball(
            grid,
            model.noise_dim(),
            settings.n_cap.min(0.5),
            settings.seed.wrapping_add(1),
            i,
        );
        for v in control.values_mut() {
            *v *= 0.5;
        }
        let offset = 0.1 + 0.02 * i as f64;
        let target: Vec<f64> = free.path.terminal().iter().map(|v| v + offset).collect();
        match gradient_check(model, init, grid, &control, &target, 2.0) {
            Ok(check) => worst = worst.max(check.relative_error),
            Err(e) => {
                grad_err = Some(e.to_string());
                break;
            }
        }
    }
    rows.push(match grad_err {
        None => CheckRow {
            name: "adjoint_gradient",
            passed: worst < 1e-5,
            margin: 1e-5 - worst,
            detail: format!("max relative error {worst:.3e} over 20 instances"),
        },
        Some(e) => CheckRow {
            name: "adjoint_gradient",
            passed: false,
            margin: f64::NEG_INFINITY,
            detail: e,
        },
    });

    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Model;

    #[test]
    fn ou_passes_all_applicable_checks() {
        let model = Model::ornstein_uhlenbeck(1, 1.0);
        let init = InitialData::point(vec![0.0]);
        let grid = TimeGrid::new(1.0, 400).unwrap();
        let rows = run_checks(&model, &init, &grid, &VerifySettings::default()).unwrap();
        for row in &rows {
            assert!(row.passed, "{} failed: {}", row.name, row.detail);
        }
        assert!(rows.iter().all(|r| r.name != "positivity_floor"));
    }

    #[test]
    fn cir_with_zero_drift_at_origin_fails_positivity_with_r2_message() {
        let model = Model::cir(1.0, 0.0, 1.0).unwrap();
        let init = InitialData::point(vec![1.0]);
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let rows = run_checks(&model, &init, &grid, &VerifySettings::default()).unwrap();
        let pos = rows
            .iter()
            .find(|r| r.name == "positivity_floor")
            .expect("cir has a positivity row");
        assert!(!pos.passed);
        assert!(pos.detail.contains("R2"), "{}", pos.detail);
    }
}
