//! Task dispatch: one config in, artifacts plus a one-line summary out.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::action::{min_action, MinActionOptions};
use crate::error::{LdpError, LdpResult};
use crate::estimate::epsilon_sweep;
use crate::paths::StatePath;
use crate::simulate::{check_divergence, euler_maruyama, sample_brownian_indexed};
use crate::skeleton::solve_skeleton;

use super::config::{parse_config, ExperimentConfig, TaskConfig};
use super::output;
use super::verify::{run_checks, VerifySettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Exit 0.
    Success,
    /// Exit 1: the config failed to parse or validate.
    ValidationError,
    /// Exit 2: divergence, non-convergence, or failed checks.
    NumericalFailure,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::ValidationError => 1,
            RunStatus::NumericalFailure => 2,
        }
    }
}

fn classify(err: &LdpError) -> RunStatus {
    match err {
        LdpError::Config(_)
        | LdpError::Validation(_)
        | LdpError::InvalidGrid(_)
        | LdpError::DimensionMismatch(_)
        | LdpError::TimeOffGrid { .. }
        | LdpError::PrefixTooShort { .. }
        | LdpError::MissingSegment
        | LdpError::SegmentMismatch(_)
        | LdpError::NotACost
        | LdpError::CapExceeded { .. } => RunStatus::ValidationError,
        _ => RunStatus::NumericalFailure,
    }
}

/// Reads, parses, and runs a config file; prints the one-line summary and
/// returns the exit status.
pub fn run(config_path: &Path, out_override: Option<&Path>, quiet: bool) -> RunStatus {
    let started = Instant::now();
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("ldpkit: cannot read {}: {e}", config_path.display());
            return RunStatus::ValidationError;
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ldpkit: {e}");
            return RunStatus::ValidationError;
        }
    };
    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    match execute(&config, &out_dir) {
        Ok((headline, status)) => {
            if !quiet {
                println!(
                    "{headline} runtime={:.2}s",
                    started.elapsed().as_secs_f64()
                );
            }
            status
        }
        Err(e) => {
            eprintln!("ldpkit: {e}");
            classify(&e)
        }
    }
}

/// Runs the configured task, writing artifacts into `out_dir`.
pub fn execute(config: &ExperimentConfig, out_dir: &Path) -> LdpResult<(String, RunStatus)> {
    let grid = config.build_grid()?;
    let (model, init) = config.model.build(&grid)?;
    fs::create_dir_all(out_dir)?;
    let wants_csv = config.output.wants("csv");
    let wants_json = config.output.wants("json");
    let write = |name: &str, content: &str| -> LdpResult<()> {
        fs::write(out_dir.join(name), content)?;
        Ok(())
    };

    match &config.task {
        TaskConfig::Simulate(t) => {
            let seed = t.seed.expect("validated");
            let control = t
                .control
                .as_ref()
                .map(|c| c.build(&grid, model.noise_dim()))
                .transpose()?;
            let results = crate::parallel::map_samples(t.n_samples, |i| {
                let noise = sample_brownian_indexed(&grid, model.noise_dim(), seed, i);
                euler_maruyama(&model, t.eps, &init, control.as_ref(), &noise).ok()
            });
            let n_diverged = results.iter().filter(|r| r.is_none()).count() as u64;
            check_divergence(n_diverged, t.n_samples)?;
            let paths: Vec<StatePath> = results.into_iter().flatten().collect();

            let d = model.state_dim();
            let n_ok = paths.len() as f64;
            let mut mean = vec![0.0; d];
            for p in &paths {
                for (m, x) in mean.iter_mut().zip(p.terminal()) {
                    *m += x;
                }
            }
            for v in mean.iter_mut() {
                *v /= n_ok;
            }
            let mut var = vec![0.0; d];
            for p in &paths {
                for (v, (x, m)) in var.iter_mut().zip(p.terminal().iter().zip(&mean)) {
                    let e = x - m;
                    *v += e * e;
                }
            }
            let std: Vec<f64> = var
                .iter()
                .map(|v| (v / (n_ok - 1.0).max(1.0)).sqrt())
                .collect();

            if wants_csv {
                let mut rows = String::from("sample");
                for i in 0..d {
                    rows.push_str(&format!(",x_T_{}", i + 1));
                }
                rows.push_str(",sup_norm\n");
                for (s, p) in paths.iter().enumerate() {
                    rows.push_str(&s.to_string());
                    for i in 0..d {
                        rows.push(',');
                        rows.push_str(&output::fmt_f64(p.terminal()[i]));
                    }
                    rows.push(',');
                    rows.push_str(&output::fmt_f64(p.sup_norm()));
                    rows.push('\n');
                }
                write("report.csv", &rows)?;
                if t.dump_paths {
                    write("paths.csv", &output::paths_csv(&paths))?;
                }
            }
            if t.dump_binary {
                fs::write(
                    out_dir.join("paths.bin"),
                    output::paths_bin(&paths, model.noise_dim(), t.eps, seed),
                )?;
            }
            if wants_json {
                let report = serde_json::json!({
                    "task": "simulate",
                    "eps": t.eps,
                    "n_samples": t.n_samples,
                    "n_diverged": n_diverged,
                    "terminal_mean": mean,
                    "terminal_std": std,
                    "seed": seed,
                });
                write("report.json", &serde_json::to_string_pretty(&report)?.to_string())?;
            }
            let headline = format!(
                "task=simulate model={} eps={} n={} diverged={n_diverged} mean_xT={}",
                model.name(),
                t.eps,
                t.n_samples,
                output::fmt_f64(mean[0]),
            );
            Ok((headline, RunStatus::Success))
        }

        TaskConfig::Skeleton(t) => {
            let control = t.control.build(&grid, model.noise_dim())?;
            let sol = solve_skeleton(&model, &init, &control)?;
            if wants_csv {
                write("skeleton.csv", &output::skeleton_csv(&sol.path, &sol.control))?;
            }
            if wants_json {
                let report = serde_json::json!({
                    "task": "skeleton",
                    "endpoint": sol.path.terminal().to_vec(),
                    "residual": sol.residual,
                    "action": crate::action::action_of_control(&sol.control),
                });
                write("report.json", &serde_json::to_string_pretty(&report)?.to_string())?;
            }
            let headline = format!(
                "task=skeleton model={} endpoint={} residual={:.3e}",
                model.name(),
                output::fmt_f64(sol.path.terminal()[0]),
                sol.residual
            );
            Ok((headline, RunStatus::Success))
        }

        TaskConfig::Minimize(t) => {
            let functional = t.functional.build(&model)?;
            let mut opts = MinActionOptions {
                n_cap: t.n_cap,
                seed: t.seed.expect("validated"),
                ..Default::default()
            };
            if let Some(r) = t.restarts {
                opts.restarts = r;
            }
            if let Some(tol) = t.tol_grad {
                opts.tol_grad = tol;
            }
            if let Some(tol) = t.tol_constraint {
                opts.tol_constraint = tol;
            }
            let sol = min_action(&model, &init, &grid, &functional, &opts)?;
            if wants_csv {
                write("solution.csv", &output::solution_csv(&sol))?;
            }
            if wants_json {
                write(
                    "report.json",
                    &serde_json::to_string_pretty(&output::solution_json(&sol))?.to_string(),
                )?;
            }
            let ok = sol.converged && sol.feasible;
            let headline = format!(
                "task=minimize model={} value={} objective={} converged={} feasible={}",
                model.name(),
                output::fmt_f64(sol.value),
                output::fmt_f64(sol.objective),
                sol.converged,
                sol.feasible
            );
            Ok((
                headline,
                if ok {
                    RunStatus::Success
                } else {
                    RunStatus::NumericalFailure
                },
            ))
        }

        TaskConfig::Sweep(t) => {
            let target = t.build_target(&model)?;
            let mut opts = MinActionOptions {
                n_cap: t.n_cap,
                seed: t.seed.expect("validated"),
                ..Default::default()
            };
            if let Some(r) = t.restarts {
                opts.restarts = r;
            }
            let report = epsilon_sweep(
                &model,
                &init,
                &grid,
                &target,
                &t.eps_list,
                t.n_samples,
                t.seed.expect("validated"),
                t.method.into(),
                &opts,
            )?;
            if wants_csv {
                write("report.csv", &output::sweep_csv(&report))?;
                write("sweep.dat", &output::sweep_dat(&report))?;
            }
            if wants_json {
                write(
                    "report.json",
                    &serde_json::to_string_pretty(&output::sweep_json(&report))?.to_string(),
                )?;
            }
            let resolved = report.rows.iter().filter(|r| r.resolved()).count();
            let last = report
                .rows
                .last()
                .and_then(|r| r.minus_eps_log)
                .map(output::fmt_f64)
                .unwrap_or_else(|| "unresolved".into());
            let headline = format!(
                "task=sweep model={} method={} rows={} resolved={resolved} last_minus_eps_log={last} action_ref={}",
                model.name(),
                report.method,
                report.rows.len(),
                output::fmt_f64(report.action_reference)
            );
            Ok((headline, RunStatus::Success))
        }

        TaskConfig::Verify(t) => {
            let settings = VerifySettings {
                seed: t.seed.expect("validated"),
                trials: t.trials.unwrap_or(100),
                n_samples: t.n_samples.unwrap_or(2000),
                n_cap: t.n_cap.unwrap_or(1.0),
            };
            let rows = run_checks(&model, &init, &grid, &settings)?;
            if wants_csv {
                write("report.csv", &output::verify_csv(&rows))?;
            }
            if wants_json {
                write(
                    "report.json",
                    &serde_json::to_string_pretty(&output::verify_json(&rows))?.to_string(),
                )?;
            }
            let passed = rows.iter().filter(|r| r.passed).count();
            let headline = format!(
                "task=verify model={} checks_passed={passed}/{}",
                model.name(),
                rows.len()
            );
            let status = if passed == rows.len() {
                RunStatus::Success
            } else {
                RunStatus::NumericalFailure
            };
            Ok((headline, status))
        }
    }
}
