//! Report writers. All writers are pure string builders so outputs are
//! byte-reproducible; floats are printed with Rust's shortest round-trip
//! formatting.

use crate::estimate::EstimationReport;
use crate::paths::{Control, StatePath};
use crate::ActionSolution;

use super::verify::CheckRow;

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Sweep rows: `eps,method,n,hits_or_weightsum,estimate,stderr,minus_eps_log,action_reference`.
/// Zero-hit cells print `unresolved` in the `minus_eps_log` column.
pub fn sweep_csv(report: &EstimationReport) -> String {
    let mut out = String::from(
        "eps,method,n,hits_or_weightsum,estimate,stderr,minus_eps_log,action_reference\n",
    );
    for row in &report.rows {
        let minus = match row.minus_eps_log {
            Some(v) => fmt_f64(v),
            None => "unresolved".into(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(row.eps),
            row.method,
            row.n_samples,
            fmt_f64(row.hits_or_weight_sum),
            fmt_f64(row.estimate),
            fmt_f64(row.std_error),
            minus,
            fmt_f64(report.action_reference),
        ));
    }
    out
}

/// Gnuplot-ready data: `eps minus_eps_log stderr action_reference`, with the
/// stderr column on the `-eps log` scale. Unresolved cells print `nan`.
pub fn sweep_dat(report: &EstimationReport) -> String {
    let mut out = String::from("# eps minus_eps_log stderr action_reference\n");
    for row in &report.rows {
        let (minus, se) = match (row.minus_eps_log, row.minus_eps_log_std_error()) {
            (Some(v), Some(se)) => (fmt_f64(v), fmt_f64(se)),
            _ => ("nan".into(), "nan".into()),
        };
        out.push_str(&format!(
            "{} {} {} {}\n",
            fmt_f64(row.eps),
            minus,
            se,
            fmt_f64(report.action_reference),
        ));
    }
    out
}

pub fn sweep_json(report: &EstimationReport) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = report
        .rows
        .iter()
        .map(|row| {
            serde_json::json!({
                "eps": row.eps,
                "method": row.method.to_string(),
                "n_samples": row.n_samples,
                "n_hits": row.n_hits,
                "hits_or_weight_sum": row.hits_or_weight_sum,
                "estimate": row.estimate,
                "std_error": row.std_error,
                "minus_eps_log": row.minus_eps_log,
                "minus_eps_log_std_error": row.minus_eps_log_std_error(),
                "resolved": row.resolved(),
                "n_diverged": row.n_diverged,
                "n_rejected": row.n_rejected,
            })
        })
        .collect();
    serde_json::json!({
        "task": "sweep",
        "method": report.method.to_string(),
        "seed": report.seed,
        "grid": {"horizon": report.grid.horizon(), "n_steps": report.grid.n_steps()},
        "action_reference": report.action_reference,
        "tilt": report.tilt.as_ref().map(|t| t.values().to_vec()),
        "rows": rows,
    })
}

/// Skeleton export: `t, phi_1..phi_d, f_1..f_m`; the control cells of the
/// final node are empty since `f` has one value per step.
pub fn skeleton_csv(path: &StatePath, control: &Control) -> String {
    let d = path.d;
    let m = control.m;
    let mut out = String::from("t");
    for i in 0..d {
        out.push_str(&format!(",phi_{}", i + 1));
    }
    for j in 0..m {
        out.push_str(&format!(",f_{}", j + 1));
    }
    out.push('\n');
    let n = path.grid.n_steps();
    for k in 0..=n {
        out.push_str(&fmt_f64(path.grid.node(k)));
        for i in 0..d {
            out.push(',');
            out.push_str(&fmt_f64(path.value(k)[i]));
        }
        for j in 0..m {
            out.push(',');
            if k < n {
                out.push_str(&fmt_f64(control.step(k)[j]));
            }
        }
        out.push('\n');
    }
    out
}

/// Minimizer export: `t, f_1..f_m, phi_1..phi_d`.
pub fn solution_csv(solution: &ActionSolution) -> String {
    let path = &solution.path;
    let control = &solution.control;
    let d = path.d;
    let m = control.m;
    let mut out = String::from("t");
    for j in 0..m {
        out.push_str(&format!(",f_{}", j + 1));
    }
    for i in 0..d {
        out.push_str(&format!(",phi_{}", i + 1));
    }
    out.push('\n');
    let n = path.grid.n_steps();
    for k in 0..=n {
        out.push_str(&fmt_f64(path.grid.node(k)));
        for j in 0..m {
            out.push(',');
            if k < n {
                out.push_str(&fmt_f64(control.step(k)[j]));
            }
        }
        for i in 0..d {
            out.push(',');
            out.push_str(&fmt_f64(path.value(k)[i]));
        }
        out.push('\n');
    }
    out
}

pub fn solution_json(solution: &ActionSolution) -> serde_json::Value {
    serde_json::json!({
        "task": "minimize",
        "value": solution.value,
        "objective": solution.objective,
        "gradient_norm": solution.gradient_norm,
        "iterations": solution.iterations,
        "restarts": solution.restarts,
        "converged": solution.converged,
        "feasible": solution.feasible,
        "constraint_violation": solution.constraint_violation,
        "cap_exceeded": solution.cap_exceeded,
        "control": solution.control.values().to_vec(),
        "path": solution.path.values().to_vec(),
    })
}

/// Sampled trajectories: `sample, t, X_1..X_d`.
pub fn paths_csv(paths: &[StatePath]) -> String {
    let mut out = String::from("sample,t");
    if let Some(first) = paths.first() {
        for i in 0..first.d {
            out.push_str(&format!(",x_{}", i + 1));
        }
    }
    out.push('\n');
    for (s, path) in paths.iter().enumerate() {
        for k in 0..path.n_nodes() {
            out.push_str(&format!("{s},{}", fmt_f64(path.grid.node(k))));
            for i in 0..path.d {
                out.push(',');
                out.push_str(&fmt_f64(path.value(k)[i]));
            }
            out.push('\n');
        }
    }
    out
}

/// Binary dump: little-endian header
/// `(d: u32, m: u32, n_steps: u64, T: f64, eps: f64, seed: u64)` followed by
/// each path's `(n_steps + 1) x d` values, row-major float64.
pub fn paths_bin(paths: &[StatePath], m: usize, eps: f64, seed: u64) -> Vec<u8> {
    let mut out = Vec::new();
    let Some(first) = paths.first() else {
        return out;
    };
    out.extend_from_slice(&(first.d as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(first.grid.n_steps() as u64).to_le_bytes());
    out.extend_from_slice(&first.grid.horizon().to_le_bytes());
    out.extend_from_slice(&eps.to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    for path in paths {
        for v in path.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn verify_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("check,passed,margin,detail\n");
    for row in rows {
        let detail = row.detail.replace(',', ";");
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.name,
            row.passed,
            fmt_f64(row.margin),
            detail
        ));
    }
    out
}

pub fn verify_json(rows: &[CheckRow]) -> serde_json::Value {
    let items: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| {
            serde_json::json!({
                "check": row.name,
                "passed": row.passed,
                "margin": row.margin,
                "detail": row.detail,
            })
        })
        .collect();
    serde_json::json!({"task": "verify", "checks": items})
}
