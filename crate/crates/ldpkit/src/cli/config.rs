//! Strict JSON experiment configuration.
//!
//! One config file describes one experiment: a model block, a grid block,
//! exactly one task block, and an output block. Parsing is strict (unknown
//! fields are errors, comments are not JSON) and a parsed config serializes
//! back to an equivalent document.

use serde::{Deserialize, Serialize};

use crate::action::{PathFunctional, PiecewiseLinear};
use crate::error::{LdpError, LdpResult};
use crate::estimate::{EventSet, Method, SweepTarget};
use crate::grid::TimeGrid;
use crate::models::{AffineXY, Model, Poly};
use crate::paths::{Control, InitialData, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Schilder {
        d: usize,
        x0: Vec<f64>,
    },
    OrnsteinUhlenbeck {
        d: usize,
        rate: f64,
        x0: Vec<f64>,
    },
    FwPoly {
        drift: Vec<f64>,
        dispersion: Vec<f64>,
        x0: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        growth_constant: Option<f64>,
    },
    DelayLinear {
        drift: AffineConfig,
        dispersion: AffineConfig,
        tau: f64,
        segment: SegmentConfig,
    },
    Cir {
        kappa: f64,
        mu: f64,
        vol: f64,
        x0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    #[serde(default)]
    pub on_x: f64,
    #[serde(default)]
    pub on_y: f64,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentConfig {
    /// Constant segment `psi = value` on `[-tau, 0]`.
    Constant { value: f64 },
    /// Tabulated values at `-tau + j dt`, exactly `tau/dt + 1` of them.
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskConfig {
    Simulate(SimulateTask),
    Skeleton(SkeletonTask),
    Minimize(MinimizeTask),
    Sweep(SweepTask),
    Verify(VerifyTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    pub eps: f64,
    pub n_samples: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub dump_paths: bool,
    #[serde(default)]
    pub dump_binary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonTask {
    pub control: ControlConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeTask {
    pub functional: FunctionalConfig,
    pub n_cap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tol_grad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tol_constraint: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTask {
    pub eps_list: Vec<f64>,
    pub n_samples: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub method: MethodConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub event: Option<EventConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub functional: Option<FunctionalConfig>,
    pub n_cap: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTask {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    Naive,
    Importance,
}

impl From<MethodConfig> for Method {
    fn from(m: MethodConfig) -> Method {
        match m {
            MethodConfig::Naive => Method::Naive,
            MethodConfig::Importance => Method::Importance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlConfig {
    /// Same value on every step (one entry per noise coordinate).
    Constant { value: Vec<f64> },
    /// Row `k` holds the control on `[t_k, t_{k+1})`.
    Values { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EventConfig {
    HalfSpace { coord: usize, level: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Sup { coord: usize, level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalConfig {
    TerminalPoint { target: Vec<f64> },
    HalfSpace { coord: usize, level: f64 },
    TerminalCost { coord: usize, table: Vec<(f64, f64)> },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

/// Parses and validates a config document. The task block must contain
/// exactly one task; duplicates are named in the error.
pub fn parse_config(text: &str) -> LdpResult<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LdpError::Config(format!("invalid JSON: {e}")))?;
    let task = value
        .get("task")
        .ok_or_else(|| LdpError::Config("missing task block".into()))?;
    let task_map = task
        .as_object()
        .ok_or_else(|| LdpError::Config("task block must be an object".into()))?;
    if task_map.len() != 1 {
        let names: Vec<&str> = task_map.keys().map(String::as_str).collect();
        return Err(LdpError::Config(format!(
            "task block must contain exactly one task, found {}: {}",
            task_map.len(),
            names.join(", ")
        )));
    }
    let config: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| LdpError::Config(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> LdpResult<()> {
        let grid = self.build_grid()?;
        let (model, _init) = self.model.build(&grid)?;
        match &self.task {
            TaskConfig::Simulate(t) => {
                if t.seed.is_none() {
                    return Err(LdpError::Config("simulate task requires a seed".into()));
                }
                if t.n_samples == 0 {
                    return Err(LdpError::Config("n_samples must be >= 1".into()));
                }
                if !(t.eps > 0.0) {
                    return Err(LdpError::Config("simulate eps must be > 0".into()));
                }
                if let Some(c) = &t.control {
                    c.build(&grid, model.noise_dim())?;
                }
            }
            TaskConfig::Skeleton(t) => {
                t.control.build(&grid, model.noise_dim())?;
            }
            TaskConfig::Minimize(t) => {
                if t.seed.is_none() {
                    return Err(LdpError::Config("minimize task requires a seed".into()));
                }
                t.functional.build(&model)?;
            }
            TaskConfig::Sweep(t) => {
                if t.seed.is_none() {
                    return Err(LdpError::Config("sweep task requires a seed".into()));
                }
                if t.n_samples == 0 {
                    return Err(LdpError::Config("n_samples must be >= 1".into()));
                }
                match (&t.event, &t.functional) {
                    (Some(_), Some(_)) => {
                        return Err(LdpError::Config(
                            "sweep takes either an event or a functional, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(LdpError::Config(
                            "sweep needs an event or a functional".into(),
                        ))
                    }
                    _ => {}
                }
                if t.eps_list.is_empty() {
                    return Err(LdpError::Config("eps_list must be nonempty".into()));
                }
                for w in t.eps_list.windows(2) {
                    if !(w[1] < w[0]) {
                        return Err(LdpError::Config(
                            "eps_list must be strictly decreasing".into(),
                        ));
                    }
                }
                if !(*t.eps_list.last().unwrap() > 0.0) {
                    return Err(LdpError::Config("eps values must be positive".into()));
                }
                if let Some(f) = &t.functional {
                    let pf = f.build(&model)?;
                    if !pf.is_cost() {
                        return Err(LdpError::Config(
                            "sweep functionals must be bounded cost variants \
                             (terminal_cost or constant)"
                                .into(),
                        ));
                    }
                }
            }
            TaskConfig::Verify(t) => {
                if t.seed.is_none() {
                    return Err(LdpError::Config("verify task requires a seed".into()));
                }
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> LdpResult<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.n_steps)
    }
}

impl ModelConfig {
    pub fn build(&self, grid: &TimeGrid) -> LdpResult<(Model, InitialData)> {
        match self {
            ModelConfig::Schilder { d, x0 } => {
                check_dim(*d, x0)?;
                Ok((Model::schilder(*d), InitialData::point(x0.clone())))
            }
            ModelConfig::OrnsteinUhlenbeck { d, rate, x0 } => {
                check_dim(*d, x0)?;
                Ok((
                    Model::ornstein_uhlenbeck(*d, *rate),
                    InitialData::point(x0.clone()),
                ))
            }
            ModelConfig::FwPoly {
                drift,
                dispersion,
                x0,
                growth_constant,
            } => {
                let model = Model::fw_poly(Poly(drift.clone()), Poly(dispersion.clone()))
                    .map(|m| match growth_constant {
                        Some(g) => m.with_growth_constant(*g),
                        None => m,
                    })
                    .map_err(|e| LdpError::Config(e.to_string()))?;
                Ok((model, InitialData::point(vec![*x0])))
            }
            ModelConfig::DelayLinear {
                drift,
                dispersion,
                tau,
                segment,
            } => {
                let seg = segment.build(*tau, grid)?;
                seg.validate_against(grid, *tau)?;
                let sup = (0..seg.n_nodes())
                    .map(|j| seg.value(j)[0].abs())
                    .fold(0.0f64, f64::max);
                let model = Model::delay_linear(
                    AffineXY::new(drift.on_x, drift.on_y, drift.offset),
                    AffineXY::new(dispersion.on_x, dispersion.on_y, dispersion.offset),
                    *tau,
                    sup,
                )?;
                Ok((model, InitialData::Segment(seg)))
            }
            ModelConfig::Cir { kappa, mu, vol, x0 } => Ok((
                Model::cir(*kappa, *mu, *vol)?,
                InitialData::point(vec![*x0]),
            )),
        }
    }
}

fn check_dim(d: usize, x0: &[f64]) -> LdpResult<()> {
    if d == 0 {
        return Err(LdpError::Config("d must be >= 1".into()));
    }
    if x0.len() != d {
        return Err(LdpError::Config(format!(
            "x0 has {} coordinates, model dimension is {d}",
            x0.len()
        )));
    }
    Ok(())
}

impl SegmentConfig {
    pub fn build(&self, tau: f64, grid: &TimeGrid) -> LdpResult<Segment> {
        match self {
            SegmentConfig::Constant { value } => Segment::constant(tau, &[*value], grid),
            SegmentConfig::Values { values } => {
                let lag = grid.lag_steps(tau)?;
                if values.len() != lag + 1 {
                    return Err(LdpError::SegmentMismatch(format!(
                        "segment table has {} values, grid spacing requires {}",
                        values.len(),
                        lag + 1
                    )));
                }
                Segment::new(tau, 1, values.clone())
            }
        }
    }
}

impl ControlConfig {
    pub fn build(&self, grid: &TimeGrid, m: usize) -> LdpResult<Control> {
        match self {
            ControlConfig::Constant { value } => {
                if value.len() != m {
                    return Err(LdpError::Config(format!(
                        "constant control has {} coordinates, noise dimension is {m}",
                        value.len()
                    )));
                }
                Ok(Control::constant(grid.clone(), value))
            }
            ControlConfig::Values { values } => {
                if values.len() != grid.n_steps() {
                    return Err(LdpError::Config(format!(
                        "control table has {} rows, grid has {} steps",
                        values.len(),
                        grid.n_steps()
                    )));
                }
                let mut flat = Vec::with_capacity(grid.n_steps() * m);
                for row in values {
                    if row.len() != m {
                        return Err(LdpError::Config(format!(
                            "control row has {} entries, noise dimension is {m}",
                            row.len()
                        )));
                    }
                    flat.extend_from_slice(row);
                }
                Control::new(grid.clone(), m, flat)
            }
        }
    }
}

impl EventConfig {
    pub fn build(&self, model: &Model) -> LdpResult<EventSet> {
        let check_coord = |coord: usize| -> LdpResult<()> {
            if coord >= model.state_dim() {
                return Err(LdpError::Config(format!(
                    "event coordinate {coord} out of range for d = {}",
                    model.state_dim()
                )));
            }
            Ok(())
        };
        match self {
            EventConfig::HalfSpace { coord, level } => {
                check_coord(*coord)?;
                Ok(EventSet::TerminalHalfSpace {
                    coord: *coord,
                    level: *level,
                })
            }
            EventConfig::Ball { center, radius } => {
                if center.len() != model.state_dim() {
                    return Err(LdpError::Config(format!(
                        "ball center has {} coordinates, d = {}",
                        center.len(),
                        model.state_dim()
                    )));
                }
                Ok(EventSet::TerminalBall {
                    center: center.clone(),
                    radius: *radius,
                })
            }
            EventConfig::Sup { coord, level } => {
                check_coord(*coord)?;
                Ok(EventSet::SupExceedance {
                    coord: *coord,
                    level: *level,
                })
            }
        }
    }
}

impl FunctionalConfig {
    pub fn build(&self, model: &Model) -> LdpResult<PathFunctional> {
        let check_coord = |coord: usize| -> LdpResult<()> {
            if coord >= model.state_dim() {
                return Err(LdpError::Config(format!(
                    "coordinate {coord} out of range for d = {}",
                    model.state_dim()
                )));
            }
            Ok(())
        };
        match self {
            FunctionalConfig::TerminalPoint { target } => {
                if target.len() != model.state_dim() {
                    return Err(LdpError::Config(format!(
                        "target has {} coordinates, d = {}",
                        target.len(),
                        model.state_dim()
                    )));
                }
                Ok(PathFunctional::TerminalPoint {
                    target: target.clone(),
                })
            }
            FunctionalConfig::HalfSpace { coord, level } => {
                check_coord(*coord)?;
                Ok(PathFunctional::TerminalHalfSpace {
                    coord: *coord,
                    level: *level,
                })
            }
            FunctionalConfig::TerminalCost { coord, table } => {
                check_coord(*coord)?;
                Ok(PathFunctional::TerminalCost {
                    coord: *coord,
                    table: PiecewiseLinear::new(table)?,
                })
            }
            FunctionalConfig::Constant { value } => Ok(PathFunctional::Constant { value: *value }),
        }
    }
}

impl SweepTask {
    pub fn build_target(&self, model: &Model) -> LdpResult<SweepTarget> {
        match (&self.event, &self.functional) {
            (Some(e), None) => Ok(SweepTarget::Event(e.build(model)?)),
            (None, Some(f)) => Ok(SweepTarget::Cost(f.build(model)?)),
            _ => Err(LdpError::Config(
                "sweep needs exactly one of event / functional".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"{
        "model": {"family": "schilder", "d": 1, "x0": [0.0]},
        "grid": {"horizon": 1.0, "n_steps": 100},
        "task": {"sweep": {
            "eps_list": [0.5, 0.2],
            "n_samples": 100,
            "seed": 1,
            "method": "importance",
            "event": {"half_space": {"coord": 0, "level": 2.0}},
            "n_cap": 8.0
        }},
        "output": {"dir": "out", "formats": ["csv", "json"]}
    }"#;

    #[test]
    fn sweep_config_round_trips() {
        let cfg = parse_config(SWEEP).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let again = parse_config(&text).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn duplicate_tasks_named_in_error() {
        let text = r#"{
            "model": {"family": "schilder", "d": 1, "x0": [0.0]},
            "grid": {"horizon": 1.0, "n_steps": 10},
            "task": {
                "skeleton": {"control": {"constant": {"value": [0.0]}}},
                "sweep": {"eps_list": [0.5], "n_samples": 1, "seed": 1,
                          "method": "naive",
                          "event": {"half_space": {"coord": 0, "level": 1.0}},
                          "n_cap": 1.0}
            },
            "output": {"dir": "out", "formats": []}
        }"#;
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exactly one task"), "{msg}");
        assert!(msg.contains("skeleton") && msg.contains("sweep"), "{msg}");
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let text = r#"{
            "model": {"family": "schilder", "d": 1, "x0": [0.0]},
            "grid": {"horizon": 1.0, "n_steps": 10},
            "task": {"simulate": {"eps": 0.5, "n_samples": 10}},
            "output": {"dir": "out", "formats": []}
        }"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn delay_tau_must_fit_grid() {
        let text = r#"{
            "model": {"family": "delay_linear",
                      "drift": {"on_y": 1.0},
                      "dispersion": {},
                      "tau": 0.13,
                      "segment": {"constant": {"value": 1.0}}},
            "grid": {"horizon": 2.0, "n_steps": 20},
            "task": {"skeleton": {"control": {"constant": {"value": [0.0]}}}},
            "output": {"dir": "out", "formats": []}
        }"#;
        let err = parse_config(text).unwrap_err();
        assert!(matches!(err, LdpError::SegmentMismatch(_)), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = SWEEP.replace("\"n_cap\": 8.0", "\"n_cap\": 8.0, \"bogus\": 1");
        assert!(parse_config(&text).is_err());
    }
}
