//! JSON configuration: grid specs and experiment descriptions.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use eve_core::baselines::{MaxEntConfig, SoftQConfig, StepRule};
use eve_core::eve::{BetaSchedule, EveConfig};
use eve_core::{CliffMode, GridCell, GridSpec};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// On-disk grid description. Coordinates are zero-based, x rightward, y upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpecFile {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    #[serde(default)]
    pub cliff: Vec<[usize; 2]>,
    #[serde(default)]
    pub walls: Vec<[usize; 2]>,
    /// `"remap"` (default) or `"reset_state"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cliff_mode: Option<String>,
}

impl GridSpecFile {
    pub fn to_spec(&self) -> Result<GridSpec, HarnessError> {
        let cells = |v: &[[usize; 2]]| -> BTreeSet<GridCell> {
            v.iter().map(|&[x, y]| GridCell::new(x, y)).collect()
        };
        let cliff_mode = match self.cliff_mode.as_deref() {
            None | Some("remap") => CliffMode::Remap,
            Some("reset_state") => CliffMode::ResetState,
            Some(other) => {
                return Err(HarnessError::config(
                    "cliff_mode",
                    format!("unknown mode `{other}` (expected `remap` or `reset_state`)"),
                ))
            }
        };
        let spec = GridSpec {
            width: self.width,
            height: self.height,
            start: GridCell::new(self.start[0], self.start[1]),
            cliff_cells: cells(&self.cliff),
            wall_cells: cells(&self.walls),
            cliff_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &GridSpec) -> Self {
        let cells = |s: &BTreeSet<GridCell>| s.iter().map(|c| [c.x, c.y]).collect();
        GridSpecFile {
            width: spec.width,
            height: spec.height,
            start: [spec.start.x, spec.start.y],
            cliff: cells(&spec.cliff_cells),
            walls: cells(&spec.wall_cells),
            cliff_mode: match spec.cliff_mode {
                CliffMode::Remap => None,
                CliffMode::ResetState => Some("reset_state".into()),
            },
        }
    }
}

/// Reads and validates a grid spec file.
pub fn load_grid(path: &Path) -> Result<GridSpec, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: GridSpecFile =
        serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))?;
    file.to_spec()
}

/// Parses `1`, `const:1`, or `linear:1:10`.
pub fn parse_beta_schedule(s: &str) -> Result<BetaSchedule, HarnessError> {
    let bad = || HarnessError::config("beta", format!("cannot parse schedule `{s}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [b] => Ok(BetaSchedule::Constant(num(b)?)),
        ["const", b] => Ok(BetaSchedule::Constant(num(b)?)),
        ["linear", a, b] => Ok(BetaSchedule::Linear {
            start: num(a)?,
            end: num(b)?,
        }),
        _ => Err(bad()),
    }
}

/// Environment of an experiment: inline spec, preset name, or path to a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSource {
    Inline(GridSpecFile),
    /// `"cliffworld"` or a path, relative to the config file.
    Named(String),
}

fn default_beta_one() -> f64 {
    1.0
}

fn default_beta_end() -> f64 {
    10.0
}

/// One method of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    Eve {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "default_beta_one")]
        beta_start: f64,
        #[serde(default)]
        beta_end: Option<f64>,
        #[serde(default = "eve_inner")]
        inner_iters: usize,
        #[serde(default = "eve_ppi")]
        ppi_iters: usize,
        #[serde(default = "eve_tol")]
        tol: f64,
        #[serde(default = "eve_ppi_tol")]
        ppi_tol: f64,
        #[serde(default)]
        log_space: bool,
    },
    SoftQDiscounted {
        #[serde(default)]
        name: Option<String>,
        gamma: f64,
        #[serde(default = "mix_discounted")]
        mix_rate: f64,
        #[serde(default = "inner_steps")]
        inner_steps: usize,
        #[serde(default = "outer_iters")]
        outer_iters: usize,
        #[serde(default = "default_beta_one")]
        beta_start: f64,
        #[serde(default = "default_beta_end")]
        beta_end: f64,
    },
    SoftQDifferential {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "mix_differential")]
        mix_rate: f64,
        #[serde(default = "inner_steps")]
        inner_steps: usize,
        #[serde(default = "outer_iters")]
        outer_iters: usize,
        #[serde(default = "default_beta_one")]
        beta_start: f64,
        #[serde(default = "default_beta_end")]
        beta_end: f64,
    },
    Maxent {
        #[serde(default)]
        name: Option<String>,
        #[serde(default = "outer_iters")]
        outer_iters: usize,
        #[serde(default = "maxent_beta")]
        beta: f64,
        #[serde(default = "inner_steps")]
        inner_steps: usize,
        /// `"line_search"` (default) or `"harmonic"`.
        #[serde(default)]
        step_rule: Option<String>,
    },
}

fn eve_inner() -> usize {
    EveConfig::default().inner_iters
}
fn eve_ppi() -> usize {
    EveConfig::default().ppi_iters
}
fn eve_tol() -> f64 {
    EveConfig::default().fixed_point_tol
}
fn eve_ppi_tol() -> f64 {
    EveConfig::default().ppi_tol
}
fn mix_discounted() -> f64 {
    SoftQConfig::discounted(0.9).mix_rate
}
fn mix_differential() -> f64 {
    SoftQConfig::differential().mix_rate
}
fn inner_steps() -> usize {
    SoftQConfig::differential().inner_steps
}
fn outer_iters() -> usize {
    SoftQConfig::differential().outer_iters
}
fn maxent_beta() -> f64 {
    MaxEntConfig::default().beta
}

/// A method with its settings resolved against the core types.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Eve(EveConfig),
    SoftQ(SoftQConfig),
    MaxEnt(MaxEntConfig),
}

impl MethodConfig {
    /// Label used in the `method` column.
    pub fn label(&self) -> String {
        match self {
            MethodConfig::Eve { name, .. } => name.clone().unwrap_or_else(|| "eve".into()),
            MethodConfig::SoftQDiscounted { name, gamma, .. } => name
                .clone()
                .unwrap_or_else(|| format!("soft_q_discounted_{gamma}")),
            MethodConfig::SoftQDifferential { name, .. } => {
                name.clone().unwrap_or_else(|| "soft_q_differential".into())
            }
            MethodConfig::Maxent { name, .. } => name.clone().unwrap_or_else(|| "maxent".into()),
        }
    }

    pub fn resolve(&self) -> Result<Method, HarnessError> {
        let linear = |a: f64, b: f64| BetaSchedule::Linear { start: a, end: b };
        let method = match self {
            MethodConfig::Eve {
                beta_start,
                beta_end,
                inner_iters,
                ppi_iters,
                tol,
                ppi_tol,
                log_space,
                ..
            } => {
                let cfg = EveConfig {
                    beta_schedule: match beta_end {
                        Some(b) => linear(*beta_start, *b),
                        None => BetaSchedule::Constant(*beta_start),
                    },
                    inner_iters: *inner_iters,
                    ppi_iters: *ppi_iters,
                    fixed_point_tol: *tol,
                    ppi_tol: *ppi_tol,
                    use_log_space: *log_space,
                };
                cfg.validate()?;
                Method::Eve(cfg)
            }
            MethodConfig::SoftQDiscounted {
                gamma,
                mix_rate,
                inner_steps,
                outer_iters,
                beta_start,
                beta_end,
                ..
            } => {
                let cfg = SoftQConfig {
                    beta_schedule: linear(*beta_start, *beta_end),
                    inner_steps: *inner_steps,
                    mix_rate: *mix_rate,
                    outer_iters: *outer_iters,
                    ..SoftQConfig::discounted(*gamma)
                };
                cfg.validate()?;
                Method::SoftQ(cfg)
            }
            MethodConfig::SoftQDifferential {
                mix_rate,
                inner_steps,
                outer_iters,
                beta_start,
                beta_end,
                ..
            } => {
                let cfg = SoftQConfig {
                    beta_schedule: linear(*beta_start, *beta_end),
                    inner_steps: *inner_steps,
                    mix_rate: *mix_rate,
                    outer_iters: *outer_iters,
                    ..SoftQConfig::differential()
                };
                cfg.validate()?;
                Method::SoftQ(cfg)
            }
            MethodConfig::Maxent {
                outer_iters,
                beta,
                inner_steps,
                step_rule,
                ..
            } => {
                let step_rule = match step_rule.as_deref() {
                    None | Some("line_search") => StepRule::LineSearch,
                    Some("harmonic") => StepRule::Harmonic,
                    Some(other) => {
                        return Err(HarnessError::config(
                            "step_rule",
                            format!(
                                "unknown rule `{other}` (expected `line_search` or `harmonic`)"
                            ),
                        ))
                    }
                };
                let cfg = MaxEntConfig {
                    outer_iters: *outer_iters,
                    beta: *beta,
                    inner_steps: *inner_steps,
                    step_rule,
                };
                cfg.validate()?;
                Method::MaxEnt(cfg)
            }
        };
        Ok(method)
    }
}

/// Full description of a `compare` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSource,
    pub methods: Vec<MethodConfig>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Checks the invariants that serde cannot express.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::config(
                "methods",
                "at least one method is required",
            ));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config(
                "seeds",
                "at least one seed is required",
            ));
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            m.resolve()?;
            if !labels.insert(m.label()) {
                return Err(HarnessError::config(
                    "methods",
                    format!("duplicate method label `{}`", m.label()),
                ));
            }
        }
        Ok(())
    }

    /// Resolves the environment; relative paths are taken from `base`.
    pub fn grid(&self, base: &Path) -> Result<GridSpec, HarnessError> {
        match &self.env {
            EnvSource::Inline(f) => f.to_spec(),
            EnvSource::Named(s) if s == "cliffworld" => Ok(GridSpec::cliffworld()),
            EnvSource::Named(p) => load_grid(&base.join(p)),
        }
    }

    /// The experiment behind the CliffWorld comparison: EVE, discounted soft-Q for
    /// four discount factors, differential soft-Q and MaxEnt, five seeds.
    pub fn cliffworld_default(output_dir: PathBuf) -> Self {
        let mut methods = vec![MethodConfig::Eve {
            name: None,
            beta_start: 1.0,
            beta_end: None,
            inner_iters: eve_inner(),
            ppi_iters: eve_ppi(),
            tol: eve_tol(),
            ppi_tol: eve_ppi_tol(),
            log_space: false,
        }];
        for gamma in [0.8, 0.9, 0.95, 0.99] {
            methods.push(MethodConfig::SoftQDiscounted {
                name: None,
                gamma,
                mix_rate: mix_discounted(),
                inner_steps: inner_steps(),
                outer_iters: outer_iters(),
                beta_start: 1.0,
                beta_end: 10.0,
            });
        }
        methods.push(MethodConfig::SoftQDifferential {
            name: None,
            mix_rate: mix_differential(),
            inner_steps: inner_steps(),
            outer_iters: outer_iters(),
            beta_start: 1.0,
            beta_end: 10.0,
        });
        methods.push(MethodConfig::Maxent {
            name: None,
            outer_iters: outer_iters(),
            beta: maxent_beta(),
            inner_steps: inner_steps(),
            step_rule: None,
        });
        ExperimentConfig {
            env: EnvSource::Named("cliffworld".into()),
            methods,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir,
        }
    }
}

/// Reads and validates an experiment file.
pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))?;
    cfg.validate()?;
    Ok(cfg)
}
