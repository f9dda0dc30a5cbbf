//! Experiment configuration: a single JSON document with inline matrices,
//! validated into runtime objects with field-path error reporting.

use serde::{Deserialize, Serialize};

use zonoreach_core::data::{LinearSystem, NonlinearSystem};
use zonoreach_core::nonlinear_reach::EpsilonMode;
use zonoreach_core::sets::Zonotope;
use zonoreach_core::{Matrix, ReachError, Vector};

use crate::benchmarks;

/// Harness-level errors, mapped to CLI exit codes (config errors exit 2,
/// rank/excitation failures exit 3, containment violations exit 4).
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] ReachError),

    #[error("containment violation: {failures} of {trials} trials escaped the computed sets")]
    ContainmentViolation { failures: usize, trials: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// CLI exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Parse(_) => 2,
            HarnessError::Core(ReachError::RankDeficient { .. }) => 3,
            HarnessError::ContainmentViolation { .. } => 4,
            _ => 1,
        }
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Nonlinear,
}

/// Inline zonotope: center vector plus row-major generator matrix (empty
/// list for a singleton).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    pub center: Vec<f64>,
    pub generators: Vec<Vec<f64>>,
}

impl SetSpec {
    pub fn to_zonotope(&self, field: &str) -> HarnessResult<Zonotope> {
        let n = self.center.len();
        let gens = if self.generators.is_empty() {
            Matrix::zeros(n, 0)
        } else {
            if self.generators.len() != n {
                return Err(HarnessError::config(
                    field,
                    format!(
                        "generator rows {} do not match center dimension {n}",
                        self.generators.len()
                    ),
                ));
            }
            let cols = self.generators[0].len();
            if self.generators.iter().any(|r| r.len() != cols) {
                return Err(HarnessError::config(field, "ragged generator rows"));
            }
            Matrix::from_fn(n, cols, |i, j| self.generators[i][j])
        };
        Zonotope::new(Vector::from_vec(self.center.clone()), gens)
            .map_err(|e| HarnessError::config(field, e.to_string()))
    }

    pub fn from_zonotope(z: &Zonotope) -> Self {
        SetSpec {
            center: z.center().iter().copied().collect(),
            generators: if z.num_generators() == 0 {
                Vec::new()
            } else {
                (0..z.dim())
                    .map(|i| (0..z.num_generators()).map(|j| z.generators()[(i, j)]).collect())
                    .collect()
            },
        }
    }
}

/// The system under study: explicit linear matrices, or a named built-in
/// nonlinear benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SystemSpec {
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    },
    Benchmark {
        name: String,
        #[serde(default)]
        params: Option<benchmarks::ReactorParams>,
    },
}

/// Constant input set, or one set per step (length must equal the horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Constant(SetSpec),
    PerStep(Vec<SetSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepsSpec {
    Uniform(usize),
    PerTrajectory(Vec<usize>),
}

/// How identification data is generated: `trajectories` rollouts of the
/// given number of transitions, starting from the initial set inflated by
/// `init_scale`, with inputs sampled from the input set(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPlan {
    pub trajectories: usize,
    pub steps: StepsSpec,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_init_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LipschitzMode {
    Neglect,
    Estimated,
    Supplied,
}

/// Covering-term policy for nonlinear runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSpec {
    pub mode: LipschitzMode,
    #[serde(default)]
    pub l_star: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
}

impl Default for LipschitzSpec {
    fn default() -> Self {
        LipschitzSpec {
            mode: LipschitzMode::Neglect,
            l_star: None,
            delta: None,
        }
    }
}

impl LipschitzSpec {
    pub fn to_epsilon_mode(&self) -> HarnessResult<EpsilonMode> {
        match self.mode {
            LipschitzMode::Neglect => Ok(EpsilonMode::Neglect),
            LipschitzMode::Estimated => Ok(EpsilonMode::Estimated),
            LipschitzMode::Supplied => match (self.l_star, self.delta) {
                (Some(l), Some(d)) => Ok(EpsilonMode::Supplied { l_star: l, delta: d }),
                _ => Err(HarnessError::config(
                    "lipschitz",
                    "mode \"supplied\" requires both l_star and delta",
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_trials() -> usize {
    1000
}

fn default_directions() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-7
}

impl Default for VerificationSpec {
    fn default() -> Self {
        VerificationSpec {
            trials: default_trials(),
            directions: default_directions(),
            tolerance: default_tolerance(),
        }
    }
}

fn default_max_order() -> f64 {
    20.0
}

/// A complete experiment: system, sets, horizon, data plan, seed, and
/// verification settings. One JSON document, round-trip stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    pub horizon: usize,
    #[serde(default = "default_max_order")]
    pub max_order: f64,
    pub system: SystemSpec,
    pub initial_set: SetSpec,
    pub input_set: InputSpec,
    pub noise_set: SetSpec,
    pub data_plan: DataPlan,
    #[serde(default)]
    pub lipschitz: LipschitzSpec,
    #[serde(default)]
    pub verification: VerificationSpec,
}

/// Concrete runtime system behind a config.
#[derive(Debug, Clone)]
pub enum RuntimeSystem {
    Linear(LinearSystem),
    Benchmark { name: String, system: NonlinearSystem },
}

impl RuntimeSystem {
    pub fn state_dim(&self) -> usize {
        match self {
            RuntimeSystem::Linear(s) => s.state_dim(),
            RuntimeSystem::Benchmark { system, .. } => system.state_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            RuntimeSystem::Linear(s) => s.input_dim(),
            RuntimeSystem::Benchmark { system, .. } => system.input_dim(),
        }
    }

    pub fn linear(&self) -> Option<&LinearSystem> {
        match self {
            RuntimeSystem::Linear(s) => Some(s),
            RuntimeSystem::Benchmark { .. } => None,
        }
    }

    /// Simulation view of the true system.
    pub fn as_nonlinear(&self) -> NonlinearSystem {
        match self {
            RuntimeSystem::Linear(s) => NonlinearSystem::from_linear(s),
            RuntimeSystem::Benchmark { system, .. } => system.clone(),
        }
    }
}

/// A config after validation: every referenced dimension checked, sets
/// built, input list expanded to the horizon.
#[derive(Debug, Clone)]
pub struct ValidatedExperiment {
    pub config: ExperimentConfig,
    pub system: RuntimeSystem,
    pub initial_set: Zonotope,
    /// One input set per step (constant sets are repeated).
    pub input_sets: Vec<Zonotope>,
    pub noise_set: Zonotope,
    pub steps_per_trajectory: Vec<usize>,
    pub epsilon_mode: EpsilonMode,
}

fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> HarnessResult<Matrix> {
    if rows.is_empty() {
        return Err(HarnessError::config(field, "empty matrix"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(HarnessError::config(field, "ragged matrix rows"));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> HarnessResult<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> HarnessResult<ValidatedExperiment> {
        let system = match &self.system {
            SystemSpec::Linear { a, b } => {
                let a = matrix_from_rows(a, "system.a")?;
                let b = matrix_from_rows(b, "system.b")?;
                RuntimeSystem::Linear(
                    LinearSystem::new(a, b)
                        .map_err(|e| HarnessError::config("system", e.to_string()))?,
                )
            }
            SystemSpec::Benchmark { name, params } => RuntimeSystem::Benchmark {
                name: name.clone(),
                system: benchmarks::build(name, params.as_ref())?,
            },
        };
        if self.mode == Mode::Linear && system.linear().is_none() {
            return Err(HarnessError::config(
                "mode",
                "linear mode requires an explicit linear system",
            ));
        }
        let n = system.state_dim();
        let m = system.input_dim();

        let initial_set = self.initial_set.to_zonotope("initial_set")?;
        if initial_set.dim() != n {
            return Err(HarnessError::config(
                "initial_set.center",
                format!("dimension {} does not match state dimension {n}", initial_set.dim()),
            ));
        }
        let noise_set = self.noise_set.to_zonotope("noise_set")?;
        if noise_set.dim() != n {
            return Err(HarnessError::config(
                "noise_set.center",
                format!("dimension {} does not match state dimension {n}", noise_set.dim()),
            ));
        }

        let input_sets: Vec<Zonotope> = match &self.input_set {
            InputSpec::Constant(spec) => {
                let z = spec.to_zonotope("input_set")?;
                vec![z; self.horizon.max(1)]
            }
            InputSpec::PerStep(specs) => {
                if specs.len() != self.horizon.max(1) {
                    return Err(HarnessError::config(
                        "input_set",
                        format!(
                            "per-step list has {} entries, expected {}",
                            specs.len(),
                            self.horizon.max(1)
                        ),
                    ));
                }
                specs
                    .iter()
                    .enumerate()
                    .map(|(k, s)| s.to_zonotope(&format!("input_set[{k}]")))
                    .collect::<HarnessResult<_>>()?
            }
        };
        for (k, u) in input_sets.iter().enumerate() {
            if u.dim() != m {
                return Err(HarnessError::config(
                    format!("input_set[{k}].center"),
                    format!("dimension {} does not match input dimension {m}", u.dim()),
                ));
            }
        }

        if self.max_order < 1.0 {
            return Err(HarnessError::config("max_order", "must be >= 1"));
        }
        if self.data_plan.trajectories == 0 {
            return Err(HarnessError::config("data_plan.trajectories", "must be >= 1"));
        }
        if !(self.data_plan.init_scale.is_finite() && self.data_plan.init_scale > 0.0) {
            return Err(HarnessError::config("data_plan.init_scale", "must be > 0"));
        }
        let steps_per_trajectory = match &self.data_plan.steps {
            StepsSpec::Uniform(s) => vec![*s; self.data_plan.trajectories],
            StepsSpec::PerTrajectory(list) => {
                if list.len() != self.data_plan.trajectories {
                    return Err(HarnessError::config(
                        "data_plan.steps",
                        format!(
                            "per-trajectory list has {} entries, expected {}",
                            list.len(),
                            self.data_plan.trajectories
                        ),
                    ));
                }
                list.clone()
            }
        };
        if steps_per_trajectory.iter().any(|&s| s == 0) {
            return Err(HarnessError::config("data_plan.steps", "every trajectory needs >= 1 step"));
        }

        let epsilon_mode = self.lipschitz.to_epsilon_mode()?;
        if self.verification.tolerance < 0.0 {
            return Err(HarnessError::config("verification.tolerance", "must be >= 0"));
        }

        Ok(ValidatedExperiment {
            config: self.clone(),
            system,
            initial_set,
            input_sets,
            noise_set,
            steps_per_trajectory,
            epsilon_mode,
        })
    }
}
