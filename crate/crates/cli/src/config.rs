//! Versioned JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use reachavoid::games::{builtin_problem, ProblemSpec};
use reachavoid::numerics::DEFAULT_CFL;
use reachavoid::solver::{Accuracy, SolveConfig, SolveMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub problem: ProblemSource,
    /// Nodes per dimension; one entry broadcasts to every dimension.
    #[serde(default)]
    pub grid: Option<Vec<usize>>,
    /// Explicit frame times from the horizon down to 0.
    #[serde(default)]
    pub frame_times: Option<Vec<f64>>,
    /// Equally spaced frames, used when `frame_times` is absent.
    #[serde(default)]
    pub frame_count: Option<usize>,
    #[serde(default)]
    pub accuracy: Accuracy,
    #[serde(default = "default_cfl")]
    pub cfl_factor: f64,
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    Builtin {
        name: String,
        #[serde(default)]
        overrides: serde_json::Value,
    },
    Inline(ProblemSpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub max_mean_cells: Option<f64>,
    #[serde(default)]
    pub max_max_cells: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    #[serde(default)]
    pub native_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub augmented_grid: Option<Vec<usize>>,
    /// Game times at which the sets are compared.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Each slice pins native state coordinates, as `[dim, value]` pairs.
    #[serde(default)]
    pub slices: Option<Vec<Vec<(usize, f64)>>>,
    #[serde(default)]
    pub min_speedup: Option<f64>,
    #[serde(default)]
    pub max_cells: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Directory written by `solve`.
    #[serde(default)]
    pub solve_dir: Option<PathBuf>,
    /// Random starts drawn per value sign.
    #[serde(default)]
    pub starts: Option<usize>,
    /// Explicit start states, simulated in addition to the random ones.
    #[serde(default)]
    pub start_states: Vec<Vec<f64>>,
    /// Required `|V|` at random starts, in grid cells.
    #[serde(default)]
    pub margin_cells: Option<f64>,
    #[serde(default)]
    pub start_time: f64,
    /// Trajectory CSVs written per group.
    #[serde(default)]
    pub trajectories: Option<usize>,
    #[serde(default)]
    pub min_win_rate: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Default configuration for a built-in problem.
    pub fn builtin(name: &str) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            problem: ProblemSource::Builtin {
                name: name.to_string(),
                overrides: serde_json::Value::Null,
            },
            grid: None,
            frame_times: None,
            frame_count: None,
            accuracy: Accuracy::High,
            cfl_factor: DEFAULT_CFL,
            mode: SolveMode::ReachAvoid,
            output_dir: None,
            seed: 0,
            converge: Default::default(),
            benchmark: Default::default(),
            simulate: Default::default(),
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let spec = match &self.problem {
            ProblemSource::Builtin { name, overrides } => builtin_problem(name, overrides)?,
            ProblemSource::Inline(spec) => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn builtin_name(&self) -> Option<&str> {
        match &self.problem {
            ProblemSource::Builtin { name, .. } => Some(name),
            ProblemSource::Inline(_) => None,
        }
    }

    pub fn grid_counts(&self, ndim: usize) -> Result<Vec<usize>, CliError> {
        let default = if ndim <= 2 { 101 } else { 41 };
        expand_counts(self.grid.as_deref(), ndim, default)
    }

    pub fn solve_config(&self, spec: &ProblemSpec) -> Result<SolveConfig, CliError> {
        let frames = match (&self.frame_times, self.frame_count) {
            (Some(t), _) => t.clone(),
            (None, Some(n)) => SolveConfig::uniform(spec.horizon, n).frame_times,
            (None, None) if self.builtin_name() == Some("example1") && spec.horizon == 0.5 => {
                vec![0.5, 0.45, 0.3, 0.1, 0.05, 0.0]
            }
            (None, None) => SolveConfig::uniform(spec.horizon, 6).frame_times,
        };
        let cfg = SolveConfig {
            horizon: spec.horizon,
            frame_times: frames,
            cfl_factor: self.cfl_factor,
            accuracy: self.accuracy,
            mode: self.mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn expand_counts(counts: Option<&[usize]>, ndim: usize, default: usize) -> Result<Vec<usize>, CliError> {
    match counts {
        None => Ok(vec![default; ndim]),
        Some([n]) => Ok(vec![*n; ndim]),
        Some(c) if c.len() == ndim => Ok(c.to_vec()),
        Some(c) => Err(CliError::Config(format!(
            "grid has {} counts for a {ndim}-D problem",
            c.len()
        ))),
    }
}
