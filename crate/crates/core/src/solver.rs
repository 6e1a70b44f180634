//! Backward-time solution of the double-obstacle variational inequality:
//! integrate the Hamiltonian term, then clamp against the target and
//! constraint functions after every full integrator step.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::GameModel;
use crate::grid::{Grid, GridError, ScalarField, MAX_DIM};
use crate::numerics::{
    cfl_timestep, dissipation_bounds, integrate_step, one_sided, stencil7, Hamiltonian, NumericsError,
    SpatialScheme, TimeIntegrator, DEFAULT_CFL,
};
use crate::scene::{Scene, SceneError};

/// Nodes per parallel work unit.
const CHUNK: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("invalid solve configuration: {0}")]
    Config(String),
    #[error("reach_avoid mode needs a constraint scene")]
    MissingConstraint,
    #[error("non-finite value {value} at node {node} while stepping to t = {time}")]
    NonFinite { time: f64, node: usize, value: f64 },
    #[error("time step collapsed to {dt} at t = {time}")]
    ZeroStep { time: f64, dt: f64 },
    #[error("model has {model} state dimensions but the grid has {grid}")]
    DimensionMismatch { model: usize, grid: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accuracy {
    /// First-order upwind differences with forward Euler.
    Low,
    /// WENO5 with third-order TVD Runge-Kutta.
    #[default]
    High,
}

impl Accuracy {
    pub fn scheme(self) -> (SpatialScheme, TimeIntegrator) {
        match self {
            Accuracy::Low => (SpatialScheme::Upwind1, TimeIntegrator::Euler),
            Accuracy::High => (SpatialScheme::Weno5, TimeIntegrator::TvdRk3),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    #[default]
    ReachAvoid,
    /// No constraint: the lower clamp is dropped (`g = -inf`).
    ReachOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub horizon: f64,
    /// Strictly decreasing, from `horizon` down to 0.
    pub frame_times: Vec<f64>,
    #[serde(default = "default_cfl")]
    pub cfl_factor: f64,
    #[serde(default)]
    pub accuracy: Accuracy,
    #[serde(default)]
    pub mode: SolveMode,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

impl SolveConfig {
    pub fn new(horizon: f64, frame_times: Vec<f64>) -> Self {
        SolveConfig {
            horizon,
            frame_times,
            cfl_factor: DEFAULT_CFL,
            accuracy: Accuracy::High,
            mode: SolveMode::ReachAvoid,
        }
    }

    /// `count` equally spaced frames from `horizon` to 0.
    pub fn uniform(horizon: f64, count: usize) -> Self {
        let count = count.max(2);
        let frames = (0..count)
            .map(|k| {
                if k + 1 == count {
                    0.0
                } else {
                    horizon * (1.0 - k as f64 / (count - 1) as f64)
                }
            })
            .collect();
        SolveConfig::new(horizon, frames)
    }

    pub fn with_accuracy(mut self, accuracy: Accuracy) -> Self {
        self.accuracy = accuracy;
        self
    }

    pub fn with_mode(mut self, mode: SolveMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_cfl(mut self, cfl_factor: f64) -> Self {
        self.cfl_factor = cfl_factor;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::Config(m));
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        if !(self.cfl_factor.is_finite() && self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return bad(format!("cfl_factor {} must lie in (0, 1]", self.cfl_factor));
        }
        let f = &self.frame_times;
        if f.len() < 2 {
            return bad("at least two frame times are required".into());
        }
        if f[0] != self.horizon || *f.last().unwrap() != 0.0 {
            return bad(format!(
                "frame times must start at the horizon {} and end at 0",
                self.horizon
            ));
        }
        if f.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("frame times must be strictly decreasing".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Grid and scene setup, including the terminal condition.
    pub setup_seconds: f64,
    /// Time integration and clamping.
    pub stepping_seconds: f64,
    /// Length of every internal substep, in order.
    pub substeps: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// One field per frame time, in configuration order (each stamped with
    /// its time).
    pub frames: Vec<ScalarField>,
    pub model_id: String,
    pub grid: Arc<Grid>,
    pub config: SolveConfig,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn frame_at(&self, time: f64) -> Option<&ScalarField> {
        let tol = 1e-12 * self.config.horizon.max(1.0);
        self.frames.iter().find(|f| (f.time() - time).abs() <= tol)
    }

    /// The value at the final (earliest) time.
    pub fn initial(&self) -> &ScalarField {
        self.frames.last().expect("a solve always has frames")
    }
}

/// `max(l, g)` at the horizon.
pub fn terminal_field(l: &ScalarField, g: &ScalarField) -> Result<ScalarField, GridError> {
    pointwise(l, g, f64::max)
}

/// `max(min(v, l), g)`.
pub fn vi_clamp(v: &ScalarField, l: &ScalarField, g: &ScalarField) -> Result<ScalarField, GridError> {
    if !v.grid().same_shape(g.grid()) || !v.grid().same_shape(l.grid()) {
        return Err(GridError::GridMismatch);
    }
    let out = v
        .values()
        .iter()
        .zip(l.values())
        .zip(g.values())
        .map(|((v, l), g)| v.min(*l).max(*g))
        .collect();
    Ok(ScalarField::from_parts(v.grid().clone(), out, v.time()))
}

fn pointwise(a: &ScalarField, b: &ScalarField, op: fn(f64, f64) -> f64) -> Result<ScalarField, GridError> {
    if !a.grid().same_shape(b.grid()) {
        return Err(GridError::GridMismatch);
    }
    let out = a.values().iter().zip(b.values()).map(|(x, y)| op(*x, *y)).collect();
    Ok(ScalarField::from_parts(a.grid().clone(), out, a.time()))
}

/// Samples a scene, reusing a single sample when the scene is static.
struct SceneCache<'a> {
    scene: &'a Scene,
    grid: Arc<Grid>,
    fixed: Option<ScalarField>,
}

impl<'a> SceneCache<'a> {
    fn new(scene: &'a Scene, grid: &Arc<Grid>) -> Self {
        let fixed = scene.is_static().then(|| scene.sample(grid, 0.0));
        SceneCache {
            scene,
            grid: grid.clone(),
            fixed,
        }
    }

    fn at(&self, t: f64) -> ScalarField {
        match &self.fixed {
            Some(f) => f.clone().with_time(t),
            None => self.scene.sample(&self.grid, t),
        }
    }
}

/// Backward rate `dV/ds` (with `s = T - t`) at every node:
/// `H(x, p_avg, t) + 1/2 * sum_i alpha_i (D+_i - D-_i)`.
pub fn backward_rate<H: Hamiltonian + ?Sized>(
    model: &H,
    field: &ScalarField,
    alpha: &[f64],
    scheme: SpatialScheme,
) -> Vec<f64> {
    let grid = field.grid();
    let ndim = grid.ndim();
    let values = field.values();
    let t = field.time();
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut x = [0.0; MAX_DIM];
        let mut p = [0.0; MAX_DIM];
        for (k, slot) in chunk.iter_mut().enumerate() {
            let flat = c * CHUNK + k;
            grid.node_point(flat, &mut x[..ndim]);
            let mut dissipation = 0.0;
            for d in 0..ndim {
                let stride = grid.strides()[d];
                let n = grid.counts()[d];
                let pos = (flat / stride) % n;
                let s = stencil7(values, flat - pos * stride, stride, n, pos);
                let (minus, plus) = one_sided(&s, grid.spacing()[d], scheme);
                p[d] = 0.5 * (minus + plus);
                dissipation += alpha[d] * (plus - minus);
            }
            *slot = model.hamiltonian(&x[..ndim], &p[..ndim], t) + 0.5 * dissipation;
        }
    });
    out
}

/// Solves backward from `config.horizon` to 0, recording a frame at every
/// configured time. `g_scene` is ignored in reach-only mode.
pub fn solve_backward(
    model: &GameModel,
    l_scene: &Scene,
    g_scene: Option<&Scene>,
    grid: Arc<Grid>,
    config: &SolveConfig,
) -> Result<SolveResult, SolveError> {
    let setup = Instant::now();
    config.validate()?;
    let ndim = grid.ndim();
    if model.state_dim() != ndim {
        return Err(SolveError::DimensionMismatch {
            model: model.state_dim(),
            grid: ndim,
        });
    }
    l_scene.validate_for(ndim)?;
    let g_scene = match config.mode {
        SolveMode::ReachOnly => None,
        SolveMode::ReachAvoid => {
            let g = g_scene.ok_or(SolveError::MissingConstraint)?;
            g.validate_for(ndim)?;
            Some(g)
        }
    };
    let (scheme, integrator) = config.accuracy.scheme();
    let alpha = dissipation_bounds(model).0;
    let l_cache = SceneCache::new(l_scene, &grid);
    let g_cache = g_scene.map(|g| SceneCache::new(g, &grid));

    let horizon = config.horizon;
    let l_t = l_cache.at(horizon);
    let mut field = match &g_cache {
        Some(g) => terminal_field(&l_t, &g.at(horizon))?,
        None => l_t,
    };
    let mut stats = SolveStats {
        setup_seconds: setup.elapsed().as_secs_f64(),
        ..Default::default()
    };

    let stepping = Instant::now();
    let max_dt = cfl_timestep(&crate::numerics::Dissipation(alpha.clone()), &grid, config.cfl_factor);
    let mut frames = vec![field.clone()];
    let mut t = horizon;
    for &target in &config.frame_times[1..] {
        while t > target {
            let remaining = t - target;
            // land exactly on the frame instead of leaving a sliver
            let (dt, to_time) = match max_dt {
                Some(h) if h < remaining * (1.0 - 1e-9) => (h, t - h),
                _ => (remaining, target),
            };
            if !(dt > 0.0) || to_time >= t {
                return Err(SolveError::ZeroStep { time: t, dt });
            }
            let tentative = integrate_step(&field, dt, to_time, integrator, |f| {
                backward_rate(model, f, &alpha, scheme)
            })
            .map_err(|e| match e {
                NumericsError::NonFiniteRate { node, value, .. } => SolveError::NonFinite {
                    time: to_time,
                    node,
                    value,
                },
                other => SolveError::Config(other.to_string()),
            })?;
            if let Some(node) = tentative.values().iter().position(|v| !v.is_finite()) {
                return Err(SolveError::NonFinite {
                    time: to_time,
                    node,
                    value: tentative.values()[node],
                });
            }
            let l = l_cache.at(to_time);
            field = match &g_cache {
                Some(g) => vi_clamp(&tentative, &l, &g.at(to_time))?,
                None => {
                    let out = tentative.values().iter().zip(l.values()).map(|(v, l)| v.min(*l)).collect();
                    ScalarField::from_parts(grid.clone(), out, to_time)
                }
            };
            stats.substeps.push(dt);
            t = to_time;
        }
        frames.push(field.clone());
    }
    stats.stepping_seconds = stepping.elapsed().as_secs_f64();
    Ok(SolveResult {
        frames,
        model_id: model.id(),
        grid,
        config: config.clone(),
        stats,
    })
}
