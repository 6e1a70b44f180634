//! Feedback strategies synthesized from solved value frames, closed-loop
//! simulation, and the discrete outcome functional used to validate them.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{Actions, GameModel, ProblemSpec};
use crate::grid::{GridError, ScalarField, MAX_DIM};
use crate::scene::Scene;
use crate::solver::SolveResult;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("start state {0:?} lies outside the grid")]
    OutsideGrid(Vec<f64>),
    #[error("start time {t0} outside [{min}, {max})")]
    BadStartTime { t0: f64, min: f64, max: f64 },
    #[error("state has {got} components, expected {expected}")]
    StateDimension { got: usize, expected: usize },
    #[error("invalid simulation step {0}")]
    BadStep(f64),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Value and gradient between stored frames: central differences at the
/// nodes, multilinear interpolation in space, linear interpolation in time.
pub struct ValueLookup<'a> {
    result: &'a SolveResult,
    /// `gradients[frame][dim]`
    gradients: Vec<Vec<ScalarField>>,
}

impl<'a> ValueLookup<'a> {
    pub fn new(result: &'a SolveResult) -> Self {
        let gradients = result
            .frames
            .par_iter()
            .map(|f| (0..f.ndim()).map(|d| central_difference(f, d)).collect())
            .collect();
        ValueLookup { result, gradients }
    }

    pub fn result(&self) -> &SolveResult {
        self.result
    }

    pub fn ndim(&self) -> usize {
        self.result.grid.ndim()
    }

    /// Earliest and latest stored times.
    pub fn time_range(&self) -> (f64, f64) {
        let f = &self.result.frames;
        (f.last().unwrap().time(), f[0].time())
    }

    /// Bracketing frames `(k, k + 1)` and the weight of frame `k + 1`.
    fn bracket(&self, t: f64) -> (usize, f64) {
        let frames = &self.result.frames;
        if frames.len() == 1 {
            return (0, 0.0);
        }
        let last = frames.len() - 2;
        let k = (0..=last)
            .find(|&k| t >= frames[k + 1].time())
            .unwrap_or(last);
        let (ta, tb) = (frames[k].time(), frames[k + 1].time());
        (k, ((ta - t) / (ta - tb)).clamp(0.0, 1.0))
    }

    fn clamp(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let grid = &self.result.grid;
        let mut out = [0.0; MAX_DIM];
        for d in 0..grid.ndim() {
            out[d] = x[d].clamp(grid.mins()[d], grid.maxs()[d]);
        }
        out
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<f64, StrategyError> {
        let frames = &self.result.frames;
        let (k, w) = self.bracket(t);
        let a = frames[k].interpolate(x)?;
        if w == 0.0 {
            return Ok(a);
        }
        Ok((1.0 - w) * a + w * frames[k + 1].interpolate(x)?)
    }

    /// Gradient at `x` (projected onto the grid box) and time `t`.
    pub fn gradient(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let n = self.ndim();
        let xc = self.clamp(x);
        let (k, w) = self.bracket(t);
        for d in 0..n {
            let a = self.gradients[k][d].interpolate(&xc[..n]).unwrap();
            out[d] = if w == 0.0 {
                a
            } else {
                (1.0 - w) * a + w * self.gradients[k + 1][d].interpolate(&xc[..n]).unwrap()
            };
        }
    }
}

fn central_difference(field: &ScalarField, dim: usize) -> ScalarField {
    let grid = field.grid();
    let stride = grid.strides()[dim];
    let n = grid.counts()[dim];
    let h = grid.spacing()[dim];
    let v = field.values();
    let out = (0..v.len())
        .map(|flat| {
            let pos = (flat / stride) % n;
            if pos == 0 {
                (v[flat + stride] - v[flat]) / h
            } else if pos == n - 1 {
                (v[flat] - v[flat - stride]) / h
            } else {
                (v[flat + stride] - v[flat - stride]) / (2.0 * h)
            }
        })
        .collect();
    ScalarField::from_parts(grid.clone(), out, field.time())
}

/// Piecewise-constant open-loop control: `values[k]` is applied on
/// `[start + k * period, start + (k + 1) * period)`; the last value is held.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub start: f64,
    pub period: f64,
    pub values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn constant(value: Vec<f64>) -> Self {
        ControlSignal {
            start: 0.0,
            period: f64::INFINITY,
            values: vec![value],
        }
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let k = ((t - self.start) / self.period).floor().max(0.0) as usize;
        &self.values[k.min(self.values.len() - 1)]
    }

    /// Uniform samples from the unit ball of dimension `dim`.
    pub fn random_ball<R: Rng>(rng: &mut R, dim: usize, start: f64, end: f64, period: f64) -> Self {
        let count = (((end - start) / period).ceil() as usize).max(1);
        let values = (0..count)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                if v.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
                    break v;
                }
            })
            .collect();
        ControlSignal { start, period, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Policy {
    /// Feedback from the value gradient.
    Optimal,
    Signal(ControlSignal),
    /// Zero action (only meaningful for the defender).
    Idle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Integration step; defaults to `min spacing / (2 * speed bound)`.
    pub dt: Option<f64>,
    pub attacker: Policy,
    pub defender: Policy,
    /// Keep integrating after the outcome is decided, so the outcome
    /// functional sees the whole horizon.
    pub run_to_horizon: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: None,
            attacker: Policy::Optimal,
            defender: Policy::Optimal,
            run_to_horizon: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    ReachedTarget { time: f64 },
    ConstraintViolated { time: f64 },
    Expired,
}

impl Outcome {
    pub fn is_win(&self) -> bool {
        matches!(self, Outcome::ReachedTarget { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub attacker_actions: Vec<Vec<f64>>,
    pub defender_actions: Vec<Vec<f64>>,
    pub l_values: Vec<f64>,
    pub g_values: Vec<f64>,
    pub outcome: Outcome,
    /// Set when the state visited points outside the grid box.
    pub left_domain: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `time,x1..xn,a1..am,b1..bk,l,g,runmax_g`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.attacker_actions.first().map_or(0, Vec::len);
        let k = self.defender_actions.first().map_or(0, Vec::len);
        let mut header = vec!["time".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("a{i}")));
        header.extend((1..=k).map(|i| format!("b{i}")));
        header.extend(["l", "g", "runmax_g"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        let mut runmax = f64::NEG_INFINITY;
        for i in 0..self.len() {
            runmax = runmax.max(self.g_values[i]);
            let mut row = vec![self.times[i]];
            row.extend(&self.states[i]);
            row.extend(&self.attacker_actions[i]);
            row.extend(&self.defender_actions[i]);
            row.extend([self.l_values[i], self.g_values[i], runmax]);
            let row: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Default simulation step `min spacing / (2 * speed bound)`.
pub fn default_step(spec: &ProblemSpec, result: &SolveResult) -> f64 {
    let speed = spec.model.speed_bound().max(1e-12);
    result.grid.min_spacing() / (2.0 * speed)
}

fn actions_at(model: &GameModel, lookup: &ValueLookup, opts: &SimOptions, x: &[f64], t: f64) -> Actions {
    let n = x.len();
    let needs_gradient = opts.attacker == Policy::Optimal || opts.defender == Policy::Optimal;
    let optimal = needs_gradient.then(|| {
        let mut p = [0.0; MAX_DIM];
        lookup.gradient(x, t, &mut p[..n]);
        model.optimal_actions(&p[..n], x, t)
    });
    let attacker = match &opts.attacker {
        Policy::Optimal => optimal.as_ref().unwrap().attacker.clone(),
        Policy::Signal(s) => s.at(t).to_vec(),
        Policy::Idle => vec![0.0; model.attacker_dim()],
    };
    let defender = match &opts.defender {
        Policy::Optimal => optimal.as_ref().unwrap().defender.clone(),
        Policy::Signal(s) => s.at(t).to_vec(),
        Policy::Idle => vec![0.0; model.defender_dim()],
    };
    Actions { attacker, defender }
}

/// Integrates the game forward from `(x0, t0)` with RK4, holding both
/// players' actions over each step, until the target is reached, the
/// constraint is violated, or the horizon. Outside the grid the value
/// gradient is taken at the nearest grid point.
pub fn simulate_closed_loop(
    spec: &ProblemSpec,
    lookup: &ValueLookup,
    x0: &[f64],
    t0: f64,
    opts: &SimOptions,
) -> Result<Trajectory, StrategyError> {
    let model = &spec.model;
    let n = model.state_dim();
    if x0.len() != n {
        return Err(StrategyError::StateDimension {
            got: x0.len(),
            expected: n,
        });
    }
    let grid = &lookup.result().grid;
    if !grid.contains(x0) {
        return Err(StrategyError::OutsideGrid(x0.to_vec()));
    }
    let (t_min, horizon) = lookup.time_range();
    if !(t0 >= t_min && t0 < horizon) {
        return Err(StrategyError::BadStartTime {
            t0,
            min: t_min,
            max: horizon,
        });
    }
    let dt = opts.dt.unwrap_or_else(|| default_step(spec, lookup.result()));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StrategyError::BadStep(dt));
    }

    let l_at = |x: &[f64], t: f64| spec.l_scene.eval(x, t);
    let g_at = |x: &[f64], t: f64| spec.g_scene.as_ref().map_or(f64::NEG_INFINITY, |g| g.eval(x, t));

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        attacker_actions: Vec::new(),
        defender_actions: Vec::new(),
        l_values: Vec::new(),
        g_values: Vec::new(),
        outcome: Outcome::Expired,
        left_domain: false,
    };
    let mut decided = false;
    let mut x = x0.to_vec();
    let mut t = t0;
    loop {
        let (l, g) = (l_at(&x, t), g_at(&x, t));
        let actions = actions_at(model, lookup, opts, &x, t);
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.attacker_actions.push(actions.attacker.clone());
        traj.defender_actions.push(actions.defender.clone());
        traj.l_values.push(l);
        traj.g_values.push(g);

        if !decided {
            if g > 0.0 {
                traj.outcome = Outcome::ConstraintViolated { time: t };
                decided = true;
            } else if l <= 0.0 {
                traj.outcome = Outcome::ReachedTarget { time: t };
                decided = true;
            }
        }
        traj.left_domain |= !grid.contains(&x);
        if t >= horizon || (decided && !opts.run_to_horizon) {
            break;
        }

        let h = dt.min(horizon - t);
        x = rk4(model, &x, t, h, &actions);
        // land exactly on the horizon
        t = if horizon - (t + h) <= 1e-12 * horizon { horizon } else { t + h };
    }
    Ok(traj)
}

fn rk4(model: &GameModel, x: &[f64], t: f64, h: f64, actions: &Actions) -> Vec<f64> {
    let n = x.len();
    let f = |y: &[f64], s: f64| {
        let mut out = vec![0.0; n];
        model.dynamics(y, actions, s, &mut out);
        out
    };
    let axpy = |a: &[f64], k: &[f64], c: f64| a.iter().zip(k).map(|(a, k)| a + c * k).collect::<Vec<_>>();
    let k1 = f(x, t);
    let k2 = f(&axpy(x, &k1, 0.5 * h), t + 0.5 * h);
    let k3 = f(&axpy(x, &k2, 0.5 * h), t + 0.5 * h);
    let k4 = f(&axpy(x, &k3, h), t + h);
    (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Discrete outcome `min_k max(l_k, max_{j <= k} g_j)` over the samples.
pub fn outcome_functional(traj: &Trajectory, l_scene: &Scene, g_scene: Option<&Scene>) -> Result<f64, StrategyError> {
    if traj.is_empty() {
        return Err(StrategyError::EmptyTrajectory);
    }
    let mut runmax = f64::NEG_INFINITY;
    let mut best = f64::INFINITY;
    for (x, &t) in traj.states.iter().zip(&traj.times) {
        let g = g_scene.map_or(f64::NEG_INFINITY, |g| g.eval(x, t));
        let next = runmax.max(g);
        debug_assert!(next >= runmax);
        runmax = next;
        best = best.min(l_scene.eval(x, t).max(runmax));
    }
    Ok(best)
}

/// Rejection-samples `count` states in the grid box whose value at `t`
/// satisfies `keep`, giving up after `max_tries` draws.
pub fn sample_starts<R: Rng>(
    lookup: &ValueLookup,
    t: f64,
    count: usize,
    max_tries: usize,
    rng: &mut R,
    keep: impl Fn(f64) -> bool,
) -> Vec<Vec<f64>> {
    let grid = &lookup.result().grid;
    let mut out = Vec::with_capacity(count);
    for _ in 0..max_tries {
        if out.len() == count {
            break;
        }
        let x: Vec<f64> = (0..grid.ndim())
            .map(|d| rng.gen_range(grid.mins()[d]..=grid.maxs()[d]))
            .collect();
        if lookup.value(&x, t).map_or(false, &keep) {
            out.push(x);
        }
    }
    out
}

/// Simulates every start in parallel with the same options.
pub fn simulate_many(
    spec: &ProblemSpec,
    lookup: &ValueLookup,
    starts: &[Vec<f64>],
    t0: f64,
    opts: &SimOptions,
) -> Result<Vec<Trajectory>, StrategyError> {
    starts
        .par_iter()
        .map(|x| simulate_closed_loop(spec, lookup, x, t0, opts))
        .collect()
}
