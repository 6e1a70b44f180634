//! Spatial derivative approximations, the Lax-Friedrichs numerical
//! Hamiltonian, CFL step selection and explicit time integrators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, ScalarField};

/// Regularization of the WENO smoothness weights.
pub const WENO_EPSILON: f64 = 1e-6;

/// Default CFL safety factor.
pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("dimension {dim} out of range for a {ndim}-D field")]
    InvalidDim { dim: usize, ndim: usize },
    #[error("non-finite rate {value} at node {node} in stage {stage}")]
    NonFiniteRate {
        stage: usize,
        node: usize,
        value: f64,
    },
    #[error("invalid time step {0}")]
    BadStep(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialScheme {
    Upwind1,
    Weno5,
}

impl SpatialScheme {
    /// Ghost nodes needed on each side of a line.
    pub fn ghost_width(self) -> usize {
        match self {
            SpatialScheme::Upwind1 => 1,
            SpatialScheme::Weno5 => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeIntegrator {
    Euler,
    TvdRk3,
}

/// A Hamiltonian `H(x, p, t)` with globally bounded gradient in `p`.
pub trait Hamiltonian: Sync {
    fn ndim(&self) -> usize;

    fn hamiltonian(&self, x: &[f64], p: &[f64], t: f64) -> f64;

    /// Per-dimension bounds on `|dH/dp_i|`, valid for every `p`.
    fn gradient_bounds(&self) -> Vec<f64>;
}

/// Per-dimension dissipation coefficients of the Lax-Friedrichs scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipation(pub Vec<f64>);

impl Dissipation {
    pub fn alpha(&self) -> &[f64] {
        &self.0
    }
}

pub fn dissipation_bounds<H: Hamiltonian + ?Sized>(model: &H) -> Dissipation {
    Dissipation(model.gradient_bounds())
}

/// Left- and right-biased approximations of one partial derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivPair {
    pub minus: ScalarField,
    pub plus: ScalarField,
}

/// Seven values `phi[i-3..=i+3]` around position `pos` of the line that
/// starts at flat index `start` with the given stride and length, using
/// linear extrapolation past either end.
#[inline(always)]
pub(crate) fn stencil7(values: &[f64], start: usize, stride: usize, n: usize, pos: usize) -> [f64; 7] {
    let mut out = [0.0; 7];
    if pos >= 3 && pos + 3 < n {
        let base = start + (pos - 3) * stride;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = values[base + k * stride];
        }
        return out;
    }
    let at = |k: usize| values[start + k * stride];
    let (first, second) = (at(0), at(1));
    let (last, before_last) = (at(n - 1), at(n - 2));
    for (k, slot) in out.iter_mut().enumerate() {
        let j = pos as isize + k as isize - 3;
        *slot = if j < 0 {
            first + j as f64 * (second - first)
        } else if j >= n as isize {
            last + (j - n as isize + 1) as f64 * (last - before_last)
        } else {
            at(j as usize)
        };
    }
    out
}

/// One-sided derivatives `(D-, D+)` from a seven-value stencil centered
/// on the node.
#[inline(always)]
pub(crate) fn one_sided(s: &[f64; 7], dx: f64, scheme: SpatialScheme) -> (f64, f64) {
    match scheme {
        SpatialScheme::Upwind1 => ((s[3] - s[2]) / dx, (s[4] - s[3]) / dx),
        SpatialScheme::Weno5 => {
            let d = [
                (s[1] - s[0]) / dx,
                (s[2] - s[1]) / dx,
                (s[3] - s[2]) / dx,
                (s[4] - s[3]) / dx,
                (s[5] - s[4]) / dx,
                (s[6] - s[5]) / dx,
            ];
            let minus = weno5(d[0], d[1], d[2], d[3], d[4]);
            let plus = weno5(d[5], d[4], d[3], d[2], d[1]);
            (minus, plus)
        }
    }
}

/// Fifth-order weighted combination of the three third-order candidate
/// derivatives built from consecutive divided differences `v1..v5`
/// (Jiang-Shu smoothness indicators).
#[inline(always)]
pub fn weno5(v1: f64, v2: f64, v3: f64, v4: f64, v5: f64) -> f64 {
    let c1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0;
    let c2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0;
    let c3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0;

    let s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3).powi(2) + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3).powi(2);
    let s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4).powi(2) + 0.25 * (v2 - v4).powi(2);
    let s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5).powi(2) + 0.25 * (3.0 * v3 - 4.0 * v4 + v5).powi(2);

    let a1 = 0.1 / (WENO_EPSILON + s1).powi(2);
    let a2 = 0.6 / (WENO_EPSILON + s2).powi(2);
    let a3 = 0.3 / (WENO_EPSILON + s3).powi(2);
    (a1 * c1 + a2 * c2 + a3 * c3) / (a1 + a2 + a3)
}

/// One-sided approximations of `dV/dx_dim` at every node.
pub fn spatial_derivs(
    field: &ScalarField,
    dim: usize,
    scheme: SpatialScheme,
) -> Result<DerivPair, NumericsError> {
    let grid = field.grid();
    if dim >= grid.ndim() {
        return Err(NumericsError::InvalidDim {
            dim,
            ndim: grid.ndim(),
        });
    }
    let n = grid.counts()[dim];
    let stride = grid.strides()[dim];
    let dx = grid.spacing()[dim];
    let values = field.values();
    let mut minus = vec![0.0; values.len()];
    let mut plus = vec![0.0; values.len()];
    for flat in 0..values.len() {
        let pos = (flat / stride) % n;
        let start = flat - pos * stride;
        let s = stencil7(values, start, stride, n, pos);
        let (m, p) = one_sided(&s, dx, scheme);
        minus[flat] = m;
        plus[flat] = p;
    }
    Ok(DerivPair {
        minus: ScalarField::from_parts(grid.clone(), minus, field.time()),
        plus: ScalarField::from_parts(grid.clone(), plus, field.time()),
    })
}

/// Lax-Friedrichs numerical Hamiltonian
/// `H(x, (D- + D+)/2, t) - 1/2 * sum_i alpha_i (D+_i - D-_i)`.
pub fn lax_friedrichs<H: Hamiltonian + ?Sized>(
    model: &H,
    x: &[f64],
    t: f64,
    d_minus: &[f64],
    d_plus: &[f64],
    alpha: &[f64],
) -> f64 {
    let ndim = d_minus.len();
    let mut p = [0.0; crate::grid::MAX_DIM];
    let mut dissipation = 0.0;
    for i in 0..ndim {
        p[i] = 0.5 * (d_minus[i] + d_plus[i]);
        dissipation += alpha[i] * (d_plus[i] - d_minus[i]);
    }
    model.hamiltonian(x, &p[..ndim], t) - 0.5 * dissipation
}

/// Largest stable explicit step `factor / sum_i(alpha_i / dx_i)`, or `None`
/// when every coefficient is zero and any step is stable.
pub fn cfl_timestep(alpha: &Dissipation, grid: &Grid, factor: f64) -> Option<f64> {
    let rate: f64 = alpha
        .alpha()
        .iter()
        .zip(grid.spacing())
        .map(|(a, dx)| a / dx)
        .sum();
    (rate > 0.0).then(|| factor / rate)
}

/// Advances `field` by one step of size `dt` of `dV/ds = rhs(V)`, stamping
/// the result with `to_time`. Intermediate stage fields carry the stage
/// times so `rhs` may depend on time.
pub fn integrate_step<F>(
    field: &ScalarField,
    dt: f64,
    to_time: f64,
    integrator: TimeIntegrator,
    mut rhs: F,
) -> Result<ScalarField, NumericsError>
where
    F: FnMut(&ScalarField) -> Vec<f64>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NumericsError::BadStep(dt));
    }
    let grid = field.grid().clone();
    let v0 = field.values();
    let mut eval = |f: &ScalarField, stage: usize| -> Result<Vec<f64>, NumericsError> {
        let r = rhs(f);
        debug_assert_eq!(r.len(), f.values().len());
        match r.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(NumericsError::NonFiniteRate {
                stage,
                node,
                value: r[node],
            }),
            None => Ok(r),
        }
    };
    match integrator {
        TimeIntegrator::Euler => {
            let r = eval(field, 1)?;
            let out = v0.iter().zip(&r).map(|(v, r)| v + dt * r).collect();
            Ok(ScalarField::from_parts(grid, out, to_time))
        }
        TimeIntegrator::TvdRk3 => {
            let r0 = eval(field, 1)?;
            let u1: Vec<f64> = v0.iter().zip(&r0).map(|(v, r)| v + dt * r).collect();
            let u1 = ScalarField::from_parts(grid.clone(), u1, to_time);
            let r1 = eval(&u1, 2)?;
            // Shu-Osher stages written as increments on V so that a zero
            // rate leaves V bit-identical
            let u2: Vec<f64> = v0
                .iter()
                .zip(&r0)
                .zip(&r1)
                .map(|((v, a), b)| v + 0.25 * dt * (a + b))
                .collect();
            let mid = 0.5 * (field.time() + to_time);
            let u2 = ScalarField::from_parts(grid.clone(), u2, mid);
            let r2 = eval(&u2, 3)?;
            let out = v0
                .iter()
                .zip(r0.iter().zip(&r1))
                .zip(&r2)
                .map(|((v, (a, b)), c)| v + dt / 6.0 * (a + b + 4.0 * c))
                .collect();
            Ok(ScalarField::from_parts(grid, out, to_time))
        }
    }
}
