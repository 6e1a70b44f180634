//! Time-varying implicit functions built from moving shape primitives.
//!
//! A scene value is negative inside its set, positive outside and zero on
//! the boundary. Union is a pointwise minimum, intersection a pointwise
//! maximum and complement a negation. Primitive centers and sizes are
//! affine in time; sizes are clamped at zero so a set may shrink to empty.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, ScalarField, MAX_DIM};

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("{context}: expected {expected} entries, found {found}")]
    Length {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("scene expects state dimension {scene}, problem has {state}")]
    StateDimension { scene: usize, state: usize },
    #[error("{0} has no children")]
    Empty(&'static str),
    #[error("halfspace normal has zero length")]
    ZeroNormal,
    #[error("non-finite parameter in {0}")]
    NonFinite(&'static str),
}

/// Optional linear map from state to shape coordinates (row-major rows).
/// Lets a planar shape live in a higher-dimensional joint state, or a shape
/// be centered on a difference of coordinates.
pub type Projection = Vec<Vec<f64>>;

/// Axis-aligned box in infinity-norm form:
/// `max_i(|z_i - c_i(t)| - h_i(t))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxShape {
    pub center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub velocity: Vec<f64>,
    pub half_widths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub growth: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
}

/// Euclidean ball: `|z - c(t)| - r(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallShape {
    pub center: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub velocity: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub growth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
}

/// Halfspace `{n . z <= offset(t)}` with unit-normalized `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceShape {
    pub normal: Vec<f64>,
    pub offset: f64,
    #[serde(default)]
    pub offset_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
}

/// Expression tree of a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Node {
    Box(BoxShape),
    Ball(BallShape),
    Halfspace(HalfspaceShape),
    Union { children: Vec<Node> },
    Intersect { children: Vec<Node> },
    Complement { child: Box<Node> },
    /// Same value everywhere; `-1e9` acts as "no constraint".
    Constant { value: f64 },
    /// Static function of an augmented state `(x, s)` whose last
    /// coordinate stands in for time: evaluates `child` at `(x[..n], x[n])`.
    TimeLifted { state_dims: usize, child: Box<Node> },
}

/// A time-varying implicit function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scene {
    root: Node,
}

impl Node {
    pub fn moving_box(center: &[f64], velocity: &[f64], half_widths: &[f64], growth: &[f64]) -> Node {
        Node::Box(BoxShape {
            center: center.to_vec(),
            velocity: velocity.to_vec(),
            half_widths: half_widths.to_vec(),
            growth: growth.to_vec(),
            projection: None,
        })
    }

    pub fn fixed_box(center: &[f64], half_widths: &[f64]) -> Node {
        Node::moving_box(center, &[], half_widths, &[])
    }

    pub fn ball(center: &[f64], radius: f64) -> Node {
        Node::Ball(BallShape {
            center: center.to_vec(),
            velocity: Vec::new(),
            radius,
            growth: 0.0,
            projection: None,
        })
    }

    pub fn halfspace(normal: &[f64], offset: f64) -> Node {
        Node::Halfspace(HalfspaceShape {
            normal: normal.to_vec(),
            offset,
            offset_rate: 0.0,
            projection: None,
        })
    }

    /// Attaches a projection to a primitive; composite nodes are returned
    /// unchanged.
    pub fn projected(mut self, projection: Projection) -> Node {
        match &mut self {
            Node::Box(s) => s.projection = Some(projection),
            Node::Ball(s) => s.projection = Some(projection),
            Node::Halfspace(s) => s.projection = Some(projection),
            _ => {}
        }
        self
    }

    pub fn complement(self) -> Node {
        Node::Complement {
            child: Box::new(self),
        }
    }

    fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Node::Box(s) => {
                let mut z = [0.0; MAX_DIM];
                let z = project(s.projection.as_ref(), x, &mut z);
                let mut value = f64::NEG_INFINITY;
                for i in 0..z.len() {
                    let c = s.center[i] + component(&s.velocity, i) * t;
                    let h = (s.half_widths[i] + component(&s.growth, i) * t).max(0.0);
                    value = value.max((z[i] - c).abs() - h);
                }
                value
            }
            Node::Ball(s) => {
                let mut z = [0.0; MAX_DIM];
                let z = project(s.projection.as_ref(), x, &mut z);
                let mut sq = 0.0;
                for i in 0..z.len() {
                    let d = z[i] - (s.center[i] + component(&s.velocity, i) * t);
                    sq += d * d;
                }
                sq.sqrt() - (s.radius + s.growth * t).max(0.0)
            }
            Node::Halfspace(s) => {
                let mut z = [0.0; MAX_DIM];
                let z = project(s.projection.as_ref(), x, &mut z);
                let norm = s.normal.iter().map(|n| n * n).sum::<f64>().sqrt();
                let dot: f64 = s.normal.iter().zip(z.iter()).map(|(n, z)| n * z).sum();
                dot / norm - (s.offset + s.offset_rate * t)
            }
            Node::Union { children } => children
                .iter()
                .map(|c| c.eval(x, t))
                .fold(f64::INFINITY, f64::min),
            Node::Intersect { children } => children
                .iter()
                .map(|c| c.eval(x, t))
                .fold(f64::NEG_INFINITY, f64::max),
            Node::Complement { child } => -child.eval(x, t),
            Node::Constant { value } => *value,
            Node::TimeLifted { state_dims, child } => child.eval(&x[..*state_dims], x[*state_dims]),
        }
    }

    fn is_static(&self) -> bool {
        match self {
            Node::Box(s) => is_zero(&s.velocity) && is_zero(&s.growth),
            Node::Ball(s) => is_zero(&s.velocity) && s.growth == 0.0,
            Node::Halfspace(s) => s.offset_rate == 0.0,
            Node::Union { children } | Node::Intersect { children } => {
                children.iter().all(Node::is_static)
            }
            Node::Complement { child } => child.is_static(),
            Node::Constant { .. } | Node::TimeLifted { .. } => true,
        }
    }

    /// Joint (state, time) Lipschitz bound in the Euclidean norm.
    fn lipschitz(&self) -> f64 {
        match self {
            Node::Box(s) => {
                let a = projection_norm(s.projection.as_ref());
                let b = max_abs(&s.velocity) + max_abs(&s.growth);
                a.hypot(b)
            }
            Node::Ball(s) => {
                let a = projection_norm(s.projection.as_ref());
                let v = s.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
                a.hypot(v + s.growth.abs())
            }
            Node::Halfspace(s) => projection_norm(s.projection.as_ref()).hypot(s.offset_rate),
            Node::Union { children } | Node::Intersect { children } => {
                children.iter().map(Node::lipschitz).fold(0.0, f64::max)
            }
            Node::Complement { child } => child.lipschitz(),
            Node::Constant { .. } => 0.0,
            // time becomes a state coordinate: the joint bound carries over
            Node::TimeLifted { child, .. } => child.lipschitz(),
        }
    }

    /// Checks internal consistency; returns the state dimension the node
    /// consumes, if it constrains one.
    fn check(&self) -> Result<Option<usize>, SceneError> {
        match self {
            Node::Box(s) => {
                let m = s.center.len();
                expect_len("box half_widths", m, s.half_widths.len())?;
                expect_optional_len("box velocity", m, &s.velocity)?;
                expect_optional_len("box growth", m, &s.growth)?;
                finite("box", [&s.center, &s.half_widths, &s.velocity, &s.growth])?;
                check_projection(s.projection.as_ref(), m)
            }
            Node::Ball(s) => {
                let m = s.center.len();
                expect_optional_len("ball velocity", m, &s.velocity)?;
                finite("ball", [&s.center, &s.velocity, &vec![s.radius, s.growth]])?;
                check_projection(s.projection.as_ref(), m)
            }
            Node::Halfspace(s) => {
                if s.normal.iter().all(|n| *n == 0.0) {
                    return Err(SceneError::ZeroNormal);
                }
                finite("halfspace", [&s.normal, &vec![s.offset, s.offset_rate]])?;
                check_projection(s.projection.as_ref(), s.normal.len())
            }
            Node::Union { children } | Node::Intersect { children } => {
                if children.is_empty() {
                    return Err(SceneError::Empty(if matches!(self, Node::Union { .. }) {
                        "union"
                    } else {
                        "intersect"
                    }));
                }
                let mut dim = None;
                for c in children {
                    dim = merge_dim(dim, c.check()?)?;
                }
                Ok(dim)
            }
            Node::Complement { child } => child.check(),
            Node::Constant { value } => {
                if value.is_finite() {
                    Ok(None)
                } else {
                    Err(SceneError::NonFinite("constant"))
                }
            }
            Node::TimeLifted { state_dims, child } => {
                merge_dim(Some(*state_dims), child.check()?)?;
                Ok(Some(state_dims + 1))
            }
        }
    }
}

impl Scene {
    pub fn new(root: Node) -> Result<Self, SceneError> {
        root.check()?;
        Ok(Scene { root })
    }

    /// Scene that is `value` everywhere.
    pub fn constant(value: f64) -> Self {
        Scene {
            root: Node::Constant { value },
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn union(scenes: Vec<Scene>) -> Result<Self, SceneError> {
        Scene::new(Node::Union {
            children: scenes.into_iter().map(|s| s.root).collect(),
        })
    }

    pub fn intersect(scenes: Vec<Scene>) -> Result<Self, SceneError> {
        Scene::new(Node::Intersect {
            children: scenes.into_iter().map(|s| s.root).collect(),
        })
    }

    pub fn complement(self) -> Self {
        Scene {
            root: self.root.complement(),
        }
    }

    /// Static scene over `(x, s)` with `s` standing in for time.
    pub fn time_lifted(&self, state_dims: usize) -> Self {
        Scene {
            root: Node::TimeLifted {
                state_dims,
                child: Box::new(self.root.clone()),
            },
        }
    }

    /// Value at state `x` and time `t`.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        // adding +0.0 maps -0.0 to +0.0 so sampled fields never carry signed zeros
        self.root.eval(x, t) + 0.0
    }

    pub fn is_static(&self) -> bool {
        self.root.is_static()
    }

    /// Upper bound on the Lipschitz constant in `(x, t)`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.root.lipschitz()
    }

    /// State dimension required by the scene, if any primitive fixes one.
    pub fn state_dim(&self) -> Option<usize> {
        self.root.check().ok().flatten()
    }

    /// Verifies the scene can be evaluated on `ndim`-dimensional states.
    pub fn validate_for(&self, ndim: usize) -> Result<(), SceneError> {
        match self.root.check()? {
            Some(d) if d != ndim => Err(SceneError::StateDimension {
                scene: d,
                state: ndim,
            }),
            _ => Ok(()),
        }
    }

    /// Node-wise samples at time `t`.
    pub fn sample(&self, grid: &Arc<Grid>, t: f64) -> ScalarField {
        let ndim = grid.ndim();
        let mut values = vec![0.0; grid.len()];
        let row = *grid.counts().last().unwrap();
        values
            .par_chunks_mut(row)
            .enumerate()
            .for_each(|(r, chunk)| {
                let mut x = [0.0; MAX_DIM];
                grid.node_point(r * row, &mut x);
                for (j, v) in chunk.iter_mut().enumerate() {
                    x[ndim - 1] = grid.coord(ndim - 1, j);
                    *v = self.eval(&x[..ndim], t);
                }
            });
        ScalarField::from_parts(grid.clone(), values, t)
    }
}

fn component(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(0.0)
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|c| *c == 0.0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|c| c.abs()).fold(0.0, f64::max)
}

fn project<'a>(p: Option<&Projection>, x: &'a [f64], buf: &'a mut [f64; MAX_DIM]) -> &'a [f64] {
    match p {
        None => x,
        Some(rows) => {
            for (i, row) in rows.iter().enumerate() {
                buf[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
            &buf[..rows.len()]
        }
    }
}

/// Frobenius norm, an upper bound on the operator norm.
fn projection_norm(p: Option<&Projection>) -> f64 {
    match p {
        None => 1.0,
        Some(rows) => rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt(),
    }
}

fn check_projection(p: Option<&Projection>, shape_dim: usize) -> Result<Option<usize>, SceneError> {
    if shape_dim == 0 || shape_dim > MAX_DIM {
        return Err(SceneError::Length {
            context: "shape dimension",
            expected: MAX_DIM,
            found: shape_dim,
        });
    }
    match p {
        None => Ok(Some(shape_dim)),
        Some(rows) => {
            expect_len("projection rows", shape_dim, rows.len())?;
            let cols = rows[0].len();
            for r in rows {
                expect_len("projection columns", cols, r.len())?;
                if r.iter().any(|a| !a.is_finite()) {
                    return Err(SceneError::NonFinite("projection"));
                }
            }
            Ok(Some(cols))
        }
    }
}

fn expect_len(context: &'static str, expected: usize, found: usize) -> Result<(), SceneError> {
    if expected == found {
        Ok(())
    } else {
        Err(SceneError::Length {
            context,
            expected,
            found,
        })
    }
}

fn expect_optional_len(context: &'static str, expected: usize, v: &[f64]) -> Result<(), SceneError> {
    if v.is_empty() {
        Ok(())
    } else {
        expect_len(context, expected, v.len())
    }
}

fn finite<const N: usize>(context: &'static str, parts: [&Vec<f64>; N]) -> Result<(), SceneError> {
    if parts.iter().all(|p| p.iter().all(|v| v.is_finite())) {
        Ok(())
    } else {
        Err(SceneError::NonFinite(context))
    }
}

fn merge_dim(a: Option<usize>, b: Option<usize>) -> Result<Option<usize>, SceneError> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(SceneError::StateDimension { scene: x, state: y }),
        (Some(x), _) | (_, Some(x)) => Ok(Some(x)),
        _ => Ok(None),
    }
}
