//! Zero-set extraction and comparison: marching squares, signed distance
//! reconstruction, boundary error against the analytic Example 1 curve,
//! convergence studies, and native-versus-augmented agreement.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::{augment_time, Example1Params, GameError, ProblemSpec};
use crate::grid::{Grid, GridError, ScalarField};
use crate::solver::{solve_backward, Accuracy, SolveConfig, SolveError, SolveResult};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("expected a 2-D field, got {0}-D")]
    NotPlanar(usize),
    #[error("field has no zero crossing")]
    NoZeroSet,
    #[error("no comparison points")]
    NoPoints,
    #[error("analytic boundary unavailable: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Game(#[from] GameError),
}

pub type Point = [f64; 2];

/// Line segments of a planar level set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub segments: Vec<[Point; 2]>,
    /// Largest spacing of the source grid.
    pub spacing: f64,
}

impl ContourSet {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Unsigned distance from `p` to the nearest segment.
    pub fn distance(&self, p: Point) -> f64 {
        self.segments
            .iter()
            .map(|s| point_segment_distance(p, s[0], s[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Points along every segment with gaps of at most `step`.
    pub fn sample(&self, step: f64) -> Vec<Point> {
        let mut out = Vec::new();
        for [a, b] in &self.segments {
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let k = ((len / step).ceil() as usize).max(1);
            for i in 0..=k {
                let w = i as f64 / k as f64;
                out.push([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]);
            }
        }
        out
    }

    /// CSV with header `segment_id,x1,y1,x2,y2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "segment_id,x1,y1,x2,y2")?;
        for (i, [a, b]) in self.segments.iter().enumerate() {
            writeln!(out, "{i},{},{},{},{}", a[0], a[1], b[0], b[1])?;
        }
        Ok(())
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let w = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - w * dx).hypot(p[1] - a[1] - w * dy)
}

fn planar(field: &ScalarField) -> Result<&Grid, AnalysisError> {
    match field.ndim() {
        2 => Ok(field.grid()),
        n => Err(AnalysisError::NotPlanar(n)),
    }
}

/// Marching squares with linear interpolation along cell edges. A saddle
/// cell is split according to the sign of its average value.
pub fn extract_zero_contour(field: &ScalarField, level: f64) -> Result<ContourSet, AnalysisError> {
    let grid = planar(field)?;
    let (nx, ny) = (grid.counts()[0], grid.counts()[1]);
    let v = field.values();
    let at = |i: usize, j: usize| v[i * ny + j] - level;
    let xs: Vec<f64> = (0..nx).map(|i| grid.coord(0, i)).collect();
    let ys: Vec<f64> = (0..ny).map(|j| grid.coord(1, j)).collect();

    let segments = (0..nx - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut row = Vec::new();
            for j in 0..ny - 1 {
                // corners counter-clockwise from (i, j)
                let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                let p = [[xs[i], ys[j]], [xs[i + 1], ys[j]], [xs[i + 1], ys[j + 1]], [xs[i], ys[j + 1]]];
                let inside = c.map(|c| c < 0.0);
                let code = inside.iter().enumerate().fold(0, |acc, (k, &b)| acc | ((b as u8) << k));
                if code == 0 || code == 15 {
                    continue;
                }
                // edge k joins corner k and corner k + 1
                let cross = |k: usize| {
                    let (a, b) = (k, (k + 1) % 4);
                    let w = c[a] / (c[a] - c[b]);
                    [p[a][0] + w * (p[b][0] - p[a][0]), p[a][1] + w * (p[b][1] - p[a][1])]
                };
                let crossing: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
                if crossing.len() == 2 {
                    row.push([cross(crossing[0]), cross(crossing[1])]);
                } else {
                    let center_inside = (c[0] + c[1] + c[2] + c[3]) < 0.0;
                    if center_inside == inside[0] {
                        // corners 0 and 2 are joined; cut off corners 1 and 3
                        row.push([cross(0), cross(1)]);
                        row.push([cross(2), cross(3)]);
                    } else {
                        row.push([cross(3), cross(0)]);
                        row.push([cross(1), cross(2)]);
                    }
                }
            }
            row
        })
        .filter(|[a, b]| a != b)
        .collect();
    Ok(ContourSet {
        segments,
        spacing: grid.max_spacing(),
    })
}

/// Signed distance to the zero contour at every node, negative where the
/// field is negative.
pub fn signed_distance_to_zero_set(field: &ScalarField) -> Result<ScalarField, AnalysisError> {
    let grid = planar(field)?.clone();
    let contour = extract_zero_contour(field, 0.0)?;
    if contour.is_empty() {
        return Err(AnalysisError::NoZeroSet);
    }
    let grid = Arc::new(grid);
    let out: Vec<f64> = field
        .values()
        .par_iter()
        .enumerate()
        .map(|(flat, &v)| {
            let mut x = [0.0; 2];
            grid.node_point(flat, &mut x);
            let d = contour.distance(x);
            if v < 0.0 {
                -d
            } else {
                d
            }
        })
        .collect();
    Ok(ScalarField::new(grid, out, field.time())?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mean_error: f64,
    pub max_error: f64,
    pub n_points: usize,
    pub grid_spacing: f64,
}

/// Distance from each point to the zero contour of `field`, summarized.
/// Distances are exact point-to-segment distances.
pub fn boundary_error(field: &ScalarField, points: &[Point]) -> Result<ErrorReport, AnalysisError> {
    if points.is_empty() {
        return Err(AnalysisError::NoPoints);
    }
    let contour = extract_zero_contour(field, 0.0)?;
    if contour.is_empty() {
        return Err(AnalysisError::NoZeroSet);
    }
    let d: Vec<f64> = points.par_iter().map(|&p| contour.distance(p)).collect();
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for e in &d {
        sum += e;
        max = max.max(*e);
    }
    Ok(ErrorReport {
        mean_error: sum / d.len() as f64,
        max_error: max,
        n_points: d.len(),
        grid_spacing: contour.spacing,
    })
}

/// Symmetric Hausdorff distance between the zero contours of two planar
/// fields; the grids may differ.
pub fn hausdorff_zero_sets(a: &ScalarField, b: &ScalarField) -> Result<f64, AnalysisError> {
    let ca = extract_zero_contour(a, 0.0)?;
    let cb = extract_zero_contour(b, 0.0)?;
    if ca.is_empty() || cb.is_empty() {
        return Err(AnalysisError::NoZeroSet);
    }
    if ca.segments == cb.segments {
        return Ok(0.0);
    }
    let step = 0.25 * ca.spacing.min(cb.spacing);
    Ok(directed(&ca, &cb, step).max(directed(&cb, &ca, step)))
}

fn directed(from: &ContourSet, to: &ContourSet, step: f64) -> f64 {
    from.sample(step)
        .par_iter()
        .map(|&p| to.distance(p))
        .reduce(|| 0.0, f64::max)
}

/// A point of the analytic Example 1 boundary, tagged with its segment
/// (1 to 7; mirror copies for `p_x > 0` carry the same tag).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub segment: u8,
    pub point: Point,
}

/// One analytic piece of the `p_x <= 0` half of the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    Line { from: Point, to: Point },
    /// Counter-clockwise angles `from..to` on the given circle.
    Arc { center: Point, radius: f64, from: f64, to: f64 },
}

impl Piece {
    pub fn length(&self) -> f64 {
        match *self {
            Piece::Line { from, to } => (to[0] - from[0]).hypot(to[1] - from[1]),
            Piece::Arc { radius, from, to, .. } => radius * (to - from).abs(),
        }
    }

    /// Point at parameter `w` in `[0, 1]`.
    pub fn at(&self, w: f64) -> Point {
        match *self {
            Piece::Line { from, to } => [from[0] + w * (to[0] - from[0]), from[1] + w * (to[1] - from[1])],
            Piece::Arc {
                center,
                radius,
                from,
                to,
            } => {
                let th = from + w * (to - from);
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            }
        }
    }
}

/// The seven pieces of the `p_x <= 0` half of the Example 1 boundary at
/// t = 0, in order from the target's top-left corner downwards, then the
/// obstacle's shadow.
pub fn example1_pieces(p: &Example1Params) -> Result<Vec<Piece>, AnalysisError> {
    let (v, vt, vo, big_t) = (p.vehicle_speed, p.target_speed, p.obstacle_speed, p.horizon);
    let h = p.target_half_width;
    let ho = p.obstacle_half_width;
    if p.target_center[0] != 0.0 || p.obstacle_center[0] != 0.0 {
        return Err(AnalysisError::Unsupported("target and obstacle must be centered on p_x = 0".into()));
    }
    if !(vt > v && vo > v && v > 0.0) {
        return Err(AnalysisError::Unsupported(
            "target and obstacle must both be faster than the vehicle".into(),
        ));
    }
    let top = p.target_center[1] + h;
    let final_center = p.target_center[1] - vt * big_t;
    let r = v * big_t;

    let m = (vt * vt - v * v).sqrt() / v;
    let px_star = -vt * big_t / (1.0 / m + m) - h;
    let py_star = -vt * big_t / (1.0 / (m * m) + 1.0) + top;
    let upper_corner = [-h, final_center + h];
    let lower_corner = [-h, final_center - h];
    let theta_star = (py_star - upper_corner[1]).atan2(px_star - upper_corner[0]);

    // graze the obstacle's lower-left corner at time s, then climb to the
    // target's final bottom edge exactly at the horizon
    let bottom0 = p.obstacle_center[1] - ho;
    let target_bottom = final_center - h;
    let s = (r - target_bottom + bottom0) / (v + vo);
    if !(s > 0.0 && s < big_t) {
        return Err(AnalysisError::Unsupported(format!("no grazing time in (0, T): {s}")));
    }
    let center6 = [-ho, bottom0 - vo * s];
    let d = v * s;
    let end6 = center6[1] - (d * d - ho * ho).max(0.0).sqrt();
    if d < ho {
        return Err(AnalysisError::Unsupported("grazing arc does not reach p_x = 0".into()));
    }
    let k = (vo * vo - v * v).sqrt() / v;

    Ok(vec![
        Piece::Line {
            from: [-h, top],
            to: [px_star, py_star],
        },
        Piece::Arc {
            center: upper_corner,
            radius: r,
            from: theta_star,
            to: PI,
        },
        Piece::Line {
            from: [-h - r, upper_corner[1]],
            to: [-h - r, lower_corner[1]],
        },
        Piece::Arc {
            center: lower_corner,
            radius: r,
            from: PI,
            to: 1.5 * PI,
        },
        Piece::Line {
            from: [-h, lower_corner[1] - r],
            to: [-ho, lower_corner[1] - r],
        },
        Piece::Arc {
            center: center6,
            radius: d,
            from: 1.5 * PI,
            to: (end6 - center6[1]).atan2(ho),
        }
        .normalized(),
        Piece::Line {
            from: [-ho, bottom0],
            to: [0.0, bottom0 - k * ho],
        },
    ])
}

impl Piece {
    /// Keeps arc angles increasing.
    fn normalized(self) -> Piece {
        match self {
            Piece::Arc {
                center,
                radius,
                from,
                to,
            } if to < from => Piece::Arc {
                center,
                radius,
                from,
                to: to + 2.0 * PI,
            },
            other => other,
        }
    }
}

/// About `n_points` points spread by arc length over the analytic Example 1
/// boundary at t = 0, including the mirror image in `p_x > 0`.
pub fn example1_analytic_boundary_with(p: &Example1Params, n_points: usize) -> Result<Vec<BoundaryPoint>, AnalysisError> {
    let pieces = example1_pieces(p)?;
    let total: f64 = pieces.iter().map(Piece::length).sum::<f64>() * 2.0;
    let mut out = Vec::with_capacity(n_points + 32);
    for (idx, piece) in pieces.iter().enumerate() {
        let k = ((n_points as f64 * piece.length() / total).round() as usize).max(2);
        for i in 0..k {
            let q = piece.at((i as f64 + 0.5) / k as f64);
            let segment = idx as u8 + 1;
            out.push(BoundaryPoint { segment, point: q });
            out.push(BoundaryPoint {
                segment,
                point: [-q[0], q[1]],
            });
        }
    }
    Ok(out)
}

/// Default number of analytic comparison points.
pub const DEFAULT_BOUNDARY_POINTS: usize = 20_000;

pub fn example1_analytic_boundary(n_points: usize) -> Vec<BoundaryPoint> {
    example1_analytic_boundary_with(&Example1Params::default(), n_points.max(100))
        .expect("default parameters have an analytic boundary")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub report: ErrorReport,
    pub solve_seconds: f64,
}

/// Solves Example 1 on `N x N` grids and measures the t = 0 boundary error
/// against `points`.
pub fn convergence_study(
    spec: &ProblemSpec,
    ns: &[usize],
    accuracy: Accuracy,
    points: &[Point],
) -> Result<Vec<ConvergenceRow>, AnalysisError> {
    let config = SolveConfig::new(spec.horizon, vec![spec.horizon, 0.0]).with_accuracy(accuracy);
    ns.iter()
        .map(|&n| {
            let grid = Arc::new(Grid::new(&spec.domain.mins, &spec.domain.maxs, &[n, n])?);
            let r = solve_backward(&spec.model, &spec.l_scene, spec.g_scene.as_ref(), grid, &config)?;
            let report = boundary_error(r.initial(), points)?;
            Ok(ConvergenceRow {
                n,
                report,
                solve_seconds: r.stats.setup_seconds + r.stats.stepping_seconds,
            })
        })
        .collect()
}

/// CSV with header `N,spacing,mean_error,max_error`.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "N,spacing,mean_error,max_error")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.n, r.report.grid_spacing, r.report.mean_error, r.report.max_error
        )?;
    }
    Ok(())
}

/// Hausdorff distance between the zero contours of two planar slices of
/// possibly higher-dimensional fields.
pub fn slice_hausdorff(
    a: &ScalarField,
    fixed_a: &[(usize, f64)],
    b: &ScalarField,
    fixed_b: &[(usize, f64)],
) -> Result<f64, AnalysisError> {
    let sa = if fixed_a.is_empty() { a.clone() } else { a.slice(fixed_a)? };
    let sb = if fixed_b.is_empty() { b.clone() } else { b.slice(fixed_b)? };
    hausdorff_zero_sets(&sa, &sb)
}

/// One native-versus-augmented set comparison at game time `time`, with
/// extra state coordinates pinned by `fixed` (native indexing).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceAgreement {
    pub time: f64,
    pub fixed: Vec<(usize, f64)>,
    pub distance: f64,
    /// `distance` in units of the coarser grid's largest spacing.
    pub cells: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub native_counts: Vec<usize>,
    pub augmented_counts: Vec<usize>,
    pub native_seconds: f64,
    pub augmented_seconds: f64,
    pub speedup: f64,
    pub agreement: Vec<SliceAgreement>,
}

/// Augmented frame times matching native `times`: the augmented problem
/// started at clock `s = t` with the same time to go.
pub fn augmented_frame_times(horizon: f64, times: &[f64]) -> Vec<f64> {
    let mut f: Vec<f64> = std::iter::once(horizon).chain(times.iter().copied()).chain([0.0]).collect();
    f.sort_by(|a, b| b.partial_cmp(a).unwrap());
    f.dedup();
    f
}

/// Solves `spec` natively and with time augmentation, timing both solver
/// runs (setup plus stepping), and compares the zero sets at each time in
/// `times` on every slice in `slices`. The augmented value at game time
/// `t` is its frame at `t` restricted to the clock coordinate `s = t`.
pub fn augmentation_benchmark(
    spec: &ProblemSpec,
    native_counts: &[usize],
    augmented_counts: &[usize],
    accuracy: Accuracy,
    times: &[f64],
    slices: &[Vec<(usize, f64)>],
) -> Result<(BenchmarkReport, SolveResult, SolveResult), AnalysisError> {
    let aug = augment_time(spec)?;
    let frames = augmented_frame_times(spec.horizon, times);
    let config = SolveConfig::new(spec.horizon, frames).with_accuracy(accuracy);

    let native_grid = Arc::new(Grid::new(&spec.domain.mins, &spec.domain.maxs, native_counts)?);
    let native = solve_backward(&spec.model, &spec.l_scene, spec.g_scene.as_ref(), native_grid, &config)?;
    let aug_grid = Arc::new(Grid::new(&aug.domain.mins, &aug.domain.maxs, augmented_counts)?);
    let augmented = solve_backward(&aug.model, &aug.l_scene, aug.g_scene.as_ref(), aug_grid, &config)?;

    let clock = spec.state_dim();
    let cell = native.grid.max_spacing().max(
        (0..clock)
            .map(|d| augmented.grid.spacing()[d])
            .fold(0.0, f64::max),
    );
    let mut agreement = Vec::new();
    for &t in times {
        let nf = native.frame_at(t).expect("requested frame");
        let af = augmented.frame_at(t).expect("requested frame");
        let default_slice = vec![Vec::new()];
        let slices = if slices.is_empty() { &default_slice[..] } else { slices };
        for fixed in slices {
            let mut fixed_aug = fixed.clone();
            fixed_aug.push((clock, t));
            let distance = slice_hausdorff(nf, fixed, af, &fixed_aug)?;
            agreement.push(SliceAgreement {
                time: t,
                fixed: fixed.clone(),
                distance,
                cells: distance / cell,
            });
        }
    }
    let native_seconds = native.stats.setup_seconds + native.stats.stepping_seconds;
    let augmented_seconds = augmented.stats.setup_seconds + augmented.stats.stepping_seconds;
    let report = BenchmarkReport {
        native_counts: native_counts.to_vec(),
        augmented_counts: augmented_counts.to_vec(),
        native_seconds,
        augmented_seconds,
        speedup: augmented_seconds / native_seconds,
        agreement,
    };
    Ok((report, native, augmented))
}
