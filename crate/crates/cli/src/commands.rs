//! Subcommand implementations. Every command overwrites its own files in
//! the output directory, so reruns are idempotent.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reachavoid::analysis::{
    augmentation_benchmark, convergence_study, example1_analytic_boundary_with, extract_zero_contour,
    write_convergence_csv, BenchmarkReport, ConvergenceRow, Point, DEFAULT_BOUNDARY_POINTS,
};
use reachavoid::games::{Example1Params, ProblemSpec};
use reachavoid::grid::format::{load_field, save_field};
use reachavoid::grid::Grid;
use reachavoid::solver::{solve_backward, SolveConfig, SolveResult, SolveStats};
use reachavoid::strategy::{sample_starts, simulate_many, SimOptions, Trajectory, ValueLookup};
use serde::{Deserialize, Serialize};

use crate::config::{expand_counts, ProblemSource, RunConfig};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

pub struct Common {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quick: bool,
}

impl Common {
    fn out_dir(&self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameFile {
    pub time: f64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub stepping_seconds: f64,
    pub io_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub problem: ProblemSpec,
    pub model_id: String,
    pub grid: Grid,
    pub solve: SolveConfig,
    pub frame_times: Vec<f64>,
    pub files: Vec<FrameFile>,
    pub timings: Timings,
    /// Length of every internal substep.
    pub cfl_history: Vec<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?,
    ))
}

pub fn solve(cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    let spec = cfg.problem()?;
    let counts = cfg.grid_counts(spec.state_dim())?;
    let grid = Arc::new(Grid::new(&spec.domain.mins, &spec.domain.maxs, &counts)?);
    let solve_cfg = cfg.solve_config(&spec)?;
    let dir = common.out_dir(cfg)?;

    let result = solve_backward(&spec.model, &spec.l_scene, spec.g_scene.as_ref(), grid.clone(), &solve_cfg)?;

    let io = Instant::now();
    let mut files = Vec::new();
    for (k, f) in result.frames.iter().enumerate() {
        let name = format!("frame_{k:03}.hjra");
        save_field(f, dir.join(&name))?;
        files.push(FrameFile {
            time: f.time(),
            file: name,
        });
    }
    let mut manifest = Manifest {
        config: cfg.clone(),
        problem: spec,
        model_id: result.model_id.clone(),
        grid: (*grid).clone(),
        solve: solve_cfg.clone(),
        frame_times: solve_cfg.frame_times.clone(),
        files,
        timings: Timings {
            setup_seconds: result.stats.setup_seconds,
            stepping_seconds: result.stats.stepping_seconds,
            io_seconds: 0.0,
        },
        cfl_history: result.stats.substeps.clone(),
    };
    manifest.timings.io_seconds = io.elapsed().as_secs_f64();
    write_json(&dir.join(MANIFEST), &manifest)?;
    println!(
        "solved {} on {:?}: {} frames, {} substeps, {:.2}s stepping -> {}",
        manifest.problem.name,
        counts,
        manifest.files.len(),
        manifest.cfl_history.len(),
        manifest.timings.stepping_seconds,
        dir.display()
    );
    Ok(())
}

/// Reloads a solve directory written by `solve`.
pub fn load_solve(dir: &Path) -> Result<(Manifest, SolveResult), CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("missing solve output {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let grid = Arc::new(manifest.grid.clone());
    let mut frames = Vec::new();
    for f in &manifest.files {
        let field = load_field(dir.join(&f.file))?;
        if !field.grid().same_shape(&grid) || field.time() != f.time {
            return Err(CliError::Config(format!("{} does not match the manifest", f.file)));
        }
        frames.push(field);
    }
    let result = SolveResult {
        frames,
        model_id: manifest.model_id.clone(),
        grid,
        config: manifest.solve.clone(),
        stats: SolveStats::default(),
    };
    Ok((manifest, result))
}

pub fn converge(cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    let params: Example1Params = match &cfg.problem {
        ProblemSource::Builtin { name, overrides } if name == "example1" => {
            let o = if overrides.is_null() {
                serde_json::json!({})
            } else {
                overrides.clone()
            };
            serde_json::from_value(o)?
        }
        _ => return Err(CliError::Config("converge needs the example1 problem".into())),
    };
    let spec = cfg.problem()?;
    let counts = if common.quick {
        vec![51, 101]
    } else {
        cfg.converge
            .counts
            .clone()
            .unwrap_or_else(|| vec![51, 101, 151, 201, 251, 301])
    };
    let n_points = cfg.converge.points.unwrap_or(DEFAULT_BOUNDARY_POINTS);
    let points: Vec<Point> = example1_analytic_boundary_with(&params, n_points)?
        .into_iter()
        .map(|b| b.point)
        .collect();
    let dir = common.out_dir(cfg)?;
    let rows = convergence_study(&spec, &counts, cfg.accuracy, &points)?;
    write_convergence_csv(&rows, create(&dir.join("convergence.csv"))?)?;
    write_json(&dir.join("convergence.json"), &rows)?;

    let mean_cap = cfg.converge.max_mean_cells.unwrap_or(0.2);
    let max_cap = cfg.converge.max_max_cells.unwrap_or(0.8);
    let mut failures = Vec::new();
    let mut prev: Option<&ConvergenceRow> = None;
    for r in &rows {
        let h = r.report.grid_spacing;
        println!(
            "N={:4} spacing={:.5} mean={:.3e} ({:.3} cells) max={:.3e} ({:.3} cells)",
            r.n,
            h,
            r.report.mean_error,
            r.report.mean_error / h,
            r.report.max_error,
            r.report.max_error / h
        );
        let increasing = prev.map_or(false, |p| r.report.mean_error >= p.report.mean_error);
        if r.report.mean_error > mean_cap * h || r.report.max_error > max_cap * h || increasing {
            failures.push(format!(
                "N={} mean={:.3} cells max={:.3} cells{}",
                r.n,
                r.report.mean_error / h,
                r.report.max_error / h,
                if increasing { " (mean error did not decrease)" } else { "" }
            ));
        }
        prev = Some(r);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures.join("; ")))
    }
}

pub fn benchmark(cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    let spec = cfg.problem()?;
    let n = spec.state_dim();
    let b = &cfg.benchmark;
    let (native_default, aug_default) = match (common.quick, n) {
        (true, _) => (21, 17),
        (false, 2) => (101, 51),
        (false, _) => (41, 35),
    };
    let native = if common.quick {
        vec![native_default; n]
    } else {
        expand_counts(b.native_grid.as_deref(), n, native_default)?
    };
    let mut augmented = if common.quick {
        vec![aug_default; n + 1]
    } else {
        expand_counts(b.augmented_grid.as_deref(), n + 1, aug_default)?
    };
    if n == 2 && b.augmented_grid.is_none() && !common.quick {
        // keep the native planar resolution and add a clock axis
        augmented = vec![native[0], native[1], aug_default];
    }
    let times = b.times.clone().unwrap_or_else(|| vec![0.0]);
    let slices = b.slices.clone().unwrap_or_else(|| match cfg.builtin_name() {
        Some("example2") => [-0.75, -0.25, 0.25, 0.75].iter().map(|&y| vec![(2, y)]).collect(),
        _ => Vec::new(),
    });
    let dir = common.out_dir(cfg)?;
    let (report, _, _) = augmentation_benchmark(&spec, &native, &augmented, cfg.accuracy, &times, &slices)?;
    write_json(&dir.join("benchmark.json"), &report)?;
    write_benchmark_csv(&report, create(&dir.join("benchmark.csv"))?)?;

    println!(
        "native {:?}: {:.2}s, augmented {:?}: {:.2}s, speedup {:.1}x",
        report.native_counts, report.native_seconds, report.augmented_counts, report.augmented_seconds, report.speedup
    );
    for a in &report.agreement {
        println!("t={} fixed={:?}: distance {:.4} ({:.2} cells)", a.time, a.fixed, a.distance, a.cells);
    }
    let min_speedup = b.min_speedup.unwrap_or(10.0);
    let max_cells = b.max_cells.unwrap_or(1.5);
    let mut failures = Vec::new();
    if report.speedup < min_speedup {
        failures.push(format!("speedup {:.1}x below {min_speedup}x", report.speedup));
    }
    for a in report.agreement.iter().filter(|a| a.cells > max_cells) {
        failures.push(format!("t={} fixed={:?}: {:.2} cells", a.time, a.fixed, a.cells));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures.join("; ")))
    }
}

fn write_benchmark_csv<W: Write>(report: &BenchmarkReport, mut out: W) -> Result<(), CliError> {
    writeln!(out, "time,fixed,distance,cells")?;
    for a in &report.agreement {
        let fixed: Vec<String> = a.fixed.iter().map(|(d, v)| format!("x{}={v}", d + 1)).collect();
        writeln!(out, "{},{},{},{}", a.time, fixed.join(" "), a.distance, a.cells)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub starts: usize,
    pub wins: usize,
    pub win_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub start_time: f64,
    pub margin: f64,
    pub groups: Vec<GroupSummary>,
}

pub fn simulate(cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    let dir = common.out_dir(cfg)?;
    let s = &cfg.simulate;
    let solve_dir = s.solve_dir.clone().unwrap_or_else(|| dir.clone());
    let (manifest, result) = load_solve(&solve_dir)?;
    let spec = manifest.problem;
    let seed = common.seed.unwrap_or(cfg.seed);
    let look = ValueLookup::new(&result);
    let margin = s.margin_cells.unwrap_or(2.0) * result.grid.max_spacing();
    let count = s.starts.unwrap_or(if common.quick { 20 } else { 100 });
    let t0 = s.start_time;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let negative = sample_starts(&look, t0, count, 1_000_000, &mut rng, |v| v <= -margin);
    let positive = sample_starts(&look, t0, count, 1_000_000, &mut rng, |v| v >= margin);
    let opts = SimOptions::default();
    let keep = s.trajectories.unwrap_or(5);

    let mut groups = Vec::new();
    for (name, starts, keep) in [
        ("negative", &negative, keep),
        ("positive", &positive, keep),
        ("explicit", &s.start_states, usize::MAX),
    ] {
        let trajs = simulate_many(&spec, &look, starts, t0, &opts)?;
        let wins = trajs.iter().filter(|t| t.outcome.is_win()).count();
        for (k, t) in trajs.iter().take(keep).enumerate() {
            write_trajectory(t, &dir.join(format!("traj_{name}_{k:03}.csv")))?;
        }
        groups.push(GroupSummary {
            group: name.to_string(),
            starts: trajs.len(),
            wins,
            win_rate: if trajs.is_empty() { 0.0 } else { wins as f64 / trajs.len() as f64 },
        });
    }
    let summary = SimulationSummary {
        seed,
        start_time: t0,
        margin,
        groups,
    };
    write_json(&dir.join("simulation.json"), &summary)?;
    let mut csv = create(&dir.join("simulation.csv"))?;
    writeln!(csv, "group,starts,wins,win_rate")?;
    for g in &summary.groups {
        writeln!(csv, "{},{},{},{}", g.group, g.starts, g.wins, g.win_rate)?;
        println!("{:9} starts={:4} wins={:4} rate={:.3}", g.group, g.starts, g.wins, g.win_rate);
    }
    csv.flush()?;

    let need = s.min_win_rate.unwrap_or(0.95);
    let mut failures = Vec::new();
    let neg = &summary.groups[0];
    if neg.starts > 0 && neg.win_rate < need {
        failures.push(format!("win rate {:.3} from V <= -margin starts", neg.win_rate));
    }
    let pos = &summary.groups[1];
    if pos.starts > 0 && 1.0 - pos.win_rate < need {
        failures.push(format!("loss rate {:.3} from V >= margin starts", 1.0 - pos.win_rate));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures.join("; ")))
    }
}

fn write_trajectory(t: &Trajectory, path: &Path) -> Result<(), CliError> {
    let mut w = create(path)?;
    t.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn contour(frame: &Path, level: f64, slices: &[(usize, f64)], common: &Common) -> Result<(), CliError> {
    let field = load_field(frame)?;
    let field = if slices.is_empty() { field } else { field.slice(slices)? };
    let contour = extract_zero_contour(&field, level)?;
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("contour.csv");
            let mut w = create(&path)?;
            contour.write_csv(&mut w)?;
            w.flush()?;
            println!("{} segments -> {}", contour.segments.len(), path.display());
        }
        None => contour.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}
