//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run all criteria with `cargo test -p reachavoid --test acceptance`, or a
//! subset by number: `cargo test -p reachavoid --test acceptance -- 1 4`.

mod common;

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reachavoid::analysis::{
    augmentation_benchmark, boundary_error, example1_analytic_boundary, example1_pieces, extract_zero_contour,
    BenchmarkReport, Point, DEFAULT_BOUNDARY_POINTS,
};
use reachavoid::games::{builtin_problem, Example1Params, GameModel, ProblemSpec};
use reachavoid::grid::{Grid, ScalarField};
use reachavoid::numerics::{
    integrate_step, lax_friedrichs, spatial_derivs, Hamiltonian, SpatialScheme, TimeIntegrator,
};
use reachavoid::scene::{Node, Scene};
use reachavoid::solver::{solve_backward, terminal_field, Accuracy, SolveConfig, SolveMode, SolveResult};
use reachavoid::strategy::{sample_starts, simulate_many, SimOptions, ValueLookup};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Example 2 solves shared by several criteria.
struct Example2 {
    spec: ProblemSpec,
    bench: BenchmarkReport,
    /// Native solve with dense frames for strategy and set-growth checks.
    dense: SolveResult,
}

const DEFENDER_SLICES: [f64; 4] = [-0.75, -0.25, 0.25, 0.75];

fn example1() -> ProblemSpec {
    builtin_problem("example1", &serde_json::Value::Null).unwrap()
}

fn example2() -> ProblemSpec {
    builtin_problem("example2", &serde_json::Value::Null).unwrap()
}

fn square_grid(spec: &ProblemSpec, n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&spec.domain.mins, &spec.domain.maxs, &vec![n; spec.state_dim()]).unwrap())
}

/// Analytic comparison points with the grazing arc taken from the
/// brute-force path oracle (sampled, then linearly interpolated).
fn oracle_boundary_points() -> Vec<Point> {
    let params = Example1Params::default();
    let arc = example1_pieces(&params).unwrap()[5];
    let (x0, x1) = (arc.at(0.0)[0], arc.at(1.0)[0]);
    let samples = 40;
    let table: Vec<(f64, f64)> = (0..=samples)
        .map(|k| {
            let x = x0 + (x1 - x0) * k as f64 / samples as f64;
            (x, common::grazing_boundary_y(x, &params))
        })
        .collect();
    let oracle_y = |x: f64| {
        let u = ((x - x0) / (x1 - x0) * samples as f64).clamp(0.0, samples as f64);
        let k = (u.floor() as usize).min(samples - 1);
        let w = u - k as f64;
        (1.0 - w) * table[k].1 + w * table[k + 1].1
    };
    example1_analytic_boundary(DEFAULT_BOUNDARY_POINTS)
        .into_iter()
        .map(|b| {
            if b.segment == 6 {
                [b.point[0], oracle_y(-b.point[0].abs())]
            } else {
                b.point
            }
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let spec = example1();
    let points = oracle_boundary_points();
    let config = SolveConfig::new(spec.horizon, vec![spec.horizon, 0.0]);
    let mut ok = true;
    let mut rows = Vec::new();
    let mut prev_mean = f64::INFINITY;
    for n in [51, 101, 151, 201] {
        let r = solve_backward(&spec.model, &spec.l_scene, spec.g_scene.as_ref(), square_grid(&spec, n), &config)
            .unwrap();
        let rep = boundary_error(r.initial(), &points).unwrap();
        let h = rep.grid_spacing;
        let row_ok = rep.mean_error <= 0.2 * h && rep.max_error <= 0.8 * h && rep.mean_error < prev_mean;
        ok &= row_ok;
        prev_mean = rep.mean_error;
        rows.push(format!(
            "N={n} mean={:.3}h max={:.3}h",
            rep.mean_error / h,
            rep.max_error / h
        ));
    }
    verdict(ok, format!("{} ({} points)", rows.join(", "), points.len()))
}

fn criterion_2() -> Verdict {
    let model = GameModel::single_integrator(1, 1.0);
    let l = Scene::new(Node::halfspace(&[1.0], 0.0)).unwrap();
    let grid = Arc::new(Grid::uniform(1, -2.0, 2.0, 201).unwrap());
    let h = grid.spacing()[0];
    let cfg = SolveConfig::new(1.0, vec![1.0, 0.0]).with_mode(SolveMode::ReachOnly);
    let r = solve_backward(&model, &l, None, grid.clone(), &cfg).unwrap();
    let err = (0..grid.len())
        .map(|i| (r.initial().values()[i] - (grid.coord(0, i) - 1.0)).abs())
        .fold(0.0, f64::max);
    verdict(err <= 2.0 * h, format!("max error {err:.3e} vs bound {:.3e}", 2.0 * h))
}

fn criterion_3() -> Verdict {
    let model = GameModel::single_integrator(2, 0.0);
    let l = Scene::new(Node::fixed_box(&[0.2, 0.1], &[0.3, 0.2])).unwrap();
    let g = Scene::new(Node::ball(&[-0.4, 0.0], 0.25)).unwrap().complement();
    let grid = Arc::new(Grid::uniform(2, -1.0, 1.0, 51).unwrap());
    let expect = terminal_field(&l.sample(&grid, 1.0), &g.sample(&grid, 1.0)).unwrap();
    let mut frames = 0;
    let mut ok = true;
    for acc in [Accuracy::Low, Accuracy::High] {
        let cfg = SolveConfig::uniform(1.0, 6).with_accuracy(acc);
        let r = solve_backward(&model, &l, Some(&g), grid.clone(), &cfg).unwrap();
        for f in &r.frames {
            frames += 1;
            ok &= f.values().iter().zip(expect.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        }
    }
    verdict(ok, format!("{frames} frames compared bit-for-bit"))
}

fn criterion_4() -> Verdict {
    let spec = example1();
    let times = [0.0, 0.1, 0.3];
    let (rep, native, _) =
        augmentation_benchmark(&spec, &[101, 101], &[101, 101, 51], Accuracy::High, &times, &[]).unwrap();
    let h = native.grid.max_spacing();
    let worst = rep.agreement.iter().map(|a| a.distance).fold(0.0, f64::max);
    let dists: Vec<String> = rep
        .agreement
        .iter()
        .map(|a| format!("t={} d={:.4}", a.time, a.distance))
        .collect();
    verdict(
        worst <= h && rep.speedup >= 5.0,
        format!(
            "{}; bound {h:.4}; native {:.2}s, augmented {:.2}s, speedup {:.1}x",
            dists.join(", "),
            rep.native_seconds,
            rep.augmented_seconds,
            rep.speedup
        ),
    )
}

fn example2_solves() -> Example2 {
    let spec = example2();
    let slices: Vec<Vec<(usize, f64)>> = DEFENDER_SLICES.iter().map(|&y| vec![(2, y)]).collect();
    let (bench, _, _) =
        augmentation_benchmark(&spec, &[41, 41, 41], &[35, 35, 35, 35], Accuracy::High, &[0.0], &slices).unwrap();
    let mut frames: Vec<f64> = (0..=50).map(|k| 1.0 - k as f64 * 0.02).collect();
    frames.push(0.92);
    frames.sort_by(|a, b| b.partial_cmp(a).unwrap());
    frames.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    *frames.last_mut().unwrap() = 0.0;
    let cfg = SolveConfig::new(spec.horizon, frames);
    let dense = solve_backward(&spec.model, &spec.l_scene, spec.g_scene.as_ref(), square_grid(&spec, 41), &cfg)
        .unwrap();
    Example2 { spec, bench, dense }
}

fn criterion_5(ex2: &Example2) -> Verdict {
    let rep = &ex2.bench;
    let worst = rep.agreement.iter().map(|a| a.cells).fold(0.0, f64::max);
    let cells: Vec<String> = rep
        .agreement
        .iter()
        .map(|a| format!("yD={} {:.2} cells", a.fixed[0].1, a.cells))
        .collect();
    verdict(
        rep.speedup >= 10.0 && worst <= 1.5,
        format!(
            "{}; native {:.1}s, augmented {:.1}s, speedup {:.1}x",
            cells.join(", "),
            rep.native_seconds,
            rep.augmented_seconds,
            rep.speedup
        ),
    )
}

/// Win rate from seeded starts with `|V| >= 2 h` of the requested sign.
fn win_rates(spec: &ProblemSpec, result: &SolveResult, seed: u64) -> (usize, usize, usize, usize) {
    let look = ValueLookup::new(result);
    let h = result.grid.max_spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let winners = sample_starts(&look, 0.0, 100, 1_000_000, &mut rng, |v| v <= -2.0 * h);
    let losers = sample_starts(&look, 0.0, 100, 1_000_000, &mut rng, |v| v >= 2.0 * h);
    let opts = SimOptions::default();
    let won = simulate_many(spec, &look, &winners, 0.0, &opts)
        .unwrap()
        .iter()
        .filter(|t| t.outcome.is_win() && t.g_values.iter().all(|g| *g <= 0.0))
        .count();
    let lost = simulate_many(spec, &look, &losers, 0.0, &opts)
        .unwrap()
        .iter()
        .filter(|t| !t.outcome.is_win())
        .count();
    (won, winners.len(), lost, losers.len())
}

fn criterion_6(ex2: &Example2) -> Verdict {
    let spec1 = example1();
    let cfg = SolveConfig::uniform(spec1.horizon, 51);
    let r1 = solve_backward(&spec1.model, &spec1.l_scene, spec1.g_scene.as_ref(), square_grid(&spec1, 101), &cfg)
        .unwrap();
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let (w1, n1, l1, m1) = win_rates(&spec1, &r1, 1);
    let (w2, n2, l2, m2) = win_rates(&ex2.spec, &ex2.dense, 2);
    let ok = n1 == 100 && n2 == 100 && m2 == 100
        && rate(w1, n1) >= 0.95
        && rate(w2, n2) >= 0.95
        && rate(l2, m2) >= 0.95
        && (m1 == 0 || rate(l1, m1) >= 0.95);
    verdict(
        ok,
        format!(
            "example1 wins {w1}/{n1}, losses {l1}/{m1}; example2 wins {w2}/{n2}, losses vs optimal defender {l2}/{m2}"
        ),
    )
}

fn weno_error(n: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let grid = Arc::new(Grid::new(&[0.0], &[two_pi], &[n]).unwrap());
    let f = ScalarField::from_fn(grid.clone(), 0.0, |x| x[0].sin());
    let d = spatial_derivs(&f, 0, SpatialScheme::Weno5).unwrap();
    (3..n - 3)
        .map(|i| {
            let exact = grid.coord(0, i).cos();
            (d.minus.values()[i] - exact).abs().max((d.plus.values()[i] - exact).abs())
        })
        .fold(0.0, f64::max)
}

fn rk3_error(steps: usize) -> f64 {
    let grid = Arc::new(Grid::new(&[0.0], &[1.0], &[7]).unwrap());
    let mut f = ScalarField::from_fn(grid, 0.0, |_| 1.0);
    let dt = 1.0 / steps as f64;
    for k in 0..steps {
        f = integrate_step(&f, dt, (k + 1) as f64 * dt, TimeIntegrator::TvdRk3, |g| {
            g.values().iter().map(|v| -v).collect()
        })
        .unwrap();
    }
    (f.values()[0] - (-1.0f64).exp()).abs()
}

fn criterion_7() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    let spec = example1();
    let g_scene = spec.g_scene.as_ref().unwrap();
    let grid = square_grid(&spec, 101);
    let cfg = SolveConfig::uniform(spec.horizon, 11);
    let r = solve_backward(&spec.model, &spec.l_scene, Some(g_scene), grid.clone(), &cfg).unwrap();

    let mut sandwich = true;
    for f in &r.frames {
        let l = spec.l_scene.sample(&grid, f.time());
        let g = g_scene.sample(&grid, f.time());
        for i in 0..grid.len() {
            let v = f.values()[i];
            sandwich &= g.values()[i] <= v && v <= l.values()[i].max(g.values()[i]);
        }
    }
    ok &= sandwich;
    notes.push(format!("sandwich {sandwich}"));

    let terminal = terminal_field(&spec.l_scene.sample(&grid, 0.5), &g_scene.sample(&grid, 0.5)).unwrap();
    let exact = r.frames[0] == terminal;
    ok &= exact;
    notes.push(format!("terminal exact {exact}"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let consistent = (0..1000).all(|_| {
        use rand::Rng;
        let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let lf = lax_friedrichs(&spec.model, &[0.0, 0.0], 0.0, &p, &p, &[0.5, 0.5]);
        lf == spec.model.hamiltonian(&[0.0, 0.0], &p, 0.0)
    });
    ok &= consistent;
    notes.push(format!("LF consistency {consistent}"));

    let weno = (weno_error(161) / weno_error(321)).log2();
    ok &= weno >= 4.5;
    notes.push(format!("WENO5 order {weno:.2}"));
    let rk3 = (rk3_error(20) / rk3_error(40)).log2();
    ok &= rk3 >= 2.8;
    notes.push(format!("TVD-RK3 order {rk3:.2}"));

    let vacuous = Scene::constant(-1e9);
    let small = square_grid(&spec, 51);
    let base = SolveConfig::uniform(spec.horizon, 6);
    let a = solve_backward(&spec.model, &spec.l_scene, None, small.clone(), &base.clone().with_mode(SolveMode::ReachOnly))
        .unwrap();
    let b = solve_backward(&spec.model, &spec.l_scene, Some(&vacuous), small, &base).unwrap();
    let same = a
        .frames
        .iter()
        .zip(&b.frames)
        .all(|(x, y)| x.values().iter().zip(y.values()).all(|(u, v)| u.to_bits() == v.to_bits()));
    ok &= same;
    notes.push(format!("reach_only bit-equal {same}"));

    let n = grid.counts()[0];
    let mut asym = 0.0f64;
    for f in &r.frames {
        for i in 0..n {
            for j in 0..n {
                let d = f.values()[grid.flatten(&[i, j])] - f.values()[grid.flatten(&[n - 1 - i, j])];
                asym = asym.max(d.abs());
            }
        }
    }
    ok &= asym <= 1e-12;
    notes.push(format!("mirror asymmetry {asym:.1e}"));
    verdict(ok, notes.join(", "))
}

fn criterion_8(ex2: &Example2) -> Verdict {
    let h = ex2.dense.grid.max_spacing();
    let times = [0.92, 0.6, 0.3, 0.0];
    let mut worst = 0.0f64;
    for &y in &DEFENDER_SLICES {
        let slices: Vec<ScalarField> = times
            .iter()
            .map(|&t| ex2.dense.frame_at(t).unwrap().slice(&[(2, y)]).unwrap())
            .collect();
        for w in slices.windows(2) {
            let (later, earlier) = (&w[0], &w[1]);
            let contour = extract_zero_contour(earlier, 0.0).unwrap();
            let g = later.grid();
            for flat in 0..g.len() {
                if later.values()[flat] <= 0.0 && earlier.values()[flat] > 0.0 {
                    let mut x = [0.0; 2];
                    g.node_point(flat, &mut x);
                    worst = worst.max(contour.distance(x));
                }
            }
        }
    }
    verdict(
        worst <= h,
        format!("largest uncovered distance {:.2} cells (empirical property, not a theorem)", worst / h),
    )
}

fn main() {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |k: u8| selected.is_empty() || selected.contains(&k);
    let mut failed = 0;
    let mut report = |k: u8, name: &str, run: &dyn Fn() -> Verdict| {
        if !wants(k) {
            return;
        }
        let start = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {k} [{}] {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "example 1 boundary convergence", &criterion_1);
    report(2, "1-D characteristics", &criterion_2);
    report(3, "zero-dynamics fixed point", &criterion_3);
    report(4, "example 1 augmentation equivalence", &criterion_4);
    let ex2 = [5u8, 6, 8].iter().any(|&k| wants(k)).then(example2_solves);
    if let Some(ex2) = &ex2 {
        report(5, "example 2 benchmark", &|| criterion_5(ex2));
    }
    report(6, "strategy soundness", &|| match &ex2 {
        Some(ex2) => criterion_6(ex2),
        None => unreachable!(),
    });
    report(7, "invariant suite", &criterion_7);
    if let Some(ex2) = &ex2 {
        report(8, "example 2 set growth", &|| criterion_8(ex2));
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
