//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use reachavoid::games::Example1Params;

/// Straight-path feasibility for Example 1: can a vehicle starting at `p`
/// at t = 0 reach the target's final box at the horizon by heading straight
/// for the obstacle's lower-left corner, passing it at time `s`, then
/// straight to the nearest point of the final target? Every leg is checked
/// for collisions at `checks` sample times.
pub fn grazing_path_feasible(p: [f64; 2], params: &Example1Params, graze_samples: usize, checks: usize) -> bool {
    let v = params.vehicle_speed;
    let big_t = params.horizon;
    let ho = params.obstacle_half_width;
    let h = params.target_half_width;
    let oy0 = params.obstacle_center[1];
    let final_y = params.target_center[1] - params.target_speed * big_t;

    let obstacle_contains = |q: [f64; 2], t: f64| {
        let cy = oy0 - params.obstacle_speed * t;
        q[0].abs() < ho - 1e-12 && (q[1] - cy).abs() < ho - 1e-12
    };
    let leg_clear = |a: [f64; 2], b: [f64; 2], t0: f64, t1: f64| {
        (0..=checks).all(|k| {
            let w = k as f64 / checks as f64;
            let q = [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])];
            !obstacle_contains(q, t0 + w * (t1 - t0))
        })
    };

    (1..graze_samples).any(|k| {
        let s = big_t * k as f64 / graze_samples as f64;
        let corner = [-ho, oy0 - ho - params.obstacle_speed * s];
        let first = (corner[0] - p[0]).hypot(corner[1] - p[1]);
        if first > v * s {
            return false;
        }
        let goal = [
            corner[0].clamp(-h, h),
            corner[1].clamp(final_y - h, final_y + h),
        ];
        let second = (goal[0] - corner[0]).hypot(goal[1] - corner[1]);
        if second > v * (big_t - s) {
            return false;
        }
        let arrive = s + second / v;
        leg_clear(p, corner, 0.0, s) && leg_clear(corner, goal, s, arrive)
    })
}

/// Lowest `p_y` in `[lo, hi]` below the obstacle from which the grazing
/// manoeuvre still succeeds, for a given `p_x`, by scan and bisection.
pub fn grazing_boundary_y(px: f64, params: &Example1Params) -> f64 {
    let feasible = |py: f64| grazing_path_feasible([px, py], params, 4000, 64);
    let (lo, hi) = (-0.6, -0.3);
    let steps = 300;
    let mut prev = lo;
    let mut found = None;
    for k in 1..=steps {
        let y = lo + (hi - lo) * k as f64 / steps as f64;
        if feasible(y) {
            found = Some((prev, y));
            break;
        }
        prev = y;
    }
    let (mut a, mut b) = found.expect("grazing boundary inside the scan window");
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if feasible(m) {
            b = m;
        } else {
            a = m;
        }
    }
    b
}
