//! Brute-force J1 distance over discretized time changes.
//!
//! The `i`-th jump of `x` is placed at a time `τ_i` of `y`'s clock drawn
//! from a grid (plus the jump times of both paths); the best placement is
//! found by a layered minimization. The result is an upper bound on the
//! exact distance that is off by at most about one grid step. Slow; meant
//! for cross-checking the exact solver.

use super::{check_horizon, StepView};
use crate::error::{Error, Result};
use crate::paths::CadlagPath;

/// Grid spacing used by the cross-checks.
pub const DEFAULT_STEP: f64 = 1e-3;

pub fn j1_grid(x: &CadlagPath, y: &CadlagPath, horizon: f64, step: f64) -> Result<f64> {
    check_horizon(x, y, horizon)?;
    if !(step > 0.0) || horizon / step > 1e6 {
        return Err(Error::InvalidParameter(format!("grid step {step} unusable on [0, {horizon}]")));
    }
    let xv = StepView::new(x, horizon);
    let yv = StepView::new(y, horizon);

    let mut grid: Vec<f64> = (1..)
        .map(|k| k as f64 * step)
        .take_while(|&t| t < horizon)
        .collect();
    grid.extend(xv.times.iter().chain(&yv.times).copied().filter(|&t| t < horizon));
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    // grid[0] = 0; y is constant on [grid[g], grid[g+1])
    let y_at = |t: f64| yv.values[yv.times.partition_point(|&s| s <= t)];
    let yval: Vec<f64> = grid.iter().map(|&t| y_at(t)).collect();
    let y_end = y_at(horizon);
    let g = grid.len();

    // best[j]: cost of placing the jumps so far with the latest at grid[j]
    let mut best = vec![f64::INFINITY; g];
    best[0] = 0.0;
    let (a, s) = (&xv.values, &xv.times);
    for (i, &si) in s.iter().enumerate() {
        let prev_value = a[i];
        if si == horizon {
            // pinned to the end of the clock; only the last jump can sit at T
            let mut cost = f64::INFINITY;
            let mut vc: f64 = 0.0;
            for j in (0..g).rev() {
                vc = vc.max((prev_value - yval[j]).abs());
                cost = cost.min(best[j].max(vc));
            }
            return Ok(cost.max((a[i + 1] - y_end).abs()));
        }
        let mut next = vec![f64::INFINITY; g];
        for end in 1..g {
            let disp = (grid[end] - si).abs();
            let mut vc: f64 = 0.0;
            let mut acc = f64::INFINITY;
            for start in (0..end).rev() {
                vc = vc.max((prev_value - yval[start]).abs());
                if best[start].is_finite() {
                    acc = acc.min(best[start].max(vc));
                }
            }
            next[end] = acc.max(disp);
        }
        best = next;
    }
    let last = a[s.len()];
    let mut result = f64::INFINITY;
    let mut vc = (last - y_end).abs();
    for j in (0..g).rev() {
        vc = vc.max((last - yval[j]).abs());
        result = result.min(best[j].max(vc));
    }
    Ok(result)
}
