//! Monotone non-decreasing check over a pressure window.

use crate::algebra::differentiate;
use crate::constraints::limit::Budget;
use crate::expr::{CompiledExpr, Expr};

/// Outcome of a monotonicity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonotoneOutcome {
    pub pass: bool,
    pub timed_out: bool,
}

fn log_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    let (a, b) = (start.ln(), stop.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn bisect_root(df: &CompiledExpr, params: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = df.eval(params, lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = df.eval(params, mid);
        if fm.is_nan() {
            break;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Whether `after` is not below `before`, up to a relative rounding tolerance.
pub fn non_decreasing(before: f64, after: f64) -> bool {
    after - before >= -1e-12 * before.abs().max(after.abs())
}

/// Locates critical points as roots of the derivative (bracketed on a
/// log-spaced sign-change scan), then requires the function not to decrease
/// between any two consecutive points of the scan, the critical points and the
/// window ends. Any undefined value inside the window fails the check.
pub fn check_monotone(
    e: &Expr,
    params: &[f64],
    start: f64,
    stop: f64,
    scan_points: usize,
    budget: &Budget,
) -> MonotoneOutcome {
    let fail = MonotoneOutcome {
        pass: false,
        timed_out: false,
    };
    if !e.has_var() {
        return MonotoneOutcome {
            pass: !e.eval(params, 1.0).is_nan(),
            timed_out: false,
        };
    }
    let f = CompiledExpr::new(e);
    let grid = log_grid(start, stop, scan_points.max(2));
    let mut points = grid.clone();
    if let Ok(d) = differentiate(e) {
        let df = CompiledExpr::new(&d);
        let slopes: Vec<f64> = grid.iter().map(|&p| df.eval(params, p)).collect();
        for (i, w) in slopes.windows(2).enumerate() {
            if i % 32 == 0 && budget.expired() {
                return MonotoneOutcome {
                    pass: false,
                    timed_out: true,
                };
            }
            let (a, b) = (w[0], w[1]);
            if a.is_nan() || b.is_nan() {
                continue;
            }
            if (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0) {
                points.push(bisect_root(&df, params, grid[i], grid[i + 1]));
            }
        }
    }
    points.sort_by(f64::total_cmp);
    let mut prev: Option<f64> = None;
    for (i, &p) in points.iter().enumerate() {
        if i % 64 == 0 && budget.expired() {
            return MonotoneOutcome {
                pass: false,
                timed_out: true,
            };
        }
        let v = f.eval(params, p);
        if v.is_nan() {
            return fail;
        }
        if let Some(u) = prev {
            if !non_decreasing(u, v) {
                return fail;
            }
        }
        prev = Some(v);
    }
    MonotoneOutcome {
        pass: true,
        timed_out: false,
    }
}
