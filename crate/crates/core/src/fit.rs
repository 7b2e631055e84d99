//! Constant fitting: mean squared error and multi-start Nelder–Mead.

use rand::Rng;

use crate::datasets::Dataset;
use crate::expr::{CompiledExpr, Expr};

/// Loss assigned when the model is undefined at any data point.
pub const SENTINEL_LOSS: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative simplex spread at which a run is considered converged.
    pub tol: f64,
    /// Relative spread of objective values at which a run is considered
    /// converged. Stops runs along flat valleys of redundant parameters.
    pub ftol: f64,
    pub start_lo: f64,
    pub start_hi: f64,
    pub positive_prob: f64,
    /// When nonzero, every start first runs for this many iterations and only
    /// the best one continues to convergence.
    pub screen_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 8,
            max_iter: 2000,
            tol: 1e-10,
            ftol: 1e-10,
            start_lo: 1e-2,
            start_hi: 1e2,
            positive_prob: 0.9,
            screen_iter: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub loss: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

fn mse(f: &CompiledExpr, params: &[f64], data: &Dataset, buf: &mut Vec<f64>) -> f64 {
    let Some(values) = f.eval_batch(params, &data.pressures, buf) else {
        return SENTINEL_LOSS;
    };
    let sum: f64 = values
        .iter()
        .zip(&data.loadings)
        .map(|(v, y)| (v - y) * (v - y))
        .sum();
    let l = sum / data.len() as f64;
    if l.is_finite() {
        l.min(SENTINEL_LOSS)
    } else {
        SENTINEL_LOSS
    }
}

/// Mean squared error over the dataset; [`SENTINEL_LOSS`] if the model is
/// undefined anywhere on it.
pub fn l2_loss(e: &Expr, params: &[f64], data: &Dataset) -> f64 {
    if params.len() < e.max_param() {
        return SENTINEL_LOSS;
    }
    mse(&CompiledExpr::new(e), params, data, &mut Vec::new())
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead minimisation with coefficients (1, 2, 0.5, 0.5). Stops when
/// the simplex or the spread of its values is small enough.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    max_iter: usize,
    tol: f64,
    ftol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    if n == 0 {
        return NelderMeadResult {
            x: Vec::new(),
            f: f(&[]),
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * 1.1 } else { 2.5e-4 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < max_iter {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        let spread = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())))
            .fold(0.0, f64::max);
        let fspread = values[worst] - values[best];
        if spread < tol || fspread <= ftol * values[best].abs() {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < values[best] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let xb = simplex[best].clone();
        for &i in &order[1..] {
            let shrunk: Vec<f64> = simplex[i]
                .iter()
                .zip(&xb)
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            values[i] = f(&shrunk);
            simplex[i] = shrunk;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    NelderMeadResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}

/// Draws a start point: log-uniform magnitude, mostly positive sign.
pub fn random_start<R: Rng + ?Sized>(k: usize, cfg: &FitConfig, rng: &mut R) -> Vec<f64> {
    let (lo, hi) = (cfg.start_lo.ln(), cfg.start_hi.ln());
    (0..k)
        .map(|_| {
            let mag = rng.random_range(lo..=hi).exp();
            if rng.random_bool(cfg.positive_prob) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Fits parameters from `cfg.restarts` random starts and returns the best,
/// polished by one more simplex started at its optimum. With screening on,
/// only the most promising start is run to convergence.
pub fn fit_constants<R: Rng + ?Sized>(e: &Expr, data: &Dataset, cfg: &FitConfig, rng: &mut R) -> FitResult {
    let k = e.max_param();
    let compiled = CompiledExpr::new(e);
    let mut stack = Vec::new();
    let mut objective = |x: &[f64]| mse(&compiled, x, data, &mut stack);
    if k == 0 {
        return FitResult {
            params: Vec::new(),
            loss: objective(&[]),
            restarts_used: 0,
            converged: true,
        };
    }
    let first_iters = if cfg.screen_iter > 0 { cfg.screen_iter.min(cfg.max_iter) } else { cfg.max_iter };
    let mut best: Option<NelderMeadResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let start = random_start(k, cfg, rng);
        let run = nelder_mead(&mut objective, &start, first_iters, cfg.tol, cfg.ftol);
        if best.as_ref().is_none_or(|b| run.f < b.f) {
            best = Some(run);
        }
    }
    let mut best = best.unwrap();
    if first_iters < cfg.max_iter && !best.converged && best.f < SENTINEL_LOSS {
        let more = nelder_mead(&mut objective, &best.x, cfg.max_iter, cfg.tol, cfg.ftol);
        if more.f <= best.f {
            best = more;
        }
    }
    if best.f < SENTINEL_LOSS {
        let again = nelder_mead(&mut objective, &best.x, cfg.max_iter, cfg.tol, cfg.ftol);
        if again.f <= best.f {
            best = again;
        }
    }
    FitResult {
        params: best.x,
        loss: best.f,
        restarts_used: cfg.restarts.max(1),
        converged: best.converged,
    }
}

/// One simplex run from `x0`, for local refinement of already fitted values.
pub fn polish(e: &Expr, data: &Dataset, x0: &[f64], cfg: &FitConfig) -> FitResult {
    let compiled = CompiledExpr::new(e);
    let mut stack = Vec::new();
    let r = nelder_mead(|x| mse(&compiled, x, data, &mut stack), x0, cfg.max_iter, cfg.tol, cfg.ftol);
    FitResult {
        params: r.x,
        loss: r.f,
        restarts_used: 1,
        converged: r.converged,
    }
}
