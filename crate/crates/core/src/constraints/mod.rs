//! The three thermodynamic consistency checks.
//!
//! 1. `f(p) -> 0` as `p -> 0+`.
//! 2. `f'(p)` tends to a positive finite constant as `p -> 0+`.
//! 3. `f` is non-decreasing over the pressure window.

mod limit;
mod monotone;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::RwLock;

use crate::algebra::{canonical_form, differentiate, simplify, CanonicalForm};
use crate::expr::Expr;

pub use limit::{limit_at_zero_plus, Budget, Limit, LimitMethod, LimitValue};
pub use monotone::{check_monotone, non_decreasing, MonotoneOutcome};

/// Result of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub pass: bool,
    pub timed_out: bool,
    pub elapsed: Duration,
}

/// Per-constraint outcomes. Entries are `None` for checks that were not requested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConstraintVerdict {
    pub outcomes: [Option<CheckOutcome>; 3],
}

impl ConstraintVerdict {
    /// A verdict with all three checks present and untimed.
    pub fn from_passes(pass: [bool; 3]) -> Self {
        let o = |pass| {
            Some(CheckOutcome {
                pass,
                timed_out: false,
                elapsed: Duration::ZERO,
            })
        };
        ConstraintVerdict {
            outcomes: [o(pass[0]), o(pass[1]), o(pass[2])],
        }
    }

    /// Whether check `i` (0-based) ran and passed.
    pub fn pass(&self, i: usize) -> bool {
        self.outcomes[i].is_some_and(|o| o.pass)
    }

    pub fn c1_pass(&self) -> bool {
        self.pass(0)
    }

    pub fn c2_pass(&self) -> bool {
        self.pass(1)
    }

    pub fn c3_pass(&self) -> bool {
        self.pass(2)
    }

    pub fn all_pass(&self) -> bool {
        (0..3).all(|i| self.pass(i))
    }

    pub fn any_timed_out(&self) -> bool {
        self.outcomes.iter().flatten().any(|o| o.timed_out)
    }
}

/// Which checks to run.
pub type CheckMask = [bool; 3];

pub const ALL_CHECKS: CheckMask = [true, true, true];

/// Settings shared by every check.
#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub budget: Duration,
    pub start: f64,
    pub stop: f64,
    pub scan_points: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            budget: Duration::from_millis(100),
            start: 1e-8,
            stop: 1e3,
            scan_points: 512,
        }
    }
}

impl CheckConfig {
    /// Window upper bound set to ten times the largest observed pressure.
    pub fn for_max_pressure(max_pressure: f64) -> Self {
        CheckConfig {
            stop: 10.0 * max_pressure,
            ..CheckConfig::default()
        }
    }
}

fn timed<T>(f: impl FnOnce() -> (bool, bool, T)) -> CheckOutcome {
    let t0 = Instant::now();
    let (pass, timed_out, _) = f();
    CheckOutcome {
        pass: pass && !timed_out,
        timed_out,
        elapsed: t0.elapsed(),
    }
}

/// True iff the limit at `0+` is zero: exact for symbolic paths,
/// within `1e-10` for the numeric fallback.
pub fn constraint1(e: &Expr, params: &[f64], budget: &Budget) -> CheckOutcome {
    timed(|| {
        let l = limit_at_zero_plus(e, params, budget);
        let pass = match l.value {
            LimitValue::Finite(v) => match l.method {
                LimitMethod::Numeric => v.abs() <= 1e-10,
                _ => v == 0.0,
            },
            _ => false,
        };
        (pass, l.timed_out, ())
    })
}

/// True iff every subtree free of `p` evaluates to a finite number.
fn constants_defined(e: &Expr, params: &[f64]) -> bool {
    if !e.has_var() {
        return e.eval(params, 0.0).is_finite();
    }
    match e {
        Expr::Unary(_, a) => constants_defined(a, params),
        Expr::Binary(_, a, b) => constants_defined(a, params) && constants_defined(b, params),
        _ => true,
    }
}

/// True iff the limiting slope at `0+` is finite and strictly positive.
pub fn constraint2(e: &Expr, params: &[f64], budget: &Budget) -> CheckOutcome {
    timed(|| match differentiate(&simplify(e)) {
        Ok(_) if !constants_defined(e, params) => (false, false, ()),
        Ok(d) => {
            let l = limit_at_zero_plus(&d, params, budget);
            let pass = matches!(l.value, LimitValue::Finite(c) if c > 0.0 && c.is_finite());
            (pass, l.timed_out, ())
        }
        Err(_) => (false, false, ()),
    })
}

pub fn constraint3(e: &Expr, params: &[f64], cfg: &CheckConfig, budget: &Budget) -> CheckOutcome {
    timed(|| {
        let m = check_monotone(e, params, cfg.start, cfg.stop, cfg.scan_points, budget);
        (m.pass, m.timed_out, ())
    })
}

/// Limiting slope, for reporting.
pub fn limiting_slope(e: &Expr, params: &[f64]) -> Option<LimitValue> {
    let d = differentiate(&simplify(e)).ok()?;
    Some(limit_at_zero_plus(&d, params, &Budget::unlimited()).value)
}

/// Runs the requested checks, each under its own budget.
pub fn check_expr(e: &Expr, params: &[f64], cfg: &CheckConfig, mask: CheckMask) -> ConstraintVerdict {
    let budget = || Budget::until(Instant::now() + cfg.budget);
    let mut v = ConstraintVerdict::default();
    if mask[0] {
        v.outcomes[0] = Some(constraint1(e, params, &budget()));
    }
    if mask[1] {
        v.outcomes[1] = Some(constraint2(e, params, &budget()));
    }
    if mask[2] {
        v.outcomes[2] = Some(constraint3(e, params, cfg, &budget()));
    }
    v
}

/// Rounds to six significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

const DEFAULT_MEMO_CAP: usize = 200_000;

/// Memoising front end to the checks. Results are keyed by the fitted-value
/// canonical string plus coefficients rounded to six significant digits, and
/// the checks themselves run on that rounded canonical instance, so cached and
/// uncached verdicts agree.
pub struct ConstraintChecker {
    cfg: CheckConfig,
    memo: RwLock<HashMap<String, ConstraintVerdict>>,
    cap: usize,
    invocations: AtomicU64,
}

impl ConstraintChecker {
    pub fn new(cfg: CheckConfig) -> Self {
        let cap = std::env::var("ISOSR_MEMO_CAP")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_MEMO_CAP);
        ConstraintChecker {
            cfg,
            memo: RwLock::new(HashMap::new()),
            cap,
            invocations: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &CheckConfig {
        &self.cfg
    }

    /// Number of calls to [`check`](Self::check) and friends so far.
    pub fn invocations(&self) -> u64 {
        self.invocations.load(Ordering::Relaxed)
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().len()
    }

    /// Checks a raw expression with fitted parameters.
    pub fn check(&self, e: &Expr, params: &[f64], mask: CheckMask) -> ConstraintVerdict {
        match canonical_form(e, Some(params)) {
            Ok(cf) => self.check_canonical(&cf, mask),
            Err(_) => {
                self.invocations.fetch_add(1, Ordering::Relaxed);
                ConstraintVerdict::default()
            }
        }
    }

    /// Checks a fitted-value canonical form.
    pub fn check_canonical(&self, cf: &CanonicalForm, mask: CheckMask) -> ConstraintVerdict {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        let rounded: Vec<f64> = cf.params.iter().map(|&x| round_sig6(x)).collect();
        let mut key = cf.string.clone();
        for x in &rounded {
            key.push('|');
            key.push_str(&format!("{x:e}"));
        }
        let cached = self.memo.read().get(&key).copied();
        let mut verdict = cached.unwrap_or_default();
        let missing: CheckMask = std::array::from_fn(|i| mask[i] && verdict.outcomes[i].is_none());
        if missing.iter().any(|&m| m) {
            let fresh = check_expr(&cf.expr, &rounded, &self.cfg, missing);
            for i in 0..3 {
                if missing[i] {
                    verdict.outcomes[i] = fresh.outcomes[i];
                }
            }
            let mut memo = self.memo.write();
            if memo.len() >= self.cap {
                memo.clear();
            }
            let entry = memo.entry(key).or_default();
            for i in 0..3 {
                if entry.outcomes[i].is_none() {
                    entry.outcomes[i] = verdict.outcomes[i];
                }
            }
            verdict = *entry;
        }
        let mut out = ConstraintVerdict::default();
        for i in 0..3 {
            if mask[i] {
                out.outcomes[i] = verdict.outcomes[i];
            }
        }
        out
    }

    pub fn check_all(&self, e: &Expr, params: &[f64]) -> ConstraintVerdict {
        self.check(e, params, ALL_CHECKS)
    }
}
