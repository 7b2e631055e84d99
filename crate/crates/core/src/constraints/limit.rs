//! One-sided limits at `p -> 0+`.
//!
//! Rational expressions are handled exactly. Everything else goes through a
//! generalised power series `sum c_i p^e_i` (real exponents, so `sqrt(p)` and
//! fractional powers are covered), and only then through a numeric trend
//! analysis.

use std::time::Instant;

use num_traits::{Signed, Zero};

use crate::algebra::{self, poly::q_to_f64};
use crate::expr::{Expr, OpKind};

/// Wall-clock budget for a single check.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget { deadline: None }
    }

    pub fn until(deadline: Instant) -> Self {
        Budget {
            deadline: Some(deadline),
        }
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LimitValue {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
    Undefined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitMethod {
    Exact,
    Series,
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limit {
    pub value: LimitValue,
    pub method: LimitMethod,
    pub timed_out: bool,
}

impl Limit {
    fn new(value: LimitValue, method: LimitMethod) -> Self {
        Limit {
            value,
            method,
            timed_out: false,
        }
    }
}

/// Limit of `e` as `p -> 0+` with the given parameter values.
pub fn limit_at_zero_plus(e: &Expr, params: &[f64], budget: &Budget) -> Limit {
    if let Some(r) = algebra::rational_form(e, params) {
        return Limit::new(rational_limit(&r), LimitMethod::Exact);
    }
    if budget.expired() {
        return timed_out();
    }
    match series_of(e, params, budget) {
        Ok(s) => {
            if let Some(v) = s.limit() {
                return Limit::new(v, LimitMethod::Series);
            }
        }
        Err(SeriesError::Undefined) => {
            return Limit::new(LimitValue::Undefined, LimitMethod::Series)
        }
        Err(SeriesError::Timeout) => return timed_out(),
        Err(SeriesError::Unknown) => {}
    }
    Limit::new(numeric_limit(e, params), LimitMethod::Numeric)
}

fn timed_out() -> Limit {
    Limit {
        value: LimitValue::Undefined,
        method: LimitMethod::Numeric,
        timed_out: true,
    }
}

fn rational_limit(r: &algebra::RationalForm) -> LimitValue {
    let Some(i) = r.num().low_order() else {
        return LimitValue::Finite(0.0);
    };
    let j = r.den().low_order().expect("denominator is nonzero");
    let ratio = &r.num().coeffs()[i] / &r.den().coeffs()[j];
    if i > j {
        LimitValue::Finite(0.0)
    } else if i == j {
        LimitValue::Finite(q_to_f64(&ratio))
    } else if ratio.is_positive() {
        LimitValue::PlusInfinity
    } else if ratio.is_zero() {
        LimitValue::Finite(0.0)
    } else {
        LimitValue::MinusInfinity
    }
}

const ORDER: f64 = 3.0;
const MAX_TERMS: usize = 48;
const EXP_EPS: f64 = 1e-9;
const CANCEL: f64 = 1e-12;
const MAX_SERIES_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SeriesError {
    /// The expression is undefined on a whole interval `(0, eps)`.
    Undefined,
    /// Not enough information survived truncation.
    Unknown,
    Timeout,
}

/// `sum c p^e + O(p^horizon)` with exponents ascending and below `horizon`.
#[derive(Clone, Debug)]
struct Series {
    terms: Vec<(f64, f64)>,
    horizon: f64,
}

impl Series {
    fn exact(terms: Vec<(f64, f64)>) -> Self {
        Series::normalize(terms, f64::INFINITY, None)
    }

    fn constant(c: f64) -> Self {
        Series::exact(vec![(0.0, c)])
    }

    fn lead_exp(&self) -> f64 {
        self.terms.first().map_or(self.horizon, |t| t.0)
    }

    fn normalize(mut terms: Vec<(f64, f64)>, horizon: f64, cap: Option<f64>) -> Self {
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(terms.len());
        let mut scale: Vec<f64> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match merged.last_mut() {
                Some(last) if (e - last.0).abs() <= EXP_EPS => {
                    last.1 += c;
                    let s = scale.last_mut().unwrap();
                    *s = s.max(c.abs());
                }
                _ => {
                    merged.push((e, c));
                    scale.push(c.abs());
                }
            }
        }
        let mut horizon = horizon;
        let mut out: Vec<(f64, f64)> = merged
            .into_iter()
            .zip(scale)
            .filter(|((e, c), s)| *c != 0.0 && c.abs() > CANCEL * s && *e < horizon - EXP_EPS)
            .map(|(t, _)| t)
            .collect();
        if let Some(&(lead, _)) = out.first() {
            let cut = cap.unwrap_or(lead + ORDER).min(lead + ORDER);
            if let Some(pos) = out.iter().position(|t| t.0 >= cut - EXP_EPS) {
                horizon = horizon.min(out[pos].0);
                out.truncate(pos);
            }
            if out.len() > MAX_TERMS {
                horizon = horizon.min(out[MAX_TERMS].0);
                out.truncate(MAX_TERMS);
            }
        }
        Series {
            terms: out,
            horizon,
        }
    }

    fn add(&self, o: &Series) -> Series {
        let mut t = self.terms.clone();
        t.extend_from_slice(&o.terms);
        Series::normalize(t, self.horizon.min(o.horizon), None)
    }

    fn neg(&self) -> Series {
        Series {
            terms: self.terms.iter().map(|&(e, c)| (e, -c)).collect(),
            horizon: self.horizon,
        }
    }

    fn mul_capped(&self, o: &Series, cap: Option<f64>) -> Series {
        let h = (self.horizon + o.lead_exp()).min(o.horizon + self.lead_exp());
        let mut t = Vec::with_capacity(self.terms.len() * o.terms.len());
        for &(ea, ca) in &self.terms {
            for &(eb, cb) in &o.terms {
                t.push((ea + eb, ca * cb));
            }
        }
        Series::normalize(t, h, cap)
    }

    fn mul(&self, o: &Series) -> Series {
        self.mul_capped(o, None)
    }

    fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.horizon == f64::INFINITY
    }

    /// Applies `(1 + r)^k` via the binomial series, where `self = a0 p^e0 (1 + r)`.
    fn binomial_power(&self, k: f64, budget: &Budget) -> Result<Series, SeriesError> {
        let Some(&(e0, a0)) = self.terms.first() else {
            if self.is_exact_zero() && k > 0.0 {
                return Ok(Series::exact(Vec::new()));
            }
            return Err(if self.is_exact_zero() {
                SeriesError::Undefined
            } else {
                SeriesError::Unknown
            });
        };
        let scale = if k.fract() == 0.0 {
            a0.powf(k)
        } else if a0 < 0.0 {
            return Err(SeriesError::Undefined);
        } else {
            a0.powf(k)
        };
        let r = Series {
            terms: self.terms[1..].iter().map(|&(e, c)| (e - e0, c / a0)).collect(),
            horizon: self.horizon - e0,
        };
        let h = if r.is_exact_zero() {
            f64::INFINITY
        } else {
            r.horizon.min(ORDER)
        };
        let mut acc = vec![(0.0, 1.0)];
        let mut pw = Series::constant(1.0);
        let mut coef = 1.0;
        for n in 1..=MAX_SERIES_STEPS {
            if budget.expired() {
                return Err(SeriesError::Timeout);
            }
            coef *= (k - (n as f64 - 1.0)) / n as f64;
            if coef == 0.0 {
                break;
            }
            pw = pw.mul_capped(&r, Some(h));
            if pw.terms.is_empty() {
                break;
            }
            acc.extend(pw.terms.iter().map(|&(e, c)| (e, coef * c)));
            if pw.lead_exp() >= h {
                break;
            }
        }
        let body = Series::normalize(acc, h, Some(h));
        Ok(Series {
            terms: body
                .terms
                .iter()
                .map(|&(e, c)| (e + e0 * k, c * scale))
                .collect(),
            horizon: body.horizon + e0 * k,
        })
    }

    fn powf(&self, k: f64, budget: &Budget) -> Result<Series, SeriesError> {
        if !k.is_finite() {
            return Err(SeriesError::Unknown);
        }
        if k.fract() == 0.0 && (0.0..=8.0).contains(&k) {
            let mut out = Series::constant(1.0);
            for _ in 0..k as usize {
                out = out.mul(self);
            }
            return Ok(out);
        }
        self.binomial_power(k, budget)
    }

    fn limit(&self) -> Option<LimitValue> {
        let Some(&(e, c)) = self.terms.first() else {
            return (self.horizon == f64::INFINITY).then_some(LimitValue::Finite(0.0));
        };
        Some(if e > EXP_EPS {
            LimitValue::Finite(0.0)
        } else if e >= -EXP_EPS {
            LimitValue::Finite(c)
        } else if c > 0.0 {
            LimitValue::PlusInfinity
        } else {
            LimitValue::MinusInfinity
        })
    }
}

fn series_of(e: &Expr, params: &[f64], budget: &Budget) -> Result<Series, SeriesError> {
    if budget.expired() {
        return Err(SeriesError::Timeout);
    }
    Ok(match e {
        Expr::Var => Series::exact(vec![(1.0, 1.0)]),
        Expr::Param(_) | Expr::Int(_) => {
            let v = e.eval(params, 1.0);
            if v.is_nan() {
                return Err(SeriesError::Undefined);
            }
            Series::constant(v)
        }
        Expr::Unary(op, a) => {
            let s = series_of(a, params, budget)?;
            match op {
                OpKind::Sqrt => s.powf(0.5, budget)?,
                OpKind::Square => s.mul(&s),
                OpKind::Cube => s.mul(&s).mul(&s),
                _ => return Err(SeriesError::Unknown),
            }
        }
        Expr::Binary(op, a, b) => {
            let x = series_of(a, params, budget)?;
            match op {
                OpKind::Pow => {
                    if b.has_var() {
                        return Err(SeriesError::Unknown);
                    }
                    let k = b.eval(params, 1.0);
                    if k.is_nan() {
                        return Err(SeriesError::Undefined);
                    }
                    x.powf(k, budget)?
                }
                _ => {
                    let y = series_of(b, params, budget)?;
                    match op {
                        OpKind::Add => x.add(&y),
                        OpKind::Sub => x.add(&y.neg()),
                        OpKind::Mul => x.mul(&y),
                        OpKind::Div => x.mul(&y.powf(-1.0, budget)?),
                        _ => return Err(SeriesError::Unknown),
                    }
                }
            }
        }
    })
}

/// Trend classification from samples at `p = 1e-4, 1e-6, 1e-8, 1e-10`.
pub(crate) fn numeric_limit(e: &Expr, params: &[f64]) -> LimitValue {
    let v: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10]
        .iter()
        .map(|&p| e.eval(params, p))
        .collect();
    if v.iter().any(|x| x.is_nan()) {
        return LimitValue::Undefined;
    }
    if v.iter().all(|&x| x == 0.0) {
        return LimitValue::Finite(0.0);
    }
    let same_sign = v.iter().all(|&x| x > 0.0) || v.iter().all(|&x| x < 0.0);
    let growing = same_sign && v.windows(2).skip(1).all(|w| w[1].abs() > 2.0 * w[0].abs());
    if growing {
        return if v[3] > 0.0 {
            LimitValue::PlusInfinity
        } else {
            LimitValue::MinusInfinity
        };
    }
    let (d1, d2) = (v[2] - v[1], v[3] - v[2]);
    if d1 != 0.0 && d2 != 0.0 && d1.signum() != d2.signum() && d2.abs() > 1e-6 * v[3].abs().max(1.0) {
        return LimitValue::Undefined;
    }
    let denom = d2 - d1;
    let extrapolated = if denom != 0.0 && (d2 * d2 / denom).is_finite() && d2.abs() < d1.abs() {
        v[3] - d2 * d2 / denom
    } else {
        v[3]
    };
    if extrapolated.abs() <= 1e-10 {
        LimitValue::Finite(0.0)
    } else {
        LimitValue::Finite(extrapolated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn lim(src: &str, params: &[f64]) -> Limit {
        limit_at_zero_plus(&parse(src).unwrap(), params, &Budget::unlimited())
    }

    #[test]
    fn rational_limits() {
        assert_eq!(lim("c1*p/(c2+p)", &[5.0, 2.0]).value, LimitValue::Finite(0.0));
        assert_eq!(lim("(c1*p+c2)/(c3+p)", &[5.0, 1.0, 2.0]).value, LimitValue::Finite(0.5));
        assert_eq!(lim("c1/p", &[1.0]).value, LimitValue::PlusInfinity);
        assert_eq!(lim("c1/p", &[-1.0]).value, LimitValue::MinusInfinity);
        assert_eq!(lim("c1*p/(c2+p)", &[5.0, 2.0]).method, LimitMethod::Exact);
    }

    #[test]
    fn series_limits() {
        let l = lim("c1*sqrt(p)", &[1.0]);
        assert_eq!(l.value, LimitValue::Finite(0.0));
        assert_eq!(l.method, LimitMethod::Series);
        assert_eq!(lim("1/(2*sqrt(p))", &[]).value, LimitValue::PlusInfinity);
        assert_eq!(lim("sqrt(p + c1)", &[4.0]).value, LimitValue::Finite(2.0));
        assert_eq!(lim("sqrt(p - c1)", &[4.0]).value, LimitValue::Undefined);
        assert_eq!(lim("sqrt(p)/sqrt(p)", &[]).value, LimitValue::Finite(1.0));
        assert_eq!(lim("(sqrt(p + 1) - 1)/p", &[]).value, LimitValue::Finite(0.5));
        assert_eq!(lim("c1 * p ^ c2", &[2.0, 0.5]).value, LimitValue::Finite(0.0));
        assert_eq!(lim("c1 * p ^ c2", &[2.0, -0.5]).value, LimitValue::PlusInfinity);
    }

    #[test]
    fn series_handles_cancellation() {
        let l = lim("(sqrt(p + 1) - sqrt(1 - p)) / p", &[]);
        match l.value {
            LimitValue::Finite(v) => assert!((v - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn numeric_trend_classification() {
        let e = parse("sqrt(p)").unwrap();
        assert_eq!(numeric_limit(&e, &[]), LimitValue::Finite(0.0));
        let e = parse("1/p").unwrap();
        assert_eq!(numeric_limit(&e, &[]), LimitValue::PlusInfinity);
        let e = parse("sqrt(p) + 3").unwrap();
        match numeric_limit(&e, &[]) {
            LimitValue::Finite(v) => assert!((v - 3.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        let e = parse("sqrt(0 - p)").unwrap();
        assert_eq!(numeric_limit(&e, &[]), LimitValue::Undefined);
    }
}
