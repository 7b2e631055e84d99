//! Symbolic manipulation: differentiation, simplification, and canonical forms.

mod canon;
mod mpoly;
pub mod poly;

use std::collections::BTreeMap;

use crate::expr::{Expr, OpKind};
pub use poly::{Poly, RationalForm};

pub(crate) use canon::{as_rational, values_from_f64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("cannot differentiate a power whose exponent depends on p")]
    VariableExponent,
    #[error("expression references c{needed} but only {got} parameter value(s) were supplied")]
    MissingParams { needed: usize, got: usize },
    #[error("parameter values must be finite")]
    NonFiniteParam,
}

/// Result of canonicalisation.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    /// Canonical tree with parameters `c1..cK` in left-to-right order.
    pub expr: Expr,
    /// Coefficient values that make `expr` equal to the input under the
    /// substituted (or fitted) constants.
    pub params: Vec<f64>,
    /// Rendering of `expr`; equal strings mean structurally equal forms.
    pub string: String,
    pub complexity: usize,
    /// Values stood in for the input's `c1..cK` (primes, or the fitted values).
    pub substitution: Vec<f64>,
    /// Set when prime substitution kept producing inconsistent structures.
    pub unreliable: bool,
}

impl CanonicalForm {
    /// Wraps a tree unchanged, for forms that could not be canonicalised.
    pub fn verbatim(expr: Expr, params: Vec<f64>, unreliable: bool) -> Self {
        CanonicalForm {
            string: expr.render(),
            complexity: expr.complexity(),
            substitution: params.clone(),
            expr,
            params,
            unreliable,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

/// Primes `2, 3, 5, ...`, at least `n` of them.
pub fn primes(n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(n);
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= k).all(|&p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Replaces each distinct parameter with a distinct prime, starting at the
/// `offset`-th prime. Parameter `ck` gets the `(offset + k)`-th prime.
pub fn substitute_primes(e: &Expr, offset: usize) -> (Expr, BTreeMap<usize, u64>) {
    let k = e.max_param();
    let ps = primes(offset + k);
    let map: BTreeMap<usize, u64> = (1..=k).map(|i| (i, ps[offset + i - 1])).collect();
    (substitute(e, &|i| Expr::Int(map[&i] as i64)), map)
}

fn substitute(e: &Expr, f: &impl Fn(usize) -> Expr) -> Expr {
    match e {
        Expr::Param(k) => f(*k),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(substitute(a, f))),
        Expr::Binary(op, a, b) => {
            Expr::Binary(*op, Box::new(substitute(a, f)), Box::new(substitute(b, f)))
        }
        leaf => leaf.clone(),
    }
}

/// Number of prime sequence pairs tried before flagging a form unreliable.
const PRIME_ATTEMPTS: usize = 4;

fn canonical_with(e: &Expr, values: &[poly::Q]) -> (Expr, Vec<f64>) {
    let node = canon::build(e, values);
    let mut r = canon::Renderer::new();
    let out = r.render(&node);
    (out, canon::to_f64_vec(&r.coeffs))
}

fn finish(expr: Expr, params: Vec<f64>, substitution: &[poly::Q], unreliable: bool) -> CanonicalForm {
    CanonicalForm {
        string: expr.render(),
        complexity: expr.complexity(),
        expr,
        params,
        substitution: canon::to_f64_vec(substitution),
        unreliable,
    }
}

/// Canonical form of `e`. With `fitted` values the constants are substituted
/// exactly; without, distinct primes stand in for the parameters and the
/// result is cross-checked against a second, disjoint prime sequence.
pub fn canonical_form(e: &Expr, fitted: Option<&[f64]>) -> Result<CanonicalForm, AlgebraError> {
    let k = e.max_param();
    if let Some(vals) = fitted {
        if vals.len() < k {
            return Err(AlgebraError::MissingParams {
                needed: k,
                got: vals.len(),
            });
        }
        let q = values_from_f64(vals).ok_or(AlgebraError::NonFiniteParam)?;
        let (expr, params) = canonical_with(e, &q);
        return Ok(finish(expr, params, &q, false));
    }
    if k == 0 {
        let (expr, params) = canonical_with(e, &[]);
        return Ok(finish(expr, params, &[], false));
    }
    let ps = primes(2 * PRIME_ATTEMPTS * k);
    let seq = |s: usize| -> Vec<poly::Q> {
        ps[s * k..(s + 1) * k]
            .iter()
            .map(|&p| poly::q_int(p as i64))
            .collect()
    };
    let mut first = None;
    for attempt in 0..PRIME_ATTEMPTS {
        let values = seq(2 * attempt);
        let a = canonical_with(e, &values);
        let b = canonical_with(e, &seq(2 * attempt + 1));
        if a.0 == b.0 {
            return Ok(finish(a.0, a.1, &values, false));
        }
        first.get_or_insert((a, values));
    }
    let ((expr, params), values) = first.unwrap();
    Ok(finish(expr, params, &values, true))
}

/// Exact rational function of `e` under the given parameter values, if `e`
/// is rational.
pub fn rational_form(e: &Expr, params: &[f64]) -> Option<RationalForm> {
    if params.len() < e.max_param() {
        return None;
    }
    as_rational(e, &values_from_f64(params)?)
}

fn int_of(e: &Expr) -> Option<i64> {
    match e {
        Expr::Int(n) => Some(*n),
        _ => None,
    }
}

fn fold_ints(op: OpKind, a: i64, b: i64) -> Option<i64> {
    match op {
        OpKind::Add => a.checked_add(b),
        OpKind::Sub => a.checked_sub(b),
        OpKind::Mul => a.checked_mul(b),
        OpKind::Div => (b != 0 && a % b == 0).then(|| a / b),
        OpKind::Pow => u32::try_from(b).ok().and_then(|e| a.checked_pow(e)),
        _ => None,
    }
}

/// Local rewrites that never increase the node count: integer constant
/// folding and the identities `x+0`, `x-0`, `x*1`, `x/1`, `x^1`, `x-x`, `x/x`.
/// The last two assume the subtree is defined and nonzero.
pub fn simplify_local(e: &Expr) -> Expr {
    match e {
        Expr::Unary(op, a) => {
            let a = simplify_local(a);
            if let Some(n) = int_of(&a) {
                let folded = match op {
                    OpKind::Square => n.checked_mul(n),
                    OpKind::Cube => n.checked_mul(n).and_then(|m| m.checked_mul(n)),
                    _ => {
                        let r = (n as f64).sqrt();
                        (n >= 0 && r.fract() == 0.0).then_some(r as i64)
                    }
                };
                if let Some(v) = folded {
                    return Expr::Int(v);
                }
            }
            Expr::unary(*op, a)
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (simplify_local(a), simplify_local(b));
            if let (Some(x), Some(y)) = (int_of(&a), int_of(&b)) {
                if let Some(v) = fold_ints(*op, x, y) {
                    return Expr::Int(v);
                }
            }
            let (ia, ib) = (int_of(&a), int_of(&b));
            match op {
                OpKind::Add if ib == Some(0) => return a,
                OpKind::Add if ia == Some(0) => return b,
                OpKind::Sub if ib == Some(0) => return a,
                OpKind::Sub if a == b => return Expr::Int(0),
                OpKind::Mul if ib == Some(1) => return a,
                OpKind::Mul if ia == Some(1) => return b,
                OpKind::Div if ib == Some(1) => return a,
                OpKind::Div if a == b => return Expr::Int(1),
                OpKind::Pow if ib == Some(1) => return a,
                _ => {}
            }
            Expr::binary(*op, a, b)
        }
        leaf => leaf.clone(),
    }
}

fn is_rational_expr(e: &Expr) -> bool {
    match e {
        Expr::Param(0) => false,
        Expr::Unary(OpKind::Sqrt, _) => false,
        Expr::Unary(_, a) => is_rational_expr(a),
        Expr::Binary(OpKind::Pow, a, b) => {
            !b.has_var() && !b.has_param() && is_rational_expr(a)
        }
        Expr::Binary(_, a, b) => is_rational_expr(a) && is_rational_expr(b),
        _ => true,
    }
}

/// Value-preserving simplification: local rewrites, then rational subtrees
/// are expanded and brought over a common denominator unless that more than
/// doubles their size (expanded powers evaluate poorly near their roots).
pub fn simplify(e: &Expr) -> Expr {
    let local = simplify_local(e);
    if is_rational_expr(&local) {
        if let Some(r) = mpoly::together(&local).and_then(|m| mpoly::render(&m)) {
            let r = simplify_local(&r);
            if r.complexity() <= 2 * local.complexity() {
                return r;
            }
        }
    }
    match &local {
        Expr::Unary(op, a) => simplify_local(&Expr::unary(*op, simplify(a))),
        Expr::Binary(op, a, b) => simplify_local(&Expr::binary(*op, simplify(a), simplify(b))),
        leaf => leaf.clone(),
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Int(0))
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Int(1))
}

fn d_add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::add(a, b)
    }
}

fn d_sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        d_mul(Expr::Int(-1), b)
    } else {
        Expr::sub(a, b)
    }
}

fn d_mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Int(0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::mul(a, b)
    }
}

fn d_div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Int(0)
    } else if is_one(&b) {
        a
    } else {
        Expr::div(a, b)
    }
}

/// Symbolic derivative with respect to `p` by the sum, product, quotient and
/// chain rules. Only trivial zero and one factors are removed.
pub fn differentiate(e: &Expr) -> Result<Expr, AlgebraError> {
    Ok(match e {
        Expr::Var => Expr::Int(1),
        Expr::Param(_) | Expr::Int(_) => Expr::Int(0),
        Expr::Unary(op, a) => {
            let da = differentiate(a)?;
            if is_zero(&da) {
                return Ok(Expr::Int(0));
            }
            let inner = match op {
                OpKind::Sqrt => {
                    return Ok(d_div(da, Expr::mul(Expr::Int(2), Expr::sqrt((**a).clone()))))
                }
                OpKind::Square => d_mul(Expr::Int(2), (**a).clone()),
                OpKind::Cube => d_mul(Expr::Int(3), Expr::square((**a).clone())),
                _ => unreachable!("binary operator in unary node"),
            };
            d_mul(inner, da)
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (&**a, &**b);
            match op {
                OpKind::Add => d_add(differentiate(a)?, differentiate(b)?),
                OpKind::Sub => d_sub(differentiate(a)?, differentiate(b)?),
                OpKind::Mul => d_add(
                    d_mul(differentiate(a)?, b.clone()),
                    d_mul(a.clone(), differentiate(b)?),
                ),
                OpKind::Div => {
                    let num = d_sub(
                        d_mul(differentiate(a)?, b.clone()),
                        d_mul(a.clone(), differentiate(b)?),
                    );
                    d_div(num, Expr::square(b.clone()))
                }
                OpKind::Pow => {
                    if b.has_var() {
                        return Err(AlgebraError::VariableExponent);
                    }
                    let da = differentiate(a)?;
                    let lowered = Expr::pow(a.clone(), d_sub(b.clone(), Expr::Int(1)));
                    d_mul(d_mul(b.clone(), simplify_local(&lowered)), da)
                }
                _ => unreachable!("unary operator in binary node"),
            }
        }
    })
}

/// Numeric equivalence on 50 log-spaced pressures in `[1e-6, 1e3]`.
/// Points where both sides are undefined are skipped.
pub fn equivalent_numeric(a: &Expr, params_a: &[f64], b: &Expr, params_b: &[f64]) -> bool {
    (0..50).all(|i| {
        let p = 10f64.powf(-6.0 + 9.0 * i as f64 / 49.0);
        let (x, y) = (a.eval(params_a, p), b.eval(params_b, p));
        match (x.is_nan(), y.is_nan()) {
            (true, true) => true,
            (false, false) => (x - y).abs() <= 1e-9 * (1.0 + x.abs()),
            _ => false,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn prime_substitution() {
        let (e, map) = substitute_primes(&parse("c1 + c2").unwrap(), 0);
        assert_eq!(e.render(), "2 + 3");
        assert_eq!(map, BTreeMap::from([(1, 2), (2, 3)]));
        let (_, map) = substitute_primes(&parse("c1*c2*c3*c4").unwrap(), 0);
        assert_eq!(map.values().copied().collect::<Vec<_>>(), vec![2, 3, 5, 7]);
    }

    #[test]
    fn repeated_parameter_does_not_become_new_parameter() {
        let c = canonical_form(&parse("c1 + c1").unwrap(), None).unwrap();
        assert_eq!(c.string, "c1");
        assert!(!c.unreliable);
    }

    #[test]
    fn langmuir_is_already_canonical() {
        let e = parse("c1*p/(c2+p)").unwrap();
        let c = canonical_form(&e, None).unwrap();
        assert_eq!(c.string, "(c1 * p) / (c2 + p)");
        assert_eq!(c.complexity, 7);
        let again = canonical_form(&c.expr, None).unwrap();
        assert_eq!(again.string, c.string);
    }

    #[test]
    fn four_constants_reduce_to_three() {
        let e = parse("c1*p/(c2*p^2 + c3*p + c4)").unwrap();
        let c = canonical_form(&e, None).unwrap();
        assert_eq!(c.param_count(), 3);
        assert_eq!(c.string, "(c1 * p) / ((c2 + (c3 * p)) + (p ^ 2))");
    }

    #[test]
    fn worked_example_has_monic_denominator() {
        let e = parse("2*p/(3*p^2 + 4*p + 5)").unwrap();
        let r = rational_form(&e, &[]).unwrap();
        let q = |n: i64, d: i64| poly::Q::new(n.into(), d.into());
        assert_eq!(r.num().coeffs(), &[q(0, 1), q(2, 3)]);
        assert_eq!(r.den().coeffs(), &[q(5, 3), q(4, 3), q(1, 1)]);
        let c = canonical_form(&e, None).unwrap();
        assert_eq!(c.params, vec![2.0 / 3.0, 5.0 / 3.0, 4.0 / 3.0]);
    }

    #[test]
    fn scaled_variable_forms_coincide() {
        let a = canonical_form(&parse("c1*p").unwrap(), None).unwrap();
        let b = canonical_form(&parse("c2*p").unwrap(), None).unwrap();
        let c = canonical_form(&parse("(c1*c2)*p").unwrap(), None).unwrap();
        assert_eq!(a.string, b.string);
        assert_eq!(a.string, c.string);
    }

    #[test]
    fn fitted_mode_keeps_values() {
        let e = parse("c1*p/(c2+p)").unwrap();
        let c = canonical_form(&e, Some(&[5.0, 2.0])).unwrap();
        assert_eq!(c.string, "(c1 * p) / (c2 + p)");
        assert_eq!(c.params, vec![5.0, 2.0]);
        let d = canonical_form(&parse("(c1*p)/(c2*c3 + c2*p)").unwrap(), Some(&[10.0, 2.0, 2.0]))
            .unwrap();
        assert_eq!(d.string, c.string);
        assert_eq!(d.params, vec![5.0, 2.0]);
    }

    #[test]
    fn non_rational_forms_keep_structure() {
        let e = parse("sqrt(p) * c1 * c2 + c3").unwrap();
        let c = canonical_form(&e, None).unwrap();
        assert_eq!(c.string, "(c1 * sqrt(p)) + c2");
        let f = parse("c1 * p ^ c2").unwrap();
        assert_eq!(canonical_form(&f, None).unwrap().string, "c1 * (p ^ c2)");
    }

    #[test]
    fn simplify_identities() {
        let e = parse("(c1*p + 0)/(1*(c2+p))").unwrap();
        let s = simplify(&e);
        assert_eq!(s.complexity(), 7);
        assert!(equivalent_numeric(&e, &[1.5, 2.5], &s, &[1.5, 2.5]));
        assert_eq!(simplify(&parse("p/p").unwrap()), Expr::Int(1));
        assert_eq!(simplify_local(&parse("p - p").unwrap()), Expr::Int(0));
    }

    #[test]
    fn simplify_combines_over_common_denominator() {
        let e = parse("c1/(p+c2) + c3").unwrap();
        let s = simplify(&e);
        assert_eq!(s.render(), "((c3 * p) + (c1 + (c2 * c3))) / (p + c2)");
        let params = [1.7, 0.3, 2.9];
        assert!(equivalent_numeric(&e, &params, &s, &params));
    }

    #[test]
    fn derivatives() {
        assert_eq!(differentiate(&parse("c1*p").unwrap()).unwrap(), Expr::Param(1));
        let d = differentiate(&parse("sqrt(p)").unwrap()).unwrap();
        assert_eq!(d.render(), "1 / (2 * sqrt(p))");
        let l = parse("c1*p/(c2+p)").unwrap();
        let dl = differentiate(&l).unwrap();
        let expected = parse("c1*c2/(c2+p)^2").unwrap();
        assert!(equivalent_numeric(&dl, &[5.0, 2.0], &expected, &[5.0, 2.0]));
        assert!(differentiate(&parse("p ^ p").unwrap()).is_err());
    }

    #[test]
    fn numeric_equivalence() {
        let a = parse("c1*p/(c2+p)").unwrap();
        let b = parse("c1/(1 + c2/p)").unwrap();
        assert!(equivalent_numeric(&a, &[5.0, 2.0], &b, &[5.0, 2.0]));
        let c = parse("c1*p").unwrap();
        let d = parse("c1*p*p").unwrap();
        assert!(!equivalent_numeric(&c, &[1.0], &d, &[1.0]));
    }
}
