//! Canonical forms: rational parts are reduced to `num / den` with a monic
//! denominator, everything else keeps its operator structure with constant
//! terms and factors merged.

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::poly::{q_from_f64, q_int, q_to_f64, Poly, RationalForm, Q};
use crate::expr::{Expr, OpKind};

#[derive(Clone, Debug)]
pub(crate) enum CNode {
    Rat(RationalForm),
    /// Power with an integer exponent that came from literals, not parameters.
    PowInt(Box<CNode>, i64),
    Op(OpKind, Vec<CNode>),
}

fn rat_const(q: Q) -> CNode {
    CNode::Rat(RationalForm::constant(q))
}

fn exact_sqrt(q: &Q) -> Option<Q> {
    let (n, d) = (q.numer(), q.denom());
    let (rn, rd) = (n.sqrt(), d.sqrt());
    (&rn * &rn == *n && &rd * &rd == *d).then(|| Q::new(rn, rd))
}

fn float_const(v: f64) -> Option<CNode> {
    if v.is_finite() {
        q_from_f64(v).map(rat_const)
    } else {
        None
    }
}

fn literal_int(e: &Expr) -> Option<i64> {
    if e.has_var() || e.has_param() {
        return None;
    }
    let v = e.eval(&[], 1.0);
    (v.is_finite() && v.fract() == 0.0 && v.abs() <= 64.0).then_some(v as i64)
}

/// Builds the canonical node tree with parameters bound to `values`.
pub(crate) fn build(e: &Expr, values: &[Q]) -> CNode {
    match e {
        Expr::Var => CNode::Rat(RationalForm::x()),
        Expr::Param(k) => rat_const(values[k - 1].clone()),
        Expr::Int(n) => rat_const(q_int(*n)),
        Expr::Unary(op, a) => {
            let a = build(a, values);
            match (op, a) {
                (OpKind::Sqrt, CNode::Rat(r)) if r.is_constant() => {
                    let c = r.constant_value().unwrap();
                    if c.is_negative() {
                        CNode::Op(OpKind::Sqrt, vec![CNode::Rat(r)])
                    } else if let Some(s) = exact_sqrt(&c) {
                        rat_const(s)
                    } else {
                        float_const(q_to_f64(&c).sqrt())
                            .unwrap_or(CNode::Op(OpKind::Sqrt, vec![CNode::Rat(r)]))
                    }
                }
                (OpKind::Square | OpKind::Cube, CNode::Rat(r)) => {
                    let n = if *op == OpKind::Square { 2 } else { 3 };
                    match r.powi(n) {
                        Some(x) => CNode::Rat(x),
                        None => CNode::PowInt(Box::new(CNode::Rat(r)), n),
                    }
                }
                (OpKind::Square, a) => CNode::PowInt(Box::new(a), 2),
                (OpKind::Cube, a) => CNode::PowInt(Box::new(a), 3),
                (op, a) => CNode::Op(*op, vec![a]),
            }
        }
        Expr::Binary(OpKind::Pow, a, b) => {
            let base = build(a, values);
            if let Some(n) = literal_int(b) {
                return match base {
                    CNode::Rat(r) => match r.powi(n) {
                        Some(x) => CNode::Rat(x),
                        None => power_int(CNode::Rat(r), n),
                    },
                    other => power_int(other, n),
                };
            }
            let exp = build(b, values);
            if let (CNode::Rat(x), CNode::Rat(y)) = (&base, &exp) {
                if let (Some(x), Some(y)) = (x.constant_value(), y.constant_value()) {
                    if let Some(c) = float_const(q_to_f64(&x).powf(q_to_f64(&y))) {
                        return c;
                    }
                }
            }
            if let CNode::Rat(y) = &exp {
                if y.constant_value().is_some_and(|v| v.is_one()) {
                    return base;
                }
            }
            CNode::Op(OpKind::Pow, vec![base, exp])
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (build(a, values), build(b, values));
            combine(*op, a, b)
        }
    }
}

fn power_int(base: CNode, n: i64) -> CNode {
    match n {
        0 => rat_const(Q::one()),
        1 => base,
        _ => CNode::PowInt(Box::new(base), n),
    }
}

fn combine(op: OpKind, a: CNode, b: CNode) -> CNode {
    if let (CNode::Rat(x), CNode::Rat(y)) = (&a, &b) {
        let r = match op {
            OpKind::Add => x.add(y),
            OpKind::Sub => x.sub(y),
            OpKind::Mul => x.mul(y),
            OpKind::Div => x.div(y),
            _ => None,
        };
        return match r {
            Some(r) => CNode::Rat(r),
            None => CNode::Op(op, vec![a, b]),
        };
    }
    match op {
        OpKind::Add | OpKind::Sub => {
            let mut terms = Vec::new();
            let mut rat = RationalForm::constant(Q::zero());
            collect_terms(a, false, &mut terms, &mut rat);
            collect_terms(b, op == OpKind::Sub, &mut terms, &mut rat);
            rebuild_sum(terms, rat)
        }
        OpKind::Mul | OpKind::Div => {
            let mut factors = Vec::new();
            let mut rat = RationalForm::constant(Q::one());
            collect_factors(a, false, &mut factors, &mut rat);
            collect_factors(b, op == OpKind::Div, &mut factors, &mut rat);
            rebuild_product(factors, rat)
        }
        _ => CNode::Op(op, vec![a, b]),
    }
}

fn collect_terms(n: CNode, neg: bool, terms: &mut Vec<(bool, CNode)>, rat: &mut RationalForm) {
    match n {
        CNode::Rat(r) => {
            let next = if neg { rat.sub(&r) } else { rat.add(&r) };
            match next {
                Some(x) => *rat = x,
                None => terms.push((neg, CNode::Rat(r))),
            }
        }
        CNode::Op(op @ (OpKind::Add | OpKind::Sub), mut ch) => {
            let b = ch.pop().unwrap();
            let a = ch.pop().unwrap();
            collect_terms(a, neg, terms, rat);
            collect_terms(b, neg ^ (op == OpKind::Sub), terms, rat);
        }
        other => terms.push((neg, other)),
    }
}

fn rebuild_sum(terms: Vec<(bool, CNode)>, rat: RationalForm) -> CNode {
    let mut acc: Option<CNode> = None;
    let lead_rat = !rat.is_zero() && terms.first().is_none_or(|t| t.0);
    let mut rat = Some(rat).filter(|r| !r.is_zero());
    if lead_rat {
        acc = rat.take().map(CNode::Rat);
    }
    for (neg, t) in terms {
        acc = Some(match acc {
            None if neg => CNode::Op(OpKind::Mul, vec![rat_const(-Q::one()), t]),
            None => t,
            Some(a) => CNode::Op(if neg { OpKind::Sub } else { OpKind::Add }, vec![a, t]),
        });
    }
    if let Some(r) = rat {
        acc = Some(match acc {
            None => CNode::Rat(r),
            Some(a) => CNode::Op(OpKind::Add, vec![a, CNode::Rat(r)]),
        });
    }
    acc.unwrap_or_else(|| rat_const(Q::zero()))
}

fn collect_factors(n: CNode, inv: bool, factors: &mut Vec<(bool, CNode)>, rat: &mut RationalForm) {
    match n {
        CNode::Rat(r) => {
            let next = if inv { rat.div(&r) } else { rat.mul(&r) };
            match next {
                Some(x) => *rat = x,
                None => factors.push((inv, CNode::Rat(r))),
            }
        }
        CNode::Op(op @ (OpKind::Mul | OpKind::Div), mut ch)
            if !(op == OpKind::Div && matches!(&ch[1], CNode::Rat(r) if r.is_zero())) =>
        {
            let b = ch.pop().unwrap();
            let a = ch.pop().unwrap();
            collect_factors(a, inv, factors, rat);
            collect_factors(b, inv ^ (op == OpKind::Div), factors, rat);
        }
        other => factors.push((inv, other)),
    }
}

fn rebuild_product(factors: Vec<(bool, CNode)>, rat: RationalForm) -> CNode {
    let one = rat.constant_value().is_some_and(|v| v.is_one());
    let mut acc: Option<CNode> = if one { None } else { Some(CNode::Rat(rat)) };
    for (inv, f) in factors {
        acc = Some(match acc {
            None if inv => CNode::Op(OpKind::Div, vec![rat_const(Q::one()), f]),
            None => f,
            Some(a) => CNode::Op(if inv { OpKind::Div } else { OpKind::Mul }, vec![a, f]),
        });
    }
    acc.unwrap_or_else(|| rat_const(Q::one()))
}

/// Converts a canonical node tree back to an expression, turning every
/// nontrivial coefficient into a parameter leaf in left-to-right order.
pub(crate) struct Renderer {
    pub coeffs: Vec<Q>,
}

impl Renderer {
    pub fn new() -> Self {
        Renderer { coeffs: Vec::new() }
    }

    fn coeff(&mut self, c: &Q) -> Expr {
        if c.is_zero() {
            Expr::Int(0)
        } else if c.is_one() {
            Expr::Int(1)
        } else {
            self.coeffs.push(c.clone());
            Expr::Param(self.coeffs.len())
        }
    }

    fn poly(&mut self, p: &Poly) -> Expr {
        let mut acc: Option<Expr> = None;
        for (i, c) in p.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mono = match i {
                0 => None,
                1 => Some(Expr::Var),
                k => Some(Expr::pow(Expr::Var, Expr::Int(k as i64))),
            };
            let term = match mono {
                None => self.coeff(c),
                Some(m) if c.is_one() => m,
                Some(m) => Expr::mul(self.coeff(c), m),
            };
            acc = Some(match acc {
                None => term,
                Some(a) => Expr::add(a, term),
            });
        }
        acc.unwrap_or(Expr::Int(0))
    }

    fn rational(&mut self, r: &RationalForm) -> Expr {
        if r.is_zero() {
            return Expr::Int(0);
        }
        let num = self.poly(r.num());
        if r.den().is_one() {
            num
        } else {
            Expr::div(num, self.poly(r.den()))
        }
    }

    pub fn render(&mut self, n: &CNode) -> Expr {
        match n {
            CNode::Rat(r) => self.rational(r),
            CNode::PowInt(base, k) => {
                let b = self.render(base);
                match k {
                    2 => Expr::square(b),
                    3 => Expr::cube(b),
                    k => Expr::pow(b, Expr::Int(*k)),
                }
            }
            CNode::Op(op, ch) => {
                let mut kids: Vec<Expr> = ch.iter().map(|c| self.render(c)).collect();
                if kids.len() == 1 {
                    Expr::unary(*op, kids.pop().unwrap())
                } else {
                    let b = kids.pop().unwrap();
                    let a = kids.pop().unwrap();
                    Expr::binary(*op, a, b)
                }
            }
        }
    }
}

/// Exact rational function for a purely rational expression.
pub(crate) fn as_rational(e: &Expr, values: &[Q]) -> Option<RationalForm> {
    match build(e, values) {
        CNode::Rat(r) => Some(r),
        _ => None,
    }
}

pub(crate) fn values_from_f64(params: &[f64]) -> Option<Vec<Q>> {
    params.iter().map(|&x| float_const_q(x)).collect()
}

fn float_const_q(x: f64) -> Option<Q> {
    if x.is_finite() {
        q_from_f64(x)
    } else {
        None
    }
}

pub(crate) fn to_f64_vec(coeffs: &[Q]) -> Vec<f64> {
    coeffs
        .iter()
        .map(|c| c.to_f64().unwrap_or(f64::NAN))
        .collect()
}
