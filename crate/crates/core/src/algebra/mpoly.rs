//! Sparse multivariate polynomials in `p` and the parameters, used to bring
//! rational expressions over a common denominator.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::poly::{q_int, Q};
use crate::expr::{Expr, OpKind};

const MAX_TERMS: usize = 256;

/// Exponent vector: index 0 is `p`, index k is `ck`.
type Mono = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct MPoly {
    nvars: usize,
    terms: BTreeMap<Mono, Q>,
}

impl MPoly {
    fn constant(nvars: usize, c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; nvars], c);
        }
        MPoly { nvars, terms }
    }

    fn var(nvars: usize, i: usize) -> Self {
        let mut m = vec![0; nvars];
        m[i] = 1;
        MPoly {
            nvars,
            terms: BTreeMap::from([(m, Q::one())]),
        }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.iter().all(|&e| e == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    fn add(&self, o: &Self) -> Option<Self> {
        let mut terms = self.terms.clone();
        for (m, c) in &o.terms {
            let e = terms.entry(m.clone()).or_insert_with(Q::zero);
            *e += c;
            if e.is_zero() {
                terms.remove(m);
            }
        }
        (terms.len() <= MAX_TERMS).then_some(MPoly {
            nvars: self.nvars,
            terms,
        })
    }

    fn neg(&self) -> Self {
        MPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    fn mul(&self, o: &Self) -> Option<Self> {
        if self.terms.len() * o.terms.len() > MAX_TERMS * 8 {
            return None;
        }
        let mut terms: BTreeMap<Mono, Q> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m: Mono = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                let e = terms.entry(m).or_insert_with(Q::zero);
                *e += ca * cb;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        (terms.len() <= MAX_TERMS).then_some(MPoly {
            nvars: self.nvars,
            terms,
        })
    }

    fn scale(&self, k: &Q) -> Self {
        MPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    fn pow(&self, n: u32) -> Option<Self> {
        let mut out = MPoly::constant(self.nvars, Q::one());
        for _ in 0..n {
            out = out.mul(self)?;
        }
        Some(out)
    }

    fn min_exponents(&self) -> Option<Mono> {
        let mut it = self.terms.keys();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, m| acc.iter().zip(m).map(|(a, b)| *a.min(b)).collect()))
    }

    fn divide_monomial(&self, m: &Mono) -> Self {
        MPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.iter().zip(m).map(|(a, b)| a - b).collect(), c.clone()))
                .collect(),
        }
    }

    /// `Some(k)` when `self == k * o`.
    fn ratio_to(&self, o: &Self) -> Option<Q> {
        if self.terms.len() != o.terms.len() || o.is_zero() {
            return None;
        }
        let (m0, c0) = o.terms.iter().next().unwrap();
        let k = self.terms.get(m0)? / c0;
        (self.scale(&k.recip()) == *o).then_some(k)
    }
}

/// A quotient of multivariate polynomials.
#[derive(Clone, Debug)]
pub(crate) struct MRat {
    num: MPoly,
    den: MPoly,
}

impl MRat {
    fn new(num: MPoly, den: MPoly) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        let nvars = num.nvars;
        if num.is_zero() {
            return Some(MRat {
                num,
                den: MPoly::constant(nvars, Q::one()),
            });
        }
        if let Some(c) = den.as_constant() {
            return Some(MRat {
                num: num.scale(&c.recip()),
                den: MPoly::constant(nvars, Q::one()),
            });
        }
        if let Some(k) = num.ratio_to(&den) {
            return Some(MRat {
                num: MPoly::constant(nvars, k),
                den: MPoly::constant(nvars, Q::one()),
            });
        }
        let common: Mono = num
            .min_exponents()
            .unwrap()
            .iter()
            .zip(den.min_exponents().unwrap())
            .map(|(a, b)| *a.min(&b))
            .collect();
        let (num, den) = (num.divide_monomial(&common), den.divide_monomial(&common));
        // Fix the sign so the highest term of the denominator is positive.
        let lead = den.terms.iter().next_back().unwrap().1.clone();
        let (num, den) = if lead.is_negative() {
            (num.neg(), den.neg())
        } else {
            (num, den)
        };
        Some(MRat { num, den })
    }

    fn add(&self, o: &Self, sign: bool) -> Option<Self> {
        let onum = if sign { o.num.neg() } else { o.num.clone() };
        if self.den == o.den {
            return MRat::new(self.num.add(&onum)?, self.den.clone());
        }
        MRat::new(
            self.num.mul(&o.den)?.add(&onum.mul(&self.den)?)?,
            self.den.mul(&o.den)?,
        )
    }

    fn mul(&self, o: &Self) -> Option<Self> {
        MRat::new(self.num.mul(&o.num)?, self.den.mul(&o.den)?)
    }

    fn div(&self, o: &Self) -> Option<Self> {
        if o.num.is_zero() {
            return None;
        }
        MRat::new(self.num.mul(&o.den)?, self.den.mul(&o.num)?)
    }

    fn powi(&self, n: i64) -> Option<Self> {
        let e = u32::try_from(n.unsigned_abs()).ok().filter(|&e| e <= 12)?;
        if n >= 0 {
            MRat::new(self.num.pow(e)?, self.den.pow(e)?)
        } else {
            MRat::new(self.den.pow(e)?, self.num.pow(e)?)
        }
    }
}

/// Converts a rational expression to a single fraction. `None` if the
/// expression is not rational or grows past the term cap.
pub(crate) fn together(e: &Expr) -> Option<MRat> {
    let nvars = e.max_param() + 1;
    build(e, nvars)
}

fn build(e: &Expr, nvars: usize) -> Option<MRat> {
    let one = || MPoly::constant(nvars, Q::one());
    Some(match e {
        Expr::Var => MRat {
            num: MPoly::var(nvars, 0),
            den: one(),
        },
        Expr::Param(k) => MRat {
            num: MPoly::var(nvars, *k),
            den: one(),
        },
        Expr::Int(n) => MRat {
            num: MPoly::constant(nvars, q_int(*n)),
            den: one(),
        },
        Expr::Unary(OpKind::Square, a) => build(a, nvars)?.powi(2)?,
        Expr::Unary(OpKind::Cube, a) => build(a, nvars)?.powi(3)?,
        Expr::Unary(..) => return None,
        Expr::Binary(op, a, b) => {
            let x = build(a, nvars)?;
            match op {
                OpKind::Pow => {
                    if b.has_var() || b.has_param() {
                        return None;
                    }
                    let v = b.eval(&[], 1.0);
                    if !(v.is_finite() && v.fract() == 0.0) {
                        return None;
                    }
                    x.powi(v as i64)?
                }
                _ => {
                    let y = build(b, nvars)?;
                    match op {
                        OpKind::Add => x.add(&y, false)?,
                        OpKind::Sub => x.add(&y, true)?,
                        OpKind::Mul => x.mul(&y)?,
                        OpKind::Div => x.div(&y)?,
                        _ => return None,
                    }
                }
            }
        }
    })
}

fn power_of(base: Expr, e: u32) -> Expr {
    match e {
        1 => base,
        2 => Expr::square(base),
        3 => Expr::cube(base),
        e => Expr::pow(base, Expr::Int(e as i64)),
    }
}

fn rational_literal(q: &Q) -> Option<Expr> {
    let n = i64::try_from(q.numer()).ok()?;
    if q.is_integer() {
        Some(Expr::Int(n))
    } else {
        Some(Expr::div(Expr::Int(n), Expr::Int(i64::try_from(q.denom()).ok()?)))
    }
}

/// Product of a positive coefficient and a monomial.
fn render_term(c: &Q, m: &[u32]) -> Option<Expr> {
    let mut acc: Option<Expr> = if c.is_one() { None } else { Some(rational_literal(c)?) };
    for i in (1..m.len()).chain([0]) {
        let e = m[i];
        if e == 0 {
            continue;
        }
        let leaf = if i == 0 { Expr::Var } else { Expr::Param(i) };
        let f = power_of(leaf, e);
        acc = Some(match acc {
            None => f,
            Some(a) => Expr::mul(a, f),
        });
    }
    Some(acc.unwrap_or(Expr::Int(1)))
}

fn signed_sum(parts: Vec<(bool, Expr)>) -> Expr {
    let mut acc: Option<Expr> = None;
    for (neg, t) in parts {
        acc = Some(match acc {
            None if neg => Expr::mul(Expr::Int(-1), t),
            None => t,
            Some(a) if neg => Expr::sub(a, t),
            Some(a) => Expr::add(a, t),
        });
    }
    acc.unwrap_or(Expr::Int(0))
}

/// Renders a polynomial grouped by descending powers of `p`.
fn render_grouped(poly: &MPoly) -> Option<Expr> {
    let mut groups: BTreeMap<u32, Vec<(Mono, Q)>> = BTreeMap::new();
    for (m, c) in &poly.terms {
        let mut rest = m.clone();
        rest[0] = 0;
        groups.entry(m[0]).or_default().push((rest, c.clone()));
    }
    let mut parts = Vec::new();
    for (deg, mut terms) in groups.into_iter().rev() {
        terms.reverse();
        let pw = (deg > 0).then(|| power_of(Expr::Var, deg));
        if terms.len() == 1 {
            let (m, c) = &terms[0];
            let mut full = m.clone();
            full[0] = deg;
            parts.push((c.is_negative(), render_term(&c.abs(), &full)?));
            continue;
        }
        let inner = signed_sum(
            terms
                .iter()
                .map(|(m, c)| Some((c.is_negative(), render_term(&c.abs(), m)?)))
                .collect::<Option<Vec<_>>>()?,
        );
        parts.push((
            false,
            match pw {
                Some(pw) => Expr::mul(inner, pw),
                None => inner,
            },
        ));
    }
    Some(signed_sum(parts))
}

pub(crate) fn render(r: &MRat) -> Option<Expr> {
    let num = render_grouped(&r.num)?;
    if r.den.as_constant().is_some_and(|c| c.is_one()) {
        Some(num)
    } else {
        Some(Expr::div(num, render_grouped(&r.den)?))
    }
}
