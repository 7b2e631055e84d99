//! Exact univariate polynomials and rational functions in `p` over the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

/// Degrees above this are treated as too expensive to manipulate exactly.
pub const MAX_DEGREE: usize = 40;

/// Polynomial with ascending coefficients; no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        Poly::from_coeffs(vec![c])
    }

    /// The polynomial `p`.
    pub fn x() -> Self {
        Poly::from_coeffs(vec![Q::zero(), Q::one()])
    }

    pub fn from_coeffs(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn constant_term(&self) -> Q {
        self.coeffs.first().cloned().unwrap_or_else(Q::zero)
    }

    pub fn leading(&self) -> Option<&Q> {
        self.coeffs.last()
    }

    /// Index of the lowest nonzero coefficient.
    pub fn low_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = Q::zero();
        let coeffs = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&zero) + other.coeffs.get(i).unwrap_or(&zero))
            .collect();
        Poly::from_coeffs(coeffs)
    }

    pub fn neg(&self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Q::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Poly::from_coeffs(coeffs)
    }

    pub fn scale(&self, k: &Q) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Divides by `p^k`; the caller guarantees the low `k` coefficients vanish.
    fn shift_down(&self, k: usize) -> Poly {
        Poly::from_coeffs(self.coeffs[k.min(self.coeffs.len())..].to_vec())
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Euclidean division. Panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.leading().unwrap().clone();
        let mut rem = self.coeffs.clone();
        let Some(nd) = self.degree() else {
            return (Poly::zero(), Poly::zero());
        };
        if nd < dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![Q::zero(); nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let c = &rem[k + dd] / &lead;
            if c.is_zero() {
                continue;
            }
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= &c * d;
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (Poly::from_coeffs(quot), Poly::from_coeffs(rem))
    }

    pub fn monic(&self) -> Poly {
        match self.leading() {
            Some(l) if !l.is_one() => self.scale(&l.recip()),
            _ => self.clone(),
        }
    }

    /// Monic greatest common divisor.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    pub fn derivative(&self) -> Poly {
        Poly::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Q::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + q_to_f64(c))
    }

    /// Size proxy used to cap exact arithmetic on huge coefficients.
    pub fn bits(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| c.numer().bits() + c.denom().bits())
            .max()
            .unwrap_or(0)
    }
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact conversion of a finite float to a rational.
pub fn q_from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Coefficient bit size above which gcd cancellation is skipped.
const MAX_BITS: u64 = 6000;

/// A reduced rational function `num / den` with monic denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalForm {
    num: Poly,
    den: Poly,
}

impl RationalForm {
    /// Builds and normalises `num / den`. Returns `None` for a zero denominator
    /// or when the result would exceed the degree cap.
    pub fn new(num: Poly, den: Poly) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        if num.degree().unwrap_or(0) > MAX_DEGREE || den.degree().unwrap_or(0) > MAX_DEGREE {
            return None;
        }
        if num.is_zero() {
            return Some(RationalForm::constant(Q::zero()));
        }
        let k = num.low_order().unwrap().min(den.low_order().unwrap());
        let (mut num, mut den) = (num.shift_down(k), den.shift_down(k));
        if !num.is_constant() && !den.is_constant() && num.bits().max(den.bits()) <= MAX_BITS {
            let g = Poly::gcd(&num, &den);
            if !g.is_constant() {
                num = num.div_rem(&g).0;
                den = den.div_rem(&g).0;
            }
        }
        let lead = den.leading().unwrap().clone();
        if !lead.is_one() {
            let inv = lead.recip();
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        Some(RationalForm { num, den })
    }

    pub fn constant(c: Q) -> Self {
        RationalForm {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    pub fn x() -> Self {
        RationalForm {
            num: Poly::x(),
            den: Poly::one(),
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    pub fn constant_value(&self) -> Option<Q> {
        self.is_constant().then(|| self.num.constant_term())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, o: &Self) -> Option<Self> {
        if self.den == o.den {
            return RationalForm::new(self.num.add(&o.num), self.den.clone());
        }
        RationalForm::new(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    pub fn neg(&self) -> Self {
        RationalForm {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, o: &Self) -> Option<Self> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Option<Self> {
        RationalForm::new(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    pub fn div(&self, o: &Self) -> Option<Self> {
        if o.is_zero() {
            return None;
        }
        RationalForm::new(self.num.mul(&o.den), self.den.mul(&o.num))
    }

    pub fn powi(&self, n: i64) -> Option<Self> {
        if n.unsigned_abs() as usize * self.num.degree().unwrap_or(0).max(self.den.degree().unwrap_or(0))
            > MAX_DEGREE
        {
            return None;
        }
        let e = u32::try_from(n.unsigned_abs()).ok()?;
        if n >= 0 {
            RationalForm::new(self.num.pow(e), self.den.pow(e))
        } else {
            if self.is_zero() {
                return None;
            }
            RationalForm::new(self.den.pow(e), self.num.pow(e))
        }
    }

    pub fn derivative(&self) -> Option<Self> {
        RationalForm::new(
            self.num
                .derivative()
                .mul(&self.den)
                .sub(&self.num.mul(&self.den.derivative())),
            self.den.mul(&self.den),
        )
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let v = self.num.eval_f64(x) / self.den.eval_f64(x);
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[i64]) -> Poly {
        Poly::from_coeffs(c.iter().map(|&n| q_int(n)).collect())
    }

    #[test]
    fn arithmetic() {
        let a = poly(&[1, 1]);
        let b = poly(&[-1, 1]);
        assert_eq!(a.mul(&b), poly(&[-1, 0, 1]));
        assert_eq!(a.add(&b), poly(&[0, 2]));
        assert_eq!(a.sub(&a), Poly::zero());
        assert_eq!(a.pow(2), poly(&[1, 2, 1]));
        assert_eq!(poly(&[1, 2, 3]).derivative(), poly(&[2, 6]));
    }

    #[test]
    fn division_and_gcd() {
        let (q, r) = poly(&[-1, 0, 1]).div_rem(&poly(&[1, 1]));
        assert_eq!(q, poly(&[-1, 1]));
        assert!(r.is_zero());
        let g = Poly::gcd(&poly(&[-2, 0, 2]), &poly(&[3, 3]));
        assert_eq!(g, poly(&[1, 1]));
    }

    #[test]
    fn rational_forms_cancel() {
        let r = RationalForm::new(poly(&[-1, 0, 1]), poly(&[2, 2])).unwrap();
        assert_eq!(r.num(), &Poly::from_coeffs(vec![q_int(-1) / q_int(2), q_int(1) / q_int(2)]));
        assert_eq!(r.den(), &Poly::one());
        let s = RationalForm::new(poly(&[0, 0, 3]), poly(&[0, 2, 2])).unwrap();
        assert_eq!(s.den(), &poly(&[1, 1]));
        assert!(RationalForm::new(Poly::one(), Poly::zero()).is_none());
    }

    #[test]
    fn float_roundtrip() {
        for x in [0.1, -3.75, 1e-300, 12345.678] {
            assert_eq!(q_to_f64(&q_from_f64(x).unwrap()), x);
        }
    }
}
