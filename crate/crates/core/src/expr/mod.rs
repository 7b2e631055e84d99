//! Expression trees over the pressure variable `p` and fitted parameters `c1..cN`.
//!
//! Every other module consumes [`Expr`]. Trees are immutable values; edits
//! produce new trees.

mod compiled;
mod parse;
mod random;

use std::fmt;

pub use compiled::CompiledExpr;
pub use parse::{parse, ParseError};
pub use random::{random_tree, TreeLimits};

/// Operator kinds. `Pow` only appears in catalog entries and canonical forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Square,
    Cube,
    Pow,
}

impl OpKind {
    pub const ALL: [OpKind; 8] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Sqrt,
        OpKind::Square,
        OpKind::Cube,
        OpKind::Pow,
    ];

    /// Operators the genetic search may propose.
    pub const GA_OPSET: [OpKind; 4] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div];

    /// Operators the Bayesian sampler may propose.
    pub const BSR_OPSET: [OpKind; 7] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Square,
        OpKind::Cube,
        OpKind::Sqrt,
    ];

    pub fn arity(self) -> usize {
        match self {
            OpKind::Sqrt | OpKind::Square | OpKind::Cube => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OpKind::Add => "+",
            OpKind::Sub => "-",
            OpKind::Mul => "*",
            OpKind::Div => "/",
            OpKind::Pow => "^",
            OpKind::Sqrt => "sqrt",
            OpKind::Square => "square",
            OpKind::Cube => "cube",
        }
    }

    pub fn apply_unary(self, x: f64) -> f64 {
        match self {
            OpKind::Sqrt => x.sqrt(),
            OpKind::Square => x * x,
            OpKind::Cube => x * x * x,
            _ => f64::NAN,
        }
    }

    pub fn apply_binary(self, a: f64, b: f64) -> f64 {
        match self {
            OpKind::Add => a + b,
            OpKind::Sub => a - b,
            OpKind::Mul => a * b,
            OpKind::Div => a / b,
            OpKind::Pow => a.powf(b),
            _ => f64::NAN,
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("operator `{op}` takes {expected} operand(s), got {got}")]
    Arity { op: OpKind, expected: usize, got: usize },
    #[error("expression references c{needed} but only {got} parameter value(s) were supplied")]
    MissingParams { needed: usize, got: usize },
}

/// An expression tree node. Parameter indices are 1-based (`Param(1)` is `c1`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var,
    Param(usize),
    Int(i64),
    Unary(OpKind, Box<Expr>),
    Binary(OpKind, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn param(k: usize) -> Expr {
        Expr::Param(k)
    }

    /// Builds an operator node, checking the operand count against the kind's arity.
    pub fn apply(op: OpKind, mut children: Vec<Expr>) -> Result<Expr, ExprError> {
        if children.len() != op.arity() {
            return Err(ExprError::Arity {
                op,
                expected: op.arity(),
                got: children.len(),
            });
        }
        Ok(if op.arity() == 1 {
            Expr::Unary(op, Box::new(children.pop().unwrap()))
        } else {
            let r = children.pop().unwrap();
            let l = children.pop().unwrap();
            Expr::Binary(op, Box::new(l), Box::new(r))
        })
    }

    /// Unary node; panics if `op` is not unary.
    pub fn unary(op: OpKind, a: Expr) -> Expr {
        assert_eq!(op.arity(), 1, "{op} is not a unary operator");
        Expr::Unary(op, Box::new(a))
    }

    /// Binary node; panics if `op` is not binary.
    pub fn binary(op: OpKind, a: Expr, b: Expr) -> Expr {
        assert_eq!(op.arity(), 2, "{op} is not a binary operator");
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(OpKind::Add, a, b)
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(OpKind::Sub, a, b)
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(OpKind::Mul, a, b)
    }
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(OpKind::Div, a, b)
    }
    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(OpKind::Pow, a, b)
    }
    pub fn sqrt(a: Expr) -> Expr {
        Expr::unary(OpKind::Sqrt, a)
    }
    pub fn square(a: Expr) -> Expr {
        Expr::unary(OpKind::Square, a)
    }
    pub fn cube(a: Expr) -> Expr {
        Expr::unary(OpKind::Cube, a)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Var | Expr::Param(_) | Expr::Int(_))
    }

    pub fn op(&self) -> Option<OpKind> {
        match self {
            Expr::Unary(op, _) | Expr::Binary(op, _, _) => Some(*op),
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Unary(_, a) => vec![a],
            Expr::Binary(_, a, b) => vec![a, b],
            _ => Vec::new(),
        }
    }

    /// Total node count. This is the complexity measure used throughout.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Unary(_, a) => 1 + a.complexity(),
            Expr::Binary(_, a, b) => 1 + a.complexity() + b.complexity(),
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Unary(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
            _ => 1,
        }
    }

    /// Number of operator (internal) nodes.
    pub fn op_count(&self) -> usize {
        match self {
            Expr::Unary(_, a) => 1 + a.op_count(),
            Expr::Binary(_, a, b) => 1 + a.op_count() + b.op_count(),
            _ => 0,
        }
    }

    /// Largest parameter index referenced, 0 if none.
    pub fn max_param(&self) -> usize {
        match self {
            Expr::Param(k) => *k,
            Expr::Unary(_, a) => a.max_param(),
            Expr::Binary(_, a, b) => a.max_param().max(b.max_param()),
            _ => 0,
        }
    }

    /// Number of distinct parameters referenced.
    pub fn param_count(&self) -> usize {
        let mut seen = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(k) = e {
                if !seen.contains(k) {
                    seen.push(*k);
                }
            }
        });
        seen.len()
    }

    /// Number of parameter leaves (counting repeats).
    pub fn param_leaf_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Param(_)) {
                n += 1;
            }
        });
        n
    }

    pub fn has_var(&self) -> bool {
        match self {
            Expr::Var => true,
            Expr::Unary(_, a) => a.has_var(),
            Expr::Binary(_, a, b) => a.has_var() || b.has_var(),
            _ => false,
        }
    }

    pub fn has_param(&self) -> bool {
        match self {
            Expr::Param(_) => true,
            Expr::Unary(_, a) => a.has_param(),
            Expr::Binary(_, a, b) => a.has_param() || b.has_param(),
            _ => false,
        }
    }

    pub fn contains_op(&self, op: OpKind) -> bool {
        match self {
            Expr::Unary(o, a) => *o == op || a.contains_op(op),
            Expr::Binary(o, a, b) => *o == op || a.contains_op(op) || b.contains_op(op),
            _ => false,
        }
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Nodes in pre-order; index `i` here is the position used by [`Expr::get`]
    /// and [`Expr::replace`].
    pub fn nodes(&self) -> Vec<&Expr> {
        let mut out = Vec::with_capacity(self.complexity());
        self.visit(&mut |e| out.push(e));
        out
    }

    pub fn get(&self, index: usize) -> Option<&Expr> {
        fn walk<'a>(e: &'a Expr, index: &mut usize) -> Option<&'a Expr> {
            if *index == 0 {
                return Some(e);
            }
            *index -= 1;
            match e {
                Expr::Unary(_, a) => walk(a, index),
                Expr::Binary(_, a, b) => walk(a, index).or_else(|| walk(b, index)),
                _ => None,
            }
        }
        let mut i = index;
        walk(self, &mut i)
    }

    /// Returns a copy with the subtree at pre-order `index` replaced.
    pub fn replace(&self, index: usize, sub: Expr) -> Expr {
        fn walk(e: &Expr, index: &mut Option<usize>, sub: &mut Option<Expr>) -> Expr {
            match index {
                Some(0) => {
                    *index = None;
                    return sub.take().unwrap();
                }
                Some(i) => *i -= 1,
                None => return e.clone(),
            }
            match e {
                Expr::Unary(op, a) => Expr::Unary(*op, Box::new(walk(a, index, sub))),
                Expr::Binary(op, a, b) => {
                    let l = walk(a, index, sub);
                    let r = walk(b, index, sub);
                    Expr::Binary(*op, Box::new(l), Box::new(r))
                }
                leaf => leaf.clone(),
            }
        }
        let mut idx = Some(index);
        let mut sub = Some(sub);
        let out = walk(self, &mut idx, &mut sub);
        assert!(idx.is_none(), "node index {index} out of range");
        out
    }

    /// Renumbers parameters c1, c2, ... by order of first appearance,
    /// preserving repeated references to the same parameter.
    pub fn renumber_params(&self) -> Expr {
        let mut order: Vec<usize> = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(k) = e {
                if !order.contains(k) {
                    order.push(*k);
                }
            }
        });
        self.map_params(&mut |k| order.iter().position(|&o| o == k).unwrap() + 1)
    }

    /// Gives every parameter leaf its own index, left to right.
    pub fn fresh_params(&self) -> Expr {
        let mut next = 0;
        self.map_params(&mut |_| {
            next += 1;
            next
        })
    }

    /// Sets every parameter index to 0. Used where only the tree shape matters.
    pub fn anonymize(&self) -> Expr {
        self.map_params(&mut |_| 0)
    }

    fn map_params(&self, f: &mut impl FnMut(usize) -> usize) -> Expr {
        match self {
            Expr::Param(k) => Expr::Param(f(*k)),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.map_params(f))),
            Expr::Binary(op, a, b) => {
                let l = a.map_params(f);
                let r = b.map_params(f);
                Expr::Binary(*op, Box::new(l), Box::new(r))
            }
            leaf => leaf.clone(),
        }
    }

    /// Evaluates at pressure `p`. `NaN` marks an undefined result: division by
    /// zero, square root of a negative, or any non-finite intermediate.
    /// Missing parameter values also evaluate to `NaN`; use [`Expr::evaluate`]
    /// for a checked call.
    pub fn eval(&self, params: &[f64], p: f64) -> f64 {
        let v = match self {
            Expr::Var => p,
            Expr::Param(k) => k
                .checked_sub(1)
                .and_then(|i| params.get(i))
                .copied()
                .unwrap_or(f64::NAN),
            Expr::Int(n) => *n as f64,
            Expr::Unary(op, a) => {
                let x = a.eval(params, p);
                if x.is_nan() {
                    return f64::NAN;
                }
                op.apply_unary(x)
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(params, p);
                if x.is_nan() {
                    return f64::NAN;
                }
                let y = b.eval(params, p);
                if y.is_nan() {
                    return f64::NAN;
                }
                op.apply_binary(x, y)
            }
        };
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    }

    /// Checked evaluation: `Ok(None)` is an undefined value, `Err` a malformed
    /// parameter vector.
    pub fn evaluate(&self, params: &[f64], p: f64) -> Result<Option<f64>, ExprError> {
        let needed = self.max_param();
        if params.len() < needed {
            return Err(ExprError::MissingParams {
                needed,
                got: params.len(),
            });
        }
        let v = self.eval(params, p);
        Ok(if v.is_nan() { None } else { Some(v) })
    }

    /// Infix rendering, e.g. `(c1 * p) / (c2 + p)`. Stable across versions.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, true);
        s
    }

    fn render_into(&self, out: &mut String, top: bool) {
        use std::fmt::Write;
        match self {
            Expr::Var => out.push('p'),
            Expr::Param(k) => {
                let _ = write!(out, "c{k}");
            }
            Expr::Int(n) if *n < 0 => {
                let _ = write!(out, "({n})");
            }
            Expr::Int(n) => {
                let _ = write!(out, "{n}");
            }
            Expr::Unary(op, a) => {
                out.push_str(op.symbol());
                out.push('(');
                a.render_into(out, true);
                out.push(')');
            }
            Expr::Binary(op, a, b) => {
                if !top {
                    out.push('(');
                }
                a.render_into(out, false);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                b.render_into(out, false);
                if !top {
                    out.push(')');
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn langmuir() -> Expr {
        Expr::div(
            Expr::mul(Expr::Param(1), Expr::Var),
            Expr::add(Expr::Param(2), Expr::Var),
        )
    }

    #[test]
    fn evaluates_langmuir() {
        assert_eq!(langmuir().evaluate(&[5.0, 2.0], 2.0).unwrap(), Some(2.5));
    }

    #[test]
    fn division_by_zero_is_undefined() {
        let e = Expr::div(Expr::Param(1), Expr::Var);
        assert_eq!(e.evaluate(&[1.0], 0.0).unwrap(), None);
    }

    #[test]
    fn sqrt_of_var() {
        let e = Expr::sqrt(Expr::Var);
        assert_eq!(e.evaluate(&[], 4.0).unwrap(), Some(2.0));
        assert_eq!(e.evaluate(&[], -4.0).unwrap(), None);
    }

    #[test]
    fn short_parameter_vector_is_an_error() {
        let err = langmuir().evaluate(&[5.0], 1.0).unwrap_err();
        assert_eq!(err, ExprError::MissingParams { needed: 2, got: 1 });
    }

    #[test]
    fn overflow_is_undefined() {
        let e = Expr::cube(Expr::cube(Expr::cube(Expr::Var)));
        assert!(e.eval(&[], 1e50).is_nan());
    }

    #[test]
    fn complexity_counts_every_node() {
        assert_eq!(langmuir().complexity(), 7);
        assert_eq!(Expr::Param(1).complexity(), 1);
        let dual = Expr::add(langmuir(), {
            Expr::div(
                Expr::mul(Expr::Param(3), Expr::Var),
                Expr::add(Expr::Param(4), Expr::Var),
            )
        });
        assert_eq!(dual.complexity(), 15);
    }

    #[test]
    fn arity_checked_at_construction() {
        assert!(Expr::apply(OpKind::Sqrt, vec![Expr::Var, Expr::Var]).is_err());
        assert!(Expr::apply(OpKind::Add, vec![Expr::Var]).is_err());
        assert!(Expr::apply(OpKind::Add, vec![Expr::Var, Expr::Param(1)]).is_ok());
    }

    #[test]
    fn renders_langmuir() {
        assert_eq!(langmuir().render(), "(c1 * p) / (c2 + p)");
    }

    #[test]
    fn get_and_replace_use_preorder() {
        let e = langmuir();
        assert_eq!(e.get(1), Some(&Expr::mul(Expr::Param(1), Expr::Var)));
        assert_eq!(e.get(6), Some(&Expr::Var));
        assert_eq!(e.get(7), None);
        let r = e.replace(4, Expr::Int(3));
        assert_eq!(r.render(), "(c1 * p) / 3");
    }

    #[test]
    fn renumbering() {
        let e = Expr::add(Expr::Param(7), Expr::mul(Expr::Param(3), Expr::Param(7)));
        assert_eq!(e.renumber_params().render(), "c1 + (c2 * c1)");
        assert_eq!(e.fresh_params().render(), "c1 + (c2 * c3)");
        assert_eq!(e.param_count(), 2);
        assert_eq!(e.param_leaf_count(), 3);
    }
}
