use super::{Expr, OpKind};

#[derive(Clone, Copy, Debug)]
enum Instr {
    Var,
    Param(usize),
    Const(f64),
    Unary(OpKind),
    Binary(OpKind),
}

/// A flattened postfix form of an [`Expr`] for repeated evaluation inside
/// optimisation loops. Semantics match [`Expr::eval`].
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    code: Vec<Instr>,
    max_stack: usize,
}

impl CompiledExpr {
    pub fn new(e: &Expr) -> Self {
        let mut code = Vec::with_capacity(e.complexity());
        emit(e, &mut code);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for ins in &code {
            match ins {
                Instr::Var | Instr::Param(_) | Instr::Const(_) => depth += 1,
                Instr::Unary(_) => {}
                Instr::Binary(_) => depth -= 1,
            }
            max_stack = max_stack.max(depth);
        }
        CompiledExpr { code, max_stack }
    }

    pub fn eval(&self, params: &[f64], p: f64) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        self.eval_with(&mut stack, params, p)
    }

    /// Evaluation reusing a caller-owned stack buffer.
    pub fn eval_with(&self, stack: &mut Vec<f64>, params: &[f64], p: f64) -> f64 {
        stack.clear();
        for ins in &self.code {
            let v = match *ins {
                Instr::Var => p,
                Instr::Param(i) => match params.get(i) {
                    Some(&v) => v,
                    None => return f64::NAN,
                },
                Instr::Const(c) => c,
                Instr::Unary(op) => {
                    let x = stack.pop().unwrap();
                    op.apply_unary(x)
                }
                Instr::Binary(op) => {
                    let y = stack.pop().unwrap();
                    let x = stack.pop().unwrap();
                    op.apply_binary(x, y)
                }
            };
            if !v.is_finite() {
                return f64::NAN;
            }
            stack.push(v);
        }
        stack.pop().unwrap_or(f64::NAN)
    }

    /// Evaluates at every pressure in `xs`, one instruction at a time over the
    /// whole slice. Returns `None` if any intermediate value at any point is
    /// not finite, which is when [`CompiledExpr::eval`] would give NaN there.
    pub fn eval_batch<'b>(&self, params: &[f64], xs: &[f64], buf: &'b mut Vec<f64>) -> Option<&'b [f64]> {
        let n = xs.len();
        buf.clear();
        buf.resize(self.max_stack.max(1) * n, 0.0);
        let mut top = 0usize;
        for ins in &self.code {
            match *ins {
                Instr::Var => {
                    buf[top * n..(top + 1) * n].copy_from_slice(xs);
                    top += 1;
                }
                Instr::Param(i) => {
                    let v = *params.get(i)?;
                    if !v.is_finite() {
                        return None;
                    }
                    buf[top * n..(top + 1) * n].fill(v);
                    top += 1;
                }
                Instr::Const(c) => {
                    if !c.is_finite() {
                        return None;
                    }
                    buf[top * n..(top + 1) * n].fill(c);
                    top += 1;
                }
                Instr::Unary(op) => {
                    let a = &mut buf[(top - 1) * n..top * n];
                    match op {
                        OpKind::Sqrt => map1(a, f64::sqrt),
                        OpKind::Square => map1(a, |x| x * x),
                        OpKind::Cube => map1(a, |x| x * x * x),
                        _ => map1(a, |x| op.apply_unary(x)),
                    }
                    if !all_finite(a) {
                        return None;
                    }
                }
                Instr::Binary(op) => {
                    let (lo, hi) = buf.split_at_mut((top - 1) * n);
                    let a = &mut lo[(top - 2) * n..];
                    let b = &hi[..n];
                    match op {
                        OpKind::Add => map2(a, b, |x, y| x + y),
                        OpKind::Sub => map2(a, b, |x, y| x - y),
                        OpKind::Mul => map2(a, b, |x, y| x * y),
                        OpKind::Div => map2(a, b, |x, y| x / y),
                        _ => map2(a, b, |x, y| op.apply_binary(x, y)),
                    }
                    if !all_finite(a) {
                        return None;
                    }
                    top -= 1;
                }
            }
        }
        (top == 1).then(|| &buf[..n])
    }
}

#[inline(always)]
fn map1(a: &mut [f64], f: impl Fn(f64) -> f64) {
    for x in a.iter_mut() {
        *x = f(*x);
    }
}

#[inline(always)]
fn map2(a: &mut [f64], b: &[f64], f: impl Fn(f64, f64) -> f64) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x = f(*x, y);
    }
}

fn all_finite(a: &[f64]) -> bool {
    a.iter().fold(true, |ok, x| ok & x.is_finite())
}

fn emit(e: &Expr, code: &mut Vec<Instr>) {
    match e {
        Expr::Var => code.push(Instr::Var),
        Expr::Param(k) => code.push(match k.checked_sub(1) {
            Some(i) => Instr::Param(i),
            None => Instr::Const(f64::NAN),
        }),
        Expr::Int(n) => code.push(Instr::Const(*n as f64)),
        Expr::Unary(op, a) => {
            emit(a, code);
            code.push(Instr::Unary(*op));
        }
        Expr::Binary(op, a, b) => {
            emit(a, code);
            emit(b, code);
            code.push(Instr::Binary(*op));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn matches_tree_evaluation() {
        for src in [
            "c1*p/(c2+p)",
            "sqrt(p - c1) * cube(c2)",
            "p ^ c1 / (1 - p)",
            "square(p) - 3",
        ] {
            let e = parse(src).unwrap();
            let c = CompiledExpr::new(&e);
            for p in [0.0, 0.5, 1.0, 2.0, 10.0] {
                let a = e.eval(&[1.5, -0.5], p);
                let b = c.eval(&[1.5, -0.5], p);
                assert!(a == b || (a.is_nan() && b.is_nan()), "{src} at {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn batch_matches_pointwise() {
        let xs = [0.5, 1.0, 2.0, 10.0];
        let mut buf = Vec::new();
        for src in ["c1*p/(c2+p)", "sqrt(p) * cube(c2) - p", "square(p) - 3", "c1"] {
            let c = CompiledExpr::new(&parse(src).unwrap());
            let out = c.eval_batch(&[1.5, 2.5], &xs, &mut buf).unwrap().to_vec();
            let want: Vec<f64> = xs.iter().map(|&p| c.eval(&[1.5, 2.5], p)).collect();
            assert_eq!(out, want, "{src}");
        }
        let c = CompiledExpr::new(&parse("sqrt(p - 1)").unwrap());
        assert!(c.eval_batch(&[], &xs, &mut buf).is_none());
        let c = CompiledExpr::new(&parse("1 / (1 / (p - 1))").unwrap());
        assert!(c.eval_batch(&[], &xs, &mut buf).is_none());
    }
}
