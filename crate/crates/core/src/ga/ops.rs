//! Tree mutations and crossover for the genetic search.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::algebra::{simplify, simplify_local};
use crate::expr::{random_tree, Expr, OpKind, TreeLimits};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MutationKind {
    Constant,
    Operator,
    Append,
    Insert,
    Delete,
    Simplify,
    Regenerate,
}

impl MutationKind {
    pub const ALL: [MutationKind; 7] = [
        MutationKind::Constant,
        MutationKind::Operator,
        MutationKind::Append,
        MutationKind::Insert,
        MutationKind::Delete,
        MutationKind::Simplify,
        MutationKind::Regenerate,
    ];
}

/// Relative selection weights for each mutation kind.
#[derive(Clone, Debug, PartialEq)]
pub struct MutationWeights {
    pub constant: f64,
    pub operator: f64,
    pub append: f64,
    pub insert: f64,
    pub delete: f64,
    pub simplify: f64,
    pub regenerate: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        MutationWeights {
            constant: 1.0,
            operator: 1.0,
            append: 1.0,
            insert: 1.0,
            delete: 1.0,
            simplify: 0.5,
            regenerate: 1.0,
        }
    }
}

impl MutationWeights {
    pub fn weight(&self, k: MutationKind) -> f64 {
        match k {
            MutationKind::Constant => self.constant,
            MutationKind::Operator => self.operator,
            MutationKind::Append => self.append,
            MutationKind::Insert => self.insert,
            MutationKind::Delete => self.delete,
            MutationKind::Simplify => self.simplify,
            MutationKind::Regenerate => self.regenerate,
        }
    }

    /// Draws a kind, skipping any in `exclude`. `None` if nothing is left.
    pub fn sample<R: Rng + ?Sized>(&self, exclude: &[MutationKind], rng: &mut R) -> Option<MutationKind> {
        let live: Vec<(MutationKind, f64)> = MutationKind::ALL
            .iter()
            .filter(|k| !exclude.contains(k))
            .map(|&k| (k, self.weight(k).max(0.0)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let total: f64 = live.iter().map(|x| x.1).sum();
        if live.is_empty() {
            return None;
        }
        let mut u = rng.random_range(0.0..total);
        for &(k, w) in &live {
            if u < w {
                return Some(k);
            }
            u -= w;
        }
        live.last().map(|x| x.0)
    }
}

/// Operator set and size limits used by the structural operators.
#[derive(Clone, Debug)]
pub struct OpsContext {
    pub opset: Vec<OpKind>,
    pub limits: TreeLimits,
}

impl OpsContext {
    pub fn fits(&self, e: &Expr) -> bool {
        e.complexity() <= self.limits.max_size && e.depth() <= self.limits.max_depth
    }

    fn leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        if rng.random_bool(self.limits.var_leaf_prob.clamp(0.0, 1.0)) {
            Expr::Var
        } else {
            Expr::Param(0)
        }
    }

    fn op<R: Rng + ?Sized>(&self, rng: &mut R) -> OpKind {
        *self.opset.choose(rng).expect("empty operator set")
    }

    fn grow<R: Rng + ?Sized>(&self, base: Option<Expr>, rng: &mut R) -> Expr {
        let op = self.op(rng);
        if op.arity() == 1 {
            let a = base.unwrap_or_else(|| self.leaf(rng));
            return Expr::unary(op, a);
        }
        let fresh = self.leaf(rng);
        match base {
            Some(b) if rng.random_bool(0.5) => Expr::binary(op, b, fresh),
            Some(b) => Expr::binary(op, fresh, b),
            None => Expr::binary(op, fresh, self.leaf(rng)),
        }
    }
}

fn positions(e: &Expr, pred: impl Fn(&Expr) -> bool) -> Vec<usize> {
    e.nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| pred(n))
        .map(|(i, _)| i)
        .collect()
}

/// Replaces one operator by a different one of the same arity.
pub fn mutate_operator<R: Rng + ?Sized>(e: &Expr, ctx: &OpsContext, rng: &mut R) -> Option<Expr> {
    let sites: Vec<(usize, Vec<OpKind>)> = e
        .nodes()
        .iter()
        .enumerate()
        .filter_map(|(i, n)| {
            let op = n.op()?;
            let alts: Vec<OpKind> = ctx
                .opset
                .iter()
                .copied()
                .filter(|&o| o != op && o.arity() == op.arity())
                .collect();
            (!alts.is_empty()).then_some((i, alts))
        })
        .collect();
    let (i, alts) = sites.choose(rng)?;
    let new_op = *alts.choose(rng)?;
    let node = e.get(*i)?;
    let children: Vec<Expr> = node.children().into_iter().cloned().collect();
    Some(e.replace(*i, Expr::apply(new_op, children).ok()?))
}

/// Turns a leaf into an operator node with fresh leaf operands.
pub fn append_node<R: Rng + ?Sized>(e: &Expr, ctx: &OpsContext, rng: &mut R) -> Option<Expr> {
    let leaves = positions(e, Expr::is_leaf);
    let &i = leaves.choose(rng)?;
    let out = e.replace(i, ctx.grow(None, rng));
    ctx.fits(&out).then_some(out)
}

/// Splices a new operator above an existing subtree.
pub fn insert_node<R: Rng + ?Sized>(e: &Expr, ctx: &OpsContext, rng: &mut R) -> Option<Expr> {
    let i = rng.random_range(0..e.complexity());
    let sub = e.get(i)?.clone();
    let out = e.replace(i, ctx.grow(Some(sub), rng));
    ctx.fits(&out).then_some(out)
}

/// Replaces an operator subtree by a single leaf.
pub fn delete_subtree<R: Rng + ?Sized>(e: &Expr, ctx: &OpsContext, rng: &mut R) -> Option<Expr> {
    let internal = positions(e, |n| !n.is_leaf());
    let &i = internal.choose(rng)?;
    Some(e.replace(i, ctx.leaf(rng)))
}

/// Rewrites `x^k`, squares and cubes as products so the result stays inside
/// an opset without those operators. `None` if that is impossible.
fn expand_powers(e: &Expr, opset: &[OpKind]) -> Option<Expr> {
    let power = |a: Expr, k: i64| -> Option<Expr> {
        if !(1..=4).contains(&k.abs()) {
            return None;
        }
        let mut acc = a.clone();
        for _ in 1..k.abs() {
            acc = Expr::mul(acc, a.clone());
        }
        Some(if k < 0 { Expr::div(Expr::Int(1), acc) } else { acc })
    };
    Some(match e {
        Expr::Unary(op, a) => {
            let a = expand_powers(a, opset)?;
            match op {
                _ if opset.contains(op) => Expr::unary(*op, a),
                OpKind::Square => power(a, 2)?,
                OpKind::Cube => power(a, 3)?,
                _ => return None,
            }
        }
        Expr::Binary(op, a, b) => {
            let a = expand_powers(a, opset)?;
            match (op, b.as_ref()) {
                _ if opset.contains(op) => Expr::binary(*op, a, expand_powers(b, opset)?),
                (OpKind::Pow, Expr::Int(k)) => power(a, *k)?,
                _ => return None,
            }
        }
        leaf => leaf.clone(),
    })
}

/// Collapses every `p`-free subtree that contains a parameter into one parameter.
fn merge_constant_subtrees(e: &Expr) -> Expr {
    if !e.has_var() && e.has_param() {
        return Expr::Param(0);
    }
    match e {
        Expr::Unary(op, a) => Expr::unary(*op, merge_constant_subtrees(a)),
        Expr::Binary(op, a, b) => {
            Expr::binary(*op, merge_constant_subtrees(a), merge_constant_subtrees(b))
        }
        leaf => leaf.clone(),
    }
}

/// Algebraic simplification followed by collapsing constant subtrees. Falls
/// back to local rewrites when the full result is larger or leaves the opset.
pub fn simplify_tree(e: &Expr, ctx: &OpsContext) -> Option<Expr> {
    let tidy = |x: &Expr| -> Option<Expr> {
        let x = merge_constant_subtrees(&expand_powers(x, &ctx.opset)?);
        ctx.fits(&x).then_some(x)
    };
    let full = tidy(&simplify(e)).filter(|x| x.complexity() <= e.complexity());
    let out = full.or_else(|| tidy(&simplify_local(e)))?;
    Some(out.fresh_params())
}

/// Applies one structural mutation. `Constant` is handled by the caller since
/// it needs the fitted values; here it returns `None`.
pub fn mutate_structure<R: Rng + ?Sized>(
    kind: MutationKind,
    e: &Expr,
    ctx: &OpsContext,
    rng: &mut R,
) -> Option<Expr> {
    let out = match kind {
        MutationKind::Constant => None,
        MutationKind::Operator => mutate_operator(e, ctx, rng),
        MutationKind::Append => append_node(e, ctx, rng),
        MutationKind::Insert => insert_node(e, ctx, rng),
        MutationKind::Delete => delete_subtree(e, ctx, rng),
        MutationKind::Simplify => simplify_tree(e, ctx),
        MutationKind::Regenerate => Some(random_tree(&ctx.limits, &ctx.opset, rng)),
    }?;
    Some(out.fresh_params())
}

/// Replaces a uniformly chosen subtree of `a` with a uniformly chosen subtree
/// of `b`, redrawing up to 8 times when the child is too big.
pub fn crossover<R: Rng + ?Sized>(a: &Expr, b: &Expr, ctx: &OpsContext, rng: &mut R) -> Option<Expr> {
    for _ in 0..8 {
        let i = rng.random_range(0..a.complexity());
        let j = rng.random_range(0..b.complexity());
        let child = a.replace(i, b.get(j)?.clone());
        if ctx.fits(&child) {
            return Some(child.fresh_params());
        }
    }
    None
}
