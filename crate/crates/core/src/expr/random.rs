use rand::Rng;

use super::{Expr, OpKind};

/// Bounds for random tree generation.
#[derive(Clone, Debug)]
pub struct TreeLimits {
    pub max_size: usize,
    pub max_depth: usize,
    /// Mean size of generated trees before clamping to `max_size`.
    pub target_size: usize,
    /// Probability that a fresh leaf is `p` rather than a parameter.
    pub var_leaf_prob: f64,
}

impl Default for TreeLimits {
    fn default() -> Self {
        TreeLimits {
            max_size: 20,
            max_depth: 10,
            target_size: 5,
            var_leaf_prob: 0.5,
        }
    }
}

fn random_leaf<R: Rng + ?Sized>(limits: &TreeLimits, rng: &mut R) -> Expr {
    if rng.random_bool(limits.var_leaf_prob.clamp(0.0, 1.0)) {
        Expr::Var
    } else {
        Expr::Param(0)
    }
}

/// Leaves (pre-order index, depth) that may still be expanded.
fn expandable_leaves(e: &Expr, max_depth: usize) -> Vec<usize> {
    fn walk(e: &Expr, depth: usize, max_depth: usize, idx: &mut usize, out: &mut Vec<usize>) {
        let me = *idx;
        *idx += 1;
        match e {
            Expr::Unary(_, a) => walk(a, depth + 1, max_depth, idx, out),
            Expr::Binary(_, a, b) => {
                walk(a, depth + 1, max_depth, idx, out);
                walk(b, depth + 1, max_depth, idx, out);
            }
            _ => {
                if depth < max_depth {
                    out.push(me);
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut idx = 0;
    walk(e, 1, max_depth, &mut idx, &mut out);
    out
}

/// Grows a random tree by repeatedly expanding leaves until a sampled size is
/// reached. The result never exceeds `max_size` nodes or `max_depth` levels,
/// and every parameter leaf gets its own index.
pub fn random_tree<R: Rng + ?Sized>(limits: &TreeLimits, opset: &[OpKind], rng: &mut R) -> Expr {
    let max_size = limits.max_size.max(1);
    let upper = (2 * limits.target_size.max(1)).saturating_sub(1).max(1);
    let goal = rng.random_range(1..=upper).min(max_size);
    let mut tree = random_leaf(limits, rng);
    if opset.is_empty() || limits.max_depth <= 1 {
        return tree.fresh_params();
    }
    let unary: Vec<OpKind> = opset.iter().copied().filter(|o| o.arity() == 1).collect();
    let mut size = 1;
    while size < goal {
        let leaves = expandable_leaves(&tree, limits.max_depth);
        if leaves.is_empty() {
            break;
        }
        let mut op = opset[rng.random_range(0..opset.len())];
        if op.arity() == 2 && size + 2 > max_size {
            if unary.is_empty() {
                break;
            }
            op = unary[rng.random_range(0..unary.len())];
        }
        let at = leaves[rng.random_range(0..leaves.len())];
        let node = if op.arity() == 1 {
            size += 1;
            Expr::unary(op, random_leaf(limits, rng))
        } else {
            size += 2;
            let l = random_leaf(limits, rng);
            Expr::binary(op, l, random_leaf(limits, rng))
        };
        tree = tree.replace(at, node);
    }
    tree.fresh_params()
}
