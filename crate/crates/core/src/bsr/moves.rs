//! Tree proposals for the Markov chain and their exact proposal probabilities.
//!
//! Trees here are shape-only: every parameter leaf is `Param(0)`.

use rand::Rng;

use crate::expr::{Expr, OpKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveKind {
    NodeReplace,
    RootAdd,
    RootRemove,
    ElemAdd,
    ElemRemove,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::NodeReplace,
        MoveKind::RootAdd,
        MoveKind::RootRemove,
        MoveKind::ElemAdd,
        MoveKind::ElemRemove,
    ];
}

/// Relative frequencies of node replacement, root addition/removal and
/// elementary-tree replacement. The latter two split evenly between their
/// growing and shrinking directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveFreqs {
    pub node_replace: f64,
    pub root: f64,
    pub elementary: f64,
}

impl Default for MoveFreqs {
    fn default() -> Self {
        MoveFreqs {
            node_replace: 0.5,
            root: 0.25,
            elementary: 0.25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub tree: Expr,
    pub kind: MoveKind,
    /// `ln q(new -> old) - ln q(old -> new)`.
    pub log_ratio: f64,
}

/// Operator and leaf alphabet plus move frequencies.
#[derive(Clone, Debug)]
pub struct MoveSet {
    pub ops: Vec<OpKind>,
    pub leaves: Vec<Expr>,
    pub freqs: MoveFreqs,
}

impl MoveSet {
    pub fn new(ops: &[OpKind], freqs: MoveFreqs) -> Self {
        MoveSet {
            ops: ops.to_vec(),
            leaves: vec![Expr::Var, Expr::Param(0)],
            freqs,
        }
    }

    fn same_arity(&self, arity: usize) -> usize {
        if arity == 0 {
            self.leaves.len()
        } else {
            self.ops.iter().filter(|o| o.arity() == arity).count()
        }
    }

    fn alternatives(&self, node: &Expr) -> usize {
        let arity = node.op().map_or(0, OpKind::arity);
        self.same_arity(arity).saturating_sub(1)
    }

    fn label_alternatives(&self, node: &Expr) -> Vec<Expr> {
        match node {
            Expr::Unary(op, a) => self
                .ops
                .iter()
                .filter(|o| o.arity() == 1 && *o != op)
                .map(|&o| Expr::unary(o, (**a).clone()))
                .collect(),
            Expr::Binary(op, a, b) => self
                .ops
                .iter()
                .filter(|o| o.arity() == 2 && *o != op)
                .map(|&o| Expr::binary(o, (**a).clone(), (**b).clone()))
                .collect(),
            leaf => self.leaves.iter().filter(|l| *l != leaf).cloned().collect(),
        }
    }

    fn is_leaf_label(&self, e: &Expr) -> bool {
        self.leaves.contains(e)
    }

    fn is_elementary(&self, e: &Expr) -> bool {
        !e.is_leaf() && e.children().iter().all(|c| self.is_leaf_label(c))
    }

    fn replace_sites(&self, t: &Expr) -> Vec<usize> {
        t.nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| self.alternatives(n) > 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Root children that can be promoted: the only child of a unary root, or
    /// a child of a binary root whose sibling is a leaf.
    fn removable_children<'a>(&self, t: &'a Expr) -> Vec<&'a Expr> {
        match t {
            Expr::Unary(_, a) => vec![a],
            Expr::Binary(_, a, b) => {
                let mut v = Vec::new();
                if self.is_leaf_label(b) {
                    v.push(a.as_ref());
                }
                if self.is_leaf_label(a) {
                    v.push(b.as_ref());
                }
                v
            }
            _ => Vec::new(),
        }
    }

    fn count<'a>(&self, t: &'a Expr, pred: impl Fn(&Expr) -> bool) -> usize {
        t.nodes().into_iter().filter(|n| pred(n)).count()
    }

    fn raw_freq(&self, k: MoveKind) -> f64 {
        match k {
            MoveKind::NodeReplace => self.freqs.node_replace,
            MoveKind::RootAdd | MoveKind::RootRemove => self.freqs.root / 2.0,
            MoveKind::ElemAdd | MoveKind::ElemRemove => self.freqs.elementary / 2.0,
        }
    }

    pub fn applicable(&self, t: &Expr, k: MoveKind) -> bool {
        match k {
            MoveKind::NodeReplace => t.nodes().iter().any(|n| self.alternatives(n) > 0),
            MoveKind::RootAdd => !self.ops.is_empty(),
            MoveKind::RootRemove => !self.removable_children(t).is_empty(),
            MoveKind::ElemAdd => !self.ops.is_empty(),
            MoveKind::ElemRemove => t.nodes().iter().any(|n| self.is_elementary(n)),
        }
    }

    /// Move-type probabilities at `t`, renormalised over applicable moves.
    pub fn kind_probs(&self, t: &Expr) -> [f64; 5] {
        let raw: [f64; 5] = std::array::from_fn(|i| {
            let k = MoveKind::ALL[i];
            if self.applicable(t, k) {
                self.raw_freq(k).max(0.0)
            } else {
                0.0
            }
        });
        let total: f64 = raw.iter().sum();
        raw.map(|x| if total > 0.0 { x / total } else { 0.0 })
    }

    fn pick<'a, T, R: Rng + ?Sized>(items: &'a [T], rng: &mut R) -> &'a T {
        &items[rng.random_range(0..items.len())]
    }

    fn random_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Expr {
        Self::pick(&self.leaves, rng).clone()
    }

    /// Builds an operator node over `base` (or fresh leaves) as root addition
    /// and elementary insertion do.
    fn wrap<R: Rng + ?Sized>(&self, base: Option<Expr>, rng: &mut R) -> Expr {
        let op = *Self::pick(&self.ops, rng);
        if op.arity() == 1 {
            return Expr::unary(op, base.unwrap_or_else(|| self.random_leaf(rng)));
        }
        match base {
            Some(b) => {
                let leaf = self.random_leaf(rng);
                if rng.random_bool(0.5) {
                    Expr::binary(op, b, leaf)
                } else {
                    Expr::binary(op, leaf, b)
                }
            }
            None => {
                let a = self.random_leaf(rng);
                Expr::binary(op, a, self.random_leaf(rng))
            }
        }
    }

    pub fn sample_kind<R: Rng + ?Sized>(&self, t: &Expr, rng: &mut R) -> MoveKind {
        let probs = self.kind_probs(t);
        let mut u: f64 = rng.random();
        for (k, p) in MoveKind::ALL.iter().zip(probs) {
            if u < p {
                return *k;
            }
            u -= p;
        }
        *MoveKind::ALL
            .iter()
            .zip(probs)
            .rev()
            .find(|(_, p)| *p > 0.0)
            .expect("no applicable move")
            .0
    }

    /// Applies a move of the given kind. Panics if it is not applicable.
    pub fn apply<R: Rng + ?Sized>(&self, t: &Expr, kind: MoveKind, rng: &mut R) -> Expr {
        match kind {
            MoveKind::NodeReplace => {
                let sites = self.replace_sites(t);
                let i = *Self::pick(&sites, rng);
                let alts = self.label_alternatives(t.get(i).unwrap());
                t.replace(i, Self::pick(&alts, rng).clone())
            }
            MoveKind::RootAdd => self.wrap(Some(t.clone()), rng),
            MoveKind::RootRemove => (*Self::pick(&self.removable_children(t), rng)).clone(),
            MoveKind::ElemAdd => {
                let leaves: Vec<usize> = (0..t.complexity()).filter(|&i| t.get(i).unwrap().is_leaf()).collect();
                let i = *Self::pick(&leaves, rng);
                t.replace(i, self.wrap(None, rng))
            }
            MoveKind::ElemRemove => {
                let sites: Vec<usize> = (0..t.complexity())
                    .filter(|&i| self.is_elementary(t.get(i).unwrap()))
                    .collect();
                let i = *Self::pick(&sites, rng);
                t.replace(i, self.random_leaf(rng))
            }
        }
    }

    pub fn propose<R: Rng + ?Sized>(&self, t: &Expr, rng: &mut R) -> Proposal {
        let kind = self.sample_kind(t, rng);
        let tree = self.apply(t, kind, rng);
        let fwd = self.proposal_prob(t, &tree);
        let rev = self.proposal_prob(&tree, t);
        Proposal {
            log_ratio: rev.ln() - fwd.ln(),
            tree,
            kind,
        }
    }

    /// Exact probability that one proposal from `from` yields `to`, summed over
    /// every move kind that can produce it.
    pub fn proposal_prob(&self, from: &Expr, to: &Expr) -> f64 {
        let probs = self.kind_probs(from);
        let n_ops = self.ops.len() as f64;
        let n_leaf = self.leaves.len() as f64;
        let mut q = 0.0;

        if let Some((x, y)) = diff(from, to) {
            let same_shape_label_change = x.op().map(OpKind::arity) == y.op().map(OpKind::arity)
                && x.children() == y.children();
            if probs[0] > 0.0 && same_shape_label_change {
                let sites = self.count(from, |n| self.alternatives(n) > 0) as f64;
                q += probs[0] / sites / self.alternatives(x) as f64;
            }
            if probs[3] > 0.0 && self.is_leaf_label(x) && self.is_elementary(y) {
                let leaves = self.count(from, Expr::is_leaf) as f64;
                let arity = y.op().unwrap().arity() as i32;
                q += probs[3] / leaves / n_ops / n_leaf.powi(arity);
            }
            if probs[4] > 0.0 && self.is_elementary(x) && self.is_leaf_label(y) {
                let sites = self.count(from, |n| self.is_elementary(n)) as f64;
                q += probs[4] / sites / n_leaf;
            }
        }

        if probs[1] > 0.0 {
            match to {
                Expr::Unary(_, a) if a.as_ref() == from => q += probs[1] / n_ops,
                Expr::Binary(_, a, b) => {
                    let hits = (a.as_ref() == from && self.is_leaf_label(b)) as u32
                        + (b.as_ref() == from && self.is_leaf_label(a)) as u32;
                    q += probs[1] * hits as f64 / n_ops / 2.0 / n_leaf;
                }
                _ => {}
            }
        }
        if probs[2] > 0.0 {
            let kids = self.removable_children(from);
            let hits = kids.iter().filter(|k| **k == to).count();
            q += probs[2] * hits as f64 / kids.len() as f64;
        }
        q
    }
}

/// The smallest subtree pair outside of which `a` and `b` are identical.
/// `None` if the trees are equal.
pub fn diff<'a>(a: &'a Expr, b: &'a Expr) -> Option<(&'a Expr, &'a Expr)> {
    if a == b {
        return None;
    }
    match (a, b) {
        (Expr::Unary(x, ca), Expr::Unary(y, cb)) if x == y => diff(ca, cb),
        (Expr::Binary(x, la, ra), Expr::Binary(y, lb, rb)) if x == y => {
            match (la == lb, ra == rb) {
                (true, false) => diff(ra, rb),
                (false, true) => diff(la, lb),
                _ => Some((a, b)),
            }
        }
        _ => Some((a, b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moves() -> MoveSet {
        MoveSet::new(&OpKind::BSR_OPSET, MoveFreqs::default())
    }

    fn shape(s: &str) -> Expr {
        parse(s).unwrap().anonymize()
    }

    /// All proposals from `t` by brute force: every concrete choice with its
    /// probability.
    fn enumerate(ms: &MoveSet, t: &Expr) -> Vec<(Expr, f64)> {
        let probs = ms.kind_probs(t);
        let n_ops = ms.ops.len() as f64;
        let nl = ms.leaves.len() as f64;
        let mut out = Vec::new();
        let sites = ms.replace_sites(t);
        for &i in &sites {
            let alts = ms.label_alternatives(t.get(i).unwrap());
            for a in &alts {
                out.push((t.replace(i, a.clone()), probs[0] / sites.len() as f64 / alts.len() as f64));
            }
        }
        let wraps = |base: Option<&Expr>| -> Vec<(Expr, f64)> {
            let mut v = Vec::new();
            for &op in &ms.ops {
                if op.arity() == 1 {
                    let c = base.cloned().map_or_else(|| ms.leaves.clone(), |b| vec![b]);
                    for x in &c {
                        v.push((Expr::unary(op, x.clone()), 1.0 / n_ops / c.len() as f64));
                    }
                } else if let Some(b) = base {
                    for l in &ms.leaves {
                        v.push((Expr::binary(op, b.clone(), l.clone()), 0.5 / n_ops / nl));
                        v.push((Expr::binary(op, l.clone(), b.clone()), 0.5 / n_ops / nl));
                    }
                } else {
                    for l in &ms.leaves {
                        for r in &ms.leaves {
                            v.push((Expr::binary(op, l.clone(), r.clone()), 1.0 / n_ops / nl / nl));
                        }
                    }
                }
            }
            v
        };
        for (e, p) in wraps(Some(t)) {
            out.push((e, probs[1] * p));
        }
        let kids = ms.removable_children(t);
        for k in &kids {
            out.push(((*k).clone(), probs[2] / kids.len() as f64));
        }
        let leaves: Vec<usize> = (0..t.complexity()).filter(|&i| t.get(i).unwrap().is_leaf()).collect();
        for &i in &leaves {
            for (e, p) in wraps(None) {
                out.push((t.replace(i, e), probs[3] * p / leaves.len() as f64));
            }
        }
        let elems: Vec<usize> = (0..t.complexity()).filter(|&i| ms.is_elementary(t.get(i).unwrap())).collect();
        for &i in &elems {
            for l in &ms.leaves {
                out.push((t.replace(i, l.clone()), probs[4] / elems.len() as f64 / nl));
            }
        }
        out
    }

    #[test]
    fn proposal_probabilities_match_enumeration() {
        let ms = moves();
        for src in ["p", "c1", "p + c1", "sqrt(p)", "c1*p/(c2+p)", "square(p + p)", "(p+p)*(c1-c1)", "cube(sqrt(p))"] {
            let t = shape(src);
            let all = enumerate(&ms, &t);
            let total: f64 = all.iter().map(|x| x.1).sum();
            assert!((total - 1.0).abs() < 1e-12, "{src}: {total}");
            let mut seen: Vec<&Expr> = Vec::new();
            for (e, _) in &all {
                if seen.contains(&e) {
                    continue;
                }
                seen.push(e);
                let want: f64 = all.iter().filter(|x| &x.0 == e).map(|x| x.1).sum();
                let got = ms.proposal_prob(&t, e);
                assert!((want - got).abs() < 1e-14, "{src} -> {e}: {want} vs {got}");
            }
        }
    }

    #[test]
    fn every_move_is_reversible() {
        let ms = moves();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = shape("c1*p/(c2+p)");
        for _ in 0..2000 {
            let prop = ms.propose(&t, &mut rng);
            assert!(prop.log_ratio.is_finite(), "{t} -> {}", prop.tree);
            if prop.tree.complexity() <= 12 {
                t = prop.tree;
            }
        }
    }

    #[test]
    fn node_replace_on_leaf_keeps_shape() {
        let ms = moves();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = shape("p");
        for _ in 0..20 {
            assert_eq!(ms.apply(&t, MoveKind::NodeReplace, &mut rng), shape("c1"));
        }
    }

    #[test]
    fn root_add_then_remove_restores() {
        let ms = moves();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = shape("sqrt(p) * c1");
        for _ in 0..50 {
            let up = ms.apply(&t, MoveKind::RootAdd, &mut rng);
            assert!(ms.removable_children(&up).contains(&&t));
            assert!(ms.proposal_prob(&up, &t) > 0.0);
        }
    }

    #[test]
    fn move_frequencies() {
        let ms = moves();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = shape("(p + c1) * p");
        let n = 1_000_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let k = ms.sample_kind(&t, &mut rng);
            counts[MoveKind::ALL.iter().position(|&x| x == k).unwrap()] += 1;
        }
        let want = [0.5, 0.125, 0.125, 0.125, 0.125];
        for i in 0..5 {
            assert!((counts[i] as f64 / n as f64 - want[i]).abs() < 0.01, "{counts:?}");
        }
    }
}
