//! Bayesian symbolic regression: a Metropolis chain over expression shapes.
//!
//! The chain minimises the description length `BIC/2 + EP` in expectation,
//! where the prior energy `EP` charges `c_ops` per operator, `b_i` for each of
//! the first two constraints the fitted model fails, and optionally `c_par` per
//! parameter. Without data the chain samples `exp(-EP)` alone.

pub mod moves;

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::constraints::{CheckConfig, CheckMask, ConstraintChecker, ConstraintVerdict};
use crate::datasets::Dataset;
use crate::expr::{random_tree, Expr, OpKind, TreeLimits};
use crate::fit::{FitConfig, SENTINEL_LOSS};
use crate::report::{Engine, ParetoFront, RunRecord, RunStats, ScoredModel};
use crate::search::{Evaluated, Evaluator};

pub use moves::{MoveFreqs, MoveKind, MoveSet, Proposal};

#[derive(Clone, Debug, PartialEq)]
pub struct BsrConfig {
    /// Prior energy per operator node.
    pub c_ops: f64,
    /// Prior energy added when constraint 1 or 2 fails; zero disables it.
    pub penalties: [f64; 2],
    /// Prior energy per parameter.
    pub c_par: f64,
    pub steps: usize,
    pub freqs: MoveFreqs,
    pub max_size: usize,
    /// Keep every `thin`-th state as a sample.
    pub thin: usize,
    pub opset: Vec<OpKind>,
    pub fit: FitConfig,
    /// Mean size of the random starting tree.
    pub init_size: usize,
    pub var_leaf_prob: f64,
}

impl Default for BsrConfig {
    fn default() -> Self {
        BsrConfig {
            c_ops: 5.0,
            penalties: [20.0, 10.0],
            c_par: 0.0,
            steps: 100_000,
            freqs: MoveFreqs::default(),
            max_size: 20,
            thin: 10,
            opset: OpKind::BSR_OPSET.to_vec(),
            fit: FitConfig {
                screen_iter: 100,
                max_iter: 1000,
                ..FitConfig::default()
            },
            init_size: 3,
            var_leaf_prob: 0.5,
        }
    }
}

impl BsrConfig {
    pub fn without_constraints(mut self) -> Self {
        self.penalties = [0.0; 2];
        self
    }

    pub fn constraints_active(&self) -> bool {
        self.penalties.iter().any(|&b| b > 0.0)
    }

    pub fn check_mask(&self) -> CheckMask {
        [self.penalties[0] > 0.0, self.penalties[1] > 0.0, false]
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.c_ops >= 0.0 && self.c_par >= 0.0) || self.penalties.iter().any(|b| !(*b >= 0.0)) {
            return Err("c_ops, c_par and penalties must be >= 0".into());
        }
        let f = self.freqs;
        if [f.node_replace, f.root, f.elementary].iter().any(|x| !(*x >= 0.0))
            || f.node_replace + f.root + f.elementary <= 0.0
        {
            return Err("move frequencies must be >= 0 and not all zero".into());
        }
        if self.thin == 0 || self.max_size == 0 {
            return Err("thin and max_size must be positive".into());
        }
        if self.opset.is_empty() {
            return Err("operator set is empty".into());
        }
        Ok(())
    }

    pub fn moves(&self) -> MoveSet {
        MoveSet::new(&self.opset, self.freqs)
    }
}

/// Gaussian-likelihood BIC, `N ln(SSE/N) + (k + 1) ln N` with `k` parameters
/// and `SSE = N * loss` clamped below at `1e-30`.
pub fn bic(n: usize, loss: f64, n_params: usize) -> f64 {
    let nf = n as f64;
    let sse = (nf * loss).max(1e-30);
    nf * (sse / nf).ln() + (n_params as f64 + 1.0) * nf.ln()
}

/// `c_ops * ops + sum of b_i over failed constraints + c_par * params`.
pub fn prior_energy(n_ops: usize, n_params: usize, verdict: Option<&ConstraintVerdict>, cfg: &BsrConfig) -> f64 {
    let mut ep = size_energy(n_ops, n_params, cfg);
    for (i, &b) in cfg.penalties.iter().enumerate() {
        if b > 0.0 && !verdict.is_some_and(|v| v.pass(i)) {
            ep += b;
        }
    }
    ep
}

/// The prior energy before constraint penalties.
fn size_energy(n_ops: usize, n_params: usize, cfg: &BsrConfig) -> f64 {
    cfg.c_ops * n_ops as f64 + cfg.c_par * n_params as f64
}

/// Metropolis rule: accept with probability `min(1, exp(-delta_l + log_ratio))`.
pub fn accept<R: Rng + ?Sized>(delta_l: f64, log_ratio: f64, rng: &mut R) -> bool {
    let a = log_ratio - delta_l;
    if a.is_nan() {
        return false;
    }
    if a >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < a
}

/// A scored chain state.
#[derive(Clone, Debug)]
pub struct ChainState {
    /// Shape with anonymous parameters.
    pub tree: Expr,
    /// Same tree with parameters numbered per leaf.
    pub expr: Expr,
    pub params: Vec<f64>,
    /// Mean squared error; zero when sampling the prior.
    pub loss: f64,
    pub verdict: Option<ConstraintVerdict>,
    pub bic: f64,
    pub prior_energy: f64,
    pub description_length: f64,
    /// The fit behind this state; `None` when sampling the prior.
    pub fitted: Option<Arc<Evaluated>>,
}

impl ChainState {
    pub fn to_model(&self) -> Option<ScoredModel> {
        let f = self.fitted.as_ref()?;
        let mut m = ScoredModel::with_canonical(self.expr.clone(), self.params.clone(), self.loss, f.canonical().clone());
        m.verdict = self.verdict;
        Some(m)
    }
}

const CHAIN_MEMO_CAP: usize = 200_000;

/// Memo entry. A pending state carries the description length without
/// constraint penalties, a lower bound on the full value.
#[derive(Clone)]
struct Entry {
    state: Arc<ChainState>,
    pending: bool,
}

/// One Metropolis chain. With an evaluator it targets the posterior; without
/// one it targets the prior `exp(-EP)`, checking constraints at unit
/// parameter values.
pub struct Chain<'a> {
    cfg: &'a BsrConfig,
    moves: MoveSet,
    checker: &'a ConstraintChecker,
    evaluator: Option<&'a Evaluator>,
    state: Arc<ChainState>,
    memo: HashMap<Expr, Entry>,
    pub stats: RunStats,
}

impl<'a> Chain<'a> {
    pub fn new(cfg: &'a BsrConfig, checker: &'a ConstraintChecker, evaluator: Option<&'a Evaluator>, initial: &Expr) -> Self {
        let mut chain = Chain {
            cfg,
            moves: cfg.moves(),
            checker,
            evaluator,
            state: Arc::new(placeholder()),
            memo: HashMap::new(),
            stats: RunStats::default(),
        };
        chain.state = chain.evaluate(&initial.anonymize());
        chain
    }

    /// Starts from a random tree with finite description length, or from a
    /// single constant if none is found.
    pub fn random_start<R: Rng + ?Sized>(
        cfg: &'a BsrConfig,
        checker: &'a ConstraintChecker,
        evaluator: Option<&'a Evaluator>,
        rng: &mut R,
    ) -> Self {
        let limits = TreeLimits {
            max_size: cfg.max_size,
            max_depth: cfg.max_size,
            target_size: cfg.init_size,
            var_leaf_prob: cfg.var_leaf_prob,
        };
        let mut chain = Chain::new(cfg, checker, evaluator, &Expr::Param(0));
        for _ in 0..100 {
            let t = random_tree(&limits, &cfg.opset, rng).anonymize();
            let s = chain.evaluate(&t);
            if s.description_length.is_finite() {
                chain.state = s;
                break;
            }
        }
        chain
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn moves(&self) -> &MoveSet {
        &self.moves
    }

    /// Fully scores a shape (memoised per chain).
    pub fn evaluate(&mut self, tree: &Expr) -> Arc<ChainState> {
        let e = self.base(tree);
        if e.pending {
            self.complete(&e.state)
        } else {
            e.state
        }
    }

    fn remember(&mut self, tree: &Expr, entry: Entry) {
        if self.memo.len() >= CHAIN_MEMO_CAP {
            self.memo.clear();
        }
        self.memo.insert(tree.clone(), entry);
    }

    /// Scores a shape without running constraint checks.
    fn base(&mut self, tree: &Expr) -> Entry {
        if let Some(e) = self.memo.get(tree) {
            return e.clone();
        }
        let mask = self.cfg.check_mask();
        let check = mask.iter().any(|&m| m);
        let n_ops = tree.op_count();
        self.stats.evaluations += 1;
        let (state, pending) = match self.evaluator {
            Some(ev) => {
                let fitted = ev.evaluate(tree);
                let n_params = tree.param_leaf_count();
                let defined = fitted.loss < SENTINEL_LOSS;
                let b = bic(ev.dataset().len(), fitted.loss, n_params);
                let ep = if check && defined { size_energy(n_ops, n_params, self.cfg) } else { prior_energy(n_ops, n_params, None, self.cfg) };
                let state = ChainState {
                    tree: tree.clone(),
                    expr: fitted.expr.clone(),
                    params: fitted.params.clone(),
                    loss: fitted.loss,
                    verdict: None,
                    bic: b,
                    prior_energy: ep,
                    description_length: if defined { b / 2.0 + ep } else { f64::INFINITY },
                    fitted: Some(fitted),
                };
                (state, check && defined)
            }
            None => {
                let expr = tree.fresh_params();
                let params = vec![1.0; expr.max_param()];
                let ep = if check { size_energy(n_ops, params.len(), self.cfg) } else { prior_energy(n_ops, params.len(), None, self.cfg) };
                let state = ChainState {
                    tree: tree.clone(),
                    expr,
                    params,
                    loss: 0.0,
                    verdict: None,
                    bic: 0.0,
                    prior_energy: ep,
                    description_length: ep,
                    fitted: None,
                };
                (state, check)
            }
        };
        let entry = Entry {
            state: Arc::new(state),
            pending,
        };
        self.remember(tree, entry.clone());
        entry
    }

    /// Adds the constraint verdict and its penalty to a pending state.
    fn complete(&mut self, base: &ChainState) -> Arc<ChainState> {
        let mask = self.cfg.check_mask();
        let verdict = match &base.fitted {
            Some(f) => self.checker.check_canonical(f.canonical(), mask),
            None => self.checker.check(&base.expr, &base.params, mask),
        };
        let ep = prior_energy(base.tree.op_count(), base.tree.param_leaf_count(), Some(&verdict), self.cfg);
        let mut s = base.clone();
        s.description_length += ep - s.prior_energy;
        s.prior_energy = ep;
        s.verdict = Some(verdict);
        let s = Arc::new(s);
        self.remember(
            &base.tree,
            Entry {
                state: Arc::clone(&s),
                pending: false,
            },
        );
        s
    }

    /// One Metropolis step; returns whether the proposal was accepted.
    ///
    /// The uniform is drawn before scoring, so a candidate whose unpenalised
    /// description length already fails the test is rejected without
    /// running the constraint checks. Penalties are nonnegative, so the
    /// outcome is the same as scoring fully first.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        self.stats.proposals += 1;
        let prop = self.moves.propose(&self.state.tree, rng);
        if prop.tree.complexity() > self.cfg.max_size {
            return false;
        }
        let log_u = rng.random::<f64>().ln();
        let threshold = self.state.description_length + prop.log_ratio - log_u;
        let entry = self.base(&prop.tree);
        if !(entry.state.description_length < threshold) {
            return false;
        }
        let cand = if entry.pending { self.complete(&entry.state) } else { entry.state };
        if cand.description_length < threshold {
            self.state = cand;
            self.stats.accepted += 1;
            true
        } else {
            false
        }
    }
}

fn placeholder() -> ChainState {
    ChainState {
        tree: Expr::Param(0),
        expr: Expr::Param(1),
        params: vec![1.0],
        loss: 0.0,
        verdict: None,
        bic: 0.0,
        prior_energy: 0.0,
        description_length: 0.0,
        fitted: None,
    }
}

/// Every shape with at most `max_size` nodes over the given alphabet.
pub fn enumerate_shapes(moves: &MoveSet, max_size: usize) -> Vec<Expr> {
    let mut by_size: Vec<Vec<Expr>> = vec![Vec::new(); max_size + 1];
    if max_size >= 1 {
        by_size[1] = moves.leaves.clone();
    }
    for n in 2..=max_size {
        let mut out = Vec::new();
        for &op in &moves.ops {
            if op.arity() == 1 {
                for a in &by_size[n - 1] {
                    out.push(Expr::unary(op, a.clone()));
                }
            } else {
                for left in 1..n - 1 {
                    for a in &by_size[left] {
                        for b in &by_size[n - 1 - left] {
                            out.push(Expr::binary(op, a.clone(), b.clone()));
                        }
                    }
                }
            }
        }
        by_size[n] = out;
    }
    by_size.into_iter().flatten().collect()
}

/// Runs one chain against the evaluator's dataset.
pub fn run_bsr_with<R: Rng + ?Sized>(
    evaluator: &Evaluator,
    checker: &ConstraintChecker,
    cfg: &BsrConfig,
    rng: &mut R,
) -> RunRecord {
    let fits0 = evaluator.fits();
    let mut chain = Chain::random_start(cfg, checker, Some(evaluator), rng);
    let mut front = ParetoFront::new();
    let mut members = Vec::with_capacity(cfg.steps / cfg.thin + 1);
    let model = chain.state().to_model().expect("posterior state has a canonical form");
    front.update_model(&model);
    members.push(model);
    for step in 1..=cfg.steps {
        let moved = chain.step(rng);
        if moved {
            if let Some(m) = chain.state().to_model() {
                front.update_model(&m);
            }
        }
        if step % cfg.thin == 0 {
            members.extend(chain.state().to_model());
        }
    }
    let mut stats = chain.stats.clone();
    stats.fits = evaluator.fits() - fits0;
    RunRecord {
        engine: Engine::Bsr,
        history: Vec::new(),
        front,
        members,
        stats,
    }
}

/// Runs one chain on `data` with a private evaluator and checker.
pub fn run_bsr<R: Rng + ?Sized>(data: &Dataset, cfg: &BsrConfig, rng: &mut R) -> RunRecord {
    let evaluator = Evaluator::new(Arc::new(data.clone()), cfg.fit.clone(), rng.random());
    let checker = ConstraintChecker::new(CheckConfig::for_max_pressure(data.max_pressure()));
    run_bsr_with(&evaluator, &checker, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::CheckOutcome;
    use crate::datasets::{catalog, synthesize, Grid, NoiseKind};
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::time::Duration;

    fn verdict(c1: bool, c2: bool) -> ConstraintVerdict {
        let o = |p| {
            Some(CheckOutcome {
                pass: p,
                timed_out: false,
                elapsed: Duration::ZERO,
            })
        };
        ConstraintVerdict {
            outcomes: [o(c1), o(c2), None],
        }
    }

    #[test]
    fn bic_examples() {
        let b = bic(20, 0.25, 2);
        assert!((b - (20.0 * 0.25f64.ln() + 3.0 * 20f64.ln())).abs() < 1e-12);
        assert!((b + 18.74).abs() < 0.01);
        assert!(bic(20, 0.0, 2).is_finite());
        assert!((bic(20, 0.25, 3) - b - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn prior_energy_examples() {
        let cfg = BsrConfig {
            c_ops: 1.0,
            ..BsrConfig::default()
        };
        assert_eq!(prior_energy(3, 2, Some(&verdict(true, true)), &cfg), 3.0);
        assert_eq!(prior_energy(3, 2, Some(&verdict(false, true)), &cfg), 23.0);
        let off = cfg.clone().without_constraints();
        assert_eq!(prior_energy(3, 2, None, &off), 3.0);
    }

    #[test]
    fn acceptance_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| accept(0.0, 0.0, &mut rng)));
        assert!(!accept(f64::INFINITY, 0.0, &mut rng));
        let n = 100_000;
        let hits = (0..n).filter(|_| accept(1.0, 0.3, &mut rng)).count() as f64 / n as f64;
        let p = (-0.7f64).exp();
        assert!((hits - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{hits} vs {p}");
    }

    #[test]
    fn shape_counts() {
        let ms = BsrConfig::default().moves();
        let counts: Vec<usize> = (1..=5).map(|n| enumerate_shapes(&ms, n).len()).collect();
        assert_eq!(counts, vec![2, 8, 42, 240, 1522]);
    }

    #[test]
    fn proposals_are_reversible_on_small_space() {
        let ms = BsrConfig::default().moves();
        let space = enumerate_shapes(&ms, 4);
        for a in &space {
            for b in &space {
                let f = ms.proposal_prob(a, b);
                let r = ms.proposal_prob(b, a);
                assert_eq!(f > 0.0, r > 0.0, "{a} <-> {b}");
            }
        }
    }

    fn prior_tv(cfg: &BsrConfig) -> f64 {
        let checker = ConstraintChecker::new(CheckConfig::default());
        let mut scorer = Chain::new(cfg, &checker, None, &parse("p").unwrap());
        let space = enumerate_shapes(scorer.moves(), cfg.max_size);
        let weights: Vec<f64> = space
            .iter()
            .map(|t| (-scorer.evaluate(t).description_length).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        // a fresh chain, so candidates go through the staged checks
        let mut chain = Chain::new(cfg, &checker, None, &parse("p").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts: HashMap<Expr, usize> = HashMap::new();
        let n = 200_000;
        for _ in 0..n {
            for _ in 0..cfg.thin {
                chain.step(&mut rng);
            }
            *counts.entry(chain.state().tree.clone()).or_default() += 1;
        }
        space
            .iter()
            .zip(&weights)
            .map(|(t, w)| (w / z - *counts.get(t).unwrap_or(&0) as f64 / n as f64).abs())
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn prior_chain_matches_enumeration() {
        let cfg = BsrConfig {
            max_size: 3,
            ..BsrConfig::default().without_constraints()
        };
        let tv = prior_tv(&cfg);
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn prior_chain_with_penalties_matches_enumeration() {
        let cfg = BsrConfig {
            max_size: 3,
            penalties: [2.0, 1.0],
            ..BsrConfig::default()
        };
        let tv = prior_tv(&cfg);
        assert!(tv < 0.02, "tv {tv}");
    }

    fn langmuir() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        synthesize(&catalog()[0], &[5.0, 2.0], &Grid::log(0.01, 100.0, 20), 0.02, NoiseKind::Relative, &mut rng)
            .unwrap()
    }

    #[test]
    fn zero_steps_keeps_initial_state() {
        let cfg = BsrConfig {
            steps: 0,
            ..BsrConfig::default()
        };
        let run = run_bsr(&langmuir(), &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(run.members.len(), 1);
        assert_eq!(run.front.len(), 1);
    }

    #[test]
    fn description_length_is_consistent() {
        let data = Arc::new(langmuir());
        let cfg = BsrConfig {
            steps: 300,
            fit: FitConfig {
                restarts: 2,
                ..FitConfig::default()
            },
            ..BsrConfig::default()
        };
        let evaluator = Evaluator::new(data, cfg.fit.clone(), 3);
        let checker = ConstraintChecker::new(CheckConfig::default());
        let mut chain = Chain::random_start(&cfg, &checker, Some(&evaluator), &mut ChaCha8Rng::seed_from_u64(2));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..cfg.steps {
            chain.step(&mut rng);
            let s = chain.state();
            assert!((s.bic / 2.0 + s.prior_energy - s.description_length).abs() < 1e-12);
            let v = s.verdict.expect("constraints on");
            assert!(v.outcomes[2].is_none());
        }
    }

    #[test]
    fn skip_rule() {
        let data = Arc::new(langmuir());
        let cfg = BsrConfig {
            steps: 200,
            fit: FitConfig {
                restarts: 1,
                ..FitConfig::default()
            },
            ..BsrConfig::default().without_constraints()
        };
        let evaluator = Evaluator::new(data, cfg.fit.clone(), 3);
        let checker = ConstraintChecker::new(CheckConfig::default());
        run_bsr_with(&evaluator, &checker, &cfg, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(checker.invocations(), 0);
    }
}
