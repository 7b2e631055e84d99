//! Genetic-algorithm search: island populations, tournament reproduction,
//! oldest-member replacement, and a shared hall of fame.
//!
//! Scoring follows the penalised loss: the fitted mean squared error is
//! multiplied by `g_i` for every enabled constraint the member fails, and the
//! score adds `c_l` per node. Constraint checks are skipped entirely when all
//! penalties are 1.

pub mod ops;

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::CanonicalForm;
use crate::constraints::{CheckConfig, CheckMask, ConstraintChecker, ConstraintVerdict};
use crate::datasets::Dataset;
use crate::expr::{random_tree, Expr, OpKind, TreeLimits};
use crate::fit::{polish, FitConfig};
use crate::report::{Engine, ParetoFront, RunRecord, RunStats, ScoredModel};
use crate::search::{fitted_canonical, Evaluator};

pub use ops::{crossover, mutate_structure, MutationKind, MutationWeights, OpsContext};

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub islands: usize,
    pub generations: usize,
    /// Loss multipliers `(g1, g2, g3)`; 1.0 disables a constraint.
    pub penalties: [f64; 3],
    /// Score added per node.
    pub parsimony: f64,
    pub tournament: usize,
    /// Fraction of each island replaced per generation, oldest first.
    pub replace_frac: f64,
    pub crossover_prob: f64,
    pub weights: MutationWeights,
    pub max_size: usize,
    pub max_depth: usize,
    /// Mean size of randomly generated trees.
    pub init_size: usize,
    pub var_leaf_prob: f64,
    /// Generations between hall-of-fame exchanges.
    pub hof_period: usize,
    /// Members each island submits per exchange.
    pub hof_submit: usize,
    /// Hall-of-fame members copied into each island per exchange.
    pub reinject: usize,
    pub opset: Vec<OpKind>,
    pub fit: FitConfig,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 64,
            islands: 2,
            generations: 200,
            penalties: [1.3; 3],
            parsimony: 0.001,
            tournament: 4,
            replace_frac: 0.2,
            crossover_prob: 0.1,
            weights: MutationWeights::default(),
            max_size: 20,
            max_depth: 10,
            init_size: 5,
            var_leaf_prob: 0.5,
            hof_period: 1,
            hof_submit: 10,
            reinject: 1,
            opset: OpKind::GA_OPSET.to_vec(),
            fit: FitConfig {
                screen_iter: 100,
                ..FitConfig::default()
            },
        }
    }
}

impl GaConfig {
    /// Same settings with every penalty set to 1.
    pub fn without_constraints(mut self) -> Self {
        self.penalties = [1.0; 3];
        self
    }

    pub fn constraints_active(&self) -> bool {
        self.penalties.iter().any(|&g| g > 1.0)
    }

    /// Checks that must run for scoring.
    pub fn check_mask(&self) -> CheckMask {
        std::array::from_fn(|i| self.penalties[i] > 1.0)
    }

    pub fn ops_context(&self) -> OpsContext {
        OpsContext {
            opset: self.opset.clone(),
            limits: TreeLimits {
                max_size: self.max_size,
                max_depth: self.max_depth,
                target_size: self.init_size,
                var_leaf_prob: self.var_leaf_prob,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.population < 2 || self.islands == 0 {
            return Err("population must be at least 2 and islands at least 1".into());
        }
        if self.penalties.iter().any(|g| !(*g >= 1.0)) {
            return Err("penalties must be >= 1".into());
        }
        if !(self.parsimony >= 0.0) {
            return Err("parsimony must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.replace_frac) || !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err("replace_frac and crossover_prob must lie in [0, 1]".into());
        }
        if self.tournament == 0 || self.hof_period == 0 || self.max_size == 0 {
            return Err("tournament, hof_period and max_size must be positive".into());
        }
        if self.opset.is_empty() {
            return Err("operator set is empty".into());
        }
        Ok(())
    }
}

/// Loss after multiplying by `g_i` for every enabled constraint that failed.
pub fn penalized_loss(loss: f64, verdict: Option<&ConstraintVerdict>, penalties: &[f64; 3]) -> f64 {
    let mut out = loss;
    for (i, &g) in penalties.iter().enumerate() {
        if g > 1.0 && !verdict.is_some_and(|v| v.pass(i)) {
            out *= g;
        }
    }
    out
}

/// `penalised loss + nodes * c_l`.
pub fn score(penalized: f64, nodes: usize, parsimony: f64) -> f64 {
    (nodes as f64).mul_add(parsimony, penalized)
}

#[derive(Clone, Debug)]
pub struct Member {
    pub expr: Expr,
    pub params: Vec<f64>,
    /// Unpenalised mean squared error.
    pub loss: f64,
    pub penalized: f64,
    pub score: f64,
    pub verdict: Option<ConstraintVerdict>,
    pub canonical: Arc<CanonicalForm>,
    /// Creation counter; smaller is older.
    pub birth: u64,
}

impl Member {
    pub fn complexity(&self) -> usize {
        self.expr.complexity()
    }

    pub fn to_model(&self) -> ScoredModel {
        let mut m = ScoredModel::with_canonical(
            self.expr.clone(),
            self.params.clone(),
            self.loss,
            (*self.canonical).clone(),
        );
        m.verdict = self.verdict;
        m
    }
}

/// Shared state for scoring members.
pub struct Scorer<'a> {
    pub evaluator: &'a Evaluator,
    pub checker: &'a ConstraintChecker,
    pub cfg: &'a GaConfig,
}

impl Scorer<'_> {
    fn finish(&self, expr: Expr, params: Vec<f64>, loss: f64, canonical: Arc<CanonicalForm>, birth: u64) -> Member {
        let mask = self.cfg.check_mask();
        let verdict = mask
            .iter()
            .any(|&m| m)
            .then(|| self.checker.check_canonical(&canonical, mask));
        let penalized = penalized_loss(loss, verdict.as_ref(), &self.cfg.penalties);
        Member {
            score: score(penalized, expr.complexity(), self.cfg.parsimony),
            expr,
            params,
            loss,
            penalized,
            verdict,
            canonical,
            birth,
        }
    }

    /// Fits (or looks up) `e` and scores it.
    pub fn member(&self, e: &Expr, birth: u64) -> Member {
        let ev = self.evaluator.evaluate(e);
        self.finish(
            ev.expr.clone(),
            ev.params.clone(),
            ev.loss,
            Arc::new(ev.canonical().clone()),
            birth,
        )
    }

    /// Perturbs one fitted constant by a random factor in `[1/2, 2]` (sign
    /// flipped with probability 0.1) and refines locally from there.
    fn mutate_constant<R: Rng + ?Sized>(&self, m: &Member, birth: u64, rng: &mut R) -> Option<Member> {
        if m.params.is_empty() {
            return None;
        }
        let mut x = m.params.clone();
        let i = rng.random_range(0..x.len());
        x[i] *= rng.random_range(-1.0f64..1.0).exp2();
        if rng.random_bool(0.1) {
            x[i] = -x[i];
        }
        let r = polish(&m.expr, self.evaluator.dataset(), &x, self.evaluator.fit_config());
        let canonical = Arc::new(fitted_canonical(&m.expr, &r.params));
        Some(self.finish(m.expr.clone(), r.params, r.loss, canonical, birth))
    }

    /// One mutation drawn by weight; kinds that do not apply are excluded and
    /// redrawn, with a fresh random tree as the last resort.
    pub fn mutate<R: Rng + ?Sized>(&self, m: &Member, birth: u64, rng: &mut R) -> Member {
        let ctx = self.cfg.ops_context();
        let mut tried = Vec::new();
        while let Some(kind) = self.cfg.weights.sample(&tried, rng) {
            if kind == MutationKind::Constant {
                if let Some(child) = self.mutate_constant(m, birth, rng) {
                    return child;
                }
            } else if let Some(e) = mutate_structure(kind, &m.expr, &ctx, rng) {
                return self.member(&e, birth);
            }
            tried.push(kind);
        }
        self.member(&random_tree(&ctx.limits, &ctx.opset, rng), birth)
    }
}

/// Pareto set over (node count, penalised loss).
#[derive(Clone, Debug, Default)]
pub struct HallOfFame {
    best: BTreeMap<usize, Member>,
}

impl HallOfFame {
    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.best.values()
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    pub fn submit(&mut self, m: &Member) -> bool {
        let c = m.complexity();
        if !m.penalized.is_finite()
            || self.best.range(..=c).any(|(_, x)| x.penalized <= m.penalized)
        {
            return false;
        }
        let doomed: Vec<usize> = self
            .best
            .range(c + 1..)
            .filter(|(_, x)| x.penalized >= m.penalized)
            .map(|(&k, _)| k)
            .collect();
        for k in doomed {
            self.best.remove(&k);
        }
        self.best.insert(c, m.clone());
        true
    }
}

struct Island {
    members: Vec<Member>,
    rng: ChaCha8Rng,
    births: u64,
}

impl Island {
    fn tournament(&mut self, k: usize) -> usize {
        let n = self.members.len();
        let mut best = self.rng.random_range(0..n);
        for _ in 1..k {
            let j = self.rng.random_range(0..n);
            if self.members[j].score < self.members[best].score {
                best = j;
            }
        }
        best
    }

    fn next_birth(&mut self) -> u64 {
        self.births += 1;
        self.births
    }

    fn offspring(&mut self, scorer: &Scorer) -> Member {
        let cfg = scorer.cfg;
        let a = self.tournament(cfg.tournament);
        let birth = self.next_birth();
        if self.rng.random_bool(cfg.crossover_prob) {
            let b = self.tournament(cfg.tournament);
            let child = crossover(
                &self.members[a].expr,
                &self.members[b].expr,
                &cfg.ops_context(),
                &mut self.rng,
            );
            if let Some(e) = child {
                return scorer.member(&e, birth);
            }
        }
        let parent = self.members[a].clone();
        scorer.mutate(&parent, birth, &mut self.rng)
    }

    /// Indices sorted oldest first.
    fn oldest(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.members.len()).collect();
        idx.sort_by_key(|&i| self.members[i].birth);
        idx
    }

    fn generation(&mut self, scorer: &Scorer) -> u64 {
        let n = self.members.len();
        let k = ((scorer.cfg.replace_frac * n as f64).ceil() as usize).min(n);
        let children: Vec<Member> = (0..k).map(|_| self.offspring(scorer)).collect();
        for (slot, child) in self.oldest().into_iter().zip(children) {
            self.members[slot] = child;
        }
        k as u64
    }

    fn top(&self, k: usize) -> Vec<&Member> {
        let mut v: Vec<&Member> = self.members.iter().collect();
        v.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.birth.cmp(&b.birth)));
        v.truncate(k);
        v
    }

    fn reinject(&mut self, hof: &HallOfFame, k: usize) {
        if hof.is_empty() {
            return;
        }
        let pool: Vec<&Member> = hof.members().collect();
        let slots = self.oldest();
        for &slot in slots.iter().take(k.min(self.members.len())) {
            let mut m = pool[self.rng.random_range(0..pool.len())].clone();
            m.birth = self.next_birth();
            self.members[slot] = m;
        }
    }
}

/// Runs the search with a caller-supplied evaluator and checker, which may be
/// shared between runs.
pub fn run_ga_with<R: Rng + ?Sized>(
    evaluator: &Evaluator,
    checker: &ConstraintChecker,
    cfg: &GaConfig,
    rng: &mut R,
) -> RunRecord {
    let scorer = Scorer { evaluator, checker, cfg };
    let fits0 = evaluator.fits();
    let ctx = cfg.ops_context();
    let mut islands: Vec<Island> = (0..cfg.islands)
        .map(|_| Island {
            members: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(rng.random()),
            births: 0,
        })
        .collect();
    let mut stats = RunStats::default();
    for isl in &mut islands {
        for _ in 0..cfg.population {
            let e = random_tree(&ctx.limits, &ctx.opset, &mut isl.rng);
            let birth = isl.next_birth();
            isl.members.push(scorer.member(&e, birth));
        }
        stats.evaluations += cfg.population as u64;
    }

    let mut hof = HallOfFame::default();
    let mut front = ParetoFront::new();
    let mut members: Vec<ScoredModel> = Vec::new();
    let mut seen: HashSet<(String, Vec<u64>)> = HashSet::new();
    let mut record = |m: &Member, hof: &mut HallOfFame, front: &mut ParetoFront| {
        hof.submit(m);
        let model = m.to_model();
        front.update_model(&model);
        let key = (model.expr.render(), model.params.iter().map(|x| x.to_bits()).collect());
        if seen.insert(key) {
            members.push(model);
        }
    };
    for isl in &islands {
        for m in &isl.members {
            record(m, &mut hof, &mut front);
        }
    }

    let mut history = Vec::with_capacity(cfg.generations + 1);
    history.push(front.clone());
    for gen in 1..=cfg.generations {
        let produced: u64 = islands.par_iter_mut().map(|isl| isl.generation(&scorer)).sum();
        stats.evaluations += produced;
        stats.proposals += produced;
        if gen % cfg.hof_period == 0 {
            for isl in &islands {
                for m in isl.top(cfg.hof_submit) {
                    record(m, &mut hof, &mut front);
                }
            }
            for isl in &mut islands {
                isl.reinject(&hof, cfg.reinject);
            }
        }
        history.push(front.clone());
    }
    stats.fits = evaluator.fits() - fits0;
    RunRecord {
        engine: Engine::Ga,
        history,
        front,
        members,
        stats,
    }
}

/// Runs the search on `data` with a private evaluator and checker.
pub fn run_ga<R: Rng + ?Sized>(data: &Dataset, cfg: &GaConfig, rng: &mut R) -> RunRecord {
    let evaluator = Evaluator::new(Arc::new(data.clone()), cfg.fit.clone(), rng.random());
    let checker = ConstraintChecker::new(CheckConfig::for_max_pressure(data.max_pressure()));
    run_ga_with(&evaluator, &checker, cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{catalog, synthesize, Grid, NoiseKind};
    use crate::expr::parse;

    fn verdict(pass: [bool; 3]) -> ConstraintVerdict {
        ConstraintVerdict::from_passes(pass)
    }

    #[test]
    fn scoring_examples() {
        let g = [1.3; 3];
        assert_eq!(penalized_loss(0.2694, Some(&verdict([true; 3])), &g), 0.2694);
        assert_eq!(penalized_loss(0.2694, Some(&verdict([false, true, true])), &g), 0.35022);
        assert_eq!(score(0.5, 7, 0.01), 0.57);
        assert_eq!(penalized_loss(0.2694, None, &[1.0; 3]), 0.2694);
    }

    fn langmuir() -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        synthesize(&catalog()[0], &[5.0, 2.0], &Grid::log(0.01, 100.0, 20), 0.0, NoiseKind::Relative, &mut rng)
            .unwrap()
    }

    fn small() -> GaConfig {
        GaConfig {
            population: 16,
            generations: 4,
            fit: FitConfig {
                restarts: 2,
                ..FitConfig::default()
            },
            ..GaConfig::default()
        }
    }

    #[test]
    fn zero_generations_front_is_initial_pareto() {
        let data = langmuir();
        let cfg = GaConfig {
            generations: 0,
            ..small()
        };
        let run = run_ga(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(run.history.len(), 1);
        assert_eq!(run.members.len() <= 2 * 16, true);
        let mut f = ParetoFront::new();
        for m in &run.members {
            f.update_model(m);
        }
        assert_eq!(f, run.front);
    }

    #[test]
    fn skip_rule() {
        let data = langmuir();
        let evaluator = Evaluator::new(Arc::new(data.clone()), small().fit, 1);
        let checker = ConstraintChecker::new(CheckConfig::default());
        run_ga_with(&evaluator, &checker, &small().without_constraints(), &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(checker.invocations(), 0);
        run_ga_with(&evaluator, &checker, &small(), &mut ChaCha8Rng::seed_from_u64(2));
        assert!(checker.invocations() > 0);
    }

    #[test]
    fn same_seed_same_run() {
        let data = langmuir();
        let a = run_ga(&data, &small(), &mut ChaCha8Rng::seed_from_u64(3));
        let b = run_ga(&data, &small(), &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.front, b.front);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn best_loss_never_increases() {
        let run = run_ga(&langmuir(), &small(), &mut ChaCha8Rng::seed_from_u64(4));
        for w in run.history.windows(2) {
            for e in w[0].entries() {
                let later = w[1].entries().filter(|x| x.complexity <= e.complexity).map(|x| x.loss);
                assert!(later.fold(f64::INFINITY, f64::min) <= e.loss);
            }
        }
    }

    #[test]
    fn hall_of_fame_is_pareto() {
        let data = langmuir();
        let evaluator = Evaluator::new(Arc::new(data), small().fit, 1);
        let checker = ConstraintChecker::new(CheckConfig::default());
        let cfg = small();
        let scorer = Scorer {
            evaluator: &evaluator,
            checker: &checker,
            cfg: &cfg,
        };
        let mut hof = HallOfFame::default();
        for src in ["c1", "c1*p", "c1*p/(c2+p)", "c1*p + c2", "p", "c1*p*p/(c2 + p*p)"] {
            hof.submit(&scorer.member(&parse(src).unwrap(), 0));
        }
        let ms: Vec<&Member> = hof.members().collect();
        for a in &ms {
            for b in &ms {
                assert!(!(b.complexity() <= a.complexity() && b.penalized < a.penalized));
            }
        }
    }

    #[test]
    fn penalty_raises_failing_scores_only() {
        let data = langmuir();
        let evaluator = Evaluator::new(Arc::new(data), small().fit, 1);
        let checker = ConstraintChecker::new(CheckConfig::default());
        let on = small();
        let off = small().without_constraints();
        for (src, fails) in [("c1*p/(c2+p)", false), ("c1*p + c2", true)] {
            let e = parse(src).unwrap();
            let a = Scorer { evaluator: &evaluator, checker: &checker, cfg: &on }.member(&e, 0);
            let b = Scorer { evaluator: &evaluator, checker: &checker, cfg: &off }.member(&e, 0);
            assert_eq!(a.score > b.score, fails, "{src}");
            assert_eq!(a.score - a.penalized, b.score - b.penalized);
        }
    }
}
