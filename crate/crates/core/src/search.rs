//! Structure evaluation shared by both search engines.
//!
//! Constants for a given tree structure are fitted with a random stream
//! derived from the structure itself, so a fit is a pure function of
//! (structure, dataset, seed). That lets runs share one cache without
//! losing reproducibility, whatever order they run in.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{canonical_form, CanonicalForm};
use crate::datasets::Dataset;
use crate::expr::{Expr, OpKind};
use crate::fit::{fit_constants, FitConfig};
use crate::report::ScoredModel;

/// Stable 64-bit FNV-1a hash.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// A fitted structure. The fitted-value canonical form is computed on first use.
#[derive(Debug)]
pub struct Evaluated {
    pub expr: Expr,
    pub params: Vec<f64>,
    pub loss: f64,
    canonical: OnceLock<CanonicalForm>,
}

impl Evaluated {
    pub fn new(expr: Expr, params: Vec<f64>, loss: f64) -> Self {
        Evaluated {
            expr,
            params,
            loss,
            canonical: OnceLock::new(),
        }
    }

    pub fn canonical(&self) -> &CanonicalForm {
        self.canonical
            .get_or_init(|| fitted_canonical(&self.expr, &self.params))
    }

    pub fn to_model(&self) -> ScoredModel {
        ScoredModel::with_canonical(
            self.expr.clone(),
            self.params.clone(),
            self.loss,
            self.canonical().clone(),
        )
    }
}

/// Replaces every `p`-free subtree whose value can be any real number (sums,
/// differences, products and quotients of free parameters and nonzero
/// integers, and cubes of free parameters) by a single parameter. The
/// family of functions is unchanged; redundant fitting directions go away.
pub fn collapse_params(e: &Expr) -> Expr {
    let free = |x: &Expr| matches!(x, Expr::Param(_));
    let nonzero_int = |x: &Expr| matches!(x, Expr::Int(k) if *k != 0);
    match e {
        Expr::Unary(op, a) => {
            let a = collapse_params(a);
            if *op == OpKind::Cube && free(&a) {
                Expr::Param(0)
            } else {
                Expr::unary(*op, a)
            }
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (collapse_params(a), collapse_params(b));
            let arith = matches!(op, OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div);
            let merge = (free(&a) && (free(&b) || nonzero_int(&b))) || (nonzero_int(&a) && free(&b));
            if arith && merge {
                Expr::Param(0)
            } else {
                Expr::binary(*op, a, b)
            }
        }
        leaf => leaf.clone(),
    }
}

pub(crate) fn fitted_canonical(e: &Expr, params: &[f64]) -> CanonicalForm {
    canonical_form(e, Some(params)).unwrap_or_else(|_| CanonicalForm::verbatim(e.clone(), params.to_vec(), true))
}

const DEFAULT_CACHE_CAP: usize = 500_000;

/// Memoised fitting of tree structures against one dataset.
pub struct Evaluator {
    data: Arc<Dataset>,
    fit: FitConfig,
    seed: u64,
    cache: RwLock<HashMap<String, Arc<Evaluated>>>,
    fits: AtomicU64,
    cap: usize,
}

impl Evaluator {
    pub fn new(data: Arc<Dataset>, fit: FitConfig, seed: u64) -> Self {
        Evaluator {
            data,
            fit,
            seed,
            cache: RwLock::new(HashMap::new()),
            fits: AtomicU64::new(0),
            cap: DEFAULT_CACHE_CAP,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn fit_config(&self) -> &FitConfig {
        &self.fit
    }

    /// Number of fits actually performed (cache misses).
    pub fn fits(&self) -> u64 {
        self.fits.load(Ordering::Relaxed)
    }

    /// Fits `e` after [`collapse_params`] (parameters renumbered one per leaf)
    /// or returns the cached result. The returned expression is the collapsed one.
    pub fn evaluate(&self, e: &Expr) -> Arc<Evaluated> {
        let e = collapse_params(&e.fresh_params()).fresh_params();
        let key = e.render();
        if let Some(hit) = self.cache.read().get(&key) {
            return Arc::clone(hit);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ stable_hash(&key));
        let r = fit_constants(&e, &self.data, &self.fit, &mut rng);
        self.fits.fetch_add(1, Ordering::Relaxed);
        let ev = Arc::new(Evaluated::new(e, r.params, r.loss));
        let mut cache = self.cache.write();
        if cache.len() >= self.cap {
            cache.clear();
        }
        Arc::clone(cache.entry(key).or_insert(ev))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{catalog, synthesize, Grid, NoiseKind};
    use crate::expr::parse;

    #[test]
    fn fits_are_cached_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data = synthesize(&catalog()[0], &[5.0, 2.0], &Grid::log(0.01, 100.0, 20), 0.0, NoiseKind::Relative, &mut rng)
            .unwrap();
        let data = Arc::new(data);
        let a = Evaluator::new(Arc::clone(&data), FitConfig::default(), 9);
        let b = Evaluator::new(data, FitConfig::default(), 9);
        let e = parse("c1*p/(c2+p)").unwrap();
        let x = a.evaluate(&e);
        let _ = a.evaluate(&parse("c7*p/(c3+p)").unwrap());
        assert_eq!(a.fits(), 1);
        let y = b.evaluate(&e);
        assert_eq!(x.params, y.params);
        assert_eq!(x.canonical().string, "(c1 * p) / (c2 + p)");
    }

    #[test]
    fn collapse_merges_free_parameters() {
        let c = |s: &str| collapse_params(&parse(s).unwrap()).fresh_params().render();
        assert_eq!(c("(c1*c2)*p + (c3 - cube(c4))"), "(c1 * p) + c2");
        assert_eq!(c("c1*p/(c2+p)"), "(c1 * p) / (c2 + p)");
        assert_eq!(c("square(c1) + p"), "square(c1) + p");
        assert_eq!(c("sqrt(c1*c2) * p"), "sqrt(c1) * p");
        assert_eq!(c("(c1 * 0) + p"), "(c1 * 0) + p");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(stable_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(stable_hash("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
