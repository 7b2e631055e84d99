use std::sync::Arc;

use isosr::bsr::{bic, prior_energy, run_bsr_with, BsrConfig};
use isosr::constraints::{CheckConfig, ConstraintChecker, ConstraintVerdict};
use isosr::datasets::{find_model, synthesize, Grid, NoiseKind};
use isosr::ga::{penalized_loss, run_ga_with, score, GaConfig};
use isosr::report::{pass_rates, Engine, FrontEntry, PassRateTable};
use isosr::search::Evaluator;
use isosr::{parse, Dataset, ParetoFront, ScoredModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data() -> Arc<Dataset> {
    let m = find_model("langmuir").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Arc::new(synthesize(&m, &[5.0, 2.0], &Grid::log(0.01, 100.0, 20), 0.0, NoiseKind::Relative, &mut rng).unwrap())
}

fn small_ga() -> GaConfig {
    GaConfig {
        population: 24,
        islands: 2,
        generations: 6,
        ..GaConfig::default()
    }
}

fn small_bsr() -> BsrConfig {
    BsrConfig {
        steps: 400,
        ..BsrConfig::default()
    }
}

#[test]
fn score_arithmetic() {
    let pass = ConstraintVerdict::from_passes([true; 3]);
    let fail1 = ConstraintVerdict::from_passes([false, true, true]);
    assert_eq!(penalized_loss(0.2694, Some(&pass), &[1.3; 3]), 0.2694);
    assert!((penalized_loss(0.2694, Some(&fail1), &[1.3; 3]) - 0.35022).abs() < 1e-12);
    assert!((score(0.5, 7, 0.01) - 0.57).abs() < 1e-12);
}

#[test]
fn bic_and_prior_examples() {
    assert!((bic(20, 0.25, 3) - (20.0 * 0.25f64.ln() + 4.0 * 20f64.ln())).abs() < 1e-12);
    assert!(bic(20, 0.0, 1).is_finite());
    assert!((bic(20, 0.25, 4) - bic(20, 0.25, 3) - 20f64.ln()).abs() < 1e-12);
    let cfg = BsrConfig {
        c_ops: 1.0,
        ..BsrConfig::default()
    };
    let pass = ConstraintVerdict::from_passes([true; 3]);
    let fail1 = ConstraintVerdict::from_passes([false, true, true]);
    let fail3 = ConstraintVerdict::from_passes([true, true, false]);
    assert_eq!(prior_energy(3, 2, Some(&pass), &cfg), 3.0);
    assert_eq!(prior_energy(3, 2, Some(&fail1), &cfg), 23.0);
    assert_eq!(prior_energy(3, 2, Some(&fail3), &cfg), 3.0);
}

#[test]
fn ga_runs_are_seed_deterministic_and_fronts_improve() {
    let d = data();
    let cfg = small_ga();
    let run = |seed| {
        let ev = Evaluator::new(Arc::clone(&d), cfg.fit.clone(), 7);
        let checker = ConstraintChecker::new(CheckConfig::default());
        run_ga_with(&ev, &checker, &cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    };
    let (a, b) = (run(1), run(1));
    assert_eq!(a.front, b.front);
    assert_eq!(a.history.len(), cfg.generations + 1);
    for w in a.history.windows(2) {
        for e in w[0].entries() {
            let best = w[1].entries().filter(|x| x.complexity <= e.complexity).map(|x| x.loss).fold(f64::INFINITY, f64::min);
            assert!(best <= e.loss);
        }
    }
}

#[test]
fn ga_with_zero_generations_keeps_initial_front() {
    let d = data();
    let cfg = GaConfig {
        generations: 0,
        ..small_ga()
    };
    let ev = Evaluator::new(d, cfg.fit.clone(), 7);
    let checker = ConstraintChecker::new(CheckConfig::default());
    let r = run_ga_with(&ev, &checker, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.history[0], r.front);
}

#[test]
fn disabled_constraints_never_call_the_checker() {
    let d = data();
    let ev = Evaluator::new(Arc::clone(&d), GaConfig::default().fit, 7);
    let checker = ConstraintChecker::new(CheckConfig::default());
    run_ga_with(&ev, &checker, &small_ga().without_constraints(), &mut ChaCha8Rng::seed_from_u64(2));
    run_bsr_with(&ev, &checker, &small_bsr().without_constraints(), &mut ChaCha8Rng::seed_from_u64(2));
    assert_eq!(checker.invocations(), 0);
}

#[test]
fn bsr_zero_steps_gives_initial_state_only() {
    let d = data();
    let cfg = BsrConfig {
        steps: 0,
        ..BsrConfig::default()
    };
    let ev = Evaluator::new(d, cfg.fit.clone(), 7);
    let checker = ConstraintChecker::new(CheckConfig::default());
    let r = run_bsr_with(&ev, &checker, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(r.members.len(), 1);
    assert_eq!(r.front.len(), 1);
}

#[test]
fn bsr_runs_are_seed_deterministic() {
    let d = data();
    let cfg = small_bsr();
    let run = || {
        let ev = Evaluator::new(Arc::clone(&d), cfg.fit.clone(), 7);
        let checker = ConstraintChecker::new(CheckConfig::default());
        run_bsr_with(&ev, &checker, &cfg, &mut ChaCha8Rng::seed_from_u64(5))
    };
    let (a, b) = (run(), run());
    assert_eq!(a.front, b.front);
    assert_eq!(a.members.len(), cfg.steps / cfg.thin + 1);
    assert_eq!(a.stats, b.stats);
}

fn entry(complexity: usize, loss: f64) -> FrontEntry {
    FrontEntry {
        complexity,
        loss,
        form: format!("f{complexity}"),
        params: Vec::new(),
        raw: String::new(),
        raw_complexity: complexity,
        verdict: None,
    }
}

#[test]
fn front_insertion_examples() {
    let mut f = ParetoFront::new();
    assert!(f.update(entry(7, 0.2694)));
    assert!(!f.update(entry(9, 0.30)));
    assert!(f.update(entry(9, 0.20)));
    assert_eq!(f.len(), 2);
    assert_eq!(ParetoFront::merge([&f, &f]), f);
}

#[test]
fn front_csv_round_trip() {
    let mut f = ParetoFront::new();
    f.update_model(&ScoredModel::new(parse("c1*p/(c2+p)").unwrap(), vec![5.0, 2.0], 1e-3));
    f.update_model(&ScoredModel::new(parse("c1*p").unwrap(), vec![0.4], 0.5));
    f.annotate(&ConstraintChecker::new(CheckConfig::default()));
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("complexity,loss,canonical_form,c1_pass,c2_pass,c3_pass,params\n"));
    let back = ParetoFront::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back.get(7).unwrap().verdict, Some([true; 3]));
}

#[test]
fn pass_rate_examples() {
    let checker = ConstraintChecker::new(CheckConfig::default());
    let lang = ScoredModel::new(parse("c1*p/(c2+p)").unwrap(), vec![5.0, 2.0], 0.0);
    let r = pass_rates(&[lang.clone(), lang.clone()], &checker, "d", Engine::Ga, true);
    assert_eq!(r.fractions(), [1.0; 3]);
    let offset = ScoredModel::new(parse("c1*p + c2").unwrap(), vec![1.0, 0.3], 0.0);
    let r = pass_rates(&[lang.clone(), offset], &checker, "d", Engine::Ga, true);
    assert_eq!(r.fraction(0), 0.5);
    let expanded = ScoredModel::new(parse("c1*p*(c2+p)/((c2+p)*(c2+p))").unwrap(), vec![5.0, 2.0], 0.1);
    let r = pass_rates(&[lang, expanded], &checker, "d", Engine::Ga, true);
    assert_eq!(r.n, 1);
    let table = PassRateTable { rows: vec![r] };
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    assert_eq!(PassRateTable::read_csv(buf.as_slice()).unwrap(), table);
}
