use isosr::constraints::{check_expr, limit_at_zero_plus, Budget, CheckConfig, ConstraintChecker, LimitValue, ALL_CHECKS};
use isosr::datasets::{catalog, find_model, synthesize, Grid, NoiseKind};
use isosr::{fit_constants, l2_loss, parse, Dataset, FitConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(src: &str, params: &[f64]) -> [bool; 3] {
    let v = check_expr(&parse(src).unwrap(), params, &CheckConfig::default(), ALL_CHECKS);
    [v.c1_pass(), v.c2_pass(), v.c3_pass()]
}

#[test]
fn limit_examples() {
    let lim = |src: &str, params: &[f64]| limit_at_zero_plus(&parse(src).unwrap(), params, &Budget::unlimited()).value;
    assert_eq!(lim("c1*p/(c2+p)", &[5.0, 2.0]), LimitValue::Finite(0.0));
    assert_eq!(lim("(c1*p+c2)/(c3+p)", &[5.0, 1.0, 2.0]), LimitValue::Finite(0.5));
    assert_eq!(lim("c1/p", &[1.0]), LimitValue::PlusInfinity);
}

#[test]
fn individual_constraint_examples() {
    assert_eq!(verdict("c1*p/(c2+p)", &[5.0, 2.0]), [true; 3]);
    assert!(!verdict("c1*p + c2", &[1.0, 0.3])[0]);
    assert!(!verdict("c1", &[4.0])[0]);
    assert!(!verdict("c1*sqrt(p)", &[1.0])[1]);
    assert!(!verdict("c1*p*p", &[1.0])[1]);
    assert!(verdict("c1*cube(p)", &[1.0])[2]);
    assert!(!verdict("c1*p/(c2+p)", &[-5.0, 2.0])[2]);
}

#[test]
fn combined_verdict_examples() {
    assert_eq!(verdict("(c1*p+c2)/(c3+p)", &[5.0, 1.0, 2.0]), [false, true, true]);
    assert_eq!(verdict("c1*sqrt(p)", &[1.0]), [true, false, true]);
    assert_eq!(verdict("c1*p/(c2+p) + c3*p/(c4+p)", &[3.0, 0.05, 8.0, 40.0]), [true; 3]);
}

#[test]
fn bet_fails_monotonicity_across_its_pole() {
    let bet = find_model("bet").unwrap();
    let cfg = CheckConfig {
        stop: 10.0,
        ..CheckConfig::default()
    };
    let v = check_expr(&bet.sr_form, &bet.default_params, &cfg, ALL_CHECKS);
    assert!(!v.c3_pass());
}

#[test]
fn memoised_verdicts_match_fresh_ones() {
    let checker = ConstraintChecker::new(CheckConfig::default());
    let e = parse("(c1*p+c2)/(c3+p)").unwrap();
    let first = checker.check_all(&e, &[5.0, 1.0, 2.0]);
    let second = checker.check_all(&e, &[5.0, 1.0, 2.0]);
    let fresh = check_expr(&e, &[5.0, 1.0, 2.0], &CheckConfig::default(), ALL_CHECKS);
    for i in 0..3 {
        assert_eq!(first.pass(i), second.pass(i));
        assert_eq!(first.pass(i), fresh.pass(i));
    }
    assert_eq!(checker.memo_len(), 1);
}

fn langmuir_data(noise: f64, seed: u64) -> Dataset {
    let m = find_model("langmuir").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize(&m, &[5.0, 2.0], &Grid::log(0.01, 100.0, 20), noise, NoiseKind::Relative, &mut rng).unwrap()
}

#[test]
fn loss_examples() {
    let data = langmuir_data(0.0, 0);
    let l = parse("c1*p/(c2+p)").unwrap();
    assert!(l2_loss(&l, &[5.0, 2.0], &data) <= 1e-20);
    let mean = data.loadings.iter().sum::<f64>() / data.len() as f64;
    let var = data.loadings.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / data.len() as f64;
    assert!((l2_loss(&parse("c1").unwrap(), &[mean], &data) - var).abs() < 1e-12 * var.max(1.0));
    assert_eq!(l2_loss(&parse("c1/(p-c2)").unwrap(), &[1.0, data.pressures[3]], &data), 1e12);
}

#[test]
fn fit_recovers_langmuir_and_identity() {
    let data = langmuir_data(0.0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = fit_constants(&parse("c1*p/(c2+p)").unwrap(), &data, &FitConfig::default(), &mut rng);
    assert!((r.params[0] / 5.0 - 1.0).abs() < 0.01 && (r.params[1] / 2.0 - 1.0).abs() < 0.01, "{:?}", r.params);
    let line = Dataset::new("line", (1..=10).map(|i| (i as f64, i as f64)).collect()).unwrap();
    let r = fit_constants(&parse("p").unwrap(), &line, &FitConfig::default(), &mut rng);
    assert_eq!(r.loss, 0.0);
}

#[test]
fn more_restarts_never_hurt() {
    let data = langmuir_data(0.05, 4);
    let e = parse("c1*p/(c2+p) + c3").unwrap();
    let one = FitConfig {
        restarts: 1,
        ..FitConfig::default()
    };
    let a = fit_constants(&e, &data, &one, &mut ChaCha8Rng::seed_from_u64(2));
    let b = fit_constants(&e, &data, &FitConfig::default(), &mut ChaCha8Rng::seed_from_u64(2));
    assert!(b.loss <= a.loss);
}

#[test]
fn scaling_data_scales_loss_quadratically() {
    let data = langmuir_data(0.05, 6);
    let scaled = Dataset::new("scaled", data.points().map(|(p, y)| (p, 10.0 * y)).collect()).unwrap();
    let e = parse("c1*p + c2").unwrap();
    let cfg = FitConfig::default();
    let a = fit_constants(&e, &data, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
    let b = fit_constants(&e, &scaled, &cfg, &mut ChaCha8Rng::seed_from_u64(3));
    assert!((b.loss / a.loss - 100.0).abs() < 1e-4, "{} vs {}", a.loss, b.loss);
}

#[test]
fn catalog_and_synthesis() {
    let cat = catalog();
    assert_eq!(cat.iter().map(|m| m.complexity).collect::<Vec<_>>(), vec![7, 15, 13, 5, 9]);
    for m in &cat {
        assert_eq!(parse(&m.sr_form.render()).unwrap(), m.sr_form);
    }
    let ds = find_model("dual-site-langmuir").unwrap();
    let f = |p: f64| ds.eval(&[3.0, 0.05, 8.0, 40.0], p);
    assert!(f(0.05) < f(40.0) / 2.0);
    let bet = find_model("bet").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bad = synthesize(&bet, &bet.default_params, &Grid::log(0.01, 1.5, 15), 0.0, NoiseKind::Relative, &mut rng);
    assert!(bad.is_err());
}

#[test]
fn csv_loading_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let two = write("two.csv", "pressure,loading\n1,1\n2,2\n");
    assert!(isosr::datasets::load_csv(&two).is_err());
    let bad = write("bad.csv", "pressure,loading\n1,1\nabc,1.0\n3,3\n");
    let err = isosr::datasets::load_csv(&bad).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
    let rows: String = (1..=20).map(|i| format!("{i},{}\n", 2 * i)).collect();
    let good = write("good.csv", &format!("pressure,loading\n{rows}"));
    assert_eq!(isosr::datasets::load_csv(&good).unwrap().len(), 20);
}
