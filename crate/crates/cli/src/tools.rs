//! The `check`, `canon`, `fit`, `synth` and `report` subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use isosr::constraints::{check_expr, limit_at_zero_plus, limiting_slope, Budget, CheckConfig, LimitValue, ALL_CHECKS};
use isosr::report::PassRateTable;
use isosr::{canonical_form, fit_constants, parse, Expr, FitConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::DatasetSpec;
use crate::{usage, Failure};

fn parse_with_params(src: &str, params: &[f64], required: bool) -> Result<Expr, Failure> {
    let e = parse(src).map_err(|err| usage(anyhow!("cannot parse `{src}`: {err}")))?;
    let k = e.max_param();
    if (required || !params.is_empty()) && params.len() != k {
        return Err(usage(anyhow!("`{src}` has {k} parameter(s) but {} value(s) were given", params.len())));
    }
    Ok(e)
}

fn show_limit(v: LimitValue) -> String {
    match v {
        LimitValue::Finite(x) => format!("{x}"),
        LimitValue::PlusInfinity => "+inf".into(),
        LimitValue::MinusInfinity => "-inf".into(),
        LimitValue::Undefined => "undefined".into(),
    }
}

fn verdict_word(pass: bool, timed_out: bool) -> &'static str {
    match (pass, timed_out) {
        (true, _) => "pass",
        (false, true) => "fail (timeout)",
        (false, false) => "fail",
    }
}

pub fn check(src: &str, params: &[f64], range: Option<&[f64]>) -> Result<(), Failure> {
    let e = parse_with_params(src, params, true)?;
    let mut cfg = CheckConfig::default();
    if let Some(&[lo, hi]) = range {
        if !(lo > 0.0 && hi > lo) {
            return Err(usage(anyhow!("range needs 0 < lo < hi, got {lo},{hi}")));
        }
        cfg.start = lo;
        cfg.stop = hi;
    }
    let v = check_expr(&e, params, &cfg, ALL_CHECKS);
    let o = v.outcomes.map(|o| o.expect("all checks requested"));
    let slope = limiting_slope(&e, params).map_or("undefined".to_string(), show_limit);
    let limit = limit_at_zero_plus(&e, params, &Budget::unlimited());
    println!(
        "C1 {}, C2 {} (slope {slope}), C3 {}",
        verdict_word(o[0].pass, o[0].timed_out),
        verdict_word(o[1].pass, o[1].timed_out),
        verdict_word(o[2].pass, o[2].timed_out)
    );
    println!("f(0+) = {} ({:?})", show_limit(limit.value), limit.method);
    println!("f'(0+) = {slope}");
    println!("window [{:e}, {:e}]", cfg.start, cfg.stop);
    for (i, x) in o.iter().enumerate() {
        println!("C{} time {:.3} ms", i + 1, x.elapsed.as_secs_f64() * 1e3);
    }
    Ok(())
}

pub fn canon(src: &str, params: &[f64]) -> Result<(), Failure> {
    let e = parse_with_params(src, params, false)?;
    let fitted = (!params.is_empty()).then_some(params);
    let cf = canonical_form(&e, fitted).map_err(|err| anyhow!("canonicalization failed: {err}"))?;
    if cf.unreliable {
        eprintln!("warning: canonical form may be unreliable for `{src}`");
    }
    println!("{}", cf.string);
    if !cf.params.is_empty() {
        let shown: Vec<String> = cf.params.iter().map(|x| format!("{x}")).collect();
        println!("params {}", shown.join(","));
    }
    println!("raw complexity {}", e.complexity());
    println!("canonical complexity {}", cf.complexity);
    Ok(())
}

pub fn fit(src: &str, data: &Path, restarts: usize, seed: u64) -> Result<(), Failure> {
    let e = parse_with_params(src, &[], false)?;
    let ds = DatasetSpec::from_path(data.to_path_buf()).load().map_err(usage)?;
    let cfg = FitConfig {
        restarts: restarts.max(1),
        ..FitConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = fit_constants(&e, &ds, &cfg, &mut rng);
    let shown: Vec<String> = r.params.iter().map(|x| format!("{x}")).collect();
    println!("params {}", shown.join(","));
    println!("loss {:e}", r.loss);
    println!("converged {}", r.converged);
    Ok(())
}

pub fn synth(spec: &DatasetSpec, out: Option<&Path>) -> Result<(), Failure> {
    let ds = spec.load().map_err(usage)?;
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            ds.write_csv(BufWriter::new(f)).map_err(anyhow::Error::from)?;
        }
        None => ds.write_csv(std::io::stdout().lock()).map_err(anyhow::Error::from)?,
    }
    Ok(())
}

pub fn report(inputs: &[PathBuf], out: Option<&Path>) -> Result<(), Failure> {
    let mut table = PassRateTable::default();
    for input in inputs {
        let path = if input.is_dir() { input.join("pass_rates.csv") } else { input.clone() };
        let f = File::open(&path).map_err(|e| usage(anyhow!("cannot read {}: {e}", path.display())))?;
        let t = PassRateTable::read_csv(f).map_err(|e| usage(anyhow!("{}: {e}", path.display())))?;
        table.rows.extend(t.rows);
    }
    let mut buf = Vec::new();
    table.write_wide(&mut buf).map_err(anyhow::Error::from)?;
    match out {
        Some(path) => std::fs::write(path, &buf).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().write_all(&buf).context("cannot write to stdout")?,
    }
    Ok(())
}
