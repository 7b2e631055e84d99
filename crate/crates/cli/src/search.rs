//! The `search` subcommand.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use isosr::bsr::run_bsr_with;
use isosr::constraints::{CheckConfig, ConstraintChecker};
use isosr::ga::run_ga_with;
use isosr::report::{pass_rates, PassRateTable};
use isosr::search::Evaluator;
use isosr::{Dataset, Engine, ParetoFront, RunRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{DatasetSpec, EngineName, Manifest, ManifestInfo, RunConfig};
use crate::{usage, Failure, OnOff, SearchArgs};

fn resolve(a: &SearchArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &a.data {
        cfg.dataset = DatasetSpec::from_path(d.clone());
    }
    if let Some(e) = a.engine {
        cfg.engine = e.into();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if a.deterministic {
        cfg.deterministic = true;
    }
    if let Some(c) = a.constraints {
        cfg.constraints = c == OnOff::On;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

/// Runs `cfg.runs` searches with per-run random streams derived from the seed.
pub fn execute(cfg: &RunConfig, data: &Dataset) -> Vec<RunRecord> {
    let shared = Arc::new(data.clone());
    let checker = ConstraintChecker::new(CheckConfig::for_max_pressure(data.max_pressure()));
    let run_one = |evaluator: &Evaluator, i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        match cfg.engine {
            EngineName::Ga => run_ga_with(evaluator, &checker, &cfg.ga_config(), &mut rng),
            EngineName::Bsr => run_bsr_with(evaluator, &checker, &cfg.bsr_config(), &mut rng),
        }
    };
    let fit = match cfg.engine {
        EngineName::Ga => cfg.ga_config().fit,
        EngineName::Bsr => cfg.bsr_config().fit,
    };
    let evaluator = Evaluator::new(shared, fit, cfg.seed);
    if cfg.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        pool.install(|| (0..cfg.runs).map(|i| run_one(&evaluator, i)).collect())
    } else {
        (0..cfg.runs).into_par_iter().map(|i| run_one(&evaluator, i)).collect()
    }
}

fn write_front(front: &ParetoFront, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    front.write_csv(BufWriter::new(f))?;
    Ok(())
}

/// Writes per-run fronts, the merged front, the pass-rate table and the
/// manifest into `cfg.out`; returns the merged front.
pub fn write_outputs(cfg: &RunConfig, data: &Dataset, records: &[RunRecord]) -> Result<ParetoFront> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    let analysis = ConstraintChecker::new(CheckConfig::for_max_pressure(data.max_pressure()));
    let mut fronts = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let mut front = r.front.clone();
        front.annotate(&analysis);
        write_front(&front, &cfg.out.join(format!("run_{}_front.csv", i + 1)))?;
        fronts.push(front);
    }
    let merged = ParetoFront::merge(&fronts);
    write_front(&merged, &cfg.out.join("merged_front.csv"))?;

    let members: Vec<_> = records.iter().flat_map(|r| r.members.iter().cloned()).collect();
    let engine: Engine = cfg.engine.into();
    let rates = pass_rates(&members, &analysis, &data.name, engine, cfg.constraints);
    let table = PassRateTable { rows: vec![rates] };
    let path = cfg.out.join("pass_rates.csv");
    table.write_csv(BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?))?;

    let mut recorded = cfg.clone();
    if let Some(p) = &recorded.dataset.path {
        recorded.dataset.path = Some(std::fs::canonicalize(p).unwrap_or_else(|_| p.clone()));
    }
    let manifest = Manifest {
        manifest: ManifestInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_hash: recorded.hash()?,
        },
        config: recorded,
    };
    let path = cfg.out.join("manifest.toml");
    std::fs::write(&path, toml::to_string(&manifest)?).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(merged)
}

pub fn run(a: SearchArgs) -> Result<(), Failure> {
    let cfg = resolve(&a)?;
    let data = cfg.dataset.load().map_err(usage)?;
    let t = Instant::now();
    let records = execute(&cfg, &data);
    let merged = write_outputs(&cfg, &data, &records)?;
    let fits: u64 = records.iter().map(|r| r.stats.fits).sum();
    println!(
        "{} runs of {} on {} ({} points) in {:.1} s, {fits} fits; outputs in {}",
        cfg.runs,
        Engine::from(cfg.engine),
        data.name,
        data.len(),
        t.elapsed().as_secs_f64(),
        cfg.out.display()
    );
    println!("{:>4}  {:>12}  {:<5}  form", "size", "loss", "C123");
    for e in merged.entries() {
        let flags: String = e
            .verdict
            .map(|v| v.iter().map(|&p| if p { '+' } else { '-' }).collect())
            .unwrap_or_default();
        println!("{:>4}  {:>12.5e}  {:<5}  {}", e.complexity, e.loss, flags, e.form);
    }
    Ok(())
}
