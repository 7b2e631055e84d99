//! Run configuration files and their mapping onto engine settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use isosr::bsr::BsrConfig;
use isosr::datasets::{find_model, load_csv, synthesize, Grid, NoiseKind};
use isosr::fit::FitConfig;
use isosr::ga::GaConfig;
use isosr::{Dataset, Engine};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineName {
    Ga,
    Bsr,
}

impl From<EngineName> for Engine {
    fn from(e: EngineName) -> Engine {
        match e {
            EngineName::Ga => Engine::Ga,
            EngineName::Bsr => Engine::Bsr,
        }
    }
}

/// Either a CSV file or a synthetic sample of a catalogue isotherm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_true")]
    pub log: bool,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub absolute_noise: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_lo() -> f64 {
    0.01
}

fn default_hi() -> f64 {
    100.0
}

fn default_points() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_runs() -> usize {
    8
}

fn default_out() -> PathBuf {
    PathBuf::from("isosr-out")
}

/// Optional overrides of the genetic search defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub islands: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalties: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parsimony: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tournament: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossover_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
}

/// Optional overrides of the Bayesian search defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsrSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_ops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_par: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalties: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,
}

/// Optional overrides of the constant-fitting defaults for either engine.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub screen_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub engine: EngineName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_true")]
    pub constraints: bool,
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub bsr: BsrSection,
    #[serde(default)]
    pub fit: FitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            engine: EngineName::Ga,
            seed: 0,
            runs: default_runs(),
            out: default_out(),
            constraints: true,
            deterministic: false,
            dataset: DatasetSpec {
                lo: default_lo(),
                hi: default_hi(),
                points: default_points(),
                log: true,
                ..DatasetSpec::default()
            },
            ga: GaSection::default(),
            bsr: BsrSection::default(),
            fit: FitSection::default(),
        }
    }
}

/// Provenance written next to the outputs of a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest: ManifestInfo,
    pub config: RunConfig,
}

impl RunConfig {
    /// Reads a config file, or the `[config]` table of a manifest. Relative
    /// dataset paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        let mut cfg: RunConfig = if table.contains_key("manifest") {
            let m: Manifest = table.try_into().with_context(|| format!("invalid manifest {}", path.display()))?;
            m.config
        } else {
            table.try_into().with_context(|| format!("invalid config {}", path.display()))?
        };
        if let Some(p) = &cfg.dataset.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.dataset.path = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        match (&self.dataset.path, &self.dataset.model) {
            (Some(_), Some(_)) => bail!("dataset: give either `path` or `model`, not both"),
            (None, None) => bail!("dataset: missing `path` or `model`"),
            _ => {}
        }
        match self.engine {
            EngineName::Ga => self.ga_config().validate(),
            EngineName::Bsr => self.bsr_config().validate(),
        }
        .map_err(anyhow::Error::msg)
    }

    pub fn fit_config(&self, base: FitConfig) -> FitConfig {
        let f = &self.fit;
        FitConfig {
            restarts: f.restarts.unwrap_or(base.restarts),
            max_iter: f.max_iter.unwrap_or(base.max_iter),
            screen_iter: f.screen_iter.unwrap_or(base.screen_iter),
            tol: f.tol.unwrap_or(base.tol),
            ..base
        }
    }

    pub fn ga_config(&self) -> GaConfig {
        let d = GaConfig::default();
        let g = &self.ga;
        let cfg = GaConfig {
            population: g.population.unwrap_or(d.population),
            islands: g.islands.unwrap_or(d.islands),
            generations: g.generations.unwrap_or(d.generations),
            penalties: g.penalties.unwrap_or(d.penalties),
            parsimony: g.parsimony.unwrap_or(d.parsimony),
            tournament: g.tournament.unwrap_or(d.tournament),
            crossover_prob: g.crossover_prob.unwrap_or(d.crossover_prob),
            max_size: g.max_size.unwrap_or(d.max_size),
            max_depth: g.max_depth.unwrap_or(d.max_depth),
            fit: self.fit_config(d.fit.clone()),
            ..d
        };
        if self.constraints {
            cfg
        } else {
            cfg.without_constraints()
        }
    }

    pub fn bsr_config(&self) -> BsrConfig {
        let d = BsrConfig::default();
        let b = &self.bsr;
        let cfg = BsrConfig {
            c_ops: b.c_ops.unwrap_or(d.c_ops),
            c_par: b.c_par.unwrap_or(d.c_par),
            penalties: b.penalties.unwrap_or(d.penalties),
            steps: b.steps.unwrap_or(d.steps),
            thin: b.thin.unwrap_or(d.thin),
            max_size: b.max_size.unwrap_or(d.max_size),
            fit: self.fit_config(d.fit.clone()),
            ..d
        };
        if self.constraints {
            cfg
        } else {
            cfg.without_constraints()
        }
    }

    /// Hex SHA-256 of the serialized config.
    pub fn hash(&self) -> Result<String> {
        let text = toml::to_string(self)?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

impl DatasetSpec {
    pub fn from_path(path: PathBuf) -> Self {
        DatasetSpec {
            path: Some(path),
            ..RunConfig::default().dataset
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        if let Some(path) = &self.path {
            if !path.exists() {
                bail!("dataset file not found: {}", path.display());
            }
            return load_csv(path).with_context(|| format!("invalid dataset {}", path.display()));
        }
        let Some(name) = &self.model else { bail!("dataset: missing `path` or `model`") };
        let model = find_model(name)?;
        let params = if self.params.is_empty() { model.default_params.clone() } else { self.params.clone() };
        let grid = Grid {
            lo: self.lo,
            hi: self.hi,
            points: self.points,
            log: self.log,
        };
        let kind = if self.absolute_noise { NoiseKind::Absolute } else { NoiseKind::Relative };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(synthesize(&model, &params, &grid, self.noise, kind, &mut rng)?)
    }
}
