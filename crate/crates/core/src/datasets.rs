//! Isotherm datasets: CSV loading, the ground-truth catalogue, and synthetic
//! data generation.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::expr::{parse, Expr};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("a dataset needs at least 3 points, got {0}")]
    TooFew(usize),
    #[error("line {line}: duplicate pressure {pressure}")]
    DuplicatePressure { line: usize, pressure: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model {model} expects {expected} parameter(s), got {got}")]
    ParamCount {
        model: String,
        expected: usize,
        got: usize,
    },
}

/// Pressure grid for synthetic data.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub log: bool,
}

impl Grid {
    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        Grid {
            lo,
            hi,
            points,
            log: true,
        }
    }

    pub fn pressures(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                if self.log {
                    (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + t * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseKind {
    /// `y = f(p) (1 + eps)`
    #[default]
    Relative,
    /// `y = f(p) + eps`
    Absolute,
}

/// Everything needed to regenerate a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub model: String,
    pub params: Vec<f64>,
    pub grid: Grid,
    pub noise: f64,
    pub noise_kind: NoiseKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Synthetic(SynthSpec),
    Inline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub pressures: Vec<f64>,
    pub loadings: Vec<f64>,
    pub units: String,
    pub source: DataSource,
}

impl Dataset {
    /// Builds a dataset from points, sorting by pressure and validating.
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self, DatasetError> {
        let lines: Vec<usize> = (1..=points.len()).collect();
        Dataset::from_rows(name.into(), points, &lines, DataSource::Inline)
    }

    fn from_rows(
        name: String,
        points: Vec<(f64, f64)>,
        lines: &[usize],
        source: DataSource,
    ) -> Result<Self, DatasetError> {
        if points.len() < 3 {
            return Err(DatasetError::TooFew(points.len()));
        }
        let mut rows: Vec<(f64, f64, usize)> = points
            .iter()
            .zip(lines)
            .map(|(&(p, y), &l)| (p, y, l))
            .collect();
        for &(p, y, line) in &rows {
            if !p.is_finite() || !y.is_finite() {
                return Err(DatasetError::Parse {
                    line,
                    message: "non-finite value".into(),
                });
            }
            if p <= 0.0 {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("pressure must be positive, got {p}"),
                });
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DatasetError::DuplicatePressure {
                    line: w[0].2.max(w[1].2),
                    pressure: w[1].0,
                });
            }
        }
        Ok(Dataset {
            name,
            pressures: rows.iter().map(|r| r.0).collect(),
            loadings: rows.iter().map(|r| r.1).collect(),
            units: String::new(),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.pressures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pressures.is_empty()
    }

    pub fn max_pressure(&self) -> f64 {
        self.pressures.last().copied().unwrap_or(0.0)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pressures.iter().copied().zip(self.loadings.iter().copied())
    }

    /// Writes `pressure,loading` CSV.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pressure", "loading"])?;
        for (p, y) in self.points() {
            out.write_record([format!("{p:e}"), format!("{y:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads a `pressure,loading` CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ds = read_csv(file, &name)?;
    ds.source = DataSource::File(path.to_path_buf());
    Ok(ds)
}

/// Parses CSV text with a `pressure,loading` header.
pub fn read_csv<R: Read>(reader: R, name: &str) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut lines = Vec::new();
    let mut saw_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DatasetError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !saw_header {
            saw_header = true;
            let cols: Vec<String> = rec.iter().map(|f| f.to_ascii_lowercase()).collect();
            if cols != ["pressure", "loading"] {
                return Err(DatasetError::Parse {
                    line,
                    message: format!(
                        "expected header `pressure,loading`, found `{}`",
                        rec.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
            continue;
        }
        if rec.len() != 2 {
            return Err(DatasetError::Parse {
                line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| DatasetError::Parse {
                line,
                message: format!("`{s}` is not a number"),
            })
        };
        points.push((num(&rec[0])?, num(&rec[1])?));
        lines.push(line);
    }
    Dataset::from_rows(name.to_string(), points, &lines, DataSource::Inline)
}

/// A ground-truth isotherm and the form symbolic regression would find for it.
#[derive(Clone, Debug)]
pub struct IsothermModel {
    pub name: &'static str,
    pub literature: &'static str,
    pub sr_form: Expr,
    pub complexity: usize,
    pub default_params: Vec<f64>,
    pub param_ranges: Vec<(f64, f64)>,
}

impl fmt::Display for IsothermModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.sr_form)
    }
}

impl IsothermModel {
    pub fn eval(&self, params: &[f64], p: f64) -> f64 {
        self.sr_form.eval(params, p)
    }

    pub fn param_count(&self) -> usize {
        self.sr_form.max_param()
    }
}

fn model(
    name: &'static str,
    literature: &'static str,
    src: &str,
    complexity: usize,
    default_params: Vec<f64>,
    param_ranges: Vec<(f64, f64)>,
) -> IsothermModel {
    IsothermModel {
        name,
        literature,
        sr_form: parse(src).expect("catalogue forms parse"),
        complexity,
        default_params,
        param_ranges,
    }
}

/// The five reference isotherms. BET is written for relative pressure with
/// `v_m = 1`, `c = 10` and `p0 = 1`, which gives negative coefficients in the
/// regression form.
pub fn catalog() -> Vec<IsothermModel> {
    vec![
        model(
            "langmuir",
            "q_max K p / (1 + K p)",
            "c1*p/(c2+p)",
            7,
            vec![5.0, 2.0],
            vec![(0.1, 100.0), (0.01, 100.0)],
        ),
        model(
            "dual-site-langmuir",
            "q1 K1 p / (1 + K1 p) + q2 K2 p / (1 + K2 p)",
            "c1*p/(c2+p) + c3*p/(c4+p)",
            15,
            vec![3.0, 0.05, 8.0, 40.0],
            vec![(0.1, 100.0), (0.01, 100.0), (0.1, 100.0), (0.01, 100.0)],
        ),
        model(
            "bet",
            "v_m c x / ((1 - x)(1 - x + c x)), x = p / p0",
            "c1*p/(p*p + c2*p + c3)",
            13,
            vec![-10.0 / 9.0, -8.0 / 9.0, -1.0 / 9.0],
            vec![(-100.0, -0.01), (-100.0, -0.01), (-1.0, -0.001)],
        ),
        model(
            "freundlich",
            "K p^(1/n)",
            "c1*p^c2",
            5,
            vec![2.0, 0.5],
            vec![(0.1, 100.0), (0.1, 1.0)],
        ),
        model(
            "sips",
            "K p^(1/n) / (1 + K p^(1/n))",
            "p^c2/(c1+p^c2)",
            9,
            vec![2.0, 0.8],
            vec![(0.01, 100.0), (0.1, 1.0)],
        ),
    ]
}

pub fn find_model(name: &str) -> Result<IsothermModel, DatasetError> {
    let key = name.to_ascii_lowercase().replace(['_', ' '], "-");
    catalog()
        .into_iter()
        .find(|m| m.name == key || (key == "dual-site" && m.name == "dual-site-langmuir"))
        .ok_or_else(|| DatasetError::UnknownModel(name.to_string()))
}

/// Checks that the model stays finite and positive from the origin up to the
/// top of the grid; this excludes, e.g., BET grids past the saturation pole.
fn check_validity(model: &IsothermModel, params: &[f64], grid: &Grid) -> Result<(), DatasetError> {
    if !(grid.lo > 0.0 && grid.hi > grid.lo && grid.points >= 3) {
        return Err(DatasetError::InvalidGrid(format!(
            "need 0 < lo < hi and at least 3 points, got lo={} hi={} points={}",
            grid.lo, grid.hi, grid.points
        )));
    }
    let scan = Grid::log(grid.lo.min(1e-6), grid.hi, 4000).pressures();
    for p in scan.into_iter().chain(grid.pressures()) {
        let v = model.eval(params, p);
        if v.is_nan() || v <= 0.0 {
            return Err(DatasetError::InvalidGrid(format!(
                "{} is not positive and finite at p = {p:e}; the grid must stay below any pole",
                model.name
            )));
        }
    }
    Ok(())
}

/// Generates noisy samples of a catalogue model.
pub fn synthesize<R: Rng + ?Sized>(
    model: &IsothermModel,
    params: &[f64],
    grid: &Grid,
    noise: f64,
    noise_kind: NoiseKind,
    rng: &mut R,
) -> Result<Dataset, DatasetError> {
    if params.len() != model.param_count() {
        return Err(DatasetError::ParamCount {
            model: model.name.to_string(),
            expected: model.param_count(),
            got: params.len(),
        });
    }
    check_validity(model, params, grid)?;
    let normal = Normal::new(0.0, noise.abs()).map_err(|e| DatasetError::InvalidGrid(e.to_string()))?;
    let points: Vec<(f64, f64)> = grid
        .pressures()
        .into_iter()
        .map(|p| {
            let f = model.eval(params, p);
            let eps = if noise == 0.0 { 0.0 } else { normal.sample(rng) };
            let y = match noise_kind {
                NoiseKind::Relative => f * (1.0 + eps),
                NoiseKind::Absolute => f + eps,
            };
            (p, y)
        })
        .collect();
    let spec = SynthSpec {
        model: model.name.to_string(),
        params: params.to_vec(),
        grid: grid.clone(),
        noise,
        noise_kind,
    };
    let lines: Vec<usize> = (1..=points.len()).collect();
    let mut ds = Dataset::from_rows(
        format!("synthetic-{}", model.name),
        points,
        &lines,
        DataSource::Synthetic(spec),
    )?;
    ds.units = "arbitrary".into();
    Ok(ds)
}
