//! Pareto fronts, run records, and constraint pass-rate tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use crate::algebra::{canonical_form, CanonicalForm};
use crate::constraints::{ConstraintChecker, ConstraintVerdict, ALL_CHECKS};
use crate::expr::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Engine {
    Ga,
    Bsr,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Ga => "ga",
            Engine::Bsr => "bsr",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(Engine::Ga),
            "bsr" => Ok(Engine::Bsr),
            other => Err(format!("unknown engine `{other}` (expected ga or bsr)")),
        }
    }
}

/// A fitted expression together with its fitted-value canonical form.
#[derive(Clone, Debug)]
pub struct ScoredModel {
    pub expr: Expr,
    pub params: Vec<f64>,
    /// Unpenalised mean squared error.
    pub loss: f64,
    pub raw_complexity: usize,
    pub canonical: CanonicalForm,
    pub verdict: Option<ConstraintVerdict>,
}

impl ScoredModel {
    pub fn new(expr: Expr, params: Vec<f64>, loss: f64) -> Self {
        let canonical = canonical_form(&expr, Some(&params))
            .unwrap_or_else(|_| CanonicalForm::verbatim(expr.clone(), params.clone(), true));
        ScoredModel {
            raw_complexity: expr.complexity(),
            expr,
            params,
            loss,
            canonical,
            verdict: None,
        }
    }

    pub fn with_canonical(expr: Expr, params: Vec<f64>, loss: f64, canonical: CanonicalForm) -> Self {
        ScoredModel {
            raw_complexity: expr.complexity(),
            expr,
            params,
            loss,
            canonical,
            verdict: None,
        }
    }

    pub fn complexity(&self) -> usize {
        self.canonical.complexity
    }

    pub fn form(&self) -> &str {
        &self.canonical.string
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontEntry {
    /// Canonical complexity.
    pub complexity: usize,
    pub loss: f64,
    /// Canonical form string.
    pub form: String,
    /// Coefficients of the canonical form.
    pub params: Vec<f64>,
    pub raw: String,
    pub raw_complexity: usize,
    pub verdict: Option<[bool; 3]>,
}

impl FrontEntry {
    pub fn from_model(m: &ScoredModel) -> Self {
        FrontEntry {
            complexity: m.canonical.complexity,
            loss: m.loss,
            form: m.canonical.string.clone(),
            params: m.canonical.params.clone(),
            raw: m.expr.render(),
            raw_complexity: m.raw_complexity,
            verdict: None,
        }
    }

    fn beats(&self, other: &FrontEntry) -> bool {
        self.loss < other.loss || (self.loss == other.loss && self.form < other.form)
    }
}

/// Best loss per canonical complexity; no entry is dominated by one of lower
/// or equal complexity with lower or equal loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParetoFront {
    entries: BTreeMap<usize, FrontEntry>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, complexity: usize) -> Option<&FrontEntry> {
        self.entries.get(&complexity)
    }

    pub fn entries(&self) -> impl Iterator<Item = &FrontEntry> {
        self.entries.values()
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut FrontEntry> {
        self.entries.values_mut()
    }

    /// Inserts `e` if nothing at lower or equal complexity is at least as
    /// good, then drops the entries it dominates. Returns whether it was kept.
    pub fn update(&mut self, e: FrontEntry) -> bool {
        if !e.loss.is_finite() {
            return false;
        }
        if let Some(cur) = self.entries.get(&e.complexity) {
            if !e.beats(cur) {
                return false;
            }
        }
        if self
            .entries
            .range(..e.complexity)
            .any(|(_, x)| x.loss <= e.loss)
        {
            return false;
        }
        let doomed: Vec<usize> = self
            .entries
            .range(e.complexity + 1..)
            .filter(|(_, x)| x.loss >= e.loss)
            .map(|(&c, _)| c)
            .collect();
        for c in doomed {
            self.entries.remove(&c);
        }
        self.entries.insert(e.complexity, e);
        true
    }

    pub fn update_model(&mut self, m: &ScoredModel) -> bool {
        self.update(FrontEntry::from_model(m))
    }

    /// Dominance-pruned union; order-independent.
    pub fn merge<'a>(fronts: impl IntoIterator<Item = &'a ParetoFront>) -> ParetoFront {
        let mut out = ParetoFront::new();
        for f in fronts {
            for e in f.entries() {
                out.update(e.clone());
            }
        }
        out
    }

    /// Fills in all three verdicts for every entry.
    pub fn annotate(&mut self, checker: &ConstraintChecker) {
        for e in self.entries.values_mut() {
            let v = match crate::expr::parse(&e.form) {
                Ok(expr) if expr.max_param() <= e.params.len() => {
                    let cf = CanonicalForm::verbatim(expr, e.params.clone(), false);
                    checker.check_canonical(&cf, ALL_CHECKS)
                }
                _ => ConstraintVerdict::default(),
            };
            e.verdict = Some([v.c1_pass(), v.c2_pass(), v.c3_pass()]);
        }
    }

    /// Area under the front in (complexity, log10 loss) up to `max_complexity`.
    /// A summary number only; lower is better.
    pub fn log_area(&self, max_complexity: usize) -> f64 {
        let pts: Vec<(usize, f64)> = self
            .entries
            .values()
            .filter(|e| e.complexity <= max_complexity)
            .map(|e| (e.complexity, e.loss.max(1e-300).log10()))
            .collect();
        let mut area = 0.0;
        for (i, &(c, l)) in pts.iter().enumerate() {
            let next = pts.get(i + 1).map_or(max_complexity + 1, |p| p.0);
            area += (next - c) as f64 * l;
        }
        area
    }

    /// CSV with columns `complexity,loss,canonical_form,c1_pass,c2_pass,c3_pass,params`;
    /// params are `;`-separated.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "complexity",
            "loss",
            "canonical_form",
            "c1_pass",
            "c2_pass",
            "c3_pass",
            "params",
        ])?;
        for e in self.entries.values() {
            let pass = |i: usize| e.verdict.map_or(String::new(), |v| v[i].to_string());
            let params: Vec<String> = e.params.iter().map(|x| format!("{x:e}")).collect();
            out.write_record([
                e.complexity.to_string(),
                format!("{:e}", e.loss),
                e.form.clone(),
                pass(0),
                pass(1),
                pass(2),
                params.join(";"),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a front written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<ParetoFront, String> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut front = ParetoFront::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let line = i + 2;
            let field = |k: usize| rec.get(k).ok_or(format!("line {line}: missing column {}", k + 1));
            let num = |k: usize| -> Result<f64, String> {
                field(k)?.parse().map_err(|_| format!("line {line}: bad number in column {}", k + 1))
            };
            let flag = |k: usize| -> Result<Option<bool>, String> {
                match field(k)? {
                    "" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| format!("line {line}: bad flag")),
                }
            };
            let params = match field(6)? {
                "" => Vec::new(),
                s => s
                    .split(';')
                    .map(|x| x.parse().map_err(|_| format!("line {line}: bad param `{x}`")))
                    .collect::<Result<Vec<f64>, String>>()?,
            };
            let flags = [flag(3)?, flag(4)?, flag(5)?];
            let complexity: usize = field(0)?
                .parse()
                .map_err(|_| format!("line {line}: bad complexity"))?;
            let form = field(2)?.to_string();
            front.update(FrontEntry {
                complexity,
                loss: num(1)?,
                raw: form.clone(),
                form,
                params,
                raw_complexity: complexity,
                verdict: match flags {
                    [Some(a), Some(b), Some(c)] => Some([a, b, c]),
                    _ => None,
                },
            });
        }
        Ok(front)
    }
}

/// Counters collected during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub evaluations: u64,
    pub fits: u64,
    pub proposals: u64,
    pub accepted: u64,
}

/// Output of one search run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub engine: Engine,
    /// Cumulative front after each generation (genetic search only).
    pub history: Vec<ParetoFront>,
    pub front: ParetoFront,
    /// Hall-of-fame submissions (genetic search) or thinned chain samples.
    pub members: Vec<ScoredModel>,
    pub stats: RunStats,
}

/// Keeps the lowest-loss model for each canonical form.
pub fn dedup_by_canonical(samples: &[ScoredModel]) -> Vec<&ScoredModel> {
    let mut best: HashMap<&str, &ScoredModel> = HashMap::new();
    for s in samples {
        best.entry(s.form())
            .and_modify(|b| {
                if s.loss < b.loss {
                    *b = s;
                }
            })
            .or_insert(s);
    }
    let mut out: Vec<&ScoredModel> = best.into_values().collect();
    out.sort_by(|a, b| a.form().cmp(b.form()));
    out
}

/// Pass counts for one (dataset, engine, constraint setting) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PassRates {
    pub dataset: String,
    pub engine: Engine,
    pub constraints_active: bool,
    pub n: usize,
    pub passed: [usize; 3],
}

impl PassRates {
    pub fn fraction(&self, i: usize) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.passed[i] as f64 / self.n as f64
        }
    }

    pub fn fractions(&self) -> [f64; 3] {
        [self.fraction(0), self.fraction(1), self.fraction(2)]
    }
}

/// Deduplicates by canonical form and recomputes all three verdicts.
pub fn pass_rates(
    samples: &[ScoredModel],
    checker: &ConstraintChecker,
    dataset: &str,
    engine: Engine,
    constraints_active: bool,
) -> PassRates {
    let unique = dedup_by_canonical(samples);
    let mut passed = [0usize; 3];
    for m in &unique {
        let v = checker.check_canonical(&m.canonical, ALL_CHECKS);
        for (i, p) in passed.iter_mut().enumerate() {
            if v.pass(i) {
                *p += 1;
            }
        }
    }
    PassRates {
        dataset: dataset.to_string(),
        engine,
        constraints_active,
        n: unique.len(),
        passed,
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PassRateTable {
    pub rows: Vec<PassRates>,
}

impl PassRateTable {
    /// Long format: `dataset,constraints_active,engine,c1,c2,c3,n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dataset", "constraints_active", "engine", "c1", "c2", "c3", "n"])?;
        for r in &self.rows {
            let f = r.fractions();
            out.write_record([
                r.dataset.clone(),
                r.constraints_active.to_string(),
                r.engine.to_string(),
                format!("{:.6}", f[0]),
                format!("{:.6}", f[1]),
                format!("{:.6}", f[2]),
                r.n.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<PassRateTable, String> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != 7 {
                return Err(format!("expected 7 columns, found {}", rec.len()));
            }
            let n: usize = rec[6].parse().map_err(|_| "bad n".to_string())?;
            let frac = |k: usize| -> Result<usize, String> {
                let f: f64 = rec[k].parse().map_err(|_| format!("bad fraction `{}`", &rec[k]))?;
                Ok((f * n as f64).round() as usize)
            };
            rows.push(PassRates {
                dataset: rec[0].to_string(),
                constraints_active: rec[1].parse().map_err(|_| "bad flag".to_string())?,
                engine: rec[2].parse()?,
                n,
                passed: [frac(3)?, frac(4)?, frac(5)?],
            });
        }
        Ok(PassRateTable { rows })
    }

    /// One row per (dataset, constraint setting) with both engines side by side,
    /// percentages with one decimal.
    pub fn write_wide<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "dataset",
            "constraints_active",
            "bsr_c1",
            "bsr_c2",
            "bsr_c3",
            "ga_c1",
            "ga_c2",
            "ga_c3",
        ])?;
        let mut keys: Vec<(String, bool)> = self
            .rows
            .iter()
            .map(|r| (r.dataset.clone(), r.constraints_active))
            .collect();
        keys.sort();
        keys.dedup();
        for (ds, on) in keys {
            let cell = |engine: Engine, i: usize| {
                self.rows
                    .iter()
                    .find(|r| r.dataset == ds && r.constraints_active == on && r.engine == engine)
                    .map_or(String::new(), |r| format!("{:.1}%", 100.0 * r.fraction(i)))
            };
            out.write_record([
                ds.clone(),
                on.to_string(),
                cell(Engine::Bsr, 0),
                cell(Engine::Bsr, 1),
                cell(Engine::Bsr, 2),
                cell(Engine::Ga, 0),
                cell(Engine::Ga, 1),
                cell(Engine::Ga, 2),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
