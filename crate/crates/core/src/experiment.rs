//! Monte-Carlo power sweeps over schemes, radiation patterns and seeds.
//!
//! A run is described by a JSON [`ExperimentConfig`]. Every
//! `(scheme, pattern, power, seed)` cell is independent; cells may run in
//! parallel but results are always written in config order, so the CSV is
//! byte-identical across runs of the same config.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optimizer::{ao_optimize, NoObserver, OptimizerConfig, Scheme};
use crate::radiation::PatternKind;
use crate::scenario::{check_equal_budgets, setup_run, InitMode, ScenarioParams};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 11] = [
    "row_type",
    "scheme",
    "pattern",
    "power_dbm",
    "seed",
    "sum_rate_bps_hz",
    "std_bps_hz",
    "outer_iters",
    "runtime_s",
    "converged",
    "feasible",
];

/// Seeds as an explicit list or as a contiguous range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedList {
    List(Vec<u64>),
    Range { first: u64, count: u64 },
}

impl SeedList {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedList::List(v) => v.clone(),
            SeedList::Range { first, count } => (*first..first + count).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: ScenarioParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub powers_dbm: Vec<f64>,
    pub patterns: Vec<PatternKind>,
    pub schemes: Vec<Scheme>,
    pub seeds: SeedList,
    /// Directory for `results.csv` and `results.json`; the CLI flag wins.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write wall-clock seconds into the CSV. Off by default so the CSV stays
    /// byte-identical across runs; timings always go to the JSON sidecar.
    #[serde(default)]
    pub record_runtime: bool,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses and validates a config; errors carry the offending line when known.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            if e.line() > 0 {
                Error::ConfigAt { line: e.line(), message: e.to_string() }
            } else {
                Error::Config(e.to_string())
            }
        })?;
        config.validate().map_err(|(key, message)| match key_line(text, key) {
            Some(line) => Error::ConfigAt { line, message },
            None => Error::Config(message),
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Semantic checks; on failure returns the JSON key to blame and a message.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err((
                "schema_version",
                format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.powers_dbm.is_empty() {
            return Err(("powers_dbm", "powers_dbm must not be empty".into()));
        }
        if let Some(p) = self.powers_dbm.iter().find(|p| !p.is_finite()) {
            return Err(("powers_dbm", format!("power {p} dBm is not finite")));
        }
        if self.patterns.is_empty() {
            return Err(("patterns", "patterns must not be empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(("schemes", "schemes must not be empty".into()));
        }
        if self.seeds.seeds().is_empty() {
            return Err(("seeds", "seeds must not be empty".into()));
        }
        self.scenario.validate().map_err(|e| ("scenario", e.to_string()))?;
        self.optimizer.validate().map_err(|e| ("optimizer", e.to_string()))?;
        check_equal_budgets(&self.scenario, &self.schemes).map_err(|e| ("schemes", e.to_string()))?;
        Ok(())
    }

    /// All cells in output order: scheme, then pattern, then power, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let seeds = self.seeds.seeds();
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for &pattern in &self.patterns {
                for &power_dbm in &self.powers_dbm {
                    for &seed in &seeds {
                        out.push(Cell { scheme, pattern, power_dbm, seed });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub scheme: Scheme,
    pub pattern: PatternKind,
    pub power_dbm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub cell: Cell,
    pub initial_sum_rate: f64,
    pub sum_rate: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub pattern: PatternKind,
    pub power_dbm: f64,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single run.
    pub std: Option<f64>,
    pub mean_outer_iterations: f64,
    pub mean_runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    pub runtime_s: f64,
}

/// Runs a single cell.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<RunRecord> {
    let setup = setup_run(&config.scenario, cell.scheme, cell.pattern, cell.power_dbm, cell.seed)?;
    let opt = OptimizerConfig { scheme: cell.scheme, ..config.optimizer.clone() };
    let result = ao_optimize(&setup.system, setup.poses, setup.theta, &opt, &mut NoObserver)?;
    Ok(RunRecord {
        cell: *cell,
        initial_sum_rate: result.trace[0],
        sum_rate: result.sum_rate,
        outer_iterations: result.outer_iterations,
        converged: result.converged,
        feasible: result.feasibility.is_feasible(),
        runtime_s: result.runtime_s,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

fn aggregate(runs: &[RunRecord]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    let mut i = 0;
    while i < runs.len() {
        let c = runs[i].cell;
        let group: Vec<&RunRecord> = runs[i..]
            .iter()
            .take_while(|r| r.cell.scheme == c.scheme && r.cell.pattern == c.pattern && r.cell.power_dbm == c.power_dbm)
            .collect();
        let rates: Vec<f64> = group.iter().map(|r| r.sum_rate).collect();
        let (mean, std) = mean_std(&rates);
        let n = group.len() as f64;
        out.push(Aggregate {
            scheme: c.scheme,
            pattern: c.pattern,
            power_dbm: c.power_dbm,
            runs: group.len(),
            mean,
            std,
            mean_outer_iterations: group.iter().map(|r| r.outer_iterations as f64).sum::<f64>() / n,
            mean_runtime_s: group.iter().map(|r| r.runtime_s).sum::<f64>() / n,
        });
        i += group.len();
    }
    out
}

/// Runs every cell on `jobs` threads (all cores when `None`).
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentResults> {
    config.validate().map_err(|(key, msg)| Error::Config(format!("{key}: {msg}")))?;
    let started = Instant::now();
    let cells = config.cells();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let runs = pool.install(|| cells.par_iter().map(|c| run_cell(config, c)).collect::<Result<Vec<_>>>())?;
    let aggregates = aggregate(&runs);
    Ok(ExperimentResults { runs, aggregates, runtime_s: started.elapsed().as_secs_f64() })
}

/// Writes the result table: one `run` row per cell, then one `aggregate` row
/// per `(scheme, pattern, power)`.
pub fn write_csv<W: Write>(out: W, results: &ExperimentResults, record_runtime: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    let runtime = |t: f64| if record_runtime { format!("{t}") } else { String::new() };
    for r in &results.runs {
        w.write_record([
            "run".to_string(),
            r.cell.scheme.to_string(),
            r.cell.pattern.to_string(),
            format!("{}", r.cell.power_dbm),
            r.cell.seed.to_string(),
            format!("{}", r.sum_rate),
            String::new(),
            r.outer_iterations.to_string(),
            runtime(r.runtime_s),
            r.converged.to_string(),
            r.feasible.to_string(),
        ])?;
    }
    for a in &results.aggregates {
        w.write_record([
            "aggregate".to_string(),
            a.scheme.to_string(),
            a.pattern.to_string(),
            format!("{}", a.power_dbm),
            String::new(),
            format!("{}", a.mean),
            a.std.map(|s| format!("{s}")).unwrap_or_default(),
            format!("{}", a.mean_outer_iterations),
            runtime(a.mean_runtime_s),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    package: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    decisions: BTreeMap<&'static str, String>,
    total_runtime_s: f64,
    runs: Vec<SidecarRun>,
}

#[derive(Serialize)]
struct SidecarRun {
    scheme: Scheme,
    pattern: PatternKind,
    power_dbm: f64,
    seed: u64,
    initial_sum_rate_bps_hz: f64,
    sum_rate_bps_hz: f64,
    outer_iters: usize,
    runtime_s: f64,
}

/// Modelling choices that affect how the numbers should be read.
pub fn decisions_in_effect(config: &ExperimentConfig) -> BTreeMap<&'static str, String> {
    let s = &config.scenario;
    let mut d = BTreeMap::new();
    d.insert(
        "site_region",
        format!("cube centered at {:?} m with side {} m", s.region_center_m, s.region_side_m),
    );
    d.insert(
        "fixed_irs_pose",
        format!(
            "region center shifted {} m along the bisector of the mean user and BS directions; \
             normal projected to face away from the origin when needed",
            s.anchor_offset_m
        ),
    );
    d.insert(
        "initial_poses",
        match s.init {
            InitMode::Tiled => "6DMA surfaces start at the fixed-IRS pose; distributed surfaces as its tiles".into(),
            InitMode::Random => format!(
                "rejection-sampled in the fixed-IRS plane, random tilts up to {} rad",
                s.init_tilt_rad
            ),
        },
    );
    d.insert("initial_phases", "uniform random per element from the run seed".into());
    d.insert(
        "distance_linearization",
        format!("{:?}", config.optimizer.distance_linearization).to_lowercase(),
    );
    d.insert("d_min_m", format!("{}", s.d_min()));
    d.insert("gradient", "central differences".into());
    d.insert("direction_lp", "two-phase simplex with Bland's rule".into());
    d
}

/// Writes the JSON sidecar with the full config, versions and per-run timings.
pub fn write_sidecar<W: Write>(out: W, config: &ExperimentConfig, results: &ExperimentResults) -> Result<()> {
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config,
        decisions: decisions_in_effect(config),
        total_runtime_s: results.runtime_s,
        runs: results
            .runs
            .iter()
            .map(|r| SidecarRun {
                scheme: r.cell.scheme,
                pattern: r.cell.pattern,
                power_dbm: r.cell.power_dbm,
                seed: r.cell.seed,
                initial_sum_rate_bps_hz: r.initial_sum_rate,
                sum_rate_bps_hz: r.sum_rate,
                outer_iters: r.outer_iterations,
                runtime_s: r.runtime_s,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &sidecar)?;
    Ok(())
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn write_outputs(dir: &Path, config: &ExperimentConfig, results: &ExperimentResults) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let paths = OutputPaths { csv: dir.join("results.csv"), json: dir.join("results.json") };
    write_csv(fs::File::create(&paths.csv)?, results, config.record_runtime)?;
    let mut json = fs::File::create(&paths.json)?;
    write_sidecar(&mut json, config, results)?;
    json.write_all(b"\n")?;
    Ok(paths)
}

/// Isotropic-minus-directive gap of one scheme at one power.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub scheme: String,
    pub power_dbm: f64,
    pub directive_mean: f64,
    pub isotropic_mean: f64,
    pub gap: f64,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    row_type: String,
    scheme: String,
    pattern: String,
    power_dbm: f64,
    sum_rate_bps_hz: f64,
}

/// Per-scheme isotropic-minus-directive mean-rate gaps from a results CSV.
///
/// Means are recomputed from the `run` rows. Every `(scheme, power)` present
/// must have runs under both patterns.
pub fn summarize<R: std::io::Read>(input: R) -> Result<Vec<GapRow>> {
    let mut reader = csv::Reader::from_reader(input);
    // (scheme, power bits) -> (directive rates, isotropic rates), in first-seen order
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| Error::ConfigAt { line: i + 2, message: e.to_string() })?;
        if row.row_type != "run" {
            continue;
        }
        let key = (row.scheme.clone(), row.power_dbm.to_bits());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        match row.pattern.parse::<PatternKind>() {
            Ok(PatternKind::Directive) => entry.0.push(row.sum_rate_bps_hz),
            Ok(PatternKind::Isotropic) => entry.1.push(row.sum_rate_bps_hz),
            Err(_) => {
                return Err(Error::ConfigAt { line: i + 2, message: format!("unknown pattern '{}'", row.pattern) })
            }
        }
    }
    if order.is_empty() {
        return Err(Error::Config("no run rows to summarize".into()));
    }
    order
        .into_iter()
        .map(|key| {
            let (dir, iso) = &groups[&key];
            let power_dbm = f64::from_bits(key.1);
            if dir.is_empty() || iso.is_empty() {
                let missing = if dir.is_empty() { "directive" } else { "isotropic" };
                return Err(Error::Config(format!("{} at {power_dbm} dBm has no {missing} runs", key.0)));
            }
            let directive_mean = mean_std(dir).0;
            let isotropic_mean = mean_std(iso).0;
            Ok(GapRow { scheme: key.0, power_dbm, directive_mean, isotropic_mean, gap: isotropic_mean - directive_mean })
        })
        .collect()
}

pub fn write_gaps<W: Write>(out: W, gaps: &[GapRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["scheme", "power_dbm", "directive_mean_bps_hz", "isotropic_mean_bps_hz", "gap_bps_hz"])?;
    for g in gaps {
        w.write_record([
            g.scheme.clone(),
            format!("{}", g.power_dbm),
            format!("{}", g.directive_mean),
            format!("{}", g.isotropic_mean),
            format!("{}", g.gap),
        ])?;
    }
    w.flush()?;
    Ok(())
}
