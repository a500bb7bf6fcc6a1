//! Config-driven pipeline stages: ingest, publish, attack, evaluate, sweep.
//!
//! Every stage reads its inputs from and writes its outputs to one output
//! directory, so stages can be re-run independently:
//!
//! | stage    | reads                                   | writes |
//! |----------|-----------------------------------------|--------|
//! | ingest   | dataset files (or nothing for `synth`)   | `trajectories.jsonl`, `grid.json`, `ingest_report.json` |
//! | publish  | `trajectories.jsonl`, `grid.json`       | `published.jsonl` |
//! | attack   | `published.jsonl`, `grid.json`          | `predictions_{method}.jsonl`, `diagnostics_{method}.csv`, `timing_{method}.json` |
//! | evaluate | `trajectories.jsonl`, predictions       | `eval_{method}.csv`, `eval_{method}.json`, `comparison.csv` |
//! | sweep    | dataset files                            | `sweep.csv` |
//!
//! The top-level `seed` drives publishing and both attackers; the synthetic
//! corpus keeps its own seed so a sweep attacks one fixed corpus.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, write_diagnostics_csv, AttackConfig, PassDiagnostics};
use crate::baseline::baseline_corpus;
use crate::error::{Error, Result};
use crate::grid::{GridSpace, PublishedTrajectory, TrajectoryTrue};
use crate::ingest::{
    parse_plt, parse_porto, preprocess, read_plt_dir, synth_generate, PreprocessConfig, PreprocessReport,
    RawTrajectory, SynthConfig,
};
use crate::io::{read_grid, read_json, read_jsonl, write_grid, write_json, write_jsonl};
use crate::metrics::{evaluate, EvalReport};
use crate::publisher::{check_release, min_region_size, publish_corpus, theoretical_max_error, PublishConfig};
use crate::rng::derive_seed;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORIES: &str = "trajectories.jsonl";
pub const GRID: &str = "grid.json";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const PUBLISHED: &str = "published.jsonl";
pub const COMPARISON: &str = "comparison.csv";
pub const SWEEP: &str = "sweep.csv";

/// Process exit codes of the command-line front end.
pub mod exit {
    pub const OTHER: i32 = 1;
    pub const UNREADABLE_INPUT: i32 = 2;
    pub const PRIVACY_VIOLATION: i32 = 3;
    pub const AREA_BAND: i32 = 4;
    pub const ID_MISMATCH: i32 = 5;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => exit::UNREADABLE_INPUT,
        Error::PrivacyViolation { .. } => exit::PRIVACY_VIOLATION,
        Error::AreaBand { .. } => exit::AREA_BAND,
        Error::IdMismatch(_) | Error::Mismatch { .. } => exit::ID_MISMATCH,
        _ => exit::OTHER,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "hmm-rl")]
    HmmRl,
    #[serde(rename = "baseline")]
    Baseline,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::HmmRl, Method::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::HmmRl => "hmm-rl",
            Method::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm-rl" => Ok(Method::HmmRl),
            "baseline" => Ok(Method::Baseline),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected hmm-rl or baseline)"
            ))),
        }
    }
}

/// Source corpus. Exactly one variant is present in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// Geolife PLT files or directories of them.
    Geolife {
        #[serde(default)]
        inputs: Vec<PathBuf>,
        #[serde(default)]
        preprocess: PreprocessConfig,
    },
    /// Porto taxi CSV files.
    Porto {
        #[serde(default)]
        inputs: Vec<PathBuf>,
        preprocess: PreprocessConfig,
    },
    Synth(SynthConfig),
}

impl Dataset {
    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Geolife { .. } => "geolife",
            Dataset::Porto { .. } => "porto",
            Dataset::Synth(_) => "synth",
        }
    }
}

/// Values to sweep; an empty list keeps the base config's value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub lambda: Vec<f64>,
    pub deviation: Vec<usize>,
    pub gamma: Vec<usize>,
    pub k: Vec<usize>,
    pub delta: Vec<f64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
            && self.deviation.is_empty()
            && self.gamma.is_empty()
            && self.k.is_empty()
            && self.delta.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dataset: Dataset,
    #[serde(default)]
    pub seed: u64,
    /// Publisher settings; `seed` is replaced by one derived from the
    /// top-level seed.
    #[serde(default)]
    pub publish: PublishConfig,
    /// Attacker settings; `lambda` is taken from `publish` and `seed` is
    /// derived from the top-level seed.
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub sweep: SweepAxes,
    /// Used when no output directory is given on the command line.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn new(dataset: Dataset) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            dataset,
            seed: 0,
            publish: PublishConfig::default(),
            attack: AttackConfig::default(),
            methods: default_methods(),
            sweep: SweepAxes::default(),
            out_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        match &self.dataset {
            Dataset::Synth(s) => s.validate()?,
            Dataset::Geolife { preprocess, .. } | Dataset::Porto { preprocess, .. } => preprocess.validate()?,
        }
        self.publish_config().validate()?;
        self.attack_config().validate()
    }

    pub fn publish_config(&self) -> PublishConfig {
        PublishConfig {
            seed: derive_seed(self.seed, "publish"),
            ..self.publish
        }
    }

    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            lambda: self.publish.lambda,
            seed: derive_seed(self.seed, "attack"),
            ..self.attack.clone()
        }
    }

    pub fn baseline_seed(&self) -> u64 {
        derive_seed(self.seed, "baseline")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub dataset: String,
    pub files: Vec<String>,
    /// PLT rows or Porto rows that failed to parse.
    pub skipped_rows: usize,
    /// Porto rows flagged as missing data.
    pub dropped_missing: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<PreprocessReport>,
    pub trajectories: usize,
    pub steps: usize,
}

/// Loads the configured corpus. `paths` overrides the dataset's `inputs`.
pub fn load_corpus(
    cfg: &ExperimentConfig,
    paths: &[PathBuf],
) -> Result<(Vec<TrajectoryTrue>, GridSpace, IngestReport)> {
    let pick = |inputs: &[PathBuf]| -> Result<Vec<PathBuf>> {
        let chosen = if paths.is_empty() {
            inputs.to_vec()
        } else {
            paths.to_vec()
        };
        if chosen.is_empty() {
            return Err(Error::Config(format!(
                "dataset {} needs input paths",
                cfg.dataset.name()
            )));
        }
        Ok(chosen)
    };
    let mut report = IngestReport {
        dataset: cfg.dataset.name().to_string(),
        files: Vec::new(),
        skipped_rows: 0,
        dropped_missing: 0,
        preprocess: None,
        trajectories: 0,
        steps: 0,
    };
    let (trajs, gs) = match &cfg.dataset {
        Dataset::Synth(s) => (synth_generate(s)?, s.grid()?),
        Dataset::Geolife { inputs, preprocess: pc } => {
            let mut raw = Vec::new();
            for path in pick(inputs)? {
                if path.is_dir() {
                    let (trajs, skipped) = read_plt_dir(&path)?;
                    raw.extend(trajs);
                    report.skipped_rows += skipped;
                } else {
                    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                    let parsed = parse_plt(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    report.skipped_rows += parsed.skipped;
                    let id = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    raw.push(RawTrajectory {
                        id,
                        points: parsed.points,
                    });
                }
                report.files.push(path.display().to_string());
            }
            run_preprocess(&raw, pc, &mut report)?
        }
        Dataset::Porto { inputs, preprocess: pc } => {
            let mut raw = Vec::new();
            for path in pick(inputs)? {
                let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                let parsed = parse_porto(std::io::BufReader::new(file))?;
                report.skipped_rows += parsed.skipped_malformed;
                report.dropped_missing += parsed.dropped_missing;
                raw.extend(parsed.trajectories);
                report.files.push(path.display().to_string());
            }
            run_preprocess(&raw, pc, &mut report)?
        }
    };
    report.trajectories = trajs.len();
    report.steps = trajs.iter().map(TrajectoryTrue::len).sum();
    Ok((trajs, gs, report))
}

fn run_preprocess(
    raw: &[RawTrajectory],
    pc: &PreprocessConfig,
    report: &mut IngestReport,
) -> Result<(Vec<TrajectoryTrue>, GridSpace)> {
    let gs = pc.grid()?;
    let (trajs, pre) = preprocess(raw, pc, &gs)?;
    report.preprocess = Some(pre);
    Ok((trajs, gs))
}

/// Publishes a corpus and checks every release against its source.
pub fn publish_checked(
    trajs: &[TrajectoryTrue],
    cfg: &PublishConfig,
    gs: &GridSpace,
) -> Result<Vec<PublishedTrajectory>> {
    let pubs = publish_corpus(trajs, cfg, gs)?;
    for (t, p) in trajs.iter().zip(&pubs) {
        check_release(t, p, cfg.lambda)?;
    }
    Ok(pubs)
}

/// Predictions of one attacker plus its per-pass diagnostics (empty for
/// the baseline).
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub predictions: Vec<TrajectoryTrue>,
    pub diagnostics: Vec<PassDiagnostics>,
}

pub fn run_method(
    method: Method,
    pubs: &[PublishedTrajectory],
    gs: &GridSpace,
    cfg: &ExperimentConfig,
) -> Result<MethodRun> {
    match method {
        Method::HmmRl => {
            let out = run_attack(pubs, gs, &cfg.attack_config())?;
            Ok(MethodRun {
                predictions: out.predictions,
                diagnostics: out.diagnostics,
            })
        }
        Method::Baseline => Ok(MethodRun {
            predictions: baseline_corpus(pubs, cfg.baseline_seed())?,
            diagnostics: Vec::new(),
        }),
    }
}

/// Worst-case error for the configured publisher on grid `gs`.
pub fn theoretical_bound(cfg: &ExperimentConfig, gs: &GridSpace) -> f64 {
    theoretical_max_error(
        min_region_size(cfg.publish.lambda),
        cfg.publish.deviation,
        gs.cell_size_m(),
    )
}

fn fmt_m(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_comparison_csv(w: impl Write, rows: &[(Method, EvalReport)], bound_m: f64) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "A2ED_m", "AMED_m", "theoretical_max_m"])?;
    for (m, r) in rows {
        out.write_record([m.as_str().to_string(), fmt_m(r.a2ed_m), fmt_m(r.amed_m), fmt_m(bound_m)])?;
    }
    out.flush().map_err(|e| Error::io("<comparison>", e))?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

pub fn predictions_file(method: Method) -> String {
    format!("predictions_{method}.jsonl")
}

pub fn cmd_ingest(cfg: &ExperimentConfig, paths: &[PathBuf], out: &Path) -> Result<IngestReport> {
    let (trajs, gs, report) = load_corpus(cfg, paths)?;
    ensure_dir(out)?;
    write_jsonl(&out.join(TRAJECTORIES), &trajs)?;
    write_grid(&out.join(GRID), &gs)?;
    write_json(&out.join(INGEST_REPORT), &report)?;
    Ok(report)
}

pub fn cmd_publish(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PublishedTrajectory>> {
    let trajs: Vec<TrajectoryTrue> = read_jsonl(&out.join(TRAJECTORIES))?;
    let gs = read_grid(&out.join(GRID))?;
    let pubs = publish_checked(&trajs, &cfg.publish_config(), &gs)?;
    write_jsonl(&out.join(PUBLISHED), &pubs)?;
    Ok(pubs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub method: Method,
    pub trajectories: usize,
    pub seconds: f64,
}

pub fn cmd_attack(cfg: &ExperimentConfig, method: Method, out: &Path) -> Result<MethodRun> {
    let pubs: Vec<PublishedTrajectory> = read_jsonl(&out.join(PUBLISHED))?;
    let gs = read_grid(&out.join(GRID))?;
    let start = Instant::now();
    let run = run_method(method, &pubs, &gs, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    write_jsonl(&out.join(predictions_file(method)), &run.predictions)?;
    if method == Method::HmmRl {
        write_diagnostics_csv(
            create(&out.join(format!("diagnostics_{method}.csv")))?,
            &run.diagnostics,
        )?;
    }
    write_json(
        &out.join(format!("timing_{method}.json")),
        &Timing {
            method,
            trajectories: pubs.len(),
            seconds,
        },
    )?;
    Ok(run)
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, methods: &[Method], out: &Path) -> Result<Vec<(Method, EvalReport)>> {
    let truths: Vec<TrajectoryTrue> = read_jsonl(&out.join(TRAJECTORIES))?;
    let gs = read_grid(&out.join(GRID))?;
    let mut rows = Vec::with_capacity(methods.len());
    for &m in methods {
        let preds: Vec<TrajectoryTrue> = read_jsonl(&out.join(predictions_file(m)))?;
        let report = evaluate(&truths, &preds, gs.cell_size_m())?;
        report.write_csv(create(&out.join(format!("eval_{m}.csv")))?)?;
        write_json(&out.join(format!("eval_{m}.json")), &report)?;
        rows.push((m, report));
    }
    write_comparison_csv(create(&out.join(COMPARISON))?, &rows, theoretical_bound(cfg, &gs))?;
    Ok(rows)
}

/// One combination of sweep axis values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub deviation: usize,
    pub gamma: usize,
    pub k: usize,
    pub delta: f64,
}

impl SweepPoint {
    /// Stable text form used to derive the point's seed.
    pub fn key(&self) -> String {
        format!(
            "lambda={},deviation={},gamma={},k={},delta={}",
            self.lambda, self.deviation, self.gamma, self.k, self.delta
        )
    }
}

/// Cartesian product of the axes, in axis order with the last axis varying
/// fastest. Unswept axes take the base config's value.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    fn or<T: Copy>(axis: &[T], base: T) -> Vec<T> {
        if axis.is_empty() {
            vec![base]
        } else {
            axis.to_vec()
        }
    }
    let ax = &cfg.sweep;
    let mut points = Vec::new();
    for &lambda in &or(&ax.lambda, cfg.publish.lambda) {
        for &deviation in &or(&ax.deviation, cfg.publish.deviation) {
            for &gamma in &or(&ax.gamma, cfg.attack.gamma) {
                for &k in &or(&ax.k, cfg.attack.k) {
                    for &delta in &or(&ax.delta, cfg.attack.delta) {
                        points.push(SweepPoint {
                            lambda,
                            deviation,
                            gamma,
                            k,
                            delta,
                        });
                    }
                }
            }
        }
    }
    points
}

/// The config a single sweep point runs with: axis values applied and the
/// seed replaced by one derived from the base seed and the point.
pub fn sweep_point_config(cfg: &ExperimentConfig, point: &SweepPoint) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.publish.lambda = point.lambda;
    c.publish.deviation = point.deviation;
    c.attack.gamma = point.gamma;
    c.attack.k = point.k;
    c.attack.delta = point.delta;
    c.seed = derive_seed(cfg.seed, &point.key());
    c.sweep = SweepAxes::default();
    c
}

/// Runs publish, every configured method and evaluation for one config on
/// an already loaded corpus.
pub fn evaluate_in_memory(
    cfg: &ExperimentConfig,
    truths: &[TrajectoryTrue],
    gs: &GridSpace,
) -> Result<Vec<(Method, EvalReport)>> {
    cfg.validate()?;
    let pubs = publish_checked(truths, &cfg.publish_config(), gs)?;
    cfg.methods
        .iter()
        .map(|&m| {
            let run = run_method(m, &pubs, gs, cfg)?;
            Ok((m, evaluate(truths, &run.predictions, gs.cell_size_m())?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub method: Method,
    pub a2ed_m: f64,
    pub amed_m: f64,
}

/// Evaluates every sweep point on one corpus. Points run in parallel;
/// rows come back in [`sweep_points`] order, then method order.
pub fn run_sweep(cfg: &ExperimentConfig, truths: &[TrajectoryTrue], gs: &GridSpace) -> Result<Vec<SweepRow>> {
    if cfg.sweep.is_empty() {
        return Err(Error::Config("sweep needs at least one non-empty axis".into()));
    }
    let per_point: Vec<Vec<SweepRow>> = sweep_points(cfg)
        .par_iter()
        .map(|point| {
            let reports = evaluate_in_memory(&sweep_point_config(cfg, point), truths, gs)?;
            Ok(reports
                .into_iter()
                .map(|(method, r)| SweepRow {
                    point: *point,
                    method,
                    a2ed_m: r.a2ed_m,
                    amed_m: r.amed_m,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Long format: one row per (point, method, metric).
pub fn write_sweep_csv(w: impl Write, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "lambda",
        "deviation",
        "gamma",
        "k",
        "delta",
        "method",
        "metric",
        "value",
    ])?;
    for r in rows {
        let p = &r.point;
        for (metric, value) in [("A2ED_m", r.a2ed_m), ("AMED_m", r.amed_m)] {
            out.write_record([
                p.lambda.to_string(),
                p.deviation.to_string(),
                p.gamma.to_string(),
                p.k.to_string(),
                p.delta.to_string(),
                r.method.as_str().to_string(),
                metric.to_string(),
                fmt_m(value),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}

pub fn cmd_sweep(cfg: &ExperimentConfig, paths: &[PathBuf], out: &Path) -> Result<Vec<SweepRow>> {
    let (truths, gs, _) = load_corpus(cfg, paths)?;
    let rows = run_sweep(cfg, &truths, &gs)?;
    ensure_dir(out)?;
    write_sweep_csv(create(&out.join(SWEEP))?, &rows)?;
    Ok(rows)
}
