//! Experiment drivers behind the command-line tool: single solves,
//! convergence traces and parameter sweeps, with CSV/JSON writers.
//!
//! Sweeps fan out over a rayon pool but collect in job order, so the output
//! does not depend on the thread count. Wall-clock runtimes are recorded only
//! on request; otherwise the column is zero and re-runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bcd::{run_scheme, Scheme, SolveError, SolveReport, Termination};
use crate::model::StarConfig;
use crate::scenario::{draw_trial, SystemConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("{scheme} failed at seed {seed}, {param} = {value}: {source}")]
    Trial {
        scheme: Scheme,
        seed: u64,
        param: String,
        value: f64,
        #[source]
        source: SolveError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl ExperimentError {
    /// True for errors caused by the inputs rather than by the run itself.
    pub fn is_config(&self) -> bool {
        match self {
            ExperimentError::Spec(_) => true,
            ExperimentError::Trial { source, .. } => matches!(source, SolveError::Config(_)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Pmax,
    Antennas,
    Elements,
    Qlevel,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Pmax => "pmax",
            SweepParam::Antennas => "antennas",
            SweepParam::Elements => "elements",
            SweepParam::Qlevel => "qlevel",
        }
    }

    /// `base` with the swept parameter set to `value`.
    ///
    /// The power floor keeps its ratio to the budget, so a pmax sweep never
    /// produces an empty power box.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig, ExperimentError> {
        let count = || -> Result<usize, ExperimentError> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(ExperimentError::Spec(format!("{} needs positive integer values, got {value}", self.name())))
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepParam::Pmax => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(ExperimentError::Spec(format!("pmax must be positive, got {value}")));
                }
                cfg.p_min = base.p_min / base.p_max * value;
                cfg.p_max = value;
            }
            SweepParam::Antennas => cfg.antennas = count()?,
            SweepParam::Elements => cfg.elements = count()?,
            SweepParam::Qlevel => cfg.levels = count()?,
        }
        cfg.validate().map_err(|e| ExperimentError::Spec(format!("{} = {value}: {e}", self.name())))?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pmax" | "p_max" => Ok(SweepParam::Pmax),
            "antennas" | "m" => Ok(SweepParam::Antennas),
            "elements" | "n" => Ok(SweepParam::Elements),
            "qlevel" | "q" | "levels" => Ok(SweepParam::Qlevel),
            other => Err(format!("unknown sweep parameter '{other}' (expected pmax, antennas, elements, qlevel)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: u64,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::Spec("no sweep values".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ExperimentError::Spec("sweep values must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(ExperimentError::Spec("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(ExperimentError::Spec("no schemes selected".into()));
        }
        Ok(())
    }
}

/// One line of a results CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: String,
    pub seed: u64,
    pub param: String,
    pub value: f64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
}

pub const CSV_HEADER: &str = "scheme,seed,param,value,sum_rate,iterations,runtime_ms";

fn solve_timed(scheme: Scheme, cfg: &SystemConfig, trial: u64) -> Result<(SolveReport, f64), SolveError> {
    let clock = Instant::now();
    let ch = draw_trial(cfg, trial);
    let rep = run_scheme(scheme, cfg, &ch, trial)?;
    Ok((rep, clock.elapsed().as_secs_f64() * 1e3))
}

/// Runs every (value, scheme, trial) job and returns rows sorted by value,
/// scheme tag and seed.
pub fn run_sweep(
    base: &SystemConfig,
    spec: &SweepSpec,
    threads: usize,
    timing: bool,
) -> Result<Vec<ResultRow>, ExperimentError> {
    spec.validate()?;
    let configs: Vec<SystemConfig> =
        spec.values.iter().map(|&v| spec.param.apply(base, v)).collect::<Result<_, _>>()?;
    let mut schemes = spec.schemes.clone();
    schemes.sort_by_key(|s| s.tag());
    schemes.dedup();

    let mut jobs = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        for &scheme in &schemes {
            for seed in 0..spec.trials {
                jobs.push((vi, value, scheme, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let param = spec.param.name();
    pool.install(|| {
        jobs.par_iter()
            .map(|&(vi, value, scheme, seed)| {
                let (rep, ms) = solve_timed(scheme, &configs[vi], seed).map_err(|source| ExperimentError::Trial {
                    scheme,
                    seed,
                    param: param.to_string(),
                    value,
                    source,
                })?;
                Ok(ResultRow {
                    scheme: scheme.tag().to_string(),
                    seed,
                    param: param.to_string(),
                    value,
                    sum_rate: rep.sum_rate(),
                    iterations: rep.iterations,
                    runtime_ms: if timing { ms } else { 0.0 },
                })
            })
            .collect()
    })
}

fn create_parent(path: &Path) -> Result<(), ExperimentError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.to_path_buf(),
            source,
        }),
        _ => Ok(()),
    }
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    create_parent(path)?;
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Sum rate after every iteration of the proposed scheme on trial `seed`.
pub fn convergence_trace(cfg: &SystemConfig, seed: u64) -> Result<Vec<f64>, ExperimentError> {
    let ch = draw_trial(cfg, seed);
    let rep = run_scheme(Scheme::Proposed, cfg, &ch, seed).map_err(|source| ExperimentError::Trial {
        scheme: Scheme::Proposed,
        seed,
        param: "none".into(),
        value: 0.0,
        source,
    })?;
    Ok(rep.trace)
}

pub fn write_convergence(path: &Path, trace: &[f64]) -> Result<(), ExperimentError> {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        sum_rate: f64,
    }
    create_parent(path)?;
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (i, &sum_rate) in trace.iter().enumerate() {
        w.serialize(Row { iteration: i + 1, sum_rate }).map_err(csv_err)?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Serializable view of a [`SolveReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub scheme: String,
    pub seed: u64,
    pub sum_rate: f64,
    pub initial_rate: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub safeguard_rejections: usize,
    pub trace: Vec<f64>,
    pub power: Vec<f64>,
    pub surface: StarConfig,
    /// Combiners as `[re, im]` pairs, one inner list per antenna row.
    pub beamformer: Vec<Vec<[f64; 2]>>,
    /// Per-iteration block times, present only with timing enabled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_timings: Option<Vec<crate::bcd::BlockTimings>>,
}

impl ReportJson {
    pub fn new(rep: &SolveReport, seed: u64, timing: bool) -> Self {
        let w = &rep.final_state.beam.w;
        Self {
            scheme: rep.scheme.tag().to_string(),
            seed,
            sum_rate: rep.sum_rate(),
            initial_rate: rep.initial_rate,
            iterations: rep.iterations,
            termination: rep.termination,
            safeguard_rejections: rep.safeguard_rejections,
            trace: rep.trace.clone(),
            power: rep.final_state.power.p.clone(),
            surface: rep.final_state.star.clone(),
            beamformer: (0..w.rows()).map(|r| w.row(r).iter().map(|z| [z.re, z.im]).collect()).collect(),
            block_timings: timing.then(|| rep.block_timings.clone()),
        }
    }
}

/// Solves trial `seed` with each scheme and writes `<dir>/<tag>.json` plus a
/// `<dir>/results.csv` summary.
pub fn simulate(
    cfg: &SystemConfig,
    seed: u64,
    schemes: &[Scheme],
    dir: &Path,
    timing: bool,
) -> Result<Vec<ResultRow>, ExperimentError> {
    if schemes.is_empty() {
        return Err(ExperimentError::Spec("no schemes selected".into()));
    }
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for &scheme in schemes {
        let (rep, ms) = solve_timed(scheme, cfg, seed).map_err(|source| ExperimentError::Trial {
            scheme,
            seed,
            param: "none".into(),
            value: 0.0,
            source,
        })?;
        let path = dir.join(format!("{}.json", scheme.tag()));
        let mut text = serde_json::to_string_pretty(&ReportJson::new(&rep, seed, timing))?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| ExperimentError::Io { path, source })?;
        rows.push(ResultRow {
            scheme: scheme.tag().to_string(),
            seed,
            param: "none".into(),
            value: 0.0,
            sum_rate: rep.sum_rate(),
            iterations: rep.iterations,
            runtime_ms: if timing { ms } else { 0.0 },
        });
    }
    write_rows(&dir.join("results.csv"), &rows)?;
    Ok(rows)
}
