//! TOML configuration files.
//!
//! System parameters sit at the top level; geometry and solver settings live
//! in `[geometry]` and `[solver]` (with `[solver.dc]` and `[solver.ls]`).
//! Every key is optional and falls back to the chosen preset. Short symbol
//! aliases (`M`, `N`, `Q`, `U_A`, ...) are accepted next to the long names,
//! and powers/gains may be given in dBm/dB instead of linear units.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::scenario::{db_to_linear, dbm_to_watts, SystemConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error{}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default(), field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}

/// Starting point that the file overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// Full-scale defaults: N = 64, 1000 iterations.
    #[default]
    Paper,
    /// Laptop scale: N = 16, 200 iterations.
    Desk,
}

impl Preset {
    pub fn base(self) -> SystemConfig {
        match self {
            Preset::Paper => SystemConfig::default(),
            Preset::Desk => SystemConfig::desk(),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(format!("unknown preset '{other}' (expected desk or paper)")),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(alias = "M")]
    antennas: Option<usize>,
    #[serde(alias = "N")]
    elements: Option<usize>,
    #[serde(alias = "U_A")]
    users_a: Option<usize>,
    #[serde(alias = "U_B")]
    users_b: Option<usize>,
    #[serde(alias = "Q")]
    levels: Option<usize>,
    p_max: Option<f64>,
    p_max_dbm: Option<f64>,
    p_min: Option<f64>,
    p_min_dbm: Option<f64>,
    sigma2: Option<f64>,
    noise_dbm: Option<f64>,
    rho: Option<f64>,
    rho_db: Option<f64>,
    alpha_pl: Option<f64>,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    ap_pos: Option<[f64; 2]>,
    ris_pos: Option<[f64; 2]>,
    #[serde(alias = "centerA")]
    center_a: Option<[f64; 2]>,
    #[serde(alias = "centerB")]
    center_b: Option<[f64; 2]>,
    radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    epsilon: Option<f64>,
    max_bcd_iters: Option<usize>,
    n_exact: Option<usize>,
    refine_sweeps: Option<usize>,
    polish_sweeps: Option<usize>,
    mmse_combiner: Option<bool>,
    starts: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    dc: RawDc,
    #[serde(default)]
    ls: RawLs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDc {
    tol: Option<f64>,
    max_outer: Option<usize>,
    max_inner: Option<usize>,
    vertex_start: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLs {
    restarts: Option<usize>,
    max_flips: Option<usize>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = ...` assignment, for errors raised after parsing.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn pick(text: &str, linear: Option<f64>, log: Option<f64>, names: (&str, &str), conv: fn(f64) -> f64) -> Result<Option<f64>, ConfigError> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(ConfigError::Parse {
            line: line_of_key(text, names.1),
            field: Some(names.1.to_string()),
            message: format!("`{}` and `{}` are mutually exclusive", names.0, names.1),
        }),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(conv(v))),
        (None, None) => Ok(None),
    }
}

/// Parses configuration text on top of `preset` and validates the result.
pub fn parse_config(text: &str, preset: Preset) -> Result<SystemConfig, ConfigError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
            .map(str::to_string);
        ConfigError::Parse {
            line: e.span().map(|s| line_of(text, s.start)),
            field,
            message,
        }
    })?;

    let mut cfg = preset.base();
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(cfg.antennas, raw.antennas);
    set!(cfg.elements, raw.elements);
    set!(cfg.users_a, raw.users_a);
    set!(cfg.users_b, raw.users_b);
    set!(cfg.levels, raw.levels);
    let ratio = cfg.p_min / cfg.p_max;
    if let Some(p) = pick(text, raw.p_max, raw.p_max_dbm, ("p_max", "p_max_dbm"), dbm_to_watts)? {
        cfg.p_max = p;
        // the floor follows the budget unless it is set explicitly
        cfg.p_min = ratio * p;
    }
    set!(cfg.p_min, pick(text, raw.p_min, raw.p_min_dbm, ("p_min", "p_min_dbm"), dbm_to_watts)?);
    set!(cfg.sigma2, pick(text, raw.sigma2, raw.noise_dbm, ("sigma2", "noise_dbm"), dbm_to_watts)?);
    set!(cfg.rho, pick(text, raw.rho, raw.rho_db, ("rho", "rho_db"), db_to_linear)?);
    set!(cfg.alpha_pl, raw.alpha_pl);

    let g = raw.geometry;
    set!(cfg.ap_pos, g.ap_pos);
    set!(cfg.ris_pos, g.ris_pos);
    set!(cfg.center_a, g.center_a);
    set!(cfg.center_b, g.center_b);
    set!(cfg.radius, g.radius);

    let s = raw.solver;
    set!(cfg.epsilon, s.epsilon);
    set!(cfg.max_bcd_iters, s.max_bcd_iters);
    set!(cfg.n_exact, s.n_exact);
    set!(cfg.refine_sweeps, s.refine_sweeps);
    set!(cfg.polish_sweeps, s.polish_sweeps);
    set!(cfg.mmse_combiner, s.mmse_combiner);
    set!(cfg.starts, s.starts);
    set!(cfg.seed, s.seed);
    set!(cfg.dc.tol, s.dc.tol);
    set!(cfg.dc.max_outer, s.dc.max_outer);
    set!(cfg.dc.max_inner, s.dc.max_inner);
    set!(cfg.dc.vertex_start, s.dc.vertex_start);
    set!(cfg.ls.restarts, s.ls.restarts);
    set!(cfg.ls.max_flips, s.ls.max_flips);

    cfg.validate().map_err(|e| match e {
        crate::scenario::ScenarioError::Validation(msg) => ConfigError::Validation(msg),
        other => ConfigError::Validation(other.to_string()),
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path, preset: Preset) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, preset)
}
