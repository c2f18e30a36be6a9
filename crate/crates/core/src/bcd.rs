//! Block coordinate ascent over power, surface and combiners, and the
//! benchmark schemes that freeze some of the blocks.
//!
//! Every block proposes a candidate and the candidate is kept only if the
//! true sum rate does not drop. Phase projection and the amplitude search are
//! not ascent steps on their own, so this acceptance rule is what makes the
//! rate trace monotone.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam_opt::{mmse_combiner, optimize_beamforming, BeamSubproblem};
use crate::model::{
    effective_channels, update_auxiliaries_from, Auxiliaries, Beamformer, LinkGains, ModelError, PowerAlloc,
    StarConfig,
};
use crate::numerics::{norm, CMatrix, NumericsError, C64};
use crate::power_dc::{optimize_power_from, PowerBox};
use crate::scenario::{complex_gaussian, min_side_elements, trial_rng, ChannelSet, Stream, SystemConfig};
use crate::star_opt::{polish_star, random_feasible_mask, update_star, StarError, StarUpdateOptions};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Star(#[from] StarError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Proposed,
    /// Random active beamforming matrix.
    Rabm,
    /// Random surface vectors.
    Rsv,
    RabmRsv,
    /// Fixed half/half element split.
    Fstar,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Proposed, Scheme::Rabm, Scheme::Rsv, Scheme::RabmRsv, Scheme::Fstar];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Rabm => "rabm",
            Scheme::Rsv => "rsv",
            Scheme::RabmRsv => "rabm_rsv",
            Scheme::Fstar => "fstar",
        }
    }

    fn optimizes_beam(self) -> bool {
        matches!(self, Scheme::Proposed | Scheme::Rsv | Scheme::Fstar)
    }

    fn optimizes_star(self) -> bool {
        matches!(self, Scheme::Proposed | Scheme::Rabm | Scheme::Fstar)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "proposed" => Ok(Scheme::Proposed),
            "rabm" => Ok(Scheme::Rabm),
            "rsv" => Ok(Scheme::Rsv),
            "rabm_rsv" => Ok(Scheme::RabmRsv),
            "fstar" | "f_star" => Ok(Scheme::Fstar),
            other => Err(format!("unknown scheme '{other}' (expected proposed, rabm, rsv, rabm_rsv, fstar)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Wall-clock milliseconds spent in each block during one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockTimings {
    pub power_ms: f64,
    pub aux_ms: f64,
    pub star_ms: f64,
    pub beam_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveState {
    pub power: PowerAlloc,
    pub star: StarConfig,
    pub beam: Beamformer,
    pub aux: Auxiliaries,
}

impl SolveState {
    /// Checks every constraint of the joint problem.
    pub fn check_feasible(&self, cfg: &SystemConfig) -> Result<(), String> {
        self.star.check().map_err(|e| e.to_string())?;
        if self.star.levels != cfg.levels {
            return Err("phase grid does not match Q".into());
        }
        if !self.power.is_feasible(cfg.p_min, cfg.p_max) {
            return Err(format!("power outside [{}, {}]", cfg.p_min, cfg.p_max));
        }
        if self.beam.frobenius_sqr() > 1.0 + crate::model::BEAM_NORM_SLACK {
            return Err(format!("||W||_F^2 = {}", self.beam.frobenius_sqr()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub scheme: Scheme,
    /// Sum rate after each iteration.
    pub trace: Vec<f64>,
    /// Sum rate of the initial point.
    pub initial_rate: f64,
    pub final_state: SolveState,
    pub iterations: usize,
    pub termination: Termination,
    pub block_timings: Vec<BlockTimings>,
    pub safeguard_rejections: usize,
}

impl SolveReport {
    pub fn sum_rate(&self) -> f64 {
        self.trace.last().copied().unwrap_or(self.initial_rate)
    }
}

fn normalize_frobenius(w: &mut CMatrix) {
    let f = w.frobenius_norm();
    if f > 0.0 {
        *w = w.scale(1.0 / f);
    }
}

/// Full power, alternating element split with zero phases, and matched
/// filters scaled to unit Frobenius norm. Users whose effective channel is
/// zero get a random unit combiner instead.
pub fn initialize(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    rng: &mut impl Rng,
) -> Result<(PowerAlloc, StarConfig, Beamformer), SolveError> {
    let n = cfg.elements;
    let alpha_t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let star = StarConfig::new(alpha_t, vec![0; n], vec![0; n], cfg.levels)?;
    let power = PowerAlloc::uniform(cfg.users(), cfg.p_max);
    let beam = matched_filter(cfg, ch, &star, rng)?;
    Ok((power, star, beam))
}

fn matched_filter(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    star: &StarConfig,
    rng: &mut impl Rng,
) -> Result<Beamformer, SolveError> {
    let heff = effective_channels(ch, star)?;
    let mut w = CMatrix::zeros(cfg.antennas, cfg.users());
    for u in 0..cfg.users() {
        let h = heff.row(u);
        let nh = norm(h);
        let col: Vec<C64> = if nh > 0.0 {
            h.iter().map(|z| z.conj() / nh).collect()
        } else {
            let g: Vec<C64> = (0..cfg.antennas).map(|_| complex_gaussian(rng)).collect();
            let ng = norm(&g);
            g.iter().map(|z| z / ng).collect()
        };
        w.set_column(u, &col);
    }
    normalize_frobenius(&mut w);
    Ok(Beamformer::new(w)?)
}

pub fn random_beamformer(cfg: &SystemConfig, rng: &mut impl Rng) -> Beamformer {
    let mut w = CMatrix::from_fn(cfg.antennas, cfg.users(), |_, _| complex_gaussian(rng));
    normalize_frobenius(&mut w);
    Beamformer { w }
}

pub fn random_star(cfg: &SystemConfig, rng: &mut impl Rng) -> StarConfig {
    let n = cfg.elements;
    let theta_t = (0..n).map(|_| rng.gen_range(0..cfg.levels)).collect();
    let theta_r = (0..n).map(|_| rng.gen_range(0..cfg.levels)).collect();
    let alpha_t = random_feasible_mask(n, rng);
    StarConfig {
        alpha_t,
        theta_t,
        theta_r,
        levels: cfg.levels,
    }
}

/// First `⌈N/2⌉` elements on the transmission side.
pub fn fixed_split(n: usize) -> Vec<bool> {
    let half = n.div_ceil(2).max(min_side_elements(n));
    (0..n).map(|i| i < half).collect()
}

fn rate_of(ch: &ChannelSet, star: &StarConfig, w: &Beamformer, p: &[f64], sigma2: f64) -> Result<(f64, CMatrix), SolveError> {
    let heff = effective_channels(ch, star)?;
    let r = LinkGains::new(&heff, w, sigma2).sum_rate(p);
    Ok((r, heff))
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs one scheme on one channel draw. All randomness comes from the
/// substreams of `trial` under `cfg.seed`.
///
/// Schemes that optimize the surface are run from `cfg.starts` starting
/// points and the best final rate is reported (ties go to the earlier start).
pub fn run_scheme(scheme: Scheme, cfg: &SystemConfig, ch: &ChannelSet, trial: u64) -> Result<SolveReport, SolveError> {
    cfg.validate().map_err(|e| SolveError::Config(e.to_string()))?;
    if ch.users() != cfg.users() || ch.elements() != cfg.elements || ch.antennas() != cfg.antennas {
        return Err(SolveError::Config("channel dimensions do not match the configuration".into()));
    }
    let starts = if scheme.optimizes_star() { cfg.starts } else { 1 };
    let mut restart_rng = trial_rng(cfg.seed, trial, Stream::Restart);
    let mut best = run_from(scheme, cfg, ch, trial, None)?;
    for _ in 1..starts {
        let mut surface = random_star(cfg, &mut restart_rng);
        if scheme == Scheme::Fstar {
            surface.alpha_t = fixed_split(cfg.elements);
        }
        let rep = run_from(scheme, cfg, ch, trial, Some(surface))?;
        if rep.sum_rate() > best.sum_rate() {
            best = rep;
        }
    }
    Ok(best)
}

fn run_from(
    scheme: Scheme,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    trial: u64,
    surface: Option<StarConfig>,
) -> Result<SolveReport, SolveError> {
    let mut init_rng = trial_rng(cfg.seed, trial, Stream::Init);
    let mut scheme_rng = trial_rng(cfg.seed, trial, Stream::Scheme);
    let mut ls_rng = trial_rng(cfg.seed, trial, Stream::LocalSearch);

    let (mut power, mut star, mut beam) = initialize(cfg, ch, &mut init_rng)?;
    if let Some(s) = surface {
        star = s;
        beam = matched_filter(cfg, ch, &star, &mut init_rng)?;
    }
    let mut fixed_alpha = None;
    match scheme {
        Scheme::Proposed => {}
        Scheme::Rabm => beam = random_beamformer(cfg, &mut scheme_rng),
        Scheme::Rsv => {
            star = random_star(cfg, &mut scheme_rng);
            beam = matched_filter(cfg, ch, &star, &mut init_rng)?;
        }
        Scheme::RabmRsv => {
            star = random_star(cfg, &mut scheme_rng);
            beam = random_beamformer(cfg, &mut scheme_rng);
        }
        Scheme::Fstar => {
            let alpha = fixed_split(cfg.elements);
            if star.alpha_t != alpha {
                star = StarConfig::new(alpha.clone(), vec![0; cfg.elements], vec![0; cfg.elements], cfg.levels)?;
                beam = matched_filter(cfg, ch, &star, &mut init_rng)?;
            }
            fixed_alpha = Some(alpha);
        }
    }

    let bx = PowerBox {
        p_min: cfg.p_min,
        p_max: cfg.p_max,
    };
    let (mut rate, mut heff) = rate_of(ch, &star, &beam, &power.p, cfg.sigma2)?;
    let initial_rate = rate;
    let mut aux = update_auxiliaries_from(&LinkGains::new(&heff, &beam, cfg.sigma2), &power.p);
    let mut trace = Vec::new();
    let mut timings = Vec::new();
    let mut rejections = 0;
    let mut termination = Termination::MaxIters;

    for _ in 0..cfg.max_bcd_iters {
        let start_rate = rate;
        let mut t = BlockTimings::default();

        // power
        let clock = Instant::now();
        let gains = LinkGains::new(&heff, &beam, cfg.sigma2);
        let dc = optimize_power_from(&gains, &power, bx, &cfg.dc);
        let cand = gains.sum_rate(&dc.power.p);
        if cand >= rate {
            power = dc.power;
            rate = cand;
        } else {
            rejections += 1;
        }
        t.power_ms = ms_since(clock);

        // auxiliaries
        let clock = Instant::now();
        aux = update_auxiliaries_from(&gains, &power.p);
        t.aux_ms = ms_since(clock);

        // surface
        if scheme.optimizes_star() {
            let clock = Instant::now();
            let opts = StarUpdateOptions {
                fixed_alpha: fixed_alpha.as_deref(),
                n_exact: cfg.n_exact,
                ls: cfg.ls,
                refine_sweeps: cfg.refine_sweeps,
            };
            let mut cand_star = update_star(&power, &beam, &aux, ch, &star, &opts, &mut ls_rng)?;
            if cfg.polish_sweeps > 0 {
                cand_star = polish_star(
                    ch,
                    &cand_star,
                    &power,
                    &beam,
                    cfg.sigma2,
                    fixed_alpha.is_some(),
                    cfg.polish_sweeps,
                );
            }
            let (cand, cand_heff) = rate_of(ch, &cand_star, &beam, &power.p, cfg.sigma2)?;
            if cand >= rate {
                star = cand_star;
                rate = cand;
                heff = cand_heff;
                aux = update_auxiliaries_from(&LinkGains::new(&heff, &beam, cfg.sigma2), &power.p);
            } else {
                rejections += 1;
            }
            t.star_ms = ms_since(clock);
        }

        // combiners
        if scheme.optimizes_beam() {
            let clock = Instant::now();
            let sub = BeamSubproblem::new(&power, &aux, &heff);
            let sol = optimize_beamforming(&sub, cfg.sigma2)?;
            let mut cand_beam = sol.beamformer;
            let mut cand = LinkGains::new(&heff, &cand_beam, cfg.sigma2).sum_rate(&power.p);
            if cfg.mmse_combiner {
                let mmse = mmse_combiner(&power, &heff, cfg.sigma2)?;
                let r = LinkGains::new(&heff, &mmse, cfg.sigma2).sum_rate(&power.p);
                if r > cand {
                    cand_beam = mmse;
                    cand = r;
                }
            }
            if cand >= rate {
                beam = cand_beam;
                rate = cand;
            } else {
                rejections += 1;
            }
            t.beam_ms = ms_since(clock);
        }

        aux = update_auxiliaries_from(&LinkGains::new(&heff, &beam, cfg.sigma2), &power.p);
        trace.push(rate);
        timings.push(t);
        debug_assert!(SolveState {
            power: power.clone(),
            star: star.clone(),
            beam: beam.clone(),
            aux: aux.clone()
        }
        .check_feasible(cfg)
        .is_ok());
        if rate - start_rate <= cfg.epsilon {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(SolveReport {
        scheme,
        iterations: trace.len(),
        trace,
        initial_rate,
        final_state: SolveState { power, star, beam, aux },
        termination,
        block_timings: timings,
        safeguard_rejections: rejections,
    })
}

/// The proposed scheme: every block optimized.
pub fn bcd_solve(cfg: &SystemConfig, ch: &ChannelSet, trial: u64) -> Result<SolveReport, SolveError> {
    run_scheme(Scheme::Proposed, cfg, ch, trial)
}
