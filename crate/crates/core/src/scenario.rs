//! Geometry, path loss and seeded Rayleigh channel draws.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{CMatrix, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("user index {index} out of range (U = {users})")]
    IndexOutOfRange { index: usize, users: usize },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid configuration: {0}")]
    Validation(String),
}

/// Which side of the surface a user sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Transmission side.
    A,
    /// Reflection side.
    B,
}

impl Group {
    pub fn opposite(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcParams {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Also run the loop from the best box vertex and keep the better result.
    pub vertex_start: bool,
}

impl Default for DcParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer: 100,
            max_inner: 500,
            vertex_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchParams {
    pub restarts: usize,
    /// Cap on improving moves per restart.
    pub max_flips: usize,
}

impl Default for LocalSearchParams {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_flips: 10_000,
        }
    }
}

/// Every scenario and solver parameter, in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// AP antennas (M).
    pub antennas: usize,
    /// Surface elements (N).
    pub elements: usize,
    pub users_a: usize,
    pub users_b: usize,
    /// Phase quantization levels (Q).
    pub levels: usize,
    /// Per-user power budget, watts.
    pub p_max: f64,
    /// Positivity floor for the power box, watts.
    pub p_min: f64,
    /// Noise variance, watts.
    pub sigma2: f64,
    /// Path-loss reference gain at 1 m (linear).
    pub rho: f64,
    pub alpha_pl: f64,
    pub ap_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub center_a: [f64; 2],
    pub center_b: [f64; 2],
    pub radius: f64,
    /// Outer loop tolerance, bits/s/Hz.
    pub epsilon: f64,
    pub max_bcd_iters: usize,
    pub dc: DcParams,
    /// Amplitude problems with at most this many elements are solved exactly.
    pub n_exact: usize,
    pub ls: LocalSearchParams,
    /// Element-wise refinement sweeps after the projected surface update (0 = off).
    pub refine_sweeps: usize,
    /// Sweeps of discrete coordinate ascent on the true rate after the
    /// surface update (0 = off).
    pub polish_sweeps: usize,
    /// Offer the linear MMSE combiner next to the quadratic-transform update.
    pub mmse_combiner: bool,
    /// Starting points for schemes that optimize the surface; the first is
    /// the standard initialization, the rest use random surfaces.
    pub starts: usize,
    /// Key of the random generator; trials select substreams under it.
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let p_max = 0.1;
        Self {
            antennas: 4,
            elements: 64,
            users_a: 4,
            users_b: 4,
            levels: 8,
            p_max,
            p_min: 1e-6 * p_max,
            sigma2: dbm_to_watts(-100.0),
            rho: db_to_linear(-20.0),
            alpha_pl: 2.5,
            ap_pos: [0.0, 0.0],
            ris_pos: [75.0, 25.0],
            center_a: [100.0, 0.0],
            center_b: [75.0, 50.0],
            radius: 20.0,
            epsilon: 1e-4,
            max_bcd_iters: 1000,
            dc: DcParams::default(),
            n_exact: 16,
            ls: LocalSearchParams::default(),
            refine_sweeps: 50,
            polish_sweeps: 20,
            mmse_combiner: true,
            starts: 16,
            seed: 0,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Minimum number of elements each side must receive, `⌈N/3⌉`.
pub fn min_side_elements(n: usize) -> usize {
    n.div_ceil(3)
}

impl SystemConfig {
    /// Laptop-scale variant used by the sweep defaults.
    pub fn desk() -> Self {
        Self {
            elements: 16,
            max_bcd_iters: 200,
            ..Self::default()
        }
    }

    pub fn users(&self) -> usize {
        self.users_a + self.users_b
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: &str| Err(ScenarioError::Validation(msg.to_string()));
        if self.antennas < 1 {
            return fail("M >= 1 (antennas)");
        }
        if self.elements < 2 {
            return fail("N >= 2 (elements)");
        }
        if self.levels < 2 {
            return fail("Q >= 2 (levels)");
        }
        if !(self.p_min > 0.0 && self.p_min < self.p_max && self.p_max.is_finite()) {
            return fail("0 < p_min < p_max");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return fail("sigma2 > 0");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail("rho > 0");
        }
        if !(self.alpha_pl > 0.0 && self.alpha_pl.is_finite()) {
            return fail("alpha_pl > 0");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon > 0");
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return fail("radius >= 0");
        }
        if 2 * min_side_elements(self.elements) > self.elements {
            return fail("2*ceil(N/3) <= N");
        }
        if !(self.dc.tol > 0.0) || self.dc.max_outer == 0 || self.dc.max_inner == 0 {
            return fail("dc.tol > 0, dc.max_outer >= 1, dc.max_inner >= 1");
        }
        if self.starts == 0 {
            return fail("starts >= 1");
        }
        if self.max_bcd_iters == 0 {
            return fail("max_bcd_iters >= 1");
        }
        Ok(())
    }

    /// Group of a 0-based user index: the first `users_a` users are on the
    /// transmission side.
    pub fn group_of(&self, user: usize) -> Result<Group, ScenarioError> {
        group_of(user, self.users_a, self.users())
    }
}

pub fn group_of(user: usize, users_a: usize, users: usize) -> Result<Group, ScenarioError> {
    if user >= users {
        return Err(ScenarioError::IndexOutOfRange { index: user, users });
    }
    Ok(if user < users_a { Group::A } else { Group::B })
}

pub fn path_loss(distance: f64, rho: f64, alpha_pl: f64) -> Result<f64, ScenarioError> {
    if !(distance > 0.0) {
        return Err(ScenarioError::NonPositiveDistance(distance));
    }
    Ok(rho * distance.powf(-alpha_pl))
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Substreams of the per-trial generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 0,
    Init = 1,
    Scheme = 2,
    LocalSearch = 3,
    /// Surfaces for the extra starting points.
    Restart = 4,
}

/// Generator for `(key, trial, purpose)`.
///
/// ChaCha20 is counter based: the key comes from the configuration seed and
/// every `(trial, purpose)` pair gets its own 64-bit stream id, so any trial
/// can be regenerated without replaying the ones before it.
pub fn trial_rng(key: u64, trial: u64, purpose: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(key);
    rng.set_stream(trial.wrapping_mul(16).wrapping_add(purpose as u64));
    rng
}

/// Circularly-symmetric unit-variance complex Gaussian sample.
pub fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// User positions: group A on the circle around `center_a`, then group B.
pub fn place_users(cfg: &SystemConfig, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let on_circle = |center: [f64; 2], rng: &mut dyn rand::RngCore| {
        let angle: f64 = rng.gen_range(0.0..2.0 * PI);
        [center[0] + cfg.radius * angle.cos(), center[1] + cfg.radius * angle.sin()]
    };
    let mut out = Vec::with_capacity(cfg.users());
    for _ in 0..cfg.users_a {
        out.push(on_circle(cfg.center_a, rng));
    }
    for _ in 0..cfg.users_b {
        out.push(on_circle(cfg.center_b, rng));
    }
    out
}

/// One fading realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Surface → AP, N×M.
    pub h: CMatrix,
    /// User → surface on the transmission side, U×N; rows of group B are zero.
    pub h_t: CMatrix,
    /// User → surface on the reflection side, U×N; rows of group A are zero.
    pub h_r: CMatrix,
    pub users_a: usize,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h_t.rows()
    }

    pub fn elements(&self) -> usize {
        self.h.rows()
    }

    pub fn antennas(&self) -> usize {
        self.h.cols()
    }

    pub fn group(&self, user: usize) -> Group {
        if user < self.users_a {
            Group::A
        } else {
            Group::B
        }
    }

    /// The user's channel row on its resident side.
    pub fn resident_row(&self, user: usize) -> &[C64] {
        match self.group(user) {
            Group::A => self.h_t.row(user),
            Group::B => self.h_r.row(user),
        }
    }

    pub fn zeros(cfg: &SystemConfig) -> Self {
        Self {
            h: CMatrix::zeros(cfg.elements, cfg.antennas),
            h_t: CMatrix::zeros(cfg.users(), cfg.elements),
            h_r: CMatrix::zeros(cfg.users(), cfg.elements),
            users_a: cfg.users_a,
        }
    }

    pub fn is_valid(&self) -> bool {
        let zero = C64::new(0.0, 0.0);
        self.h.is_finite()
            && self.h_t.is_finite()
            && self.h_r.is_finite()
            && self.h_t.rows() == self.h_r.rows()
            && self.h_t.cols() == self.h.rows()
            && self.h_r.cols() == self.h.rows()
            && (0..self.users()).all(|u| match self.group(u) {
                Group::A => self.h_r.row(u).iter().all(|&z| z == zero),
                Group::B => self.h_t.row(u).iter().all(|&z| z == zero),
            })
    }
}

pub fn draw_channels(cfg: &SystemConfig, positions: &[[f64; 2]], rng: &mut impl Rng) -> ChannelSet {
    assert_eq!(positions.len(), cfg.users(), "one position per user");
    let mut ch = ChannelSet::zeros(cfg);
    // Degenerate geometries (user on top of the surface) fall back to d = 1 m.
    let gain = |d: f64| path_loss(d, cfg.rho, cfg.alpha_pl).unwrap_or(cfg.rho).sqrt();

    let g_ap = gain(distance(cfg.ris_pos, cfg.ap_pos));
    for n in 0..cfg.elements {
        for m in 0..cfg.antennas {
            ch.h[(n, m)] = complex_gaussian(rng) * g_ap;
        }
    }
    for (u, &pos) in positions.iter().enumerate() {
        let g = gain(distance(pos, cfg.ris_pos));
        let target = if u < cfg.users_a { &mut ch.h_t } else { &mut ch.h_r };
        for n in 0..cfg.elements {
            target[(u, n)] = complex_gaussian(rng) * g;
        }
    }
    ch
}

/// Positions and channels for one trial, drawn from the trial's scenario substream.
pub fn draw_trial(cfg: &SystemConfig, trial: u64) -> ChannelSet {
    let mut rng = trial_rng(cfg.seed, trial, Stream::Scenario);
    let positions = place_users(cfg, &mut rng);
    draw_channels(cfg, &positions, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_follow_boundary() {
        // 1-based u = 4 and u = 5 with U_A = 4
        assert_eq!(group_of(3, 4, 8).unwrap(), Group::A);
        assert_eq!(group_of(4, 4, 8).unwrap(), Group::B);
        assert_eq!(group_of(0, 0, 3).unwrap(), Group::B);
        assert_eq!(group_of(0, 4, 8).unwrap().opposite(), Group::B);
        assert!(matches!(group_of(8, 4, 8), Err(ScenarioError::IndexOutOfRange { .. })));
    }

    #[test]
    fn path_loss_values() {
        assert!((path_loss(1.0, 0.01, 2.5).unwrap() - 0.01).abs() < 1e-18);
        assert!((path_loss(100.0, 0.01, 2.5).unwrap() - 1.0e-7).abs() < 1e-20);
        assert_eq!(path_loss(4.0, 1.0, 2.0).unwrap(), 0.0625);
        assert!(matches!(path_loss(0.0, 1.0, 2.0), Err(ScenarioError::NonPositiveDistance(_))));
        assert!(path_loss(-3.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-27);
        assert!((db_to_linear(-20.0) - 0.01).abs() < 1e-16);
    }

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
        SystemConfig::desk().validate().unwrap();
        let bad = SystemConfig { levels: 1, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SystemConfig { p_min: 0.2, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_radius_puts_users_at_centers() {
        let cfg = SystemConfig { radius: 0.0, ..SystemConfig::default() };
        let pos = place_users(&cfg, &mut trial_rng(1, 0, Stream::Scenario));
        assert!(pos[..4].iter().all(|p| *p == cfg.center_a));
        assert!(pos[4..].iter().all(|p| *p == cfg.center_b));
    }

    #[test]
    fn users_lie_on_their_circles() {
        let cfg = SystemConfig::default();
        let pos = place_users(&cfg, &mut trial_rng(3, 7, Stream::Scenario));
        for (u, p) in pos.iter().enumerate() {
            let c = if u < cfg.users_a { cfg.center_a } else { cfg.center_b };
            assert!((distance(*p, c) - cfg.radius).abs() < 1e-9);
        }
    }

    #[test]
    fn angles_are_uniform() {
        let cfg = SystemConfig { users_a: 1, users_b: 0, ..SystemConfig::default() };
        let mut rng = trial_rng(9, 0, Stream::Scenario);
        let mut angles: Vec<f64> = (0..10_000)
            .map(|_| {
                let p = place_users(&cfg, &mut rng)[0];
                let a = (p[1] - cfg.center_a[1]).atan2(p[0] - cfg.center_a[0]);
                (a + 2.0 * PI) % (2.0 * PI) / (2.0 * PI)
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        let n = angles.len() as f64;
        let ks = angles
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn region_rows_are_zero() {
        let cfg = SystemConfig { users_a: 1, users_b: 0, elements: 8, ..SystemConfig::default() };
        let ch = draw_trial(&cfg, 0);
        assert!(ch.h_r.row(0).iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(ch.h_t.row(0).iter().any(|z| *z != C64::new(0.0, 0.0)));
        let ch = draw_trial(&SystemConfig::desk(), 4);
        assert!(ch.is_valid());
    }

    #[test]
    fn channel_power_matches_path_loss() {
        let cfg = SystemConfig { elements: 4, ..SystemConfig::default() };
        let d = distance(cfg.ris_pos, cfg.ap_pos);
        assert!((d - 79.0569).abs() < 1e-3);
        let expected = path_loss(d, cfg.rho, cfg.alpha_pl).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for trial in 0..10_000 {
            let ch = draw_trial(&cfg, trial);
            acc += ch.h.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>();
            count += ch.h.as_slice().len();
        }
        let mean = acc / count as f64;
        assert!((mean / expected - 1.0).abs() < 0.03, "{mean} vs {expected}");
    }

    #[test]
    fn same_seed_same_channels() {
        let cfg = SystemConfig::desk();
        assert_eq!(draw_trial(&cfg, 12), draw_trial(&cfg, 12));
        assert_ne!(draw_trial(&cfg, 12), draw_trial(&cfg, 13));
    }
}
