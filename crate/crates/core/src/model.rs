//! Surface configuration, effective channels, interference and rates, plus
//! the quadratic-transform reformulation with its auxiliary variables.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{dot, norm_sqr, CMatrix, C64};
use crate::scenario::{min_side_elements, ChannelSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid state: {0}")]
    Invalid(String),
}

/// Grid angle `2πq/Q`.
pub fn grid_angle(q: usize, levels: usize) -> f64 {
    2.0 * PI * q as f64 / levels as f64
}

/// Mode-switching surface state: each element serves exactly one side, with a
/// discrete phase per side stored as a grid index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StarConfig {
    /// `true` when the element serves the transmission side.
    pub alpha_t: Vec<bool>,
    pub theta_t: Vec<usize>,
    pub theta_r: Vec<usize>,
    pub levels: usize,
}

impl StarConfig {
    pub fn new(
        alpha_t: Vec<bool>,
        theta_t: Vec<usize>,
        theta_r: Vec<usize>,
        levels: usize,
    ) -> Result<Self, ModelError> {
        let s = Self {
            alpha_t,
            theta_t,
            theta_r,
            levels,
        };
        s.check()?;
        Ok(s)
    }

    pub fn elements(&self) -> usize {
        self.alpha_t.len()
    }

    pub fn transmit_count(&self) -> usize {
        self.alpha_t.iter().filter(|&&a| a).count()
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let n = self.elements();
        if self.theta_t.len() != n || self.theta_r.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "alpha has {n} entries, theta_t {}, theta_r {}",
                self.theta_t.len(),
                self.theta_r.len()
            )));
        }
        if self.levels < 2 {
            return Err(ModelError::Invalid("Q >= 2".into()));
        }
        if self.theta_t.iter().chain(&self.theta_r).any(|&q| q >= self.levels) {
            return Err(ModelError::Invalid("phase index off the Q-grid".into()));
        }
        let l = min_side_elements(n);
        let t = self.transmit_count();
        if t < l || n - t < l {
            return Err(ModelError::Invalid(format!(
                "coverage: {t} transmission / {} reflection elements, need >= {l} each",
                n - t
            )));
        }
        Ok(())
    }

    fn side_vector(&self, transmit: bool) -> Vec<C64> {
        let theta = if transmit { &self.theta_t } else { &self.theta_r };
        self.alpha_t
            .iter()
            .zip(theta)
            .map(|(&a, &q)| {
                if a == transmit {
                    C64::from_polar(1.0, grid_angle(q, self.levels))
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    /// `φᵗ_n = sqrt(αᵗ_n) e^{jθᵗ_n}`.
    pub fn phi_t(&self) -> Vec<C64> {
        self.side_vector(true)
    }

    /// `φʳ_n = sqrt(1 − αᵗ_n) e^{jθʳ_n}`.
    pub fn phi_r(&self) -> Vec<C64> {
        self.side_vector(false)
    }
}

/// Receive combiners, one column per user, inside the unit Frobenius ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub w: CMatrix,
}

pub const BEAM_NORM_SLACK: f64 = 1e-9;

impl Beamformer {
    pub fn new(w: CMatrix) -> Result<Self, ModelError> {
        let f = w.frobenius_norm();
        if !w.is_finite() || f * f > 1.0 + BEAM_NORM_SLACK {
            return Err(ModelError::Invalid(format!("||W||_F^2 = {} > 1", f * f)));
        }
        Ok(Self { w })
    }

    pub fn column(&self, u: usize) -> Vec<C64> {
        self.w.column(u)
    }

    pub fn users(&self) -> usize {
        self.w.cols()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        norm_sqr(self.w.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAlloc {
    pub p: Vec<f64>,
}

impl PowerAlloc {
    pub fn uniform(users: usize, value: f64) -> Self {
        Self { p: vec![value; users] }
    }

    pub fn is_feasible(&self, p_min: f64, p_max: f64) -> bool {
        self.p.iter().all(|&p| p >= p_min && p <= p_max)
    }
}

/// Quadratic-transform auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Auxiliaries {
    /// SINR surrogate per user.
    pub mu: Vec<f64>,
    pub lambda: Vec<C64>,
}

/// `h_u = Σ_X hˣ_u diag(φˣ) H` for one user.
pub fn effective_channel(ch: &ChannelSet, star: &StarConfig, u: usize) -> Result<Vec<C64>, ModelError> {
    if star.elements() != ch.elements() {
        return Err(ModelError::DimensionMismatch(format!(
            "surface has {} elements, channels {}",
            star.elements(),
            ch.elements()
        )));
    }
    if u >= ch.users() {
        return Err(ModelError::DimensionMismatch(format!("user {u} of {}", ch.users())));
    }
    let phi_t = star.phi_t();
    let phi_r = star.phi_r();
    let cascade: Vec<C64> = (0..ch.elements())
        .map(|n| ch.h_t[(u, n)] * phi_t[n] + ch.h_r[(u, n)] * phi_r[n])
        .collect();
    Ok(ch.h.row_mul(&cascade))
}

/// All effective channels as a U×M matrix, row `u` being `h_u`.
pub fn effective_channels(ch: &ChannelSet, star: &StarConfig) -> Result<CMatrix, ModelError> {
    let mut out = CMatrix::zeros(ch.users(), ch.antennas());
    for u in 0..ch.users() {
        let hu = effective_channel(ch, star, u)?;
        out.row_mut(u).copy_from_slice(&hu);
    }
    Ok(out)
}

/// Cached products `h_m w_u` for a fixed (Heff, W): everything the rate
/// formulas need besides the powers.
#[derive(Debug, Clone)]
pub struct LinkGains {
    users: usize,
    /// `h_m w_u`, indexed `[m * U + u]`.
    prod: Vec<C64>,
    /// `σ² ‖w_u‖²`.
    noise: Vec<f64>,
}

impl LinkGains {
    pub fn new(heff: &CMatrix, w: &Beamformer, sigma2: f64) -> Self {
        let users = heff.rows();
        assert_eq!(w.users(), users, "one combiner per user");
        assert_eq!(w.w.rows(), heff.cols(), "antenna count");
        let cols: Vec<Vec<C64>> = (0..users).map(|u| w.column(u)).collect();
        let mut prod = Vec::with_capacity(users * users);
        for m in 0..users {
            for wu in &cols {
                prod.push(dot(heff.row(m), wu));
            }
        }
        let noise = cols.iter().map(|c| sigma2 * norm_sqr(c)).collect();
        Self { users, prod, noise }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// `h_m w_u`.
    pub fn product(&self, m: usize, u: usize) -> C64 {
        self.prod[m * self.users + u]
    }

    /// `|h_m w_u|²`.
    pub fn gain(&self, m: usize, u: usize) -> f64 {
        self.product(m, u).norm_sqr()
    }

    pub fn noise(&self, u: usize) -> f64 {
        self.noise[u]
    }

    pub fn interference(&self, u: usize, p: &[f64]) -> f64 {
        (0..self.users).filter(|&m| m != u).map(|m| p[m] * self.gain(m, u)).sum()
    }

    pub fn total_interference(&self, u: usize, p: &[f64]) -> f64 {
        (0..self.users).map(|m| p[m] * self.gain(m, u)).sum()
    }

    pub fn sinr(&self, u: usize, p: &[f64]) -> f64 {
        let den = self.interference(u, p) + self.noise[u];
        if den > 0.0 {
            p[u] * self.gain(u, u) / den
        } else {
            // w_u = 0: the user is switched off
            0.0
        }
    }

    pub fn rate(&self, u: usize, p: &[f64]) -> f64 {
        self.sinr(u, p).ln_1p() / std::f64::consts::LN_2
    }

    pub fn sum_rate(&self, p: &[f64]) -> f64 {
        (0..self.users).map(|u| self.rate(u, p)).sum()
    }
}

/// Interference seen by user `u`: every other user's power through `w_u`.
pub fn interference(u: usize, power: &PowerAlloc, w: &Beamformer, heff: &CMatrix) -> f64 {
    let wu = w.column(u);
    (0..heff.rows())
        .filter(|&m| m != u)
        .map(|m| power.p[m] * dot(heff.row(m), &wu).norm_sqr())
        .sum()
}

/// Interference plus the user's own received power.
pub fn total_interference(u: usize, power: &PowerAlloc, w: &Beamformer, heff: &CMatrix) -> f64 {
    let wu = w.column(u);
    (0..heff.rows())
        .map(|m| power.p[m] * dot(heff.row(m), &wu).norm_sqr())
        .sum()
}

/// Achievable sum rate in bits/s/Hz.
pub fn sum_rate(
    power: &PowerAlloc,
    star: &StarConfig,
    w: &Beamformer,
    ch: &ChannelSet,
    sigma2: f64,
) -> Result<f64, ModelError> {
    let heff = effective_channels(ch, star)?;
    Ok(LinkGains::new(&heff, w, sigma2).sum_rate(&power.p))
}

pub fn update_auxiliaries_from(gains: &LinkGains, p: &[f64]) -> Auxiliaries {
    let users = gains.users();
    let mut mu = Vec::with_capacity(users);
    let mut lambda = Vec::with_capacity(users);
    for u in 0..users {
        let m = gains.sinr(u, p);
        let den = gains.total_interference(u, p) + gains.noise(u);
        let l = if den > 0.0 {
            gains.product(u, u) * ((1.0 + m).sqrt() * p[u].sqrt() / den)
        } else {
            C64::new(0.0, 0.0)
        };
        mu.push(m);
        lambda.push(l);
    }
    Auxiliaries { mu, lambda }
}

/// Optimal auxiliaries at the current state: `μ_u` is the SINR and `λ_u`
/// the matching quadratic-transform multiplier.
pub fn update_auxiliaries(
    power: &PowerAlloc,
    star: &StarConfig,
    w: &Beamformer,
    ch: &ChannelSet,
    sigma2: f64,
) -> Result<Auxiliaries, ModelError> {
    let heff = effective_channels(ch, star)?;
    Ok(update_auxiliaries_from(&LinkGains::new(&heff, w, sigma2), &power.p))
}

pub fn fp_objective_from(gains: &LinkGains, p: &[f64], aux: &Auxiliaries) -> f64 {
    (0..gains.users())
        .map(|u| {
            let mu = aux.mu[u];
            let lam = aux.lambda[u];
            let signal = gains.product(u, u) * p[u].sqrt();
            let d = gains.total_interference(u, p) + gains.noise(u);
            mu.ln_1p() / std::f64::consts::LN_2 - mu + 2.0 * (1.0 + mu).sqrt() * (lam.conj() * signal).re
                - lam.norm_sqr() * d
        })
        .sum()
}

/// Quadratic-transform objective; equals [`sum_rate`] when `aux` comes from
/// [`update_auxiliaries`] at the same state.
pub fn fp_objective(
    power: &PowerAlloc,
    star: &StarConfig,
    w: &Beamformer,
    aux: &Auxiliaries,
    ch: &ChannelSet,
    sigma2: f64,
) -> Result<f64, ModelError> {
    let heff = effective_channels(ch, star)?;
    Ok(fp_objective_from(&LinkGains::new(&heff, w, sigma2), &power.p, aux))
}
