//! Power allocation by difference-of-concave programming.
//!
//! At fixed combiners and surface state the sum rate splits as
//! `F(P) = f₁(P) − f₂(P)` with
//! `f₁ = Σ_u log₂(𝒥ᵗᵒᵗ_u + σ²‖w_u‖²)` and `f₂ = Σ_u log₂(𝒥_u + σ²‖w_u‖²)`,
//! both concave in `P`. Each outer step linearizes `f₂` at the current point
//! and maximizes the resulting concave minorant over the power box.
//!
//! The inner solver works in the normalized variable `x = p / p_max`, so its
//! unit step and stopping threshold do not depend on the absolute power scale.
//!
//! The minorize-maximize loop only finds a local maximum, and in the
//! interference-limited regime the box corners are typical optima (for two
//! users the optimum is always a corner). The result is therefore the better
//! of two runs, one from `P_init` and one from the best box vertex.

use std::f64::consts::LN_2;

use crate::model::{Beamformer, LinkGains, PowerAlloc};
use crate::numerics::CMatrix;
use crate::scenario::DcParams;

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK_FACTOR: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const MIN_STEP: f64 = 1e-10;
const MAX_STEP: f64 = 1e10;
/// Up to this many users every box vertex is screened; above it only the
/// all-max vertex and the vertices with one user at the floor.
const MAX_VERTEX_USERS: usize = 10;

/// Closed power box `[p_min, p_max]` shared by all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBox {
    pub p_min: f64,
    pub p_max: f64,
}

impl PowerBox {
    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.p_min, self.p_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcState {
    pub power: PowerAlloc,
    /// `F(P) = f₁(P) − f₂(P)`, the sum rate at the returned powers.
    pub f_value: f64,
    pub outer_iter: usize,
    /// `F` after every accepted outer step, starting with `F(P_init)`.
    pub trace: Vec<f64>,
    /// Outer steps whose inner solve stopped at the iteration cap.
    pub inner_capped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolve {
    pub power: PowerAlloc,
    pub iterations: usize,
    pub converged: bool,
}

// Users whose combiner is zero carry no rate and are left out of both sums.
fn active(gains: &LinkGains, u: usize) -> bool {
    gains.noise(u) > 0.0
}

pub fn f1(gains: &LinkGains, p: &[f64]) -> f64 {
    (0..gains.users())
        .filter(|&u| active(gains, u))
        .map(|u| (gains.total_interference(u, p) + gains.noise(u)).log2())
        .sum()
}

pub fn f2(gains: &LinkGains, p: &[f64]) -> f64 {
    (0..gains.users())
        .filter(|&u| active(gains, u))
        .map(|u| (gains.interference(u, p) + gains.noise(u)).log2())
        .sum()
}

pub fn objective(gains: &LinkGains, p: &[f64]) -> f64 {
    f1(gains, p) - f2(gains, p)
}

pub fn grad_f1(gains: &LinkGains, p: &[f64]) -> Vec<f64> {
    let users = gains.users();
    let den: Vec<f64> = (0..users)
        .map(|u| LN_2 * (gains.total_interference(u, p) + gains.noise(u)))
        .collect();
    (0..users)
        .map(|m| {
            (0..users)
                .filter(|&u| active(gains, u))
                .map(|u| gains.gain(m, u) / den[u])
                .sum()
        })
        .collect()
}

/// `∂f₂/∂p_m = Σ_{u≠m} |h_m w_u|² / (ln2 (𝒥_u + σ²‖w_u‖²))`.
pub fn grad_f2_from(gains: &LinkGains, p: &[f64]) -> Vec<f64> {
    let users = gains.users();
    let den: Vec<f64> = (0..users)
        .map(|u| LN_2 * (gains.interference(u, p) + gains.noise(u)))
        .collect();
    (0..users)
        .map(|m| {
            (0..users)
                .filter(|&u| u != m && active(gains, u))
                .map(|u| gains.gain(m, u) / den[u])
                .sum()
        })
        .collect()
}

pub fn grad_f2(power: &PowerAlloc, w: &Beamformer, heff: &CMatrix, sigma2: f64) -> Vec<f64> {
    grad_f2_from(&LinkGains::new(heff, w, sigma2), &power.p)
}

/// The concave minorant of `F` built at `p_prev`.
#[derive(Debug, Clone)]
pub struct Surrogate<'a> {
    gains: &'a LinkGains,
    p_prev: Vec<f64>,
    f2_prev: f64,
    grad_prev: Vec<f64>,
}

impl<'a> Surrogate<'a> {
    pub fn new(gains: &'a LinkGains, p_prev: &[f64]) -> Self {
        Self {
            gains,
            p_prev: p_prev.to_vec(),
            f2_prev: f2(gains, p_prev),
            grad_prev: grad_f2_from(gains, p_prev),
        }
    }

    /// `f₁(P) − f₂(P_prev) − ⟨∇f₂(P_prev), P − P_prev⟩`.
    pub fn value(&self, p: &[f64]) -> f64 {
        let lin: f64 = self
            .grad_prev
            .iter()
            .zip(p.iter().zip(&self.p_prev))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        f1(self.gains, p) - self.f2_prev - lin
    }

    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        grad_f1(self.gains, p)
            .iter()
            .zip(&self.grad_prev)
            .map(|(a, b)| a - b)
            .collect()
    }
}

pub fn dc_inner_solve_from(gains: &LinkGains, p_prev: &[f64], bx: PowerBox, max_inner: usize) -> InnerSolve {
    let users = p_prev.len();
    let s = Surrogate::new(gains, p_prev);
    let scale = bx.p_max;
    let proj = |p: f64| bx.clamp(p);

    let mut p: Vec<f64> = p_prev.iter().map(|&v| proj(v)).collect();
    let mut val = s.value(&p);
    let tol = 1e-8 * users as f64;
    // Barzilai-Borwein trial step from the previous accepted move
    let mut first_step = 1.0;
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 0..max_inner {
        // gradient w.r.t. x = p / p_max
        let g: Vec<f64> = s.gradient(&p).iter().map(|d| d * scale).collect();
        if let Some((p_old, g_old)) = last.take() {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..users {
                let dx = (p[i] - p_old[i]) / scale;
                ss += dx * dx;
                sy += dx * (g[i] - g_old[i]);
            }
            // concave objective: sy < 0 along any non-trivial move
            first_step = if sy < 0.0 { (ss / -sy).clamp(MIN_STEP, MAX_STEP) } else { 1.0 };
        }
        let pg: f64 = p
            .iter()
            .zip(&g)
            .map(|(&pi, &gi)| (proj(pi + gi * scale) - pi) / scale)
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt();
        if pg <= tol {
            return InnerSolve {
                power: PowerAlloc { p },
                iterations: it,
                converged: true,
            };
        }
        let mut step = first_step;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<f64> = p.iter().zip(&g).map(|(&pi, &gi)| proj(pi + step * gi * scale)).collect();
            let ascent: f64 = cand.iter().zip(&p).zip(&g).map(|((c, pi), gi)| gi * (c - pi) / scale).sum();
            let cv = s.value(&cand);
            if cv >= val + ARMIJO_SLOPE * ascent {
                last = Some((std::mem::replace(&mut p, cand), g.clone()));
                val = cv;
                accepted = true;
                break;
            }
            step *= BACKTRACK_FACTOR;
        }
        if !accepted {
            // no representable ascent left
            return InnerSolve {
                power: PowerAlloc { p },
                iterations: it + 1,
                converged: true,
            };
        }
    }
    InnerSolve {
        power: PowerAlloc { p },
        iterations: max_inner,
        converged: false,
    }
}

/// One convex step: projected gradient ascent with Armijo backtracking on the
/// surrogate built at `p_prev`.
pub fn dc_inner_solve(
    p_prev: &PowerAlloc,
    w: &Beamformer,
    heff: &CMatrix,
    sigma2: f64,
    bx: PowerBox,
    max_inner: usize,
) -> InnerSolve {
    dc_inner_solve_from(&LinkGains::new(heff, w, sigma2), &p_prev.p, bx, max_inner)
}

fn vertex(bits: u64, users: usize, bx: PowerBox) -> Vec<f64> {
    (0..users).map(|u| if bits >> u & 1 == 1 { bx.p_min } else { bx.p_max }).collect()
}

/// Best of `p_init` and the screened box vertices; ties keep `p_init`.
pub fn best_vertex_start(gains: &LinkGains, p_init: &[f64], bx: PowerBox) -> Vec<f64> {
    let users = p_init.len();
    let masks: Box<dyn Iterator<Item = u64>> = if users <= MAX_VERTEX_USERS {
        Box::new(0..1u64 << users)
    } else {
        Box::new(std::iter::once(0).chain((0..users).map(|u| 1u64 << u)))
    };
    let mut best = p_init.to_vec();
    let mut best_f = objective(gains, p_init);
    for bits in masks {
        let v = vertex(bits, users, bx);
        let f = objective(gains, &v);
        if f > best_f {
            best = v;
            best_f = f;
        }
    }
    best
}

fn dc_loop(gains: &LinkGains, p_start: Vec<f64>, bx: PowerBox, dc: &DcParams) -> DcState {
    let mut p = p_start;
    let mut f = objective(gains, &p);
    let mut trace = vec![f];
    let mut inner_capped = 0;
    let mut outer = 0;
    while outer < dc.max_outer {
        outer += 1;
        let step = dc_inner_solve_from(gains, &p, bx, dc.max_inner);
        if !step.converged {
            inner_capped += 1;
        }
        let f_new = objective(gains, &step.power.p);
        if !(f_new >= f) {
            // rounding-level regression: keep the incumbent
            break;
        }
        let gain = f_new - f;
        p = step.power.p;
        f = f_new;
        trace.push(f);
        if gain <= dc.tol {
            break;
        }
    }
    DcState {
        power: PowerAlloc { p },
        f_value: f,
        outer_iter: outer,
        trace,
        inner_capped,
    }
}

/// DC iterations from `P_init` and, when a box vertex beats it, from that
/// vertex as well; the higher final value wins (ties keep `P_init`). A
/// vertex run's trace is prefixed with `F(P_init)`, so it stays monotone.
pub fn optimize_power_from(gains: &LinkGains, p_init: &PowerAlloc, bx: PowerBox, dc: &DcParams) -> DcState {
    let local = dc_loop(gains, p_init.p.clone(), bx, dc);
    if !dc.vertex_start {
        return local;
    }
    let start = best_vertex_start(gains, &p_init.p, bx);
    if start == p_init.p {
        return local;
    }
    let mut corner = dc_loop(gains, start, bx, dc);
    if corner.f_value > local.f_value {
        corner.trace.insert(0, local.trace[0]);
        corner.outer_iter += local.outer_iter;
        corner.inner_capped += local.inner_capped;
        corner
    } else {
        local
    }
}

/// Repeats the convex step until `F` improves by no more than `dc.tol`.
pub fn optimize_power(
    p_init: &PowerAlloc,
    w: &Beamformer,
    heff: &CMatrix,
    sigma2: f64,
    bx: PowerBox,
    dc: &DcParams,
) -> DcState {
    optimize_power_from(&LinkGains::new(heff, w, sigma2), p_init, bx, dc)
}
