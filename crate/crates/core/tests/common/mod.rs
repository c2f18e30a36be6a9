//! Reference computations written from the system equations, sharing no code
//! with the library beyond its plain data types.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starris::model::{Beamformer, PowerAlloc, StarConfig};
use starris::numerics::{CMatrix, C64};
use starris::scenario::{draw_trial, ChannelSet, SystemConfig};
use starris::star_opt::random_feasible_mask;

pub fn gauss(rng: &mut impl Rng) -> C64 {
    // Box-Muller, unit variance
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    C64::from_polar(r, 2.0 * PI * u2)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Per-user effective channel rows `Σ_n hˣ_{u,n} e^{jθ_n} H[n,:]`.
pub fn heff(ch: &ChannelSet, star: &StarConfig) -> Vec<Vec<C64>> {
    let (n, m) = (ch.h.rows(), ch.h.cols());
    let q = star.levels as f64;
    (0..ch.h_t.rows())
        .map(|u| {
            let mut row = vec![C64::new(0.0, 0.0); m];
            for k in 0..n {
                let (g, theta) = if star.alpha_t[k] {
                    (ch.h_t[(u, k)], star.theta_t[k])
                } else {
                    (ch.h_r[(u, k)], star.theta_r[k])
                };
                let c = g * C64::from_polar(1.0, 2.0 * PI * theta as f64 / q);
                for (i, x) in row.iter_mut().enumerate() {
                    *x += c * ch.h[(k, i)];
                }
            }
            row
        })
        .collect()
}

/// `h_m w_u` (no conjugation).
pub fn prod(heff: &[Vec<C64>], w: &CMatrix, m: usize, u: usize) -> C64 {
    heff[m].iter().enumerate().map(|(i, h)| h * w[(i, u)]).sum()
}

pub fn noise(w: &CMatrix, u: usize, sigma2: f64) -> f64 {
    sigma2 * (0..w.rows()).map(|i| w[(i, u)].norm_sqr()).sum::<f64>()
}

/// Inter-user interference `Σ_{m≠u} p_m |h_m w_u|²`.
pub fn interference(heff: &[Vec<C64>], w: &CMatrix, p: &[f64], u: usize) -> f64 {
    (0..p.len()).filter(|&m| m != u).map(|m| p[m] * prod(heff, w, m, u).norm_sqr()).sum()
}

pub fn sinr(heff: &[Vec<C64>], w: &CMatrix, p: &[f64], sigma2: f64, u: usize) -> f64 {
    let den = interference(heff, w, p, u) + noise(w, u, sigma2);
    if den == 0.0 {
        0.0
    } else {
        p[u] * prod(heff, w, u, u).norm_sqr() / den
    }
}

pub fn sum_rate(heff: &[Vec<C64>], w: &CMatrix, p: &[f64], sigma2: f64) -> f64 {
    (0..p.len()).map(|u| (1.0 + sinr(heff, w, p, sigma2, u)).log2()).sum()
}

/// Quadratic-transform objective at freshly computed auxiliaries.
pub fn fp_value(heff: &[Vec<C64>], w: &CMatrix, p: &[f64], sigma2: f64) -> f64 {
    (0..p.len())
        .map(|u| {
            let mu = sinr(heff, w, p, sigma2, u);
            let s = prod(heff, w, u, u);
            let d = interference(heff, w, p, u) + p[u] * s.norm_sqr() + noise(w, u, sigma2);
            if d == 0.0 {
                return (1.0 + mu).log2() - mu;
            }
            let lambda = s * ((1.0 + mu).sqrt() * p[u].sqrt() / d);
            (1.0 + mu).log2() - mu + 2.0 * (1.0 + mu).sqrt() * (lambda.conj() * s * p[u].sqrt()).re
                - lambda.norm_sqr() * d
        })
        .sum()
}

/// Random feasible operating point on a fresh channel draw.
pub struct State {
    pub cfg: SystemConfig,
    pub ch: ChannelSet,
    pub power: PowerAlloc,
    pub star: StarConfig,
    pub beam: Beamformer,
}

pub fn random_w(m: usize, users: usize, rng: &mut impl Rng) -> Beamformer {
    let w = CMatrix::from_fn(m, users, |_, _| gauss(rng));
    let scale = rng.gen_range(0.2..1.0f64).sqrt() / w.frobenius_norm();
    Beamformer::new(w.scale(scale)).unwrap()
}

pub fn random_state(seed: u64, n: usize) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let cfg = SystemConfig {
        elements: n,
        antennas: rng.gen_range(1..=4),
        levels: [2, 4, 8, 16][rng.gen_range(0..4)],
        ..SystemConfig::desk()
    };
    let ch = draw_trial(&cfg, seed);
    let users = cfg.users();
    let power = PowerAlloc {
        p: (0..users).map(|_| rng.gen_range(cfg.p_min..=cfg.p_max)).collect(),
    };
    let star = StarConfig::new(
        random_feasible_mask(n, &mut rng),
        (0..n).map(|_| rng.gen_range(0..cfg.levels)).collect(),
        (0..n).map(|_| rng.gen_range(0..cfg.levels)).collect(),
        cfg.levels,
    )
    .unwrap();
    let beam = random_w(cfg.antennas, users, &mut rng);
    State {
        cfg,
        ch,
        power,
        star,
        beam,
    }
}

/// Surface objective `Σ_X 2Re{ωˣ φˣ} − φˣᴴ Ωˣ φˣ` for a configuration.
pub fn surface_value(
    omega: (&[C64], &[C64]),
    big: (&CMatrix, &CMatrix),
    alpha_t: &[bool],
    theta: (&[usize], &[usize]),
    levels: usize,
) -> f64 {
    let n = alpha_t.len();
    let rot = |q: usize| C64::from_polar(1.0, 2.0 * PI * q as f64 / levels as f64);
    let side = |omega: &[C64], big: &CMatrix, on: &dyn Fn(usize) -> bool, th: &[usize]| {
        let phi: Vec<C64> = (0..n).map(|k| if on(k) { rot(th[k]) } else { C64::new(0.0, 0.0) }).collect();
        let mut v = 0.0;
        for i in 0..n {
            v += 2.0 * (omega[i] * phi[i]).re;
            for j in 0..n {
                v -= (phi[i].conj() * big[(i, j)] * phi[j]).re;
            }
        }
        v
    };
    side(omega.0, big.0, &|k| alpha_t[k], theta.0) + side(omega.1, big.1, &|k| !alpha_t[k], theta.1)
}

/// Best value over every feasible transmission mask.
pub fn brute_force_masks(n: usize, min_side: usize, value: impl Fn(&[bool]) -> f64) -> (f64, Vec<bool>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for bits in 0u32..(1 << n) {
        let count = bits.count_ones() as usize;
        if count < min_side || count > n - min_side {
            continue;
        }
        let a: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
        let v = value(&a);
        if v > best.0 {
            best = (v, a);
        }
    }
    best
}

/// Maximum of `f` over a `steps × steps` grid on `[lo, hi]²`.
pub fn grid_max_2d(lo: f64, hi: f64, steps: usize, f: impl Fn(f64, f64) -> f64) -> (f64, [f64; 2]) {
    let at = |i: usize| lo + (hi - lo) * i as f64 / (steps - 1) as f64;
    let mut best = (f64::NEG_INFINITY, [lo, lo]);
    for i in 0..steps {
        for j in 0..steps {
            let v = f(at(i), at(j));
            if v > best.0 {
                best = (v, [at(i), at(j)]);
            }
        }
    }
    best
}
