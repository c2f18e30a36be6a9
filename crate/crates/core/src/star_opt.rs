//! Surface update: continuous stationary point, projection onto the phase
//! grid, then the binary transmission/reflection assignment.
//!
//! With the auxiliaries fixed, the part of the quadratic-transform objective
//! that depends on the surface is
//! `Σ_X 2Re{ω_X φˣ} − φˣᴴ Ω_X φˣ`, a concave quadratic in each side.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::model::{grid_angle, Auxiliaries, Beamformer, PowerAlloc, StarConfig};
use crate::numerics::{hermitian_solve, inner, CMatrix, NumericsError, C64};
use crate::scenario::{min_side_elements, ChannelSet, LocalSearchParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarError {
    #[error("coverage constraint infeasible: 2*ceil({elements}/3) > {elements}")]
    Infeasible { elements: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Linear and quadratic coefficients of both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSubproblem {
    pub omega_t: Vec<C64>,
    pub omega_r: Vec<C64>,
    pub big_omega_t: CMatrix,
    pub big_omega_r: CMatrix,
}

impl PhaseSubproblem {
    pub fn elements(&self) -> usize {
        self.omega_t.len()
    }

    fn side_value(omega: &[C64], big: &CMatrix, phi: &[C64]) -> f64 {
        let lin: C64 = omega.iter().zip(phi).map(|(a, b)| a * b).sum();
        let quad = inner(phi, &big.mul_vec(phi)).re;
        2.0 * lin.re - quad
    }

    pub fn value_t(&self, phi_t: &[C64]) -> f64 {
        Self::side_value(&self.omega_t, &self.big_omega_t, phi_t)
    }

    pub fn value_r(&self, phi_r: &[C64]) -> f64 {
        Self::side_value(&self.omega_r, &self.big_omega_r, phi_r)
    }

    /// Surface-dependent part of the quadratic-transform objective.
    pub fn value(&self, phi_t: &[C64], phi_r: &[C64]) -> f64 {
        self.value_t(phi_t) + self.value_r(phi_r)
    }
}

/// Builds `ω_X` and `Ω_X` from the current powers, combiners and auxiliaries.
///
/// The inner sum of `Ω_X` runs over every user; users of the other region
/// drop out because their channel on side X is zero.
pub fn assemble_subproblem(
    power: &PowerAlloc,
    w: &Beamformer,
    aux: &Auxiliaries,
    ch: &ChannelSet,
) -> Result<PhaseSubproblem, StarError> {
    let users = ch.users();
    let n = ch.elements();
    if power.p.len() != users || w.users() != users || aux.mu.len() != users || aux.lambda.len() != users {
        return Err(StarError::DimensionMismatch(format!("expected {users} users in P, W and auxiliaries")));
    }
    if w.w.rows() != ch.antennas() {
        return Err(StarError::DimensionMismatch(format!(
            "W has {} rows, channels {} antennas",
            w.w.rows(),
            ch.antennas()
        )));
    }
    // H w_u for every combiner
    let hw: Vec<Vec<C64>> = (0..users).map(|u| ch.h.mul_vec(&w.column(u))).collect();

    let build = |side: &CMatrix| -> (Vec<C64>, CMatrix) {
        let mut omega = vec![C64::new(0.0, 0.0); n];
        let mut big = CMatrix::zeros(n, n);
        for u in 0..users {
            let lam = aux.lambda[u];
            let coef = (1.0 + aux.mu[u]).sqrt() * power.p[u].sqrt() * lam.conj();
            if coef != C64::new(0.0, 0.0) {
                for (k, o) in omega.iter_mut().enumerate() {
                    *o += coef * side[(u, k)] * hw[u][k];
                }
            }
            let weight = lam.norm_sqr();
            if weight == 0.0 {
                continue;
            }
            for i in 0..users {
                let row = side.row(i);
                if row.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                    continue;
                }
                let a: Vec<C64> = row.iter().zip(&hw[u]).map(|(h, v)| h * v).collect();
                let s = weight * power.p[i];
                for r in 0..n {
                    let ar = a[r].conj() * s;
                    for (c, ac) in a.iter().enumerate() {
                        big[(r, c)] += ar * ac;
                    }
                }
            }
        }
        // exact Hermitian symmetry
        for r in 0..n {
            big[(r, r)] = C64::new(big[(r, r)].re, 0.0);
            for c in (r + 1)..n {
                let v = 0.5 * (big[(r, c)] + big[(c, r)].conj());
                big[(r, c)] = v;
                big[(c, r)] = v.conj();
            }
        }
        (omega, big)
    };
    let (omega_t, big_omega_t) = build(&ch.h_t);
    let (omega_r, big_omega_r) = build(&ch.h_r);
    Ok(PhaseSubproblem {
        omega_t,
        omega_r,
        big_omega_t,
        big_omega_r,
    })
}

/// Maximizer of `2Re{ω φ} − φᴴ Ω φ`, i.e. the solution of `Ω φ = ωᴴ`.
///
/// A ridge of `1e-8·tr(Ω)/N` (grown tenfold on each further failure) is
/// added only when the plain Cholesky factorization fails. With `Ω = 0` the
/// objective is linear; the returned vector is then `ωᴴ` itself, which
/// carries the ascent direction's phases (and is zero when `ω = 0`).
pub fn stationary_point_side(omega: &[C64], big: &CMatrix) -> Result<Vec<C64>, StarError> {
    let n = omega.len();
    let rhs: Vec<C64> = omega.iter().map(|z| z.conj()).collect();
    let tr = big.trace().re;
    if !(tr > 0.0) {
        return Ok(rhs);
    }
    match hermitian_solve(big, &rhs) {
        Ok(x) => return Ok(x),
        Err(NumericsError::NotPositiveDefinite { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    let mut ridge = 1e-8 * tr / n as f64;
    let mut last = None;
    for _ in 0..12 {
        let shifted = big.add(&CMatrix::identity(n).scale(ridge));
        match hermitian_solve(&shifted, &rhs) {
            Ok(x) => return Ok(x),
            Err(e @ NumericsError::NotPositiveDefinite { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
        ridge *= 10.0;
    }
    Err(last.expect("loop ran").into())
}

pub fn continuous_stationary_point(sub: &PhaseSubproblem) -> Result<(Vec<C64>, Vec<C64>), StarError> {
    Ok((
        stationary_point_side(&sub.omega_t, &sub.big_omega_t)?,
        stationary_point_side(&sub.omega_r, &sub.big_omega_r)?,
    ))
}

/// Nearest grid index to the phase of each entry under circular distance.
/// Ties go to the smaller index; zero entries map to index 0.
pub fn project_phases(phi: &[C64], levels: usize) -> Vec<usize> {
    assert!(levels >= 2, "Q >= 2");
    phi.iter()
        .map(|z| {
            if *z == C64::new(0.0, 0.0) {
                return 0;
            }
            let a = z.arg().rem_euclid(2.0 * PI);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for q in 0..levels {
                let diff = (a - grid_angle(q, levels)).abs();
                let d = diff.min(2.0 * PI - diff);
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
            best
        })
        .collect()
}

/// Binary quadratic program over the transmission mask `a` (αʳ = 1 − a):
///
/// `g(a) = Σ_n cᵗ_n a_n + cʳ_n (1 − a_n) − aᵀ Qᵗ a − (1 − a)ᵀ Qʳ (1 − a)`
///
/// subject to `L ≤ Σ a ≤ N − L`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeProblem {
    pub lin_t: Vec<f64>,
    pub lin_r: Vec<f64>,
    pub quad_t: Vec<Vec<f64>>,
    pub quad_r: Vec<Vec<f64>>,
    pub min_side: usize,
}

impl AmplitudeProblem {
    pub fn elements(&self) -> usize {
        self.lin_t.len()
    }

    /// Linear gain of serving element `n` on the transmission side rather
    /// than the reflection side, pairwise terms excluded.
    pub fn linear_preference(&self, n: usize) -> f64 {
        self.lin_t[n] - self.lin_r[n]
    }

    pub fn is_feasible(&self, a: &[bool]) -> bool {
        let t = a.iter().filter(|&&x| x).count();
        a.len() == self.elements() && t >= self.min_side && a.len() - t >= self.min_side
    }

    pub fn evaluate(&self, a: &[bool]) -> f64 {
        let n = self.elements();
        let mut v = 0.0;
        for i in 0..n {
            v += if a[i] { self.lin_t[i] } else { self.lin_r[i] };
        }
        for i in 0..n {
            for j in 0..n {
                if a[i] && a[j] {
                    v -= self.quad_t[i][j];
                } else if !a[i] && !a[j] {
                    v -= self.quad_r[i][j];
                }
            }
        }
        v
    }
}

pub fn build_amplitude_problem(
    sub: &PhaseSubproblem,
    theta_t: &[usize],
    theta_r: &[usize],
    levels: usize,
) -> AmplitudeProblem {
    let n = sub.elements();
    let rot = |q: usize| C64::from_polar(1.0, grid_angle(q, levels));
    let et: Vec<C64> = theta_t.iter().map(|&q| rot(q)).collect();
    let er: Vec<C64> = theta_r.iter().map(|&q| rot(q)).collect();
    let lin = |omega: &[C64], e: &[C64]| -> Vec<f64> { omega.iter().zip(e).map(|(o, z)| 2.0 * (o * z).re).collect() };
    let quad = |big: &CMatrix, e: &[C64]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| (e[i].conj() * big[(i, j)] * e[j]).re).collect())
            .collect()
    };
    AmplitudeProblem {
        lin_t: lin(&sub.omega_t, &et),
        lin_r: lin(&sub.omega_r, &er),
        quad_t: quad(&sub.big_omega_t, &et),
        quad_r: quad(&sub.big_omega_r, &er),
        min_side: min_side_elements(n),
    }
}

/// Incremental evaluator for single-element moves.
struct FlipState<'a> {
    prob: &'a AmplitudeProblem,
    a: Vec<bool>,
    count: usize,
    value: f64,
    /// `Σ_m Qᵗ_{nm} a_m`
    st: Vec<f64>,
    /// `Σ_m Qʳ_{nm} (1 − a_m)`
    sr: Vec<f64>,
}

impl<'a> FlipState<'a> {
    fn new(prob: &'a AmplitudeProblem, a: Vec<bool>) -> Self {
        let n = prob.elements();
        let st = (0..n)
            .map(|i| (0..n).filter(|&j| a[j]).map(|j| prob.quad_t[i][j]).sum())
            .collect();
        let sr = (0..n)
            .map(|i| (0..n).filter(|&j| !a[j]).map(|j| prob.quad_r[i][j]).sum())
            .collect();
        let count = a.iter().filter(|&&x| x).count();
        let value = prob.evaluate(&a);
        Self {
            prob,
            a,
            count,
            value,
            st,
            sr,
        }
    }

    fn delta(&self, k: usize) -> f64 {
        let p = self.prob;
        let (qt, qr) = (p.quad_t[k][k], p.quad_r[k][k]);
        if self.a[k] {
            -p.linear_preference(k) + 2.0 * self.st[k] - qt - 2.0 * self.sr[k] - qr
        } else {
            p.linear_preference(k) - 2.0 * self.st[k] - qt + 2.0 * self.sr[k] - qr
        }
    }

    /// Gain of moving `k` from t to r and `l` from r to t together.
    fn swap_delta(&self, k: usize, l: usize) -> f64 {
        self.delta(k) + self.delta(l) + 2.0 * (self.prob.quad_t[l][k] + self.prob.quad_r[l][k])
    }

    fn flip(&mut self, k: usize) {
        let d = self.delta(k);
        self.value += d;
        let n = self.prob.elements();
        if self.a[k] {
            for m in 0..n {
                self.st[m] -= self.prob.quad_t[m][k];
                self.sr[m] += self.prob.quad_r[m][k];
            }
            self.count -= 1;
        } else {
            for m in 0..n {
                self.st[m] += self.prob.quad_t[m][k];
                self.sr[m] -= self.prob.quad_r[m][k];
            }
            self.count += 1;
        }
        self.a[k] = !self.a[k];
    }

    fn feasible_count(&self, count: usize) -> bool {
        count >= self.prob.min_side && self.prob.elements() - count >= self.prob.min_side
    }
}

/// Exhaustive search over all feasible masks in Gray-code order.
pub fn solve_exact(prob: &AmplitudeProblem) -> Result<Vec<bool>, StarError> {
    let n = prob.elements();
    check_feasible(n)?;
    assert!(n < 32, "exhaustive search limited to fewer than 32 elements");
    let mut st = FlipState::new(prob, vec![false; n]);
    let mut best: Option<(f64, Vec<bool>)> = None;
    let consider = |st: &FlipState, best: &mut Option<(f64, Vec<bool>)>| {
        if st.feasible_count(st.count) && best.as_ref().is_none_or(|(v, _)| st.value > *v) {
            *best = Some((st.value, st.a.clone()));
        }
    };
    consider(&st, &mut best);
    for i in 1u64..(1u64 << n) {
        st.flip(i.trailing_zeros() as usize);
        consider(&st, &mut best);
    }
    Ok(best.expect("feasible set is non-empty").1)
}

fn check_feasible(n: usize) -> Result<(), StarError> {
    if 2 * min_side_elements(n) > n {
        Err(StarError::Infeasible { elements: n })
    } else {
        Ok(())
    }
}

/// Greedy construction from the all-reflection mask: forced additions until
/// the transmission side is covered, then improving additions while room remains.
pub fn greedy_start(prob: &AmplitudeProblem) -> Vec<bool> {
    let n = prob.elements();
    let mut st = FlipState::new(prob, vec![false; n]);
    loop {
        let forced = st.count < prob.min_side;
        if !forced && !st.feasible_count(st.count + 1) {
            break;
        }
        let best = (0..n)
            .filter(|&k| !st.a[k])
            .map(|k| (k, st.delta(k)))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
        match best {
            Some((k, d)) if forced || d > 0.0 => st.flip(k),
            _ => break,
        }
    }
    st.a
}

/// Best-improvement descent over feasible single flips and t↔r swaps.
/// Returns the final mask and whether it is locally optimal (cap not hit).
pub fn local_search(prob: &AmplitudeProblem, start: Vec<bool>, max_moves: usize) -> (Vec<bool>, bool) {
    let n = prob.elements();
    let mut st = FlipState::new(prob, start);
    let scale = prob
        .lin_t
        .iter()
        .chain(&prob.lin_r)
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let eps = 1e-12 * scale;
    for _ in 0..max_moves {
        let mut best_gain = eps;
        let mut best_move: Option<(usize, Option<usize>)> = None;
        for k in 0..n {
            let next = if st.a[k] { st.count - 1 } else { st.count + 1 };
            if st.feasible_count(next) {
                let d = st.delta(k);
                if d > best_gain {
                    best_gain = d;
                    best_move = Some((k, None));
                }
            }
        }
        for k in (0..n).filter(|&k| st.a[k]) {
            for l in (0..n).filter(|&l| !st.a[l]) {
                let d = st.swap_delta(k, l);
                if d > best_gain {
                    best_gain = d;
                    best_move = Some((k, Some(l)));
                }
            }
        }
        match best_move {
            None => return (st.a, true),
            Some((k, None)) => st.flip(k),
            Some((k, Some(l))) => {
                st.flip(k);
                st.flip(l);
            }
        }
    }
    (st.a, false)
}

/// Uniformly random feasible mask: a uniform transmission count in
/// `[L, N − L]`, then a uniform subset of that size.
pub fn random_feasible_mask(n: usize, rng: &mut impl Rng) -> Vec<bool> {
    let l = min_side_elements(n);
    let count = rng.gen_range(l..=n - l);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut a = vec![false; n];
    for &i in &idx[..count] {
        a[i] = true;
    }
    a
}

/// Multi-start local search: restart 0 starts from the greedy mask, the
/// others from random feasible masks. Best value wins, ties to the lower
/// restart index.
pub fn solve_local_search(
    prob: &AmplitudeProblem,
    ls: &LocalSearchParams,
    rng: &mut impl Rng,
) -> Result<Vec<bool>, StarError> {
    let n = prob.elements();
    check_feasible(n)?;
    let mut best = local_search(prob, greedy_start(prob), ls.max_flips).0;
    let mut best_val = prob.evaluate(&best);
    for _ in 1..ls.restarts.max(1) {
        let start = random_feasible_mask(n, rng);
        let (cand, _) = local_search(prob, start, ls.max_flips);
        let v = prob.evaluate(&cand);
        if v > best_val {
            best = cand;
            best_val = v;
        }
    }
    Ok(best)
}

/// Exact enumeration up to `n_exact` elements, multi-start local search above.
pub fn optimize_amplitudes(
    prob: &AmplitudeProblem,
    n_exact: usize,
    ls: &LocalSearchParams,
    rng: &mut impl Rng,
) -> Result<Vec<bool>, StarError> {
    if prob.elements() <= n_exact {
        solve_exact(prob)
    } else {
        solve_local_search(prob, ls, rng)
    }
}

/// Element-wise ascent on the surface objective over the discrete set.
///
/// Visits the elements in order; each one takes the best grid phase on its
/// current side or, when the coverage bounds allow and the assignment is not
/// frozen, moves to the other side with that side's best phase. Sweeps stop
/// once a full pass changes nothing. The objective never decreases.
pub fn refine_star(sub: &PhaseSubproblem, start: &StarConfig, fixed_alpha: bool, max_sweeps: usize) -> StarConfig {
    let n = sub.elements();
    let levels = start.levels;
    let l = min_side_elements(n);
    let mut star = start.clone();
    let mut phi = [star.phi_t(), star.phi_r()];
    let omega = [&sub.omega_t, &sub.omega_r];
    let big = [&sub.big_omega_t, &sub.big_omega_r];
    let mut prod = [big[0].mul_vec(&phi[0]), big[1].mul_vec(&phi[1])];
    let scale = omega
        .iter()
        .flat_map(|o| o.iter())
        .map(|z| z.norm())
        .chain((0..n).flat_map(|i| [big[0][(i, i)].re, big[1][(i, i)].re]))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return star;
    }
    let tol = 1e-12 * scale;
    let rot = |q: usize| C64::from_polar(1.0, grid_angle(q, levels));

    for _ in 0..max_sweeps {
        let mut changed = false;
        for k in 0..n {
            let side = if star.alpha_t[k] { 0 } else { 1 };
            // best phase and value of element k on side y, others fixed
            let best_on = |y: usize| -> (usize, f64) {
                let excl = prod[y][k] - big[y][(k, k)] * phi[y][k];
                let z = omega[y][k] - excl.conj();
                let q = project_phases(&[z.conj()], levels)[0];
                (q, 2.0 * (rot(q) * z).re - big[y][(k, k)].re)
            };
            let current = {
                let excl = prod[side][k] - big[side][(k, k)] * phi[side][k];
                let z = omega[side][k] - excl.conj();
                2.0 * (phi[side][k] * z).re - big[side][(k, k)].re
            };
            let (q_stay, v_stay) = best_on(side);
            let mut choice = (side, q_stay, v_stay - current);
            let count_t = star.transmit_count();
            let can_move = !fixed_alpha && if side == 0 { count_t > l } else { n - count_t > l };
            if can_move {
                let (q_move, v_move) = best_on(1 - side);
                if v_move - current > choice.2 {
                    choice = (1 - side, q_move, v_move - current);
                }
            }
            if choice.2 <= tol {
                continue;
            }
            let (target, q, _) = choice;
            // clear the old entry, then set the new one, keeping Ωφ current
            for y in [side, target] {
                let new = if y == target { rot(q) } else { C64::new(0.0, 0.0) };
                let delta = new - phi[y][k];
                if delta != C64::new(0.0, 0.0) {
                    for (m, p) in prod[y].iter_mut().enumerate() {
                        *p += big[y][(m, k)] * delta;
                    }
                    phi[y][k] = new;
                }
            }
            star.alpha_t[k] = target == 0;
            if target == 0 {
                star.theta_t[k] = q;
            } else {
                star.theta_r[k] = q;
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }
    // Inactive phases do not enter the objective; park each at its best
    // response so a later amplitude solve sees useful switching gains.
    for k in 0..n {
        let y = if star.alpha_t[k] { 1 } else { 0 };
        let z = omega[y][k] - prod[y][k].conj();
        let q = project_phases(&[z.conj()], levels)[0];
        if y == 0 {
            star.theta_t[k] = q;
        } else {
            star.theta_r[k] = q;
        }
    }
    star
}

/// Coordinate ascent on the true sum rate over the discrete surface set,
/// with power and combiners fixed.
///
/// Each element in turn tries every grid phase on its current side and, if
/// coverage allows and the assignment is not frozen, on the other side. A
/// move is taken only if it raises the rate. One trial move costs `O(U²)`
/// because only one term of every effective channel changes.
pub fn polish_star(
    ch: &ChannelSet,
    start: &StarConfig,
    power: &PowerAlloc,
    w: &Beamformer,
    sigma2: f64,
    fixed_alpha: bool,
    max_sweeps: usize,
) -> StarConfig {
    let users = ch.users();
    let n = ch.elements();
    let levels = start.levels;
    let l = min_side_elements(n);
    let mut star = start.clone();
    let rot = |q: usize| C64::from_polar(1.0, grid_angle(q, levels));
    let zero = C64::new(0.0, 0.0);

    // H[n,:] w_u and the current products g[m][u] = h_m w_u
    let hw: Vec<Vec<C64>> = (0..n)
        .map(|k| (0..users).map(|u| (0..w.w.rows()).map(|i| ch.h[(k, i)] * w.w[(i, u)]).sum()).collect())
        .collect();
    let phi_t = star.phi_t();
    let phi_r = star.phi_r();
    let mut g = vec![vec![zero; users]; users];
    for (m, row) in g.iter_mut().enumerate() {
        for k in 0..n {
            let c = ch.h_t[(m, k)] * phi_t[k] + ch.h_r[(m, k)] * phi_r[k];
            if c != zero {
                for (u, x) in row.iter_mut().enumerate() {
                    *x += c * hw[k][u];
                }
            }
        }
    }
    let noise: Vec<f64> = (0..users).map(|u| sigma2 * crate::numerics::norm_sqr(&w.column(u))).collect();
    let rate = |g: &[Vec<C64>]| -> f64 {
        (0..users)
            .map(|u| {
                let sig = power.p[u] * g[u][u].norm_sqr();
                let den: f64 = (0..users).filter(|&m| m != u).map(|m| power.p[m] * g[m][u].norm_sqr()).sum::<f64>()
                    + noise[u];
                if den > 0.0 {
                    (1.0 + sig / den).log2()
                } else {
                    0.0
                }
            })
            .sum()
    };
    let mut best = rate(&g);
    let mut trial = g.clone();

    for _ in 0..max_sweeps {
        let mut changed = false;
        for k in 0..n {
            let on_t = star.alpha_t[k];
            let old = if on_t { rot(star.theta_t[k]) } else { rot(star.theta_r[k]) };
            let count_t = star.transmit_count();
            let can_move = !fixed_alpha && if on_t { count_t > l } else { n - count_t > l };
            let mut choice: Option<(bool, usize, f64)> = None;
            for to_t in [on_t, !on_t] {
                if to_t != on_t && !can_move {
                    continue;
                }
                for q in 0..levels {
                    let cur = if to_t { star.theta_t[k] } else { star.theta_r[k] };
                    if to_t == on_t && q == cur {
                        continue;
                    }
                    let new = rot(q);
                    for m in 0..users {
                        let old_c = if on_t { ch.h_t[(m, k)] } else { ch.h_r[(m, k)] } * old;
                        let new_c = if to_t { ch.h_t[(m, k)] } else { ch.h_r[(m, k)] } * new;
                        let d = new_c - old_c;
                        for u in 0..users {
                            trial[m][u] = g[m][u] + d * hw[k][u];
                        }
                    }
                    let r = rate(&trial);
                    if r > choice.map_or(best, |c| c.2) {
                        choice = Some((to_t, q, r));
                    }
                }
            }
            let Some((to_t, q, r)) = choice else { continue };
            if r - best <= 1e-12 * best.abs().max(1.0) {
                continue;
            }
            let new = rot(q);
            for m in 0..users {
                let old_c = if on_t { ch.h_t[(m, k)] } else { ch.h_r[(m, k)] } * old;
                let new_c = if to_t { ch.h_t[(m, k)] } else { ch.h_r[(m, k)] } * new;
                let d = new_c - old_c;
                for u in 0..users {
                    g[m][u] += d * hw[k][u];
                }
            }
            star.alpha_t[k] = to_t;
            if to_t {
                star.theta_t[k] = q;
            } else {
                star.theta_r[k] = q;
            }
            best = rate(&g);
            changed = true;
        }
        if !changed {
            break;
        }
    }
    star
}

const MAX_ALTERNATIONS: usize = 10;

/// Options of the surface update beyond the amplitude solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarUpdateOptions<'a> {
    /// Frozen element assignment; only the phases move.
    pub fixed_alpha: Option<&'a [bool]>,
    pub n_exact: usize,
    pub ls: LocalSearchParams,
    /// Sweeps of [`refine_star`] after the projection pipeline; 0 disables it.
    pub refine_sweeps: usize,
}

/// Full surface update for fixed (P, W, auxiliaries): stationary point,
/// phase projection, amplitude program, then (optionally) element-wise
/// refinement started from whichever of the candidate and `current` scores
/// higher on the surface objective.
pub fn update_star(
    power: &PowerAlloc,
    w: &Beamformer,
    aux: &Auxiliaries,
    ch: &ChannelSet,
    current: &StarConfig,
    opts: &StarUpdateOptions<'_>,
    rng: &mut impl Rng,
) -> Result<StarConfig, StarError> {
    let levels = current.levels;
    let sub = assemble_subproblem(power, w, aux, ch)?;
    let (phi_t, phi_r) = continuous_stationary_point(&sub)?;
    let theta_t = project_phases(&phi_t, levels);
    let theta_r = project_phases(&phi_r, levels);
    let alpha_t = match opts.fixed_alpha {
        Some(a) => a.to_vec(),
        None => {
            let prob = build_amplitude_problem(&sub, &theta_t, &theta_r, levels);
            optimize_amplitudes(&prob, opts.n_exact, &opts.ls, rng)?
        }
    };
    let candidate =
        StarConfig::new(alpha_t, theta_t, theta_r, levels).map_err(|e| StarError::DimensionMismatch(e.to_string()))?;
    if opts.refine_sweeps == 0 {
        return Ok(candidate);
    }
    let score = |s: &StarConfig| sub.value(&s.phi_t(), &s.phi_r());
    let start = if score(&candidate) >= score(current) { &candidate } else { current };
    let frozen = opts.fixed_alpha.is_some();
    let mut best = refine_star(&sub, start, frozen, opts.refine_sweeps);
    if frozen {
        return Ok(best);
    }
    // alternate assignment and phases until the assignment stops paying off
    let mut best_score = score(&best);
    for _ in 0..MAX_ALTERNATIONS {
        let prob = build_amplitude_problem(&sub, &best.theta_t, &best.theta_r, levels);
        let alpha_t = optimize_amplitudes(&prob, opts.n_exact, &opts.ls, rng)?;
        if alpha_t == best.alpha_t {
            break;
        }
        let next = refine_star(
            &sub,
            &StarConfig { alpha_t, ..best.clone() },
            false,
            opts.refine_sweeps,
        );
        let next_score = score(&next);
        if next_score <= best_score {
            break;
        }
        best = next;
        best_score = next_score;
    }
    Ok(best)
}
