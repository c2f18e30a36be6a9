//! Combiner update: maximize
//! `Σ_u 2Re{a_uᴴ w_u} − |λ_u|² w_uᴴ (A + σ²I) w_u` over `‖W‖_F² ≤ 1`.
//!
//! The problem is a concave quadratic on a norm ball, so the optimum follows
//! from the dual variable ν of the ball constraint:
//! `w_u(ν) = (|λ_u|²(A + σ²I) + νI)⁻¹ a_u`. One eigendecomposition of `A`
//! diagonalizes every user's system for every ν, and `Σ‖w_u(ν)‖²` is
//! strictly decreasing in ν, so ν is found by bisection.

use crate::model::{Auxiliaries, Beamformer, PowerAlloc};
use crate::numerics::{eig_hermitian, hermitian_solve, inner, norm, norm_sqr, CMatrix, NumericsError, C64};

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone)]
pub struct BeamSubproblem {
    /// `Σ_m p_m h_mᴴ h_m`, M×M.
    pub a: CMatrix,
    /// `a_u = sqrt(1+μ_u) sqrt(p_u) λ_u h_uᴴ`.
    pub targets: Vec<Vec<C64>>,
    /// `|λ_u|²`.
    pub weights: Vec<f64>,
}

impl BeamSubproblem {
    pub fn new(power: &PowerAlloc, aux: &Auxiliaries, heff: &CMatrix) -> Self {
        let users = heff.rows();
        let m = heff.cols();
        let mut a = CMatrix::zeros(m, m);
        for u in 0..users {
            let h = heff.row(u);
            for r in 0..m {
                let hr = h[r].conj() * power.p[u];
                for c in 0..m {
                    a[(r, c)] += hr * h[c];
                }
            }
        }
        let targets = (0..users)
            .map(|u| {
                let coef = aux.lambda[u] * ((1.0 + aux.mu[u]).sqrt() * power.p[u].sqrt());
                heff.row(u).iter().map(|h| coef * h.conj()).collect()
            })
            .collect();
        let weights = aux.lambda.iter().map(|l| l.norm_sqr()).collect();
        Self { a, targets, weights }
    }

    pub fn antennas(&self) -> usize {
        self.a.rows()
    }

    pub fn users(&self) -> usize {
        self.targets.len()
    }

    fn user_matrix_apply(&self, u: usize, sigma2: f64, nu: f64, w: &[C64]) -> Vec<C64> {
        let aw = self.a.mul_vec(w);
        aw.iter()
            .zip(w)
            .map(|(x, wi)| self.weights[u] * (x + wi * sigma2) + wi * nu)
            .collect()
    }

    pub fn objective(&self, w: &Beamformer, sigma2: f64) -> f64 {
        (0..self.users())
            .map(|u| {
                let wu = w.column(u);
                let quad = inner(&wu, &self.a.mul_vec(&wu)).re + sigma2 * norm_sqr(&wu);
                2.0 * inner(&self.targets[u], &wu).re - self.weights[u] * quad
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct BeamSolution {
    pub beamformer: Beamformer,
    /// Multiplier of the Frobenius-ball constraint.
    pub nu: f64,
    pub bisections: usize,
}

pub fn optimize_beamforming(sub: &BeamSubproblem, sigma2: f64) -> Result<BeamSolution, NumericsError> {
    let m = sub.antennas();
    let users = sub.users();
    let eig = eig_hermitian(&sub.a)?;
    let v = &eig.eigenvectors;
    // eigen-coordinates of every target; users without weight stay at zero
    let active: Vec<bool> = (0..users)
        .map(|u| sub.weights[u] > 0.0 && sub.targets[u].iter().any(|z| *z != C64::new(0.0, 0.0)))
        .collect();
    let coords: Vec<Vec<C64>> = sub.targets.iter().map(|t| v.adjoint_mul_vec(t)).collect();
    let shifts: Vec<Vec<f64>> = (0..users)
        .map(|u| eig.eigenvalues.iter().map(|&l| sub.weights[u] * (l.max(0.0) + sigma2)).collect())
        .collect();

    let energy = |nu: f64| -> f64 {
        (0..users)
            .filter(|&u| active[u])
            .map(|u| {
                coords[u]
                    .iter()
                    .zip(&shifts[u])
                    .map(|(b, d)| b.norm_sqr() / ((d + nu) * (d + nu)))
                    .sum::<f64>()
            })
            .sum()
    };
    let build = |nu: f64| -> CMatrix {
        let mut w = CMatrix::zeros(m, users);
        for u in (0..users).filter(|&u| active[u]) {
            let scaled: Vec<C64> = coords[u].iter().zip(&shifts[u]).map(|(b, d)| b / (d + nu)).collect();
            w.set_column(u, &v.mul_vec(&scaled));
        }
        w
    };

    let mut nu = 0.0;
    let mut bisections = 0;
    if !active.iter().any(|&a| a) {
        return Ok(BeamSolution {
            beamformer: Beamformer { w: CMatrix::zeros(m, users) },
            nu,
            bisections,
        });
    }
    if energy(0.0) > 1.0 {
        let total: f64 = coords.iter().map(|c| norm_sqr(c)).sum::<f64>().sqrt();
        // energy(ν) < Σ‖b‖²/ν², so ν = ‖b‖ is already (almost) feasible
        let mut hi = total.max(f64::MIN_POSITIVE);
        while energy(hi) > 1.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while bisections < MAX_BISECTIONS {
            if (1.0 - energy(hi)).abs() <= 1e-14 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            bisections += 1;
            if energy(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        nu = hi;
    }
    Ok(BeamSolution {
        beamformer: Beamformer { w: build(nu) },
        nu,
        bisections,
    })
}

/// Linear MMSE combiners `w_u ∝ (Σ_m p_m h_mᴴ h_m + σ²I)⁻¹ h_uᴴ`, scaled to
/// `‖W‖_F = 1`.
///
/// Each SINR is invariant to the scale of its own column, and this direction
/// maximizes every user's SINR at once, so it is the rate-optimal combiner for
/// fixed powers and surface. The ball-constrained quadratic-transform update
/// reaches it only when the multiplier ν is zero.
pub fn mmse_combiner(power: &PowerAlloc, heff: &CMatrix, sigma2: f64) -> Result<Beamformer, NumericsError> {
    let (users, m) = (heff.rows(), heff.cols());
    let mut r = CMatrix::identity(m).scale(sigma2);
    for u in 0..users {
        let h = heff.row(u);
        for i in 0..m {
            let hi = h[i].conj() * power.p[u];
            for j in 0..m {
                r[(i, j)] += hi * h[j];
            }
        }
    }
    let mut w = CMatrix::zeros(m, users);
    for u in 0..users {
        let target: Vec<C64> = heff.row(u).iter().map(|z| z.conj()).collect();
        let col = hermitian_solve(&r, &target)?;
        let n = norm(&col);
        if n > 0.0 {
            w.set_column(u, &col.iter().map(|z| z / n).collect::<Vec<_>>());
        }
    }
    let f = w.frobenius_norm();
    if f > 0.0 {
        w = w.scale(1.0 / f);
    }
    Ok(Beamformer { w })
}

/// Largest of the stationarity residual, the primal violation and the
/// complementary-slackness gap.
pub fn kkt_residual(sub: &BeamSubproblem, w: &Beamformer, nu: f64, sigma2: f64) -> f64 {
    let stationarity = (0..sub.users())
        .map(|u| {
            let wu = w.column(u);
            let lhs = sub.user_matrix_apply(u, sigma2, nu, &wu);
            let diff: Vec<C64> = lhs.iter().zip(&sub.targets[u]).map(|(a, b)| a - b).collect();
            norm(&diff)
        })
        .fold(0.0, f64::max);
    let fro = w.frobenius_sqr();
    let primal = (fro - 1.0).max(0.0);
    let slack = (nu * (fro - 1.0)).abs();
    stationarity.max(primal).max(slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar(a_target: f64) -> BeamSubproblem {
        // M = 1, A = 0, |λ|² σ² = 0.5 with σ² = 1
        BeamSubproblem {
            a: CMatrix::zeros(1, 1),
            targets: vec![vec![c(a_target, 0.0)]],
            weights: vec![0.5],
        }
    }

    #[test]
    fn zero_data_gives_zero_beamformer() {
        let sub = BeamSubproblem {
            a: CMatrix::zeros(2, 2),
            targets: vec![vec![c(0.0, 0.0); 2]; 3],
            weights: vec![0.0; 3],
        };
        let sol = optimize_beamforming(&sub, 1e-13).unwrap();
        assert_eq!(sol.nu, 0.0);
        assert_eq!(sol.beamformer.frobenius_sqr(), 0.0);
        assert_eq!(kkt_residual(&sub, &sol.beamformer, 0.0, 1e-13), 0.0);
    }

    #[test]
    fn scalar_inactive_constraint() {
        let sol = optimize_beamforming(&scalar(0.1), 1.0).unwrap();
        assert_eq!(sol.nu, 0.0);
        assert!((sol.beamformer.w[(0, 0)] - c(0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn scalar_active_constraint() {
        // w = a / (0.5 + ν), |w| = 1  ⇒  ν = 9.5
        let sub = scalar(10.0);
        let sol = optimize_beamforming(&sub, 1.0).unwrap();
        assert!((sol.nu - 9.5).abs() < 1e-12, "{}", sol.nu);
        assert!((sol.beamformer.w[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(kkt_residual(&sub, &sol.beamformer, sol.nu, 1.0) < 1e-8);
    }

    #[test]
    fn perturbation_breaks_kkt() {
        let sub = scalar(10.0);
        let sol = optimize_beamforming(&sub, 1.0).unwrap();
        let mut w = sol.beamformer.w.clone();
        w[(0, 0)] += c(0.01, -0.01);
        assert!(kkt_residual(&sub, &Beamformer { w }, sol.nu, 1.0) > 1e-4);
    }
}
