mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starris::beam_opt::{kkt_residual, mmse_combiner, optimize_beamforming, BeamSubproblem};
use starris::model::{effective_channels, update_auxiliaries_from, Beamformer, LinkGains};
use starris::numerics::{CMatrix, C64};

use common::*;

fn instance(seed: u64) -> (BeamSubproblem, f64) {
    let st = random_state(seed, 8);
    let heff = effective_channels(&st.ch, &st.star).unwrap();
    let aux = update_auxiliaries_from(&LinkGains::new(&heff, &st.beam, st.cfg.sigma2), &st.power.p);
    (BeamSubproblem::new(&st.power, &aux, &heff), st.cfg.sigma2)
}

/// `Σ_u 2Re{a_uᴴ w_u} − |λ_u|² (w_uᴴ A w_u + σ²‖w_u‖²)` written out elementwise.
fn reference_objective(sub: &BeamSubproblem, w: &CMatrix, sigma2: f64) -> f64 {
    let m = w.rows();
    (0..w.cols())
        .map(|u| {
            let mut lin = C64::new(0.0, 0.0);
            let mut quad = 0.0;
            for i in 0..m {
                lin += sub.targets[u][i].conj() * w[(i, u)];
                quad += sigma2 * w[(i, u)].norm_sqr();
                for j in 0..m {
                    quad += (w[(i, u)].conj() * sub.a[(i, j)] * w[(j, u)]).re;
                }
            }
            2.0 * lin.re - sub.weights[u] * quad
        })
        .sum()
}

#[test]
fn optimum_dominates_random_feasible_combiners() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for seed in 0..40 {
        let (sub, sigma2) = instance(seed);
        let sol = optimize_beamforming(&sub, sigma2).unwrap();
        assert!(sol.beamformer.frobenius_sqr() <= 1.0 + 1e-12);
        assert!(kkt_residual(&sub, &sol.beamformer, sol.nu, sigma2) <= 1e-8);
        let best = reference_objective(&sub, &sol.beamformer.w, sigma2);
        assert!((best - sub.objective(&sol.beamformer, sigma2)).abs() <= 1e-10 * best.abs().max(1e-300));
        for _ in 0..100 {
            let w = random_w(sub.antennas(), sub.users(), &mut rng);
            let v = reference_objective(&sub, &w.w, sigma2);
            assert!(v <= best + 1e-10 * best.abs(), "seed {seed}: {v} > {best}");
        }
    }
}

#[test]
fn interior_optimum_has_zero_multiplier() {
    // a strong full-rank quadratic term keeps the unconstrained optimum inside the ball
    let sub = BeamSubproblem {
        a: CMatrix::from_diag(&[10.0, 25.0]),
        targets: vec![vec![C64::new(0.1, 0.0), C64::new(0.0, -0.1)]],
        weights: vec![1.0],
    };
    let sol = optimize_beamforming(&sub, 1e-3).unwrap();
    assert_eq!(sol.nu, 0.0);
    assert!(sol.beamformer.frobenius_sqr() < 1.0);
    assert!(kkt_residual(&sub, &sol.beamformer, 0.0, 1e-3) <= 1e-8);
}

#[test]
fn zero_targets_give_zero_combiners() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = 3;
    let a = CMatrix::from_fn(m, m, |_, _| gauss(&mut rng));
    let sub = BeamSubproblem {
        a: a.matmul(&a.adjoint()),
        targets: vec![vec![C64::new(0.0, 0.0); m]; 2],
        weights: vec![rng.gen(), 0.0],
    };
    let sol = optimize_beamforming(&sub, 1e-2).unwrap();
    assert_eq!(sol.beamformer.frobenius_sqr(), 0.0);
    Beamformer::new(sol.beamformer.w).unwrap();
}

#[test]
fn mmse_combiner_maximizes_every_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for seed in 0..30 {
        let st = random_state(seed, 8);
        let heff = effective_channels(&st.ch, &st.star).unwrap();
        let rows: Vec<Vec<C64>> = (0..heff.rows()).map(|r| heff.row(r).to_vec()).collect();
        let w = mmse_combiner(&st.power, &heff, st.cfg.sigma2).unwrap();
        assert!((w.frobenius_sqr() - 1.0).abs() <= 1e-12);
        let best: Vec<f64> = (0..rows.len()).map(|u| sinr(&rows, &w.w, &st.power.p, st.cfg.sigma2, u)).collect();
        for _ in 0..50 {
            let other = random_w(st.cfg.antennas, rows.len(), &mut rng);
            for (u, b) in best.iter().enumerate() {
                let v = sinr(&rows, &other.w, &st.power.p, st.cfg.sigma2, u);
                assert!(v <= b * (1.0 + 1e-9), "seed {seed} user {u}: {v} > {b}");
            }
        }
    }
}
