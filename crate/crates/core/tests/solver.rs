mod common;

use starris::bcd::{run_scheme, Scheme, Termination};
use starris::scenario::{draw_trial, ChannelSet, SystemConfig};

use common::*;

fn small() -> SystemConfig {
    SystemConfig {
        elements: 8,
        antennas: 2,
        users_a: 2,
        users_b: 2,
        starts: 2,
        seed: 5,
        ..SystemConfig::desk()
    }
}

#[test]
fn every_scheme_ascends_and_stays_feasible() {
    let cfg = small();
    for trial in 0..3 {
        let ch = draw_trial(&cfg, trial);
        for scheme in Scheme::ALL {
            let rep = run_scheme(scheme, &cfg, &ch, trial).unwrap();
            assert!(rep.trace.windows(2).all(|t| t[1] >= t[0]), "{scheme} trace drops");
            assert!(rep.trace[0] >= rep.initial_rate);
            let st = &rep.final_state;
            st.check_feasible(&cfg).unwrap();
            let reference = sum_rate(&heff(&ch, &st.star), &st.beam.w, &st.power.p, cfg.sigma2);
            assert!(rel_err(rep.sum_rate(), reference) <= 1e-10, "{scheme}: {} vs {reference}", rep.sum_rate());
            assert_eq!(rep.iterations, rep.trace.len());
        }
    }
}

#[test]
fn frozen_blocks_stay_frozen() {
    let cfg = small();
    let ch = draw_trial(&cfg, 1);
    let fstar = run_scheme(Scheme::Fstar, &cfg, &ch, 1).unwrap();
    assert_eq!(fstar.final_state.star.alpha_t, starris::bcd::fixed_split(cfg.elements));

    let frozen = run_scheme(Scheme::RabmRsv, &cfg, &ch, 1).unwrap();
    let again = run_scheme(Scheme::RabmRsv, &cfg, &ch, 1).unwrap();
    assert_eq!(frozen.final_state.star, again.final_state.star);
    assert_eq!(frozen.final_state.beam.w, again.final_state.beam.w);
}

#[test]
fn runs_are_reproducible() {
    let cfg = small();
    let ch = draw_trial(&cfg, 4);
    let a = run_scheme(Scheme::Proposed, &cfg, &ch, 4).unwrap();
    let b = run_scheme(Scheme::Proposed, &cfg, &ch, 4).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.final_state.star, b.final_state.star);
    assert_eq!(a.final_state.power, b.final_state.power);

    let other = SystemConfig { seed: 6, ..cfg.clone() };
    let c = run_scheme(Scheme::Proposed, &other, &draw_trial(&other, 4), 4).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn zero_channels_give_zero_rate() {
    let cfg = small();
    let ch = ChannelSet::zeros(&cfg);
    for scheme in Scheme::ALL {
        let rep = run_scheme(scheme, &cfg, &ch, 0).unwrap();
        assert_eq!(rep.sum_rate(), 0.0);
        assert_eq!(rep.termination, Termination::Converged);
        assert_eq!(rep.iterations, 1);
    }
}

#[test]
fn lone_user_transmits_at_full_power() {
    let cfg = SystemConfig {
        users_a: 1,
        users_b: 0,
        ..small()
    };
    let ch = draw_trial(&cfg, 2);
    let rep = run_scheme(Scheme::RabmRsv, &cfg, &ch, 2).unwrap();
    assert_eq!(rep.final_state.power.p, vec![cfg.p_max]);
}

#[test]
fn more_starts_never_hurt() {
    let one = SystemConfig { starts: 1, ..small() };
    let four = SystemConfig { starts: 4, ..small() };
    for trial in 0..3 {
        let ch = draw_trial(&one, trial);
        for scheme in [Scheme::Proposed, Scheme::Rabm, Scheme::Fstar] {
            let a = run_scheme(scheme, &one, &ch, trial).unwrap().sum_rate();
            let b = run_scheme(scheme, &four, &ch, trial).unwrap().sum_rate();
            assert!(b >= a, "{scheme}: {b} < {a}");
        }
    }
}

#[test]
fn mismatched_channels_are_rejected() {
    let cfg = small();
    let ch = draw_trial(&SystemConfig { elements: 9, ..cfg.clone() }, 0);
    assert!(run_scheme(Scheme::Proposed, &cfg, &ch, 0).is_err());
}
