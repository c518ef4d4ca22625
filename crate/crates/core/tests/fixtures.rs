mod common;

use common::*;
use rost_core::boundaries::{detect_flats, detect_jumps, generalized_inverse};
use rost_core::embed::{killed_density_mc, Bins, KillingDomain, Monitoring, PathConfig, Start};
use rost_core::io::to_canonical_json;
use rost_core::measures::{support_summary, validate, ProbabilityMeasure};
use rost_core::payoff::{infinite_horizon, HorizonCase, PayoffCurve};
use rost_core::solver::vt_continuity_probe;
use rost_core::{Error, Extended, Side};

#[test]
fn support_summaries() {
    let nu = ProbabilityMeasure::dirac(0.0).unwrap();
    let two = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let s = support_summary(&nu, &two).unwrap();
    assert_eq!((s.a_plus, s.a_minus), (0.0, 0.0));
    assert_eq!((s.bhat_plus, s.bhat_minus), (Extended::Finite(1.0), Extended::Finite(1.0)));

    let s = support_summary(&nu, &ProbabilityMeasure::uniform(-1.0, 1.0).unwrap()).unwrap();
    assert_eq!((s.bhat_plus, s.bhat_minus), (Extended::Finite(0.0), Extended::Finite(0.0)));
    assert_eq!((s.mu_plus, s.mu_minus), (Extended::Finite(1.0), Extended::Finite(1.0)));

    let s = support_summary(&nu, &ProbabilityMeasure::uniform(1.0, 2.0).unwrap()).unwrap();
    assert_eq!(s.bhat_plus, Extended::Finite(1.0));
    assert_eq!(s.bhat_minus, Extended::Infinite);
}

#[test]
fn validator_examples() {
    let nu = ProbabilityMeasure::dirac(0.0).unwrap();
    let two = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    assert!(validate(&nu, &two).ok());

    let split = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let r = validate(&split, &ProbabilityMeasure::uniform(-0.5, 0.5).unwrap());
    assert!(!r.d1_ok);
    assert!(r.messages[0].contains("D.1"));

    let edge = ProbabilityMeasure::discrete(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
    let r = validate(&nu, &edge);
    assert!(r.d1_ok && !r.d2_ok);
    assert!(r.messages.iter().any(|m| m.contains("D.2")));
}

#[test]
fn split_pair_payoff_values() {
    let nu = ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    let g = PayoffCurve::new(&nu, &ProbabilityMeasure::uniform(-0.5, 0.5).unwrap());
    assert_eq!(g.eval(-2.0), -0.75);
    assert_eq!(g.eval(2.0), -0.75);
    assert_eq!(g.eval(0.0), 0.0);
}

#[test]
fn two_point_payoff_is_capped_distance() {
    let (nu, mu) = (ProbabilityMeasure::dirac(0.0).unwrap(), ProbabilityMeasure::discrete(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap());
    let g = PayoffCurve::new(&nu, &mu);
    for x in [-3.0, -1.0, -0.25, 0.0, 0.5, 1.0, 2.5] {
        assert_eq!(g.eval(x), f64::min(f64::abs(x), 1.0));
    }
    let ih = infinite_horizon(&g, &support_summary(&nu, &mu).unwrap());
    assert_eq!(ih.case, HorizonCase::Balanced);
}

#[test]
fn gap_violation_blocks_solving() {
    let p = problem(split_measures(), 1.0, 0.05, None);
    assert!(matches!(p.solve(1.0), Err(Error::NoGap { .. })));
}

#[test]
fn two_point_barrier_is_flat_at_one() {
    let dx = 0.01;
    let p = problem(two_point_measures(), 1.0, dx, None);
    let s = p.solve(1.0).unwrap();
    let r = &s.barrier;
    assert_eq!(r.s_plus[0], Extended::Finite(1.0));
    for j in 1..=r.knots() {
        assert!((r.s_plus[j].finite().unwrap() - 1.0).abs() <= 2.0 * dx);
        assert!((r.s_minus[j].finite().unwrap() - 1.0).abs() <= 2.0 * dx);
    }
    let flats = detect_flats(r, p.level_tol(), 0.1);
    assert!(flats.iter().any(|f| f.side == Side::Upper && f.t_start == 0.0 && (f.t_end - 1.0).abs() < 1e-9));
    assert!(detect_jumps(r, p.jump_tol(), p.ramp_gap()).is_empty());

    let inv = generalized_inverse(r);
    assert_eq!(inv.phi(1.5), Extended::Infinite);
    assert_eq!(inv.phi(0.3), Extended::Finite(0.0));
}

#[test]
fn atom_at_gap_edge_gives_terminal_flat() {
    // mu has an atom at bhat_+ = 0.7, so b_+ sits there on a terminal interval.
    let dx = 0.01;
    let p = problem(three_atom_measures(), 1.0, dx, None);
    let s = p.solve(1.0).unwrap();
    let n = s.boundaries.steps();
    let tail = &s.boundaries.b_plus[n - n / 10..];
    assert!(tail.iter().all(|b| (b.finite().unwrap() - 0.7).abs() <= dx));
}

#[test]
fn uniform_inverse_is_non_decreasing() {
    let p = problem(uniform_measures(), 1.0, 0.01, None);
    let s = p.solve(1.0).unwrap();
    let inv = generalized_inverse(&s.barrier);
    let top = s.barrier.s_plus[s.barrier.knots()].finite().unwrap();
    let mut prev = Extended::Finite(0.0);
    for k in 0..200 {
        let x = top * k as f64 / 200.0;
        let v = inv.phi(x);
        assert!(v >= prev && v.is_finite());
        prev = v;
    }
}

#[test]
fn stopping_region_has_zero_time_derivative() {
    let p = problem(two_point_measures(), 1.0, 0.01, None);
    let s = p.solve(1.0).unwrap();
    let probe = vt_continuity_probe(&s.surface, 0.1, 0.9);
    assert_eq!(probe.max_stopping_vt, 0.0);
    assert!(probe.max_boundary_vt <= 0.05);
}

#[test]
fn killed_started_on_boundary_dies() {
    let p = problem(two_point_measures(), 1.0, 0.01, None);
    let s = p.solve(1.0).unwrap();
    let cfg = PathConfig { n_paths: 20_000, dt_sim: 1e-4, t_max: 1.0, seed: 3, bridge_correction: false };
    let bins = Bins { lo: -1.0, hi: 1.0, count: 10 };
    let est = killed_density_mc(KillingDomain::Forward(&s.boundaries), 0.0, Start::Point(1.0), 0.5, bins, &cfg, Monitoring::ExcludeStart).unwrap();
    assert!(est.survivor_mass <= 0.05);
}

#[test]
fn killed_density_is_symmetric_for_symmetric_fixture() {
    let p = problem(two_point_measures(), 1.0, 0.01, None);
    let s = p.solve(1.0).unwrap();
    let cfg = PathConfig { n_paths: 100_000, dt_sim: 1e-3, t_max: 1.0, seed: 4, bridge_correction: false };
    let bins = Bins { lo: -1.0, hi: 1.0, count: 10 };
    let est = killed_density_mc(KillingDomain::Forward(&s.boundaries), 0.1, Start::Point(0.0), 0.6, bins, &cfg, Monitoring::ExcludeStart).unwrap();
    for j in 0..5 {
        let (a, b) = (est.density[j], est.density[9 - j]);
        let se = (est.std_err[j].powi(2) + est.std_err[9 - j].powi(2)).sqrt();
        assert!((a - b).abs() <= 3.0 * se + 1e-12, "bin {j}: {a} vs {b}");
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = paths(2_000, 4e-4, 2.0, 9);
    let run = || {
        let p = problem(two_point_measures(), 1.0, 0.02, Some(cfg));
        let s = p.solve(p.embedding_horizon()).unwrap();
        to_canonical_json(&p.embed(&s.barrier).unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}
