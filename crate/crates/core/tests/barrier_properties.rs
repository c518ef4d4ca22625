use proptest::prelude::*;
use rost_core::boundaries::{generalized_inverse, isotonic_non_increasing, raw_violation, reverse, BoundarySet, ReversedBarrier};
use rost_core::Extended;

/// Non-decreasing knot levels on the quarter-dx lattice, optionally
/// switching to the infinite sentinel from some knot on.
fn side(len: usize, allow_infinite: bool) -> impl Strategy<Value = Vec<Extended>> {
    (0.0f64..2.0, prop::collection::vec(0u8..4, len - 1), prop::option::of(1..len))
        .prop_map(move |(start, steps, inf_from)| {
            let mut level = (start * 40.0).round() / 40.0;
            let mut out = vec![Extended::Finite(level)];
            for (j, s) in steps.into_iter().enumerate() {
                level += s as f64 * 0.025;
                let infinite = allow_infinite && inf_from.is_some_and(|k| j + 1 >= k);
                out.push(if infinite { Extended::Infinite } else { Extended::Finite(level) });
            }
            out
        })
}

fn barrier() -> impl Strategy<Value = ReversedBarrier> {
    (5usize..60, any::<bool>())
        .prop_flat_map(|(len, upper_infinite)| (side(len, upper_infinite), side(len, !upper_infinite)))
        .prop_map(|(p, m)| ReversedBarrier::new(0.01, p, m).unwrap())
}

proptest! {
    #[test]
    fn reverse_then_re_reverse_is_identity(r in barrier()) {
        let n = r.knots();
        // Rebuild the forward boundaries the barrier came from.
        let b_plus: Vec<Extended> = (0..=n).map(|k| r.s_plus[n - k]).collect();
        let b_minus: Vec<Extended> = (0..=n).map(|k| r.s_minus[n - k]).collect();
        let b = BoundarySet {
            dt: r.dt,
            dx: 0.025,
            horizon: r.horizon(),
            b_plus: b_plus.clone(),
            b_minus: b_minus.clone(),
            raw_violation_plus: 0.0,
            raw_violation_minus: 0.0,
        };
        let again = reverse(&b).unwrap();
        prop_assert_eq!(&again, &r);
        let (p, m) = again.re_reverse();
        prop_assert_eq!(p, b_plus);
        prop_assert_eq!(m, b_minus);
    }

    #[test]
    fn membership_matches_inverse_at_knots(r in barrier(), picks in prop::collection::vec((1usize..1000, -3.0f64..3.0), 1000)) {
        let inv = generalized_inverse(&r);
        for (k, x) in picks {
            let j = 1 + k % r.knots();
            let t = r.knot_time(j);
            // Grid points hit knot levels exactly, so ties are exercised.
            let x = (x * 40.0).round() / 40.0;
            let inside = r.contains(t, x);
            let before = inv.phi(x) < Extended::Finite(t);
            prop_assert_eq!(inside, before, "t = {}, x = {}", t, x);
        }
    }

    #[test]
    fn membership_is_monotone_in_time(r in barrier(), x in -3.0f64..3.0) {
        let mut seen = false;
        for j in 1..=r.knots() {
            let inside = r.contains(r.knot_time(j), x);
            prop_assert!(!seen || inside);
            seen |= inside;
        }
    }

    #[test]
    fn isotonic_projection(raw in prop::collection::vec(-2.0f64..2.0, 1..80)) {
        let out = isotonic_non_increasing(&raw);
        prop_assert_eq!(out.len(), raw.len());
        prop_assert!(out.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let sum_in: f64 = raw.iter().sum();
        let sum_out: f64 = out.iter().sum();
        prop_assert!((sum_in - sum_out).abs() < 1e-9);
        prop_assert!(raw_violation(&out) <= 1e-12);
        let twice = isotonic_non_increasing(&out);
        for (a, b) in twice.iter().zip(&out) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn isotonic_keeps_monotone_input(mut raw in prop::collection::vec(-2.0f64..2.0, 1..80)) {
        raw.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(isotonic_non_increasing(&raw), raw);
    }
}
