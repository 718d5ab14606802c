//! Property tests for the algebraic invariants: δ-norm axioms, the cocycle
//! law of the derivative flow, QR round-trips, and monotonicity of the
//! regularity function in ε.

use oseledets_core::deltanorm::{spectral_abscissa, DeltaNorm};
use oseledets_core::dynamics::{FlowPoint, Observable, SuspensionFlow};
use oseledets_core::mat::Mat;
use oseledets_core::regularity::regularity_d;
use proptest::prelude::*;

fn upper_triangular(k: usize, beta: f64) -> impl Strategy<Value = Mat> {
    proptest::collection::vec(-beta..beta, k * k).prop_map(move |vals| {
        Mat::from_fn(k, |i, j| if j >= i { vals[i * k + j] } else { 0.0 })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn delta_norm_bounded_by_abscissa_plus_delta(
        k in 2usize..=5,
        seed_vals in proptest::collection::vec(-10.0f64..10.0, 25),
        delta in 0.05f64..1.0,
    ) {
        let b = Mat::from_fn(k, |i, j| if j >= i { seed_vals[i * 5 + j] } else { 0.0 });
        let norm = DeltaNorm::new(k, 10.0, delta).unwrap();
        let nb = norm.op_norm(&b).unwrap();
        prop_assert!(nb <= spectral_abscissa(&b) + delta + 1e-9);
    }

    #[test]
    fn delta_norm_is_a_norm(
        k in 2usize..=4,
        b1 in upper_triangular(4, 5.0),
        b2 in upper_triangular(4, 5.0),
        c in -3.0f64..3.0,
    ) {
        // beta covers sums and products of the operands, not just the operands
        let norm = DeltaNorm::new(k, 200.0, 0.3).unwrap();
        let a = Mat::from_fn(k, |i, j| b1[(i, j)]);
        let b = Mat::from_fn(k, |i, j| b2[(i, j)]);
        let na = norm.op_norm(&a).unwrap();
        let nb = norm.op_norm(&b).unwrap();
        // triangle inequality
        let sum = a.add(&b);
        prop_assert!(norm.op_norm(&sum).unwrap() <= na + nb + 1e-9);
        // absolute homogeneity
        let scaled = a.scale(c);
        prop_assert!((norm.op_norm(&scaled).unwrap() - c.abs() * na).abs() <= 1e-9 * (1.0 + na));
        // submultiplicativity (operator norm)
        let prod = a.mul(&b);
        prop_assert!(norm.op_norm(&prod).unwrap() <= na * nb + 1e-9);
    }

    #[test]
    fn derivative_satisfies_cocycle_law(
        x0 in 0.0f64..1.0,
        x1 in 0.0f64..1.0,
        fiber in 0.0f64..0.9,
        s in 0.1f64..4.0,
        t in 0.1f64..4.0,
    ) {
        let flow = SuspensionFlow::cat_constant(1.0);
        let p = FlowPoint::new([x0, x1], fiber);
        let full = flow.jacobian_cocycle(p, s + t);
        let first = flow.jacobian_cocycle(p, s);
        let second = flow.jacobian_cocycle(flow.evolve(p, s), t);
        let composed = second.mul(&first);
        let scale = 1.0 + full.max_abs();
        prop_assert!(full.sub(&composed).max_abs() <= 1e-8 * scale);
    }

    #[test]
    fn qr_round_trips(
        vals in proptest::collection::vec(-2.0f64..2.0, 16),
    ) {
        let a = Mat::from_fn(4, |i, j| vals[i * 4 + j] + if i == j { 3.0 } else { 0.0 });
        let (q, r) = a.qr_pos().unwrap();
        prop_assert!(q.orthogonality_drift() <= 1e-10);
        prop_assert!(r.is_upper_triangular(1e-12));
        for i in 0..4 {
            prop_assert!(r[(i, i)] > 0.0);
        }
        prop_assert!(q.mul(&r).sub(&a).max_abs() <= 1e-10);
    }

    #[test]
    fn regularity_is_monotone_in_eps(
        x0 in 0.0f64..1.0,
        x1 in 0.0f64..1.0,
        eps_lo in 0.05f64..0.2,
        gap in 0.01f64..0.2,
    ) {
        let flow = SuspensionFlow::cat_constant(1.0);
        let u = Observable::cosine([1, 0], 0.5);
        let p = FlowPoint::new([x0, x1], 0.0);
        let lo = regularity_d(&flow, &u, p, eps_lo, 200.0).unwrap();
        let hi = regularity_d(&flow, &u, p, eps_lo + gap, 200.0).unwrap();
        prop_assert!(hi.log_d <= lo.log_d + 1e-12);
    }
}
