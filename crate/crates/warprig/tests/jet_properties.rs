//! Property tests of the jet algebra.

use proptest::prelude::*;
use warprig::jet::{Jet, Var, COEFF_COUNT};

fn arb_jet() -> impl Strategy<Value = Jet> {
    // Small random expressions over the two chart variables and eps.
    (
        -1.5f64..1.5,
        -1.5f64..1.5,
        -0.5f64..0.5,
        -0.5f64..0.5,
        0u8..4,
    )
        .prop_map(|(a, b, s, t, kind)| {
            let x = Jet::var(a, Var::X1);
            let y = Jet::var(b, Var::X2);
            let mix = x * y.scale(s) + (x.sin() * y.cos()).mul_eps().scale(t);
            match kind {
                0 => mix + x.cos(),
                1 => mix * y.sin() + Jet::constant(0.3),
                2 => (mix + Jet::constant(2.5)).recip_raw(),
                _ => mix,
            }
        })
}

proptest! {
    #[test]
    fn ring_axioms_hold_exactly_or_to_roundoff(a in arb_jet(), b in arb_jet(), c in arb_jet()) {
        // Commutativity is exact (identical convolution order per term).
        let ab = a * b;
        let ba = b * a;
        for k in 0..COEFF_COUNT {
            prop_assert!((ab.coefficients()[k] - ba.coefficients()[k]).abs() <= 1e-12);
        }
        // Distributivity to roundoff.
        let lhs = a * (b + c);
        let rhs = a * b + a * c;
        for k in 0..COEFF_COUNT {
            let d = (lhs.coefficients()[k] - rhs.coefficients()[k]).abs();
            let s = 1.0 + lhs.coefficients()[k].abs().max(rhs.coefficients()[k].abs());
            prop_assert!(d / s <= 1e-13);
        }
    }

    #[test]
    fn self_division_is_unit(a in arb_jet()) {
        prop_assume!(a.value().abs() > 0.1);
        let q = a.checked_div(&a).unwrap();
        prop_assert!((q.value() - 1.0).abs() <= 1e-12);
        for k in 1..COEFF_COUNT {
            prop_assert!(q.coefficients()[k].abs() <= 1e-11);
        }
    }

    #[test]
    fn eps_block_is_linear(a in arb_jet(), b in arb_jet(), s in -2.0f64..2.0) {
        // eps-extraction is a linear operator on the algebra.
        let lhs = (a + b.scale(s)).deps();
        let rhs = a.deps() + b.deps().scale(s);
        for k in 0..COEFF_COUNT {
            let d = (lhs.coefficients()[k] - rhs.coefficients()[k]).abs();
            prop_assert!(d <= 1e-12 * (1.0 + rhs.coefficients()[k].abs()));
        }
    }

    #[test]
    fn chain_rule_matches_finite_differences(p in 0.2f64..0.9, q in 0.2f64..0.9) {
        // Random smooth composite; first partials against central FD.
        let f = |x: Jet, y: Jet| ((x * y).sin() + (x + Jet::constant(1.5)).sqrt().unwrap())
            .checked_div(&(y.cos() + Jet::constant(2.0)))
            .unwrap();
        let h = 1e-5;
        let jet = f(Jet::var(p, Var::X1), Jet::var(q, Var::X2));
        let fd = (f(Jet::constant(p + h), Jet::constant(q)).value()
            - f(Jet::constant(p - h), Jet::constant(q)).value())
            / (2.0 * h);
        let scale = 1.0 + fd.abs();
        prop_assert!((jet.d1(Var::X1) - fd).abs() / scale <= 1e-8);
    }
}
