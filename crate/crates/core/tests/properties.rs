//! Property tests for the algebraic structure: the group law, the deformed
//! groupoids, the dual group, interval enclosures and report round trips.

use approx::assert_relative_eq;
use axblab_core::funcspace::Interval;
use axblab_core::group::{GroupElement, GroupoidKind};
use axblab_core::report::{round_sig, CheckRecord, Environment, ResidualReport};
use axblab_core::semiclassic::{dual_group, dual_inverse, Slope};
use proptest::prelude::*;

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(x, neg)| if neg { -x } else { x })
}

fn element() -> impl Strategy<Value = GroupElement> {
    (-3.0..3.0, nonzero(0.2, 4.0)).prop_map(|(b, a)| GroupElement::new(b, a).unwrap())
}

fn close(x: [f64; 2], y: [f64; 2]) -> bool {
    (x[0] - y[0]).abs() <= 1e-9 * (1.0 + y[0].abs()) && (x[1] - y[1]).abs() <= 1e-9 * (1.0 + y[1].abs())
}

proptest! {
    #[test]
    fn group_law_is_associative_with_inverses(g in element(), h in element(), k in element()) {
        let lhs = g.mul(&h).mul(&k);
        let rhs = g.mul(&h.mul(&k));
        prop_assert!(lhs.dist(&rhs) <= 1e-12 * (1.0 + rhs.b.abs().max(rhs.a.abs())));
        prop_assert!(g.mul(&g.inverse()).dist(&GroupElement::identity()) <= 1e-12);
        prop_assert!(g.inverse().mul(&g).dist(&GroupElement::identity()) <= 1e-12);
    }

    #[test]
    fn deformed_groupoid_axioms(s in -1.0f64..1.0, b in -2.0f64..2.0, a in 0.2f64..3.0, free in -1.5f64..1.5) {
        let kind = GroupoidKind::DeformedOverDilations(s);
        let x = [b, a];
        prop_assume!(kind.contains(x));
        let Ok(y) = kind.right_partner(x, free) else { return Ok(()) };
        let Ok(xy) = kind.compose(x, y) else { return Ok(()) };
        prop_assert!(close(kind.left_unit(xy).unwrap(), kind.left_unit(x).unwrap()));
        prop_assert!(close(kind.right_unit(xy).unwrap(), kind.right_unit(y).unwrap()));
        let inv = kind.inverse(x).unwrap();
        prop_assert!(close(kind.compose(x, inv).unwrap(), kind.left_unit(x).unwrap()));
        prop_assert!(close(kind.compose(inv, x).unwrap(), kind.right_unit(x).unwrap()));
        prop_assert!(kind.is_unit(kind.left_unit(x).unwrap()).unwrap());
    }

    #[test]
    fn dual_group_is_a_group(b1 in -2.0f64..2.0, a1 in nonzero(0.3, 3.0), b2 in -2.0f64..2.0, a2 in nonzero(0.3, 3.0),
                             b3 in -2.0f64..2.0, a3 in nonzero(0.3, 3.0)) {
        let mul = |x: (f64, f64), y: (f64, f64)| dual_group(x.0, x.1, y.0, y.1).unwrap();
        let (x, y, z) = ((b1, a1), (b2, a2), (b3, a3));
        let (l, r) = (mul(mul(x, y), z), mul(x, mul(y, z)));
        assert_relative_eq!(l.0, r.0, epsilon = 1e-12, max_relative = 1e-12);
        assert_relative_eq!(l.1, r.1, epsilon = 1e-12, max_relative = 1e-12);
        let e = mul(x, dual_inverse(x.0, x.1).unwrap());
        assert_relative_eq!(e.0, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interval_arithmetic_encloses(lo1 in -5.0f64..5.0, w1 in 0.0f64..3.0, t1 in 0.0f64..=1.0,
                                    lo2 in 0.1f64..5.0, w2 in 0.0f64..3.0, t2 in 0.0f64..=1.0, neg in any::<bool>()) {
        let i = Interval::new(lo1, lo1 + w1);
        let j = if neg { Interval::new(-lo2 - w2, -lo2) } else { Interval::new(lo2, lo2 + w2) };
        let (x, y) = (i.lo + t1 * i.width(), j.lo + t2 * j.width());
        prop_assert!(i.add(j).contains(x + y));
        prop_assert!(i.sub(j).contains(x - y));
        prop_assert!(i.mul(j).contains(x * y));
        prop_assert!(i.div(j).unwrap().contains(x / y));
    }

    #[test]
    fn rounding_is_idempotent_and_close(x in prop::num::f64::NORMAL) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert!((r - x).abs() <= 5e-12 * x.abs());
    }

    #[test]
    fn reports_round_trip_through_json(residuals in prop::collection::vec(prop::num::f64::ANY, 1..8), seed in any::<u64>()) {
        let mut report = ResidualReport::new("group", seed, Environment::capture(1), serde_json::json!({"seed": seed}));
        for (i, r) in residuals.iter().enumerate() {
            report.push(CheckRecord::new(format!("c{i}"), "groupoid-axioms", *r, 1e-10));
        }
        let json = report.to_json().unwrap();
        let back = ResidualReport::from_json(&json).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn slope_fit_recovers_power_laws(order in 0.5f64..3.0, constant in 1e-3f64..1e3) {
        let s = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
        let r: Vec<f64> = s.iter().map(|s| constant * s.powf(order)).collect();
        let fit = Slope::fit(&s, &r).unwrap();
        assert_relative_eq!(fit.slope, order, max_relative = 1e-10);
        prop_assert!(fit.lo <= fit.slope && fit.slope <= fit.hi);
    }
}
