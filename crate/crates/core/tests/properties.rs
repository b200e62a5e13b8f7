use proptest::prelude::*;

use punctorus::metrics::lipschitz_brute;
use punctorus::slopes::{apply_mapping_class, farey_distance, intersection};
use punctorus::{MappingClass, Slope, TracePoint};

fn slope() -> impl Strategy<Value = Slope> {
    (-40i64..=40, 0i64..=40)
        .prop_filter("primitive", |&(p, q)| Slope::new(p, q).is_ok())
        .prop_map(|(p, q)| Slope::new(p, q).unwrap())
}

/// Words of length up to six in the two basic twists and their inverses.
fn mapping_class() -> impl Strategy<Value = MappingClass> {
    prop::collection::vec(0u8..4, 0..6).prop_map(|word| {
        word.into_iter().fold(MappingClass::IDENTITY, |m, letter| {
            let g = match letter {
                0 => MappingClass::twist_zero(),
                1 => MappingClass::twist_zero().inverse(),
                2 => MappingClass::twist_infinity(),
                _ => MappingClass::twist_infinity().inverse(),
            };
            m.compose(&g)
        })
    })
}

/// Thick points with a moderate twist, whose stretch-maximizing curves lie
/// in a small denominator box.
fn moderate_point() -> impl Strategy<Value = TracePoint> {
    (-0.5f64..1.5, -2.0f64..2.0)
        .prop_map(|(ln_len, t)| TracePoint::from_fn(ln_len.exp(), t).unwrap())
}

fn point() -> impl Strategy<Value = TracePoint> {
    (-3.0f64..2.5, -30.0f64..30.0)
        .prop_map(|(ln_len, t)| TracePoint::from_fn(ln_len.exp(), t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intersection_is_mapping_class_invariant(a in slope(), b in slope(), m in mapping_class()) {
        let (ma, mb) = (apply_mapping_class(&m, a), apply_mapping_class(&m, b));
        prop_assert_eq!(intersection(ma, mb), intersection(a, b));
    }

    #[test]
    fn farey_distance_is_a_symmetric_invariant(a in slope(), b in slope(), m in mapping_class()) {
        let d = farey_distance(a, b);
        prop_assert_eq!(d, farey_distance(b, a));
        prop_assert_eq!(d, farey_distance(apply_mapping_class(&m, a), apply_mapping_class(&m, b)));
        prop_assert_eq!(d == 0, a == b);
        prop_assert_eq!(d == 1, intersection(a, b) == 1);
    }

    #[test]
    fn chart_round_trips(ln_len in -3.0f64..2.5, t in -30.0f64..30.0) {
        let len = ln_len.exp();
        let (l, u) = TracePoint::from_fn(len, t).unwrap().chart();
        prop_assert!((l - len).abs() <= 1e-9 * len);
        prop_assert!((u - t).abs() <= 1e-7 * t.abs().max(1.0));
    }

    #[test]
    fn traces_satisfy_the_markov_identity(x in point(), m in mapping_class()) {
        let moved = x.pullback(&m);
        let r = moved.markov_residual();
        prop_assert!(r.abs() < 1e-9, "residual {}", r);
    }

    #[test]
    fn pullback_relabels_curves(x in point(), m in mapping_class(), a in slope()) {
        let u = x.pullback(&m).hyp_length(a);
        let v = x.hyp_length(apply_mapping_class(&m, a));
        prop_assert!((u - v).abs() <= 1e-9 * u.max(1.0), "{} vs {}", u, v);
    }

    #[test]
    fn lipschitz_distance_is_nonnegative_and_vanishes_on_the_diagonal(x in moderate_point(), y in moderate_point()) {
        let (d, _) = lipschitz_brute(&x, &y, 12);
        prop_assert!(d >= -1e-9, "d = {}", d);
        let (z, _) = lipschitz_brute(&x, &x, 12);
        prop_assert!(z.abs() < 1e-12);
    }
}
