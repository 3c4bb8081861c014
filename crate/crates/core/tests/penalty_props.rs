use aft_integrative::penalty::{
    composite_value, group_prox, scalar_prox, sparse_group_value,
};
use aft_integrative::{Error, Family, Penalty, PenaltySpec};
use proptest::prelude::*;

fn penalty_strategy() -> impl Strategy<Value = Penalty> {
    prop_oneof![
        (0.01f64..3.0).prop_map(Penalty::lasso),
        (0.01f64..3.0, 1.01f64..12.0).prop_map(|(l, a)| Penalty::mcp(l, a)),
        (0.01f64..3.0, 2.01f64..12.0).prop_map(|(l, a)| Penalty::scad(l, a)),
    ]
}

#[test]
fn domain_errors() {
    assert!(matches!(Penalty::mcp(1.0, 3.0).value(-0.1), Err(Error::Domain(_))));
    assert!(matches!(Penalty::scad(1.0, 3.0).deriv(-1.0), Err(Error::Domain(_))));
    assert!(Penalty::mcp(1.0, 1.0).validate().is_err());
    assert!(Penalty::scad(1.0, 2.0).validate().is_err());
    assert!(Penalty::lasso(-1.0).validate().is_err());
    assert!(matches!(group_prox(&[1.0], 0.0, &Penalty::lasso(1.0)), Err(Error::Domain(_))));
}

#[test]
fn composite_and_sparse_group_examples() {
    let spec = PenaltySpec::Composite {
        outer: Penalty::mcp(1.0, 3.0),
        inner: Penalty::mcp(1.0, 3.0),
    };
    assert_eq!(composite_value(&spec, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
    let sg = PenaltySpec::SparseGroup {
        group: Penalty::mcp(1.0, 3.0),
        indiv: Penalty::mcp(1.0, 3.0),
    };
    assert_eq!(sparse_group_value(&sg, &[0.0, 0.0]).unwrap(), 0.0);
    // Group lasso spec has no composite value.
    assert!(composite_value(&PenaltySpec::GroupLasso { lambda: 1.0 }, &[1.0]).is_err());
}

#[test]
fn group_concave_rejects_lasso_base() {
    let spec = PenaltySpec::GroupConcave {
        penalty: Penalty::lasso(1.0),
    };
    assert!(spec.validate().is_err());
}

proptest! {
    /// λ⁻¹ p'(t) is nonincreasing in t, equals 1 at 0+, is nondecreasing
    /// in λ, and p is nondecreasing with p(0) = 0.
    #[test]
    fn concave_penalty_shape(pen in penalty_strategy(), t in 0.0f64..20.0, dt in 0.0f64..2.0, dl in 0.0f64..2.0) {
        let d1 = pen.deriv(t).unwrap();
        let d2 = pen.deriv(t + dt).unwrap();
        prop_assert!(d2 <= d1 + 1e-12);
        prop_assert!((pen.deriv(0.0).unwrap() - pen.lambda).abs() < 1e-12);
        prop_assert_eq!(pen.value(0.0).unwrap(), 0.0);
        prop_assert!(pen.value(t + dt).unwrap() >= pen.value(t).unwrap() - 1e-12);
        let bigger = Penalty { lambda: pen.lambda + dl, ..pen };
        prop_assert!(bigger.deriv(t).unwrap() / bigger.lambda >= d1 / pen.lambda - 1e-12);
        if let Some(sat) = pen.saturation() {
            prop_assert!(pen.value(t).unwrap() <= sat + 1e-12);
        }
    }

    #[test]
    fn value_is_integral_of_derivative(pen in penalty_strategy(), t in 0.0f64..15.0) {
        // Midpoint rule on a fine grid; p' is piecewise linear so the error
        // is only at the kinks.
        let k = 4000;
        let h = t / k as f64;
        let integral: f64 = (0..k).map(|i| pen.deriv((i as f64 + 0.5) * h).unwrap() * h).sum();
        prop_assert!((integral - pen.value(t).unwrap()).abs() < 1e-6 * (1.0 + t));
    }

    #[test]
    fn scalar_prox_beats_grid(pen in penalty_strategy(), z in -8.0f64..8.0, step in 0.05f64..4.0) {
        let f = |x: f64| 0.5 * (x - z).powi(2) + step * pen.value(x.abs()).unwrap();
        let p = scalar_prox(z, step, &pen).unwrap();
        let lim = (z.abs() / 1e-3).ceil() as i64 + 100;
        let best = (-lim..=lim).map(|k| f(k as f64 * 1e-3)).fold(f64::INFINITY, f64::min);
        prop_assert!(f(p) <= best + 1e-9);
        // Sign preserved and no expansion.
        prop_assert!(p * z >= 0.0);
        prop_assert!(p.abs() <= z.abs() + 1e-15);
    }

    #[test]
    fn group_prox_is_radial(pen in penalty_strategy(), v in prop::collection::vec(-5.0f64..5.0, 1..5), step in 0.05f64..3.0) {
        let out = group_prox(&v, step, &pen).unwrap();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let no = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(nv > 0.0);
        if no > 0.0 {
            for (a, b) in out.iter().zip(&v) {
                prop_assert!((a / no - b / nv).abs() < 1e-12);
            }
        }
        let r = scalar_prox(nv, step, &pen).unwrap();
        prop_assert!((no - r).abs() < 1e-12 * (1.0 + nv));
    }

    #[test]
    fn composite_matches_definition(
        lo in 0.05f64..2.0, li in 0.05f64..2.0, a in 1.2f64..8.0,
        row in prop::collection::vec(-4.0f64..4.0, 1..4)
    ) {
        let outer = Penalty::mcp(lo, row.len() as f64 * a * li * li / (2.0 * lo));
        let inner = Penalty::mcp(li, a);
        let spec = PenaltySpec::Composite { outer, inner };
        let s: f64 = row.iter().map(|b| inner.value(b.abs()).unwrap()).sum();
        prop_assert!((composite_value(&spec, &row).unwrap() - outer.value(s).unwrap()).abs() < 1e-12);
        prop_assert!((spec.zero_threshold() - lo * li).abs() < 1e-15);
    }

    #[test]
    fn sparse_group_matches_definition(
        l1 in 0.05f64..2.0, l2 in 0.05f64..2.0, a in 1.2f64..8.0,
        row in prop::collection::vec(-4.0f64..4.0, 1..4)
    ) {
        let group = Penalty::mcp(l1, a);
        let indiv = Penalty::mcp(l2, a);
        let spec = PenaltySpec::SparseGroup { group, indiv };
        let norm = row.iter().map(|b| b * b).sum::<f64>().sqrt();
        let expect = group.value(norm).unwrap()
            + row.iter().map(|b| indiv.value(b.abs()).unwrap()).sum::<f64>();
        prop_assert!((sparse_group_value(&spec, &row).unwrap() - expect).abs() < 1e-12);
        prop_assert!((spec.row_value(&row) - expect).abs() < 1e-12);
    }
}

#[test]
fn family_minimum_a() {
    assert_eq!(Family::Mcp.min_a(), Some(1.0));
    assert_eq!(Family::Scad.min_a(), Some(2.0));
    assert_eq!(Family::Lasso.min_a(), None);
}
