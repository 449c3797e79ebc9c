use pinsat::bspline::{basis, BSplineCurve};
use proptest::prelude::*;

fn curve_strategy() -> impl Strategy<Value = (BSplineCurve, Vec<Vec<f64>>)> {
    (1usize..=5, 0usize..6, 1usize..=3)
        .prop_flat_map(|(k, extra, dim)| {
            let n = k + 1 + extra;
            (
                Just(k),
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), n),
                -2.0f64..2.0,
                0.1f64..5.0,
            )
        })
        .prop_map(|(k, pts, t0, len)| (BSplineCurve::from_points(k, &pts, t0, t0 + len).unwrap(), pts))
}

fn param(curve: &BSplineCurve, s: f64) -> f64 {
    let (a, b) = curve.span();
    a + s * (b - a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn basis_partition_nonnegative_local((curve, _) in curve_strategy(), s in 0.0f64..=1.0) {
        let t = param(&curve, s);
        let k = curve.degree();
        let knots = curve.knots().as_slice();
        let mut sum = 0.0;
        for i in 0..curve.num_ctrl() {
            let v = basis(i, k, t, curve.knots()).unwrap();
            prop_assert!(v >= 0.0);
            if t < knots[i] || t > knots[i + k + 1] {
                prop_assert_eq!(v, 0.0);
            }
            sum += v;
        }
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_lies_in_active_hull_box((curve, _) in curve_strategy(), s in 0.0f64..=1.0) {
        let t = param(&curve, s);
        let p = curve.evaluate(t).unwrap();
        let bb = curve.active_hull_box(t).unwrap();
        prop_assert!(bb.contains_with_tol(&p, 1e-12));
    }

    #[test]
    fn clamped_ends_interpolate((curve, pts) in curve_strategy()) {
        let (a, b) = curve.span();
        let first = curve.evaluate(a).unwrap();
        let last = curve.evaluate(b).unwrap();
        for (x, y) in first.iter().zip(&pts[0]) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in last.iter().zip(pts.last().unwrap()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference((curve, _) in curve_strategy(), s in 0.05f64..0.95) {
        let t = param(&curve, s);
        let (a, b) = curve.span();
        let h = 1e-6 * (b - a);
        let knots = curve.knots().as_slice();
        prop_assume!(knots.iter().all(|kn| (kn - t).abs() > 4.0 * h));
        let d = curve.derivative_curve(1).unwrap().evaluate(t).unwrap();
        let hi = curve.evaluate(t + h).unwrap();
        let lo = curve.evaluate(t - h).unwrap();
        for c in 0..curve.dim() {
            let fd = (hi[c] - lo[c]) / (2.0 * h);
            let scale = d[c].abs().max(fd.abs()).max(1.0);
            prop_assert!((d[c] - fd).abs() / scale < 1e-5, "{} vs {}", d[c], fd);
        }
    }
}
