mod common;

use cadlag_qv::CadlagPath;
use common::step_path;
use proptest::prelude::*;

proptest! {
    #[test]
    fn value_is_left_limit_plus_jump(x in step_path(), t in 0.0001f64..=1.0) {
        let lhs = x.evaluate(t).unwrap();
        let rhs = x.left_limit(t).unwrap() + x.jump_at(t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn jumps_are_the_duplicated_knots(x in step_path()) {
        let knots = x.knots();
        let duplicated: Vec<(f64, f64)> = knots
            .windows(2)
            .filter(|w| w[0].time == w[1].time)
            .map(|w| (w[1].time, w[1].value - w[0].value))
            .collect();
        prop_assert_eq!(x.jumps_up_to(1.0).unwrap(), duplicated);
    }

    #[test]
    fn combination_evaluates_pointwise(
        x in step_path(),
        y in step_path(),
        w in (-3.0f64..3.0, -3.0f64..3.0),
        t in 0.0f64..=1.0,
    ) {
        let z = CadlagPath::pointwise_combine(&x, &y, w).unwrap();
        let want = w.0 * x.evaluate(t).unwrap() + w.1 * y.evaluate(t).unwrap();
        let got = z.evaluate(t).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
        if t > 0.0 {
            let left = w.0 * x.left_limit(t).unwrap() + w.1 * y.left_limit(t).unwrap();
            prop_assert!((z.left_limit(t).unwrap() - left).abs() <= 1e-12 * (1.0 + left.abs()));
        }
    }

    #[test]
    fn frozen_after_extension(x in step_path(), t in 1.0f64..3.0) {
        let ext = x.extend_to(3.0).unwrap();
        prop_assert_eq!(ext.evaluate(t).unwrap(), x.evaluate(1.0).unwrap());
    }
}

#[test]
fn no_left_limit_at_zero() {
    let x = CadlagPath::constant(1.0, 2.0).unwrap();
    assert!(x.left_limit(0.0).is_err());
    assert!(x.evaluate(1.5).is_err());
}
