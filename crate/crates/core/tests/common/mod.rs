#![allow(dead_code)]

use cadlag_qv::CadlagPath;
use proptest::prelude::*;

/// Declared jumps on `(0, 1)` plus an optional sampled wiggle.
pub fn step_path() -> impl Strategy<Value = CadlagPath> {
    (
        -1.0f64..1.0,
        prop::collection::vec((0.001f64..0.999, -2.0f64..2.0), 0..6),
        prop::option::of((2u32..7, prop::collection::vec(-0.5f64..0.5, 129))),
    )
        .prop_map(|(start, mut jumps, wiggle)| {
            jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            jumps.dedup_by(|a, b| a.0 == b.0);
            let steps = CadlagPath::step(1.0, start, &jumps).unwrap();
            match wiggle {
                None => steps,
                Some((r, vals)) => {
                    let cells = 1usize << r;
                    let w = CadlagPath::from_fn(1.0, cells, |t| vals[(t * cells as f64).round() as usize])
                        .unwrap();
                    CadlagPath::pointwise_combine(&steps, &w, (1.0, 1.0)).unwrap()
                }
            }
        })
}

/// At most four declared jumps, nothing else.
pub fn pure_steps() -> impl Strategy<Value = CadlagPath> {
    (
        -0.5f64..0.5,
        prop::collection::vec((0.01f64..0.99, -2.0f64..2.0), 0..=4),
    )
        .prop_map(|(start, mut jumps)| {
            jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            jumps.dedup_by(|a, b| a.0 == b.0);
            CadlagPath::step(1.0, start, &jumps).unwrap()
        })
}

pub const T0: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn remark() -> CadlagPath {
    CadlagPath::step(1.0, 0.0, &[(T0, 1.0)]).unwrap()
}
