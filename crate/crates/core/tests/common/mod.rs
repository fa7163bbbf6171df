#![allow(dead_code)]

use nsl_core::saddle_model::{validate, SaddleParams};
use proptest::prelude::*;

/// `(a, [b0, b2])` completed with the `b1` that satisfies the mixed-term
/// condition. Returns `None` if the result is not a valid saddle.
pub fn admissible(a: [f64; 3], b0: f64, b2: f64) -> Option<SaddleParams> {
    let base = validate(&SaddleParams::new([a[0], 0.0, a[2]], [b0, 0.0, b2])).ok()?;
    let b1 = a[1] * (base.u + 1.0) / (base.v + 1.0);
    let p = SaddleParams::new(a, [b0, b1, b2]);
    validate(&p).ok().map(|_| p)
}

/// Random admissible coefficient sets with positive leading terms and a
/// non-degenerate `delta` of either sign.
pub fn params_strategy() -> impl Strategy<Value = SaddleParams> {
    (0.2f64..5.0, -1.5f64..1.5, 0.2f64..5.0, 0.2f64..5.0, 0.2f64..5.0)
        .prop_filter_map("inadmissible", |(a0, a1, a2, b0, b2)| {
            let delta = a2 * b0 - a0 * b2;
            if delta.abs() < 0.05 * (a2 * b0 + a0 * b2) {
                return None;
            }
            admissible([a0, a1, a2], b0, b2)
        })
}

/// As [`params_strategy`] with `delta > 0` and exponents away from the
/// integrability limit, for passage experiments.
pub fn passage_params_strategy() -> impl Strategy<Value = SaddleParams> {
    params_strategy().prop_filter("slow or delta < 0", |p| {
        let e = validate(p).unwrap();
        e.delta > 0.0 && e.beta0 > 0.75 && e.beta2 > 0.75 && e.beta0 < 4.0 && e.beta2 < 4.0
    })
}
