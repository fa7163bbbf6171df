mod common;

use common::{admissible, params_strategy};
use nsl_core::saddle_model::{reduced_family, validate, Perturbation, Saddle, SaddleParams};
use nsl_core::Error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn first_integral_has_zero_lie_derivative(p in params_strategy(), lx in -3.0f64..1.0, ly in -3.0f64..1.0) {
        let s = Saddle::new(p).unwrap();
        let (x, y) = (lx.exp(), ly.exp());
        let e = s.exponents();
        let (a, b, c) = s.quadratic_factor();
        let quad = a * x * x + b * x * y + c * y * y;
        prop_assume!(quad.abs() > 1e-6 * (a.abs() * x * x + b.abs() * x * y + c.abs() * y * y));
        let (f, g) = s.field(x, y, false);
        let terms = [
            e.u * f / x,
            e.v * g / y,
            (2.0 * a * x + b * y) * f / quad,
            (b * x + 2.0 * c * y) * g / quad,
        ];
        let sum: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        prop_assert!(sum.abs() <= 1e-10 * scale, "{sum} vs {scale}");
    }

    #[test]
    fn exponent_identities(p in params_strategy()) {
        let e = validate(&p).unwrap();
        prop_assert!((e.kappa - (1.0 - 0.5 / e.beta0 - 0.5 / e.beta2)).abs() < 1e-12);
        prop_assert!((e.u - 2.0 * p.b2 * e.c0 / e.delta).abs() <= 1e-12 * e.u.abs());
        prop_assert!((e.v - 2.0 * p.a0 * e.c2 / e.delta).abs() <= 1e-12 * e.v.abs());
        prop_assert!((e.beta0 - (p.a0 + p.b0) / (2.0 * p.a0)).abs() < 1e-12 * e.beta0);
        prop_assert!((e.beta2 - (p.a2 + p.b2) / (2.0 * p.b2)).abs() < 1e-12 * e.beta2);
        prop_assert!(e.beta_star > 0.0 && e.beta_star <= 0.5);
        prop_assert!((p.a1 * (e.u + 1.0) - p.b1 * (e.v + 1.0)).abs() <= 1e-12 * (p.a1 * (e.u + 1.0)).abs().max(1e-300));
    }

    #[test]
    fn cubic_field_is_odd(p in params_strategy(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let s = Saddle::new(p).unwrap();
        let (f, g) = s.field(x, y, false);
        let (fm, gm) = s.field(-x, -y, false);
        prop_assert_eq!((f, g), (-fm, -gm));
    }

    #[test]
    fn axes_are_invariant(p in params_strategy(), t in -2.0f64..2.0, k in -1.0f64..1.0) {
        let s = Saddle::new(p.with_perturbation(Perturbation::Quartic { k })).unwrap();
        for perturbed in [false, true] {
            prop_assert_eq!(s.field(t, 0.0, perturbed).1, 0.0);
            prop_assert_eq!(s.field(0.0, t, perturbed).0, 0.0);
        }
    }

    #[test]
    fn reduced_family_preserves_area(gamma in -3.99f64..3.99, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let s = Saddle::reduced(gamma).unwrap();
        prop_assert!(s.is_divergence_free());
        prop_assert_eq!(s.divergence(x, y), 0.0);
        let e = s.exponents();
        prop_assert_eq!((e.beta0, e.beta2, e.u, e.v), (2.0, 2.0, 1.0, 1.0));
    }

    #[test]
    fn remainder_is_quartic(k in -2.0f64..2.0, r in 1e-4f64..0.5, th in 0.0f64..1.5707) {
        let s = Saddle::new(reduced_family(0.0).unwrap().with_perturbation(Perturbation::Quartic { k })).unwrap();
        let (x, y) = (r * th.cos(), r * th.sin());
        let (f0, g0) = s.field(x, y, false);
        let (f1, g1) = s.field(x, y, true);
        prop_assert!((f1 - f0).hypot(g1 - g0) <= k.abs() * r.powi(4) * (1.0 + 1e-12));
    }
}

#[test]
fn rejections() {
    assert!(matches!(reduced_family(4.0), Err(Error::GammaOutOfRange(_))));
    assert!(matches!(
        validate(&SaddleParams::new([1.0, 0.0, 1.0], [1.0, 0.0, 1.0])),
        Err(Error::DegenerateDelta { .. })
    ));
    assert!(matches!(
        validate(&SaddleParams::new([1.0, 5.0, 3.0], [3.0, 5.0, 1.0])),
        Err(Error::EllipticityViolation { .. })
    ));
    assert!(matches!(
        validate(&SaddleParams::new([1.0, 1.0, 2.0], [3.0, 0.0, 1.0])),
        Err(Error::MixedTermMismatch { .. })
    ));
    assert!(matches!(
        validate(&SaddleParams::new([-1.0, 0.0, 2.0], [3.0, 0.0, 1.0])),
        Err(Error::NegativeCoefficient { name: "a0", .. })
    ));
    assert!(admissible([1.0, 0.7, 2.0], 3.0, 1.0).is_some());
}
