//! Property tests for the transform layer: Parseval, Poincare-Wirtinger,
//! and the inverse-operator round trips on arbitrary grid data.

use nlch_core::spectral::{
    apply_an, grad_norm_sq, mean, norm, norm_from_coeffs, solve_inverse_an, Field, Norm,
    SpectralSpace,
};
use proptest::prelude::*;

fn field_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_identity_1d(values in field_values(33)) {
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let f = Field::from_values(values);
        let c = f.coeffs(&sp).unwrap();
        let l2_sq = sp.inner(f.values(), f.values());
        let coeff_sq: f64 = c.iter().map(|x| x * x).sum();
        prop_assert!((l2_sq - coeff_sq).abs() <= 1e-12 * l2_sq.max(1e-6));
    }

    #[test]
    fn parseval_identity_2d(values in field_values(17 * 9)) {
        let sp = SpectralSpace::new_2d([17, 9], [1.0, 2.0]).unwrap();
        let f = Field::from_values(values);
        let c = f.coeffs(&sp).unwrap();
        let l2_sq = sp.inner(f.values(), f.values());
        let coeff_sq: f64 = c.iter().map(|x| x * x).sum();
        prop_assert!((l2_sq - coeff_sq).abs() <= 1e-12 * l2_sq.max(1e-6));
    }

    #[test]
    fn round_trip_is_identity(values in field_values(33)) {
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let f = Field::from_values(values);
        let c = f.coeffs(&sp).unwrap();
        let back = sp.inverse(&c).unwrap();
        let scale = f.values().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in back.iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn poincare_wirtinger(values in field_values(33)) {
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let f = Field::from_values(values);
        let m = mean(&f, &sp);
        let fluct_sq = sp.cell() * f.values().iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        let c = f.coeffs(&sp).unwrap();
        let grad_sq = grad_norm_sq(&c, &sp);
        prop_assert!(fluct_sq.sqrt() <= (sp.lambda_omega() * grad_sq).sqrt() + 1e-12);
    }

    #[test]
    fn inverse_an_round_trip(values in field_values(33)) {
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let mut f = Field::from_values(values);
        let m = mean(&f, &sp);
        for v in f.values_mut() {
            *v -= m;
        }
        let g = solve_inverse_an(&f, &sp).unwrap();
        let back = apply_an(&g, &sp).unwrap();
        let scale = norm(&f, &sp, Norm::L2).unwrap().max(1e-6);
        for (a, b) in back.values().iter().zip(f.values()) {
            prop_assert!((a - b).abs() <= 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn vdual_duality(values in field_values(33)) {
        // ||f||_{V'} computed mode-wise agrees with <f, N f> + <f>^2
        let sp = SpectralSpace::new_1d(33, 1.0).unwrap();
        let mut f = Field::from_values(values);
        let m = mean(&f, &sp);
        for v in f.values_mut() {
            *v -= m;
        }
        let c = f.coeffs(&sp).unwrap();
        let vd = norm_from_coeffs(&c, &sp, Norm::VDual);
        let nf = solve_inverse_an(&f, &sp).unwrap();
        let pairing = sp.inner(f.values(), nf.values());
        prop_assert!((vd * vd - pairing).abs() <= 1e-10 * pairing.abs().max(1e-6));
    }
}
