use pdelta_core::constitutive::{
    natural_distance_map, stress, tangent_at, tangent_spectrum, ModelParams, SymTensor2, TangentVariant,
};
use proptest::prelude::*;

fn tensor() -> impl Strategy<Value = SymTensor2<f64>> {
    (-1.0e2..1.0e2f64, -1.0e2..1.0e2f64, -1.0e2..1.0e2f64).prop_map(|(a, b, c)| SymTensor2::new(a, b, c))
}

fn model() -> impl Strategy<Value = ModelParams<f64>> {
    (1.1..2.0f64, 1e-6..1.0f64, 1e-4..1.0f64, 0.0..1e-2f64)
        .prop_map(|(p, d, nu, ni)| ModelParams::new(p, d, nu, ni).unwrap())
}

proptest! {
    #[test]
    fn stress_is_monotone(pr in model(), a in tensor(), b in tensor()) {
        let d = stress(&pr, &a).unwrap() - stress(&pr, &b).unwrap();
        let diff = a - b;
        let scale = stress(&pr, &a).unwrap().norm() * a.norm() + stress(&pr, &b).unwrap().norm() * b.norm();
        prop_assert!(d.contract(&diff) >= -1e-12 * scale);
    }

    #[test]
    fn exact_tangent_is_directional_derivative(pr in model(), a in tensor(), h in tensor()) {
        prop_assume!(a.norm() > 1e-2 && h.norm() > 1e-2);
        let eps = 1e-6 * a.norm() / h.norm();
        let fd = (stress(&pr, &(a + h * eps)).unwrap() - stress(&pr, &(a - h * eps)).unwrap()) * (0.5 / eps);
        let t = tangent_at(&TangentVariant::ExN, &pr, &a).unwrap().apply(&h);
        prop_assert!(fd.max_abs_diff(&t) <= 1e-5 * t.norm().max(1e-300));
    }

    #[test]
    fn variants_are_ordered_and_positive(pr in model(), a in tensor(), b in tensor(), frac in 0.0..2.0f64) {
        let sigma = pr.nu * frac;
        let q = |v: TangentVariant<f64>| tangent_at(&v, &pr, &a).unwrap().apply(&b).contract(&b);
        let (ex, md, pc) = (q(TangentVariant::ExN), q(TangentVariant::ModN { sigma_max: sigma }), q(TangentVariant::Pic));
        let tol = 1e-12 * pc.abs();
        prop_assert!(ex <= md + tol && md <= pc + tol);
        prop_assert!(ex >= (pr.p - 1.0) * pc - tol);
        let e = tangent_spectrum(&TangentVariant::ModN { sigma_max: sigma }, &pr, &a).unwrap();
        prop_assert!(e.lambda_par > 0.0 && e.lambda_perp > 0.0);
        prop_assert!(e.ratio >= 1.0 - 1e-12 && e.ratio <= 1.0 / (pr.p - 1.0) + 1e-9);
        prop_assert!((0.0..=1.0).contains(&e.s));
    }

    #[test]
    fn clip_limits(pr in model(), a in tensor(), b in tensor()) {
        let apply = |v: TangentVariant<f64>| tangent_at(&v, &pr, &a).unwrap().apply(&b);
        let pic = apply(TangentVariant::Pic);
        prop_assert_eq!(apply(TangentVariant::ModN { sigma_max: 0.0 }), pic);
        let ex = apply(TangentVariant::ExN);
        let loose = apply(TangentVariant::ModN { sigma_max: f64::MAX });
        prop_assert!(ex.max_abs_diff(&loose) <= 1e-14 * ex.norm());
    }

    #[test]
    fn natural_distance_map_is_isotropic(pr in model(), a in tensor()) {
        let f = natural_distance_map(&pr, &a);
        let expected = (pr.delta * pr.delta + a.norm_sq()).powf((pr.p - 2.0) / 4.0);
        prop_assert!(f.max_abs_diff(&(a * expected)) <= 1e-12 * f.norm().max(1e-300));
    }
}
