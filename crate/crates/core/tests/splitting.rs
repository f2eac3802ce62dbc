mod common;

use common::*;
use proptest::prelude::*;
use rhoconn::affine::AffineCoeffs;
use rhoconn::connection::{check_affine, check_linear, Splitting};
use rhoconn::prolong::{project_j, vertical_lift};
use rhoconn::sampling::Sampler;
use rhoconn::BundleSpec;

const TOL: f64 = 1e-10;

fn splitting_residuals(spec: &BundleSpec, s: &mut Sampler) -> f64 {
    let split = Splitting::new(spec);
    let pv = random_prolonged(s, spec);
    let e = pv.base_point();
    let ph = split.projector_h(&pv).unwrap();
    let pv_v = split.projector_v(&pv).unwrap();
    let mut worst: f64 = 0.0;
    worst = worst.max(split.projector_h(&ph).unwrap().distance(&ph));
    worst = worst.max(split.projector_v(&pv_v).unwrap().distance(&pv_v));
    worst = worst.max(split.projector_h(&pv_v).unwrap().norm());
    worst = worst.max(ph.add(&pv_v).unwrap().distance(&pv));

    let (e_j, w) = project_j(&split.horizontal_lift(&e, &pv.v).unwrap());
    assert_eq!(e_j, e);
    worst = worst.max(max_diff(&w.v, &pv.v));

    let k_of_v = split.connection_map(&vertical_lift(spec, &e, &pv.z).unwrap()).unwrap();
    worst = worst.max(max_diff(&k_of_v, &pv.z));

    let k = split.connection_map(&pv).unwrap();
    let rebuilt = vertical_lift(spec, &e, &k).unwrap().add(&split.horizontal_lift(&e, &pv.v).unwrap()).unwrap();
    worst.max(rebuilt.distance(&pv))
}

proptest! {
    #[test]
    fn projector_algebra_on_fixtures(seed in any::<u64>(), which in 0usize..4) {
        let spec = &fixture_specs()[which];
        let mut s = Sampler::new(seed);
        prop_assert!(splitting_residuals(spec, &mut s) <= TOL);
    }

    #[test]
    fn projector_algebra_on_random_specs(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let spec = random_quadratic_spec(&mut s, 2, 3, 2);
        prop_assert!(splitting_residuals(&spec, &mut s) <= TOL);
    }

    #[test]
    fn coefficients_survive_the_round_trip(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let spec = random_quadratic_spec(&mut s, 2, 2, 2);
        let e = random_point(&mut s, &spec);
        let recovered = Splitting::new(&spec).recover_gamma(&e).unwrap();
        let direct = spec.gamma_at(&e).unwrap();
        for (a, b) in recovered.iter().zip(&direct) {
            prop_assert!(max_diff(a, b) <= 1e-12);
        }
    }

    #[test]
    fn affine_specs_are_recognised(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let spec = random_affine_spec(&mut s, 2, 2, 2);
        let v = check_affine(&spec, 32, seed).unwrap();
        prop_assert!(v.passed(), "{:?}", v.counterexample);
        let coeffs = v.coeffs.unwrap();
        // the extracted coefficients rebuild Gamma exactly
        let rebuilt = BundleSpec::new(2, 2, 2, spec.anchor.clone(), coeffs.to_gamma()).unwrap();
        let e = random_point(&mut s, &spec);
        for (a, b) in rebuilt.gamma_at(&e).unwrap().iter().zip(&spec.gamma_at(&e).unwrap()) {
            prop_assert!(max_diff(a, b) <= 1e-12);
        }
    }

    #[test]
    fn quadratic_terms_are_caught(seed in any::<u64>()) {
        let mut s = Sampler::new(seed);
        let spec = random_quadratic_spec(&mut s, 2, 2, 2);
        prop_assert!(!check_affine(&spec, 32, seed).unwrap().passed());
        prop_assert!(!check_linear(&spec, 32, seed).unwrap().passed());
    }

    #[test]
    fn linear_iff_no_offset(seed in any::<u64>(), drop_offset in any::<bool>()) {
        let mut s = Sampler::new(seed);
        let spec = random_affine_spec(&mut s, 1, 2, 2);
        let coeffs = affine_coeffs(&spec);
        let spec = if drop_offset {
            let zero = AffineCoeffs::new(AffineCoeffs::zero(2, 2).gamma0().to_vec(), coeffs.gamma1().to_vec()).unwrap();
            BundleSpec::new(1, 2, 2, spec.anchor.clone(), zero.to_gamma()).unwrap()
        } else {
            spec
        };
        prop_assert_eq!(check_linear(&spec, 32, seed).unwrap().passed(), drop_offset);
    }
}
