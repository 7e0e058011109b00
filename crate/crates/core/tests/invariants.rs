use approx::assert_abs_diff_eq;
use bornforge_core::geometry::{eigenset_measure_analytic, in_closed_eigenset_simplex, simplex_volume_ratio};
use bornforge_core::observer::{barycentric_observer, decide_in_frame, eigenset_contains, likelihood_ratios};
use bornforge_core::sampling::{random_unitary, uniform_complex_sphere, uniform_simplex, RngStream};
use bornforge_core::state_space::{
    apply_unitary, born_probabilities, coefficients_in_frame, omega, reconstruct, Normalization, EPS_RECON,
};
use bornforge_core::stats::total_variation;
use bornforge_core::{decide, Frame, MixtureState, OddsForm, PureState, State};
use num_complex::Complex64;
use proptest::prelude::*;

fn rng_for(seed: u64) -> rand_chacha::ChaCha8Rng {
    RngStream::new(seed, 0).rng()
}

fn mixture(n: usize, seed: u64) -> MixtureState {
    uniform_simplex(n, &mut rng_for(seed)).unwrap()
}

fn pure(n: usize, seed: u64) -> PureState {
    uniform_complex_sphere(n, &mut rng_for(seed)).unwrap()
}

fn dims() -> impl Strategy<Value = usize> {
    2usize..=8
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn omega_lands_on_simplex_and_ignores_phases(n in dims(), seed: u64, phases in prop::collection::vec(0.0..std::f64::consts::TAU, 8)) {
        let q = pure(n, seed);
        let t = omega(&q);
        prop_assert!(t.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((t.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let rotated: Vec<Complex64> = q.as_slice().iter().zip(&phases).map(|(c, &p)| c * Complex64::from_polar(1.0, p)).collect();
        let rotated = PureState::new(rotated, Normalization::Strict).unwrap();
        let t2 = omega(&rotated);
        for (a, b) in t.as_slice().iter().zip(t2.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn born_probabilities_form_a_distribution(n in dims(), seed: u64) {
        let mut rng = rng_for(seed);
        let q = uniform_complex_sphere(n, &mut rng).unwrap();
        let frame = Frame::from_unitary(&random_unitary(n, &mut rng).unwrap());
        let p = born_probabilities(&q, &frame).unwrap();
        prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coefficients_reconstruct_the_state(n in dims(), seed: u64) {
        let mut rng = rng_for(seed);
        let q = uniform_complex_sphere(n, &mut rng).unwrap();
        let frame = Frame::from_unitary(&random_unitary(n, &mut rng).unwrap());
        let c = coefficients_in_frame(&q, &frame).unwrap();
        let back = reconstruct(&c, &frame).unwrap();
        let err: f64 = back.iter().zip(q.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err < EPS_RECON);
    }

    #[test]
    fn exactly_one_outcome_is_decided(n in dims(), s1: u64, s2: u64) {
        let sys = State::Real(mixture(n, s1));
        let obs = State::Real(mixture(n, s2));
        let d = decide(&sys, &obs).unwrap();
        prop_assert!(d.outcome_index < n);
        prop_assert_eq!(d.tied_set[0], d.outcome_index);
        let strict: Vec<usize> = (0..n).filter(|&k| eigenset_contains(k, &sys, &obs).unwrap()).collect();
        if d.tied {
            prop_assert!(strict.is_empty());
        } else {
            prop_assert_eq!(strict, vec![d.outcome_index]);
        }
    }

    #[test]
    fn decision_is_the_largest_ratio(n in dims(), s1: u64, s2: u64) {
        let sys = State::Real(mixture(n, s1));
        let obs = State::Real(mixture(n, s2));
        let d = decide(&sys, &obs).unwrap();
        let ratios = likelihood_ratios(&sys, &obs).unwrap().ratios();
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(ratios[d.outcome_index] >= max * (1.0 - 1e-12));
    }

    #[test]
    fn decisions_survive_projective_scaling(n in dims(), s1: u64, s2: u64, log_mod in -3.0f64..3.0, phase in 0.0..std::f64::consts::TAU) {
        let q = pure(n, s1);
        let r = pure(n, s2);
        let z = Complex64::from_polar(10f64.powf(log_mod), phase);
        let base = bornforge_core::experiments::decide_coefficients(q.as_slice(), r.as_slice(), OddsForm::Moduli).unwrap();
        let scaled = q.scaled(z);
        prop_assert_eq!(base, bornforge_core::experiments::decide_coefficients(&scaled, r.as_slice(), OddsForm::Moduli).unwrap());
        let scaled = r.scaled(z);
        prop_assert_eq!(base, bornforge_core::experiments::decide_coefficients(q.as_slice(), &scaled, OddsForm::Moduli).unwrap());
    }

    #[test]
    fn squared_and_plain_odds_agree(n in dims(), s1: u64, s2: u64) {
        let q = pure(n, s1);
        let r = pure(n, s2);
        let f = Frame::computational(n).unwrap();
        prop_assert_eq!(
            decide_in_frame(&q, &r, &f, OddsForm::Moduli).unwrap(),
            decide_in_frame(&q, &r, &f, OddsForm::Squared).unwrap()
        );
    }

    #[test]
    fn decisions_follow_the_frame_under_unitaries(n in dims(), s1: u64, s2: u64, s3: u64) {
        let q = pure(n, s1);
        let r = pure(n, s2);
        let mut rng = rng_for(s3);
        let frame = Frame::from_unitary(&random_unitary(n, &mut rng).unwrap());
        let u = random_unitary(n, &mut rng).unwrap();
        let before = decide_in_frame(&q, &r, &frame, OddsForm::Moduli).unwrap();
        let after = decide_in_frame(
            &apply_unitary(&u, &q).unwrap(),
            &apply_unitary(&u, &r).unwrap(),
            &frame.transformed(&u).unwrap(),
            OddsForm::Moduli,
        )
        .unwrap();
        prop_assert_eq!(before.outcome_index, after.outcome_index);
    }

    #[test]
    fn interior_barycentric_points_decide_k(n in dims(), seed: u64, ls: u64, k_raw: usize) {
        let k = k_raw % n;
        let t = mixture(n, seed);
        let lambda = mixture(n, ls);
        prop_assume!(lambda.as_slice().iter().all(|&l| l > 0.0));
        let r = barycentric_observer(k, &t, lambda.as_slice()).unwrap();
        prop_assume!(t.get(k) > 0.0);
        let d = decide(&State::Real(t.clone()), &State::Real(r.clone())).unwrap();
        prop_assert_eq!(d.outcome_index, k);
        prop_assert!(in_closed_eigenset_simplex(k, &t, &r, 1e-9).unwrap());
    }

    #[test]
    fn decided_observers_lie_in_the_eigenset_simplex(n in dims(), s1: u64, s2: u64) {
        let t = mixture(n, s1);
        let r = mixture(n, s2);
        let d = decide(&State::Real(t.clone()), &State::Real(r.clone())).unwrap();
        prop_assert!(in_closed_eigenset_simplex(d.outcome_index, &t, &r, 1e-9).unwrap());
    }

    #[test]
    fn eigenset_volume_matches_the_component(n in dims(), seed: u64, k_raw: usize) {
        let k = k_raw % n;
        let t = mixture(n, seed);
        prop_assume!(t.get(k) > 1e-9);
        let analytic = eigenset_measure_analytic(&t, k).unwrap();
        let geometric = simplex_volume_ratio(&t, k, n).unwrap();
        prop_assert!((analytic - geometric).abs() < 1e-10, "{analytic} vs {geometric}");
    }

    #[test]
    fn total_variation_is_a_metric(n in dims(), s1: u64, s2: u64, s3: u64) {
        let (p, q, r) = (mixture(n, s1), mixture(n, s2), mixture(n, s3));
        let d = |a: &MixtureState, b: &MixtureState| total_variation(a.as_slice(), b.as_slice()).unwrap();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-15);
        prop_assert!(d(&p, &q) <= 1.0 + 1e-12);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
    }
}

#[test]
fn vertex_system_always_decides_its_vertex() {
    for n in 2..=6 {
        for k in 0..n {
            let sys = State::Real(MixtureState::vertex(n, k).unwrap());
            for seed in 0..50 {
                let obs = State::Real(mixture(n, seed));
                assert_eq!(decide(&sys, &obs).unwrap().outcome_index, k);
            }
        }
    }
}

#[test]
fn embedded_probabilities_round_trip_through_omega() {
    let t = MixtureState::new(vec![0.5, 0.3, 0.2]).unwrap();
    let q = PureState::from_probabilities(&t);
    for (a, b) in omega(&q).as_slice().iter().zip(t.as_slice()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
}
