use bornforge_core::experiments::{
    alpha_sweep, convergence_study, run_contextuality_demo, run_invariance_suite, run_mixture, run_mixture_violation,
    violation_sampler, MixtureSpec,
};
use bornforge_core::geometry::{det_scaling_check, eigenset_measure_mc, simplex_uniformity, verify_omega_pushforward};
use bornforge_core::sampling::{random_unitary, uniform_complex_sphere, uniform_simplex};
use bornforge_core::state_space::{apply_unitary, omega, Normalization};
use bornforge_core::{
    experiments::run_repeated, Error, ExperimentConfig, MixtureState, PureState, RngStream, RunSettings, SamplerSpec,
    State,
};
use num_complex::Complex64;

fn pure(v: &[(f64, f64)]) -> PureState {
    PureState::new(v.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Normalization::Renormalize).unwrap()
}

#[test]
fn real_frequencies_match_the_state() {
    let t = MixtureState::new(vec![0.5, 0.3, 0.2]).unwrap();
    let r = run_repeated(&ExperimentConfig::new(t, 400_000, 11)).unwrap();
    assert!(r.within_sigmas(4.0), "{:?}", r.z_scores());
    assert_eq!(r.counts.iter().sum::<u64>(), 400_000);
}

#[test]
fn random_states_reproduce_in_both_models() {
    let mut rng = RngStream::new(2024, 0).rng();
    for n in [2, 4, 6] {
        let t = uniform_simplex(n, &mut rng).unwrap();
        let r = run_repeated(&ExperimentConfig::new(t, 200_000, n as u64)).unwrap();
        assert!(r.within_sigmas(4.0), "real n={n}: {:?}", r.z_scores());

        let q = uniform_complex_sphere(n, &mut rng).unwrap();
        let r = run_repeated(&ExperimentConfig::new(q, 200_000, 100 + n as u64)).unwrap();
        assert!(r.within_sigmas(4.0), "complex n={n}: {:?}", r.z_scores());
    }
}

#[test]
fn born_frequencies_for_a_qubit() {
    let q = pure(&[(0.7f64.sqrt(), 0.0), (0.0, 0.3f64.sqrt())]);
    let r = run_repeated(&ExperimentConfig::new(q, 400_000, 3)).unwrap();
    assert!((r.reference[0] - 0.7).abs() < 1e-12);
    assert!(r.within_sigmas(4.0), "{:?}", r.z_scores());
}

#[test]
fn ties_are_negligible() {
    let t = MixtureState::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
    let r = run_repeated(&ExperimentConfig::new(t, 1_000_000, 8)).unwrap();
    assert!((r.tie_count as f64) / 1e6 < 1e-6, "{} ties", r.tie_count);
}

#[test]
fn uniform_simplex_draws_pass_the_uniformity_test() {
    let mut rng = RngStream::new(5, 0).rng();
    for n in [2, 3, 5] {
        let pts: Vec<Vec<f64>> = (0..50_000).map(|_| uniform_simplex(n, &mut rng).unwrap().into_vec()).collect();
        let rep = simplex_uniformity(&pts, 50).unwrap();
        assert!(rep.passes(), "n={n}: {rep:?}");
    }
}

#[test]
fn biased_points_fail_the_uniformity_test() {
    let mut rng = RngStream::new(6, 0).rng();
    let pts: Vec<Vec<f64>> = (0..50_000)
        .map(|_| {
            let mut x = uniform_simplex(3, &mut rng).unwrap().into_vec();
            x[0] = x[0].sqrt();
            let s: f64 = x.iter().sum();
            x.iter().map(|v| v / s).collect()
        })
        .collect();
    assert!(!simplex_uniformity(&pts, 50).unwrap().passes());
    assert!(matches!(simplex_uniformity(&pts[..100], 50), Err(Error::InsufficientSamples { .. })));
}

#[test]
fn omega_pushes_the_sphere_onto_the_flat_simplex() {
    for n in [2, 3, 4] {
        let rep = verify_omega_pushforward(n, 100_000, 50, RngStream::new(9, n as u64)).unwrap();
        assert!(rep.passes(), "n={n}: {rep:?}");
    }
}

#[test]
fn unitarily_rotated_sphere_samples_stay_uniform() {
    let mut rng = RngStream::new(12, 0).rng();
    let u = random_unitary(3, &mut rng).unwrap();
    let pts: Vec<Vec<f64>> = (0..60_000)
        .map(|_| omega(&apply_unitary(&u, &uniform_complex_sphere(3, &mut rng).unwrap()).unwrap()).into_vec())
        .collect();
    assert!(simplex_uniformity(&pts, 50).unwrap().passes());
}

#[test]
fn eigenset_probability_matches_the_component() {
    let t = MixtureState::new(vec![0.1, 0.6, 0.3]).unwrap();
    for k in 0..3 {
        let est = eigenset_measure_mc(&State::Real(t.clone()), k, 200_000, RngStream::new(1, k as u64)).unwrap();
        assert!((est.value - t.get(k)).abs() < 4.0 * est.stderr.max(1e-9), "k={k}: {est:?}");
    }
}

#[test]
fn linear_maps_scale_eigenset_volume_by_the_determinant() {
    let t = MixtureState::new(vec![0.5, 0.3, 0.2]).unwrap();
    let id = det_scaling_check(&t, 0, &[1.0, 1.0, 1.0], 200_000, RngStream::new(1, 0)).unwrap();
    assert!(id.within(3.0), "{id:?}");
    assert!((id.ratio - 1.0).abs() < 0.05);

    let c = det_scaling_check(&t, 1, &[2.0, 2.0, 2.0], 200_000, RngStream::new(2, 0)).unwrap();
    assert_eq!(c.determinant, 8.0);
    assert!(c.within(3.0), "{c:?}");
    assert!((c.ratio / 8.0 - 1.0).abs() < 0.05);

    let unit = det_scaling_check(&t, 2, &[2.0, -0.5, 1.0], 200_000, RngStream::new(3, 0)).unwrap();
    assert_eq!(unit.determinant.abs(), 1.0);
    assert!(unit.within(3.0), "{unit:?}");

    assert_eq!(det_scaling_check(&t, 0, &[1.0, 0.0, 1.0], 10, RngStream::new(0, 0)).unwrap_err(), Error::SingularMap);
}

#[test]
fn mixtures_are_linear_under_the_uniform_sampler() {
    let mut rng = RngStream::new(31, 0).rng();
    for (i, xi) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let a = uniform_complex_sphere(3, &mut rng).unwrap();
        let b = uniform_complex_sphere(3, &mut rng).unwrap();
        let spec = MixtureSpec::binary(a, b, xi).unwrap();
        let rep = run_mixture(&spec, &RunSettings::new(300_000, i as u64)).unwrap();
        assert!(rep.within_sigmas(4.0), "xi={xi}: {rep:?}");
        assert!(!rep.violation);
    }
}

#[test]
fn concentrated_observers_break_linearity() {
    let a = pure(&[(0.7f64.sqrt(), 0.0), (0.2f64.sqrt(), 0.0), (0.1f64.sqrt(), 0.0)]);
    let b = pure(&[(0.1f64.sqrt(), 0.0), (0.3f64.sqrt(), 0.0), (0.6f64.sqrt(), 0.0)]);
    let spec = MixtureSpec::binary(a.clone(), b, 0.5).unwrap();
    let sampler = violation_sampler(&spec, None, 0.05, 0.9).unwrap();
    let rep = run_mixture_violation(&spec, &sampler, &RunSettings::new(100_000, 1)).unwrap();
    assert!(rep.linearity.violation, "{rep:?}");

    // A degenerate mixture is one of its components: nothing to violate.
    let single = MixtureSpec::binary(a, pure(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]), 1.0).unwrap();
    let sampler = violation_sampler(&single, None, 0.05, 0.9).unwrap();
    let rep = run_mixture_violation(&single, &sampler, &RunSettings::new(100_000, 2)).unwrap();
    assert!(!rep.linearity.violation, "{rep:?}");

    // Without concentration the mixture is linear again.
    let SamplerSpec::EpsilonConcentrated { center, epsilon, .. } = sampler else { unreachable!() };
    let flat = SamplerSpec::EpsilonConcentrated { center, epsilon, weight: 0.0 };
    let rep = run_mixture_violation(&spec, &flat, &RunSettings::new(100_000, 3)).unwrap();
    assert!(!rep.linearity.violation, "{rep:?}");
}

#[test]
fn invariance_checks_match_every_trial() {
    let q = pure(&[(0.3, 0.1), (0.5, -0.2), (0.1, 0.7), (0.2, 0.0)]);
    let rep = run_invariance_suite(&ExperimentConfig::new(q, 1, 0), 20_000, RngStream::new(4, 0)).unwrap();
    assert!(rep.exact(), "{rep:?}");
    assert!(matches!(
        run_invariance_suite(
            &ExperimentConfig::new(MixtureState::barycenter(3).unwrap(), 1, 0),
            10,
            RngStream::new(0, 0)
        ),
        Err(Error::PreconditionViolated(_))
    ));
}

#[test]
fn swapping_untouched_components_changes_the_decision_only() {
    let t = MixtureState::new(vec![0.4, 0.35, 0.25]).unwrap();
    let r = MixtureState::new(vec![0.35, 0.40, 0.25]).unwrap();
    let rep = run_contextuality_demo(&t, &r, 1, 2, 400_000, RngStream::new(8, 0)).unwrap();
    assert_eq!(rep.outcome_before, 0);
    assert_eq!(rep.outcome_after, 2);
    assert!(rep.demonstrates(4.0), "{rep:?}");
}

#[test]
fn system_majority_mass_always_has_a_winning_outcome() {
    let hi = alpha_sweep(4, 50_000, 0.5, 1.0, false, RngStream::new(1, 0)).unwrap();
    assert_eq!(hi.majorization_count, hi.pairs);
    assert!(hi.min_max_odds > 1.0);
    let lo = alpha_sweep(4, 50_000, 0.0, 0.5, true, RngStream::new(2, 0)).unwrap();
    assert_eq!(lo.majorization_count, 0);
    assert!(lo.max_max_odds < 1.0);
}

#[test]
fn total_variation_decays_like_inverse_root_n() {
    let t = MixtureState::new(vec![0.3, 0.25, 0.2, 0.15, 0.1]).unwrap();
    let cfg = ExperimentConfig::new(t, 1_000_000, 0);
    let rep = convergence_study(&cfg, &[0, 1, 2, 3, 4]).unwrap();
    assert!(rep.slope_within(-0.65, -0.35), "{rep:?}");
}
