use faer::{c64, Col, Mat};
use proptest::prelude::*;

use freeze_core::config::{parse_and_validate, EstimatorChoice, Experiment, GridChoice, ModelChoice, RunSpec, StateChoice};
use freeze_core::echo::{correlation_function, fidelity_series, EchoRunConfig, FidelitySample, Observable};
use freeze_core::io::{series_from_csv, series_to_csv};
use freeze_core::linalg::{commutator, max_abs, norm, scale, unitarity_defect};
use freeze_core::models::{coupled_tops, single_top, InitialState};
use freeze_core::semiclassics::generating_function;
use freeze_core::spin::{build_angular_momentum, random_state, rotation_y, SpinRep};

fn even_j() -> impl Strategy<Value = f64> {
    (1u32..=12).prop_map(|k| 2.0 * k as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn su2_algebra_and_casimir(twice_j in 1u32..=60) {
        let rep = SpinRep::from_twice_j(twice_j).unwrap();
        let j = rep.j();
        let l = build_angular_momentum(rep);
        let i = c64::new(0.0, 1.0);
        for (a, b, c) in [(&l.jx, &l.jy, &l.jz), (&l.jy, &l.jz, &l.jx), (&l.jz, &l.jx, &l.jy)] {
            let d = commutator(a.as_ref(), b.as_ref()) - scale(c.as_ref(), i);
            prop_assert!(max_abs(d.as_ref()) <= 1e-12 * j * j);
        }
        let cas = &(&(&l.jx * &l.jx) + &(&l.jy * &l.jy)) + &(&l.jz * &l.jz);
        let want = Mat::<c64>::identity(rep.dim(), rep.dim());
        prop_assert!(max_abs((&cas - &scale(want.as_ref(), c64::new(j * (j + 1.0), 0.0))).as_ref()) <= 1e-10 * j * j);
    }

    #[test]
    fn rotations_compose(twice_j in 1u32..=40, a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let rep = SpinRep::from_twice_j(twice_j).unwrap();
        let ab = &rotation_y(rep, a).unwrap() * &rotation_y(rep, b).unwrap();
        let sum = rotation_y(rep, a + b).unwrap();
        prop_assert!(max_abs((&ab - &sum).as_ref()) < 1e-10);
        prop_assert!(unitarity_defect(sum.as_ref()) < 1e-12);
    }

    #[test]
    fn generating_function_is_bounded(z in -1e4f64..1e4) {
        prop_assert!(generating_function(z).norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn exact_plateau_reduces_to_linear_response(z in 0.0f64..0.1) {
        // 1 − |G|² = z²/45 + O(z⁴); the quartic coefficient is bounded by ⟨(z²/2)⁴⟩ ≤ 1/16.
        let g = generating_function(z).norm_sqr();
        prop_assert!(((1.0 - g) - z * z / 45.0).abs() <= z.powi(4) / 16.0 + 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in proptest::collection::vec((0u64..u64::MAX / 2, -2.0f64..2.0, -2.0f64..2.0), 0..40),
    ) {
        let mut n = 0u64;
        let samples: Vec<FidelitySample> = rows
            .into_iter()
            .map(|(step, re, im)| {
                n = n.saturating_add(step % 1_000_000 + 1);
                FidelitySample::new(n, c64::new(re, im))
            })
            .collect();
        let back = series_from_csv(&series_to_csv(&samples)).unwrap();
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in back.iter().zip(&samples) {
            prop_assert_eq!(a.n, b.n);
            prop_assert_eq!(a.amplitude().re.to_bits(), b.amplitude().re.to_bits());
            prop_assert_eq!(a.amplitude().im.to_bits(), b.amplitude().im.to_bits());
            prop_assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
        }
    }

    #[test]
    fn run_spec_round_trips(
        delta in -0.5f64..0.5,
        half_j in 1u32..=500,
        seed in 0u64..=(i64::MAX as u64),
        workers in 1usize..8,
        alpha in 0.1f64..50.0,
        coupled in any::<bool>(),
        ris in any::<bool>(),
        linear in any::<bool>(),
        kernel in any::<bool>(),
        n_max in proptest::option::of(1u64..1_000_000_000),
        which in 0usize..4,
    ) {
        let mut spec = RunSpec::default();
        spec.experiment = [Experiment::Echo, Experiment::RenormEcho, Experiment::Predict, Experiment::Sigma][which];
        spec.seed = seed;
        spec.workers = workers;
        spec.model.j = 2 * half_j;
        spec.model.alpha = alpha;
        if coupled {
            spec.model.kind = ModelChoice::Coupled;
            spec.model.j = spec.model.j.min(100);
        }
        spec.echo.delta = delta;
        spec.echo.state = if ris { StateChoice::Ris } else { StateChoice::Cis };
        spec.echo.grid = if linear { GridChoice::Linear } else { GridChoice::Log };
        spec.echo.n_max = n_max;
        spec.classical.estimator = if kernel { EstimatorChoice::Kernel } else { EstimatorChoice::Grid };
        prop_assume!(spec.validate().is_ok());
        let back = parse_and_validate(&spec.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn single_top_is_unitary_and_closed(j in even_j(), alpha in 0.0f64..40.0, delta in -0.3f64..0.3) {
        let model = single_top(SpinRep::new(j).unwrap(), alpha).unwrap();
        prop_assert!(unitarity_defect(model.u0()) < 1e-12);
        prop_assert!(unitarity_defect(model.perturbed_propagator(delta).unwrap().as_ref()) < 1e-12);
        prop_assert!(model.invariance_residual() < 1e-10);
    }

    #[test]
    fn coupled_tops_are_unitary_and_closed(half_j in 1u32..=4, eps in 0.0f64..30.0) {
        let model = coupled_tops(SpinRep::new(2.0 * half_j as f64).unwrap(), eps).unwrap();
        prop_assert!(unitarity_defect(model.u0()) < 1e-12);
        prop_assert!(model.invariance_residual() < 1e-10);
    }

    #[test]
    fn correlations_obey_cauchy_schwarz(j in even_j(), seed in any::<u64>(), n in 0u64..5000) {
        let model = single_top(SpinRep::new(j).unwrap(), 30.0).unwrap();
        let psi = model.prepare_state(&InitialState::Ris { seed }).unwrap().coeffs;
        let k0 = correlation_function(&model, psi.as_ref(), 0, 0, Observable::V).unwrap().re;
        let kn = correlation_function(&model, psi.as_ref(), n, n, Observable::V).unwrap().re;
        let c = correlation_function(&model, psi.as_ref(), 0, n, Observable::V).unwrap();
        prop_assert!(c.norm() <= (k0 * kn).sqrt() * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn spectral_propagation_matches_iterated_matvec(j in even_j(), alpha in 1.0f64..40.0, seed in any::<u64>()) {
        let model = single_top(SpinRep::new(j).unwrap(), alpha).unwrap();
        let psi: Col<c64> = random_state(model.dim(), seed).unwrap().amplitudes;
        let mut iterated = psi.clone();
        for _ in 0..1000 {
            iterated = model.u0() * &iterated;
        }
        let spectral = model.u0_spectrum().unwrap().propagate(psi.as_ref(), 1000);
        prop_assert!(norm((&spectral - &iterated).as_ref()) < 1e-8);
    }

    #[test]
    fn fidelity_is_bounded(j in even_j(), delta in -0.5f64..0.5, seed in any::<u64>(), ris in any::<bool>()) {
        let model = single_top(SpinRep::new(j).unwrap(), 30.0).unwrap();
        let initial = if ris { InitialState::Ris { seed } } else { InitialState::Cis { theta: 1.0, phi: 1.0 } };
        let s = fidelity_series(&model, &EchoRunConfig::new(delta, initial, 100_000)).unwrap();
        prop_assert!((s.samples[0].fidelity - 1.0).abs() < 1e-12);
        prop_assert!(s.samples.iter().all(|x| (0.0..=1.0 + 1e-10).contains(&x.fidelity)));
        prop_assert!(s.meta.max_norm_drift.unwrap() < 1e-10);
    }

    #[test]
    fn fidelity_is_even_in_delta_to_leading_order(seed in any::<u64>()) {
        // |F(δ) − F(−δ)| = O(δ³): doubling δ grows the odd part by at least 2^2.5.
        let model = single_top(SpinRep::new(40.0).unwrap(), 30.0).unwrap();
        let times: Vec<u64> = (0..=20).map(|k| 5 * k).collect();
        let f = |d: f64| {
            let cfg = EchoRunConfig::new(d, InitialState::Ris { seed }, 100).with_sample_times(times.clone());
            fidelity_series(&model, &cfg).unwrap().fidelities()
        };
        let odd = |d: f64| f(d).iter().zip(f(-d)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (small, big) = (odd(1e-4), odd(2e-4));
        prop_assert!(big < 1e-9 || big / small > 2f64.powf(2.5), "{} / {}", big, small);
    }
}
