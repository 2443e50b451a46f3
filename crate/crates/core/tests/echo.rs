use std::sync::OnceLock;

use faer::{c64, Col, Mat};
use freeze_core::echo::{
    correlation_function, fidelity_series, linear_grid, linear_response_fidelity, mixing_time, renormalized_fidelity_series,
    spectral_propagate, EchoMode, EchoRunConfig, Observable,
};
use freeze_core::linalg::norm;
use freeze_core::models::{single_top, InitialState, TopModel};
use freeze_core::spin::SpinRep;

fn model() -> &'static TopModel {
    static M: OnceLock<TopModel> = OnceLock::new();
    M.get_or_init(|| single_top(SpinRep::new(200.0).unwrap(), 30.0).unwrap())
}

fn cis() -> InitialState {
    InitialState::Cis { theta: 1.0, phi: 1.0 }
}

fn fidelity_at(delta: f64, times: Vec<u64>) -> Vec<f64> {
    let cfg = EchoRunConfig::new(delta, cis(), *times.last().unwrap()).with_sample_times(times);
    fidelity_series(model(), &cfg).unwrap().fidelities()
}

#[test]
fn spectral_propagation_matches_matvec() {
    let m = model();
    let psi = m.prepare_state(&cis()).unwrap().coeffs;
    let same = spectral_propagate(m.u0(), psi.as_ref(), 0).unwrap();
    assert!(norm((&same - &psi).as_ref()) < 1e-14);

    let one = spectral_propagate(m.u0(), psi.as_ref(), 1).unwrap();
    let direct = m.u0() * &psi;
    assert!(norm((&one - &direct).as_ref()) < 1e-10);

    let mut iterated: Col<c64> = psi.clone();
    for _ in 0..1000 {
        iterated = m.u0() * &iterated;
    }
    let spectral = m.u0_spectrum().unwrap().propagate(psi.as_ref(), 1000);
    assert!(norm((&spectral - &iterated).as_ref()) < 1e-8);
}

#[test]
fn zero_perturbation_is_a_perfect_echo() {
    let cfg = EchoRunConfig::new(0.0, cis(), 10_000);
    let s = fidelity_series(model(), &cfg).unwrap();
    assert!(s.samples.iter().all(|x| (x.fidelity - 1.0).abs() < 1e-10));
    assert!(s.meta.max_norm_drift.unwrap() < 1e-10);
}

#[test]
fn vanishing_r_gives_a_flat_renormalized_echo() {
    let rep = SpinRep::new(20.0).unwrap();
    let d = rep.dim();
    let zero = c64::new(0.0, 0.0);
    let u0 = Mat::from_fn(d, d, |a, b| if a == b { c64::cis(-0.9 * rep.m(a)) } else { zero });
    let w = Mat::from_fn(d, d, |a, b| if a == b { c64::new(rep.m(a).powi(2) / 800.0, 0.0) } else { zero });
    let m = TopModel::from_operators("z rotation", u0, w, rep.hbar()).unwrap();
    let cfg = EchoRunConfig::new(0.2, InitialState::Ris { seed: 4 }, 1000).with_mode(EchoMode::Renormalized);
    assert!(renormalized_fidelity_series(&m, &cfg).is_err(), "custom models need an explicit plateau");
    let mut cfg = cfg;
    cfg.plateau_prefactor = Some(0.8);
    let s = renormalized_fidelity_series(&m, &cfg).unwrap();
    assert!(s.samples.iter().all(|x| (x.fidelity - 0.8).abs() < 1e-12));
}

#[test]
fn linear_response_is_exact_at_zero_and_close_later() {
    let m = model();
    let psi = m.prepare_state(&cis()).unwrap().coeffs;
    assert_eq!(linear_response_fidelity(m, psi.as_ref(), 1e-3, 0).unwrap().fidelity, 1.0);

    let times = vec![30, 60, 120];
    let err = |delta: f64| {
        let exact = fidelity_at(delta, times.clone());
        times
            .iter()
            .zip(&exact)
            .map(|(&n, &f)| (linear_response_fidelity(m, psi.as_ref(), delta, n).unwrap().fidelity - f).abs() / f)
            .fold(0.0, f64::max)
    };
    // δJ = 1 and 1/2: deviations are fourth order in δJ.
    let (e1, e2) = (err(5e-3), err(2.5e-3));
    assert!(e1 < 2e-3, "relative error {e1}");
    assert!((6.0..40.0).contains(&(e1 / e2)), "halving δ shrinks the error by {}", e1 / e2);
}

#[test]
fn variance_is_real_and_nonnegative() {
    let m = model();
    let psi = m.prepare_state(&InitialState::Ris { seed: 2 }).unwrap().coeffs;
    for which in [Observable::V, Observable::W, Observable::R] {
        let c = correlation_function(m, psi.as_ref(), 0, 0, which).unwrap();
        assert!(c.re >= 0.0 && c.im.abs() < 1e-14, "{which:?}: {c}");
    }
}

#[test]
fn cauchy_schwarz_bound_on_correlations() {
    let m = model();
    let psi = m.prepare_state(&cis()).unwrap().coeffs;
    let k0 = correlation_function(m, psi.as_ref(), 0, 0, Observable::V).unwrap().re;
    for n in [1, 5, 50, 400] {
        let kn = correlation_function(m, psi.as_ref(), n, n, Observable::V).unwrap().re;
        let c = correlation_function(m, psi.as_ref(), 0, n, Observable::V).unwrap();
        assert!(c.norm() <= (k0 * kn).sqrt() * (1.0 + 1e-12) + 1e-15, "n = {n}");
    }
}

#[test]
fn fidelity_is_bounded_and_norms_are_kept() {
    for (delta, initial) in [(1e-3, cis()), (3e-2, InitialState::Ris { seed: 9 })] {
        let cfg = EchoRunConfig::new(delta, initial, 1_000_000);
        let s = fidelity_series(model(), &cfg).unwrap();
        assert!(s.samples.iter().all(|x| (0.0..=1.0 + 1e-10).contains(&x.fidelity)));
        assert!(s.meta.max_norm_drift.unwrap() < 1e-10);
        assert!(s.samples.len() <= 512 && s.samples[0].n == 0);
    }
}

#[test]
fn fidelity_is_even_in_delta_at_second_order() {
    let times = linear_grid(400, 40);
    let diff = |d: f64| {
        let (p, m) = (fidelity_at(d, times.clone()), fidelity_at(-d, times.clone()));
        p.iter().zip(&m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (d1, d2) = (diff(1e-4), diff(2e-4));
    let one_minus_f = 1.0 - fidelity_at(2e-4, times.clone()).into_iter().fold(1.0, f64::min);
    // The odd part is at least one order smaller than the even part and scales as δ³ or faster.
    assert!(d2 < 0.05 * one_minus_f, "odd part {d2} vs 1 − F {one_minus_f}");
    assert!(d2 / d1 > 6.0, "ratio {}", d2 / d1);
}

#[test]
fn freeze_bound_holds_before_t2() {
    // W = Jz²/2J² has spectrum in [0, 1/2], so every κ_n ≤ 1/4 and the bound is (δJ)²/4.
    let delta = 1e-3;
    let z = delta / model().hbar();
    let cfg = EchoRunConfig::new(delta, cis(), 5000);
    let s = fidelity_series(model(), &cfg).unwrap();
    for x in &s.samples {
        assert!(1.0 - x.fidelity <= 4.0 * z * z * 0.25f64.powi(2) + 1e-12, "n = {}", x.n);
    }
}

#[test]
fn identical_configs_give_identical_bits() {
    let cfg = EchoRunConfig::new(2e-3, InitialState::Ris { seed: 5 }, 50_000);
    let a = fidelity_series(model(), &cfg).unwrap();
    let b = fidelity_series(model(), &cfg).unwrap();
    assert_eq!(a.samples, b.samples);
}

#[test]
fn mixing_time_is_short_for_the_chaotic_top() {
    let m = model();
    let psi = m.prepare_state(&cis()).unwrap().coeffs;
    let t1 = mixing_time(m, psi.as_ref(), 100).unwrap().expect("mixes within 100 kicks");
    assert!((1..=10).contains(&t1), "t1 = {t1}");
}
