use std::f64::consts::PI;

use proptest::prelude::*;

use singheat::specfun::bits_for_argument;
use singheat::spectrum::{build_spectrum, derive_params};
use singheat::{Mpf, Precision, Real, SpectrumMp};

fn mp(x: f64) -> Mpf {
    Mpf::lit(x)
}

fn spectrum(mu: f64, k: usize, bits: u32) -> SpectrumMp {
    let p = Precision::new(bits).unwrap();
    p.scope(|| build_spectrum(&derive_params(&mp(mu)).unwrap(), k, &p)).unwrap()
}

proptest! {
    #[test]
    fn nu_plus_alpha_is_one_half(mu in -50.0f64..0.2499) {
        let p = derive_params(&mu).unwrap();
        prop_assert_eq!(p.nu + p.alpha, 0.5);
        let q = Precision::new(256).unwrap();
        let exact = q.scope(|| {
            let p = derive_params(&mp(mu)).unwrap();
            p.nu + p.alpha == mp(0.5)
        });
        prop_assert!(exact);
    }

    #[test]
    fn supercritical_mu_is_rejected(mu in 0.25f64..10.0) {
        let rejected = matches!(derive_params(&mu), Err(singheat::Error::CriticalParameter { .. }));
        prop_assert!(rejected);
    }
}

#[test]
fn normalization_asymptotics_at_k_50() {
    let bits = bits_for_argument(170.0);
    for mu in [-1.0, 0.2] {
        let s = spectrum(mu, 50, bits);
        let m = s.mode(50).unwrap();
        let ratio = m.c_norm.to_f64_lossy() / (PI * m.j.to_f64_lossy()).sqrt();
        assert!((ratio - 1.0).abs() <= 0.02, "mu = {mu}: {ratio}");
    }
}

#[test]
fn trace_growth_exponent_is_nu_plus_one_half() {
    let bits = bits_for_argument(170.0);
    for mu in [-1.0, 0.0, 0.2, 0.24] {
        let s = spectrum(mu, 50, bits);
        let (xs, ys): (Vec<f64>, Vec<f64>) = s.modes[9..]
            .iter()
            .map(|m| (m.j.to_f64_lossy().ln(), m.r.to_f64_lossy().ln()))
            .unzip();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let expect = 0.5 * (1.0 - 4.0 * mu).sqrt() + 0.5;
        assert!((slope - expect).abs() <= 0.05, "mu = {mu}: slope {slope}, expected {expect}");
    }
}

#[test]
fn classical_reduction_is_the_sine_system() {
    let s = spectrum(0.0, 20, bits_for_argument(70.0));
    let p = s.precision;
    for m in &s.modes {
        let k = m.k as f64;
        assert!((m.lambda.to_f64_lossy() - k * k * PI * PI).abs() <= 1e-10);
        for x in [0.1, 0.37, 0.5, 0.93] {
            let phi = s.eigenfunction(m.k, &mp(x)).unwrap();
            let sine = p.scope(|| mp(2.0).sqrt() * (Mpf::pi() * mp(k) * mp(x)).sin());
            assert!((phi - sine).abs().to_f64_lossy() <= 1e-10, "k = {k}, x = {x}");
        }
    }
}

#[test]
fn eigen_equation_residual_k_20() {
    for mu in [-1.0, 0.0, 0.2, 0.24] {
        let s = spectrum(mu, 20, bits_for_argument(70.0));
        for m in &s.modes {
            for x in [0.2, 0.5, 0.8] {
                let r = s.eigen_residual(m.k, &mp(x)).unwrap().to_f64_lossy();
                assert!(r <= 1e-7, "mu = {mu}, k = {}, x = {x}: {r:e}", m.k);
            }
        }
    }
}

#[test]
fn eigenfunctions_vanish_at_the_right_end() {
    let s = spectrum(-1.0, 10, 256);
    for m in &s.modes {
        let v = s.eigenfunction(m.k, &mp(1.0)).unwrap().abs().to_f64_lossy();
        assert!(v <= 1e-60, "k = {}: {v:e}", m.k);
    }
}
