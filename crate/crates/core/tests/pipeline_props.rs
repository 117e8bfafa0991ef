use std::f64::consts::PI;

use proptest::prelude::*;

use singheat::analysis::{cost_sweep, degenerate_map, leading_exponent, EXPONENT_PROBES};
use singheat::biortho::{build_family, decay_integral, ExponentialSum};
use singheat::control::{synthesize, ControlProblem};
use singheat::report::CsvTable;
use singheat::simulate::terminal_state;
use singheat::spectrum::{build_spectrum, derive_params};
use singheat::{Mpf, Precision, Real, SpectrumMp};

fn mp(x: f64) -> Mpf {
    Mpf::lit(x)
}

fn p256() -> Precision {
    Precision::new(256).unwrap()
}

fn spectrum(mu: f64, k: usize) -> SpectrumMp {
    let p = p256();
    p.scope(|| build_spectrum(&derive_params(&mp(mu)).unwrap(), k, &p)).unwrap()
}

fn control(s: &SpectrumMp, horizon: f64, rho0: &[f64], rho_t: &[f64]) -> singheat::ControlMp {
    let p = p256();
    p.scope(|| {
        let fam = build_family(&s.lambdas(), &mp(horizon), &p).unwrap();
        let v = |x: &[f64]| x.iter().map(|y| mp(*y)).collect::<Vec<_>>();
        let prob = ControlProblem::new(s.params.clone(), mp(horizon), v(rho0), v(rho_t)).unwrap();
        synthesize(&prob, s, &fam).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decay_integral_matches_expm1(s in 0.0f64..5e3, t in 1e-3f64..10.0) {
        let v = decay_integral(&s, &t);
        let oracle = if s == 0.0 { t } else { -(-s * t).exp_m1() / s };
        prop_assert!((v - oracle).abs() <= 4.0 * f64::EPSILON * oracle);
        prop_assert!(v > 0.0 && v <= t);
    }

    #[test]
    fn degenerate_map_identities(mu in -5.0f64..0.249) {
        prop_assume!((mu + 0.75).abs() > 1e-6);
        let m = degenerate_map(&mu).unwrap();
        let alpha = derive_params(&mu).unwrap().alpha;
        prop_assert!((m.a - alpha).abs() <= 1e-13);
        prop_assert!(m.identity_defect() <= 1e-13);
        if mu > -0.75 {
            prop_assert!(m.beta < 1.0);
            let x = 0.37;
            let back = m.x_of_xi(&m.xi_of_x(&x).unwrap()).unwrap();
            prop_assert!((back - x).abs() <= 1e-12);
        } else {
            // beta = 2(1 − s)/(2 − s) > 2 once s = √(1−4μ) > 2
            prop_assert!(m.beta > 2.0);
            prop_assert!(m.xi0.is_none());
        }
    }

    #[test]
    fn csv_round_trips(cells in proptest::collection::vec(proptest::collection::vec(".{0,12}", 3), 0..8)) {
        let mut t = CsvTable::new(&["a", "b", "c"]);
        for row in &cells {
            t.push(row.clone());
        }
        let bytes = t.to_bytes().unwrap();
        let mut r = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
        let back: Vec<Vec<String>> = r
            .records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect();
        prop_assert_eq!(back, cells);
    }

    #[test]
    fn decimal_strings_round_trip(m in -1e6f64..1e6, e in -300i32..300) {
        let p = p256();
        let ok = p.scope(|| {
            let x = mp(m) * mp(10.0).powi(e) / Mpf::pi();
            Mpf::parse_decimal(&x.to_decimal()) == Some(x)
        });
        prop_assert!(ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn synthesis_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, r in proptest::collection::vec(-1.0f64..1.0, 8)) {
        let s = spectrum(-1.0, 4);
        let (r1, r2) = (&r[..4], &r[4..]);
        let zero = [0.0; 4];
        let combined: Vec<f64> = r1.iter().zip(r2).map(|(x, y)| a * x + b * y).collect();
        let c1 = control(&s, 0.5, r1, &zero);
        let c2 = control(&s, 0.5, r2, &zero);
        let c = control(&s, 0.5, &combined, &zero);
        let p = p256();
        let worst = p.scope(|| {
            c.g.coeffs
                .iter()
                .zip(&c1.g.coeffs)
                .zip(&c2.g.coeffs)
                .map(|((x, y), z)| {
                    let lin = mp(a) * y.clone() + mp(b) * z.clone();
                    ((x.clone() - lin) / (x.abs() + mp(1.0))).abs().to_f64_lossy()
                })
                .fold(0.0, f64::max)
        });
        // inputs are f64-rounded combinations, so agreement is to double precision
        prop_assert!(worst <= 1e-13, "worst = {}", worst);
    }

    #[test]
    fn free_evolution_decays_modewise(r in proptest::collection::vec(-1.0f64..1.0, 5), horizon in 0.05f64..1.0) {
        let s = spectrum(0.2, 5);
        let c = control(&s, horizon, &r, &[0.0; 5]);
        let p = p256();
        let mut free = c.clone();
        free.g = ExponentialSum::zero(mp(horizon), c.g.rates.clone());
        free.f_end = mp(0.0);
        let prob = p.scope(|| {
            let v = r.iter().map(|x| mp(*x)).collect();
            ControlProblem::null(s.params.clone(), mp(horizon), v).unwrap()
        });
        let rep = terminal_state(&prob, &free, &s, &mp(0.0)).unwrap();
        let lam1 = s.modes[0].lambda.to_f64_lossy();
        for (b, r0) in rep.beta_t.iter().zip(&r) {
            prop_assert!(b.abs().to_f64_lossy() <= (-lam1 * horizon).exp() * r0.abs() * (1.0 + 1e-15));
        }
    }
}

/// Below this both quantities are rounding noise of the 256-bit pipeline.
const ROUNDOFF_FLOOR: f64 = 1e-60;

#[test]
fn terminal_error_is_controlled_by_moment_residuals() {
    for (mu, horizon, k) in [(-1.0, 0.1, 8), (0.0, 1.0, 6), (0.2, 0.5, 8), (0.24, 1.0, 5)] {
        let s = spectrum(mu, k);
        let mut rho0 = vec![0.0; k];
        rho0[0] = 1.0;
        rho0[2] = 0.5;
        let mut rho_t = vec![0.0; k];
        rho_t[0] = 0.01;
        let c = control(&s, horizon, &rho0, &rho_t);
        let p = p256();
        let prob = p.scope(|| {
            let v = |x: &[f64]| x.iter().map(|y| mp(*y)).collect::<Vec<_>>();
            ControlProblem::new(s.params.clone(), mp(horizon), v(&rho0), v(&rho_t)).unwrap()
        });
        let rep = terminal_state(&prob, &c, &s, &mp(0.0)).unwrap();
        let eps = c.max_residual().to_f64_lossy().max(ROUNDOFF_FLOOR);
        let err = rep.terminal_error_l2.to_f64_lossy();
        assert!(err <= 10.0 * k as f64 * eps, "mu = {mu}: {err:e} vs {eps:e}");
    }
}

/// K = 1: g = a₀ + a₁e^{−λ(T−t)} with two constraints, so
/// ‖g‖² = b²T/(T·E(2λ) − E(λ)²), b = (λ/r)ρ⁰e^{−λT}.
#[test]
fn single_mode_control_norm_closed_form() {
    let (lam, r) = (PI * PI, 2f64.sqrt() * PI);
    let s = spectrum(0.0, 1);
    let mut norms = Vec::new();
    for horizon in [0.2, 0.4, 0.8] {
        let c = control(&s, horizon, &[1.0], &[0.0]);
        let e1 = -(-lam * horizon).exp_m1() / lam;
        let e2 = -(-2.0 * lam * horizon).exp_m1() / (2.0 * lam);
        let b = lam / r * (-lam * horizon).exp();
        let oracle = b.abs() * (horizon / (horizon * e2 - e1 * e1)).sqrt();
        let got = c.g_l2_norm.to_f64_lossy();
        assert!((got - oracle).abs() <= 1e-12 * oracle, "T = {horizon}: {got} vs {oracle}");
        norms.push(got);
    }
    // halving T makes control strictly more expensive
    assert!(norms[0] > norms[1] && norms[1] > norms[2]);
}

#[test]
fn gram_condition_is_nondecreasing_in_k() {
    let s = spectrum(0.2, 8);
    let p = p256();
    let lambdas = s.lambdas();
    let conds: Vec<f64> = (1..=8)
        .map(|k| {
            p.scope(|| build_family(&lambdas[..k], &mp(0.5), &p))
                .unwrap()
                .gram_condition
                .to_f64_lossy()
        })
        .collect();
    assert!(conds.windows(2).all(|w| w[1] >= w[0]), "{conds:?}");
}

#[test]
fn exponent_separation_for_distinct_mu() {
    let mus = [-1.0, -0.5, 0.0, 0.1, 0.2, 0.24];
    let exps: Vec<f64> = mus
        .iter()
        .map(|&mu| {
            let s = spectrum(mu, 1);
            leading_exponent::<Mpf>(&|x| s.eigenfunction(1, x), &EXPONENT_PROBES).unwrap()
        })
        .collect();
    for (i, a) in mus.iter().enumerate() {
        let expect = 0.5 + 0.5 * (1.0 - 4.0 * a).sqrt();
        assert!((exps[i] - expect).abs() <= 0.01, "mu = {a}: {} vs {expect}", exps[i]);
        for (j, b) in mus.iter().enumerate().skip(i + 1) {
            if ((1.0 - 4.0 * a).sqrt() - (1.0 - 4.0 * b).sqrt()).abs() >= 0.2 {
                assert!((exps[i] - exps[j]).abs() >= 0.09, "mu = {a} vs {b}");
            }
        }
    }
}

#[test]
fn cost_sweep_is_deterministic_and_finite() {
    let p = p256();
    let run = || {
        p.scope(|| {
            let mus = [mp(0.2), mp(-1.0), mp(0.0)];
            let rho0 = vec![mp(1.0), mp(0.0), mp(0.0), mp(0.0)];
            cost_sweep(&mus, &mp(1.0), &rho0, &p, None).unwrap()
        })
    };
    let (a, b) = (run(), run());
    let ja = singheat::report::json_bytes(&singheat::report::cost_table_json(&a));
    let jb = singheat::report::json_bytes(&singheat::report::cost_table_json(&b));
    assert_eq!(ja, jb);
    assert!(a.rows.windows(2).all(|w| w[0].mu < w[1].mu));
    for row in &a.rows {
        let h1 = row.h1_norm.as_ref().expect("row succeeded").to_f64_lossy();
        assert!(h1.is_finite() && h1 > 0.0);
        assert!(row.bound_holds);
    }
}
