//! The invariant suite behind `singheat verify`.
//!
//! Every check is deterministic and the rendered report carries no timings,
//! so two runs with the same configuration are byte-identical.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::analysis::{
    degenerate_map, leading_exponent, residual_convergence, target_structure_defect, time_sweep, EXPONENT_PROBES,
};
use crate::biortho::{build_family, decay_integral, estimate_fit, ExponentialSum, MAX_DOUBLE_FAMILY};
use crate::cache::ZeroCache;
use crate::control::{cauchy_schwarz_bound, f_l2_norm_sq, synthesize, ControlProblem, SynthesizedControl};
use crate::error::{Error, Result};
use crate::quadrature::adaptive;
use crate::report::CsvTable;
use crate::scalar::{Mpf, Real};
use crate::simulate::{
    p_identity_check, projected_terminal_state, reconstruct, source_projection_quadrature, source_projection_wronskian, step_crosscheck,
    terminal_state,
};
use crate::specfun::{
    bessel_j, bessel_j_prime, bessel_l, bessel_zeros, bits_for_argument, gamma, gap_bound, zero_bracket, Precision,
};
use crate::spectrum::{build_spectrum_with, derive_params, hardy_check, trace_limit, Spectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub precision_bits: u32,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.checks.len()
    }

    /// Pass/fail matrix, one line per check.
    pub fn render(&self) -> String {
        let mut out = format!("singheat verify ({} bits)\n", self.precision_bits);
        for c in &self.checks {
            let v = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "[{v}] {:<9} {:<34} {}", c.module, c.name, c.detail);
        }
        let _ = writeln!(out, "{} of {} checks passed", self.passed(), self.checks.len());
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "precision_bits": self.precision_bits,
            "passed": self.passed(),
            "total": self.checks.len(),
            "checks": self.checks.iter().map(|c| json!({
                "module": c.module,
                "name": c.name,
                "passed": c.passed,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub precision_bits: u32,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { precision_bits: 256 }
    }
}

struct Suite<'a> {
    checks: RefCell<Vec<Check>>,
    prec: Precision,
    cache: Option<&'a ZeroCache>,
}

fn e(x: f64) -> String {
    format!("{x:.2e}")
}

impl Suite<'_> {
    fn check(&self, module: &'static str, name: &str, f: impl FnOnce(&Precision) -> Result<(bool, String)>) {
        let prec = self.prec;
        let (passed, detail) = prec.scope(|| f(&prec)).unwrap_or_else(|err| (false, format!("error: {err}")));
        self.checks.borrow_mut().push(Check {
            module,
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn spectrum(&self, mu: f64, k: usize) -> Result<Spectrum<Mpf>> {
        self.prec.scope(|| {
            let p = derive_params(&Mpf::lit(mu))?;
            build_spectrum_with(&p, k, &self.prec, self.cache)
        })
    }
}

fn max_f64(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn mp(x: f64) -> Mpf {
    Mpf::lit(x)
}

fn unit(k: usize, at: usize, v: f64) -> Vec<Mpf> {
    let mut r = vec![mp(0.0); k];
    r[at] = mp(v);
    r
}

fn standard_rho0(k: usize) -> Vec<Mpf> {
    let mut r = unit(k, 0, 1.0);
    r[2] = mp(0.5);
    r
}

struct Controlled {
    spectrum: Spectrum<Mpf>,
    problem: ControlProblem<Mpf>,
    control: SynthesizedControl<Mpf>,
}

fn controlled(s: &Suite, mu: f64, horizon: f64, k: usize, target: f64) -> Result<Controlled> {
    let spectrum = s.spectrum(mu, k)?;
    let prec = s.prec;
    prec.scope(|| {
        let fam = build_family(&spectrum.lambdas(), &mp(horizon), &prec)?;
        let problem = ControlProblem::new(spectrum.params.clone(), mp(horizon), standard_rho0(k), unit(k, 0, target))?;
        let control = synthesize(&problem, &spectrum, &fam)?;
        Ok(Controlled {
            spectrum,
            problem,
            control,
        })
    })
}

fn specfun_checks(s: &Suite) {
    s.check("specfun", "gamma_integer", |p| {
        let g = gamma(&mp(6.0), p)?;
        Ok((g == mp(120.0), format!("Gamma(6) = {}", g.to_f64_lossy())))
    });
    s.check("specfun", "gamma_half", |p| {
        let d = (gamma(&mp(0.5), p)? - Mpf::pi().sqrt()).abs().to_f64_lossy();
        Ok((d <= 1e-70, format!("|Gamma(1/2) - sqrt(pi)| = {}", e(d))))
    });
    let zero_refs: [(f64, usize, f64, f64); 4] = [
        (0.0, 1, 2.40482555769577, 256.0),
        (0.3, 1, 2.85409722437668, 256.0),
        (2.0, 30, 96.5845614477832, 100.0),
        (25.0, 1, 30.779039186567, 256.0),
    ];
    for (nu, k, reference, arg) in zero_refs {
        s.check("specfun", &format!("zero_j_{nu}_{k}"), |_| {
            let prec = Precision::new(bits_for_argument(arg).max(256))?;
            let z = prec.scope(|| bessel_zeros(&mp(nu), k, &prec))?;
            let d = (z.get(k).to_f64_lossy() - reference).abs();
            Ok((d <= 1e-11, format!("|j - reference| = {}", e(d))))
        });
    }
    s.check("specfun", "j1_at_first_zero_of_j0", |p| {
        let z = bessel_zeros(&mp(0.0), 1, p)?;
        let v = bessel_j(&mp(1.0), z.get(1), p)?.to_f64_lossy();
        let d = (v - 0.519147497289467).abs();
        Ok((d <= 1e-14, format!("|J_1(j_0,1) - reference| = {}", e(d))))
    });
    s.check("specfun", "half_order_closed_form", |p| {
        let mut worst = 0.0f64;
        for x in [0.5, 3.7, 20.0] {
            let xm = mp(x);
            let exact = (mp(2.0) / (Mpf::pi() * xm.clone())).sqrt() * xm.sin();
            worst = worst.max((bessel_j(&mp(0.5), &xm, p)? - exact).abs().to_f64_lossy());
        }
        Ok((worst <= 1e-60, format!("max |J_1/2 - sqrt(2/(pi x)) sin x| = {}", e(worst))))
    });
    s.check("specfun", "three_term_recurrence", |p| {
        let (nu, x) = (mp(1.3), mp(7.1));
        let lhs = bessel_j(&(nu.clone() - mp(1.0)), &x, p)? + bessel_j(&(nu.clone() + mp(1.0)), &x, p)?;
        let rhs = mp(2.0) * nu.clone() / x.clone() * bessel_j(&nu, &x, p)?;
        let d = (lhs - rhs).abs().to_f64_lossy();
        Ok((d <= 1e-60, format!("recurrence defect = {}", e(d))))
    });
    s.check("specfun", "derivative_identity", |p| {
        // J_ν' = (J_{ν−1} − J_{ν+1})/2
        let (nu, x) = (mp(2.4), mp(5.3));
        let lhs = bessel_j_prime(&nu, &x, p)?;
        let rhs = (bessel_j(&(nu.clone() - mp(1.0)), &x, p)? - bessel_j(&(nu + mp(1.0)), &x, p)?) / mp(2.0);
        let d = (lhs - rhs).abs().to_f64_lossy();
        Ok((d <= 1e-60, format!("defect = {}", e(d))))
    });
    s.check("specfun", "entire_part_identity", |p| {
        let (nu, y) = (mp(0.7), mp(4.2));
        let d = (y.powf(&nu) * bessel_l(&nu, &y, p)? - bessel_j(&nu, &y, p)?).abs().to_f64_lossy();
        Ok((d <= 1e-60, format!("|y^nu L_nu(y) - J_nu(y)| = {}", e(d))))
    });
    for nu in [0.0, 0.1, 0.25, 0.5, 1.0, 2.0] {
        s.check("specfun", &format!("zero_bounds_gaps_nu_{nu}"), |_| {
            let prec = Precision::new(bits_for_argument(110.0))?;
            let z = prec.scope(|| bessel_zeros(&mp(nu), 30, &prec))?;
            let z: Vec<f64> = z.zeros.iter().map(Real::to_f64_lossy).collect();
            let inside = z.iter().enumerate().all(|(i, j)| {
                let (lo, hi) = zero_bracket(&nu, i + 1);
                lo - 1e-12 <= *j && *j <= hi + 1e-12
            });
            let gaps: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
            let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
            let monotone = gaps.windows(2).all(|w| match nu.partial_cmp(&0.5) {
                Some(std::cmp::Ordering::Less) => w[1] >= w[0] - 1e-12,
                Some(std::cmp::Ordering::Greater) => w[1] <= w[0] + 1e-12,
                _ => (w[1] - w[0]).abs() <= 1e-12,
            });
            let ok = inside && min_gap >= gap_bound(&nu) && monotone;
            Ok((ok, format!("30 zeros in bounds = {inside}, min gap = {min_gap:.6}, monotone = {monotone}")))
        });
    }
    s.check("specfun", "rejects_low_precision", |_| {
        let r = Precision::new(40);
        Ok((matches!(r, Err(Error::Config(_))), "40 mantissa bits rejected".into()))
    });
}

fn spectrum_checks(s: &Suite) {
    let classical = s.spectrum(0.0, 10);
    s.check("spectrum", "classical_eigenvalues", |_| {
        let sp = classical.as_ref().map_err(clone_err)?;
        let d = max_f64(sp.modes.iter().map(|m| (m.lambda.to_f64_lossy() - (m.k as f64 * PI).powi(2)).abs()));
        Ok((d <= 1e-10, format!("max |lambda_k - k^2 pi^2| = {}", e(d))))
    });
    s.check("spectrum", "classical_trace_coefficients", |_| {
        let sp = classical.as_ref().map_err(clone_err)?;
        let d = max_f64(sp.modes.iter().map(|m| (m.r.to_f64_lossy() - 2f64.sqrt() * m.k as f64 * PI).abs()));
        Ok((d <= 1e-8, format!("max |r_k - sqrt2 k pi| = {}", e(d))))
    });
    for mu in [-1.0, 0.0, 0.2] {
        let sp = s.spectrum(mu, 10);
        s.check("spectrum", &format!("orthonormality_mu_{mu}"), |_| {
            let d = sp.as_ref().map_err(clone_err)?.orthonormality_defect(400)?.to_f64_lossy();
            Ok((d <= 1e-8, format!("Gram defect K = 10: {}", e(d))))
        });
    }
    for mu in [-1.0, 0.2] {
        let sp = s.spectrum(mu, 10);
        s.check("spectrum", &format!("trace_limit_mu_{mu}"), |p| {
            let sp = sp.as_ref().map_err(clone_err)?;
            let mut worst = 0.0f64;
            for m in &sp.modes {
                let lim = trace_limit(&sp.params, &m.j, &m.c_norm, p)?;
                worst = worst.max(((lim - m.r.clone()) / m.r.clone()).abs().to_f64_lossy());
            }
            Ok((worst <= 1e-6, format!("limit vs closed form: {} rel", e(worst))))
        });
    }
    let sp = s.spectrum(0.2, 6);
    s.check("spectrum", "eigen_equation_residual", |_| {
        let sp = sp.as_ref().map_err(clone_err)?;
        let mut worst = 0.0f64;
        for m in &sp.modes {
            for i in 1..10 {
                worst = worst.max(sp.eigen_residual(m.k, &mp(i as f64 / 10.0))?.to_f64_lossy());
            }
        }
        Ok((worst <= 1e-40, format!("max relative residual = {}", e(worst))))
    });
    s.check("spectrum", "trace_coefficients_positive", |_| {
        let sp = sp.as_ref().map_err(clone_err)?;
        let ok = sp.modes.iter().all(|m| m.r > mp(0.0));
        Ok((ok, "r_k > 0 for k <= 6 at mu = 0.2".into()))
    });
    s.check("spectrum", "rejects_critical_mu", |_| {
        let r = derive_params(&mp(0.3));
        Ok((matches!(r, Err(Error::CriticalParameter { .. })), "mu = 0.3 rejected".into()))
    });
    s.check("spectrum", "hardy_polynomial", |_| {
        let h = hardy_check::<f64>(&|x| x * (1.0 - x), &|x| 1.0 - 2.0 * x, 400);
        Ok((h.holds && h.converged, format!("lhs = {:.12}, rhs = {:.12}", h.lhs, h.rhs)))
    });
    s.check("spectrum", "hardy_trigonometric", |_| {
        let h = hardy_check::<f64>(&|x| (PI * x).sin() + x * x, &|x| PI * (PI * x).cos() + 2.0 * x, 400);
        Ok((h.holds && h.converged, format!("lhs = {:.12}, rhs = {:.12}", h.lhs, h.rhs)))
    });
}

fn biortho_checks(s: &Suite) {
    let fam = s
        .spectrum(0.0, 6)
        .and_then(|sp| s.prec.scope(|| build_family(&sp.lambdas(), &mp(0.5), &s.prec)));
    s.check("biortho", "biorthogonality", |_| {
        let d = fam.as_ref().map_err(clone_err)?.biorthogonality_residual().to_f64_lossy();
        Ok((d <= 1e-12, format!("scaled residual K = 6, T = 0.5: {}", e(d))))
    });
    s.check("biortho", "zero_mean", |_| {
        let d = fam.as_ref().map_err(clone_err)?.zero_mean_residual().to_f64_lossy();
        Ok((d <= 1e-12, format!("residual = {}", e(d))))
    });
    s.check("biortho", "gram_vs_quadrature", |_| {
        let f = fam.as_ref().map_err(clone_err)?;
        let rates: Vec<f64> = f.rates.iter().map(Real::to_f64_lossy).collect();
        let mut worst = 0.0f64;
        for (i, a) in rates.iter().enumerate() {
            for (j, b) in rates.iter().enumerate() {
                let sum = a + b;
                let q = adaptive(&0.0, &0.5, 1e-14, &|t: &f64| (-sum * t).exp());
                let g = f.gram.get(i, j).to_f64_lossy();
                worst = worst.max((q - g).abs() / g);
            }
        }
        Ok((worst <= 1e-12, format!("max relative deviation = {}", e(worst))))
    });
    s.check("biortho", "gram_symmetric_positive", |_| {
        let f = fam.as_ref().map_err(clone_err)?;
        let ok = f.gram.is_symmetric() && f.min_pivot > mp(0.0);
        Ok((ok, format!("min pivot = {}", e(f.min_pivot.to_f64_lossy()))))
    });
    s.check("biortho", "norm_lower_bounds", |_| {
        let fit = estimate_fit(fam.as_ref().map_err(clone_err)?)?;
        Ok((fit.lower_bounds_hold, format!("P_fit = {:.4}, R^2 = {:.4}", fit.p_fit, fit.r_squared)))
    });
    s.check("biortho", "double_precision_cap", |_| {
        let lambdas: Vec<f64> = (1..=MAX_DOUBLE_FAMILY + 1).map(|k| (k as f64 * PI).powi(2)).collect();
        let r = build_family(&lambdas, &1.0, &Precision::double());
        Ok((matches!(r, Err(Error::Precision { .. })), format!("K = {} refused in f64", MAX_DOUBLE_FAMILY + 1)))
    });
    s.check("biortho", "decay_integral_limits", |_| {
        let at_zero = decay_integral(&0.0f64, &0.7);
        let tiny = decay_integral(&1e-12f64, &0.7);
        let ok = at_zero == 0.7 && (tiny - 0.7).abs() <= 1e-12;
        Ok((ok, format!("E(0) = {at_zero}, E(1e-12) - T = {}", e(tiny - 0.7))))
    });
}

fn control_checks(s: &Suite) {
    for mu in [-1.0, 0.2] {
        let c = controlled(s, mu, 1.0, 6, 0.1);
        s.check("control", &format!("moment_residuals_mu_{mu}"), |_| {
            let d = c.as_ref().map_err(clone_err)?.control.max_residual().to_f64_lossy();
            Ok((d <= 1e-8, format!("max scaled residual = {}", e(d))))
        });
    }
    let c = controlled(s, 0.2, 0.5, 6, 0.0);
    s.check("control", "endpoint_values", |_| {
        let c = &c.as_ref().map_err(clone_err)?.control;
        let (f0, ft) = (c.f_at(&mp(0.0)).abs().to_f64_lossy(), c.f_end.abs().to_f64_lossy());
        Ok((f0 == 0.0 && ft <= 1e-30, format!("|f(0)| = {}, |f(T)| = {}", e(f0), e(ft))))
    });
    s.check("control", "cauchy_schwarz_bound", |_| {
        let c = c.as_ref().map_err(clone_err)?;
        let b = cauchy_schwarz_bound(&c.problem, &c.spectrum);
        let ok = b <= c.control.f_l2_norm;
        Ok((ok, format!("bound = {}, ||f|| = {}", e(b.to_f64_lossy()), e(c.control.f_l2_norm.to_f64_lossy()))))
    });
    s.check("control", "f_norm_closed_form", |_| {
        let g = ExponentialSum::new(0.7, vec![0.0, 1.5, 4.0], vec![0.3, -1.2, 2.0])?;
        let q = adaptive(&0.0, &0.7, 1e-14, &|t: &f64| g.antiderivative(t).powi(2));
        let d = (f_l2_norm_sq(&g) - q).abs() / q;
        Ok((d <= 1e-12, format!("relative deviation = {}", e(d))))
    });
    s.check("control", "unreachable_guard", |p| {
        let sp = s.spectrum(0.0, 4)?;
        let fam = build_family(&sp.lambdas(), &mp(10.0), p)?;
        let prob = ControlProblem::new(sp.params.clone(), mp(10.0), unit(4, 0, 1.0), unit(4, 3, 1.0))?;
        let r = synthesize(&prob, &sp, &fam);
        Ok((matches!(r, Err(Error::Unreachable { k: 4, .. })), "e_4 target at T = 10 refused".into()))
    });
    s.check("control", "zero_data_zero_control", |p| {
        let sp = s.spectrum(0.0, 3)?;
        let fam = build_family(&sp.lambdas(), &mp(1.0), p)?;
        let prob = ControlProblem::null(sp.params.clone(), mp(1.0), vec![mp(0.0); 3])?;
        let c = synthesize(&prob, &sp, &fam)?;
        Ok((c.h1_norm == mp(0.0), "rho0 = 0 gives g = 0".into()))
    });
}

fn simulate_checks(s: &Suite) {
    let c = controlled(s, 0.2, 0.1, 8, 0.0);
    s.check("simulate", "null_control_terminal", |_| {
        let c = c.as_ref().map_err(clone_err)?;
        let r = terminal_state(&c.problem, &c.control, &c.spectrum, &mp(0.0))?;
        let d = r.terminal_error_l2.to_f64_lossy();
        Ok((d <= 1e-6, format!("terminal error mu = 0.2, T = 0.1, K = 8: {}", e(d))))
    });
    let small = controlled(s, 0.0, 1.0, 4, 0.0);
    s.check("simulate", "stepping_crosscheck", |_| {
        let c = small.as_ref().map_err(clone_err)?;
        let d = step_crosscheck(&c.problem, &c.control, &c.spectrum, 10_000)?.to_f64_lossy();
        Ok((d <= 1e-10, format!("max deviation = {}", e(d))))
    });
    s.check("simulate", "reachable_target", |_| {
        let c = controlled(s, 0.2, 1.0, 6, 0.1)?;
        let r = terminal_state(&c.problem, &c.control, &c.spectrum, &mp(0.0))?;
        let d = r.terminal_error_l2.to_f64_lossy();
        Ok((d <= 1e-6, format!("terminal error for 0.1 e_1: {}", e(d))))
    });
    s.check("simulate", "free_decay", |_| {
        let c = small.as_ref().map_err(clone_err)?;
        let mut free = c.control.clone();
        free.g = ExponentialSum::zero(mp(1.0), c.control.g.rates.clone());
        free.f_end = mp(0.0);
        let r = terminal_state(&c.problem, &free, &c.spectrum, &mp(0.0))?;
        let d = max_f64(r.beta_t.iter().zip(&c.spectrum.modes).zip(&c.problem.rho0).map(|((b, m), r0)| {
            (b.clone() - r0.clone() * (-m.lambda.clone()).exp()).abs().to_f64_lossy()
        }));
        Ok((d == 0.0, format!("max |beta_k(T) - rho0_k e^(-lambda_k T)| = {}", e(d))))
    });
    s.check("simulate", "boundary_and_initial_values", |_| {
        let c = c.as_ref().map_err(clone_err)?;
        let xs = vec![mp(0.3), mp(1.0)];
        let f = reconstruct(&c.problem, &c.control, &c.spectrum, &xs, &[mp(0.0), mp(0.05)])?;
        let edge = f.u.iter().map(|r| r[1].abs().to_f64_lossy()).fold(0.0, f64::max);
        let mut init = mp(0.0);
        for (k, r0) in c.problem.rho0.iter().enumerate() {
            init += r0.clone() * c.spectrum.eigenfunction(k + 1, &xs[0])?;
        }
        let d0 = (f.u[0][0].clone() - init).abs().to_f64_lossy();
        Ok((edge <= 1e-9 && d0 <= 1e-9, format!("max |u(1,t)| = {}, |u(x,0) - u0| = {}", e(edge), e(d0))))
    });
    s.check("simulate", "reconstruction_projection", |_| {
        let c = c.as_ref().map_err(clone_err)?;
        let proj = projected_terminal_state(&c.problem, &c.control, &c.spectrum)?;
        let r = terminal_state(&c.problem, &c.control, &c.spectrum, &mp(0.0))?;
        let d = max_f64(proj.iter().zip(&r.beta_t).map(|(a, b)| (a.clone() - b.clone()).abs().to_f64_lossy()));
        Ok((d <= 1e-8, format!("max |<u(T) - lift f(T), Phi_k> - beta_k(T)| = {}", e(d))))
    });
    s.check("simulate", "p_identity", |_| {
        let xs: Vec<Mpf> = (1..10).map(|i| mp(i as f64 / 10.0)).collect();
        let mut worst = 0.0f64;
        for mu in [-1.0, 0.0, 0.2] {
            worst = worst.max(p_identity_check(&derive_params(&mp(mu))?, &xs)?.to_f64_lossy());
        }
        Ok((worst <= 1e-12, format!("max scaled residual = {}", e(worst))))
    });
    for mu in [-1.0, 0.2] {
        let sp = s.spectrum(mu, 8);
        s.check("simulate", &format!("source_projection_mu_{mu}"), |_| {
            let sp = sp.as_ref().map_err(clone_err)?;
            let mut worst = 0.0f64;
            for m in &sp.modes {
                let q = source_projection_quadrature(sp, m.k)?;
                worst = worst.max((q + m.r.clone() / m.lambda.clone()).abs().to_f64_lossy());
            }
            Ok((worst <= 1e-8, format!("max |quadrature + r_k/lambda_k| = {}", e(worst))))
        });
        s.check("simulate", &format!("wronskian_projection_mu_{mu}"), |_| {
            let sp = sp.as_ref().map_err(clone_err)?;
            let mut worst = 0.0f64;
            for m in &sp.modes {
                let q = source_projection_quadrature(sp, m.k)?;
                worst = worst.max((q + source_projection_wronskian(sp, m.k)?).abs().to_f64_lossy());
            }
            Ok((worst <= 1e-8, format!("max |quadrature + 2nu r_k/((1/2+nu) lambda_k)| = {}", e(worst))))
        });
    }
}

fn analysis_checks(s: &Suite) {
    s.check("analysis", "degenerate_map_identities", |_| {
        let mut worst = 0.0f64;
        for i in 0..100 {
            // deterministic sweep of (−5, 0.249), skipping the pole at −3/4
            let mu = -5.0 + 5.249 * (i as f64 + 0.5) / 100.0;
            let m = degenerate_map(&mu)?;
            let alpha = derive_params(&mu)?.alpha;
            worst = worst.max((m.a - alpha).abs()).max(m.identity_defect());
        }
        Ok((worst <= 1e-13, format!("max |a - alpha|, |mu + a(a-1)| over 100 mu = {}", e(worst))))
    });
    s.check("analysis", "degenerate_map_values", |_| {
        let b0 = degenerate_map(&0.0f64)?.beta;
        let m = degenerate_map(&(3.0 / 16.0f64))?;
        let near = degenerate_map(&(0.25 - 1e-14f64))?.beta;
        let ok = b0 == 0.0 && (m.beta - 2.0 / 3.0).abs() <= 1e-15 && (m.a - 0.25).abs() <= 1e-15 && (near - 1.0).abs() <= 1e-6;
        Ok((ok, format!("beta(0) = {b0}, beta(3/16) = {:.15}, beta(1/4-) = {near:.8}", m.beta)))
    });
    s.check("analysis", "degenerate_map_pole", |_| {
        Ok((degenerate_map(&-0.75f64).is_err(), "mu = -3/4 excluded".into()))
    });
    let sp = s.spectrum(0.2, 6);
    s.check("analysis", "target_structure", |_| {
        let sp = sp.as_ref().map_err(clone_err)?;
        let xs: Vec<Mpf> = (0..=18).map(|i| mp(0.05 + 0.05 * i as f64)).collect();
        let mut worst = 0.0f64;
        for k in 0..6 {
            worst = worst.max(target_structure_defect(&unit(6, k, 1.0), sp, &xs)?.to_f64_lossy());
        }
        Ok((worst <= 1e-10, format!("max |u_T - x^(nu+1/2) F| = {}", e(worst))))
    });
    s.check("analysis", "leading_exponents", |_| {
        let sp2 = sp.as_ref().map_err(clone_err)?;
        let sp0 = s.spectrum(0.0, 1)?;
        let e2 = leading_exponent::<Mpf>(&|x| sp2.eigenfunction(1, x), &EXPONENT_PROBES)?;
        let e0 = leading_exponent::<Mpf>(&|x| sp0.eigenfunction(1, x), &EXPONENT_PROBES)?;
        let expect2 = 0.5 + 0.5 * 0.2f64.sqrt();
        let ok = (e0 - 1.0).abs() <= 0.01 && (e2 - expect2).abs() <= 0.01 && (e0 - e2).abs() >= 0.09;
        Ok((ok, format!("mu = 0: {e0:.6}, mu = 0.2: {e2:.6}, separation {:.4}", (e0 - e2).abs())))
    });
    s.check("analysis", "degenerate_residual_order", |_| {
        let prec = Precision::new(128)?;
        prec.scope(|| {
            let p = derive_params(&mp(0.2))?;
            let sp = build_spectrum_with(&p, 1, &prec, s.cache)?;
            let map = degenerate_map(&mp(0.2))?;
            let c = residual_convergence(&sp, &map, 1, &mp(0.1), 1000)?;
            let ok = c.fine <= 1e-4 && (c.observed_order - 4.0).abs() <= 0.5;
            Ok((ok, format!("residual n = 2000: {}, observed order {:.3}", e(c.fine), c.observed_order)))
        })
    });
    s.check("analysis", "time_sweep_monotone", |p| {
        let ts = [mp(1.0), mp(0.5), mp(0.25)];
        let sw = time_sweep(&mp(0.0), &ts, &unit(4, 0, 1.0), p, s.cache)?;
        let c = sw.c_fit.unwrap_or(f64::NAN);
        Ok((sw.increasing && c > 0.0, format!("increasing = {}, C_fit = {c:.4}", sw.increasing)))
    });
}

fn io_checks(s: &Suite) {
    s.check("report", "csv_rfc4180", |_| {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), "x, \"y\"".into()]);
        let got = String::from_utf8(t.to_bytes()?).unwrap_or_default();
        Ok((got == "a,b\r\n1,\"x, \"\"y\"\"\"\r\n", "quoting and CRLF".into()))
    });
    s.check("report", "decimal_round_trip", |_| {
        let x = Mpf::pi() / mp(7.0);
        let back = Mpf::parse_decimal(&x.to_decimal());
        Ok((back.as_ref() == Some(&x), format!("{} digits", x.to_decimal().len())))
    });
    s.check("cache", "zero_cache_round_trip", |p| {
        let dir = tempfile::tempdir()?;
        let cache = ZeroCache::new(dir.path());
        let fresh = cache.zeros(&mp(0.3), 5, p)?;
        let again = cache.get(&mp(0.3), 5, p)?;
        let same = again.is_some_and(|t| t.zeros == fresh.zeros);
        Ok((same, "stored zeros read back identically".into()))
    });
}

/// Errors are not `Clone`; shared setup failures are re-raised by message.
fn clone_err(err: &Error) -> Error {
    Error::Consistency {
        module: "verify",
        detail: format!("setup failed: {err}"),
    }
}

/// Runs every check and returns the report.
pub fn run(config: &VerifyConfig, cache: Option<&ZeroCache>) -> Result<VerifyReport> {
    let prec = Precision::new(config.precision_bits)?;
    if config.precision_bits < 256 {
        return Err(Error::Config("verify needs at least 256 mantissa bits".into()));
    }
    let suite = Suite {
        checks: RefCell::new(Vec::new()),
        prec,
        cache,
    };
    specfun_checks(&suite);
    spectrum_checks(&suite);
    biortho_checks(&suite);
    control_checks(&suite);
    simulate_checks(&suite);
    analysis_checks(&suite);
    io_checks(&suite);
    Ok(VerifyReport {
        precision_bits: config.precision_bits,
        checks: suite.checks.into_inner(),
    })
}
