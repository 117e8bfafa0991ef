//! Moment problem assembly and synthesis of the boundary control f.

use crate::biortho::{decay_integral, estimate_fit, l2_norm, BiorthogonalFamily, ExponentialSum};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::Real;
use crate::spectrum::{PotentialParams, Spectrum};

const MODULE: &str = "control";

/// Log-magnitude budget for ρ^T_k e^{λ_kT}.
pub const LOG_BUDGET: f64 = 700.0;

/// Modal data of a control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem<T> {
    pub params: PotentialParams<T>,
    pub horizon: T,
    pub rho0: Vec<T>,
    pub rho_t: Vec<T>,
}

impl<T: Real> ControlProblem<T> {
    pub fn new(params: PotentialParams<T>, horizon: T, rho0: Vec<T>, rho_t: Vec<T>) -> Result<Self> {
        if rho0.len() != rho_t.len() || rho0.is_empty() {
            return Err(Error::Config(format!(
                "rho0 and rhoT must have the same nonzero length K, got {} and {}",
                rho0.len(),
                rho_t.len()
            )));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::Config("T must be positive".into()));
        }
        if rho0.iter().chain(&rho_t).any(|v| !v.is_finite()) {
            return Err(Error::Config("modal coefficients must be finite".into()));
        }
        Ok(ControlProblem {
            params,
            horizon,
            rho0,
            rho_t,
        })
    }

    /// Null-control problem ρ^T = 0.
    pub fn null(params: PotentialParams<T>, horizon: T, rho0: Vec<T>) -> Result<Self> {
        let zeros = vec![T::zero(); rho0.len()];
        Self::new(params, horizon, rho0, zeros)
    }

    pub fn count(&self) -> usize {
        self.rho0.len()
    }
}

/// Fourier coefficients of a datum with quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct FourierCoefficients<T> {
    pub rho: Vec<T>,
    /// ‖u‖² − Σρ_k², the squared truncation tail (zero for modal input).
    pub parseval_defect: T,
    /// Largest change of any ρ_k when the node count is halved.
    pub refinement_change: T,
    pub quadrature_warning: bool,
}

impl<T: Real> FourierCoefficients<T> {
    /// Modal input passes through unchanged.
    pub fn modal(rho: Vec<T>) -> Self {
        FourierCoefficients {
            rho,
            parseval_defect: T::zero(),
            refinement_change: T::zero(),
            quadrature_warning: false,
        }
    }

    pub fn tail_norm(&self) -> T {
        self.parseval_defect.clone().max_of(T::zero()).sqrt()
    }
}

/// ρ_k = ∫₀¹ u Φ_k by Gauss–Legendre quadrature.
pub fn fourier_coefficients<T: Real>(u: &dyn Fn(&T) -> T, spectrum: &Spectrum<T>) -> Result<FourierCoefficients<T>> {
    let prec = spectrum.precision;
    let project = |n: usize| -> Result<(Vec<T>, T)> {
        let (pts, vals) = spectrum.sample_on_rule(n)?;
        let us: Vec<T> = pts.iter().map(|(x, _)| u(x)).collect();
        let norm_sq = pts
            .iter()
            .zip(&us)
            .fold(T::zero(), |acc, ((_, w), v)| acc + w.clone() * v.sq());
        let rho = vals
            .iter()
            .map(|phi| {
                pts.iter()
                    .zip(&us)
                    .zip(phi)
                    .fold(T::zero(), |acc, (((_, w), v), p)| acc + w.clone() * v.clone() * p.clone())
            })
            .collect();
        Ok((rho, norm_sq))
    };
    prec.scope(|| {
        let (rho, norm_sq) = project(quadrature::DEFAULT_NODES)?;
        let (coarse, _) = project(quadrature::DEFAULT_NODES / 2)?;
        let refinement_change = rho
            .iter()
            .zip(&coarse)
            .fold(T::zero(), |m, (a, b)| m.max_of((a.clone() - b.clone()).abs()));
        let parseval_defect = rho.iter().fold(norm_sq, |acc, r| acc - r.sq());
        Ok(FourierCoefficients {
            quadrature_warning: refinement_change > T::lit(1e-8),
            rho,
            parseval_defect,
            refinement_change,
        })
    })
}

/// Σ_k |ρ^T_k| k^{½−ν} e^{Pπk}, or +∞ once any term's logarithm exceeds
/// the budget.
pub fn admissibility<T: Real>(rho_t: &[T], params: &PotentialParams<T>, p: f64) -> f64 {
    let expo = 0.5 - params.nu.to_f64_lossy();
    let mut total = 0.0;
    for (i, r) in rho_t.iter().enumerate() {
        if r.is_zero() {
            continue;
        }
        let k = (i + 1) as f64;
        let log_term = r.abs().ln().to_f64_lossy() + expo * k.ln() + p * std::f64::consts::PI * k;
        if log_term > LOG_BUDGET {
            return f64::INFINITY;
        }
        total += log_term.exp();
    }
    total
}

/// The constructed control: g = f' as an exponential sum, f(t) = ∫₀ᵗ g.
#[derive(Debug, Clone)]
pub struct SynthesizedControl<T> {
    pub g: ExponentialSum<T>,
    pub h1_norm: T,
    pub f_l2_norm: T,
    pub g_l2_norm: T,
    pub moment_residuals: Vec<T>,
    pub f_end: T,
    pub admissibility_score: Option<f64>,
    pub p_used: Option<f64>,
}

impl<T: Real> SynthesizedControl<T> {
    pub fn f_at(&self, t: &T) -> T {
        self.g.antiderivative(t)
    }

    pub fn g_at(&self, t: &T) -> T {
        self.g.eval(t)
    }

    pub fn max_residual(&self) -> T {
        self.moment_residuals
            .iter()
            .fold(T::zero(), |m, r| m.max_of(r.clone()))
    }
}

pub fn synthesize<T: Real>(
    problem: &ControlProblem<T>,
    spectrum: &Spectrum<T>,
    family: &BiorthogonalFamily<T>,
) -> Result<SynthesizedControl<T>> {
    synthesize_with(problem, spectrum, family, None)
}

fn check_compatible<T: Real>(
    problem: &ControlProblem<T>,
    spectrum: &Spectrum<T>,
    family: &BiorthogonalFamily<T>,
) -> Result<()> {
    let count = problem.count();
    let mismatch = |detail: String| Error::Mismatch { module: MODULE, detail };
    if spectrum.len() < count || family.len() != count {
        return Err(mismatch(format!(
            "problem has K = {count}, spectrum {} modes, family {} functions",
            spectrum.len(),
            family.len()
        )));
    }
    if !family.zero_mean {
        return Err(mismatch("the family must carry the zero-mean constraint".into()));
    }
    let tol = T::lit(1e-12);
    for (m, l) in spectrum.modes.iter().zip(&family.lambdas) {
        if (m.lambda.clone() - l.clone()).abs() > tol.clone() * l.clone() {
            return Err(mismatch(format!("eigenvalue {} differs between spectrum and family", m.k)));
        }
    }
    if (family.horizon.clone() - problem.horizon.clone()).abs() > tol * problem.horizon.clone() {
        return Err(mismatch("family and problem horizons differ".into()));
    }
    Ok(())
}

/// Synthesizes g = Σ_k (λ_k/r_k)(ρ⁰_k − ρ^T_k e^{λ_kT}) σ_k.
///
/// The target part uses e^{λ_kT} c_{kℓ} = (G⁻¹)_{ℓk}, so no growing
/// exponential is ever formed. `p` instantiates the admissibility score;
/// without it the fitted P of the family is used when K ≥ 4.
pub fn synthesize_with<T: Real>(
    problem: &ControlProblem<T>,
    spectrum: &Spectrum<T>,
    family: &BiorthogonalFamily<T>,
    p: Option<f64>,
) -> Result<SynthesizedControl<T>> {
    check_compatible(problem, spectrum, family)?;
    let prec = family.precision;
    prec.scope(|| {
        let horizon = family.horizon.clone();
        let mut g = ExponentialSum::zero(horizon.clone(), family.rates.clone());
        for (k, mode) in spectrum.modes.iter().take(problem.count()).enumerate() {
            let scale = mode.lambda.clone() / mode.r.clone();
            let r0 = problem.rho0[k].rebase();
            let rt = problem.rho_t[k].rebase();
            if !r0.is_zero() {
                g.add_scaled(&family.sigmas[k], &(scale.clone() * r0))?;
            }
            if !rt.is_zero() {
                let log_mag = rt.abs().ln().to_f64_lossy() + (mode.lambda.clone() * horizon.clone()).to_f64_lossy();
                if log_mag > LOG_BUDGET {
                    return Err(Error::Unreachable {
                        k: k + 1,
                        log_magnitude: log_mag,
                    });
                }
                let w = -(scale * rt);
                for (c, d) in g.coeffs.iter_mut().zip(&family.unscaled[k]) {
                    *c += w.clone() * d.clone();
                }
            }
        }
        let g_l2 = l2_norm(&g);
        let f_l2 = f_l2_norm_sq(&g).max_of(T::zero()).sqrt();
        let f_end = g.antiderivative(&horizon);
        let bound = T::lit(1e-10) * g_l2.clone() * horizon.sqrt();
        if f_end.abs() > bound {
            return Err(Error::consistency(
                MODULE,
                format!("f(T) = {:e} is not zero to working precision", f_end.to_f64_lossy()),
            ));
        }
        let moment_residuals = moment_residuals(problem, spectrum, &g);
        let p_used = p.or_else(|| {
            (family.len() >= 4)
                .then(|| estimate_fit(family).ok().map(|fit| fit.p_fit))
                .flatten()
        });
        let admissibility_score = p_used.map(|p| admissibility(&problem.rho_t, &problem.params, p));
        Ok(SynthesizedControl {
            h1_norm: (f_l2.sq() + g_l2.sq()).sqrt(),
            f_l2_norm: f_l2,
            g_l2_norm: g_l2,
            moment_residuals,
            f_end,
            admissibility_score,
            p_used,
            g,
        })
    })
}

/// e^{−λT} ∫₀ᵀ f(t) e^{λt} dt for f = ∫₀ᵗ g, in closed form.
pub fn scaled_moment_of_f<T: Real>(g: &ExponentialSum<T>, lambda: &T) -> T {
    let horizon = &g.horizon;
    let e_k = decay_integral(lambda, horizon);
    let mut acc = T::zero();
    for (l, c) in g.rates.iter().zip(&g.coeffs) {
        if l.is_zero() {
            // c·t
            acc += c.clone() * (horizon.clone() - e_k.clone()) / lambda.clone();
        } else {
            // (c/λ_ℓ)(e^{−λ_ℓ(T−t)} − e^{−λ_ℓT})
            let tail = (-(l.clone() * horizon.clone())).exp();
            let term = decay_integral(&(lambda.clone() + l.clone()), horizon) - tail * e_k.clone();
            acc += c.clone() / l.clone() * term;
        }
    }
    acc
}

/// |r_k m̂_k + ρ⁰_k e^{−λ_kT} − ρ^T_k| for every mode.
pub fn moment_residuals<T: Real>(problem: &ControlProblem<T>, spectrum: &Spectrum<T>, g: &ExponentialSum<T>) -> Vec<T> {
    spectrum
        .modes
        .iter()
        .take(problem.count())
        .enumerate()
        .map(|(k, m)| {
            let mhat = scaled_moment_of_f(g, &m.lambda);
            let decay = (-(m.lambda.clone() * g.horizon.clone())).exp();
            (m.r.clone() * mhat + problem.rho0[k].clone() * decay - problem.rho_t[k].clone()).abs()
        })
        .collect()
}

/// ‖f‖²_{L²(0,T)} with f = A(t) + D + c₀t, A = Σ a_ℓ e^{−λ_ℓ(T−t)}, a_ℓ = c_ℓ/λ_ℓ.
pub fn f_l2_norm_sq<T: Real>(g: &ExponentialSum<T>) -> T {
    let horizon = g.horizon.clone();
    let mut c0 = T::zero();
    let mut rates = Vec::new();
    let mut a = Vec::new();
    for (l, c) in g.rates.iter().zip(&g.coeffs) {
        if l.is_zero() {
            c0 += c.clone();
        } else {
            rates.push(l.clone());
            a.push(c.clone() / l.clone());
        }
    }
    let d = a
        .iter()
        .zip(&rates)
        .fold(T::zero(), |acc, (ai, l)| acc - ai.clone() * (-(l.clone() * horizon.clone())).exp());
    let mut total = T::zero();
    for (i, li) in rates.iter().enumerate() {
        for (j, lj) in rates.iter().enumerate() {
            total += a[i].clone() * a[j].clone() * decay_integral(&(li.clone() + lj.clone()), &horizon);
        }
    }
    let t2 = horizon.sq();
    total += d.sq() * horizon.clone();
    total += c0.sq() * t2.clone() * horizon.clone() / T::lit(3.0);
    total += d.clone() * c0.clone() * t2;
    for (ai, l) in a.iter().zip(&rates) {
        let e = decay_integral(l, &horizon);
        total += T::lit(2.0) * d.clone() * ai.clone() * e.clone();
        total += T::lit(2.0) * c0.clone() * ai.clone() * (horizon.clone() - e) / l.clone();
    }
    total
}

/// ‖f‖_{H¹(0,T)} = √(‖f‖² + ‖g‖²).
pub fn h1_norm<T: Real>(g: &ExponentialSum<T>) -> T {
    (f_l2_norm_sq(g).max_of(T::zero()) + l2_norm(g).sq()).sqrt()
}

/// Cauchy–Schwarz lower bound on ‖f‖_{L²} from each moment equation:
/// |ρ⁰_k e^{−λ_kT} − ρ^T_k| ≤ r_k ‖f‖ √E(2λ_k).
pub fn cauchy_schwarz_bound<T: Real>(problem: &ControlProblem<T>, spectrum: &Spectrum<T>) -> T {
    spectrum.precision.scope(|| {
        spectrum
            .modes
            .iter()
            .take(problem.count())
            .enumerate()
            .map(|(k, m)| {
                let decay = (-(m.lambda.clone() * problem.horizon.clone())).exp();
                let lhs = (problem.rho0[k].clone() * decay - problem.rho_t[k].clone()).abs();
                let e = decay_integral(&(T::lit(2.0) * m.lambda.clone()), &problem.horizon);
                lhs / (m.r.clone() * e.sqrt())
            })
            .fold(T::zero(), |a, b| a.max_of(b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biortho::build_family;
    use crate::scalar::Mpf;
    use crate::specfun::Precision;
    use crate::spectrum::{build_spectrum, derive_params};
    use num_traits::Zero;

    #[test]
    fn admissibility_examples() {
        let p0 = derive_params(&0.0f64).unwrap();
        assert_eq!(admissibility(&[0.0, 0.0], &p0, 1.0), 0.0);
        let s = admissibility(&[1.0], &p0, 1.0);
        assert!((s - std::f64::consts::PI.exp()).abs() < 1e-12);
        let pn = derive_params(&-2.0f64).unwrap();
        let rt = [0.0, 1.0, 0.5];
        assert!(admissibility(&rt, &pn, 1.0) < admissibility(&rt, &p0, 1.0));
        assert_eq!(admissibility(&[1.0; 300], &p0, 1.0), f64::INFINITY);
    }

    #[test]
    fn f_norm_closed_form_matches_dense_sampling() {
        let g = ExponentialSum::new(0.7, vec![0.0, 1.5, 4.0], vec![0.3, -1.2, 2.0]).unwrap();
        let n = 20000;
        let h = 0.7 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * g.antiderivative(&(i as f64 * h)).powi(2);
        }
        s *= h;
        assert!((f_l2_norm_sq(&g) - s).abs() < 1e-8);
    }

    #[test]
    fn zero_data_gives_zero_control() {
        let prec = Precision::new(256).unwrap();
        prec.scope(|| {
            let p = derive_params(&Mpf::lit(0.0)).unwrap();
            let sp = build_spectrum(&p, 3, &prec).unwrap();
            let t = Mpf::lit(1.0);
            let fam = build_family(&sp.lambdas(), &t, &prec).unwrap();
            let prob = ControlProblem::null(p, t, vec![Mpf::lit(0.0); 3]).unwrap();
            let c = synthesize(&prob, &sp, &fam).unwrap();
            assert!(c.h1_norm.is_zero());
            assert!(c.moment_residuals.iter().all(|r| r.is_zero()));
        });
    }
}
