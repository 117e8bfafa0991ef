//! Modal simulation of the controlled equation through ψ = u − x^α p(x) f(t).

use crate::control::{ControlProblem, SynthesizedControl};
use crate::biortho::decay_integral;
use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::{norm2, Real};
use crate::specfun::zero_bracket;
use crate::spectrum::{PotentialParams, Spectrum};

const MODULE: &str = "simulate";

/// Smallest spatial sample accepted by the reconstruction.
pub const MIN_X: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SimulationReport<T> {
    pub beta_t: Vec<T>,
    pub terminal_error_l2: T,
    pub tail_bound: T,
    pub f_end: T,
}

fn check_match<T: Real>(problem: &ControlProblem<T>, control: &SynthesizedControl<T>, spectrum: &Spectrum<T>) -> Result<()> {
    let count = problem.count();
    let rates: Vec<&T> = control.g.rates.iter().filter(|r| !r.is_zero()).collect();
    let mismatch = |detail: String| Error::Mismatch { module: MODULE, detail };
    if spectrum.len() < count || rates.len() != count {
        return Err(mismatch(format!(
            "control has {} modes, spectrum {}, problem {count}",
            rates.len(),
            spectrum.len()
        )));
    }
    let tol = T::lit(1e-12);
    for (m, l) in spectrum.modes.iter().zip(rates) {
        if (m.lambda.clone() - l.clone()).abs() > tol.clone() * l.clone() {
            return Err(mismatch(format!("control and spectrum disagree on lambda_{}", m.k)));
        }
    }
    if (control.g.horizon.clone() - problem.horizon.clone()).abs() > tol * problem.horizon.clone() {
        return Err(mismatch("control and problem horizons differ".into()));
    }
    Ok(())
}

/// ⟨x^α p, Φ_k⟩ = r_k/λ_k.
pub fn source_projection<T: Real>(spectrum: &Spectrum<T>, k: usize) -> Result<T> {
    let m = spectrum.mode(k)?;
    Ok(m.r.clone() / m.lambda.clone())
}

/// ψ_k(t) = ρ⁰e^{−λt} − (r/λ) Σ_ℓ c_ℓ e^{−λ_ℓ(T−t)}(1 − e^{−(λ+λ_ℓ)t})/(λ+λ_ℓ).
fn psi_mode<T: Real>(rho0: &T, lambda: &T, r: &T, control: &SynthesizedControl<T>, t: &T) -> T {
    let g = &control.g;
    let back = g.horizon.clone() - t.clone();
    let mut forced = T::zero();
    for (l, c) in g.rates.iter().zip(&g.coeffs) {
        let w = (-(l.clone() * back.clone())).exp();
        forced += c.clone() * w * decay_integral(&(lambda.clone() + l.clone()), t);
    }
    rho0.clone() * (-(lambda.clone() * t.clone())).exp() - r.clone() / lambda.clone() * forced
}

/// ψ_k(t) for every mode.
pub fn modal_state<T: Real>(
    problem: &ControlProblem<T>,
    control: &SynthesizedControl<T>,
    spectrum: &Spectrum<T>,
    t: &T,
) -> Vec<T> {
    spectrum
        .modes
        .iter()
        .take(problem.count())
        .enumerate()
        .map(|(k, m)| psi_mode(&problem.rho0[k], &m.lambda, &m.r, control, t))
        .collect()
}

/// Terminal modal state of u(·, T) and its distance to the target.
///
/// `u0_tail_norm` is ‖u₀ − Π_K u₀‖ (zero for modal data); the neglected
/// modes decay at least like e^{−λ_{K+1}T}, with λ_{K+1} bounded below by the
/// lower zero bound.
pub fn terminal_state<T: Real>(
    problem: &ControlProblem<T>,
    control: &SynthesizedControl<T>,
    spectrum: &Spectrum<T>,
    u0_tail_norm: &T,
) -> Result<SimulationReport<T>> {
    check_match(problem, control, spectrum)?;
    spectrum.precision.scope(|| {
        let horizon = problem.horizon.clone();
        let f_end = control.f_at(&horizon);
        let psi = modal_state(problem, control, spectrum, &horizon);
        let beta_t: Vec<T> = psi
            .into_iter()
            .zip(&spectrum.modes)
            .map(|(p, m)| p + f_end.clone() * m.r.clone() / m.lambda.clone())
            .collect();
        let diff: Vec<T> = beta_t
            .iter()
            .zip(&problem.rho_t)
            .map(|(b, r)| b.clone() - r.clone())
            .collect();
        let (lo, _) = zero_bracket(&spectrum.params.nu, problem.count() + 1);
        let tail_bound = u0_tail_norm.clone() * (-(lo.sq() * horizon)).exp();
        Ok(SimulationReport {
            terminal_error_l2: norm2(&diff),
            beta_t,
            tail_bound,
            f_end,
        })
    })
}

/// Independent exponential-integrator march of β_k' = −λ_kβ_k − (r_k/λ_k) g(t);
/// returns max_k |β_k^step(T) − β_k^closed(T)|.
pub fn step_crosscheck<T: Real>(
    problem: &ControlProblem<T>,
    control: &SynthesizedControl<T>,
    spectrum: &Spectrum<T>,
    steps: usize,
) -> Result<T> {
    if steps < 10_000 {
        return Err(Error::domain(MODULE, format!("step_crosscheck needs at least 10^4 steps, got {steps}")));
    }
    let closed = terminal_state(problem, control, spectrum, &T::zero())?;
    spectrum.precision.scope(|| {
        let g = &control.g;
        let horizon = problem.horizon.clone();
        let dt = horizon.clone() / T::from_count(steps);
        let count = problem.count();
        let mut worst = T::zero();
        for k in 0..count {
            let m = &spectrum.modes[k];
            let decay = (-(m.lambda.clone() * dt.clone())).exp();
            // per-step source kernels (1 − e^{−(λ+λ_ℓ)Δ})/(λ+λ_ℓ)
            let kernels: Vec<T> = g
                .rates
                .iter()
                .map(|l| decay_integral(&(m.lambda.clone() + l.clone()), &dt))
                .collect();
            let gain = m.r.clone() / m.lambda.clone();
            let mut beta = problem.rho0[k].clone();
            for n in 0..steps {
                let t_next = dt.clone() * T::from_count(n + 1);
                let back = horizon.clone() - t_next;
                let mut src = T::zero();
                for ((l, c), ker) in g.rates.iter().zip(&g.coeffs).zip(&kernels) {
                    src += c.clone() * (-(l.clone() * back.clone())).exp() * ker.clone();
                }
                beta = decay.clone() * beta - gain.clone() * src;
            }
            let beta = beta + closed.f_end.clone() * gain;
            worst = worst.max_of((beta - closed.beta_t[k].clone()).abs());
        }
        Ok(worst)
    })
}

/// Boundary lift x^α p(x) with p(x) = 1 − x^{1−2α}.
pub fn lift<T: Real>(params: &PotentialParams<T>, x: &T) -> T {
    let xa = x.powf(&params.alpha);
    let p = T::one() - x.powf(&(T::one() - T::lit(2.0) * params.alpha.clone()));
    xa * p
}

/// Samples u(x_i, t_j); rows follow `ts`, columns follow `xs`.
#[derive(Debug, Clone)]
pub struct FieldSamples<T> {
    pub xs: Vec<T>,
    pub ts: Vec<T>,
    pub u: Vec<Vec<T>>,
}

fn check_grid<T: Real>(xs: &[T], ts: &[T], horizon: &T) -> Result<()> {
    if xs.iter().any(|x| *x < T::lit(MIN_X) || *x > T::one()) {
        return Err(Error::domain(MODULE, format!("x samples must lie in [{MIN_X}, 1]")));
    }
    if ts.iter().any(|t| *t < T::zero() || t > horizon) {
        return Err(Error::domain(MODULE, "t samples must lie in [0, T]"));
    }
    Ok(())
}

/// u(x,t) = Σ_k ψ_k(t)Φ_k(x) + x^α p(x) f(t) on a tensor grid.
pub fn reconstruct<T: Real>(
    problem: &ControlProblem<T>,
    control: &SynthesizedControl<T>,
    spectrum: &Spectrum<T>,
    xs: &[T],
    ts: &[T],
) -> Result<FieldSamples<T>> {
    check_match(problem, control, spectrum)?;
    check_grid(xs, ts, &problem.horizon)?;
    spectrum.precision.scope(|| {
        let count = problem.count();
        let mut phi = Vec::with_capacity(xs.len());
        for x in xs {
            let row: Result<Vec<T>> = (1..=count).map(|k| spectrum.eigenfunction(k, x)).collect();
            phi.push(row?);
        }
        let lifts: Vec<T> = xs.iter().map(|x| lift(&spectrum.params, x)).collect();
        let mut u = Vec::with_capacity(ts.len());
        for t in ts {
            let psi = modal_state(problem, control, spectrum, t);
            let f = control.f_at(t);
            let row = phi
                .iter()
                .zip(&lifts)
                .map(|(ph, l)| {
                    ph.iter()
                        .zip(&psi)
                        .fold(l.clone() * f.clone(), |acc, (a, b)| acc + a.clone() * b.clone())
                })
                .collect();
            u.push(row);
        }
        Ok(FieldSamples {
            xs: xs.to_vec(),
            ts: ts.to_vec(),
            u,
        })
    })
}

/// (u, u_t) at a single point, with u_t from the modal equations.
pub fn field_at<T: Real>(
    problem: &ControlProblem<T>,
    control: &SynthesizedControl<T>,
    spectrum: &Spectrum<T>,
    x: &T,
    t: &T,
) -> Result<(T, T)> {
    check_grid(std::slice::from_ref(x), std::slice::from_ref(t), &problem.horizon)?;
    spectrum.precision.scope(|| {
        let psi = modal_state(problem, control, spectrum, t);
        let g = control.g_at(t);
        let l = lift(&spectrum.params, x);
        let mut u = l.clone() * control.f_at(t);
        let mut ut = l * g.clone();
        for (k, p) in psi.into_iter().enumerate() {
            let m = &spectrum.modes[k];
            let phi = spectrum.eigenfunction(k + 1, x)?;
            let dp = -(m.lambda.clone() * p.clone()) - m.r.clone() / m.lambda.clone() * g.clone();
            u += p * phi.clone();
            ut += dp * phi;
        }
        Ok((u, ut))
    })
}

/// ⟨u(·,T) − x^α p f(T), Φ_k⟩ recovered by quadrature of the reconstructed field.
pub fn projected_terminal_state<T: Real>(
    problem: &ControlProblem<T>,
    control: &SynthesizedControl<T>,
    spectrum: &Spectrum<T>,
) -> Result<Vec<T>> {
    check_match(problem, control, spectrum)?;
    let (pts, vals) = spectrum.sample_on_rule(quadrature::DEFAULT_NODES)?;
    spectrum.precision.scope(|| {
        let psi = modal_state(problem, control, spectrum, &problem.horizon);
        let count = problem.count();
        let field: Vec<T> = (0..pts.len())
            .map(|i| (0..count).fold(T::zero(), |acc, k| acc + psi[k].clone() * vals[k][i].clone()))
            .collect();
        Ok((0..count)
            .map(|k| {
                pts.iter()
                    .zip(&field)
                    .zip(&vals[k])
                    .fold(T::zero(), |acc, (((_, w), u), p)| acc + w.clone() * u.clone() * p.clone())
            })
            .collect())
    })
}

/// ⟨x^α p, Φ_k⟩ from integration by parts: the boundary term at 0 is the
/// Wronskian of x^α and c_k x^{1−α}, giving 2ν c_k/λ_k with
/// c_k = lim x^{α−1}Φ_k = r_k/(½+ν). It coincides with r_k/λ_k only at ν = ½.
pub fn source_projection_wronskian<T: Real>(spectrum: &Spectrum<T>, k: usize) -> Result<T> {
    let m = spectrum.mode(k)?;
    let nu = &spectrum.params.nu;
    Ok(spectrum.precision.scope(|| {
        T::lit(2.0) * nu.clone() * m.r.clone() / ((T::lit(0.5) + nu.clone()) * m.lambda.clone())
    }))
}

/// ⟨−x^α p, Φ_k⟩ by quadrature, to compare with −r_k/λ_k.
pub fn source_projection_quadrature<T: Real>(spectrum: &Spectrum<T>, k: usize) -> Result<T> {
    spectrum.mode(k)?;
    let (pts, vals) = spectrum.sample_on_rule(quadrature::DEFAULT_NODES)?;
    spectrum.precision.scope(|| {
        Ok(pts
            .iter()
            .zip(&vals[k - 1])
            .fold(T::zero(), |acc, ((x, w), p)| acc - w.clone() * lift(&spectrum.params, x) * p.clone()))
    })
}

/// Residual of (x^α p)'' + μ x^{α−2} p at x, scaled by the size of its terms.
///
/// With p = 1 − x^{1−2α} the expression is
/// [α(α−1) + μ] x^{α−2} − [α(α−1) + μ] x^{−α−1}, each bracket evaluated
/// from its own derivative.
pub fn p_identity_residual<T: Real>(params: &PotentialParams<T>, x: &T) -> T {
    let a = params.alpha.clone();
    let mu = params.mu.clone();
    let b = T::one() - a.clone();
    let first = a.clone() * (a.clone() - T::one()) + mu.clone();
    let second = b.clone() * (b - T::one()) + mu.clone();
    let xa = x.powf(&(a.clone() - T::lit(2.0)));
    let xb = x.powf(&(-a.clone() - T::one()));
    let res = first * xa.clone() - second * xb.clone();
    let scale = ((a.clone() * (a - T::one())).abs() + mu.abs()) * (xa + xb);
    if scale.is_zero() {
        res.abs()
    } else {
        res.abs() / scale
    }
}

pub fn p_identity_check<T: Real>(params: &PotentialParams<T>, xs: &[T]) -> Result<T> {
    if xs.iter().any(|x| *x <= T::zero() || *x >= T::one()) {
        return Err(Error::domain(MODULE, "p identity is checked on (0, 1)"));
    }
    Ok(xs
        .iter()
        .map(|x| p_identity_residual(params, x))
        .fold(T::zero(), |m, v| m.max_of(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::derive_params;

    #[test]
    fn p_identity_small() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        for mu in [0.0, 0.2, -1.0] {
            let p = derive_params(&mu).unwrap();
            assert!(p_identity_check(&p, &xs).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn lift_vanishes_at_one() {
        let p = derive_params(&0.2f64).unwrap();
        assert_eq!(lift(&p, &1.0), 0.0);
    }
}
