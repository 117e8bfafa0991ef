//! Eigensystem of −d²/dx² − μ/x² on (0, 1) with Dirichlet conditions.

use crate::cache::{zeros_with, ZeroCache};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::Real;
use crate::specfun::{bessel_j, bessel_j_derivs, bessel_j_prime, Precision};

const MODULE: &str = "spectrum";

/// Largest Bessel order accepted (μ ≥ −624.75).
pub const MAX_NU: f64 = 25.0;

/// The triple (μ, ν, α) with ν = ½√(1−4μ) and α = ½ − ν.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialParams<T> {
    pub mu: T,
    pub nu: T,
    pub alpha: T,
}

/// Derives (ν, α) from μ at the current working precision.
pub fn derive_params<T: Real>(mu: &T) -> Result<PotentialParams<T>> {
    let mu = mu.rebase();
    if !mu.is_finite() {
        return Err(Error::domain(MODULE, "mu must be finite"));
    }
    if mu >= T::lit(0.25) {
        return Err(Error::CriticalParameter { mu: mu.to_decimal() });
    }
    let s = (T::one() - T::lit(4.0) * mu.clone()).sqrt();
    let nu = s / T::lit(2.0);
    if nu > T::lit(MAX_NU) {
        return Err(Error::domain(
            MODULE,
            format!("mu = {mu} gives nu > {MAX_NU}; mu must be >= -624.75"),
        ));
    }
    let alpha = T::lit(0.5) - nu.clone();
    Ok(PotentialParams { mu, nu, alpha })
}

impl<T: Real> PotentialParams<T> {
    /// √(1−4μ) = 2ν.
    pub fn root(&self) -> T {
        T::lit(2.0) * self.nu.clone()
    }
}

/// One spectral datum.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode<T> {
    pub k: usize,
    pub j: T,
    pub lambda: T,
    pub c_norm: T,
    pub r: T,
}

/// Quadrature nodes with weights, and Φ_k at those nodes (one row per mode).
pub type RuleSamples<T> = (Vec<(T, T)>, Vec<Vec<T>>);

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub params: PotentialParams<T>,
    pub modes: Vec<EigenMode<T>>,
    pub precision: Precision,
}

pub fn build_spectrum<T: Real>(params: &PotentialParams<T>, count: usize, prec: &Precision) -> Result<Spectrum<T>> {
    build_spectrum_with(params, count, prec, None)
}

/// Spectrum with zeros taken from `cache` when available.
pub fn build_spectrum_with<T: Real>(
    params: &PotentialParams<T>,
    count: usize,
    prec: &Precision,
    cache: Option<&ZeroCache>,
) -> Result<Spectrum<T>> {
    prec.scope(|| {
        let params = PotentialParams {
            mu: params.mu.rebase(),
            nu: params.nu.rebase(),
            alpha: params.alpha.rebase(),
        };
        let table = zeros_with(cache, &params.nu, count, prec)?;
        let mut modes = Vec::with_capacity(count);
        for (i, j) in table.zeros.into_iter().enumerate() {
            let dj = bessel_j_prime(&params.nu, &j, prec)?;
            let c_norm = T::lit(2.0).sqrt() / dj.abs();
            let r = trace_coefficient(&params, &j, &c_norm, prec)?;
            modes.push(EigenMode {
                k: i + 1,
                lambda: j.sq(),
                j,
                c_norm,
                r,
            });
        }
        Ok(Spectrum {
            params,
            modes,
            precision: *prec,
        })
    })
}

/// Closed form C·j^ν·(½+ν)/(2^ν Γ(ν+1)) of the trace coefficient.
pub fn trace_closed_form<T: Real>(params: &PotentialParams<T>, j: &T, c_norm: &T) -> T {
    let nu = &params.nu;
    c_norm.clone() * j.powf(nu) * (T::lit(0.5) + nu.clone())
        / (T::lit(2.0).powf(nu) * (nu.clone() + T::one()).gamma())
}

/// x^α Φ'(x) = C x^(−ν) [½ J_ν(jx) + jx J_ν'(jx)].
fn weighted_slope<T: Real>(params: &PotentialParams<T>, j: &T, c_norm: &T, x: &T, prec: &Precision) -> Result<T> {
    let y = j.clone() * x.clone();
    let jv = bessel_j(&params.nu, &y, prec)?;
    let djv = bessel_j_prime(&params.nu, &y, prec)?;
    Ok(c_norm.clone() * x.powf(&-params.nu.clone()) * (T::lit(0.5) * jv + y * djv))
}

/// lim_{x→0⁺} x^α Φ_k'(x) by Richardson extrapolation in x² over
/// x ∈ {1e−2, 1e−3, 1e−4, 1e−5}.
pub fn trace_limit<T: Real>(params: &PotentialParams<T>, j: &T, c_norm: &T, prec: &Precision) -> Result<T> {
    prec.scope(|| {
        let mut row = Vec::with_capacity(4);
        for e in 2..=5 {
            let x = T::lit(10f64.powi(-e));
            row.push(weighted_slope(params, j, c_norm, &x, prec)?);
        }
        // each level removes the next even power; x² shrinks by 100 per probe
        let mut factor = T::one();
        while row.len() > 1 {
            factor *= T::lit(100.0);
            row = row
                .windows(2)
                .map(|w| w[1].clone() + (w[1].clone() - w[0].clone()) / (factor.clone() - T::one()))
                .collect();
        }
        Ok(row.pop().expect("non-empty"))
    })
}

/// Trace coefficient r_k, returned in closed form after cross-checking it
/// against the extrapolated limit.
pub fn trace_coefficient<T: Real>(params: &PotentialParams<T>, j: &T, c_norm: &T, prec: &Precision) -> Result<T> {
    prec.scope(|| {
        let closed = trace_closed_form(params, j, c_norm);
        let limit = trace_limit(params, j, c_norm, prec)?;
        let rel = ((limit.clone() - closed.clone()) / closed.clone()).abs();
        if rel > T::lit(1e-4) {
            return Err(Error::consistency(
                MODULE,
                format!(
                    "trace coefficient: limit {} and closed form {} differ by {:e} relative",
                    limit.to_f64_lossy(),
                    closed.to_f64_lossy(),
                    rel.to_f64_lossy()
                ),
            ));
        }
        Ok(closed)
    })
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Mode k, 1-based.
    pub fn mode(&self, k: usize) -> Result<&EigenMode<T>> {
        k.checked_sub(1)
            .and_then(|i| self.modes.get(i))
            .ok_or_else(|| Error::domain(MODULE, format!("mode {k} outside 1..={}", self.modes.len())))
    }

    pub fn lambdas(&self) -> Vec<T> {
        self.modes.iter().map(|m| m.lambda.clone()).collect()
    }

    fn check_x(x: &T) -> Result<()> {
        if !(*x > T::zero() && *x <= T::one()) {
            return Err(Error::domain(MODULE, format!("x must lie in (0, 1], got {x}")));
        }
        Ok(())
    }

    /// Φ_k(x) = C x^½ J_ν(j x).
    pub fn eigenfunction(&self, k: usize, x: &T) -> Result<T> {
        let m = self.mode(k)?;
        Self::check_x(x)?;
        let prec = self.precision;
        prec.scope(|| {
            let x = x.rebase();
            let jx = bessel_j(&self.params.nu, &(m.j.clone() * x.clone()), &prec)?;
            Ok(m.c_norm.clone() * x.sqrt() * jx)
        })
    }

    /// (Φ_k, Φ_k', Φ_k'') at x.
    pub fn eigenfunction_derivs(&self, k: usize, x: &T) -> Result<(T, T, T)> {
        let m = self.mode(k)?;
        Self::check_x(x)?;
        let prec = self.precision;
        prec.scope(|| {
            let x = x.rebase();
            let (j0, d1, d2) = bessel_j_derivs(&self.params.nu, &(m.j.clone() * x.clone()), &prec)?;
            let c = m.c_norm.clone();
            let sx = x.sqrt();
            let f = c.clone() * sx.clone() * j0.clone();
            let df = c.clone() * (j0.clone() / (T::lit(2.0) * sx.clone()) + sx.clone() * m.j.clone() * d1.clone());
            let ddf = c
                * (-(j0 / (T::lit(4.0) * x.clone() * sx.clone())) + m.j.clone() * d1 / sx.clone()
                    + sx * m.lambda.clone() * d2);
            Ok((f, df, ddf))
        })
    }

    /// Relative residual of −Φ'' − (μ/x²)Φ − λΦ at x.
    ///
    /// The scale includes the envelope λ(|Φ| + |Φ'|/j), so the measure stays
    /// meaningful at interior nodes of Φ_k.
    pub fn eigen_residual(&self, k: usize, x: &T) -> Result<T> {
        let (f, df, ddf) = self.eigenfunction_derivs(k, x)?;
        let mode = self.mode(k)?;
        let (lambda, j) = (mode.lambda.clone(), mode.j.clone());
        self.precision.scope(|| {
            let mu_term = self.params.mu.clone() / x.sq() * f.clone();
            let res = -ddf.clone() - mu_term.clone() - lambda.clone() * f.clone();
            let envelope = lambda.clone() * (f.abs() + df.abs() / j);
            let scale = ddf.abs().max_of(mu_term.abs()).max_of(envelope);
            Ok(if scale.is_zero() { res.abs() } else { res.abs() / scale })
        })
    }

    /// Φ_k evaluated at the nodes of an n-point rule on (0, 1), with weights.
    pub fn sample_on_rule(&self, n: usize) -> Result<RuleSamples<T>> {
        let prec = self.precision;
        prec.scope(|| {
            let pts = quadrature::rule::<T>(n).mapped(&T::zero(), &T::one());
            let mut vals = Vec::with_capacity(self.len());
            for m in &self.modes {
                let row: Result<Vec<T>> = pts.iter().map(|(x, _)| self.eigenfunction(m.k, x)).collect();
                vals.push(row?);
            }
            Ok((pts, vals))
        })
    }

    /// max_{k,ℓ} |⟨Φ_k, Φ_ℓ⟩ − δ_{kℓ}| under the n-point rule.
    pub fn orthonormality_defect(&self, n: usize) -> Result<T> {
        let (pts, vals) = self.sample_on_rule(n)?;
        self.precision.scope(|| {
            let mut worst = T::zero();
            for a in 0..vals.len() {
                for b in 0..=a {
                    let mut s = T::zero();
                    for (i, (_, w)) in pts.iter().enumerate() {
                        s += w.clone() * vals[a][i].clone() * vals[b][i].clone();
                    }
                    if a == b {
                        s -= T::one();
                    }
                    worst = worst.max_of(s.abs());
                }
            }
            Ok(worst)
        })
    }
}

/// Outcome of a Hardy-inequality check ¼∫z²/x² ≤ ∫z'².
#[derive(Debug, Clone, PartialEq)]
pub struct HardyCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
    /// False when halving the node count moved either integral by more than
    /// the tolerance, which flags a poorly resolved singular integrand.
    pub converged: bool,
}

pub const HARDY_TOL: f64 = 1e-9;

/// Evaluates both sides of the Hardy inequality for `z` with derivative `dz`.
pub fn hardy_check<T: Real>(z: &dyn Fn(&T) -> T, dz: &dyn Fn(&T) -> T, nodes: usize) -> HardyCheck<T> {
    let sides = |n: usize| {
        let pts = quadrature::rule::<T>(n).mapped(&T::zero(), &T::one());
        let mut lhs = T::zero();
        let mut rhs = T::zero();
        for (x, w) in pts {
            lhs += w.clone() * (z(&x) / x.clone()).sq();
            rhs += w * dz(&x).sq();
        }
        (lhs / T::lit(4.0), rhs)
    };
    let (lhs, rhs) = sides(nodes);
    let (lhs_c, rhs_c) = sides((nodes / 2).max(2));
    let tol = T::lit(HARDY_TOL);
    let near = |a: &T, b: &T| (a.clone() - b.clone()).abs() <= tol.clone() * a.abs().max_of(T::one());
    let converged = near(&lhs, &lhs_c) && near(&rhs, &rhs_c);
    let holds = lhs <= rhs.clone() + tol * rhs.abs().max_of(T::one());
    HardyCheck {
        lhs,
        rhs,
        holds,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mpf;

    #[test]
    fn params_examples() {
        let p = derive_params(&0.0f64).unwrap();
        assert_eq!((p.nu, p.alpha), (0.5, 0.0));
        let p = derive_params(&(3.0f64 / 16.0)).unwrap();
        assert_eq!((p.nu, p.alpha), (0.25, 0.25));
        let p = derive_params(&-2.0f64).unwrap();
        assert_eq!((p.nu, p.alpha), (1.5, -1.0));
        assert!(matches!(derive_params(&0.25f64), Err(Error::CriticalParameter { .. })));
        assert!(derive_params(&-700.0f64).is_err());
    }

    #[test]
    fn classical_case_first_mode() {
        let prec = Precision::new(256).unwrap();
        let s = prec.scope(|| {
            let p = derive_params(&Mpf::lit(0.0)).unwrap();
            build_spectrum(&p, 3, &prec).unwrap()
        });
        let pi = std::f64::consts::PI;
        let m = &s.modes[0];
        assert!((m.lambda.to_f64_lossy() - pi * pi).abs() < 1e-12);
        assert!((m.c_norm.to_f64_lossy() - pi).abs() < 1e-12);
        assert!((m.r.to_f64_lossy() - 2f64.sqrt() * pi).abs() < 1e-12);
        let half = prec.scope(|| Mpf::lit(0.5));
        assert!((s.eigenfunction(1, &half).unwrap().to_f64_lossy() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hardy_polynomial() {
        let h = hardy_check::<f64>(&|x| x * (1.0 - x), &|x| 1.0 - 2.0 * x, 400);
        assert!((h.lhs - 1.0 / 12.0).abs() < 1e-13);
        assert!((h.rhs - 1.0 / 3.0).abs() < 1e-13);
        assert!(h.holds && h.converged);
    }
}
