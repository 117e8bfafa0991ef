//! Families σ_k biorthogonal to e^{λ_ℓ t} on (0, T), built by a Gram solve
//! in the shifted basis e^{−λ(T−t)}, which stays in (0, 1] on [0, T].

use crate::error::{Error, Result};
use crate::linalg::{cond1, fit_line, Cholesky, Matrix};
use crate::scalar::Real;
use crate::specfun::Precision;

const MODULE: &str = "biortho";

/// Hard cap on the family size.
pub const MAX_FAMILY: usize = 30;
/// Largest family solved in double precision.
pub const MAX_DOUBLE_FAMILY: usize = 6;

/// E(s) = ∫₀ᵀ e^{−s(T−t)} dt = (1 − e^{−sT})/s, equal to T at s = 0.
pub fn decay_integral<T: Real>(s: &T, horizon: &T) -> T {
    if s.is_zero() {
        horizon.clone()
    } else {
        -(-(s.clone() * horizon.clone())).exp_m1() / s.clone()
    }
}

/// t ↦ Σ_ℓ c_ℓ e^{−λ_ℓ(T−t)} on [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSum<T> {
    pub horizon: T,
    pub rates: Vec<T>,
    pub coeffs: Vec<T>,
}

impl<T: Real> ExponentialSum<T> {
    pub fn new(horizon: T, rates: Vec<T>, coeffs: Vec<T>) -> Result<Self> {
        if rates.len() != coeffs.len() {
            return Err(Error::domain(MODULE, "rates and coefficients differ in length"));
        }
        if !(horizon > T::zero()) {
            return Err(Error::domain(MODULE, "horizon must be positive"));
        }
        if rates.first().is_some_and(|r| *r < T::zero()) || rates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(MODULE, "rates must be nonnegative, distinct and sorted"));
        }
        Ok(ExponentialSum {
            horizon,
            rates,
            coeffs,
        })
    }

    pub fn zero(horizon: T, rates: Vec<T>) -> Self {
        let coeffs = vec![T::zero(); rates.len()];
        ExponentialSum {
            horizon,
            rates,
            coeffs,
        }
    }

    pub fn eval(&self, t: &T) -> T {
        let back = self.horizon.clone() - t.clone();
        self.rates
            .iter()
            .zip(&self.coeffs)
            .fold(T::zero(), |acc, (l, c)| acc + c.clone() * (-(l.clone() * back.clone())).exp())
    }

    /// ∫₀ᵗ of the sum, in closed form.
    pub fn antiderivative(&self, t: &T) -> T {
        let back = self.horizon.clone() - t.clone();
        let mut acc = T::zero();
        for (l, c) in self.rates.iter().zip(&self.coeffs) {
            if l.is_zero() {
                acc += c.clone() * t.clone();
            } else {
                let diff = (-(l.clone() * back.clone())).exp() - (-(l.clone() * self.horizon.clone())).exp();
                acc += c.clone() * diff / l.clone();
            }
        }
        acc
    }

    pub fn integral(&self) -> T {
        self.rates
            .iter()
            .zip(&self.coeffs)
            .fold(T::zero(), |acc, (l, c)| acc + c.clone() * decay_integral(l, &self.horizon))
    }

    /// `self += a·other`; both sums must share their rates.
    pub fn add_scaled(&mut self, other: &ExponentialSum<T>, a: &T) -> Result<()> {
        if self.rates != other.rates {
            return Err(Error::Mismatch {
                module: MODULE,
                detail: "exponential sums with different rates".into(),
            });
        }
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a.clone() * o.clone();
        }
        Ok(())
    }

    pub fn scaled(&self, a: &T) -> Self {
        ExponentialSum {
            horizon: self.horizon.clone(),
            rates: self.rates.clone(),
            coeffs: self.coeffs.iter().map(|c| c.clone() * a.clone()).collect(),
        }
    }

    pub fn coeff_norm(&self) -> T {
        crate::scalar::norm2(&self.coeffs)
    }
}

/// G_{kℓ} = ∫₀ᵀ e^{−λ_k(T−t)} e^{−λ_ℓ(T−t)} dt.
pub fn gram_matrix<T: Real>(rates: &[T], horizon: &T) -> Matrix<T> {
    Matrix::from_fn(rates.len(), |i, j| {
        decay_integral(&(rates[i].clone() + rates[j].clone()), horizon)
    })
}

/// e^{−λT} ∫₀ᵀ σ(t) e^{λt} dt, every factor bounded by T.
pub fn scaled_moment<T: Real>(sigma: &ExponentialSum<T>, lambda: &T) -> T {
    sigma
        .rates
        .iter()
        .zip(&sigma.coeffs)
        .fold(T::zero(), |acc, (l, c)| {
            acc + c.clone() * decay_integral(&(lambda.clone() + l.clone()), &sigma.horizon)
        })
}

/// ‖σ‖_{L²(0,T)} = √(cᵀGc).
pub fn l2_norm<T: Real>(sigma: &ExponentialSum<T>) -> T {
    if sigma.coeffs.is_empty() {
        return T::zero();
    }
    let g = gram_matrix(&sigma.rates, &sigma.horizon);
    quad_form(&g, &sigma.coeffs).max_of(T::zero()).sqrt()
}

fn quad_form<T: Real>(g: &Matrix<T>, c: &[T]) -> T {
    g.mul_vec(c)
        .into_iter()
        .zip(c)
        .fold(T::zero(), |acc, (a, b)| acc + a * b.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyOptions {
    /// Adds the λ = 0 row enforcing ∫₀ᵀ σ_k = 0.
    pub zero_mean: bool,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { zero_mean: true }
    }
}

#[derive(Debug, Clone)]
pub struct BiorthogonalFamily<T> {
    pub horizon: T,
    pub lambdas: Vec<T>,
    /// Basis rates: [0, λ_1..λ_K] with the zero-mean row, [λ_1..λ_K] without.
    pub rates: Vec<T>,
    pub sigmas: Vec<ExponentialSum<T>>,
    /// d_k = G⁻¹ e_k, so that σ_k = e^{−λ_kT} Σ_ℓ d_{kℓ} e^{−λ_ℓ(T−t)}.
    pub unscaled: Vec<Vec<T>>,
    pub gram: Matrix<T>,
    pub gram_condition: T,
    pub min_pivot: T,
    pub precision: Precision,
    pub zero_mean: bool,
}

pub fn build_family<T: Real>(lambdas: &[T], horizon: &T, prec: &Precision) -> Result<BiorthogonalFamily<T>> {
    build_family_with(lambdas, horizon, prec, FamilyOptions::default())
}

pub fn build_family_with<T: Real>(
    lambdas: &[T],
    horizon: &T,
    prec: &Precision,
    opts: FamilyOptions,
) -> Result<BiorthogonalFamily<T>> {
    let count = lambdas.len();
    if count == 0 || count > MAX_FAMILY {
        return Err(Error::domain(MODULE, format!("family size must lie in 1..={MAX_FAMILY}, got {count}")));
    }
    let bits = T::effective_bits(prec.mantissa_bits);
    if bits <= 53 && count > MAX_DOUBLE_FAMILY {
        return Err(Error::precision(
            MODULE,
            format!("double precision is limited to K <= {MAX_DOUBLE_FAMILY}"),
            256,
        ));
    }
    prec.scope(|| {
        let horizon = horizon.rebase();
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::domain(MODULE, "horizon T must be positive"));
        }
        let lambdas: Vec<T> = lambdas.iter().map(Real::rebase).collect();
        if lambdas[0] <= T::zero() || lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(MODULE, "eigenvalues must be positive and strictly increasing"));
        }
        let offset = usize::from(opts.zero_mean);
        let mut rates = Vec::with_capacity(count + offset);
        if opts.zero_mean {
            rates.push(T::zero());
        }
        rates.extend(lambdas.iter().cloned());
        let n = rates.len();
        let gram = gram_matrix(&rates, &horizon);
        let chol = Cholesky::new(&gram).map_err(|i| {
            Error::precision(
                MODULE,
                format!("Gram matrix lost positive definiteness at pivot {i}"),
                bits + 128,
            )
        })?;
        let inv = chol.inverse();
        let kappa = cond1(&gram, &inv);
        let limit = T::lit(2.0).powi(bits as i32 - 20);
        if !(kappa <= limit) {
            let need = kappa.log2_abs().ceil() as u32 + 20 + 32;
            return Err(Error::precision(
                MODULE,
                format!("Gram condition number 2^{:.1} exceeds 2^{}", kappa.log2_abs(), bits - 20),
                need.div_ceil(64) * 64,
            ));
        }
        let min_pivot = chol
            .pivots()
            .into_iter()
            .fold(None::<T>, |m, p| Some(m.map_or(p.clone(), |m| m.min_of(p))))
            .expect("non-empty");
        let mut sigmas = Vec::with_capacity(count);
        let mut unscaled = Vec::with_capacity(count);
        for (k, lambda) in lambdas.iter().enumerate() {
            let idx = k + offset;
            let mut rhs = vec![T::zero(); n];
            rhs[idx] = (-(lambda.clone() * horizon.clone())).exp();
            let c = chol.solve_refined(&gram, &rhs);
            let mut e = vec![T::zero(); n];
            e[idx] = T::one();
            unscaled.push(chol.solve_refined(&gram, &e));
            sigmas.push(ExponentialSum {
                horizon: horizon.clone(),
                rates: rates.clone(),
                coeffs: c,
            });
        }
        Ok(BiorthogonalFamily {
            horizon,
            lambdas,
            rates,
            sigmas,
            unscaled,
            gram,
            gram_condition: kappa,
            min_pivot,
            precision: *prec,
            zero_mean: opts.zero_mean,
        })
    })
}

impl<T: Real> BiorthogonalFamily<T> {
    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// max_{k,ℓ} |m̂(σ_k, λ_ℓ) − δ_{kℓ}e^{−λ_ℓT}| / (‖c_k‖·T).
    pub fn biorthogonality_residual(&self) -> T {
        self.precision.scope(|| {
            let mut worst = T::zero();
            for (k, s) in self.sigmas.iter().enumerate() {
                let denom = s.coeff_norm() * self.horizon.clone();
                for (l, lambda) in self.lambdas.iter().enumerate() {
                    let mut r = scaled_moment(s, lambda);
                    if k == l {
                        r -= (-(lambda.clone() * self.horizon.clone())).exp();
                    }
                    worst = worst.max_of(r.abs() / denom.clone());
                }
            }
            worst
        })
    }

    /// Residual matrix m̂(σ_k, λ_ℓ) − δ_{kℓ}e^{−λ_ℓT}, unnormalized.
    pub fn residual_matrix(&self) -> Vec<Vec<T>> {
        self.precision.scope(|| {
            self.sigmas
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    self.lambdas
                        .iter()
                        .enumerate()
                        .map(|(l, lambda)| {
                            let mut r = scaled_moment(s, lambda);
                            if k == l {
                                r -= (-(lambda.clone() * self.horizon.clone())).exp();
                            }
                            r
                        })
                        .collect()
                })
                .collect()
        })
    }

    /// max_k |∫₀ᵀ σ_k| / (‖c_k‖·T).
    pub fn zero_mean_residual(&self) -> T {
        self.precision.scope(|| {
            self.sigmas
                .iter()
                .map(|s| s.integral().abs() / (s.coeff_norm() * self.horizon.clone()))
                .fold(T::zero(), |m, v| m.max_of(v))
        })
    }

    /// ‖σ_k‖·e^{λ_kT} = √(d_kᵀ G d_k), free of overflow.
    pub fn scaled_norm(&self, k: usize) -> T {
        self.precision
            .scope(|| quad_form(&self.gram, &self.unscaled[k]).max_of(T::zero()).sqrt())
    }
}

/// Empirical constants of ‖σ_k‖ ≤ C e^{P√λ_k} e^{−λ_kT}.
#[derive(Debug, Clone)]
pub struct NormFit<T> {
    pub c_fit: f64,
    pub p_fit: f64,
    pub r_squared: f64,
    /// ‖σ_k‖ e^{λ_kT}.
    pub scaled_norms: Vec<T>,
    pub fit_residuals: Vec<f64>,
    /// 1/√G_kk, the Cauchy–Schwarz bound from ∫σ_k e^{λ_kt} = 1.
    pub lower_bounds: Vec<T>,
    /// The weaker uniform bound 1/√(G_max (K+1)).
    pub uniform_lower_bound: T,
    pub lower_bounds_hold: bool,
}

pub fn estimate_fit<T: Real>(family: &BiorthogonalFamily<T>) -> Result<NormFit<T>> {
    let count = family.len();
    if count < 4 {
        return Err(Error::domain(MODULE, format!("norm fit needs K >= 4, got {count}")));
    }
    family.precision.scope(|| {
        let offset = usize::from(family.zero_mean);
        let scaled: Vec<T> = (0..count).map(|k| family.scaled_norm(k)).collect();
        let xs: Vec<f64> = family.lambdas.iter().map(|l| l.sqrt().to_f64_lossy()).collect();
        let ys: Vec<f64> = scaled.iter().map(|n| n.ln().to_f64_lossy()).collect();
        let fit = fit_line(&xs, &ys);
        let fit_residuals = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| y - fit.intercept - fit.slope * x)
            .collect();
        let g = &family.gram;
        let lower_bounds: Vec<T> = (0..count)
            .map(|k| T::one() / g.get(k + offset, k + offset).sqrt())
            .collect();
        let gmax = (0..g.dim())
            .flat_map(|i| (0..g.dim()).map(move |j| (i, j)))
            .fold(T::zero(), |m, (i, j)| m.max_of(g.get(i, j).clone()));
        let uniform = T::one() / (gmax * T::from_count(count + 1)).sqrt();
        let slack = T::one() - T::lit(1e-12);
        let lower_bounds_hold = scaled
            .iter()
            .zip(&lower_bounds)
            .all(|(n, b)| n.clone() >= b.clone() * slack.clone() && n.clone() >= uniform.clone() * slack.clone());
        Ok(NormFit {
            c_fit: fit.intercept.exp(),
            p_fit: fit.slope,
            r_squared: fit.r_squared,
            scaled_norms: scaled,
            fit_residuals,
            lower_bounds,
            uniform_lower_bound: uniform,
            lower_bounds_hold,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mpf;

    #[test]
    fn gram_entries() {
        let g = gram_matrix(&[0.0, std::f64::consts::PI.powi(2)], &1.0);
        assert_eq!(*g.get(0, 0), 1.0);
        let s = 2.0 * std::f64::consts::PI.powi(2);
        assert!((g.get(1, 1) - (1.0 - (-s).exp()) / s).abs() < 1e-16);
        let big = gram_matrix(&[30.0], &1.0);
        assert_eq!(*big.get(0, 0), 1.0 / 60.0);
    }

    #[test]
    fn single_exponential_without_zero_mean() {
        let lam = 3.0;
        let f = build_family_with(&[lam], &1.0, &Precision::double(), FamilyOptions { zero_mean: false }).unwrap();
        let g11 = decay_integral(&(2.0 * lam), &1.0);
        assert!((f.sigmas[0].coeffs[0] - (-lam).exp() / g11).abs() < 1e-15);
        let unscaled_moment = scaled_moment(&f.sigmas[0], &lam) * lam.exp();
        assert!((unscaled_moment - 1.0).abs() < 1e-14);
    }

    #[test]
    fn small_family_extended() {
        let prec = Precision::new(256).unwrap();
        let lams: Vec<Mpf> = prec.scope(|| (1..=6).map(|k| Mpf::pi().sq() * Mpf::from_count(k * k)).collect());
        let t = prec.scope(|| Mpf::lit(0.5));
        let f = build_family(&lams, &t, &prec).unwrap();
        assert!(f.biorthogonality_residual().to_f64_lossy() < 1e-40);
        assert!(f.zero_mean_residual().to_f64_lossy() < 1e-40);
        let fit = estimate_fit(&f).unwrap();
        assert!(fit.lower_bounds_hold);
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }

    #[test]
    fn norms_scale_homogeneously() {
        let s = ExponentialSum::new(1.0, vec![0.0, 2.0], vec![1.0, -0.5]).unwrap();
        assert!((l2_norm(&s.scaled(&2.0)) - 2.0 * l2_norm(&s)).abs() < 1e-15);
        assert_eq!(l2_norm(&ExponentialSum::<f64>::zero(1.0, vec![])), 0.0);
    }
}
