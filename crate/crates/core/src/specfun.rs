//! Gamma, Bessel functions of the first kind and their positive zeros.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{with_precision, Real};

const MODULE: &str = "specfun";

/// Largest Bessel argument accepted by the series evaluator.
pub const MAX_ARGUMENT: f64 = 1000.0;
/// Largest zero count per table.
pub const MAX_ZEROS: usize = 200;
const MAX_TERMS: usize = 20_000;

/// Working precision of an extended-precision computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Precision {
    pub mantissa_bits: u32,
    /// Relative tolerance accepted for truncated and cancelling series.
    pub series_tol: f64,
}

impl Precision {
    /// Precision with the default tolerance `2^(-bits/2)`.
    pub fn new(mantissa_bits: u32) -> Result<Self> {
        Self::with_tol(mantissa_bits, default_tol(mantissa_bits))
    }

    pub fn with_tol(mantissa_bits: u32, series_tol: f64) -> Result<Self> {
        if mantissa_bits < 53 {
            return Err(Error::Config(format!(
                "precision_bits must be at least 53, got {mantissa_bits}"
            )));
        }
        if mantissa_bits > 2000 {
            return Err(Error::Config(format!(
                "precision_bits must be at most 2000, got {mantissa_bits}"
            )));
        }
        if !(series_tol > 0.0 && series_tol <= default_tol(mantissa_bits)) {
            return Err(Error::Config(format!(
                "series_tol must lie in (0, 2^(-{mantissa_bits}/2)], got {series_tol:e}"
            )));
        }
        Ok(Precision {
            mantissa_bits,
            series_tol,
        })
    }

    /// Double precision.
    pub fn double() -> Self {
        Precision {
            mantissa_bits: 53,
            series_tol: default_tol(53),
        }
    }

    /// Runs `f` with extended-precision values created at this width.
    pub fn scope<R>(&self, f: impl FnOnce() -> R) -> R {
        with_precision(self.mantissa_bits, f)
    }

    /// Bits and tolerance actually achievable by scalar type `T`.
    pub fn effective<T: Real>(&self) -> Precision {
        let bits = T::effective_bits(self.mantissa_bits);
        Precision {
            mantissa_bits: bits,
            series_tol: self.series_tol.max(default_tol(bits)),
        }
    }

    /// Rounding unit `2^-bits` of scalar type `T` at this precision.
    pub fn unit<T: Real>(&self) -> T {
        T::lit(2.0).powi(-(T::effective_bits(self.mantissa_bits) as i32))
    }

    /// Smallest multiple of 64 bits whose default tolerance can absorb a
    /// series with cancellation ratio `2^lost_bits` at argument scale.
    pub fn bits_for_cancellation(lost_bits: f64) -> u32 {
        let need = 2.0 * (lost_bits.max(0.0) + 12.0);
        let need = need.max(64.0) as u32;
        need.div_ceil(64) * 64
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            mantissa_bits: crate::scalar::DEFAULT_BITS,
            series_tol: default_tol(crate::scalar::DEFAULT_BITS),
        }
    }
}

fn default_tol(bits: u32) -> f64 {
    2f64.powf(-(bits as f64) / 2.0)
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function in double precision.
pub fn lanczos_gamma(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=171.0).contains(&x) {
        return (2..x as u32).fold(1.0, |acc, n| acc * n as f64);
    }
    if x > 11.0 {
        // upward recurrence from a reduced argument keeps the error near n·ε
        let n = (x - 10.0).floor();
        let mut y = x - n;
        let mut acc = lanczos_gamma(y);
        while y < x - 0.5 {
            acc *= y;
            y += 1.0;
        }
        return acc;
    }
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * lanczos_gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    // split the power so that t^(x+1/2) e^(-t) does not overflow early
    let half = t.powf((x + 0.5) / 2.0);
    (2.0 * std::f64::consts::PI).sqrt() * half * ((-t).exp() * half) * a
}

/// Euler Gamma function on `(0, 200]`.
pub fn gamma<T: Real>(x: &T, prec: &Precision) -> Result<T> {
    prec.scope(|| {
        let x = x.rebase();
        if !x.is_finite() || x <= T::zero() || x > T::lit(200.0) {
            return Err(Error::domain(
                MODULE,
                format!("gamma is evaluated on (0, 200], got {x}"),
            ));
        }
        Ok(x.gamma())
    })
}

/// Power series Σ s_m with s_0 = 1 and s_{m+1} = s_m·(-x²/4)/((m+1)(m+1+ν)).
struct Series<T> {
    sum: T,
    abs_sum: T,
    terms: usize,
}

fn normalized_series<T: Real>(nu: &T, x: &T, eps: &T) -> Series<T> {
    let q = x.sq() / T::lit(4.0);
    let half = T::lit(0.5);
    let mut s = T::one();
    let mut sum = T::one();
    let mut abs_sum = T::one();
    let mut biggest = T::one();
    let mut terms = 1;
    for m in 0..MAX_TERMS {
        let m1 = T::from_count(m + 1);
        s = -(s * q.clone()) / (m1.clone() * (m1 + nu.clone()));
        sum += s.clone();
        let a = s.abs();
        abs_sum += a.clone();
        if a > biggest {
            biggest = a.clone();
        }
        terms += 1;
        let m2 = T::from_count(m + 2);
        let next_ratio = q.clone() / (m2.clone() * (m2 + nu.clone()));
        if next_ratio < half {
            let floor = sum.abs().max_of(eps.clone() * biggest.clone());
            if a <= eps.clone() * floor {
                break;
            }
        }
    }
    Series {
        sum,
        abs_sum,
        terms,
    }
}

/// Value of J_ν(x) with an absolute rounding-error estimate.
#[derive(Debug, Clone)]
pub struct BesselEval<T> {
    pub value: T,
    pub abs_err: T,
}

fn check_args<T: Real>(nu: &T, x: &T) -> Result<()> {
    if !nu.is_finite() || *nu < T::zero() {
        return Err(Error::domain(MODULE, format!("order must be >= 0, got {nu}")));
    }
    if !x.is_finite() || *x < T::zero() || *x > T::lit(MAX_ARGUMENT) {
        return Err(Error::domain(
            MODULE,
            format!("argument must lie in [0, {MAX_ARGUMENT}], got {x}"),
        ));
    }
    Ok(())
}

/// Magnitude against which the absolute error of J_ν(x) is judged: the
/// oscillation envelope for x ≥ ν, the value itself in the monotone regime.
fn local_scale<T: Real>(nu: &T, x: &T, value: &T) -> T {
    if x >= nu {
        let env = (T::lit(2.0) / (T::pi() * x.clone().max_of(T::one()))).sqrt();
        value.abs().max_of(env)
    } else {
        value.abs()
    }
}

fn eval_j<T: Real>(nu: &T, x: &T, prec: &Precision) -> Result<BesselEval<T>> {
    check_args(nu, x)?;
    if x.is_zero() {
        let value = if nu.is_zero() { T::one() } else { T::zero() };
        return Ok(BesselEval {
            value,
            abs_err: T::zero(),
        });
    }
    let eff = prec.effective::<T>();
    let eps = prec.unit::<T>();
    let series = normalized_series(nu, x, &eps);
    let term0 = (x.clone() / T::lit(2.0)).powf(nu) / (nu.clone() + T::one()).gamma();
    let value = term0.clone() * series.sum;
    let abs_err = eps * term0.abs() * series.abs_sum * T::from_count(series.terms + 4);
    let scale = local_scale(nu, x, &value);
    if abs_err > T::lit(eff.series_tol) * scale.clone() {
        let lost = (abs_err.clone() / scale).log2_abs() + eff.mantissa_bits as f64;
        return Err(Error::precision(
            MODULE,
            format!("cancellation in the J_{nu} series at x = {}", x.to_f64_lossy()),
            Precision::bits_for_cancellation(lost).max(eff.mantissa_bits + 64),
        ));
    }
    Ok(BesselEval { value, abs_err })
}

/// J_ν(x) with its rounding-error estimate.
pub fn bessel_j_eval<T: Real>(nu: &T, x: &T, prec: &Precision) -> Result<BesselEval<T>> {
    prec.scope(|| eval_j(&nu.rebase(), &x.rebase(), prec))
}

/// Bessel function of the first kind J_ν(x) by its power series.
pub fn bessel_j<T: Real>(nu: &T, x: &T, prec: &Precision) -> Result<T> {
    bessel_j_eval(nu, x, prec).map(|e| e.value)
}

fn j_prime_with<T: Real>(nu: &T, x: &T, j_nu: &T, prec: &Precision) -> Result<T> {
    let j_next = eval_j(&(nu.clone() + T::one()), x, prec)?.value;
    Ok(nu.clone() / x.clone() * j_nu.clone() - j_next)
}

/// J_ν'(x) = (ν/x)J_ν(x) − J_{ν+1}(x) for x > 0.
pub fn bessel_j_prime<T: Real>(nu: &T, x: &T, prec: &Precision) -> Result<T> {
    prec.scope(|| {
        let (nu, x) = (nu.rebase(), x.rebase());
        if x <= T::zero() {
            return Err(Error::domain(MODULE, "J' is evaluated for x > 0"));
        }
        let j = eval_j(&nu, &x, prec)?.value;
        j_prime_with(&nu, &x, &j, prec)
    })
}

/// (J_ν, J_ν', J_ν'') at x > 0, with the second derivative assembled from
/// the recurrence alone.
pub fn bessel_j_derivs<T: Real>(nu: &T, x: &T, prec: &Precision) -> Result<(T, T, T)> {
    prec.scope(|| {
        let (nu, x) = (nu.rebase(), x.rebase());
        if x <= T::zero() {
            return Err(Error::domain(MODULE, "derivatives are evaluated for x > 0"));
        }
        let nu1 = nu.clone() + T::one();
        let j0 = eval_j(&nu, &x, prec)?.value;
        let j1 = eval_j(&nu1, &x, prec)?.value;
        let j2 = eval_j(&(nu1.clone() + T::one()), &x, prec)?.value;
        let d0 = nu.clone() / x.clone() * j0.clone() - j1.clone();
        let d1 = nu1 / x.clone() * j1 - j2;
        let dd = -(nu.clone() / x.sq()) * j0.clone() + nu / x * d0.clone() - d1;
        Ok((j0, d0, dd))
    })
}

/// L_ν(y) = Σ (−1)^m y^{2m}/(m! 2^{2m+ν} Γ(m+ν+1)), so that J_ν(y) = y^ν L_ν(y).
pub fn bessel_l<T: Real>(nu: &T, y: &T, prec: &Precision) -> Result<T> {
    prec.scope(|| {
        let (nu, y) = (nu.rebase(), y.rebase());
        check_args(&nu, &y)?;
        let lead = T::one() / (T::lit(2.0).powf(&nu) * (nu.clone() + T::one()).gamma());
        if y.is_zero() {
            return Ok(lead);
        }
        let eff = prec.effective::<T>();
        let eps = prec.unit::<T>();
        let series = normalized_series(&nu, &y, &eps);
        let value = lead.clone() * series.sum;
        let abs_err = eps * lead.abs() * series.abs_sum * T::from_count(series.terms + 4);
        let y_nu = y.powf(&nu);
        let scale = local_scale(&nu, &y, &(value.clone() * y_nu.clone())) / y_nu;
        if abs_err > T::lit(eff.series_tol) * scale.clone() {
            let lost = (abs_err / scale).log2_abs() + eff.mantissa_bits as f64;
            return Err(Error::precision(
                MODULE,
                format!("series truncation error exceeds tolerance in L_{nu} at y = {}", y.to_f64_lossy()),
                Precision::bits_for_cancellation(lost).max(eff.mantissa_bits + 64),
            ));
        }
        Ok(value)
    })
}

/// Two-sided bounds on j_{ν,k} (Lorch), ordered as (lower, upper).
pub fn zero_bracket<T: Real>(nu: &T, k: usize) -> (T, T) {
    let kk = T::from_count(k);
    let a = T::pi() * (kk.clone() + nu.clone() / T::lit(2.0) - T::lit(0.25));
    let b = T::pi() * (kk + nu.clone() / T::lit(4.0) - T::lit(0.125));
    if *nu <= T::lit(0.5) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Minimum spacing between consecutive zeros.
pub fn gap_bound<T: Real>(nu: &T) -> T {
    if *nu <= T::lit(0.5) {
        T::lit(0.75) * T::pi()
    } else {
        T::pi()
    }
}

/// Two-term McMahon approximation of j_{ν,k}.
pub fn mcmahon<T: Real>(nu: &T, k: usize) -> T {
    let b = (T::from_count(k) + nu.clone() / T::lit(2.0) - T::lit(0.25)) * T::pi();
    let c = T::lit(4.0) * nu.sq() - T::one();
    b.clone() - c / (T::lit(8.0) * b)
}

/// Strictly increasing positive zeros j_{ν,1..K} of J_ν.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroTable<T> {
    pub nu: T,
    pub zeros: Vec<T>,
    pub precision: Precision,
}

impl<T: Real> ZeroTable<T> {
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    /// Zero j_{ν,k}, 1-based.
    pub fn get(&self, k: usize) -> &T {
        &self.zeros[k - 1]
    }

    /// Re-checks ordering, bracket containment and the residual of every zero.
    pub fn validate(&self) -> Result<()> {
        let prec = self.precision;
        prec.scope(|| {
            let slack = bracket_slack::<T>(&prec);
            for (i, z) in self.zeros.iter().enumerate() {
                let k = i + 1;
                let (lo, hi) = zero_bracket(&self.nu, k);
                let tol = slack.clone() * hi.clone();
                if *z < lo.clone() - tol.clone() || *z > hi.clone() + tol {
                    return Err(bracket_error(k, z, &lo, &hi));
                }
                if i > 0 && *z <= self.zeros[i - 1] {
                    return Err(Error::consistency(MODULE, format!("zeros not increasing at k = {k}")));
                }
                let j = eval_j(&self.nu, z, &prec)?;
                let dj = j_prime_with(&self.nu, z, &j.value, &prec)?;
                if !residual_ok(&j.value, &dj, z, &prec) {
                    return Err(Error::consistency(
                        MODULE,
                        format!("|J(j_k)| = {:e} too large at k = {k}", j.value.to_f64_lossy()),
                    ));
                }
            }
            Ok(())
        })
    }
}

fn bracket_slack<T: Real>(prec: &Precision) -> T {
    let eff = prec.effective::<T>();
    T::lit(16.0 * eff.series_tol)
}

fn bracket_error<T: Real>(k: usize, z: &T, lo: &T, hi: &T) -> Error {
    Error::Bracket {
        k,
        value: z.to_decimal(),
        lo: lo.to_decimal(),
        hi: hi.to_decimal(),
    }
}

fn residual_ok<T: Real>(j: &T, dj: &T, z: &T, prec: &Precision) -> bool {
    let tol = T::lit(prec.effective::<T>().series_tol);
    let local = T::one().max_of(dj.abs() * z.clone() * tol.clone());
    j.abs() <= T::lit(10.0) * tol * local
}

/// Safeguarded Newton on a cell [a, b] where J_ν changes sign.
fn refine_in_cell<T: Real>(nu: &T, mut a: T, mut b: T, seed: T, prec: &Precision) -> Result<T> {
    let eps = prec.unit::<T>();
    let fa = eval_j(nu, &a, prec)?.value;
    let neg_at_a = fa < T::zero();
    let mut x = if seed > a && seed < b {
        seed
    } else {
        (a.clone() + b.clone()) / T::lit(2.0)
    };
    let mut last_dx: Option<T> = None;
    for _ in 0..400 {
        let f = eval_j(nu, &x, prec)?;
        if f.value.is_zero() {
            return Ok(x);
        }
        let df = j_prime_with(nu, &x, &f.value, prec)?;
        if (f.value < T::zero()) == neg_at_a {
            a = x.clone();
        } else {
            b = x.clone();
        }
        let mut next = x.clone() - f.value.clone() / df.clone();
        let newton_ok = next > a && next < b && !df.is_zero();
        if !newton_ok {
            next = (a.clone() + b.clone()) / T::lit(2.0);
        }
        let dx = (next.clone() - x.clone()).abs();
        let noise = T::lit(8.0) * f.abs_err / df.abs().max_of(eps.clone());
        let tol_x = (T::lit(256.0) * eps.clone() * x.clone()).max_of(noise);
        x = next;
        if newton_ok && dx <= tol_x {
            return Ok(x);
        }
        // Newton stalled at the rounding floor of the evaluation.
        if let Some(prev) = &last_dx {
            if newton_ok && dx >= *prev && dx <= tol_x.clone() * T::lit(1e6) {
                return Ok(x);
            }
        }
        if (b.clone() - a.clone()) <= tol_x {
            return Ok(x);
        }
        last_dx = newton_ok.then_some(dx);
    }
    Ok(x)
}

/// First K positive zeros of J_ν.
///
/// Each zero is isolated in a sign-change cell at most π/8 wide, scanning
/// from the Lorch lower bound (k = 1) or from past the previous zero, then
/// refined by Newton iteration seeded with the McMahon value. The result is
/// validated against the Lorch bracket, the derivative sign (−1)^k and the
/// gap bound.
pub fn bessel_zeros<T: Real>(nu: &T, count: usize, prec: &Precision) -> Result<ZeroTable<T>> {
    if count == 0 || count > MAX_ZEROS {
        return Err(Error::domain(
            MODULE,
            format!("zero count must lie in 1..={MAX_ZEROS}, got {count}"),
        ));
    }
    prec.scope(|| {
        let nu = nu.rebase();
        if !nu.is_finite() || nu < T::zero() {
            return Err(Error::domain(MODULE, format!("order must be >= 0, got {nu}")));
        }
        let slack = bracket_slack::<T>(prec);
        let gap = gap_bound::<T>(&nu);
        let step = T::pi() / T::lit(8.0);
        let mut zeros: Vec<T> = Vec::with_capacity(count);
        for k in 1..=count {
            let (lo, hi) = zero_bracket(&nu, k);
            let tol = slack.clone() * hi.clone();
            let lo_s = lo.clone() - tol.clone();
            let hi_s = hi.clone() + tol.clone();
            let start = match zeros.last() {
                Some(prev) => lo_s.clone().max_of(prev.clone() + gap.clone() / T::lit(2.0)),
                None => lo_s.clone(),
            };
            let limit = hi_s.clone() + step.clone();
            let mut a = start;
            let mut fa = eval_j(&nu, &a, prec)?.value;
            let mut cell = None;
            while a < limit {
                if fa.is_zero() {
                    cell = Some((a.clone(), a.clone()));
                    break;
                }
                let b = (a.clone() + step.clone()).min_of(limit.clone());
                let fb = eval_j(&nu, &b, prec)?.value;
                if fb.is_zero() || (fa < T::zero()) != (fb < T::zero()) {
                    cell = Some((a.clone(), b.clone()));
                    break;
                }
                a = b;
                fa = fb;
            }
            let Some((a, b)) = cell else {
                return Err(bracket_error(k, &limit, &lo, &hi));
            };
            let root = if a == b {
                a
            } else {
                let seed = mcmahon(&nu, k);
                refine_in_cell(&nu, a, b, seed, prec)?
            };
            if root < lo_s || root > hi_s {
                return Err(bracket_error(k, &root, &lo, &hi));
            }
            let j = eval_j(&nu, &root, prec)?;
            let dj = j_prime_with(&nu, &root, &j.value, prec)?;
            let expect_negative = k % 2 == 1;
            if (dj < T::zero()) != expect_negative {
                return Err(Error::consistency(
                    MODULE,
                    format!("derivative sign at j_(nu,{k}) contradicts (-1)^k"),
                ));
            }
            if let Some(prev) = zeros.last() {
                if root.clone() - prev.clone() < gap.clone() - tol.clone() {
                    return Err(Error::consistency(
                        MODULE,
                        format!("gap below the bound between k = {} and k = {k}", k - 1),
                    ));
                }
            }
            if !residual_ok(&j.value, &dj, &root, prec) {
                return Err(Error::precision(
                    MODULE,
                    format!("residual of j_(nu,{k}) above tolerance"),
                    prec.mantissa_bits + 64,
                ));
            }
            zeros.push(root);
        }
        Ok(ZeroTable {
            nu,
            zeros,
            precision: *prec,
        })
    })
}

/// Mantissa width that comfortably evaluates J_ν up to argument `x`.
pub fn bits_for_argument(x: f64) -> u32 {
    // The series loses about x·log2(e) bits to cancellation.
    Precision::bits_for_cancellation(x * std::f64::consts::LOG2_E + 8.0).max(256)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mpf;

    fn p256() -> Precision {
        Precision::new(256).unwrap()
    }

    #[test]
    fn precision_validation() {
        assert!(Precision::new(52).is_err());
        assert!(Precision::with_tol(128, 1e-10).is_err());
        assert!(Precision::with_tol(128, 1e-30).is_ok());
        assert_eq!(Precision::default().mantissa_bits, 256);
    }

    #[test]
    fn gamma_values() {
        let p = Precision::double();
        assert_eq!(gamma(&1.0, &p).unwrap(), 1.0);
        assert!((gamma(&5.0, &p).unwrap() - 24.0).abs() < 24.0 * 1e-14);
        assert!((gamma(&1.5, &p).unwrap() - 0.886_226_925_452_758).abs() < 1e-14);
        assert!(gamma(&0.0, &p).is_err());
        assert!(gamma(&-1.0, &p).is_err());
    }

    #[test]
    fn lanczos_relative_error_against_mpfr() {
        let p = p256();
        for i in 1..460 {
            let x = i as f64 * 0.37;
            let exact = p.scope(|| Mpf::lit(x).gamma().to_f64_lossy());
            let rel = (lanczos_gamma(x) - exact).abs() / exact;
            assert!(rel < 1e-13, "x = {x}: rel {rel:e}");
        }
    }

    #[test]
    fn j_half_matches_sine_form() {
        let x = std::f64::consts::FRAC_PI_2;
        let v = bessel_j(&0.5, &x, &Precision::double()).unwrap();
        assert!((v - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(bessel_j(&0.3, &0.0, &Precision::double()).unwrap(), 0.0);
        assert_eq!(bessel_j(&0.0, &0.0, &Precision::double()).unwrap(), 1.0);
    }

    #[test]
    fn large_argument_in_double_asks_for_bits() {
        match bessel_j(&0.5, &60.0, &Precision::double()) {
            Err(Error::Precision { needed_bits, .. }) => assert!(needed_bits > 53),
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    #[test]
    fn zeros_half_order_are_multiples_of_pi() {
        let t = bessel_zeros(&Mpf::lit(0.5), 3, &p256()).unwrap();
        p256().scope(|| {
            for k in 1..=3 {
                let d = (t.get(k).clone() - Mpf::pi() * Mpf::from_count(k)).abs();
                assert!(d.to_f64_lossy() < 1e-30);
            }
        });
        t.validate().unwrap();
    }

    #[test]
    fn large_order_first_zero() {
        // reference value of j_{25,1} to 12 digits
        let t = bessel_zeros(&Mpf::lit(25.0), 3, &p256()).unwrap();
        assert!((t.get(1).to_f64_lossy() - 30.779_039_186_567).abs() < 1e-10);
    }
}
