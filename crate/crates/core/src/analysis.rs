//! Cost sweeps, target structure and the change of variables to the
//! degenerate equation u_t = (x^β u_x)_x.

use std::thread;

use crate::biortho::build_family;
use crate::cache::ZeroCache;
use crate::control::{cauchy_schwarz_bound, synthesize, ControlProblem};
use crate::error::{Error, Result};
use crate::linalg::{fit_line, LineFit};
use crate::scalar::Real;
use crate::specfun::{bessel_l, Precision};
use crate::spectrum::{build_spectrum_with, derive_params, PotentialParams, Spectrum};

const MODULE: &str = "analysis";

/// Cost exponent predicted for ‖f‖_{H¹} against (1−4μ).
pub const REFERENCE_EXPONENT: f64 = -0.5;
/// Deviation of the fitted exponent above which a sweep is flagged.
pub const EXPONENT_FLAG_TOL: f64 = 0.1;

/// One null-control synthesis for a given (μ, T).
#[derive(Debug, Clone)]
pub struct CostRow<T> {
    pub mu: T,
    pub horizon: T,
    pub count: usize,
    pub h1_norm: Option<T>,
    pub f_l2_norm: Option<T>,
    /// h1_norm·√(1−4μ).
    pub product: Option<T>,
    /// Cauchy–Schwarz lower bound on ‖f‖_{L²}.
    pub lower_bound: Option<T>,
    pub bound_holds: bool,
    /// Set when the row could not be computed; the row is then left out of fits.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub deviation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct CostTable<T> {
    pub rows: Vec<CostRow<T>>,
    pub fit: Option<ExponentFit>,
    /// Same fit after rescaling each norm by (½+ν)/(2ν), the ratio between
    /// the trace coupling r_k and the Wronskian coupling 2ν c_k (reported only).
    pub wronskian_fit: Option<ExponentFit>,
}

fn exponent_fit(xs: &[f64], ys: &[f64]) -> Option<ExponentFit> {
    (xs.len() >= 2).then(|| {
        let LineFit {
            intercept,
            slope,
            r_squared,
        } = fit_line(xs, ys);
        let deviation = slope - REFERENCE_EXPONENT;
        ExponentFit {
            exponent: slope,
            intercept,
            r_squared,
            deviation,
            flagged: deviation.abs() > EXPONENT_FLAG_TOL,
        }
    })
}

fn null_control_row<T: Real>(
    params: &PotentialParams<T>,
    horizon: &T,
    rho0: &[T],
    prec: &Precision,
    cache: Option<&ZeroCache>,
) -> CostRow<T> {
    let run = || -> Result<(T, T, T)> {
        let spectrum = build_spectrum_with(params, rho0.len(), prec, cache)?;
        let family = build_family(&spectrum.lambdas(), horizon, prec)?;
        let problem = ControlProblem::null(params.clone(), horizon.clone(), rho0.to_vec())?;
        let control = synthesize(&problem, &spectrum, &family)?;
        let bound = cauchy_schwarz_bound(&problem, &spectrum);
        Ok((control.h1_norm, control.f_l2_norm, bound))
    };
    let mut row = CostRow {
        mu: params.mu.clone(),
        horizon: horizon.clone(),
        count: rho0.len(),
        h1_norm: None,
        f_l2_norm: None,
        product: None,
        lower_bound: None,
        bound_holds: false,
        error: None,
    };
    match prec.scope(run) {
        Ok((h1, fl2, bound)) if h1.is_finite() && fl2.is_finite() => {
            row.bound_holds = bound <= fl2;
            row.product = Some(prec.scope(|| h1.clone() * params.root()));
            row.h1_norm = Some(h1);
            row.f_l2_norm = Some(fl2);
            row.lower_bound = Some(bound);
        }
        Ok(_) => row.error = Some("non-finite control norm".into()),
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Rows are independent; they run on scoped threads and are collected in input order.
fn run_rows<T: Real, I: Send + Sync>(
    items: &[I],
    job: impl Fn(&I) -> CostRow<T> + Sync,
) -> Vec<CostRow<T>> {
    thread::scope(|s| {
        let handles: Vec<_> = items.iter().map(|it| s.spawn(|| job(it))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep row panicked"))
            .collect()
    })
}

/// Null-control cost for each μ at fixed T and initial modal data.
///
/// Rows come back sorted by μ. Fits use ln‖f‖_{H¹} against ln(1−4μ) over
/// the rows that succeeded.
pub fn cost_sweep<T: Real>(
    mu_list: &[T],
    horizon: &T,
    rho0: &[T],
    prec: &Precision,
    cache: Option<&ZeroCache>,
) -> Result<CostTable<T>> {
    if rho0.is_empty() || mu_list.is_empty() {
        return Err(Error::Config("cost sweep needs at least one mu and one mode".into()));
    }
    let mut params = prec.scope(|| mu_list.iter().map(derive_params).collect::<Result<Vec<_>>>())?;
    params.sort_by(|a, b| a.mu.partial_cmp(&b.mu).expect("finite mu"));
    let rows = run_rows(&params, |p| null_control_row(p, horizon, rho0, prec, cache));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (r, p) in rows.iter().zip(&params) {
        if let Some(h1) = &r.h1_norm {
            let ln_h1 = h1.ln().to_f64_lossy();
            let nu = p.nu.to_f64_lossy();
            xs.push(p.root().sq().ln().to_f64_lossy());
            ys.push(ln_h1);
            ws.push(ln_h1 + ((0.5 + nu) / (2.0 * nu)).ln());
        }
    }
    let fit = exponent_fit(&xs, &ys);
    let wronskian_fit = exponent_fit(&xs, &ws);
    Ok(CostTable {
        rows,
        fit,
        wronskian_fit,
    })
}

#[derive(Debug, Clone)]
pub struct TimeSweep<T> {
    pub rows: Vec<CostRow<T>>,
    /// Slope of ln‖f‖_{H¹} against 1/T over the smallest horizons.
    pub c_fit: Option<f64>,
    pub r_squared: Option<f64>,
    /// Norms strictly increase as T decreases.
    pub increasing: bool,
}

/// Horizons entering the C/T fit.
pub const TIME_FIT_POINTS: usize = 3;

pub fn time_sweep<T: Real>(
    mu: &T,
    horizons: &[T],
    rho0: &[T],
    prec: &Precision,
    cache: Option<&ZeroCache>,
) -> Result<TimeSweep<T>> {
    if rho0.is_empty() || horizons.is_empty() {
        return Err(Error::Config("time sweep needs at least one T and one mode".into()));
    }
    if horizons.iter().any(|t| !(*t > T::zero())) || horizons.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Config("T list must be positive and strictly decreasing".into()));
    }
    let params = prec.scope(|| derive_params(mu))?;
    let rows = run_rows(horizons, |t| null_control_row(&params, t, rho0, prec, cache));
    let norms: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r.h1_norm.as_ref().map(|n| n.to_f64_lossy()))
        .collect();
    let increasing = norms.iter().all(Option::is_some)
        && norms.windows(2).all(|w| w[1].unwrap() > w[0].unwrap());
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .rev()
        .filter_map(|r| {
            let h1 = r.h1_norm.as_ref()?;
            Some((1.0 / r.horizon.to_f64_lossy(), h1.ln().to_f64_lossy()))
        })
        .take(TIME_FIT_POINTS)
        .unzip();
    let fit = (xs.len() >= 2).then(|| fit_line(&xs, &ys));
    Ok(TimeSweep {
        rows,
        c_fit: fit.as_ref().map(|f| f.slope),
        r_squared: fit.map(|f| f.r_squared),
        increasing,
    })
}

fn check_target<T: Real>(rho_t: &[T], spectrum: &Spectrum<T>) -> Result<()> {
    if rho_t.len() > spectrum.len() {
        return Err(Error::Mismatch {
            module: MODULE,
            detail: format!("target has {} modes, spectrum {}", rho_t.len(), spectrum.len()),
        });
    }
    if rho_t.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain(MODULE, "target coefficients must be finite"));
    }
    Ok(())
}

/// F̃(x) = Σ_k ρ^T_k C_k j_k^ν L_ν(j_k x), so that u_T(x) = x^{ν+½} F̃(x).
pub fn target_series_f<T: Real>(rho_t: &[T], spectrum: &Spectrum<T>, x: &T) -> Result<T> {
    check_target(rho_t, spectrum)?;
    if !(*x >= T::zero() && *x < T::one()) {
        return Err(Error::domain(MODULE, "F is evaluated on [0, 1)"));
    }
    let prec = spectrum.precision;
    let nu = &spectrum.params.nu;
    prec.scope(|| {
        let x = x.rebase();
        let mut acc = T::zero();
        for (rho, m) in rho_t.iter().zip(&spectrum.modes) {
            if rho.is_zero() {
                continue;
            }
            let l = bessel_l(nu, &(m.j.clone() * x.clone()), &prec)?;
            acc += rho.clone() * m.c_norm.clone() * m.j.powf(nu) * l;
        }
        Ok(acc)
    })
}

/// Σ_k ρ^T_k Φ_k(x), the modal target itself.
pub fn target_modal<T: Real>(rho_t: &[T], spectrum: &Spectrum<T>, x: &T) -> Result<T> {
    check_target(rho_t, spectrum)?;
    let mut acc = T::zero();
    for (k, rho) in rho_t.iter().enumerate() {
        if !rho.is_zero() {
            acc += rho.clone() * spectrum.eigenfunction(k + 1, x)?;
        }
    }
    Ok(acc)
}

/// max |Σρ_kΦ_k − x^{ν+½}F̃| over `xs`.
pub fn target_structure_defect<T: Real>(rho_t: &[T], spectrum: &Spectrum<T>, xs: &[T]) -> Result<T> {
    let mut worst = T::zero();
    for x in xs {
        let modal = target_modal(rho_t, spectrum, x)?;
        let f = target_series_f(rho_t, spectrum, x)?;
        let d = spectrum.precision.scope(|| {
            let e = spectrum.params.nu.clone() + T::lit(0.5);
            (modal - x.powf(&e) * f).abs()
        });
        worst = worst.max_of(d);
    }
    Ok(worst)
}

/// Taylor coefficients a_m of F̃(x) = Σ_m a_m x^{2m}, m < terms.
pub fn taylor_coefficients<T: Real>(rho_t: &[T], spectrum: &Spectrum<T>, terms: usize) -> Result<Vec<T>> {
    check_target(rho_t, spectrum)?;
    let nu = spectrum.params.nu.clone();
    spectrum.precision.scope(|| {
        let lead = T::one() / (T::lit(2.0).powf(&nu) * (nu.clone() + T::one()).gamma());
        // per-mode weights ρ C j^ν L-coefficient, advanced by −j²/(4(m+1)(m+ν+1))
        let mut w: Vec<(T, T)> = rho_t
            .iter()
            .zip(&spectrum.modes)
            .map(|(r, m)| (r.clone() * m.c_norm.clone() * m.j.powf(&nu) * lead.clone(), m.lambda.clone()))
            .collect();
        let mut out = Vec::with_capacity(terms);
        for m in 0..terms {
            out.push(w.iter().fold(T::zero(), |acc, (c, _)| acc + c.clone()));
            let denom = T::lit(4.0) * T::from_count(m + 1) * (T::from_count(m + 1) + nu.clone());
            for (c, l) in &mut w {
                *c = -(c.clone() * l.clone()) / denom.clone();
            }
        }
        Ok(out)
    })
}

/// Ratio test on the Taylor coefficients of F̃ in the variable x².
#[derive(Debug, Clone)]
pub struct DiscRatioCheck {
    pub ratios: Vec<f64>,
    pub bound: f64,
    pub holds: bool,
}

/// |a_{m+1}/a_m| over the upper half of `terms`, against (π/P)².
pub fn disc_ratio_check<T: Real>(rho_t: &[T], spectrum: &Spectrum<T>, p: f64, terms: usize) -> Result<DiscRatioCheck> {
    if !(p > 0.0) || terms < 4 {
        return Err(Error::domain(MODULE, "ratio check needs P > 0 and at least 4 terms"));
    }
    let coeffs = taylor_coefficients(rho_t, spectrum, terms)?;
    let ratios: Vec<f64> = coeffs
        .windows(2)
        .skip(terms / 2)
        .filter(|w| !w[0].is_zero())
        .map(|w| (w[1].clone() / w[0].clone()).abs().to_f64_lossy())
        .collect();
    let bound = (std::f64::consts::PI / p).powi(2);
    let holds = !ratios.is_empty() && ratios.iter().all(|r| *r <= bound);
    Ok(DiscRatioCheck { ratios, bound, holds })
}

/// Default probe points for the small-x exponent.
pub const EXPONENT_PROBES: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Least-squares slope of ln|u| against ln x over the probes.
pub fn leading_exponent<T: Real>(u: &dyn Fn(&T) -> Result<T>, probes: &[f64]) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &x in probes {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::domain(MODULE, "probe points must lie in (0, 1)"));
        }
        let v = u(&T::lit(x))?;
        if !v.is_zero() {
            xs.push(x.ln());
            ys.push(v.abs().ln().to_f64_lossy());
        }
    }
    if xs.len() < 2 {
        return Err(Error::domain(MODULE, "target vanishes at the probe points; exponent fit is degenerate"));
    }
    Ok(fit_line(&xs, &ys).slope)
}

/// Variables of x ↦ ξ = xi0·x^{2/(2−β)}, φ = x^{−a}u.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateMap<T> {
    pub mu: T,
    pub beta: T,
    pub a: T,
    /// Present only for μ > −3/4, where 2 − β > 0.
    pub xi0: Option<T>,
}

pub fn degenerate_map<T: Real>(mu: &T) -> Result<DegenerateMap<T>> {
    let mu = mu.rebase();
    if !mu.is_finite() {
        return Err(Error::domain(MODULE, "mu must be finite"));
    }
    if mu >= T::lit(0.25) {
        return Err(Error::CriticalParameter { mu: mu.to_decimal() });
    }
    let denom = T::lit(3.0) + T::lit(4.0) * mu.clone();
    if denom.is_zero() {
        return Err(Error::domain(MODULE, "mu = -3/4 is a pole of beta(mu) and is excluded"));
    }
    let s = (T::one() - T::lit(4.0) * mu.clone()).sqrt();
    let two = T::lit(2.0);
    let beta = (two.clone() + T::lit(8.0) * mu.clone() - two.clone() * s) / denom;
    let gap = two.clone() - beta.clone();
    let a = beta.clone() / (two.clone() * gap.clone());
    let xi0 = (gap > T::zero()).then(|| (gap.clone() / two.clone()).powf(&(two / gap)));
    Ok(DegenerateMap { mu, beta, a, xi0 })
}

impl<T: Real> DegenerateMap<T> {
    /// μ + a(a−1), zero when the map is consistent.
    pub fn identity_defect(&self) -> T {
        (self.mu.clone() + self.a.clone() * (self.a.clone() - T::one())).abs()
    }

    fn scale(&self) -> Result<T> {
        self.xi0
            .clone()
            .ok_or_else(|| Error::domain(MODULE, "the change of variables needs mu > -3/4"))
    }

    pub fn xi_of_x(&self, x: &T) -> Result<T> {
        let xi0 = self.scale()?;
        Ok(xi0 * x.powf(&(T::lit(2.0) / (T::lit(2.0) - self.beta.clone()))))
    }

    pub fn x_of_xi(&self, xi: &T) -> Result<T> {
        let xi0 = self.scale()?;
        Ok((xi.clone() / xi0).powf(&((T::lit(2.0) - self.beta.clone()) / T::lit(2.0))))
    }

    /// φ = x^{−a} u.
    pub fn phi(&self, x: &T, u: &T) -> T {
        u.clone() * x.powf(&(-self.a.clone()))
    }
}

/// Field on the (ξ, t) grid; rows follow `ts`.
#[derive(Debug, Clone)]
pub struct TransformedField<T> {
    pub xi: Vec<T>,
    pub ts: Vec<T>,
    pub phi: Vec<Vec<T>>,
}

/// Pointwise transform of reconstructed samples u(x_i, t_j).
pub fn transform_solution<T: Real>(
    samples: &crate::simulate::FieldSamples<T>,
    map: &DegenerateMap<T>,
) -> Result<TransformedField<T>> {
    if samples.xs.iter().any(|x| !(*x > T::zero())) {
        return Err(Error::domain(MODULE, "transform needs x > 0"));
    }
    let xi = samples.xs.iter().map(|x| map.xi_of_x(x)).collect::<Result<Vec<_>>>()?;
    let phi = samples
        .u
        .iter()
        .map(|row| samples.xs.iter().zip(row).map(|(x, u)| map.phi(x, u)).collect())
        .collect();
    Ok(TransformedField {
        xi,
        ts: samples.ts.clone(),
        phi,
    })
}

/// Points with ξ below this fraction of xi0 are excluded from residuals.
pub const INTERIOR_FRACTION: f64 = 0.05;

/// Residual of φ_t − (ξ^β φ_ξ)_ξ for φ = x^{−a} e^{−λ_k t}Φ_k on a uniform ξ-grid.
#[derive(Debug, Clone)]
pub struct DegenerateResidual<T> {
    pub intervals: usize,
    /// Grid index of the first residual entry.
    pub first: usize,
    pub xi: Vec<T>,
    pub residual: Vec<T>,
    pub max_residual: T,
}

pub fn single_mode_residual<T: Real>(
    spectrum: &Spectrum<T>,
    map: &DegenerateMap<T>,
    k: usize,
    t: &T,
    intervals: usize,
) -> Result<DegenerateResidual<T>> {
    if intervals < 8 {
        return Err(Error::domain(MODULE, "residual grid needs at least 8 intervals"));
    }
    let mode = spectrum.mode(k)?.clone();
    let xi0 = map.scale()?;
    spectrum.precision.scope(|| {
        let xi0 = xi0.rebase();
        let h = xi0.clone() / T::from_count(intervals);
        let decay = (-(mode.lambda.clone() * t.rebase())).exp();
        let node = |i: usize| h.clone() * T::from_count(i);
        let phi_at = |i: usize| -> Result<T> {
            if i == 0 {
                return Err(Error::domain(MODULE, "stencil reached xi = 0"));
            }
            let x = if i == intervals { T::one() } else { map.x_of_xi(&node(i))? };
            Ok(map.phi(&x, &(decay.clone() * spectrum.eigenfunction(k, &x)?)))
        };
        let cutoff = xi0.clone() * T::lit(INTERIOR_FRACTION);
        let first = (2..intervals - 1).find(|&i| node(i) >= cutoff).unwrap_or(intervals - 2);
        let mut vals = Vec::with_capacity(intervals + 1);
        for i in 0..=intervals {
            vals.push(if i + 2 < first { T::zero() } else { phi_at(i)? });
        }
        let (c1, c2) = (T::lit(12.0) * h.clone(), T::lit(12.0) * h.sq());
        let mut xi = Vec::new();
        let mut residual = Vec::new();
        let mut worst = T::zero();
        for i in first..=intervals - 2 {
            let (m2, m1, p0, p1, p2) = (&vals[i - 2], &vals[i - 1], &vals[i], &vals[i + 1], &vals[i + 2]);
            let d1 = (m2.clone() - T::lit(8.0) * m1.clone() + T::lit(8.0) * p1.clone() - p2.clone()) / c1.clone();
            let d2 = (-m2.clone() + T::lit(16.0) * m1.clone() - T::lit(30.0) * p0.clone() + T::lit(16.0) * p1.clone()
                - p2.clone())
                / c2.clone();
            let z = node(i);
            let zb = z.powf(&map.beta);
            let flux = zb.clone() * d2 + map.beta.clone() * zb / z.clone() * d1;
            let phi_t = -(mode.lambda.clone() * p0.clone());
            let r = (phi_t - flux).abs();
            worst = worst.max_of(r.clone());
            xi.push(z);
            residual.push(r);
        }
        Ok(DegenerateResidual {
            intervals,
            first,
            xi,
            residual,
            max_residual: worst,
        })
    })
}

/// Residual at `intervals` and `2·intervals`, compared on the coarse nodes.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub coarse: f64,
    pub fine: f64,
    pub observed_order: f64,
    /// The error did not drop by at least 8 under halving, so the coarse grid
    /// is outside the asymptotic h⁴ regime.
    pub grid_too_coarse: bool,
}

pub fn residual_convergence<T: Real>(
    spectrum: &Spectrum<T>,
    map: &DegenerateMap<T>,
    k: usize,
    t: &T,
    intervals: usize,
) -> Result<ConvergenceReport> {
    let coarse = single_mode_residual(spectrum, map, k, t, intervals)?;
    let fine = single_mode_residual(spectrum, map, k, t, 2 * intervals)?;
    let fine_max = (coarse.first..coarse.first + coarse.xi.len())
        .filter_map(|i| fine.residual.get((2 * i).checked_sub(fine.first)?))
        .fold(T::zero(), |m, r| m.max_of(r.clone()))
        .to_f64_lossy();
    let coarse_max = coarse.max_residual.to_f64_lossy();
    let ratio = coarse_max / fine_max;
    Ok(ConvergenceReport {
        coarse: coarse_max,
        fine: fine_max,
        observed_order: ratio.log2(),
        grid_too_coarse: !(ratio >= 8.0),
    })
}
