//! At μ = 0 the problem is the classical sine system: λ_k = k²π², r_k = √2kπ.
//! This file solves that moment problem from scratch on raw MPFR floats and
//! compares coefficients, residuals and norms with the library pipeline.

use rug::ops::Pow;
use rug::Float;

use singheat::biortho::build_family;
use singheat::control::{synthesize, ControlProblem};
use singheat::spectrum::{build_spectrum, derive_params};
use singheat::{Mpf, Precision, Real};

const BITS: u32 = 256;

fn fl(x: f64) -> Float {
    Float::with_val(BITS, x)
}

fn pi() -> Float {
    Float::with_val(BITS, rug::float::Constant::Pi)
}

/// Basis φ_0 = 1, φ_ℓ = e^{−λ_ℓ(T−t)}; ∫₀ᵀ φ_iφ_j = (1 − e^{−(s_i+s_j)T})/(s_i+s_j).
fn gram_entry(s: &Float, t: &Float) -> Float {
    if s.is_zero() {
        return t.clone();
    }
    let e: Float = (-(s.clone() * t)).exp();
    (fl(1.0) - e) / s
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<Float>>, mut b: Vec<Float>) -> Vec<Float> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].clone().abs().partial_cmp(&a[j][c].clone().abs()).unwrap())
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let m = a[r][c].clone() / &a[c][c];
            for k in c..n {
                let v = m.clone() * &a[c][k];
                a[r][k] -= v;
            }
            let v = m * &b[c];
            b[r] -= v;
        }
    }
    let mut x = vec![fl(0.0); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for k in r + 1..n {
            acc -= a[r][k].clone() * &x[k];
        }
        x[r] = acc / &a[r][r];
    }
    x
}

struct Oracle {
    rates: Vec<Float>,
    coeffs: Vec<Float>,
    horizon: Float,
}

impl Oracle {
    fn new(horizon: f64, rho0: &[f64], rho_t: &[f64]) -> Self {
        let t = fl(horizon);
        let k = rho0.len();
        let mut rates = vec![fl(0.0)];
        rates.extend((1..=k).map(|j| (pi() * fl(j as f64)).pow(2u32)));
        let a: Vec<Vec<Float>> = rates
            .iter()
            .map(|s| rates.iter().map(|q| gram_entry(&(s.clone() + q), &t)).collect())
            .collect();
        let mut b = vec![fl(0.0)];
        for j in 0..k {
            let lam = &rates[j + 1];
            let r = fl(2.0).sqrt() * pi() * fl((j + 1) as f64);
            let decay: Float = (-(lam.clone() * &t)).exp();
            b.push(lam.clone() / r * (fl(rho0[j]) * decay - fl(rho_t[j])));
        }
        Oracle {
            coeffs: solve(a, b),
            rates,
            horizon: t,
        }
    }

    fn g(&self, t: &Float) -> Float {
        let back = self.horizon.clone() - t;
        self.rates
            .iter()
            .zip(&self.coeffs)
            .fold(fl(0.0), |acc, (s, c)| acc + c.clone() * (-(s.clone() * &back)).exp())
    }

    fn f(&self, t: &Float) -> Float {
        let back = self.horizon.clone() - t;
        self.rates.iter().zip(&self.coeffs).fold(fl(0.0), |acc, (s, c)| {
            if s.is_zero() {
                acc + c.clone() * t
            } else {
                let d: Float = (-(s.clone() * &back)).exp() - (-(s.clone() * &self.horizon)).exp();
                acc + c.clone() * d / s
            }
        })
    }

    /// Composite 5-point Gauss–Legendre on `panels` equal pieces.
    fn integrate(&self, panels: usize, h: impl Fn(&Float) -> Float) -> Float {
        const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
            0.236_926_885_056_189_08,
        ];
        let width = self.horizon.clone() / fl(panels as f64);
        let mut acc = fl(0.0);
        for p in 0..panels {
            let mid = width.clone() * fl(p as f64 + 0.5);
            for (x, w) in X.iter().zip(W) {
                let t = mid.clone() + width.clone() * fl(*x) / fl(2.0);
                acc += h(&t) * fl(w);
            }
        }
        acc * width / fl(2.0)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn compare(horizon: f64, rho0: &[f64], rho_t: &[f64]) {
    let k = rho0.len();
    let oracle = Oracle::new(horizon, rho0, rho_t);

    let prec = Precision::new(BITS).unwrap();
    let lib = prec.scope(|| {
        let mp = |v: &[f64]| v.iter().map(|x| Mpf::lit(*x)).collect::<Vec<_>>();
        let params = derive_params(&Mpf::lit(0.0)).unwrap();
        let spectrum = build_spectrum(&params, k, &prec).unwrap();
        let fam = build_family(&spectrum.lambdas(), &Mpf::lit(horizon), &prec).unwrap();
        let problem = ControlProblem::new(params, Mpf::lit(horizon), mp(rho0), mp(rho_t)).unwrap();
        synthesize(&problem, &spectrum, &fam).unwrap()
    });

    for (a, b) in lib.g.coeffs.iter().zip(&oracle.coeffs) {
        let (a, b) = (a.to_f64_lossy(), b.to_f64());
        assert!(rel(a, b) <= 1e-9, "coefficient {a} vs {b}");
    }

    let panels = 4000;
    let g2 = oracle.integrate(panels, |t| oracle.g(t).square()).to_f64();
    let f2 = oracle.integrate(panels, |t| oracle.f(t).square()).to_f64();
    let (g_norm, f_norm, h1) = (g2.sqrt(), f2.sqrt(), (f2 + g2).sqrt());
    assert!(rel(lib.g_l2_norm.to_f64_lossy(), g_norm) <= 1e-9, "g norm");
    assert!(rel(lib.f_l2_norm.to_f64_lossy(), f_norm) <= 1e-9, "f norm");
    assert!(rel(lib.h1_norm.to_f64_lossy(), h1) <= 1e-9, "H1 norm");

    // moment conditions evaluated by quadrature against the oracle's control
    for j in 0..k {
        let lam = (pi() * fl((j + 1) as f64)).pow(2u32);
        let r = fl(2.0).sqrt() * pi() * fl((j + 1) as f64);
        let back = |t: &Float| -> Float { (-(lam.clone() * (oracle.horizon.clone() - t))).exp() };
        let mhat = oracle.integrate(panels, |t| oracle.f(t) * back(t));
        let decay: Float = (-(lam.clone() * &oracle.horizon)).exp();
        let resid = (r * mhat + fl(rho0[j]) * decay - fl(rho_t[j])).abs().to_f64();
        assert!(resid <= 1e-9, "oracle moment {j}: {resid:e}");
        assert!(lib.moment_residuals[j].to_f64_lossy() <= 1e-9);
    }
    assert!(oracle.f(&oracle.horizon).abs().to_f64() <= 1e-40);
}

#[test]
fn sine_basis_null_control() {
    compare(1.0, &[1.0, 0.0, 0.5, 0.0, 0.0, 0.0], &[0.0; 6]);
}

#[test]
fn sine_basis_short_horizon() {
    compare(0.3, &[0.0, 1.0, 0.0, -0.25], &[0.0; 4]);
}

#[test]
fn sine_basis_nonzero_target() {
    compare(0.5, &[1.0, 0.0, 0.5, 0.0, 0.0], &[0.1, 0.0, 0.0, 0.0, 0.0]);
}
