//! Gauss–Legendre quadrature on finite intervals.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::scalar::{working_bits, Real};

/// Node count used for inner products on (0, 1).
pub const DEFAULT_NODES: usize = 400;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

type RuleCache = Mutex<HashMap<(TypeId, usize, u32), Arc<dyn Any + Send + Sync>>>;

fn rule_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// n-point rule at the current working precision, memoized per type and width.
pub fn rule<T: Real>(n: usize) -> Arc<GaussLegendre<T>> {
    let bits = T::effective_bits(working_bits());
    let key = (TypeId::of::<T>(), n, bits);
    if let Some(hit) = rule_cache().lock().unwrap().get(&key) {
        return hit.clone().downcast::<GaussLegendre<T>>().expect("typed entry");
    }
    let fresh = Arc::new(compute_rule::<T>(n));
    rule_cache()
        .lock()
        .unwrap()
        .insert(key, fresh.clone() as Arc<dyn Any + Send + Sync>);
    fresh
}

/// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: &T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x.clone();
    for k in 2..=n {
        let kk = T::from_count(k);
        let p2 = ((T::lit(2.0) * kk.clone() - T::one()) * x.clone() * p1.clone()
            - (kk.clone() - T::one()) * p0)
            / kk;
        p0 = p1;
        p1 = p2;
    }
    let nn = T::from_count(n);
    let dp = nn * (x.clone() * p1.clone() - p0) / (x.sq() - T::one());
    (p1, dp)
}

fn compute_rule<T: Real>(n: usize) -> GaussLegendre<T> {
    assert!(n >= 1);
    let bits = T::effective_bits(working_bits());
    let tol = T::lit(2.0).powi(-(bits as i32) + 4);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n.div_ceil(2) {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = T::lit(guess);
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(n, &x);
            let dx = p / d.clone();
            x -= dx.clone();
            dp = d;
            if dx.abs() <= tol {
                let (_, d) = legendre(n, &x);
                dp = d;
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - x.sq()) * dp.sq());
        nodes[i] = -x.clone();
        nodes[n - 1 - i] = x;
        weights[i] = w.clone();
        weights[n - 1 - i] = w;
    }
    GaussLegendre { nodes, weights }
}

impl<T: Real> GaussLegendre<T> {
    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: &T, b: &T) -> Vec<(T, T)> {
        let half = (b.clone() - a.clone()) / T::lit(2.0);
        let mid = (b.clone() + a.clone()) / T::lit(2.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (mid.clone() + half.clone() * x.clone(), half.clone() * w.clone()))
            .collect()
    }

    pub fn integrate<E>(&self, a: &T, b: &T, mut f: impl FnMut(&T) -> Result<T, E>) -> Result<T, E> {
        let mut acc = T::zero();
        for (x, w) in self.mapped(a, b) {
            acc += w * f(&x)?;
        }
        Ok(acc)
    }
}

/// Integral over [a, b] with the shared n-point rule.
pub fn integrate<T: Real, E>(n: usize, a: &T, b: &T, f: impl FnMut(&T) -> Result<T, E>) -> Result<T, E> {
    rule::<T>(n).integrate(a, b, f)
}

/// Adaptive Gauss–Legendre: bisect until the 20-point and 40-point values
/// agree to `rel_tol`, relative to the piece itself or to the piece's share
/// of the whole-interval estimate. Tolerances below 16 ulps are raised to it.
pub fn adaptive<T: Real>(a: &T, b: &T, rel_tol: f64, f: &dyn Fn(&T) -> T) -> T {
    let coarse = rule::<T>(20);
    let fine = rule::<T>(40);
    let floor = T::lit(2.0).powi(4 - T::effective_bits(working_bits()) as i32);
    let tol = T::lit(rel_tol).max_of(floor);
    let ok = |x: &T| -> Result<T, ()> { Ok(f(x)) };
    let whole = fine.integrate(a, b, ok).unwrap().abs();
    let width = b.clone() - a.clone();
    let mut stack = vec![(a.clone(), b.clone(), 0u32)];
    let mut total = T::zero();
    while let Some((lo, hi, depth)) = stack.pop() {
        let c = coarse.integrate(&lo, &hi, ok).unwrap();
        let fi = fine.integrate(&lo, &hi, ok).unwrap();
        let err = (fi.clone() - c).abs();
        let share = whole.clone() * (hi.clone() - lo.clone()) / width.clone();
        if depth >= 40 || err <= tol.clone() * fi.abs().max_of(share) {
            total += fi;
        } else {
            let mid = (lo.clone() + hi.clone()) / T::lit(2.0);
            stack.push((mid.clone(), hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{with_precision, Mpf};
    use num_traits::Zero;

    #[test]
    fn polynomials_integrate_exactly() {
        let r = rule::<f64>(10);
        let v = r
            .integrate(&0.0, &1.0, |x| Ok::<_, ()>(x.powi(19)))
            .unwrap();
        assert!((v - 0.05).abs() < 1e-15);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn extended_rule_is_accurate() {
        with_precision(256, || {
            let v = integrate(400, &Mpf::zero(), &Mpf::pi(), |x| Ok::<_, ()>(x.sin())).unwrap();
            assert!((v - Mpf::lit(2.0)).abs().log2_abs() < -200.0);
        });
    }

    #[test]
    fn adaptive_handles_peaks() {
        let v = adaptive(&0.0, &1.0, 1e-13, &|x: &f64| 1.0 / (1e-4 + (x - 0.3).powi(2)));
        let exact = (0.7f64 / 1e-2).atan() / 1e-2 + (0.3f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() / exact < 1e-12);
    }
}
