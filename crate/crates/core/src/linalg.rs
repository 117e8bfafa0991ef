//! Dense symmetric linear algebra in any [`Real`] precision.

use crate::scalar::Real;

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).fold(T::zero(), |acc, i| acc + self.get(i, j).abs()))
            .fold(T::zero(), |m, v| m.max_of(v))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Lower-triangular factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes `a`; on a non-positive pivot returns its index.
    pub fn new(a: &Matrix<T>) -> Result<Self, usize> {
        let n = a.dim();
        let mut l = Matrix::<T>::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j).clone();
            for k in 0..j {
                d -= l.get(j, k).sq();
            }
            if d <= T::zero() || !d.is_finite() {
                return Err(j);
            }
            let djj = d.sqrt();
            for i in j + 1..n {
                let mut s = a.get(i, j).clone();
                for k in 0..j {
                    s -= l.get(i, k).clone() * l.get(j, k).clone();
                }
                l.set(i, j, s / djj.clone());
            }
            l.set(j, j, djj);
        }
        Ok(Cholesky { l })
    }

    /// Squared diagonal of the factor, i.e. the pivots of LDLᵀ.
    pub fn pivots(&self) -> Vec<T> {
        (0..self.l.dim()).map(|i| self.l.get(i, i).sq()).collect()
    }

    // triangular sweeps read best with explicit indices
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i].clone();
            for k in 0..i {
                s -= self.l.get(i, k).clone() * y[k].clone();
            }
            y[i] = s / self.l.get(i, i).clone();
        }
        for i in (0..n).rev() {
            let mut s = y[i].clone();
            for k in i + 1..n {
                s -= self.l.get(k, i).clone() * y[k].clone();
            }
            y[i] = s / self.l.get(i, i).clone();
        }
        y
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &Matrix<T>, b: &[T]) -> Vec<T> {
        let x = self.solve(b);
        let ax = a.mul_vec(&x);
        let r: Vec<T> = b.iter().zip(ax).map(|(bi, ai)| bi.clone() - ai).collect();
        let dx = self.solve(&r);
        x.into_iter().zip(dx).map(|(xi, di)| xi + di).collect()
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.l.dim();
        let mut inv = Matrix::zeros(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        inv
    }
}

/// Condition number κ₁ = ‖A‖₁‖A⁻¹‖₁.
pub fn cond1<T: Real>(a: &Matrix<T>, inv: &Matrix<T>) -> T {
    a.norm1() * inv.norm1()
}

/// Ordinary least-squares line y = a + b·x with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    LineFit {
        intercept,
        slope,
        r_squared,
    }
}
