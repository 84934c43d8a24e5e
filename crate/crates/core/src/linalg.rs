//! Small dense linear algebra generic over real/complex, standard/extended
//! scalars: LU with partial pivoting, symmetric Jacobi eigensolver,
//! tridiagonal eigenpair refinement and Hessenberg reduction.

use std::fmt::Debug;
use std::ops::{Index, IndexMut, Neg};

use num_complex::Complex;
use num_traits::{NumAssign, Zero};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::real::Real;

/// Field element usable by the dense kernels.
pub trait Scalar: Copy + Debug + NumAssign + Neg<Output = Self> + Send + Sync + 'static {
    type R: Real;
    /// Cheap magnitude used for pivoting (|re| + |im| for complex).
    fn mag(self) -> Self::R;
    fn from_re(r: Self::R) -> Self;
    fn conj(self) -> Self;
    fn abs_f64(self) -> f64;
}

impl Scalar for f64 {
    type R = f64;
    fn mag(self) -> f64 {
        self.abs()
    }
    fn from_re(r: f64) -> f64 {
        r
    }
    fn conj(self) -> f64 {
        self
    }
    fn abs_f64(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Dd {
    type R = Dd;
    fn mag(self) -> Dd {
        self.abs()
    }
    fn from_re(r: Dd) -> Dd {
        r
    }
    fn conj(self) -> Dd {
        self
    }
    fn abs_f64(self) -> f64 {
        self.to_f64().abs()
    }
}

impl<T: Real + NumAssign> Scalar for Complex<T> {
    type R = T;
    fn mag(self) -> T {
        self.re.abs() + self.im.abs()
    }
    fn from_re(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }
    fn abs_f64(self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn matmul(&self, b: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, b.rows);
        let mut out = Mat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..b.cols {
                    let t = a * b[(k, j)];
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| {
                let mut s = S::zero();
                for (a, b) in self.row(i).iter().zip(x) {
                    s += *a * *b;
                }
                s
            })
            .collect()
    }

    /// Largest entry magnitude as f64.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs_f64()).fold(0.0, f64::max)
    }

    /// Infinity norm (max absolute row sum) as f64.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs_f64()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, PA = LU.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    lu: Mat<S>,
    perm: Vec<usize>,
}

impl<S: Scalar> Lu<S> {
    pub fn new(a: &Mat<S>) -> Result<Self> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].mag();
            for i in k + 1..n {
                let m = lu[(i, k)].mag();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best.to_f64() == 0.0 || !best.to_f64().is_finite() {
                return Err(Error::Singular(format!("zero pivot in column {k} of {n}")));
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let t = f * lu[(k, j)];
                    lu[(i, j)] -= t;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.dim();
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves xᵀA = bᵀ, i.e. Aᵀx = b.
    pub fn solve_transpose(&self, b: &[S]) -> Vec<S> {
        let n = self.dim();
        // Aᵀ = Uᵀ Lᵀ P
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![S::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> Mat<S> {
        let n = self.dim();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![S::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = S::zero());
            e[j] = S::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

pub fn solve<S: Scalar>(a: &Mat<S>, b: &[S]) -> Result<Vec<S>> {
    Ok(Lu::new(a)?.solve(b))
}

pub fn inverse<S: Scalar>(a: &Mat<S>) -> Result<Mat<S>> {
    Ok(Lu::new(a)?.inverse())
}

/// Infinity-norm condition number from an explicit inverse.
pub fn cond_inf<S: Scalar>(a: &Mat<S>) -> Result<f64> {
    let inv = inverse(a)?;
    Ok(a.norm_inf() * inv.norm_inf())
}

/// Cyclic Jacobi for real symmetric matrices. Returns eigenvalues in
/// descending order and the matching eigenvectors as columns.
pub fn sym_eigen_jacobi<T: Real>(a: &Mat<T>) -> Result<(Vec<T>, Mat<T>)>
where
    T: Scalar<R = T>,
{
    let n = a.rows;
    let mut a = a.clone();
    let mut v = Mat::<T>::identity(n);
    let tol = T::eps() * 0.25;
    let mut converged = false;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        let mut diag = 0.0f64;
        for i in 0..n {
            diag = diag.max(a[(i, i)].to_f64().abs());
            for j in i + 1..n {
                off = off.max(a[(i, j)].to_f64().abs());
            }
        }
        if off <= tol * diag.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.to_f64() == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let sign = if theta.to_f64() >= 0.0 { T::one() } else { -T::one() };
                // θ² would overflow; t → 1/(2θ)
                let t = if theta.to_f64().abs() > 1e150 {
                    T::one() / (theta + theta)
                } else {
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence("Jacobi eigensolver".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let vecs = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

/// Solves (T − σI)x = b for symmetric tridiagonal T (diag `d`, off-diagonal
/// `e`) using Gaussian elimination with partial pivoting.
fn tridiag_shift_solve(d: &[Dd], e: &[Dd], sigma: Dd, b: &[Dd]) -> Vec<Dd> {
    let n = d.len();
    // stand-in for an exactly zero pivot (shift equal to an eigenvalue)
    let scale = d.iter().chain(e).map(|v| v.hi.abs()).fold(f64::MIN_POSITIVE, f64::max);
    let tiny = Dd::from_f64(scale * 1e-40);
    if n == 1 {
        let p = d[0] - sigma;
        let p = if p.hi == 0.0 { tiny } else { p };
        return vec![b[0] / p];
    }
    // Each row of U has up to three nonzeros: u0 (diag), u1, u2.
    let mut u0 = vec![Dd::ZERO; n];
    let mut u1 = vec![Dd::ZERO; n];
    let mut u2 = vec![Dd::ZERO; n];
    let mut rhs = b.to_vec();
    // current row being eliminated: (a_diag, a_sup)
    let mut cur_d = d[0] - sigma;
    let mut cur_s = e[0];
    let mut cur_s2 = Dd::ZERO;
    for k in 0..n - 1 {
        let sub = e[k];
        let nd = d[k + 1] - sigma;
        let ns = if k + 1 < n - 1 { e[k + 1] } else { Dd::ZERO };
        if sub.abs() > cur_d.abs() {
            // swap row k (current) with row k+1
            u0[k] = sub;
            u1[k] = nd;
            u2[k] = ns;
            let f = cur_d / sub;
            let r_k = rhs[k];
            rhs[k] = rhs[k + 1];
            rhs[k + 1] = r_k - f * rhs[k];
            cur_d = cur_s - f * nd;
            cur_s = cur_s2 - f * ns;
            cur_s2 = Dd::ZERO;
        } else {
            u0[k] = cur_d;
            u1[k] = cur_s;
            u2[k] = cur_s2;
            let piv = if cur_d.hi == 0.0 { tiny } else { cur_d };
            let f = sub / piv;
            rhs[k + 1] = rhs[k + 1] - f * rhs[k];
            cur_d = nd - f * cur_s;
            cur_s = ns - f * cur_s2;
            cur_s2 = Dd::ZERO;
        }
        // the row that moves down only ever has a second superdiagonal of zero
    }
    u0[n - 1] = if cur_d.hi == 0.0 { tiny } else { cur_d };
    let mut x = vec![Dd::ZERO; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

fn normalize_dd(x: &mut [Dd]) {
    let nrm = x.iter().map(|v| v.sqr()).sum::<Dd>().sqrt();
    for v in x.iter_mut() {
        *v /= nrm;
    }
}

/// All eigenpairs of a symmetric tridiagonal matrix, ascending.
/// Start values come from a standard-precision solve; with `refine` each
/// pair is polished in double-double by shifted inverse iteration with
/// Rayleigh-quotient updates.
pub fn sym_tridiag_eigen_dd(d: &[Dd], e: &[Dd], refine: bool) -> Result<(Vec<Dd>, Vec<Vec<Dd>>)> {
    let n = d.len();
    assert_eq!(e.len() + 1, n.max(1));
    let a = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            d[i].to_f64()
        } else if j == i + 1 {
            e[i].to_f64()
        } else if i == j + 1 {
            e[j].to_f64()
        } else {
            0.0
        }
    });
    let eig = nalgebra::SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NoConvergence("tridiagonal eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Vec::with_capacity(n);
    for &idx in &order {
        let mut x: Vec<Dd> = (0..n).map(|i| Dd::from_f64(eig.eigenvectors[(i, idx)])).collect();
        let mut sigma = Dd::from_f64(eig.eigenvalues[idx]);
        for _ in 0..if refine { 3 } else { 0 } {
            let mut y = tridiag_shift_solve(d, e, sigma, &x);
            if y.iter().any(|v| !v.is_finite()) {
                break;
            }
            normalize_dd(&mut y);
            x = y;
            sigma = rayleigh(d, e, &x);
        }
        vals.push(sigma);
        vecs.push(x);
    }
    Ok((vals, vecs))
}

fn rayleigh(d: &[Dd], e: &[Dd], x: &[Dd]) -> Dd {
    let n = d.len();
    let mut s = Dd::ZERO;
    for i in 0..n {
        let mut tx = d[i] * x[i];
        if i > 0 {
            tx += e[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            tx += e[i] * x[i + 1];
        }
        s += x[i] * tx;
    }
    s
}

/// Householder reduction A = Q H Qᵀ to upper Hessenberg form (real).
/// Returns (H, Q).
pub fn hessenberg<T>(a: &Mat<T>) -> (Mat<T>, Mat<T>)
where
    T: Real + Scalar<R = T>,
{
    let n = a.rows;
    let mut h = a.clone();
    let mut q = Mat::<T>::identity(n);
    for k in 0..n.saturating_sub(2) {
        let mut alpha2 = T::zero();
        for i in k + 1..n {
            alpha2 += h[(i, k)] * h[(i, k)];
        }
        if alpha2.to_f64() == 0.0 {
            continue;
        }
        let alpha = alpha2.sqrt();
        let x0 = h[(k + 1, k)];
        let alpha = if x0.to_f64() > 0.0 { -alpha } else { alpha };
        let mut v: Vec<T> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] -= alpha;
        let mut vn2 = T::zero();
        for x in &v {
            vn2 += *x * *x;
        }
        if vn2.to_f64() == 0.0 {
            continue;
        }
        let two_over = T::from_f64(2.0) / vn2;
        // H <- P H
        for j in 0..n {
            let mut s = T::zero();
            for (ii, i) in (k + 1..n).enumerate() {
                s += v[ii] * h[(i, j)];
            }
            let s = s * two_over;
            for (ii, i) in (k + 1..n).enumerate() {
                let t = s * v[ii];
                h[(i, j)] -= t;
            }
        }
        // H <- H P, Q <- Q P
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let mut s = T::zero();
                for (jj, j) in (k + 1..n).enumerate() {
                    s += m[(i, j)] * v[jj];
                }
                let s = s * two_over;
                for (jj, j) in (k + 1..n).enumerate() {
                    let t = s * v[jj];
                    m[(i, j)] -= t;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = T::zero();
        }
    }
    (h, q)
}

/// Solves (I − zH)x = b for upper Hessenberg H with complex z by Gaussian
/// elimination with adjacent-row pivoting. Returns None on an exact zero pivot.
pub fn hessenberg_shift_solve<T>(h: &Mat<T>, z: Complex<T>, b: &[Complex<T>]) -> Option<Vec<Complex<T>>>
where
    T: Real + NumAssign,
{
    let n = h.rows;
    let mut m: Vec<Complex<T>> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut v = -(z * h[(i, j)]);
            if i == j {
                v += Complex::new(T::one(), T::zero());
            }
            m.push(v);
        }
    }
    let mut x = b.to_vec();
    for k in 0..n.saturating_sub(1) {
        let (a, bsub) = (m[k * n + k], m[(k + 1) * n + k]);
        if bsub.mag() > a.mag() {
            for j in k..n {
                m.swap(k * n + j, (k + 1) * n + j);
            }
            x.swap(k, k + 1);
        }
        let piv = m[k * n + k];
        if piv.is_zero() {
            return None;
        }
        let f = m[(k + 1) * n + k] / piv;
        if !f.is_zero() {
            for j in k..n {
                let t = f * m[k * n + j];
                m[(k + 1) * n + j] -= t;
            }
            let t = f * x[k];
            x[k + 1] -= t;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        let piv = m[i * n + i];
        if piv.is_zero() {
            return None;
        }
        x[i] = s / piv;
    }
    Some(x)
}
