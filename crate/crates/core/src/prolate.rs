//! Prolate spheroidal wave functions ψ_j^c on [−1,1], expanded in normalized
//! Legendre polynomials.
//!
//! The coefficients are eigenvectors of the parity-split tridiagonal matrix of
//! the differential operator L_c ψ = −((1−x²)ψ')' + c²x²ψ. The eigenvalues λ_j
//! of the finite Fourier transform F_c are obtained by applying F_c at the
//! point where |ψ_j| is largest; once |λ_j| drops below 1e-13 they continue by
//! the exact ratio λ_{j}/λ_{j−1} = ⟨ψ_j, ψ_{j−1}'⟩ / (ic ⟨ψ_j, xψ_{j−1}⟩),
//! which keeps full relative accuracy for arbitrarily small values.
//!
//! Sign convention: ψ_j(1) > 0. With it λ_j = i^j |λ_j|.

use std::path::PathBuf;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::legendre::NormLegendre;
use crate::linalg::sym_tridiag_eigen_dd;
use crate::real::Real;

/// Environment variable naming a directory for cached bases.
pub const CACHE_ENV: &str = "BLCIRK_PROLATE_CACHE";

const DIRECT_LAMBDA_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Standard,
    #[default]
    Extended,
}

#[derive(Clone, Debug)]
pub struct ProlateBasis {
    c: f64,
    leg: NormLegendre,
    coeffs: Vec<Vec<Dd>>,
    coeffs64: Vec<Vec<f64>>,
    gamma: Vec<Dd>,
    lambda: Vec<Complex<Dd>>,
}

impl ProlateBasis {
    pub fn build(c: f64, j_count: usize, precision: Precision) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("bandlimit must be positive, got {c}")));
        }
        if j_count == 0 {
            return Err(Error::InvalidInput("need at least one function".into()));
        }
        let tail_tol = match precision {
            Precision::Standard => 1e-16,
            Precision::Extended => 1e-31,
        };
        let refine = precision == Precision::Extended;
        let mut k = 2 * j_count + c.ceil() as usize + 40;
        for _attempt in 0..12 {
            if let Some((coeffs, gamma)) = Self::solve_operator(c, j_count, k, refine, tail_tol)? {
                return Ok(Self::finish(c, k, coeffs, gamma));
            }
            k += k.div_ceil(4);
        }
        Err(Error::NoConvergence(format!(
            "Legendre expansion tail did not decay below {tail_tol:e} (K = {k})"
        )))
    }

    /// Returns None when the retained tail is too large for this K.
    #[allow(clippy::type_complexity)]
    fn solve_operator(
        c: f64,
        j_count: usize,
        k: usize,
        refine: bool,
        tail_tol: f64,
    ) -> Result<Option<(Vec<Vec<Dd>>, Vec<Dd>)>> {
        let c2 = Dd::from_f64(c).sqr();
        let mut coeffs = vec![vec![Dd::ZERO; k]; j_count];
        let mut gamma = vec![Dd::ZERO; j_count];
        for parity in 0..2usize {
            let idx: Vec<usize> = (parity..k).step_by(2).collect();
            let need = (j_count + 1 - parity) / 2;
            if need == 0 {
                continue;
            }
            let diag: Vec<Dd> = idx
                .iter()
                .map(|&n| {
                    let nf = n as f64;
                    let num = Dd::from_f64(2.0 * nf * (nf + 1.0) - 1.0);
                    let den = Dd::from_f64((2.0 * nf + 3.0) * (2.0 * nf - 1.0));
                    Dd::from_f64(nf * (nf + 1.0)) + c2 * num / den
                })
                .collect();
            let off: Vec<Dd> = idx[..idx.len() - 1]
                .iter()
                .map(|&n| {
                    let nf = n as f64;
                    let num = Dd::from_f64((nf + 1.0) * (nf + 2.0));
                    let den = Dd::from_f64(2.0 * nf + 3.0)
                        * (Dd::from_f64(2.0 * nf + 1.0) * Dd::from_f64(2.0 * nf + 5.0)).sqrt();
                    c2 * num / den
                })
                .collect();
            if idx.len() < need + 4 {
                return Ok(None);
            }
            let (vals, vecs) = sym_tridiag_eigen_dd(&diag, &off, refine)?;
            for i in 0..need {
                let v = &vecs[i];
                let m = v.len();
                let tail = v[m - 2].abs().to_f64().max(v[m - 1].abs().to_f64());
                if tail > tail_tol {
                    return Ok(None);
                }
                let j = 2 * i + parity;
                gamma[j] = vals[i];
                for (pos, &n) in idx.iter().enumerate() {
                    coeffs[j][n] = v[pos];
                }
            }
        }
        Ok(Some((coeffs, gamma)))
    }

    fn finish(c: f64, k: usize, mut coeffs: Vec<Vec<Dd>>, gamma: Vec<Dd>) -> Self {
        let leg = NormLegendre::new(k);
        for row in coeffs.iter_mut() {
            let at_one: Dd = row.iter().zip(&leg.s).map(|(b, s)| *b * *s).sum();
            if at_one.is_sign_negative() {
                row.iter_mut().for_each(|b| *b = -*b);
            }
        }
        let coeffs64 = coeffs.iter().map(|r| r.iter().map(|v| v.to_f64()).collect()).collect();
        let mut basis = ProlateBasis { c, leg, coeffs, coeffs64, gamma, lambda: Vec::new() };
        basis.lambda = basis.compute_lambdas();
        basis
    }

    fn compute_lambdas(&self) -> Vec<Complex<Dd>> {
        let j_count = self.len();
        let grid: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
        let tables: Vec<Vec<f64>> = grid.iter().map(|&x| self.leg.values(x)).collect();
        let mut out: Vec<Complex<Dd>> = Vec::with_capacity(j_count);
        let mut chaining = false;
        for j in 0..j_count {
            if chaining {
                let prev = out[j - 1];
                let ratio = self.lambda_ratio(j);
                out.push(prev * ratio);
                continue;
            }
            // evaluation point with maximal |ψ_j|
            let mut best = (0usize, -1.0f64);
            for (i, t) in tables.iter().enumerate() {
                let v: f64 = self.coeffs64[j].iter().zip(t).map(|(a, b)| a * b).sum::<f64>().abs();
                if v > best.1 {
                    best = (i, v);
                }
            }
            let x = Dd::from_f64(grid[best.0]);
            let psi = self.psi_t::<Dd>(j, x);
            let fc = self.apply_fc(j, x);
            let lam = Complex::new(fc.re / psi, fc.im / psi);
            if lam.re.abs().to_f64().max(lam.im.abs().to_f64()) < DIRECT_LAMBDA_FLOOR && j > 0 {
                chaining = true;
                let prev = out[j - 1];
                out.push(prev * self.lambda_ratio(j));
            } else {
                out.push(lam);
            }
        }
        out
    }

    /// λ_j / λ_{j−1} from Legendre-coefficient inner products.
    fn lambda_ratio(&self, j: usize) -> Complex<Dd> {
        let a = &self.coeffs[j];
        let b = &self.coeffs[j - 1];
        let k = a.len();
        // ⟨ψ_j, ψ_{j−1}'⟩ with P̄_n' = Σ_{l<n, n−l odd} sqrt((2n+1)(2l+1)) P̄_l
        let mut num = Dd::ZERO;
        let mut suffix = [Dd::ZERO, Dd::ZERO];
        for l in (0..k).rev() {
            // suffix[parity of l+1] holds Σ_{n>l, n≡l+1} b_n sqrt(2n+1)
            let s = suffix[(l + 1) % 2];
            num += a[l] * s * Dd::from_f64(2.0 * l as f64 + 1.0).sqrt();
            suffix[l % 2] += b[l] * Dd::from_f64(2.0 * l as f64 + 1.0).sqrt();
        }
        // ⟨ψ_j, x ψ_{j−1}⟩ with x P̄_n = e_n P̄_{n+1} + e_{n−1} P̄_{n−1}
        let mut den = Dd::ZERO;
        for n in 0..k - 1 {
            let nf = n as f64;
            let e = Dd::from_f64(nf + 1.0) / (Dd::from_f64(2.0 * nf + 1.0) * Dd::from_f64(2.0 * nf + 3.0)).sqrt();
            den += e * (a[n + 1] * b[n] + a[n] * b[n + 1]);
        }
        // num / (i c den) = −i num/(c den)
        let r = num / (Dd::from_f64(self.c) * den);
        Complex::new(Dd::ZERO, -r)
    }

    /// (F_c ψ_j)(x) = Σ_n β_n i^n sqrt(2(2n+1)) j_n(cx), in double-double.
    pub fn apply_fc(&self, j: usize, x: Dd) -> Complex<Dd> {
        let k = self.k();
        let z = Dd::from_f64(self.c) * x;
        let jn = spherical_bessel_j(k, z);
        let mut re = Dd::ZERO;
        let mut im = Dd::ZERO;
        for n in 0..k {
            let b = self.coeffs[j][n];
            if b.hi == 0.0 {
                continue;
            }
            let t = b * (Dd::from_f64(2.0 * (2.0 * n as f64 + 1.0))).sqrt() * jn[n];
            match n % 4 {
                0 => re += t,
                1 => im += t,
                2 => re -= t,
                _ => im -= t,
            }
        }
        Complex::new(re, im)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Number of functions J.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Legendre expansion length K.
    pub fn k(&self) -> usize {
        self.leg.len()
    }

    pub fn coeffs(&self, j: usize) -> &[Dd] {
        &self.coeffs[j]
    }

    pub fn gamma(&self, j: usize) -> Dd {
        self.gamma[j]
    }

    pub fn lambda(&self, j: usize) -> Complex<Dd> {
        self.lambda[j]
    }

    /// |λ_j| in double-double.
    pub fn lambda_abs(&self, j: usize) -> Dd {
        let l = self.lambda[j];
        (l.re.sqr() + l.im.sqr()).sqrt()
    }

    /// The real factor t_j with λ_j = t_j (j even) or i·t_j (j odd).
    pub fn lambda_real_factor(&self, j: usize) -> Dd {
        if j % 2 == 0 {
            self.lambda[j].re
        } else {
            self.lambda[j].im
        }
    }

    /// μ_j = (c/2π)|λ_j|².
    pub fn mu(&self, j: usize) -> f64 {
        let l = self.lambda[j];
        (Dd::from_f64(self.c) * (l.re.sqr() + l.im.sqr()) / (Dd::PI.mul_f64(2.0))).to_f64()
    }

    fn check_domain(x: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::InvalidInput(format!("x = {x} outside [-1, 1]")));
        }
        Ok(())
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.len() {
            return Err(Error::InvalidInput(format!("index {j} out of range (J = {})", self.len())));
        }
        Ok(())
    }

    fn row<T: Real>(&self, j: usize) -> Vec<T> {
        if std::any::TypeId::of::<T>() == std::any::TypeId::of::<f64>() {
            self.coeffs64[j].iter().map(|&v| T::from_f64(v)).collect()
        } else {
            self.coeffs[j].iter().map(|&v| T::from_dd(v)).collect()
        }
    }

    fn dot<T: Real>(&self, j: usize, table: &[T]) -> T {
        let mut s = T::zero();
        if std::any::TypeId::of::<T>() == std::any::TypeId::of::<f64>() {
            for (n, &b) in self.coeffs64[j].iter().enumerate() {
                if b != 0.0 {
                    s += T::from_f64(b) * table[n];
                }
            }
        } else {
            for (n, &b) in self.coeffs[j].iter().enumerate() {
                if b.hi != 0.0 {
                    s += T::from_dd(b) * table[n];
                }
            }
        }
        s
    }

    /// ψ_j(x) without domain checks.
    pub fn psi_t<T: Real>(&self, j: usize, x: T) -> T {
        let table = self.leg.values(x);
        self.dot(j, &table)
    }

    /// ψ_0(x)..ψ_{J−1}(x).
    pub fn psi_all<T: Real>(&self, x: T) -> Vec<T> {
        let table = self.leg.values(x);
        (0..self.len()).map(|j| self.dot(j, &table)).collect()
    }

    /// (ψ_j, ψ_j', ψ_j'') at x.
    pub fn psi_d2<T: Real>(&self, j: usize, x: T) -> (T, T, T) {
        let (p, d1, d2) = self.leg.values_d2(x);
        (self.dot(j, &p), self.dot(j, &d1), self.dot(j, &d2))
    }

    /// Φ_j(x) = ∫_{−1}^{x} ψ_j without domain checks.
    pub fn phi_t<T: Real>(&self, j: usize, x: T) -> T {
        if x.to_f64() == -1.0 && x == -T::one() {
            return T::zero();
        }
        let table = self.leg.primitives(x);
        self.dot(j, &table)
    }

    pub fn phi_all<T: Real>(&self, x: T) -> Vec<T> {
        if x == -T::one() {
            return vec![T::zero(); self.len()];
        }
        let table = self.leg.primitives(x);
        (0..self.len()).map(|j| self.dot(j, &table)).collect()
    }

    pub fn eval_psi(&self, j: usize, x: f64) -> Result<f64> {
        self.check_index(j)?;
        Self::check_domain(x)?;
        Ok(self.psi_t(j, x))
    }

    pub fn eval_phi(&self, j: usize, x: f64) -> Result<f64> {
        self.check_index(j)?;
        Self::check_domain(x)?;
        Ok(self.phi_t(j, x))
    }

    /// Pointwise residual of L_c ψ_j − γ_j ψ_j.
    pub fn operator_residual<T: Real>(&self, j: usize, x: T) -> T {
        let (p, d1, d2) = self.psi_d2(j, x);
        let c = T::from_f64(self.c);
        let one = T::one();
        -(one - x * x) * d2 + T::from_f64(2.0) * x * d1 + c * c * x * x * p - T::from_dd(self.gamma[j]) * p
    }

    /// Legendre coefficient row in the requested precision.
    pub fn coeff_row<T: Real>(&self, j: usize) -> Vec<T> {
        self.row(j)
    }

    pub fn to_json(&self) -> ProlateJson {
        let s = |v: &Dd| v.to_sci_string(36);
        ProlateJson {
            c: self.c,
            j: self.len(),
            k: self.k(),
            gamma: self.gamma.iter().map(s).collect(),
            lambda_re: self.lambda.iter().map(|l| s(&l.re)).collect(),
            lambda_im: self.lambda.iter().map(|l| s(&l.im)).collect(),
            coeffs: self.coeffs.iter().map(|r| r.iter().map(s).collect()).collect(),
        }
    }

    pub fn from_json(js: &ProlateJson) -> Result<Self> {
        let p = |v: &String| -> Result<Dd> {
            v.parse::<Dd>().map_err(|e| Error::InvalidInput(e.to_string()))
        };
        let j = js.j;
        if js.gamma.len() != j || js.lambda_re.len() != j || js.lambda_im.len() != j || js.coeffs.len() != j {
            return Err(Error::InvalidInput("prolate JSON arrays disagree with J".into()));
        }
        let mut coeffs = Vec::with_capacity(j);
        for row in &js.coeffs {
            if row.len() != js.k {
                return Err(Error::InvalidInput("prolate JSON coefficient row length differs from K".into()));
            }
            coeffs.push(row.iter().map(p).collect::<Result<Vec<Dd>>>()?);
        }
        let gamma = js.gamma.iter().map(p).collect::<Result<Vec<Dd>>>()?;
        let lambda = js
            .lambda_re
            .iter()
            .zip(&js.lambda_im)
            .map(|(a, b)| Ok(Complex::new(p(a)?, p(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let coeffs64 = coeffs.iter().map(|r: &Vec<Dd>| r.iter().map(|v| v.to_f64()).collect()).collect();
        Ok(ProlateBasis { c: js.c, leg: NormLegendre::new(js.k), coeffs, coeffs64, gamma, lambda })
    }

    /// Like [`ProlateBasis::build`] but reads/writes a JSON cache in the
    /// directory named by `BLCIRK_PROLATE_CACHE`, when set.
    pub fn build_cached(c: f64, j_count: usize, precision: Precision) -> Result<Self> {
        let Some(dir) = std::env::var_os(CACHE_ENV).map(PathBuf::from) else {
            return Self::build(c, j_count, precision);
        };
        let tag = match precision {
            Precision::Standard => "std",
            Precision::Extended => "ext",
        };
        let path = dir.join(format!("prolate_c{:016x}_j{j_count}_{tag}.json", c.to_bits()));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(js) = serde_json::from_str::<ProlateJson>(&text) {
                if let Ok(b) = Self::from_json(&js) {
                    return Ok(b);
                }
            }
        }
        let basis = Self::build(c, j_count, precision)?;
        std::fs::create_dir_all(&dir)?;
        std::fs::write(&path, serde_json::to_string(&basis.to_json())?)?;
        Ok(basis)
    }
}

/// Serialized form; numbers are decimal strings carrying 36 digits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProlateJson {
    pub c: f64,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: Vec<String>,
    pub lambda_re: Vec<String>,
    pub lambda_im: Vec<String>,
    pub coeffs: Vec<Vec<String>>,
}

/// Spherical Bessel functions j_0(z)..j_{n−1}(z) for z ≥ 0 by Miller's
/// backward recurrence normalized with Σ (2n+1) j_n² = 1.
pub fn spherical_bessel_j(n: usize, z: Dd) -> Vec<Dd> {
    let mut out = vec![Dd::ZERO; n];
    if n == 0 {
        return out;
    }
    if z.hi == 0.0 {
        out[0] = Dd::ONE;
        return out;
    }
    let zf = z.to_f64().abs();
    let start = n.max(zf.ceil() as usize) + 60 + (12.0 * zf.cbrt()).ceil() as usize;
    let mut vals = vec![Dd::ZERO; start + 2];
    vals[start + 1] = Dd::ZERO;
    vals[start] = Dd::ONE;
    for m in (1..=start).rev() {
        let v = Dd::from_f64(2.0 * m as f64 + 1.0) / z * vals[m] - vals[m + 1];
        vals[m - 1] = v;
        if v.hi.abs() > 1e100 {
            for w in vals[m - 1..].iter_mut() {
                *w = w.mul_f64(1e-100);
            }
        }
    }
    let mut norm = Dd::ZERO;
    for (m, v) in vals.iter().enumerate() {
        norm += v.sqr().mul_f64(2.0 * m as f64 + 1.0);
    }
    let mut scale = Dd::ONE / norm.sqrt();
    let (s, c) = z.sin_cos();
    let j0 = s / z;
    let j1 = s / z.sqr() - c / z;
    let sign_ref = if j0.abs() > j1.abs() { (j0, vals[0]) } else { (j1, vals[1]) };
    if sign_ref.0.is_sign_negative() != sign_ref.1.is_sign_negative() {
        scale = -scale;
    }
    for m in 0..n {
        out[m] = vals[m] * scale;
    }
    out
}
