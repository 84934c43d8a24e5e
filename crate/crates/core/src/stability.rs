//! Linear stability of a tableau: the stability function
//! r(z) = 1 + z wᵀ(I − zS)⁻¹1, the spectrum of S, unimodularity of r on the
//! imaginary axis and the zeros of r at −1/λ̄_k.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linalg::{hessenberg, hessenberg_shift_solve, Mat};
use crate::real::{cx_to_f64, Real};
use crate::tableau::Tableau;

type Cdd = Complex<Dd>;

/// S in Hessenberg form with the two projected vectors, so r(z) costs one
/// O(M²) solve.
#[derive(Clone, Debug)]
pub struct StabilityFunction {
    h: Mat<Dd>,
    /// Qᵀ w
    qw: Vec<Dd>,
    /// Qᵀ 1
    q1: Vec<Dd>,
}

impl StabilityFunction {
    /// From a tableau on either interval; r is always that of the [0,1] step.
    pub fn new(tab: &Tableau) -> Self {
        let t = tab.rescale_unit_raw();
        Self::from_parts(&t.0, &t.1)
    }

    pub fn from_parts(s: &Mat<Dd>, w: &[Dd]) -> Self {
        let (h, q) = hessenberg(s);
        let m = w.len();
        let qw = (0..m).map(|j| (0..m).map(|i| q[(i, j)] * w[i]).sum()).collect();
        let q1 = (0..m).map(|j| (0..m).map(|i| q[(i, j)]).sum()).collect();
        StabilityFunction { h, qw, q1 }
    }

    pub fn eval_dd(&self, z: Cdd) -> Result<Cdd> {
        let b: Vec<Cdd> = self.q1.iter().map(|&v| Cdd::new(v, Dd::ZERO)).collect();
        let x = hessenberg_shift_solve(&self.h, z, &b)
            .ok_or_else(|| Error::PoleHit(format!("{}", cx_to_f64(z))))?;
        let mut s = Cdd::new(Dd::ZERO, Dd::ZERO);
        for (xi, wi) in x.iter().zip(&self.qw) {
            s += *xi * *wi;
        }
        let r = Cdd::new(Dd::ONE, Dd::ZERO) + z * s;
        if !(r.re.is_finite() && r.im.is_finite()) {
            return Err(Error::PoleHit(format!("{}", cx_to_f64(z))));
        }
        Ok(r)
    }

    pub fn eval(&self, z: Complex<f64>) -> Result<Complex<f64>> {
        self.eval_dd(Cdd::new(Dd::from_f64(z.re), Dd::from_f64(z.im))).map(cx_to_f64)
    }
}

impl Tableau {
    /// (S, w) on [0,1] without recomputing certificates.
    fn rescale_unit_raw(&self) -> (Mat<Dd>, Vec<Dd>) {
        match self.interval {
            crate::tableau::Interval::Unit => (self.s.clone(), self.weights.clone()),
            crate::tableau::Interval::Symmetric => (
                self.s.map(|v| v.mul_f64(0.5)),
                self.weights.iter().map(|w| w.mul_f64(0.5)).collect(),
            ),
        }
    }
}

/// r(z) for the tableau's [0,1] form.
pub fn stability_function(tab: &Tableau, z: Complex<f64>) -> Result<Complex<f64>> {
    StabilityFunction::new(tab).eval(z)
}

/// Eigenvalues of S: standard-precision Schur start values, each refined in
/// double-double by shifted inverse iteration on the Hessenberg form with
/// Rayleigh-quotient shift updates. Sorted by real part, then imaginary.
pub fn eigenvalues(s: &Mat<Dd>) -> Result<Vec<Cdd>> {
    let m = s.rows;
    let a = DMatrix::from_fn(m, m, |i, j| s[(i, j)].to_f64());
    let start = a.complex_eigenvalues();
    let (h, _) = hessenberg(s);
    let mut out = Vec::with_capacity(m);
    for z0 in start.iter() {
        let mut lam = Cdd::new(Dd::from_f64(z0.re), Dd::from_f64(z0.im));
        if lam.re.hi == 0.0 && lam.im.hi == 0.0 {
            out.push(lam);
            continue;
        }
        let mut u: Vec<Cdd> = (0..m).map(|i| Cdd::new(Dd::from_f64(1.0 + 0.1 * i as f64), Dd::ZERO)).collect();
        for _ in 0..4 {
            // (I − H/σ) x = u  ⇔  (σ − H) x = σ u
            let inv = Cdd::new(Dd::ONE, Dd::ZERO) / lam;
            let Some(x) = hessenberg_shift_solve(&h, inv, &u) else {
                break;
            };
            let nrm = x.iter().map(|v| v.re.sqr() + v.im.sqr()).sum::<Dd>().sqrt();
            if !nrm.is_finite() || nrm.hi == 0.0 {
                break;
            }
            u = x.iter().map(|v| *v / nrm).collect();
            // Rayleigh quotient uᴴ H u (u has unit norm)
            let mut rq = Cdd::new(Dd::ZERO, Dd::ZERO);
            for i in 0..m {
                let mut hu = Cdd::new(Dd::ZERO, Dd::ZERO);
                for j in i.saturating_sub(1)..m {
                    hu += u[j] * h[(i, j)];
                }
                rq += u[i].conj() * hu;
            }
            if !(rq.re.is_finite() && rq.im.is_finite()) {
                break;
            }
            lam = rq;
        }
        out.push(lam);
    }
    out.sort_by(|a, b| a.re.to_f64().total_cmp(&b.re.to_f64()).then(a.im.to_f64().total_cmp(&b.im.to_f64())));
    Ok(out)
}

pub fn min_real_part(s: &Mat<Dd>) -> Result<f64> {
    Ok(eigenvalues(s)?.iter().map(|z| z.re.to_f64()).fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenReport {
    /// Eigenvalues of S on [−1,1] as (re, im). The poles of r are at 2/λ.
    pub eigenvalues: Vec<(f64, f64)>,
    pub min_real_part: f64,
    /// M₁, the number of conjugate pairs.
    pub conjugate_pairs: usize,
    /// M₂, the number of real eigenvalues.
    pub real_count: usize,
    /// Largest distance from a non-real eigenvalue to the conjugate of its
    /// nearest partner.
    pub pairing_error: f64,
}

/// Spectrum of the integration matrix on [−1,1].
pub fn eigen_analysis(tab: &Tableau) -> Result<EigenReport> {
    let ev = eigenvalues(&tab.to_symmetric().s)?;
    let evf: Vec<Complex<f64>> = ev.iter().map(|&z| cx_to_f64(z)).collect();
    let scale = evf.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut real_count = 0;
    let mut pairing_error = 0.0f64;
    for z in &evf {
        if z.im.abs() <= 1e-12 * scale {
            real_count += 1;
            continue;
        }
        let d = evf.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
        pairing_error = pairing_error.max(d);
    }
    Ok(EigenReport {
        eigenvalues: evf.iter().map(|z| (z.re, z.im)).collect(),
        min_real_part: evf.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
        conjugate_pairs: (evf.len() - real_count) / 2,
        real_count,
        pairing_error,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eigen: EigenReport,
    /// (y, |r(iy)| − 1) on the sweep grid, y ≥ 0 (r(−iy) is the conjugate).
    pub sweep: Vec<(f64, f64)>,
    pub max_unimodularity_error: f64,
    pub max_abs_r: f64,
    /// |r(−1/λ̄_k)| for every eigenvalue λ_k of the [0,1] matrix.
    pub zero_residuals: Vec<f64>,
    pub max_zero_residual: f64,
    /// max |r(iy) − e^{iy}| over the sweep points with y ≤ c.
    pub approx_error: f64,
    pub c: f64,
}

/// Sweep points: `grid` log-spaced on [1e-3, y_max] and `grid` linear on
/// [0, 2c].
pub fn sweep_grid(y_max: f64, c: f64, grid: usize) -> Vec<f64> {
    let mut ys = Vec::with_capacity(2 * grid);
    let (l0, l1) = (1e-3f64.ln(), y_max.ln());
    for i in 0..grid {
        ys.push((l0 + (l1 - l0) * i as f64 / (grid - 1).max(1) as f64).exp());
    }
    for i in 0..grid {
        ys.push(2.0 * c * i as f64 / (grid - 1).max(1) as f64);
    }
    ys.sort_by(f64::total_cmp);
    ys
}

/// Numerical A-stability check of r for the [0,1] form of the tableau:
/// poles, unimodularity sweep, zeros, and agreement with e^{iy} for |y| ≤ c.
pub fn check_a_stability(tab: &Tableau, y_max: f64, grid: usize) -> Result<StabilityReport> {
    let eigen = eigen_analysis(tab)?;
    if eigen.min_real_part <= 0.0 {
        return Err(Error::Certificate(format!(
            "eigenvalue with real part {:e} ≤ 0: r has a pole in the left half-plane",
            eigen.min_real_part
        )));
    }
    let f = StabilityFunction::new(tab);
    let ys = sweep_grid(y_max, tab.c, grid);
    let mut sweep = Vec::with_capacity(ys.len());
    let mut max_dev = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut approx_error = 0.0f64;
    for &y in &ys {
        let z = Cdd::new(Dd::ZERO, Dd::from_f64(y));
        let r = f.eval_dd(z)?;
        let mag = (r.re.sqr() + r.im.sqr()).sqrt();
        let dev = (mag - Dd::ONE).to_f64();
        sweep.push((y, dev));
        max_dev = max_dev.max(dev.abs());
        max_abs = max_abs.max(mag.to_f64());
        if y <= tab.c {
            let e = Dd::from_f64(y).cis();
            let d = r - e;
            approx_error = approx_error.max(d.re.to_f64().hypot(d.im.to_f64()));
        }
    }
    let mut zero_residuals = Vec::with_capacity(eigen.eigenvalues.len());
    let (s, _) = tab.rescale_unit_raw();
    for lam in eigenvalues(&s)? {
        // −1/λ̄
        let z = -(Cdd::new(Dd::ONE, Dd::ZERO) / lam.conj());
        let r = f.eval_dd(z)?;
        zero_residuals.push(r.re.to_f64().hypot(r.im.to_f64()));
    }
    let max_zero_residual = zero_residuals.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport {
        eigen,
        sweep,
        max_unimodularity_error: max_dev,
        max_abs_r: max_abs,
        zero_residuals,
        max_zero_residual,
        approx_error,
        c: tab.c,
    })
}

impl StabilityReport {
    /// CSV lines "y,dev" of the sweep.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("y,abs_r_minus_1\n");
        for (y, d) in &self.sweep {
            out.push_str(&format!("{y:.17e},{d:.17e}\n"));
        }
        out
    }
}
