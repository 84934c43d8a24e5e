//! Interpolating band-limited bases R_k on quadrature nodes, R_k(τ_l) = δ_kl.
//!
//! Two routes: expansion over the exact prolates ψ_j^c, and expansion over
//! exponentials e^{icτ_l x} obtained from the discretized eigenproblem of F_c
//! (approximate prolates). Indices are 0-based throughout.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::linalg::{cond_inf, inverse, sym_eigen_jacobi, Mat};
use crate::prolate::ProlateBasis;
use crate::quadrature::QuadratureRule;
use crate::real::Real;

type Cdd = Complex<Dd>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ExactPswf,
    ApproxPswf,
}

#[derive(Clone, Debug)]
enum Repr {
    Exact { prolate: ProlateBasis, alpha: Mat<Dd> },
    Approx { r: Mat<Cdd>, eta: Vec<Cdd>, psi_disc: Mat<Dd> },
}

#[derive(Clone, Debug)]
pub struct InterpBasis {
    c: f64,
    nodes: Vec<Dd>,
    weights: Vec<Dd>,
    repr: Repr,
}

/// Largest condition number accepted for ψ_j(τ_l).
const COND_LIMIT: f64 = 1e8;

impl InterpBasis {
    /// R_k = Σ_j α_kj ψ_j^c with α the inverse of ψ_j(τ_l).
    pub fn exact(prolate: &ProlateBasis, rule: &QuadratureRule) -> Result<Self> {
        let m = rule.m();
        if prolate.len() < m {
            return Err(Error::InvalidInput(format!(
                "prolate basis has {} functions, rule needs {m}",
                prolate.len()
            )));
        }
        // a[(l, j)] = ψ_j(τ_l); α aᵀ = I, so α is the transposed right inverse of a
        let rows: Vec<Vec<Dd>> = rule.nodes.iter().map(|&t| prolate.psi_all::<Dd>(t)).collect();
        let a = Mat::from_fn(m, m, |l, j| rows[l][j]);
        let cond = cond_inf(&a)?;
        if cond > COND_LIMIT {
            return Err(Error::IllConditioned(format!(
                "ψ_j(τ_l) has condition {cond:e}; (c, rule) pairing is off"
            )));
        }
        let alpha = inverse(&a)?.transpose();
        Ok(InterpBasis {
            c: prolate.c(),
            nodes: rule.nodes.clone(),
            weights: rule.weights.clone(),
            repr: Repr::Exact { prolate: prolate.clone(), alpha },
        })
    }

    /// R_k = Σ_l r_kl e^{icτ_l x} with r = E⁻¹, E_lm = e^{icτ_lτ_m}. The
    /// discrete eigenpairs of Σ_l w_l e^{icτ_mτ_l}Ψ(τ_l) = ηΨ(τ_m) are kept for
    /// cross-checks; see [`InterpBasis::r_from_eigen`].
    pub fn approx(rule: &QuadratureRule, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("bandlimit must be positive, got {c}")));
        }
        let m = rule.m();
        let cd = Dd::from_f64(c);
        let t = &rule.nodes;
        let e = Mat::from_fn(m, m, |l, k| (cd * t[l] * t[k]).cis());
        // r E = I asks for a left inverse; E is symmetric, so transpose the
        // right inverse, which is the one LU delivers with a small residual
        let r = inverse(&e)?.transpose();
        let (eta, psi_disc) = discrete_eigen(rule, c)?;
        Ok(InterpBasis {
            c,
            nodes: rule.nodes.clone(),
            weights: rule.weights.clone(),
            repr: Repr::Approx { r, eta, psi_disc },
        })
    }

    pub fn route(&self) -> Route {
        match self.repr {
            Repr::Exact { .. } => Route::ExactPswf,
            Repr::Approx { .. } => Route::ApproxPswf,
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Dd] {
        &self.nodes
    }

    /// Quadrature weights of the underlying 2c rule.
    pub fn rule_weights(&self) -> &[Dd] {
        &self.weights
    }

    pub fn prolate(&self) -> Option<&ProlateBasis> {
        match &self.repr {
            Repr::Exact { prolate, .. } => Some(prolate),
            Repr::Approx { .. } => None,
        }
    }

    pub fn alpha(&self) -> Option<&Mat<Dd>> {
        match &self.repr {
            Repr::Exact { alpha, .. } => Some(alpha),
            Repr::Approx { .. } => None,
        }
    }

    pub fn r(&self) -> Option<&Mat<Cdd>> {
        match &self.repr {
            Repr::Exact { .. } => None,
            Repr::Approx { r, .. } => Some(r),
        }
    }

    /// Discrete eigenvalues η_j, descending |η_j|.
    pub fn eta(&self) -> Option<&[Cdd]> {
        match &self.repr {
            Repr::Exact { .. } => None,
            Repr::Approx { eta, .. } => Some(eta),
        }
    }

    /// Discrete eigenvectors, column j holds Ψ_j(τ_l), normalized so that
    /// Σ_l w_l Ψ_j(τ_l)² = 1 and Ψ_j(τ_1) > 0.
    pub fn psi_disc(&self) -> Option<&Mat<Dd>> {
        match &self.repr {
            Repr::Exact { .. } => None,
            Repr::Approx { psi_disc, .. } => Some(psi_disc),
        }
    }

    /// r_kl = Σ_j w_k Ψ_j(τ_k) η_j⁻¹ Ψ_j(τ_l) w_l.
    pub fn r_from_eigen(&self) -> Option<Mat<Cdd>> {
        let Repr::Approx { eta, psi_disc, .. } = &self.repr else {
            return None;
        };
        let m = self.m();
        let w = &self.weights;
        let inv_eta: Vec<Cdd> = eta.iter().map(|&z| Cdd::new(Dd::ONE, Dd::ZERO) / z).collect();
        Some(Mat::from_fn(m, m, |k, l| {
            let mut s = Cdd::new(Dd::ZERO, Dd::ZERO);
            for j in 0..m {
                s += inv_eta[j] * (psi_disc[(k, j)] * psi_disc[(l, j)]);
            }
            s * (w[k] * w[l])
        }))
    }

    fn check(&self, k: usize, x: f64) -> Result<()> {
        if k >= self.m() {
            return Err(Error::InvalidInput(format!("index {k} out of range (M = {})", self.m())));
        }
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::InvalidInput(format!("x = {x} outside [-1, 1]")));
        }
        Ok(())
    }

    /// R_k(x) in double-double (real part for the exponential route).
    pub fn r_at(&self, k: usize, x: Dd) -> Cdd {
        match &self.repr {
            Repr::Exact { prolate, alpha } => {
                let psi = prolate.psi_all::<Dd>(x);
                let s = (0..self.m()).map(|j| alpha[(k, j)] * psi[j]).sum();
                Cdd::new(s, Dd::ZERO)
            }
            Repr::Approx { r, .. } => {
                let cd = Dd::from_f64(self.c);
                let mut s = Cdd::new(Dd::ZERO, Dd::ZERO);
                for l in 0..self.m() {
                    s += r[(k, l)] * (cd * self.nodes[l] * x).cis();
                }
                s
            }
        }
    }

    /// K_k(x) = ∫_{−1}^{x} R_k in double-double.
    pub fn k_at(&self, k: usize, x: Dd) -> Cdd {
        match &self.repr {
            Repr::Exact { prolate, alpha } => {
                let phi = prolate.phi_all::<Dd>(x);
                let s = (0..self.m()).map(|j| alpha[(k, j)] * phi[j]).sum();
                Cdd::new(s, Dd::ZERO)
            }
            Repr::Approx { r, .. } => {
                let cd = Dd::from_f64(self.c);
                let mut s = Cdd::new(Dd::ZERO, Dd::ZERO);
                for l in 0..self.m() {
                    s += r[(k, l)] * exp_primitive(cd * self.nodes[l], x);
                }
                s
            }
        }
    }

    pub fn eval_r(&self, k: usize, x: f64) -> Result<f64> {
        self.check(k, x)?;
        let v = self.r_at(k, Dd::from_f64(x));
        debug_assert!(v.im.abs().to_f64() < 1e-12, "R_{k}({x}) has imaginary part {}", v.im);
        Ok(v.re.to_f64())
    }

    pub fn eval_k(&self, k: usize, x: f64) -> Result<f64> {
        self.check(k, x)?;
        Ok(self.k_at(k, Dd::from_f64(x)).re.to_f64())
    }

    /// w_k = ∫_{−1}^{1} R_k.
    pub fn integral_weights(&self) -> Vec<Dd> {
        match &self.repr {
            Repr::Exact { prolate, alpha } => {
                let psi0 = prolate.psi_all::<Dd>(Dd::ZERO);
                let lp: Vec<Dd> = (0..self.m()).map(|j| prolate.lambda(j).re * psi0[j]).collect();
                (0..self.m()).map(|k| (0..self.m()).map(|j| alpha[(k, j)] * lp[j]).sum()).collect()
            }
            Repr::Approx { .. } => (0..self.m()).map(|k| self.k_at(k, Dd::ONE).re).collect(),
        }
    }
}

/// ∫_{−1}^{x} e^{i a s} ds = (e^{iax} − e^{−ia})/(ia), (x + 1) at a = 0.
pub fn exp_primitive(a: Dd, x: Dd) -> Cdd {
    // (x+1) e^{ia(x−1)/2} sinc(a(x+1)/2)
    let h = (x + Dd::ONE).mul_f64(0.5);
    let phase = (a * (x - Dd::ONE).mul_f64(0.5)).cis();
    phase * ((x + Dd::ONE) * (a * h).sinc())
}

/// Eigenpairs of the discretized F_c on the rule, split by parity: even
/// vectors see W^{1/2} cos(cτ_pτ_q) W^{1/2}, odd ones i·W^{1/2} sin(cτ_pτ_q) W^{1/2},
/// both real symmetric on the half grid.
fn discrete_eigen(rule: &QuadratureRule, c: f64) -> Result<(Vec<Cdd>, Mat<Dd>)> {
    let m = rule.m();
    let cd = Dd::from_f64(c);
    let t = &rule.nodes;
    let w = &rule.weights;
    let half = m / 2;
    // half-grid indices: positive nodes, plus the centre node for odd M
    let mut idx: Vec<usize> = (m - half..m).collect();
    let mut mult: Vec<f64> = vec![2.0; half];
    if m % 2 == 1 {
        idx.insert(0, half);
        mult.insert(0, 1.0);
    }
    let mut pairs: Vec<(Cdd, Vec<Dd>)> = Vec::with_capacity(m);
    for odd in [false, true] {
        let (ids, mul): (Vec<usize>, Vec<f64>) = if odd {
            (idx.iter().copied().filter(|&i| t[i].hi != 0.0).collect(), vec![2.0; half])
        } else {
            (idx.clone(), mult.clone())
        };
        let n = ids.len();
        if n == 0 {
            continue;
        }
        let sw: Vec<Dd> = (0..n).map(|p| (w[ids[p]].mul_f64(mul[p])).sqrt()).collect();
        let b = Mat::from_fn(n, n, |p, q| {
            let arg = cd * t[ids[p]] * t[ids[q]];
            let k = if odd { arg.sin() } else { arg.cos() };
            sw[p] * k * sw[q]
        });
        let (vals, vecs) = sym_eigen_jacobi(&b)?;
        for e in 0..n {
            let eta = if odd { Cdd::new(Dd::ZERO, vals[e]) } else { Cdd::new(vals[e], Dd::ZERO) };
            let mut full = vec![Dd::ZERO; m];
            for p in 0..n {
                // undo the W^{1/2} scaling; the half-grid norm already counts
                // mirrored nodes through the multiplicity
                let v = vecs[(p, e)] / sw[p];
                let i = ids[p];
                full[i] = v;
                if t[i].hi != 0.0 {
                    full[m - 1 - i] = if odd { -v } else { v };
                }
            }
            if full[0].hi < 0.0 {
                full.iter_mut().for_each(|v| *v = -*v);
            }
            pairs.push((eta, full));
        }
    }
    let mag = |z: &Cdd| (z.re.sqr() + z.im.sqr()).to_f64();
    pairs.sort_by(|a, b| mag(&b.0).total_cmp(&mag(&a.0)));
    let eta: Vec<Cdd> = pairs.iter().map(|p| p.0).collect();
    let psi = Mat::from_fn(m, m, |l, j| pairs[j].1[l]);
    Ok((eta, psi))
}
