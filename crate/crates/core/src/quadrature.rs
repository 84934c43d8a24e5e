//! Generalized Gaussian quadratures for band-limited exponentials.
//!
//! A rule with bandlimit `c_quad` integrates e^{i c_quad t x}, |x| ≤ 1, over
//! t ∈ [−1,1]. Nodes are the roots of ψ_M^{c} with c = c_quad/2, the
//! bandlimit whose products the rule is meant to integrate; weights solve
//! Σ_k w_k ψ_j(τ_k) = ∫ψ_j = λ_j ψ_j(0) for j < M.

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::legendre::gauss_legendre;
use crate::linalg::{inverse, Lu, Mat};
use crate::prolate::{Precision, ProlateBasis};
use crate::real::Real;

/// Default x-grid size for verification.
pub const VERIFY_GRID: usize = 10_000;

/// Below this target the residual is (re)checked in double-double.
const STANDARD_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub c_quad: f64,
    pub eps_quad: f64,
    pub nodes: Vec<Dd>,
    pub weights: Vec<Dd>,
    pub verified_error: f64,
}

impl QuadratureRule {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_f64(&self) -> Vec<f64> {
        self.nodes.iter().map(|v| v.to_f64()).collect()
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|v| v.to_f64()).collect()
    }

    /// max over an x-grid on [−1,1] of |2 sinc(c x) − Σ w_k e^{i c τ_k x}|,
    /// evaluated in the requested precision. Symmetry of the rule makes the
    /// residual even in x, so only x ≥ 0 is sampled.
    pub fn residual(&self, grid_size: usize, precision: Precision) -> f64 {
        let half = grid_size.div_ceil(2).max(1);
        match precision {
            Precision::Standard => {
                let t = self.nodes_f64();
                let w = self.weights_f64();
                let mut worst = 0.0f64;
                for i in 0..=half {
                    let x = i as f64 / half as f64;
                    let (mut re, mut im) = (0.0, 0.0);
                    for (tk, wk) in t.iter().zip(&w) {
                        let (s, c) = (self.c_quad * tk * x).sin_cos();
                        re += wk * c;
                        im += wk * s;
                    }
                    let exact = 2.0 * (self.c_quad * x).sinc();
                    worst = worst.max((exact - re).hypot(im));
                }
                worst
            }
            Precision::Extended => {
                let m = self.m();
                let c = Dd::from_f64(self.c_quad);
                let mut worst = 0.0f64;
                for i in 0..=half {
                    let x = Dd::from_f64(i as f64) / Dd::from_f64(half as f64);
                    let cx = c * x;
                    // pair k with its mirror; the sine parts cancel exactly
                    let mut s = Dd::ZERO;
                    for k in 0..m / 2 {
                        s += (self.weights[k] + self.weights[m - 1 - k]) * (cx * self.nodes[m - 1 - k]).cos();
                    }
                    if m % 2 == 1 {
                        s += self.weights[m / 2] * (cx * self.nodes[m / 2]).cos();
                    }
                    let exact = cx.sinc().mul_f64(2.0);
                    worst = worst.max((exact - s).abs().to_f64());
                }
                worst
            }
        }
    }

    /// Recomputes and stores `verified_error`; precision follows the target.
    pub fn verify(&mut self, grid_size: usize) -> f64 {
        let prec = if self.eps_quad < STANDARD_FLOOR { Precision::Extended } else { Precision::Standard };
        self.verified_error = self.residual(grid_size.max(1000), prec);
        self.verified_error
    }

    /// (τ_2 − τ_1)/(τ_{⌊M/2⌋} − τ_{⌊M/2⌋−1}) with 1-based indices.
    pub fn node_ratio(&self) -> f64 {
        node_ratio(&self.nodes_f64())
    }

    /// α = πM/c_quad.
    pub fn oversampling_factor(&self) -> f64 {
        std::f64::consts::PI * self.m() as f64 / self.c_quad
    }

    pub fn weight_sum(&self) -> Dd {
        self.weights.iter().copied().sum()
    }

    pub fn to_json(&self) -> QuadratureJson {
        QuadratureJson {
            c: self.c_quad,
            eps: self.eps_quad,
            m: self.m(),
            nodes: self.nodes.iter().map(|v| v.to_sci_string(36)).collect(),
            weights: self.weights.iter().map(|v| v.to_sci_string(36)).collect(),
            verified_error: self.verified_error,
        }
    }

    pub fn from_json(js: &QuadratureJson) -> Result<Self> {
        let parse = |v: &Vec<String>| -> Result<Vec<Dd>> {
            v.iter()
                .map(|s| s.parse::<Dd>().map_err(|e| Error::InvalidInput(e.to_string())))
                .collect()
        };
        let nodes = parse(&js.nodes)?;
        let weights = parse(&js.weights)?;
        if nodes.len() != js.m || weights.len() != js.m {
            return Err(Error::InvalidInput("quadrature JSON: M disagrees with array lengths".into()));
        }
        Ok(QuadratureRule { c_quad: js.c, eps_quad: js.eps, nodes, weights, verified_error: js.verified_error })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureJson {
    pub c: f64,
    pub eps: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub nodes: Vec<String>,
    pub weights: Vec<String>,
    pub verified_error: f64,
}

pub fn node_ratio(nodes: &[f64]) -> f64 {
    let m = nodes.len();
    assert!(m >= 4, "node ratio needs at least 4 nodes");
    let h = m / 2;
    // 1-based τ_h − τ_{h−1} is 0-based [h−1] − [h−2]
    (nodes[1] - nodes[0]) / (nodes[h - 1] - nodes[h - 2])
}

/// The M roots of ψ_M in (−1,1), exactly symmetric, polished in double-double.
pub fn prolate_roots(basis: &ProlateBasis, m: usize) -> Result<Vec<Dd>> {
    if m >= basis.len() {
        return Err(Error::InvalidInput(format!("need ψ_{m} but basis has {} functions", basis.len())));
    }
    let n = 10 * m.max(1);
    let f = |x: f64| basis.psi_t::<f64>(m, x);
    let mut pos = Vec::with_capacity(m / 2);
    let mut x0 = 0.0f64;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = i as f64 / n as f64;
        let f1 = f(x1);
        if (f0 < 0.0 && f1 > 0.0) || (f0 > 0.0 && f1 < 0.0) {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            let mut r = Dd::from_f64(0.5 * (a + b));
            for _ in 0..2 {
                let (p, d, _) = basis.psi_d2::<Dd>(m, r);
                if d.hi == 0.0 {
                    break;
                }
                r -= p / d;
            }
            pos.push(r);
        }
        x0 = x1;
        f0 = f1;
    }
    if pos.len() != m / 2 {
        return Err(Error::NoConvergence(format!(
            "bracketed {} positive roots of ψ_{m}, expected {}",
            pos.len(),
            m / 2
        )));
    }
    let mut nodes: Vec<Dd> = pos.iter().rev().map(|&r| -r).collect();
    if m % 2 == 1 {
        nodes.push(Dd::ZERO);
    }
    nodes.extend(pos.iter().copied());
    Ok(nodes)
}

/// Weights for the given nodes from the exactness system on ψ_0..ψ_{M−1},
/// symmetrized by averaging mirror pairs.
pub fn prolate_weights(basis: &ProlateBasis, nodes: &[Dd]) -> Result<Vec<Dd>> {
    let m = nodes.len();
    if m > basis.len() {
        return Err(Error::InvalidInput("basis shorter than the node count".into()));
    }
    let cols: Vec<Vec<Dd>> = nodes.iter().map(|&t| basis.psi_all::<Dd>(t)).collect();
    let a = Mat::from_fn(m, m, |j, k| cols[k][j]);
    let psi0 = basis.psi_all::<Dd>(Dd::ZERO);
    let rhs: Vec<Dd> = (0..m).map(|j| basis.lambda(j).re * psi0[j]).collect();
    let w = Lu::new(&a)?.solve(&rhs);
    let mut sym = w.clone();
    for k in 0..m {
        sym[k] = (w[k] + w[m - 1 - k]).mul_f64(0.5);
    }
    if sym.iter().any(|v| v.hi <= 0.0 || !v.is_finite()) {
        return Err(Error::Singular("exactness system produced a non-positive weight".into()));
    }
    Ok(sym)
}

/// Basis large enough for nodes up to `m_max`.
pub fn basis_for(c_quad: f64, m_max: usize) -> Result<ProlateBasis> {
    ProlateBasis::build_cached(0.5 * c_quad, m_max + 1, Precision::Extended)
}

/// The M-node rule at bandlimit `c_quad`; `eps_quad` is set to the measured
/// residual.
pub fn build_with_m(c_quad: f64, m: usize) -> Result<QuadratureRule> {
    let basis = basis_for(c_quad, m)?;
    rule_with_basis(&basis, c_quad, m, 0.0)
}

fn rule_with_basis(basis: &ProlateBasis, c_quad: f64, m: usize, eps_quad: f64) -> Result<QuadratureRule> {
    let nodes = prolate_roots(basis, m)?;
    let weights = prolate_weights(basis, &nodes)?;
    let mut rule = QuadratureRule { c_quad, eps_quad, nodes, weights, verified_error: f64::NAN };
    if eps_quad == 0.0 {
        rule.verified_error = rule.residual(VERIFY_GRID, Precision::Extended);
        rule.eps_quad = rule.verified_error;
    } else {
        rule.verify(VERIFY_GRID);
    }
    Ok(rule)
}

fn validate(c: f64, eps: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("bandlimit must be positive, got {c}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("accuracy must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// Rule for bandlimit `c_quad` at accuracy `eps_quad`.
///
/// M grows in steps of 2 from ⌈c_quad/π⌉ until the ψ^{c_quad/2} basis on the
/// nodes interpolates e^{ibx}, |b| ≤ c_quad/2, to `eps_quad`; that is the
/// use the rule is built for, and it implies the exactness residual bound,
/// which is then verified on the 10⁴ grid.
pub fn build_quadrature(c_quad: f64, eps_quad: f64) -> Result<QuadratureRule> {
    build_paired(0.5 * c_quad, eps_quad).map(|(rule, _)| rule)
}

/// As [`build_quadrature`] at bandlimit 2c, also returning the basis at c.
pub fn build_paired(c: f64, eps: f64) -> Result<(QuadratureRule, ProlateBasis)> {
    validate(c, eps)?;
    let c_quad = 2.0 * c;
    let m0 = start_m(c_quad);
    let m_cap = m0 + 80;
    let basis = basis_for(c_quad, m_cap + 1)?;
    let mut m = m0;
    while m <= m_cap {
        let nodes = prolate_roots(&basis, m)?;
        if interpolation_error(&basis, &nodes, eps)? <= eps {
            let weights = prolate_weights(&basis, &nodes)?;
            let mut rule = QuadratureRule { c_quad, eps_quad: eps, nodes, weights, verified_error: f64::NAN };
            if rule.verify(VERIFY_GRID) <= eps {
                return Ok((rule, basis));
            }
        }
        m += 2;
    }
    Err(Error::NoConvergence(format!("no M ≤ {m_cap} reaches {eps:e} at bandlimit {c_quad}")))
}

/// Initial node count: the plateau length c_quad/π, rounded up to even.
fn start_m(c_quad: f64) -> usize {
    let m = (c_quad / std::f64::consts::PI).ceil() as usize;
    (m + m % 2).max(2)
}

/// Largest error over |b| ≤ c and an x-grid on [−1,1] of interpolating
/// e^{ibx} with ψ_0^c..ψ_{M−1}^c on the given nodes. Evaluated in double-
/// double when `target` is below what standard precision can resolve.
pub fn interpolation_error(basis: &ProlateBasis, nodes: &[Dd], target: f64) -> Result<f64> {
    if target < 1e-13 {
        interpolation_error_in::<Dd>(basis, nodes, 48, 400)
    } else {
        interpolation_error_in::<f64>(basis, nodes, 48, 400)
    }
}

pub fn interpolation_error_in<T: Real>(basis: &ProlateBasis, nodes: &[Dd], n_b: usize, n_x: usize) -> Result<f64>
where
    T: crate::linalg::Scalar,
{
    let m = nodes.len();
    let c = T::from_f64(basis.c());
    let a = Mat::from_fn(m, m, |k, j| basis.psi_t::<Dd>(j, nodes[k]));
    // row k of a is ψ_j(τ_k); R_k(x) = Σ_j (a⁻¹)_{jk} ψ_j(x)
    let inv = inverse(&a)?.map(T::from_dd);
    let t: Vec<T> = nodes.iter().map(|&v| T::from_dd(v)).collect();
    let mut worst = 0.0f64;
    for ix in 0..=n_x {
        let x = T::from_f64(-1.0) + T::from_f64(2.0 * ix as f64) / T::from_f64(n_x as f64);
        let psi = basis.psi_all::<T>(x);
        let r: Vec<T> = (0..m)
            .map(|k| (0..m).fold(T::zero(), |acc, j| acc + inv[(j, k)] * psi[j]))
            .collect();
        for ib in 0..=n_b {
            let b = c * T::from_f64(ib as f64) / T::from_f64(n_b as f64);
            let (mut re, mut im) = (T::zero(), T::zero());
            for k in 0..m {
                let (s, co) = (b * t[k]).sin_cos();
                re += co * r[k];
                im += s * r[k];
            }
            let (s, co) = (b * x).sin_cos();
            worst = worst.max((co - re).to_f64().hypot((s - im).to_f64()));
        }
    }
    Ok(worst)
}

/// c(M, ε): the largest quadrature bandlimit for which [`build_quadrature`]
/// would settle on M nodes, i.e. twice the largest c at which the roots of
/// ψ_M^c interpolate to `eps` (bisection to relative width `rel_tol`).
pub fn bandlimit_for(m: usize, eps: f64, rel_tol: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    let ok = |c: f64| -> Result<bool> {
        let basis = ProlateBasis::build(c, m + 1, Precision::Extended)?;
        let nodes = prolate_roots(&basis, m)?;
        Ok(interpolation_error(&basis, &nodes, eps)? <= eps)
    };
    let (mut lo, mut hi) = (0.5, 0.5 * pi * m as f64);
    if !ok(lo)? {
        return Err(Error::NoConvergence(format!("{m} nodes miss {eps:e} even at c = {lo}")));
    }
    while ok(hi)? {
        lo = hi;
        hi *= 1.25;
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(2.0 * lo)
}

/// Gauss–Legendre rule packaged as a quadrature with the largest bandlimit
/// it integrates to `eps`.
pub fn gauss_legendre_rule(m: usize, eps: f64) -> QuadratureRule {
    let (nodes, weights) = gauss_legendre(m);
    let mut rule = QuadratureRule { c_quad: 1.0, eps_quad: eps, nodes, weights, verified_error: f64::NAN };
    let ok = |r: &mut QuadratureRule, c: f64| {
        r.c_quad = c;
        r.residual(4000, Precision::Standard) <= eps
    };
    let (mut lo, mut hi) = (0.5 * m as f64, 4.0 * m as f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(&mut rule, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rule.c_quad = lo;
    rule.verified_error = rule.residual(VERIFY_GRID, Precision::Standard);
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bandlimit_tends_to_gauss_legendre() {
        let rule = build_with_m(0.1, 16).unwrap();
        let (gl, _) = gauss_legendre(16);
        for (a, b) in rule.nodes.iter().zip(&gl) {
            assert!((*a - *b).abs().to_f64() < 1e-6);
        }
    }

    #[test]
    fn symmetric_positive_and_normalized() {
        let rule = build_quadrature(20.0, 1e-12).unwrap();
        let m = rule.m();
        for k in 0..m {
            assert_eq!(rule.nodes[k], -rule.nodes[m - 1 - k]);
            assert_eq!(rule.weights[k], rule.weights[m - 1 - k]);
            assert!(rule.weights[k].hi > 0.0);
        }
        assert!((rule.weight_sum().to_f64() - 2.0).abs() < 1e-13);
        assert!(rule.verified_error <= 1e-12);
    }

    #[test]
    fn uniform_ratio_is_one() {
        assert!((node_ratio(&[-0.75, -0.25, 0.25, 0.75]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let rule = build_quadrature(10.0, 1e-10).unwrap();
        let js = rule.to_json();
        let back = QuadratureRule::from_json(&js).unwrap();
        assert_eq!(back.m(), rule.m());
        for (a, b) in back.nodes.iter().zip(&rule.nodes) {
            assert!((*a - *b).abs().to_f64() < 1e-31);
        }
    }
}
