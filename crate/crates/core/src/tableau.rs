//! Butcher tableau (nodes, weights, integration matrix S) of the band-limited
//! collocation IRK scheme, by three constructions, plus a Gauss–Legendre
//! tableau for comparison.
//!
//! Every band-limited construction ends with the same projection onto the
//! symplectic set: with P = diag(w) S, the symmetric part of P is replaced by
//! w wᵀ/2 and the antisymmetric part is kept. For the collocation route this
//! is exactly S = T + A diag(w) with A the antisymmetrized solve.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::basis::{exp_primitive, InterpBasis, Route};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::legendre::gauss_legendre;
use crate::linalg::{Lu, Mat};
use crate::prolate::{Precision, ProlateBasis};
use crate::quadrature::{build_paired, build_with_m, QuadratureRule};
use crate::real::Real;

type Cdd = Complex<Dd>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[value(name = "collocation", alias = "collocation-split")]
    CollocationSplit,
    ExactPswf,
    ApproxPswf,
    GaussLegendre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interval {
    #[serde(rename = "[-1,1]")]
    Symmetric,
    #[serde(rename = "[0,1]")]
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub symplectic_residual: f64,
    /// Absent for the Gauss–Legendre tableau, which has no bandlimit.
    pub collocation_residual: Option<f64>,
    pub min_eig_real_part: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tableau {
    pub method: Method,
    pub interval: Interval,
    pub c: f64,
    pub eps: f64,
    pub nodes: Vec<Dd>,
    pub weights: Vec<Dd>,
    pub s: Mat<Dd>,
    pub certificates: Certificates,
}

impl Tableau {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_f64(&self) -> Vec<f64> {
        self.nodes.iter().map(|v| v.to_f64()).collect()
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|v| v.to_f64()).collect()
    }

    pub fn s_f64(&self) -> Mat<f64> {
        self.s.map(|v| v.to_f64())
    }

    /// The same tableau on [−1,1] (identity if already there).
    pub fn to_symmetric(&self) -> Tableau {
        match self.interval {
            Interval::Symmetric => self.clone(),
            Interval::Unit => {
                let mut t = self.clone();
                t.interval = Interval::Symmetric;
                t.nodes = self.nodes.iter().map(|&x| x.mul_f64(2.0) - Dd::ONE).collect();
                t.weights = self.weights.iter().map(|&w| w.mul_f64(2.0)).collect();
                t.s = self.s.map(|v| v.mul_f64(2.0));
                t
            }
        }
    }

    /// Affine image on [0,1]: τ → (τ+1)/2, w → w/2, S → S/2. Certificates
    /// are recomputed on the mapped data.
    pub fn rescale_to_unit(&self) -> Result<Tableau> {
        if self.interval == Interval::Unit {
            return Ok(self.clone());
        }
        let mut t = self.clone();
        t.interval = Interval::Unit;
        t.nodes = self.nodes.iter().map(|&x| (x + Dd::ONE).mul_f64(0.5)).collect();
        t.weights = self.weights.iter().map(|&w| w.mul_f64(0.5)).collect();
        t.s = self.s.map(|v| v.mul_f64(0.5));
        t.certify()?;
        Ok(t)
    }

    /// Recomputes all certificates from the stored data.
    pub fn certify(&mut self) -> Result<()> {
        self.certificates = Certificates {
            symplectic_residual: symplectic_residual(self),
            collocation_residual: if self.method == Method::GaussLegendre { None } else { Some(collocation_residual(self)) },
            min_eig_real_part: crate::stability::min_real_part(&self.to_symmetric().s)?,
        };
        Ok(())
    }

    pub fn to_json(&self) -> TableauJson {
        let s36 = |v: &Dd| v.to_sci_string(36);
        TableauJson {
            method: self.method,
            interval: self.interval,
            c: self.c,
            eps: self.eps,
            m: self.m(),
            nodes: self.nodes.iter().map(s36).collect(),
            weights: self.weights.iter().map(s36).collect(),
            s: (0..self.m()).map(|k| self.s.row(k).iter().map(s36).collect()).collect(),
            certificates: self.certificates,
        }
    }

    pub fn from_json(js: &TableauJson) -> Result<Tableau> {
        let parse = |v: &str| v.parse::<Dd>().map_err(|e| Error::InvalidInput(e.to_string()));
        let m = js.m;
        if js.nodes.len() != m || js.weights.len() != m || js.s.len() != m || js.s.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("tableau JSON: array shapes disagree with M".into()));
        }
        let nodes = js.nodes.iter().map(|v| parse(v)).collect::<Result<Vec<_>>>()?;
        let weights = js.weights.iter().map(|v| parse(v)).collect::<Result<Vec<_>>>()?;
        let mut s = Mat::zeros(m, m);
        for k in 0..m {
            for j in 0..m {
                s[(k, j)] = parse(&js.s[k][j])?;
            }
        }
        Ok(Tableau {
            method: js.method,
            interval: js.interval,
            c: js.c,
            eps: js.eps,
            nodes,
            weights,
            s,
            certificates: js.certificates,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableauJson {
    pub method: Method,
    pub interval: Interval,
    pub c: f64,
    pub eps: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub nodes: Vec<String>,
    pub weights: Vec<String>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<String>>,
    pub certificates: Certificates,
}

/// max_{k,j} |w_k S_kj + w_j S_jk − w_k w_j|, in double-double.
pub fn symplectic_residual(tab: &Tableau) -> f64 {
    let m = tab.m();
    let w = &tab.weights;
    let mut worst = 0.0f64;
    for k in 0..m {
        for j in 0..m {
            let v = w[k] * tab.s[(k, j)] + w[j] * tab.s[(j, k)] - w[k] * w[j];
            worst = worst.max(v.abs().to_f64());
        }
    }
    worst
}

/// max_{m,k} |(e^{icτ_mτ_k} − e^{−icτ_m})/(icτ_m) − Σ_j S_kj e^{icτ_mτ_j}| on
/// [−1,1], in double-double; the τ_m = 0 column reads (τ_k + 1) − Σ_j S_kj.
pub fn collocation_residual(tab: &Tableau) -> f64 {
    let t = tab.to_symmetric();
    let m = t.m();
    let c = Dd::from_f64(t.c);
    let mut worst = 0.0f64;
    for mm in 0..m {
        let a = c * t.nodes[mm];
        let e: Vec<Cdd> = t.nodes.iter().map(|&tj| (a * tj).cis()).collect();
        for k in 0..m {
            let mut s = exp_primitive(a, t.nodes[k]);
            for j in 0..m {
                s -= e[j] * t.s[(k, j)];
            }
            worst = worst.max(s.re.to_f64().hypot(s.im.to_f64()));
        }
    }
    worst
}

/// S from P = diag(w) S after replacing the symmetric part of P by w wᵀ/2.
pub fn symplectic_projection(w: &[Dd], p: &Mat<Dd>) -> Mat<Dd> {
    let m = w.len();
    Mat::from_fn(m, m, |k, l| {
        let anti = (p[(k, l)] - p[(l, k)]).mul_f64(0.5);
        ((w[k] * w[l]).mul_f64(0.5) + anti) / w[k]
    })
}

fn finish(method: Method, c: f64, eps: f64, nodes: Vec<Dd>, weights: Vec<Dd>, s: Mat<Dd>) -> Result<Tableau> {
    let mut tab = Tableau {
        method,
        interval: Interval::Symmetric,
        c,
        eps,
        nodes,
        weights,
        s,
        certificates: Certificates { symplectic_residual: f64::NAN, collocation_residual: None, min_eig_real_part: f64::NAN },
    };
    tab.certify()?;
    if let Some(res) = tab.certificates.collocation_residual {
        if !(res <= eps) {
            return Err(Error::Certificate(format!(
                "{method:?}: collocation residual {res:e} exceeds {eps:e}"
            )));
        }
    }
    Ok(tab)
}

/// Right-hand sides u_km, v_km of the split collocation system, computed
/// from the closed forms (v without the Σ T sin term, which cancels).
pub fn collocation_rhs(nodes: &[Dd], weights: &[Dd], c: f64) -> (Mat<Dd>, Mat<Dd>) {
    let m = nodes.len();
    let cd = Dd::from_f64(c);
    let t = sym_part(weights);
    let mut u = Mat::zeros(m, m);
    let mut v = Mat::zeros(m, m);
    for mm in 0..m {
        let a = cd * nodes[mm];
        let cosines: Vec<Dd> = nodes.iter().map(|&tj| (a * tj).cos()).collect();
        for k in 0..m {
            let tk = nodes[k];
            let amp = (tk + Dd::ONE) * (a * (tk + Dd::ONE).mul_f64(0.5)).sinc();
            let (s, co) = (a * (tk - Dd::ONE).mul_f64(0.5)).sin_cos();
            let tsum: Dd = (0..m).map(|j| t[(k, j)] * cosines[j]).sum();
            u[(k, mm)] = amp * co - tsum;
            v[(k, mm)] = amp * s;
        }
    }
    (u, v)
}

/// T_kj = w_k w_j/(w_k + w_j).
pub fn sym_part(w: &[Dd]) -> Mat<Dd> {
    let m = w.len();
    Mat::from_fn(m, m, |k, j| w[k] * w[j] / (w[k] + w[j]))
}

/// Collocation route: solve Σ_j Ã_kj w_j cas(cτ_mτ_j) = u_km + v_km for every
/// row k (one shared factorization of the cas matrix), antisymmetrize, and
/// form S = T + A diag(w).
pub fn build_collocation(rule: &QuadratureRule, c: f64, eps: f64) -> Result<Tableau> {
    let m = rule.m();
    let cd = Dd::from_f64(c);
    let (t_nodes, w) = (&rule.nodes, &rule.weights);
    let (u, v) = collocation_rhs(t_nodes, w, c);
    let cas = Mat::from_fn(m, m, |mm, j| {
        let (s, co) = (cd * t_nodes[mm] * t_nodes[j]).sin_cos();
        co + s
    });
    let lu = Lu::new(&cas)?;
    let mut a_tilde = Mat::zeros(m, m);
    for k in 0..m {
        let rhs: Vec<Dd> = (0..m).map(|mm| u[(k, mm)] + v[(k, mm)]).collect();
        let x = lu.solve(&rhs);
        for j in 0..m {
            a_tilde[(k, j)] = x[j] / w[j];
        }
    }
    let t = sym_part(w);
    let s = Mat::from_fn(m, m, |k, j| t[(k, j)] + (a_tilde[(k, j)] - a_tilde[(j, k)]).mul_f64(0.5) * w[j]);
    finish(Method::CollocationSplit, c, eps, t_nodes.clone(), w.clone(), s)
}

/// The integrals I_jj' = ∫ Φ_j ψ_j' for j, j' < M from the parity case
/// formulas; mixed-parity entries use the formula whose eigenvalue ratio
/// is below one in modulus and the partner follows from antisymmetry.
pub fn prolate_integrals(prolate: &ProlateBasis, m: usize) -> Mat<Dd> {
    let c = Dd::from_f64(prolate.c());
    let ic = Cdd::new(Dd::ZERO, c);
    let psi0 = prolate.psi_all::<Dd>(Dd::ZERO);
    // even count keeps y = 0 out of the node set
    let n = (prolate.k() + 9) & !1;
    let (x, wq) = gauss_legendre(n);
    // values on [−1,1] and on [0,1] (nodes (x+1)/2, weights w/2)
    let vals: Vec<Vec<Dd>> = x.iter().map(|&xi| prolate.psi_all::<Dd>(xi)).collect();
    let half_x: Vec<Dd> = x.iter().map(|&xi| (xi + Dd::ONE).mul_f64(0.5)).collect();
    let half_vals: Vec<Vec<Dd>> = half_x.iter().map(|&xi| prolate.psi_all::<Dd>(xi)).collect();
    let mut out = Mat::zeros(m, m);
    for j in (0..m).step_by(2) {
        for jp in (0..m).step_by(2) {
            let lj = prolate.lambda(j).re;
            let ljp = prolate.lambda(jp).re;
            out[(j, jp)] = (lj * ljp * psi0[j] * psi0[jp]).mul_f64(0.5);
        }
    }
    for j in (0..m).step_by(2) {
        for jp in (1..m).step_by(2) {
            let lj = prolate.lambda(j);
            let ljp = prolate.lambda(jp);
            // Q = ∫ ψ_j ψ_j'/y over [−1,1]; ψ_j' is odd so the integrand is smooth
            let q: Dd = (0..n).map(|g| wq[g] * vals[g][j] * vals[g][jp] / x[g]).sum();
            let i_jjp = if prolate.lambda_abs(jp) < prolate.lambda_abs(j) {
                (ljp / (ic * lj) * q).re
            } else {
                let z: Dd = (0..n).map(|g| wq[g] * half_vals[g][jp] / half_x[g]).sum::<Dd>().mul_f64(0.5);
                let y: Dd = (0..n).map(|g| wq[g] * half_vals[g][jp]).sum::<Dd>().mul_f64(0.5);
                let inner = Cdd::new(q - psi0[j].mul_f64(2.0) * z, Dd::ZERO) + ic * ljp.conj() * (psi0[j] * y);
                -(lj / (ic * ljp) * inner).re
            };
            out[(j, jp)] = i_jjp;
            out[(jp, j)] = -i_jjp;
        }
    }
    out
}

/// I_jj' by direct Gauss–Legendre integration of Φ_j ψ_j', used to check the
/// case formulas.
pub fn prolate_integrals_direct(prolate: &ProlateBasis, m: usize) -> Mat<Dd> {
    let n = prolate.k() + 8;
    let (x, wq) = gauss_legendre(n);
    let psi: Vec<Vec<Dd>> = x.iter().map(|&xi| prolate.psi_all::<Dd>(xi)).collect();
    let phi: Vec<Vec<Dd>> = x.iter().map(|&xi| prolate.phi_all::<Dd>(xi)).collect();
    Mat::from_fn(m, m, |j, jp| (0..n).map(|g| wq[g] * phi[g][j] * psi[g][jp]).sum())
}

/// Exact-PSWF route: w_k S_kl = Σ α_lj α_kj' I_jj', weights w_k = ∫R_k.
pub fn build_exact(basis: &InterpBasis, eps: f64) -> Result<Tableau> {
    let (Some(prolate), Some(alpha)) = (basis.prolate(), basis.alpha()) else {
        return Err(Error::InvalidInput("exact-PSWF tableau needs an exact-route basis".into()));
    };
    let m = basis.m();
    let i = prolate_integrals(prolate, m);
    // P = α Iᵀ αᵀ
    let p = alpha.matmul(&i.transpose()).matmul(&alpha.transpose());
    let w = basis.integral_weights();
    let s = symplectic_projection(&w, &p);
    finish(Method::ExactPswf, basis.c(), eps, basis.nodes().to_vec(), w, s)
}

/// G_jj' = ∫ e^{icτ_j x}(e^{icτ_j'x} − e^{−icτ_j'})/(icτ_j') dx in closed form,
/// with the τ_j' = 0 limit ∫ e^{icτ_j x}(x + 1) dx.
pub fn g_entry(c: Dd, tj: Dd, tjp: Dd) -> Cdd {
    let two = Dd::from_f64(2.0);
    let a = c * tj;
    if tjp.hi == 0.0 {
        // 2 sinc(a) + 2i j₁(a), j₁ the spherical Bessel function
        return Cdd::new(two * a.sinc(), two * bessel_j1(a));
    }
    let b = c * tjp;
    let num = Cdd::new(two * (a + b).sinc(), Dd::ZERO) - (-b).cis() * (two * a.sinc());
    num / Cdd::new(Dd::ZERO, b)
}

/// j₁(a) = (sin a − a cos a)/a², series near zero.
fn bessel_j1(a: Dd) -> Dd {
    if a.abs().to_f64() < 1e-2 {
        let a2 = a.sqr();
        let mut term = a / Dd::from_f64(3.0);
        let mut sum = term;
        for k in 1..12 {
            // ratio of consecutive series terms
            let kf = k as f64;
            term = -term * a2 / Dd::from_f64(2.0 * kf * (2.0 * kf + 3.0));
            sum += term;
        }
        sum
    } else {
        let (s, c) = a.sin_cos();
        (s - a * c) / a.sqr()
    }
}

/// Approximate-PSWF route: w_k S_kl = (E⁻¹ G E⁻¹)_kl. G is applied through
/// its Gauss–Legendre factorization G = A diag(ω) Bᵀ, A_jg = e^{icτ_j x_g},
/// B_jg = ∫_{−1}^{x_g} e^{icτ_j s} ds, so E⁻¹ acts on the vectors A, B (giving
/// R_k(x_g) and K_l(x_g)) rather than on G itself, whose rounding errors the
/// two factors of E⁻¹ would amplify by ‖E⁻¹‖².
pub fn build_approx(basis: &InterpBasis, eps: f64) -> Result<Tableau> {
    let Some(r) = basis.r() else {
        return Err(Error::InvalidInput("approx-PSWF tableau needs an approx-route basis".into()));
    };
    let m = basis.m();
    let c = Dd::from_f64(basis.c());
    let tau = basis.nodes();
    // the products have bandlimit 2c; this many points integrate them to dd
    let n = (2.0 * basis.c()) as usize / 2 + 60;
    let (x, wq) = gauss_legendre(n);
    let a = Mat::from_fn(m, n, |j, g| (c * tau[j] * x[g]).cis());
    let b = Mat::from_fn(m, n, |j, g| exp_primitive(c * tau[j], x[g]));
    let ra = r.matmul(&a);
    let rb = r.matmul(&b);
    let mut p = Mat::zeros(m, m);
    for k in 0..m {
        for l in 0..m {
            let mut s = Cdd::new(Dd::ZERO, Dd::ZERO);
            for g in 0..n {
                s += ra[(k, g)] * rb[(l, g)] * wq[g];
            }
            p[(k, l)] = s.re;
        }
    }
    let w = basis.integral_weights();
    let s = symplectic_projection(&w, &p);
    finish(Method::ApproxPswf, basis.c(), eps, tau.to_vec(), w, s)
}

/// w S by the closed-form G (no factorization); kept for comparison.
pub fn approx_ws_closed_form(basis: &InterpBasis) -> Option<Mat<Dd>> {
    let r = basis.r()?;
    let m = basis.m();
    let c = Dd::from_f64(basis.c());
    let tau = basis.nodes();
    let g = Mat::from_fn(m, m, |j, jp| g_entry(c, tau[j], tau[jp]));
    Some(r.matmul(&g).matmul(&r.transpose()).map(|z| z.re))
}

/// Gauss–Legendre tableau: S_kj = ∫_{−1}^{τ_k} ℓ_j with ℓ_j the Lagrange
/// polynomials on the nodes.
pub fn build_gauss_legendre(m: usize) -> Result<Tableau> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one stage".into()));
    }
    let (nodes, weights) = gauss_legendre(m);
    // barycentric weights
    let bw: Vec<Dd> = (0..m)
        .map(|j| {
            let mut p = Dd::ONE;
            for i in 0..m {
                if i != j {
                    p *= nodes[j] - nodes[i];
                }
            }
            Dd::ONE / p
        })
        .collect();
    let lagrange = |x: Dd| -> Vec<Dd> {
        let mut out = vec![Dd::ZERO; m];
        let mut den = Dd::ZERO;
        for j in 0..m {
            let d = x - nodes[j];
            if d.hi == 0.0 {
                out[j] = Dd::ONE;
                return out;
            }
            out[j] = bw[j] / d;
            den += out[j];
        }
        out.iter_mut().for_each(|v| *v /= den);
        out
    };
    let mut s = Mat::zeros(m, m);
    for k in 0..m {
        let half = (nodes[k] + Dd::ONE).mul_f64(0.5);
        for g in 0..m {
            let xg = half * (nodes[g] + Dd::ONE) - Dd::ONE;
            let l = lagrange(xg);
            for j in 0..m {
                s[(k, j)] += half * weights[g] * l[j];
            }
        }
    }
    finish(Method::GaussLegendre, 0.0, 0.0, nodes, weights, s)
}

/// Everything a tableau build needs, from (c, ε) and an optional node count.
pub struct TableauInputs {
    pub rule: QuadratureRule,
    pub prolate: ProlateBasis,
}

impl TableauInputs {
    /// With `m = None` the node count comes from the interpolation pairing
    /// at accuracy `eps`; otherwise the M-node rule at bandlimit 2c is used.
    pub fn new(c: f64, eps: f64, m: Option<usize>) -> Result<Self> {
        match m {
            None => {
                let (rule, _) = build_paired(c, eps)?;
                let prolate = ProlateBasis::build_cached(c, rule.m() + 1, Precision::Extended)?;
                Ok(TableauInputs { rule, prolate })
            }
            Some(m) => {
                if m < 2 {
                    return Err(Error::InvalidInput("need at least two nodes".into()));
                }
                let rule = build_with_m(2.0 * c, m)?;
                let prolate = ProlateBasis::build_cached(c, m + 1, Precision::Extended)?;
                Ok(TableauInputs { rule, prolate })
            }
        }
    }

    pub fn build(&self, method: Method, eps: f64) -> Result<Tableau> {
        let c = self.prolate.c();
        match method {
            Method::CollocationSplit => build_collocation(&self.rule, c, eps),
            Method::ExactPswf => build_exact(&InterpBasis::exact(&self.prolate, &self.rule)?, eps),
            Method::ApproxPswf => build_approx(&InterpBasis::approx(&self.rule, c)?, eps),
            Method::GaussLegendre => build_gauss_legendre(self.rule.m()),
        }
    }
}

/// One-call construction on [−1,1].
pub fn build_tableau(c: f64, eps: f64, m: Option<usize>, method: Method) -> Result<Tableau> {
    if method == Method::GaussLegendre {
        let m = m.ok_or_else(|| Error::InvalidInput("Gauss–Legendre tableau needs M".into()))?;
        return build_gauss_legendre(m);
    }
    if !(c > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("need c > 0 and eps > 0, got c = {c}, eps = {eps}")));
    }
    TableauInputs::new(c, eps, m)?.build(method, eps)
}

/// Largest entrywise difference of two tableaus' S.
pub fn max_s_difference(a: &Tableau, b: &Tableau) -> f64 {
    a.s.data.iter().zip(&b.s.data).map(|(x, y)| (*x - *y).abs().to_f64()).fold(0.0, f64::max)
}

impl Route {
    pub fn method(self) -> Method {
        match self {
            Route::ExactPswf => Method::ExactPswf,
            Route::ApproxPswf => Method::ApproxPswf,
        }
    }
}
