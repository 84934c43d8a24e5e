//! Spherical-harmonic gravity field with fully normalized (4π) coefficients.
//!
//! V = (μ/r)(1 + Σ_{n=2}^{N} (R/r)^n Σ_m P̄_n^m(sin φ)(C̄_nm cos mλ + S̄_nm sin mλ))
//!
//! with geocentric latitude φ and longitude λ. The acceleration is the
//! gradient of V (attractive for the central term). Sectoral and tesseral
//! terms are carried as Q_n^m = P̄_n^m / cos φ, which removes every 1/cos φ
//! from the gradient, so the poles need no special handling.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Geocentric gravitational constant of EGM96 / WGS84, km³/s².
pub const MU_EARTH: f64 = 398600.4418;
/// Equatorial radius of WGS84, km.
pub const R_EARTH: f64 = 6378.137;

/// Evaluation closer than this fraction of R is rejected.
pub const MIN_RADIUS_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct GravityModel {
    pub mu: f64,
    pub radius: f64,
    pub n_max: usize,
    /// Triangular storage, index n(n+1)/2 + m; entries for n < 2 stay zero.
    cbar: Vec<f64>,
    sbar: Vec<f64>,
}

#[inline]
fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

impl GravityModel {
    /// Central field only.
    pub fn point_mass(mu: f64, radius: f64) -> Self {
        GravityModel { mu, radius, n_max: 0, cbar: vec![0.0], sbar: vec![0.0] }
    }

    pub fn new(mu: f64, radius: f64, n_max: usize) -> Result<Self> {
        if !(mu > 0.0 && radius > 0.0 && mu.is_finite() && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("need mu > 0 and R > 0, got {mu}, {radius}")));
        }
        let len = tri(n_max, n_max) + 1;
        Ok(GravityModel { mu, radius, n_max, cbar: vec![0.0; len], sbar: vec![0.0; len] })
    }

    /// The EGM96 degree-2 terms.
    pub fn egm96_degree2() -> Self {
        let mut g = GravityModel::new(MU_EARTH, R_EARTH, 2).expect("valid constants");
        g.set(2, 0, -0.484165371736e-3, 0.0).unwrap();
        g.set(2, 2, 0.243914352398e-5, -0.140016683654e-5).unwrap();
        g
    }

    pub fn set(&mut self, n: usize, m: usize, c: f64, s: f64) -> Result<()> {
        if n < 2 || m > n || n > self.n_max {
            return Err(Error::InvalidInput(format!("coefficient ({n}, {m}) outside 2 ≤ n ≤ {}, m ≤ n", self.n_max)));
        }
        if !(c.is_finite() && s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coefficient at ({n}, {m})")));
        }
        self.cbar[tri(n, m)] = c;
        self.sbar[tri(n, m)] = s;
        Ok(())
    }

    pub fn c(&self, n: usize, m: usize) -> f64 {
        if n > self.n_max || m > n {
            0.0
        } else {
            self.cbar[tri(n, m)]
        }
    }

    pub fn s(&self, n: usize, m: usize) -> f64 {
        if n > self.n_max || m > n {
            0.0
        } else {
            self.sbar[tri(n, m)]
        }
    }

    /// Copy keeping degrees ≤ n.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_max);
        let len = tri(n, n) + 1;
        GravityModel {
            mu: self.mu,
            radius: self.radius,
            n_max: n,
            cbar: self.cbar[..len].to_vec(),
            sbar: self.sbar[..len].to_vec(),
        }
    }

    /// Whether every m ≠ 0 coefficient vanishes.
    pub fn is_zonal(&self) -> bool {
        (2..=self.n_max).all(|n| (1..=n).all(|m| self.c(n, m) == 0.0 && self.s(n, m) == 0.0))
    }

    /// Reads the text format:
    ///
    /// ```text
    /// # comment
    /// mu R N_max
    /// n m Cbar Sbar
    /// ...
    /// ```
    ///
    /// Fortran `D` exponents are accepted. Missing (n, m) default to zero.
    pub fn load<R: BufRead>(src: R) -> Result<Self> {
        let mut model: Option<GravityModel> = None;
        for (i, line) in src.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                let f = fields.get(k).ok_or(Error::Parse { line: lineno, msg: format!("expected at least {} fields", k + 1) })?;
                f.replace(['D', 'd'], "e")
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line: lineno, msg: format!("bad number {f:?}: {e}") })
            };
            let int = |k: usize| -> Result<usize> {
                let f = fields.get(k).ok_or(Error::Parse { line: lineno, msg: format!("expected at least {} fields", k + 1) })?;
                f.parse::<usize>().map_err(|e| Error::Parse { line: lineno, msg: format!("bad index {f:?}: {e}") })
            };
            match model.as_mut() {
                None => {
                    if fields.len() != 3 {
                        return Err(Error::Parse { line: lineno, msg: "header must be \"mu R N_max\"".into() });
                    }
                    model = Some(
                        GravityModel::new(num(0)?, num(1)?, int(2)?)
                            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?,
                    );
                }
                Some(g) => {
                    if fields.len() != 4 {
                        return Err(Error::Parse { line: lineno, msg: format!("expected \"n m C S\", got {} fields", fields.len()) });
                    }
                    let (n, m) = (int(0)?, int(1)?);
                    g.set(n, m, num(2)?, num(3)?).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
                }
            }
        }
        model.ok_or(Error::Parse { line: 0, msg: "missing header".into() })
    }

    pub fn load_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        Self::load(std::io::BufReader::new(f))
    }

    /// Inverse of [`GravityModel::load`]; nonzero coefficients only.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:.17e} {:.17e} {}", self.mu, self.radius, self.n_max).unwrap();
        for n in 2..=self.n_max {
            for m in 0..=n {
                let (c, s) = (self.c(n, m), self.s(n, m));
                if c != 0.0 || s != 0.0 {
                    writeln!(out, "{n} {m} {c:.17e} {s:.17e}").unwrap();
                }
            }
        }
        out
    }

    fn check_point(&self, r: [f64; 3], n: usize) -> Result<(f64, usize)> {
        let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !(rn > 0.0) || !rn.is_finite() {
            return Err(Error::InvalidInput(format!("position {r:?} has no direction")));
        }
        let n = n.min(self.n_max);
        if n >= 2 && rn < MIN_RADIUS_FRACTION * self.radius {
            return Err(Error::InvalidInput(format!(
                "|r| = {rn} km is below {MIN_RADIUS_FRACTION}·R = {} km, where the series is not used",
                MIN_RADIUS_FRACTION * self.radius
            )));
        }
        Ok((rn, n))
    }

    /// Potential (km²/s²) truncated at degree `n` (0 or 1: central term).
    pub fn potential(&self, r: [f64; 3], n: usize) -> Result<f64> {
        let (rn, n) = self.check_point(r, n)?;
        if n < 2 {
            return Ok(self.mu / rn);
        }
        let geo = Geo::new(r, rn);
        let leg = Columns::new(n, geo.sin_phi, geo.cos_phi);
        let (cml, sml) = trig_multiples(n, geo.cos_lam, geo.sin_lam);
        let ratio = self.radius / rn;
        let mut sum = 0.0;
        let mut rp = ratio;
        for deg in 2..=n {
            rp *= ratio;
            let mut y = self.c(deg, 0) * leg.p0[deg];
            for m in 1..=deg {
                let p = geo.cos_phi * leg.q(deg, m);
                y += p * (self.c(deg, m) * cml[m] + self.s(deg, m) * sml[m]);
            }
            sum += rp * y;
        }
        Ok(self.mu / rn * (1.0 + sum))
    }

    /// ∇V (km/s²) truncated at degree `n`.
    pub fn acceleration(&self, r: [f64; 3], n: usize) -> Result<[f64; 3]> {
        let (rn, n) = self.check_point(r, n)?;
        let central = -self.mu / (rn * rn * rn);
        if n < 2 {
            return Ok([central * r[0], central * r[1], central * r[2]]);
        }
        let geo = Geo::new(r, rn);
        let (sp, cp) = (geo.sin_phi, geo.cos_phi);
        let leg = Columns::new(n, sp, cp);
        let (cml, sml) = trig_multiples(n, geo.cos_lam, geo.sin_lam);
        let ratio = self.radius / rn;
        // dV/dr, (1/r) dV/dφ, (1/(r cos φ)) dV/dλ, all without the μ/r² factor
        let (mut vr, mut vp, mut vl) = (0.0, 0.0, 0.0);
        let mut rp = ratio;
        for deg in 2..=n {
            rp *= ratio;
            let nf = deg as f64;
            let (mut y, mut yp, mut yl) = (0.0, 0.0, 0.0);
            // m = 0: dP̄_n^0/dφ = sqrt(n(n+1)/2) P̄_n^1
            let c0 = self.c(deg, 0);
            y += c0 * leg.p0[deg];
            yp += c0 * (nf * (nf + 1.0) / 2.0).sqrt() * cp * leg.q(deg, 1);
            for m in 1..=deg {
                let (c, s) = (self.c(deg, m), self.s(deg, m));
                if c == 0.0 && s == 0.0 {
                    continue;
                }
                let mf = m as f64;
                let q = leg.q(deg, m);
                let cs = c * cml[m] + s * sml[m];
                y += cp * q * cs;
                // dP̄_n^m/dφ = sqrt((n−m)(n+m+1)) P̄_n^{m+1} − m tan φ P̄_n^m
                let up = if m < deg { ((nf - mf) * (nf + mf + 1.0)).sqrt() * cp * leg.q(deg, m + 1) } else { 0.0 };
                yp += (up - mf * sp * q) * cs;
                yl += mf * q * (s * cml[m] - c * sml[m]);
            }
            vr -= (nf + 1.0) * rp * y;
            vp += rp * yp;
            vl += rp * yl;
        }
        let k = self.mu / (rn * rn);
        let vr = -k + k * vr;
        let (vp, vl) = (k * vp, k * vl);
        let (cl, sl) = (geo.cos_lam, geo.sin_lam);
        // r̂ = (cφ cλ, cφ sλ, sφ), φ̂ = (−sφ cλ, −sφ sλ, cφ), λ̂ = (−sλ, cλ, 0)
        Ok([
            vr * cp * cl - vp * sp * cl - vl * sl,
            vr * cp * sl - vp * sp * sl + vl * cl,
            vr * sp + vp * cp,
        ])
    }
}

struct Geo {
    sin_phi: f64,
    cos_phi: f64,
    cos_lam: f64,
    sin_lam: f64,
}

impl Geo {
    fn new(r: [f64; 3], rn: f64) -> Self {
        let rho = r[0].hypot(r[1]);
        let (cos_lam, sin_lam) = if rho > 0.0 { (r[0] / rho, r[1] / rho) } else { (1.0, 0.0) };
        Geo { sin_phi: r[2] / rn, cos_phi: rho / rn, cos_lam, sin_lam }
    }
}

/// cos mλ, sin mλ for m = 0..=n.
fn trig_multiples(n: usize, c1: f64, s1: f64) -> (Vec<f64>, Vec<f64>) {
    let mut c = vec![1.0; n + 1];
    let mut s = vec![0.0; n + 1];
    for m in 1..=n {
        c[m] = c[m - 1] * c1 - s[m - 1] * s1;
        s[m] = s[m - 1] * c1 + c[m - 1] * s1;
    }
    (c, s)
}

/// P̄_n^0 and Q_n^m = P̄_n^m / cos φ (m ≥ 1) up to degree n.
struct Columns {
    p0: Vec<f64>,
    /// triangular, index tri(n, m), m ≥ 1
    q: Vec<f64>,
}

impl Columns {
    fn new(nmax: usize, s: f64, c: f64) -> Self {
        let mut p0 = vec![0.0; nmax + 1];
        let mut q = vec![0.0; tri(nmax, nmax) + 1];
        column(0, nmax, s, 1.0, |n, v| p0[n] = v);
        let mut diag = 3f64.sqrt(); // Q_1^1
        for m in 1..=nmax {
            if m > 1 {
                let mf = m as f64;
                diag *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * c;
            }
            column(m, nmax, s, diag, |n, v| q[tri(n, m)] = v);
        }
        Columns { p0, q }
    }

    #[inline]
    fn q(&self, n: usize, m: usize) -> f64 {
        self.q[tri(n, m)]
    }
}

/// Fixed-order recursion from the diagonal value up to degree nmax.
fn column(m: usize, nmax: usize, s: f64, diag: f64, mut put: impl FnMut(usize, f64)) {
    let mf = m as f64;
    put(m, diag);
    if m == nmax {
        return;
    }
    let mut prev2 = diag;
    let mut prev1 = (2.0 * mf + 3.0).sqrt() * s * diag;
    put(m + 1, prev1);
    for n in m + 2..=nmax {
        let nf = n as f64;
        let a = ((2.0 * nf + 1.0) * (2.0 * nf - 1.0) / ((nf - mf) * (nf + mf))).sqrt();
        let b = ((2.0 * nf + 1.0) * (nf + mf - 1.0) * (nf - mf - 1.0) / ((nf - mf) * (nf + mf) * (2.0 * nf - 3.0))).sqrt();
        let v = a * s * prev1 - b * prev2;
        put(n, v);
        prev2 = prev1;
        prev1 = v;
    }
}

/// Fully normalized associated Legendre function P̄_n^m(s), s = sin φ,
/// with (1/2)∫_{−1}^{1} (P̄_n^m)² ds = 2 − δ_{m0}.
pub fn legendre_norm(n: usize, m: usize, s: f64) -> f64 {
    assert!(m <= n, "need m ≤ n");
    let c = (1.0 - s * s).max(0.0).sqrt();
    let mut diag = 1.0;
    for k in 1..=m {
        let kf = k as f64;
        diag *= if k == 1 { 3f64.sqrt() } else { ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() } * c;
    }
    let mut out = diag;
    column(m, n, s, diag, |k, v| {
        if k == n {
            out = v;
        }
    });
    out
}
