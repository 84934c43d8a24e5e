//! Legendre polynomials in the L²-normalized form P̄_n = sqrt((2n+1)/2) P_n
//! and Gauss–Legendre rules.

use crate::dd::Dd;
use crate::real::Real;

/// Recurrence coefficients for P̄_{n+1} = a_n x P̄_n − b_n P̄_{n−1}.
#[derive(Clone, Debug)]
pub struct NormLegendre {
    pub a: Vec<Dd>,
    pub b: Vec<Dd>,
    /// sqrt((2n+1)/2), the value P̄_n(1).
    pub s: Vec<Dd>,
    a64: Vec<f64>,
    b64: Vec<f64>,
}

impl NormLegendre {
    pub fn new(k: usize) -> Self {
        let mut a = Vec::with_capacity(k);
        let mut b = Vec::with_capacity(k);
        let mut s = Vec::with_capacity(k);
        for n in 0..k {
            let nf = n as f64;
            let an = (Dd::from_f64(2.0 * nf + 1.0) * Dd::from_f64(2.0 * nf + 3.0)).sqrt() / Dd::from_f64(nf + 1.0);
            let bn = if n == 0 {
                Dd::ZERO
            } else {
                (Dd::from_f64(2.0 * nf + 3.0) / Dd::from_f64(2.0 * nf - 1.0)).sqrt() * Dd::from_f64(nf) / Dd::from_f64(nf + 1.0)
            };
            a.push(an);
            b.push(bn);
            s.push((Dd::from_f64(nf + 0.5)).sqrt());
        }
        let a64 = a.iter().map(|v| v.to_f64()).collect();
        let b64 = b.iter().map(|v| v.to_f64()).collect();
        NormLegendre { a, b, s, a64, b64 }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    fn coeff<T: Real>(&self, n: usize) -> (T, T) {
        if std::any::TypeId::of::<T>() == std::any::TypeId::of::<f64>() {
            (T::from_f64(self.a64[n]), T::from_f64(self.b64[n]))
        } else {
            (T::from_dd(self.a[n]), T::from_dd(self.b[n]))
        }
    }

    /// Values P̄_0(x)..P̄_{K−1}(x).
    pub fn values<T: Real>(&self, x: T) -> Vec<T> {
        let k = self.len();
        let mut p = Vec::with_capacity(k);
        if k == 0 {
            return p;
        }
        p.push(T::from_dd(self.s[0]));
        if k == 1 {
            return p;
        }
        let (a0, _) = self.coeff::<T>(0);
        p.push(a0 * x * p[0]);
        for n in 1..k - 1 {
            let (an, bn) = self.coeff::<T>(n);
            let v = an * x * p[n] - bn * p[n - 1];
            p.push(v);
        }
        p
    }

    /// Values and first two derivatives of P̄_n at x.
    pub fn values_d2<T: Real>(&self, x: T) -> (Vec<T>, Vec<T>, Vec<T>) {
        let p = self.values(x);
        let k = p.len();
        let mut d1 = vec![T::zero(); k];
        let mut d2 = vec![T::zero(); k];
        // P̄'_{n+1} = sqrt((2n+3)/(2n−1)) P̄'_{n−1} + sqrt((2n+1)(2n+3)) P̄_n
        for n in 0..k.saturating_sub(1) {
            let nf = n as f64;
            let c2 = T::from_f64(2.0 * nf + 3.0);
            let prev1 = if n >= 1 { d1[n - 1] } else { T::zero() };
            let prev2 = if n >= 1 { d2[n - 1] } else { T::zero() };
            let r = if n >= 1 { (c2 / T::from_f64(2.0 * nf - 1.0)).sqrt() } else { T::zero() };
            let q = (T::from_f64(2.0 * nf + 1.0) * c2).sqrt();
            d1[n + 1] = r * prev1 + q * p[n];
            d2[n + 1] = r * prev2 + q * d1[n];
        }
        (p, d1, d2)
    }

    /// Primitives ∫_{−1}^{x} P̄_n, n = 0..K−1.
    pub fn primitives<T: Real>(&self, x: T) -> Vec<T> {
        let k = self.len();
        let mut p = self.values(x);
        if k == 0 {
            return p;
        }
        // one extra degree, P̄_K
        let n = (k - 1) as f64;
        let an = (T::from_f64(2.0 * n + 1.0) * T::from_f64(2.0 * n + 3.0)).sqrt() / T::from_f64(n + 1.0);
        let next = if k == 1 {
            an * x * p[0]
        } else {
            let bn = (T::from_f64(2.0 * n + 3.0) / T::from_f64(2.0 * n - 1.0)).sqrt() * T::from_f64(n) / T::from_f64(n + 1.0);
            an * x * p[k - 1] - bn * p[k - 2]
        };
        p.push(next);
        let sq = |m: usize| T::from_f64(m as f64 + 0.5).sqrt();
        let mut out = Vec::with_capacity(k);
        for n in 0..k {
            if n == 0 {
                out.push(T::from_dd(self.s[0]) * (x + T::one()));
            } else {
                // s_n (P̄_{n+1}/s_{n+1} − P̄_{n−1}/s_{n−1}) / (2n+1)
                let v = sq(n) * (p[n + 1] / sq(n + 1) - p[n - 1] / sq(n - 1)) / T::from_f64(2.0 * n as f64 + 1.0);
                out.push(v);
            }
        }
        out
    }
}

/// Ordinary Legendre P_n(x) and P_n'(x) by the three-term recurrence.
pub fn legendre_p<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = (T::from_f64(2.0 * kf + 1.0) * x * p1 - T::from_f64(kf) * p0) / T::from_f64(kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    // (1 − x²) P_n' = n (P_{n−1} − x P_n)
    let dp = T::from_f64(n as f64) * (p0 - x * p1) / (T::one() - x * x);
    (p1, dp)
}

/// n-point Gauss–Legendre rule on [−1,1] in double-double, ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<Dd>, Vec<Dd>) {
    let mut nodes = vec![Dd::ZERO; n];
    let mut weights = vec![Dd::ZERO; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut x = guess;
        for _ in 0..100 {
            let (p, dp) = legendre_p::<f64>(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut xd = Dd::from_f64(x);
        for _ in 0..3 {
            let (p, dp) = legendre_p::<Dd>(n, xd);
            xd -= p / dp;
        }
        let (_, dp) = legendre_p::<Dd>(n, xd);
        let w = Dd::from_f64(2.0) / ((Dd::ONE - xd.sqr()) * dp.sqr());
        nodes[n - 1 - i] = xd;
        weights[n - 1 - i] = w;
        nodes[i] = -xd;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = Dd::ZERO;
    }
    (nodes, weights)
}

/// Same rule in standard precision.
pub fn gauss_legendre_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|v| v.to_f64()).collect(), w.iter().map(|v| v.to_f64()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_values_match_rodrigues_low_degree() {
        let leg = NormLegendre::new(5);
        let x = 0.3f64;
        let p = leg.values(x);
        let raw = [1.0, x, 0.5 * (3.0 * x * x - 1.0), 0.5 * (5.0 * x * x * x - 3.0 * x)];
        for n in 0..4 {
            let want = ((2.0 * n as f64 + 1.0) / 2.0).sqrt() * raw[n];
            assert!((p[n] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let leg = NormLegendre::new(12);
        let x = 0.37f64;
        let h = 1e-6;
        let (_, d1, d2) = leg.values_d2(x);
        let pp = leg.values(x + h);
        let pm = leg.values(x - h);
        let p0 = leg.values(x);
        for n in 0..12 {
            assert!((d1[n] - (pp[n] - pm[n]) / (2.0 * h)).abs() < 1e-6 * (1.0 + d1[n].abs()));
            assert!((d2[n] - (pp[n] - 2.0 * p0[n] + pm[n]) / (h * h)).abs() < 1e-3 * (1.0 + d2[n].abs()));
        }
    }

    #[test]
    fn primitive_vanishes_at_left_end_and_integrates() {
        let leg = NormLegendre::new(10);
        let prim = leg.primitives(Dd::from_f64(-1.0));
        for v in prim {
            assert!(v.abs().to_f64() < 1e-30);
        }
        let p1 = leg.primitives(1.0f64);
        // ∫P̄_0 = sqrt(2), all others vanish
        assert!((p1[0] - 2f64.sqrt()).abs() < 1e-15);
        for v in &p1[1..] {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let s: Dd = w.iter().copied().sum();
        assert!((s - Dd::from_f64(2.0)).abs().to_f64() < 1e-30);
        // ∫ x^38 = 2/39
        let m: Dd = x.iter().zip(&w).map(|(xi, wi)| xi.powi(38) * *wi).sum();
        assert!((m - Dd::from_f64(2.0) / Dd::from_f64(39.0)).abs().to_f64() < 1e-30);
        for i in 0..20 {
            assert_eq!(x[i], -x[19 - i]);
        }
        let (x3, _) = gauss_legendre(3);
        assert!((x3[2].to_f64() - (0.6f64).sqrt()).abs() < 1e-16);
    }
}
