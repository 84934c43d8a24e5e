//! Double-double ("dd") arithmetic.
//!
//! A value is the unevaluated sum `hi + lo` of two `f64` with `|lo| <= ulp(hi)/2`,
//! which gives about 32 significant decimal digits. The kernels follow the
//! classical error-free transformations (two-sum, two-product via FMA).

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};
use std::str::FromStr;
use std::sync::OnceLock;

use num_traits::{Num, One, Zero};

#[derive(Clone, Copy, Default, Debug)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline(always)]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline(always)]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: 3.141_592_653_589_793e0,
        lo: 1.224_646_799_147_353_2e-16,
    };
    pub const FRAC_PI_2: Dd = Dd {
        hi: 1.570_796_326_794_896_6e0,
        lo: 6.123_233_995_736_766e-17,
    };
    // third component of pi/2, used only by argument reduction
    const FRAC_PI_2_TAIL: f64 = -1.497_384_904_859_169_8e-33;
    pub const EPSILON: f64 = 4.930_380_657_631_324e-32; // 2^-104

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Dd {
        Dd { hi, lo }
    }

    #[inline]
    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact sum of two doubles.
    #[inline]
    pub fn sum_f64(a: f64, b: f64) -> Dd {
        let (s, e) = two_sum(a, b);
        Dd { hi: s, lo: e }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn prod_f64(a: f64, b: f64) -> Dd {
        let (p, e) = two_prod(a, b);
        Dd { hi: p, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    #[inline]
    pub fn is_nan(self) -> bool {
        self.hi.is_nan() || self.lo.is_nan()
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn is_sign_negative(self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s1, s2 + self.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * b);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sqr(self) -> Dd {
        let (p1, p2) = two_prod(self.hi, self.hi);
        let p2 = p2 + 2.0 * self.hi * self.lo + self.lo * self.lo;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        if self.hi < 0.0 {
            return Dd::new(f64::NAN, f64::NAN);
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        Dd::from_f64(ax).add_f64((self - Dd::prod_f64(ax, ax)).hi * (x * 0.5))
    }

    pub fn floor(self) -> Dd {
        let hi = self.hi.floor();
        if hi == self.hi {
            let (h, l) = quick_two_sum(hi, self.lo.floor());
            Dd { hi: h, lo: l }
        } else {
            Dd { hi, lo: 0.0 }
        }
    }

    pub fn round(self) -> Dd {
        (self + Dd::from_f64(0.5)).floor()
    }

    pub fn trunc(self) -> Dd {
        if self.is_sign_negative() {
            -((-self).floor())
        } else {
            self.floor()
        }
    }

    pub fn powi(self, n: i32) -> Dd {
        if n == 0 {
            return Dd::ONE;
        }
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Dd::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.sqr();
            e >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }

    /// Simultaneous sine and cosine.
    pub fn sin_cos(self) -> (Dd, Dd) {
        if self.hi == 0.0 {
            return (Dd::ZERO, Dd::ONE);
        }
        if !self.is_finite() {
            return (Dd::new(f64::NAN, 0.0), Dd::new(f64::NAN, 0.0));
        }
        // r = x - k*pi/2 with a three-part pi/2
        let k = (self.hi / Dd::FRAC_PI_2.hi).round();
        let r = self - Dd::prod_f64(k, Dd::FRAC_PI_2.hi) - Dd::prod_f64(k, Dd::FRAC_PI_2.lo)
            - Dd::from_f64(k * Dd::FRAC_PI_2_TAIL);
        let (s, c) = sin_cos_taylor(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sin(self) -> Dd {
        self.sin_cos().0
    }

    pub fn cos(self) -> Dd {
        self.sin_cos().1
    }

    /// `10^e` to double-double accuracy.
    pub fn pow10(e: i32) -> Dd {
        Dd::from_f64(10.0).powi(e)
    }

    /// Scientific notation with `digits` significant digits.
    pub fn to_sci_string(self, digits: usize) -> String {
        let digits = digits.max(1);
        if self.is_nan() {
            return "NaN".into();
        }
        if !self.is_finite() {
            return if self.hi > 0.0 { "inf".into() } else { "-inf".into() };
        }
        if self.hi == 0.0 {
            return format!("0.{}e0", "0".repeat(digits - 1));
        }
        let neg = self.is_sign_negative();
        let x = self.abs();
        let mut e = x.hi.log10().floor() as i32;
        let mut r = x / Dd::pow10(e);
        if r.hi >= 10.0 {
            r = r / Dd::from_f64(10.0);
            e += 1;
        } else if r.hi < 1.0 {
            r = r * Dd::from_f64(10.0);
            e -= 1;
        }
        let mut ds: Vec<u8> = Vec::with_capacity(digits + 1);
        for _ in 0..=digits {
            let d = r.hi.floor().clamp(0.0, 9.0);
            ds.push(d as u8);
            r = (r - Dd::from_f64(d)) * Dd::from_f64(10.0);
        }
        // round half up on the guard digit
        let guard = ds.pop().unwrap_or(0);
        if guard >= 5 {
            let mut i = ds.len();
            loop {
                if i == 0 {
                    ds.insert(0, 1);
                    ds.pop();
                    e += 1;
                    break;
                }
                i -= 1;
                if ds[i] == 9 {
                    ds[i] = 0;
                } else {
                    ds[i] += 1;
                    break;
                }
            }
        }
        let mut s = String::with_capacity(digits + 8);
        if neg {
            s.push('-');
        }
        s.push((b'0' + ds[0]) as char);
        if ds.len() > 1 {
            s.push('.');
            for d in &ds[1..] {
                s.push((b'0' + d) as char);
            }
        }
        s.push('e');
        s.push_str(&e.to_string());
        s
    }
}

fn taylor_coeffs() -> &'static ([Dd; 16], [Dd; 16]) {
    static COEFFS: OnceLock<([Dd; 16], [Dd; 16])> = OnceLock::new();
    COEFFS.get_or_init(|| {
        // sin: (-1)^k / (2k+1)!, cos: (-1)^k / (2k)!
        let mut sin_c = [Dd::ZERO; 16];
        let mut cos_c = [Dd::ZERO; 16];
        let mut fact = Dd::ONE;
        let mut n = 0u32;
        for k in 0..16 {
            if n > 0 {
                fact = fact.mul_f64(n as f64);
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            cos_c[k] = Dd::from_f64(sign) / fact;
            n += 1;
            fact = fact.mul_f64(n as f64);
            sin_c[k] = Dd::from_f64(sign) / fact;
            n += 1;
        }
        (sin_c, cos_c)
    })
}

// |r| <= pi/4 + tiny; 16 terms leave a remainder below 1e-40
fn sin_cos_taylor(r: Dd) -> (Dd, Dd) {
    let (sc, cc) = taylor_coeffs();
    let r2 = r.sqr();
    let mut s = sc[15];
    let mut c = cc[15];
    for k in (0..15).rev() {
        s = s * r2 + sc[k];
        c = c * r2 + cc[k];
    }
    (s * r, c)
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::from_f64(x)
    }
}

impl PartialEq for Dd {
    fn eq(&self, other: &Dd) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add_f64(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, b: Dd) -> Dd {
        self - b * (self / b).trunc()
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for Dd {
            #[inline]
            fn $m(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    )*};
}
assign_ops!(
    AddAssign add_assign +,
    SubAssign sub_assign -,
    MulAssign mul_assign *,
    DivAssign div_assign /,
    RemAssign rem_assign %
);

impl Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}

impl Zero for Dd {
    fn zero() -> Dd {
        Dd::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for Dd {
    fn one() -> Dd {
        Dd::ONE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDdError(pub String);

impl fmt::Display for ParseDdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid double-double literal `{}`", self.0)
    }
}

impl std::error::Error for ParseDdError {}

impl FromStr for Dd {
    type Err = ParseDdError;

    fn from_str(s: &str) -> Result<Dd, ParseDdError> {
        let err = || ParseDdError(s.to_string());
        let t = s.trim();
        match t {
            "NaN" | "nan" => return Ok(Dd::new(f64::NAN, f64::NAN)),
            "inf" | "+inf" => return Ok(Dd::from_f64(f64::INFINITY)),
            "-inf" => return Ok(Dd::from_f64(f64::NEG_INFINITY)),
            _ => {}
        }
        let (neg, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], body[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (body, 0),
        };
        if mant.is_empty() {
            return Err(err());
        }
        let mut value = Dd::ZERO;
        let mut frac_digits = 0i32;
        let mut seen_dot = false;
        let mut any = false;
        for ch in mant.chars() {
            match ch {
                '0'..='9' => {
                    value = value.mul_f64(10.0).add_f64((ch as u8 - b'0') as f64);
                    if seen_dot {
                        frac_digits += 1;
                    }
                    any = true;
                }
                '.' if !seen_dot => seen_dot = true,
                _ => return Err(err()),
            }
        }
        if !any {
            return Err(err());
        }
        let e = exp - frac_digits;
        let v = if e >= 0 {
            value * Dd::pow10(e)
        } else {
            value / Dd::pow10(-e)
        };
        Ok(if neg { -v } else { v })
    }
}

impl Num for Dd {
    type FromStrRadixErr = ParseDdError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Dd, ParseDdError> {
        if radix != 10 {
            return Err(ParseDdError(s.to_string()));
        }
        s.parse()
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(32);
        f.write_str(&self.to_sci_string(digits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b).abs() / b.abs()).to_f64()
    }

    #[test]
    fn arithmetic_carries_extra_digits() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let back = third * Dd::from_f64(3.0);
        assert!((back - Dd::ONE).abs().to_f64() < 1e-31);
        let x = Dd::from_f64(1.0).add_f64(1e-20);
        assert_eq!(x.lo, 1e-20);
        assert!(((x - Dd::ONE).to_f64() - 1e-20).abs() < 1e-36);
    }

    #[test]
    fn sqrt_squares_back() {
        let two = Dd::from_f64(2.0);
        let r = two.sqrt();
        assert!(rel(r.sqr(), two) < 1e-31);
        assert_eq!(Dd::ZERO.sqrt(), Dd::ZERO);
    }

    #[test]
    fn trig_identities() {
        for &x in &[1e-8, 0.1, 0.7853981633974483, 1.0, 3.0, 10.5, -42.25, 123.456, 1000.0] {
            let x = Dd::from_f64(x);
            let (s, c) = x.sin_cos();
            let one = s.sqr() + c.sqr();
            assert!((one - Dd::ONE).abs().to_f64() < 1e-30, "x = {x}");
            // double angle cross-check
            let (s2, _) = (x + x).sin_cos();
            assert!((s2 - (s * c).mul_f64(2.0)).abs().to_f64() < 1e-29);
            assert!((s.to_f64() - x.hi.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn sin_of_pi_is_tiny() {
        let s = Dd::PI.sin();
        // pi in dd is off by ~3e-33 from the true value
        assert!(s.abs().to_f64() < 1e-32);
        let c = Dd::FRAC_PI_2.cos();
        assert!(c.abs().to_f64() < 1e-32);
    }

    #[test]
    fn decimal_round_trip() {
        let x = Dd::ONE / Dd::from_f64(7.0);
        let s = x.to_sci_string(36);
        assert!(s.starts_with("1.428571428571428571428571428571"));
        let y: Dd = s.parse().unwrap();
        assert!(rel(y, x) < 1e-31);
        let z: Dd = "-2.5e-3".parse().unwrap();
        assert_eq!(z.to_f64(), -2.5e-3);
        assert!("1.2.3".parse::<Dd>().is_err());
        assert!("".parse::<Dd>().is_err());
        assert_eq!(Dd::ZERO.to_sci_string(3), "0.00e0");
    }

    #[test]
    fn ordering_uses_low_word() {
        let a = Dd::new(1.0, 1e-20);
        let b = Dd::new(1.0, -1e-20);
        assert!(a > b);
        assert!(b < Dd::ONE);
    }
}
