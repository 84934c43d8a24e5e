//! Scalar abstraction over `f64` and [`Dd`] so the linear algebra and the
//! prolate machinery can run in either precision.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex;
use num_traits::Num;

use crate::dd::Dd;

pub trait Real:
    Copy
    + Debug
    + Display
    + Default
    + PartialOrd
    + Num
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn from_dd(x: Dd) -> Self;
    fn to_f64(self) -> f64;
    fn to_dd(self) -> Dd;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn pi() -> Self;
    fn eps() -> f64;

    #[inline]
    fn from_i(n: i64) -> Self {
        Self::from_f64(n as f64)
    }

    fn sin(self) -> Self {
        self.sin_cos().0
    }

    fn cos(self) -> Self {
        self.sin_cos().1
    }

    /// sin(x)/x with the removable singularity filled in.
    fn sinc(self) -> Self {
        if self.to_f64().abs() < 1e-3 {
            // Taylor series, 8 terms suffice for |x| < 1e-3 even in dd
            let x2 = self * self;
            let mut term = Self::one();
            let mut sum = Self::one();
            for k in 1..9 {
                term = -term * x2 / Self::from_i((2 * k) * (2 * k + 1));
                sum += term;
            }
            sum
        } else {
            self.sin() / self
        }
    }

    fn max_of(self, o: Self) -> Self {
        if o > self {
            o
        } else {
            self
        }
    }

    /// e^{i x}
    fn cis(self) -> Complex<Self> {
        let (s, c) = self.sin_cos();
        Complex::new(c, s)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> f64 {
        x
    }
    #[inline]
    fn from_dd(x: Dd) -> f64 {
        x.to_f64()
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn to_dd(self) -> Dd {
        Dd::from_f64(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    #[inline]
    fn sin_cos(self) -> (f64, f64) {
        f64::sin_cos(self)
    }
    fn pi() -> f64 {
        std::f64::consts::PI
    }
    fn eps() -> f64 {
        f64::EPSILON
    }
}

impl Real for Dd {
    #[inline]
    fn from_f64(x: f64) -> Dd {
        Dd::from_f64(x)
    }
    #[inline]
    fn from_dd(x: Dd) -> Dd {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    #[inline]
    fn to_dd(self) -> Dd {
        self
    }
    #[inline]
    fn sqrt(self) -> Dd {
        Dd::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Dd {
        Dd::abs(self)
    }
    #[inline]
    fn sin_cos(self) -> (Dd, Dd) {
        Dd::sin_cos(self)
    }
    fn pi() -> Dd {
        Dd::PI
    }
    fn eps() -> f64 {
        Dd::EPSILON
    }
}

pub type Cx<T> = Complex<T>;

/// Complex modulus computed without overflow concerns (values here are O(1)).
pub fn cabs<T: Real>(z: Cx<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

pub fn czero<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn cone<T: Real>() -> Cx<T> {
    Complex::new(T::one(), T::zero())
}

pub fn cx_to_f64<T: Real>(z: Cx<T>) -> Complex<f64> {
    Complex::new(z.re.to_f64(), z.im.to_f64())
}

pub fn cx_to_dd<T: Real>(z: Cx<T>) -> Complex<Dd> {
    Complex::new(z.re.to_dd(), z.im.to_dd())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_continuous_at_branch() {
        for &x in &[0.0, 1e-6, 9.99e-4, 1.001e-3, 0.5] {
            let a = Dd::from_f64(x).sinc();
            let b = if x == 0.0 { 1.0 } else { f64::sin(x) / x };
            assert!((a.to_f64() - b).abs() < 1e-15, "x = {x}");
        }
        let a = Dd::from_f64(9.99e-4).sinc();
        let b = Dd::from_f64(9.99e-4).sin() / Dd::from_f64(9.99e-4);
        assert!((a - b).abs().to_f64() < 1e-31);
    }
}
