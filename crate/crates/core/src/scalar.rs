//! Numeric traits shared by every module.
//!
//! All discretization code is written against [`Real`] (the floating point
//! type of coordinates, weights and norms) and [`Scalar`] (the entry type of
//! sparse matrices and vectors, either a real or a complex number over the
//! same `Real`).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, One, ToPrimitive, Zero};

/// Floating point type: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + std::str::FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Matrix/vector entry type.
pub trait Scalar:
    Copy + Zero + One + NumAssign + std::ops::Neg<Output = Self> + Sum + Debug + Send + Sync + 'static
{
    type Real: Real;

    fn from_real(r: Self::Real) -> Self;
    fn conj(self) -> Self;
    /// `|x|^2`
    fn abs_sqr(self) -> Self::Real;
    fn modulus(self) -> Self::Real;
    fn scale(self, r: Self::Real) -> Self;
    fn is_finite(self) -> bool;
    fn re(self) -> Self::Real;
    fn into_complex(self) -> Complex<Self::Real>;
}

impl<T: Real> Scalar for T {
    type Real = T;

    #[inline]
    fn from_real(r: T) -> T {
        r
    }
    #[inline]
    fn conj(self) -> T {
        self
    }
    #[inline]
    fn abs_sqr(self) -> T {
        self * self
    }
    #[inline]
    fn modulus(self) -> T {
        self.abs()
    }
    #[inline]
    fn scale(self, r: T) -> T {
        self * r
    }
    #[inline]
    fn is_finite(self) -> bool {
        Float::is_finite(self)
    }
    #[inline]
    fn re(self) -> T {
        self
    }
    #[inline]
    fn into_complex(self) -> Complex<T> {
        Complex::new(self, T::zero())
    }
}

impl<T: Real> Scalar for Complex<T> {
    type Real = T;

    #[inline]
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    #[inline]
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    #[inline]
    fn abs_sqr(self) -> T {
        self.norm_sqr()
    }
    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
    #[inline]
    fn scale(self, r: T) -> Self {
        Complex::new(self.re * r, self.im * r)
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn re(self) -> T {
        self.re
    }
    #[inline]
    fn into_complex(self) -> Complex<T> {
        self
    }
}

/// Euclidean norm of a vector of scalars.
pub fn norm2<S: Scalar>(v: &[S]) -> S::Real {
    v.iter().map(|x| x.abs_sqr()).sum::<S::Real>().sqrt()
}

/// Hermitian inner product `sum_i a_i conj(b_i)`.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y.conj()).sum()
}

/// The imaginary unit.
#[inline]
pub fn imag_unit<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_scalar_basics() {
        let z = Complex::new(3.0f64, -4.0);
        assert_eq!(z.abs_sqr(), 25.0);
        assert_eq!(Scalar::modulus(z), 5.0);
        assert_eq!(Scalar::conj(z), Complex::new(3.0, 4.0));
        assert_eq!(z.scale(2.0), Complex::new(6.0, -8.0));
        assert!(!Scalar::is_finite(Complex::new(f64::NAN, 0.0)));
    }

    #[test]
    fn dot_is_hermitian() {
        let a = [Complex::new(1.0f32, 2.0), Complex::new(0.0, 1.0)];
        let d = dot(&a, &a);
        assert!((d.re - norm2(&a).powi(2)).abs() < 1e-6);
        assert_eq!(d.im, 0.0);
    }
}
