//! Scalar abstraction: the pipeline runs identically over real (`f64`) and
//! complex symmetric (`Complex64`) matrices. Complex matrices use the plain
//! transpose throughout; nothing here conjugates.

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + PartialEq
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// True for complex scalars; selects the matrix market value field.
    const COMPLEX: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_re(re: f64) -> Self;
    /// Build from real and imaginary parts. Panics for real scalars when
    /// `im != 0`; generic callers must promote to complex first.
    fn from_parts(re: f64, im: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    /// Modulus |x|.
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    const COMPLEX: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_re(re: f64) -> Self {
        re
    }
    fn from_parts(re: f64, im: f64) -> Self {
        assert!(im == 0.0, "nonzero imaginary part on a real scalar");
        re
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const COMPLEX: bool = true;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_re(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}
