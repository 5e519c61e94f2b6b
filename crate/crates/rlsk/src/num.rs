//! Scalar abstraction for the drift mathematics.
//!
//! The hypergeometric/drift core is generic over [`DriftScalar`] so the same
//! formulas run in fast `f64` for planning and in exact `BigRational` where
//! tests demand exact zeros and exact ratios (no tolerance).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::ops::{Add, Div, Mul, Sub};

pub trait DriftScalar:
    Clone
    + PartialOrd
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + std::fmt::Debug
{
    /// Exact ratio of two non-negative big integers (den > 0).
    fn from_big_ratio(num: &BigUint, den: &BigUint) -> Self;

    fn from_usize(v: usize) -> Self;
}

impl DriftScalar for f64 {
    fn from_big_ratio(num: &BigUint, den: &BigUint) -> Self {
        big_to_f64(num) / big_to_f64(den)
    }

    fn from_usize(v: usize) -> Self {
        v as f64
    }
}

impl DriftScalar for BigRational {
    fn from_big_ratio(num: &BigUint, den: &BigUint) -> Self {
        BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
    }

    fn from_usize(v: usize) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

/// BigUint -> f64, saturating to infinity far beyond the drift core's range.
pub fn big_to_f64(v: &BigUint) -> f64 {
    let digits = v.to_u64_digits();
    let mut acc = 0.0f64;
    for d in digits.iter().rev() {
        acc = acc * 18446744073709551616.0 + *d as f64;
    }
    acc
}

/// Scalar for the Q-network: f32 for training throughput, f64 for the
/// finite-difference gradient check.
pub trait NetScalar:
    num_traits::Float + num_traits::FromPrimitive + num_traits::ToPrimitive + Send + Sync + 'static
{
    /// c[m x n] = alpha * a[m x k] . b[k x n] + beta * c, strides in elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    /// Named to avoid clashing with `FromPrimitive::from_f64`.
    fn lit(v: f64) -> Self {
        num_traits::FromPrimitive::from_f64(v).expect("finite literal")
    }

    fn to_f64x(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite value")
    }
}

impl NetScalar for f32 {
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    ) {
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                rsc,
                csc,
            )
        }
    }
}

impl NetScalar for f64 {
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    ) {
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                rsc,
                csc,
            )
        }
    }
}
