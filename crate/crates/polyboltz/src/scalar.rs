//! Coefficient rings for truncated series: IEEE doubles and exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Coefficient field of a truncated series.
///
/// Implemented for `f64` (fast approximate mode) and [`BigRational`]
/// (exact counting mode). The series engine is generic over this trait so
/// every algorithm runs identically in both modes.
pub trait Coeff: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    /// Division; the caller guarantees `rhs` is nonzero.
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;

    /// Principal square root, if one exists in the ring (always for
    /// nonnegative floats, only for ratios of perfect squares in the
    /// rationals).
    fn sqrt(&self) -> Option<Self>;

    /// Lossy conversion used for diagnostics and tail estimates.
    fn to_f64(&self) -> f64;

    /// Whether arithmetic in this ring is exact. Iterations settle on exact
    /// zero residues in exact rings and on relative roundoff thresholds in
    /// floating point.
    fn exact_arithmetic() -> bool;

    /// Dot product of two coefficient slices, `sum a[i]*b[d-i]`, used by the
    /// Cauchy product. The f64 implementation uses compensated (Neumaier)
    /// summation; exact rings use the plain loop.
    fn convolve_term(a: &[Self], b: &[Self], d: usize) -> Self {
        let lo = d.saturating_sub(b.len() - 1);
        let hi = d.min(a.len() - 1);
        let mut acc = Self::zero();
        for i in lo..=hi {
            acc = acc.add(&a[i].mul(&b[d - i]));
        }
        acc
    }
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sqrt(&self) -> Option<Self> {
        if *self >= 0.0 {
            Some(f64::sqrt(*self))
        } else {
            None
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn exact_arithmetic() -> bool {
        false
    }

    fn convolve_term(a: &[Self], b: &[Self], d: usize) -> Self {
        // Neumaier compensated summation keeps long Cauchy products near
        // machine precision even when terms alternate in magnitude.
        let lo = d.saturating_sub(b.len() - 1);
        let hi = d.min(a.len() - 1);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in lo..=hi {
            let term = a[i] * b[d - i];
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

/// Exact square root of a nonnegative big integer, if it is a perfect square.
fn bigint_exact_sqrt(v: &BigInt) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.sqrt();
    if &r * &r == *v {
        Some(r)
    } else {
        None
    }
}

impl Coeff for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sqrt(&self) -> Option<Self> {
        // BigRational is kept reduced, so both parts must be perfect squares.
        let num = bigint_exact_sqrt(self.numer())?;
        let den = bigint_exact_sqrt(self.denom())?;
        Some(BigRational::new(num, den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn exact_arithmetic() -> bool {
        true
    }
}

/// True when the rational is an integer (denominator one).
pub fn rational_is_integer(v: &BigRational) -> bool {
    v.denom().is_one()
}

/// Exact integer division check helper: `v` as an `i128` when integral and
/// small enough, used when freezing counting results.
pub fn rational_to_integer(v: &BigRational) -> Option<i128> {
    if rational_is_integer(v) {
        v.numer().to_i128()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_sqrt_exact() {
        let v = BigRational::new(BigInt::from(49), BigInt::from(16));
        let r = Coeff::sqrt(&v).expect("perfect square");
        assert_eq!(r, BigRational::new(BigInt::from(7), BigInt::from(4)));
        let v = BigRational::new(BigInt::from(2), BigInt::from(1));
        assert!(Coeff::sqrt(&v).is_none());
    }

    #[test]
    fn compensated_convolution_matches_naive_on_smooth_data() {
        let a: Vec<f64> = (0..32).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let b: Vec<f64> = (0..32).map(|i| (i as f64).sin() + 2.0).collect();
        for d in 0..32 {
            let mut naive = 0.0;
            for i in 0..=d {
                naive += a[i] * b[d - i];
            }
            let fast = <f64 as Coeff>::convolve_term(&a, &b, d);
            assert!((naive - fast).abs() <= 1e-12 * naive.abs());
        }
    }
}
