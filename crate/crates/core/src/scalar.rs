//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Complementary error function, evaluated in double precision.
    fn erfc(self) -> Self {
        Self::lit(libm::erfc(self.to_f64_lossy()))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Standard normal CDF.
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (-x / T::lit(std::f64::consts::SQRT_2)).erfc()
}

/// Standard normal density.
pub fn norm_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) / T::lit(2.0)).exp()
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().fold(T::zero(), |acc, &x| acc + x) / T::from_count(xs.len())
}

/// Sample standard deviation (n − 1 denominator); `None` below two points.
pub fn sample_std<T: Real>(xs: &[T]) -> Option<T> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m));
    Some((ss / T::from_count(xs.len() - 1)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry_and_tails() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            let s: f64 = norm_cdf(x) + norm_cdf(-x);
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!((norm_cdf(0.0f64) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054f64) - 0.975).abs() < 1e-12);
        assert!(norm_cdf(-40.0f64) >= 0.0);
    }

    #[test]
    fn moments() {
        let xs = [1.0f64, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((sample_std(&xs).unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(sample_std(&[1.0f64]).is_none());
        assert_eq!(mean::<f32>(&[]), 0.0);
    }
}
