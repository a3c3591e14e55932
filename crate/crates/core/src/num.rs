//! Scalar and vector helpers over `libm`, since `f64` transcendental methods need `std`.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * ln(x)
    } else {
        0.0
    }
}

/// Numerically stable `ln Σ exp(xᵢ)`; returns `-inf` for an empty iterator.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(s)
}

/// Span seminorm `max(x) - min(x)`.
pub fn span(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// `max |xᵢ|`.
pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| m.max(abs(v)))
}

/// `Σ |xᵢ - yᵢ|`.
pub fn l1_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| abs(a - b)).sum()
}

/// Scales `x` in place so that it sums to `target`. Returns the scale factor.
pub fn rescale_sum(x: &mut [f64], target: f64) -> f64 {
    let s: f64 = x.iter().sum();
    let c = target / s;
    for v in x.iter_mut() {
        *v *= c;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_and_empty() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_sum_exp(core::iter::empty()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, 0.0]), 0.0);
    }

    #[test]
    fn span_of_constant_is_zero() {
        assert_eq!(span(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(span(&[-1.0, 2.0]), 3.0);
        assert_eq!(span(&[]), 0.0);
    }
}
