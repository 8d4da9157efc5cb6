//! Thin wrappers over `libm` plus the bracketed bisection used throughout.

use alloc::format;

use crate::{Error, Result};

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn tan(x: f64) -> f64 {
    libm::tan(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Exact `floor(log2(x))` for finite positive `x`, read off the binary exponent.
pub(crate) fn floor_log2(x: f64) -> i32 {
    let (mantissa, exponent) = libm::frexp(x);
    debug_assert!((0.5..1.0).contains(&mantissa));
    exponent - 1
}

/// Splits positive `x` as `mantissa * 2^exponent` with `mantissa` in `(1, 2]`.
pub(crate) fn split_pow2(x: f64) -> (f64, i32) {
    let (m, e) = libm::frexp(x);
    // frexp gives m in [0.5, 1); shift to [1, 2) and then move 1 to 2.
    let (m, e) = (2.0 * m, e - 1);
    if m == 1.0 {
        (2.0, e - 1)
    } else {
        (m, e)
    }
}

#[inline]
pub(crate) fn pow2(e: i32) -> f64 {
    libm::ldexp(1.0, e)
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping once the bracket
/// is no wider than `tol` or after `max_iter` halvings.
pub(crate) fn bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() || f_hi.is_finite()) || (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::Numeric(format!(
            "no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})"
        )));
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `x` in `[lo, hi]` with `pred(x)` true, assuming `pred(lo)` holds and
/// the predicate is true on a prefix of the interval.
pub(crate) fn bisect_last_true<P>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> f64
where
    P: FnMut(f64) -> bool,
{
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, assuming `pred(hi)` holds and
/// the predicate is monotone (false then true).
pub(crate) fn bisect_first_true<P>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> f64
where
    P: FnMut(f64) -> bool,
{
    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
