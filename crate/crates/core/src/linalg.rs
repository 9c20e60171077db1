//! Small dense-vector helpers shared by the path and solver modules.

use alloc::vec::Vec;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub(crate) fn scaled(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `d^k`, or `None` on overflow.
pub(crate) fn checked_pow(d: usize, k: usize) -> Option<usize> {
    let mut out: usize = 1;
    for _ in 0..k {
        out = out.checked_mul(d)?;
    }
    Some(out)
}

/// Matrix exponential by scaling and squaring around a Taylor series.
///
/// nalgebra only exposes `exp` with its `std` feature, so the core crate
/// carries its own. The scaled matrix has 1-norm at most 1/2, where 30 Taylor
/// terms are far below double precision.
pub(crate) fn expm(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    use nalgebra::DMatrix;
    let n = m.nrows();
    let one_norm = m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while one_norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
