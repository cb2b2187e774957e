//! Small numeric helpers shared across modules.

use crate::Vec3;

/// Bessel function of the first kind, order 0.
///
/// Power series; accurate to machine precision for |x| ≲ 8, which covers the
/// sub-wavelength arguments used by the incident-field model.
pub fn bessel_j0(x: f64) -> f64 {
    bessel_series(0, x)
}

/// Bessel function of the first kind, order 1 (see [`bessel_j0`]).
pub fn bessel_j1(x: f64) -> f64 {
    bessel_series(1, x)
}

fn bessel_series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    for m in 1..200u32 {
        term *= q / (m as f64 * (m + order) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Returns `a / |a|`, or `None` for a (numerically) zero vector.
pub fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

/// Convert a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
