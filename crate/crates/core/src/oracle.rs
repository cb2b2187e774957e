//! Closed-form reference fields used to validate the solver.
//!
//! Phasors follow the `Re{F e^{iωt}}` convention used throughout the crate.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::constants::{C0, EPS0, MU0};
use crate::math::{cross, dot, norm, normalize, scale, sub};
use crate::{CVec3, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("field evaluated at a source singularity: {0}")]
    Domain(String),
    #[error("invalid source: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticSource {
    /// Infinitesimal current element with current moment `moment` (A·m).
    HertzianDipole { moment: f64, position: Vec3, orientation: Vec3, frequency: f64 },
    /// Thin circular filament.
    CurrentLoop { radius: f64, center: Vec3, normal: Vec3, current: f64 },
    /// Constant flux density (tesla).
    Uniform { b: Vec3 },
}

impl AnalyticSource {
    pub fn validate(&self) -> Result<(), OracleError> {
        let unit = |v: Vec3, what: &str| {
            if (norm(v) - 1.0).abs() > 1e-9 {
                Err(OracleError::Invalid(format!("{what} must be a unit vector")))
            } else {
                Ok(())
            }
        };
        match self {
            AnalyticSource::HertzianDipole { orientation, frequency, .. } => {
                unit(*orientation, "dipole orientation")?;
                if !(*frequency > 0.0) {
                    return Err(OracleError::Invalid("dipole frequency must be > 0".into()));
                }
                Ok(())
            }
            AnalyticSource::CurrentLoop { radius, normal, .. } => {
                unit(*normal, "loop normal")?;
                if !(*radius > 0.0) {
                    return Err(OracleError::Invalid("loop radius must be > 0".into()));
                }
                Ok(())
            }
            AnalyticSource::Uniform { .. } => Ok(()),
        }
    }
}

/// Near- plus far-zone `(E, B)` phasors of a Hertzian dipole.
#[allow(clippy::too_many_arguments)]
pub fn hertzian_dipole_field(moment: f64, position: Vec3, orientation: Vec3, frequency: f64, r: Vec3) -> Result<(CVec3, CVec3), OracleError> {
    let rel = sub(r, position);
    let dist = norm(rel);
    if !(dist > 0.0) {
        return Err(OracleError::Domain("hertzian dipole evaluated at its own position".into()));
    }
    let n = scale(rel, 1.0 / dist);
    let omega = 2.0 * PI * frequency;
    let k = omega / C0;
    let j = Complex64::i();
    let phase = Complex64::from_polar(1.0, -k * dist);
    // electric moment p = I·l / (iω)
    let p = Complex64::new(moment, 0.0) / (j * omega);

    let radial = (j * k / dist + 1.0 / (dist * dist)) * phase;
    let b_dir = cross(orientation, n);
    let b_amp = MU0 * moment / (4.0 * PI) * radial;
    let b = b_dir.map(|c| b_amp * c);

    let far_dir = cross(cross(n, orientation), n);
    let near_dir = sub(scale(n, 3.0 * dot(n, orientation)), orientation);
    let far = k * k / dist * phase;
    let near = (1.0 / dist.powi(3) + j * k / (dist * dist)) * phase;
    let pref = p / (4.0 * PI * EPS0);
    let e = [0, 1, 2].map(|c| pref * (far * far_dir[c] + near * near_dir[c]));
    Ok((e, b))
}

/// Biot–Savart flux density of a circular filament.
///
/// Periodic trapezoidal quadrature over the loop; the node count doubles
/// until successive estimates agree to 1e-9 relative.
pub fn loop_biot_savart(radius: f64, center: Vec3, normal: Vec3, current: f64, r: Vec3) -> Result<Vec3, OracleError> {
    let n = normalize(normal).ok_or_else(|| OracleError::Invalid("loop normal is zero".into()))?;
    let rel = sub(r, center);
    let axial = dot(rel, n);
    let radial = norm(sub(rel, scale(n, axial)));
    let wire_dist = ((radial - radius).powi(2) + axial * axial).sqrt();
    if wire_dist <= 1e-12 * radius {
        return Err(OracleError::Domain("point lies on the loop wire".into()));
    }
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = normalize(cross(n, helper)).unwrap();
    let v = cross(n, u);
    let eval = |count: usize| -> Vec3 {
        let mut acc = [0.0; 3];
        let dphi = 2.0 * PI / count as f64;
        for s in 0..count {
            let phi = s as f64 * dphi;
            let (sn, cs) = phi.sin_cos();
            let src = [
                radius * (cs * u[0] + sn * v[0]),
                radius * (cs * u[1] + sn * v[1]),
                radius * (cs * u[2] + sn * v[2]),
            ];
            let dl = [
                radius * (-sn * u[0] + cs * v[0]),
                radius * (-sn * u[1] + cs * v[1]),
                radius * (-sn * u[2] + cs * v[2]),
            ];
            let d = sub(rel, src);
            let d3 = norm(d).powi(3);
            let c = cross(dl, d);
            for a in 0..3 {
                acc[a] += c[a] / d3;
            }
        }
        scale(acc, MU0 * current / (4.0 * PI) * dphi)
    };
    let mut count = 64;
    let mut prev = eval(count);
    while count < 1 << 22 {
        count *= 2;
        let next = eval(count);
        let diff = norm(sub(next, prev));
        let size = norm(next);
        prev = next;
        if diff <= 1e-9 * size || size == 0.0 {
            break;
        }
    }
    Ok(prev)
}

pub fn uniform_field(b: Vec3, _r: Vec3) -> Vec3 {
    b
}

/// Magnetic flux density phasor of any analytic source at `r`.
pub fn flux_density(src: &AnalyticSource, r: Vec3) -> Result<CVec3, OracleError> {
    let real = |v: Vec3| v.map(|c| Complex64::new(c, 0.0));
    match *src {
        AnalyticSource::HertzianDipole { moment, position, orientation, frequency } => {
            hertzian_dipole_field(moment, position, orientation, frequency, r).map(|(_, b)| b)
        }
        AnalyticSource::CurrentLoop { radius, center, normal, current } => {
            loop_biot_savart(radius, center, normal, current, r).map(real)
        }
        AnalyticSource::Uniform { b } => Ok(real(uniform_field(b, r))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnorm(v: &CVec3) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn dipole_on_axis_has_no_magnetic_field() {
        let (_, b) = hertzian_dipole_field(1e-3, [0.0; 3], [0.0, 0.0, 1.0], 3e9, [0.0, 0.0, 0.05]).unwrap();
        assert_eq!(cnorm(&b), 0.0);
    }

    #[test]
    fn dipole_near_zone_leading_term() {
        let f = 3e9;
        let k = 2.0 * PI * f / C0;
        let r = 0.01 / k;
        let m = 2e-3;
        let (_, b) = hertzian_dipole_field(m, [0.0; 3], [0.0, 0.0, 1.0], f, [r, 0.0, 0.0]).unwrap();
        let leading = MU0 / (4.0 * PI) * m / (r * r);
        assert!((cnorm(&b) / leading - 1.0).abs() < 0.01);
    }

    #[test]
    fn dipole_static_scaling() {
        let f = 1e3;
        let at = |r: f64| cnorm(&hertzian_dipole_field(1.0, [0.0; 3], [0.0, 0.0, 1.0], f, [r, 0.0, 0.0]).unwrap().1);
        assert!((at(2e-3) / at(1e-3) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn dipole_rejects_source_point() {
        assert!(matches!(
            hertzian_dipole_field(1.0, [1.0, 2.0, 3.0], [0.0, 0.0, 1.0], 1e9, [1.0, 2.0, 3.0]),
            Err(OracleError::Domain(_))
        ));
    }

    #[test]
    fn loop_center_and_axis() {
        let (a, i) = (1e-6, 1e-3);
        let b = loop_biot_savart(a, [0.0; 3], [0.0, 0.0, 1.0], i, [0.0; 3]).unwrap();
        assert!((b[2] / (MU0 * i / (2.0 * a)) - 1.0).abs() < 1e-12);
        assert!(b[0].abs() < 1e-20 && b[1].abs() < 1e-20);
        for &z in &[0.3e-6, 1e-6, 4e-6] {
            let b = loop_biot_savart(a, [0.0; 3], [0.0, 0.0, 1.0], i, [0.0, 0.0, z]).unwrap();
            let exact = MU0 * i * a * a / (2.0 * (a * a + z * z).powf(1.5));
            assert!((b[2] / exact - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_far_axis_matches_dipole_moment() {
        let (a, i) = (2e-6, 5e-3);
        let z = 100.0 * a;
        let b = loop_biot_savart(a, [0.0; 3], [0.0, 0.0, 1.0], i, [0.0, 0.0, z]).unwrap();
        let m = i * PI * a * a;
        let dipole = MU0 * 2.0 * m / (4.0 * PI * z.powi(3));
        assert!((b[2] / dipole - 1.0).abs() < 1e-3);
    }

    #[test]
    fn loop_rejects_points_on_the_wire() {
        assert!(matches!(
            loop_biot_savart(1.0, [0.0; 3], [0.0, 0.0, 1.0], 1.0, [0.0, 1.0, 0.0]),
            Err(OracleError::Domain(_))
        ));
    }

    #[test]
    fn loop_reflection_symmetry() {
        let p = [0.7e-6, 0.4e-6, 0.5e-6];
        let q = [p[0], p[1], -p[2]];
        let bp = loop_biot_savart(1e-6, [0.0; 3], [0.0, 0.0, 1.0], 1.0, p).unwrap();
        let bq = loop_biot_savart(1e-6, [0.0; 3], [0.0, 0.0, 1.0], 1.0, q).unwrap();
        assert!((bp[2] - bq[2]).abs() <= 1e-9 * bp[2].abs());
        assert!((bp[0] + bq[0]).abs() <= 1e-9 * bp[0].abs());
        assert!((bp[1] + bq[1]).abs() <= 1e-9 * bp[1].abs());
    }

    #[test]
    fn uniform_is_constant() {
        let b = [0.0, 0.0, 1e-3];
        assert_eq!(uniform_field(b, [1.0, 2.0, 3.0]), b);
        assert_eq!(uniform_field(b, [-4.0, 0.0, 9.0]), uniform_field(b, [0.0; 3]));
        assert_eq!(uniform_field([0.0; 3], [5.0; 3]), [0.0; 3]);
    }

    #[test]
    fn validation() {
        let bad = AnalyticSource::CurrentLoop { radius: 0.0, center: [0.0; 3], normal: [0.0, 0.0, 1.0], current: 1.0 };
        assert!(bad.validate().is_err());
        let bad = AnalyticSource::HertzianDipole { moment: 1.0, position: [0.0; 3], orientation: [0.0, 0.0, 2.0], frequency: 1e9 };
        assert!(bad.validate().is_err());
    }
}
