//! Rabi frequency from a sampled trace by zero-filled FFT peak picking.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::ImagingError;

/// Fewest samples accepted by [`extract_frequency`].
pub const MIN_SAMPLES: usize = 8;
/// Lowest native FFT bins skipped when searching for the peak.
pub const DC_GUARD_BINS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    /// Hz.
    pub frequency: f64,
    /// Half width at half maximum, Hz.
    pub hwhm: f64,
    /// Zero-padded bin spacing, Hz.
    pub resolution: f64,
    /// No usable peak (flat trace).
    pub flagged: bool,
}

/// Peak of the magnitude spectrum of `values` sampled every `step` seconds.
///
/// The trace is mean-subtracted and zero-padded to `zero_fill` times its
/// length. The HWHM is found by linear interpolation of the half-maximum
/// crossings on either side of the peak.
pub fn extract_frequency(values: &[f64], step: f64, zero_fill: usize) -> Result<Peak, ImagingError> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(ImagingError::Invalid(format!("trace has {n} samples, need at least {MIN_SAMPLES}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(ImagingError::Invalid("sampling step must be > 0".into()));
    }
    if zero_fill == 0 {
        return Err(ImagingError::Invalid("zero-fill factor must be >= 1".into()));
    }
    let m = n * zero_fill;
    let resolution = 1.0 / (m as f64 * step);
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mag: Vec<f64> = buf[..=m / 2].iter().map(|c| c.norm()).collect();

    let lo = (DC_GUARD_BINS * zero_fill).min(mag.len() - 1);
    let (k, peak) = mag[lo..].iter().enumerate().fold((lo, 0.0), |(bk, bv), (i, &v)| if v > bv { (lo + i, v) } else { (bk, bv) });
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if !peak.is_finite() || peak <= 1e-12 * scale * n as f64 {
        return Ok(Peak { frequency: 0.0, hwhm: 0.0, resolution, flagged: true });
    }

    let half = 0.5 * peak;
    let mut left = 0.0;
    for i in (0..k).rev() {
        if mag[i] < half {
            left = i as f64 + (half - mag[i]) / (mag[i + 1] - mag[i]);
            break;
        }
    }
    let mut right = (mag.len() - 1) as f64;
    for i in k + 1..mag.len() {
        if mag[i] < half {
            right = (i - 1) as f64 + (mag[i - 1] - half) / (mag[i - 1] - mag[i]);
            break;
        }
    }
    Ok(Peak { frequency: k as f64 * resolution, hwhm: 0.5 * (right - left) * resolution, resolution, flagged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nv::{doublet_contrast, tau_grid, NVConfig};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cosine(f: f64, step: f64, n: usize) -> Vec<f64> {
        tau_grid(0.0, step, n).iter().map(|t| (2.0 * PI * f * t).cos()).collect()
    }

    #[test]
    fn recovers_five_megahertz() {
        let p = extract_frequency(&cosine(5e6, 20e-9, 100), 20e-9, 10).unwrap();
        assert!((p.frequency - 5e6).abs() <= 50e3, "{p:?}");
        assert!((p.resolution - 50e3).abs() < 1e-6);
        assert!(!p.flagged);
    }

    #[test]
    fn doublet_center_gives_single_peak() {
        let nv = NVConfig::default().at_doublet_center();
        let tau = tau_grid(0.0, 20e-9, 100);
        let v: Vec<f64> = tau.iter().map(|&t| doublet_contrast(5e6, nv.detunings(), t, f64::INFINITY)).collect();
        let p = extract_frequency(&v, 20e-9, 10).unwrap();
        let expect = 5e6f64.hypot(1.5e6);
        assert!((p.frequency - expect).abs() <= 50e3, "{} vs {expect}", p.frequency);
    }

    #[test]
    fn constant_trace_is_flagged() {
        let p = extract_frequency(&[0.3; 50], 1e-8, 10).unwrap();
        assert!(p.flagged);
        assert_eq!(p.frequency, 0.0);
    }

    #[test]
    fn short_trace_is_rejected() {
        assert!(extract_frequency(&[1.0; 7], 1e-8, 10).is_err());
        assert!(extract_frequency(&[1.0; 8], 1e-8, 0).is_err());
    }

    #[test]
    fn hwhm_tracks_decay() {
        // A long record of an exponentially damped cosine has a Lorentzian
        // line whose magnitude falls to half at √3/(2πT).
        let (step, n, decay) = (5e-9, 8000, 1e-6);
        let v: Vec<f64> = tau_grid(0.0, step, n).iter().map(|t| (2.0 * PI * 10e6 * t).cos() * (-t / decay).exp()).collect();
        let p = extract_frequency(&v, step, 4).unwrap();
        let expect = 3f64.sqrt() / (2.0 * PI * decay);
        assert!((p.hwhm / expect - 1.0).abs() < 0.02, "{} vs {expect}", p.hwhm);
    }

    proptest! {
        #[test]
        fn tone_within_one_padded_bin(f in 1.5e6f64..24e6, phase in 0.0f64..1.0) {
            let step = 20e-9;
            let v: Vec<f64> = tau_grid(0.0, step, 100).iter().map(|t| (2.0 * PI * (f * t + phase)).cos()).collect();
            let p = extract_frequency(&v, step, 10).unwrap();
            prop_assert!((p.frequency - f).abs() <= p.resolution, "{} vs {}", p.frequency, f);
        }
    }
}
