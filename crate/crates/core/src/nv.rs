//! NV ground-state spin physics.
//!
//! The [111] NV axis lies in the lab xz-plane at a polar angle θ from z. The
//! NV frame has `z'` along that axis, `x'` in the xz-plane and `y' = z' × x'`
//! (which is lab `y`).
//!
//! Drive phasors follow `Re{B e^{iωt}}`. The σ+ part of the transverse field
//! rotates counter-clockwise about `z'` and drives |0⟩→|+1⟩; its amplitude is
//! `B+ = ½|Bx' + i·By'|`, and `B- = ½|Bx' − i·By'|` drives |0⟩→|−1⟩. A
//! linear drive of amplitude B1 therefore splits into B1/2 per helicity.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::constants::{N15_HYPERFINE, NV_GYROMAGNETIC_RATIO, NV_ZERO_FIELD_SPLITTING};
use crate::{CVec3, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum NvError {
    #[error("invalid NV configuration: {0}")]
    Config(String),
    #[error("invalid pulse-duration grid: {0}")]
    Tau(String),
}

/// Which electron-spin transition is driven.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Transition {
    /// |0⟩ → |+1⟩, the upper resonance.
    #[default]
    Plus,
    /// |0⟩ → |−1⟩, the lower resonance.
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NVConfig {
    /// Zero-field splitting D, Hz.
    pub zero_field_splitting: f64,
    /// Gyromagnetic ratio, Hz/T.
    pub gamma: f64,
    /// Static bias field along the NV axis, T.
    pub b0: f64,
    /// Polar angle of the NV axis from lab z (in the xz-plane), degrees.
    pub axis_polar_deg: f64,
    /// Hyperfine doublet splitting A∥, Hz.
    pub hyperfine: f64,
    /// Microwave drive frequency, Hz.
    pub drive_frequency: f64,
    pub transition: Transition,
}

impl Default for NVConfig {
    fn default() -> Self {
        let mut cfg = Self {
            zero_field_splitting: NV_ZERO_FIELD_SPLITTING,
            gamma: NV_GYROMAGNETIC_RATIO,
            b0: 4.6e-3,
            axis_polar_deg: 54.74,
            hyperfine: N15_HYPERFINE,
            drive_frequency: 0.0,
            transition: Transition::Plus,
        };
        cfg.drive_frequency = cfg.resonance();
        cfg
    }
}

impl NVConfig {
    pub fn validate(&self) -> Result<(), NvError> {
        let bad = |m: &str| Err(NvError::Config(m.to_string()));
        if !(self.zero_field_splitting > 0.0) || !(self.gamma > 0.0) {
            return bad("zero-field splitting and gyromagnetic ratio must be > 0");
        }
        if !(self.b0 >= 0.0) || !(self.hyperfine >= 0.0) {
            return bad("bias field and hyperfine splitting must be >= 0");
        }
        if !(0.0..90.0).contains(&self.axis_polar_deg) {
            return bad("axis polar angle must lie in [0, 90) degrees");
        }
        if !(self.drive_frequency > 0.0 && self.drive_frequency.is_finite()) {
            return bad("drive frequency must be > 0");
        }
        Ok(())
    }

    /// Center of the hyperfine doublet for the selected transition.
    pub fn resonance(&self) -> f64 {
        let (minus, plus) = resonance_frequencies(self);
        match self.transition {
            Transition::Plus => plus,
            Transition::Minus => minus,
        }
    }

    /// Same configuration driven at the doublet center (beat-free).
    pub fn at_doublet_center(mut self) -> Self {
        self.drive_frequency = self.resonance();
        self
    }

    /// Same configuration driven on the lower hyperfine line.
    pub fn on_lower_line(mut self) -> Self {
        self.drive_frequency = self.resonance() - 0.5 * self.hyperfine;
        self
    }

    pub fn with_transition(mut self, transition: Transition) -> Self {
        self.transition = transition;
        self.at_doublet_center()
    }

    /// Detunings of the drive from the two hyperfine lines.
    pub fn detunings(&self) -> (f64, f64) {
        hyperfine_detunings(self, self.resonance())
    }

    /// NV axis as a lab-frame unit vector.
    pub fn axis(&self) -> Vec3 {
        let t = self.axis_polar_deg.to_radians();
        [t.sin(), 0.0, t.cos()]
    }
}

/// `(f−, f+) = D ∓ γ·B0` for the aligned orientation.
pub fn resonance_frequencies(cfg: &NVConfig) -> (f64, f64) {
    let z = cfg.gamma * cfg.b0;
    (cfg.zero_field_splitting - z, cfg.zero_field_splitting + z)
}

/// Rows are the NV-frame unit vectors `x'`, `y'`, `z'` in lab coordinates.
pub fn nv_rotation(cfg: &NVConfig) -> [Vec3; 3] {
    let t = cfg.axis_polar_deg.to_radians();
    let (s, c) = t.sin_cos();
    [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]]
}

/// Drive phasor expressed in the NV frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveField(pub CVec3);

impl DriveField {
    pub fn x(&self) -> Complex64 {
        self.0[0]
    }
    pub fn y(&self) -> Complex64 {
        self.0[1]
    }
    pub fn z(&self) -> Complex64 {
        self.0[2]
    }
}

pub fn lab_to_nv(v: CVec3, cfg: &NVConfig) -> DriveField {
    let r = nv_rotation(cfg);
    DriveField(r.map(|row| v[0] * row[0] + v[1] * row[1] + v[2] * row[2]))
}

/// `(B+, B−)` circular amplitudes; the axial component drives nothing.
pub fn circular_amplitudes(d: &DriveField) -> (f64, f64) {
    let i = Complex64::i();
    let plus = 0.5 * (d.x() + i * d.y()).norm();
    let minus = 0.5 * (d.x() - i * d.y()).norm();
    (plus, minus)
}

/// Amplitude driving the configured transition.
pub fn transition_amplitude(d: &DriveField, transition: Transition) -> f64 {
    let (p, m) = circular_amplitudes(d);
    match transition {
        Transition::Plus => p,
        Transition::Minus => m,
    }
}

/// On-resonance Rabi frequency Ω0/2π in Hz.
pub fn rabi_frequency(b_pm: f64, cfg: &NVConfig) -> f64 {
    cfg.gamma * b_pm
}

/// Rabi frequency (Hz) per tesla of a linearly polarized lab field along `axis`.
pub fn rabi_per_tesla(axis: Vec3, cfg: &NVConfig) -> f64 {
    let unit = crate::math::normalize(axis).unwrap_or([0.0, 0.0, 1.0]);
    let d = lab_to_nv(unit.map(|c| Complex64::new(c, 0.0)), cfg);
    rabi_frequency(transition_amplitude(&d, cfg.transition), cfg)
}

/// Detunings `(Δ1, Δ2)` of the drive from the doublet lines at
/// `f_center ∓ A∥/2`.
pub fn hyperfine_detunings(cfg: &NVConfig, f_center: f64) -> (f64, f64) {
    let half = 0.5 * cfg.hyperfine;
    (cfg.drive_frequency - (f_center - half), cfg.drive_frequency - (f_center + half))
}

/// `√(Ω0² + Δ²)`, all in Hz.
pub fn effective_rabi(omega0: f64, detuning: f64) -> f64 {
    omega0.hypot(detuning)
}

/// Contrast vs MW pulse duration for one pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct RabiTrace {
    pub tau: Vec<f64>,
    pub contrast: Vec<f64>,
    pub decay: f64,
    pub noise_sigma: f64,
}

impl RabiTrace {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Sampling step of the (uniform) τ grid.
    pub fn step(&self) -> f64 {
        if self.tau.len() < 2 {
            0.0
        } else {
            self.tau[1] - self.tau[0]
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau_s,contrast\n");
        for (t, c) in self.tau.iter().zip(&self.contrast) {
            s.push_str(&format!("{t:e},{c:e}\n"));
        }
        s
    }
}

/// `n` pulse durations `start, start + step, …`.
pub fn tau_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

/// Check that `tau` has at least two strictly increasing, evenly spaced samples.
pub fn validate_tau(tau: &[f64]) -> Result<f64, NvError> {
    if tau.len() < 2 {
        return Err(NvError::Tau(format!("need at least 2 samples, got {}", tau.len())));
    }
    let step = tau[1] - tau[0];
    if !(step > 0.0) {
        return Err(NvError::Tau("samples must be strictly increasing".into()));
    }
    for (n, w) in tau.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
            return Err(NvError::Tau(format!("non-uniform spacing at sample {}", n + 1)));
        }
    }
    Ok(step)
}

/// Noiseless doublet-averaged contrast at pulse duration `tau`.
pub fn doublet_contrast(omega0: f64, detunings: (f64, f64), tau: f64, decay: f64) -> f64 {
    let line = |delta: f64| {
        let eff2 = omega0 * omega0 + delta * delta;
        if eff2 == 0.0 {
            return 1.0;
        }
        let eff = eff2.sqrt();
        (delta * delta + omega0 * omega0 * (2.0 * PI * eff * tau).cos()) / eff2
    };
    let envelope = if decay.is_finite() { (-tau / decay).exp() } else { 1.0 };
    0.5 * (line(detunings.0) + line(detunings.1)) * envelope
}

/// Rabi trace for on-resonance frequency `omega0` (Hz) with the drive
/// detunings implied by `cfg`, an exponential envelope and additive Gaussian
/// noise of standard deviation `noise_sigma`.
pub fn synthesize_trace(omega0: f64, cfg: &NVConfig, tau: &[f64], decay: f64, noise_sigma: f64, seed: u64) -> Result<RabiTrace, NvError> {
    validate_tau(tau)?;
    if !(decay > 0.0) {
        return Err(NvError::Config("decay time must be > 0".into()));
    }
    let det = cfg.detunings();
    let mut contrast: Vec<f64> = tau.iter().map(|&t| doublet_contrast(omega0, det, t, decay)).collect();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| NvError::Config(e.to_string()))?;
        for c in &mut contrast {
            *c = (*c + normal.sample(&mut rng)).clamp(-1.5, 1.5);
        }
    }
    Ok(RabiTrace { tau: tau.to_vec(), contrast, decay, noise_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn default_resonances() {
        let (m, p) = resonance_frequencies(&NVConfig::default());
        assert_relative_eq!(m, 2.7412e9, max_relative = 1e-15);
        assert_relative_eq!(p, 2.9988e9, max_relative = 1e-15);
        assert_relative_eq!(p - m, 257.6e6, max_relative = 1e-9);
        let cfg = NVConfig { b0: 0.0, ..NVConfig::default() };
        assert_eq!(resonance_frequencies(&cfg), (2.87e9, 2.87e9));
    }

    #[test]
    fn frame_rotation_examples() {
        let cfg = NVConfig::default();
        let z = lab_to_nv([c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &cfg);
        // 54.74° is the rounded magic angle
        assert!((z.z().re - 0.5774).abs() < 1.5e-4);
        let magic = NVConfig { axis_polar_deg: (1.0f64 / 3f64.sqrt()).acos().to_degrees(), ..cfg.clone() };
        let z = lab_to_nv([c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &magic);
        assert!((z.z().re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let a = cfg.axis();
        let along = lab_to_nv(a.map(|v| c(2.0 * v, 0.0)), &cfg);
        assert!(along.x().norm() < 1e-15 && along.y().norm() < 1e-15);
        assert!((along.z().re - 2.0).abs() < 1e-15);
        let y = lab_to_nv([c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)], &cfg);
        assert_eq!(y.z(), c(0.0, 0.0));
        assert_eq!(y.y(), c(1.0, 0.0));
    }

    #[test]
    fn circular_examples() {
        let b1 = 3e-5;
        let (p, m) = circular_amplitudes(&DriveField([c(b1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        assert_eq!((p, m), (b1 / 2.0, b1 / 2.0));
        // counter-clockwise rotation about z': pure σ+
        let (p, m) = circular_amplitudes(&DriveField([c(b1, 0.0), c(0.0, -b1), c(0.0, 0.0)]));
        assert_eq!(m, 0.0);
        assert_eq!(p, b1);
        let (p, m) = circular_amplitudes(&DriveField([c(0.0, 0.0), c(0.0, 0.0), c(b1, 0.0)]));
        assert_eq!((p, m), (0.0, 0.0));
    }

    #[test]
    fn rabi_examples() {
        let cfg = NVConfig::default();
        assert_eq!(rabi_frequency(0.0, &cfg), 0.0);
        assert!((rabi_frequency(43.57e-6, &cfg) - 1.22e6).abs() < 1e3);
        assert!((rabi_frequency(805e-6, &cfg) - 22.54e6).abs() < 1e3);
    }

    #[test]
    fn detuning_examples() {
        let cfg = NVConfig::default();
        let f0 = cfg.resonance();
        let (d1, d2) = hyperfine_detunings(&cfg, f0);
        assert!((d1 - 1.5e6).abs() < 1e-3 && (d2 + 1.5e6).abs() < 1e-3);
        let on_line = cfg.clone().on_lower_line();
        let (d1, d2) = on_line.detunings();
        assert!(d1.abs() < 1e-3 && (d2 + 3e6).abs() < 1e-3);
        let single = NVConfig { hyperfine: 0.0, drive_frequency: f0 + 2e6, ..cfg };
        let (d1, d2) = single.detunings();
        assert_eq!(d1, d2);
    }

    #[test]
    fn effective_rabi_examples() {
        assert_eq!(effective_rabi(3e6, 4e6), 5e6);
        assert!((effective_rabi(22.54e6, 1.5e6) - 22.59e6).abs() < 10e3);
        assert_eq!(effective_rabi(0.0, -1.5e6), 1.5e6);
    }

    #[test]
    fn trace_edge_cases() {
        let cfg = NVConfig::default();
        let tau = tau_grid(0.0, 20e-9, 100);
        let t = synthesize_trace(0.0, &NVConfig { hyperfine: 0.0, ..cfg.clone() }, &tau, 2e-6, 0.0, 1).unwrap();
        for (x, c) in t.tau.iter().zip(&t.contrast) {
            assert!((c - (-x / 2e-6).exp()).abs() < 1e-15);
        }
        let t = synthesize_trace(5e6, &cfg, &tau, 2e-6, 0.0, 1).unwrap();
        assert_eq!(t.contrast[0], 1.0);
        let mut bad = tau.clone();
        bad[50] += 3e-9;
        assert!(matches!(synthesize_trace(5e6, &cfg, &bad, 2e-6, 0.0, 1), Err(NvError::Tau(_))));
        assert!(synthesize_trace(5e6, &cfg, &tau[..1], 2e-6, 0.0, 1).is_err());
    }

    #[test]
    fn noisy_traces_are_seeded_and_bounded() {
        let cfg = NVConfig::default();
        let tau = tau_grid(0.0, 20e-9, 100);
        let a = synthesize_trace(5e6, &cfg, &tau, 2e-6, 0.8, 7).unwrap();
        let b = synthesize_trace(5e6, &cfg, &tau, 2e-6, 0.8, 7).unwrap();
        let c2 = synthesize_trace(5e6, &cfg, &tau, 2e-6, 0.8, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c2);
        assert!(a.contrast.iter().all(|v| (-1.5..=1.5).contains(v)));
        assert!(a.to_csv().starts_with("tau_s,contrast\n"));
    }

    #[test]
    fn lossless_trace_is_periodic() {
        let cfg = NVConfig::default();
        let omega0 = 4e6;
        let (d1, _) = cfg.detunings();
        let period = 1.0 / effective_rabi(omega0, d1);
        for &t in &[0.0, 37e-9, 0.21e-6] {
            let a = doublet_contrast(omega0, cfg.detunings(), t, f64::INFINITY);
            let b = doublet_contrast(omega0, cfg.detunings(), t + period, f64::INFINITY);
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(theta in 0.0f64..89.9) {
            let r = nv_rotation(&NVConfig { axis_polar_deg: theta, ..NVConfig::default() });
            for a in 0..3 {
                for b in 0..3 {
                    let d: f64 = (0..3).map(|k| r[a][k] * r[b][k]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((d - want).abs() < 1e-12);
                }
            }
            let det = crate::math::dot(r[0], crate::math::cross(r[1], r[2]));
            prop_assert!((det - 1.0).abs() < 1e-12);
        }

        #[test]
        fn frame_change_preserves_norm(v in prop::array::uniform6(-1.0f64..1.0), theta in 0.0f64..89.9) {
            let lab = [c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5])];
            let d = lab_to_nv(lab, &NVConfig { axis_polar_deg: theta, ..NVConfig::default() });
            let n0: f64 = lab.iter().map(|z| z.norm_sqr()).sum();
            let n1: f64 = d.0.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((n0 - n1).abs() < 1e-12);
        }

        #[test]
        fn circular_amplitudes_ignore_transverse_basis(v in prop::array::uniform4(-1.0f64..1.0), phi in 0.0f64..6.3) {
            let (x, y) = (c(v[0], v[1]), c(v[2], v[3]));
            let (s, co) = phi.sin_cos();
            let d0 = DriveField([x, y, c(0.3, 0.0)]);
            let d1 = DriveField([x * co + y * s, -x * s + y * co, c(0.3, 0.0)]);
            let (p0, m0) = circular_amplitudes(&d0);
            let (p1, m1) = circular_amplitudes(&d1);
            prop_assert!((p0 - p1).abs() < 1e-12 && (m0 - m1).abs() < 1e-12);
            let power = 0.5 * (x.norm_sqr() + y.norm_sqr());
            prop_assert!((p0 * p0 + m0 * m0 - power).abs() < 1e-12);
        }

        #[test]
        fn effective_rabi_bounds(o in 0.0f64..5e7, d in -5e7f64..5e7) {
            let e = effective_rabi(o, d);
            prop_assert!(e >= o && e >= d.abs());
            prop_assert!(effective_rabi(o * 1.01 + 1.0, d) > e);
        }
    }
}
