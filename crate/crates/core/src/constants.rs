//! Physical constants (SI).

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 2.997_924_58e8;
/// Vacuum permeability, H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Free-space wave impedance, ohm.
pub const ETA0: f64 = MU0 * C0;

/// NV zero-field splitting, Hz.
pub const NV_ZERO_FIELD_SPLITTING: f64 = 2.87e9;
/// Electron gyromagnetic ratio used for NV physics, Hz/T.
pub const NV_GYROMAGNETIC_RATIO: f64 = 28e9;
/// 15N hyperfine splitting, Hz.
pub const N15_HYPERFINE: f64 = 3e6;
