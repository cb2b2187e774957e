//! Synthetic widefield acquisition and its inversion into Rabi-frequency maps.
//!
//! Forward: field map → on-resonance Rabi frequency per camera pixel →
//! per-τ contrast frames (optional PSF blur, Gaussian noise) → binned,
//! reference-normalized traces. Inverse: zero-filled FFT peak per bin →
//! [`RabiMap`] → enhancement statistics and the √P linearity fit.

mod analysis;
mod export;
mod render;
mod spectrum;

use thiserror::Error;

pub use analysis::{
    build_rabi_map, enhancement_stats, expected_peak, fit_linearity, half_excess_widths, power_scale, uniform_amplitude_for_rabi, Enhancement,
    LinearFit, MapStats,
};
pub use export::{RABI_COMPONENTS, RABI_MAGIC};
pub use render::{bin_and_normalize, gaussian_blur, render_binned, render_frames, FrameStack, TraceGrid};
pub use spectrum::{extract_frequency, Peak};

use crate::fdtd::ComplexFieldMap;
use crate::nv::{self, NVConfig};
use crate::CVec3;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid camera configuration: {0}")]
    Camera(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Nv(#[from] nv::NvError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraConfig {
    /// Sensor size in pixels `[width, height]`.
    pub sensor: [usize; 2],
    /// Field of view `[width, height]`, m.
    pub fov: [f64; 2],
    /// Lab position of the field-of-view center, m.
    pub center: [f64; 2],
    /// Pixels per bin side.
    pub bin: usize,
    /// Sequence repetitions integrated into one frame.
    pub cycles: u64,
    /// Frames averaged per pulse duration.
    pub repeats: u64,
    /// Gaussian PSF standard deviation, m.
    pub psf_sigma: Option<f64>,
    /// Single-shot contrast noise; the frame noise is `σ0/√(cycles·repeats)`.
    pub noise_sigma0: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            sensor: [528, 512],
            fov: [34.9e-6, 33.9e-6],
            center: [0.0, 0.0],
            bin: 4,
            cycles: 24_000,
            repeats: 200,
            psf_sigma: Some(0.25e-6),
            noise_sigma0: 100.0,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), ImagingError> {
        let bad = |m: String| Err(ImagingError::Camera(m));
        if self.sensor[0] == 0 || self.sensor[1] == 0 {
            return bad("sensor must be at least 1x1".into());
        }
        if !(self.fov[0] > 0.0 && self.fov[1] > 0.0) {
            return bad("field of view must be > 0".into());
        }
        if self.bin == 0 || self.sensor[0] % self.bin != 0 || self.sensor[1] % self.bin != 0 {
            return bad(format!("bin {} must divide the sensor {}x{}", self.bin, self.sensor[0], self.sensor[1]));
        }
        if self.cycles == 0 || self.repeats == 0 {
            return bad("cycles and repeats must be >= 1".into());
        }
        if let Some(s) = self.psf_sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("PSF sigma must be >= 0".into());
            }
        }
        if !(self.noise_sigma0 >= 0.0) {
            return bad("noise sigma must be >= 0".into());
        }
        Ok(())
    }

    /// Pixel pitch `[dx, dy]`, m.
    pub fn pitch(&self) -> [f64; 2] {
        [self.fov[0] / self.sensor[0] as f64, self.fov[1] / self.sensor[1] as f64]
    }

    /// Center of pixel `(0, 0)` (lowest x and y).
    pub fn origin(&self) -> [f64; 2] {
        let p = self.pitch();
        [self.center[0] - 0.5 * self.fov[0] + 0.5 * p[0], self.center[1] - 0.5 * self.fov[1] + 0.5 * p[1]]
    }

    pub fn binned_dims(&self) -> [usize; 2] {
        [self.sensor[0] / self.bin, self.sensor[1] / self.bin]
    }

    /// Size of one bin on the sample, m.
    pub fn bin_footprint(&self) -> [f64; 2] {
        let p = self.pitch();
        [p[0] * self.bin as f64, p[1] * self.bin as f64]
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma0 / ((self.cycles * self.repeats) as f64).sqrt()
    }

    /// Empty grid with the camera's pixel geometry.
    pub fn pixel_grid(&self) -> RabiGrid {
        RabiGrid {
            nx: self.sensor[0],
            ny: self.sensor[1],
            pitch: self.pitch(),
            origin: self.origin(),
            values: vec![0.0; self.sensor[0] * self.sensor[1]],
        }
    }
}

/// Noise-free on-resonance Rabi frequency Ω0 (Hz) on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RabiGrid {
    pub nx: usize,
    pub ny: usize,
    pub pitch: [f64; 2],
    /// Center of sample `(0, 0)`.
    pub origin: [f64; 2],
    /// `nx * ny` values, x fastest.
    pub values: Vec<f64>,
}

impl RabiGrid {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Replicate every sample into a `factor × factor` block.
    pub fn upsampled(&self, factor: usize) -> Self {
        let (nx, ny) = (self.nx * factor, self.ny * factor);
        let values = (0..nx * ny).map(|n| self.get((n % nx) / factor, (n / nx) / factor)).collect();
        let f = factor as f64;
        let pitch = [self.pitch[0] / f, self.pitch[1] / f];
        let origin = [self.origin[0] - 0.5 * self.pitch[0] + 0.5 * pitch[0], self.origin[1] - 0.5 * self.pitch[1] + 0.5 * pitch[1]];
        Self { nx, ny, pitch, origin, values }
    }

    /// Mean over `factor × factor` blocks.
    pub fn binned(&self, factor: usize) -> Self {
        let (nx, ny) = (self.nx / factor, self.ny / factor);
        let norm = (factor * factor) as f64;
        let values = (0..nx * ny)
            .map(|n| {
                let (bx, by) = (n % nx, n / nx);
                let mut s = 0.0;
                for y in by * factor..(by + 1) * factor {
                    for x in bx * factor..(bx + 1) * factor {
                        s += self.get(x, y);
                    }
                }
                s / norm
            })
            .collect();
        let f = factor as f64;
        let pitch = [self.pitch[0] * f, self.pitch[1] * f];
        let origin = [self.origin[0] - 0.5 * self.pitch[0] + 0.5 * pitch[0], self.origin[1] - 0.5 * self.pitch[1] + 0.5 * pitch[1]];
        Self { nx, ny, pitch, origin, values }
    }
}

/// Ω0 of the configured transition for one lab-frame phasor.
pub fn rabi_of_field(b: CVec3, cfg: &NVConfig) -> f64 {
    let d = nv::lab_to_nv(b, cfg);
    nv::rabi_frequency(nv::transition_amplitude(&d, cfg.transition), cfg)
}

/// Ω0 at every sample of the field map.
pub fn field_rabi_grid(field: &ComplexFieldMap, cfg: &NVConfig) -> RabiGrid {
    RabiGrid {
        nx: field.nx,
        ny: field.ny,
        pitch: field.pitch,
        origin: field.origin,
        values: field.data.iter().map(|b| rabi_of_field(*b, cfg)).collect(),
    }
}

/// Bilinear interpolation of the field phasor at `(x, y)`; points within half
/// a pitch outside the sample hull are clamped to the edge.
fn sample_field(field: &ComplexFieldMap, x: f64, y: f64) -> Option<CVec3> {
    let ext = field.extent();
    let tol = 1e-9 * field.pitch[0].min(field.pitch[1]);
    if x < ext[0] - tol || x > ext[1] + tol || y < ext[2] - tol || y > ext[3] + tol {
        return None;
    }
    let locate = |v: f64, o: f64, p: f64, n: usize| -> (usize, usize, f64) {
        let u = ((v - o) / p).clamp(0.0, (n - 1) as f64);
        let i0 = (u.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, u - i0 as f64)
    };
    let (x0, x1, fx) = locate(x, field.origin[0], field.pitch[0], field.nx);
    let (y0, y1, fy) = locate(y, field.origin[1], field.pitch[1], field.ny);
    let (a, b, c, d) = (field.get(x0, y0), field.get(x1, y0), field.get(x0, y1), field.get(x1, y1));
    let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    Some(std::array::from_fn(|k| a[k] * w[0] + b[k] * w[1] + c[k] * w[2] + d[k] * w[3]))
}

/// Ω0 per camera pixel: the field map is resampled bilinearly onto the
/// pixel centers, then rotated into the NV frame and decomposed.
pub fn rabi_field_to_map(field: &ComplexFieldMap, cfg: &NVConfig, camera: &CameraConfig) -> Result<RabiGrid, ImagingError> {
    camera.validate()?;
    cfg.validate()?;
    let mut grid = camera.pixel_grid();
    let ext = field.extent();
    let (o, p) = (grid.origin, grid.pitch);
    let cam = [o[0] - 0.5 * p[0], o[0] + (grid.nx as f64 - 0.5) * p[0], o[1] - 0.5 * p[1], o[1] + (grid.ny as f64 - 0.5) * p[1]];
    if cam[1] <= ext[0] || cam[0] >= ext[1] || cam[3] <= ext[2] || cam[2] >= ext[3] {
        return Err(ImagingError::Geometry("camera field of view and field map do not overlap".into()));
    }
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = (o[0] + ix as f64 * p[0], o[1] + iy as f64 * p[1]);
            let b = sample_field(field, x, y).ok_or_else(|| {
                ImagingError::Geometry(format!(
                    "camera pixel at ({x:e}, {y:e}) m lies outside the field map [{:e}, {:e}] x [{:e}, {:e}]",
                    ext[0], ext[1], ext[2], ext[3]
                ))
            })?;
            grid.values[iy * grid.nx + ix] = rabi_of_field(b, cfg);
        }
    }
    Ok(grid)
}

/// Extracted Rabi frequencies on the binned grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RabiMap {
    pub nx: usize,
    pub ny: usize,
    /// Bin footprint `[dx, dy]`, m.
    pub pitch: [f64; 2],
    pub origin: [f64; 2],
    /// FFT peak frequency per bin, Hz.
    pub frequency: Vec<f64>,
    /// Half width at half maximum of that peak, Hz.
    pub hwhm: Vec<f64>,
    /// Bins excluded from statistics (no peak or bad reference).
    pub flagged: Vec<bool>,
}

impl RabiMap {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.origin[0] + ix as f64 * self.pitch[0], self.origin[1] + iy as f64 * self.pitch[1])
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    /// Mean, standard deviation and count over unflagged bins.
    pub fn stats(&self) -> MapStats {
        let v: Vec<f64> = self.frequency.iter().zip(&self.flagged).filter(|(_, &f)| !f).map(|(v, _)| *v).collect();
        let n = v.len();
        if n == 0 {
            return MapStats { mean: 0.0, std: 0.0, count: 0 };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        MapStats { mean, std: var.sqrt(), count: n }
    }

    /// On-resonance frequency `√(f² − Δ²)` assuming every bin was driven
    /// with detuning `delta`; bins with `f ≤ |Δ|` map to zero.
    pub fn on_resonance(&self, delta: f64) -> Vec<f64> {
        self.frequency.iter().map(|f| (f * f - delta * delta).max(0.0).sqrt()).collect()
    }
}
