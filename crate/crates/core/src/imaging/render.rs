//! Frame rendering, PSF blur and binning.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CameraConfig, ImagingError, RabiGrid};
use crate::nv::{self, NVConfig};

/// Reference means below this are treated as missing signal.
const REFERENCE_FLOOR: f64 = 1e-6;

/// Raw signal and reference frames, one pair per pulse duration.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    pub width: usize,
    pub height: usize,
    pub tau: Vec<f64>,
    pub signal: Vec<Vec<f32>>,
    pub reference: Vec<Vec<f32>>,
}

/// Binned, reference-normalized traces.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceGrid {
    pub nx: usize,
    pub ny: usize,
    pub pitch: [f64; 2],
    pub origin: [f64; 2],
    pub tau: Vec<f64>,
    /// `nx * ny * tau.len()`, trace-major: bin `(ix, iy)` owns
    /// `data[(iy * nx + ix) * nt ..][.. nt]`.
    pub data: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl TraceGrid {
    pub fn trace(&self, ix: usize, iy: usize) -> &[f64] {
        let nt = self.tau.len();
        let b = (iy * self.nx + ix) * nt;
        &self.data[b..b + nt]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn from_frames(camera: &CameraConfig, tau: &[f64], frames: Vec<(Vec<f64>, Vec<bool>)>) -> Self {
        let [nx, ny] = camera.binned_dims();
        let nt = tau.len();
        let mut data = vec![0.0; nx * ny * nt];
        let mut flagged = vec![false; nx * ny];
        for (t, (vals, flags)) in frames.iter().enumerate() {
            for b in 0..nx * ny {
                data[b * nt + t] = vals[b];
                flagged[b] |= flags[b];
            }
        }
        let fp = camera.bin_footprint();
        let o = camera.origin();
        let p = camera.pitch();
        let origin = [o[0] - 0.5 * p[0] + 0.5 * fp[0], o[1] - 0.5 * p[1] + 0.5 * fp[1]];
        Self { nx, ny, pitch: fp, origin, tau: tau.to_vec(), data, flagged }
    }
}

fn gaussian_kernel(sigma_px: f64) -> Vec<f64> {
    let r = (4.0 * sigma_px).ceil().max(1.0) as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-0.5 * (i as f64 / sigma_px).powi(2)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// One separable pass along rows (`stride == 1`) or columns. The kernel is
/// renormalized where it is cut by the frame edge, so flat frames stay flat.
fn blur_axis(src: &[f32], dst: &mut [f32], w: usize, h: usize, kernel: &[f64], along_x: bool) {
    let r = (kernel.len() / 2) as isize;
    let (n, lines) = if along_x { (w, h) } else { (h, w) };
    for line in 0..lines {
        let at = |i: usize| if along_x { line * w + i } else { i * w + line };
        for i in 0..n {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, &kv) in kernel.iter().enumerate() {
                let j = i as isize + k as isize - r;
                if j >= 0 && (j as usize) < n {
                    acc += kv * src[at(j as usize)] as f64;
                    norm += kv;
                }
            }
            dst[at(i)] = (acc / norm) as f32;
        }
    }
}

/// Separable Gaussian blur with standard deviations given in pixels.
pub fn gaussian_blur(frame: &mut [f32], width: usize, height: usize, sigma_px: [f64; 2]) {
    let mut tmp = vec![0.0f32; frame.len()];
    if sigma_px[0] > 0.0 {
        blur_axis(frame, &mut tmp, width, height, &gaussian_kernel(sigma_px[0]), true);
        frame.copy_from_slice(&tmp);
    }
    if sigma_px[1] > 0.0 {
        blur_axis(frame, &mut tmp, width, height, &gaussian_kernel(sigma_px[1]), false);
        frame.copy_from_slice(&tmp);
    }
}

fn check_inputs(ideal: &RabiGrid, nv_cfg: &NVConfig, camera: &CameraConfig, tau: &[f64], decay: f64) -> Result<(), ImagingError> {
    camera.validate()?;
    nv_cfg.validate()?;
    nv::validate_tau(tau)?;
    if ideal.nx != camera.sensor[0] || ideal.ny != camera.sensor[1] {
        return Err(ImagingError::Geometry(format!(
            "ideal grid is {}x{} but the sensor is {}x{}",
            ideal.nx, ideal.ny, camera.sensor[0], camera.sensor[1]
        )));
    }
    if !(decay > 0.0) {
        return Err(ImagingError::Invalid("decay time must be > 0".into()));
    }
    if ideal.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ImagingError::Invalid("ideal Rabi grid must be finite and >= 0".into()));
    }
    Ok(())
}

/// Frame pair for pulse duration index `t`. Noise for frame `t` comes from
/// its own ChaCha streams, so results do not depend on evaluation order.
fn frame_pair(ideal: &RabiGrid, camera: &CameraConfig, det: (f64, f64), tau: f64, t: usize, decay: f64, seed: u64) -> (Vec<f32>, Vec<f32>) {
    let mut signal: Vec<f32> = ideal.values.iter().map(|&w| nv::doublet_contrast(w, det, tau, decay) as f32).collect();
    let mut reference = vec![1.0f32; signal.len()];
    if let Some(s) = camera.psf_sigma.filter(|s| *s > 0.0) {
        let p = camera.pitch();
        gaussian_blur(&mut signal, camera.sensor[0], camera.sensor[1], [s / p[0], s / p[1]]);
    }
    let sigma = camera.noise_sigma();
    if sigma > 0.0 {
        for (frame, stream) in [(&mut signal, 2 * t as u64), (&mut reference, 2 * t as u64 + 1)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            for v in frame.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v += (sigma * n) as f32;
            }
        }
    }
    (signal, reference)
}

/// Bin means of `signal / reference`; bins whose reference mean is below
/// the floor are flagged and set to zero.
fn bin_frame(signal: &[f32], reference: &[f32], w: usize, h: usize, bin: usize) -> (Vec<f64>, Vec<bool>) {
    let (nx, ny) = (w / bin, h / bin);
    let mut s = vec![0.0f64; nx * ny];
    let mut r = vec![0.0f64; nx * ny];
    for y in 0..ny * bin {
        for x in 0..nx * bin {
            let b = (y / bin) * nx + x / bin;
            s[b] += signal[y * w + x] as f64;
            r[b] += reference[y * w + x] as f64;
        }
    }
    let norm = (bin * bin) as f64;
    let mut flags = vec![false; nx * ny];
    for b in 0..nx * ny {
        let (ms, mr) = (s[b] / norm, r[b] / norm);
        if mr.abs() < REFERENCE_FLOOR {
            flags[b] = true;
            s[b] = 0.0;
        } else {
            s[b] = ms / mr;
        }
    }
    (s, flags)
}

/// Full-resolution frames for every pulse duration. Memory grows as
/// `2 · width · height · tau.len()` floats; see [`render_binned`].
pub fn render_frames(ideal: &RabiGrid, nv_cfg: &NVConfig, camera: &CameraConfig, tau: &[f64], decay: f64, seed: u64) -> Result<FrameStack, ImagingError> {
    check_inputs(ideal, nv_cfg, camera, tau, decay)?;
    let det = nv_cfg.detunings();
    let (signal, reference): (Vec<_>, Vec<_>) =
        tau.par_iter().enumerate().map(|(t, &ta)| frame_pair(ideal, camera, det, ta, t, decay, seed)).unzip();
    Ok(FrameStack { width: camera.sensor[0], height: camera.sensor[1], tau: tau.to_vec(), signal, reference })
}

/// Binning and reference normalization of a rendered stack.
pub fn bin_and_normalize(stack: &FrameStack, camera: &CameraConfig) -> Result<TraceGrid, ImagingError> {
    camera.validate()?;
    if stack.width != camera.sensor[0] || stack.height != camera.sensor[1] {
        return Err(ImagingError::Geometry("frame size does not match the sensor".into()));
    }
    let frames = stack
        .signal
        .par_iter()
        .zip(&stack.reference)
        .map(|(s, r)| bin_frame(s, r, stack.width, stack.height, camera.bin))
        .collect();
    Ok(TraceGrid::from_frames(camera, &stack.tau, frames))
}

/// Same result as `bin_and_normalize(render_frames(..))` without holding the
/// full-resolution stack.
pub fn render_binned(ideal: &RabiGrid, nv_cfg: &NVConfig, camera: &CameraConfig, tau: &[f64], decay: f64, seed: u64) -> Result<TraceGrid, ImagingError> {
    check_inputs(ideal, nv_cfg, camera, tau, decay)?;
    let det = nv_cfg.detunings();
    let frames = tau
        .par_iter()
        .enumerate()
        .map(|(t, &ta)| {
            let (s, r) = frame_pair(ideal, camera, det, ta, t, decay, seed);
            bin_frame(&s, &r, camera.sensor[0], camera.sensor[1], camera.bin)
        })
        .collect();
    Ok(TraceGrid::from_frames(camera, tau, frames))
}
