//! Scattered-field FDTD solver for the quasi-magnetostatic near field of a
//! conductor pattern.
//!
//! The drive is a spatially uniform magnetic field `B̃` with its Faraday
//! partner `Ẽ = (iω/2)(r − r₀) × B̃`. Only the scattered field is stepped;
//! the incident field enters through the PEC edges (where the scattered E is
//! pinned to `−E_inc`) and is added back analytically on the probe plane.
//!
//! The pattern and domain are a tiny fraction of a wavelength, so the near
//! field is frequency independent to `O((kR)²)`. The solver therefore runs at
//! a reduced frequency chosen so that `kR` equals
//! [`HarmonicOptions::kr`], where `R` is the largest distance from `r₀` to
//! the conductor or probe window, and labels the result with the physical
//! drive frequency.

mod cpml;
mod fieldmap;
mod yee;

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

pub use cpml::CpmlParams;
pub use fieldmap::{ComplexFieldMap, FIELD_COMPONENTS, FIELD_MAGIC};
pub use yee::{Component, Engine, Fields};

use crate::constants::{C0, MU0};
use crate::math;
use crate::oracle;
use crate::scene::{voxelize, Mesh, SceneError, SourceSpec};
use crate::{CVec3, Scene, Vec3};

#[derive(Debug, Error)]
pub enum FdtdError {
    #[error("time step {dt:e} s exceeds the stability limit {dt_max:e} s")]
    Unstable { dt: f64, dt_max: f64 },
    #[error("non-finite {component} at cell {cell:?} after step {step}")]
    NonFinite { step: u64, component: &'static str, cell: [usize; 3] },
    #[error("no convergence after {cycles} cycles (relative change {metric:e})")]
    NonConvergence { metric: f64, cycles: usize },
    #[error("probe window: {0}")]
    Geometry(String),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Result of a stability check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cfl {
    pub dt_max: f64,
    pub accepted: bool,
}

/// Yee stability limit for the given smallest cell sizes.
pub fn cfl_limit(cells: [f64; 3]) -> f64 {
    let s: f64 = cells.iter().map(|d| 1.0 / (d * d)).sum();
    1.0 / (C0 * s.sqrt())
}

pub fn check_cfl(mesh: &Mesh, dt: f64) -> Cfl {
    let dt_max = cfl_limit(mesh.min_cells());
    Cfl { dt_max, accepted: dt > 0.0 && dt <= dt_max }
}

/// Lateral rectangle on the probe plane, m.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl ProbeWindow {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, FdtdError> {
        if !(x_max > x_min && y_max > y_min) {
            return Err(FdtdError::Geometry("window must have positive width and height".into()));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    /// Window of the given size centered on the origin.
    pub fn centered(width: f64, height: f64) -> Self {
        Self { x_min: -0.5 * width, x_max: 0.5 * width, y_min: -0.5 * height, y_max: 0.5 * height }
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [(self.x_min, self.y_min), (self.x_max, self.y_min), (self.x_min, self.y_max), (self.x_max, self.y_max)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicOptions {
    /// Periods of raised-cosine turn-on before the DFT starts.
    pub ramp_cycles: usize,
    /// Periods averaged into the returned phasor.
    pub dft_cycles: usize,
    /// Upper bound on total simulated periods.
    pub max_cycles: usize,
    /// Convergence threshold on the relative change between the last two
    /// single-period DFT windows.
    pub tolerance: f64,
    /// Electrical size `kR` the solver runs at.
    pub kr: f64,
    /// Time step as a fraction of the stability limit (before rounding down
    /// to a whole number of steps per period).
    pub courant: f64,
    /// Absorbing-layer parameters; `None` picks defaults for the solver frequency.
    pub cpml: Option<CpmlParams>,
    /// Include substrate permittivity.
    pub dielectric: bool,
    /// Steps between non-finite checks.
    pub check_interval: u64,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        Self {
            ramp_cycles: 10,
            dft_cycles: 4,
            max_cycles: 40,
            tolerance: 1e-3,
            kr: 0.2,
            courant: 0.99,
            cpml: None,
            dielectric: false,
            check_interval: 16,
        }
    }
}

impl HarmonicOptions {
    pub fn validate(&self) -> Result<(), FdtdError> {
        let bad = |m: &str| Err(FdtdError::Options(m.to_string()));
        if self.ramp_cycles < 1 || self.dft_cycles < 2 {
            return bad("need ramp_cycles >= 1 and dft_cycles >= 2");
        }
        if self.max_cycles < self.ramp_cycles + self.dft_cycles {
            return bad("max_cycles must cover ramp and DFT cycles");
        }
        if !(self.kr > 0.0 && self.kr <= 1.0) {
            return bad("kr must lie in (0, 1]");
        }
        if !(self.courant > 0.0 && self.courant <= 1.0) {
            return bad("courant must lie in (0, 1]");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        Ok(())
    }
}

/// Outcome of [`run_harmonic`].
#[derive(Clone, Debug)]
pub struct HarmonicRun {
    pub map: ComplexFieldMap,
    /// Relative change between the last two DFT windows.
    pub convergence: f64,
    pub cycles: usize,
    pub steps: u64,
    pub dt: f64,
    pub steps_per_period: usize,
    pub solver_frequency: f64,
    /// Scattered-field part of the map (total minus incident).
    pub scattered: Vec<CVec3>,
    pub incident: CVec3,
}

/// Uniform incident `B̃` (tesla) the source produces at `r`.
pub fn incident_field(source: &SourceSpec, r: Vec3) -> CVec3 {
    match source {
        SourceSpec::UniformField { axis, amplitude, .. } => {
            let a = math::normalize(*axis).unwrap_or([0.0, 0.0, 1.0]);
            a.map(|c| Complex64::new(c * amplitude, 0.0))
        }
        SourceSpec::DipolePair { center, separation, separation_axis, dipole_axis, moment, frequency } => {
            let s = math::normalize(*separation_axis).unwrap_or([1.0, 0.0, 0.0]);
            let p1 = math::add(*center, math::scale(s, -0.5 * separation));
            let p2 = math::add(*center, math::scale(s, 0.5 * separation));
            let phase = Complex64::from_polar(1.0, source.phase_offset());
            let b1 = oracle::hertzian_dipole_field(*moment, p1, *dipole_axis, *frequency, r).map(|f| f.1);
            let b2 = oracle::hertzian_dipole_field(*moment, p2, *dipole_axis, *frequency, r).map(|f| f.1);
            match (b1, b2) {
                (Ok(b1), Ok(b2)) => std::array::from_fn(|k| b1[k] + phase * b2[k]),
                _ => [Complex64::new(0.0, 0.0); 3],
            }
        }
    }
}

/// Interpolation stencil for one probe sample.
struct Sample {
    taps: [Vec<(usize, f64)>; 3],
}

struct Probe {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    pitch: [f64; 2],
    samples: Vec<Sample>,
}

fn build_probe(mesh: &Mesh, eng: &Engine, window: &ProbeWindow, z: f64) -> Result<Probe, FdtdError> {
    let pick = |a: usize, lo: f64, hi: f64| -> Result<Vec<usize>, FdtdError> {
        let ax = &mesh.axes[a];
        let (ilo, ihi) = ax.interior();
        let cells: Vec<usize> = (0..ax.cells()).filter(|&i| (lo..=hi).contains(&ax.center(i))).collect();
        let name = ['x', 'y'][a];
        if cells.is_empty() {
            return Err(FdtdError::Geometry(format!("no {name} cell centers inside [{lo:e}, {hi:e}]")));
        }
        let w0 = ax.cell(cells[0]);
        if cells.iter().any(|&i| (ax.cell(i) - w0).abs() > 1e-6 * w0) {
            return Err(FdtdError::Geometry(format!("window spans non-uniform {name} cells; keep it inside the uniform core")));
        }
        if ax.nodes[cells[0]] < ilo || ax.nodes[cells[cells.len() - 1] + 1] > ihi {
            return Err(FdtdError::Geometry(format!("window reaches into the {name} absorbing layers")));
        }
        Ok(cells)
    };
    let xs = pick(0, window.x_min, window.x_max)?;
    let ys = pick(1, window.y_min, window.y_max)?;
    let zax = &mesh.axes[2];
    let kp = zax.node_index(z).ok_or_else(|| FdtdError::Geometry(format!("probe height {z:e} m is not a z node")))?;
    if kp == 0 || kp >= zax.cells() {
        return Err(FdtdError::Geometry("probe plane on the domain boundary".into()));
    }
    let (zl, zh) = (zax.center(kp - 1), zax.center(kp));
    let wl = (zh - z) / (zh - zl);
    let wh = 1.0 - wl;
    let mut samples = Vec::with_capacity(xs.len() * ys.len());
    for &j in &ys {
        for &i in &xs {
            let hx = vec![
                (eng.index(i, j, kp - 1), 0.5 * wl),
                (eng.index(i + 1, j, kp - 1), 0.5 * wl),
                (eng.index(i, j, kp), 0.5 * wh),
                (eng.index(i + 1, j, kp), 0.5 * wh),
            ];
            let hy = vec![
                (eng.index(i, j, kp - 1), 0.5 * wl),
                (eng.index(i, j + 1, kp - 1), 0.5 * wl),
                (eng.index(i, j, kp), 0.5 * wh),
                (eng.index(i, j + 1, kp), 0.5 * wh),
            ];
            let hz = vec![(eng.index(i, j, kp), 1.0)];
            samples.push(Sample { taps: [hx, hy, hz] });
        }
    }
    Ok(Probe {
        nx: xs.len(),
        ny: ys.len(),
        origin: [mesh.axes[0].center(xs[0]), mesh.axes[1].center(ys[0])],
        pitch: [mesh.axes[0].cell(xs[0]), mesh.axes[1].cell(ys[0])],
        samples,
    })
}

/// Run the scene to periodic steady state and return `B̃` on the probe
/// plane over `window`.
pub fn run_harmonic(scene: &Scene, window: &ProbeWindow, opts: &HarmonicOptions) -> Result<HarmonicRun, FdtdError> {
    opts.validate()?;
    let grid = voxelize(scene);
    let z_p = scene.probe_z();
    let z_c = scene.conductor_z();

    // reference axis through the conductor (or window) center
    let (cx, cy) = match scene.mask.conductor_extent() {
        Some(e) => (0.5 * (e[0] + e[1]), 0.5 * (e[2] + e[3])),
        None => (0.5 * (window.x_min + window.x_max), 0.5 * (window.y_min + window.y_max)),
    };
    let r0 = [cx, cy, z_c];
    let mut reach: Vec<Vec3> = window.corners().iter().map(|&(x, y)| [x, y, z_p]).collect();
    if let Some(e) = scene.mask.conductor_extent() {
        reach.extend([[e[0], e[2], z_c], [e[1], e[2], z_c], [e[0], e[3], z_c], [e[1], e[3], z_c]]);
    }
    let radius = reach.iter().map(|r| math::norm(math::sub(*r, r0))).fold(0.0, f64::max);

    let f_phys = scene.source.frequency();
    let f_solver = f_phys.max(opts.kr * C0 / (2.0 * PI * radius.max(1e-12)));
    let omega = 2.0 * PI * f_solver;
    let period = 1.0 / f_solver;
    let dt_max = check_cfl(&grid.mesh, 1.0).dt_max;
    let n_per = (period / (opts.courant * dt_max)).ceil() as usize;
    let dt = period / n_per as f64;

    let b_inc = incident_field(&scene.source, r0);
    let cp = opts.cpml.unwrap_or_else(|| CpmlParams::for_frequency(omega));
    let mut eng = Engine::new(&grid, dt, Some(cp), opts.dielectric)?;
    let i_omega_half = Complex64::new(0.0, 0.5 * omega);
    eng.set_incident(omega, opts.ramp_cycles as f64 * period, |r| {
        let d = math::sub(r, r0);
        // (iω/2) d × B
        [
            i_omega_half * (d[1] * b_inc[2] - d[2] * b_inc[1]),
            i_omega_half * (d[2] * b_inc[0] - d[0] * b_inc[2]),
            i_omega_half * (d[0] * b_inc[1] - d[1] * b_inc[0]),
        ]
    });
    let probe = build_probe(&grid.mesh, &eng, window, z_p)?;

    eng.run((opts.ramp_cycles * n_per) as u64, opts.check_interval)?;

    // one DFT window per period
    let ns = probe.samples.len();
    let mut windows: VecDeque<Vec<CVec3>> = VecDeque::new();
    let mut cycles = opts.ramp_cycles;
    let mut metric = f64::INFINITY;
    let total = |w: &[CVec3]| -> Vec<CVec3> { w.iter().map(|b| std::array::from_fn(|k| b[k] + b_inc[k])).collect() };
    loop {
        let mut acc = vec![[Complex64::new(0.0, 0.0); 3]; ns];
        for _ in 0..n_per {
            eng.step();
            if opts.check_interval > 0 && eng.steps() % opts.check_interval == 0 {
                eng.check_finite()?;
            }
            let t_h = (eng.steps() as f64 - 0.5) * dt;
            let ph = Complex64::from_polar(1.0, -omega * t_h);
            let h = &eng.fields().h;
            for (s, a) in probe.samples.iter().zip(acc.iter_mut()) {
                for k in 0..3 {
                    let v: f64 = s.taps[k].iter().map(|&(idx, w)| w * h[k][idx] as f64).sum();
                    a[k] += ph * v;
                }
            }
        }
        let scale = 2.0 * MU0 / n_per as f64;
        for a in &mut acc {
            for c in a.iter_mut() {
                *c *= scale;
            }
        }
        if let Some(prev) = windows.back() {
            let (last, prev) = (total(&acc), total(prev));
            let diff: f64 = last.iter().zip(&prev).flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).norm_sqr())).sum();
            let norm: f64 = last.iter().flat_map(|a| a.iter()).map(|c| c.norm_sqr()).sum();
            metric = (diff / norm.max(f64::MIN_POSITIVE)).sqrt();
        }
        windows.push_back(acc);
        if windows.len() > opts.dft_cycles {
            windows.pop_front();
        }
        cycles += 1;
        if windows.len() == opts.dft_cycles && metric <= opts.tolerance {
            break;
        }
        if cycles >= opts.max_cycles {
            return Err(FdtdError::NonConvergence { metric, cycles });
        }
    }

    let k = windows.len() as f64;
    let scattered: Vec<CVec3> = (0..ns)
        .map(|s| std::array::from_fn(|c| windows.iter().map(|w| w[s][c]).sum::<Complex64>() / k))
        .collect();
    let map = ComplexFieldMap {
        nx: probe.nx,
        ny: probe.ny,
        pitch: probe.pitch,
        origin: probe.origin,
        plane_z: z_p,
        frequency: f_phys,
        solver_frequency: f_solver,
        data: total(&scattered),
    };
    Ok(HarmonicRun {
        map,
        convergence: metric,
        cycles,
        steps: eng.steps(),
        dt,
        steps_per_period: n_per,
        solver_frequency: f_solver,
        scattered,
        incident: b_inc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfl_examples() {
        let dt = cfl_limit([1e-6; 3]);
        assert!((dt - 1e-6 / (C0 * 3f64.sqrt())).abs() < 1e-12 * dt);
        assert!((dt - 1.925e-15).abs() < 1e-18, "{dt:e}");
        let one_d = cfl_limit([1e-6, 1e30, 1e30]);
        assert!((one_d - 1e-6 / C0).abs() < 1e-12 * one_d);
        let mesh = Mesh { axes: std::array::from_fn(|_| crate::scene::AxisMesh::uniform(0.0, 1e-6, 4, crate::scene::AxisBoundary::Pec)) };
        assert!(check_cfl(&mesh, dt).accepted);
        assert!(!check_cfl(&mesh, 2.0 * dt).accepted);
    }

    #[test]
    fn option_validation() {
        HarmonicOptions::default().validate().unwrap();
        let bad = HarmonicOptions { dft_cycles: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HarmonicOptions { max_cycles: 5, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(ProbeWindow::new(1.0, 0.0, 0.0, 1.0).is_err());
    }
}
