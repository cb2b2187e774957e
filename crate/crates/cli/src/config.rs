//! TOML run configuration.
//!
//! Lengths are in metres, frequencies in hertz, fields in tesla and times in
//! seconds. Relative paths resolve against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nvmap_core::fdtd::{HarmonicOptions, ProbeWindow};
use nvmap_core::scene::{AxisSpec, Boundary, ConductorModel, GridSpec, LayerStack, PatternMask, SourceSpec};
use nvmap_core::{nv, CameraConfig, NVConfig, Transition};

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub scene: SceneSection,
    pub solver: SolverSection,
    pub nv: NvSection,
    pub camera: CameraSection,
    pub pipeline: PipelineSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            out: PathBuf::from("out"),
            scene: SceneSection::default(),
            solver: SolverSection::default(),
            nv: NvSection::default(),
            camera: CameraSection::default(),
            pipeline: PipelineSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    #[default]
    Empty,
    Cross,
    Ring,
}

/// Pattern generated on the fly when no mask file is given.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PatternSection {
    pub kind: PatternKind,
    /// Side of the square raster.
    pub size: f64,
    pub pitch: f64,
    /// Cross stroke width or ring radial width.
    pub stroke: f64,
    /// Ring mean radius.
    pub radius: f64,
}

impl Default for PatternSection {
    fn default() -> Self {
        Self { kind: PatternKind::Empty, size: 30e-6, pitch: 0.5e-6, stroke: 1e-6, radius: 5e-6 }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Uniform,
    DipolePair,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub frequency: f64,
    /// Uniform drive direction.
    pub axis: [f64; 3],
    /// Uniform drive amplitude; arbitrary when the pipeline calibrates.
    pub amplitude: f64,
    pub center: [f64; 3],
    pub separation: f64,
    pub separation_axis: [f64; 3],
    pub dipole_axis: [f64; 3],
    pub moment: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            kind: SourceKind::Uniform,
            frequency: 3.01e9,
            axis: [0.0, 0.0, 1.0],
            amplitude: 1e-4,
            center: [0.0, 0.0, 30e-3],
            separation: 1e-3,
            separation_axis: [1.0, 0.0, 0.0],
            dipole_axis: [0.0, 1.0, 0.0],
            moment: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub cell: f64,
    /// Lateral half-width of the uniform core; defaults to the probe window
    /// plus one cell.
    pub half_width: Option<f64>,
    /// Uniform z core; defaults to two cells below the conductor mid-plane
    /// and two cells above the probe plane.
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub padding: f64,
    pub grading: f64,
    /// Largest padding cell as a multiple of `cell`.
    pub max_cell_factor: f64,
    pub pml_layers: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { cell: 0.5e-6, half_width: None, z_min: None, z_max: None, padding: 4e-6, grading: 1.2, max_cell_factor: 4.0, pml_layers: 8 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    /// PBM mask; takes precedence over `pattern`.
    pub mask: Option<PathBuf>,
    /// Mask pixel pitch when the mask has no sidecar header.
    pub mask_pitch: Option<f64>,
    pub pattern: PatternSection,
    pub conductor_thickness: f64,
    pub gap: f64,
    pub conductor_model: ConductorModelName,
    pub source: SourceSection,
    pub grid: GridSection,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            mask: None,
            mask_pitch: None,
            pattern: PatternSection::default(),
            conductor_thickness: 110e-9,
            gap: 3.4e-6,
            conductor_model: ConductorModelName::Sheet,
            source: SourceSection::default(),
            grid: GridSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConductorModelName {
    #[default]
    Sheet,
    Slab,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Probe window `[width, height]` centered on `window_center`; defaults
    /// to the camera field of view plus one cell on every side.
    pub window: Option<[f64; 2]>,
    pub window_center: [f64; 2],
    pub ramp_cycles: usize,
    pub dft_cycles: usize,
    pub max_cycles: usize,
    pub tolerance: f64,
    pub kr: f64,
    pub courant: f64,
    pub dielectric: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = HarmonicOptions::default();
        Self {
            window: None,
            window_center: [0.0, 0.0],
            ramp_cycles: o.ramp_cycles,
            dft_cycles: o.dft_cycles,
            max_cycles: o.max_cycles,
            tolerance: o.tolerance,
            kr: o.kr,
            courant: o.courant,
            dielectric: o.dielectric,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    /// Midway between the two hyperfine lines (Δ = ±A/2).
    #[default]
    DoubletCenter,
    /// On the lower hyperfine line (Δ = 0 for that line).
    LowerLine,
    /// At `drive_frequency`.
    Explicit,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransitionName {
    #[default]
    Plus,
    Minus,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NvSection {
    pub zero_field_splitting: f64,
    pub gamma: f64,
    pub b0: f64,
    pub axis_polar_deg: f64,
    pub hyperfine: f64,
    pub transition: TransitionName,
    pub drive: DriveMode,
    pub drive_frequency: Option<f64>,
}

impl Default for NvSection {
    fn default() -> Self {
        let d = NVConfig::default();
        Self {
            zero_field_splitting: d.zero_field_splitting,
            gamma: d.gamma,
            b0: d.b0,
            axis_polar_deg: d.axis_polar_deg,
            hyperfine: d.hyperfine,
            transition: TransitionName::Plus,
            drive: DriveMode::DoubletCenter,
            drive_frequency: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CameraSection {
    pub sensor: [usize; 2],
    pub fov: [f64; 2],
    pub center: [f64; 2],
    pub bin: usize,
    pub cycles: u64,
    pub repeats: u64,
    /// Zero disables the blur.
    pub psf_sigma: f64,
    pub noise_sigma0: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        let c = CameraConfig::default();
        Self {
            sensor: c.sensor,
            fov: c.fov,
            center: c.center,
            bin: c.bin,
            cycles: c.cycles,
            repeats: c.repeats,
            psf_sigma: c.psf_sigma.unwrap_or(0.0),
            noise_sigma0: c.noise_sigma0,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldInput {
    /// Run the solver first.
    #[default]
    Simulate,
    /// Read the field map written by a previous `simulate`.
    File,
    /// Uniform incident field only (bulk reference).
    Uniform,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Scale so the incident field alone gives `bulk_rabi` at `reference_dbm`.
    #[default]
    Bulk,
    /// Scale so the largest ideal pixel gives `hotspot_rabi` at `reference_dbm`.
    Hotspot,
    /// Use the simulated amplitude as is.
    None,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Noisy acquisition and extraction.
    #[default]
    Image,
    /// Noise-free, blur-free acquisition of a bin-constant ideal grid;
    /// reports the deviation of the extracted map from the ideal one.
    RoundTrip,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub field: FieldInput,
    /// Field map for `field = "file"`; defaults to `<out>/field.nvf`.
    pub field_map: Option<PathBuf>,
    pub mode: PipelineMode,
    pub calibration: Calibration,
    pub bulk_rabi: f64,
    pub hotspot_rabi: f64,
    pub reference_dbm: f64,
    pub power_dbm: f64,
    pub tau_start: f64,
    pub tau_step: f64,
    pub tau_count: usize,
    /// Exponential decay of the Rabi contrast; zero disables it.
    pub decay: f64,
    pub zero_fill: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            field: FieldInput::Simulate,
            field_map: None,
            mode: PipelineMode::Image,
            calibration: Calibration::Bulk,
            bulk_rabi: 1.22e6,
            hotspot_rabi: 22.54e6,
            reference_dbm: 29.3,
            power_dbm: 29.3,
            tau_start: 0.0,
            tau_step: 20e-9,
            tau_count: 100,
            decay: 2e-6,
            zero_fill: 10,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub powers_dbm: Vec<f64>,
    /// Skip acquisition and fit exact `f ∝ √P` values.
    pub inject: bool,
    /// Pulse-duration step for the sweep; defaults to the pipeline step.
    pub tau_step: Option<f64>,
    pub tau_count: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { powers_dbm: vec![17.3, 23.3, 29.3, 37.3], inject: false, tau_step: None, tau_count: None }
    }
}

/// A parsed config together with its hash and base directory.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// SHA-256 of the config file bytes, hex encoded.
    pub hash: String,
    pub base: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl LoadedConfig {
    pub fn from_str(text: &str, base: &Path) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        Ok(Self { config, hash: sha256_hex(text.as_bytes()), base: base.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out)
    }

    pub fn field_map_path(&self) -> PathBuf {
        match &self.config.pipeline.field_map {
            Some(p) => self.resolve(p),
            None => self.out_dir().join("field.nvf"),
        }
    }

    /// Check every section against its module contract.
    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        if c.threads == Some(0) {
            return Err(CliError::Validation("threads must be >= 1".into()));
        }
        if let Some(m) = &c.scene.mask {
            let p = self.resolve(m);
            if !p.exists() {
                return Err(CliError::Validation(format!("mask {} does not exist", p.display())));
            }
        }
        self.nv_config()?;
        self.camera()?.validate()?;
        self.harmonic_options().validate()?;
        let p = &c.pipeline;
        if !(p.bulk_rabi > 0.0 && p.hotspot_rabi > 0.0) {
            return Err(CliError::Validation("bulk_rabi and hotspot_rabi must be > 0".into()));
        }
        if p.zero_fill == 0 {
            return Err(CliError::Validation("zero_fill must be >= 1".into()));
        }
        if p.decay < 0.0 {
            return Err(CliError::Validation("decay must be >= 0".into()));
        }
        nv::validate_tau(&self.tau_grid())?;
        if self.tau_grid().len() < 8 {
            return Err(CliError::Validation("tau_count must be >= 8".into()));
        }
        if c.sweep.powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Validation("sweep powers must be finite".into()));
        }
        if matches!(p.field, FieldInput::Simulate) || c.scene.mask.is_some() {
            self.grid_spec()?.validate()?;
        }
        Ok(())
    }

    pub fn nv_config(&self) -> Result<NVConfig, CliError> {
        let s = &self.config.nv;
        let mut cfg = NVConfig {
            zero_field_splitting: s.zero_field_splitting,
            gamma: s.gamma,
            b0: s.b0,
            axis_polar_deg: s.axis_polar_deg,
            hyperfine: s.hyperfine,
            transition: match s.transition {
                TransitionName::Plus => Transition::Plus,
                TransitionName::Minus => Transition::Minus,
            },
            ..NVConfig::default()
        };
        cfg = match s.drive {
            DriveMode::DoubletCenter => cfg.at_doublet_center(),
            DriveMode::LowerLine => cfg.on_lower_line(),
            DriveMode::Explicit => {
                let f = s.drive_frequency.ok_or_else(|| CliError::Validation("drive = \"explicit\" needs drive_frequency".into()))?;
                NVConfig { drive_frequency: f, ..cfg }
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn camera(&self) -> Result<CameraConfig, CliError> {
        let s = &self.config.camera;
        let cam = CameraConfig {
            sensor: s.sensor,
            fov: s.fov,
            center: s.center,
            bin: s.bin,
            cycles: s.cycles,
            repeats: s.repeats,
            psf_sigma: if s.psf_sigma > 0.0 { Some(s.psf_sigma) } else { None },
            noise_sigma0: s.noise_sigma0,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        let p = &self.config.pipeline;
        nv::tau_grid(p.tau_start, p.tau_step, p.tau_count)
    }

    pub fn sweep_tau_grid(&self) -> Vec<f64> {
        let p = &self.config.pipeline;
        let s = &self.config.sweep;
        nv::tau_grid(p.tau_start, s.tau_step.unwrap_or(p.tau_step), s.tau_count.unwrap_or(p.tau_count))
    }

    pub fn decay(&self) -> f64 {
        let d = self.config.pipeline.decay;
        if d > 0.0 {
            d
        } else {
            f64::INFINITY
        }
    }

    pub fn harmonic_options(&self) -> HarmonicOptions {
        let s = &self.config.solver;
        HarmonicOptions {
            ramp_cycles: s.ramp_cycles,
            dft_cycles: s.dft_cycles,
            max_cycles: s.max_cycles,
            tolerance: s.tolerance,
            kr: s.kr,
            courant: s.courant,
            dielectric: s.dielectric,
            ..HarmonicOptions::default()
        }
    }

    pub fn probe_window(&self) -> Result<ProbeWindow, CliError> {
        let s = &self.config.solver;
        let cell = self.config.scene.grid.cell;
        let [w, h] = s.window.unwrap_or([self.config.camera.fov[0] + 2.0 * cell, self.config.camera.fov[1] + 2.0 * cell]);
        let [cx, cy] = s.window_center;
        Ok(ProbeWindow::new(cx - 0.5 * w, cx + 0.5 * w, cy - 0.5 * h, cy + 0.5 * h)?)
    }

    pub fn layer_stack(&self) -> LayerStack {
        let s = &self.config.scene;
        let mut stack = LayerStack::standard(s.conductor_thickness, s.gap);
        stack.conductor_model = match s.conductor_model {
            ConductorModelName::Sheet => ConductorModel::Sheet,
            ConductorModelName::Slab => ConductorModel::Slab,
        };
        stack
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let g = &self.config.scene.grid;
        let stack = self.layer_stack();
        let win = self.probe_window()?;
        let half = g.half_width.unwrap_or_else(|| {
            [win.x_min, win.x_max, win.y_min, win.y_max].iter().fold(0.0f64, |a, v| a.max(v.abs())) + g.cell
        });
        let t = stack.conductor_thickness();
        let z_min = g.z_min.unwrap_or(0.5 * t - 2.0 * g.cell);
        let z_max = g.z_max.unwrap_or(stack.probe_height() + 2.0 * g.cell);
        let max_cell = g.max_cell_factor * g.cell;
        let lateral = AxisSpec::graded(-half, half, g.cell, g.padding, g.grading, max_cell);
        let spec = GridSpec {
            x: lateral.clone(),
            y: lateral,
            z: AxisSpec::graded(z_min, z_max, g.cell, g.padding, g.grading, max_cell),
            boundary: Boundary::Pml { layers: g.pml_layers },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn source(&self) -> SourceSpec {
        let s = &self.config.scene.source;
        match s.kind {
            SourceKind::Uniform => SourceSpec::UniformField { axis: s.axis, amplitude: s.amplitude, frequency: s.frequency },
            SourceKind::DipolePair => SourceSpec::DipolePair {
                center: s.center,
                separation: s.separation,
                separation_axis: s.separation_axis,
                dipole_axis: s.dipole_axis,
                moment: s.moment,
                frequency: s.frequency,
            },
        }
    }

    pub fn pattern_mask(&self) -> Result<PatternMask, CliError> {
        let s = &self.config.scene;
        if let Some(m) = &s.mask {
            let p = self.resolve(m);
            if !p.exists() {
                return Err(CliError::Validation(format!("mask {} does not exist", p.display())));
            }
            let mask = match s.mask_pitch {
                Some(pitch) => nvmap_core::scene::load_pattern_mask(&p, pitch)?,
                None => nvmap_core::scene::load_mask(&p)?,
            };
            return Ok(mask);
        }
        let p = &s.pattern;
        if !(p.pitch > 0.0 && p.size >= p.pitch) {
            return Err(CliError::Validation("pattern size and pitch must be > 0".into()));
        }
        let px = (p.size / p.pitch).round() as usize;
        let mask = match p.kind {
            PatternKind::Empty => PatternMask::from_rows(px, px, p.pitch, None, vec![false; px * px])?,
            PatternKind::Cross => PatternMask::cross(px, ((p.stroke / p.pitch).round() as usize).max(1), p.pitch)?,
            PatternKind::Ring => PatternMask::ring(px, p.radius / p.pitch, p.stroke / p.pitch, p.pitch)?,
        };
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = LoadedConfig::from_str("", Path::new("/tmp")).unwrap();
        assert_eq!(c.config, RunConfig::default());
        assert_eq!(c.hash.len(), 64);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(LoadedConfig::from_str("[camera]\nbinning = 4\n", Path::new(".")), Err(CliError::Validation(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = LoadedConfig::from_str("seed = 1\n", Path::new(".")).unwrap();
        let b = LoadedConfig::from_str("seed = 2\n", Path::new(".")).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn grid_defaults_put_probe_inside_core() {
        let c = LoadedConfig::from_str("", Path::new(".")).unwrap();
        let g = c.grid_spec().unwrap();
        assert!(g.z.core_max > 3.51e-6 && g.z.core_min < 0.055e-6);
        assert!(g.x.core_max >= 0.5 * 34.9e-6);
    }

    #[test]
    fn bad_sections_fail_validation() {
        for text in ["threads = 0", "[camera]\nbin = 5", "[pipeline]\ntau_count = 4", "[pipeline]\nzero_fill = 0", "[nv]\ndrive = \"explicit\""] {
            let c = LoadedConfig::from_str(text, Path::new(".")).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
        let c = LoadedConfig::from_str("[scene]\nmask = \"nope.pbm\"", Path::new("/nonexistent")).unwrap();
        assert!(c.validate().is_err());
    }
}
