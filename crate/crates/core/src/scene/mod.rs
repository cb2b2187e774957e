//! Simulation geometry: pattern mask, layer stack, source and grid.

mod grid;
mod mask;
mod voxel;

use std::path::Path;

use thiserror::Error;

use crate::Vec3;

pub use grid::{AxisBoundary, AxisMesh, AxisSpec, Boundary, GridSpec, Mesh};
pub use mask::{header_path, load_mask, load_pattern_mask, PatternMask};
pub use voxel::{voxelize, Axis, MaterialGrid, SheetConductor};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("parse error at line {line}, byte {offset}: {message}")]
    Parse { line: usize, offset: usize, message: String },
    #[error("invalid scene: {0}")]
    Validation(String),
    #[error("pattern exceeds the simulation domain: {0}")]
    Bounds(String),
    #[error("probe plane placement: {0}")]
    Placement(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl SceneError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SceneError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    pub name: String,
    pub eps_r: f64,
    pub conductor: bool,
}

impl Material {
    pub fn new(name: &str, eps_r: f64) -> Self {
        Self { name: name.to_string(), eps_r, conductor: false }
    }

    pub fn vacuum() -> Self {
        Self::new("vacuum", 1.0)
    }

    pub fn silicon() -> Self {
        Self::new("silicon", 11.7)
    }

    pub fn diamond() -> Self {
        Self::new("diamond", 5.7)
    }

    /// Gold, modelled as a perfect electric conductor.
    pub fn gold() -> Self {
        Self { name: "gold".into(), eps_r: 1.0, conductor: true }
    }

    /// Look up one of the built-in materials by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "vacuum" | "air" => Some(Self::vacuum()),
            "silicon" => Some(Self::silicon()),
            "diamond" => Some(Self::diamond()),
            "gold" | "pec" => Some(Self::gold()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub material: Material,
    pub thickness: f64,
}

/// How the thin conductor layer is put on the mesh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConductorModel {
    /// Zero-thickness PEC sheet on the z node closest to the layer mid-plane.
    #[default]
    Sheet,
    /// PEC cells spanning the layer (at least one cell thick).
    Slab,
}

/// Layers listed bottom to top. The bottom face of the single conductor layer
/// sits at `z = 0`; the probe plane is `gap` above its top face.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    pub gap: f64,
    pub conductor_model: ConductorModel,
}

impl Default for LayerStack {
    fn default() -> Self {
        Self::standard(110e-9, 3.4e-6)
    }
}

impl LayerStack {
    /// Silicon substrate, conductor film, air gap, diamond.
    pub fn standard(conductor_thickness: f64, gap: f64) -> Self {
        Self {
            layers: vec![
                Layer { material: Material::silicon(), thickness: 500e-6 },
                Layer { material: Material::gold(), thickness: conductor_thickness },
                Layer { material: Material::vacuum(), thickness: gap },
                Layer { material: Material::diamond(), thickness: 500e-6 },
            ],
            gap,
            conductor_model: ConductorModel::Sheet,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.layers.iter().any(|l| !(l.thickness > 0.0 && l.thickness.is_finite())) {
            return Err(SceneError::Validation("layer thicknesses must be > 0".into()));
        }
        if self.layers.iter().any(|l| !(l.material.eps_r >= 1.0)) {
            return Err(SceneError::Validation("relative permittivity must be >= 1".into()));
        }
        let n = self.layers.iter().filter(|l| l.material.conductor).count();
        if n != 1 {
            return Err(SceneError::Validation(format!("exactly one conductor layer required, found {n}")));
        }
        if !(self.gap > 0.0) {
            return Err(SceneError::Validation("probe gap must be > 0".into()));
        }
        Ok(())
    }

    fn conductor_index(&self) -> usize {
        self.layers.iter().position(|l| l.material.conductor).unwrap()
    }

    pub fn conductor_thickness(&self) -> f64 {
        self.layers[self.conductor_index()].thickness
    }

    /// Height of the probe plane above `z = 0`.
    pub fn probe_height(&self) -> f64 {
        self.conductor_thickness() + self.gap
    }

    /// `(z_bottom, z_top, layer)` for every layer.
    pub fn placed(&self) -> Vec<(f64, f64, &Layer)> {
        let c = self.conductor_index();
        let mut z = -self.layers[..c].iter().map(|l| l.thickness).sum::<f64>();
        self.layers
            .iter()
            .map(|l| {
                let lo = z;
                z += l.thickness;
                (lo, z, l)
            })
            .collect()
    }
}

/// Excitation driving the pattern.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    /// Spatially uniform, linearly polarized magnetic drive.
    UniformField { axis: Vec3, amplitude: f64, frequency: f64 },
    /// Two identical electric dipoles driven in antiphase.
    DipolePair {
        /// Midpoint between the two dipoles.
        center: Vec3,
        separation: f64,
        /// Direction from the first to the second dipole.
        separation_axis: Vec3,
        /// Orientation of both dipole moments.
        dipole_axis: Vec3,
        /// Current moment I·l of each dipole, A·m.
        moment: f64,
        frequency: f64,
    },
}

impl SourceSpec {
    /// Uniform drive along lab z.
    pub fn uniform_z(amplitude: f64, frequency: f64) -> Self {
        SourceSpec::UniformField { axis: [0.0, 0.0, 1.0], amplitude, frequency }
    }

    pub fn frequency(&self) -> f64 {
        match self {
            SourceSpec::UniformField { frequency, .. } | SourceSpec::DipolePair { frequency, .. } => *frequency,
        }
    }

    /// Phase of the second dipole relative to the first.
    pub fn phase_offset(&self) -> f64 {
        match self {
            SourceSpec::UniformField { .. } => 0.0,
            SourceSpec::DipolePair { .. } => std::f64::consts::PI,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::Validation(format!("source: {m}")));
        let f = self.frequency();
        if !(f > 0.0 && f.is_finite()) {
            return bad("frequency must be > 0");
        }
        match self {
            SourceSpec::UniformField { axis, amplitude, .. } => {
                if !(*amplitude > 0.0) {
                    return bad("amplitude must be > 0");
                }
                if crate::math::normalize(*axis).is_none() {
                    return bad("polarization axis must be non-zero");
                }
            }
            SourceSpec::DipolePair { separation, separation_axis, dipole_axis, moment, .. } => {
                if !(*moment > 0.0) || !(*separation > 0.0) {
                    return bad("dipole moment and separation must be > 0");
                }
                if crate::math::normalize(*separation_axis).is_none() || crate::math::normalize(*dipole_axis).is_none() {
                    return bad("dipole axes must be non-zero");
                }
            }
        }
        Ok(())
    }
}

/// Geometric digest of a built scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSummary {
    pub extents: [[f64; 2]; 3],
    pub dims: [usize; 3],
    pub cells: usize,
    /// Conductor faces (sheet model) or cells (slab model).
    pub conductor_voxels: usize,
    pub probe_z: f64,
    pub warnings: Vec<String>,
}

/// Immutable, validated simulation setup.
#[derive(Clone, Debug)]
pub struct Scene {
    pub mask: PatternMask,
    pub stack: LayerStack,
    pub source: SourceSpec,
    pub grid: GridSpec,
    pub mesh: Mesh,
    pub summary: SceneSummary,
}

impl Scene {
    pub fn probe_z(&self) -> f64 {
        self.summary.probe_z
    }

    /// Height of the conductor sheet (sheet model) or bottom face (slab model).
    pub fn conductor_z(&self) -> f64 {
        match self.stack.conductor_model {
            ConductorModel::Sheet => 0.5 * self.stack.conductor_thickness(),
            ConductorModel::Slab => 0.0,
        }
    }
}

pub fn build_scene(mask: PatternMask, stack: LayerStack, source: SourceSpec, grid: GridSpec) -> Result<Scene, SceneError> {
    stack.validate()?;
    source.validate()?;
    grid.validate()?;
    let t = stack.conductor_thickness();
    let probe_z = stack.probe_height();
    let anchors: Vec<f64> = match stack.conductor_model {
        ConductorModel::Sheet => vec![0.5 * t, probe_z],
        ConductorModel::Slab => vec![0.0, t, probe_z],
    };
    let mesh = grid.mesh(&anchors)?;

    let (zlo, zhi) = mesh.axes[2].interior();
    if !(probe_z > zlo && probe_z < zhi) {
        return Err(SceneError::Placement(format!(
            "probe plane z = {probe_z:e} m is not strictly inside the non-PML region [{zlo:e}, {zhi:e}]"
        )));
    }
    if mesh.axes[2].node_index(probe_z).is_none() {
        return Err(SceneError::Placement(format!(
            "probe plane z = {probe_z:e} m lies outside the uniform z core [{:e}, {:e}]",
            grid.z.core_min, grid.z.core_max
        )));
    }
    let cz = if stack.conductor_model == ConductorModel::Sheet { 0.5 * t } else { 0.0 };
    if !(cz > zlo && cz < zhi) {
        return Err(SceneError::Placement("conductor layer outside the non-PML region".into()));
    }
    if let Some(e) = mask.conductor_extent() {
        let (xlo, xhi) = mesh.axes[0].interior();
        let (ylo, yhi) = mesh.axes[1].interior();
        if e[0] < xlo || e[1] > xhi || e[2] < ylo || e[3] > yhi {
            return Err(SceneError::Bounds(format!(
                "conductor spans x [{:e}, {:e}] y [{:e}, {:e}], domain interior is x [{xlo:e}, {xhi:e}] y [{ylo:e}, {yhi:e}]",
                e[0], e[1], e[2], e[3]
            )));
        }
    }

    let mut warnings = Vec::new();
    if let Some(w) = mask.min_feature_width() {
        let cell = grid.x.cell.max(grid.y.cell);
        if cell > w {
            warnings.push(format!("lateral cell size {cell:e} m exceeds the narrowest conductor feature {w:e} m"));
        }
    }
    let faces = voxel::sheet_faces(&mask, &mesh);
    let conductor_voxels = match stack.conductor_model {
        ConductorModel::Sheet => faces.iter().filter(|&&f| f).count(),
        ConductorModel::Slab => faces.iter().filter(|&&f| f).count() * voxel::slab_levels(&stack, &mesh).len(),
    };
    let summary = SceneSummary {
        extents: mesh.extents(),
        dims: mesh.dims(),
        cells: mesh.cell_count(),
        conductor_voxels,
        probe_z,
        warnings,
    };
    Ok(Scene { mask, stack, source, grid, mesh, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_grid(half: f64, cell: f64) -> GridSpec {
        GridSpec {
            x: AxisSpec::graded(-half, half, cell, 4.0 * cell, 1.2, 4.0 * cell),
            y: AxisSpec::graded(-half, half, cell, 4.0 * cell, 1.2, 4.0 * cell),
            z: AxisSpec::graded(-2e-6, 5e-6, 0.5e-6, 4.0 * cell, 1.2, 4.0 * cell),
            boundary: Boundary::Pml { layers: 8 },
        }
    }

    #[test]
    fn cross_scene_is_valid() {
        let mask = PatternMask::cross(20, 2, 0.5e-6).unwrap();
        let s = build_scene(mask, LayerStack::default(), SourceSpec::uniform_z(1e-4, 3.010e9), small_grid(6e-6, 0.5e-6)).unwrap();
        assert!((s.probe_z() - 3.51e-6).abs() < 1e-15);
        assert!(s.summary.conductor_voxels > 0);
        assert!(s.mesh.axes[2].node_index(s.probe_z()).is_some());
        assert!(s.mesh.axes[2].node_index(55e-9).is_some());
    }

    #[test]
    fn probe_inside_pml_is_rejected() {
        let mask = PatternMask::cross(8, 2, 0.5e-6).unwrap();
        let mut g = small_grid(4e-6, 0.5e-6);
        g.z = AxisSpec::uniform(-2e-6, 2e-6, 0.5e-6);
        let err = build_scene(mask, LayerStack::default(), SourceSpec::uniform_z(1e-4, 3e9), g).unwrap_err();
        assert!(matches!(err, SceneError::Placement(_)), "{err}");
    }

    #[test]
    fn oversize_mask_is_rejected() {
        let mask = PatternMask::cross(40, 2, 1e-6).unwrap();
        let err = build_scene(mask, LayerStack::default(), SourceSpec::uniform_z(1e-4, 3e9), small_grid(4e-6, 0.5e-6)).unwrap_err();
        assert!(matches!(err, SceneError::Bounds(_)));
    }

    #[test]
    fn coarse_cells_raise_a_warning() {
        let mask = PatternMask::cross(8, 1, 0.5e-6).unwrap();
        let s = build_scene(mask, LayerStack::default(), SourceSpec::uniform_z(1e-4, 3e9), small_grid(4e-6, 1e-6)).unwrap();
        assert_eq!(s.summary.warnings.len(), 1);
    }

    #[test]
    fn stack_validation() {
        let mut st = LayerStack::default();
        st.layers.push(Layer { material: Material::gold(), thickness: 1e-7 });
        assert!(st.validate().is_err());
        let mut st = LayerStack::default();
        st.layers[0].thickness = 0.0;
        assert!(st.validate().is_err());
        let src = SourceSpec::uniform_z(0.0, 3e9);
        assert!(src.validate().is_err());
        let pair = SourceSpec::DipolePair {
            center: [0.0, 0.0, 30e-3],
            separation: 10e-3,
            separation_axis: [0.0, 1.0, 0.0],
            dipole_axis: [1.0, 0.0, 0.0],
            moment: 1e-3,
            frequency: 3.01e9,
        };
        pair.validate().unwrap();
        assert_eq!(pair.phase_offset(), std::f64::consts::PI);
    }
}
