//! Grid specifications and the rectilinear mesh derived from them.

use super::SceneError;

/// One axis of the simulation grid.
///
/// The uniform core `[core_min, core_max]` is meshed with cells no larger than
/// `cell`, with nodes forced onto any anchor that lies inside it. Outside the
/// core the cells grow geometrically by `grading` per cell (capped at
/// `max_cell`) until `padding` is covered. Absorbing layers, when selected,
/// are appended beyond the padding.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    pub core_min: f64,
    pub core_max: f64,
    pub cell: f64,
    pub padding: f64,
    pub grading: f64,
    pub max_cell: f64,
}

impl AxisSpec {
    pub fn uniform(core_min: f64, core_max: f64, cell: f64) -> Self {
        Self { core_min, core_max, cell, padding: 0.0, grading: 1.0, max_cell: cell }
    }

    pub fn graded(core_min: f64, core_max: f64, cell: f64, padding: f64, grading: f64, max_cell: f64) -> Self {
        Self { core_min, core_max, cell, padding, grading, max_cell }
    }

    fn validate(&self, name: char) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Validation(format!("{name}-axis: {m}")));
        if !(self.cell > 0.0 && self.cell.is_finite()) {
            return bad(format!("cell size must be > 0, got {}", self.cell));
        }
        if !(self.core_max > self.core_min) {
            return bad("core_max must exceed core_min".into());
        }
        if !(1.0..=1.2).contains(&self.grading) {
            return bad(format!("grading ratio {} outside [1, 1.2]", self.grading));
        }
        if self.padding < 0.0 || self.max_cell < self.cell {
            return bad("padding must be >= 0 and max_cell >= cell".into());
        }
        Ok(())
    }

    /// Node coordinates of the core plus graded padding (no absorbing layers).
    fn nodes(&self, anchors: &[f64]) -> Vec<f64> {
        let mut cuts: Vec<f64> = anchors
            .iter()
            .copied()
            .filter(|a| *a > self.core_min && *a < self.core_max)
            .collect();
        cuts.push(self.core_min);
        cuts.push(self.core_max);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * self.cell.max(1e-30));
        let mut core = vec![cuts[0]];
        for w in cuts.windows(2) {
            let n = ((w[1] - w[0]) / self.cell - 1e-9).ceil().max(1.0) as usize;
            for i in 1..=n {
                core.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
            }
        }
        let first = core[1] - core[0];
        let last = core[core.len() - 1] - core[core.len() - 2];
        let lower = self.pad_cells(first);
        let upper = self.pad_cells(last);
        let mut nodes = Vec::with_capacity(core.len() + lower.len() + upper.len());
        let mut x = core[0];
        let mut low: Vec<f64> = lower
            .iter()
            .map(|d| {
                x -= d;
                x
            })
            .collect();
        low.reverse();
        nodes.extend(low);
        nodes.extend(core.iter().copied());
        let mut x = *core.last().unwrap();
        nodes.extend(upper.iter().map(|d| {
            x += d;
            x
        }));
        nodes
    }

    fn pad_cells(&self, start: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut covered = 0.0;
        let mut d = start;
        while covered < self.padding * (1.0 - 1e-9) {
            d = (d * self.grading).min(self.max_cell);
            out.push(d);
            covered += d;
        }
        out
    }
}

/// Outer boundary condition of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    /// Convolutional PML of the given thickness (cells) backed by a PEC wall.
    Pml { layers: usize },
    /// Perfectly conducting walls.
    Pec,
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::Pml { layers: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub z: AxisSpec,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.x.validate('x')?;
        self.y.validate('y')?;
        self.z.validate('z')?;
        if let Boundary::Pml { layers } = self.boundary {
            if layers < 4 {
                return Err(SceneError::Validation(format!("PML needs at least 4 layers, got {layers}")));
            }
        }
        Ok(())
    }

    /// Mesh the grid; `z_anchors` become z nodes when inside the z core.
    pub fn mesh(&self, z_anchors: &[f64]) -> Result<Mesh, SceneError> {
        self.validate()?;
        let layers = match self.boundary {
            Boundary::Pml { layers } => layers,
            Boundary::Pec => 0,
        };
        let axis = |spec: &AxisSpec, anchors: &[f64]| {
            let mut nodes = spec.nodes(anchors);
            if layers > 0 {
                let d_lo = nodes[1] - nodes[0];
                let d_hi = nodes[nodes.len() - 1] - nodes[nodes.len() - 2];
                let mut lo: Vec<f64> = (1..=layers).rev().map(|i| nodes[0] - i as f64 * d_lo).collect();
                let top = *nodes.last().unwrap();
                lo.append(&mut nodes);
                lo.extend((1..=layers).map(|i| top + i as f64 * d_hi));
                nodes = lo;
            }
            AxisMesh { nodes, boundary: if layers > 0 { AxisBoundary::Pml(layers) } else { AxisBoundary::Pec } }
        };
        Ok(Mesh { axes: [axis(&self.x, &[]), axis(&self.y, &[]), axis(&self.z, z_anchors)] })
    }
}

/// Boundary treatment of one mesh axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisBoundary {
    Pec,
    /// Absorbing layers (cells) at both ends, PEC behind them.
    Pml(usize),
    /// Wrap-around; used for quasi one-dimensional test problems.
    Periodic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxisMesh {
    /// Node coordinates, strictly increasing; `nodes.len() - 1` cells.
    pub nodes: Vec<f64>,
    pub boundary: AxisBoundary,
}

impl AxisMesh {
    pub fn new(nodes: Vec<f64>, boundary: AxisBoundary) -> Self {
        Self { nodes, boundary }
    }

    pub fn uniform(min: f64, cell: f64, cells: usize, boundary: AxisBoundary) -> Self {
        Self::new((0..=cells).map(|i| min + i as f64 * cell).collect(), boundary)
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cell(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.nodes[i] + self.nodes[i + 1])
    }

    pub fn min_cell(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn pml_layers(&self) -> usize {
        match self.boundary {
            AxisBoundary::Pml(n) => n,
            _ => 0,
        }
    }

    /// Coordinate range not covered by absorbing layers.
    pub fn interior(&self) -> (f64, f64) {
        let n = self.pml_layers();
        (self.nodes[n], self.nodes[self.nodes.len() - 1 - n])
    }

    /// Index of the node equal to `x` (within a relative tolerance).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let tol = 1e-9 * self.min_cell();
        self.nodes.iter().position(|n| (n - x).abs() <= tol)
    }

    /// Cell containing `x`, clamped to the mesh.
    pub fn locate(&self, x: f64) -> usize {
        match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(i) => i.min(self.cells() - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.cells() - 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub axes: [AxisMesh; 3],
}

impl Mesh {
    pub fn dims(&self) -> [usize; 3] {
        [self.axes[0].cells(), self.axes[1].cells(), self.axes[2].cells()]
    }

    pub fn cell_count(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn min_cells(&self) -> [f64; 3] {
        [self.axes[0].min_cell(), self.axes[1].min_cell(), self.axes[2].min_cell()]
    }

    /// Lab extents `[[xmin, xmax], [ymin, ymax], [zmin, zmax]]`.
    pub fn extents(&self) -> [[f64; 2]; 3] {
        self.axes.clone().map(|a| [a.nodes[0], *a.nodes.last().unwrap()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_become_nodes() {
        let a = AxisSpec::uniform(-2e-6, 5e-6, 0.5e-6);
        let n = a.nodes(&[55e-9, 3.565e-6]);
        let mesh = AxisMesh::new(n, AxisBoundary::Pec);
        assert!(mesh.node_index(55e-9).is_some());
        assert!(mesh.node_index(3.565e-6).is_some());
        assert!(mesh.min_cell() > 0.4e-6);
        assert!(mesh.nodes.windows(2).all(|w| w[1] - w[0] <= 0.5e-6 * (1.0 + 1e-12)));
    }

    #[test]
    fn grading_respects_ratio_and_cap() {
        let a = AxisSpec::graded(-5e-6, 5e-6, 0.5e-6, 20e-6, 1.2, 2e-6);
        let n = a.nodes(&[]);
        assert!(n[0] <= -25e-6 + 1e-12 && *n.last().unwrap() >= 25e-6 - 1e-12);
        let d: Vec<f64> = n.windows(2).map(|w| w[1] - w[0]).collect();
        for w in d.windows(2) {
            let r = w[1] / w[0];
            assert!(r <= 1.2 + 1e-9 && r >= 1.0 / 1.2 - 1e-9, "ratio {r}");
        }
        assert!(d.iter().all(|&c| c <= 2e-6 + 1e-15));
        // symmetric about the core center
        for i in 0..n.len() {
            assert!((n[i] + n[n.len() - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn pml_layers_are_appended() {
        let g = GridSpec {
            x: AxisSpec::uniform(-4.0, 4.0, 1.0),
            y: AxisSpec::uniform(-4.0, 4.0, 1.0),
            z: AxisSpec::uniform(-4.0, 4.0, 1.0),
            boundary: Boundary::Pml { layers: 6 },
        };
        let m = g.mesh(&[]).unwrap();
        assert_eq!(m.dims(), [20, 20, 20]);
        assert_eq!(m.axes[0].interior(), (-4.0, 4.0));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut g = GridSpec {
            x: AxisSpec::uniform(0.0, 1.0, 0.1),
            y: AxisSpec::uniform(0.0, 1.0, 0.1),
            z: AxisSpec::uniform(0.0, 1.0, 0.1),
            boundary: Boundary::Pml { layers: 3 },
        };
        assert!(g.validate().is_err());
        g.boundary = Boundary::Pec;
        g.validate().unwrap();
        g.z.cell = 0.0;
        assert!(g.validate().is_err());
        g.z.cell = 0.1;
        g.z.grading = 1.3;
        assert!(g.validate().is_err());
    }

    #[test]
    fn locate_cells() {
        let m = AxisMesh::uniform(0.0, 1.0, 4, AxisBoundary::Pec);
        assert_eq!(m.locate(-1.0), 0);
        assert_eq!(m.locate(0.5), 0);
        assert_eq!(m.locate(1.0), 1);
        assert_eq!(m.locate(3.9), 3);
        assert_eq!(m.locate(9.0), 3);
    }
}
