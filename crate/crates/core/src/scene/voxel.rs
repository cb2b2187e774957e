//! Staircase voxelization of a scene onto its mesh.

use super::{ConductorModel, LayerStack, Material, Mesh, PatternMask, Scene};

/// Conductor faces lying on a single z node plane.
#[derive(Clone, Debug, PartialEq)]
pub struct SheetConductor {
    /// z node index of the sheet.
    pub k: usize,
    /// `nx * ny` face flags, index `i * ny + j`.
    pub faces: Vec<bool>,
}

/// Material ids per cell plus the conductor description.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialGrid {
    pub mesh: Mesh,
    /// Material table; id 0 is the background (vacuum).
    pub materials: Vec<Material>,
    /// `nx * ny * nz` ids, index `(i * ny + j) * nz + k`.
    pub ids: Vec<u8>,
    pub sheet: Option<SheetConductor>,
    pub conductor_count: usize,
    pub warnings: Vec<String>,
}

/// Which field component an edge carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl MaterialGrid {
    pub fn dims(&self) -> [usize; 3] {
        self.mesh.dims()
    }

    pub fn id(&self, i: usize, j: usize, k: usize) -> u8 {
        let [_, ny, nz] = self.dims();
        self.ids[(i * ny + j) * nz + k]
    }

    pub fn material(&self, i: usize, j: usize, k: usize) -> &Material {
        &self.materials[self.id(i, j, k) as usize]
    }

    /// Node-padded index used by the field arrays: `(i * (ny+1) + j) * (nz+1) + k`.
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, ny, nz] = self.dims();
        (i * (ny + 1) + j) * (nz + 1) + k
    }

    /// Node-padded flags for the E edges of `axis` that must carry zero
    /// tangential field.
    pub fn pec_edges(&self, axis: Axis) -> Vec<bool> {
        let [nx, ny, nz] = self.dims();
        let mut out = vec![false; (nx + 1) * (ny + 1) * (nz + 1)];
        if let Some(sheet) = &self.sheet {
            let k = sheet.k;
            for i in 0..nx {
                for j in 0..ny {
                    if !sheet.faces[i * ny + j] {
                        continue;
                    }
                    match axis {
                        Axis::X => {
                            out[self.node_index(i, j, k)] = true;
                            out[self.node_index(i, j + 1, k)] = true;
                        }
                        Axis::Y => {
                            out[self.node_index(i, j, k)] = true;
                            out[self.node_index(i + 1, j, k)] = true;
                        }
                        Axis::Z => {}
                    }
                }
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    if !self.material(i, j, k).conductor {
                        continue;
                    }
                    let corners = match axis {
                        Axis::X => [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)],
                        Axis::Y => [(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1)],
                        Axis::Z => [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)],
                    };
                    for (di, dj, dk) in corners {
                        out[self.node_index(i + di, j + dj, k + dk)] = true;
                    }
                }
            }
        }
        out
    }

    /// Relative permittivity seen by each E edge of `axis` (mean over the
    /// cells sharing the edge), node-padded layout.
    pub fn edge_eps(&self, axis: Axis) -> Vec<f32> {
        let [nx, ny, nz] = self.dims();
        let mut out = vec![1.0f32; (nx + 1) * (ny + 1) * (nz + 1)];
        let eps = |i: isize, j: isize, k: isize| -> Option<f64> {
            if i < 0 || j < 0 || k < 0 || i >= nx as isize || j >= ny as isize || k >= nz as isize {
                return None;
            }
            let m = self.material(i as usize, j as usize, k as usize);
            Some(if m.conductor { 1.0 } else { m.eps_r })
        };
        for i in 0..=nx {
            for j in 0..=ny {
                for k in 0..=nz {
                    let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                    let cells: [(isize, isize, isize); 4] = match axis {
                        Axis::X => [(ii, jj - 1, kk - 1), (ii, jj, kk - 1), (ii, jj - 1, kk), (ii, jj, kk)],
                        Axis::Y => [(ii - 1, jj, kk - 1), (ii, jj, kk - 1), (ii - 1, jj, kk), (ii, jj, kk)],
                        Axis::Z => [(ii - 1, jj - 1, kk), (ii, jj - 1, kk), (ii - 1, jj, kk), (ii, jj, kk)],
                    };
                    let (sum, n) = cells
                        .iter()
                        .filter_map(|&(a, b, c)| eps(a, b, c))
                        .fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
                    if n > 0 {
                        out[self.node_index(i, j, k)] = (sum / n as f64) as f32;
                    }
                }
            }
        }
        out
    }

    pub fn has_dielectric(&self) -> bool {
        self.materials.iter().any(|m| !m.conductor && m.eps_r != 1.0)
    }
}

/// Face flags for a conductor sheet: a face is conductor when its center
/// falls on a mask conductor pixel.
pub(crate) fn sheet_faces(mask: &PatternMask, mesh: &Mesh) -> Vec<bool> {
    let [nx, ny, _] = mesh.dims();
    let mut faces = vec![false; nx * ny];
    if mask.is_empty() {
        return faces;
    }
    for i in 0..nx {
        let x = mesh.axes[0].center(i);
        for j in 0..ny {
            faces[i * ny + j] = mask.contains(x, mesh.axes[1].center(j));
        }
    }
    faces
}

/// z cells filled by a slab conductor: those whose center lies inside the
/// layer, or the single cell holding the layer mid-plane.
pub(crate) fn slab_levels(stack: &LayerStack, mesh: &Mesh) -> Vec<usize> {
    let t = stack.conductor_thickness();
    let z = &mesh.axes[2];
    let inside: Vec<usize> = (0..z.cells()).filter(|&k| (0.0..=t).contains(&z.center(k))).collect();
    if inside.is_empty() {
        vec![z.locate(0.5 * t)]
    } else {
        inside
    }
}

pub fn voxelize(scene: &Scene) -> MaterialGrid {
    let mesh = scene.mesh.clone();
    let [nx, ny, nz] = mesh.dims();
    let mut materials = vec![Material::vacuum()];
    let placed = scene.stack.placed();
    // material id per layer (conductor layers resolve per pixel below)
    let mut layer_ids = Vec::new();
    for (_, _, layer) in &placed {
        if layer.material.conductor {
            layer_ids.push(None);
            continue;
        }
        let id = match materials.iter().position(|m| *m == layer.material) {
            Some(id) => id,
            None => {
                materials.push(layer.material.clone());
                materials.len() - 1
            }
        };
        layer_ids.push(Some(id as u8));
    }
    let conductor_id = {
        let m = placed.iter().find(|p| p.2.material.conductor).unwrap().2.material.clone();
        materials.push(m);
        (materials.len() - 1) as u8
    };

    let z_ids: Vec<u8> = (0..nz)
        .map(|k| {
            let zc = mesh.axes[2].center(k);
            placed
                .iter()
                .zip(&layer_ids)
                .find(|((lo, hi, _), _)| zc >= *lo && zc < *hi)
                .and_then(|(_, id)| *id)
                .unwrap_or(0)
        })
        .collect();
    let mut ids = vec![0u8; nx * ny * nz];
    for i in 0..nx {
        for j in 0..ny {
            let base = (i * ny + j) * nz;
            ids[base..base + nz].copy_from_slice(&z_ids);
        }
    }

    let faces = sheet_faces(&scene.mask, &mesh);
    let face_count = faces.iter().filter(|&&f| f).count();
    let (sheet, conductor_count) = match scene.stack.conductor_model {
        ConductorModel::Sheet => {
            let k = mesh.axes[2].node_index(scene.conductor_z()).unwrap_or_else(|| {
                let c = mesh.axes[2].locate(scene.conductor_z());
                if (mesh.axes[2].nodes[c + 1] - scene.conductor_z()).abs() < (scene.conductor_z() - mesh.axes[2].nodes[c]).abs() {
                    c + 1
                } else {
                    c
                }
            });
            (Some(SheetConductor { k, faces }), face_count)
        }
        ConductorModel::Slab => {
            let levels = slab_levels(&scene.stack, &mesh);
            for i in 0..nx {
                for j in 0..ny {
                    if faces[i * ny + j] {
                        for &k in &levels {
                            ids[(i * ny + j) * nz + k] = conductor_id;
                        }
                    }
                }
            }
            (None, face_count * levels.len())
        }
    };
    MaterialGrid { mesh, materials, ids, sheet, conductor_count, warnings: scene.summary.warnings.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, AxisSpec, Boundary, GridSpec, LayerStack, SourceSpec};

    fn grid(half: f64, cell: f64) -> GridSpec {
        GridSpec {
            x: AxisSpec::graded(-half, half, cell, 2e-6, 1.2, 1e-6),
            y: AxisSpec::graded(-half, half, cell, 2e-6, 1.2, 1e-6),
            z: AxisSpec::graded(-1e-6, 4e-6, 0.5e-6, 2e-6, 1.2, 1e-6),
            boundary: Boundary::Pml { layers: 4 },
        }
    }

    fn scene(mask: PatternMask, cell: f64, stack: LayerStack) -> Scene {
        build_scene(mask, stack, SourceSpec::uniform_z(1e-4, 3.01e9), grid(4e-6, cell)).unwrap()
    }

    #[test]
    fn strokes_span_four_quarter_micron_cells() {
        let mask = PatternMask::cross(8, 1, 1e-6).unwrap();
        let g = voxelize(&scene(mask, 0.25e-6, LayerStack::default()));
        let sheet = g.sheet.as_ref().unwrap();
        let ny = g.dims()[1];
        // count conductor faces along a row far from the crossing
        let j = g.mesh.axes[1].locate(-3.3e-6);
        let across = (0..g.dims()[0]).filter(|&i| sheet.faces[i * ny + j]).count();
        assert_eq!(across, 4);
    }

    #[test]
    fn thin_film_becomes_a_sheet() {
        let mask = PatternMask::cross(8, 2, 1e-6).unwrap();
        let g = voxelize(&scene(mask, 0.5e-6, LayerStack::default()));
        let sheet = g.sheet.as_ref().unwrap();
        assert!((g.mesh.axes[2].nodes[sheet.k] - 55e-9).abs() < 1e-15);
        assert!(g.ids.iter().all(|&id| !g.materials[id as usize].conductor));
        let pec = g.pec_edges(Axis::X);
        assert!(pec.iter().any(|&b| b));
        assert!(g.pec_edges(Axis::Z).iter().all(|&b| !b));
    }

    #[test]
    fn slab_model_fills_cells() {
        let mask = PatternMask::cross(8, 2, 1e-6).unwrap();
        let mut st = LayerStack::default();
        st.conductor_model = ConductorModel::Slab;
        let g = voxelize(&scene(mask, 0.5e-6, st));
        assert!(g.sheet.is_none());
        let n = g.ids.iter().filter(|&&id| g.materials[id as usize].conductor).count();
        assert_eq!(n, g.conductor_count);
        assert!(n > 0);
    }

    #[test]
    fn empty_mask_has_background_only() {
        let mask = PatternMask::from_rows(4, 4, 1e-6, None, vec![false; 16]).unwrap();
        let g = voxelize(&scene(mask, 0.5e-6, LayerStack::default()));
        assert_eq!(g.conductor_count, 0);
        assert!(g.sheet.as_ref().unwrap().faces.iter().all(|&f| !f));
        assert!(g.pec_edges(Axis::Y).iter().all(|&b| !b));
        let names: Vec<&str> = g.ids.iter().map(|&id| g.materials[id as usize].name.as_str()).collect();
        assert!(names.contains(&"silicon") && names.contains(&"diamond") && names.contains(&"vacuum"));
    }

    #[test]
    fn voxelization_is_deterministic_and_mirror_symmetric() {
        // L-shape mirrored into a symmetric U-shape
        let mut occ = vec![false; 12 * 12];
        for y in 2..10 {
            occ[y * 12 + 2] = true;
            occ[y * 12 + 9] = true;
        }
        for x in 2..10 {
            occ[2 * 12 + x] = true;
        }
        let mask = PatternMask::from_rows(12, 12, 0.5e-6, None, occ).unwrap();
        assert_eq!(mask, mask.mirrored_x());
        let s = scene(mask, 0.25e-6, LayerStack::default());
        let a = voxelize(&s);
        let b = voxelize(&s);
        assert_eq!(a, b);
        let [nx, ny, _] = a.dims();
        let f = &a.sheet.as_ref().unwrap().faces;
        for i in 0..nx {
            for j in 0..ny {
                assert_eq!(f[i * ny + j], f[(nx - 1 - i) * ny + j]);
            }
        }
    }

    #[test]
    fn conductor_count_scales_with_occupancy() {
        let one = PatternMask::rectangle(16, (2, 4), (2, 14), 0.5e-6).unwrap();
        let two = PatternMask::rectangle(16, (2, 6), (2, 14), 0.5e-6).unwrap();
        let a = voxelize(&scene(one, 0.25e-6, LayerStack::default())).conductor_count;
        let b = voxelize(&scene(two, 0.25e-6, LayerStack::default())).conductor_count;
        assert_eq!(2 * a, b);
    }

    #[test]
    fn edge_permittivity_averages_neighbours() {
        let mask = PatternMask::cross(8, 2, 1e-6).unwrap();
        let g = voxelize(&scene(mask, 0.5e-6, LayerStack::default()));
        let eps = g.edge_eps(Axis::X);
        let [_, ny, nz] = g.dims();
        // node plane z = 0 sits between silicon (below) and vacuum (above)? it is
        // the lower anchor region; pick a deep silicon edge instead
        let k = 2;
        let idx = (3 * (ny + 1) + 3) * (nz + 1) + k;
        assert!((eps[idx] - 11.7).abs() < 1e-5);
    }
}
