//! Fixtures shared by the benchmarks.

use nvmap_core::fdtd::{check_cfl, Engine};
use nvmap_core::scene::{AxisBoundary, AxisMesh, Mesh};
use nvmap_core::{CameraConfig, NVConfig, RabiGrid};

/// Vacuum cube of `n` cells per side with an 8-layer absorber on every face.
pub fn vacuum_engine(n: usize) -> Engine {
    let dx = 0.5e-6;
    let axis = || AxisMesh::uniform(-0.5 * dx * n as f64, dx, n, AxisBoundary::Pml(8));
    let mesh = Mesh { axes: [axis(), axis(), axis()] };
    let dt = 0.99 * check_cfl(&mesh, 1.0).dt_max;
    Engine::vacuum(&mesh, dt, None).unwrap()
}

/// Camera of `side`² pixels with a Gaussian bump in Ω0 on a 1.2 MHz floor.
pub fn bump_grid(side: usize) -> (CameraConfig, RabiGrid, NVConfig) {
    let camera = CameraConfig { sensor: [side, side], fov: [side as f64 * 66e-9; 2], ..CameraConfig::default() };
    let mut grid = camera.pixel_grid();
    let w = 0.1 * camera.fov[0];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let x = grid.origin[0] + ix as f64 * grid.pitch[0];
            let y = grid.origin[1] + iy as f64 * grid.pitch[1];
            grid.values[iy * grid.nx + ix] = 1.2e6 + 8e6 * (-(x * x + y * y) / (2.0 * w * w)).exp();
        }
    }
    (camera, grid, NVConfig::default())
}

pub fn tau(step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * step).collect()
}
