use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nvmap_bench::{bump_grid, tau, vacuum_engine};
use nvmap_core::imaging::{build_rabi_map, extract_frequency, render_binned};
use nvmap_core::nv::doublet_contrast;
use nvmap_core::scene::{build_scene, AxisSpec, Boundary, GridSpec, LayerStack, PatternMask, SourceSpec};

fn fdtd_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("fdtd_step");
    for n in [32, 64] {
        let mut eng = vacuum_engine(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| eng.step()));
    }
    g.finish();
}

fn voxelize(c: &mut Criterion) {
    let cell = 0.25e-6;
    let lat = || AxisSpec::graded(-9e-6, 9e-6, cell, 2e-6, 1.2, 4.0 * cell);
    c.bench_function("build_scene_cross_16um", |b| {
        b.iter(|| {
            let mask = PatternMask::cross(64, 4, cell).unwrap();
            let grid = GridSpec { x: lat(), y: lat(), z: AxisSpec::graded(-0.445e-6, 4.0e-6, cell, 2e-6, 1.2, 4.0 * cell), boundary: Boundary::Pml { layers: 8 } };
            build_scene(mask, LayerStack::standard(110e-9, 3.4e-6), SourceSpec::uniform_z(1e-4, 3.01e9), grid).unwrap()
        })
    });
}

fn spectrum(c: &mut Criterion) {
    let (_, _, nv) = bump_grid(4);
    let t = tau(20e-9, 100);
    let trace: Vec<f64> = t.iter().map(|&x| doublet_contrast(5e6, nv.detunings(), x, 4e-6)).collect();
    c.bench_function("extract_frequency_100x10", |b| b.iter(|| extract_frequency(&trace, 20e-9, 10).unwrap()));
}

fn imaging(c: &mut Criterion) {
    let (camera, grid, nv) = bump_grid(128);
    let t = tau(20e-9, 100);
    let mut g = c.benchmark_group("imaging_128px_100tau");
    g.sample_size(10);
    g.bench_function("render_binned", |b| b.iter(|| render_binned(&grid, &nv, &camera, &t, 4e-6, 1).unwrap()));
    let traces = render_binned(&grid, &nv, &camera, &t, 4e-6, 1).unwrap();
    g.bench_function("build_rabi_map", |b| b.iter(|| build_rabi_map(&traces, 10).unwrap()));
    g.finish();
}

criterion_group!(benches, fdtd_step, voxelize, spectrum, imaging);
criterion_main!(benches);
