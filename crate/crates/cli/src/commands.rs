//! The five subcommands. Each returns what it wrote so callers (and tests)
//! can inspect results without re-reading files.

use std::path::PathBuf;

use nvmap_core::fdtd::{incident_field, run_harmonic, HarmonicRun};
use nvmap_core::imaging::{
    self, build_rabi_map, enhancement_stats, expected_peak, fit_linearity, half_excess_widths, power_scale,
    rabi_field_to_map, render_binned, Enhancement, LinearFit,
};
use nvmap_core::math::dbm_to_watts;
use nvmap_core::scene::build_scene;
use nvmap_core::{CameraConfig, ComplexFieldMap, NVConfig, RabiGrid, RabiMap, RabiTrace, TraceGrid};

use crate::artifacts::{ensure_dir, write_bytes, write_pgm, write_text, Report};
use crate::config::{Calibration, FieldInput, LoadedConfig, PipelineMode};
use crate::error::CliError;

pub struct SimulateOutput {
    pub run: HarmonicRun,
    pub files: Vec<PathBuf>,
}

/// Solve the scene and write `field.nvf`, `field.csv` and `simulate.txt`.
pub fn simulate(cfg: &LoadedConfig) -> Result<SimulateOutput, CliError> {
    cfg.validate()?;
    let scene = build_scene(cfg.pattern_mask()?, cfg.layer_stack(), cfg.source(), cfg.grid_spec()?)?;
    let run = run_harmonic(&scene, &cfg.probe_window()?, &cfg.harmonic_options())?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let mut report = Report::default();
    report
        .int("cells", scene.summary.cells)
        .int("conductor_voxels", scene.summary.conductor_voxels)
        .num("probe_z_m", scene.probe_z())
        .num("frequency_hz", run.map.frequency)
        .num("solver_frequency_hz", run.solver_frequency)
        .num("dt_s", run.dt)
        .int("steps_per_period", run.steps_per_period)
        .int("steps", run.steps as usize)
        .int("cycles", run.cycles)
        .num("convergence", run.convergence);
    for w in &scene.summary.warnings {
        report.text("warning", w);
    }
    let files = vec![
        write_bytes(&out.join("field.nvf"), &run.map.to_bytes(&cfg.hash))?,
        write_text(&out.join("field.csv"), &cfg.hash, &run.map.to_csv())?,
        write_text(&out.join("simulate.txt"), &cfg.hash, &report.render())?,
    ];
    Ok(SimulateOutput { run, files })
}

/// Uniform map of the incident field over the camera field of view.
fn uniform_map(cfg: &LoadedConfig, camera: &CameraConfig) -> ComplexFieldMap {
    let src = cfg.source();
    let z = cfg.layer_stack().probe_height();
    let [cx, cy] = cfg.config.solver.window_center;
    let b = incident_field(&src, [cx, cy, z]);
    let origin = [camera.center[0] - 0.5 * camera.fov[0], camera.center[1] - 0.5 * camera.fov[1]];
    ComplexFieldMap::uniform(2, 2, camera.fov, origin, z, src.frequency(), b)
}

/// Field map for the pipeline according to `pipeline.field`.
pub fn acquire_field(cfg: &LoadedConfig, camera: &CameraConfig) -> Result<ComplexFieldMap, CliError> {
    match cfg.config.pipeline.field {
        FieldInput::Simulate => Ok(simulate(cfg)?.run.map),
        FieldInput::Uniform => Ok(uniform_map(cfg, camera)),
        FieldInput::File => {
            let path = cfg.field_map_path();
            if !path.exists() {
                return Err(CliError::Missing { stage: "simulate", path });
            }
            Ok(ComplexFieldMap::read_binary(&path)?.0)
        }
    }
}

/// Scale factor turning the raw field into the calibrated field at the
/// reference power.
pub fn calibration_scale(cfg: &LoadedConfig, nv: &NVConfig, raw: &RabiGrid) -> Result<f64, CliError> {
    let p = &cfg.config.pipeline;
    match p.calibration {
        Calibration::Bulk => {
            let [cx, cy] = cfg.config.solver.window_center;
            let b = incident_field(&cfg.source(), [cx, cy, cfg.layer_stack().probe_height()]);
            let w = imaging::rabi_of_field(b, nv);
            if !(w > 0.0) {
                return Err(CliError::Validation("the incident field does not drive the selected transition".into()));
            }
            Ok(p.bulk_rabi / w)
        }
        Calibration::Hotspot => {
            let m = raw.max();
            if !(m > 0.0) {
                return Err(CliError::Validation("the field map does not drive the selected transition".into()));
            }
            Ok(p.hotspot_rabi / m)
        }
        Calibration::None => Ok(1.0),
    }
}

/// Calibrated ideal grid at the reference power plus the scale used.
pub struct Prepared {
    pub nv: NVConfig,
    pub camera: CameraConfig,
    pub ideal: RabiGrid,
    pub scale: f64,
}

pub fn prepare(cfg: &LoadedConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let nv = cfg.nv_config()?;
    let camera = cfg.camera()?;
    let field = acquire_field(cfg, &camera)?;
    let raw = rabi_field_to_map(&field, &nv, &camera)?;
    let scale = calibration_scale(cfg, &nv, &raw)?;
    Ok(Prepared { ideal: raw.scaled(scale), nv, camera, scale })
}

/// Mean trace over unflagged bins.
pub fn mean_trace(traces: &TraceGrid, decay: f64, noise_sigma: f64) -> RabiTrace {
    let nt = traces.tau.len();
    let mut acc = vec![0.0; nt];
    let mut n = 0usize;
    for b in 0..traces.len() {
        if traces.flagged[b] {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(traces.trace(b % traces.nx, b / traces.nx)) {
            *a += v;
        }
        n += 1;
    }
    let n = n.max(1) as f64;
    RabiTrace { tau: traces.tau.clone(), contrast: acc.into_iter().map(|a| a / n).collect(), decay, noise_sigma }
}

pub struct PipelineOutput {
    pub ideal: RabiGrid,
    pub map: RabiMap,
    pub bulk: f64,
    pub enhancement: Enhancement,
    /// Hotspot widths `[x, y]` at half the excess over bulk, m.
    pub footprint: [f64; 2],
    /// Round-trip mode: largest |extracted − expected| over unflagged bins.
    pub max_deviation: Option<f64>,
    pub resolution: f64,
    pub report: Report,
    pub files: Vec<PathBuf>,
}

/// Acquire, extract and analyse one map; writes the map in binary, CSV and
/// PGM form, the HWHM map, the ideal grid, the mean trace and a report.
pub fn pipeline(cfg: &LoadedConfig) -> Result<PipelineOutput, CliError> {
    let prep = prepare(cfg)?;
    let p = &cfg.config.pipeline;
    let power = power_scale(p.reference_dbm, p.power_dbm);
    let mut ideal = prep.ideal.scaled(power);
    let mut camera = prep.camera.clone();
    let bulk = p.bulk_rabi * power;
    let tau = cfg.tau_grid();
    let step = tau[1] - tau[0];
    let resolution = 1.0 / (p.zero_fill as f64 * tau.len() as f64 * step);

    if p.mode == PipelineMode::RoundTrip {
        camera.noise_sigma0 = 0.0;
        camera.psf_sigma = None;
        ideal = ideal.binned(camera.bin).upsampled(camera.bin);
    }
    let traces = render_binned(&ideal, &prep.nv, &camera, &tau, cfg.decay(), cfg.config.seed)?;
    let map = build_rabi_map(&traces, p.zero_fill)?;
    let enhancement = enhancement_stats(&map, bulk)?;
    let footprint = half_excess_widths(&map, bulk)?;
    let max_deviation = (p.mode == PipelineMode::RoundTrip).then(|| {
        let coarse = ideal.binned(camera.bin);
        map.frequency
            .iter()
            .zip(&map.flagged)
            .zip(&coarse.values)
            .filter(|((_, f), _)| !**f)
            .map(|((v, _), w)| (v - expected_peak(*w, &prep.nv)).abs())
            .fold(0.0, f64::max)
    });

    let stats = map.stats();
    let mut report = Report::default();
    report
        .text("mode", format!("{:?}", p.mode).to_lowercase())
        .num("power_dbm", p.power_dbm)
        .num("calibration_scale", prep.scale * power)
        .num("drive_frequency_hz", prep.nv.drive_frequency)
        .num("resolution_hz", resolution)
        .int("bins_x", map.nx)
        .int("bins_y", map.ny)
        .int("flagged", map.flagged_count())
        .num("map_mean_hz", stats.mean)
        .num("map_std_hz", stats.std)
        .num("max_hz", enhancement.max)
        .int("max_bin_x", enhancement.max_bin.0)
        .int("max_bin_y", enhancement.max_bin.1)
        .num("top8_mean_hz", enhancement.hotspot_mean)
        .num("top8_std_hz", enhancement.hotspot_std)
        .num("top8_hwhm_hz", enhancement.hotspot_hwhm)
        .num("bulk_hz", bulk)
        .num("enhancement_ratio", enhancement.ratio)
        .num("enhancement_uncertainty", enhancement.ratio_uncertainty)
        .num("hotspot_width_x_m", footprint[0])
        .num("hotspot_width_y_m", footprint[1])
        .num("ideal_max_hz", ideal.max())
        .num("ideal_ratio", ideal.max() / bulk);
    if let Some(d) = max_deviation {
        report.num("max_abs_deviation_hz", d).flag("within_resolution", d <= resolution);
    }

    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let hwhm_csv: String = std::iter::once("x_m,y_m,hwhm_hz\n".to_string())
        .chain((0..map.ny).flat_map(|iy| {
            let map = &map;
            (0..map.nx).map(move |ix| {
                let (x, y) = map.position(ix, iy);
                format!("{x:e},{y:e},{:e}\n", map.hwhm[map.index(ix, iy)])
            })
        }))
        .collect();
    let files = vec![
        write_bytes(&out.join("rabi_map.nvr"), &map.to_bytes(&cfg.hash))?,
        write_text(&out.join("rabi_map.csv"), &cfg.hash, &map.to_csv())?,
        write_text(&out.join("hwhm_map.csv"), &cfg.hash, &hwhm_csv)?,
        write_pgm(&out.join("rabi_map.pgm"), &cfg.hash, &map.to_pgm())?,
        write_text(&out.join("ideal_rabi.csv"), &cfg.hash, &ideal.binned(camera.bin).to_csv())?,
        write_text(&out.join("mean_trace.csv"), &cfg.hash, &mean_trace(&traces, cfg.decay(), camera.noise_sigma()).to_csv())?,
        write_text(&out.join("pipeline.txt"), &cfg.hash, &report.render())?,
    ];
    Ok(PipelineOutput { ideal, map, bulk, enhancement, footprint, max_deviation, resolution, report, files })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub power_dbm: f64,
    pub frequency: f64,
    pub uncertainty: f64,
}

pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    pub fit: Option<LinearFit>,
    pub report: Report,
    pub files: Vec<PathBuf>,
    /// First failing power, if any; results up to it are still written.
    pub failure: Option<(f64, String)>,
}

/// Hotspot frequency (top-8 mean) against MW power and the √P fit.
pub fn sweep(cfg: &LoadedConfig) -> Result<SweepOutput, CliError> {
    let s = &cfg.config.sweep;
    let mut distinct = s.powers_dbm.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(CliError::Validation(format!("sweep needs at least 3 distinct powers, got {}", distinct.len())));
    }
    let p = &cfg.config.pipeline;
    let tau = cfg.sweep_tau_grid();
    nvmap_core::nv::validate_tau(&tau)?;
    let prep = if s.inject { None } else { Some(prepare(cfg)?) };
    let target = match p.calibration {
        Calibration::Hotspot => p.hotspot_rabi,
        _ => p.bulk_rabi,
    };

    let mut points = Vec::new();
    let mut failure = None;
    for (n, &dbm) in s.powers_dbm.iter().enumerate() {
        let scale = power_scale(p.reference_dbm, dbm);
        let point = match &prep {
            None => Ok(SweepPoint { power_dbm: dbm, frequency: target * scale, uncertainty: 0.0 }),
            Some(prep) => {
                let ideal = prep.ideal.scaled(scale);
                render_binned(&ideal, &prep.nv, &prep.camera, &tau, cfg.decay(), cfg.config.seed.wrapping_add(n as u64))
                    .and_then(|t| build_rabi_map(&t, p.zero_fill))
                    .and_then(|m| enhancement_stats(&m, p.bulk_rabi * scale))
                    .map(|e| SweepPoint { power_dbm: dbm, frequency: e.hotspot_mean, uncertainty: e.uncertainty })
                    .map_err(|e| e.to_string())
            }
        };
        match point {
            Ok(pt) => points.push(pt),
            Err(e) => {
                failure = Some((dbm, e));
                break;
            }
        }
    }

    let fit = if points.len() >= 3 {
        let pw: Vec<f64> = points.iter().map(|x| x.power_dbm).collect();
        let fr: Vec<f64> = points.iter().map(|x| x.frequency).collect();
        Some(fit_linearity(&pw, &fr)?)
    } else {
        None
    };
    let mut report = Report::default();
    report.flag("inject", s.inject).int("points", points.len());
    if let Some(f) = &fit {
        report.num("slope_hz_per_sqrt_w", f.slope).num("intercept_hz", f.intercept).num("r_squared", f.r_squared);
    }
    let at = |d: f64| points.iter().find(|x| (x.power_dbm - d).abs() < 1e-9).map(|x| x.frequency);
    if let (Some(top), Some(refp)) = (points.iter().map(|x| x.power_dbm).reduce(f64::max), at(p.reference_dbm)) {
        report.num("top_power_dbm", top).num("ratio_top_to_reference", at(top).unwrap_or(f64::NAN) / refp);
    }
    report.flag("monotone", points.windows(2).all(|w| (w[1].power_dbm - w[0].power_dbm) * (w[1].frequency - w[0].frequency) >= 0.0));
    if let Some((dbm, e)) = &failure {
        report.num("failed_power_dbm", *dbm).text("error", e);
    }

    let mut csv = String::from("power_dbm,sqrt_power_w,frequency_hz,uncertainty_hz\n");
    for x in &points {
        csv.push_str(&format!("{:e},{:e},{:e},{:e}\n", x.power_dbm, dbm_to_watts(x.power_dbm).sqrt(), x.frequency, x.uncertainty));
    }
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let files = vec![write_text(&out.join("sweep.csv"), &cfg.hash, &csv)?, write_text(&out.join("sweep.txt"), &cfg.hash, &report.render())?];
    Ok(SweepOutput { points, fit, report, files, failure })
}
