//! Map assembly, enhancement statistics, power linearity and calibration.

use rayon::prelude::*;

use super::{extract_frequency, ImagingError, Peak, RabiMap, TraceGrid};
use crate::math::dbm_to_watts;
use crate::nv::{self, NVConfig};
use crate::Vec3;

/// Bins averaged around the map maximum for the enhancement estimate.
pub const HOTSPOT_NEIGHBOURS: usize = 8;

/// FFT peak for every bin. Bins flagged upstream stay flagged.
pub fn build_rabi_map(traces: &TraceGrid, zero_fill: usize) -> Result<RabiMap, ImagingError> {
    let step = nv::validate_tau(&traces.tau)?;
    let peaks: Vec<Peak> = (0..traces.len())
        .into_par_iter()
        .map(|b| extract_frequency(traces.trace(b % traces.nx, b / traces.nx), step, zero_fill))
        .collect::<Result<_, _>>()?;
    let mut map = RabiMap {
        nx: traces.nx,
        ny: traces.ny,
        pitch: traces.pitch,
        origin: traces.origin,
        frequency: Vec::with_capacity(peaks.len()),
        hwhm: Vec::with_capacity(peaks.len()),
        flagged: Vec::with_capacity(peaks.len()),
    };
    for (p, &bad) in peaks.iter().zip(&traces.flagged) {
        let flagged = bad || p.flagged;
        map.frequency.push(if flagged { 0.0 } else { p.frequency });
        map.hwhm.push(if flagged { 0.0 } else { p.hwhm });
        map.flagged.push(flagged);
    }
    Ok(map)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapStats {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Enhancement {
    /// Highest unflagged frequency and its bin `(ix, iy)`.
    pub max: f64,
    pub max_bin: (usize, usize),
    /// Mean of the neighbours nearest the maximum.
    pub hotspot_mean: f64,
    pub hotspot_std: f64,
    pub hotspot_hwhm: f64,
    /// Bins that entered the hotspot mean.
    pub hotspot_bins: Vec<(usize, usize)>,
    pub bulk: f64,
    /// `hotspot_mean / bulk`.
    pub ratio: f64,
    /// `hotspot_std + hotspot_hwhm`, Hz.
    pub uncertainty: f64,
    /// `uncertainty` propagated to the ratio.
    pub ratio_uncertainty: f64,
}

/// Hotspot statistics around the map maximum relative to a bulk Rabi
/// frequency. The hotspot mean averages the eight unflagged bins closest to
/// the maximum (its 8-neighbourhood when none is flagged or off the map).
pub fn enhancement_stats(map: &RabiMap, bulk: f64) -> Result<Enhancement, ImagingError> {
    if !(bulk > 0.0 && bulk.is_finite()) {
        return Err(ImagingError::Invalid("bulk Rabi frequency must be > 0".into()));
    }
    let valid: Vec<usize> = (0..map.frequency.len()).filter(|&i| !map.flagged[i]).collect();
    if valid.len() <= HOTSPOT_NEIGHBOURS {
        return Err(ImagingError::Invalid(format!(
            "{} unflagged bins, need more than {HOTSPOT_NEIGHBOURS}",
            valid.len()
        )));
    }
    let imax = valid.iter().copied().fold(valid[0], |a, i| if map.frequency[i] > map.frequency[a] { i } else { a });
    let (mx, my) = ((imax % map.nx) as isize, (imax / map.nx) as isize);
    let mut near: Vec<usize> = valid.into_iter().filter(|&i| i != imax).collect();
    let ring = |i: usize| ((i % map.nx) as isize - mx).abs().max(((i / map.nx) as isize - my).abs());
    near.sort_by(|&a, &b| ring(a).cmp(&ring(b)).then(map.frequency[b].total_cmp(&map.frequency[a])).then(a.cmp(&b)));
    near.truncate(HOTSPOT_NEIGHBOURS);

    let k = near.len() as f64;
    let mean = near.iter().map(|&i| map.frequency[i]).sum::<f64>() / k;
    let std = (near.iter().map(|&i| (map.frequency[i] - mean).powi(2)).sum::<f64>() / k).sqrt();
    let hwhm = near.iter().map(|&i| map.hwhm[i]).sum::<f64>() / k;
    let uncertainty = std + hwhm;
    Ok(Enhancement {
        max: map.frequency[imax],
        max_bin: (mx as usize, my as usize),
        hotspot_mean: mean,
        hotspot_std: std,
        hotspot_hwhm: hwhm,
        hotspot_bins: near.iter().map(|&i| (i % map.nx, i / map.nx)).collect(),
        bulk,
        ratio: mean / bulk,
        uncertainty,
        ratio_uncertainty: uncertainty / bulk,
    })
}

/// Frequency the FFT peak sits at for on-resonance Rabi frequency `omega0`:
/// the hyperfine line closest to the drive carries the larger weight
/// `Ω0²/(Ω0² + Δ²)`, so it sets the peak.
pub fn expected_peak(omega0: f64, cfg: &NVConfig) -> f64 {
    let (d1, d2) = cfg.detunings();
    nv::effective_rabi(omega0, d1.abs().min(d2.abs()))
}

/// Widths `[x, y]` (m) of the region around the map maximum where the
/// frequency exceeds `bulk + (max − bulk)/2`, measured along the row and the
/// column through the maximum with linear interpolation of the crossings.
/// A profile that never drops below the level is cut at the map edge.
pub fn half_excess_widths(map: &RabiMap, bulk: f64) -> Result<[f64; 2], ImagingError> {
    let e = enhancement_stats(map, bulk)?;
    let (mx, my) = e.max_bin;
    let level = bulk + 0.5 * (e.max - bulk);
    let f = |ix: usize, iy: usize| {
        let i = map.index(ix, iy);
        if map.flagged[i] {
            f64::NEG_INFINITY
        } else {
            map.frequency[i]
        }
    };
    let width = |n: usize, at: usize, get: &dyn Fn(usize) -> f64| {
        let mut lo = 0.0;
        for i in (0..at).rev() {
            if get(i) < level {
                let (a, b) = (get(i), get(i + 1));
                lo = i as f64 + if a.is_finite() { (level - a) / (b - a) } else { 1.0 };
                break;
            }
        }
        let mut hi = (n - 1) as f64;
        for i in at + 1..n {
            if get(i) < level {
                let (a, b) = (get(i - 1), get(i));
                hi = (i - 1) as f64 + if b.is_finite() { (a - level) / (a - b) } else { 0.0 };
                break;
            }
        }
        hi - lo
    };
    let wx = width(map.nx, mx, &|i| f(i, my));
    let wy = width(map.ny, my, &|i| f(mx, i));
    Ok([wx * map.pitch[0], wy * map.pitch[1]])
}

/// Least-squares line `f = slope·√P + intercept` with `P` in watts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn predict(&self, power_dbm: f64) -> f64 {
        self.slope * dbm_to_watts(power_dbm).sqrt() + self.intercept
    }
}

/// Fit extracted frequencies against the square root of the MW power.
pub fn fit_linearity(powers_dbm: &[f64], frequencies: &[f64]) -> Result<LinearFit, ImagingError> {
    if powers_dbm.len() != frequencies.len() {
        return Err(ImagingError::Invalid("power and frequency lists differ in length".into()));
    }
    if powers_dbm.len() < 3 {
        return Err(ImagingError::Invalid(format!("need at least 3 power points, got {}", powers_dbm.len())));
    }
    if powers_dbm.iter().chain(frequencies).any(|v| !v.is_finite()) {
        return Err(ImagingError::Invalid("non-finite power or frequency".into()));
    }
    let x: Vec<f64> = powers_dbm.iter().map(|&p| dbm_to_watts(p).sqrt()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, frequencies.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ImagingError::Invalid("all powers are equal".into()));
    }
    let sxy: f64 = x.iter().zip(frequencies).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = frequencies.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(frequencies).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Field amplitude ratio between two MW powers (field ∝ √P).
pub fn power_scale(from_dbm: f64, to_dbm: f64) -> f64 {
    10f64.powf((to_dbm - from_dbm) / 20.0)
}

/// Amplitude (T) of a linearly polarized uniform field along `axis` that
/// gives the on-resonance Rabi frequency `target` (Hz).
pub fn uniform_amplitude_for_rabi(target: f64, axis: Vec3, cfg: &NVConfig) -> Result<f64, ImagingError> {
    let per_tesla = nv::rabi_per_tesla(axis, cfg);
    if !(per_tesla > 0.0) {
        return Err(ImagingError::Invalid("field axis does not drive the transition".into()));
    }
    Ok(target / per_tesla)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> RabiMap {
        let n = nx * ny;
        RabiMap {
            nx,
            ny,
            pitch: [1.0; 2],
            origin: [0.0; 2],
            frequency: (0..n).map(|i| f(i % nx, i / nx)).collect(),
            hwhm: vec![0.1e6; n],
            flagged: vec![false; n],
        }
    }

    #[test]
    fn uniform_map_ratio() {
        let m = map(10, 10, |_, _| 3e6);
        let e = enhancement_stats(&m, 1.5e6).unwrap();
        assert_eq!(e.ratio, 2.0);
        assert_eq!(e.hotspot_std, 0.0);
        assert!((e.uncertainty - 0.1e6).abs() < 1e-6);
        let e = enhancement_stats(&m, 3e6).unwrap();
        assert_eq!(e.ratio, 1.0);
    }

    #[test]
    fn hotspot_uses_neighbourhood() {
        let m = map(9, 9, |x, y| if (x, y) == (4, 4) { 30e6 } else if x.abs_diff(4) <= 1 && y.abs_diff(4) <= 1 { 22.54e6 } else { 1e6 });
        let e = enhancement_stats(&m, 1.22e6).unwrap();
        assert_eq!(e.max_bin, (4, 4));
        assert_eq!(e.hotspot_bins.len(), 8);
        assert!((e.ratio - 18.475).abs() < 1e-3, "{}", e.ratio);
        // At a corner the nearest ring is short; the next ring fills in.
        let m = map(9, 9, |x, y| 10e6 - (x + y) as f64);
        let e = enhancement_stats(&m, 1e6).unwrap();
        assert_eq!(e.max_bin, (0, 0));
        assert_eq!(e.hotspot_bins.len(), 8);
        assert!(e.hotspot_bins.iter().all(|&(x, y)| x <= 2 && y <= 2));
    }

    #[test]
    fn flagged_bins_are_ignored() {
        let mut m = map(5, 5, |_, _| 2e6);
        m.frequency[12] = 50e6;
        m.flagged[12] = true;
        let e = enhancement_stats(&m, 1e6).unwrap();
        assert_eq!(e.max, 2e6);
        assert!(enhancement_stats(&m, 0.0).is_err());
    }

    #[test]
    fn half_excess_of_triangle() {
        // Peak 5 above a bulk of 1, falling by 1 per bin: the level 3.5 is
        // crossed 2.5 bins either side of the maximum.
        let m = map(21, 21, |x, y| 1.0 + (5.0 - x.abs_diff(10) as f64 - y.abs_diff(10) as f64).max(0.0));
        let w = half_excess_widths(&m, 1.0).unwrap();
        assert!((w[0] - 5.0).abs() < 1e-12 && (w[1] - 5.0).abs() < 1e-12, "{w:?}");
    }

    #[test]
    fn expected_peak_follows_nearest_line() {
        let cfg = NVConfig::default().at_doublet_center();
        assert!((expected_peak(2e6, &cfg) - 2.5e6).abs() < 1e-6);
        let cfg = NVConfig::default().on_lower_line();
        assert!((expected_peak(2e6, &cfg) - 2e6).abs() < 1e-6);
    }

    #[test]
    fn exact_root_power_law() {
        let p = [17.3, 23.3, 29.3, 37.3];
        let f: Vec<f64> = p.iter().map(|&d| 4e6 * dbm_to_watts(d).sqrt()).collect();
        let fit = fit_linearity(&p, &f).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-6);
        assert!((fit.predict(37.3) / fit.predict(29.3) - 2.512).abs() < 1e-3);
    }

    #[test]
    fn detuning_floor_gives_positive_intercept() {
        let p = [0.0, 5.0, 10.0, 15.0, 20.0];
        let f: Vec<f64> = p.iter().map(|&d| (1e6 * dbm_to_watts(d).sqrt()).hypot(1.5e6)).collect();
        let fit = fit_linearity(&p, &f).unwrap();
        assert!(fit.intercept > 0.0);
    }

    #[test]
    fn fit_rejects_short_input() {
        assert!(fit_linearity(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_linearity(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn calibration_round_trip() {
        let cfg = NVConfig::default();
        let b = uniform_amplitude_for_rabi(1.22e6, [0.0, 0.0, 1.0], &cfg).unwrap();
        assert!((nv::rabi_per_tesla([0.0, 0.0, 1.0], &cfg) * b - 1.22e6).abs() < 1e-6);
        assert!((power_scale(29.3, 37.3) - 2.5119).abs() < 1e-4);
    }
}
