//! Complex magnetic phasor maps on the probe plane.

use std::path::Path;

use num_complex::Complex64;

use crate::gridfile::{self, fmt_f64, GridFileError, GridHeader};
use crate::CVec3;

pub const FIELD_MAGIC: &str = "NVFIELD";
pub const FIELD_COMPONENTS: &str = "bx_re,bx_im,by_re,by_im,bz_re,bz_im";

/// Phasor `B̃` (tesla, `Re{B̃ e^{iωt}}` convention) sampled on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFieldMap {
    pub nx: usize,
    pub ny: usize,
    /// Sample spacing `[dx, dy]`, m.
    pub pitch: [f64; 2],
    /// Position of sample `(0, 0)`, m.
    pub origin: [f64; 2],
    pub plane_z: f64,
    /// Drive frequency the map represents, Hz.
    pub frequency: f64,
    /// Frequency the solver actually ran at, Hz.
    pub solver_frequency: f64,
    /// `nx * ny` samples, x fastest.
    pub data: Vec<CVec3>,
}

impl ComplexFieldMap {
    /// Map filled with one phasor.
    pub fn uniform(nx: usize, ny: usize, pitch: [f64; 2], origin: [f64; 2], plane_z: f64, frequency: f64, b: CVec3) -> Self {
        Self { nx, ny, pitch, origin, plane_z, frequency, solver_frequency: frequency, data: vec![b; nx * ny] }
    }

    pub fn get(&self, ix: usize, iy: usize) -> CVec3 {
        self.data[iy * self.nx + ix]
    }

    pub fn position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.origin[0] + ix as f64 * self.pitch[0], self.origin[1] + iy as f64 * self.pitch[1])
    }

    /// Extent covered by the samples (centers ± half a pitch):
    /// `[x_min, x_max, y_min, y_max]`.
    pub fn extent(&self) -> [f64; 4] {
        let (hx, hy) = (0.5 * self.pitch[0], 0.5 * self.pitch[1]);
        [
            self.origin[0] - hx,
            self.origin[0] + (self.nx as f64 - 0.5) * self.pitch[0],
            self.origin[1] - hy,
            self.origin[1] + (self.ny as f64 - 0.5) * self.pitch[1],
        ]
    }

    /// `√(|Bx|² + |By|² + |Bz|²)` per sample.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|b| b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.data {
            for c in b.iter_mut() {
                *c *= s;
            }
        }
        out
    }

    /// Root-mean-square phasor norm over the map.
    pub fn rms(&self) -> f64 {
        let sum: f64 = self.data.iter().flat_map(|b| b.iter()).map(|c| c.norm_sqr()).sum();
        (sum / self.data.len().max(1) as f64).sqrt()
    }

    pub fn header(&self, config_hash: &str) -> GridHeader {
        let mut h = GridHeader::new(FIELD_MAGIC);
        h.set("nx", self.nx)
            .set("ny", self.ny)
            .set("pitch_x", fmt_f64(self.pitch[0]))
            .set("pitch_y", fmt_f64(self.pitch[1]))
            .set("x0", fmt_f64(self.origin[0]))
            .set("y0", fmt_f64(self.origin[1]))
            .set("plane_z", fmt_f64(self.plane_z))
            .set("frequency_hz", fmt_f64(self.frequency))
            .set("solver_frequency_hz", fmt_f64(self.solver_frequency))
            .set("units", "tesla")
            .set("components", FIELD_COMPONENTS)
            .set("config_sha256", config_hash);
        h
    }

    pub fn to_bytes(&self, config_hash: &str) -> Vec<u8> {
        let data: Vec<f32> = self.data.iter().flat_map(|b| b.iter().flat_map(|c| [c.re as f32, c.im as f32])).collect();
        gridfile::encode(&self.header(config_hash), &data)
    }

    pub fn write_binary(&self, path: &Path, config_hash: &str) -> Result<(), GridFileError> {
        std::fs::write(path, self.to_bytes(config_hash))?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, GridHeader), GridFileError> {
        let (h, data) = gridfile::decode(bytes)?;
        if h.magic != FIELD_MAGIC || h.require("components")? != FIELD_COMPONENTS {
            return Err(GridFileError::Header(format!("not a field map ({} {:?})", h.magic, h.get("components"))));
        }
        let map = Self {
            nx: h.usize("nx")?,
            ny: h.usize("ny")?,
            pitch: [h.f64("pitch_x")?, h.f64("pitch_y")?],
            origin: [h.f64("x0")?, h.f64("y0")?],
            plane_z: h.f64("plane_z")?,
            frequency: h.f64("frequency_hz")?,
            solver_frequency: h.f64("solver_frequency_hz")?,
            data: data
                .chunks_exact(6)
                .map(|c| std::array::from_fn(|k| Complex64::new(c[2 * k] as f64, c[2 * k + 1] as f64)))
                .collect(),
        };
        Ok((map, h))
    }

    pub fn read_binary(path: &Path) -> Result<(Self, GridHeader), GridFileError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_m,y_m,bx_re,bx_im,by_re,by_im,bz_re,bz_im\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let (x, y) = self.position(ix, iy);
                let b = self.get(ix, iy);
                s.push_str(&format!(
                    "{x:e},{y:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                    b[0].re, b[0].im, b[1].re, b[1].im, b[2].re, b[2].im
                ));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexFieldMap {
        let mut m = ComplexFieldMap::uniform(3, 2, [0.5e-6, 0.25e-6], [-1e-6, 0.0], 3.51e-6, 3.01e9, [Complex64::new(0.0, 0.0); 3]);
        for (n, b) in m.data.iter_mut().enumerate() {
            *b = [Complex64::new(n as f64, 0.5), Complex64::new(-1.0, n as f64), Complex64::new(1e-4, -2e-5)];
        }
        m.solver_frequency = 1.2e12;
        m
    }

    #[test]
    fn binary_round_trip() {
        let m = sample();
        let bytes = m.to_bytes("abc123");
        let text_end = bytes.iter().position(|&b| b == b'\n').unwrap();
        let line = std::str::from_utf8(&bytes[..text_end]).unwrap();
        assert!(line.starts_with("NVFIELD v1 nx=3 ny=2 pitch_x=5e-7 pitch_y=2.5e-7"));
        assert!(line.ends_with("config_sha256=abc123"));
        assert_eq!(bytes.len(), text_end + 1 + 3 * 2 * 6 * 4);
        let (back, h) = ComplexFieldMap::from_bytes(&bytes).unwrap();
        assert_eq!(h.get("units"), Some("tesla"));
        assert_eq!(back.nx, 3);
        assert_eq!(back.solver_frequency, 1.2e12);
        for (a, b) in back.data.iter().zip(&m.data) {
            for k in 0..3 {
                assert!((a[k] - b[k]).norm() <= 1e-6 * b[k].norm());
            }
        }
    }

    #[test]
    fn csv_and_geometry() {
        let m = sample();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(2).unwrap().starts_with("-5e-7,0e0,1e0,5e-1"));
        for (a, b) in m.extent().iter().zip([-1.25e-6, 0.25e-6, -0.125e-6, 0.375e-6]) {
            assert!((a - b).abs() < 1e-18, "{a:e} vs {b:e}");
        }
        let s = m.scaled(2.0);
        assert_eq!(s.get(1, 1)[1], Complex64::new(-2.0, 8.0));
    }
}
