//! CSV, binary and PGM output of Rabi maps.

use std::path::Path;

use super::{RabiGrid, RabiMap};
use crate::gridfile::{self, fmt_f64, GridFileError, GridHeader};

pub const RABI_MAGIC: &str = "NVRABI";
pub const RABI_COMPONENTS: &str = "freq_hz,hwhm_hz,flag";

impl RabiMap {
    pub fn header(&self, config_hash: &str) -> GridHeader {
        let mut h = GridHeader::new(RABI_MAGIC);
        h.set("nx", self.nx)
            .set("ny", self.ny)
            .set("pitch_x", fmt_f64(self.pitch[0]))
            .set("pitch_y", fmt_f64(self.pitch[1]))
            .set("x0", fmt_f64(self.origin[0]))
            .set("y0", fmt_f64(self.origin[1]))
            .set("units", "hz")
            .set("components", RABI_COMPONENTS)
            .set("config_sha256", config_hash);
        h
    }

    pub fn to_bytes(&self, config_hash: &str) -> Vec<u8> {
        let data: Vec<f32> = (0..self.frequency.len())
            .flat_map(|i| [self.frequency[i] as f32, self.hwhm[i] as f32, if self.flagged[i] { 1.0 } else { 0.0 }])
            .collect();
        gridfile::encode(&self.header(config_hash), &data)
    }

    pub fn write_binary(&self, path: &Path, config_hash: &str) -> Result<(), GridFileError> {
        std::fs::write(path, self.to_bytes(config_hash))?;
        Ok(())
    }

    /// Frequencies come back rounded to f32.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, GridHeader), GridFileError> {
        let (h, data) = gridfile::decode(bytes)?;
        if h.magic != RABI_MAGIC || h.require("components")? != RABI_COMPONENTS {
            return Err(GridFileError::Header(format!("not a Rabi map ({} {:?})", h.magic, h.get("components"))));
        }
        let map = Self {
            nx: h.usize("nx")?,
            ny: h.usize("ny")?,
            pitch: [h.f64("pitch_x")?, h.f64("pitch_y")?],
            origin: [h.f64("x0")?, h.f64("y0")?],
            frequency: data.chunks_exact(3).map(|c| c[0] as f64).collect(),
            hwhm: data.chunks_exact(3).map(|c| c[1] as f64).collect(),
            flagged: data.chunks_exact(3).map(|c| c[2] != 0.0).collect(),
        };
        Ok((map, h))
    }

    pub fn read_binary(path: &Path) -> Result<(Self, GridHeader), GridFileError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_m,y_m,freq_hz,hwhm_hz,flagged\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let (x, y) = self.position(ix, iy);
                let i = self.index(ix, iy);
                s.push_str(&format!("{x:e},{y:e},{:e},{:e},{}\n", self.frequency[i], self.hwhm[i], self.flagged[i] as u8));
            }
        }
        s
    }

    /// 8-bit binary PGM of the frequency, top row at the highest y. Grey
    /// levels span the unflagged range; flagged bins are black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let vals = self.frequency.iter().zip(&self.flagged).filter(|(_, f)| !**f).map(|(v, _)| *v);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = format!("P5\n# min_hz={lo:e} max_hz={hi:e}\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        for iy in (0..self.ny).rev() {
            for ix in 0..self.nx {
                let i = self.index(ix, iy);
                out.push(if self.flagged[i] { 0 } else { (1.0 + 254.0 * (self.frequency[i] - lo) / span).round() as u8 });
            }
        }
        out
    }
}

impl RabiGrid {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_m,y_m,rabi_hz\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let (x, y) = (self.origin[0] + ix as f64 * self.pitch[0], self.origin[1] + iy as f64 * self.pitch[1]);
                s.push_str(&format!("{x:e},{y:e},{:e}\n", self.get(ix, iy)));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RabiMap {
        RabiMap {
            nx: 3,
            ny: 2,
            pitch: [264e-9, 265e-9],
            origin: [-1e-6, 2e-6],
            frequency: vec![1.0e6, 2.0e6, 3.5e6, 22.5e6, 0.0, 4.0e6],
            hwhm: vec![1e5; 6],
            flagged: vec![false, false, false, false, true, false],
        }
    }

    #[test]
    fn binary_round_trip() {
        let m = sample();
        let (back, h) = RabiMap::from_bytes(&m.to_bytes("abc")).unwrap();
        assert_eq!(back, m);
        assert_eq!(h.get("config_sha256"), Some("abc"));
        assert!(RabiMap::from_bytes(b"NVFIELD v1 nx=1\n").is_err());
    }

    #[test]
    fn pgm_layout() {
        let pgm = sample().to_pgm();
        let text = String::from_utf8_lossy(&pgm);
        assert!(text.starts_with("P5\n# min_hz=1e6 max_hz=2.25e7\n3 2\n255\n"));
        let px = &pgm[pgm.len() - 6..];
        // Top row is iy = 1.
        assert_eq!(px[0], 255);
        assert_eq!(px[1], 0);
        assert_eq!(px[3], 1);
    }

    #[test]
    fn csv_rows() {
        let csv = sample().to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(5).unwrap().ends_with(",1"));
    }
}
