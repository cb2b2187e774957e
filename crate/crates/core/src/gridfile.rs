//! Binary grid files shared by field maps and Rabi maps.
//!
//! A file is one ASCII header line terminated by `\n`, followed by
//! little-endian `f32` values. The header is whitespace-separated:
//!
//! ```text
//! <MAGIC> v<version> key=value key=value ...
//! ```
//!
//! Values never contain whitespace. Every grid header carries `nx`, `ny` and
//! `components` (comma-separated names); the payload holds `nx * ny *
//! components` values, sample-major (all components of one sample are
//! adjacent), samples ordered with x fastest and rows of increasing y.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed grid header: {0}")]
    Header(String),
    #[error("payload has {found} bytes, header implies {expected}")]
    Payload { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridHeader {
    pub magic: String,
    pub version: u32,
    pub entries: Vec<(String, String)>,
}

impl GridHeader {
    pub fn new(magic: &str) -> Self {
        Self { magic: magic.to_string(), version: 1, entries: Vec::new() }
    }

    /// Set `key`, replacing an earlier value.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, GridFileError> {
        self.get(key).ok_or_else(|| GridFileError::Header(format!("missing key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, GridFileError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| GridFileError::Header(format!("'{key}' is not a number: {v}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, GridFileError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| GridFileError::Header(format!("'{key}' is not an integer: {v}")))
    }

    pub fn components(&self) -> Result<Vec<String>, GridFileError> {
        Ok(self.require("components")?.split(',').map(str::to_string).collect())
    }

    pub fn to_line(&self) -> String {
        let mut s = format!("{} v{}", self.magic, self.version);
        for (k, v) in &self.entries {
            s.push(' ');
            s.push_str(k);
            s.push('=');
            s.push_str(v);
        }
        s
    }

    pub fn parse(line: &str) -> Result<Self, GridFileError> {
        let mut parts = line.split_whitespace();
        let magic = parts.next().ok_or_else(|| GridFileError::Header("empty header".into()))?;
        let version = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| GridFileError::Header("missing version".into()))?;
        let mut h = GridHeader { magic: magic.to_string(), version, entries: Vec::new() };
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| GridFileError::Header(format!("expected key=value, got '{p}'")))?;
            h.entries.push((k.to_string(), v.to_string()));
        }
        Ok(h)
    }
}

/// Format an `f64` so that it parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn encode(header: &GridHeader, data: &[f32]) -> Vec<u8> {
    let line = header.to_line();
    let mut out = Vec::with_capacity(line.len() + 1 + 4 * data.len());
    out.extend_from_slice(line.as_bytes());
    out.push(b'\n');
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(GridHeader, Vec<f32>), GridFileError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| GridFileError::Header("no header line".into()))?;
    let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| GridFileError::Header("header is not UTF-8".into()))?;
    let header = GridHeader::parse(line)?;
    let expected = header.usize("nx")? * header.usize("ny")? * header.components()?.len() * 4;
    let payload = &bytes[nl + 1..];
    if payload.len() != expected {
        return Err(GridFileError::Payload { expected, found: payload.len() });
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok((header, data))
}

pub fn write_grid(path: &Path, header: &GridHeader, data: &[f32]) -> Result<(), GridFileError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(header, data))?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<(GridHeader, Vec<f32>), GridFileError> {
    decode(&fs::read(path)?)
}
