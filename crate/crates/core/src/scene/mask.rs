//! Conductor pattern rasters and their on-disk format.
//!
//! A mask is a portable bitmap (`P1` plain or `P4` raw) where `1` marks a
//! conductor pixel, plus a sidecar header next to it (same stem, `.hdr`
//! extension) holding `key=value` lines:
//!
//! ```text
//! # cross pattern, 1 µm strokes
//! pitch_m=1e-6
//! origin_x_m=-50e-6
//! origin_y_m=-50e-6
//! ```
//!
//! The origin is the lab position of the raster's lower-left corner. When it
//! is absent the raster is centered on the lab origin. Bitmap row 0 is the top
//! row, i.e. the largest `y`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SceneError;

#[derive(Clone, Debug, PartialEq)]
pub struct PatternMask {
    width: usize,
    height: usize,
    pitch: f64,
    origin: [f64; 2],
    /// Row-major, row 0 at the lowest `y`.
    occupancy: Vec<bool>,
}

impl PatternMask {
    /// Build a mask from rows listed bottom (`y` smallest) first.
    pub fn from_rows(
        width: usize,
        height: usize,
        pitch: f64,
        origin: Option<[f64; 2]>,
        occupancy: Vec<bool>,
    ) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::Validation("mask raster must be at least 1x1".into()));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(SceneError::Validation(format!("mask pitch must be > 0, got {pitch}")));
        }
        if occupancy.len() != width * height {
            return Err(SceneError::Validation(format!(
                "mask raster has {} pixels, expected {}x{}",
                occupancy.len(),
                width,
                height
            )));
        }
        let origin = origin.unwrap_or([-0.5 * width as f64 * pitch, -0.5 * height as f64 * pitch]);
        Ok(Self { width, height, pitch, origin, occupancy })
    }

    /// Two perpendicular strokes of `stroke_px` pixels crossing at the raster center.
    pub fn cross(size_px: usize, stroke_px: usize, pitch: f64) -> Result<Self, SceneError> {
        let lo = (size_px.saturating_sub(stroke_px)) / 2;
        let hi = lo + stroke_px;
        let occupancy = (0..size_px * size_px)
            .map(|n| {
                let (x, y) = (n % size_px, n / size_px);
                (lo..hi).contains(&x) || (lo..hi).contains(&y)
            })
            .collect();
        Self::from_rows(size_px, size_px, pitch, None, occupancy)
    }

    /// Annulus of the given mean radius and radial width (both in pixels).
    pub fn ring(size_px: usize, radius_px: f64, width_px: f64, pitch: f64) -> Result<Self, SceneError> {
        let c = 0.5 * size_px as f64;
        let occupancy = (0..size_px * size_px)
            .map(|n| {
                let x = (n % size_px) as f64 + 0.5 - c;
                let y = (n / size_px) as f64 + 0.5 - c;
                ((x * x + y * y).sqrt() - radius_px).abs() <= 0.5 * width_px
            })
            .collect();
        Self::from_rows(size_px, size_px, pitch, None, occupancy)
    }

    /// Filled axis-aligned rectangle `[x0, x1) x [y0, y1)` in pixels.
    pub fn rectangle(size_px: usize, x: (usize, usize), y: (usize, usize), pitch: f64) -> Result<Self, SceneError> {
        let occupancy = (0..size_px * size_px)
            .map(|n| (x.0..x.1).contains(&(n % size_px)) && (y.0..y.1).contains(&(n / size_px)))
            .collect();
        Self::from_rows(size_px, size_px, pitch, None, occupancy)
    }

    pub fn width_px(&self) -> usize {
        self.width
    }

    pub fn height_px(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Self {
        self.origin = origin;
        self
    }

    /// Pixel at column `x`, row `y` (row 0 at lowest `y`).
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.occupancy[y * self.width + x]
    }

    pub fn conductor_count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    /// No conductor pixel at all (a vacuum scene).
    pub fn is_empty(&self) -> bool {
        self.conductor_count() == 0
    }

    /// Lab-frame bounds `[x_min, x_max, y_min, y_max]` of the raster.
    pub fn extent(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[0] + self.width as f64 * self.pitch,
            self.origin[1],
            self.origin[1] + self.height as f64 * self.pitch,
        ]
    }

    /// Bounds of the conductor pixels only, `None` for an empty mask.
    pub fn conductor_extent(&self) -> Option<[f64; 4]> {
        let mut b = [usize::MAX, 0, usize::MAX, 0];
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    b = [b[0].min(x), b[1].max(x + 1), b[2].min(y), b[3].max(y + 1)];
                }
            }
        }
        (b[0] != usize::MAX).then(|| {
            [
                self.origin[0] + b[0] as f64 * self.pitch,
                self.origin[0] + b[1] as f64 * self.pitch,
                self.origin[1] + b[2] as f64 * self.pitch,
                self.origin[1] + b[3] as f64 * self.pitch,
            ]
        })
    }

    /// Is the lab point `(x, y)` on conductor?
    ///
    /// A point lying exactly on a pixel boundary counts as conductor when
    /// either neighbouring pixel is, which keeps sampling of mirror-symmetric
    /// masks mirror-symmetric.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let cols = pixel_candidates((x - self.origin[0]) / self.pitch, self.width);
        let rows = pixel_candidates((y - self.origin[1]) / self.pitch, self.height);
        cols.iter()
            .flatten()
            .any(|&c| rows.iter().flatten().any(|&r| self.get(c, r)))
    }

    /// Narrowest conductor run along rows or columns, in meters.
    pub fn min_feature_width(&self) -> Option<f64> {
        let mut best = usize::MAX;
        let mut scan = |len: usize, at: &dyn Fn(usize) -> bool| {
            let mut run = 0;
            for i in 0..=len {
                if i < len && at(i) {
                    run += 1;
                } else if run > 0 {
                    best = best.min(run);
                    run = 0;
                }
            }
        };
        for y in 0..self.height {
            scan(self.width, &|x| self.get(x, y));
        }
        for x in 0..self.width {
            scan(self.height, &|y| self.get(x, y));
        }
        (best != usize::MAX).then(|| best as f64 * self.pitch)
    }

    /// Mirror about the raster's vertical center line.
    pub fn mirrored_x(&self) -> Self {
        let mut occ = self.occupancy.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                occ[y * self.width + x] = self.get(self.width - 1 - x, y);
            }
        }
        Self { occupancy: occ, ..self.clone() }
    }

    /// Plain (`P1`) bitmap text.
    pub fn to_pbm(&self) -> String {
        let mut s = format!("P1\n{} {}\n", self.width, self.height);
        for row in (0..self.height).rev() {
            let line: Vec<&str> = (0..self.width).map(|x| if self.get(x, row) { "1" } else { "0" }).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    /// Sidecar header text for [`PatternMask::to_pbm`].
    pub fn header_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pitch_m={:e}", self.pitch);
        let _ = writeln!(s, "origin_x_m={:e}", self.origin[0]);
        let _ = writeln!(s, "origin_y_m={:e}", self.origin[1]);
        s
    }

    /// Write `path` (bitmap) and its sidecar header.
    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        fs::write(path, self.to_pbm()).map_err(|e| SceneError::io(path, e))?;
        let hdr = header_path(path);
        fs::write(&hdr, self.header_text()).map_err(|e| SceneError::io(&hdr, e))
    }
}

fn pixel_candidates(t: f64, len: usize) -> [Option<usize>; 2] {
    let to_idx = |v: f64| (v >= 0.0 && v < len as f64).then_some(v as usize);
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        [to_idx(r - 1.0), to_idx(r)]
    } else {
        [to_idx(t.floor()), None]
    }
}

/// Sidecar header location for a mask bitmap.
pub fn header_path(mask: &Path) -> PathBuf {
    mask.with_extension("hdr")
}

/// Load a bitmap with an explicit pitch; an origin from the sidecar header is
/// honoured when present.
pub fn load_pattern_mask(path: &Path, pitch: f64) -> Result<PatternMask, SceneError> {
    let header = read_header(path)?;
    let origin = header.as_ref().and_then(|h| h.origin);
    load_with(path, pitch, origin)
}

/// Load a bitmap taking pitch and origin from the sidecar header.
pub fn load_mask(path: &Path) -> Result<PatternMask, SceneError> {
    let header = read_header(path)?.ok_or_else(|| {
        SceneError::Validation(format!("missing mask header {}", header_path(path).display()))
    })?;
    let pitch = header
        .pitch
        .ok_or_else(|| SceneError::Validation("mask header lacks pitch_m".into()))?;
    load_with(path, pitch, header.origin)
}

fn load_with(path: &Path, pitch: f64, origin: Option<[f64; 2]>) -> Result<PatternMask, SceneError> {
    let bytes = fs::read(path).map_err(|e| SceneError::io(path, e))?;
    let (w, h, top_down) = parse_pbm(&bytes)?;
    let mut occupancy = vec![false; w * h];
    for (row, chunk) in top_down.chunks(w).enumerate() {
        let y = h - 1 - row;
        occupancy[y * w..(y + 1) * w].copy_from_slice(chunk);
    }
    PatternMask::from_rows(w, h, pitch, origin, occupancy)
}

#[derive(Debug, Default)]
struct MaskHeader {
    pitch: Option<f64>,
    origin: Option<[f64; 2]>,
}

fn read_header(mask: &Path) -> Result<Option<MaskHeader>, SceneError> {
    let path = header_path(mask);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(SceneError::io(&path, e)),
    };
    let mut hdr = MaskHeader::default();
    let mut ox = None;
    let mut oy = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| SceneError::Parse { line: n + 1, offset: 0, message: msg.to_string() };
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let value: f64 = value.trim().parse().map_err(|_| bad("value is not a number"))?;
        match key.trim() {
            "pitch_m" => hdr.pitch = Some(value),
            "origin_x_m" => ox = Some(value),
            "origin_y_m" => oy = Some(value),
            other => return Err(bad(&format!("unknown header key `{other}`"))),
        }
    }
    hdr.origin = match (ox, oy) {
        (Some(x), Some(y)) => Some([x, y]),
        (None, None) => None,
        _ => return Err(SceneError::Validation("mask header needs both origin_x_m and origin_y_m".into())),
    };
    Ok(Some(hdr))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> SceneError {
        SceneError::Parse { line: self.line, offset: self.pos, message: message.into() }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize, SceneError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an unsigned integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }
}

/// Returns width, height and the pixels in file order (top row first).
fn parse_pbm(bytes: &[u8]) -> Result<(usize, usize, Vec<bool>), SceneError> {
    let mut cur = Cursor { bytes, pos: 0, line: 1 };
    let magic = bytes.get(..2).ok_or_else(|| cur.err("file too short for a bitmap"))?;
    let raw = match magic {
        b"P1" => false,
        b"P4" => true,
        _ => return Err(cur.err("not a portable bitmap (expected P1 or P4)")),
    };
    cur.pos = 2;
    let w = cur.number()?;
    let h = cur.number()?;
    if w == 0 || h == 0 {
        return Err(SceneError::Validation(format!("zero-size raster {w}x{h}")));
    }
    let mut px = Vec::with_capacity(w * h);
    if raw {
        // exactly one whitespace byte separates header and data
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.err("missing separator before raster data")),
        }
        let stride = w.div_ceil(8);
        let data = &bytes[cur.pos..];
        if data.len() < stride * h {
            return Err(cur.err(format!("raster data truncated: {} of {} bytes", data.len(), stride * h)));
        }
        for row in 0..h {
            for x in 0..w {
                let byte = data[row * stride + x / 8];
                px.push(byte & (0x80 >> (x % 8)) != 0);
            }
        }
    } else {
        while px.len() < w * h {
            cur.skip_space_and_comments();
            match bytes.get(cur.pos) {
                Some(b'0') => px.push(false),
                Some(b'1') => px.push(true),
                Some(&c) => return Err(cur.err(format!("unexpected byte {:?} in raster", c as char))),
                None => return Err(cur.err(format!("raster truncated after {} of {} pixels", px.len(), w * h))),
            }
            cur.pos += 1;
        }
    }
    Ok((w, h, px))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_mask(dir: &Path, name: &str, body: &[u8], header: Option<&str>) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        if let Some(h) = header {
            fs::write(header_path(&p), h).unwrap();
        }
        p
    }

    #[test]
    fn all_true_two_by_two() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_mask(dir.path(), "m.pbm", b"P1\n2 2\n1 1\n1 1\n", None);
        let m = load_pattern_mask(&p, 0.5e-6).unwrap();
        assert_eq!(m.conductor_count(), 4);
        let e = m.extent();
        assert!((e[1] - e[0] - 1e-6).abs() < 1e-18);
        assert!((e[3] - e[2] - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn empty_raster_is_flagged_not_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_mask(dir.path(), "e.pbm", b"P1\n3 2\n000\n000\n", Some("pitch_m=1e-6\n"));
        let m = load_mask(&p).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.conductor_count(), 0);
    }

    #[test]
    fn cross_arms_meet_at_center() {
        let m = PatternMask::cross(100, 1, 1e-6).unwrap();
        assert_eq!(m.conductor_count(), 199);
        // 1-pixel strokes on an even raster occupy the pixel just below center
        assert!(m.contains(-0.5e-6, -0.5e-6));
        assert!(m.contains(-0.5e-6, 40e-6));
        assert!(m.contains(-40e-6, -0.5e-6));
        assert!(!m.contains(5e-6, 5e-6));
        assert!((m.min_feature_width().unwrap() - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn p4_matches_p1() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_mask(dir.path(), "a.pbm", b"P1\n# c\n10 2\n1000000001\n0100000010\n", None);
        let mut raw = b"P4\n10 2\n".to_vec();
        raw.extend_from_slice(&[0b1000_0000, 0b0100_0000, 0b0100_0000, 0b1000_0000]);
        let b = write_mask(dir.path(), "b.pbm", &raw, None);
        assert_eq!(load_pattern_mask(&a, 1e-6).unwrap(), load_pattern_mask(&b, 1e-6).unwrap());
    }

    #[test]
    fn top_row_is_highest_y() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_mask(dir.path(), "t.pbm", b"P1\n1 2\n1\n0\n", Some("pitch_m=1\norigin_x_m=0\norigin_y_m=0\n"));
        let m = load_mask(&p).unwrap();
        assert!(m.contains(0.5, 1.5));
        assert!(!m.contains(0.5, 0.5));
    }

    #[test]
    fn malformed_files_report_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_mask(dir.path(), "bad.pbm", b"P1\n2 2\n1 1\n1 x\n", None);
        match load_pattern_mask(&p, 1e-6) {
            Err(SceneError::Parse { line, offset, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(offset, 13);
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = write_mask(dir.path(), "z.pbm", b"P1\n0 3\n", None);
        assert!(matches!(load_pattern_mask(&p, 1e-6), Err(SceneError::Validation(_))));
        let p = write_mask(dir.path(), "q.pbm", b"P3\n1 1\n1\n", None);
        assert!(matches!(load_pattern_mask(&p, 1e-6), Err(SceneError::Parse { .. })));
    }

    #[test]
    fn save_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let m = PatternMask::ring(24, 8.0, 1.0, 0.5e-6).unwrap().with_origin([1e-6, -2e-6]);
        let p = dir.path().join("ring.pbm");
        m.save(&p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), m);
    }

    #[test]
    fn boundary_points_sample_symmetrically() {
        // 4-pixel mask, left half conductor; x = 0 is the shared pixel edge.
        let m = PatternMask::from_rows(4, 1, 1.0, Some([-2.0, 0.0]), vec![false, true, true, false]).unwrap();
        assert!(m.contains(-1.0, 0.5));
        assert!(m.contains(1.0, 0.5));
        assert!(!m.contains(-1.5, 0.5));
        assert!(!m.contains(1.5, 0.5));
    }
}
