//! Output files. Every text artifact starts with the config hash; nothing
//! time-dependent is written, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Write `body` below a `# config_sha256=` line.
pub fn write_text(path: &Path, hash: &str, body: &str) -> Result<PathBuf, CliError> {
    let mut s = String::with_capacity(body.len() + 80);
    let _ = writeln!(s, "# config_sha256={hash}");
    s.push_str(body);
    std::fs::write(path, s)?;
    Ok(path.to_path_buf())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::write(path, bytes)?;
    Ok(path.to_path_buf())
}

/// PGM with the hash as an extra comment line after the magic number.
pub fn write_pgm(path: &Path, hash: &str, pgm: &[u8]) -> Result<PathBuf, CliError> {
    let mut out = Vec::with_capacity(pgm.len() + 80);
    out.extend_from_slice(&pgm[..3]);
    out.extend_from_slice(format!("# config_sha256={hash}\n").as_bytes());
    out.extend_from_slice(&pgm[3..]);
    write_bytes(path, &out)
}

/// `key = value` report lines.
#[derive(Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.lines.push((key.into(), format!("{v:e}")));
        self
    }

    pub fn int(&mut self, key: &str, v: usize) -> &mut Self {
        self.lines.push((key.into(), v.to_string()));
        self
    }

    pub fn text(&mut self, key: &str, v: impl std::fmt::Display) -> &mut Self {
        self.lines.push((key.into(), format!("\"{v}\"")));
        self
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.lines.push((key.into(), v.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_artifacts_carry_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(&dir.path().join("a.csv"), "abc", "x,y\n").unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "# config_sha256=abc\nx,y\n");
        let p = write_pgm(&dir.path().join("a.pgm"), "abc", b"P5\n1 1\n255\n\x07").unwrap();
        assert_eq!(std::fs::read(p).unwrap(), b"P5\n# config_sha256=abc\n1 1\n255\n\x07");
    }

    #[test]
    fn report_lines() {
        let mut r = Report::default();
        r.num("ratio", 2.5).int("flagged", 3).text("stage", "pipeline").flag("ok", true);
        assert_eq!(r.render(), "ratio = 2.5e0\nflagged = 3\nstage = \"pipeline\"\nok = true\n");
        assert_eq!(r.get("flagged"), Some("3"));
    }
}
