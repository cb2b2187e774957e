//! Tabulated analytic fields along a straight scan.

use std::path::{Path, PathBuf};

use nvmap_core::oracle::{flux_density, hertzian_dipole_field, AnalyticSource};
use nvmap_core::Vec3;

use crate::artifacts::{ensure_dir, write_text};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleKind {
    Dipole,
    Loop,
    Uniform,
}

#[derive(Clone, Debug, clap::Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub kind: OracleKind,
    /// Scan start `x,y,z` (m); defaults depend on the kind.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub stop: Option<Vec<f64>>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Space the samples geometrically along the scan.
    #[arg(long)]
    pub log: bool,
    /// Loop radius (m).
    #[arg(long, default_value_t = 1e-6)]
    pub radius: f64,
    /// Loop current (A).
    #[arg(long, default_value_t = 1e-3)]
    pub current: f64,
    /// Dipole current moment (A·m).
    #[arg(long, default_value_t = 1e-3)]
    pub moment: f64,
    #[arg(long, default_value_t = 3.01e9)]
    pub frequency: f64,
    /// Uniform flux density along z (T).
    #[arg(long, default_value_t = 1e-4)]
    pub field: f64,
}

impl OracleArgs {
    fn scan(&self) -> Result<(Vec3, Vec3), CliError> {
        let (a, b) = match self.kind {
            OracleKind::Loop => ([0.0, 0.0, 0.0], [0.0, 0.0, 5.0 * self.radius]),
            OracleKind::Dipole => ([1e-4, 0.0, 0.0], [1e-3, 0.0, 0.0]),
            OracleKind::Uniform => ([-1e-5, 0.0, 0.0], [1e-5, 0.0, 0.0]),
        };
        let pick = |v: &Option<Vec<f64>>, d: Vec3| match v {
            Some(v) if v.len() == 3 => Ok([v[0], v[1], v[2]]),
            Some(_) => Err(CliError::Validation("scan endpoints need three components".into())),
            None => Ok(d),
        };
        Ok((pick(&self.start, a)?, pick(&self.stop, b)?))
    }
}

fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    std::array::from_fn(|k| a[k] + (b[k] - a[k]) * t)
}

/// Rows `x,y,z,bx_re,...` plus `ex_re,...` for the dipole.
pub fn oracle_csv(args: &OracleArgs) -> Result<String, CliError> {
    if args.points < 2 {
        return Err(CliError::Validation("need at least 2 scan points".into()));
    }
    let (a, b) = args.scan()?;
    let src = match args.kind {
        OracleKind::Dipole => AnalyticSource::HertzianDipole { moment: args.moment, position: [0.0; 3], orientation: [0.0, 0.0, 1.0], frequency: args.frequency },
        OracleKind::Loop => AnalyticSource::CurrentLoop { radius: args.radius, center: [0.0; 3], normal: [0.0, 0.0, 1.0], current: args.current },
        OracleKind::Uniform => AnalyticSource::Uniform { b: [0.0, 0.0, args.field] },
    };
    src.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let dipole = args.kind == OracleKind::Dipole;
    let (la, lb) = (a.iter().map(|v| v * v).sum::<f64>().sqrt(), b.iter().map(|v| v * v).sum::<f64>().sqrt());
    if args.log && !(la > 0.0 && lb > 0.0) {
        return Err(CliError::Validation("logarithmic scans need endpoints away from the origin".into()));
    }
    let mut s = String::from("x_m,y_m,z_m,bx_re,bx_im,by_re,by_im,bz_re,bz_im,b_abs");
    s.push_str(if dipole { ",ex_re,ex_im,ey_re,ey_im,ez_re,ez_im,e_abs\n" } else { "\n" });
    for i in 0..args.points {
        let t = i as f64 / (args.points - 1) as f64;
        let r = if args.log {
            // Along the ray through the endpoints, geometric in |r|.
            let d = la * (lb / la).powf(t);
            let u = lerp(a, b, t);
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            u.map(|v| v / n * d)
        } else {
            lerp(a, b, t)
        };
        let bf = flux_density(&src, r).map_err(|e| CliError::Validation(e.to_string()))?;
        let babs = bf.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        s.push_str(&format!("{:e},{:e},{:e}", r[0], r[1], r[2]));
        for c in &bf {
            s.push_str(&format!(",{:e},{:e}", c.re, c.im));
        }
        s.push_str(&format!(",{babs:e}"));
        if dipole {
            let (e, _) = hertzian_dipole_field(args.moment, [0.0; 3], [0.0, 0.0, 1.0], args.frequency, r).map_err(|e| CliError::Validation(e.to_string()))?;
            for c in &e {
                s.push_str(&format!(",{:e},{:e}", c.re, c.im));
            }
            s.push_str(&format!(",{:e}", e.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn oracle(args: &OracleArgs, out: &Path, hash: &str) -> Result<PathBuf, CliError> {
    let csv = oracle_csv(args)?;
    ensure_dir(out)?;
    write_text(&out.join("oracle.csv"), hash, &csv)
}
