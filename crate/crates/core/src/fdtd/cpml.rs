//! Convolutional PML.
//!
//! The main update treats the absorbing layers as vacuum; this module then
//! adds `coef·((1/κ − 1)·D + ψ)` for every derivative `D` taken across a layer,
//! with the recursive convolution `ψ ← bψ + cD`.

use std::ops::Range;

use super::yee::Geom;
use crate::constants::{EPS0, ETA0};
use crate::scene::Mesh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpmlParams {
    /// Polynomial grading order m.
    pub order: f64,
    /// Multiplier on the conventional optimum `σmax = 0.8(m+1)/(η0Δ)`.
    pub sigma_scale: f64,
    pub kappa_max: f64,
    /// Complex-frequency-shift α at the inner interface, S/m; falls linearly
    /// to zero at the outer wall.
    pub alpha_max: f64,
}

impl Default for CpmlParams {
    fn default() -> Self {
        Self { order: 3.0, sigma_scale: 1.0, kappa_max: 1.0, alpha_max: 0.0 }
    }
}

impl CpmlParams {
    /// Defaults with α matched to the angular frequency `omega`.
    pub fn for_frequency(omega: f64) -> Self {
        Self { alpha_max: omega * EPS0, ..Self::default() }
    }
}

/// Update coefficients along one axis, at nodes (`*_n`) and half nodes (`*_c`).
#[derive(Clone, Debug)]
struct Profile {
    b_n: Vec<f32>,
    c_n: Vec<f32>,
    k_n: Vec<f32>,
    b_c: Vec<f32>,
    c_c: Vec<f32>,
    k_c: Vec<f32>,
    /// Active node index ranges for E corrections.
    e_ranges: [Range<usize>; 2],
    /// Active half-node index ranges for H corrections.
    h_ranges: [Range<usize>; 2],
}

impl Profile {
    fn new(nodes: &[f64], layers: usize, dt: f64, p: &CpmlParams) -> Self {
        let n = nodes.len() - 1;
        let (inner_lo, inner_hi) = (nodes[layers], nodes[n - layers]);
        let (len_lo, len_hi) = (inner_lo - nodes[0], nodes[n] - inner_hi);
        let smax_lo = p.sigma_scale * 0.8 * (p.order + 1.0) / (ETA0 * (nodes[1] - nodes[0]));
        let smax_hi = p.sigma_scale * 0.8 * (p.order + 1.0) / (ETA0 * (nodes[n] - nodes[n - 1]));
        let coef = |x: f64| -> (f32, f32, f32) {
            let (rho, smax) = if x < inner_lo {
                ((inner_lo - x) / len_lo, smax_lo)
            } else if x > inner_hi {
                ((x - inner_hi) / len_hi, smax_hi)
            } else {
                return (1.0, 0.0, 1.0);
            };
            let g = rho.powf(p.order);
            let sigma = smax * g;
            let kappa = 1.0 + (p.kappa_max - 1.0) * g;
            let alpha = p.alpha_max * (1.0 - rho);
            let b = (-(sigma / kappa + alpha) * dt / EPS0).exp();
            let c = if sigma > 0.0 { sigma / (sigma * kappa + kappa * kappa * alpha) * (b - 1.0) } else { 0.0 };
            (b as f32, c as f32, (1.0 / kappa) as f32)
        };
        let at_nodes: Vec<_> = nodes.iter().map(|&x| coef(x)).collect();
        let at_half: Vec<_> = nodes.windows(2).map(|w| coef(0.5 * (w[0] + w[1]))).collect();
        Self {
            b_n: at_nodes.iter().map(|c| c.0).collect(),
            c_n: at_nodes.iter().map(|c| c.1).collect(),
            k_n: at_nodes.iter().map(|c| c.2).collect(),
            b_c: at_half.iter().map(|c| c.0).collect(),
            c_c: at_half.iter().map(|c| c.1).collect(),
            k_c: at_half.iter().map(|c| c.2).collect(),
            e_ranges: [1..layers, n - layers + 1..n],
            h_ranges: [0..layers, n - layers..n],
        }
    }
}

/// Auxiliary state for every (component, derivative axis) pair that crosses
/// an absorbing layer.
#[derive(Clone, Debug)]
pub(crate) struct Cpml {
    profiles: [Option<Profile>; 3],
    /// `psi_h[c][a]`: H component `c`, derivative along axis `a`.
    psi_h: [[Vec<f32>; 3]; 3],
    psi_e: [[Vec<f32>; 3]; 3],
}

struct Term<'a> {
    axis: usize,
    /// Forward difference (H update) or backward difference (E update).
    forward: bool,
    inv: &'a [f32],
    b: &'a [f32],
    c: &'a [f32],
    k: &'a [f32],
}

impl Cpml {
    pub fn new(mesh: &Mesh, geom: &Geom, dt: f64, params: &CpmlParams) -> Self {
        let profiles: [Option<Profile>; 3] = std::array::from_fn(|a| {
            let layers = mesh.axes[a].pml_layers();
            (layers > 0).then(|| Profile::new(&mesh.axes[a].nodes, layers, dt, params))
        });
        let len = geom.len();
        let alloc = |c: usize, a: usize| if c != a && profiles[a].is_some() { vec![0.0; len] } else { Vec::new() };
        Self {
            psi_h: std::array::from_fn(|c| std::array::from_fn(|a| alloc(c, a))),
            psi_e: std::array::from_fn(|c| std::array::from_fn(|a| alloc(c, a))),
            profiles,
        }
    }

    pub fn correct_h(&mut self, g: &Geom, ch: f32, e: &[Vec<f32>; 3], h: &mut [Vec<f32>; 3]) {
        for c in 0..3 {
            for (a, src, sign) in [((c + 1) % 3, (c + 2) % 3, 1.0f32), ((c + 2) % 3, (c + 1) % 3, -1.0)] {
                let Some(p) = &self.profiles[a] else { continue };
                let term = Term { axis: a, forward: true, inv: &g.inv_d[a], b: &p.b_c, c: &p.c_c, k: &p.k_c };
                for r in &p.h_ranges {
                    let mut region: [Range<usize>; 3] = std::array::from_fn(|b| g.h_range(c, b));
                    region[a] = r.clone();
                    apply(g, &term, region, &e[src], &mut self.psi_h[c][a], &mut h[c], -sign * ch, None);
                }
            }
        }
    }

    pub fn correct_e(&mut self, g: &Geom, ce: &[Vec<f32>; 3], h: &[Vec<f32>; 3], e: &mut [Vec<f32>; 3]) {
        for c in 0..3 {
            for (a, src, sign) in [((c + 1) % 3, (c + 2) % 3, 1.0f32), ((c + 2) % 3, (c + 1) % 3, -1.0)] {
                let Some(p) = &self.profiles[a] else { continue };
                let term = Term { axis: a, forward: false, inv: &g.inv_h[a], b: &p.b_n, c: &p.c_n, k: &p.k_n };
                for r in &p.e_ranges {
                    let mut region: [Range<usize>; 3] = std::array::from_fn(|b| g.e_range(c, b));
                    region[a] = r.clone();
                    apply(g, &term, region, &h[src], &mut self.psi_e[c][a], &mut e[c], sign, Some(&ce[c]));
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn apply(g: &Geom, t: &Term, region: [Range<usize>; 3], src: &[f32], psi: &mut [f32], dst: &mut [f32], coef: f32, ce: Option<&[f32]>) {
    let stride = g.s[t.axis];
    let (k0, k1) = (region[2].start, region[2].end);
    if k0 >= k1 {
        return;
    }
    for i in region[0].clone() {
        for j in region[1].clone() {
            let base = g.index(i, j, 0);
            let r = base + k0..base + k1;
            let (s0, s1) = if t.forward {
                (&src[r.start..r.end], &src[r.start + stride..r.end + stride])
            } else {
                (&src[r.start - stride..r.end - stride], &src[r.clone()])
            };
            let ps = &mut psi[r.clone()];
            let out = &mut dst[r.clone()];
            let unit = [1.0f32];
            let sc: &[f32] = match ce {
                Some(ce) => &ce[r.clone()],
                None => &unit,
            };
            let step = usize::from(ce.is_some());
            if t.axis == 2 {
                let (inv, b, c, k) = (&t.inv[k0..k1], &t.b[k0..k1], &t.c[k0..k1], &t.k[k0..k1]);
                for n in 0..out.len() {
                    let d = (s1[n] - s0[n]) * inv[n];
                    let p = b[n] * ps[n] + c[n] * d;
                    ps[n] = p;
                    out[n] += coef * sc[n * step] * ((k[n] - 1.0) * d + p);
                }
            } else {
                let along = if t.axis == 0 { i } else { j };
                let (inv, b, c, k) = (t.inv[along], t.b[along], t.c[along], t.k[along] - 1.0);
                for n in 0..out.len() {
                    let d = (s1[n] - s0[n]) * inv;
                    let p = b * ps[n] + c * d;
                    ps[n] = p;
                    out[n] += coef * sc[n * step] * (k * d + p);
                }
            }
        }
    }
}
