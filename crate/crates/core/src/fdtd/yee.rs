//! Field storage and the leapfrog update on a rectilinear Yee grid.
//!
//! All six components live in arrays of `(nx+1)(ny+1)(nz+1)` values indexed
//! `(i*(ny+1) + j)*(nz+1) + k`. Component `E_a` at index `(i,j,k)` sits at the
//! node shifted by half a cell along `a`; `H_a` sits at the face center
//! shifted by half a cell along the two other axes. Slots that fall outside
//! the grid are never touched and stay zero.

use num_complex::Complex64;
use rayon::prelude::*;

use super::cpml::{Cpml, CpmlParams};
use super::FdtdError;
use crate::constants::{EPS0, MU0};
use crate::scene::{Axis, AxisBoundary, MaterialGrid, Mesh};
use crate::Vec3;

/// One of the six field components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub fn name(self) -> &'static str {
        ["Ex", "Ey", "Ez", "Hx", "Hy", "Hz"][self as usize]
    }

    fn split(self) -> (bool, usize) {
        let c = self as usize;
        (c >= 3, c % 3)
    }
}

/// Mesh metrics in the form the update loops need.
#[derive(Clone, Debug)]
pub(crate) struct Geom {
    pub n: [usize; 3],
    pub s: [usize; 3],
    pub nodes: [Vec<f64>; 3],
    /// Primal cell widths, length `n`.
    pub d: [Vec<f64>; 3],
    /// Dual widths at nodes, length `n + 1`.
    pub h: [Vec<f64>; 3],
    pub inv_d: [Vec<f32>; 3],
    pub inv_h: [Vec<f32>; 3],
    pub periodic: [bool; 3],
}

impl Geom {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.dims();
        let s = [(n[1] + 1) * (n[2] + 1), n[2] + 1, 1];
        let nodes = mesh.axes.clone().map(|a| a.nodes);
        let periodic = mesh.axes.clone().map(|a| a.boundary == AxisBoundary::Periodic);
        let d: [Vec<f64>; 3] = std::array::from_fn(|a| nodes[a].windows(2).map(|w| w[1] - w[0]).collect());
        let h: [Vec<f64>; 3] = std::array::from_fn(|a| {
            let d = &d[a];
            let m = d.len();
            let (first, last) = if periodic[a] { (d[m - 1], d[0]) } else { (0.0, 0.0) };
            (0..=m)
                .map(|i| {
                    let lo = if i == 0 { first } else { d[i - 1] };
                    let hi = if i == m { last } else { d[i] };
                    0.5 * (lo + hi)
                })
                .collect()
        });
        let inv_d = std::array::from_fn(|a| d[a].iter().map(|v| (1.0 / v) as f32).collect());
        let inv_h = std::array::from_fn(|a| h[a].iter().map(|v| (1.0 / v) as f32).collect());
        Self { n, s, nodes, d, h, inv_d, inv_h, periodic }
    }

    pub fn len(&self) -> usize {
        (self.n[0] + 1) * (self.n[1] + 1) * (self.n[2] + 1)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i * self.s[0] + j * self.s[1] + k
    }

    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        [idx / self.s[0], (idx % self.s[0]) / self.s[1], idx % self.s[1]]
    }

    fn half(&self, a: usize, i: usize) -> f64 {
        0.5 * (self.nodes[a][i] + self.nodes[a][i + 1])
    }

    /// Physical position of a component sample.
    pub fn position(&self, c: Component, idx: usize) -> Vec3 {
        let (is_h, a) = c.split();
        let t = self.unindex(idx);
        std::array::from_fn(|b| {
            let staggered = (b == a) != is_h;
            if staggered {
                self.half(b, t[b])
            } else {
                self.nodes[b][t[b]]
            }
        })
    }

    /// Index range of updated E samples along axis `b` for component `a`.
    pub fn e_range(&self, a: usize, b: usize) -> std::ops::Range<usize> {
        if a == b || self.periodic[b] {
            0..self.n[b]
        } else {
            1..self.n[b]
        }
    }

    /// Index range of updated H samples along axis `b` for component `a`.
    pub fn h_range(&self, a: usize, b: usize) -> std::ops::Range<usize> {
        if a == b {
            0..self.n[b] + 1
        } else {
            0..self.n[b]
        }
    }
}

/// The six component arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Fields {
    pub e: [Vec<f32>; 3],
    pub h: [Vec<f32>; 3],
}

impl Fields {
    fn zeros(len: usize) -> Self {
        Self { e: std::array::from_fn(|_| vec![0.0; len]), h: std::array::from_fn(|_| vec![0.0; len]) }
    }

    pub fn get(&self, c: Component) -> &[f32] {
        let (is_h, a) = c.split();
        if is_h {
            &self.h[a]
        } else {
            &self.e[a]
        }
    }

    pub fn get_mut(&mut self, c: Component) -> &mut [f32] {
        let (is_h, a) = c.split();
        if is_h {
            &mut self.h[a]
        } else {
            &mut self.e[a]
        }
    }
}

/// A PEC edge whose scattered field is pinned to minus the incident field.
#[derive(Clone, Copy, Debug)]
struct PinnedEdge {
    index: usize,
    phasor: Complex64,
}

/// Incident-field source term on a dielectric edge.
#[derive(Clone, Copy, Debug)]
struct DielectricEdge {
    index: usize,
    /// `1 - 1/eps_r`.
    weight: f64,
    phasor: Complex64,
}

#[derive(Clone, Debug)]
struct Drive {
    omega: f64,
    ramp: f64,
}

impl Drive {
    fn envelope(&self, t: f64) -> f64 {
        if t >= self.ramp {
            1.0
        } else if t <= 0.0 {
            0.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * t / self.ramp).cos())
        }
    }

    /// `r(t) Re{p e^{iωt}}`.
    fn value(&self, p: Complex64, t: f64) -> f64 {
        let (s, c) = (self.omega * t).sin_cos();
        self.envelope(t) * (p.re * c - p.im * s)
    }
}

/// Scattered-field Yee time stepper.
pub struct Engine {
    pub(crate) geom: Geom,
    dt: f64,
    ch: f32,
    ce: [Vec<f32>; 3],
    fields: Fields,
    cpml: Option<Cpml>,
    pec: [Vec<PinnedEdge>; 3],
    dielectric: [Vec<DielectricEdge>; 3],
    drive: Option<Drive>,
    steps: u64,
}

impl Engine {
    /// Vacuum engine with PEC edges taken from `grid`. Permittivity is
    /// applied only when `dielectric` is set.
    pub fn new(grid: &MaterialGrid, dt: f64, cpml: Option<CpmlParams>, dielectric: bool) -> Result<Self, FdtdError> {
        let mut eng = Self::vacuum(&grid.mesh, dt, cpml)?;
        let axes = [Axis::X, Axis::Y, Axis::Z];
        for a in 0..3 {
            let flags = grid.pec_edges(axes[a]);
            eng.pec[a] = flags
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(index, _)| PinnedEdge { index, phasor: Complex64::new(0.0, 0.0) })
                .collect();
            if dielectric && grid.has_dielectric() {
                let eps = grid.edge_eps(axes[a]);
                let base = (dt / EPS0) as f32;
                for (idx, &e) in eps.iter().enumerate() {
                    if e != 1.0 && !flags[idx] {
                        eng.ce[a][idx] = base / e;
                        eng.dielectric[a].push(DielectricEdge {
                            index: idx,
                            weight: 1.0 - 1.0 / e as f64,
                            phasor: Complex64::new(0.0, 0.0),
                        });
                    }
                }
            }
        }
        Ok(eng)
    }

    /// Empty vacuum engine on `mesh`.
    pub fn vacuum(mesh: &Mesh, dt: f64, cpml: Option<CpmlParams>) -> Result<Self, FdtdError> {
        let cfl = super::check_cfl(mesh, dt);
        if !cfl.accepted {
            return Err(FdtdError::Unstable { dt, dt_max: cfl.dt_max });
        }
        let geom = Geom::new(mesh);
        let len = geom.len();
        let has_pml = mesh.axes.iter().any(|a| a.pml_layers() > 0);
        let cpml = if has_pml { Some(Cpml::new(mesh, &geom, dt, &cpml.unwrap_or_default())) } else { None };
        let ce = (dt / EPS0) as f32;
        Ok(Self {
            geom,
            dt,
            ch: (dt / MU0) as f32,
            ce: std::array::from_fn(|_| vec![ce; len]),
            fields: Fields::zeros(len),
            cpml,
            pec: Default::default(),
            dielectric: Default::default(),
            drive: None,
            steps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Time of the E field; H lags by half a step.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geom.n
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        self.geom.index(i, j, k)
    }

    pub fn position(&self, c: Component, idx: usize) -> Vec3 {
        self.geom.position(c, idx)
    }

    pub fn fields(&self) -> &Fields {
        &self.fields
    }

    pub fn fields_mut(&mut self) -> &mut Fields {
        &mut self.fields
    }

    /// Number of pinned (PEC) edges per E component.
    pub fn pec_edge_counts(&self) -> [usize; 3] {
        std::array::from_fn(|a| self.pec[a].len())
    }

    /// Indices of the pinned (PEC) edges of E component `a`.
    pub fn pec_edges(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.pec[a].iter().map(|p| p.index)
    }

    /// Drive the scattered field with a time-harmonic incident E field
    /// `Re{e(r) e^{iωt}}` switched on by a raised-cosine ramp of length `ramp`.
    pub fn set_incident(&mut self, omega: f64, ramp: f64, e: impl Fn(Vec3) -> [Complex64; 3]) {
        let comps = [Component::Ex, Component::Ey, Component::Ez];
        for a in 0..3 {
            for p in &mut self.pec[a] {
                p.phasor = e(self.geom.position(comps[a], p.index))[a];
            }
            for d in &mut self.dielectric[a] {
                d.phasor = e(self.geom.position(comps[a], d.index))[a];
            }
        }
        self.drive = Some(Drive { omega, ramp });
    }

    /// One leapfrog step: H to `t + dt/2`, then E to `t + dt`.
    pub fn step(&mut self) {
        let Fields { e, h } = &mut self.fields;
        update_h(&self.geom, self.ch, e, h);
        if let Some(cp) = &mut self.cpml {
            cp.correct_h(&self.geom, self.ch, e, h);
        }
        update_e(&self.geom, &self.ce, h, e);
        if let Some(cp) = &mut self.cpml {
            cp.correct_e(&self.geom, &self.ce, h, e);
        }
        let t_old = self.steps as f64 * self.dt;
        self.steps += 1;
        let t = self.steps as f64 * self.dt;
        if let Some(drive) = &self.drive {
            for a in 0..3 {
                for d in &self.dielectric[a] {
                    let de = drive.value(d.phasor, t) - drive.value(d.phasor, t_old);
                    e[a][d.index] -= (d.weight * de) as f32;
                }
            }
        }
        wrap_periodic(&self.geom, e);
        for a in 0..3 {
            let arr = &mut e[a];
            for p in &self.pec[a] {
                arr[p.index] = match &self.drive {
                    Some(drive) => -drive.value(p.phasor, t) as f32,
                    None => 0.0,
                };
            }
        }
    }

    /// Run `n` steps, checking for non-finite values every `check_every` steps.
    pub fn run(&mut self, n: u64, check_every: u64) -> Result<(), FdtdError> {
        for _ in 0..n {
            self.step();
            if check_every > 0 && self.steps % check_every == 0 {
                self.check_finite()?;
            }
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<(), FdtdError> {
        let comps = [Component::Ex, Component::Ey, Component::Ez, Component::Hx, Component::Hy, Component::Hz];
        for c in comps {
            if let Some(idx) = self.fields.get(c).iter().position(|v| !v.is_finite()) {
                return Err(FdtdError::NonFinite { step: self.steps, component: c.name(), cell: self.geom.unindex(idx) });
            }
        }
        Ok(())
    }

    /// Discrete electromagnetic energy `½Σε E² dV + ½Σµ H⁻·H⁺ dV` (joules),
    /// where `H⁻`, `H⁺` are the H fields half a step before and after the
    /// current E. This is the quantity the leapfrog scheme conserves in a
    /// lossless closed cavity.
    pub fn energy(&self) -> f64 {
        let g = &self.geom;
        let mut h_next = self.fields.h.clone();
        update_h(g, self.ch, &self.fields.e, &mut h_next);
        let mut total = 0.0;
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let owned = |ax: usize, r: std::ops::Range<usize>| {
                if g.periodic[ax] {
                    0..g.n[ax]
                } else {
                    r
                }
            };
            let mut sum_e = 0.0;
            let mut sum_h = 0.0;
            let ie = owned(a, 0..g.n[a]);
            for t0 in ie.clone() {
                for t1 in owned(b, 0..g.n[b] + 1) {
                    for t2 in owned(c, 0..g.n[c] + 1) {
                        let mut t = [0; 3];
                        t[a] = t0;
                        t[b] = t1;
                        t[c] = t2;
                        let idx = g.index(t[0], t[1], t[2]);
                        let v = g.d[a][t0] * g.h[b][t1] * g.h[c][t2];
                        let eps = self.dt / self.ce[a][idx] as f64;
                        let ev = self.fields.e[a][idx] as f64;
                        sum_e += 0.5 * eps * ev * ev * v;
                    }
                }
            }
            for t0 in owned(a, 0..g.n[a] + 1) {
                for t1 in 0..g.n[b] {
                    for t2 in 0..g.n[c] {
                        let mut t = [0; 3];
                        t[a] = t0;
                        t[b] = t1;
                        t[c] = t2;
                        let idx = g.index(t[0], t[1], t[2]);
                        let v = g.h[a][t0] * g.d[b][t1] * g.d[c][t2];
                        sum_h += 0.5 * MU0 * self.fields.h[a][idx] as f64 * h_next[a][idx] as f64 * v;
                    }
                }
            }
            total += sum_e + sum_h;
        }
        total
    }
}

fn update_h(g: &Geom, ch: f32, e: &[Vec<f32>; 3], h: &mut [Vec<f32>; 3]) {
    let [nx, ny, nz] = g.n;
    let [sx, sy, _] = g.s;
    let [ex, ey, ez] = e;
    let [hx, hy, hz] = h;
    let (idx_, idy, idz) = (&g.inv_d[0], &g.inv_d[1], &g.inv_d[2]);

    hx.par_chunks_mut(sx).enumerate().for_each(|(i, slab)| {
        let o = i * sx;
        for j in 0..ny {
            let r = o + j * sy;
            let row = &mut slab[j * sy..j * sy + nz];
            let (ez0, ez1) = (&ez[r..r + nz], &ez[r + sy..r + sy + nz]);
            let ey0 = &ey[r..r + nz + 1];
            let cy = idy[j];
            for k in 0..nz {
                row[k] -= ch * ((ez1[k] - ez0[k]) * cy - (ey0[k + 1] - ey0[k]) * idz[k]);
            }
        }
    });
    hy.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, slab)| {
        let o = i * sx;
        let cx = idx_[i];
        for j in 0..=ny {
            let r = o + j * sy;
            let row = &mut slab[j * sy..j * sy + nz];
            let ex0 = &ex[r..r + nz + 1];
            let (ez0, ez1) = (&ez[r..r + nz], &ez[r + sx..r + sx + nz]);
            for k in 0..nz {
                row[k] -= ch * ((ex0[k + 1] - ex0[k]) * idz[k] - (ez1[k] - ez0[k]) * cx);
            }
        }
    });
    hz.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, slab)| {
        let o = i * sx;
        let cx = idx_[i];
        for j in 0..ny {
            let r = o + j * sy;
            let row = &mut slab[j * sy..j * sy + nz + 1];
            let (ey0, ey1) = (&ey[r..r + nz + 1], &ey[r + sx..r + sx + nz + 1]);
            let (ex0, ex1) = (&ex[r..r + nz + 1], &ex[r + sy..r + sy + nz + 1]);
            let cy = idy[j];
            for k in 0..=nz {
                row[k] -= ch * ((ey1[k] - ey0[k]) * cx - (ex1[k] - ex0[k]) * cy);
            }
        }
    });
}

fn update_e(g: &Geom, ce: &[Vec<f32>; 3], h: &[Vec<f32>; 3], e: &mut [Vec<f32>; 3]) {
    let [nx, ny, nz] = g.n;
    let [sx, sy, _] = g.s;
    let [hx, hy, hz] = h;
    let [ex, ey, ez] = e;
    let (ihx, ihy, ihz) = (&g.inv_h[0], &g.inv_h[1], &g.inv_h[2]);
    let [px, _, pz] = g.periodic;
    let prev = |t: usize, n: usize| if t == 0 { n - 1 } else { t - 1 };

    ex.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, slab)| {
        let o = i * sx;
        for j in g.e_range(0, 1) {
            let r = o + j * sy;
            let rm = o + prev(j, ny) * sy;
            let row = &mut slab[j * sy..j * sy + nz + 1];
            let c = &ce[0][r..r + nz + 1];
            let (hz0, hzm) = (&hz[r..r + nz + 1], &hz[rm..rm + nz + 1]);
            let hy0 = &hy[r..r + nz + 1];
            let cy = ihy[j];
            for k in 1..nz {
                row[k] += c[k] * ((hz0[k] - hzm[k]) * cy - (hy0[k] - hy0[k - 1]) * ihz[k]);
            }
            if pz {
                row[0] += c[0] * ((hz0[0] - hzm[0]) * cy - (hy0[0] - hy0[nz - 1]) * ihz[0]);
            }
        }
    });
    ey.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, slab)| {
        if !px && i == 0 {
            return;
        }
        let o = i * sx;
        let om = prev(i, nx) * sx;
        let cx = ihx[i];
        for j in 0..ny {
            let r = o + j * sy;
            let row = &mut slab[j * sy..j * sy + nz + 1];
            let c = &ce[1][r..r + nz + 1];
            let hx0 = &hx[r..r + nz + 1];
            let (hz0, hzm) = (&hz[r..r + nz + 1], &hz[om + j * sy..om + j * sy + nz + 1]);
            for k in 1..nz {
                row[k] += c[k] * ((hx0[k] - hx0[k - 1]) * ihz[k] - (hz0[k] - hzm[k]) * cx);
            }
            if pz {
                row[0] += c[0] * ((hx0[0] - hx0[nz - 1]) * ihz[0] - (hz0[0] - hzm[0]) * cx);
            }
        }
    });
    ez.par_chunks_mut(sx).enumerate().take(nx).for_each(|(i, slab)| {
        if !px && i == 0 {
            return;
        }
        let o = i * sx;
        let om = prev(i, nx) * sx;
        let cx = ihx[i];
        for j in g.e_range(2, 1) {
            let r = o + j * sy;
            let rm = o + prev(j, ny) * sy;
            let row = &mut slab[j * sy..j * sy + nz];
            let c = &ce[2][r..r + nz];
            let (hy0, hym) = (&hy[r..r + nz], &hy[om + j * sy..om + j * sy + nz]);
            let (hx0, hxm) = (&hx[r..r + nz], &hx[rm..rm + nz]);
            let cy = ihy[j];
            for k in 0..nz {
                row[k] += c[k] * ((hy0[k] - hym[k]) * cx - (hx0[k] - hxm[k]) * cy);
            }
        }
    });
}

/// Copy the first node plane onto the last along periodic axes.
fn wrap_periodic(g: &Geom, e: &mut [Vec<f32>; 3]) {
    for (a, arr) in e.iter_mut().enumerate() {
        for b in 0..3 {
            if b == a || !g.periodic[b] {
                continue;
            }
            let (p, q) = ((b + 1) % 3, (b + 2) % 3);
            for u in 0..=g.n[p] {
                for v in 0..=g.n[q] {
                    let off = u * g.s[p] + v * g.s[q];
                    arr[off + g.n[b] * g.s[b]] = arr[off];
                }
            }
        }
    }
}
