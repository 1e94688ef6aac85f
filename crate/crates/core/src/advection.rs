//! Directionally split MUSCL transport of the specific variables
//! `Ψ = (ρ, ρu, ρv, ρw, Pχ′) / P` by frozen face fluxes of `P v`.
//!
//! Each sweep updates the conserved products `PΨ` and the carrier `P`
//! itself in flux form, so uniform `Ψ` stays uniform and the interior sums
//! only change through boundary fluxes (none here: x is periodic and the
//! wall fluxes vanish).

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{faces_from_cells, FaceFluxes, GridSpec};
use crate::state::SimState;

/// Slope limiter for the piecewise-linear reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LimiterKind {
    Minmod,
    #[serde(rename = "vanleer")]
    VanLeer,
    /// Monotonized central.
    #[default]
    Mc,
    /// Unlimited centered slope (Fromm).
    None,
}

impl LimiterKind {
    /// Limited slope from the backward and forward differences.
    #[inline]
    pub fn slope(self, a: f64, b: f64) -> f64 {
        if let LimiterKind::None = self {
            return 0.5 * (a + b);
        }
        if a * b <= 0.0 {
            return 0.0;
        }
        match self {
            LimiterKind::Minmod => a.signum() * a.abs().min(b.abs()),
            LimiterKind::VanLeer => 2.0 * a * b / (a + b),
            LimiterKind::Mc => a.signum() * (2.0 * a.abs()).min(2.0 * b.abs()).min(0.5 * (a + b).abs()),
            LimiterKind::None => unreachable!(),
        }
    }
}

impl std::str::FromStr for LimiterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmod" => Ok(Self::Minmod),
            "vanleer" => Ok(Self::VanLeer),
            "mc" => Ok(Self::Mc),
            "none" => Ok(Self::None),
            _ => Err(Error::Config(format!("unknown limiter '{s}' (minmod, vanleer, mc, none)"))),
        }
    }
}

/// What to do when a face Courant number exceeds one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CflPolicy {
    #[default]
    Abort,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdvectOpts {
    pub limiter: LimiterKind,
    pub cfl_policy: CflPolicy,
}

const NUM_ADVECTED: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    X,
    Z,
}

/// Work arrays on the padded cell layout, shared by consecutive sweeps.
/// Face arrays are indexed by the cell above (or right of) the face.
struct Scratch {
    face: Vec<f64>,
    courant: Vec<f64>,
    inv_p: Vec<f64>,
    psi: Vec<f64>,
    slope: Vec<f64>,
    g: Vec<f64>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        Self {
            face: vec![0.0; len],
            courant: vec![0.0; len],
            inv_p: vec![0.0; len],
            psi: vec![0.0; len],
            slope: vec![0.0; len],
            g: vec![0.0; len],
        }
    }
}

fn advected_mut(s: &mut SimState) -> [&mut crate::grid::CellField; NUM_ADVECTED] {
    [&mut s.rho, &mut s.rhou, &mut s.rhov, &mut s.rhow, &mut s.pchi]
}

fn report(courant: f64, dir: char, i: usize, k: usize, policy: CflPolicy) -> Result<()> {
    match policy {
        CflPolicy::Abort => Err(Error::CflViolation {
            courant,
            direction: dir,
            i,
            k,
        }),
        CflPolicy::Warn => {
            warn!("advective Courant number {courant:.4} > 1 in the {dir}-sweep at ({i}, {k})");
            Ok(())
        }
    }
}

/// Limited slopes of `psi` at every index with two neighbours `off` away.
fn fill_slopes(psi: &[f64], slope: &mut [f64], off: usize, lim: impl Fn(f64, f64) -> f64) {
    let len = psi.len();
    let (a, b, c) = (&psi[..len - 2 * off], &psi[off..len - off], &psi[2 * off..]);
    for (((s, a), b), c) in slope[off..len - off].iter_mut().zip(a).zip(b).zip(c) {
        *s = lim(b - a, c - b);
    }
}

/// Sweep over flat index spans of the padded layout. Rows are contiguous,
/// so the spans also cover ghost columns; those entries are finite and
/// overwritten by the next boundary refresh.
fn sweep(s: &mut SimState, grid: &GridSpec, f: &FaceFluxes, dt: f64, opts: &AdvectOpts, dir: Dir, w: &mut Scratch) -> Result<()> {
    s.apply_bc_cells();
    let (nx, nz, ng) = (grid.nx, grid.nz, grid.ng);
    let stride = s.p.stride();
    let at = |i: usize, k: usize| (k + ng) * stride + i + ng;
    let (off, lam) = match dir {
        Dir::X => (1, dt / grid.dx()),
        Dir::Z => (stride, dt / grid.dz()),
    };
    // Faces are stored at the cell above or right of them.
    let faces = match dir {
        Dir::X => at(0, 0)..at(nx, nz - 1) + 1,
        Dir::Z => at(0, 0)..at(nx - 1, nz) + 1,
    };
    let cells = at(0, 0)..at(nx - 1, nz - 1) + 1;
    w.face.iter_mut().for_each(|v| *v = 0.0);
    match dir {
        Dir::X => {
            for k in 0..nz {
                for j in 0..=nx {
                    w.face[at(j, k)] = f.fx(j, k);
                }
            }
        }
        Dir::Z => {
            for j in 0..=nz {
                for i in 0..nx {
                    w.face[at(i, j)] = f.fz(i, j);
                }
            }
        }
    }

    let p = s.p.as_slice();
    let mut worst: Option<(f64, usize)> = None;
    for n in faces.clone() {
        let c = lam * w.face[n] / (0.5 * (p[n - off] + p[n]));
        w.courant[n] = c;
        if c.abs() > 1.0 + 1e-12 && worst.map_or(true, |(m, _)| c.abs() > m) {
            worst = Some((c.abs(), n));
        }
    }
    if let Some((c, n)) = worst {
        let (i, k) = (n % stride - ng, n / stride - ng);
        report(c, if dir == Dir::X { 'x' } else { 'z' }, i, k, opts.cfl_policy)?;
    }
    w.inv_p.iter_mut().zip(p).for_each(|(ip, p)| *ip = 1.0 / p);

    for field in advected_mut(s) {
        let q = field.as_mut_slice();
        w.psi.iter_mut().zip(q.iter()).zip(&w.inv_p).for_each(|((s, q), ip)| *s = q * ip);
        match opts.limiter {
            LimiterKind::Minmod => fill_slopes(&w.psi, &mut w.slope, off, |a, b| LimiterKind::Minmod.slope(a, b)),
            LimiterKind::VanLeer => fill_slopes(&w.psi, &mut w.slope, off, |a, b| LimiterKind::VanLeer.slope(a, b)),
            LimiterKind::Mc => fill_slopes(&w.psi, &mut w.slope, off, |a, b| LimiterKind::Mc.slope(a, b)),
            LimiterKind::None => fill_slopes(&w.psi, &mut w.slope, off, |a, b| LimiterKind::None.slope(a, b)),
        }
        let (lo, hi) = (faces.start, faces.end);
        let left = w.psi[lo - off..hi - off].iter().zip(&w.slope[lo - off..hi - off]);
        let right = w.psi[lo..hi].iter().zip(&w.slope[lo..hi]);
        for ((((g, &fl), &c), (&pl, &sl)), (&pr, &sr)) in
            w.g[lo..hi].iter_mut().zip(&w.face[lo..hi]).zip(&w.courant[lo..hi]).zip(left).zip(right)
        {
            let psi_face = if fl >= 0.0 {
                pl + 0.5 * (1.0 - c) * sl
            } else {
                pr - 0.5 * (1.0 + c) * sr
            };
            *g = fl * psi_face;
        }
        let (lo, hi) = (cells.start, cells.end);
        for ((q, gl), gh) in q[lo..hi].iter_mut().zip(&w.g[lo..hi]).zip(&w.g[lo + off..hi + off]) {
            *q -= lam * (gh - gl);
        }
    }
    let p = s.p.as_mut_slice();
    let (lo, hi) = (cells.start, cells.end);
    for ((p, fl), fh) in p[lo..hi].iter_mut().zip(&w.face[lo..hi]).zip(&w.face[lo + off..hi + off]) {
        *p -= lam * (fh - fl);
    }
    Ok(())
}

/// One x-sweep over `dt`. Cell ghosts are refreshed first.
pub fn sweep_x(s: &mut SimState, grid: &GridSpec, f: &FaceFluxes, dt: f64, opts: &AdvectOpts) -> Result<()> {
    let mut w = Scratch::new(s.p.as_slice().len());
    sweep(s, grid, f, dt, opts, Dir::X, &mut w)
}

/// One z-sweep over `dt`; the wall fluxes must be zero.
pub fn sweep_z(s: &mut SimState, grid: &GridSpec, f: &FaceFluxes, dt: f64, opts: &AdvectOpts) -> Result<()> {
    let mut w = Scratch::new(s.p.as_slice().len());
    sweep(s, grid, f, dt, opts, Dir::Z, &mut w)
}

/// Second-order Strang splitting `X(dt/2) Z(dt/2) Z(dt/2) X(dt/2)` with the
/// fluxes held fixed.
pub fn advect_strang(s: &mut SimState, grid: &GridSpec, f: &FaceFluxes, dt: f64, opts: &AdvectOpts) -> Result<()> {
    let h = 0.5 * dt;
    let mut w = Scratch::new(s.p.as_slice().len());
    sweep(s, grid, f, h, opts, Dir::X, &mut w)?;
    sweep(s, grid, f, h, opts, Dir::Z, &mut w)?;
    sweep(s, grid, f, h, opts, Dir::Z, &mut w)?;
    sweep(s, grid, f, h, opts, Dir::X, &mut w)?;
    s.apply_bc_cells();
    Ok(())
}

/// Advection driven by fluxes built from the state's own momenta
/// `(Θρu, Θρw)`, for the half-step predictor.
pub fn advect_first_order(s: &mut SimState, grid: &GridSpec, dt: f64, opts: &AdvectOpts) -> Result<()> {
    let f = old_time_fluxes(s);
    advect_strang(s, grid, &f, dt, opts)
}

/// Face fluxes of `P v = (Θρu, Θρw)` from the current state.
pub fn old_time_fluxes(s: &SimState) -> FaceFluxes {
    let mut pu = s.rhou.clone();
    let mut pw = s.rhow.clone();
    for (i, k) in s.rho.interior() {
        let th = s.theta(i, k);
        *pu.at_mut(i, k) *= th;
        *pw.at_mut(i, k) *= th;
    }
    crate::grid::apply_bc_cell(&mut pu, crate::grid::BcClass::XMomentum);
    crate::grid::apply_bc_cell(&mut pw, crate::grid::BcClass::ZMomentum);
    faces_from_cells(&pu, &pw)
}
