//! Non-advective dynamics: pressure gradient, Coriolis, and buoyancy.
//!
//! Both Euler half steps work on the solver variables
//! `(U, V, W, Θ̃) = (Θρu, Θρv, Θρw, −ΘΘ̄ Pχ′)`, in which the linearized
//! forcing reads
//!
//! ```text
//! U_t = −c_p PΘ ∂π′/∂x + f V
//! V_t = −f (U − P u_g)
//! α_w W_t = −c_p PΘ ∂π′/∂z + g Θ̃/Θ̄
//! Θ̃_t = −W dΘ̄/dz
//! α_P (∂P/∂π) π′_t = −∇·(U, W)
//! ```
//!
//! with `u_g` a constant geostrophic background wind. The implicit step
//! eliminates the velocities and leaves one nodal Helmholtz problem for
//! `π′`.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::grid::{
    apply_bc_cell, cell_to_node, node_divergence, node_weights, BcClass, CellField, GridSpec,
    NodeField,
};
use crate::linsolve::{bicgstab_with_floor, LineBlocks, LinearOperator, SolveStats, SolverConfig};
use crate::state::{from_solver_vars, to_solver_vars, Background, ModelSwitches, SimState, SolverVars};
use crate::thermo::GasConstants;

/// Residual norms below this multiple of the magnitude of the terms that
/// make up the right-hand side are rounding noise.
const ROUNDOFF: f64 = 1e3 * f64::EPSILON;

pub use crate::advection::old_time_fluxes as make_advective_fluxes;

/// Cell-centered gradient of a nodal field: each component is the
/// difference of the two face averages. Ghosts are filled (`gx` even, `gz`
/// odd across the walls).
pub fn cell_gradient(grid: &GridSpec, pi: &NodeField) -> (CellField, CellField) {
    let mut gx = CellField::new(grid);
    let mut gz = CellField::new(grid);
    cell_gradient_into(grid, pi, &mut gx, &mut gz);
    (gx, gz)
}

fn cell_gradient_into(grid: &GridSpec, pi: &NodeField, gx: &mut CellField, gz: &mut CellField) {
    let (hx, hz) = (0.5 / grid.dx(), 0.5 / grid.dz());
    for k in 0..grid.nz as isize {
        for i in 0..grid.nx as isize {
            let (sw, se, nw, ne) = (pi.at(i, k), pi.at(i + 1, k), pi.at(i, k + 1), pi.at(i + 1, k + 1));
            gx.set(i, k, hx * (se + ne - sw - nw));
            gz.set(i, k, hz * (nw + ne - sw - se));
        }
    }
    apply_bc_cell(gx, BcClass::XMomentum);
    apply_bc_cell(gz, BcClass::ZMomentum);
}

/// The operator `L π = diag·π − ∇_n·(hx ∂π/∂x, hz ∂π/∂z)` on the packed
/// nodal unknowns.
pub struct HelmholtzSystem {
    grid: GridSpec,
    pub hx: CellField,
    pub hz: CellField,
    pub diag: NodeField,
    /// Interior copies of `hx`, `hz` (`k * I + i`) and of `diag` in the
    /// packed node order.
    hx_c: Vec<f64>,
    hz_c: Vec<f64>,
    diag_c: Vec<f64>,
    weights: Vec<f64>,
    null: Vec<Vec<f64>>,
    /// Cell fluxes `hx ∂π/∂x`, `hz ∂π/∂z` of the last application.
    flux: RefCell<(Vec<f64>, Vec<f64>)>,
}

impl HelmholtzSystem {
    pub fn new(grid: &GridSpec, hx: CellField, hz: CellField, diag: NodeField) -> Self {
        let weights = node_weights(grid);
        let singular = diag.interior().all(|(i, k)| diag.at(i, k) == 0.0);
        let mut null = Vec::new();
        if singular {
            null.push(vec![1.0; grid.node_dofs()]);
            if grid.nx % 2 == 0 {
                let ni = grid.nx;
                null.push(
                    (0..grid.node_dofs())
                        .map(|n| if (n % ni + n / ni) % 2 == 0 { 1.0 } else { -1.0 })
                        .collect(),
                );
            }
        }
        let cells = grid.nx * grid.nz;
        let mut diag_c = vec![0.0; grid.node_dofs()];
        diag.pack(&mut diag_c);
        Self {
            grid: *grid,
            hx_c: hx.interior_values(),
            hz_c: hz.interior_values(),
            diag_c,
            hx,
            hz,
            diag,
            weights,
            null,
            flux: RefCell::new((vec![0.0; cells], vec![0.0; cells])),
        }
    }

    /// Apply to a node field (the alias column of `pi` must be consistent).
    pub fn apply_field(&self, pi: &NodeField) -> NodeField {
        let mut x = vec![0.0; self.grid.node_dofs()];
        pi.pack(&mut x);
        let mut y = vec![0.0; x.len()];
        self.apply(&x, &mut y);
        let mut out = NodeField::new(&self.grid);
        out.unpack(&y);
        out
    }

    pub fn is_singular(&self) -> bool {
        !self.null.is_empty()
    }
}

impl LinearOperator for HelmholtzSystem {
    fn dim(&self) -> usize {
        self.grid.node_dofs()
    }

    /// Works on the packed layout directly: cell gradients from the four
    /// corners, then the dual-cell divergence, with the wall rows using
    /// the mirrored ghost cells (`F` even, `G` odd).
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (ni, nk) = (self.grid.nx, self.grid.nz);
        let (ax, az) = (0.5 / self.grid.dx(), 0.5 / self.grid.dz());
        let mut guard = self.flux.borrow_mut();
        let (fx, fz) = &mut *guard;
        for k in 0..nk {
            let (lo, hi) = (&x[k * ni..(k + 1) * ni], &x[(k + 1) * ni..(k + 2) * ni]);
            let row = k * ni..(k + 1) * ni;
            let (hx, hz) = (&self.hx_c[row.clone()], &self.hz_c[row.clone()]);
            let (fxr, fzr) = (&mut fx[row.clone()], &mut fz[row]);
            for i in 0..ni {
                let e = if i + 1 == ni { 0 } else { i + 1 };
                let (sw, se, nw, ne) = (lo[i], lo[e], hi[i], hi[e]);
                fxr[i] = hx[i] * ax * (se + ne - sw - nw);
                fzr[i] = hz[i] * az * (nw + ne - sw - se);
            }
        }
        for k in 0..=nk {
            for i in 0..ni {
                let w = if i == 0 { ni - 1 } else { i - 1 };
                let div = if k == 0 {
                    2.0 * ax * (fx[i] - fx[w]) + 2.0 * az * (fz[w] + fz[i])
                } else if k == nk {
                    let b = (k - 1) * ni;
                    2.0 * ax * (fx[b + i] - fx[b + w]) - 2.0 * az * (fz[b + w] + fz[b + i])
                } else {
                    let (b, c) = ((k - 1) * ni, k * ni);
                    ax * (fx[b + i] + fx[c + i] - fx[b + w] - fx[c + w])
                        + az * (fz[c + w] + fz[c + i] - fz[b + w] - fz[b + i])
                };
                let n = k * ni + i;
                y[n] = self.diag_c[n] * x[n] - div;
            }
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let g = &self.grid;
        let (ni, nk) = (g.nx, g.nz);
        let (cx, cz) = (0.25 / (g.dx() * g.dx()), 0.25 / (g.dz() * g.dz()));
        let mut d = self.diag_c.clone();
        for k in 0..=nk {
            let m = if k == 0 || k == nk { 2.0 } else { 1.0 };
            for i in 0..ni {
                let w = if i == 0 { ni - 1 } else { i - 1 };
                let mut s = 0.0;
                for kc in k.saturating_sub(1)..(k + 1).min(nk) {
                    for ic in [w, i] {
                        s += self.hx_c[kc * ni + ic] * cx + self.hz_c[kc * ni + ic] * cz;
                    }
                }
                d[k * ni + i] += m * s;
            }
        }
        Some(d)
    }

    /// Vertical node columns. Neighbours in a column couple through the two
    /// cells between them; wall rows carry the same factor two as the
    /// diagonal.
    fn line_blocks(&self) -> Option<LineBlocks> {
        let g = &self.grid;
        let (ni, nk) = (g.nx, g.nz);
        let (cx, cz) = (0.25 / (g.dx() * g.dx()), 0.25 / (g.dz() * g.dz()));
        let n = g.node_dofs();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for k in 0..nk {
            let below = if k == 0 { 2.0 } else { 1.0 };
            let above = if k + 1 == nk { 2.0 } else { 1.0 };
            for i in 0..ni {
                let w = if i == 0 { ni - 1 } else { i - 1 };
                let s: f64 = [w, i]
                    .iter()
                    .map(|&ic| self.hx_c[k * ni + ic] * cx - self.hz_c[k * ni + ic] * cz)
                    .sum();
                upper[k * ni + i] = below * s;
                lower[(k + 1) * ni + i] = above * s;
            }
        }
        Some(LineBlocks {
            starts: (0..ni).collect(),
            stride: ni,
            len: nk + 1,
            lower,
            diag: self.diagonal()?,
            upper,
        })
    }

    fn null_space(&self) -> Option<(&[f64], &[Vec<f64>])> {
        if self.null.is_empty() {
            None
        } else {
            Some((&self.weights, &self.null))
        }
    }
}

/// Outcome of one implicit half step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImplicitStats {
    pub solve: SolveStats,
    /// `‖R‖₂ / dt`: the nodal divergence left by the solve satisfies
    /// `‖∇·(U, W)‖∞ ≤ tol · κ` when `α_P = 0`.
    pub kappa: f64,
}

/// Everything the forcing needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct Forcing<'a> {
    pub grid: &'a GridSpec,
    pub bg: &'a Background,
    pub c: &'a GasConstants,
    pub switches: ModelSwitches,
    /// Geostrophic background wind entering the Coriolis term.
    pub u_geo: f64,
}

impl<'a> Forcing<'a> {
    /// `c_p PΘ = c_p P²/ρ` on cells.
    fn cp_ptheta(&self, s: &SimState) -> CellField {
        CellField::from_fn(self.grid, |i, k| self.c.cp * s.p.at(i, k) * s.theta(i, k))
    }

    /// `(∂P/∂π)` averaged to nodes.
    pub fn dp_dpi_nodes(&self, s: &SimState) -> NodeField {
        let mut d = CellField::from_fn(self.grid, |i, k| self.c.dp_dpi_from_big_p(s.p.at(i, k)));
        apply_bc_cell(&mut d, BcClass::Scalar);
        cell_to_node(&d)
    }

    /// Forward Euler over `dt` with every coefficient and force taken from
    /// `s`. `ρ` and `P` do not change; `π′` advances only when `α_P > 0`.
    pub fn explicit(&self, s: &mut SimState, dt: f64) {
        let (grid, bg) = (self.grid, self.bg);
        let (ap, aw) = (self.switches.alpha_p, self.switches.alpha_w);
        let f = self.c.f;
        let g = self.c.g;
        s.pi_prime.apply_bc();
        let (gx, gz) = cell_gradient(grid, &s.pi_prime);
        let cpt = self.cp_ptheta(s);
        let mut v = to_solver_vars(s, bg);

        if ap > 0.0 {
            let div = node_divergence(grid, &v.u, &v.w);
            let d = self.dp_dpi_nodes(s);
            for (i, k) in s.pi_prime.interior().collect::<Vec<_>>() {
                *s.pi_prime.at_mut(i, k) -= dt * div.at(i, k) / (ap * d.at(i, k));
            }
            s.pi_prime.apply_bc();
        }

        for (i, k) in cpt.interior() {
            let kk = k as usize;
            let (u, vv, w, tt) = (v.u.at(i, k), v.v.at(i, k), v.w.at(i, k), v.theta_tilde.at(i, k));
            let c = cpt.at(i, k);
            v.u.set(i, k, u + dt * (-c * gx.at(i, k) + f * vv));
            v.v.set(i, k, vv - dt * f * (u - s.p.at(i, k) * self.u_geo));
            if aw > 0.0 {
                v.w.set(i, k, w + dt * (-c * gz.at(i, k) + g * tt / bg.theta_cell[kk]) / aw);
            }
            v.theta_tilde.set(i, k, tt - dt * bg.dtheta_dz_cell[kk] * w);
        }
        from_solver_vars(&v, s, bg);
    }

    /// Coefficients of the Helmholtz problem for an implicit step of `dt`,
    /// frozen at `s`.
    pub fn system(&self, s: &SimState, dt: f64) -> Result<HelmholtzSystem> {
        let (grid, bg) = (self.grid, self.bg);
        let aw = self.switches.alpha_w;
        let rot = 1.0 + (dt * self.c.f).powi(2);
        let cpt = self.cp_ptheta(s);
        let mut hx = CellField::new(grid);
        let mut hz = CellField::new(grid);
        for (i, k) in cpt.interior() {
            let vert = aw + dt * dt * bg.n2_cell[k as usize];
            if !(vert > 0.0) {
                return Err(Error::Config(format!(
                    "vertical coefficient alpha_w + (dt N)^2 = {vert} at level {k}; hydrostatic mode needs stable stratification"
                )));
            }
            hx.set(i, k, dt * dt * cpt.at(i, k) / rot);
            hz.set(i, k, dt * dt * cpt.at(i, k) / vert);
        }
        apply_bc_cell(&mut hx, BcClass::Scalar);
        apply_bc_cell(&mut hz, BcClass::Scalar);
        let mut diag = self.dp_dpi_nodes(s);
        let ap = self.switches.alpha_p;
        diag.as_mut_slice().iter_mut().for_each(|d| *d *= ap);
        Ok(HelmholtzSystem::new(grid, hx, hz, diag))
    }

    /// The velocities the implicit step would produce with zero pressure
    /// gradient.
    fn modified_fluxes(&self, s: &SimState, v: &SolverVars, dt: f64) -> (CellField, CellField, CellField) {
        let (bg, f, g, aw) = (self.bg, self.c.f, self.c.g, self.switches.alpha_w);
        let rot = 1.0 + (dt * f).powi(2);
        let mut vs = v.v.clone();
        let mut fx = v.u.clone();
        let mut fz = v.w.clone();
        for (i, k) in s.rho.interior() {
            let kk = k as usize;
            let vstar = v.v.at(i, k) + dt * f * s.p.at(i, k) * self.u_geo;
            vs.set(i, k, vstar);
            fx.set(i, k, (v.u.at(i, k) + dt * f * vstar) / rot);
            let vert = aw + dt * dt * bg.n2_cell[kk];
            fz.set(i, k, (aw * v.w.at(i, k) + dt * g * v.theta_tilde.at(i, k) / bg.theta_cell[kk]) / vert);
        }
        apply_bc_cell(&mut fx, BcClass::XMomentum);
        apply_bc_cell(&mut fz, BcClass::ZMomentum);
        (vs, fx, fz)
    }

    /// Right-hand side `R = diag·π′ − dt ∇_n·(Fx, Fz)`.
    pub fn rhs(&self, s: &SimState, sys: &HelmholtzSystem, dt: f64) -> NodeField {
        let v = to_solver_vars(s, self.bg);
        let (_, fx, fz) = self.modified_fluxes(s, &v, dt);
        self.rhs_from_fluxes(s, sys, &fx, &fz, dt)
    }

    fn rhs_from_fluxes(&self, s: &SimState, sys: &HelmholtzSystem, fx: &CellField, fz: &CellField, dt: f64) -> NodeField {
        let mut r = node_divergence(self.grid, fx, fz);
        for (i, k) in r.interior().collect::<Vec<_>>() {
            let v = sys.diag.at(i, k) * s.pi_prime.at(i, k) - dt * r.at(i, k);
            r.set(i, k, v);
        }
        r.apply_periodic_alias();
        r
    }

    /// Backward Euler over `dt` with coefficients frozen at the incoming
    /// state; stores the solved `π′`.
    pub fn implicit(&self, s: &mut SimState, dt: f64, cfg: &SolverConfig) -> Result<ImplicitStats> {
        let (grid, bg) = (self.grid, self.bg);
        let (f, aw) = (self.c.f, self.switches.alpha_w);
        let rot = 1.0 + (dt * f).powi(2);
        s.pi_prime.apply_bc();
        let sys = self.system(s, dt)?;
        let v = to_solver_vars(s, bg);
        let (vstar, fx, fz) = self.modified_fluxes(s, &v, dt);
        let r = self.rhs_from_fluxes(s, &sys, &fx, &fz, dt);

        let n = grid.node_dofs();
        let mut b = vec![0.0; n];
        r.pack(&mut b);
        let mut x = vec![0.0; n];
        s.pi_prime.pack(&mut x);
        let terms = {
            let (dx, dz) = (grid.dx(), grid.dz());
            let flux = fx.max_abs_interior() / dx + fz.max_abs_interior() / dz;
            let held = sys.diag.max_abs_interior() * s.pi_prime.max_abs_interior();
            (dt * flux + held) * (n as f64).sqrt()
        };
        let solve = bicgstab_with_floor(&sys, &b, &mut x, cfg, ROUNDOFF * terms)?;
        let kappa = b.iter().map(|v| v * v).sum::<f64>().sqrt() / dt;
        s.pi_prime.unpack(&x);
        s.pi_prime.apply_bc();

        let (gx, gz) = cell_gradient(grid, &s.pi_prime);
        let cpt = self.cp_ptheta(s);
        let mut out = v.clone();
        for (i, k) in s.rho.interior() {
            let kk = k as usize;
            let c = cpt.at(i, k);
            let vert = aw + dt * dt * bg.n2_cell[kk];
            let u = v.u.at(i, k);
            out.u.set(i, k, fx.at(i, k) - dt * c * gx.at(i, k) / rot);
            out.v.set(i, k, (vstar.at(i, k) - dt * f * u + dt * dt * f * c * gx.at(i, k)) / rot);
            let w = fz.at(i, k) - dt * c * gz.at(i, k) / vert;
            out.w.set(i, k, w);
            out.theta_tilde.set(i, k, v.theta_tilde.at(i, k) - dt * bg.dtheta_dz_cell[kk] * w);
        }
        from_solver_vars(&out, s, bg);
        Ok(ImplicitStats { solve, kappa })
    }
}

/// Largest nodal divergence of `(Θρu, Θρw)`.
pub fn max_nodal_divergence(grid: &GridSpec, s: &SimState) -> f64 {
    let mut u = CellField::from_fn(grid, |i, k| s.theta(i, k) * s.rhou.at(i, k));
    let mut w = CellField::from_fn(grid, |i, k| s.theta(i, k) * s.rhow.at(i, k));
    apply_bc_cell(&mut u, BcClass::XMomentum);
    apply_bc_cell(&mut w, BcClass::ZMomentum);
    node_divergence(grid, &u, &w).max_abs_interior()
}
