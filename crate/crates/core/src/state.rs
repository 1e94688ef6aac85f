//! Prognostic state, hydrostatic background, and the change of variables
//! used by the forcing steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_bc_cell, BcClass, CellField, GridSpec, NodeField};
use crate::thermo::GasConstants;

/// Blending parameters selecting the model equations.
///
/// `(1, 1)` is fully compressible, `α_P = 0` pseudo-incompressible,
/// `α_w = 0` hydrostatic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSwitches {
    pub alpha_p: f64,
    pub alpha_w: f64,
}

impl ModelSwitches {
    pub const COMPRESSIBLE: Self = Self { alpha_p: 1.0, alpha_w: 1.0 };
    pub const PSEUDO_INCOMPRESSIBLE: Self = Self { alpha_p: 0.0, alpha_w: 1.0 };
    pub const HYDROSTATIC: Self = Self { alpha_p: 1.0, alpha_w: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| (0.0..=1.0).contains(&a);
        if ok(self.alpha_p) && ok(self.alpha_w) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "switches must lie in [0, 1], got alpha_P = {}, alpha_w = {}",
                self.alpha_p, self.alpha_w
            )))
        }
    }
}

impl Default for ModelSwitches {
    fn default() -> Self {
        Self::COMPRESSIBLE
    }
}

/// Hydrostatically balanced, horizontally uniform background. Cell arrays
/// have length `K`, node arrays `K + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub theta_cell: Vec<f64>,
    pub chi_cell: Vec<f64>,
    pub pi_cell: Vec<f64>,
    /// `P̄ = ρ̄Θ̄` at cell centers.
    pub p_cell: Vec<f64>,
    pub dtheta_dz_cell: Vec<f64>,
    pub n2_cell: Vec<f64>,
    pub pi_node: Vec<f64>,
    pub theta_node: Vec<f64>,
}

/// Integrate the hydrostatic Exner profile for the potential temperature
/// profile `theta(z)`.
///
/// `π̄ = 1` at `z_min`; cell values are linked by
/// `π̄_{k+1} − π̄_k = −(g/c_p) Δz / Θ̄(z_{k+1/2})`, so the discrete balance is
/// exact. Half intervals (wall to first cell, cell to node) use the midpoint
/// of the half interval.
pub fn build_background(theta: &dyn Fn(f64) -> f64, grid: &GridSpec, c: &GasConstants) -> Result<Background> {
    let nz = grid.nz;
    let dz = grid.dz();
    let gc = c.g / c.cp;
    let zc = |k: usize| grid.z_cell(k as isize);
    let zn = |k: usize| grid.z_node(k as isize);

    for k in 0..=2 * nz {
        let z = grid.z_min + 0.5 * k as f64 * dz;
        let t = theta(z);
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Config(format!("background theta must be positive, got {t} at z = {z}")));
        }
    }

    let mut pi_cell = vec![0.0; nz];
    pi_cell[0] = 1.0 - gc * 0.5 * dz / theta(grid.z_min + 0.25 * dz);
    for k in 0..nz - 1 {
        pi_cell[k + 1] = pi_cell[k] - gc * dz / theta(zn(k + 1));
    }
    let mut pi_node = vec![0.0; nz + 1];
    pi_node[0] = 1.0;
    for k in 1..nz {
        pi_node[k] = pi_cell[k] + gc * 0.5 * dz / theta(zn(k) + 0.25 * dz);
    }
    pi_node[nz] = pi_cell[nz - 1] - gc * 0.5 * dz / theta(zc(nz - 1) + 0.25 * dz);

    if let Some(bad) = pi_cell.iter().chain(pi_node.iter()).find(|&&p| !(p > 0.0)) {
        return Err(Error::Config(format!(
            "background Exner pressure {bad} is not positive; the atmosphere is too deep"
        )));
    }

    let theta_cell: Vec<f64> = (0..nz).map(|k| theta(zc(k))).collect();
    let chi_cell = theta_cell.iter().map(|t| 1.0 / t).collect();
    // N² = g d(ln Θ̄)/dz, differenced across the cell; exact for constant N
    let n2_cell: Vec<f64> = (0..nz)
        .map(|k| c.g * (theta(zc(k) + 0.5 * dz) / theta(zc(k) - 0.5 * dz)).ln() / dz)
        .collect();
    let dtheta_dz_cell = (0..nz).map(|k| theta_cell[k] * n2_cell[k] / c.g).collect();
    let p_cell = pi_cell.iter().map(|&p| c.big_p_from_pi(p)).collect::<Result<Vec<_>>>()?;
    let theta_node = (0..=nz).map(|k| theta(zn(k))).collect();

    Ok(Background {
        theta_cell,
        chi_cell,
        pi_cell,
        p_cell,
        dtheta_dz_cell,
        n2_cell,
        pi_node,
        theta_node,
    })
}

impl Background {
    /// `max_k |Δπ̄/Δz + (g/c_p) χ̄(z_{k+1/2})| · c_p/g` between cell centers.
    pub fn hydrostatic_residual(&self, theta: &dyn Fn(f64) -> f64, grid: &GridSpec, c: &GasConstants) -> f64 {
        let dz = grid.dz();
        (0..grid.nz - 1)
            .map(|k| {
                let chi = 1.0 / theta(grid.z_node(k as isize + 1));
                ((self.pi_cell[k + 1] - self.pi_cell[k]) / dz + c.g / c.cp * chi).abs() * c.cp / c.g
            })
            .fold(0.0, f64::max)
    }
}

/// Conserved variables on cells plus the nodal Exner perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub rho: CellField,
    pub rhou: CellField,
    pub rhov: CellField,
    pub rhow: CellField,
    /// `P = ρΘ`.
    pub p: CellField,
    /// `Pχ′ = P (χ − χ̄)`.
    pub pchi: CellField,
    pub pi_prime: NodeField,
    pub t: f64,
}

impl SimState {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            rho: CellField::new(grid),
            rhou: CellField::new(grid),
            rhov: CellField::new(grid),
            rhow: CellField::new(grid),
            p: CellField::new(grid),
            pchi: CellField::new(grid),
            pi_prime: NodeField::new(grid),
            t: 0.0,
        }
    }

    /// Balanced atmosphere at rest: `P = P̄`, `ρ = P̄ χ̄`, everything else zero.
    pub fn at_rest(grid: &GridSpec, bg: &Background) -> Self {
        let mut s = Self::zeros(grid);
        s.p = CellField::from_fn(grid, |_, k| bg.p_cell[k as usize]);
        s.rho = CellField::from_fn(grid, |_, k| bg.p_cell[k as usize] * bg.chi_cell[k as usize]);
        s.apply_bc();
        s
    }

    pub fn nx(&self) -> usize {
        self.rho.nx()
    }

    pub fn nz(&self) -> usize {
        self.rho.nz()
    }

    /// Fill every ghost layer.
    pub fn apply_bc(&mut self) {
        self.apply_bc_cells();
        self.pi_prime.apply_bc();
    }

    pub fn apply_bc_cells(&mut self) {
        apply_bc_cell(&mut self.rho, BcClass::Scalar);
        apply_bc_cell(&mut self.rhou, BcClass::XMomentum);
        apply_bc_cell(&mut self.rhov, BcClass::Scalar);
        apply_bc_cell(&mut self.rhow, BcClass::ZMomentum);
        apply_bc_cell(&mut self.p, BcClass::Scalar);
        apply_bc_cell(&mut self.pchi, BcClass::Scalar);
    }

    #[inline]
    pub fn theta(&self, i: isize, k: isize) -> f64 {
        self.p.at(i, k) / self.rho.at(i, k)
    }

    /// `θ′ = P/ρ − Θ̄` on cells.
    pub fn theta_prime(&self, bg: &Background) -> CellField {
        let mut out = self.rho.clone();
        out.fill(0.0);
        out.fill_interior_with(|i, k| self.theta(i, k) - bg.theta_cell[k as usize]);
        out
    }

    /// Velocity component `m/ρ` on cells.
    pub fn velocity(&self, m: &CellField) -> CellField {
        let mut out = m.clone();
        out.fill(0.0);
        out.fill_interior_with(|i, k| m.at(i, k) / self.rho.at(i, k));
        out
    }

    pub fn mass(&self) -> f64 {
        self.rho.sum_interior()
    }

    pub fn p_sum(&self) -> f64 {
        self.p.sum_interior()
    }

    /// Reject non-finite values and non-positive `ρ` or `P`.
    pub fn check(&self) -> Result<()> {
        for (i, k) in self.rho.interior() {
            let (r, p) = (self.rho.at(i, k), self.p.at(i, k));
            if !(r > 0.0) || !(p > 0.0) {
                return Err(Error::InvalidState {
                    time: self.t,
                    what: format!("rho = {r}, P = {p} at cell ({i}, {k})"),
                });
            }
            let rest = [self.rhou.at(i, k), self.rhov.at(i, k), self.rhow.at(i, k), self.pchi.at(i, k)];
            if rest.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidState {
                    time: self.t,
                    what: format!("non-finite momentum or Pchi at cell ({i}, {k})"),
                });
            }
        }
        if !self.pi_prime.all_finite_interior() {
            return Err(Error::InvalidState { time: self.t, what: "non-finite pi'".into() });
        }
        Ok(())
    }
}

/// Reset `Pχ′ = ρ − P χ̄` from the current `ρ` and `P`.
pub fn synchronize(s: &mut SimState, bg: &Background) {
    for (i, k) in s.rho.interior() {
        let v = s.rho.at(i, k) - s.p.at(i, k) * bg.chi_cell[k as usize];
        s.pchi.set(i, k, v);
    }
    apply_bc_cell(&mut s.pchi, BcClass::Scalar);
}

/// The variables of the linearized forcing system: `U = Θρu`, `V = Θρv`,
/// `W = Θρw`, `Θ̃ = −ΘΘ̄ Pχ′`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverVars {
    pub u: CellField,
    pub v: CellField,
    pub w: CellField,
    pub theta_tilde: CellField,
}

pub fn to_solver_vars(s: &SimState, bg: &Background) -> SolverVars {
    let mut out = SolverVars {
        u: s.rhou.clone(),
        v: s.rhov.clone(),
        w: s.rhow.clone(),
        theta_tilde: s.pchi.clone(),
    };
    for (i, k) in s.rho.interior() {
        let th = s.theta(i, k);
        *out.u.at_mut(i, k) *= th;
        *out.v.at_mut(i, k) *= th;
        *out.w.at_mut(i, k) *= th;
        *out.theta_tilde.at_mut(i, k) *= -th * bg.theta_cell[k as usize];
    }
    apply_bc_cell(&mut out.u, BcClass::XMomentum);
    apply_bc_cell(&mut out.v, BcClass::Scalar);
    apply_bc_cell(&mut out.w, BcClass::ZMomentum);
    apply_bc_cell(&mut out.theta_tilde, BcClass::Scalar);
    out
}

/// Inverse of [`to_solver_vars`], with `Θ` taken from the (unchanged) `ρ`
/// and `P` of `s`.
pub fn from_solver_vars(v: &SolverVars, s: &mut SimState, bg: &Background) {
    for (i, k) in s.rho.interior() {
        let th = s.theta(i, k);
        s.rhou.set(i, k, v.u.at(i, k) / th);
        s.rhov.set(i, k, v.v.at(i, k) / th);
        s.rhow.set(i, k, v.w.at(i, k) / th);
        s.pchi.set(i, k, -v.theta_tilde.at(i, k) / (th * bg.theta_cell[k as usize]));
    }
    apply_bc_cell(&mut s.rhou, BcClass::XMomentum);
    apply_bc_cell(&mut s.rhov, BcClass::Scalar);
    apply_bc_cell(&mut s.rhow, BcClass::ZMomentum);
    apply_bc_cell(&mut s.pchi, BcClass::Scalar);
}
