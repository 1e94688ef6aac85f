//! Cartesian x–z mesh, ghost-layer boundary conditions, and the averaging
//! stencils that couple cell centers, nodes (cell corners), and faces.
//!
//! The domain is periodic in x and bounded by solid walls in z. Cell fields
//! carry `ng` ghost layers on every side. Node fields store the `I + 1`
//! columns of nodes with the periodic alias `node(I, k) == node(0, k)` kept
//! explicitly, plus their own ghost layers.
//!
//! Wall treatment for the nodal operators: dual cells centered on wall nodes
//! are halved, with zero flux through the wall. Filling cell ghosts with the
//! reflection rules of [`BcClass`] reproduces exactly that, so the stencils
//! below are written once for all nodes.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ghost width; enough for MUSCL slopes and every averaging stencil.
pub const GHOST_WIDTH: usize = 2;

/// Geometry of the computational domain `[x_min, x_max] × [z_min, z_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Interior cells in x.
    pub nx: usize,
    /// Interior cells in z.
    pub nz: usize,
    pub ng: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64, nx: usize, nz: usize) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            z_min,
            z_max,
            nx,
            nz,
            ng: GHOST_WIDTH,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min) || !(self.z_max > self.z_min) {
            return Err(Error::Config(format!(
                "empty domain [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.z_min, self.z_max
            )));
        }
        if self.nx < 2 || self.nz < 2 {
            return Err(Error::Config(format!(
                "need at least 2x2 cells, got {}x{}",
                self.nx, self.nz
            )));
        }
        if self.ng < 2 {
            return Err(Error::Config(format!("ghost width must be >= 2, got {}", self.ng)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / self.nz as f64
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// x-coordinate of cell center `i` (ghost indices allowed).
    pub fn x_cell(&self, i: isize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn z_cell(&self, k: isize) -> f64 {
        self.z_min + (k as f64 + 0.5) * self.dz()
    }

    pub fn x_node(&self, i: isize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn z_node(&self, k: isize) -> f64 {
        self.z_min + k as f64 * self.dz()
    }

    /// Number of distinct nodal unknowns (the periodic alias column excluded).
    pub fn node_dofs(&self) -> usize {
        self.nx * (self.nz + 1)
    }
}

/// Marker for cell-centered storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell;
/// Marker for node (cell-corner) storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node;

/// A scalar field on a padded rectangular index space. Storage is row-major
/// with `k` as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<L> {
    nx: usize,
    nz: usize,
    ng: usize,
    data: Vec<f64>,
    _loc: PhantomData<L>,
}

pub type CellField = Field<Cell>;
pub type NodeField = Field<Node>;

impl<L> Field<L> {
    fn with_shape(nx: usize, nz: usize, ng: usize) -> Self {
        Self {
            nx,
            nz,
            ng,
            data: vec![0.0; (nx + 2 * ng) * (nz + 2 * ng)],
            _loc: PhantomData,
        }
    }

    /// Logical interior extent in x.
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn ng(&self) -> usize {
        self.ng
    }

    /// Distance in `data` between consecutive `k`.
    #[inline]
    pub fn stride(&self) -> usize {
        self.nx + 2 * self.ng
    }

    #[inline]
    pub fn idx(&self, i: isize, k: isize) -> usize {
        debug_assert!(i >= -(self.ng as isize) && i < (self.nx + self.ng) as isize);
        debug_assert!(k >= -(self.ng as isize) && k < (self.nz + self.ng) as isize);
        (k + self.ng as isize) as usize * self.stride() + (i + self.ng as isize) as usize
    }

    #[inline]
    pub fn at(&self, i: isize, k: isize) -> f64 {
        self.data[self.idx(i, k)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, k: isize, v: f64) {
        let n = self.idx(i, k);
        self.data[n] = v;
    }

    #[inline]
    pub fn at_mut(&mut self, i: isize, k: isize) -> &mut f64 {
        let n = self.idx(i, k);
        &mut self.data[n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Iterate interior indices `(i, k)`, `k` outermost.
    pub fn interior(&self) -> impl Iterator<Item = (isize, isize)> {
        let (nx, nz) = (self.nx as isize, self.nz as isize);
        (0..nz).flat_map(move |k| (0..nx).map(move |i| (i, k)))
    }

    /// Set every interior value from `f(i, k)`.
    pub fn fill_interior_with(&mut self, mut f: impl FnMut(isize, isize) -> f64) {
        for k in 0..self.nz as isize {
            for i in 0..self.nx as isize {
                let v = f(i, k);
                self.set(i, k, v);
            }
        }
    }

    pub fn sum_interior(&self) -> f64 {
        self.interior().map(|(i, k)| self.at(i, k)).sum()
    }

    pub fn max_abs_interior(&self) -> f64 {
        self.interior().map(|(i, k)| self.at(i, k).abs()).fold(0.0, f64::max)
    }

    pub fn min_max_interior(&self) -> (f64, f64) {
        self.interior()
            .map(|(i, k)| self.at(i, k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn all_finite_interior(&self) -> bool {
        self.interior().all(|(i, k)| self.at(i, k).is_finite())
    }

    /// Interior values row by row (`k` outer), the on-disk layout.
    pub fn interior_values(&self) -> Vec<f64> {
        self.interior().map(|(i, k)| self.at(i, k)).collect()
    }
}

impl CellField {
    pub fn new(grid: &GridSpec) -> Self {
        Self::with_shape(grid.nx, grid.nz, grid.ng)
    }

    pub fn from_fn(grid: &GridSpec, f: impl FnMut(isize, isize) -> f64) -> Self {
        let mut a = Self::new(grid);
        a.fill_interior_with(f);
        a
    }

    pub fn shape_matches(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.nz == grid.nz
    }
}

impl NodeField {
    /// Node field with `I + 1` columns (including the periodic alias) and
    /// `K + 1` rows.
    pub fn new(grid: &GridSpec) -> Self {
        Self::with_shape(grid.nx + 1, grid.nz + 1, grid.ng)
    }

    pub fn from_fn(grid: &GridSpec, f: impl FnMut(isize, isize) -> f64) -> Self {
        let mut a = Self::new(grid);
        a.fill_interior_with(f);
        a.apply_periodic_alias();
        a
    }

    /// Copy column 0 onto the alias column `I`.
    pub fn apply_periodic_alias(&mut self) {
        let last = self.nx as isize - 1;
        for k in 0..self.nz as isize {
            let v = self.at(0, k);
            self.set(last, k, v);
        }
    }

    /// Fill node ghosts: periodic in x, mirrored about the wall nodes in z.
    pub fn apply_bc(&mut self) {
        self.apply_periodic_alias();
        let period = self.nx as isize - 1;
        let ng = self.ng as isize;
        let top = self.nz as isize - 1;
        for k in 0..=top {
            for g in 1..=ng {
                let v = self.at((-g).rem_euclid(period), k);
                self.set(-g, k, v);
                let v = self.at(g.rem_euclid(period), k);
                self.set(period + g, k, v);
            }
        }
        for g in 1..=ng {
            for i in -ng..=period + ng {
                let v = self.at(i, g);
                self.set(i, -g, v);
                let v = self.at(i, top - g);
                self.set(i, top + g, v);
            }
        }
    }

    /// Pack the distinct nodal values (alias column dropped), `k` outer.
    pub fn pack(&self, out: &mut [f64]) {
        let ni = self.nx - 1;
        debug_assert_eq!(out.len(), ni * self.nz);
        for k in 0..self.nz {
            for i in 0..ni {
                out[k * ni + i] = self.at(i as isize, k as isize);
            }
        }
    }

    /// Inverse of [`pack`](Self::pack); restores the alias column.
    pub fn unpack(&mut self, v: &[f64]) {
        let ni = self.nx - 1;
        debug_assert_eq!(v.len(), ni * self.nz);
        for k in 0..self.nz {
            for i in 0..ni {
                self.set(i as isize, k as isize, v[k * ni + i]);
            }
        }
        self.apply_periodic_alias();
    }
}

/// Dual-cell volume fraction of each packed nodal unknown: 1 in the
/// interior, 1/2 on the walls.
pub fn node_weights(grid: &GridSpec) -> Vec<f64> {
    let mut w = vec![1.0; grid.node_dofs()];
    for i in 0..grid.nx {
        w[i] = 0.5;
        w[grid.nz * grid.nx + i] = 0.5;
    }
    w
}

/// Reflection behavior of a cell variable at the z walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcClass {
    /// Even reflection: densities, ρu, ρv, P, horizontal fluxes.
    Scalar,
    /// Same wall rule as [`BcClass::Scalar`]; kept separate for readability at call sites.
    XMomentum,
    /// Odd reflection: ρw and every vertical flux component.
    ZMomentum,
}

/// Fill the ghost layers of a cell field: periodic wrap in x, mirror (with
/// sign flip for [`BcClass::ZMomentum`]) across the z walls.
pub fn apply_bc_cell(a: &mut CellField, class: BcClass) {
    let sign = match class {
        BcClass::Scalar | BcClass::XMomentum => 1.0,
        BcClass::ZMomentum => -1.0,
    };
    let (nx, nz, ng) = (a.nx as isize, a.nz as isize, a.ng as isize);
    for g in 0..ng {
        for i in 0..nx {
            let v = a.at(i, g);
            a.set(i, -1 - g, sign * v);
            let v = a.at(i, nz - 1 - g);
            a.set(i, nz + g, sign * v);
        }
    }
    for k in -ng..nz + ng {
        for g in 0..ng {
            let v = a.at(nx - 1 - g, k);
            a.set(-1 - g, k, v);
            let v = a.at(g, k);
            a.set(nx + g, k, v);
        }
    }
}

/// Node value = mean of the four surrounding cells. Ghosts of `a` must be
/// filled.
pub fn cell_to_node(a: &CellField) -> NodeField {
    let mut out = NodeField::with_shape(a.nx + 1, a.nz + 1, a.ng);
    cell_to_node_into(a, &mut out);
    out
}

pub fn cell_to_node_into(a: &CellField, out: &mut NodeField) {
    for k in 0..=a.nz as isize {
        for i in 0..a.nx as isize {
            let v = 0.25 * (a.at(i - 1, k - 1) + a.at(i, k - 1) + a.at(i - 1, k) + a.at(i, k));
            out.set(i, k, v);
        }
    }
    out.apply_periodic_alias();
}

/// Cell value = mean of its four corner nodes.
pub fn node_to_cell(n: &NodeField) -> CellField {
    let mut out = CellField::with_shape(n.nx - 1, n.nz - 1, n.ng);
    for k in 0..out.nz as isize {
        for i in 0..out.nx as isize {
            let v = 0.25 * (n.at(i, k) + n.at(i + 1, k) + n.at(i, k + 1) + n.at(i + 1, k + 1));
            out.set(i, k, v);
        }
    }
    out
}

/// Face-normal advecting fluxes.
///
/// `fx` holds `I + 1` x-faces per row (face `j` sits between cells `j − 1`
/// and `j`, face `I` aliases face `0`); `fz` holds `K + 1` z-faces per column
/// with the wall faces `0` and `K` identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFluxes {
    nx: usize,
    nz: usize,
    fx: Vec<f64>,
    fz: Vec<f64>,
}

impl FaceFluxes {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            nx: grid.nx,
            nz: grid.nz,
            fx: vec![0.0; (grid.nx + 1) * grid.nz],
            fz: vec![0.0; grid.nx * (grid.nz + 1)],
        }
    }

    /// x-face flux at face `j` (x = x_min + j Δx) of row `k`.
    #[inline]
    pub fn fx(&self, j: usize, k: usize) -> f64 {
        self.fx[k * (self.nx + 1) + j]
    }

    #[inline]
    pub fn set_fx(&mut self, j: usize, k: usize, v: f64) {
        self.fx[k * (self.nx + 1) + j] = v;
    }

    /// z-face flux at face `j` (z = z_min + j Δz) of column `i`.
    #[inline]
    pub fn fz(&self, i: usize, j: usize) -> f64 {
        self.fz[j * self.nx + i]
    }

    #[inline]
    pub fn set_fz(&mut self, i: usize, j: usize, v: f64) {
        self.fz[j * self.nx + i] = v;
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn max_abs(&self) -> f64 {
        self.fx.iter().chain(self.fz.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zero the wall-normal flux on both walls.
    pub fn enforce_walls(&mut self) {
        for i in 0..self.nx {
            self.set_fz(i, 0, 0.0);
            self.set_fz(i, self.nz, 0.0);
        }
    }
}

/// Face fluxes from cell-centered flux components with the 1-2-1 transverse
/// weighting. The cell divergence of the result equals the node-to-cell
/// average of [`node_divergence`] of the same fields, which is what makes a
/// single nodal projection sufficient.
///
/// Ghosts of `u` (even in z) and `w` (odd in z) must be filled.
pub fn faces_from_cells(u: &CellField, w: &CellField) -> FaceFluxes {
    let (nx, nz) = (u.nx, u.nz);
    let mut f = FaceFluxes {
        nx,
        nz,
        fx: vec![0.0; (nx + 1) * nz],
        fz: vec![0.0; nx * (nz + 1)],
    };
    for k in 0..nz as isize {
        for j in 0..=nx as isize {
            let l = j - 1;
            let v = (u.at(l, k - 1) + 2.0 * u.at(l, k) + u.at(l, k + 1)
                + u.at(j, k - 1)
                + 2.0 * u.at(j, k)
                + u.at(j, k + 1))
                / 8.0;
            f.set_fx(j as usize, k as usize, v);
        }
    }
    for j in 1..nz as isize {
        let b = j - 1;
        for i in 0..nx as isize {
            let v = (w.at(i - 1, b) + 2.0 * w.at(i, b) + w.at(i + 1, b)
                + w.at(i - 1, j)
                + 2.0 * w.at(i, j)
                + w.at(i + 1, j))
                / 8.0;
            f.set_fz(i as usize, j as usize, v);
        }
    }
    f.enforce_walls();
    f
}

/// Flux divergence on the dual cell around each node, formed from the
/// cell-centered components averaged onto the dual-cell faces. Ghosts of `u`
/// (even in z) and `w` (odd in z) must be filled.
pub fn node_divergence(grid: &GridSpec, u: &CellField, w: &CellField) -> NodeField {
    let mut out = NodeField::new(grid);
    node_divergence_into(grid, u, w, &mut out);
    out
}

pub fn node_divergence_into(grid: &GridSpec, u: &CellField, w: &CellField, out: &mut NodeField) {
    let (hx, hz) = (0.5 / grid.dx(), 0.5 / grid.dz());
    let s = u.stride();
    debug_assert_eq!(s, w.stride());
    let (ud, wd) = (u.as_slice(), w.as_slice());
    for k in 0..=grid.nz as isize {
        for i in 0..grid.nx as isize {
            let c = u.idx(i, k);
            let (cw, cs, csw) = (c - 1, c - s, c - s - 1);
            let div = hx * (ud[cs] + ud[c] - ud[csw] - ud[cw]) + hz * (wd[cw] + wd[c] - wd[csw] - wd[cs]);
            out.set(i, k, div);
        }
    }
    out.apply_periodic_alias();
}

/// Standard finite-volume divergence of face fluxes.
pub fn cell_divergence_from_faces(grid: &GridSpec, f: &FaceFluxes) -> CellField {
    let (rdx, rdz) = (1.0 / grid.dx(), 1.0 / grid.dz());
    CellField::from_fn(grid, |i, k| {
        let (i, k) = (i as usize, k as usize);
        (f.fx(i + 1, k) - f.fx(i, k)) * rdx + (f.fz(i, k + 1) - f.fz(i, k)) * rdz
    })
}
