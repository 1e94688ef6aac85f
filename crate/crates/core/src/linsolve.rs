//! Matrix-free BiCGSTAB for the nodal pressure system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A linear map on flat vectors of length [`dim`](Self::dim).
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Main diagonal, needed only for Jacobi preconditioning.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }

    /// Tridiagonal couplings along lines of unknowns, needed only for line
    /// preconditioning.
    fn line_blocks(&self) -> Option<LineBlocks> {
        None
    }

    /// Null-space handling: a weight vector `w` and a list of null vectors,
    /// mutually orthogonal under `⟨a, b⟩_w = Σ w a b`. Right-hand sides
    /// and solutions are projected onto their weighted complement.
    fn null_space(&self) -> Option<(&[f64], &[Vec<f64>])> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precond {
    None,
    Diagonal,
    /// Exact solves along the lines reported by the operator. Falls back to
    /// no preconditioning for operators without line structure.
    #[default]
    Line,
}

/// Couplings of each unknown to its neighbours within a line. Line `j`
/// holds the unknowns `starts[j] + m * stride` for `m < len`; the lines
/// are disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LineBlocks {
    pub starts: Vec<usize>,
    pub stride: usize,
    pub len: usize,
    /// Per unknown, the entries for the previous, own, and next member of
    /// its line (`lower` of the first and `upper` of the last are ignored).
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LineBlocks {
    /// Thomas factorization of every line.
    fn factor(self) -> Result<LineFactors> {
        let mut c = vec![0.0; self.diag.len()];
        let mut inv = vec![0.0; self.diag.len()];
        for &s0 in &self.starts {
            let mut prev_c = 0.0;
            for m in 0..self.len {
                let n = s0 + m * self.stride;
                let a = if m == 0 { 0.0 } else { self.lower[n] };
                let den = self.diag[n] - a * prev_c;
                if den == 0.0 || !den.is_finite() {
                    return Err(Error::Config(format!("line preconditioner has a zero pivot at unknown {n}")));
                }
                inv[n] = 1.0 / den;
                c[n] = if m + 1 == self.len { 0.0 } else { self.upper[n] * inv[n] };
                prev_c = c[n];
            }
        }
        Ok(LineFactors { blocks: self, c, inv })
    }
}

struct LineFactors {
    blocks: LineBlocks,
    c: Vec<f64>,
    inv: Vec<f64>,
}

impl LineFactors {
    fn solve(&self, src: &[f64], dst: &mut [f64]) {
        let b = &self.blocks;
        for &s0 in &b.starts {
            let mut prev = 0.0;
            for m in 0..b.len {
                let n = s0 + m * b.stride;
                let a = if m == 0 { 0.0 } else { b.lower[n] };
                prev = (src[n] - a * prev) * self.inv[n];
                dst[n] = prev;
            }
            for m in (0..b.len.saturating_sub(1)).rev() {
                let n = s0 + m * b.stride;
                dst[n] -= self.c[n] * dst[n + b.stride];
            }
        }
    }
}

enum Preconditioner {
    Identity,
    Scale(Vec<f64>),
    Lines(LineFactors),
}

impl Preconditioner {
    fn build(op: &dyn LinearOperator, kind: Precond) -> Result<Self> {
        let missing = |what: &str| {
            log::warn!("operator provides no {what}; solving unpreconditioned");
            Preconditioner::Identity
        };
        Ok(match kind {
            Precond::None => Preconditioner::Identity,
            Precond::Diagonal => match op.diagonal() {
                Some(d) => Preconditioner::Scale(d.iter().map(|&v| if v != 0.0 { 1.0 / v } else { 1.0 }).collect()),
                None => missing("diagonal"),
            },
            Precond::Line => match op.line_blocks() {
                Some(b) => Preconditioner::Lines(b.factor()?),
                None => missing("line blocks"),
            },
        })
    }

    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        match self {
            Preconditioner::Identity => dst.copy_from_slice(src),
            Preconditioner::Scale(m) => dst.iter_mut().zip(src).zip(m).for_each(|((d, s), m)| *d = s * m),
            Preconditioner::Lines(f) => f.solve(src, dst),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Target for `‖b − Ax‖₂ / ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    pub precond: Precond,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            precond: Precond::Line,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "solver needs tol > 0 and max_iter >= 1, got {} and {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative residual from a final explicit evaluation of `b − Ax`.
    pub residual: f64,
    pub breakdown: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Remove the null-space components of `v` in the weighted inner product.
pub fn project_null_space(v: &mut [f64], w: &[f64], null: &[Vec<f64>]) {
    for c in null {
        let num: f64 = v.iter().zip(w).zip(c).map(|((v, w), c)| w * v * c).sum();
        let den: f64 = w.iter().zip(c).map(|(w, c)| w * c * c).sum();
        let a = num / den;
        v.iter_mut().zip(c).for_each(|(v, c)| *v -= a * c);
    }
}

fn true_residual(op: &dyn LinearOperator, b: &[f64], x: &[f64], r: &mut [f64]) {
    op.apply(x, r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
}

/// Solve `A x = b` starting from the guess in `x`.
///
/// On a breakdown (`ρ` or `ω` vanishing) the iteration restarts once from
/// the current iterate with a fresh shadow residual. A recursion-converged
/// iterate whose explicit residual is still above tolerance is likewise
/// restarted. Failure leaves the last iterate in `x`.
pub fn bicgstab(op: &dyn LinearOperator, b: &[f64], x: &mut [f64], cfg: &SolverConfig) -> Result<SolveStats> {
    bicgstab_with_floor(op, b, x, cfg, 0.0)
}

/// [`bicgstab`] that stops once `‖b − Ax‖₂ ≤ max(tol ‖b‖₂, floor)`. A
/// floor at the rounding level of the terms that make up `b` keeps the
/// solver from chasing noise when they cancel.
pub fn bicgstab_with_floor(
    op: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    cfg: &SolverConfig,
    floor: f64,
) -> Result<SolveStats> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let mut rhs = b.to_vec();
    if let Some((w, null)) = op.null_space() {
        project_null_space(&mut rhs, w, null);
        project_null_space(x, w, null);
    }
    let bnorm = norm(&rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let target = (cfg.tol * bnorm).max(floor);

    let pre = Preconditioner::build(op, cfg.precond)?;
    let precondition = |src: &[f64], dst: &mut [f64]| {
        pre.apply(src, dst);
        // keep search directions out of the null space
        if let Some((w, null)) = op.null_space() {
            project_null_space(dst, w, null);
        }
    };

    let mut r = vec![0.0; n];
    true_residual(op, &rhs, x, &mut r);
    if norm(&r) > bnorm {
        // the guess is worse than zero
        x.iter_mut().for_each(|v| *v = 0.0);
        r.copy_from_slice(&rhs);
    }
    if norm(&r) <= target {
        return Ok(SolveStats {
            iterations: 0,
            residual: norm(&r) / bnorm,
            breakdown: false,
        });
    }

    let (mut p, mut v, mut y, mut s, mut z, mut t) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut iterations = 0;
    let mut restarts_left = 1;
    let mut broke_down = false;
    let tiny = f64::EPSILON * f64::EPSILON;

    let restart = |x: &[f64], r: &mut Vec<f64>, r_hat: &mut Vec<f64>, p: &mut Vec<f64>, v: &mut Vec<f64>| {
        true_residual(op, &rhs, x, r);
        r_hat.copy_from_slice(r);
        p.iter_mut().for_each(|a| *a = 0.0);
        v.iter_mut().for_each(|a| *a = 0.0);
    };

    while iterations < cfg.max_iter {
        iterations += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() <= tiny * dot(&r_hat, &r_hat).max(f64::MIN_POSITIVE) || !rho_new.is_finite() {
            broke_down = true;
            if restarts_left == 0 {
                break;
            }
            restarts_left -= 1;
            restart(x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precondition(&p, &mut y);
        op.apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            true_residual(op, &rhs, x, &mut r);
            if norm(&r) <= target {
                break;
            }
            restart(x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            continue;
        }
        precondition(&s, &mut z);
        op.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= target {
            true_residual(op, &rhs, x, &mut r);
            if norm(&r) <= target {
                break;
            }
            restart(x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            continue;
        }
        if omega == 0.0 || !omega.is_finite() {
            broke_down = true;
            if restarts_left == 0 {
                break;
            }
            restarts_left -= 1;
            restart(x, &mut r, &mut r_hat, &mut p, &mut v);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
        }
    }

    if let Some((w, null)) = op.null_space() {
        project_null_space(x, w, null);
    }
    true_residual(op, &rhs, x, &mut r);
    let residual = norm(&r) / bnorm;
    let stats = SolveStats {
        iterations,
        residual,
        breakdown: broke_down,
    };
    if residual.is_finite() && (residual <= cfg.tol || norm(&r) <= floor) {
        Ok(stats)
    } else {
        Err(Error::SolverFailure {
            iterations,
            residual,
            breakdown: broke_down,
        })
    }
}
