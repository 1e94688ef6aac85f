//! The semi-implicit time step and the run loop.
//!
//! One step of size `dt` is
//!
//! 1. predictor: advect the time-n state by its own fluxes over `dt/2`,
//!    apply the implicit forcing over `dt/2`, and turn the resulting
//!    momenta into the advecting face fluxes `(Pv)^{n+1/2}`;
//! 2. explicit forcing over `dt/2` on the time-n state;
//! 3. Strang-split advection over `dt` with the predicted fluxes;
//! 4. optional artificial diffusion;
//! 5. implicit forcing over `dt/2`, then resynchronization of `Pχ′`.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::advection::{advect_first_order, advect_strang, AdvectOpts};
use crate::error::{Error, Result};
use crate::grid::{CellField, FaceFluxes, GridSpec};
use crate::implicit_dyn::{make_advective_fluxes, max_nodal_divergence, Forcing, ImplicitStats};
use crate::linsolve::SolverConfig;
use crate::state::{synchronize, Background, ModelSwitches, SimState};
use crate::thermo::GasConstants;

/// Static ingredients of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub grid: GridSpec,
    pub bg: Background,
    pub c: GasConstants,
    /// Geostrophic background wind for the Coriolis term, m/s.
    pub u_geo: f64,
}

impl Model {
    pub fn forcing(&self, switches: ModelSwitches) -> Forcing<'_> {
        Forcing {
            grid: &self.grid,
            bg: &self.bg,
            c: &self.c,
            switches,
            u_geo: self.u_geo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// Target advective Courant number, with `dt` capped at `dt_max`.
    Cfl { cfl: f64, dt_max: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub time_step: TimeStep,
    pub t_max: f64,
    /// Artificial viscosity and diffusivity, m²/s.
    pub diffusion_mu: f64,
    pub advect: AdvectOpts,
    pub switches: ModelSwitches,
    pub solver: SolverConfig,
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        match self.time_step {
            TimeStep::Cfl { cfl, dt_max } => {
                if !(cfl > 0.0 && cfl <= 1.0) || !(dt_max > 0.0) {
                    return Err(Error::Config(format!("need 0 < cfl <= 1 and dt_max > 0, got {cfl}, {dt_max}")));
                }
            }
            TimeStep::Fixed(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::Config(format!("fixed dt must be positive, got {dt}")));
                }
            }
        }
        if !(self.t_max >= 0.0) || !(self.diffusion_mu >= 0.0) {
            return Err(Error::Config("t_max and mu must be non-negative".into()));
        }
        self.switches.validate()?;
        self.solver.validate()
    }
}

/// Courant numbers of a candidate step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Courant {
    pub adv: f64,
    pub ac: f64,
}

/// `max(|u|/Δx, |w|/Δz)` and the same with the sound speed added.
pub fn signal_rates(s: &SimState, m: &Model) -> Result<(f64, f64)> {
    let (rdx, rdz) = (1.0 / m.grid.dx(), 1.0 / m.grid.dz());
    let (mut adv, mut ac) = (0.0f64, 0.0f64);
    for (i, k) in s.rho.interior() {
        let r = s.rho.at(i, k);
        let (u, w) = ((s.rhou.at(i, k) / r).abs(), (s.rhow.at(i, k) / r).abs());
        let pi = m.c.pi_from_big_p(s.p.at(i, k))?;
        let cs = m.c.sound_speed(s.theta(i, k) * pi)?;
        adv = adv.max(u * rdx).max(w * rdz);
        ac = ac.max((u + cs) * rdx).max((w + cs) * rdz);
    }
    Ok((adv, ac))
}

/// Step size for the current state, clipped so the step ends no later than
/// `t_stop`.
pub fn compute_dt(s: &SimState, m: &Model, cfg: &StepConfig, t_stop: f64) -> Result<(f64, Courant)> {
    let (adv, ac) = signal_rates(s, m)?;
    let dt = match cfg.time_step {
        TimeStep::Fixed(dt) => dt,
        TimeStep::Cfl { cfl, dt_max } => {
            if adv > 0.0 {
                (cfl / adv).min(dt_max)
            } else {
                dt_max
            }
        }
    };
    let remaining = t_stop - s.t;
    // absorb a sliver left by round-off rather than taking a tiny extra step
    let dt = if dt >= remaining * (1.0 - 1e-9) { remaining } else { dt };
    Ok((dt, Courant { adv: dt * adv, ac: dt * ac }))
}

/// Fluxes `(Pv)^{n+1/2}` from the half-step predictor. `s` is not modified.
pub fn predictor(s: &SimState, m: &Model, cfg: &StepConfig, dt: f64) -> Result<(FaceFluxes, ImplicitStats)> {
    let mut pred = s.clone();
    advect_first_order(&mut pred, &m.grid, 0.5 * dt, &cfg.advect)?;
    complete_p(&mut pred, &s.p, cfg.switches.alpha_p);
    let st = m.forcing(cfg.switches).implicit(&mut pred, 0.5 * dt, &cfg.solver)?;
    Ok((make_advective_fluxes(&pred), st))
}

/// Turn the carrier update `P_adv = P^n − dt ∇·(Pv)` into the solution of
/// `α_P P_t = −∇·(Pv)`.
fn complete_p(s: &mut SimState, p_old: &CellField, alpha_p: f64) {
    if alpha_p == 1.0 {
        return;
    }
    if alpha_p == 0.0 {
        s.p = p_old.clone();
        return;
    }
    for (i, k) in p_old.interior() {
        let old = p_old.at(i, k);
        let v = old + (s.p.at(i, k) - old) / alpha_p;
        s.p.set(i, k, v);
    }
    crate::grid::apply_bc_cell(&mut s.p, crate::grid::BcClass::Scalar);
}

/// Explicit Euler diffusion of `u`, `v`, `w`, and `Θ` in conservative form
/// `∂(ρφ)/∂t = ∇·(ρ μ ∇φ)` with face-averaged density and no flux through
/// the walls. `Pχ′` follows the change of `P`.
pub fn apply_diffusion(s: &mut SimState, m: &Model, mu: f64, dt: f64) {
    let g = &m.grid;
    let (nx, nz) = (g.nx as isize, g.nz as isize);
    let (cx, cz) = (mu * dt / (g.dx() * g.dx()), mu * dt / (g.dz() * g.dz()));
    s.apply_bc_cells();
    let specific = |num: &CellField| {
        let mut out = num.clone();
        for k in 0..nz {
            for i in -1..=nx {
                out.set(i, k, num.at(i, k) / s.rho.at(i, k));
            }
        }
        out
    };
    let fields = [specific(&s.rhou), specific(&s.rhov), specific(&s.rhow), specific(&s.p)];
    let mut incr: Vec<CellField> = Vec::with_capacity(4);
    for phi in &fields {
        let mut d = CellField::new(g);
        for k in 0..nz {
            for i in 0..nx {
                let r = s.rho.at(i, k);
                let east = 0.5 * (r + s.rho.at(i + 1, k)) * (phi.at(i + 1, k) - phi.at(i, k));
                let west = 0.5 * (r + s.rho.at(i - 1, k)) * (phi.at(i, k) - phi.at(i - 1, k));
                let north = if k + 1 < nz {
                    0.5 * (r + s.rho.at(i, k + 1)) * (phi.at(i, k + 1) - phi.at(i, k))
                } else {
                    0.0
                };
                let south = if k > 0 {
                    0.5 * (r + s.rho.at(i, k - 1)) * (phi.at(i, k) - phi.at(i, k - 1))
                } else {
                    0.0
                };
                d.set(i, k, cx * (east - west) + cz * (north - south));
            }
        }
        incr.push(d);
    }
    for (i, k) in s.rho.interior().collect::<Vec<_>>() {
        *s.rhou.at_mut(i, k) += incr[0].at(i, k);
        *s.rhov.at_mut(i, k) += incr[1].at(i, k);
        *s.rhow.at_mut(i, k) += incr[2].at(i, k);
        *s.p.at_mut(i, k) += incr[3].at(i, k);
        *s.pchi.at_mut(i, k) -= incr[3].at(i, k) * m.bg.chi_cell[k as usize];
    }
    s.apply_bc_cells();
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub dt: f64,
    pub predictor: ImplicitStats,
    pub corrector: ImplicitStats,
}

impl StepStats {
    pub fn iterations(&self) -> usize {
        self.predictor.solve.iterations + self.corrector.solve.iterations
    }
}

/// Advance `s` by `dt`.
pub fn step(s: &mut SimState, m: &Model, cfg: &StepConfig, dt: f64) -> Result<StepStats> {
    let forcing = m.forcing(cfg.switches);
    let (flux, predictor) = predictor(s, m, cfg, dt)?;

    let p_old = s.p.clone();
    forcing.explicit(s, 0.5 * dt);
    advect_strang(s, &m.grid, &flux, dt, &cfg.advect)?;
    complete_p(s, &p_old, cfg.switches.alpha_p);
    if cfg.diffusion_mu > 0.0 {
        apply_diffusion(s, m, cfg.diffusion_mu, dt);
    }
    let corrector = forcing.implicit(s, 0.5 * dt, &cfg.solver)?;
    synchronize(s, &m.bg);
    s.t += dt;
    s.check()?;
    Ok(StepStats { dt, predictor, corrector })
}

/// One line of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagRow {
    pub t: f64,
    pub dt: f64,
    pub cfl_adv: f64,
    pub cfl_ac: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub front_x: f64,
    pub mass: f64,
    pub p_sum: f64,
    pub max_div_nodes: f64,
    pub solver_iterations: usize,
}

impl DiagRow {
    pub fn measure(s: &SimState, m: &Model) -> Self {
        let tp = s.theta_prime(&m.bg);
        let (theta_min, theta_max) = tp.min_max_interior();
        Self {
            t: s.t,
            theta_min,
            theta_max,
            front_x: crate::cases::front_location(s, m).unwrap_or(f64::NAN),
            mass: s.mass(),
            p_sum: s.p_sum(),
            max_div_nodes: max_nodal_divergence(&m.grid, s),
            ..Default::default()
        }
    }
}

/// Receives run output. Both hooks default to doing nothing.
pub trait RunSink {
    fn snapshot(&mut self, _s: &SimState, _m: &Model) -> Result<()> {
        Ok(())
    }

    fn diagnostics(&mut self, _row: &DiagRow) -> Result<()> {
        Ok(())
    }
}

/// A sink that keeps nothing.
pub struct NullSink;

impl RunSink for NullSink {}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub steps: usize,
    pub snapshots: usize,
    pub dts: Vec<f64>,
    pub rows: Vec<DiagRow>,
}

impl RunReport {
    /// Largest step of the run (the settled CFL step, unaffected by the
    /// final clipped step).
    pub fn max_dt(&self) -> f64 {
        self.dts.iter().cloned().fold(0.0, f64::max)
    }
}

/// Integrate to `cfg.t_max`. Snapshots go out at every multiple of
/// `output_interval` (or at the start and end when it is `None`).
pub fn run(s: &mut SimState, m: &Model, cfg: &StepConfig, output_interval: Option<f64>, sink: &mut dyn RunSink) -> Result<RunReport> {
    cfg.validate()?;
    if let Some(iv) = output_interval {
        if !(iv > 0.0) {
            return Err(Error::Config(format!("output interval must be positive, got {iv}")));
        }
    }
    let mut report = RunReport::default();
    let row = DiagRow::measure(s, m);
    sink.diagnostics(&row)?;
    report.rows.push(row);
    sink.snapshot(s, m)?;
    report.snapshots += 1;

    let eps = 1e-9 * cfg.t_max.max(1.0);
    let mut next_out = output_interval;
    let mut out_index = 1usize;
    let mut warned_diffusion = false;
    while s.t < cfg.t_max - eps {
        let t_stop = next_out.map_or(cfg.t_max, |t| t.min(cfg.t_max));
        let (dt, courant) = compute_dt(s, m, cfg, t_stop)?;
        if !warned_diffusion && cfg.diffusion_mu * dt * (m.grid.dx().powi(-2) + m.grid.dz().powi(-2)) > 0.5 {
            warn!("explicit diffusion number exceeds 1/2 at dt = {dt}");
            warned_diffusion = true;
        }
        let stats = step(s, m, cfg, dt)?;
        report.steps += 1;
        report.dts.push(dt);
        debug!(
            "step {} t = {:.3} dt = {:.4} CFL_adv = {:.3} iterations = {}",
            report.steps,
            s.t,
            dt,
            courant.adv,
            stats.iterations()
        );
        let mut row = DiagRow::measure(s, m);
        row.dt = dt;
        row.cfl_adv = courant.adv;
        row.cfl_ac = courant.ac;
        row.solver_iterations = stats.iterations();
        sink.diagnostics(&row)?;
        report.rows.push(row);

        match (output_interval, next_out) {
            (Some(iv), Some(t_out)) if s.t >= t_out - eps && t_out <= cfg.t_max + eps => {
                s.t = t_out;
                sink.snapshot(s, m)?;
                report.snapshots += 1;
                out_index += 1;
                next_out = Some(out_index as f64 * iv);
            }
            (None, _) if s.t >= cfg.t_max - eps => {
                sink.snapshot(s, m)?;
                report.snapshots += 1;
            }
            _ => {}
        }
    }
    if s.t >= cfg.t_max - eps {
        s.t = s.t.max(cfg.t_max);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advection::LimiterKind;
    use crate::state::build_background;

    fn rest_model(nx: usize, nz: usize) -> (Model, SimState) {
        let grid = GridSpec::new(0.0, 20_000.0, 0.0, 10_000.0, nx, nz).unwrap();
        let c = GasConstants::default();
        let bg = build_background(&|z| 300.0 * (1e-4 * z / 9.81).exp(), &grid, &c).unwrap();
        let s = SimState::at_rest(&grid, &bg);
        (Model { grid, bg, c, u_geo: 0.0 }, s)
    }

    fn cfg(t_max: f64) -> StepConfig {
        StepConfig {
            time_step: TimeStep::Cfl { cfl: 0.9, dt_max: 10.0 },
            t_max,
            diffusion_mu: 0.0,
            advect: AdvectOpts { limiter: LimiterKind::Mc, ..Default::default() },
            switches: ModelSwitches::COMPRESSIBLE,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn dt_arithmetic() {
        let (m, mut s) = rest_model(20, 10);
        let rho = s.rho.clone();
        s.rhou.fill_interior_with(|i, k| 20.0 * rho.at(i, k));
        let c = StepConfig { time_step: TimeStep::Cfl { cfl: 0.9, dt_max: 1e9 }, ..cfg(1e6) };
        let (dt, courant) = compute_dt(&s, &m, &c, 1e6).unwrap();
        assert!((dt - 45.0).abs() < 1e-12);
        assert!((courant.adv - 0.9).abs() < 1e-12);
        assert!(courant.ac > courant.adv * 10.0);

        // zero velocity falls back to dt_max; clipping to the stop time
        let (m, s) = rest_model(20, 10);
        assert_eq!(compute_dt(&s, &m, &cfg(100.0), 100.0).unwrap().0, 10.0);
        assert_eq!(compute_dt(&s, &m, &cfg(100.0), 4.0).unwrap().0, 4.0);
    }

    #[test]
    fn rest_atmosphere_fixed_point() {
        let (m, mut s) = rest_model(16, 8);
        let rep = run(&mut s, &m, &cfg(200.0), None, &mut NullSink).unwrap();
        assert_eq!(rep.steps, 20);
        assert!(s.rhow.max_abs_interior() <= 1e-10);
        assert_eq!(s.t, 200.0);
    }

    #[test]
    fn zero_duration_run() {
        let (m, mut s) = rest_model(8, 4);
        let rep = run(&mut s, &m, &cfg(0.0), Some(5.0), &mut NullSink).unwrap();
        assert_eq!(rep.steps, 0);
        assert_eq!(rep.snapshots, 1);
    }

    #[test]
    fn snapshot_count() {
        let (m, mut s) = rest_model(8, 4);
        let mut c = cfg(47.0);
        c.time_step = TimeStep::Cfl { cfl: 0.9, dt_max: 3.0 };
        let rep = run(&mut s, &m, &c, Some(10.0), &mut NullSink).unwrap();
        assert_eq!(rep.snapshots, 5);
        assert!((s.t - 47.0).abs() < 1e-9);
    }

    #[test]
    fn diffusion_conserves_and_smooths() {
        let (m, mut s) = rest_model(16, 8);
        let rho = s.rho.clone();
        s.rhou.fill_interior_with(|i, k| if (i + k) % 3 == 0 { rho.at(i, k) } else { 0.0 });
        s.p.fill_interior_with(|i, k| m.bg.p_cell[k as usize] * if i == 4 { 1.01 } else { 1.0 });
        let (mom, p) = (s.rhou.sum_interior(), s.p_sum());
        let spread = s.rhou.max_abs_interior();
        apply_diffusion(&mut s, &m, 75.0, 10.0);
        assert!((s.rhou.sum_interior() - mom).abs() <= 1e-12 * mom.abs());
        assert!((s.p_sum() - p).abs() <= 1e-14 * p);
        assert!(s.rhou.max_abs_interior() < spread);
    }

    #[test]
    fn invalid_config() {
        let mut c = cfg(10.0);
        c.time_step = TimeStep::Cfl { cfl: 1.5, dt_max: 1.0 };
        assert!(c.validate().is_err());
        c.time_step = TimeStep::Fixed(-1.0);
        assert!(c.validate().is_err());
    }
}
