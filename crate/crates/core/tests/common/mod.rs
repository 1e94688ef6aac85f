//! Measurements shared by the property tests and the acceptance run. Each
//! returns the quantity its check bounds.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use slicedyn::advection::LimiterKind;
use slicedyn::cases::CaseName;
use slicedyn::cli_io::{Mode, RunConfig};
use slicedyn::grid::{
    apply_bc_cell, cell_divergence_from_faces, faces_from_cells, node_divergence, node_to_cell, node_weights,
    BcClass, CellField, GridSpec, NodeField,
};
use slicedyn::implicit_dyn::{max_nodal_divergence, Forcing, HelmholtzSystem};
use slicedyn::integrator::{compute_dt, run, step, Model, NullSink, StepConfig};
use slicedyn::linsolve::{LinearOperator, SolverConfig};
use slicedyn::state::{build_background, to_solver_vars, ModelSwitches, SimState};
use slicedyn::thermo::GasConstants;

pub const MODES: [Mode; 3] = [Mode::Comp, Mode::Psinc, Mode::Hyd];

pub fn resolved(cfg: RunConfig) -> (SimState, Model, StepConfig) {
    let r = cfg.resolve().unwrap();
    let (s, m) = r.setup.init(&r.constants).unwrap();
    (s, m, r.step)
}

pub fn max_diff(a: &CellField, b: &CellField) -> f64 {
    a.interior().map(|(i, k)| (a.at(i, k) - b.at(i, k)).abs()).fold(0.0, f64::max)
}

fn step_config(mode: Mode, dt: f64, t_max: f64) -> StepConfig {
    let cfg = RunConfig { case: Some(CaseName::IgwNh), mode: Some(mode), dt: Some(dt), t_max: Some(t_max), ..Default::default() };
    cfg.resolve().unwrap().step
}

/// Largest `|ρw|` after 100 steps from a balanced stratified rest state,
/// over all modes.
pub fn rest_drift() -> f64 {
    let grid = GridSpec::new(0.0, 60_000.0, 0.0, 10_000.0, 30, 10).unwrap();
    let c = GasConstants::default();
    let bg = build_background(&|z| 300.0 * (1e-4 * z / 9.81).exp(), &grid, &c).unwrap();
    let m = Model { grid, bg, c, u_geo: 0.0 };
    let mut worst = 0.0f64;
    for mode in MODES {
        let mut s = SimState::at_rest(&m.grid, &m.bg);
        let rep = run(&mut s, &m, &step_config(mode, 20.0, 2000.0), None, &mut NullSink).unwrap();
        assert_eq!(rep.steps, 100);
        worst = worst.max(s.rhow.max_abs_interior());
    }
    worst
}

/// Short runs of every benchmark in every mode.
pub fn short_runs() -> Vec<RunConfig> {
    let mut out = Vec::new();
    for mode in MODES {
        for (case, t_max) in [(CaseName::IgwNh, 600.0), (CaseName::IgwH, 9000.0), (CaseName::IgwPlanetary, 72_000.0)] {
            out.push(RunConfig { case: Some(case), mode: Some(mode), t_max: Some(t_max), ..Default::default() });
        }
        out.push(RunConfig {
            case: Some(CaseName::AcousticGravity),
            mode: Some(mode),
            nx: Some(120),
            nz: Some(8),
            dt: Some(12.0),
            t_max: Some(240.0),
            ..Default::default()
        });
    }
    out.push(RunConfig { case: Some(CaseName::Straka), dx: Some(800.0), t_max: Some(120.0), ..Default::default() });
    out
}

/// Largest relative change of total mass or total `P` over the short runs,
/// with the label of the worst run.
pub fn conservation_drift() -> (f64, String) {
    let mut worst = (0.0f64, String::new());
    for cfg in short_runs() {
        let label = format!("{} {}", cfg.case.unwrap().as_str(), cfg.mode.unwrap_or_default());
        let (mut s, m, step_cfg) = resolved(cfg);
        let (mass, p) = (s.mass(), s.p_sum());
        run(&mut s, &m, &step_cfg, None, &mut NullSink).unwrap();
        let d = ((s.mass() - mass) / mass).abs().max(((s.p_sum() - p) / p).abs());
        if d >= worst.0 {
            worst = (d, label);
        }
    }
    worst
}

fn random_cell(g: &GridSpec, rng: &mut StdRng, class: BcClass) -> CellField {
    let mut c = CellField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
    apply_bc_cell(&mut c, class);
    c
}

/// Cell divergence of the face fluxes against the cell average of the nodal
/// divergence, on random velocity fields.
pub fn divergence_identity_error() -> f64 {
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for &(nx, nz) in &[(4, 4), (7, 5), (16, 9), (6, 4)] {
        let g = GridSpec::new(0.0, 1000.0 * nx as f64, 0.0, 300.0 * nz as f64, nx, nz).unwrap();
        let u = random_cell(&g, &mut rng, BcClass::XMomentum);
        let w = random_cell(&g, &mut rng, BcClass::ZMomentum);
        let lhs = cell_divergence_from_faces(&g, &faces_from_cells(&u, &w));
        let rhs = node_to_cell(&node_divergence(&g, &u, &w));
        worst = worst.max(max_diff(&lhs, &rhs) * g.dx().min(g.dz()));
    }
    worst
}

/// The pressure operator assembled cell by cell from the bilinear element
/// gradients: each cell couples its four corners with weight
/// `h·r_p·r_q`, rows are scaled by the inverse nodal control-volume weight.
fn dense_operator(g: &GridSpec, hx: &CellField, hz: &CellField, diag: &NodeField) -> Vec<f64> {
    let (nx, nz) = (g.nx, g.nz);
    let n = g.node_dofs();
    let node = |i: usize, k: usize| k * nx + (i % nx);
    let wts = node_weights(g);
    let mut a = vec![0.0; n * n];
    for k in 0..nz {
        for i in 0..nx {
            let corners = [node(i, k), node(i + 1, k), node(i, k + 1), node(i + 1, k + 1)];
            let rx = [-1.0, 1.0, -1.0, 1.0].map(|s: f64| s * 0.5 / g.dx());
            let rz = [-1.0, -1.0, 1.0, 1.0].map(|s: f64| s * 0.5 / g.dz());
            let (cx, cz) = (hx.at(i as isize, k as isize), hz.at(i as isize, k as isize));
            for (p, &np) in corners.iter().enumerate() {
                for (q, &nq) in corners.iter().enumerate() {
                    a[np * n + nq] += cx * rx[p] * rx[q] + cz * rz[p] * rz[q];
                }
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] /= wts[r];
        }
        a[r * n + r] += diag.at((r % nx) as isize, (r / nx) as isize);
    }
    a
}

/// Largest entry of `Ax − A_dense x` relative to the largest matrix entry,
/// on a 6×4 grid with and without the diagonal term.
pub fn helmholtz_oracle_error() -> f64 {
    let g = GridSpec::new(0.0, 7200.0, 0.0, 3200.0, 6, 4).unwrap();
    let mut rng = StdRng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for with_diag in [true, false] {
        let mut hx = CellField::from_fn(&g, |_, _| rng.gen_range(0.5..2.0) * 1e6);
        let mut hz = CellField::from_fn(&g, |_, _| rng.gen_range(0.5..2.0) * 1e5);
        apply_bc_cell(&mut hx, BcClass::Scalar);
        apply_bc_cell(&mut hz, BcClass::Scalar);
        let diag = if with_diag { NodeField::from_fn(&g, |_, _| rng.gen_range(0.5..1.5)) } else { NodeField::new(&g) };
        let a = dense_operator(&g, &hx, &hz, &diag);
        let sys = HelmholtzSystem::new(&g, hx, hz, diag);
        let n = g.node_dofs();
        let max_a = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..10 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; n];
            sys.apply(&x, &mut y);
            for r in 0..n {
                let want: f64 = (0..n).map(|c| a[r * n + c] * x[c]).sum();
                worst = worst.max((y[r] - want).abs() / max_a);
            }
        }
    }
    worst
}

/// Largest ratio of the nodal divergence to `tol·κ` over 20 steps of the
/// pseudo-incompressible wave packet.
pub fn psinc_divergence_ratio() -> f64 {
    let (mut s, m, cfg) = resolved(RunConfig { case: Some(CaseName::IgwNh), mode: Some(Mode::Psinc), ..Default::default() });
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (dt, _) = compute_dt(&s, &m, &cfg, cfg.t_max).unwrap();
        let stats = step(&mut s, &m, &cfg, dt).unwrap();
        worst = worst.max(max_nodal_divergence(&m.grid, &s) / (cfg.solver.tol * stats.corrector.kappa));
    }
    worst
}

/// Largest relative change of the horizontal kinetic energy per cell over
/// five rotation-only steps.
pub fn coriolis_energy_error() -> f64 {
    let g = GridSpec::new(0.0, 7200.0, 0.0, 3200.0, 6, 4).unwrap();
    let c = GasConstants { f: 1e-4, ..Default::default() };
    let bg = build_background(&|_| 300.0, &g, &c).unwrap();
    let fo = Forcing { grid: &g, bg: &bg, c: &c, switches: ModelSwitches::COMPRESSIBLE, u_geo: 0.0 };
    let mut s = SimState::at_rest(&g, &bg);
    s.rhou.fill_interior_with(|i, k| 7.0 * s.rho.at(i, k));
    s.rhov.fill_interior_with(|i, k| 4.0 * s.rho.at(i, k));
    s.apply_bc();
    let energy = |s: &SimState| -> Vec<f64> {
        let v = to_solver_vars(s, &bg);
        v.u.interior().map(|(i, k)| v.u.at(i, k).powi(2) + v.v.at(i, k).powi(2)).collect()
    };
    let e0 = energy(&s);
    for _ in 0..5 {
        fo.explicit(&mut s, 600.0);
        fo.implicit(&mut s, 600.0, &SolverConfig::default()).unwrap();
    }
    e0.iter().zip(energy(&s)).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max)
}

/// `θ′` after 720 s of the nonhydrostatic wave packet on a grid that
/// resolves it, with the mean wind removed.
pub fn smooth_igw(dt: f64) -> CellField {
    let r = RunConfig {
        case: Some(CaseName::IgwNh),
        nx: Some(1200),
        dt: Some(dt),
        t_max: Some(720.0),
        limiter: Some(LimiterKind::None),
        solver: Some(SolverConfig { tol: 1e-11, ..Default::default() }),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let mut setup = r.setup;
    setup.u0 = 0.0;
    let (mut s, m) = setup.init(&r.constants).unwrap();
    run(&mut s, &m, &r.step, None, &mut NullSink).unwrap();
    s.theta_prime(&m.bg)
}

/// Observed orders of the errors at `dt, dt/2, dt/4` against `dt/16`.
pub fn temporal_orders() -> Vec<f64> {
    let dt = 90.0;
    let reference = smooth_igw(dt / 16.0);
    let errs: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|d| max_diff(&smooth_igw(dt / d), &reference)).collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
