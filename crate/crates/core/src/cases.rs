//! Benchmark initial conditions and the diagnostics used to compare them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::advection::LimiterKind;
use crate::error::{Error, Result};
use crate::grid::{CellField, GridSpec};
use crate::integrator::Model;
use crate::state::{build_background, synchronize, Background, SimState};
use crate::thermo::GasConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    /// Cold bubble falling in a neutral atmosphere.
    Straka,
    /// Nonhydrostatic inertia-gravity waves in a 300 km channel.
    IgwNh,
    /// Hydrostatic inertia-gravity waves with rotation, 6000 km channel.
    IgwH,
    /// Planetary-scale inertia-gravity waves, 48000 km channel.
    IgwPlanetary,
    /// Rotating channel with an isothermal background and no mean flow.
    AcousticGravity,
}

impl CaseName {
    pub const ALL: [CaseName; 5] = [
        CaseName::Straka,
        CaseName::IgwNh,
        CaseName::IgwH,
        CaseName::IgwPlanetary,
        CaseName::AcousticGravity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseName::Straka => "straka",
            CaseName::IgwNh => "igw_nh",
            CaseName::IgwH => "igw_h",
            CaseName::IgwPlanetary => "igw_planetary",
            CaseName::AcousticGravity => "acoustic_gravity",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown case '{s}'")))
    }
}

/// Background stratification of a case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stratification {
    /// Constant potential temperature `theta0`.
    Neutral { theta0: f64 },
    /// `Θ̄ = theta0 · exp(N² z / g)`.
    ConstantN { theta0: f64, n: f64 },
    /// Constant temperature `t0`, so `Θ̄ = t0 · exp(g z / (c_p t0))`.
    Isothermal { t0: f64 },
}

impl Stratification {
    pub fn theta(&self, z: f64, c: &GasConstants) -> f64 {
        match *self {
            Stratification::Neutral { theta0 } => theta0,
            Stratification::ConstantN { theta0, n } => theta0 * (n * n * z / c.g).exp(),
            Stratification::Isothermal { t0 } => t0 * (c.g * z / (c.cp * t0)).exp(),
        }
    }
}

/// Shape of the initial potential temperature anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Temperature anomaly `amplitude · [1 + cos(π r)]/2` for `r ≤ 1`,
    /// converted to potential temperature with the background Exner
    /// pressure.
    CosineBubble { amplitude: f64, x_c: f64, z_c: f64, x_r: f64, z_r: f64 },
    /// `amplitude · sin(π z / H) / (1 + ((x − x_c)/a)²)` in potential
    /// temperature, `H` being the domain height.
    Lorentzian { amplitude: f64, x_c: f64, a: f64 },
}

impl Perturbation {
    /// Potential temperature anomaly at `(x, z)`, given the background
    /// Exner pressure there.
    pub fn theta_prime(&self, x: f64, z: f64, height: f64, pi_bar: f64) -> f64 {
        match *self {
            Perturbation::CosineBubble { amplitude, x_c, z_c, x_r, z_r } => {
                let r = (((x - x_c) / x_r).powi(2) + ((z - z_c) / z_r).powi(2)).sqrt();
                if r <= 1.0 {
                    amplitude * 0.5 * (1.0 + (PI * r).cos()) / pi_bar
                } else {
                    0.0
                }
            }
            Perturbation::Lorentzian { amplitude, x_c, a } => {
                amplitude * (PI * z / height).sin() / (1.0 + ((x - x_c) / a).powi(2))
            }
        }
    }
}

/// Complete description of a benchmark run's physics and default controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseSetup {
    pub name: CaseName,
    pub grid: GridSpec,
    pub stratification: Stratification,
    pub perturbation: Perturbation,
    /// Uniform initial horizontal wind, m/s.
    pub u0: f64,
    /// Coriolis parameter, 1/s.
    pub f: f64,
    /// Whether the Coriolis force acts on the deviation from `u0`
    /// (a geostrophically balanced mean wind).
    pub geostrophic_u0: bool,
    pub mu: f64,
    pub t_max: f64,
    pub cfl: f64,
    /// Step used while the flow is at rest.
    pub dt_max: f64,
    /// Fixed step, overriding `cfl`.
    pub dt_fixed: Option<f64>,
    pub limiter: LimiterKind,
    /// Rebalance the pressure of every column for its perturbed `θ`, with
    /// the surface pressure unchanged. Otherwise the pressure stays at the
    /// background and the anomaly starts out of hydrostatic balance.
    pub balanced_columns: bool,
}

const STRAKA_DX: f64 = 400.0;

impl CaseSetup {
    /// The documented defaults of a case at its standard resolution.
    pub fn standard(name: CaseName) -> Self {
        match name {
            CaseName::Straka => Self::straka(STRAKA_DX).expect("standard resolution is valid"),
            CaseName::IgwNh => Self::igw(name, 300_000.0, 3000.0),
            CaseName::IgwH => Self::igw(name, 6_000_000.0, 60_000.0),
            CaseName::IgwPlanetary => Self::igw(name, 48_000_000.0, 480_000.0),
            CaseName::AcousticGravity => {
                let x_n = 6_000_000.0;
                Self {
                    name,
                    grid: GridSpec::new(0.0, x_n, 0.0, 10_000.0, 1200, 80).expect("valid grid"),
                    stratification: Stratification::Isothermal { t0: 250.0 },
                    perturbation: Perturbation::Lorentzian { amplitude: 0.01, x_c: x_n / 3.0, a: x_n / 60.0 },
                    u0: 0.0,
                    f: 1.03126e-4,
                    geostrophic_u0: false,
                    mu: 0.0,
                    t_max: 28_800.0,
                    cfl: 0.9,
                    dt_max: 0.125,
                    dt_fixed: Some(0.125),
                    limiter: LimiterKind::default(),
                    balanced_columns: false,
                }
            }
        }
    }

    /// Cold bubble with square cells of size `dx` (which must divide the
    /// 51.2 km × 6.4 km domain).
    pub fn straka(dx: f64) -> Result<Self> {
        let (width, height) = (51_200.0, 6_400.0);
        let nx = (width / dx).round() as usize;
        let nz = (height / dx).round() as usize;
        if (nx as f64 * dx - width).abs() > 1e-6 || (nz as f64 * dx - height).abs() > 1e-6 {
            return Err(Error::Config(format!("cell size {dx} m does not divide the bubble domain")));
        }
        Ok(Self {
            name: CaseName::Straka,
            grid: GridSpec::new(-25_600.0, 25_600.0, 0.0, height, nx, nz)?,
            stratification: Stratification::Neutral { theta0: 300.0 },
            perturbation: Perturbation::CosineBubble {
                amplitude: -15.0,
                x_c: 0.0,
                z_c: 3000.0,
                x_r: 4000.0,
                z_r: 2000.0,
            },
            u0: 0.0,
            f: 0.0,
            geostrophic_u0: false,
            mu: 75.0,
            t_max: 900.0,
            cfl: 0.96,
            dt_max: 0.96 * dx / STRAKA_REFERENCE_SPEED,
            dt_fixed: None,
            // Unlimited slopes keep the sharp gust front; the flow tolerates
            // the small overshoots.
            limiter: LimiterKind::None,
            balanced_columns: false,
        })
    }

    fn igw(name: CaseName, x_n: f64, t_max: f64) -> Self {
        let rotating = name == CaseName::IgwH;
        Self {
            name,
            grid: GridSpec::new(0.0, x_n, 0.0, 10_000.0, 300, 10).expect("valid grid"),
            stratification: Stratification::ConstantN { theta0: 300.0, n: 0.01 },
            perturbation: Perturbation::Lorentzian { amplitude: 0.01, x_c: x_n / 3.0, a: x_n / 60.0 },
            u0: 20.0,
            f: if rotating { 1e-4 } else { 0.0 },
            geostrophic_u0: rotating,
            mu: 0.0,
            t_max,
            cfl: 0.9,
            dt_max: 0.9 * (x_n / 300.0) / 20.0,
            dt_fixed: None,
            limiter: LimiterKind::default(),
            // An unbalanced start excites vertical sound waves that the large
            // step can neither resolve nor damp.
            balanced_columns: true,
        }
    }

    /// Replace the grid resolution, keeping the domain.
    pub fn with_resolution(mut self, nx: usize, nz: usize) -> Result<Self> {
        let g = self.grid;
        let old_dx = g.dx();
        self.grid = GridSpec::new(g.x_min, g.x_max, g.z_min, g.z_max, nx, nz)?;
        self.dt_max *= self.grid.dx().min(self.grid.dz()) / old_dx.min(g.dz());
        Ok(self)
    }

    /// Build the balanced background and the initial state.
    pub fn init(&self, c: &GasConstants) -> Result<(SimState, Model)> {
        let c = GasConstants { f: self.f, ..*c };
        c.validate()?;
        let strat = self.stratification;
        let grid = self.grid;
        let bg = build_background(&|z| strat.theta(z, &c), &grid, &c)?;
        let height = grid.z_max - grid.z_min;
        let mut s = SimState::at_rest(&grid, &bg);
        for (i, k) in s.rho.interior().collect::<Vec<_>>() {
            let kk = k as usize;
            let (x, z) = (grid.x_cell(i), grid.z_cell(k));
            let th = bg.theta_cell[kk] + self.perturbation.theta_prime(x, z - grid.z_min, height, bg.pi_cell[kk]);
            if !(th > 0.0) {
                return Err(Error::Config(format!("initial potential temperature {th} at ({x}, {z})")));
            }
            let p = bg.p_cell[kk];
            s.rho.set(i, k, p / th);
            s.rhou.set(i, k, p / th * self.u0);
        }
        if self.balanced_columns {
            self.balance_columns(&mut s, &bg, &c)?;
        }
        synchronize(&mut s, &bg);
        s.apply_bc();
        let u_geo = if self.geostrophic_u0 { self.u0 } else { 0.0 };
        Ok((s, Model { grid, bg, c, u_geo }))
    }
}

impl CaseSetup {
    /// Replace `P`, `ρ`, and `π′` by the hydrostatic column profiles of the
    /// perturbed `θ`, each integrated up from `π = 1` at the surface.
    fn balance_columns(&self, s: &mut SimState, bg: &Background, c: &GasConstants) -> Result<()> {
        let grid = self.grid;
        let (nx, nz) = (grid.nx, grid.nz);
        let height = grid.z_max - grid.z_min;
        let mut pi_node = vec![vec![0.0; nz + 1]; nx];
        for i in 0..nx {
            let x = grid.x_cell(i as isize);
            let theta = |z: f64| {
                let pi_bar = bg.pi_cell[(((z - grid.z_min) / grid.dz()) as usize).min(nz - 1)];
                self.stratification.theta(z, c) + self.perturbation.theta_prime(x, z - grid.z_min, height, pi_bar)
            };
            let col = build_background(&theta, &grid, c)?;
            for k in 0..nz {
                let p = col.p_cell[k];
                s.p.set(i as isize, k as isize, p);
                s.rho.set(i as isize, k as isize, p / col.theta_cell[k]);
                s.rhou.set(i as isize, k as isize, p / col.theta_cell[k] * self.u0);
            }
            pi_node[i] = col.pi_node;
        }
        // Nodes sit between two columns.
        for k in 0..=nz {
            for i in 0..nx {
                let w = if i == 0 { nx - 1 } else { i - 1 };
                let v = 0.5 * (pi_node[w][k] + pi_node[i][k]) - bg.pi_node[k];
                s.pi_prime.set(i as isize, k as isize, v);
            }
        }
        s.pi_prime.apply_bc();
        Ok(())
    }
}

/// Cap on the first steps of the bubble run, where the fluid starts at rest:
/// the step the CFL target would give at this speed.
const STRAKA_REFERENCE_SPEED: f64 = 30.0;

/// Cold bubble at cell size `dx`.
pub fn init_straka(dx: f64, c: &GasConstants) -> Result<(SimState, Model, CaseSetup)> {
    let setup = CaseSetup::straka(dx)?;
    let (s, m) = setup.init(c)?;
    Ok((s, m, setup))
}

/// Inertia-gravity wave channel at one of the three scales.
pub fn init_igw(scale: CaseName, c: &GasConstants) -> Result<(SimState, Model, CaseSetup)> {
    if !matches!(scale, CaseName::IgwNh | CaseName::IgwH | CaseName::IgwPlanetary) {
        return Err(Error::Config(format!("{scale} is not an inertia-gravity wave scale")));
    }
    let setup = CaseSetup::standard(scale);
    let (s, m) = setup.init(c)?;
    Ok((s, m, setup))
}

pub fn init_acoustic_gravity(c: &GasConstants) -> Result<(SimState, Model, CaseSetup)> {
    let setup = CaseSetup::standard(CaseName::AcousticGravity);
    let (s, m) = setup.init(c)?;
    Ok((s, m, setup))
}

/// Rightmost point in the lowest cell row where `θ′` crosses −1 K, by
/// linear interpolation between cell centers. `None` when there is no
/// crossing.
pub fn front_location(s: &SimState, m: &Model) -> Option<f64> {
    let tp = s.theta_prime(&m.bg);
    let row: Vec<f64> = (0..m.grid.nx as isize).map(|i| tp.at(i, 0)).collect();
    let xs: Vec<f64> = (0..m.grid.nx as isize).map(|i| m.grid.x_cell(i)).collect();
    crossing_from_right(&xs, &row, -1.0)
}

/// Rightmost linear-interpolated crossing of `level` in `(xs, ys)`.
pub fn crossing_from_right(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    (0..xs.len().saturating_sub(1)).rev().find_map(|i| {
        let (a, b) = (ys[i] - level, ys[i + 1] - level);
        if a == 0.0 {
            Some(xs[i])
        } else if a * b < 0.0 || b == 0.0 {
            Some(xs[i] + (xs[i + 1] - xs[i]) * a / (a - b))
        } else {
            None
        }
    })
}

/// Minimum and maximum of `θ′` over the interior.
pub fn theta_extrema(s: &SimState, bg: &Background) -> (f64, f64) {
    s.theta_prime(bg).min_max_interior()
}

/// Temperature perturbation `Θπ − Θ̄π̄` on cells.
pub fn temperature_perturbation(s: &SimState, m: &Model) -> Result<CellField> {
    let mut out = CellField::new(&m.grid);
    for (i, k) in s.rho.interior() {
        let kk = k as usize;
        let pi = m.c.pi_from_big_p(s.p.at(i, k))?;
        out.set(i, k, s.theta(i, k) * pi - m.bg.theta_cell[kk] * m.bg.pi_cell[kk]);
    }
    Ok(out)
}

/// Pointwise difference `a − b`.
pub fn field_diff(a: &CellField, b: &CellField) -> Result<CellField> {
    if a.nx() != b.nx() || a.nz() != b.nz() {
        return Err(Error::Config(format!(
            "grid mismatch: {}x{} vs {}x{}",
            a.nx(),
            a.nz(),
            b.nx(),
            b.nz()
        )));
    }
    let mut out = a.clone();
    out.fill(0.0);
    out.fill_interior_with(|i, k| a.at(i, k) - b.at(i, k));
    Ok(out)
}
