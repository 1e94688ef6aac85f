//! Run configuration: a JSON document and/or command-line flags, resolved
//! against the case defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::advection::{AdvectOpts, CflPolicy, LimiterKind};
use crate::cases::{CaseName, CaseSetup, Perturbation};
use crate::error::{Error, Result};
use crate::integrator::{StepConfig, TimeStep};
use crate::linsolve::SolverConfig;
use crate::state::ModelSwitches;
use crate::thermo::GasConstants;

/// Which model equations to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fully compressible.
    #[default]
    Comp,
    /// Pseudo-incompressible.
    Psinc,
    /// Hydrostatic.
    Hyd,
}

impl Mode {
    pub fn switches(self) -> ModelSwitches {
        match self {
            Mode::Comp => ModelSwitches::COMPRESSIBLE,
            Mode::Psinc => ModelSwitches::PSEUDO_INCOMPRESSIBLE,
            Mode::Hyd => ModelSwitches::HYDROSTATIC,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Comp => "comp",
            Mode::Psinc => "psinc",
            Mode::Hyd => "hyd",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comp" => Ok(Mode::Comp),
            "psinc" => Ok(Mode::Psinc),
            "hyd" => Ok(Mode::Hyd),
            _ => Err(Error::Config(format!("invalid mode '{s}' (comp, psinc, hyd)"))),
        }
    }
}

/// User-facing run description. Every field but `case` is optional and
/// falls back to the case default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: Option<CaseName>,
    pub mode: Option<Mode>,
    pub nx: Option<usize>,
    pub nz: Option<usize>,
    /// Square cell size for the bubble case, m.
    pub dx: Option<f64>,
    pub cfl: Option<f64>,
    pub dt: Option<f64>,
    pub dt_max: Option<f64>,
    pub t_max: Option<f64>,
    pub limiter: Option<LimiterKind>,
    pub mu: Option<f64>,
    /// Center of the wave-channel anomaly, m.
    pub x_c: Option<f64>,
    pub on_cfl_violation: Option<CflPolicy>,
    pub solver: Option<SolverConfig>,
    pub constants: Option<GasConstants>,
    pub out: Option<PathBuf>,
    /// Snapshot interval, s.
    pub snap_every: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad run configuration: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn merged_with(mut self, flags: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(case, mode, nx, nz, dx, cfl, dt, dt_max, t_max, limiter, mu, x_c, on_cfl_violation, solver, constants, out, snap_every);
        self
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let case = self.case.ok_or_else(|| Error::Config("no case given".into()))?;
        if self.cfl.is_some() && self.dt.is_some() {
            return Err(Error::Config("set either cfl or dt, not both".into()));
        }
        let mut setup = match (case, self.dx) {
            (CaseName::Straka, Some(dx)) => CaseSetup::straka(dx)?,
            (_, Some(_)) => return Err(Error::Config("dx applies to the straka case only; use nx/nz".into())),
            _ => CaseSetup::standard(case),
        };
        if self.nx.is_some() || self.nz.is_some() {
            let nx = self.nx.unwrap_or(setup.grid.nx);
            let nz = self.nz.unwrap_or(setup.grid.nz);
            setup = setup.with_resolution(nx, nz)?;
        }
        if let Some(t) = self.t_max {
            setup.t_max = t;
        }
        if let Some(mu) = self.mu {
            setup.mu = mu;
        }
        if let Some(d) = self.dt_max {
            setup.dt_max = d;
        }
        if let Some(xc) = self.x_c {
            match &mut setup.perturbation {
                Perturbation::Lorentzian { x_c, .. } | Perturbation::CosineBubble { x_c, .. } => *x_c = xc,
            }
        }
        if let Some(cfl) = self.cfl {
            setup.cfl = cfl;
            setup.dt_fixed = None;
        }
        if let Some(dt) = self.dt {
            setup.dt_fixed = Some(dt);
        }
        let time_step = match setup.dt_fixed {
            Some(dt) => TimeStep::Fixed(dt),
            None => TimeStep::Cfl { cfl: setup.cfl, dt_max: setup.dt_max },
        };
        let mode = self.mode.unwrap_or_default();
        let step = StepConfig {
            time_step,
            t_max: setup.t_max,
            diffusion_mu: setup.mu,
            advect: AdvectOpts {
                limiter: self.limiter.unwrap_or(setup.limiter),
                cfl_policy: self.on_cfl_violation.unwrap_or_default(),
            },
            switches: mode.switches(),
            solver: self.solver.unwrap_or_default(),
        };
        step.validate()?;
        let constants = self.constants.unwrap_or_default();
        constants.validate()?;
        if let Some(iv) = self.snap_every {
            if !(iv > 0.0) {
                return Err(Error::Config(format!("snap_every must be positive, got {iv}")));
            }
        }
        Ok(ResolvedRun {
            setup,
            step,
            mode,
            constants,
            out: self.out.clone(),
            snap_every: self.snap_every,
        })
    }
}

/// A fully specified run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub setup: CaseSetup,
    pub step: StepConfig,
    pub mode: Mode,
    pub constants: GasConstants,
    pub out: Option<PathBuf>,
    pub snap_every: Option<f64>,
}

impl ResolvedRun {
    /// Everything that determines the run, for the metadata document.
    pub fn to_json(&self) -> serde_json::Value {
        let (cfl, dt_max, dt_fixed) = match self.step.time_step {
            TimeStep::Cfl { cfl, dt_max } => (Some(cfl), Some(dt_max), None),
            TimeStep::Fixed(dt) => (None, None, Some(dt)),
        };
        json!({
            "program": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "case": self.setup,
            "mode": self.mode,
            "alpha_p": self.step.switches.alpha_p,
            "alpha_w": self.step.switches.alpha_w,
            "cfl": cfl,
            "dt_max": dt_max,
            "dt_fixed": dt_fixed,
            "t_max": self.step.t_max,
            "mu": self.step.diffusion_mu,
            "limiter": self.step.advect.limiter,
            "on_cfl_violation": self.step.advect.cfl_policy,
            "solver": self.step.solver,
            "constants": self.constants,
            "snap_every": self.snap_every,
            "out": self.out,
        })
    }
}
