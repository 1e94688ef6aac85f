//! Semi-implicit finite-volume dynamics on a vertical x–z slice.
//!
//! The solver integrates the rotating, dry, compressible Euler equations in
//! conservation form with a single nodal elliptic solve per half step.
//! Two blending switches turn the same code into a pseudo-incompressible
//! (`α_P = 0`) or a hydrostatic (`α_w = 0`) model.
//!
//! ```
//! use slicedyn::cases::{CaseName, CaseSetup};
//! use slicedyn::cli_io::RunConfig;
//! use slicedyn::integrator::{run, NullSink};
//!
//! let cfg = RunConfig {
//!     case: Some(CaseName::IgwNh),
//!     nx: Some(60),
//!     t_max: Some(300.0),
//!     ..Default::default()
//! };
//! let r = cfg.resolve()?;
//! let (mut state, model) = r.setup.init(&r.constants)?;
//! let report = run(&mut state, &model, &r.step, None, &mut NullSink)?;
//! assert!(report.steps > 0);
//! # Ok::<(), slicedyn::Error>(())
//! ```

pub mod advection;
pub mod cases;
pub mod cli_io;
pub mod error;
pub mod grid;
pub mod implicit_dyn;
pub mod integrator;
pub mod linsolve;
pub mod state;
pub mod thermo;

pub use error::{Error, Result};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/modes.md")]
    mod modes {}
    #[doc = include_str!("../../../book/src/pressure.md")]
    mod pressure {}
    #[doc = include_str!("../../../book/src/time_step.md")]
    mod time_step {}
    #[doc = include_str!("../../../book/src/cases.md")]
    mod cases {}
    #[doc = include_str!("../../../book/src/output.md")]
    mod output {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
