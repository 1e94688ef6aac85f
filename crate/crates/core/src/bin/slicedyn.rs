#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use slicedyn::advection::{CflPolicy, LimiterKind};
use slicedyn::cases::{front_location, theta_extrema, CaseName};
use slicedyn::cli_io::{diff_snapshots, FileSink, Mode, RunConfig, Snapshot};
use slicedyn::integrator::{run, NullSink, RunSink};
use slicedyn::{Error, Result};

#[derive(Parser)]
#[command(name = "slicedyn", version, about = "Semi-implicit x-z slice atmosphere solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark case.
    Run(RunArgs),
    /// Write the theta' difference of two snapshots.
    Diff {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cold-bubble extrema and front position per resolution.
    Table1 {
        /// Cell sizes in metres.
        #[arg(long, value_delimiter = ',', default_value = "400,200,100")]
        resolutions: Vec<f64>,
        #[arg(long)]
        limiter: Option<LimiterKind>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<CaseName>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    /// Square cell size (straka only), m.
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "dt-max")]
    dt_max: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    limiter: Option<LimiterKind>,
    #[arg(long)]
    mu: Option<f64>,
    /// Keep going (with a warning) when a Courant number exceeds one.
    #[arg(long)]
    warn_cfl: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot interval, s.
    #[arg(long = "snap-every")]
    snap_every: Option<f64>,
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let file = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        case: a.case,
        mode: a.mode,
        nx: a.nx,
        nz: a.nz,
        dx: a.dx,
        cfl: a.cfl,
        dt: a.dt,
        dt_max: a.dt_max,
        t_max: a.tmax,
        limiter: a.limiter,
        mu: a.mu,
        on_cfl_violation: a.warn_cfl.then_some(CflPolicy::Warn),
        out: a.out,
        snap_every: a.snap_every,
        ..Default::default()
    };
    let resolved = file.merged_with(flags).resolve()?;
    let (mut state, model) = resolved.setup.init(&resolved.constants)?;
    let mut sink: Box<dyn RunSink> = match &resolved.out {
        Some(dir) => Box::new(FileSink::create(dir, &resolved.to_json())?),
        None => Box::new(NullSink),
    };
    info!("running {} in {} mode", resolved.setup.name, resolved.mode);
    let report = run(&mut state, &model, &resolved.step, resolved.snap_every, sink.as_mut())?;
    let (lo, hi) = theta_extrema(&state, &model.bg);
    println!(
        "case={} mode={} steps={} t={} max_dt={} theta_min={:.6e} theta_max={:.6e}",
        resolved.setup.name,
        resolved.mode,
        report.steps,
        state.t,
        report.max_dt(),
        lo,
        hi
    );
    Ok(())
}

fn cmd_table1(resolutions: &[f64], limiter: Option<LimiterKind>) -> Result<()> {
    println!("dx_m,theta_min_K,theta_max_K,front_m");
    for &dx in resolutions {
        let cfg = RunConfig {
            case: Some(CaseName::Straka),
            dx: Some(dx),
            limiter,
            ..Default::default()
        };
        let r = cfg.resolve()?;
        let (mut s, m) = r.setup.init(&r.constants)?;
        run(&mut s, &m, &r.step, None, &mut NullSink)?;
        let (lo, hi) = theta_extrema(&s, &m.bg);
        let front = front_location(&s, &m).unwrap_or(f64::NAN);
        println!("{dx},{lo:.4},{hi:.4},{front:.0}");
    }
    Ok(())
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Config(_) => "config",
        Error::CflViolation { .. } => "cfl_violation",
        Error::SolverFailure { .. } => "solver_failure",
        Error::InvalidState { .. } => "invalid_state",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Diff { a, b, out } => Snapshot::read(&a)
            .and_then(|sa| Snapshot::read(&b).and_then(|sb| diff_snapshots(&sa, &sb)))
            .and_then(|d| d.write(&out)),
        Command::Table1 { resolutions, limiter } => cmd_table1(&resolutions, limiter),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
