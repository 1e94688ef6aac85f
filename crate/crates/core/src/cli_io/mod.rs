//! Configuration, output files, and the glue between runs and the disk.

pub mod config;
pub mod snapshot;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::integrator::{DiagRow, Model, RunSink};
use crate::state::SimState;

pub use config::{Mode, ResolvedRun, RunConfig};
pub use snapshot::{diff_snapshots, Section, Snapshot};

pub const DIAGNOSTICS_HEADER: &str =
    "t,dt,CFL_adv,CFL_ac,theta_min,theta_max,front_x,mass,Psum,max_div_nodes,solver_iterations";

/// One CSV line (no newline). Floats use the shortest round-trip form.
pub fn diagnostics_line(r: &DiagRow) -> String {
    format!(
        "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
        r.t,
        r.dt,
        r.cfl_adv,
        r.cfl_ac,
        r.theta_min,
        r.theta_max,
        r.front_x,
        r.mass,
        r.p_sum,
        r.max_div_nodes,
        r.solver_iterations
    )
}

pub fn write_diagnostics(path: &Path, rows: &[DiagRow]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", diagnostics_line(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes numbered snapshots and streams the diagnostics CSV into a
/// directory.
pub struct FileSink {
    dir: PathBuf,
    next: usize,
    csv: std::io::BufWriter<fs::File>,
}

impl FileSink {
    /// Create the directory, the metadata document, and the CSV header.
    pub fn create(dir: &Path, metadata: &serde_json::Value) -> Result<Self> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(metadata)?)?;
        let mut csv = std::io::BufWriter::new(fs::File::create(dir.join("diagnostics.csv"))?);
        writeln!(csv, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            next: 0,
            csv,
        })
    }

    pub fn snapshot_path(dir: &Path, index: usize) -> PathBuf {
        dir.join(format!("snap_{index:05}.afvm"))
    }
}

impl RunSink for FileSink {
    fn snapshot(&mut self, s: &SimState, m: &Model) -> Result<()> {
        Snapshot::from_state(s, m).write(&Self::snapshot_path(&self.dir, self.next))?;
        self.next += 1;
        Ok(())
    }

    fn diagnostics(&mut self, row: &DiagRow) -> Result<()> {
        writeln!(self.csv, "{}", diagnostics_line(row))?;
        self.csv.flush()?;
        Ok(())
    }
}
