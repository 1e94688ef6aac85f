//! Snapshot files: a sequence of sections, each an ASCII header line
//!
//! ```text
//! AFVM1 <field> <nx> <nz> <time_s>
//! ```
//!
//! followed by `nx · nz` little-endian `f64` values, rows of constant `z`
//! stored bottom to top.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::integrator::Model;
use crate::state::SimState;

pub const MAGIC: &str = "AFVM1";

/// Field names in the order they are written.
pub const SECTION_NAMES: [&str; 7] = ["rho", "u", "v", "w", "theta_prime", "pi_prime_nodes", "P"];

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub nx: usize,
    pub nz: usize,
    pub time: f64,
    pub data: Vec<f64>,
}

impl Section {
    pub fn from_field<L>(name: &str, f: &Field<L>, time: f64) -> Self {
        Self {
            name: name.to_string(),
            nx: f.nx(),
            nz: f.nz(),
            time,
            data: f.interior_values(),
        }
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.data[k * self.nx + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn write_to(&self, w: &mut impl Write) -> Result<()> {
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(Error::Format(format!("invalid section name '{}'", self.name)));
        }
        // `{:?}` prints the shortest string that parses back to the same f64
        writeln!(w, "{MAGIC} {} {} {} {:?}", self.name, self.nx, self.nz, self.time)?;
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub sections: Vec<Section>,
}

impl Snapshot {
    /// The standard sections of a state: conserved density, velocities,
    /// `θ′`, nodal `π′`, and `P`.
    pub fn from_state(s: &SimState, m: &Model) -> Self {
        let t = s.t;
        Self {
            sections: vec![
                Section::from_field("rho", &s.rho, t),
                Section::from_field("u", &s.velocity(&s.rhou), t),
                Section::from_field("v", &s.velocity(&s.rhov), t),
                Section::from_field("w", &s.velocity(&s.rhow), t),
                Section::from_field("theta_prime", &s.theta_prime(&m.bg), t),
                Section::from_field("pi_prime_nodes", &s.pi_prime, t),
                Section::from_field("P", &s.p, t),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn time(&self) -> Option<f64> {
        self.sections.first().map(|s| s.time)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        for s in &self.sections {
            s.write_to(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(fs::File::open(path)?);
        let mut sections = Vec::new();
        let mut header = Vec::new();
        loop {
            header.clear();
            if r.read_until(b'\n', &mut header)? == 0 {
                break;
            }
            let line = std::str::from_utf8(&header)
                .map_err(|_| Error::Format("section header is not ASCII".into()))?
                .trim_end();
            let parts: Vec<&str> = line.split(' ').collect();
            if parts.len() != 5 || parts[0] != MAGIC {
                return Err(Error::Format(format!("bad section header '{line}'")));
            }
            let parse_n = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad count '{s}'")));
            let (nx, nz) = (parse_n(parts[2])?, parse_n(parts[3])?);
            let time = parts[4].parse::<f64>().map_err(|_| Error::Format(format!("bad time '{}'", parts[4])))?;
            let n = nx.checked_mul(nz).ok_or_else(|| Error::Format("section too large".into()))?;
            let mut bytes = vec![0u8; 8 * n];
            r.read_exact(&mut bytes)
                .map_err(|_| Error::Format(format!("section '{}' is truncated", parts[1])))?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            sections.push(Section {
                name: parts[1].to_string(),
                nx,
                nz,
                time,
                data,
            });
        }
        if sections.is_empty() {
            return Err(Error::Format("empty snapshot".into()));
        }
        Ok(Self { sections })
    }
}

/// `θ′_a − θ′_b` as a one-section snapshot.
pub fn diff_snapshots(a: &Snapshot, b: &Snapshot) -> Result<Snapshot> {
    let field = "theta_prime";
    let sa = a.get(field).ok_or_else(|| Error::Format(format!("first snapshot has no {field}")))?;
    let sb = b.get(field).ok_or_else(|| Error::Format(format!("second snapshot has no {field}")))?;
    if (sa.nx, sa.nz) != (sb.nx, sb.nz) {
        return Err(Error::Config(format!(
            "grid mismatch: {}x{} vs {}x{}",
            sa.nx, sa.nz, sb.nx, sb.nz
        )));
    }
    if (sa.time - sb.time).abs() > 1e-9 * sa.time.abs().max(1.0) {
        return Err(Error::Config(format!("time mismatch: {} s vs {} s", sa.time, sb.time)));
    }
    let data = sa.data.iter().zip(&sb.data).map(|(x, y)| x - y).collect();
    Ok(Snapshot {
        sections: vec![Section {
            name: field.to_string(),
            nx: sa.nx,
            nz: sa.nz,
            time: sa.time,
            data,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::{init_straka, CaseName, CaseSetup};
    use crate::thermo::GasConstants;

    #[test]
    fn round_trip_is_bitwise() {
        let (s, m, _) = init_straka(1600.0, &GasConstants::default()).unwrap();
        let mut s = s;
        s.t = 123.456789;
        let snap = Snapshot::from_state(&s, &m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.afvm");
        snap.write(&p).unwrap();
        let back = Snapshot::read(&p).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.time(), Some(123.456789));
        let names: Vec<&str> = back.sections.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, SECTION_NAMES);
    }

    #[test]
    fn section_sizes() {
        let (s, m) = CaseSetup::standard(CaseName::IgwNh).with_resolution(30, 5).unwrap().init(&GasConstants::default()).unwrap();
        let snap = Snapshot::from_state(&s, &m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.afvm");
        snap.write(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let mut expected = 0;
        for sec in &snap.sections {
            let (nx, nz) = if sec.name == "pi_prime_nodes" { (31, 6) } else { (30, 5) };
            assert_eq!((sec.nx, sec.nz), (nx, nz));
            let header = format!("{MAGIC} {} {} {} {:?}\n", sec.name, nx, nz, s.t);
            expected += header.len() + 8 * nx * nz;
        }
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn rejects_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        std::fs::write(&p, b"AFVM1 rho 2 2 0.0\n\x00\x00").unwrap();
        assert!(matches!(Snapshot::read(&p), Err(Error::Format(_))));
        std::fs::write(&p, b"XYZ rho 2 2 0.0\n").unwrap();
        assert!(matches!(Snapshot::read(&p), Err(Error::Format(_))));
        std::fs::write(&p, b"").unwrap();
        assert!(Snapshot::read(&p).is_err());
    }

    #[test]
    fn diff_of_self_is_zero() {
        let (s, m, _) = init_straka(1600.0, &GasConstants::default()).unwrap();
        let a = Snapshot::from_state(&s, &m);
        let d = diff_snapshots(&a, &a).unwrap();
        assert_eq!(d.sections.len(), 1);
        assert_eq!(d.sections[0].max_abs(), 0.0);
        let mut b = a.clone();
        b.sections.iter_mut().for_each(|s| s.time = 5.0);
        assert!(diff_snapshots(&a, &b).is_err());
    }
}
