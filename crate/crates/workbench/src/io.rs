//! Records CSV and `NEMQ1` binary snapshots.
//!
//! Snapshot layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 5     | magic `NEMQ1` |
//! | 12    | `u32` nx, ny, m |
//! | 24    | `f64` Lx, Ly, t |
//! | 1     | bc tag: 0 dirichlet, 1 free_slip, 2 periodic |
//! | ...   | `f64` arrays: u `(nx+1)*ny`, v `nx*(ny+1)`, p `nx*ny`, then `m` director arrays `nx*ny` |
//!
//! Arrays are stored x-fastest over the physical faces/cells (no ghosts).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use nematic_core::flow::FlowState;
use nematic_core::grid::{BcMode, BcError, BoundaryData, DirectorField, Grid, ScalarField, VelocityField};
use nematic_core::simulator::{EnergyRecord, SimState};

pub const RECORDS_HEADER: &str = "t,kinetic,elastic,potential,total,dissip_visc,dissip_dir,A,v_H1,residual_L2,div_inf";

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: header mismatch, expected `{RECORDS_HEADER}`, found `{found}`")]
    Schema { path: PathBuf, found: String },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

pub fn format_records(records: &[EnergyRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 260 + 100);
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let vals = r.to_array();
        for (k, v) in vals.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            // 17 significant digits round-trip every f64
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_records(records: &[EnergyRecord], path: &Path) -> Result<(), RecordsError> {
    std::fs::write(path, format_records(records)).map_err(|source| RecordsError::Io { path: path.into(), source })
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<EnergyRecord>, RecordsError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != RECORDS_HEADER {
        return Err(RecordsError::Schema { path: path.into(), found: header.to_string() });
    }
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = [0.0; 11];
        let mut n = 0;
        for field in line.split(',') {
            if n == 11 {
                return Err(RecordsError::Malformed { path: path.into(), line: lineno, message: "more than 11 fields".into() });
            }
            vals[n] = field.trim().parse::<f64>().map_err(|e| RecordsError::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("column `{}`: {e} (`{field}`)", EnergyRecord::COLUMNS[n]),
            })?;
            n += 1;
        }
        if n != 11 {
            return Err(RecordsError::Malformed { path: path.into(), line: lineno, message: format!("expected 11 fields, found {n}") });
        }
        out.push(EnergyRecord::from_array(vals));
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<EnergyRecord>, RecordsError> {
    let text = std::fs::read_to_string(path).map_err(|source| RecordsError::Io { path: path.into(), source })?;
    parse_records(&text, path)
}

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"NEMQ1";
const HEADER_LEN: usize = 5 + 12 + 24 + 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a NEMQ1 snapshot (magic/version mismatch)")]
    Version,
    #[error("snapshot size mismatch: header implies {expected} bytes, file has {found}")]
    Size { expected: usize, found: usize },
    #[error("invalid snapshot header: {0}")]
    Header(String),
    #[error("snapshot grid {found} does not match configured grid {expected}")]
    GridMismatch { expected: String, found: String },
    #[error(transparent)]
    Boundary(#[from] BcError),
}

/// Raw snapshot contents; arrays hold physical values only.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub m: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub bc: BcMode,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub d: Vec<Vec<f64>>,
}

fn bc_tag(bc: BcMode) -> u8 {
    match bc {
        BcMode::Dirichlet => 0,
        BcMode::FreeSlip => 1,
        BcMode::Periodic => 2,
    }
}

impl Snapshot {
    pub fn from_state(state: &SimState) -> Self {
        let g = *state.grid();
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let d = (0..state.director.m()).map(|k| state.director.interior(k)).collect();
        Snapshot {
            nx: g.nx(),
            ny: g.ny(),
            m: state.director.m(),
            lx: g.lx(),
            ly: g.ly(),
            t: state.t,
            bc: g.bc(),
            u: state.flow.v.u().gather(0..nx + 1, 0..ny),
            v: state.flow.v.v().gather(0..nx, 0..ny + 1),
            p: state.flow.p.interior(),
            d,
        }
    }

    pub fn grid(&self) -> Result<Grid, SnapshotError> {
        Grid::new(self.nx, self.ny, self.lx, self.ly, self.bc).map_err(|e| SnapshotError::Header(e.to_string()))
    }

    /// Rebuilds a state with ghosts filled; `trace` is needed in Dirichlet mode.
    pub fn to_state(&self, trace: Option<&BoundaryData>) -> Result<SimState, SnapshotError> {
        let g = self.grid()?;
        let (nx, ny) = (g.nx() as isize, g.ny() as isize);
        let mut v = VelocityField::zeros(&g);
        v.u_mut().scatter(0..nx + 1, 0..ny, &self.u);
        v.v_mut().scatter(0..nx, 0..ny + 1, &self.v);
        v.apply_bc();
        let p = ScalarField::from_interior(&g, &self.p);
        let mut d = DirectorField::zeros(&g, self.m);
        for (k, comp) in self.d.iter().enumerate() {
            d.set_interior(k, comp);
        }
        d.apply_bc(trace)?;
        Ok(SimState { t: self.t, flow: FlowState { v, p }, director: d })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.u.len() + self.v.len() + self.p.len() + self.d.iter().map(Vec::len).sum::<usize>();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        for x in [self.nx, self.ny, self.m] {
            out.extend_from_slice(&(x as u32).to_le_bytes());
        }
        for x in [self.lx, self.ly, self.t] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.push(bc_tag(self.bc));
        for arr in [&self.u, &self.v, &self.p].into_iter().chain(self.d.iter()) {
            for x in arr {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < 5 || &bytes[..5] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::Version);
        }
        if bytes.len() < HEADER_LEN {
            return Err(SnapshotError::Size { expected: HEADER_LEN, found: bytes.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (nx, ny, m) = (u32_at(5), u32_at(9), u32_at(13));
        let (lx, ly, t) = (f64_at(17), f64_at(25), f64_at(33));
        let bc = match bytes[41] {
            0 => BcMode::Dirichlet,
            1 => BcMode::FreeSlip,
            2 => BcMode::Periodic,
            tag => return Err(SnapshotError::Header(format!("unknown bc tag {tag}"))),
        };
        if nx == 0 || ny == 0 || m == 0 {
            return Err(SnapshotError::Header(format!("empty dimensions {nx}x{ny}, m = {m}")));
        }
        let sizes = [(nx + 1) * ny, nx * (ny + 1), nx * ny];
        let total: usize = sizes.iter().sum::<usize>() + m * nx * ny;
        let expected = HEADER_LEN + 8 * total;
        if bytes.len() != expected {
            return Err(SnapshotError::Size { expected, found: bytes.len() });
        }
        let mut off = HEADER_LEN;
        let mut take = |len: usize| {
            let v: Vec<f64> = (0..len).map(|i| f64_at(off + 8 * i)).collect();
            off += 8 * len;
            v
        };
        let u = take(sizes[0]);
        let v = take(sizes[1]);
        let p = take(sizes[2]);
        let d = (0..m).map(|_| take(nx * ny)).collect();
        Ok(Snapshot { nx, ny, m, lx, ly, t, bc, u, v, p, d })
    }
}

pub fn snapshot_write(state: &SimState, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, Snapshot::from_state(state).to_bytes())
        .map_err(|source| SnapshotError::Io { path: path.into(), source })
}

pub fn snapshot_read_raw(path: &Path) -> Result<Snapshot, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io { path: path.into(), source })?;
    Snapshot::from_bytes(&bytes)
}

/// Reads a snapshot and fills ghosts with `trace` (required for Dirichlet).
pub fn snapshot_read(path: &Path, trace: Option<&BoundaryData>) -> Result<SimState, SnapshotError> {
    snapshot_read_raw(path)?.to_state(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_records_are_header_only() {
        assert_eq!(format_records(&[]), format!("{RECORDS_HEADER}\n"));
        assert!(parse_records(&format_records(&[]), Path::new("x")).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{RECORDS_HEADER}\n{}\n1,2,3\n", ["0"; 11].join(","));
        let e = parse_records(&text, Path::new("r.csv")).unwrap_err().to_string();
        assert!(e.contains("r.csv:3"), "{e}");
        let bad = "t,kinetic\n1,2\n";
        assert!(matches!(parse_records(bad, Path::new("r.csv")), Err(RecordsError::Schema { .. })));
    }

    #[test]
    fn snapshot_rejects_magic_and_truncation() {
        let g = Grid::new(4, 5, 1.0, 2.0, BcMode::FreeSlip).unwrap();
        let d = DirectorField::from_fn(&g, 2, |x, y| vec![x, y]);
        let mut state = SimState { t: 0.5, flow: FlowState::zeros(&g), director: d };
        state.director.apply_bc(None).unwrap();
        let bytes = Snapshot::from_state(&state).to_bytes();
        assert!(matches!(Snapshot::from_bytes(&bytes[..bytes.len() - 3]), Err(SnapshotError::Size { .. })));
        let mut wrong = bytes.clone();
        wrong[4] = b'2';
        assert!(matches!(Snapshot::from_bytes(&wrong), Err(SnapshotError::Version)));
        let back = Snapshot::from_bytes(&bytes).unwrap().to_state(None).unwrap();
        assert_eq!(back, state);
    }
}
