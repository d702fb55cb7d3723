//! FROST1 snapshot container.
//!
//! Layout (little-endian): magic `FRST1`, version `u16`, field length `u64`,
//! record count `u64`, 32-byte grid hash, then per record `time`, the four
//! parameters and the field, all `f64`. Measurement series use the same
//! container with the field length equal to the sensor count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::{ParameterSample, Snapshot};

pub const FROST_MAGIC: &[u8; 5] = b"FRST1";
pub const FROST_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub grid_hash: [u8; 32],
    pub field_len: usize,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotSet {
    pub fn new(grid_hash: [u8; 32], field_len: usize, snapshots: Vec<Snapshot>) -> Result<Self> {
        for (k, s) in snapshots.iter().enumerate() {
            if s.temperature.len() != field_len {
                return Err(Error::DimensionMismatch {
                    what: "snapshot field",
                    expected: field_len,
                    actual: s.temperature.len(),
                });
            }
            if s.temperature.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("snapshot {k}")));
            }
        }
        Ok(SnapshotSet { grid_hash, field_len, snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(FROST_MAGIC)?;
        w.write_all(&FROST_VERSION.to_le_bytes())?;
        w.write_all(&(self.field_len as u64).to_le_bytes())?;
        w.write_all(&(self.snapshots.len() as u64).to_le_bytes())?;
        w.write_all(&self.grid_hash)?;
        for s in &self.snapshots {
            write_f64s(w, &[s.time])?;
            write_f64s(w, &s.params.to_array())?;
            write_f64s(w, &s.temperature)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != FROST_MAGIC {
            return Err(Error::Format("not a FRST1 snapshot file".into()));
        }
        let version = u16::from_le_bytes(read_array(r)?);
        if version != FROST_VERSION {
            return Err(Error::Format(format!("unsupported FRST1 version {version}")));
        }
        let field_len = read_len(r)?;
        let count = read_len(r)?;
        let grid_hash: [u8; 32] = read_array(r)?;
        let mut snapshots = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let time = read_f64s(r, 1)?[0];
            let p = read_f64s(r, 4)?;
            let params = ParameterSample::from_array([p[0], p[1], p[2], p[3]]);
            let temperature = read_f64s(r, field_len)?;
            snapshots.push(Snapshot { time, params, temperature });
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format("trailing bytes after FRST1 payload".into()));
        }
        SnapshotSet::new(grid_hash, field_len, snapshots)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        SnapshotSet::read_from(&mut BufReader::new(File::open(path)?))
    }
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_array<R: Read, const K: usize>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

pub(crate) fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = u64::from_le_bytes(read_array(r)?);
    usize::try_from(v).map_err(|_| Error::Format(format!("length {v} does not fit in memory")))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(truncated)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Io(e)
    }
}
