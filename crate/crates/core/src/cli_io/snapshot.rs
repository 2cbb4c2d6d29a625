//! Snapshot files: CSV density/flux tables and binary phase-space dumps.
//!
//! A binary dump starts with four little-endian `u64` values `(nx, nv, ne, index)` followed by
//! `nx * nv * ne` little-endian `f64` values in the solver layout `(ix * nv + iv) * ne + ie`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Header of a binary dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotHeader {
    /// Number of `x` cells.
    pub nx: u64,
    /// Number of tangential cells.
    pub nv: u64,
    /// Number of `e_z` cells.
    pub ne: u64,
    /// Snapshot index.
    pub index: u64,
}

impl SnapshotHeader {
    /// Number of values that follow the header.
    pub fn len(&self) -> usize {
        (self.nx * self.nv * self.ne) as usize
    }

    /// True when the dump holds no values.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Writes a binary dump.
pub fn write_snapshot_binary(path: &Path, header: SnapshotHeader, values: &[f64]) -> Result<()> {
    if values.len() != header.len() {
        return Err(Error::GridMismatch(format!(
            "snapshot header announces {} values, got {}",
            header.len(),
            values.len()
        )));
    }
    let ctx = || format!("writing {}", path.display());
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(ctx(), e))?);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(ctx(), e));
    for h in [header.nx, header.nv, header.ne, header.index] {
        put(&h.to_le_bytes())?;
    }
    for v in values {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

/// Reads a binary dump written by [`write_snapshot_binary`].
pub fn read_snapshot_binary(path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let ctx = || format!("reading {}", path.display());
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(ctx(), e))?);
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut word).map_err(|e| Error::io(ctx(), e))?;
        Ok(word)
    };
    let mut h = [0u64; 4];
    for slot in h.iter_mut() {
        *slot = u64::from_le_bytes(next(&mut r)?);
    }
    let header = SnapshotHeader {
        nx: h[0],
        nv: h[1],
        ne: h[2],
        index: h[3],
    };
    let n = header
        .nx
        .checked_mul(header.nv)
        .and_then(|m| m.checked_mul(header.ne))
        .ok_or_else(|| Error::Domain(format!("{}: header sizes overflow", path.display())))?;
    let mut values = Vec::with_capacity(n.min(1 << 24) as usize);
    for _ in 0..n {
        values.push(f64::from_le_bytes(next(&mut r)?));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(ctx(), e))?;
    if !rest.is_empty() {
        return Err(Error::Domain(format!(
            "{}: {} trailing bytes after the announced values",
            path.display(),
            rest.len()
        )));
    }
    Ok((header, values))
}

/// CSV table with columns `t,x,N,Phi`, one row per cell and snapshot.
pub struct DensityTable {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DensityTable {
    /// Creates the file and writes the header.
    pub fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut t = Self {
            path,
            out: BufWriter::new(file),
        };
        t.write_str("t,x,N,Phi\n")?;
        Ok(t)
    }

    fn write_str(&mut self, s: &str) -> Result<()> {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))
    }

    /// Appends one snapshot.
    pub fn append(&mut self, t: f64, x: &[f64], n: &[f64], phi: &[f64]) -> Result<()> {
        let mut s = String::with_capacity(x.len() * 96);
        for ((x, n), p) in x.iter().zip(n).zip(phi) {
            s.push_str(&format!("{t:.16e},{x:.16e},{n:.16e},{p:.16e}\n"));
        }
        self.write_str(&s)
    }

    /// Flushes and returns the path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.out
            .flush()
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))?;
        Ok(self.path)
    }
}

/// Writes a whole text file.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
