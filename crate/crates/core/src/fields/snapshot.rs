//! Field snapshot files.
//!
//! Layout: one line of JSON `{"dim":..,"n":..,"name":..,"time":..}` terminated
//! by `\n`, followed by `n^dim` little-endian `f64` samples in grid order
//! (x index fastest).

use super::{PeriodicGrid, ScalarField};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub name: String,
    pub time: f64,
}

pub fn write_snapshot<W: Write>(mut out: W, field: &ScalarField, name: &str, time: f64) -> Result<()> {
    let g = field.grid();
    let header = SnapshotHeader {
        dim: g.dim(),
        n: g.n(),
        name: name.to_string(),
        time,
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(8 * g.len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<R: BufRead>(mut input: R) -> Result<(SnapshotHeader, ScalarField)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::Format("missing header line".into()));
    }
    let header: SnapshotHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(e.to_string()))?;
    let grid = PeriodicGrid::new(header.dim, header.n)?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            8 * grid.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let field = ScalarField::new(grid, values)?;
    Ok((header, field))
}

pub fn save(path: &Path, field: &ScalarField, name: &str, time: f64) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_snapshot(std::io::BufWriter::new(file), field, name, time)
}

pub fn load(path: &Path) -> Result<(SnapshotHeader, ScalarField)> {
    let file = std::fs::File::open(path)?;
    read_snapshot(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_one_json_line() {
        let g = PeriodicGrid::new(1, 8).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, "rho", 0.25).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(
            std::str::from_utf8(&buf[..nl]).unwrap(),
            r#"{"dim":1,"n":8,"name":"rho","time":0.25}"#
        );
        assert_eq!(buf.len() - nl - 1, 64);
        assert_eq!(&buf[nl + 1 + 8..nl + 1 + 16], &0.125f64.to_le_bytes());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let g = PeriodicGrid::new(1, 8).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &ScalarField::zeros(g), "w", 0.0).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_snapshot(&buf[..]), Err(Error::Format(_))));
    }
}
