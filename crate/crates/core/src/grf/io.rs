//! Parameter tables and field files.
//!
//! Binary field layout (little endian): `u32 nrow`, `u32 ncol`, `u64 count`,
//! then `count` f64 values in row-major order.

use std::io::{BufRead, Read, Write};

use super::{Field, MaternParams};
use crate::error::{Error, Result};
use crate::format::{g17, write_csv_rows};

pub const PARAM_COLUMNS: [&str; 5] = ["shape", "range", "variance", "anisoRatio", "anisoAngleRadians"];

/// Reads a parameter CSV whose header names the five Matérn columns, in any order.
pub fn read_params_csv<R: BufRead>(reader: R) -> Result<Vec<MaternParams>> {
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::InvalidParams(e.to_string()))?,
        None => return Err(Error::InvalidParams("parameter file is empty".into())),
    };
    let names: Vec<&str> = header.split(',').map(|s| s.trim().trim_matches('"')).collect();
    let mut index = [0usize; 5];
    for (slot, col) in index.iter_mut().zip(PARAM_COLUMNS) {
        *slot = names
            .iter()
            .position(|n| *n == col)
            .ok_or_else(|| Error::InvalidParams(format!("missing column {col}")))?;
    }

    let mut out = Vec::new();
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::InvalidParams(e.to_string()))?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(Error::InvalidParams(format!(
                "line {lineno}: {} fields, header has {}",
                fields.len(),
                names.len()
            )));
        }
        let v: Vec<f64> = index
            .iter()
            .zip(PARAM_COLUMNS)
            .map(|(&k, col)| {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParams(format!("line {lineno}, column {col}: {e}")))
            })
            .collect::<Result<_>>()?;
        out.push(MaternParams::new(v[0], v[1], v[2], v[3], v[4])?);
    }
    if out.is_empty() {
        return Err(Error::InvalidParams("no parameter rows".into()));
    }
    Ok(out)
}

pub fn write_params_csv<W: Write>(params: &[MaternParams], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", PARAM_COLUMNS.join(","))?;
    let rows: Vec<[f64; 5]> =
        params.iter().map(|p| [p.shape, p.range, p.variance, p.aniso_ratio, p.aniso_angle]).collect();
    write_csv_rows(w, rows.iter().map(|r| &r[..]), |v| g17(*v))
}

pub fn write_field_csv<W: Write>(field: &Field, w: W) -> std::io::Result<()> {
    write_csv_rows(w, field.values.chunks(field.ncol), |v| g17(*v))
}

pub fn write_field_binary<W: Write>(field: &Field, mut w: W) -> std::io::Result<()> {
    w.write_all(&(field.nrow as u32).to_le_bytes())?;
    w.write_all(&(field.ncol as u32).to_le_bytes())?;
    w.write_all(&(field.values.len() as u64).to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// Reads a binary field; returns `(nrow, ncol, values)`.
pub fn read_field_binary<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |m: String| Error::InvalidShapes(m);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|e| bad(format!("field header: {e}")))?;
    let nrow = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let ncol = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    if count != nrow * ncol {
        return Err(bad(format!("field count {count} does not match {nrow}x{ncol}")));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|e| bad(format!("field values: {e}")))?;
    let values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok((nrow, ncol, values))
}
