//! File formats: the `CMX1` binary matrix container, geometry / curve /
//! vector CSVs and JSON documents.
//!
//! `CMX1` layout: magic `b"CMX1"`, version byte `1`, three zero bytes, rows
//! and cols as little-endian `u32`, then `rows * cols` complex values as
//! interleaved little-endian `f64` pairs in row-major order.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::benchmark::CurvePoint;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

pub const MAGIC: &[u8; 4] = b"CMX1";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 16;

pub const GEOMETRY_HEADER: [&str; 2] = ["baseline_m", "time_years"];
pub const CURVE_HEADER: [&str; 6] = [
    "normalized_distance",
    "snr_db",
    "amplitude_ratio",
    "trials",
    "effective_detections",
    "rate",
];
pub const VECTOR_HEADER: [&str; 2] = ["re", "im"];

pub fn encode_matrix(m: &CMatrix) -> Vec<u8> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, 0, 0, 0]);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            let z = m[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

/// Parse a container; `origin` only labels error messages.
pub fn decode_matrix(bytes: &[u8], origin: &Path) -> Result<CMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(origin, "truncated matrix header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(origin, "bad magic, expected CMX1"));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(origin, format!("unsupported container version {}", bytes[4])));
    }
    if bytes[5..8] != [0, 0, 0] {
        return Err(Error::format(origin, "reserved header bytes are not zero"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::format(origin, "matrix dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(
            origin,
            format!("payload holds {} bytes, expected {expected} for {rows}x{cols}", payload.len()),
        ));
    }
    let f = |k: usize| f64::from_le_bytes(payload[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        Complex64::new(f(k), f(k + 1))
    }))
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

/// Read a column vector stored either as an `N x 1` container or as a
/// `re,im` CSV (chosen by the `.csv` extension).
pub fn read_vector(path: &Path) -> Result<CVector> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_vector_csv(path);
    }
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::format(path, format!("expected a column vector, found {} columns", m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

pub fn write_vector(path: &Path, v: &CVector) -> Result<()> {
    write_matrix(path, &CMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

fn csv_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        })?;
    let found = reader
        .headers()
        .map_err(|e| Error::format(path, format!("unreadable header: {e}")))?
        .clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::format(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        // Line 1 is the header.
        let line = k + 2;
        let record = record.map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::format(
                path,
                format!("line {line}: expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(path, format!("line {line}: `{s}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Baselines and acquisition times from a `baseline_m,time_years` CSV.
pub fn read_geometry_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = csv_rows(path, &GEOMETRY_HEADER)?;
    Ok(rows.into_iter().map(|(_, v)| (v[0], v[1])).unzip())
}

pub fn write_geometry_csv(path: &Path, baselines: &[f64], times: &[f64]) -> Result<()> {
    if baselines.len() != times.len() {
        return Err(Error::dims("baselines and times differ in length"));
    }
    write_csv(
        path,
        &GEOMETRY_HEADER,
        baselines.iter().zip(times).map(|(b, t)| vec![b.to_string(), t.to_string()]),
    )
}

pub fn read_vector_csv(path: &Path) -> Result<CVector> {
    let rows = csv_rows(path, &VECTOR_HEADER)?;
    Ok(CVector::from_iterator(rows.len(), rows.into_iter().map(|(_, v)| Complex64::new(v[0], v[1]))))
}

pub fn write_vector_csv(path: &Path, v: &CVector) -> Result<()> {
    write_csv(path, &VECTOR_HEADER, v.iter().map(|z| vec![z.re.to_string(), z.im.to_string()]))
}

pub fn curve_csv_string(points: &[CurvePoint]) -> String {
    let mut text = CURVE_HEADER.join(",");
    text.push('\n');
    for p in points {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.normalized_distance, p.snr_db, p.amplitude_ratio, p.trials, p.effective_detections, p.rate
        ));
    }
    text
}

pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    fs::write(path, curve_csv_string(points)).map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let rows = csv_rows(path, &CURVE_HEADER)?;
    rows.into_iter()
        .map(|(line, v)| {
            let count = |x: f64, name: &str| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(Error::format(path, format!("line {line}: {name} must be a whole number")))
                }
            };
            Ok(CurvePoint {
                normalized_distance: v[0],
                snr_db: v[1],
                amplitude_ratio: v[2],
                trials: count(v[3], "trials")?,
                effective_detections: count(v[4], "effective_detections")?,
                rate: v[5],
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(crate::linalg::hex_string(&Sha256::digest(&bytes)))
}
