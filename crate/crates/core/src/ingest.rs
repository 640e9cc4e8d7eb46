//! Ingestion of the two exported datasets that describe a design.
//!
//! Both files are UTF-8 CSV with a mandatory lowercase header, comma
//! delimiters, and `.` as the decimal separator. LF and CRLF line endings
//! are accepted, blank lines are skipped, and scientific notation is fine.
//! Extra columns are rejected rather than ignored so that a reordered
//! export cannot be read silently as the wrong quantity.
//!
//! - `<name>.mag.csv` with header `id,mx,my,mz`: magnetization components
//!   per voxel, either unit direction or A/m (normalized downstream).
//! - `<name>.geom.csv` with header `id,l,w,h,x,y,z`: side lengths and
//!   center position, all mm.

use crate::error::{Error, Result};

pub const MAG_HEADER: &str = "id,mx,my,mz";
pub const GEOM_HEADER: &str = "id,l,w,h,x,y,z";

/// One row of the magnetization dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagRecord {
    pub id: u64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

/// One row of the geometry dataset; lengths and positions in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomRecord {
    pub id: u64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Split CSV text into (1-based line number, fields) rows after checking the
/// header. Returns an empty list for a header-only file.
fn split_rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("dataset file".into()));
    }
    let expected_cols = header.split(',').count();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.trim() != header {
                return Err(parse_error(
                    line_no,
                    format!("expected header \"{header}\", found \"{line}\""),
                ));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected_cols {
            return Err(parse_error(
                line_no,
                format!("expected {expected_cols} columns, found {}", fields.len()),
            ));
        }
        rows.push((line_no, fields));
    }
    Ok(rows)
}

fn parse_id(field: &str, line: usize) -> Result<u64> {
    let id: u64 = field
        .parse()
        .map_err(|_| parse_error(line, format!("invalid id \"{field}\"")))?;
    if id == 0 {
        return Err(parse_error(line, "id must be positive"));
    }
    Ok(id)
}

fn parse_real(field: &str, name: &str, line: usize) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| parse_error(line, format!("invalid number \"{field}\" for {name}")))?;
    if !value.is_finite() {
        return Err(parse_error(line, format!("non-finite value for {name}")));
    }
    Ok(value)
}

/// Parse a magnetization dataset. Records are returned in file order;
/// duplicate ids are caught later at merge time.
pub fn parse_magnetization(text: &str) -> Result<Vec<MagRecord>> {
    let rows = split_rows(text, MAG_HEADER)?;
    let mut records = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        records.push(MagRecord {
            id: parse_id(fields[0], line)?,
            mx: parse_real(fields[1], "mx", line)?,
            my: parse_real(fields[2], "my", line)?,
            mz: parse_real(fields[3], "mz", line)?,
        });
    }
    Ok(records)
}

/// Parse a geometry dataset. Non-positive side lengths are rejected here so
/// that no downstream consumer ever sees a zero-volume voxel.
pub fn parse_geometry(text: &str) -> Result<Vec<GeomRecord>> {
    let rows = split_rows(text, GEOM_HEADER)?;
    let mut records = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        let record = GeomRecord {
            id: parse_id(fields[0], line)?,
            l: parse_real(fields[1], "l", line)?,
            w: parse_real(fields[2], "w", line)?,
            h: parse_real(fields[3], "h", line)?,
            x: parse_real(fields[4], "x", line)?,
            y: parse_real(fields[5], "y", line)?,
            z: parse_real(fields[6], "z", line)?,
        };
        for (name, value) in [("l", record.l), ("w", record.w), ("h", record.h)] {
            if value <= 0.0 {
                return Err(parse_error(
                    line,
                    format!("non-positive dimension {name} = {value}"),
                ));
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Serialize magnetization records back to CSV. Numbers use the shortest
/// representation that parses back to the identical value.
pub fn emit_magnetization(records: &[MagRecord]) -> String {
    let mut out = String::from(MAG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.id, r.mx, r.my, r.mz));
    }
    out
}

/// Serialize geometry records back to CSV.
pub fn emit_geometry(records: &[GeomRecord]) -> String {
    let mut out = String::from(GEOM_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.id, r.l, r.w, r.h, r.x, r.y, r.z
        ));
    }
    out
}
