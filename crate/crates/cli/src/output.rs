//! Deterministic output writers: lossless float formatting, CSV and JSON
//! tables, and the binary field-snapshot layout.
//!
//! Binary layout (`.she1`): header `magic "SHE1", version u32, nx u64,
//! nt u64, dx f64, dt f64, nu f64`, then row-major 64-bit floats, all
//! little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use sheq_core::sim::LatticeField;

use crate::CliError;

/// 17 significant digits: CSV round-trips reproduce the exact f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Output table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::config(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// One table cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Str(String),
    Num(f64),
    Int(i64),
    Bool(bool),
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Str(s) => json_string(s),
            Cell::Num(x) => json_number(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => "null".into(),
        }
    }
}

pub fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// JSON has no inf/nan; encode them as strings so nothing is lost silently.
pub fn json_number(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else if x.is_nan() {
        "\"nan\"".into()
    } else if x > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

/// A column-labelled table writable as CSV or as a JSON array of objects.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(path)?);
        match format {
            Format::Csv => {
                writeln!(w, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let line: Vec<String> = row.iter().map(Cell::csv).collect();
                    writeln!(w, "{}", line.join(","))?;
                }
            }
            Format::Json => {
                writeln!(w, "[")?;
                for (i, row) in self.rows.iter().enumerate() {
                    let fields: Vec<String> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| format!("{}: {}", json_string(c), v.json()))
                        .collect();
                    let comma = if i + 1 < self.rows.len() { "," } else { "" };
                    writeln!(w, "  {{{}}}{comma}", fields.join(", "))?;
                }
                writeln!(w, "]")?;
            }
        }
        Ok(())
    }
}

const FIELD_MAGIC: &[u8; 4] = b"SHE1";
const FIELD_VERSION: u32 = 1;

/// Write one replicate's full space-time grid in the binary layout.
pub fn write_field_binary(field: &LatticeField, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&FIELD_VERSION.to_le_bytes())?;
    w.write_all(&(field.nx as u64).to_le_bytes())?;
    w.write_all(&(field.nt as u64).to_le_bytes())?;
    w.write_all(&field.dx.to_le_bytes())?;
    w.write_all(&field.dt.to_le_bytes())?;
    w.write_all(&field.nu.to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Header of a binary field snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHeader {
    pub version: u32,
    pub nx: u64,
    pub nt: u64,
    pub dx: f64,
    pub dt: f64,
    pub nu: f64,
}

/// Read back a binary field snapshot (used by the test suites and by
/// downstream consumers of simulation artifacts).
pub fn read_field_binary(path: &Path) -> Result<(FieldHeader, Vec<f64>), CliError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 48 || &bytes[0..4] != FIELD_MAGIC {
        return Err(CliError::config("not a SHE1 field snapshot"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let header = FieldHeader {
        version: u32_at(4),
        nx: u64_at(8),
        nt: u64_at(16),
        dx: f64_at(24),
        dt: f64_at(32),
        nu: f64_at(40),
    };
    let count = (header.nx * header.nt) as usize;
    if bytes.len() != 48 + 8 * count {
        return Err(CliError::config("field snapshot length mismatch"));
    }
    let values = (0..count).map(|i| f64_at(48 + 8 * i)).collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 1e-300, std::f64::consts::PI, -4.625e17] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn json_escaping() {
        assert_eq!(json_string("a\"b\\c"), r#""a\"b\\c""#);
        assert_eq!(json_number(f64::INFINITY), "\"inf\"");
    }

    #[test]
    fn binary_field_round_trips() {
        let field = LatticeField {
            replicate: 3,
            nu: 1.5,
            dx: 0.1,
            dt: 0.002,
            x0: -1.0,
            nx: 3,
            nt: 2,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let dir = std::env::temp_dir().join("sheq-output-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round-trip.she1");
        write_field_binary(&field, &path).unwrap();
        let (header, values) = read_field_binary(&path).unwrap();
        assert_eq!(header.nx, 3);
        assert_eq!(header.nt, 2);
        assert_eq!(header.nu, 1.5);
        assert_eq!(values, field.values);
    }
}
