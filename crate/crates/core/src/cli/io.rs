//! CSV ingestion of datasets and covariance matrices.
//!
//! Files are comma-separated, UTF-8, decimal point, one sample per line, no
//! header unless the caller asks to skip one.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Parse a numeric CSV table; errors name the offending line.
pub fn read_matrix<R: Read>(reader: R, header: bool) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Data(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Data(format!(
                    "line {line}: expected {c} fields, found {}",
                    record.len()
                )));
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Data(format!("line {line}: cannot parse '{field}' as a number")))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("line {line}: non-finite value '{field}'")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Data("no data rows".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix_file(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_matrix(std::io::BufReader::new(file), header)
}

/// Write rows as CSV using shortest round-trip float formatting.
pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
