//! Plain-text persistence: CSV matrices and vectors formatted like C's
//! `%.17g`, plus JSON metadata sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};

/// Format a float exactly like C's `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    fmt_g(x, 17)
}

pub fn fmt_g(x: f64, precision: usize) -> String {
    let precision = precision.max(1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", precision - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= precision as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (precision as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Path of the JSON sidecar that accompanies a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_matrix(path: &Path, mat: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_matrix_to(&mut out, mat)?;
    out.flush()?;
    Ok(())
}

pub fn write_matrix_to<W: Write>(out: &mut W, mat: &DMatrix<f64>) -> Result<()> {
    for i in 0..mat.nrows() {
        let line: Vec<String> = mat.row(i).iter().map(|&v| fmt_g17(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Vectors are stored as a single column, one entry per line.
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for &x in v.iter() {
        writeln!(out, "{}", fmt_g17(x))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: {f:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "{}: row {} has {} fields, expected {ncols}",
            path.display(),
            bad + 1,
            rows[bad].len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("{}: non-finite entry", path.display())));
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

/// Reads a vector stored either as one column or as one row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let mat = read_matrix(path)?;
    match mat.shape() {
        (_, 1) => Ok(mat.column(0).into_owned()),
        (1, _) => Ok(mat.row(0).transpose()),
        (r, c) => Err(Error::Parse(format!(
            "{}: expected a vector, found {r}x{c}",
            path.display()
        ))),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
