//! File formats: matrices as headerless CSV, patterns as JSON, and projection
//! directories holding one `V_<i>.csv` (or `Z_<i>.csv`, `U_<i>.csv`) per
//! 0-based projection index.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::sampling::SamplingPattern;

/// Parses a headerless CSV matrix; ragged rows are rejected.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "row {}: cannot parse {field:?} as a number",
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix file".into()));
    }
    DenseMatrix::from_rows(&rows)
}

pub fn write_matrix_csv<W: Write>(m: &DenseMatrix, mut w: W) -> Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| format!("{}", m.get(i, j))).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix_csv(fs::File::open(path)?)
}

pub fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_matrix_csv(m, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_pattern(path: &Path) -> Result<SamplingPattern> {
    SamplingPattern::from_json(&fs::read_to_string(path)?)
}

pub fn projection_path(dir: &Path, prefix: &str, i: usize) -> PathBuf {
    dir.join(format!("{prefix}_{i}.csv"))
}

/// Reads `<prefix>_0.csv … <prefix>_{n-1}.csv` from `dir`.
pub fn load_projection_dir(dir: &Path, prefix: &str, n: usize) -> Result<Vec<DenseMatrix>> {
    (0..n)
        .map(|i| load_matrix(&projection_path(dir, prefix, i)))
        .collect()
}

/// Like [`load_projection_dir`], but `None` when none of the files exist.
pub fn load_optional_projection_dir(
    dir: &Path,
    prefix: &str,
    n: usize,
) -> Result<Option<Vec<DenseMatrix>>> {
    if (0..n).any(|i| projection_path(dir, prefix, i).exists()) {
        load_projection_dir(dir, prefix, n).map(Some)
    } else {
        Ok(None)
    }
}

pub fn save_projection_dir(dir: &Path, prefix: &str, list: &[DenseMatrix]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, m) in list.iter().enumerate() {
        save_matrix(m, &projection_path(dir, prefix, i))?;
    }
    Ok(())
}
