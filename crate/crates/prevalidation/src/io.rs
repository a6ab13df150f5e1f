//! CSV ingestion and export.
//!
//! Datasets use a header row with one `y` column, any number of `z_*`
//! (external predictor) columns and at least one `x_*` (feature) column.
//! Columns may appear in any order; the relative order of the `z_*` and
//! `x_*` columns is kept. Values are written with Rust's shortest
//! round-trip float formatting, so a written file reloads bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use prevalidation_core::{Dataset, Matrix, OutcomeKind, PrevalidatedPredictor};

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: file is empty")]
    Empty { path: PathBuf },
    #[error("{path}: no `y` column in header")]
    MissingY { path: PathBuf },
    #[error("{path}: duplicate column `{name}`")]
    DuplicateColumn { path: PathBuf, name: String },
    #[error("{path}: column `{name}` is not `y`, `z_*` or `x_*`")]
    UnknownColumn { path: PathBuf, name: String },
    #[error("{path}: no `x_*` columns")]
    NoFeatures { path: PathBuf },
    #[error("{path}: row {row} has {found} fields, header has {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: row {row}, column `{column}`: empty cell")]
    Blank {
        path: PathBuf,
        row: usize,
        column: String,
    },
    #[error("{path}: row {row}, column `{column}`: `{value}` is not a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}, column `{column}`: non-finite value `{value}`")]
    NonFinite {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: prevalidation_core::Error,
    },
}

#[derive(Clone, Copy)]
enum Role {
    Y,
    Z(usize),
    X(usize),
}

/// A dataset together with its column names in file order.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset,
    pub z_names: Vec<String>,
    pub x_names: Vec<String>,
}

/// Loads a dataset. With `outcome = None` the outcome is binary when every
/// `y` is 0 or 1 and continuous otherwise.
///
/// Row numbers in errors count data rows from 1 (the header is row 0).
pub fn load_dataset(path: &Path, outcome: Option<OutcomeKind>) -> Result<Loaded, CsvError> {
    let p = path.to_path_buf();
    let file = File::open(path).map_err(|source| CsvError::Open {
        path: p.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|source| CsvError::Parse {
            path: p.clone(),
            source,
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CsvError::Empty { path: p });
    }

    let mut roles = Vec::with_capacity(header.len());
    let (mut nz, mut nx, mut has_y) = (0, 0, false);
    for (i, name) in header.iter().enumerate() {
        if header[..i].contains(name) {
            return Err(CsvError::DuplicateColumn {
                path: p,
                name: name.clone(),
            });
        }
        let role = if name == "y" {
            has_y = true;
            Role::Y
        } else if name.starts_with("z_") {
            nz += 1;
            Role::Z(nz - 1)
        } else if name.starts_with("x_") {
            nx += 1;
            Role::X(nx - 1)
        } else {
            return Err(CsvError::UnknownColumn {
                path: p,
                name: name.clone(),
            });
        };
        roles.push(role);
    }
    if !has_y {
        return Err(CsvError::MissingY { path: p });
    }
    if nx == 0 {
        return Err(CsvError::NoFeatures { path: p });
    }

    let (mut y, mut xs, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|source| CsvError::Parse {
            path: p.clone(),
            source,
        })?;
        if record.len() != header.len() {
            return Err(CsvError::Ragged {
                path: p,
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut xrow = vec![0.0; nx];
        let mut zrow = vec![0.0; nz];
        for (c, cell) in record.iter().enumerate() {
            let column = || header[c].clone();
            if cell.is_empty() {
                return Err(CsvError::Blank {
                    path: p,
                    row,
                    column: column(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| CsvError::NonNumeric {
                path: p.clone(),
                row,
                column: column(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(CsvError::NonFinite {
                    path: p,
                    row,
                    column: column(),
                    value: cell.to_owned(),
                });
            }
            match roles[c] {
                Role::Y => y.push(v),
                Role::Z(k) => zrow[k] = v,
                Role::X(k) => xrow[k] = v,
            }
        }
        xs.extend(xrow);
        zs.extend(zrow);
    }
    let n = y.len();
    let invalid = |source| CsvError::Invalid {
        path: p.clone(),
        source,
    };
    let outcome = outcome.unwrap_or_else(|| {
        if y.iter().all(|&v| v == 0.0 || v == 1.0) {
            OutcomeKind::Binary
        } else {
            OutcomeKind::Continuous
        }
    });
    let x = Matrix::from_row_major(n, nx, xs).map_err(invalid)?;
    let z = Matrix::from_row_major(n, nz, zs).map_err(invalid)?;
    let data = Dataset::new(y, x, z, outcome).map_err(invalid)?;
    let names = |pick: fn(&Role) -> bool| {
        header
            .iter()
            .zip(&roles)
            .filter(|(_, r)| pick(r))
            .map(|(h, _)| h.clone())
            .collect()
    };
    Ok(Loaded {
        data,
        z_names: names(|r| matches!(r, Role::Z(_))),
        x_names: names(|r| matches!(r, Role::X(_))),
    })
}

fn create(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `y, z_1.., x_1..` with round-trip float formatting.
pub fn write_dataset(path: &Path, data: &Dataset) -> std::io::Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["y".to_owned()];
    header.extend((1..=data.e()).map(|k| format!("z_{k}")));
    header.extend((1..=data.p()).map(|j| format!("x_{j}")));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..data.n() {
        let mut fields = vec![data.y()[i].to_string()];
        fields.extend(data.z().row(i).iter().map(f64::to_string));
        fields.extend(data.x().row(i).iter().map(f64::to_string));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()
}

/// `row,fold,ytilde`; the fold is empty for the re-use method.
pub fn pv_csv(pv: &PrevalidatedPredictor) -> String {
    let mut s = String::from("row,fold,ytilde\n");
    for (i, v) in pv.ytilde.iter().enumerate() {
        let fold = pv
            .folds
            .as_ref()
            .map(|f| f.fold_of()[i].to_string())
            .unwrap_or_default();
        s.push_str(&format!("{i},{fold},{v}\n"));
    }
    s
}

/// One value per line under a single header, for QQ plots.
pub fn samples_csv(name: &str, values: &[f64]) -> String {
    let mut s = format!("{name}\n");
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}
