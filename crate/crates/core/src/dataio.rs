//! Tabular input: CSV loading, column standardization and row subsampling.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::mean_std;
use crate::rng;

/// An `n × p` real matrix with named columns.
///
/// Construction validates that `n ≥ 2`, `p ≥ 1`, every entry is finite and
/// column names are nonempty and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn new(values: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidInput("need at least 1 column".into()));
        }
        if column_names.len() != p {
            return Err(Error::InvalidInput(format!(
                "{} column names for {p} columns",
                column_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if name.is_empty() {
                return Err(Error::InvalidInput("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate column name {name:?}")));
            }
        }
        for j in 0..p {
            for i in 0..n {
                if !values[(i, j)].is_finite() {
                    return Err(Error::Parse {
                        row: i + 1,
                        col: Some(j + 1),
                        msg: format!("non-finite value {}", values[(i, j)]),
                    });
                }
            }
        }
        Ok(Dataset {
            values,
            column_names,
        })
    }

    /// Builds a dataset with generated names `x0, x1, …`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::new(values, names)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Rows as contiguous slices (row-major copy).
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let p = self.p();
        let values = DMatrix::from_fn(rows.len(), p, |i, j| self.values[(rows[i], j)]);
        Dataset::new(values, self.column_names.clone())
    }
}

/// Per-column affine map applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizationParams {
    pub retained: Vec<String>,
    pub means: Vec<f64>,
    /// Population standard deviations; all strictly positive.
    pub stds: Vec<f64>,
    pub dropped: Vec<String>,
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, has_header)
}

/// Parses CSV text. Rows are numbered from 1 excluding the header.
pub fn parse_csv(text: &str, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let mut names: Option<Vec<String>> = None;
    if has_header {
        match records.next() {
            None => return Err(Error::EmptyInput("file has no header row".into())),
            Some(rec) => {
                let rec = rec.map_err(|e| Error::Parse {
                    row: 0,
                    col: None,
                    msg: e.to_string(),
                })?;
                names = Some(rec.iter().map(str::to_string).collect());
            }
        }
    }

    let mut width = names.as_ref().map(Vec::len);
    let mut data: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (idx, rec) in records.enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            col: None,
            msg: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row,
                    col: None,
                    msg: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: Some(j + 1),
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: Some(j + 1),
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
        n += 1;
    }

    let p = match width {
        Some(p) if n > 0 => p,
        _ => return Err(Error::EmptyInput("no data rows".into())),
    };
    let names = names.unwrap_or_else(|| (0..p).map(|j| format!("x{j}")).collect());
    let values = DMatrix::from_row_slice(n, p, &data);
    Dataset::new(values, names)
}

/// Z-scores every column using the population standard deviation.
///
/// Columns whose standard deviation is zero relative to their magnitude are
/// dropped and listed in [`StandardizationParams::dropped`].
pub fn standardize(d: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let n = d.n();
    let mut params = StandardizationParams {
        retained: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
        dropped: Vec::new(),
    };
    let mut keep = Vec::new();
    for j in 0..d.p() {
        let col = d.values.column(j);
        let (mean, std) = mean_std(col.iter().copied());
        if std <= 1e-12 * mean.abs().max(1.0) {
            params.dropped.push(d.column_names[j].clone());
        } else {
            keep.push(j);
            params.retained.push(d.column_names[j].clone());
            params.means.push(mean);
            params.stds.push(std);
        }
    }
    if keep.is_empty() {
        return Err(Error::DegenerateInput(
            "every column has zero variance".into(),
        ));
    }
    let values = DMatrix::from_fn(n, keep.len(), |i, k| {
        (d.values[(i, keep[k])] - params.means[k]) / params.stds[k]
    });
    let out = Dataset::new(values, params.retained.clone())?;
    Ok((out, params))
}

/// Sorted row indices kept by [`subsample`].
pub fn subsample_indices(n: usize, max_rows: usize, seed: u64) -> Vec<usize> {
    if n <= max_rows {
        return (0..n).collect();
    }
    let mut rng = rng::stream(seed, rng::SUBSAMPLE);
    let mut rows = index::sample(&mut rng, n, max_rows).into_vec();
    rows.sort_unstable();
    rows
}

/// Uniform subsample without replacement down to `max_rows` rows, keeping the
/// original row order. Returns the input unchanged when it already fits.
pub fn subsample(d: &Dataset, max_rows: usize, seed: u64) -> Result<Dataset> {
    if max_rows < 2 {
        return Err(Error::Config(format!("max_rows must be at least 2, got {max_rows}")));
    }
    if d.n() <= max_rows {
        return Ok(d.clone());
    }
    d.select_rows(&subsample_indices(d.n(), max_rows, seed))
}

/// Writes a matrix as CSV with the given header row.
pub fn write_matrix_csv(path: &Path, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let csv_err = |e: csv::Error| io_err(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    let mut buf = Vec::with_capacity(m.ncols());
    for i in 0..m.nrows() {
        buf.clear();
        buf.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&buf).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}
