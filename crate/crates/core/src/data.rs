//! Datasets and CSV ingestion.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// Features `X` (N×p) with binary labels `Y` (N×q).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DMatrix<u8>,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<u8>, feature_names: Vec<String>, label_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!("{} feature rows vs {} label rows", x.nrows(), y.nrows())));
        }
        if x.nrows() == 0 {
            return Err(invalid("dataset has no rows"));
        }
        if feature_names.len() != x.ncols() || label_names.len() != y.ncols() {
            return Err(Error::DimensionMismatch("column names do not match matrix widths".into()));
        }
        if let Some(v) = y.iter().find(|&&v| v > 1) {
            return Err(invalid(format!("label value {v} is not 0/1")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("features must be finite"));
        }
        Ok(Self { x, y, feature_names, label_names })
    }

    /// Unnamed dataset with columns `x1..xp` and `y1..yq`.
    pub fn unnamed(x: DMatrix<f64>, y: DMatrix<u8>) -> Result<Self> {
        let f = (1..=x.ncols()).map(|i| format!("x{i}")).collect();
        let l = (1..=y.ncols()).map(|i| format!("y{i}")).collect();
        Self::new(x, y, f, l)
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.y.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    pub fn label_row(&self, i: usize) -> Vec<u8> {
        self.y.row(i).iter().copied().collect()
    }

    /// Write features then labels, header included.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<&str> = self.feature_names.iter().chain(&self.label_names).map(String::as_str).collect();
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.extend(self.y.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Raw CSV table: header plus string cells.
pub(crate) struct Table {
    pub header: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

pub(crate) fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Table { header, rows })
}

fn data_error(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

pub(crate) fn parse_label(path: &Path, row: usize, column: &str, cell: &str) -> Result<u8> {
    match cell {
        "0" => Ok(0),
        "1" => Ok(1),
        "" => Err(data_error(path, row, column, "missing value")),
        other => Err(data_error(path, row, column, format!("label value '{other}' is not 0 or 1"))),
    }
}

pub(crate) fn parse_feature(path: &Path, row: usize, column: &str, cell: &str) -> Result<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return Err(data_error(path, row, column, "missing value"));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| data_error(path, row, column, format!("'{cell}' is not a number")))?;
    if !v.is_finite() {
        return Err(data_error(path, row, column, "non-finite value"));
    }
    Ok(v)
}

/// Load a CSV with a header row. `labels` names the label columns; every
/// other column is a feature, in header order. Row numbers in errors are
/// 1-based data rows.
pub fn load_csv(path: &Path, labels: &[String]) -> Result<Dataset> {
    let table = read_table(path)?;
    let label_idx: Vec<usize> = labels
        .iter()
        .map(|name| {
            table
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| invalid(format!("label column '{name}' not found in {}", path.display())))
        })
        .collect::<Result<_>>()?;
    let feature_idx: Vec<usize> = (0..table.header.len()).filter(|c| !label_idx.contains(c)).collect();
    let (n, p, q) = (table.rows.len(), feature_idx.len(), label_idx.len());
    let mut x = DMatrix::zeros(n, p);
    let mut y = DMatrix::zeros(n, q);
    for (i, rec) in table.rows.iter().enumerate() {
        if rec.len() != table.header.len() {
            return Err(data_error(path, i + 1, "", format!("expected {} fields, found {}", table.header.len(), rec.len())));
        }
        for (a, &c) in feature_idx.iter().enumerate() {
            x[(i, a)] = parse_feature(path, i + 1, &table.header[c], &rec[c])?;
        }
        for (a, &c) in label_idx.iter().enumerate() {
            y[(i, a)] = parse_label(path, i + 1, &table.header[c], &rec[c])?;
        }
    }
    Dataset::new(
        x,
        y,
        feature_idx.iter().map(|&c| table.header[c].clone()).collect(),
        labels.to_vec(),
    )
}

/// Load a feature-only CSV (e.g. for prediction), selecting `columns` by name.
pub fn load_features(path: &Path, columns: &[String]) -> Result<DMatrix<f64>> {
    let table = read_table(path)?;
    let idx: Vec<usize> = columns
        .iter()
        .map(|name| {
            table
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| invalid(format!("feature column '{name}' not found in {}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut x = DMatrix::zeros(table.rows.len(), idx.len());
    for (i, rec) in table.rows.iter().enumerate() {
        for (a, &c) in idx.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            x[(i, a)] = parse_feature(path, i + 1, &table.header[c], cell)?;
        }
    }
    Ok(x)
}

/// Load only the named binary label columns.
pub fn load_labels(path: &Path, columns: &[String]) -> Result<DMatrix<u8>> {
    let table = read_table(path)?;
    let mut y = DMatrix::zeros(table.rows.len(), columns.len());
    for (a, name) in columns.iter().enumerate() {
        let c = table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(format!("label column '{name}' not found in {}", path.display())))?;
        for (i, rec) in table.rows.iter().enumerate() {
            y[(i, a)] = parse_label(path, i + 1, name, rec.get(c).unwrap_or(""))?;
        }
    }
    Ok(y)
}
