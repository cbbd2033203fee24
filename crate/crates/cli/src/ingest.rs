use std::path::Path;

use anyhow::{anyhow, bail, Result};

/// Values pulled from one CSV column expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub values: Vec<f64>,
    /// Data rows read, not counting the header.
    pub rows_read: usize,
    /// True when `max_rows` stopped reading before the end of the file.
    pub truncated: bool,
}

/// Splits `"A*B"` (or `"A×B"`) into its factor names.
pub fn column_factors(expr: &str) -> Result<Vec<String>> {
    let factors: Vec<String> = expr
        .split(['*', '×'])
        .map(|s| s.trim().to_string())
        .collect();
    if factors.iter().any(String::is_empty) {
        bail!("malformed column expression {expr:?}");
    }
    Ok(factors)
}

/// First `max_rows` values of `column` in file order. Every cell must parse
/// as a finite number.
pub fn ingest_csv(path: &Path, column: &str, max_rows: Option<usize>) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| anyhow!("cannot open {}: {e}", path.display()))?;
    ingest_reader(file, column, max_rows)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, column: &str, max_rows: Option<usize>) -> Result<Ingested> {
    let factors = column_factors(column)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = factors
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| anyhow!("column {name:?} not found in header"))
        })
        .collect::<Result<_>>()?;
    let limit = max_rows.unwrap_or(usize::MAX);
    let mut values = Vec::new();
    let mut truncated = false;
    for (row, record) in rdr.records().enumerate() {
        if values.len() == limit {
            truncated = true;
            break;
        }
        let record = record.map_err(|e| anyhow!("row {}: {e}", row + 1))?;
        let mut v = 1.0;
        for (&i, name) in idx.iter().zip(&factors) {
            let cell = record.get(i).unwrap_or("");
            let x: f64 = cell
                .parse()
                .map_err(|_| anyhow!("row {}: column {name:?} holds {cell:?}, not a number", row + 1))?;
            v *= x;
        }
        if !v.is_finite() {
            bail!("row {}: value {v} is not finite", row + 1);
        }
        values.push(v);
    }
    if values.is_empty() {
        bail!("no usable rows");
    }
    let rows_read = values.len();
    Ok(Ingested { values, rows_read, truncated })
}
