use std::path::Path;

use mte_core::Sample64;

use crate::run::CliError;

/// Names of the outcome, treatment and covariate columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub y: String,
    pub d: String,
    pub x: Vec<String>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::Input(format!("column '{name}' not found in header")))
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("row {row}, column '{column}': '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Input(format!("row {row}, column '{column}': non-finite value '{field}'")));
    }
    Ok(v)
}

fn parse_indicator(field: &str, row: usize, column: &str) -> Result<bool, CliError> {
    let f = field.trim();
    if f == "1" || f.eq_ignore_ascii_case("true") {
        Ok(true)
    } else if f == "0" || f.eq_ignore_ascii_case("false") {
        Ok(false)
    } else {
        Err(CliError::Input(format!("row {row}, column '{column}': '{field}' is not 0/1 or true/false")))
    }
}

/// Reads a headered CSV into a sample. Rows are numbered from 1 after the
/// header in error messages.
pub fn load_csv(path: &Path, columns: &ColumnMap) -> Result<Sample64, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::from_csv(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::from_csv(path, e))?.clone();
    let yi = column_index(&headers, &columns.y)?;
    let di = column_index(&headers, &columns.d)?;
    let xi: Vec<usize> = columns.x.iter().map(|c| column_index(&headers, c)).collect::<Result<_, _>>()?;

    let (mut y, mut d, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::from_csv(path, e))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        y.push(parse_number(field(yi), row, &columns.y)?);
        d.push(parse_indicator(field(di), row, &columns.d)?);
        for (&j, name) in xi.iter().zip(&columns.x) {
            x.push(parse_number(field(j), row, name)?);
        }
    }
    if y.is_empty() {
        return Err(CliError::Input(format!("{} has no data rows", path.display())));
    }
    Ok(Sample64::new(y, d, x, columns.x.len())?)
}
