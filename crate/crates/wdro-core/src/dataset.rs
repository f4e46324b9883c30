//! CSV ingestion and the typed sample container shared by all fitting and
//! inference routines.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("missing column {name:?}")]
    MissingColumn { name: String },
    #[error("non-numeric cell at row {row}, column {column:?}: {cell:?}")]
    NonNumericCell { row: usize, column: String, cell: String },
    #[error("schema violation at row {row}, column {column:?}: {message}")]
    SchemaViolation { row: usize, column: String, message: String },
    #[error("dataset is empty")]
    Empty,
}

/// A loaded sample: feature matrix plus optional response / sensitive
/// attribute / label columns. Rows are observations.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub response: Option<DVector<f64>>,
    pub response_name: Option<String>,
    /// Sensitive attribute, constrained to {0, 1}.
    pub attribute: Option<Vec<u8>>,
    pub attribute_name: Option<String>,
    /// Outcome label, constrained to {0, 1}.
    pub label: Option<Vec<u8>>,
    pub label_name: Option<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Builds a dataset from an in-memory feature matrix and response.
    pub fn from_parts(features: DMatrix<f64>, response: Option<DVector<f64>>) -> Self {
        let d = features.ncols();
        Dataset {
            feature_names: (0..d).map(|i| format!("x{i}")).collect(),
            features,
            response_name: response.as_ref().map(|_| "y".to_string()),
            response,
            attribute: None,
            attribute_name: None,
            label: None,
            label_name: None,
        }
    }

    /// Rows as (feature, response) vectors of length d+1, the layout the
    /// regression model consumes.
    pub fn regression_rows(&self) -> Option<Vec<DVector<f64>>> {
        let y = self.response.as_ref()?;
        let d = self.dim();
        Some(
            (0..self.n())
                .map(|i| {
                    let mut v = DVector::zeros(d + 1);
                    for j in 0..d {
                        v[j] = self.features[(i, j)];
                    }
                    v[d] = y[i];
                    v
                })
                .collect(),
        )
    }

    /// Rows as plain feature vectors.
    pub fn feature_rows(&self) -> Vec<DVector<f64>> {
        (0..self.n()).map(|i| self.features.row(i).transpose()).collect()
    }
}

/// Declares which columns play which roles when loading a CSV file.
#[derive(Debug, Clone, Default)]
pub struct SchemaFlags {
    pub response: Option<String>,
    pub attribute: Option<String>,
    pub label: Option<String>,
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64, DataError> {
    let v: f64 = raw.trim().parse().map_err(|_| DataError::NonNumericCell {
        row,
        column: column.to_string(),
        cell: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DataError::NonNumericCell {
            row,
            column: column.to_string(),
            cell: raw.to_string(),
        });
    }
    Ok(v)
}

fn parse_binary(raw: &str, row: usize, column: &str) -> Result<u8, DataError> {
    let v = parse_cell(raw, row, column)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(DataError::SchemaViolation {
            row,
            column: column.to_string(),
            message: format!("expected 0 or 1, got {raw}"),
        })
    }
}

/// Loads a comma-separated file with a header row into a [`Dataset`].
/// Columns named in `schema` take the declared roles; all remaining
/// columns become features, in file order.
pub fn load_dataset(path: &Path, schema: &SchemaFlags) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => DataError::ParseError { row: 0, message: e.to_string() },
        })?;
    let headers: Vec<String> =
        reader
            .headers()
            .map_err(|e| DataError::ParseError { row: 0, message: e.to_string() })?
            .iter()
            .map(|s| s.to_string())
            .collect();

    let find = |name: &Option<String>| -> Result<Option<usize>, DataError> {
        match name {
            None => Ok(None),
            Some(n) => headers
                .iter()
                .position(|h| h == n)
                .map(Some)
                .ok_or_else(|| DataError::MissingColumn { name: n.clone() }),
        }
    };
    let resp_idx = find(&schema.response)?;
    let attr_idx = find(&schema.attribute)?;
    let label_idx = find(&schema.label)?;
    let special: Vec<usize> = [resp_idx, attr_idx, label_idx].iter().flatten().copied().collect();
    let feature_idx: Vec<usize> =
        (0..headers.len()).filter(|i| !special.contains(i)).collect();

    let mut features: Vec<f64> = Vec::new();
    let mut response: Vec<f64> = Vec::new();
    let mut attribute: Vec<u8> = Vec::new();
    let mut label: Vec<u8> = Vec::new();
    let mut n = 0usize;
    for (row_i, record) in reader.records().enumerate() {
        let row = row_i + 2; // 1-based with header
        let record = record.map_err(|e| DataError::ParseError { row, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(DataError::ParseError {
                row,
                message: format!("expected {} cells, got {}", headers.len(), record.len()),
            });
        }
        for &j in &feature_idx {
            features.push(parse_cell(&record[j], row, &headers[j])?);
        }
        if let Some(j) = resp_idx {
            response.push(parse_cell(&record[j], row, &headers[j])?);
        }
        if let Some(j) = attr_idx {
            attribute.push(parse_binary(&record[j], row, &headers[j])?);
        }
        if let Some(j) = label_idx {
            label.push(parse_binary(&record[j], row, &headers[j])?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(DataError::Empty);
    }
    let d = feature_idx.len();
    Ok(Dataset {
        features: DMatrix::from_row_slice(n, d, &features),
        feature_names: feature_idx.iter().map(|&j| headers[j].clone()).collect(),
        response: resp_idx.map(|_| DVector::from_vec(response)),
        response_name: resp_idx.map(|j| headers[j].clone()),
        attribute: attr_idx.map(|_| attribute),
        attribute_name: attr_idx.map(|j| headers[j].clone()),
        label: label_idx.map(|_| label),
        label_name: label_idx.map(|j| headers[j].clone()),
    })
}

/// Top-level JSON report emitted by every CLI command.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub rng_family: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub output: serde_json::Value,
    /// Omitted on seeded runs so that repeated invocations are
    /// byte-identical; wall time goes to standard error instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_toy_file_with_response() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let ds = load_dataset(
            f.path(),
            &SchemaFlags { response: Some("y".into()), ..Default::default() },
        )
        .unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(ds.response.as_ref().unwrap()[2], 9.0);
        let rows = ds.regression_rows().unwrap();
        assert_eq!(rows[1].as_slice(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn blank_cell_is_rejected_with_location() {
        let f = write_tmp("a,y\n1,2\n,4\n");
        let err = load_dataset(
            f.path(),
            &SchemaFlags { response: Some("y".into()), ..Default::default() },
        )
        .unwrap_err();
        match err {
            DataError::NonNumericCell { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("expected NonNumericCell, got {other:?}"),
        }
    }

    #[test]
    fn attribute_outside_binary_is_schema_violation() {
        let f = write_tmp("a,attr,y\n1,0,2\n1,2,3\n");
        let err = load_dataset(
            f.path(),
            &SchemaFlags {
                response: Some("y".into()),
                attribute: Some("attr".into()),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, DataError::SchemaViolation { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn missing_column_is_reported() {
        let f = write_tmp("a,y\n1,2\n");
        let err = load_dataset(
            f.path(),
            &SchemaFlags { response: Some("z".into()), ..Default::default() },
        )
        .unwrap_err();
        assert!(matches!(err, DataError::MissingColumn { .. }));
    }

    #[test]
    fn run_report_round_trips() {
        let report = RunReport {
            command: "risk".into(),
            version: "0.1.0".into(),
            rng_family: crate::rng::RNG_FAMILY.into(),
            seed: Some(42),
            config: serde_json::json!({"delta": 0.1}),
            output: serde_json::json!({"value": 1.25}),
            wall_time_seconds: None,
        };
        let s = serde_json::to_string(&report).unwrap();
        assert!(!s.contains("wall_time_seconds"));
        let back: RunReport = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }
}
