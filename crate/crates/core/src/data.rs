//! Balanced longitudinal panels and long-format CSV ingestion.
//!
//! A panel holds `n` subjects observed at the same `T` occasions. Outcomes and
//! every covariate are stored as `n × T` matrices; time-invariant covariates are
//! simply constant along each row.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` has non-numeric value {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: duplicate observation for subject `{subject}` at time `{time}`")]
    DuplicateObservation {
        row: usize,
        subject: String,
        time: String,
    },
    #[error("subject `{subject}` has no observation at time `{time}`")]
    MissingCell { subject: String, time: String },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether outcomes are continuous (identity link) or binary (logit link).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

/// Balanced panel of outcomes and covariate trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    subject_ids: Vec<String>,
    time_labels: Vec<String>,
    outcomes: DMatrix<f64>,
    covariates: Vec<DMatrix<f64>>,
    covariate_names: Vec<String>,
}

impl LongitudinalDataset {
    /// Builds a panel from `n × T` matrices. Subject ids and time labels
    /// default to `1..=n` and `1..=T`.
    pub fn new(
        outcomes: DMatrix<f64>,
        covariates: Vec<DMatrix<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let (n, t) = outcomes.shape();
        let subject_ids = (1..=n).map(|i| i.to_string()).collect();
        let time_labels = (1..=t).map(|s| s.to_string()).collect();
        Self::with_labels(
            subject_ids,
            time_labels,
            outcomes,
            covariates,
            covariate_names,
        )
    }

    pub fn with_labels(
        subject_ids: Vec<String>,
        time_labels: Vec<String>,
        outcomes: DMatrix<f64>,
        covariates: Vec<DMatrix<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let (n, t) = outcomes.shape();
        if n == 0 || t == 0 {
            return Err(DataError::EmptyInput);
        }
        if subject_ids.len() != n || time_labels.len() != t {
            return Err(DataError::Shape(format!(
                "{} subject ids and {} time labels for a {n}×{t} outcome matrix",
                subject_ids.len(),
                time_labels.len()
            )));
        }
        if covariates.len() != covariate_names.len() {
            return Err(DataError::Shape(format!(
                "{} covariate matrices but {} names",
                covariates.len(),
                covariate_names.len()
            )));
        }
        if let Some((name, m)) = covariate_names
            .iter()
            .zip(&covariates)
            .find(|(_, m)| m.shape() != (n, t))
        {
            return Err(DataError::Shape(format!(
                "covariate `{name}` is {}×{}, expected {n}×{t}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self {
            subject_ids,
            time_labels,
            outcomes,
            covariates,
            covariate_names,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.outcomes.nrows()
    }

    pub fn n_times(&self) -> usize {
        self.outcomes.ncols()
    }

    pub fn outcomes(&self) -> &DMatrix<f64> {
        &self.outcomes
    }

    pub fn covariates(&self) -> &[DMatrix<f64>] {
        &self.covariates
    }

    pub fn covariate(&self, j: usize) -> &DMatrix<f64> {
        &self.covariates[j]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    /// Keeps only the named covariates, in the given order.
    pub fn select_covariates(&self, names: &[String]) -> Result<Self, DataError> {
        let mut covariates = Vec::with_capacity(names.len());
        for name in names {
            let j = self
                .covariate_index(name)
                .ok_or_else(|| DataError::MissingColumn(name.clone()))?;
            covariates.push(self.covariates[j].clone());
        }
        Ok(Self {
            covariates,
            covariate_names: names.to_vec(),
            ..self.clone()
        })
    }
}

/// Column bindings for long-format CSV input.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub id: String,
    pub time: String,
    pub outcome: String,
    /// `None` takes every remaining column as a covariate, in header order.
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            outcome: "y".into(),
            covariates: None,
        }
    }
}

/// Labels sort numerically when every label parses as a number, otherwise
/// lexically.
fn label_order(labels: &[&str]) -> impl Fn(&&str, &&str) -> Ordering {
    let numeric = labels.iter().all(|l| l.trim().parse::<f64>().is_ok());
    move |a: &&str, b: &&str| {
        if numeric {
            let (x, y) = (
                a.trim().parse::<f64>().unwrap(),
                b.trim().parse::<f64>().unwrap(),
            );
            x.partial_cmp(&y)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.cmp(b))
        } else {
            a.cmp(b)
        }
    }
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<f64, DataError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DataError::NonNumeric {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

/// Reads a long-format CSV (one row per subject-occasion) into a balanced panel
/// sorted by subject and time. Row numbers in errors count the header as row 1.
pub fn load_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<LongitudinalDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let time_col = find(&schema.time)?;
    let y_col = find(&schema.outcome)?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(names) => names.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(k, _)| ![id_col, time_col, y_col].contains(k))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_cols = cov_names
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;

    // subject -> time label -> values (y, covariates...)
    let mut cells: HashMap<String, BTreeMap<String, Vec<f64>>> = HashMap::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::Malformed {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let subject = record[id_col].trim().to_string();
        let time = record[time_col].trim().to_string();
        let mut values = Vec::with_capacity(1 + cov_cols.len());
        values.push(parse_value(&record[y_col], row, &schema.outcome)?);
        for (c, name) in cov_cols.iter().zip(&cov_names) {
            values.push(parse_value(&record[*c], row, name)?);
        }
        let by_time = cells.entry(subject.clone()).or_default();
        if by_time.insert(time.clone(), values).is_some() {
            return Err(DataError::DuplicateObservation { row, subject, time });
        }
    }
    if cells.is_empty() {
        return Err(DataError::EmptyInput);
    }

    let subject_refs: Vec<&str> = cells.keys().map(String::as_str).collect();
    let mut subjects = subject_refs.clone();
    subjects.sort_by(label_order(&subject_refs));

    // The union of time labels defines the occasions; every subject must have all of them.
    let mut all_times: Vec<&str> = cells
        .values()
        .flat_map(|m| m.keys().map(String::as_str))
        .collect();
    all_times.sort_unstable();
    all_times.dedup();
    let time_refs = all_times.clone();
    all_times.sort_by(label_order(&time_refs));

    let (n, t) = (subjects.len(), all_times.len());
    let mut outcomes = DMatrix::zeros(n, t);
    let mut covariates = vec![DMatrix::zeros(n, t); cov_names.len()];
    for (i, subject) in subjects.iter().enumerate() {
        let by_time = &cells[*subject];
        for (s, time) in all_times.iter().enumerate() {
            let values = by_time.get(*time).ok_or_else(|| DataError::MissingCell {
                subject: subject.to_string(),
                time: time.to_string(),
            })?;
            outcomes[(i, s)] = values[0];
            for (j, cov) in covariates.iter_mut().enumerate() {
                cov[(i, s)] = values[j + 1];
            }
        }
    }
    LongitudinalDataset::with_labels(
        subjects.iter().map(|s| s.to_string()).collect(),
        all_times.iter().map(|s| s.to_string()).collect(),
        outcomes,
        covariates,
        cov_names,
    )
}

/// Writes the panel in the long format accepted by [`load_csv`] with the
/// default schema. Values use the shortest representation that parses back to
/// the same `f64`.
pub fn emit_csv<W: Write>(ds: &LongitudinalDataset, sink: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["id".to_string(), "time".to_string(), "y".to_string()];
    header.extend(ds.covariate_names.iter().cloned());
    writer.write_record(&header)?;
    for i in 0..ds.n_subjects() {
        for t in 0..ds.n_times() {
            let mut record = vec![
                ds.subject_ids[i].clone(),
                ds.time_labels[t].clone(),
                ds.outcomes[(i, t)].to_string(),
            ];
            record.extend(ds.covariates.iter().map(|c| c[(i, t)].to_string()));
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewTimes(usize),
    NonBinaryOutcome {
        subject: String,
        time: String,
        value: f64,
    },
    NonFinite {
        column: String,
        subject: String,
        time: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewTimes(t) => write!(f, "T must be ≥ 2 (found {t})"),
            Violation::NonBinaryOutcome {
                subject,
                time,
                value,
            } => {
                write!(
                    f,
                    "non-binary outcome {value} for subject `{subject}` at `{time}`"
                )
            }
            Violation::NonFinite {
                column,
                subject,
                time,
            } => {
                write!(
                    f,
                    "non-finite `{column}` for subject `{subject}` at `{time}`"
                )
            }
        }
    }
}

/// Lists every violation of the panel invariants for the given outcome kind.
pub fn validate(ds: &LongitudinalDataset, kind: OutcomeKind) -> Vec<Violation> {
    let mut out = Vec::new();
    if ds.n_times() < 2 {
        out.push(Violation::TooFewTimes(ds.n_times()));
    }
    let columns = std::iter::once(("y", &ds.outcomes)).chain(
        ds.covariate_names
            .iter()
            .map(String::as_str)
            .zip(ds.covariates.iter()),
    );
    for (name, m) in columns {
        for i in 0..ds.n_subjects() {
            for t in 0..ds.n_times() {
                if !m[(i, t)].is_finite() {
                    out.push(Violation::NonFinite {
                        column: name.to_string(),
                        subject: ds.subject_ids[i].clone(),
                        time: ds.time_labels[t].clone(),
                    });
                }
            }
        }
    }
    if kind == OutcomeKind::Binary {
        for i in 0..ds.n_subjects() {
            for t in 0..ds.n_times() {
                let v = ds.outcomes[(i, t)];
                if v.is_finite() && v != 0.0 && v != 1.0 {
                    out.push(Violation::NonBinaryOutcome {
                        subject: ds.subject_ids[i].clone(),
                        time: ds.time_labels[t].clone(),
                        value: v,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load(text: &str) -> Result<LongitudinalDataset, DataError> {
        load_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn minimal_panel() {
        let ds = load("id,time,y,x\n1,1,0.5,1\n1,2,1.5,2\n2,1,2,3\n2,2,3,4\n").unwrap();
        assert_eq!((ds.n_subjects(), ds.n_times()), (2, 2));
        assert_eq!(ds.covariate_names(), ["x"]);
        assert_eq!(ds.outcomes()[(1, 0)], 2.0);
        assert_eq!(ds.covariate(0)[(0, 1)], 2.0);
    }

    #[test]
    fn missing_time_point() {
        let err = load("id,time,y,x\n1,1,0,1\n1,2,1,2\n2,1,2,3\n").unwrap_err();
        assert!(
            matches!(err, DataError::MissingCell { ref subject, ref time } if subject == "2" && time == "2")
        );
    }

    #[test]
    fn non_numeric_names_row() {
        let err = load("id,time,y,x\n1,1,abc,1\n").unwrap_err();
        assert!(matches!(err, DataError::NonNumeric { row: 2, .. }));
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn duplicate_and_empty() {
        let err = load("id,time,y\n1,1,0\n1,1,1\n").unwrap_err();
        assert!(matches!(
            err,
            DataError::DuplicateObservation { row: 3, .. }
        ));
        assert!(matches!(
            load("id,time,y\n").unwrap_err(),
            DataError::EmptyInput
        ));
        assert!(matches!(
            load("id,t,y\n1,1,1\n").unwrap_err(),
            DataError::MissingColumn(_)
        ));
    }

    #[test]
    fn wave_labels_are_ranked() {
        let ds = load("id,time,y\nb,w2,4\na,w1,1\nb,w1,3\na,w2,2\n").unwrap();
        assert_eq!(ds.subject_ids(), ["a", "b"]);
        assert_eq!(ds.time_labels(), ["w1", "w2"]);
        assert_eq!(ds.outcomes()[(1, 1)], 4.0);
        // numeric labels sort by value, not lexically
        let ds = load("id,time,y\n10,10,1\n10,9,2\n2,9,3\n2,10,4\n").unwrap();
        assert_eq!(ds.subject_ids(), ["2", "10"]);
        assert_eq!(ds.time_labels(), ["9", "10"]);
    }

    #[test]
    fn validation_collects_everything() {
        let ds = load("id,time,y\n1,1,0\n1,2,1\n").unwrap();
        assert!(validate(&ds, OutcomeKind::Continuous).is_empty());
        assert!(validate(&ds, OutcomeKind::Binary).is_empty());

        let ds = load("id,time,y\n1,1,2\n1,2,1\n2,1,0.5\n2,2,0\n").unwrap();
        let v = validate(&ds, OutcomeKind::Binary);
        assert_eq!(v.len(), 2);
        assert!(v[0].to_string().contains("non-binary outcome"));

        let ds = load("id,time,y\n1,1,2\n2,1,0\n").unwrap();
        let v = validate(&ds, OutcomeKind::Binary);
        assert!(v.iter().any(|x| x.to_string().contains("T must be ≥ 2")));
        assert_eq!(v.len(), 2);
    }

    fn arb_dataset() -> impl Strategy<Value = LongitudinalDataset> {
        (1usize..6, 2usize..5, 0usize..3).prop_flat_map(|(n, t, k)| {
            let cells = n * t * (k + 1);
            prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, cells).prop_map(
                move |v| {
                    let y = DMatrix::from_row_slice(n, t, &v[..n * t]);
                    let covs = (0..k)
                        .map(|j| {
                            DMatrix::from_row_slice(n, t, &v[(j + 1) * n * t..(j + 2) * n * t])
                        })
                        .collect();
                    let names = (0..k).map(|j| format!("x{j}")).collect();
                    LongitudinalDataset::new(y, covs, names).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn emit_then_load_is_identity(ds in arb_dataset()) {
            let mut buf = Vec::new();
            emit_csv(&ds, &mut buf).unwrap();
            let back = load_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn row_order_is_irrelevant(ds in arb_dataset(), seed in any::<u64>()) {
            let mut buf = Vec::new();
            emit_csv(&ds, &mut buf).unwrap();
            let text = String::from_utf8(buf).unwrap();
            let mut lines: Vec<&str> = text.lines().collect();
            let header = lines.remove(0);
            // deterministic shuffle
            let mut state = seed | 1;
            for i in (1..lines.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                lines.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let shuffled = std::iter::once(header).chain(lines).collect::<Vec<_>>().join("\n");
            let back = load_csv(shuffled.as_bytes(), &CsvSchema::default()).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
