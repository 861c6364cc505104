use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Expected header of a stability series file.
pub const STABILITY_HEADER: [&str; 5] = ["t", "q_mu", "q_nu", "xi_mu", "xi_nu"];

const COLUMNS: [&str; 4] = ["q_mu", "q_nu", "xi_mu", "xi_nu"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("expected header `{}`, found `{found}`", STABILITY_HEADER.join(","))]
    Header { found: String },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("row {row}: {column} = {value} lies outside [0, 1]")]
    OutOfRange {
        row: usize,
        column: &'static str,
        value: f64,
    },
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One accumulation interval of a measured USD run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: f64,
    pub q_mu: f64,
    pub q_nu: f64,
    pub xi_mu: f64,
    pub xi_nu: f64,
}

impl StabilityRow {
    fn values(&self) -> [f64; 4] {
        [self.q_mu, self.q_nu, self.xi_mu, self.xi_nu]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub mean: f64,
    /// Sample (n − 1) standard deviation.
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub rows: usize,
    pub duration: f64,
    pub columns: Vec<ColumnSummary>,
}

impl StabilitySummary {
    pub fn column(&self, name: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Names of columns whose standard deviation exceeds `threshold`.
    pub fn flagged(&self, threshold: f64) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.std_dev > threshold)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Parses a CSV stability series. Row numbers in errors count data rows from 1.
pub fn read_stability_csv<R: Read>(reader: R) -> Result<Vec<StabilityRow>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(STABILITY_HEADER.iter().copied()) {
        return Err(IngestError::Header {
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, rec)| {
            rec.map_err(|e| IngestError::Malformed {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Per-column mean and sample standard deviation of a stability series.
pub fn ingest_stability_series(rows: &[StabilityRow]) -> Result<StabilitySummary, IngestError> {
    for (i, r) in rows.iter().enumerate() {
        if !r.t.is_finite() {
            return Err(IngestError::Malformed {
                row: i + 1,
                message: format!("time {} is not finite", r.t),
            });
        }
        for (column, value) in COLUMNS.into_iter().zip(r.values()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(IngestError::OutOfRange { row: i + 1, column, value });
            }
        }
    }
    if rows.len() < 2 {
        return Err(IngestError::TooFewRows(rows.len()));
    }

    let n = rows.len() as f64;
    let columns = COLUMNS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            // shifted by the first sample for accuracy on near-constant series
            let shift = rows[0].values()[k];
            let d: Vec<f64> = rows.iter().map(|r| r.values()[k] - shift).collect();
            let d_mean = d.iter().sum::<f64>() / n;
            let ss = d.iter().map(|x| (x - d_mean).powi(2)).sum::<f64>();
            ColumnSummary {
                name: (*name).to_string(),
                mean: shift + d_mean,
                std_dev: (ss / (n - 1.0)).sqrt(),
            }
        })
        .collect();
    Ok(StabilitySummary {
        rows: rows.len(),
        duration: rows[rows.len() - 1].t - rows[0].t,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, v: [f64; 4]) -> StabilityRow {
        StabilityRow {
            t,
            q_mu: v[0],
            q_nu: v[1],
            xi_mu: v[2],
            xi_nu: v[3],
        }
    }

    #[test]
    fn constant_series_has_zero_spread() {
        let rows: Vec<_> = (0..10).map(|t| row(t as f64, [1.18e-3, 1.16e-3, 0.969, 0.9837])).collect();
        let s = ingest_stability_series(&rows).unwrap();
        assert!(s.columns.iter().all(|c| c.std_dev == 0.0));
        assert_eq!(s.column("xi_mu").unwrap().mean, 0.969);
        assert_eq!(s.duration, 9.0);
        assert!(s.flagged(0.0).is_empty());
    }

    #[test]
    fn two_point_sample_std() {
        let rows = [row(0.0, [0.1, 0.2, 0.3, 0.4]), row(1.0, [0.3, 0.2, 0.3, 0.5])];
        let s = ingest_stability_series(&rows).unwrap();
        // |a - b| / sqrt(2)
        assert!((s.column("q_mu").unwrap().std_dev - 0.2 / 2f64.sqrt()).abs() < 1e-15);
        assert!((s.column("xi_nu").unwrap().std_dev - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.flagged(0.1), vec!["q_mu"]);
    }

    #[test]
    fn rejects_short_and_out_of_range_series() {
        assert!(matches!(
            ingest_stability_series(&[row(0.0, [0.1; 4])]),
            Err(IngestError::TooFewRows(1))
        ));
        let bad = [row(0.0, [0.1; 4]), row(1.0, [0.1, 0.1, 1.2, 0.1])];
        match ingest_stability_series(&bad) {
            Err(IngestError::OutOfRange { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "xi_mu");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_parsing() {
        let text = "t,q_mu,q_nu,xi_mu,xi_nu\n0,0.00118,0.00116,0.969,0.9837\n1,0.00119,0.00115,0.97,0.98\n";
        let rows = read_stability_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].xi_nu, 0.98);

        let wrong_header = "time,q_mu,q_nu,xi_mu,xi_nu\n";
        assert!(matches!(
            read_stability_csv(wrong_header.as_bytes()),
            Err(IngestError::Header { .. })
        ));

        let malformed = "t,q_mu,q_nu,xi_mu,xi_nu\n0,0.1,0.1,0.1,0.1\n1,abc,0.1,0.1,0.1\n";
        match read_stability_csv(malformed.as_bytes()) {
            Err(IngestError::Malformed { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
