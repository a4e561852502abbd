//! Deterministic report writers shared by the commands.
//!
//! All tabular outputs go through the `csv` crate with default quoting;
//! floats are written with Rust's shortest round-trip formatting so reruns
//! are byte-identical and values parse back exactly.

use std::path::Path;

use rfm_core::{EcdfCurve, Error, Result};
use serde::Serialize;

/// Maps a `csv` crate failure onto the crate-wide error type, attributing
/// parse-ish failures to `path`.
pub fn csv_error(path: &Path, e: csv::Error) -> Error {
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        _ => Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message,
        },
    }
}

/// Opens a CSV writer at `path`.
///
/// # Errors
/// Returns [`Error::Io`] when the file cannot be created.
pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

/// Writes one record, converting errors.
///
/// # Errors
/// Returns [`Error::Io`] when the write fails.
pub fn write_record<W, I, F>(writer: &mut csv::Writer<W>, path: &Path, fields: I) -> Result<()>
where
    W: std::io::Write,
    I: IntoIterator<Item = F>,
    F: AsRef<[u8]>,
{
    writer.write_record(fields).map_err(|e| csv_error(path, e))
}

/// Finalizes a CSV file.
///
/// # Errors
/// Returns [`Error::Io`] when flushing fails.
pub fn finish_csv<W: std::io::Write>(mut writer: csv::Writer<W>) -> Result<()> {
    writer.flush().map_err(Error::from)
}

/// Shortest round-trip decimal form of a float.
#[must_use]
pub fn fmt_f64(value: f64) -> String {
    format!("{value}")
}

/// Optional float as a CSV cell (empty when absent).
#[must_use]
pub fn fmt_opt_f64(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

/// Positioning quality summary serialized into `metrics.json`.
#[derive(Debug, Serialize)]
pub struct PositioningSummary {
    /// Mean error distance (meters).
    pub mean_error_m: f64,
    /// Median error distance (meters).
    pub median_error_m: f64,
    /// Fraction of queries within 1 m of the truth.
    pub accuracy_1m: f64,
    /// Fraction within 2 m.
    pub accuracy_2m: f64,
    /// Fraction within 3 m.
    pub accuracy_3m: f64,
    /// Fraction within 5 m.
    pub accuracy_5m: f64,
}

impl PositioningSummary {
    /// Summarizes a non-empty error sample.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when `errors` is empty or holds a
    /// negative/non-finite value.
    pub fn from_errors(errors: &[f64]) -> Result<PositioningSummary> {
        let curve = EcdfCurve::from_errors(errors)?;
        Ok(PositioningSummary {
            mean_error_m: curve.mean(),
            median_error_m: curve.quantile(0.5),
            accuracy_1m: curve.accuracy_at(1.0),
            accuracy_2m: curve.accuracy_at(2.0),
            accuracy_3m: curve.accuracy_at(3.0),
            accuracy_5m: curve.accuracy_at(5.0),
        })
    }
}

/// Writes an empirical CDF as `error_m,probability` rows, one per sample in
/// ascending error order.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for an empty/invalid sample and
/// [`Error::Io`] when the file cannot be written.
pub fn write_ecdf_csv(path: &Path, errors: &[f64]) -> Result<()> {
    let curve = EcdfCurve::from_errors(errors)?;
    let mut writer = csv_writer(path)?;
    write_record(&mut writer, path, ["error_m", "probability"])?;
    for (error, probability) in curve.points() {
        write_record(&mut writer, path, [fmt_f64(error), fmt_f64(probability)])?;
    }
    finish_csv(writer)
}

/// Euclidean distance between two planar points.
#[must_use]
pub fn distance_m(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_shortest_round_trip() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(-110.0), "-110");
        assert_eq!(fmt_opt_f64(None), "");
    }

    #[test]
    fn ecdf_rows_step_to_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ecdf.csv");
        write_ecdf_csv(&path, &[3.0, 1.0, 2.0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            [
                "error_m,probability",
                "1,0.3333333333333333",
                "2,0.6666666666666666",
                "3,1",
            ]
        );
    }

    #[test]
    fn summaries_match_the_curve() {
        let s = PositioningSummary::from_errors(&[0.5, 1.5, 2.5, 4.0]).unwrap();
        assert_eq!(s.accuracy_2m, 0.5);
        assert_eq!(s.accuracy_5m, 1.0);
        assert_eq!(s.mean_error_m, 2.125);
    }
}
