//! Dataset ingest and export.
//!
//! Two CSV layouts are supported:
//!
//! * **wide** — one row per survey point, one column per feature. The file
//!   must declare its missing sentinel up front (`# missing=<value>`); empty
//!   cells and cells equal to the sentinel are absent features. Reserved
//!   columns: `x`, `y` (required), `block`, `timestamp` (optional). Every
//!   other column is a feature, and the column order fixes the registry
//!   order.
//! * **long** — one row per reading: `sample_id,x,y,feature,value` with
//!   optional `block` and `timestamp` columns. The sentinel comment is
//!   optional here (default -110); sample order and feature order follow
//!   first appearance.
//!
//! Feature ids are canonicalized (trimmed, lowercased) on the way in, and
//! values are clamped into the valid RSS range with a count of how many
//! needed it; values at or below the missing indicator after clamping are
//! treated as absent.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fingerprint::{
    FeatureId, Fingerprint, GlobalFeatureRegistry, LabeledFingerprint, MISSING_DBM, RSS_MAX_DBM,
    RSS_MIN_DBM,
};

/// Which CSV layout to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// One row per point, one column per feature.
    Wide,
    /// One row per reading.
    Long,
    /// Decide from the header: `feature` and `value` columns mean long.
    Auto,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(raw: &str) -> Result<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "wide" => Ok(DatasetFormat::Wide),
            "long" => Ok(DatasetFormat::Long),
            "auto" => Ok(DatasetFormat::Auto),
            other => Err(Error::invalid(format!(
                "unknown dataset format {other:?} (expected wide, long, or auto)"
            ))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Wide => "wide",
            DatasetFormat::Long => "long",
            DatasetFormat::Auto => "auto",
        })
    }
}

/// A parsed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestResult {
    /// The labeled fingerprints in file order.
    pub points: Vec<LabeledFingerprint>,
    /// Feature registry in column (wide) or first-seen (long) order.
    pub registry: GlobalFeatureRegistry,
    /// Number of values that had to be clamped into the valid range.
    pub clamped_values: usize,
}

/// The lines consumed before the CSV body, and what they declared.
struct Preamble<'a> {
    sentinel: Option<f64>,
    skipped_lines: u64,
    body: &'a str,
}

fn scan_preamble<'a>(text: &'a str, path: &str) -> Result<Preamble<'a>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut sentinel = None;
    let mut skipped_lines = 0u64;
    let mut rest = text;
    loop {
        let line_end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        let line = rest[..line_end].trim_end_matches(['\n', '\r']);
        let trimmed = line.trim();
        if trimmed.is_empty() && line_end < rest.len() {
            skipped_lines += 1;
            rest = &rest[line_end..];
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(raw) = comment.trim().strip_prefix("missing=") {
                let value: f64 = raw.trim().parse().map_err(|_| {
                    Error::parse(
                        path,
                        skipped_lines + 1,
                        format!("invalid missing sentinel {raw:?}"),
                    )
                })?;
                if sentinel.replace(value).is_some() {
                    return Err(Error::parse(
                        path,
                        skipped_lines + 1,
                        "duplicate missing sentinel declaration",
                    ));
                }
            }
            skipped_lines += 1;
            rest = &rest[line_end..];
            continue;
        }
        break;
    }
    Ok(Preamble {
        sentinel,
        skipped_lines,
        body: rest,
    })
}

/// Canonical lowercase form of a header cell, for reserved-name matching.
fn canonical_header(raw: &str) -> String {
    raw.trim().to_lowercase()
}

fn parse_float(raw: &str, path: &str, line: u64, what: &str) -> Result<f64> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} {raw:?}")))?;
    if !value.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite {what} {raw:?}")));
    }
    Ok(value)
}

/// Clamps a reading into the valid range, counting alterations; values at or
/// below the missing indicator are absent.
fn clean_value(raw: f64, clamped: &mut usize) -> Option<f64> {
    let value = raw.clamp(RSS_MIN_DBM, RSS_MAX_DBM);
    if value != raw {
        *clamped += 1;
    }
    (value > RSS_MIN_DBM).then_some(value)
}

/// Reads a dataset, detecting the layout if asked.
///
/// # Errors
/// Returns [`Error::Io`] when the file cannot be read and [`Error::Parse`]
/// (with the offending line) for malformed content.
pub fn read_fingerprints(path: &Path, format: DatasetFormat) -> Result<IngestResult> {
    let text = fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let preamble = scan_preamble(&text, &path_str)?;
    let format = match format {
        DatasetFormat::Auto => detect_format(&preamble, &path_str)?,
        fixed => fixed,
    };
    match format {
        DatasetFormat::Wide => read_wide(&preamble, &path_str),
        DatasetFormat::Long => read_long(&preamble, &path_str),
        DatasetFormat::Auto => unreachable!("resolved above"),
    }
}

fn detect_format(preamble: &Preamble<'_>, path: &str) -> Result<DatasetFormat> {
    let mut reader = csv::ReaderBuilder::new().from_reader(preamble.body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, preamble.skipped_lines + 1, e.to_string()))?;
    let names: Vec<String> = headers.iter().map(canonical_header).collect();
    let is_long = names.iter().any(|n| n == "feature") && names.iter().any(|n| n == "value");
    Ok(if is_long {
        DatasetFormat::Long
    } else {
        DatasetFormat::Wide
    })
}

/// Column roles of a wide header.
struct WideHeader {
    x: usize,
    y: usize,
    block: Option<usize>,
    timestamp: Option<usize>,
    /// `(column index, feature id)` in column order.
    features: Vec<(usize, FeatureId)>,
}

fn parse_wide_header(headers: &csv::StringRecord, path: &str, line: u64) -> Result<WideHeader> {
    let mut x = None;
    let mut y = None;
    let mut block = None;
    let mut timestamp = None;
    let mut features = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (index, raw) in headers.iter().enumerate() {
        let name = canonical_header(raw);
        if !seen.insert(name.clone()) {
            return Err(Error::parse(path, line, format!("duplicate column {name:?}")));
        }
        let slot = match name.as_str() {
            "x" => &mut x,
            "y" => &mut y,
            "block" => &mut block,
            "timestamp" => &mut timestamp,
            _ => {
                let feature = FeatureId::new(raw)
                    .map_err(|e| Error::parse(path, line, format!("bad feature column: {e}")))?;
                features.push((index, feature));
                continue;
            }
        };
        *slot = Some(index);
    }
    let x = x.ok_or_else(|| Error::parse(path, line, "missing required column \"x\""))?;
    let y = y.ok_or_else(|| Error::parse(path, line, "missing required column \"y\""))?;
    Ok(WideHeader {
        x,
        y,
        block,
        timestamp,
        features,
    })
}

fn parse_block(raw: &str, path: &str, line: u64) -> Result<Option<u32>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse()
        .map(Some)
        .map_err(|_| Error::parse(path, line, format!("invalid block {raw:?}")))
}

fn parse_timestamp(raw: &str, path: &str, line: u64) -> Result<Option<i64>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse()
        .map(Some)
        .map_err(|_| Error::parse(path, line, format!("invalid timestamp {raw:?}")))
}

fn read_wide(preamble: &Preamble<'_>, path: &str) -> Result<IngestResult> {
    let sentinel = preamble.sentinel.ok_or_else(|| {
        Error::parse(
            path,
            1,
            "wide datasets must declare their sentinel first (e.g. \"# missing=-110\")",
        )
    })?;
    let offset = preamble.skipped_lines;
    let mut reader = csv::ReaderBuilder::new().from_reader(preamble.body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, offset + 1, e.to_string()))?
        .clone();
    let header = parse_wide_header(&headers, path, offset + 1)?;
    let mut registry = GlobalFeatureRegistry::new();
    for (_, feature) in &header.features {
        registry.insert(feature.clone());
    }
    let mut points = Vec::new();
    let mut clamped_values = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, offset + 1, e.to_string()))?;
        let line = offset + record.position().map_or(0, csv::Position::line);
        let x = parse_float(&record[header.x], path, line, "x coordinate")?;
        let y = parse_float(&record[header.y], path, line, "y coordinate")?;
        let block = match header.block {
            Some(index) => parse_block(&record[index], path, line)?,
            None => None,
        };
        let timestamp = match header.timestamp {
            Some(index) => parse_timestamp(&record[index], path, line)?,
            None => None,
        };
        let mut fingerprint = Fingerprint::new();
        for (index, feature) in &header.features {
            let cell = record[*index].trim();
            if cell.is_empty() {
                continue;
            }
            let raw = parse_float(cell, path, line, "value")?;
            if raw == sentinel {
                continue;
            }
            if let Some(value) = clean_value(raw, &mut clamped_values) {
                fingerprint.insert(feature.clone(), value);
            }
        }
        let mut point = LabeledFingerprint::new([x, y], fingerprint);
        point.block = block;
        point.timestamp = timestamp;
        points.push(point);
    }
    Ok(IngestResult {
        points,
        registry,
        clamped_values,
    })
}

/// Column roles of a long header.
struct LongHeader {
    sample_id: usize,
    x: usize,
    y: usize,
    feature: usize,
    value: usize,
    block: Option<usize>,
    timestamp: Option<usize>,
}

fn parse_long_header(headers: &csv::StringRecord, path: &str, line: u64) -> Result<LongHeader> {
    let mut columns = std::collections::BTreeMap::new();
    for (index, raw) in headers.iter().enumerate() {
        let name = canonical_header(raw);
        if columns.insert(name.clone(), index).is_some() {
            return Err(Error::parse(path, line, format!("duplicate column {name:?}")));
        }
    }
    let required = |name: &str| {
        columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::parse(path, line, format!("missing required column {name:?}")))
    };
    Ok(LongHeader {
        sample_id: required("sample_id")?,
        x: required("x")?,
        y: required("y")?,
        feature: required("feature")?,
        value: required("value")?,
        block: columns.get("block").copied(),
        timestamp: columns.get("timestamp").copied(),
    })
}

fn read_long(preamble: &Preamble<'_>, path: &str) -> Result<IngestResult> {
    let sentinel = preamble.sentinel.unwrap_or(MISSING_DBM);
    let offset = preamble.skipped_lines;
    let mut reader = csv::ReaderBuilder::new().from_reader(preamble.body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, offset + 1, e.to_string()))?
        .clone();
    let header = parse_long_header(&headers, path, offset + 1)?;
    let mut registry = GlobalFeatureRegistry::new();
    let mut order: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    let mut points: Vec<LabeledFingerprint> = Vec::new();
    let mut clamped_values = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, offset + 1, e.to_string()))?;
        let line = offset + record.position().map_or(0, csv::Position::line);
        let sample_id = record[header.sample_id].trim().to_owned();
        if sample_id.is_empty() {
            return Err(Error::parse(path, line, "empty sample_id"));
        }
        let x = parse_float(&record[header.x], path, line, "x coordinate")?;
        let y = parse_float(&record[header.y], path, line, "y coordinate")?;
        let block = match header.block {
            Some(index) => parse_block(&record[index], path, line)?,
            None => None,
        };
        let timestamp = match header.timestamp {
            Some(index) => parse_timestamp(&record[index], path, line)?,
            None => None,
        };
        let point_index = match order.get(&sample_id) {
            Some(&index) => {
                let existing = &points[index];
                if existing.location != [x, y]
                    || existing.block != block
                    || existing.timestamp != timestamp
                {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("sample {sample_id:?} repeats with different coordinates or labels"),
                    ));
                }
                index
            }
            None => {
                let mut point = LabeledFingerprint::new([x, y], Fingerprint::new());
                point.block = block;
                point.timestamp = timestamp;
                points.push(point);
                order.insert(sample_id.clone(), points.len() - 1);
                points.len() - 1
            }
        };
        let feature = FeatureId::new(&record[header.feature])
            .map_err(|e| Error::parse(path, line, format!("bad feature: {e}")))?;
        let raw = parse_float(&record[header.value], path, line, "value")?;
        if points[point_index].fingerprint.contains(&feature) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate reading of {feature} for sample {sample_id:?}"),
            ));
        }
        registry.insert(feature.clone());
        if raw == sentinel {
            continue;
        }
        if let Some(value) = clean_value(raw, &mut clamped_values) {
            points[point_index].fingerprint.insert(feature, value);
        }
    }
    Ok(IngestResult {
        points,
        registry,
        clamped_values,
    })
}

/// Writes a wide CSV (sentinel comment, then `x,y,block,timestamp` and one
/// column per registry feature; absent features are empty cells).
///
/// # Errors
/// Returns [`Error::InvalidInput`] when a point carries a feature the
/// registry does not know, and [`Error::Io`] on write failures.
pub fn write_wide_csv(
    path: &Path,
    points: &[LabeledFingerprint],
    registry: &GlobalFeatureRegistry,
    missing_dbm: f64,
) -> Result<()> {
    for (index, point) in points.iter().enumerate() {
        for (feature, _) in point.fingerprint.iter() {
            if !registry.contains(feature) {
                return Err(Error::invalid(format!(
                    "point {index} carries feature {feature} outside the registry"
                )));
            }
        }
    }
    let mut text = format!("# missing={missing_dbm}\n");
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "x".to_owned(),
        "y".to_owned(),
        "block".to_owned(),
        "timestamp".to_owned(),
    ];
    header.extend(registry.iter().map(|f| f.as_str().to_owned()));
    writer
        .write_record(&header)
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    for point in points {
        let mut row = vec![
            point.location[0].to_string(),
            point.location[1].to_string(),
            point.block.map(|b| b.to_string()).unwrap_or_default(),
            point.timestamp.map(|t| t.to_string()).unwrap_or_default(),
        ];
        for feature in registry.iter() {
            row.push(
                point
                    .fingerprint
                    .get(feature)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        writer
            .write_record(&row)
            .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    text.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
    fs::write(path, text)?;
    Ok(())
}

/// Writes a long CSV (`sample_id,x,y,block,timestamp,feature,value`, one row
/// per reading, samples numbered by position).
///
/// # Errors
/// Returns [`Error::Io`] on write failures.
pub fn write_long_csv(path: &Path, points: &[LabeledFingerprint]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["sample_id", "x", "y", "block", "timestamp", "feature", "value"])
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    for (index, point) in points.iter().enumerate() {
        for (feature, value) in point.fingerprint.iter() {
            writer
                .write_record([
                    index.to_string(),
                    point.location[0].to_string(),
                    point.location[1].to_string(),
                    point.block.map(|b| b.to_string()).unwrap_or_default(),
                    point.timestamp.map(|t| t.to_string()).unwrap_or_default(),
                    feature.as_str().to_owned(),
                    value.to_string(),
                ])
                .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
        }
    }
    let body = writer
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn fid(raw: &str) -> FeatureId {
        FeatureId::new(raw).unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file
    }

    #[test]
    fn wide_files_round_trip_points_and_registry_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("survey.csv");
        let mut first = LabeledFingerprint::new(
            [0.5, 1.5],
            [(fid("b2"), -50.0), (fid("a1"), -60.0)].into_iter().collect(),
        );
        first.block = Some(0);
        first.timestamp = Some(1_700_000_000);
        let second = LabeledFingerprint::new([2.5, 3.5], [(fid("a1"), -70.0)].into_iter().collect());
        let mut registry = GlobalFeatureRegistry::new();
        registry.insert(fid("b2"));
        registry.insert(fid("a1"));
        write_wide_csv(&path, &[first.clone(), second.clone()], &registry, -110.0).unwrap();
        let result = read_fingerprints(&path, DatasetFormat::Wide).unwrap();
        assert_eq!(result.points, vec![first, second]);
        // Column order survives, not alphabetical order.
        assert_eq!(result.registry.index_of(&fid("b2")), Some(0));
        assert_eq!(result.registry.index_of(&fid("a1")), Some(1));
        assert_eq!(result.clamped_values, 0);
    }

    #[test]
    fn long_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("survey_long.csv");
        let mut first = LabeledFingerprint::new(
            [0.5, 1.5],
            [(fid("b2"), -50.0), (fid("a1"), -60.0)].into_iter().collect(),
        );
        first.block = Some(1);
        let second = LabeledFingerprint::new([2.5, 3.5], [(fid("a1"), -70.0)].into_iter().collect());
        write_long_csv(&path, &[first.clone(), second.clone()]).unwrap();
        let result = read_fingerprints(&path, DatasetFormat::Long).unwrap();
        assert_eq!(result.points, vec![first, second]);
    }

    #[test]
    fn the_format_detector_tells_the_layouts_apart() {
        let wide = write_temp("# missing=-110\nx,y,ap1\n1.0,2.0,-50\n");
        let result = read_fingerprints(wide.path(), DatasetFormat::Auto).unwrap();
        assert_eq!(result.registry.len(), 1);
        let long = write_temp("sample_id,x,y,feature,value\n0,1.0,2.0,ap1,-50\n");
        let result = read_fingerprints(long.path(), DatasetFormat::Auto).unwrap();
        assert_eq!(result.points.len(), 1);
        assert_relative_eq!(
            result.points[0].fingerprint.get(&fid("ap1")).unwrap(),
            -50.0
        );
    }

    #[test]
    fn wide_files_require_the_sentinel_declaration() {
        let file = write_temp("x,y,ap1\n1.0,2.0,-50\n");
        let err = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("missing="), "{err}");
    }

    #[test]
    fn sentinel_and_empty_cells_are_absent_features() {
        let file = write_temp("# missing=-110\nx,y,ap1,ap2\n1.0,2.0,-110,-50\n3.0,4.0,,-110\n");
        let result = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap();
        assert_eq!(result.points[0].fingerprint.len(), 1);
        assert!(result.points[1].fingerprint.is_empty());
        // A custom sentinel works the same way.
        let custom = write_temp("# missing=100\nx,y,ap1\n1.0,2.0,100\n");
        let result = read_fingerprints(custom.path(), DatasetFormat::Wide).unwrap();
        assert!(result.points[0].fingerprint.is_empty());
    }

    #[test]
    fn out_of_range_values_are_clamped_and_counted() {
        let file = write_temp("# missing=-110\nx,y,ap1,ap2\n1.0,2.0,5.0,-150.0\n");
        let result = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap();
        assert_eq!(result.clamped_values, 2);
        // +5 clamps to the ceiling and stays; -150 clamps to the floor and
        // becomes absent.
        assert_relative_eq!(result.points[0].fingerprint.get(&fid("ap1")).unwrap(), 0.0);
        assert!(!result.points[0].fingerprint.contains(&fid("ap2")));
    }

    #[test]
    fn header_ids_are_canonicalized() {
        let file = write_temp("# missing=-110\nx,y, AP1 \n1.0,2.0,-50\n");
        let result = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap();
        assert!(result.points[0].fingerprint.contains(&fid("ap1")));
    }

    #[test]
    fn duplicate_wide_columns_are_rejected() {
        let file = write_temp("# missing=-110\nx,y,ap1,AP1\n1.0,2.0,-50,-51\n");
        let err = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn duplicate_long_readings_are_rejected_with_their_line() {
        let file = write_temp(
            "sample_id,x,y,feature,value\n0,1.0,2.0,ap1,-50\n0,1.0,2.0,ap1,-55\n",
        );
        let err = read_fingerprints(file.path(), DatasetFormat::Long).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("duplicate reading"), "{message}");
        assert!(message.contains("line 3"), "{message}");
    }

    #[test]
    fn conflicting_long_coordinates_are_rejected() {
        let file = write_temp(
            "sample_id,x,y,feature,value\n0,1.0,2.0,ap1,-50\n0,9.0,2.0,ap2,-55\n",
        );
        let err = read_fingerprints(file.path(), DatasetFormat::Long).unwrap_err();
        assert!(err.to_string().contains("different coordinates"), "{err}");
    }

    #[test]
    fn unparseable_values_carry_path_and_line() {
        let file = write_temp("# missing=-110\nx,y,ap1\n1.0,2.0,-50\n1.0,oops,-50\n");
        let err = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 4"), "{message}");
        assert!(message.contains("oops"), "{message}");
    }

    #[test]
    fn missing_required_columns_are_reported() {
        let file = write_temp("# missing=-110\nx,ap1\n1.0,-50\n");
        let err = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap_err();
        assert!(err.to_string().contains("\"y\""), "{err}");
        let file = write_temp("sample_id,x,y,value\n0,1.0,2.0,-50\n");
        let err = read_fingerprints(file.path(), DatasetFormat::Long).unwrap_err();
        assert!(err.to_string().contains("\"feature\""), "{err}");
    }

    #[test]
    fn an_empty_body_yields_no_points() {
        let file = write_temp("# missing=-110\nx,y,ap1\n");
        let result = read_fingerprints(file.path(), DatasetFormat::Wide).unwrap();
        assert!(result.points.is_empty());
        assert_eq!(result.registry.len(), 1);
    }

    #[test]
    fn long_samples_group_rows_in_first_seen_order() {
        let file = write_temp(
            "sample_id,x,y,feature,value\nb,1.0,2.0,ap2,-50\na,3.0,4.0,ap1,-60\nb,1.0,2.0,ap1,-55\n",
        );
        let result = read_fingerprints(file.path(), DatasetFormat::Long).unwrap();
        assert_eq!(result.points.len(), 2);
        assert_eq!(result.points[0].location, [1.0, 2.0]);
        assert_eq!(result.points[0].fingerprint.len(), 2);
        assert_eq!(result.points[1].location, [3.0, 4.0]);
        // Registry follows first appearance: ap2 before ap1.
        assert_eq!(result.registry.index_of(&fid("ap2")), Some(0));
        assert_eq!(result.registry.index_of(&fid("ap1")), Some(1));
    }

    #[test]
    fn points_with_unregistered_features_cannot_be_written_wide() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let point =
            LabeledFingerprint::new([0.0, 0.0], [(fid("ap1"), -50.0)].into_iter().collect());
        let registry = GlobalFeatureRegistry::new();
        let err = write_wide_csv(&path, &[point], &registry, -110.0).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
