use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, NormStats, Sample, Split, SyntheticSpec};
use crate::error::{Error, Result};

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub has_header: bool,
    /// Zero-based label column; `None` means the last column.
    #[serde(default)]
    pub label_column: Option<usize>,
    pub class_count: usize,
    /// Expected number of feature columns; inferred from the first row when unset.
    #[serde(default)]
    pub feature_count: Option<usize>,
}

impl CsvSchema {
    pub fn new(class_count: usize) -> Self {
        Self {
            has_header: true,
            label_column: None,
            class_count,
            feature_count: None,
        }
    }
}

/// Sidecar metadata written next to an exported dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub class_count: usize,
    pub feature_count: usize,
    pub norm_stats: Option<NormStats>,
    pub split_assignment: Option<Vec<Split>>,
    pub synthetic_spec: Option<SyntheticSpec>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Read samples from a CSV file. Row numbers in errors are 1-based file
/// lines, counting the header when present.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut samples = Vec::new();
    let mut width: Option<usize> = schema.feature_count.map(|d| d + 1);
    for (i, record) in reader.records().enumerate() {
        let fallback_line = i + 1 + usize::from(schema.has_header);
        let record = record.map_err(|e| Error::Parse {
            row: e
                .position()
                .map_or(fallback_line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record
            .position()
            .map_or(fallback_line, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected || expected < 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        let label_col = schema.label_column.unwrap_or(expected - 1);
        if label_col >= expected {
            return Err(Error::Config(format!(
                "label column {label_col} out of range for {expected} columns"
            )));
        }
        let mut features = Vec::with_capacity(expected - 1);
        let mut label = None;
        for (j, field) in record.iter().enumerate() {
            if j == label_col {
                let l: usize = field.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("label `{field}` is not a non-negative integer"),
                })?;
                if l >= schema.class_count {
                    return Err(Error::Parse {
                        row,
                        message: format!(
                            "label {l} out of range for {} classes",
                            schema.class_count
                        ),
                    });
                }
                label = Some(l);
            } else {
                let x: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("column {j}: `{field}` is not numeric"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        row,
                        message: format!("column {j} is not finite"),
                    });
                }
                features.push(x);
            }
        }
        samples.push(Sample {
            features,
            label: label.expect("label column visited"),
            timestamp_index: samples.len(),
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Dataset::new(samples, schema.class_count)
}

/// Write samples as `f0,…,f{D-1},label`. Reals use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = (0..ds.feature_count())
        .map(|j| format!("f{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for s in ds.samples() {
        line.clear();
        for x in &s.features {
            line.push_str(&format_real(*x));
            line.push(',');
        }
        line.push_str(&s.label.to_string());
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Decimal-point formatting that round-trips bit-exactly.
pub(crate) fn format_real(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn write_metadata(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(&ds.metadata())?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<DatasetMeta> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// CSV plus `<stem>.meta.json` sidecar.
pub fn write_dataset(ds: &Dataset, csv_path: impl AsRef<Path>) -> Result<()> {
    let csv_path = csv_path.as_ref();
    write_csv(ds, csv_path)?;
    write_metadata(ds, sidecar_path(csv_path))
}

/// Load a CSV written by [`write_dataset`], restoring the sidecar when present.
pub fn load_dataset(csv_path: impl AsRef<Path>) -> Result<Dataset> {
    let csv_path = csv_path.as_ref();
    let meta_path = sidecar_path(csv_path);
    let meta = read_metadata(&meta_path)?;
    let schema = CsvSchema {
        has_header: true,
        label_column: None,
        class_count: meta.class_count,
        feature_count: Some(meta.feature_count),
    };
    load_csv(csv_path, &schema)?.with_metadata(meta)
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("meta.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_in_file_order() {
        let f = write_tmp("a,b,label\n1.5,2,0\n3,4,1\n5,6.25,0\n");
        let ds = load_csv(f.path(), &CsvSchema::new(2)).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.feature_count(), 2);
        assert_eq!(ds.labels(), vec![0, 1, 0]);
        assert_eq!(ds.samples()[2].features, vec![5.0, 6.25]);
        assert_eq!(ds.samples()[2].timestamp_index, 2);
        assert!(ds.norm_stats().is_none());
    }

    #[test]
    fn label_out_of_range_names_row() {
        let f = write_tmp("1,2,0\n1,2,7\n");
        let mut schema = CsvSchema::new(5);
        schema.has_header = false;
        let err = load_csv(f.path(), &schema).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn wrong_arity_and_non_numeric() {
        let f = write_tmp("x,y,label\n1,2,0\n1,0\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::new(2)),
            Err(Error::Parse { row: 3, .. })
        ));
        let f = write_tmp("x,y,label\n1,abc,0\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::new(2)),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn empty_file_is_distinct() {
        let f = write_tmp("x,y,label\n");
        assert!(matches!(
            load_csv(f.path(), &CsvSchema::new(2)),
            Err(Error::EmptyFile(_))
        ));
    }

    #[test]
    fn label_column_override() {
        let f = write_tmp("1,0.5,0.25\n0,1.5,2.5\n");
        let schema = CsvSchema {
            has_header: false,
            label_column: Some(0),
            class_count: 2,
            feature_count: None,
        };
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.labels(), vec![1, 0]);
        assert_eq!(ds.samples()[1].features, vec![1.5, 2.5]);
    }

    #[test]
    fn format_real_round_trips() {
        for x in [0.1, 1.0, -3.0, 1e-300, 123456.789e10, std::f64::consts::PI] {
            let s = format_real(x);
            assert!(s.contains('.'));
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
