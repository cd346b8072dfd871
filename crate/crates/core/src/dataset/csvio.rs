use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnSchema, Dataset, FeatureKind, FAILURE, NORMAL};
use crate::{Error, Matrix, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Keep integer-encoded device type/ID columns as features. Off by
    /// default: end-to-end monitoring only uses BER, OSNR and OA powers.
    pub include_categorical: bool,
}

/// Result of ingesting a CSV file.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    /// Rows removed for containing a NaN or empty cell.
    pub dropped: usize,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Loaded> {
    load_csv_with(path, schema, LoadOptions::default())
}

pub fn load_csv_with(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
    opts: LoadOptions,
) -> Result<Loaded> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_csv(File::open(path)?, schema, opts)
}

/// Loads a CSV whose schema is read from its own header: the last column is
/// the label, the rest are classified by [`infer_schema`].
pub fn load_csv_inferred(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Loaded> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let header: Vec<String> = csv::Reader::from_path(path)?
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    load_csv_with(path, &infer_schema(&header)?, opts)
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("na")
}

pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema, opts: LoadOptions) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let found: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut expected = schema.names().to_vec();
    expected.push(schema.label_name().to_string());
    if found != expected {
        return Err(Error::HeaderMismatch { expected, found });
    }

    let kinds = schema.feature_kinds();
    let keep: Vec<usize> = kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| match k {
            FeatureKind::Continuous => true,
            FeatureKind::CategoricalId => opts.include_categorical,
            FeatureKind::Timestamp => false,
        })
        .map(|(j, _)| j)
        .collect();

    // raw cells per kept column, decoded after cleaning
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = line + 1;
        let label_cell = rec.get(schema.len()).unwrap_or("");
        let mut missing = is_missing(label_cell);
        let mut row = Vec::with_capacity(keep.len());
        for &j in &keep {
            let cell = rec.get(j).unwrap_or("").trim();
            if is_missing(cell) {
                missing = true;
                continue;
            }
            if kinds[j] == FeatureKind::Continuous {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => {}
                    Ok(_) => missing = true,
                    Err(_) => {
                        return Err(Error::BadValue {
                            line,
                            column: schema.names()[j].clone(),
                            value: cell.to_string(),
                        })
                    }
                }
            }
            row.push(cell.to_string());
        }
        if missing {
            dropped += 1;
            continue;
        }
        let label = match label_cell.trim().parse::<f64>() {
            Ok(0.0) => NORMAL,
            Ok(1.0) => FAILURE,
            _ => {
                return Err(Error::NonBinaryLabel {
                    line,
                    value: label_cell.to_string(),
                })
            }
        };
        cells.push(row);
        labels.push(label);
    }

    // integer-encode categorical columns by sorted distinct value
    let mut encoders: Vec<Option<Vec<String>>> = Vec::with_capacity(keep.len());
    for (c, &j) in keep.iter().enumerate() {
        if kinds[j] != FeatureKind::CategoricalId {
            encoders.push(None);
            continue;
        }
        let distinct: BTreeSet<&str> = cells.iter().map(|r| r[c].as_str()).collect();
        let mut levels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
        if levels.iter().all(|l| l.parse::<f64>().is_ok()) {
            levels.sort_by(|a, b| {
                a.parse::<f64>()
                    .unwrap()
                    .total_cmp(&b.parse::<f64>().unwrap())
            });
        }
        encoders.push(Some(levels));
    }

    let mut features = Matrix::with_cols(keep.len());
    let mut buf = vec![0.0; keep.len()];
    for row in &cells {
        for (c, cell) in row.iter().enumerate() {
            buf[c] = match &encoders[c] {
                None => cell.parse::<f64>().expect("validated above"),
                Some(levels) => levels.iter().position(|l| l == cell).expect("level") as f64,
            };
        }
        features.push_row(&buf)?;
    }

    let feature_schema = ColumnSchema::new(
        keep.iter().map(|&j| schema.names()[j].clone()).collect(),
        schema.label_name(),
        keep.iter().map(|&j| kinds[j]).collect(),
    )?;
    let dataset = Dataset::new(feature_schema, features, labels)?;
    Ok(Loaded { dataset, dropped })
}

/// Canonical numeric text: 9 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes `d` as comma-separated text with a header row, the label column
/// last and LF line endings.
pub fn write_csv<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    let mut header = d.schema().names().join(",");
    header.push(',');
    header.push_str(d.schema().label_name());
    header.push('\n');
    w.write_all(header.as_bytes())?;
    let mut line = String::new();
    for (row, &y) in d.features().iter_rows().zip(d.labels()) {
        line.clear();
        for v in row {
            line.push_str(&format_value(*v));
            line.push(',');
        }
        line.push(if y == FAILURE { '1' } else { '0' });
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Builds a schema from a header row (label column last). Columns named
/// `timestamp`/`time` are timestamps and `device_type`/`device_id`/`type`/`id`
/// are categorical ids; everything else is continuous.
pub fn infer_schema(header: &[String]) -> Result<ColumnSchema> {
    let (label, names) = header
        .split_last()
        .ok_or_else(|| Error::Schema("empty header".into()))?;
    let kinds = names
        .iter()
        .map(|n| match n.to_ascii_lowercase().as_str() {
            "timestamp" | "time" => FeatureKind::Timestamp,
            "device_type" | "device_id" | "type" | "id" => FeatureKind::CategoricalId,
            _ => FeatureKind::Continuous,
        })
        .collect();
    ColumnSchema::new(names.to_vec(), label.clone(), kinds)
}
