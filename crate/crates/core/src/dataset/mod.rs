//! Telemetry data model, CSV ingest, stratified splitting and the synthetic
//! testbed generator.

mod csvio;
mod scale;
mod split;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

pub use csvio::{
    format_value, infer_schema, load_csv, load_csv_inferred, load_csv_with, read_csv, write_csv,
    LoadOptions, Loaded,
};
pub use scale::Standardizer;
pub use split::{stratified_split, SplitSpec};
pub use synth::{generate_synthetic, separation_statistic, GeneratorConfig, FEATURE_NAMES};

/// Label of a normal (no failure) row.
pub const NORMAL: u8 = 0;
/// Label of a failure row.
pub const FAILURE: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    CategoricalId,
    Timestamp,
}

/// Column layout of a telemetry table. `names` are the feature columns in
/// file order; the label column follows them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    names: Vec<String>,
    label_name: String,
    feature_kinds: Vec<FeatureKind>,
}

impl ColumnSchema {
    pub fn new(
        names: Vec<String>,
        label_name: impl Into<String>,
        feature_kinds: Vec<FeatureKind>,
    ) -> Result<Self> {
        let label_name = label_name.into();
        if names.len() != feature_kinds.len() {
            return Err(Error::Schema(format!(
                "{} names but {} kinds",
                names.len(),
                feature_kinds.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Schema(format!("duplicate column {n:?}")));
            }
        }
        if seen.contains(label_name.as_str()) {
            return Err(Error::Schema(format!(
                "label column {label_name:?} is also a feature"
            )));
        }
        if !feature_kinds.contains(&FeatureKind::Continuous) {
            return Err(Error::Schema("no continuous feature".into()));
        }
        Ok(Self {
            names,
            label_name,
            feature_kinds,
        })
    }

    /// Schema whose every column is continuous.
    pub fn continuous<S: AsRef<str>>(names: &[S], label_name: &str) -> Result<Self> {
        Self::new(
            names.iter().map(|s| s.as_ref().to_string()).collect(),
            label_name,
            vec![FeatureKind::Continuous; names.len()],
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Schema with one extra continuous column appended.
    pub fn with_extra(&self, name: &str) -> Result<Self> {
        let mut names = self.names.clone();
        names.push(name.to_string());
        let mut kinds = self.feature_kinds.clone();
        kinds.push(FeatureKind::Continuous);
        Self::new(names, self.label_name.clone(), kinds)
    }
}

/// Feature matrix plus binary labels (0 = normal, 1 = failure).
///
/// Always holds finite features, labels in {0, 1} and at least one failure
/// row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: ColumnSchema,
    features: Matrix,
    labels: Vec<u8>,
    class_counts: (usize, usize),
}

impl Dataset {
    pub fn new(schema: ColumnSchema, features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.cols() != schema.len() {
            return Err(Error::WidthMismatch {
                expected: schema.len(),
                got: features.cols(),
            });
        }
        if features.rows() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !features.all_finite() {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        let mut counts = (0, 0);
        for &y in &labels {
            match y {
                NORMAL => counts.0 += 1,
                FAILURE => counts.1 += 1,
                other => return Err(Error::InvalidData(format!("label {other} is not binary"))),
            }
        }
        if counts.1 == 0 {
            return Err(Error::NoMinority);
        }
        Ok(Self {
            schema,
            features,
            labels,
            class_counts: counts,
        })
    }

    pub fn schema(&self) -> &ColumnSchema {
        &self.schema
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// `(n_normal, n_failure)`.
    pub fn class_counts(&self) -> (usize, usize) {
        self.class_counts
    }

    pub fn n_normal(&self) -> usize {
        self.class_counts.0
    }

    pub fn n_failure(&self) -> usize {
        self.class_counts.1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Row indices carrying `label`, ascending.
    pub fn indices_of(&self, label: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::new(self.schema.clone(), self.features.select_rows(idx), labels)
    }

    /// Same features, new labels.
    pub fn relabel(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.schema.clone(), self.features.clone(), labels)
    }

    /// Appends rows with a common label.
    pub fn append_rows<R: AsRef<[f64]>>(&self, rows: &[R], label: u8) -> Result<Self> {
        let mut features = self.features.clone();
        let mut labels = self.labels.clone();
        for r in rows {
            features.push_row(r.as_ref())?;
            labels.push(label);
        }
        Self::new(self.schema.clone(), features, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema2() -> ColumnSchema {
        ColumnSchema::continuous(&["a", "b"], "failure").unwrap()
    }

    #[test]
    fn schema_invariants() {
        assert!(ColumnSchema::continuous(&["a", "a"], "y").is_err());
        assert!(ColumnSchema::continuous(&["a", "y"], "y").is_err());
        assert!(ColumnSchema::new(vec!["t".into()], "y", vec![FeatureKind::Timestamp]).is_err());
    }

    #[test]
    fn dataset_invariants() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let d = Dataset::new(schema2(), m.clone(), vec![0, 1]).unwrap();
        assert_eq!(d.class_counts(), (1, 1));
        assert!(matches!(
            Dataset::new(schema2(), m.clone(), vec![0, 0]),
            Err(Error::NoMinority)
        ));
        assert!(Dataset::new(schema2(), m.clone(), vec![0, 2]).is_err());
        let bad = Matrix::from_rows(&[vec![f64::NAN, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(Dataset::new(schema2(), bad, vec![0, 1]).is_err());
    }
}
