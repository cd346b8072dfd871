//! A trained classifier of any kind, and its on-disk JSON form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::{EnsembleModel, MetaModel};
use crate::decide::{apply_rule, DecisionRule};
use crate::forest::ForestModel;
use crate::{Error, Matrix, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Model {
    Forest(ForestModel),
    Ensemble(EnsembleModel),
    Meta(MetaModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_features(),
            Model::Ensemble(m) => m.n_features(),
            Model::Meta(m) => m.n_features(),
        }
    }

    /// Trees evaluated per prediction.
    pub fn n_trees(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_trees(),
            Model::Ensemble(m) => m.n_trees(),
            Model::Meta(m) => m.n_trees(),
        }
    }

    pub fn as_forest(&self) -> Option<&ForestModel> {
        match self {
            Model::Forest(m) => Some(m),
            _ => None,
        }
    }

    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        match self {
            Model::Forest(m) => m.predict_proba(rows),
            Model::Ensemble(m) => m.predict_proba(rows),
            Model::Meta(m) => m.predict_proba(rows),
        }
    }

    /// Probabilities with the rule's vote weights applied, before
    /// calibration.
    pub fn scores(&self, rule: &DecisionRule, rows: &Matrix) -> Result<Vec<f64>> {
        match (&rule.vote_weights, self) {
            (None, _) => self.predict_proba(rows),
            (Some(w), Model::Forest(m)) => m.predict_proba_weighted(rows, w),
            (Some(_), _) => Err(Error::Config(
                "vote weights apply to single forests only".into(),
            )),
        }
    }

    pub fn predict_with(&self, rule: &DecisionRule, rows: &Matrix) -> Result<Vec<u8>> {
        apply_rule(rule, &self.scores(rule, rows)?)
    }
}

impl From<ForestModel> for Model {
    fn from(m: ForestModel) -> Self {
        Model::Forest(m)
    }
}

impl From<EnsembleModel> for Model {
    fn from(m: EnsembleModel) -> Self {
        Model::Ensemble(m)
    }
}

impl From<MetaModel> for Model {
    fn from(m: MetaModel) -> Self {
        Model::Meta(m)
    }
}

pub const ENVELOPE_FORMAT: &str = "imbalance-model";
pub const ENVELOPE_VERSION: u32 = 1;

/// A model with the technique that produced it, its feature columns and the
/// decision rule to apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub technique: String,
    pub feature_names: Vec<String>,
    pub model: Model,
    pub rule: DecisionRule,
}

impl SavedModel {
    pub fn new(
        technique: &str,
        feature_names: Vec<String>,
        model: Model,
        rule: DecisionRule,
    ) -> Self {
        Self {
            format: ENVELOPE_FORMAT.into(),
            version: ENVELOPE_VERSION,
            technique: technique.into(),
            feature_names,
            model,
            rule,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let saved: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if saved.format != ENVELOPE_FORMAT || saved.version != ENVELOPE_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model file {} v{}",
                saved.format, saved.version
            )));
        }
        if saved.feature_names.len() != saved.model.n_features() {
            return Err(Error::Schema(
                "feature list does not match the model width".into(),
            ));
        }
        saved.rule.validate()?;
        Ok(saved)
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<u8>> {
        self.model.predict_with(&self.rule, rows)
    }
}
