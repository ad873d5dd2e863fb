//! Tabular crash data: ingestion, min-max scaling, categorical expansion,
//! collinearity screening, and a replayable log of every transform.

mod csvio;
mod log;
mod screen;
mod transform;

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NestTree;

pub use csvio::{parse_dataset, write_dataset, CsvSchema};
pub use log::{replay, PrepLog, PrepStep};
pub use screen::{pearson, screen_collinearity, ScreenDecision, ScreenOutcome};
pub use transform::{expand_categorical, min_max_normalize, Category};

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("input has no header row")]
    MissingHeader,
    #[error("header has no chosen-alternative column `{0}`")]
    MissingChosenColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}: unknown alternative `{label}` in column `{column}`")]
    UnknownAlternative { line: u64, column: String, label: String },
    #[error("line {line}: column `{column}` has non-numeric value `{value}`")]
    NotNumeric { line: u64, column: String, value: String },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("no column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` has values outside its category list: {values}")]
    NovelCategory { column: String, values: String },
    #[error("column `{column}` has {found} values for {expected} rows")]
    Length { column: String, expected: usize, found: usize },
    #[error("choice index {0} does not name an alternative")]
    ChoiceIndex(usize),
    #[error("alternative `{0}` is not in the model tree")]
    NotInTree(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("prep-log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("fitting screening model: {0}")]
    Fit(String),
}

/// Modeling-ready observations: numeric columns plus the chosen alternative of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: IndexMap<String, Vec<f64>>,
    alternatives: Vec<String>,
    chosen: Vec<usize>,
    chosen_column: String,
    /// Position of the chosen column among the written columns.
    chosen_position: usize,
    pub provenance: PrepLog,
}

impl Dataset {
    pub fn from_columns(
        alternatives: Vec<String>,
        columns: Vec<(String, Vec<f64>)>,
        chosen: Vec<usize>,
    ) -> Result<Self, PrepError> {
        let mut map = IndexMap::new();
        for (name, values) in columns {
            if values.len() != chosen.len() {
                return Err(PrepError::Length {
                    column: name,
                    expected: chosen.len(),
                    found: values.len(),
                });
            }
            if map.insert(name.clone(), values).is_some() {
                return Err(PrepError::DuplicateColumn(name));
            }
        }
        if let Some(&bad) = chosen.iter().find(|&&c| c >= alternatives.len()) {
            return Err(PrepError::ChoiceIndex(bad));
        }
        let chosen_position = map.len();
        Ok(Self {
            columns: map,
            alternatives,
            chosen,
            chosen_column: "chosen".to_string(),
            chosen_position,
            provenance: PrepLog::default(),
        })
    }

    pub fn with_chosen_column(mut self, name: impl Into<String>) -> Self {
        self.chosen_column = name.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.chosen.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    /// Chosen alternative of each row, as an index into [`Dataset::alternatives`].
    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    pub fn chosen_column(&self) -> &str {
        &self.chosen_column
    }

    /// Chosen alternatives re-indexed to `tree`'s alternative order.
    pub fn choices_for(&self, tree: &NestTree) -> Result<Vec<usize>, PrepError> {
        let map = self
            .alternatives
            .iter()
            .map(|a| tree.alternative_index(a).ok_or_else(|| PrepError::NotInTree(a.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.chosen.iter().map(|&c| map[c]).collect())
    }

    pub(crate) fn column_mut(&mut self, name: &str) -> Result<&mut Vec<f64>, PrepError> {
        self.columns
            .get_mut(name)
            .ok_or_else(|| PrepError::UnknownColumn(name.to_string()))
    }

    pub(crate) fn push_column(&mut self, name: String, values: Vec<f64>) -> Result<(), PrepError> {
        if self.columns.contains_key(&name) || name == self.chosen_column {
            return Err(PrepError::DuplicateColumn(name));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn remove_column(&mut self, name: &str) -> Result<Vec<f64>, PrepError> {
        let idx = self
            .columns
            .get_index_of(name)
            .ok_or_else(|| PrepError::UnknownColumn(name.to_string()))?;
        if idx < self.chosen_position {
            self.chosen_position -= 1;
        }
        Ok(self.columns.shift_remove(name).expect("index just found"))
    }

    /// Rows at the given indices, in that order, with provenance kept.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|(k, v)| (k.clone(), rows.iter().map(|&r| v[r]).collect()))
            .collect();
        Self {
            columns,
            alternatives: self.alternatives.clone(),
            chosen: rows.iter().map(|&r| self.chosen[r]).collect(),
            chosen_column: self.chosen_column.clone(),
            chosen_position: self.chosen_position,
            provenance: self.provenance.clone(),
        }
    }

    /// Human-readable warnings recorded by transforms.
    pub fn warnings(&self) -> Vec<String> {
        self.provenance.warnings()
    }

    pub fn load(path: &Path, schema: &CsvSchema) -> Result<Self, PrepError> {
        let text = std::fs::read_to_string(path).map_err(|source| PrepError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parse_dataset(&text, schema)
    }
}

/// One categorical column and the categories it may take.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalColumn {
    pub column: String,
    pub categories: Vec<Category>,
}

fn default_floor() -> f64 {
    0.005
}

fn default_threshold() -> f64 {
    0.7
}

/// Preparation recipe, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepConfig {
    pub chosen_column: String,
    pub alternatives: Vec<String>,
    #[serde(default)]
    pub continuous_columns: Vec<String>,
    #[serde(default)]
    pub categorical_columns: Vec<CategoricalColumn>,
    /// Categories rarer than this share are left unexpanded.
    #[serde(default = "default_floor")]
    pub min_category_frequency: f64,
    /// Absolute Pearson correlation above which a pair counts as collinear.
    #[serde(default = "default_threshold")]
    pub collinearity_threshold: f64,
    /// Columns entering the collinearity screen; empty skips screening.
    #[serde(default)]
    pub screen_columns: Vec<String>,
}

impl PrepConfig {
    pub fn validate(&self) -> Result<(), PrepError> {
        for (name, v) in [
            ("min_category_frequency", self.min_category_frequency),
            ("collinearity_threshold", self.collinearity_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(PrepError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.alternatives.is_empty() {
            return Err(PrepError::Config("no alternatives listed".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            chosen_column: self.chosen_column.clone(),
            alternatives: self.alternatives.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PrepError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PrepError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `raw` and applies every step of `config` in order: scaling,
/// expansion, then screening. Returns the prepared data and screen decisions.
pub fn prepare(raw: &str, config: &PrepConfig) -> Result<(Dataset, Vec<ScreenDecision>), PrepError> {
    config.validate()?;
    let mut data = parse_dataset(raw, &config.schema())?;
    for col in &config.continuous_columns {
        data = min_max_normalize(data, col)?;
    }
    for cat in &config.categorical_columns {
        data = expand_categorical(data, &cat.column, &cat.categories, config.min_category_frequency)?;
    }
    let mut decisions = Vec::new();
    if !config.screen_columns.is_empty() {
        let outcome = screen_collinearity(&data, &config.screen_columns, config.collinearity_threshold)?;
        for d in &outcome.decisions {
            if let Some(dropped) = &d.dropped {
                data.remove_column(dropped)?;
                data.provenance.push(PrepStep::DropColumn {
                    column: dropped.clone(),
                    reason: d.describe(),
                });
            }
        }
        decisions = outcome.decisions;
    }
    Ok((data, decisions))
}
