use serde::{Deserialize, Serialize};

use super::csvio::{parse_dataset, CsvSchema};
use super::transform::{apply_indicator, apply_min_max};
use super::{Dataset, PrepError};

/// One applied transform. Serialized as a single JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrepStep {
    Parse {
        schema: CsvSchema,
        rows_read: usize,
        rows_dropped: usize,
    },
    MinMax {
        column: String,
        min: f64,
        max: f64,
    },
    /// Column had a single value and was set to zero.
    ConstantColumn {
        column: String,
        value: f64,
    },
    Expand {
        column: String,
        value: f64,
        indicator: String,
        share: f64,
    },
    SkipCategory {
        column: String,
        value: f64,
        name: String,
        share: f64,
    },
    DropColumn {
        column: String,
        reason: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrepLog {
    steps: Vec<PrepStep>,
}

impl PrepLog {
    pub fn push(&mut self, step: PrepStep) {
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[PrepStep] {
        &self.steps
    }

    pub fn warnings(&self) -> Vec<String> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                PrepStep::ConstantColumn { column, value } => Some(format!(
                    "column `{column}` is constant ({value}); normalized to all zeros"
                )),
                PrepStep::SkipCategory { column, name, share, .. } => Some(format!(
                    "category `{name}` of `{column}` has share {share} below the frequency floor; not expanded"
                )),
                _ => None,
            })
            .collect()
    }

    /// JSON Lines: one step per line, in application order.
    pub fn to_text(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("step serialization cannot fail") + "\n")
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self, PrepError> {
        let steps = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| PrepError::Log {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { steps })
    }
}

/// Re-applies a recorded log to the raw input it was produced from.
pub fn replay(raw: &str, log: &PrepLog) -> Result<Dataset, PrepError> {
    let mut steps = log.steps.iter();
    let mut data = match steps.next() {
        Some(PrepStep::Parse { schema, .. }) => parse_dataset(raw, schema)?,
        _ => {
            return Err(PrepError::Log {
                line: 1,
                message: "log must start with a parse step".into(),
            })
        }
    };
    for step in steps {
        match step {
            PrepStep::Parse { .. } => {
                return Err(PrepError::Log {
                    line: 0,
                    message: "parse step may only appear first".into(),
                })
            }
            PrepStep::MinMax { column, min, max } => apply_min_max(data.column_mut(column)?, *min, *max),
            PrepStep::ConstantColumn { column, .. } => data.column_mut(column)?.iter_mut().for_each(|x| *x = 0.0),
            PrepStep::Expand {
                column,
                value,
                indicator,
                ..
            } => {
                let values = apply_indicator(data.column(column).ok_or_else(|| PrepError::UnknownColumn(column.clone()))?, *value);
                data.push_column(indicator.clone(), values)?;
            }
            PrepStep::SkipCategory { .. } => {}
            PrepStep::DropColumn { column, .. } => {
                data.remove_column(column)?;
            }
        }
        data.provenance.push(step.clone());
    }
    Ok(data)
}
