//! Synthetic datasets: independent covariate draws plus simulated choices.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataprep::{Dataset, PrepError};
use crate::fixtures::{CONTINUOUS_COLUMNS, MALE_INDICATOR_SHARES};
use crate::kernel::{simulate, KernelError};
use crate::model::{build_design, ModelSpec, ParameterVector, SpecError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Data(#[from] PrepError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("covariate `{column}`: {message}")]
    Covariate { column: String, message: String },
}

/// Marginal distribution of one simulated covariate. Columns are drawn independently.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovariateDist {
    /// Uniform on [0, 1].
    Uniform,
    /// 1 with probability `share`, else 0.
    Bernoulli { share: f64 },
}

/// Share used for indicators without a configured or published average.
pub const DEFAULT_SHARE: f64 = 0.5;

impl CovariateDist {
    pub fn default_for(column: &str) -> Self {
        if CONTINUOUS_COLUMNS.contains(&column) {
            return CovariateDist::Uniform;
        }
        let share = MALE_INDICATOR_SHARES
            .iter()
            .find(|(c, _)| *c == column)
            .map(|(_, s)| *s)
            .unwrap_or(DEFAULT_SHARE);
        CovariateDist::Bernoulli { share }
    }

    pub fn check(&self) -> Result<(), String> {
        match self {
            CovariateDist::Bernoulli { share } if !(0.0..=1.0).contains(share) => {
                Err(format!("share {share} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            CovariateDist::Uniform => u,
            CovariateDist::Bernoulli { share } => {
                if u < *share {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Parameter values and optional covariate distributions for `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub covariates: BTreeMap<String, CovariateDist>,
}

/// Draws `n` rows column by column, in `columns` order.
pub fn sample_covariates<R: Rng>(
    columns: &[String],
    overrides: &BTreeMap<String, CovariateDist>,
    n: usize,
    rng: &mut R,
) -> Vec<(String, Vec<f64>)> {
    columns
        .iter()
        .map(|c| {
            let dist = overrides.get(c).copied().unwrap_or_else(|| CovariateDist::default_for(c));
            (c.clone(), (0..n).map(|_| dist.draw(rng)).collect())
        })
        .collect()
}

/// `n` rows for `spec`: covariates from ChaCha20 stream 1 of `seed`, choices
/// from stream 0 of the same seed.
pub fn simulate_dataset(
    spec: &ModelSpec,
    params: &ParameterVector,
    overrides: &BTreeMap<String, CovariateDist>,
    n: usize,
    seed: u64,
) -> Result<Dataset, SynthError> {
    for (column, dist) in overrides {
        dist.check().map_err(|message| SynthError::Covariate {
            column: column.clone(),
            message,
        })?;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let cols = sample_covariates(&spec.covariate_columns(), overrides, n, &mut rng);
    let alternatives: Vec<String> = spec.tree.alternative_ids().iter().map(|s| s.to_string()).collect();
    let placeholder = Dataset::from_columns(alternatives.clone(), cols.clone(), vec![0; n])?;
    let design = build_design(spec, &placeholder)?;
    let sim = simulate(params, &design, &spec.tree, seed)?;
    Ok(Dataset::from_columns(alternatives, cols, sim.choices)?)
}
