use crate::dataprep::Dataset;

use super::params::ParamLayout;
use super::spec::{Covariate, ModelSpec};
use super::SpecError;

/// Sparse per-observation, per-alternative covariate rows keyed by parameter slot.
///
/// Slots absent from a row contribute nothing to that alternative's utility.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n_obs: usize,
    n_alts: usize,
    offsets: Vec<usize>,
    slots: Vec<u32>,
    values: Vec<f64>,
}

impl DesignMatrix {
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_alternatives(&self) -> usize {
        self.n_alts
    }

    /// Entries of one (observation, alternative) row as `(slot, value)` pairs.
    pub fn row(&self, obs: usize, alt: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cell = obs * self.n_alts + alt;
        let range = self.offsets[cell]..self.offsets[cell + 1];
        self.slots[range.clone()]
            .iter()
            .map(|&s| s as usize)
            .zip(self.values[range].iter().copied())
    }

    #[inline]
    pub(crate) fn row_slices(&self, obs: usize, alt: usize) -> (&[u32], &[f64]) {
        let cell = obs * self.n_alts + alt;
        let range = self.offsets[cell]..self.offsets[cell + 1];
        (&self.slots[range.clone()], &self.values[range])
    }

    /// Builds a design directly from dense rows, `rows[obs][alt]` listing `(slot, value)`.
    pub fn from_rows(n_alts: usize, rows: &[Vec<Vec<(usize, f64)>>]) -> Self {
        let mut builder = Builder::new(rows.len(), n_alts);
        for obs in rows {
            assert_eq!(obs.len(), n_alts, "every observation needs one row per alternative");
            for alt in obs {
                for &(slot, value) in alt {
                    builder.push(slot, value);
                }
                builder.close_cell();
            }
        }
        builder.finish()
    }

    /// Restricts to a subset of observations, in the given order.
    pub fn select(&self, observations: &[usize]) -> Self {
        let mut builder = Builder::new(observations.len(), self.n_alts);
        for &obs in observations {
            for alt in 0..self.n_alts {
                for (slot, value) in self.row(obs, alt) {
                    builder.push(slot, value);
                }
                builder.close_cell();
            }
        }
        builder.finish()
    }
}

struct Builder {
    n_obs: usize,
    n_alts: usize,
    offsets: Vec<usize>,
    slots: Vec<u32>,
    values: Vec<f64>,
}

impl Builder {
    fn new(n_obs: usize, n_alts: usize) -> Self {
        let mut offsets = Vec::with_capacity(n_obs * n_alts + 1);
        offsets.push(0);
        Self {
            n_obs,
            n_alts,
            offsets,
            slots: Vec::new(),
            values: Vec::new(),
        }
    }

    fn push(&mut self, slot: usize, value: f64) {
        self.slots.push(slot as u32);
        self.values.push(value);
    }

    fn close_cell(&mut self) {
        self.offsets.push(self.slots.len());
    }

    fn finish(self) -> DesignMatrix {
        debug_assert_eq!(self.offsets.len(), self.n_obs * self.n_alts + 1);
        DesignMatrix {
            n_obs: self.n_obs,
            n_alts: self.n_alts,
            offsets: self.offsets,
            slots: self.slots,
            values: self.values,
        }
    }
}

/// Expands `spec`'s utility terms over every row of `dataset`.
pub fn build_design(spec: &ModelSpec, dataset: &Dataset) -> Result<DesignMatrix, SpecError> {
    let layout = ParamLayout::for_spec(spec);
    let n_alts = spec.tree.n_alternatives();

    // Per alternative: (slot, column) in term order; `None` column means constant.
    let mut per_alt: Vec<Vec<(usize, Option<&[f64]>)>> = vec![Vec::new(); n_alts];
    for term in &spec.terms {
        let slot = layout
            .index_of(&term.parameter)
            .expect("layout built from the same spec");
        let column = match &term.covariate {
            Covariate::Constant => None,
            Covariate::Column(name) => Some(
                dataset
                    .column(name)
                    .ok_or_else(|| SpecError::UnknownColumn(name.clone()))?,
            ),
        };
        for alt in &term.applies_to {
            let a = spec
                .tree
                .alternative_index(alt)
                .ok_or_else(|| SpecError::UnknownAlternative(alt.clone()))?;
            per_alt[a].push((slot, column));
        }
    }

    let n_obs = dataset.rows();
    let mut builder = Builder::new(n_obs, n_alts);
    for row in 0..n_obs {
        for (a, entries) in per_alt.iter().enumerate() {
            for &(slot, column) in entries {
                let value = match column {
                    None => 1.0,
                    Some(col) => col[row],
                };
                if !value.is_finite() {
                    let name = spec
                        .terms
                        .iter()
                        .find(|t| layout.index_of(&t.parameter) == Some(slot))
                        .map(|t| t.covariate.name().to_string())
                        .unwrap_or_default();
                    return Err(SpecError::NonFiniteCovariate {
                        row,
                        column: name,
                        alternative: spec.tree.alternatives[a].id.clone(),
                    });
                }
                builder.push(slot, value);
            }
            builder.close_cell();
        }
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::Dataset;
    use crate::fixtures;
    use crate::model::{UtilityTerm, CONSTANT};

    fn tiny_dataset() -> Dataset {
        Dataset::from_columns(
            fixtures::SEVERITY_LEVELS.iter().map(|s| s.to_string()).collect(),
            vec![
                ("not_divided".to_string(), vec![1.0, 0.0, 1.0]),
                ("age".to_string(), vec![0.2, 0.5, 0.9]),
            ],
            vec![0, 3, 4],
        )
        .unwrap()
    }

    #[test]
    fn constants_only_leaves_base_rows_empty() {
        let mut spec = fixtures::male_severity_spec();
        spec.terms.retain(|t| t.covariate.name() == CONSTANT);
        let design = build_design(&spec, &tiny_dataset()).unwrap();
        let base = spec.tree.alternative_index("fatality").unwrap();
        for obs in 0..design.n_obs() {
            assert_eq!(design.row(obs, base).count(), 0);
            for alt in 0..5 {
                if alt != base {
                    let entries: Vec<_> = design.row(obs, alt).collect();
                    assert_eq!(entries.len(), 1);
                    assert_eq!(entries[0].1, 1.0);
                }
            }
        }
    }

    #[test]
    fn shared_term_gives_identical_rows() {
        let mut spec = fixtures::male_severity_spec();
        spec.terms = vec![UtilityTerm::new(
            "not_divided",
            "not_divided",
            &["severe_injury", "fatality"],
        )];
        let design = build_design(&spec, &tiny_dataset()).unwrap();
        let severe = spec.tree.alternative_index("severe_injury").unwrap();
        let fatal = spec.tree.alternative_index("fatality").unwrap();
        let a: Vec<_> = design.row(0, severe).collect();
        let b: Vec<_> = design.row(0, fatal).collect();
        assert_eq!(a, vec![(0, 1.0)]);
        assert_eq!(a, b);
        assert_eq!(design.row(0, 0).count(), 0);
    }

    #[test]
    fn missing_column_is_named() {
        let spec = fixtures::male_severity_spec();
        match build_design(&spec, &tiny_dataset()) {
            Err(SpecError::UnknownColumn(c)) => assert_eq!(c, "icy"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_value_reports_row() {
        let mut spec = fixtures::male_severity_spec();
        spec.terms = vec![UtilityTerm::new("age", "age", &["pdo"])];
        let data = Dataset::from_columns(
            fixtures::SEVERITY_LEVELS.iter().map(|s| s.to_string()).collect(),
            vec![("age".to_string(), vec![0.1, f64::NAN])],
            vec![0, 1],
        )
        .unwrap();
        match build_design(&spec, &data) {
            Err(SpecError::NonFiniteCovariate { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "age");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn build_is_repeatable() {
        let mut spec = fixtures::male_severity_spec();
        spec.terms.retain(|t| t.covariate.name() == CONSTANT || t.covariate.name() == "age");
        let data = tiny_dataset();
        assert_eq!(build_design(&spec, &data).unwrap(), build_design(&spec, &data).unwrap());
    }
}
