use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::log::PrepStep;
use super::{Dataset, PrepError};

/// A category code and the name its indicator column takes (`<column>_<name>`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub value: f64,
    pub name: String,
}

impl Category {
    pub fn new(value: f64, name: impl Into<String>) -> Self {
        Self {
            value,
            name: name.into(),
        }
    }
}

pub(crate) fn apply_min_max(col: &mut [f64], min: f64, max: f64) {
    let range = max - min;
    for x in col.iter_mut() {
        *x = (*x - min) / range;
    }
}

pub(crate) fn apply_indicator(col: &[f64], value: f64) -> Vec<f64> {
    col.iter().map(|&x| if x == value { 1.0 } else { 0.0 }).collect()
}

/// Maps `column` onto [0, 1] by `(x - min) / (max - min)`. A constant column
/// becomes all zeros and a warning is logged.
pub fn min_max_normalize(mut data: Dataset, column: &str) -> Result<Dataset, PrepError> {
    let col = data.column_mut(column)?;
    let (min, max) = col
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if col.is_empty() {
        return Ok(data);
    }
    if !(min.is_finite() && max.is_finite()) {
        return Err(PrepError::Config(format!("column `{column}` has non-finite values")));
    }
    let step = if max > min {
        apply_min_max(col, min, max);
        PrepStep::MinMax {
            column: column.to_string(),
            min,
            max,
        }
    } else {
        col.iter_mut().for_each(|x| *x = 0.0);
        PrepStep::ConstantColumn {
            column: column.to_string(),
            value: min,
        }
    };
    data.provenance.push(step);
    Ok(data)
}

/// Adds one 0/1 indicator per category whose sample share reaches `floor`.
///
/// A column coded exactly {0, 1} yields a single indicator for 1. The source
/// column is kept.
pub fn expand_categorical(
    mut data: Dataset,
    column: &str,
    categories: &[Category],
    floor: f64,
) -> Result<Dataset, PrepError> {
    let col = data
        .column(column)
        .ok_or_else(|| PrepError::UnknownColumn(column.to_string()))?
        .to_vec();
    let novel: BTreeSet<String> = col
        .iter()
        .filter(|x| !categories.iter().any(|c| c.value == **x))
        .map(|x| x.to_string())
        .collect();
    if !novel.is_empty() {
        return Err(PrepError::NovelCategory {
            column: column.to_string(),
            values: novel.into_iter().collect::<Vec<_>>().join(", "),
        });
    }
    let is_binary = categories.len() == 2
        && categories.iter().any(|c| c.value == 0.0)
        && categories.iter().any(|c| c.value == 1.0);
    let n = col.len().max(1) as f64;
    for cat in categories {
        if is_binary && cat.value == 0.0 {
            continue;
        }
        let values = apply_indicator(&col, cat.value);
        let share = values.iter().sum::<f64>() / n;
        if share >= floor {
            let indicator = format!("{column}_{}", cat.name);
            data.push_column(indicator.clone(), values)?;
            data.provenance.push(PrepStep::Expand {
                column: column.to_string(),
                value: cat.value,
                indicator,
                share,
            });
        } else {
            data.provenance.push(PrepStep::SkipCategory {
                column: column.to_string(),
                value: cat.value,
                name: cat.name.clone(),
                share,
            });
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(cols: Vec<(&str, Vec<f64>)>) -> Dataset {
        let n = cols[0].1.len();
        Dataset::from_columns(
            vec!["a".into(), "b".into()],
            cols.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            vec![0; n],
        )
        .unwrap()
    }

    #[test]
    fn scales_to_unit_interval() {
        let d = min_max_normalize(data(vec![("x", vec![0.0, 5.0, 10.0])]), "x").unwrap();
        assert_eq!(d.column("x").unwrap(), &[0.0, 0.5, 1.0]);
        assert_eq!(
            d.provenance.steps(),
            &[PrepStep::MinMax {
                column: "x".into(),
                min: 0.0,
                max: 10.0
            }]
        );
    }

    #[test]
    fn constant_column_becomes_zero_with_warning() {
        let d = min_max_normalize(data(vec![("x", vec![7.0, 7.0, 7.0])]), "x").unwrap();
        assert_eq!(d.column("x").unwrap(), &[0.0, 0.0, 0.0]);
        assert_eq!(d.warnings().len(), 1);
        assert!(d.warnings()[0].contains("constant"));
    }

    #[test]
    fn unknown_column_errors() {
        assert!(matches!(
            min_max_normalize(data(vec![("x", vec![1.0])]), "y"),
            Err(PrepError::UnknownColumn(_))
        ));
    }

    #[test]
    fn road_surface_expands_to_row_stochastic_indicators() {
        let surface = vec![1.0, 2.0, 3.0, 4.0, 4.0, 2.0, 4.0, 1.0];
        let cats = vec![
            Category::new(1.0, "snowy"),
            Category::new(2.0, "wet"),
            Category::new(3.0, "icy"),
            Category::new(4.0, "other"),
        ];
        let d = expand_categorical(data(vec![("road_surface", surface.clone())]), "road_surface", &cats, 0.005).unwrap();
        let names = ["road_surface_snowy", "road_surface_wet", "road_surface_icy", "road_surface_other"];
        for row in 0..surface.len() {
            let s: f64 = names.iter().map(|n| d.column(n).unwrap()[row]).sum();
            assert_eq!(s, 1.0);
        }
        assert_eq!(d.column("road_surface").unwrap(), surface.as_slice());
    }

    #[test]
    fn binary_column_gives_single_identical_indicator() {
        let x = vec![0.0, 1.0, 1.0, 0.0];
        let cats = vec![Category::new(0.0, "no"), Category::new(1.0, "yes")];
        let d = expand_categorical(data(vec![("speeding", x.clone())]), "speeding", &cats, 0.005).unwrap();
        assert_eq!(d.column("speeding_yes").unwrap(), x.as_slice());
        assert!(d.column("speeding_no").is_none());
    }

    #[test]
    fn rare_category_is_skipped_and_logged() {
        let mut x = vec![1.0; 1000];
        x[3] = 2.0;
        let cats = vec![Category::new(1.0, "common"), Category::new(2.0, "rare")];
        let d = expand_categorical(data(vec![("c", x)]), "c", &cats, 0.005).unwrap();
        assert!(d.column("c_rare").is_none());
        assert!(d.column("c_common").is_some());
        assert!(matches!(
            d.provenance.steps().last(),
            Some(PrepStep::SkipCategory { share, .. }) if (*share - 0.001).abs() < 1e-15
        ));
    }

    #[test]
    fn novel_value_errors() {
        let cats = vec![Category::new(1.0, "one")];
        let err = expand_categorical(data(vec![("c", vec![1.0, 9.0])]), "c", &cats, 0.005).unwrap_err();
        assert!(err.to_string().contains('9'));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(xs in proptest::collection::vec(-1e6f64..1e6, 2..50)) {
            let once = min_max_normalize(data(vec![("x", xs)]), "x").unwrap();
            let twice = min_max_normalize(once.clone(), "x").unwrap();
            for (a, b) in once.column("x").unwrap().iter().zip(twice.column("x").unwrap()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
