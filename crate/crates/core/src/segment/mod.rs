//! Two-segment comparison: fit the primary segment, keep its significant
//! terms, refit the secondary segment on them, and ratio matched coefficients.

mod report;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::dataprep::Dataset;
use crate::estimator::{fit, EstimationResult, FitError, FitOptions};
use crate::model::{ModelSpec, ParamKind};

pub use report::{gap_report, render_gap_report, GapReportFiles};

/// Two-sided 10% critical value.
pub const DEFAULT_ALPHA_T: f64 = 1.645;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("segment `{segment}`: {source}")]
    Fit {
        segment: String,
        #[source]
        source: FitError,
    },
    #[error(
        "no covariate in the primary fit reaches |t| >= {alpha_t}; compare the two segments with separate full fits instead"
    )]
    EmptyRestriction { alpha_t: f64 },
    #[error("segments do not share a schema: {0}")]
    Schema(String),
    #[error("segment `{0}` has no observations")]
    Empty(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimarySelection {
    First,
    Second,
    /// The segment with more rows; the first on a tie.
    #[default]
    Larger,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareOptions {
    pub fit: FitOptions,
    pub alpha_t: f64,
    pub primary: PrimarySelection,
    pub labels: (String, String),
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            alpha_t: DEFAULT_ALPHA_T,
            primary: PrimarySelection::Larger,
            labels: ("a".into(), "b".into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Primary,
    Secondary,
    SignConflict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientRatio {
    pub parameter: String,
    pub alternatives: Vec<String>,
    pub primary_coef: f64,
    pub primary_t: f64,
    pub secondary_coef: f64,
    pub secondary_t: f64,
    /// `None` for sign conflicts.
    pub ratio: Option<f64>,
    pub dominant: Dominance,
}

/// Ratio of a matched pair. `None` unless both |t| reach `alpha_t`.
pub fn coefficient_ratio(
    parameter: &str,
    alternatives: &[String],
    primary: (f64, f64),
    secondary: (f64, f64),
    alpha_t: f64,
) -> Option<CoefficientRatio> {
    let significant = |t: f64| t.abs() >= alpha_t;
    if !(significant(primary.1) && significant(secondary.1)) || primary.0 == 0.0 || secondary.0 == 0.0 {
        return None;
    }
    let (ratio, dominant) = if primary.0.signum() != secondary.0.signum() {
        (None, Dominance::SignConflict)
    } else {
        let r = primary.0 / secondary.0;
        (Some(r), if r > 1.0 { Dominance::Primary } else { Dominance::Secondary })
    };
    Some(CoefficientRatio {
        parameter: parameter.to_string(),
        alternatives: alternatives.to_vec(),
        primary_coef: primary.0,
        primary_t: primary.1,
        secondary_coef: secondary.0,
        secondary_t: secondary.1,
        ratio,
        dominant,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentedComparison {
    pub primary_label: String,
    pub secondary_label: String,
    pub primary_result: EstimationResult,
    pub secondary_result: EstimationResult,
    #[serde(skip)]
    pub restricted_spec: ModelSpec,
    pub alpha_t: f64,
    pub ratios: Vec<CoefficientRatio>,
    /// Significant in the primary fit, not in the secondary.
    pub dropped: Vec<String>,
}

impl SegmentedComparison {
    fn ordered(&self, side: Dominance) -> Vec<&CoefficientRatio> {
        let mut v: Vec<&CoefficientRatio> = self.ratios.iter().filter(|r| r.dominant == side).collect();
        v.sort_by(|a, b| {
            let da = (a.ratio.unwrap() - 1.0).abs();
            let db = (b.ratio.unwrap() - 1.0).abs();
            db.total_cmp(&da).then_with(|| a.parameter.cmp(&b.parameter))
        });
        v
    }

    /// Ratios above 1, farthest from 1 first.
    pub fn primary_dominant(&self) -> Vec<&CoefficientRatio> {
        self.ordered(Dominance::Primary)
    }

    /// Ratios at or below 1, farthest from 1 first.
    pub fn secondary_dominant(&self) -> Vec<&CoefficientRatio> {
        self.ordered(Dominance::Secondary)
    }

    pub fn sign_conflicts(&self) -> Vec<&CoefficientRatio> {
        self.ratios.iter().filter(|r| r.dominant == Dominance::SignConflict).collect()
    }

    pub fn both_converged(&self) -> bool {
        self.primary_result.converged && self.secondary_result.converged
    }
}

/// Keeps constants and every covariate term with |t| >= `alpha_t`. The tree is unchanged.
pub fn restrict_spec(spec: &ModelSpec, result: &EstimationResult, alpha_t: f64) -> Result<ModelSpec, SegmentError> {
    let keep = |name: &str| {
        if spec.is_constant_parameter(name) || alpha_t <= 0.0 {
            return true;
        }
        result.t_stat(name).is_some_and(|t| t.abs() >= alpha_t)
    };
    let terms: Vec<_> = spec.terms.iter().filter(|t| keep(&t.parameter)).cloned().collect();
    let had_covariates = spec.terms.iter().any(|t| !t.covariate.is_constant());
    if had_covariates && terms.iter().all(|t| t.covariate.is_constant()) {
        return Err(SegmentError::EmptyRestriction { alpha_t });
    }
    Ok(ModelSpec {
        tree: spec.tree.clone(),
        terms,
        base_alternative: spec.base_alternative.clone(),
    })
}

/// Fits the primary segment on `spec`, the secondary on the restriction, and ratios matched coefficients.
pub fn compare_segments(
    spec: &ModelSpec,
    first: &Dataset,
    second: &Dataset,
    options: &CompareOptions,
) -> Result<SegmentedComparison, SegmentError> {
    let (la, lb) = (&options.labels.0, &options.labels.1);
    for (label, d) in [(la, first), (lb, second)] {
        if d.rows() == 0 {
            return Err(SegmentError::Empty(label.clone()));
        }
    }
    let alts = |d: &Dataset| d.alternatives().iter().cloned().collect::<BTreeSet<_>>();
    if alts(first) != alts(second) {
        return Err(SegmentError::Schema(format!(
            "alternatives differ: {:?} vs {:?}",
            first.alternatives(),
            second.alternatives()
        )));
    }
    let first_is_primary = match options.primary {
        PrimarySelection::First => true,
        PrimarySelection::Second => false,
        PrimarySelection::Larger => first.rows() >= second.rows(),
    };
    let ((pl, pd), (sl, sd)) = if first_is_primary {
        ((la, first), (lb, second))
    } else {
        ((lb, second), (la, first))
    };
    let primary_result = fit(spec, pd, &options.fit).map_err(|source| SegmentError::Fit {
        segment: pl.clone(),
        source,
    })?;
    let restricted_spec = restrict_spec(spec, &primary_result, options.alpha_t)?;
    let secondary_result = fit(&restricted_spec, sd, &options.fit).map_err(|source| SegmentError::Fit {
        segment: sl.clone(),
        source,
    })?;

    let mut ratios = Vec::new();
    let mut dropped = Vec::new();
    for p in secondary_result.parameters.iter().filter(|p| p.kind == ParamKind::Beta) {
        if restricted_spec.is_constant_parameter(&p.name) {
            continue;
        }
        let Some(pp) = primary_result.get(&p.name) else { continue };
        if pp.t_stat.abs() < options.alpha_t {
            continue;
        }
        if !(p.t_stat.abs() >= options.alpha_t) {
            dropped.push(p.name.clone());
            continue;
        }
        if let Some(r) = coefficient_ratio(
            &p.name,
            &p.alternatives,
            (pp.estimate, pp.t_stat),
            (p.estimate, p.t_stat),
            options.alpha_t,
        ) {
            ratios.push(r);
        }
    }
    Ok(SegmentedComparison {
        primary_label: pl.clone(),
        secondary_label: sl.clone(),
        primary_result,
        secondary_result,
        restricted_spec,
        alpha_t: options.alpha_t,
        ratios,
        dropped,
    })
}

#[cfg(test)]
mod tests;
