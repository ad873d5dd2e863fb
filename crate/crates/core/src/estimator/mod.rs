//! Maximum-likelihood fitting, standard errors and fit diagnostics.

mod bfgs;
mod covariance;
mod diagnostics;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataprep::{Dataset, PrepError};
use crate::kernel::{Evaluator, KernelError, Reduction};
use crate::model::{
    build_design, validate_spec, DesignMatrix, IvSpec, ModelSpec, ParamKind, ParamLayout, ParameterVector, SpecError,
    Violation,
};

use bfgs::{maximize, newton_polish, AscentSettings, Objective};

pub use diagnostics::{hensher_diagnostics, validate_iv, HensherReport, IvClass, IvVerdict, SignificanceLine};
pub use report::{render_table, result_to_json};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid model specification:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidSpec(Vec<Violation>),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Data(#[from] PrepError),
    #[error("likelihood undefined at the start point: {0}")]
    Kernel(#[from] KernelError),
    #[error("dataset has no observations")]
    Empty,
    #[error("invalid fit options: {0}")]
    Options(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvParameterization {
    /// Inclusive values estimated as they are, validated afterwards.
    #[default]
    Direct,
    /// Inclusive values estimated through a logistic map onto (0, 1).
    Logistic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    /// LL(0) = N ln(1/J).
    #[default]
    EqualShares,
    /// Log-likelihood of the observed sample shares.
    ConstantsOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeMethod {
    /// Inverse of the summed outer products of per-observation scores.
    #[default]
    OuterProduct,
    /// Inverse of the negated central-difference Hessian.
    NumericHessian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Applied to the max-norm of the gradient of the mean per-observation log-likelihood.
    pub gradient_tolerance: f64,
    pub iv_parameterization: IvParameterization,
    pub null_model: NullModel,
    pub se_method: SeMethod,
    pub reduction: Reduction,
    /// Coefficients whose magnitude passes this bound are pinned there and flagged as separated.
    pub separation_cap: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            iv_parameterization: IvParameterization::Direct,
            null_model: NullModel::EqualShares,
            se_method: SeMethod::OuterProduct,
            reduction: Reduction::Sequential,
            separation_cap: 30.0,
        }
    }
}

impl FitOptions {
    fn check(&self) -> Result<(), FitError> {
        if self.max_iterations == 0 {
            return Err(FitError::Options("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(FitError::Options("gradient_tolerance must be positive".into()));
        }
        if !(self.separation_cap > 0.0) {
            return Err(FitError::Options("separation_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Significance marker from a two-sided normal test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stars {
    None,
    Ten,
    Five,
    One,
}

impl Stars {
    pub fn from_t(t: f64) -> Self {
        let a = t.abs();
        if a >= 2.576 {
            Stars::One
        } else if a >= 1.960 {
            Stars::Five
        } else if a >= 1.645 {
            Stars::Ten
        } else {
            Stars::None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::Ten => "*",
            Stars::Five => "**",
            Stars::One => "***",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Stars {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub kind: ParamKind,
    /// Covariate name for coefficients; nest id for inclusive values.
    pub covariate: String,
    /// Alternatives whose utility the coefficient enters (the nest's members for inclusive values).
    pub alternatives: Vec<String>,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub stars: Stars,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IvEstimate {
    pub nest: String,
    pub estimate: f64,
    pub fixed: bool,
    pub within_unit_interval: bool,
    pub distance_from_one: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationWarning {
    pub parameter: String,
    /// Estimate at which the coefficient was pinned or left.
    pub magnitude: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationResult {
    pub parameters: Vec<ParameterEstimate>,
    pub iv_report: Vec<IvEstimate>,
    pub ll_start: f64,
    pub ll_final: f64,
    pub ll_null: f64,
    pub null_model: NullModel,
    pub pseudo_adjusted_r2: f64,
    pub k_params: usize,
    pub sample_size: usize,
    pub choice_counts: Vec<(String, usize)>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
    pub se_method: SeMethod,
    pub iv_parameterization: IvParameterization,
    pub separation: Vec<SeparationWarning>,
    pub warnings: Vec<String>,
    /// Total log-likelihood at the start and after every accepted step.
    pub ll_trace: Vec<f64>,
}

impl EstimationResult {
    pub fn get(&self, name: &str) -> Option<&ParameterEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.estimate)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.std_error)
    }

    pub fn t_stat(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.t_stat)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            slots: self
                .parameters
                .iter()
                .map(|p| crate::model::Slot {
                    name: p.name.clone(),
                    kind: p.kind,
                })
                .collect(),
        }
    }

    pub fn parameter_vector(&self) -> ParameterVector {
        ParameterVector::new(self.layout(), self.parameters.iter().map(|p| p.estimate).collect())
    }
}

/// Adjusted likelihood-ratio index `1 - (ll_final - k) / ll_null`.
pub fn pseudo_adjusted_r2(ll_final: f64, ll_null: f64, k_params: usize) -> Result<f64, FitError> {
    if ll_null == 0.0 || !ll_null.is_finite() {
        return Err(FitError::Options(format!("null log-likelihood must be finite and non-zero, got {ll_null}")));
    }
    Ok(1.0 - (ll_final - k_params as f64) / ll_null)
}

/// Null-model log-likelihood for the given per-alternative choice counts.
pub fn null_log_likelihood(counts: &[usize], model: NullModel) -> f64 {
    let n: usize = counts.iter().sum();
    match model {
        NullModel::EqualShares => n as f64 * (1.0 / counts.len() as f64).ln(),
        NullModel::ConstantsOnly => counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| c as f64 * (c as f64 / n as f64).ln())
            .sum(),
    }
}

#[derive(Clone, Copy, Debug)]
enum Transform {
    Identity,
    Logistic,
}

struct MeanLikelihood<'a> {
    ev: Evaluator<'a>,
    transforms: Vec<Transform>,
    scale: f64,
}

impl MeanLikelihood<'_> {
    fn to_user(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.transforms)
            .map(|(&v, t)| match t {
                Transform::Identity => v,
                Transform::Logistic => 1.0 / (1.0 + (-v).exp()),
            })
            .collect()
    }

    fn to_internal(&self, user: &[f64]) -> Vec<f64> {
        user.iter()
            .zip(&self.transforms)
            .map(|(&v, t)| match t {
                Transform::Identity => v,
                Transform::Logistic => {
                    let p = if v > 0.0 && v < 1.0 { v } else { 0.5 };
                    (p / (1.0 - p)).ln()
                }
            })
            .collect()
    }
}

impl Objective for MeanLikelihood<'_> {
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let user = self.to_user(x);
        let (ll, mut g) = self.ev.log_likelihood_and_gradient(&user).ok()?;
        for ((gk, t), u) in g.iter_mut().zip(&self.transforms).zip(&user) {
            if let Transform::Logistic = t {
                *gk *= u * (1.0 - u);
            }
            *gk *= self.scale;
        }
        Some((ll * self.scale, g))
    }
}

/// Fits `spec` to `dataset`. Non-convergence is reported in the result, not as an error.
pub fn fit(spec: &ModelSpec, dataset: &Dataset, options: &FitOptions) -> Result<EstimationResult, FitError> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(FitError::InvalidSpec(violations));
    }
    let design = build_design(spec, dataset)?;
    let choices = dataset.choices_for(&spec.tree)?;
    fit_design(spec, &design, &choices, options)
}

/// As [`fit`], on a prebuilt design and tree-indexed choices.
pub fn fit_design(
    spec: &ModelSpec,
    design: &DesignMatrix,
    choices: &[usize],
    options: &FitOptions,
) -> Result<EstimationResult, FitError> {
    options.check()?;
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(FitError::InvalidSpec(violations));
    }
    let n = choices.len();
    if n == 0 {
        return Err(FitError::Empty);
    }
    let start = ParameterVector::start(spec);
    let layout = start.layout.clone();
    let ev = Evaluator::new(&spec.tree, &layout, design, choices, options.reduction)?;
    let ll_start = ev.log_likelihood(&start.values)?;

    let n_alts = spec.tree.n_alternatives();
    let mut counts = vec![0usize; n_alts];
    choices.iter().for_each(|&c| counts[c] += 1);
    let ll_null = null_log_likelihood(&counts, options.null_model);
    let choice_counts = spec
        .tree
        .alternatives
        .iter()
        .map(|a| (a.id.clone(), counts[a.index]))
        .collect();

    let mut warnings = Vec::new();
    let mut separation = Vec::new();
    let mut frozen = vec![false; layout.len()];

    let distinct = counts.iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        // Every observation chose one alternative: no finite maximum exists.
        let chosen = counts.iter().position(|&c| c > 0).unwrap_or(0);
        let chosen_id = &spec.tree.alternatives[chosen].id;
        for (k, slot) in layout.slots.iter().enumerate() {
            if slot.kind == ParamKind::Beta && spec.is_constant_parameter(&slot.name) {
                let sign = if spec.alternatives_of(&slot.name).contains(chosen_id) { 1.0 } else { -1.0 };
                separation.push(SeparationWarning {
                    parameter: slot.name.clone(),
                    magnitude: sign * options.separation_cap,
                    reason: format!("every observation chose `{chosen_id}`"),
                });
                frozen[k] = true;
            }
        }
        warnings.push(format!("all {n} observations chose `{chosen_id}`; the likelihood has no finite maximum"));
        return Ok(assemble(
            spec,
            &layout,
            start.values.clone(),
            vec![f64::NAN; layout.len()],
            Summary {
                ll_start,
                ll_final: ll_start,
                ll_null,
                null_model: options.null_model,
                sample_size: n,
                choice_counts,
                converged: false,
                iterations: 0,
                gradient_max_norm: f64::NAN,
                se_method: options.se_method,
                iv_parameterization: options.iv_parameterization,
                separation,
                warnings,
                ll_trace: vec![ll_start],
            },
        ));
    }

    let transforms: Vec<Transform> = layout
        .slots
        .iter()
        .map(|s| match (s.kind, options.iv_parameterization) {
            (ParamKind::Iv, IvParameterization::Logistic) => Transform::Logistic,
            _ => Transform::Identity,
        })
        .collect();
    let objective = MeanLikelihood {
        ev,
        transforms,
        scale: 1.0 / n as f64,
    };
    let cap = options.separation_cap;
    // Constants of never-chosen alternatives have their supremum at minus infinity.
    let mut x_start = start.values.clone();
    for (k, slot) in layout.slots.iter().enumerate() {
        if slot.kind != ParamKind::Beta || !spec.is_constant_parameter(&slot.name) {
            continue;
        }
        let alts = spec.alternatives_of(&slot.name);
        let unchosen = alts
            .iter()
            .all(|a| spec.tree.alternative_index(a).is_some_and(|j| counts[j] == 0));
        if unchosen {
            x_start[k] = -cap;
            frozen[k] = true;
            separation.push(SeparationWarning {
                parameter: slot.name.clone(),
                magnitude: -cap,
                reason: format!("alternative `{}` is never chosen", alts.join("`, `")),
            });
        }
    }
    let x0 = objective.to_internal(&x_start);
    let settings = AscentSettings {
        max_iterations: options.max_iterations,
        gradient_tolerance: options.gradient_tolerance,
        max_step: 5.0,
        positive: layout
            .slots
            .iter()
            .map(|s| s.kind == ParamKind::Iv && options.iv_parameterization == IvParameterization::Direct)
            .collect(),
    };
    let mut pinned: Vec<(String, f64)> = Vec::new();
    let mut hook = |x: &mut Vec<f64>, frozen: &mut [bool]| {
        let mut hit = false;
        for (k, slot) in layout.slots.iter().enumerate() {
            if slot.kind == ParamKind::Beta && !frozen[k] && x[k].abs() > cap {
                x[k] = cap.copysign(x[k]);
                frozen[k] = true;
                pinned.push((slot.name.clone(), x[k]));
                hit = true;
            }
        }
        hit
    };
    let mut outcome = maximize(&objective, x0, &mut frozen, &settings, &mut hook)
        .ok_or_else(|| FitError::Options("likelihood undefined at the start point".into()))?;
    drop(hook);
    let step_for = |x: &[f64], k: usize| polish_step(&layout, options.iv_parameterization, x, k);
    newton_polish(&objective, &mut outcome, &frozen, &step_for, 4);

    let gradient_max_norm = outcome
        .gradient
        .iter()
        .zip(&frozen)
        .filter(|(_, &f)| !f)
        .fold(0.0f64, |m, (g, _)| m.max(g.abs()));
    let mut converged = gradient_max_norm < options.gradient_tolerance;
    if let Some(note) = &outcome.note {
        if !converged && !outcome.converged {
            warnings.push(note.clone());
        }
    }

    for (name, value) in pinned {
        separation.push(SeparationWarning {
            parameter: name,
            magnitude: value,
            reason: format!("coefficient diverged past the cap of {cap}"),
        });
    }
    let user = objective.to_user(&outcome.x);
    let ll_final = objective.ev.log_likelihood(&user)?;
    let ll_trace = outcome.trace.iter().map(|v| v * n as f64).collect();
    let std_errors = covariance::standard_errors(&objective.ev, &user, &layout, &frozen, options.se_method)
        .unwrap_or_else(|msg| {
            warnings.push(msg);
            vec![f64::NAN; layout.len()]
        });
    for (k, slot) in layout.slots.iter().enumerate() {
        let t = user[k] / std_errors[k];
        if slot.kind == ParamKind::Beta
            && !frozen[k]
            && user[k].abs() > SUSPECT_MAGNITUDE
            && !(t.abs() >= 1.96)
            && !separation.iter().any(|s| s.parameter == slot.name)
        {
            separation.push(SeparationWarning {
                parameter: slot.name.clone(),
                magnitude: user[k],
                reason: format!("large estimate with |t| = {:.2}; the likelihood is flat toward infinity", t.abs()),
            });
        }
    }
    if !separation.is_empty() {
        converged = false;
    }
    if ll_final < ll_null {
        warnings.push(format!(
            "final log-likelihood {ll_final} is below the null log-likelihood {ll_null}"
        ));
    }

    Ok(assemble(
        spec,
        &layout,
        user,
        std_errors,
        Summary {
            ll_start,
            ll_final,
            ll_null,
            null_model: options.null_model,
            sample_size: n,
            choice_counts,
            converged,
            iterations: outcome.iterations,
            gradient_max_norm,
            se_method: options.se_method,
            iv_parameterization: options.iv_parameterization,
            separation,
            warnings,
            ll_trace,
        },
    ))
}

/// Coefficients past this size that are also insignificant are reported as separated.
const SUSPECT_MAGNITUDE: f64 = 10.0;

fn polish_step(layout: &ParamLayout, param: IvParameterization, x: &[f64], k: usize) -> f64 {
    let h = 1e-5 * x[k].abs().max(1.0);
    match (layout.slots[k].kind, param) {
        (ParamKind::Iv, IvParameterization::Direct) => h.min(x[k].abs() / 4.0).max(1e-9),
        _ => h,
    }
}

struct Summary {
    ll_start: f64,
    ll_final: f64,
    ll_null: f64,
    null_model: NullModel,
    sample_size: usize,
    choice_counts: Vec<(String, usize)>,
    converged: bool,
    iterations: usize,
    gradient_max_norm: f64,
    se_method: SeMethod,
    iv_parameterization: IvParameterization,
    separation: Vec<SeparationWarning>,
    warnings: Vec<String>,
    ll_trace: Vec<f64>,
}

fn assemble(
    spec: &ModelSpec,
    layout: &ParamLayout,
    estimates: Vec<f64>,
    std_errors: Vec<f64>,
    s: Summary,
) -> EstimationResult {
    let parameters = layout
        .slots
        .iter()
        .zip(estimates.iter().zip(&std_errors))
        .map(|(slot, (&estimate, &std_error))| {
            let (covariate, alternatives) = match slot.kind {
                ParamKind::Beta => {
                    let cov = spec
                        .terms
                        .iter()
                        .find(|t| t.parameter == slot.name)
                        .map(|t| t.covariate.name().to_string())
                        .unwrap_or_default();
                    (cov, spec.alternatives_of(&slot.name))
                }
                ParamKind::Iv => (
                    slot.name.clone(),
                    spec.tree
                        .nests
                        .iter()
                        .find(|n| n.id == slot.name)
                        .map(|n| n.members.clone())
                        .unwrap_or_default(),
                ),
            };
            let t_stat = if std_error > 0.0 { estimate / std_error } else { f64::NAN };
            ParameterEstimate {
                name: slot.name.clone(),
                kind: slot.kind,
                covariate,
                alternatives,
                estimate,
                std_error,
                t_stat,
                stars: Stars::from_t(t_stat),
            }
        })
        .collect();
    let iv_report = spec
        .tree
        .nests
        .iter()
        .map(|nest| {
            let (estimate, fixed) = match nest.iv {
                IvSpec::Fixed(v) => (v, true),
                IvSpec::Free(_) => (
                    layout
                        .index_of(&nest.id)
                        .map(|i| estimates[i])
                        .unwrap_or(f64::NAN),
                    false,
                ),
            };
            IvEstimate {
                nest: nest.id.clone(),
                estimate,
                fixed,
                within_unit_interval: estimate > 0.0 && estimate <= 1.0,
                distance_from_one: (1.0 - estimate).abs(),
            }
        })
        .collect();
    let k_params = layout.len();
    let pseudo_adjusted_r2 = pseudo_adjusted_r2(s.ll_final, s.ll_null, k_params).unwrap_or(f64::NAN);
    EstimationResult {
        parameters,
        iv_report,
        ll_start: s.ll_start,
        ll_final: s.ll_final,
        ll_null: s.ll_null,
        null_model: s.null_model,
        pseudo_adjusted_r2,
        k_params,
        sample_size: s.sample_size,
        choice_counts: s.choice_counts,
        converged: s.converged,
        iterations: s.iterations,
        gradient_max_norm: s.gradient_max_norm,
        se_method: s.se_method,
        iv_parameterization: s.iv_parameterization,
        separation: s.separation,
        warnings: s.warnings,
        ll_trace: s.ll_trace,
    }
}
