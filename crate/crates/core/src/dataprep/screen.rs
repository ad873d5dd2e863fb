use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Dataset, PrepError};
use crate::estimator::{fit, FitOptions};
use crate::model::{ModelSpec, NestTree, UtilityTerm};

/// Pearson correlation. Zero when either column has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x[..n].iter().zip(&y[..n]) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Outcome of one collinear pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScreenDecision {
    pub first: String,
    pub second: String,
    pub correlation: f64,
    pub aic_first: Option<f64>,
    pub aic_second: Option<f64>,
    /// Column removed by this decision; `None` when an earlier decision already removed one of the pair.
    pub dropped: Option<String>,
}

impl ScreenDecision {
    pub fn describe(&self) -> String {
        match (&self.dropped, self.aic_first, self.aic_second) {
            (Some(d), Some(a), Some(b)) => format!(
                "|r({}, {})| = {:.4}; AIC {} = {:.4}, {} = {:.4}; dropped {}",
                self.first,
                self.second,
                self.correlation.abs(),
                self.first,
                a,
                self.second,
                b,
                d
            ),
            _ => format!(
                "|r({}, {})| = {:.4}; one column already dropped",
                self.first,
                self.second,
                self.correlation.abs()
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScreenOutcome {
    /// Surviving candidates in name order.
    pub kept: Vec<String>,
    pub decisions: Vec<ScreenDecision>,
}

/// Resolves every candidate pair with |r| above `threshold` by fitting a
/// single-covariate MNL for each column and dropping the higher AIC. Pairs
/// are visited in name order; ties keep the name-order first.
pub fn screen_collinearity(data: &Dataset, candidates: &[String], threshold: f64) -> Result<ScreenOutcome, PrepError> {
    let names: Vec<String> = candidates.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    for n in &names {
        if data.column(n).is_none() {
            return Err(PrepError::UnknownColumn(n.clone()));
        }
    }
    let mut kept: BTreeSet<String> = names.iter().cloned().collect();
    let mut aic_cache: BTreeMap<String, f64> = BTreeMap::new();
    let mut decisions = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let r = pearson(data.column(a).unwrap(), data.column(b).unwrap());
            if r.abs() <= threshold {
                continue;
            }
            if !(kept.contains(a) && kept.contains(b)) {
                decisions.push(ScreenDecision {
                    first: a.clone(),
                    second: b.clone(),
                    correlation: r,
                    aic_first: None,
                    aic_second: None,
                    dropped: None,
                });
                continue;
            }
            let aa = cached_aic(data, a, &mut aic_cache)?;
            let ab = cached_aic(data, b, &mut aic_cache)?;
            let dropped = if ab >= aa { b.clone() } else { a.clone() };
            kept.remove(&dropped);
            decisions.push(ScreenDecision {
                first: a.clone(),
                second: b.clone(),
                correlation: r,
                aic_first: Some(aa),
                aic_second: Some(ab),
                dropped: Some(dropped),
            });
        }
    }
    Ok(ScreenOutcome {
        kept: kept.into_iter().collect(),
        decisions,
    })
}

fn cached_aic(data: &Dataset, column: &str, cache: &mut BTreeMap<String, f64>) -> Result<f64, PrepError> {
    if let Some(&v) = cache.get(column) {
        return Ok(v);
    }
    let v = single_variable_aic(data, column)?;
    cache.insert(column.to_string(), v);
    Ok(v)
}

/// AIC = 2k - 2 LL of an MNL with alternative-specific constants and
/// alternative-specific slopes on `column`; the last alternative is the base.
fn single_variable_aic(data: &Dataset, column: &str) -> Result<f64, PrepError> {
    let alts: Vec<&str> = data.alternatives().iter().map(String::as_str).collect();
    let base = *alts.last().ok_or_else(|| PrepError::Config("no alternatives".into()))?;
    let mut terms = Vec::new();
    for alt in &alts[..alts.len() - 1] {
        terms.push(UtilityTerm::constant(format!("asc_{alt}"), alt));
        terms.push(UtilityTerm::new(format!("{column}_{alt}"), column, &[alt]));
    }
    let spec = ModelSpec::new(NestTree::mnl(&alts), terms, base);
    let result = fit(&spec, data, &FitOptions::default()).map_err(|e| PrepError::Fit(e.to_string()))?;
    Ok(2.0 * result.k_params as f64 - 2.0 * result.ll_final)
}
