use std::fmt::{self, Write as _};

use serde::Serialize;

use super::{EstimationResult, Stars};
use crate::model::{IvSpec, ModelSpec, ParamKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IvClass {
    ValidStrongCorrelation,
    ValidWeakCorrelation,
    Boundary,
    Violation,
}

impl fmt::Display for IvClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IvClass::ValidStrongCorrelation => "valid, strong within-nest correlation",
            IvClass::ValidWeakCorrelation => "valid, weak within-nest correlation",
            IvClass::Boundary => "fixed at 1, no within-nest correlation",
            IvClass::Violation => "violation, outside (0, 1]",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IvVerdict {
    pub nest: String,
    pub estimate: f64,
    pub class: IvClass,
}

impl IvVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self.class, IvClass::ValidStrongCorrelation | IvClass::ValidWeakCorrelation)
    }
}

/// Estimates at or above this count as weak correlation.
pub const WEAK_CORRELATION_FLOOR: f64 = 0.9;

/// One verdict per nest in tree order.
pub fn validate_iv(result: &EstimationResult) -> Vec<IvVerdict> {
    result
        .iv_report
        .iter()
        .map(|iv| {
            let class = if iv.fixed {
                if iv.estimate == 1.0 {
                    IvClass::Boundary
                } else if iv.estimate > 0.0 && iv.estimate < 1.0 {
                    strength(iv.estimate)
                } else {
                    IvClass::Violation
                }
            } else if !(iv.estimate > 0.0 && iv.estimate <= 1.0) {
                IvClass::Violation
            } else {
                strength(iv.estimate)
            };
            IvVerdict {
                nest: iv.nest.clone(),
                estimate: iv.estimate,
                class,
            }
        })
        .collect()
}

fn strength(x: f64) -> IvClass {
    if x >= WEAK_CORRELATION_FLOOR {
        IvClass::ValidWeakCorrelation
    } else {
        IvClass::ValidStrongCorrelation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignificanceLine {
    pub parameter: String,
    pub estimate: f64,
    pub t_stat: f64,
    pub sign: char,
    pub stars: Stars,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HensherReport {
    pub ll_final: f64,
    pub ll_null: f64,
    pub pseudo_adjusted_r2: f64,
    pub iv_verdicts: Vec<IvVerdict>,
    pub free_iv_count: usize,
    pub appropriate: bool,
    pub significance: Vec<SignificanceLine>,
}

impl HensherReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[1] Goodness of fit");
        let _ = writeln!(s, "  Log-likelihood at convergence: {:.3}", self.ll_final);
        let _ = writeln!(s, "  Log-likelihood of null model:  {:.3}", self.ll_null);
        let _ = writeln!(s, "  McFadden Pseudo Adjusted R^2:  {:.3}", self.pseudo_adjusted_r2);
        let _ = writeln!(s, "[2] Inclusive value");
        if self.free_iv_count == 0 {
            let _ = writeln!(s, "  no free inclusive values");
        }
        for v in &self.iv_verdicts {
            let _ = writeln!(s, "  {:<12} {:>8.3}  {}", v.nest, v.estimate, v.class);
        }
        if !self.appropriate {
            let _ = writeln!(s, "  model inappropriate: an inclusive value lies outside (0, 1]");
        }
        let _ = writeln!(s, "[3] Sign and significance");
        for l in &self.significance {
            let _ = writeln!(
                s,
                "  {:<36} {} {:>9.3}  t = {:>8.2} {}",
                l.parameter, l.sign, l.estimate, l.t_stat, l.stars
            );
        }
        s
    }
}

/// Goodness of fit, inclusive-value validity, and sign/significance listing.
pub fn hensher_diagnostics(result: &EstimationResult, spec: &ModelSpec) -> HensherReport {
    let iv_verdicts = validate_iv(result);
    let free_iv_count = spec.tree.nests.iter().filter(|n| matches!(n.iv, IvSpec::Free(_))).count();
    let appropriate = iv_verdicts.iter().all(|v| v.class != IvClass::Violation);
    let significance = result
        .parameters
        .iter()
        .filter(|p| p.kind == ParamKind::Beta)
        .map(|p| SignificanceLine {
            parameter: p.name.clone(),
            estimate: p.estimate,
            t_stat: p.t_stat,
            sign: if p.estimate < 0.0 { '-' } else { '+' },
            stars: p.stars,
        })
        .collect();
    HensherReport {
        ll_final: result.ll_final,
        ll_null: result.ll_null,
        pseudo_adjusted_r2: result.pseudo_adjusted_r2,
        iv_verdicts,
        free_iv_count,
        appropriate,
        significance,
    }
}
