use std::fmt::Write as _;

use super::EstimationResult;
use crate::model::{ModelSpec, ParamKind};

/// Pretty-printed JSON. Non-finite numbers are written as null.
pub fn result_to_json(result: &EstimationResult) -> String {
    serde_json::to_string_pretty(result).expect("result serialization cannot fail") + "\n"
}

/// Fixed-width table: coefficients grouped by alternative, then inclusive values and fit statistics.
pub fn render_table(result: &EstimationResult, spec: &ModelSpec) -> String {
    let mut s = String::new();
    let rule = "-".repeat(62);
    let _ = writeln!(s, "{:<36} {:>12} {:>12}", "Variable", "Coefficient", "t-test");
    let _ = writeln!(s, "{rule}");
    for alt in &spec.tree.alternatives {
        let rows: Vec<_> = result
            .parameters
            .iter()
            .filter(|p| p.kind == ParamKind::Beta && p.alternatives.contains(&alt.id))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(s, "{}", alt.id);
        for p in rows {
            let coef = format!("{:.3}{}", p.estimate, p.stars);
            let _ = writeln!(s, "  {:<34} {:>12} {:>12}", p.name, coef, fmt_t(p.t_stat));
        }
    }
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(s, "Inclusive value parameters");
    for iv in &result.iv_report {
        if iv.fixed {
            let _ = writeln!(s, "  {:<34} {:>12} {:>12}", iv.nest, format!("{} (Fixed)", iv.estimate), "");
        } else {
            let p = result.get(&iv.nest);
            let stars = p.map(|p| p.stars.as_str()).unwrap_or("");
            let t = p.map(|p| p.t_stat).unwrap_or(f64::NAN);
            let _ = writeln!(
                s,
                "  {:<34} {:>12} {:>12}",
                iv.nest,
                format!("{:.3}{}", iv.estimate, stars),
                fmt_t(t)
            );
        }
    }
    let _ = writeln!(s, "{rule}");
    let _ = writeln!(s, "{:<36} {:>12.3}", "Log-likelihood at convergence", result.ll_final);
    let _ = writeln!(s, "{:<36} {:>12.3}", "Log-likelihood of null model", result.ll_null);
    let _ = writeln!(s, "{:<36} {:>12.3}", "McFadden Pseudo Adjusted R^2", result.pseudo_adjusted_r2);
    let _ = writeln!(s, "{:<36} {:>12}", "Sample size", result.sample_size);
    let _ = writeln!(s, "{:<36} {:>12}", "Converged", if result.converged { "yes" } else { "no" });
    let _ = writeln!(s, "Significance: *** 1%, ** 5%, * 10%");
    for w in &result.separation {
        let _ = writeln!(s, "separation: {} at {:.3} ({})", w.parameter, w.magnitude, w.reason);
    }
    for w in &result.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn fmt_t(t: f64) -> String {
    if t.is_finite() {
        format!("{t:.2}")
    } else {
        "n/a".to_string()
    }
}
