use nalgebra::DMatrix;

use super::bfgs::{numeric_hessian, Objective};
use super::SeMethod;
use crate::kernel::Evaluator;
use crate::model::{ParamKind, ParamLayout};

struct TotalLikelihood<'a, 'b> {
    ev: &'b Evaluator<'a>,
}

impl Objective for TotalLikelihood<'_, '_> {
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.ev.log_likelihood_and_gradient(x).ok()
    }
}

/// Standard errors at `values`. Frozen slots get NaN. A singular information
/// matrix gives an error message and the caller reports NaN throughout.
pub(crate) fn standard_errors(
    ev: &Evaluator<'_>,
    values: &[f64],
    layout: &ParamLayout,
    frozen: &[bool],
    method: SeMethod,
) -> Result<Vec<f64>, String> {
    let k = values.len();
    let free: Vec<usize> = (0..k).filter(|&i| !frozen[i]).collect();
    let m = free.len();
    let info = match method {
        SeMethod::OuterProduct => {
            let scores = ev.observation_gradients(values).map_err(|e| e.to_string())?;
            let mut b = DMatrix::<f64>::zeros(m, m);
            for row in scores.chunks_exact(k) {
                for (a, &i) in free.iter().enumerate() {
                    let gi = row[i];
                    if gi == 0.0 {
                        continue;
                    }
                    for (c, &j) in free.iter().enumerate().skip(a) {
                        b[(a, c)] += gi * row[j];
                    }
                }
            }
            for a in 0..m {
                for c in 0..a {
                    b[(a, c)] = b[(c, a)];
                }
            }
            b
        }
        SeMethod::NumericHessian => {
            let steps: Vec<f64> = values
                .iter()
                .zip(&layout.slots)
                .map(|(&v, s)| {
                    let h = 1e-5 * v.abs().max(1.0);
                    match s.kind {
                        ParamKind::Iv => h.min(v.abs() / 4.0).max(1e-9),
                        ParamKind::Beta => h,
                    }
                })
                .collect();
            let h = numeric_hessian(&TotalLikelihood { ev }, values, &steps, frozen)
                .ok_or_else(|| "likelihood undefined near the estimate".to_string())?;
            DMatrix::from_fn(m, m, |a, c| -h[(free[a], free[c])])
        }
    };
    // Slots with no information (flat directions) are left out and get NaN.
    let max_diag = (0..m).map(|a| info[(a, a)].abs()).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..m).filter(|&a| info[(a, a)] > 1e-12 * max_diag).collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, c| info[(keep[a], keep[c])]);
    let cov = sub
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| sub.try_inverse())
        .ok_or_else(|| "information matrix is singular; standard errors unavailable".to_string())?;
    let mut se = vec![f64::NAN; k];
    for (a, &i) in keep.iter().enumerate() {
        let v = cov[(a, a)];
        se[free[i]] = if v > 0.0 && v.is_finite() { v.sqrt() } else { f64::NAN };
    }
    Ok(se)
}
