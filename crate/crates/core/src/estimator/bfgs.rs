//! Quasi-Newton ascent with backtracking line search.

use nalgebra::{DMatrix, DVector};

/// Objective returning value and gradient, or `None` where undefined.
pub(crate) trait Objective {
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Clone, Debug)]
pub(crate) struct AscentSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Largest change of any coordinate in one trial step.
    pub max_step: f64,
    /// Coordinates that must stay strictly positive; a step may cover at most
    /// 90% of the distance to zero.
    pub positive: Vec<bool>,
}

#[derive(Clone, Debug)]
pub(crate) struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the start point and every accepted step.
    pub trace: Vec<f64>,
    pub note: Option<String>,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn max_abs(v: &[f64], frozen: &[bool]) -> f64 {
    v.iter()
        .zip(frozen)
        .filter(|(_, &f)| !f)
        .fold(0.0, |m, (x, _)| m.max(x.abs()))
}

fn masked(g: &[f64], frozen: &[bool]) -> DVector<f64> {
    DVector::from_iterator(g.len(), g.iter().zip(frozen).map(|(&x, &f)| if f { 0.0 } else { x }))
}

/// Hook run after every accepted step; may pin coordinates and returns true if it did.
pub(crate) type StepHook<'a> = dyn FnMut(&mut Vec<f64>, &mut [bool]) -> bool + 'a;

/// Maximizes `obj` from `x0`. Coordinates flagged in `frozen` stay fixed.
pub(crate) fn maximize(
    obj: &dyn Objective,
    x0: Vec<f64>,
    frozen: &mut [bool],
    settings: &AscentSettings,
    hook: &mut StepHook<'_>,
) -> Option<AscentOutcome> {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = obj.value_and_gradient(&x)?;
    let mut trace = vec![f];
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut note = None;

    while iterations < settings.max_iterations {
        if max_abs(&g, frozen) < settings.gradient_tolerance {
            break;
        }
        let gv = masked(&g, frozen);
        let mut d = &h_inv * &gv;
        for (k, &fz) in frozen.iter().enumerate() {
            if fz {
                d[k] = 0.0;
            }
        }
        let mut slope = gv.dot(&d);
        if slope <= 0.0 || !slope.is_finite() {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            d = gv.clone();
            slope = gv.dot(&d);
        }
        let biggest = d.amax();
        if biggest > settings.max_step {
            d *= settings.max_step / biggest;
            slope = gv.dot(&d);
        }

        let mut alpha: f64 = 1.0;
        for (k, &pos) in settings.positive.iter().enumerate() {
            if pos && d[k] < 0.0 && x[k] > 0.0 {
                alpha = alpha.min(0.9 * x[k] / -d[k]);
            }
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + alpha * di).collect();
            if let Some((ft, gt)) = obj.value_and_gradient(&trial) {
                if ft.is_finite() && ft >= f + ARMIJO * alpha * slope && ft >= f {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((mut xn, mut fnew, mut gn)) = accepted else {
            if fresh {
                note = Some("line search could not increase the likelihood".into());
                break;
            }
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        iterations += 1;

        if hook(&mut xn, frozen) {
            match obj.value_and_gradient(&xn) {
                Some((fv, gv)) => {
                    fnew = fv;
                    gn = gv;
                }
                None => {
                    note = Some("objective undefined after pinning a coordinate".into());
                    break;
                }
            }
            x = xn;
            f = fnew;
            g = gn;
            trace.push(f);
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        }

        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g.iter().zip(&gn).map(|(a, b)| a - b));
        let y = masked(y.as_slice(), frozen);
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if fresh {
                let scale = sy / y.dot(&y);
                h_inv = DMatrix::identity(n, n) * scale;
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        x = xn;
        f = fnew;
        g = gn;
        trace.push(f);
    }

    let converged = max_abs(&g, frozen) < settings.gradient_tolerance;
    if !converged && note.is_none() && iterations >= settings.max_iterations {
        note = Some(format!("reached the iteration limit of {}", settings.max_iterations));
    }
    Some(AscentOutcome {
        x,
        value: f,
        gradient: g,
        iterations,
        converged,
        trace,
        note,
    })
}

/// Symmetric central-difference Hessian of `obj` from its analytic gradient.
pub(crate) fn numeric_hessian(
    obj: &dyn Objective,
    x: &[f64],
    steps: &[f64],
    frozen: &[bool],
) -> Option<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        if frozen[k] {
            continue;
        }
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[k] += steps[k];
        dn[k] -= steps[k];
        let (_, gu) = obj.value_and_gradient(&up)?;
        let (_, gd) = obj.value_and_gradient(&dn)?;
        for i in 0..n {
            h[(i, k)] = (gu[i] - gd[i]) / (2.0 * steps[k]);
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    Some(sym)
}

/// Newton refinement using the numeric Hessian; each step is kept only if the
/// objective does not fall and the gradient shrinks.
pub(crate) fn newton_polish(
    obj: &dyn Objective,
    out: &mut AscentOutcome,
    frozen: &[bool],
    step_for: &dyn Fn(&[f64], usize) -> f64,
    rounds: usize,
) {
    let free: Vec<usize> = (0..out.x.len()).filter(|&k| !frozen[k]).collect();
    if free.is_empty() {
        return;
    }
    for _ in 0..rounds {
        let current = max_abs(&out.gradient, frozen);
        if current < 1e-13 {
            break;
        }
        let steps: Vec<f64> = (0..out.x.len()).map(|k| step_for(&out.x, k)).collect();
        let Some(h) = numeric_hessian(obj, &out.x, &steps, frozen) else {
            break;
        };
        let m = free.len();
        let neg = DMatrix::from_fn(m, m, |i, j| -h[(free[i], free[j])]);
        let rhs = DVector::from_iterator(m, free.iter().map(|&k| out.gradient[k]));
        let Some(chol) = neg.cholesky() else {
            break;
        };
        let delta = chol.solve(&rhs);
        if delta.amax() > 1.0 {
            break;
        }
        let mut trial = out.x.clone();
        for (i, &k) in free.iter().enumerate() {
            trial[k] += delta[i];
        }
        match obj.value_and_gradient(&trial) {
            Some((ft, gt)) if ft.is_finite() && ft >= out.value && max_abs(&gt, frozen) < current => {
                out.x = trial;
                out.value = ft;
                out.gradient = gt;
                out.trace.push(ft);
            }
            _ => break,
        }
    }
}
