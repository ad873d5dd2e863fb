//! Nested logit probabilities, log-likelihood and its gradient.
//!
//! Within nest `n` with inclusive value parameter `λ_n`:
//!
//! ```text
//! P(i | n) = exp(V_i / λ_n) / Σ_{j∈n} exp(V_j / λ_n)
//! IV_n     = ln Σ_{j∈n} exp(V_j / λ_n)
//! P(n)     = exp(λ_n IV_n) / Σ_m exp(λ_m IV_m)
//! P(i)     = P(n) P(i | n)
//! ```
//!
//! Every sum is taken in log space after subtracting its maximum, so utilities
//! of several hundred in magnitude never overflow. With all `λ_n = 1` the model
//! is multinomial logit.

mod simulate;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{DesignMatrix, IvSpec, NestTree, ParamKind, ParamLayout, ParameterVector};

pub use simulate::{simulate, SimOutput, RNG_ALGORITHM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("inclusive value of nest `{nest}` must be positive, got {value}")]
    NonPositiveIv { nest: String, value: f64 },
    #[error("non-finite utility for observation {obs}")]
    NonFiniteUtility { obs: usize },
    #[error("choice {choice} of observation {obs} is not a valid alternative index")]
    InvalidChoice { obs: usize, choice: usize },
    #[error("{0} choices supplied for {1} observations")]
    ChoiceCount(usize, usize),
    #[error("tree is not a partition of its alternatives")]
    NotPartition,
    #[error("design has {design} alternatives but the tree has {tree}")]
    AlternativeCount { design: usize, tree: usize },
    #[error("free nest `{0}` has no slot in the parameter layout")]
    MissingIvSlot(String),
}

/// How per-observation terms are summed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Single pass in observation order.
    #[default]
    Sequential,
    /// Fixed-size chunks evaluated on the rayon pool, combined in chunk order.
    Parallel,
}

const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug)]
enum IvSource {
    Fixed(f64),
    Slot(usize),
}

/// Tree and parameter layout resolved into index form.
#[derive(Clone, Debug)]
pub(crate) struct Structure {
    nest_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    iv: Vec<IvSource>,
    nest_ids: Vec<String>,
    n_params: usize,
}

impl Structure {
    pub(crate) fn new(tree: &NestTree, layout: &ParamLayout) -> Result<Self, KernelError> {
        let nest_of = tree.nest_of_alternatives().ok_or(KernelError::NotPartition)?;
        let members = tree
            .nests
            .iter()
            .map(|n| {
                n.members
                    .iter()
                    .map(|m| tree.alternative_index(m).ok_or(KernelError::NotPartition))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let iv = tree
            .nests
            .iter()
            .map(|n| match n.iv {
                IvSpec::Fixed(v) => Ok(IvSource::Fixed(v)),
                IvSpec::Free(_) => layout
                    .slots
                    .iter()
                    .position(|s| s.kind == ParamKind::Iv && s.name == n.id)
                    .map(IvSource::Slot)
                    .ok_or_else(|| KernelError::MissingIvSlot(n.id.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            nest_of,
            members,
            iv,
            nest_ids: tree.nests.iter().map(|n| n.id.clone()).collect(),
            n_params: layout.len(),
        })
    }

    pub(crate) fn n_alts(&self) -> usize {
        self.nest_of.len()
    }

    pub(crate) fn n_nests(&self) -> usize {
        self.members.len()
    }

    fn lambdas(&self, values: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.iv
            .iter()
            .zip(&self.nest_ids)
            .map(|(src, id)| {
                let v = match *src {
                    IvSource::Fixed(v) => v,
                    IvSource::Slot(i) => values[i],
                };
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(KernelError::NonPositiveIv {
                        nest: id.clone(),
                        value: v,
                    })
                }
            })
            .collect()
    }

    fn check_design(&self, design: &DesignMatrix) -> Result<(), KernelError> {
        if design.n_alternatives() != self.n_alts() {
            return Err(KernelError::AlternativeCount {
                design: design.n_alternatives(),
                tree: self.n_alts(),
            });
        }
        Ok(())
    }
}

/// Per-observation working buffers.
#[derive(Clone, Debug)]
struct Scratch {
    /// Utilities.
    v: Vec<f64>,
    /// ln P(i | n).
    log_cond: Vec<f64>,
    /// IV_n.
    logsum: Vec<f64>,
    /// ln P(n).
    log_nest: Vec<f64>,
}

impl Scratch {
    fn new(n_alts: usize, n_nests: usize) -> Self {
        Self {
            v: vec![0.0; n_alts],
            log_cond: vec![0.0; n_alts],
            logsum: vec![0.0; n_nests],
            log_nest: vec![0.0; n_nests],
        }
    }
}

/// Evaluates one observation's utilities and log-probabilities into `sc`.
#[inline]
fn evaluate_obs(
    st: &Structure,
    values: &[f64],
    lambdas: &[f64],
    design: &DesignMatrix,
    obs: usize,
    sc: &mut Scratch,
) -> Result<(), KernelError> {
    for (j, v) in sc.v.iter_mut().enumerate() {
        let (slots, xs) = design.row_slices(obs, j);
        let mut acc = 0.0;
        for (&s, &x) in slots.iter().zip(xs) {
            acc += values[s as usize] * x;
        }
        if !acc.is_finite() {
            return Err(KernelError::NonFiniteUtility { obs });
        }
        *v = acc;
    }
    let mut top_max = f64::NEG_INFINITY;
    for (n, members) in st.members.iter().enumerate() {
        let lam = lambdas[n];
        let max = members
            .iter()
            .map(|&j| sc.v[j] / lam)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = members.iter().map(|&j| (sc.v[j] / lam - max).exp()).sum();
        let iv = max + sum.ln();
        sc.logsum[n] = iv;
        for &j in members {
            sc.log_cond[j] = if members.len() == 1 { 0.0 } else { sc.v[j] / lam - iv };
        }
        let scaled = lam * iv;
        sc.log_nest[n] = scaled;
        top_max = top_max.max(scaled);
    }
    let denom = top_max
        + sc
            .log_nest
            .iter()
            .map(|&a| (a - top_max).exp())
            .sum::<f64>()
            .ln();
    for ln in sc.log_nest.iter_mut() {
        *ln -= denom;
    }
    Ok(())
}

/// Adds d ln P(chosen) / dθ for one evaluated observation into `grad`.
#[inline]
fn accumulate_gradient(
    st: &Structure,
    lambdas: &[f64],
    design: &DesignMatrix,
    obs: usize,
    chosen: usize,
    sc: &Scratch,
    grad: &mut [f64],
) {
    let m = st.nest_of[chosen];
    let lam_m = lambdas[m];
    let (slots, xs) = design.row_slices(obs, chosen);
    for (&s, &x) in slots.iter().zip(xs) {
        grad[s as usize] += x / lam_m;
    }
    let within = 1.0 - 1.0 / lam_m;
    for (n, members) in st.members.iter().enumerate() {
        let p_nest = sc.log_nest[n].exp();
        for &j in members {
            let p_cond = sc.log_cond[j].exp();
            let mut w = -p_nest * p_cond;
            if n == m {
                w += within * p_cond;
            }
            if w != 0.0 {
                let (slots, xs) = design.row_slices(obs, j);
                for (&s, &x) in slots.iter().zip(xs) {
                    grad[s as usize] += w * x;
                }
            }
        }
        if let IvSource::Slot(q) = st.iv[n] {
            let lam = lambdas[n];
            // Within-nest entropy, equal to d(λ IV)/dλ.
            let mut entropy = 0.0;
            let mut mean_scaled = 0.0;
            for &j in members {
                let lc = sc.log_cond[j];
                let p = lc.exp();
                entropy -= p * lc;
                mean_scaled += p * sc.v[j] / lam;
            }
            grad[q] += if n == m {
                (mean_scaled - sc.v[chosen] / lam) / lam + (1.0 - p_nest) * entropy
            } else {
                -p_nest * entropy
            };
        }
    }
}

/// Choice probabilities with their nest decomposition, stored observation-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityResult {
    pub n_obs: usize,
    pub n_alternatives: usize,
    pub n_nests: usize,
    /// P(i), `n_obs × n_alternatives`.
    pub probabilities: Vec<f64>,
    /// P(i | nest of i), `n_obs × n_alternatives`.
    pub conditional: Vec<f64>,
    /// P(n), `n_obs × n_nests`.
    pub nest_probabilities: Vec<f64>,
    /// IV_n, `n_obs × n_nests`.
    pub logsums: Vec<f64>,
    /// Nest index of each alternative.
    pub nest_of: Vec<usize>,
}

impl ProbabilityResult {
    pub fn row(&self, obs: usize) -> &[f64] {
        &self.probabilities[obs * self.n_alternatives..(obs + 1) * self.n_alternatives]
    }

    pub fn conditional_row(&self, obs: usize) -> &[f64] {
        &self.conditional[obs * self.n_alternatives..(obs + 1) * self.n_alternatives]
    }

    pub fn nest_row(&self, obs: usize) -> &[f64] {
        &self.nest_probabilities[obs * self.n_nests..(obs + 1) * self.n_nests]
    }

    pub fn logsum_row(&self, obs: usize) -> &[f64] {
        &self.logsums[obs * self.n_nests..(obs + 1) * self.n_nests]
    }
}

pub fn choice_probabilities(
    params: &ParameterVector,
    design: &DesignMatrix,
    tree: &NestTree,
) -> Result<ProbabilityResult, KernelError> {
    let st = Structure::new(tree, &params.layout)?;
    st.check_design(design)?;
    let lambdas = st.lambdas(&params.values)?;
    let (na, nn) = (st.n_alts(), st.n_nests());
    let n_obs = design.n_obs();
    let mut out = ProbabilityResult {
        n_obs,
        n_alternatives: na,
        n_nests: nn,
        probabilities: Vec::with_capacity(n_obs * na),
        conditional: Vec::with_capacity(n_obs * na),
        nest_probabilities: Vec::with_capacity(n_obs * nn),
        logsums: Vec::with_capacity(n_obs * nn),
        nest_of: st.nest_of.clone(),
    };
    let mut sc = Scratch::new(na, nn);
    for obs in 0..n_obs {
        evaluate_obs(&st, &params.values, &lambdas, design, obs, &mut sc)?;
        let p_nest: Vec<f64> = sc.log_nest.iter().map(|l| l.exp()).collect();
        for j in 0..na {
            let cond = sc.log_cond[j].exp();
            out.conditional.push(cond);
            out.probabilities.push(p_nest[st.nest_of[j]] * cond);
        }
        out.nest_probabilities.extend_from_slice(&p_nest);
        out.logsums.extend_from_slice(&sc.logsum);
    }
    Ok(out)
}

/// Likelihood evaluator bound to one design, choice vector and tree.
pub struct Evaluator<'a> {
    st: Structure,
    design: &'a DesignMatrix,
    choices: &'a [usize],
    reduction: Reduction,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        tree: &NestTree,
        layout: &ParamLayout,
        design: &'a DesignMatrix,
        choices: &'a [usize],
        reduction: Reduction,
    ) -> Result<Self, KernelError> {
        let st = Structure::new(tree, layout)?;
        st.check_design(design)?;
        if choices.len() != design.n_obs() {
            return Err(KernelError::ChoiceCount(choices.len(), design.n_obs()));
        }
        if let Some((obs, &choice)) = choices.iter().enumerate().find(|(_, &c)| c >= st.n_alts()) {
            return Err(KernelError::InvalidChoice { obs, choice });
        }
        Ok(Self {
            st,
            design,
            choices,
            reduction,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.choices.len()
    }

    pub fn n_params(&self) -> usize {
        self.st.n_params
    }

    fn chunk_ll(&self, values: &[f64], lambdas: &[f64], range: std::ops::Range<usize>) -> Result<f64, KernelError> {
        let mut sc = Scratch::new(self.st.n_alts(), self.st.n_nests());
        let mut total = 0.0;
        for obs in range {
            evaluate_obs(&self.st, values, lambdas, self.design, obs, &mut sc)?;
            let c = self.choices[obs];
            total += sc.log_nest[self.st.nest_of[c]] + sc.log_cond[c];
        }
        Ok(total)
    }

    fn chunk_ll_grad(
        &self,
        values: &[f64],
        lambdas: &[f64],
        range: std::ops::Range<usize>,
    ) -> Result<(f64, Vec<f64>), KernelError> {
        let mut sc = Scratch::new(self.st.n_alts(), self.st.n_nests());
        let mut total = 0.0;
        let mut grad = vec![0.0; self.st.n_params];
        for obs in range {
            evaluate_obs(&self.st, values, lambdas, self.design, obs, &mut sc)?;
            let c = self.choices[obs];
            total += sc.log_nest[self.st.nest_of[c]] + sc.log_cond[c];
            accumulate_gradient(&self.st, lambdas, self.design, obs, c, &sc, &mut grad);
        }
        Ok((total, grad))
    }

    fn chunks(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.n_obs();
        (0..n.div_ceil(CHUNK))
            .map(|k| k * CHUNK..((k + 1) * CHUNK).min(n))
            .collect()
    }

    pub fn log_likelihood(&self, values: &[f64]) -> Result<f64, KernelError> {
        let lambdas = self.st.lambdas(values)?;
        match self.reduction {
            Reduction::Sequential => self.chunk_ll(values, &lambdas, 0..self.n_obs()),
            Reduction::Parallel => {
                let parts: Vec<f64> = self
                    .chunks()
                    .into_par_iter()
                    .map(|r| self.chunk_ll(values, &lambdas, r))
                    .collect::<Result<_, _>>()?;
                Ok(parts.iter().sum())
            }
        }
    }

    pub fn log_likelihood_and_gradient(&self, values: &[f64]) -> Result<(f64, Vec<f64>), KernelError> {
        let lambdas = self.st.lambdas(values)?;
        match self.reduction {
            Reduction::Sequential => self.chunk_ll_grad(values, &lambdas, 0..self.n_obs()),
            Reduction::Parallel => {
                let parts: Vec<(f64, Vec<f64>)> = self
                    .chunks()
                    .into_par_iter()
                    .map(|r| self.chunk_ll_grad(values, &lambdas, r))
                    .collect::<Result<_, _>>()?;
                let mut total = 0.0;
                let mut grad = vec![0.0; self.st.n_params];
                for (ll, g) in parts {
                    total += ll;
                    grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Ok((total, grad))
            }
        }
    }

    /// Per-observation score vectors, `n_obs × n_params` row-major.
    pub fn observation_gradients(&self, values: &[f64]) -> Result<Vec<f64>, KernelError> {
        let lambdas = self.st.lambdas(values)?;
        let k = self.st.n_params;
        let mut out = vec![0.0; self.n_obs() * k];
        let mut sc = Scratch::new(self.st.n_alts(), self.st.n_nests());
        for (obs, row) in out.chunks_mut(k.max(1)).enumerate().take(self.n_obs()) {
            evaluate_obs(&self.st, values, &lambdas, self.design, obs, &mut sc)?;
            accumulate_gradient(&self.st, &lambdas, self.design, obs, self.choices[obs], &sc, row);
        }
        Ok(out)
    }
}

/// Σ ln P(chosen) over observations.
pub fn log_likelihood(
    params: &ParameterVector,
    design: &DesignMatrix,
    tree: &NestTree,
    choices: &[usize],
) -> Result<f64, KernelError> {
    Evaluator::new(tree, &params.layout, design, choices, Reduction::Sequential)?.log_likelihood(&params.values)
}

/// Analytic gradient of [`log_likelihood`] in the parameter vector's layout.
pub fn gradient(
    params: &ParameterVector,
    design: &DesignMatrix,
    tree: &NestTree,
    choices: &[usize],
) -> Result<Vec<f64>, KernelError> {
    Evaluator::new(tree, &params.layout, design, choices, Reduction::Sequential)?
        .log_likelihood_and_gradient(&params.values)
        .map(|(_, g)| g)
}

#[cfg(test)]
mod tests;
