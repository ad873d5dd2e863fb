use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{choice_probabilities, KernelError};
use crate::model::{DesignMatrix, NestTree, ParameterVector};

/// Generator behind every simulated draw, seeded with `seed_from_u64`.
pub const RNG_ALGORITHM: &str = "chacha20 (rand_chacha::ChaCha20Rng::seed_from_u64)";

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub choices: Vec<usize>,
    pub seed: u64,
    pub params: ParameterVector,
}

/// Draws one alternative per observation by inverting the CDF of its probability vector.
pub fn simulate(
    params: &ParameterVector,
    design: &DesignMatrix,
    tree: &NestTree,
    seed: u64,
) -> Result<SimOutput, KernelError> {
    let probs = choice_probabilities(params, design, tree)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let choices = (0..probs.n_obs)
        .map(|obs| draw(probs.row(obs), rng.random::<f64>()))
        .collect();
    Ok(SimOutput {
        choices,
        seed,
        params: params.clone(),
    })
}

fn draw(p: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        cum += pj;
        if u < cum {
            return j;
        }
    }
    // Rounding left the total just under u; fall back to the last alternative with mass.
    p.iter().rposition(|&pj| pj > 0.0).unwrap_or(p.len() - 1)
}
