//! DrGRPO objective arithmetic.
//!
//! Advantages are group-centered rewards with no standard-deviation scaling,
//! and the token-level clipped surrogate is summed over tokens without
//! dividing by sequence length. Gradients, rollouts and KL estimation are the
//! trainer's business; per-token KL values come in precomputed.

use thiserror::Error;

/// KL coefficient used by default on the command line.
pub const DEFAULT_BETA_KL: f64 = 0.01;
/// Group size used by default on the command line.
pub const DEFAULT_GROUP_SIZE: usize = 16;
pub const DEFAULT_EPSILON_CLIP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("empty group")]
    EmptyGroup,
    #[error("non-finite reward at position {0}")]
    NonFinite(usize),
    #[error("group rewards have zero variance")]
    ZeroVariance,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Rewards of the G responses sampled for one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRewards(Vec<f64>);

impl GroupRewards {
    pub fn new(rewards: Vec<f64>) -> Result<Self, GrpoError> {
        if rewards.is_empty() {
            return Err(GrpoError::EmptyGroup);
        }
        if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
            return Err(GrpoError::NonFinite(i));
        }
        Ok(GroupRewards(rewards))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// `A_i = r_i - mean(r)`.
pub fn group_advantages(g: &GroupRewards) -> Vec<f64> {
    let mean = g.mean();
    g.0.iter().map(|r| r - mean).collect()
}

/// Standard GRPO advantages `(r_i - mean) / std` with the population standard
/// deviation. Kept for comparison against the centered variant.
pub fn grpo_advantages_reference(g: &GroupRewards) -> Result<Vec<f64>, GrpoError> {
    if g.len() < 2 {
        return Err(GrpoError::ZeroVariance);
    }
    let centered = group_advantages(g);
    let var = centered.iter().map(|a| a * a).sum::<f64>() / g.len() as f64;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(GrpoError::ZeroVariance);
    }
    Ok(centered.into_iter().map(|a| a / std).collect())
}

/// `min(rho A, clip(rho, 1 - eps, 1 + eps) A)`.
pub fn clipped_term(ratio: f64, advantage: f64, epsilon_clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon_clip, 1.0 + epsilon_clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Per-token inputs for one group. `ratios[i][t]` and `kl[i][t]` belong to
/// token t of response i.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateInputs {
    pub ratios: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    pub kl: Vec<Vec<f64>>,
    pub epsilon_clip: f64,
    pub beta_kl: f64,
}

/// `(1/G) sum_i sum_t [clipped_term(rho_it, A_i) - beta kl_it]`, summed left
/// to right.
pub fn objective(s: &SurrogateInputs) -> Result<f64, GrpoError> {
    let g = s.advantages.len();
    if g == 0 {
        return Err(GrpoError::EmptyGroup);
    }
    if s.ratios.len() != g || s.kl.len() != g {
        return Err(GrpoError::ShapeMismatch(format!(
            "{} advantages, {} ratio rows, {} kl rows",
            g,
            s.ratios.len(),
            s.kl.len()
        )));
    }
    let mut total = 0.0;
    for (i, ((ratios, kl), &adv)) in s.ratios.iter().zip(&s.kl).zip(&s.advantages).enumerate() {
        if ratios.len() != kl.len() {
            return Err(GrpoError::ShapeMismatch(format!(
                "response {i}: {} ratios vs {} kl values",
                ratios.len(),
                kl.len()
            )));
        }
        for (&rho, &k) in ratios.iter().zip(kl) {
            total += clipped_term(rho, adv, s.epsilon_clip) - s.beta_kl * k;
        }
    }
    Ok(total / g as f64)
}
