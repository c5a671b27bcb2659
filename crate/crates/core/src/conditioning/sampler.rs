use serde::{Deserialize, Serialize};

use super::{cross_attention, AttentionWeights, ConditioningError, TokenSequence};

/// Step schedule of the toy sampler.
///
/// Steps are numbered `1..=total_steps`. Steps `1..=gate_step` apply only
/// the unconditional contraction; the condition enters at step
/// `gate_step + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub total_steps: usize,
    pub gate_step: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            total_steps: 50,
            gate_step: 30,
            alpha: 0.95,
            beta: 0.05,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ConditioningError> {
        if self.total_steps == 0 {
            return Err(ConditioningError::Config("total_steps must be positive".into()));
        }
        if self.gate_step > self.total_steps {
            return Err(ConditioningError::Config(format!(
                "gate_step {} exceeds total_steps {}",
                self.gate_step, self.total_steps
            )));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(ConditioningError::Config("alpha and beta must be finite".into()));
        }
        Ok(())
    }

    /// Whether step `t` (1-based) receives the condition.
    pub fn is_conditioned(&self, step: usize) -> bool {
        step > self.gate_step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub step: usize,
    pub latent: TokenSequence,
}

/// Runs the gated linear sampler and returns all `T + 1` states, starting
/// with `init` at step 0.
///
/// `x_t = alpha * x_{t-1}` for `t <= G`, and
/// `x_t = alpha * x_{t-1} + beta * cross_attention(x_{t-1}, condition)` for `t > G`.
pub fn gated_sample(
    init: &TokenSequence,
    condition: &TokenSequence,
    cfg: &SamplerConfig,
    weights: &AttentionWeights,
) -> Result<Vec<LatentState>, ConditioningError> {
    cfg.validate()?;
    for dim in [init.dim(), condition.dim()] {
        if dim != weights.dim() {
            return Err(ConditioningError::DimMismatch {
                expected: weights.dim(),
                got: dim,
            });
        }
    }
    let mut states = Vec::with_capacity(cfg.total_steps + 1);
    states.push(LatentState {
        step: 0,
        latent: init.clone(),
    });
    let mut x = init.matrix().clone();
    for step in 1..=cfg.total_steps {
        let mut next = &x * cfg.alpha;
        if cfg.is_conditioned(step) {
            let prev = TokenSequence(x);
            next += cross_attention(&prev, condition, weights)?.matrix() * cfg.beta;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(ConditioningError::NonFinite(format!("latent at step {step}")));
        }
        x = next;
        states.push(LatentState {
            step,
            latent: TokenSequence(x.clone()),
        });
    }
    Ok(states)
}

/// First step whose latents differ bitwise, if any.
pub fn first_divergence(a: &[LatentState], b: &[LatentState]) -> Option<usize> {
    a.iter()
        .zip(b)
        .find(|(sa, sb)| {
            let (ma, mb) = (sa.latent.matrix(), sb.latent.matrix());
            ma.shape() != mb.shape() || ma.iter().zip(mb.iter()).any(|(x, y)| x.to_bits() != y.to_bits())
        })
        .map(|(sa, _)| sa.step)
}
