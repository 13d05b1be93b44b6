//! Batch losses and their exact parameter gradients.
//!
//! Every function here is a pure function of the parameters it
//! differentiates: targets, advantages and behavior log-probabilities are
//! passed in as constants, so finite differences on the returned `loss`
//! check the returned `grad` directly.

use crate::env::{ActionLevels, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ParamVector};

use super::categorical;

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Discounted returns, restarting at every `done`. `bootstrap` is the value
/// carried in after the last transition when it is not terminal.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap;
    for i in (0..rewards.len()).rev() {
        if dones[i] {
            running = 0.0;
        }
        running = rewards[i] + gamma * running;
        out[i] = running;
    }
    out
}

/// Shifts and scales to zero mean and unit variance; a constant input maps to zeros.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

fn check_batch(len: usize, others: &[usize]) -> Result<()> {
    if len == 0 {
        return Err(Error::EmptyRollout);
    }
    for &o in others {
        if o != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: o,
            });
        }
    }
    Ok(())
}

/// `mean(-A * log pi(a|s) - entropy_coef * H(s))`. Also returns the mean entropy.
pub fn policy_gradient_loss(
    spec: &MlpSpec,
    params: &ParamVector,
    states: &[[f64; OBS_DIM]],
    actions: &[ActionLevels],
    advantages: &[f64],
    entropy_coef: f64,
) -> Result<(LossGrad, f64)> {
    check_batch(states.len(), &[actions.len(), advantages.len()])?;
    let b = states.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut ent = 0.0;
    for ((s, a), adv) in states.iter().zip(actions).zip(advantages) {
        let trace = spec.trace(params, s)?;
        let z = trace.output();
        let lp = categorical::log_prob(z, a);
        let h = categorical::entropy(z);
        loss += (-adv * lp - entropy_coef * h) / b;
        ent += h / b;
        let dz = categorical::grad_logits(z, a, -adv / b, -entropy_coef / b);
        spec.backward_trace(params, &trace, &dz, &mut grad)?;
    }
    Ok((LossGrad { loss, grad }, ent))
}

/// `value_coef * mean((V(s) - G)^2)`.
pub fn value_loss(
    spec: &MlpSpec,
    params: &ParamVector,
    states: &[[f64; OBS_DIM]],
    returns: &[f64],
    value_coef: f64,
) -> Result<LossGrad> {
    check_batch(states.len(), &[returns.len()])?;
    let b = states.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (s, g) in states.iter().zip(returns) {
        let trace = spec.trace(params, s)?;
        let err = trace.output()[0] - g;
        loss += value_coef * err * err / b;
        spec.backward_trace(params, &trace, &[2.0 * value_coef * err / b], &mut grad)?;
    }
    Ok(LossGrad { loss, grad })
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurrogateStats {
    pub mean_surrogate: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// `mean(-clipped_surrogate(r, A) - entropy_coef * H)` with
/// `r = exp(log pi(a|s) - old_log_prob)`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_policy_loss(
    spec: &MlpSpec,
    params: &ParamVector,
    states: &[[f64; OBS_DIM]],
    actions: &[ActionLevels],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<(LossGrad, SurrogateStats)> {
    check_batch(states.len(), &[actions.len(), old_log_probs.len(), advantages.len()])?;
    let b = states.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut stats = SurrogateStats::default();
    for (((s, a), old), adv) in states.iter().zip(actions).zip(old_log_probs).zip(advantages) {
        let trace = spec.trace(params, s)?;
        let z = trace.output();
        let ratio = (categorical::log_prob(z, a) - old).exp();
        let surr = clipped_surrogate(ratio, *adv, clip_eps);
        let h = categorical::entropy(z);
        loss += (-surr - entropy_coef * h) / b;
        stats.mean_surrogate += surr / b;
        stats.entropy += h / b;
        // the unclipped branch carries the gradient unless the clip is binding
        let inside = ratio > 1.0 - clip_eps && ratio < 1.0 + clip_eps;
        let active = inside || ratio * adv <= ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
        if !inside {
            stats.clip_fraction += 1.0 / b;
        }
        let lp_coef = if active { -adv * ratio / b } else { 0.0 };
        let dz = categorical::grad_logits(z, a, lp_coef, -entropy_coef / b);
        spec.backward_trace(params, &trace, &dz, &mut grad)?;
    }
    Ok((LossGrad { loss, grad }, stats))
}

/// `mean((Q(s, a) - y)^2)`; each input row is the state followed by the action.
pub fn critic_loss(spec: &MlpSpec, params: &ParamVector, inputs: &[Vec<f64>], targets: &[f64]) -> Result<LossGrad> {
    check_batch(inputs.len(), &[targets.len()])?;
    let b = inputs.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        let trace = spec.trace(params, x)?;
        let err = trace.output()[0] - y;
        loss += err * err / b;
        spec.backward_trace(params, &trace, &[2.0 * err / b], &mut grad)?;
    }
    Ok(LossGrad { loss, grad })
}

/// `-mean(Q(s, mu(s)))`, differentiated with respect to the actor only.
pub fn deterministic_actor_loss(
    actor_spec: &MlpSpec,
    actor: &ParamVector,
    critic_spec: &MlpSpec,
    critic: &ParamVector,
    states: &[[f64; OBS_DIM]],
) -> Result<LossGrad> {
    check_batch(states.len(), &[])?;
    let b = states.len() as f64;
    let mut grad = vec![0.0; actor.len()];
    let mut loss = 0.0;
    for s in states {
        let a_trace = actor_spec.trace(actor, s)?;
        let mut x = s.to_vec();
        x.extend_from_slice(a_trace.output());
        let q_trace = critic_spec.trace(critic, &x)?;
        loss -= q_trace.output()[0] / b;
        let dx = critic_spec.input_gradient(critic, &q_trace, &[-1.0 / b])?;
        actor_spec.backward_trace(actor, &a_trace, &dx[OBS_DIM..], &mut grad)?;
    }
    Ok(LossGrad { loss, grad })
}
