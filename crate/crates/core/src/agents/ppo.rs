use rand::seq::SliceRandom;

use crate::env::EpiState;
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, MlpSpec, ParamVector};
use crate::rng::{rng_from_seed, SimRng};

use super::a2c::OnPolicyBatch;
use super::losses::{normalize, ppo_policy_loss, value_loss};
use super::{categorical, load_into, ActMode, Action, Agent, AgentConfig, AgentKind, Diagnostics, Transition};

/// Clipped-surrogate PPO over one collected rollout per update.
pub struct PpoAgent {
    cfg: AgentConfig,
    policy_spec: MlpSpec,
    value_spec: MlpSpec,
    policy: ParamVector,
    value: ParamVector,
    policy_opt: Adam,
    value_opt: Adam,
    rollout: Vec<Transition>,
}

impl PpoAgent {
    pub fn new(cfg: AgentConfig, init_seed: u64) -> Self {
        let mut rng = rng_from_seed(init_seed);
        let policy_spec = cfg.policy_spec();
        let value_spec = cfg.value_spec();
        let policy = policy_spec.init(&mut rng, 0.01);
        let value = value_spec.init(&mut rng, 1.0);
        Self {
            policy_opt: Adam::new(cfg.actor_optimizer, policy.len()),
            value_opt: Adam::new(cfg.critic_optimizer, value.len()),
            cfg,
            policy_spec,
            value_spec,
            policy,
            value,
            rollout: Vec::new(),
        }
    }

    /// Log-probabilities of the rollout's actions under the current policy.
    pub fn behavior_log_probs(&self, rollout: &[Transition]) -> Result<Vec<f64>> {
        let batch = OnPolicyBatch::from_rollout(rollout)?;
        batch
            .states
            .iter()
            .zip(&batch.actions)
            .map(|(s, a)| Ok(categorical::log_prob(&self.policy_spec.forward(&self.policy, s)?, a)))
            .collect()
    }

    /// Rollout collected by the current policy: behavior log-probabilities
    /// are taken from it before the first gradient step.
    pub fn update(&mut self, rollout: &[Transition], rng: &mut SimRng) -> Result<Diagnostics> {
        let old = self.behavior_log_probs(rollout)?;
        self.update_with_log_probs(rollout, &old, rng)
    }

    pub fn update_with_log_probs(
        &mut self,
        rollout: &[Transition],
        old_log_probs: &[f64],
        rng: &mut SimRng,
    ) -> Result<Diagnostics> {
        let batch = OnPolicyBatch::from_rollout(rollout)?;
        if old_log_probs.len() != batch.states.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.states.len(),
                actual: old_log_probs.len(),
            });
        }
        let (returns, mut adv) = batch.returns_and_advantages(&self.value_spec, &self.value, self.cfg.gamma)?;
        if self.cfg.normalizes_advantages() {
            normalize(&mut adv);
        }
        let n = batch.states.len();
        let mb = self.cfg.minibatch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut diag = Diagnostics::default();
        for _ in 0..self.cfg.ppo_epochs {
            order.shuffle(rng);
            for chunk in order.chunks(mb) {
                let states: Vec<_> = chunk.iter().map(|&i| batch.states[i]).collect();
                let actions: Vec<_> = chunk.iter().map(|&i| batch.actions[i]).collect();
                let olp: Vec<_> = chunk.iter().map(|&i| old_log_probs[i]).collect();
                let a: Vec<_> = chunk.iter().map(|&i| adv[i]).collect();
                let g: Vec<_> = chunk.iter().map(|&i| returns[i]).collect();
                let (mut pl, stats) = ppo_policy_loss(
                    &self.policy_spec,
                    &self.policy,
                    &states,
                    &actions,
                    &olp,
                    &a,
                    self.cfg.clip_eps,
                    self.cfg.entropy_coef,
                )?;
                let mut vl = value_loss(&self.value_spec, &self.value, &states, &g, self.cfg.value_coef)?;
                clip_grad_norm(&mut pl.grad, self.cfg.max_grad_norm);
                clip_grad_norm(&mut vl.grad, self.cfg.max_grad_norm);
                self.policy_opt.step(&mut self.policy, &pl.grad)?;
                self.value_opt.step(&mut self.value, &vl.grad)?;
                diag.policy_loss = pl.loss;
                diag.value_loss = vl.loss;
                diag.entropy = stats.entropy;
                diag.updates += 1;
                diag.actor_updates += 1;
            }
        }
        Ok(diag)
    }
}

impl Agent for PpoAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Ppo
    }

    fn act(&self, state: &EpiState, mode: ActMode, rng: &mut SimRng) -> Result<Action> {
        let z = self.policy_spec.forward(&self.policy, &state.to_array())?;
        Ok(Action::Levels(match mode {
            ActMode::Stochastic => categorical::sample(&z, rng),
            ActMode::Greedy => categorical::greedy(&z),
        }))
    }

    fn observe(&mut self, transition: Transition, rng: &mut SimRng) -> Result<Diagnostics> {
        self.rollout.push(transition);
        if self.rollout.len() < self.cfg.effective_rollout_len() {
            return Ok(Diagnostics::default());
        }
        let rollout = std::mem::take(&mut self.rollout);
        self.update(&rollout, rng)
    }

    fn end_episode(&mut self, rng: &mut SimRng) -> Result<Diagnostics> {
        if self.rollout.is_empty() {
            return Ok(Diagnostics::default());
        }
        let rollout = std::mem::take(&mut self.rollout);
        self.update(&rollout, rng)
    }

    fn params(&self) -> Vec<ParamVector> {
        vec![self.policy.clone(), self.value.clone()]
    }

    fn load(&mut self, params: &[ParamVector]) -> Result<()> {
        load_into(&mut [&mut self.policy, &mut self.value], params)
    }

    fn network_specs(&self) -> Vec<MlpSpec> {
        vec![self.policy_spec.clone(), self.value_spec.clone()]
    }
}
