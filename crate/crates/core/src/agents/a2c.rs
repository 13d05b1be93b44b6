use crate::env::{ActionLevels, EpiState, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, MlpSpec, ParamVector};
use crate::rng::{rng_from_seed, SimRng};

use super::losses::{discounted_returns, normalize, policy_gradient_loss, value_loss};
use super::{categorical, expect_levels, load_into, ActMode, Action, Agent, AgentConfig, AgentKind, Diagnostics, Transition};

/// Rollout columns shared by the on-policy agents.
pub(crate) struct OnPolicyBatch {
    pub states: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<ActionLevels>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub last_next_state: [f64; OBS_DIM],
}

impl OnPolicyBatch {
    pub fn from_rollout(rollout: &[Transition]) -> Result<Self> {
        let last = rollout.last().ok_or(Error::EmptyRollout)?;
        let mut actions = Vec::with_capacity(rollout.len());
        for t in rollout {
            actions.push(expect_levels(&t.action)?);
        }
        Ok(Self {
            states: rollout.iter().map(|t| t.state.to_array()).collect(),
            actions,
            rewards: rollout.iter().map(|t| t.reward).collect(),
            dones: rollout.iter().map(|t| t.done).collect(),
            last_next_state: last.next_state.to_array(),
        })
    }

    /// Returns and `returns - V(s)` under the given value network.
    pub fn returns_and_advantages(
        &self,
        value_spec: &MlpSpec,
        value: &ParamVector,
        gamma: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let bootstrap = if *self.dones.last().expect("non-empty batch") {
            0.0
        } else {
            value_spec.forward(value, &self.last_next_state)?[0]
        };
        let returns = discounted_returns(&self.rewards, &self.dones, gamma, bootstrap);
        let mut adv = Vec::with_capacity(returns.len());
        for (s, g) in self.states.iter().zip(&returns) {
            adv.push(g - value_spec.forward(value, s)?[0]);
        }
        Ok((returns, adv))
    }
}

/// Synchronous advantage actor-critic with separate policy and value networks.
pub struct A2cAgent {
    cfg: AgentConfig,
    policy_spec: MlpSpec,
    value_spec: MlpSpec,
    policy: ParamVector,
    value: ParamVector,
    policy_opt: Adam,
    value_opt: Adam,
    rollout: Vec<Transition>,
}

impl A2cAgent {
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

    pub fn logits(&self, state: &EpiState) -> Result<Vec<f64>> {
        self.policy_spec.forward(&self.policy, &state.to_array())
    }

    pub fn value_of(&self, state: &EpiState) -> Result<f64> {
        Ok(self.value_spec.forward(&self.value, &state.to_array())?[0])
    }

    /// One actor step and one critic step on an ordered rollout.
    pub fn update(&mut self, rollout: &[Transition]) -> Result<Diagnostics> {
        let batch = OnPolicyBatch::from_rollout(rollout)?;
        let (returns, mut adv) = batch.returns_and_advantages(&self.value_spec, &self.value, self.cfg.gamma)?;
        if self.cfg.normalizes_advantages() {
            normalize(&mut adv);
        }
        let (mut pl, entropy) = policy_gradient_loss(
            &self.policy_spec,
            &self.policy,
            &batch.states,
            &batch.actions,
            &adv,
            self.cfg.entropy_coef,
        )?;
        let mut vl = value_loss(&self.value_spec, &self.value, &batch.states, &returns, self.cfg.value_coef)?;
        clip_grad_norm(&mut pl.grad, self.cfg.max_grad_norm);
        clip_grad_norm(&mut vl.grad, self.cfg.max_grad_norm);
        self.policy_opt.step(&mut self.policy, &pl.grad)?;
        self.value_opt.step(&mut self.value, &vl.grad)?;
        Ok(Diagnostics {
            policy_loss: pl.loss,
            value_loss: vl.loss,
            entropy,
            updates: 1,
            actor_updates: 1,
        })
    }
}

impl Agent for A2cAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::A2c
    }

    fn act(&self, state: &EpiState, mode: ActMode, rng: &mut SimRng) -> Result<Action> {
        let z = self.logits(state)?;
        Ok(Action::Levels(match mode {
            ActMode::Stochastic => categorical::sample(&z, rng),
            ActMode::Greedy => categorical::greedy(&z),
        }))
    }

    fn observe(&mut self, transition: Transition, _rng: &mut SimRng) -> Result<Diagnostics> {
        self.rollout.push(transition);
        if self.rollout.len() < self.cfg.effective_rollout_len() {
            return Ok(Diagnostics::default());
        }
        let rollout = std::mem::take(&mut self.rollout);
        self.update(&rollout)
    }

    fn end_episode(&mut self, _rng: &mut SimRng) -> Result<Diagnostics> {
        if self.rollout.is_empty() {
            return Ok(Diagnostics::default());
        }
        let rollout = std::mem::take(&mut self.rollout);
        self.update(&rollout)
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
