use rand_distr::{Distribution, Normal};

use crate::env::{EpiState, NUM_ACTIONS};
use crate::error::Result;
use crate::nn::{clip_grad_norm, Adam, MlpSpec, ParamVector};
use crate::rng::{rng_from_seed, SimRng};

use super::ddpg::{critic_input, noisy_action, soft_update, OffPolicyBatch};
use super::losses::{critic_loss, deterministic_actor_loss};
use super::{load_into, ActMode, Action, Agent, AgentConfig, AgentKind, Diagnostics, ReplayBuffer, Transition};

/// Twin critics, target policy smoothing and delayed actor updates.
pub struct Td3Agent {
    cfg: AgentConfig,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    actor: ParamVector,
    critics: [ParamVector; 2],
    actor_target: ParamVector,
    critic_targets: [ParamVector; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    replay: ReplayBuffer,
    steps: usize,
    update_calls: usize,
    actor_updates: usize,
}

impl Td3Agent {
    pub fn new(cfg: AgentConfig, init_seed: u64) -> Self {
        let mut rng = rng_from_seed(init_seed);
        let actor_spec = cfg.actor_spec();
        let critic_spec = cfg.q_spec();
        let actor = actor_spec.init(&mut rng, 0.1);
        let critics = [critic_spec.init(&mut rng, 1.0), critic_spec.init(&mut rng, 1.0)];
        let n_critic = critics[0].len();
        Self {
            actor_opt: Adam::new(cfg.actor_optimizer, actor.len()),
            critic_opts: [
                Adam::new(cfg.critic_optimizer, n_critic),
                Adam::new(cfg.critic_optimizer, n_critic),
            ],
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            replay: ReplayBuffer::new(cfg.replay_capacity),
            cfg,
            actor_spec,
            critic_spec,
            actor,
            critics,
            steps: 0,
            update_calls: 0,
            actor_updates: 0,
        }
    }

    pub fn actor_updates(&self) -> usize {
        self.actor_updates
    }

    /// Smoothed target action `clip(mu'(s') + clip(noise, -c, c), 0, 1)`.
    fn target_action(&self, next_state: &[f64; 4], rng: &mut SimRng) -> Result<Vec<f64>> {
        let mut a = self.actor_spec.forward(&self.actor_target, next_state)?;
        if self.cfg.target_noise > 0.0 {
            let normal = Normal::new(0.0, self.cfg.target_noise).expect("finite positive sigma");
            let c = self.cfg.target_noise_clip;
            for v in a.iter_mut() {
                *v = (*v + normal.sample(rng).clamp(-c, c)).clamp(0.0, 1.0);
            }
        }
        Ok(a)
    }

    /// `r + gamma * (1 - done) * min(Q1', Q2')(s', smoothed mu'(s'))`.
    pub fn critic_targets(&self, batch: &[Transition], rng: &mut SimRng) -> Result<Vec<f64>> {
        let b = OffPolicyBatch::new(batch, 1)?;
        self.targets_for(&b, rng)
    }

    fn targets_for(&self, b: &OffPolicyBatch, rng: &mut SimRng) -> Result<Vec<f64>> {
        let mut ys = Vec::with_capacity(b.rewards.len());
        for ((r, s2), done) in b.rewards.iter().zip(&b.next_states).zip(&b.dones) {
            // noise is drawn for every sample so the stream does not depend on `done`
            let a2 = self.target_action(s2, rng)?;
            let y = if *done || self.cfg.gamma == 0.0 {
                *r
            } else {
                let x = critic_input(s2, &a2);
                let q1 = self.critic_spec.forward(&self.critic_targets[0], &x)?[0];
                let q2 = self.critic_spec.forward(&self.critic_targets[1], &x)?[0];
                r + self.cfg.gamma * q1.min(q2)
            };
            ys.push(y);
        }
        Ok(ys)
    }

    /// Returns both critics' losses against the given targets.
    pub fn critic_losses(&self, batch: &[Transition], targets: &[f64]) -> Result<[f64; 2]> {
        let b = OffPolicyBatch::new(batch, 1)?;
        Ok([
            critic_loss(&self.critic_spec, &self.critics[0], &b.inputs, targets)?.loss,
            critic_loss(&self.critic_spec, &self.critics[1], &b.inputs, targets)?.loss,
        ])
    }

    pub fn update(&mut self, batch: &[Transition], rng: &mut SimRng) -> Result<Diagnostics> {
        let b = OffPolicyBatch::new(batch, self.cfg.batch_size)?;
        let ys = self.targets_for(&b, rng)?;
        let mut value_loss = 0.0;
        for i in 0..2 {
            let mut cl = critic_loss(&self.critic_spec, &self.critics[i], &b.inputs, &ys)?;
            clip_grad_norm(&mut cl.grad, self.cfg.max_grad_norm);
            self.critic_opts[i].step(&mut self.critics[i], &cl.grad)?;
            value_loss += cl.loss / 2.0;
        }
        self.update_calls += 1;
        let mut diag = Diagnostics {
            value_loss,
            updates: 1,
            ..Diagnostics::default()
        };
        if self.update_calls.is_multiple_of(self.cfg.policy_delay) {
            let mut al =
                deterministic_actor_loss(&self.actor_spec, &self.actor, &self.critic_spec, &self.critics[0], &b.states)?;
            clip_grad_norm(&mut al.grad, self.cfg.max_grad_norm);
            self.actor_opt.step(&mut self.actor, &al.grad)?;
            soft_update(&mut self.actor_target, &self.actor, self.cfg.tau);
            for i in 0..2 {
                soft_update(&mut self.critic_targets[i], &self.critics[i], self.cfg.tau);
            }
            self.actor_updates += 1;
            diag.policy_loss = al.loss;
            diag.actor_updates = 1;
        }
        Ok(diag)
    }
}

impl Agent for Td3Agent {
    fn kind(&self) -> AgentKind {
        AgentKind::Td3
    }

    fn act(&self, state: &EpiState, mode: ActMode, rng: &mut SimRng) -> Result<Action> {
        let mu = self.actor_spec.forward(&self.actor, &state.to_array())?;
        debug_assert_eq!(mu.len(), NUM_ACTIONS);
        let sigma = match mode {
            ActMode::Stochastic => self.cfg.exploration_noise,
            ActMode::Greedy => 0.0,
        };
        Ok(Action::Intensity(noisy_action(&mu, sigma, rng)))
    }

    fn observe(&mut self, transition: Transition, rng: &mut SimRng) -> Result<Diagnostics> {
        self.replay.push(transition);
        self.steps += 1;
        if self.replay.len() >= self.cfg.batch_size && self.steps.is_multiple_of(self.cfg.train_every) {
            let batch = self.replay.sample(self.cfg.batch_size, rng);
            return self.update(&batch, rng);
        }
        Ok(Diagnostics::default())
    }

    fn end_episode(&mut self, _rng: &mut SimRng) -> Result<Diagnostics> {
        Ok(Diagnostics::default())
    }

    fn params(&self) -> Vec<ParamVector> {
        vec![self.actor.clone(), self.critics[0].clone(), self.critics[1].clone()]
    }

    fn load(&mut self, params: &[ParamVector]) -> Result<()> {
        let [c1, c2] = &mut self.critics;
        load_into(&mut [&mut self.actor, c1, c2], params)
    }

    fn network_specs(&self) -> Vec<MlpSpec> {
        vec![self.actor_spec.clone(), self.critic_spec.clone(), self.critic_spec.clone()]
    }
}
