use rand_distr::{Distribution, Normal};

use crate::env::{ActionIntensity, EpiState, NUM_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam, MlpSpec, ParamVector};
use crate::rng::{rng_from_seed, SimRng};

use super::losses::{critic_loss, deterministic_actor_loss};
use super::{expect_intensity, load_into, ActMode, Action, Agent, AgentConfig, AgentKind, Diagnostics, ReplayBuffer, Transition};

/// `target <- tau * online + (1 - tau) * target`.
pub(crate) fn soft_update(target: &mut ParamVector, online: &ParamVector, tau: f64) {
    for (t, o) in target.values_mut().iter_mut().zip(online.values()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

pub(crate) fn critic_input(state: &[f64; OBS_DIM], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(OBS_DIM + NUM_ACTIONS);
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

pub(crate) fn noisy_action(mean: &[f64], sigma: f64, rng: &mut SimRng) -> ActionIntensity {
    let mut a = [0.0; NUM_ACTIONS];
    a.copy_from_slice(mean);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        for v in a.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    ActionIntensity::clamped(a)
}

/// Columns of an off-policy minibatch.
pub(crate) struct OffPolicyBatch {
    pub states: Vec<[f64; OBS_DIM]>,
    pub inputs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<[f64; OBS_DIM]>,
    pub dones: Vec<bool>,
}

impl OffPolicyBatch {
    pub fn new(batch: &[Transition], minimum: usize) -> Result<Self> {
        if batch.len() < minimum.max(1) {
            return Err(Error::BatchTooSmall {
                minimum: minimum.max(1),
                actual: batch.len(),
            });
        }
        let mut inputs = Vec::with_capacity(batch.len());
        for t in batch {
            let a = expect_intensity(&t.action)?;
            inputs.push(critic_input(&t.state.to_array(), a.get()));
        }
        Ok(Self {
            states: batch.iter().map(|t| t.state.to_array()).collect(),
            inputs,
            rewards: batch.iter().map(|t| t.reward).collect(),
            next_states: batch.iter().map(|t| t.next_state.to_array()).collect(),
            dones: batch.iter().map(|t| t.done).collect(),
        })
    }
}

/// Deterministic policy gradient with a single critic and soft targets.
pub struct DdpgAgent {
    cfg: AgentConfig,
    actor_spec: MlpSpec,
    critic_spec: MlpSpec,
    actor: ParamVector,
    critic: ParamVector,
    actor_target: ParamVector,
    critic_target: ParamVector,
    actor_opt: Adam,
    critic_opt: Adam,
    replay: ReplayBuffer,
    steps: usize,
}

impl DdpgAgent {
    pub fn new(cfg: AgentConfig, init_seed: u64) -> Self {
        let mut rng = rng_from_seed(init_seed);
        let actor_spec = cfg.actor_spec();
        let critic_spec = cfg.q_spec();
        let actor = actor_spec.init(&mut rng, 0.1);
        let critic = critic_spec.init(&mut rng, 1.0);
        Self {
            actor_opt: Adam::new(cfg.actor_optimizer, actor.len()),
            critic_opt: Adam::new(cfg.critic_optimizer, critic.len()),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            replay: ReplayBuffer::new(cfg.replay_capacity),
            cfg,
            actor_spec,
            critic_spec,
            actor,
            critic,
            steps: 0,
        }
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn target_params(&self) -> (&ParamVector, &ParamVector) {
        (&self.actor_target, &self.critic_target)
    }

    /// `r + gamma * (1 - done) * Q'(s', mu'(s'))` per sample.
    pub fn critic_targets(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        self.targets_for(&OffPolicyBatch::new(batch, 1)?)
    }

    fn targets_for(&self, batch: &OffPolicyBatch) -> Result<Vec<f64>> {
        let mut ys = Vec::with_capacity(batch.rewards.len());
        for ((r, s2), done) in batch.rewards.iter().zip(&batch.next_states).zip(&batch.dones) {
            let y = if *done || self.cfg.gamma == 0.0 {
                *r
            } else {
                let a2 = self.actor_spec.forward(&self.actor_target, s2)?;
                let q = self.critic_spec.forward(&self.critic_target, &critic_input(s2, &a2))?[0];
                r + self.cfg.gamma * q
            };
            ys.push(y);
        }
        Ok(ys)
    }

    pub fn critic_loss_on(&self, batch: &[Transition]) -> Result<f64> {
        let b = OffPolicyBatch::new(batch, 1)?;
        let ys = self.targets_for(&b)?;
        Ok(critic_loss(&self.critic_spec, &self.critic, &b.inputs, &ys)?.loss)
    }

    pub fn update(&mut self, batch: &[Transition]) -> Result<Diagnostics> {
        let b = OffPolicyBatch::new(batch, self.cfg.batch_size)?;
        let ys = self.targets_for(&b)?;
        let mut cl = critic_loss(&self.critic_spec, &self.critic, &b.inputs, &ys)?;
        clip_grad_norm(&mut cl.grad, self.cfg.max_grad_norm);
        self.critic_opt.step(&mut self.critic, &cl.grad)?;

        let mut al = deterministic_actor_loss(&self.actor_spec, &self.actor, &self.critic_spec, &self.critic, &b.states)?;
        clip_grad_norm(&mut al.grad, self.cfg.max_grad_norm);
        self.actor_opt.step(&mut self.actor, &al.grad)?;

        soft_update(&mut self.critic_target, &self.critic, self.cfg.tau);
        soft_update(&mut self.actor_target, &self.actor, self.cfg.tau);
        Ok(Diagnostics {
            policy_loss: al.loss,
            value_loss: cl.loss,
            entropy: 0.0,
            updates: 1,
            actor_updates: 1,
        })
    }
}

impl Agent for DdpgAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Ddpg
    }

    fn act(&self, state: &EpiState, mode: ActMode, rng: &mut SimRng) -> Result<Action> {
        let mu = self.actor_spec.forward(&self.actor, &state.to_array())?;
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
            return self.update(&batch);
        }
        Ok(Diagnostics::default())
    }

    fn end_episode(&mut self, _rng: &mut SimRng) -> Result<Diagnostics> {
        Ok(Diagnostics::default())
    }

    fn params(&self) -> Vec<ParamVector> {
        vec![self.actor.clone(), self.critic.clone()]
    }

    fn load(&mut self, params: &[ParamVector]) -> Result<()> {
        load_into(&mut [&mut self.actor, &mut self.critic], params)
    }

    fn network_specs(&self) -> Vec<MlpSpec> {
        vec![self.actor_spec.clone(), self.critic_spec.clone()]
    }
}

#[cfg(test)]
impl DdpgAgent {
    pub(crate) fn set_targets_for_test(&mut self, actor: ParamVector, critic: ParamVector) {
        self.actor_target = actor;
        self.critic_target = critic;
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;

    pub(crate) fn random_batch(n: usize, seed: u64) -> Vec<Transition> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let mut a = [0.0; NUM_ACTIONS];
                a.iter_mut().for_each(|v| *v = rng.random());
                Transition {
                    state: EpiState::from_array([rng.random(), rng.random(), rng.random(), rng.random()]),
                    action: Action::Intensity(ActionIntensity::new(a).unwrap()),
                    reward: rng.random_range(0.0..2.0),
                    next_state: EpiState::from_array([rng.random(), rng.random(), rng.random(), rng.random()]),
                    done: rng.random_bool(0.1),
                }
            })
            .collect()
    }

    #[test]
    fn full_tau_copies_online() {
        let cfg = AgentConfig {
            tau: 1.0,
            batch_size: 8,
            ..AgentConfig::for_kind(AgentKind::Ddpg)
        };
        let mut agent = DdpgAgent::new(cfg, 0);
        agent.update(&random_batch(8, 1)).unwrap();
        let (at, ct) = agent.target_params();
        assert_eq!(at, &agent.actor);
        assert_eq!(ct, &agent.critic);
    }

    #[test]
    fn zero_gamma_target_is_reward() {
        let cfg = AgentConfig {
            gamma: 0.0,
            ..AgentConfig::for_kind(AgentKind::Ddpg)
        };
        let agent = DdpgAgent::new(cfg, 0);
        let batch = random_batch(16, 2);
        let ys = agent.critic_targets(&batch).unwrap();
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        assert_eq!(ys, rewards);
    }

    #[test]
    fn small_batch_rejected() {
        let mut agent = DdpgAgent::new(AgentConfig::for_kind(AgentKind::Ddpg), 0);
        assert!(matches!(
            agent.update(&random_batch(10, 0)),
            Err(Error::BatchTooSmall { minimum: 64, actual: 10 })
        ));
    }

    #[test]
    fn critic_loss_falls_on_fixed_batch() {
        let cfg = AgentConfig {
            batch_size: 32,
            critic_optimizer: crate::nn::AdamConfig {
                lr: 1e-3,
                ..Default::default()
            },
            ..AgentConfig::for_kind(AgentKind::Ddpg)
        };
        let mut agent = DdpgAgent::new(cfg, 4);
        let batch = random_batch(32, 3);
        let mut losses = vec![agent.critic_loss_on(&batch).unwrap()];
        for _ in 0..10 {
            agent.update(&batch).unwrap();
            losses.push(agent.critic_loss_on(&batch).unwrap());
        }
        for w in losses.windows(2) {
            assert!(w[1] < w[0], "{losses:?}");
        }
    }

    #[test]
    fn noisy_actions_stay_in_unit_box() {
        let agent = DdpgAgent::new(AgentConfig::for_kind(AgentKind::Ddpg), 0);
        let mut rng = rng_from_seed(1);
        for i in 0..200 {
            let s = EpiState::from_array([0.1 * (i % 10) as f64, 0.2, 0.02, 0.1]);
            let cfg_noise = noisy_action(&[0.95, 0.05, 0.5, 1.0, 0.0, 0.3, 0.7], 0.5, &mut rng);
            assert!(cfg_noise.get().iter().all(|v| (0.0..=1.0).contains(v)));
            match agent.act(&s, ActMode::Stochastic, &mut rng).unwrap() {
                Action::Intensity(a) => assert!(a.get().iter().all(|v| (0.0..=1.0).contains(v))),
                Action::Levels(_) => panic!("ddpg emits intensities"),
            }
        }
    }
}
