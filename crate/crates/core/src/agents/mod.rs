//! Reinforcement-learning agents behind one interface.
//!
//! A2C and PPO emit discrete [`ActionLevels`] from seven independent 4-way
//! categoricals. DDPG and TD3 emit continuous [`ActionIntensity`] vectors,
//! which the environment quantizes into levels. A uniform-random agent is
//! included as the baseline.

mod a2c;
pub mod categorical;
mod checkpoint;
mod ddpg;
pub mod losses;
mod ppo;
mod random;
mod replay;
mod td3;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{ActionIntensity, ActionLevels, EpiState, NUM_ACTIONS, NUM_LEVELS, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, MlpSpec, OutputHead, ParamVector};
use crate::rng::SimRng;

pub use a2c::A2cAgent;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest};
pub use ddpg::DdpgAgent;
pub use ppo::PpoAgent;
pub use random::RandomAgent;
pub use replay::ReplayBuffer;
pub use td3::Td3Agent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    A2c,
    Ppo,
    Ddpg,
    Td3,
    /// Uniform-random levels; no parameters, no learning.
    Random,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::A2c => "a2c",
            AgentKind::Ppo => "ppo",
            AgentKind::Ddpg => "ddpg",
            AgentKind::Td3 => "td3",
            AgentKind::Random => "random",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a2c" => Ok(AgentKind::A2c),
            "ppo" => Ok(AgentKind::Ppo),
            "ddpg" => Ok(AgentKind::Ddpg),
            "td3" => Ok(AgentKind::Td3),
            "random" => Ok(AgentKind::Random),
            other => Err(Error::validation("agent.algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Levels(ActionLevels),
    Intensity(ActionIntensity),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: EpiState,
    pub action: Action,
    pub reward: f64,
    pub next_state: EpiState,
    pub done: bool,
}

/// Losses and counters reported by one update call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Gradient steps on the value / critic side.
    pub updates: usize,
    /// Gradient steps on the policy / actor side.
    pub actor_updates: usize,
}

impl Diagnostics {
    pub fn merge(&mut self, other: Diagnostics) {
        self.policy_loss = other.policy_loss;
        self.value_loss = other.value_loss;
        self.entropy = other.entropy;
        self.updates += other.updates;
        self.actor_updates += other.actor_updates;
    }
}

/// Algorithm hyperparameters. Unused fields are ignored by algorithms
/// that do not need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: AgentKind,
    pub hidden_dims: Vec<usize>,
    pub gamma: f64,
    pub actor_optimizer: AdamConfig,
    pub critic_optimizer: AdamConfig,
    /// 0 disables clipping.
    pub max_grad_norm: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Unset means on for PPO, off otherwise.
    pub normalize_advantages: Option<bool>,
    /// On-policy agents update every `rollout_len` steps and at episode end.
    /// Unset means 5 for A2C and 20 for PPO.
    pub rollout_len: Option<usize>,
    pub ppo_epochs: usize,
    pub clip_eps: f64,
    pub minibatch_size: usize,
    pub tau: f64,
    pub policy_delay: usize,
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Off-policy agents run one update every `train_every` environment steps.
    pub train_every: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: AgentKind::A2c,
            hidden_dims: vec![64, 64],
            gamma: 0.99,
            actor_optimizer: AdamConfig::default(),
            critic_optimizer: AdamConfig::default(),
            max_grad_norm: 0.5,
            entropy_coef: 0.01,
            value_coef: 0.5,
            normalize_advantages: None,
            rollout_len: None,
            ppo_epochs: 4,
            clip_eps: 0.2,
            minibatch_size: 64,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            replay_capacity: 100_000,
            batch_size: 64,
            train_every: 4,
        }
    }
}

impl AgentConfig {
    pub fn for_kind(kind: AgentKind) -> Self {
        Self {
            algorithm: kind,
            ..Self::default()
        }
    }

    pub fn normalizes_advantages(&self) -> bool {
        self.normalize_advantages.unwrap_or(self.algorithm == AgentKind::Ppo)
    }

    pub fn effective_rollout_len(&self) -> usize {
        self.rollout_len.unwrap_or(match self.algorithm {
            AgentKind::Ppo => 20,
            _ => 5,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = |n: &str| format!("agent.{n}");
        if self.hidden_dims.contains(&0) {
            return Err(Error::validation(k("hidden_dims"), "widths must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::validation(k("gamma"), "must be in [0, 1]"));
        }
        for (name, o) in [("actor_optimizer", &self.actor_optimizer), ("critic_optimizer", &self.critic_optimizer)] {
            if o.lr.is_nan() || o.lr <= 0.0 {
                return Err(Error::validation(k(&format!("{name}.lr")), "must be positive"));
            }
            if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
                return Err(Error::validation(k(name), "moment decays must be in [0, 1)"));
            }
            if o.eps.is_nan() || o.eps <= 0.0 {
                return Err(Error::validation(k(&format!("{name}.eps")), "must be positive"));
            }
        }
        if self.max_grad_norm < 0.0 {
            return Err(Error::validation(k("max_grad_norm"), "must be non-negative"));
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return Err(Error::validation(k("entropy_coef"), "loss coefficients must be non-negative"));
        }
        if self.ppo_epochs == 0 {
            return Err(Error::validation(k("ppo_epochs"), "must be at least 1"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::validation(k("clip_eps"), "must be in (0, 1)"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::validation(k("minibatch_size"), "must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::validation(k("tau"), "must be in (0, 1]"));
        }
        if self.policy_delay == 0 {
            return Err(Error::validation(k("policy_delay"), "must be at least 1"));
        }
        for (name, v) in [
            ("exploration_noise", self.exploration_noise),
            ("target_noise", self.target_noise),
            ("target_noise_clip", self.target_noise_clip),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(k(name), "must be non-negative"));
            }
        }
        if self.rollout_len == Some(0) {
            return Err(Error::validation(k("rollout_len"), "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation(k("batch_size"), "must be at least 1"));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::validation(k("replay_capacity"), "must be at least batch_size"));
        }
        if self.train_every == 0 {
            return Err(Error::validation(k("train_every"), "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn policy_spec(&self) -> MlpSpec {
        MlpSpec::new(
            OBS_DIM,
            self.hidden_dims.clone(),
            NUM_ACTIONS * NUM_LEVELS,
            OutputHead::Logits {
                groups: NUM_ACTIONS,
                choices: NUM_LEVELS,
            },
        )
        .expect("validated agent config")
    }

    pub(crate) fn value_spec(&self) -> MlpSpec {
        MlpSpec::new(OBS_DIM, self.hidden_dims.clone(), 1, OutputHead::Linear).expect("validated agent config")
    }

    pub(crate) fn actor_spec(&self) -> MlpSpec {
        MlpSpec::new(OBS_DIM, self.hidden_dims.clone(), NUM_ACTIONS, OutputHead::Bounded)
            .expect("validated agent config")
    }

    pub(crate) fn q_spec(&self) -> MlpSpec {
        MlpSpec::new(OBS_DIM + NUM_ACTIONS, self.hidden_dims.clone(), 1, OutputHead::Linear)
            .expect("validated agent config")
    }
}

/// Common interface of every agent.
///
/// `observe` is called once per environment step and `end_episode` once per
/// finished episode; on-policy agents update in `end_episode`, off-policy
/// agents during `observe`.
pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    fn act(&self, state: &EpiState, mode: ActMode, rng: &mut SimRng) -> Result<Action>;

    fn observe(&mut self, transition: Transition, rng: &mut SimRng) -> Result<Diagnostics>;

    fn end_episode(&mut self, rng: &mut SimRng) -> Result<Diagnostics>;

    /// The federated networks, in a fixed order.
    fn params(&self) -> Vec<ParamVector>;

    fn load(&mut self, params: &[ParamVector]) -> Result<()>;

    fn network_specs(&self) -> Vec<MlpSpec>;
}

/// Builds an agent; `init_seed` fixes the initial network parameters.
pub fn build_agent(cfg: &AgentConfig, init_seed: u64) -> Result<Box<dyn Agent>> {
    cfg.validate()?;
    Ok(match cfg.algorithm {
        AgentKind::A2c => Box::new(A2cAgent::new(cfg.clone(), init_seed)),
        AgentKind::Ppo => Box::new(PpoAgent::new(cfg.clone(), init_seed)),
        AgentKind::Ddpg => Box::new(DdpgAgent::new(cfg.clone(), init_seed)),
        AgentKind::Td3 => Box::new(Td3Agent::new(cfg.clone(), init_seed)),
        AgentKind::Random => Box::new(RandomAgent),
    })
}

pub(crate) fn load_into(targets: &mut [&mut ParamVector], params: &[ParamVector]) -> Result<()> {
    if targets.len() != params.len() {
        return Err(Error::LayoutMismatch(format!(
            "expected {} networks, got {}",
            targets.len(),
            params.len()
        )));
    }
    for (t, p) in targets.iter().zip(params) {
        t.ensure_same_layout(p)?;
    }
    for (t, p) in targets.iter_mut().zip(params) {
        **t = p.clone();
    }
    Ok(())
}

pub(crate) fn expect_levels(action: &Action) -> Result<ActionLevels> {
    match action {
        Action::Levels(l) => Ok(*l),
        Action::Intensity(_) => Err(Error::Contract("expected discrete action levels".into())),
    }
}

pub(crate) fn expect_intensity(action: &Action) -> Result<ActionIntensity> {
    match action {
        Action::Intensity(a) => Ok(*a),
        Action::Levels(_) => Err(Error::Contract("expected continuous intensities".into())),
    }
}
