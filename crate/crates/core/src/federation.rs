//! Federated averaging of RL agents across simulated clients.
//!
//! Each round a random subset of clients loads the global parameters,
//! trains locally for a few episodes on its own environment, and sends
//! back only its network parameters. The server averages them into the
//! next global model and evaluates it on held-out environments. The
//! centralized baseline trains one agent on one environment for the same
//! number of episodes per round.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{build_agent, save_checkpoint, ActMode, Action, Agent, AgentConfig, Transition};
use crate::env::{EnvConfig, EpiEnv};
use crate::error::{Error, Result};
use crate::metrics::{ModelTag, RoundRecord};
use crate::nn::{average_params, ParamVector};
use crate::rng::{derive_seed, stream_rng, SimRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedConfig {
    pub n_clients: usize,
    pub k_selected: usize,
    pub local_epochs: usize,
    pub global_epochs: usize,
    /// Optional per-client environment overrides; length must be `n_clients`.
    pub client_envs: Option<Vec<EnvConfig>>,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            n_clients: 10,
            k_selected: 5,
            local_epochs: 3,
            global_epochs: 20,
            client_envs: None,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::validation("federation.n_clients", "must be at least 1"));
        }
        if self.k_selected == 0 || self.k_selected > self.n_clients {
            return Err(Error::validation(
                "federation.k_selected",
                format!("{} is not in 1..={}", self.k_selected, self.n_clients),
            ));
        }
        if self.local_epochs == 0 {
            return Err(Error::validation("federation.local_epochs", "must be at least 1"));
        }
        if let Some(envs) = &self.client_envs {
            if envs.len() != self.n_clients {
                return Err(Error::validation(
                    "federation.client_envs",
                    format!("{} entries for {} clients", envs.len(), self.n_clients),
                ));
            }
            for (i, e) in envs.iter().enumerate() {
                e.validate_with_prefix(&format!("federation.client_envs[{i}]."))?;
            }
        }
        Ok(())
    }
}

/// Everything a training run needs, borrowed from the run configuration.
#[derive(Debug, Clone, Copy)]
pub struct RunPlan<'a> {
    pub env: &'a EnvConfig,
    pub fed: &'a FedConfig,
    pub agent: &'a AgentConfig,
    pub eval_episodes: usize,
    pub seed: u64,
    pub checkpoint_dir: Option<&'a Path>,
}

pub struct ClientHandle {
    pub id: usize,
    pub env: EpiEnv,
    pub agent: Box<dyn Agent>,
    pub rng: SimRng,
    pub episodes_trained: usize,
}

impl ClientHandle {
    pub fn new(id: usize, env_cfg: EnvConfig, agent_cfg: &AgentConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            id,
            env: EpiEnv::new(env_cfg, 0)?,
            agent: build_agent(agent_cfg, derive_seed(seed, Stream::Init, 0))?,
            rng: stream_rng(seed, Stream::Client, id as u64),
            episodes_trained: 0,
        })
    }
}

/// What leaves a client after local training: parameters and its own
/// episode rewards, never transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: Vec<ParamVector>,
    pub episode_rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub networks: Vec<ParamVector>,
    pub round: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: GlobalModel,
    pub records: Vec<RoundRecord>,
}

/// `k` distinct client ids out of `n`, sorted ascending.
pub fn select_clients(n: usize, k: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::Selection { n, k });
    }
    let mut ids = index::sample(rng, n, k).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Runs one episode and returns its cumulative reward. With `learn`, every
/// transition is fed to the agent and the episode is closed with
/// `end_episode`.
pub fn run_episode(
    env: &mut EpiEnv,
    agent: &mut dyn Agent,
    rng: &mut SimRng,
    seed: u64,
    mode: ActMode,
    learn: bool,
) -> Result<f64> {
    let (mut obs, _) = env.reset(seed);
    let mut total = 0.0;
    loop {
        let action = agent.act(&obs, mode, rng)?;
        let out = match &action {
            Action::Levels(l) => env.step(l)?,
            Action::Intensity(a) => env.step_continuous(a)?,
        };
        total += out.reward;
        if learn {
            agent.observe(
                Transition {
                    state: obs,
                    action,
                    reward: out.reward,
                    next_state: out.observation,
                    done: out.done,
                },
                rng,
            )?;
        }
        obs = out.observation;
        if out.done {
            break;
        }
    }
    if learn {
        agent.end_episode(rng)?;
    }
    Ok(total)
}

/// Trains the client for `epochs` episodes from its current parameters.
pub fn local_train(client: &mut ClientHandle, epochs: usize) -> Result<ClientUpdate> {
    let mut rewards = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let seed: u64 = client.rng.random();
        let r = run_episode(
            &mut client.env,
            client.agent.as_mut(),
            &mut client.rng,
            seed,
            ActMode::Stochastic,
            true,
        )?;
        client.episodes_trained += 1;
        rewards.push(r);
    }
    Ok(ClientUpdate {
        client_id: client.id,
        params: client.agent.params(),
        episode_rewards: rewards,
    })
}

/// Averages each network across the client updates, in the given order.
pub fn aggregate(global: &GlobalModel, client_params: &[Vec<ParamVector>]) -> Result<GlobalModel> {
    if client_params.is_empty() {
        return Err(Error::EmptyParams);
    }
    let n_nets = global.networks.len();
    if let Some(bad) = client_params.iter().find(|p| p.len() != n_nets) {
        return Err(Error::LayoutMismatch(format!(
            "client sent {} networks, global model has {n_nets}",
            bad.len()
        )));
    }
    let mut networks = Vec::with_capacity(n_nets);
    for (i, g) in global.networks.iter().enumerate() {
        let column: Vec<ParamVector> = client_params.iter().map(|p| p[i].clone()).collect();
        g.ensure_same_layout(&column[0])?;
        networks.push(average_params(&column)?);
    }
    Ok(GlobalModel {
        networks,
        round: global.round + 1,
    })
}

/// Mean greedy-mode episode reward of `params` over `episodes` held-out
/// environments derived from `seed`.
pub fn evaluate(
    params: &[ParamVector],
    agent_cfg: &AgentConfig,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Ok(0.0);
    }
    let mut agent = build_agent(agent_cfg, 0)?;
    agent.load(params)?;
    let mut env = EpiEnv::new(env_cfg.clone(), 0)?;
    let mut total = 0.0;
    for j in 0..episodes as u64 {
        let mut policy_rng = stream_rng(seed, Stream::EvalPolicy, j);
        let env_seed = derive_seed(seed, Stream::EvalEnv, j);
        total += run_episode(&mut env, agent.as_mut(), &mut policy_rng, env_seed, ActMode::Greedy, false)?;
    }
    Ok(total / episodes as f64)
}

fn initial_model(plan: &RunPlan<'_>) -> Result<GlobalModel> {
    let agent = build_agent(plan.agent, derive_seed(plan.seed, Stream::Init, 0))?;
    Ok(GlobalModel {
        networks: agent.params(),
        round: 0,
    })
}

fn checkpoint(plan: &RunPlan<'_>, tag: ModelTag, round: usize, params: &[ParamVector], agent: &dyn Agent) -> Result<()> {
    if let Some(dir) = plan.checkpoint_dir {
        let dir = dir.join(tag.to_string()).join(format!("round_{round:03}"));
        save_checkpoint(&dir, agent.kind(), Some(round), &agent.network_specs(), params)?;
    }
    Ok(())
}

fn in_round<T>(round: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Round {
        round,
        source: Box::new(e),
    })
}

pub fn run_federated(plan: &RunPlan<'_>) -> Result<RunOutput> {
    plan.fed.validate()?;
    let fed = plan.fed;
    let mut clients = (0..fed.n_clients)
        .map(|i| {
            let env = fed
                .client_envs
                .as_ref()
                .map_or_else(|| plan.env.clone(), |envs| envs[i].clone());
            ClientHandle::new(i, env, plan.agent, plan.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut global = initial_model(plan)?;
    let mut records = Vec::new();

    for round in 1..=fed.global_epochs {
        let step = |clients: &mut Vec<ClientHandle>, global: &GlobalModel| -> Result<(GlobalModel, Vec<RoundRecord>)> {
            let mut sel_rng = stream_rng(plan.seed, Stream::Selection, round as u64);
            let selected = select_clients(fed.n_clients, fed.k_selected, &mut sel_rng)?;
            let updates: Vec<(ClientUpdate, usize)> = clients
                .par_iter_mut()
                .filter(|c| selected.binary_search(&c.id).is_ok())
                .map(|c| {
                    c.agent.load(&global.networks)?;
                    let start = c.episodes_trained;
                    Ok((local_train(c, fed.local_epochs)?, start))
                })
                .collect::<Result<_>>()?;

            let mut rows = Vec::new();
            for (u, start) in &updates {
                for (j, r) in u.episode_rewards.iter().enumerate() {
                    rows.push(RoundRecord::train(round, ModelTag::Client, Some(u.client_id), *r, start + j + 1));
                }
            }
            let params: Vec<Vec<ParamVector>> = updates.into_iter().map(|(u, _)| u.params).collect();
            let next = aggregate(global, &params)?;
            let reward = evaluate(&next.networks, plan.agent, plan.env, plan.eval_episodes, plan.seed)?;
            rows.push(RoundRecord::eval(round, ModelTag::Global, reward, plan.eval_episodes));
            checkpoint(plan, ModelTag::Global, round, &next.networks, clients[0].agent.as_ref())?;
            Ok((next, rows))
        };
        let (next, rows) = in_round(round, step(&mut clients, &global))?;
        global = next;
        records.extend(rows);
    }
    Ok(RunOutput { model: global, records })
}

pub fn run_centralized(plan: &RunPlan<'_>) -> Result<RunOutput> {
    plan.fed.validate()?;
    let fed = plan.fed;
    let mut center = ClientHandle::new(0, plan.env.clone(), plan.agent, plan.seed)?;
    let mut records = Vec::new();
    let mut round_done = 0;
    for round in 1..=fed.global_epochs {
        let mut step = || -> Result<Vec<RoundRecord>> {
            let start = center.episodes_trained;
            let update = local_train(&mut center, fed.local_epochs)?;
            let mut rows: Vec<RoundRecord> = update
                .episode_rewards
                .iter()
                .enumerate()
                .map(|(j, r)| RoundRecord::train(round, ModelTag::Center, None, *r, start + j + 1))
                .collect();
            let reward = evaluate(&update.params, plan.agent, plan.env, plan.eval_episodes, plan.seed)?;
            rows.push(RoundRecord::eval(round, ModelTag::Center, reward, plan.eval_episodes));
            checkpoint(plan, ModelTag::Center, round, &update.params, center.agent.as_ref())?;
            Ok(rows)
        };
        records.extend(in_round(round, step())?);
        round_done = round;
    }
    Ok(RunOutput {
        model: GlobalModel {
            networks: center.agent.params(),
            round: round_done,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;
    use crate::rng::rng_from_seed;

    fn vecs(values: &[f64]) -> Vec<ParamVector> {
        vec![ParamVector::new(crate::nn::Layout::new(vec![1, 1]).unwrap(), values.to_vec()).unwrap()]
    }

    #[test]
    fn select_all_and_one() {
        let mut rng = rng_from_seed(0);
        assert_eq!(select_clients(6, 6, &mut rng).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        let one = select_clients(6, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0] < 6);
        assert!(matches!(select_clients(3, 4, &mut rng), Err(Error::Selection { n: 3, k: 4 })));
    }

    #[test]
    fn selection_golden_round1() {
        let mut rng = stream_rng(0, Stream::Selection, 1);
        let ids = select_clients(10, 5, &mut rng).unwrap();
        assert_eq!(ids, GOLDEN_SELECTION);
    }

    const GOLDEN_SELECTION: [usize; 5] = [1, 2, 4, 5, 7];

    #[test]
    fn aggregate_two_clients() {
        let g = GlobalModel {
            networks: vecs(&[0.0, 0.0]),
            round: 4,
        };
        let out = aggregate(&g, &[vecs(&[0.0, 1.0]), vecs(&[2.0, 3.0])]).unwrap();
        assert_eq!(out.networks, vecs(&[1.0, 2.0]));
        assert_eq!(out.round, 5);
    }

    #[test]
    fn aggregate_unchanged_broadcast() {
        let g = GlobalModel {
            networks: vecs(&[0.3, -1.7]),
            round: 0,
        };
        let out = aggregate(&g, &vec![g.networks.clone(); 5]).unwrap();
        assert_eq!(out.networks, g.networks);
    }

    #[test]
    fn aggregate_rejects_mismatch() {
        let g = GlobalModel {
            networks: vecs(&[0.0, 0.0]),
            round: 0,
        };
        assert!(aggregate(&g, &[]).is_err());
        assert!(aggregate(&g, &[vec![]]).is_err());
    }

    #[test]
    fn zero_epochs_return_broadcast() {
        let mut c = ClientHandle::new(0, EnvConfig::default(), &AgentConfig::for_kind(AgentKind::Ppo), 1).unwrap();
        let params = c.agent.params();
        let u = local_train(&mut c, 0).unwrap();
        assert_eq!(u.params, params);
        assert!(u.episode_rewards.is_empty());
    }

    #[test]
    fn client_update_carries_no_transitions() {
        let mut c = ClientHandle::new(2, EnvConfig::default(), &AgentConfig::for_kind(AgentKind::A2c), 0).unwrap();
        let update = local_train(&mut c, 1).unwrap();
        // exhaustive destructuring: adding a field to the boundary type breaks this test
        let ClientUpdate {
            client_id,
            params,
            episode_rewards,
        } = update;
        assert_eq!(client_id, 2);
        assert_eq!(params.len(), 2);
        assert_eq!(episode_rewards.len(), 1);
    }

    fn saturated_actor(bias: f64) -> (AgentConfig, Vec<ParamVector>) {
        let cfg = AgentConfig::for_kind(AgentKind::Ddpg);
        let mut params = build_agent(&cfg, 0).unwrap().params();
        let n = params[0].len();
        let vals = params[0].values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        vals[n - 7..].iter_mut().for_each(|v| *v = bias);
        (cfg, params)
    }

    // continuous actions are re-drawn inside their band, so a saturated
    // actor realizes intensities in [0.75, 1] (or [0, 0.2)), not exactly 1 (or 0)
    #[test]
    fn max_action_policy_economy_bounded() {
        let (cfg, params) = saturated_actor(50.0);
        let env = EnvConfig {
            weights: [1.0; 7],
            ..EnvConfig::default()
        };
        let r = evaluate(&params, &cfg, &env, 3, 0).unwrap();
        assert!(r > 0.0 && r <= 240.0 * 1.25, "{r}");
    }

    #[test]
    fn infection_free_policy_near_ceiling() {
        let (cfg, params) = saturated_actor(-50.0);
        let env = EnvConfig {
            initial_infected: 0.0,
            ..EnvConfig::default()
        };
        let r = evaluate(&params, &cfg, &env, 2, 0).unwrap();
        // h = 1 every step and e > 0.8 for intensities below 0.2
        assert!(r > 240.0 + 0.8 * 240.0 && r <= 480.0, "{r}");
    }

    #[test]
    fn random_policy_eval_golden() {
        let cfg = AgentConfig::for_kind(AgentKind::Random);
        let r = evaluate(&[], &cfg, &EnvConfig::default(), 5, 3).unwrap();
        assert_eq!(r, GOLDEN_RANDOM_EVAL_SEED3);
    }

    const GOLDEN_RANDOM_EVAL_SEED3: f64 = 30.01006837461545;

    #[test]
    fn zero_rounds_keep_initialization() {
        let fed = FedConfig {
            global_epochs: 0,
            ..FedConfig::default()
        };
        let agent = AgentConfig::for_kind(AgentKind::A2c);
        let env = EnvConfig::default();
        let plan = RunPlan {
            env: &env,
            fed: &fed,
            agent: &agent,
            eval_episodes: 1,
            seed: 4,
            checkpoint_dir: None,
        };
        let out = run_federated(&plan).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.model.networks, build_agent(&agent, derive_seed(4, Stream::Init, 0)).unwrap().params());
    }
}
