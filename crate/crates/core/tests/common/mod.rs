#![allow(dead_code)]

use std::time::{Duration, Instant};

use fedrl_core::agents::losses::{
    critic_loss, deterministic_actor_loss, policy_gradient_loss, ppo_policy_loss, value_loss,
};
use fedrl_core::agents::{
    build_agent, categorical, Action, Agent, AgentConfig, AgentKind, DdpgAgent, Td3Agent, Transition,
};
use fedrl_core::env::{
    ActionLevels, ActionIntensity, EnvConfig, EpiEnv, EpiState, NUM_ACTIONS, NUM_LEVELS, OBS_DIM,
};
use fedrl_core::nn::{average_params, Layout, MlpSpec, OutputHead, ParamVector};
use fedrl_core::rng::{rng_from_seed, SimRng};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Central finite differences of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest per-component `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn with_values(p: &ParamVector, v: &[f64]) -> ParamVector {
    ParamVector::new(p.layout().clone(), v.to_vec()).unwrap()
}

fn tiny_hidden(rng: &mut SimRng) -> Vec<usize> {
    let depth = rng.random_range(1..=2);
    (0..depth).map(|_| rng.random_range(2..=5)).collect()
}

fn random_params(spec: &MlpSpec, rng: &mut SimRng) -> ParamVector {
    let normal = Normal::new(0.0, 0.6).unwrap();
    let mut p = spec.init(rng, 1.0);
    for v in p.values_mut() {
        *v += normal.sample(rng);
    }
    p
}

fn random_state(rng: &mut SimRng) -> [f64; OBS_DIM] {
    std::array::from_fn(|_| rng.random_range(0.0..1.0))
}

fn random_levels(rng: &mut SimRng) -> ActionLevels {
    ActionLevels::new(std::array::from_fn(|_| rng.random_range(0..NUM_LEVELS as u8))).unwrap()
}

fn random_intensity(rng: &mut SimRng) -> ActionIntensity {
    ActionIntensity::new(std::array::from_fn(|_| rng.random_range(0.0..1.0))).unwrap()
}

fn policy_spec(hidden: Vec<usize>) -> MlpSpec {
    MlpSpec::new(
        OBS_DIM,
        hidden,
        NUM_ACTIONS * NUM_LEVELS,
        OutputHead::Logits {
            groups: NUM_ACTIONS,
            choices: NUM_LEVELS,
        },
    )
    .unwrap()
}

fn value_spec(hidden: Vec<usize>) -> MlpSpec {
    MlpSpec::new(OBS_DIM, hidden, 1, OutputHead::Linear).unwrap()
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub loss: &'static str,
    pub instances: usize,
    pub max_err: f64,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.max_err < GRAD_TOLERANCE
    }
}

struct Tracker {
    loss: &'static str,
    instances: usize,
    max_err: f64,
}

impl Tracker {
    fn new(loss: &'static str) -> Self {
        Self {
            loss,
            instances: 0,
            max_err: 0.0,
        }
    }

    fn check(&mut self, analytic: &[f64], f: impl Fn(&[f64]) -> f64, x: &[f64]) {
        let numeric = fd_grad(f, x);
        self.max_err = self.max_err.max(max_rel_err(analytic, &numeric));
        self.instances += 1;
    }

    fn report(self) -> GradReport {
        GradReport {
            loss: self.loss,
            instances: self.instances,
            max_err: self.max_err,
        }
    }
}

/// A2C: policy-gradient loss with entropy bonus, and value loss, on short rollouts.
pub fn a2c_gradients(instances: usize, seed: u64) -> Vec<GradReport> {
    let mut rng = rng_from_seed(seed);
    let mut pol = Tracker::new("a2c policy");
    let mut val = Tracker::new("a2c value");
    for _ in 0..instances {
        let hidden = tiny_hidden(&mut rng);
        let (ps, vs) = (policy_spec(hidden.clone()), value_spec(hidden));
        let (pp, vp) = (random_params(&ps, &mut rng), random_params(&vs, &mut rng));
        let n = rng.random_range(2..=4);
        let states: Vec<_> = (0..n).map(|_| random_state(&mut rng)).collect();
        let actions: Vec<_> = (0..n).map(|_| random_levels(&mut rng)).collect();
        let adv: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let returns: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ent = rng.random_range(0.0..0.1);

        let (lg, _) = policy_gradient_loss(&ps, &pp, &states, &actions, &adv, ent).unwrap();
        let f = |v: &[f64]| policy_gradient_loss(&ps, &with_values(&pp, v), &states, &actions, &adv, ent).unwrap().0.loss;
        pol.check(&lg.grad, f, pp.values());

        let lg = value_loss(&vs, &vp, &states, &returns, 0.5).unwrap();
        let f = |v: &[f64]| value_loss(&vs, &with_values(&vp, v), &states, &returns, 0.5).unwrap().loss;
        val.check(&lg.grad, f, vp.values());
    }
    vec![pol.report(), val.report()]
}

/// PPO clipped surrogate; behavior log-probabilities are perturbed so that
/// both clipped and unclipped samples occur, and samples sitting on a clip
/// boundary are redrawn.
pub fn ppo_gradients(instances: usize, seed: u64) -> Vec<GradReport> {
    let mut rng = rng_from_seed(seed);
    let mut pol = Tracker::new("ppo surrogate");
    let eps = 0.2;
    while pol.instances < instances {
        let ps = policy_spec(tiny_hidden(&mut rng));
        let pp = random_params(&ps, &mut rng);
        let n = rng.random_range(2..=4);
        let states: Vec<_> = (0..n).map(|_| random_state(&mut rng)).collect();
        let actions: Vec<_> = (0..n).map(|_| random_levels(&mut rng)).collect();
        let adv: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let old: Vec<f64> = states
            .iter()
            .zip(&actions)
            .map(|(s, a)| {
                let z = ps.forward(&pp, s).unwrap();
                categorical::log_prob(&z, a) + rng.random_range(-0.4..0.4)
            })
            .collect();
        let near_kink = states.iter().zip(&actions).zip(&old).any(|((s, a), o)| {
            let r = (categorical::log_prob(&ps.forward(&pp, s).unwrap(), a) - o).exp();
            (r - (1.0 - eps)).abs() < 1e-3 || (r - (1.0 + eps)).abs() < 1e-3
        });
        if near_kink {
            continue;
        }
        let ent = rng.random_range(0.0..0.1);
        let (lg, _) = ppo_policy_loss(&ps, &pp, &states, &actions, &old, &adv, eps, ent).unwrap();
        let f = |v: &[f64]| {
            ppo_policy_loss(&ps, &with_values(&pp, v), &states, &actions, &old, &adv, eps, ent)
                .unwrap()
                .0
                .loss
        };
        pol.check(&lg.grad, f, pp.values());
    }
    vec![pol.report()]
}

fn random_transitions(n: usize, rng: &mut SimRng) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            state: EpiState::from_array(random_state(rng)),
            action: Action::Intensity(random_intensity(rng)),
            reward: rng.random_range(0.0..2.0),
            next_state: EpiState::from_array(random_state(rng)),
            done: rng.random_bool(0.2),
        })
        .collect()
}

fn critic_inputs(batch: &[Transition]) -> Vec<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            let mut x = t.state.to_array().to_vec();
            if let Action::Intensity(a) = t.action {
                x.extend_from_slice(a.get());
            }
            x
        })
        .collect()
}

fn off_policy_cfg(kind: AgentKind, rng: &mut SimRng) -> AgentConfig {
    AgentConfig {
        hidden_dims: tiny_hidden(rng),
        gamma: rng.random_range(0.5..1.0),
        ..AgentConfig::for_kind(kind)
    }
}

fn perturbed(params: Vec<ParamVector>, rng: &mut SimRng) -> Vec<ParamVector> {
    let normal = Normal::new(0.0, 0.6).unwrap();
    params
        .into_iter()
        .map(|mut p| {
            for v in p.values_mut() {
                *v += normal.sample(rng);
            }
            p
        })
        .collect()
}

/// DDPG and TD3: critic regression onto the agents' own bootstrapped
/// targets, and the deterministic actor loss through the (first) critic.
pub fn off_policy_gradients(kind: AgentKind, instances: usize, seed: u64) -> Vec<GradReport> {
    let mut rng = rng_from_seed(seed);
    let name = |s: &'static str, t: &'static str| if kind == AgentKind::Td3 { t } else { s };
    let mut crit = Tracker::new(name("ddpg critic", "td3 critics"));
    let mut act = Tracker::new(name("ddpg actor", "td3 actor"));
    for _ in 0..instances {
        let cfg = off_policy_cfg(kind, &mut rng);
        let mut agent = build_agent(&cfg, rng.random()).unwrap();
        let params = perturbed(agent.params(), &mut rng);
        agent.load(&params).unwrap();
        let specs = agent.network_specs();
        let batch = random_transitions(rng.random_range(2..=4), &mut rng);
        let inputs = critic_inputs(&batch);
        let targets = if kind == AgentKind::Td3 {
            let mut td3 = Td3Agent::new(cfg.clone(), 1);
            td3.load(&params).unwrap();
            td3.critic_targets(&batch, &mut rng).unwrap()
        } else {
            let mut ddpg = DdpgAgent::new(cfg.clone(), 1);
            ddpg.load(&params).unwrap();
            ddpg.critic_targets(&batch).unwrap()
        };
        for c in 1..params.len() {
            let lg = critic_loss(&specs[c], &params[c], &inputs, &targets).unwrap();
            let f = |v: &[f64]| critic_loss(&specs[c], &with_values(&params[c], v), &inputs, &targets).unwrap().loss;
            crit.check(&lg.grad, f, params[c].values());
        }
        let states: Vec<_> = batch.iter().map(|t| t.state.to_array()).collect();
        let lg = deterministic_actor_loss(&specs[0], &params[0], &specs[1], &params[1], &states).unwrap();
        let f = |v: &[f64]| {
            deterministic_actor_loss(&specs[0], &with_values(&params[0], v), &specs[1], &params[1], &states)
                .unwrap()
                .loss
        };
        act.check(&lg.grad, f, params[0].values());
    }
    vec![crit.report(), act.report()]
}

pub fn all_gradient_reports(instances: usize) -> Vec<GradReport> {
    let mut out = a2c_gradients(instances, 11);
    out.extend(ppo_gradients(instances, 12));
    out.extend(off_policy_gradients(AgentKind::Ddpg, instances, 13));
    out.extend(off_policy_gradients(AgentKind::Td3, instances, 14));
    out
}

/// One ulp of `x`.
pub fn ulp(x: f64) -> f64 {
    let x = x.abs();
    x.next_up() - x
}

/// Reward recomputed from its definition.
pub fn reference_reward(next_infected: f64, deaths: f64, a: &[f64; NUM_ACTIONS], cfg: &EnvConfig) -> (f64, f64, f64) {
    let ti = cfg.infection_threshold;
    let h = if next_infected < ti && deaths < cfg.death_threshold {
        (ti - next_infected) / ti
    } else {
        0.0
    };
    let wsum: f64 = cfg.weights.iter().sum();
    let e = 1.0 - cfg.weights.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() / wsum;
    let r = if h > 0.0 && e > 0.0 { h + e } else { 0.0 };
    (r, h, e)
}

#[derive(Debug, Default)]
pub struct EnvSuiteReport {
    pub steps: usize,
    pub episodes: usize,
    pub violations: Vec<String>,
    pub elapsed: Duration,
}

/// Random-action rollouts checking the compartment and reward invariants.
pub fn env_invariant_suite(episodes: usize, steps_per_episode: usize) -> EnvSuiteReport {
    let start = Instant::now();
    let cfg = EnvConfig {
        horizon: steps_per_episode,
        ..EnvConfig::default()
    };
    let mut env = EpiEnv::new(cfg.clone(), 0).unwrap();
    let mut rep = EnvSuiteReport::default();
    let fail = |rep: &mut EnvSuiteReport, msg: String| {
        if rep.violations.len() < 20 {
            rep.violations.push(msg);
        }
    };
    for ep in 0..episodes as u64 {
        let mut rng = rng_from_seed(1000 + ep);
        let (_, mut prev) = env.reset(ep);
        loop {
            let out = env.step(&random_levels(&mut rng)).unwrap();
            rep.steps += 1;
            let c = out.info.compartments;
            let tag = format!("episode {ep} step {}", env.steps());
            if c.fields().iter().any(|v| *v < 0.0 || !v.is_finite()) {
                fail(&mut rep, format!("{tag}: negative compartment {:?}", c.fields()));
            }
            if (c.known + c.undiscovered - c.next_infected).abs() > ulp(c.next_infected) {
                fail(&mut rep, format!("{tag}: K + U != Nxt"));
            }
            if c.cum_deaths < prev.cum_deaths {
                fail(&mut rep, format!("{tag}: cumulative deaths decreased"));
            }
            if c.normal > prev.normal {
                fail(&mut rep, format!("{tag}: N increased"));
            }
            let (r, h, e) = reference_reward(c.next_infected, c.deaths, out.info.intensity.get(), &cfg);
            let b = out.info.breakdown;
            if !(0.0..=2.0).contains(&out.reward) || out.reward != r || b.health != h || b.economy != e {
                fail(&mut rep, format!("{tag}: reward {} vs recomputed {r}", out.reward));
            }
            if (h == 0.0 || e == 0.0) && out.reward != 0.0 {
                fail(&mut rep, format!("{tag}: gate not applied"));
            }
            prev = c;
            if out.done {
                break;
            }
        }
        rep.episodes += 1;
    }
    rep.elapsed = start.elapsed();
    rep
}

/// Distance in representable doubles between `a` and `b`.
pub fn ulps(a: f64, b: f64) -> u64 {
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

pub fn brute_force_mean(sets: &[Vec<f64>]) -> Vec<f64> {
    let n = sets.len();
    (0..sets[0].len())
        .map(|i| {
            let mut s = 0.0;
            for v in sets {
                s += v[i];
            }
            s / n as f64
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct AggregationReport {
    pub cases: usize,
    pub max_ulps: u64,
}

/// `average_params` against the brute-force mean on random vector sets.
pub fn aggregation_oracle(cases: usize, seed: u64) -> AggregationReport {
    let mut rng = rng_from_seed(seed);
    let mut report = AggregationReport::default();
    for _ in 0..cases {
        let layout = Layout::new(vec![rng.random_range(1..6), rng.random_range(1..6)]).unwrap();
        let k = rng.random_range(1..=10);
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let sets: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..layout.num_params()).map(|_| rng.random_range(-1.0..1.0) * scale).collect())
            .collect();
        let params: Vec<ParamVector> = sets
            .iter()
            .map(|v| ParamVector::new(layout.clone(), v.clone()).unwrap())
            .collect();
        let got = average_params(&params).unwrap();
        for (g, want) in got.values().iter().zip(brute_force_mean(&sets)) {
            report.max_ulps = report.max_ulps.max(ulps(*g, want));
        }
        report.cases += 1;
    }
    report
}
