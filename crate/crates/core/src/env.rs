//! Epidemic decision environment.
//!
//! Seven public-health actions (A1..A7) act on four epidemic rates
//! (transmission, identification, death, reinfection), which drive a
//! compartment transition model over a continuous population. Each step
//! the agent picks one of four intensity levels per action; the realized
//! intensity is drawn uniformly from that level's band, so the same
//! decision can be implemented more or less strictly.
//!
//! Actions, in index order:
//!
//! | index | action                                   |
//! |-------|------------------------------------------|
//! | 0     | travel restriction                       |
//! | 1     | lockdown                                 |
//! | 2     | distance work and education              |
//! | 3     | masks                                    |
//! | 4     | testing rate (test and isolate)          |
//! | 5     | health-care capacity                     |
//! | 6     | vaccination rate                         |

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SimRng};

pub const NUM_ACTIONS: usize = 7;
pub const NUM_LEVELS: usize = 4;
pub const OBS_DIM: usize = 4;

/// Intensity bands per level: `[lo, hi)`, with the top band closed at 1.
pub const LEVEL_BANDS: [(f64, f64); NUM_LEVELS] = [(0.0, 0.2), (0.2, 0.5), (0.5, 0.75), (0.75, 1.0)];

fn default_weights() -> [f64; NUM_ACTIONS] {
    [1.0; NUM_ACTIONS]
}

/// Epidemiological and reward constants of one environment.
///
/// `mitigation_coeffs` holds the per-action strengths for travel
/// restriction, lockdown, distance work, masks and vaccination (in that
/// order) used by the transmission-rate formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub incubation_days: f64,
    pub fatality_rate: f64,
    pub population: u64,
    pub initial_infected: f64,
    /// persons / km²
    pub density: f64,
    /// TI: next-round infections at or above this zero the health score.
    pub infection_threshold: f64,
    /// TD: per-step deaths at or above this zero the health score.
    pub death_threshold: f64,
    pub reinfection_prob: f64,
    /// Share of vaccinations that fail to protect.
    pub vaccine_inefficacy: f64,
    #[serde(default = "default_weights")]
    pub weights: [f64; NUM_ACTIONS],
    pub horizon: usize,
    pub mitigation_coeffs: [f64; 5],
    pub beta: f64,
    pub density_ref: f64,
    pub incubation_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            incubation_days: 14.0,
            fatality_rate: 0.02,
            population: 100_000,
            initial_infected: 3.0,
            density: 1000.0,
            infection_threshold: 25.0,
            death_threshold: 5.0,
            reinfection_prob: 0.16,
            vaccine_inefficacy: 0.61,
            weights: default_weights(),
            horizon: 240,
            mitigation_coeffs: [0.6, 1.0, 0.5, 0.4, 0.61],
            beta: 2.0,
            density_ref: 1000.0,
            incubation_scale: 28.0,
        }
    }
}

fn check_unit(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(key, format!("{v} is outside [0, 1]")))
    }
}

fn check_positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(key, format!("{v} must be positive")))
    }
}

impl EnvConfig {
    /// Validates every field. `prefix` is prepended to key names in errors.
    pub fn validate_with_prefix(&self, prefix: &str) -> Result<()> {
        let k = |name: &str| format!("{prefix}{name}");
        check_positive(&k("incubation_days"), self.incubation_days)?;
        check_unit(&k("fatality_rate"), self.fatality_rate)?;
        if self.population == 0 {
            return Err(Error::validation(k("population"), "must be at least 1"));
        }
        if !(self.initial_infected >= 0.0 && self.initial_infected.is_finite()) {
            return Err(Error::validation(k("initial_infected"), "must be non-negative"));
        }
        check_positive(&k("density"), self.density)?;
        check_positive(&k("infection_threshold"), self.infection_threshold)?;
        check_positive(&k("death_threshold"), self.death_threshold)?;
        check_unit(&k("reinfection_prob"), self.reinfection_prob)?;
        check_unit(&k("vaccine_inefficacy"), self.vaccine_inefficacy)?;
        for (i, w) in self.weights.iter().enumerate() {
            check_positive(&k(&format!("weights[{i}]")), *w)?;
        }
        if self.horizon == 0 {
            return Err(Error::validation(k("horizon"), "must be at least 1"));
        }
        for (i, c) in self.mitigation_coeffs.iter().enumerate() {
            check_unit(&k(&format!("mitigation_coeffs[{i}]")), *c)?;
        }
        check_positive(&k("beta"), self.beta)?;
        check_positive(&k("density_ref"), self.density_ref)?;
        check_positive(&k("incubation_scale"), self.incubation_scale)?;
        if self.incubation_days >= self.incubation_scale {
            return Err(Error::validation(
                k("incubation_days"),
                format!(
                    "{} must be below incubation_scale ({})",
                    self.incubation_days, self.incubation_scale
                ),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_prefix("")
    }

    /// Largest possible cumulative episode reward.
    pub fn reward_ceiling(&self) -> f64 {
        2.0 * self.horizon as f64
    }
}

/// Discrete intensity level (0..=3) per action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionLevels([u8; NUM_ACTIONS]);

impl ActionLevels {
    pub fn new(levels: [u8; NUM_ACTIONS]) -> Result<Self> {
        if let Some(i) = levels.iter().position(|&l| l as usize >= NUM_LEVELS) {
            return Err(Error::validation(
                format!("levels[{i}]"),
                format!("{} is not in 0..=3", levels[i]),
            ));
        }
        Ok(Self(levels))
    }

    pub fn uniform(level: u8) -> Self {
        Self::new([level; NUM_ACTIONS]).expect("level must be in 0..=3")
    }

    pub fn get(&self) -> &[u8; NUM_ACTIONS] {
        &self.0
    }

    /// Quantizes a continuous intensity vector by band membership.
    pub fn from_intensity(a: &ActionIntensity) -> Self {
        let mut levels = [0u8; NUM_ACTIONS];
        for (l, &v) in levels.iter_mut().zip(a.get()) {
            *l = level_of(v);
        }
        Self(levels)
    }
}

fn level_of(v: f64) -> u8 {
    LEVEL_BANDS
        .iter()
        .rposition(|&(lo, _)| v >= lo)
        .unwrap_or(0) as u8
}

/// Realized action intensities, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionIntensity([f64; NUM_ACTIONS]);

impl ActionIntensity {
    pub fn new(a: [f64; NUM_ACTIONS]) -> Result<Self> {
        if let Some(i) = a.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::validation(
                format!("intensity[{i}]"),
                format!("{} is outside [0, 1]", a[i]),
            ));
        }
        Ok(Self(a))
    }

    pub fn zeros() -> Self {
        Self([0.0; NUM_ACTIONS])
    }

    /// Clamps each component into `[0, 1]`; NaN maps to 0.
    pub fn clamped(mut a: [f64; NUM_ACTIONS]) -> Self {
        for v in a.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self(a)
    }

    pub fn get(&self) -> &[f64; NUM_ACTIONS] {
        &self.0
    }
}

/// The agent's observation: transmission, identification, death and
/// reinfection rates, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpiState {
    pub transmission: f64,
    pub identification: f64,
    pub death: f64,
    pub reinfection: f64,
}

impl EpiState {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        [self.transmission, self.identification, self.death, self.reinfection]
    }

    pub fn from_array(v: [f64; OBS_DIM]) -> Self {
        Self {
            transmission: v[0],
            identification: v[1],
            death: v[2],
            reinfection: v[3],
        }
    }
}

/// Population state. All fields are persons (continuous).
///
/// `deaths` is the per-step death flow; `cum_deaths` is its running total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Compartments {
    pub normal: f64,
    pub current_infected: f64,
    pub first_infected: f64,
    pub reinfected: f64,
    pub next_infected: f64,
    pub undiscovered: f64,
    pub known: f64,
    pub recovered: f64,
    pub deaths: f64,
    pub cum_deaths: f64,
}

impl Compartments {
    pub fn initial(cfg: &EnvConfig) -> Self {
        Self {
            normal: cfg.population as f64,
            current_infected: cfg.initial_infected,
            ..Self::default()
        }
    }

    pub fn fields(&self) -> [f64; 10] {
        [
            self.normal,
            self.current_infected,
            self.first_infected,
            self.reinfected,
            self.next_infected,
            self.undiscovered,
            self.known,
            self.recovered,
            self.deaths,
            self.cum_deaths,
        ]
    }
}

/// Reward and its two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reward: f64,
    /// Health score.
    pub health: f64,
    /// Economic score.
    pub economy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub intensity: ActionIntensity,
    pub compartments: Compartments,
    pub breakdown: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: EpiState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Draws one realized intensity per action from its level's band.
/// Consumes exactly seven uniform draws, in action order.
pub fn sample_intensity(levels: &ActionLevels, rng: &mut impl Rng) -> ActionIntensity {
    let mut a = [0.0; NUM_ACTIONS];
    for (v, &l) in a.iter_mut().zip(levels.get()) {
        let (lo, hi) = LEVEL_BANDS[l as usize];
        let u: f64 = rng.random();
        *v = lo + u * (hi - lo);
    }
    ActionIntensity(a)
}

pub fn compute_rates(a: &ActionIntensity, comp: &Compartments, cfg: &EnvConfig) -> Result<EpiState> {
    if comp.normal <= 0.0 {
        return Err(Error::ExtinctPopulation(comp.normal));
    }
    let a = a.get();
    let c = &cfg.mitigation_coeffs;
    // travel, lockdown, distance work, masks, vaccination
    let mitigation = (1.0 - c[0] * a[0])
        * (1.0 - c[1] * a[1])
        * (1.0 - c[2] * a[2])
        * (1.0 - c[3] * a[3])
        * (1.0 - c[4] * a[6]);
    let pressure = cfg.beta * (cfg.density / cfg.density_ref) * (comp.current_infected / comp.normal);
    let transmission = (pressure * mitigation).clamp(0.0, 1.0);
    let identification = a[4] * (1.0 - cfg.incubation_days / cfg.incubation_scale);
    let death = (1.0 - a[5]) * cfg.fatality_rate;
    let reinfection = (1.0 - a[6] * cfg.vaccine_inefficacy) * cfg.reinfection_prob;
    Ok(EpiState {
        transmission,
        identification,
        death,
        reinfection,
    })
}

/// One transition of the compartment model. Updates are sequential: each
/// line sees the values assigned above it.
pub fn step_transition(comp: &Compartments, s: &EpiState) -> Compartments {
    let mut c = *comp;
    c.current_infected += c.undiscovered;
    c.normal -= c.deaths;
    c.first_infected = s.transmission * c.normal;
    c.reinfected = s.reinfection * c.recovered;
    c.next_infected = c.first_infected + c.reinfected;
    c.known = s.identification * c.next_infected;
    c.undiscovered = c.next_infected - c.known;
    c.deaths = s.death * c.known;
    c.recovered = c.known - c.deaths;

    for v in [
        &mut c.normal,
        &mut c.current_infected,
        &mut c.first_infected,
        &mut c.reinfected,
        &mut c.next_infected,
        &mut c.undiscovered,
        &mut c.known,
        &mut c.recovered,
        &mut c.deaths,
    ] {
        *v = v.max(0.0);
    }
    c.cum_deaths += c.deaths;
    c
}

pub fn compute_reward(next_infected: f64, deaths: f64, a: &ActionIntensity, cfg: &EnvConfig) -> RewardBreakdown {
    let ti = cfg.infection_threshold;
    let health = if next_infected < ti && deaths < cfg.death_threshold {
        (ti - next_infected) / ti
    } else {
        0.0
    };
    let weighted: f64 = cfg.weights.iter().zip(a.get()).map(|(w, a)| w * a).sum();
    let total: f64 = cfg.weights.iter().sum();
    let economy = 1.0 - weighted / total;
    let reward = if health > 0.0 && economy > 0.0 {
        health + economy
    } else {
        0.0
    };
    RewardBreakdown {
        reward,
        health,
        economy,
    }
}

/// Single-owner episodic environment.
#[derive(Debug, Clone)]
pub struct EpiEnv {
    cfg: EnvConfig,
    comp: Compartments,
    obs: EpiState,
    steps: usize,
    done: bool,
    rng: SimRng,
}

impl EpiEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let comp = Compartments::initial(&cfg);
        let obs = compute_rates(&ActionIntensity::zeros(), &comp, &cfg)?;
        Ok(Self {
            cfg,
            comp,
            obs,
            steps: 0,
            done: false,
            rng: rng_from_seed(seed),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn compartments(&self) -> &Compartments {
        &self.comp
    }

    pub fn observation(&self) -> EpiState {
        self.obs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self, seed: u64) -> (EpiState, Compartments) {
        self.rng = rng_from_seed(seed);
        self.comp = Compartments::initial(&self.cfg);
        self.steps = 0;
        self.done = false;
        // population >= 1 is validated, so the rates are defined
        self.obs = compute_rates(&ActionIntensity::zeros(), &self.comp, &self.cfg)
            .expect("validated config has a positive population");
        (self.obs, self.comp)
    }

    pub fn step(&mut self, levels: &ActionLevels) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract(format!(
                "step called on a finished episode (step {} of {})",
                self.steps, self.cfg.horizon
            )));
        }
        let intensity = sample_intensity(levels, &mut self.rng);
        if self.comp.normal <= 0.0 {
            self.steps += 1;
            self.done = true;
            return Ok(StepOutcome {
                observation: self.obs,
                reward: 0.0,
                done: true,
                info: StepInfo {
                    intensity,
                    compartments: self.comp,
                    breakdown: RewardBreakdown {
                        reward: 0.0,
                        health: 0.0,
                        economy: 0.0,
                    },
                },
            });
        }
        let rates = compute_rates(&intensity, &self.comp, &self.cfg)?;
        self.comp = step_transition(&self.comp, &rates);
        let breakdown = compute_reward(self.comp.next_infected, self.comp.deaths, &intensity, &self.cfg);
        self.obs = rates;
        self.steps += 1;
        self.done = self.steps >= self.cfg.horizon;
        Ok(StepOutcome {
            observation: rates,
            reward: breakdown.reward,
            done: self.done,
            info: StepInfo {
                intensity,
                compartments: self.comp,
                breakdown,
            },
        })
    }

    /// Continuous-action entry point: quantizes to levels by band, then
    /// draws fresh intensities inside those bands.
    pub fn step_continuous(&mut self, a: &ActionIntensity) -> Result<StepOutcome> {
        self.step(&ActionLevels::from_intensity(a))
    }
}
