use rand::Rng;

use crate::env::{ActionLevels, EpiState, NUM_ACTIONS, NUM_LEVELS};
use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ParamVector};
use crate::rng::SimRng;

use super::{ActMode, Action, Agent, AgentKind, Diagnostics, Transition};

/// Uniform-random levels in both act modes. Has no networks.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Random
    }

    fn act(&self, _state: &EpiState, _mode: ActMode, rng: &mut SimRng) -> Result<Action> {
        let mut levels = [0u8; NUM_ACTIONS];
        for l in levels.iter_mut() {
            *l = rng.random_range(0..NUM_LEVELS as u8);
        }
        Ok(Action::Levels(ActionLevels::new(levels)?))
    }

    fn observe(&mut self, _transition: Transition, _rng: &mut SimRng) -> Result<Diagnostics> {
        Ok(Diagnostics::default())
    }

    fn end_episode(&mut self, _rng: &mut SimRng) -> Result<Diagnostics> {
        Ok(Diagnostics::default())
    }

    fn params(&self) -> Vec<ParamVector> {
        Vec::new()
    }

    fn load(&mut self, params: &[ParamVector]) -> Result<()> {
        if params.is_empty() {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!("random agent has no networks, got {}", params.len())))
        }
    }

    fn network_specs(&self) -> Vec<MlpSpec> {
        Vec::new()
    }
}
