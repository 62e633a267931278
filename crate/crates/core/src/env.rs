//! Reset/step environment surface for external learners.
//!
//! [`Env`] drives the same [`World`] the harness uses and hands out
//! observations in interchange form ([`GraphBuffers`] plus a six-value local
//! vector), so a foreign-language binding only has to move flat arrays.
//! Actions are validated before the world is touched; a rejected call leaves
//! the episode exactly as it was.

use thiserror::Error;

use crate::config::{ActionMode, ConfigError, WorldConfig};
use crate::harness::{EpisodeMetrics, EpisodeTracker};
use crate::obsgraph::{build_graph, local_observation, GraphBuffers, ObservationGraph};
use crate::world::{AgentAction, SimError, World};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("environment has not been reset")]
    NotReset,
    #[error("environment is closed")]
    Closed,
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("agent {agent}: {reason}")]
    Action { agent: usize, reason: String },
}

/// What one agent sees.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObservation {
    /// `[px, py, vx, vy, gx, gy]` with the goal relative to the agent.
    pub local: [f64; 6],
    pub graph: GraphBuffers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observations: Vec<AgentObservation>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub collided: Vec<bool>,
    pub at_goal: Vec<bool>,
}

#[derive(Debug)]
pub struct Env {
    config: WorldConfig,
    world: Option<World>,
    tracker: EpisodeTracker,
    seed: u64,
    closed: bool,
}

impl Env {
    pub fn new(config: WorldConfig) -> Result<Env, EnvError> {
        config.validate()?;
        let n = config.n_agents;
        Ok(Env {
            config,
            world: None,
            tracker: EpisodeTracker::new(n),
            seed: 0,
            closed: false,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }

    /// Starts a new episode from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<AgentObservation>, EnvError> {
        if self.closed {
            return Err(EnvError::Closed);
        }
        let world = World::generate(&self.config, seed)?;
        self.tracker = EpisodeTracker::new(world.n_agents());
        self.seed = seed;
        let (obs, graphs) = self.observe(&world);
        self.tracker.observe(&graphs);
        self.world = Some(world);
        Ok(obs)
    }

    pub fn step(&mut self, actions: &[AgentAction]) -> Result<EnvStep, EnvError> {
        if self.closed {
            return Err(EnvError::Closed);
        }
        self.check_actions(actions)?;
        let world = self.world.as_mut().ok_or(EnvError::NotReset)?;
        let outcome = world.step(actions)?;
        self.tracker.record(&outcome);
        let world = self.world.as_ref().expect("world present");
        let (observations, graphs) = self.observe(world);
        if !outcome.done {
            self.tracker.observe(&graphs);
        }
        Ok(EnvStep {
            observations,
            rewards: outcome.rewards,
            done: outcome.done,
            collided: outcome.collided,
            at_goal: outcome.at_goal,
        })
    }

    /// Metrics of the current episode so far.
    pub fn metrics(&self) -> Result<EpisodeMetrics, EnvError> {
        let world = self.world.as_ref().ok_or(EnvError::NotReset)?;
        Ok(self.tracker.finish(world, self.seed))
    }

    pub fn close(&mut self) {
        self.closed = true;
        self.world = None;
    }

    fn check_actions(&self, actions: &[AgentAction]) -> Result<(), EnvError> {
        let world = self.world.as_ref().ok_or(EnvError::NotReset)?;
        if world.is_done() {
            return Err(SimError::EpisodeOver(world.step_index()).into());
        }
        let n = world.n_agents();
        if actions.len() != n {
            return Err(EnvError::ActionCount {
                expected: n,
                got: actions.len(),
            });
        }
        for (agent, a) in actions.iter().enumerate() {
            let reason = match (a, self.config.action_mode) {
                (AgentAction::Discrete(i), ActionMode::Discrete5) if *i > 4 => Some(format!("discrete index {i} outside 0..=4")),
                (AgentAction::Discrete(_), ActionMode::Discrete5) => None,
                (AgentAction::Continuous(f), ActionMode::Continuous) if !(f.x.is_finite() && f.y.is_finite()) => {
                    Some("continuous force is not finite".to_string())
                }
                (AgentAction::Continuous(_), ActionMode::Continuous) => None,
                (AgentAction::Discrete(_), ActionMode::Continuous) => Some("discrete action in continuous mode".to_string()),
                (AgentAction::Continuous(_), ActionMode::Discrete5) => Some("continuous action in discrete mode".to_string()),
            };
            if let Some(reason) = reason {
                return Err(EnvError::Action { agent, reason });
            }
        }
        Ok(())
    }

    fn observe(&self, world: &World) -> (Vec<AgentObservation>, Vec<ObservationGraph>) {
        let graphs: Vec<_> = (0..world.n_agents())
            .map(|a| build_graph(world, a, self.config.goal_sharing))
            .collect();
        let obs = graphs
            .iter()
            .enumerate()
            .map(|(a, g)| AgentObservation {
                local: local_observation(world, a).to_array(),
                graph: g.to_buffers(),
            })
            .collect();
        (obs, graphs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Vec2;

    #[test]
    fn step_before_reset_fails() {
        let mut env = Env::new(WorldConfig::default()).unwrap();
        assert!(matches!(env.step(&[AgentAction::NOOP; 3]), Err(EnvError::NotReset)));
    }

    #[test]
    fn rejected_actions_leave_state_untouched() {
        let mut env = Env::new(WorldConfig::default()).unwrap();
        env.reset(4).unwrap();
        let before = env.world().unwrap().entities().to_vec();
        let bad = [AgentAction::NOOP, AgentAction::Discrete(9), AgentAction::NOOP];
        assert!(matches!(env.step(&bad), Err(EnvError::Action { agent: 1, .. })));
        let mixed = [AgentAction::NOOP, AgentAction::Continuous(Vec2::zeros()), AgentAction::NOOP];
        assert!(env.step(&mixed).is_err());
        assert!(matches!(env.step(&[AgentAction::NOOP]), Err(EnvError::ActionCount { .. })));
        assert_eq!(env.world().unwrap().entities(), &before[..]);
        assert_eq!(env.world().unwrap().step_index(), 0);
    }

    #[test]
    fn episode_runs_to_done_then_refuses() {
        let cfg = WorldConfig {
            max_steps: 3,
            ..WorldConfig::default()
        };
        let mut env = Env::new(cfg).unwrap();
        let obs = env.reset(1).unwrap();
        assert_eq!(obs.len(), 3);
        assert_eq!(obs[0].graph.width, 9);
        let mut done = false;
        for _ in 0..3 {
            done = env.step(&[AgentAction::NOOP; 3]).unwrap().done;
        }
        assert!(done);
        assert!(env.step(&[AgentAction::NOOP; 3]).is_err());
        env.close();
        assert!(matches!(env.reset(1), Err(EnvError::Closed)));
    }
}
