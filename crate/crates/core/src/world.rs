//! Simulation state: scenario generation, force assembly, integration,
//! collision accounting, rewards and goal bookkeeping.
//!
//! Entity ids are dense indices. For `n` agents and `k` obstacles, agents are
//! `0..n`, their goals `n..2n` (agent `i` owns goal `n + i`) and obstacles
//! `2n..2n + k`.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, WorldConfig};
use crate::dynamics::{Dynamics, State2D, Vec2};
use crate::rng::{self, Stream};

const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "could not place {kind} #{index} after {attempts} attempts: {n_agents} agents, {n_obstacles} obstacles \
         in a {width} x {width} area is too crowded"
    )]
    Placement {
        kind: EntityKind,
        index: usize,
        attempts: usize,
        n_agents: usize,
        n_obstacles: usize,
        width: f64,
    },
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("agent {agent}: discrete action index {index} is outside 0..=4")]
    ActionIndex { agent: usize, index: u8 },
    #[error("agent {agent}: continuous action is not finite")]
    ActionNotFinite { agent: usize },
    #[error("non-finite state for entity {entity} at step {step}")]
    NonFinite { entity: usize, step: usize },
    #[error("episode already finished at step {0}")]
    EpisodeOver(usize),
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("invalid layout: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Agent,
    Obstacle,
    Goal,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Agent => "agent",
            EntityKind::Obstacle => "obstacle",
            EntityKind::Goal => "goal",
        }
    }

    /// Goals are targets only; they exert no force and never collide.
    pub fn is_physical(self) -> bool {
        !matches!(self, EntityKind::Goal)
    }
}

impl std::fmt::Display for EntityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: usize,
    pub kind: EntityKind,
    pub state: State2D,
    /// For goals this is the reach threshold.
    pub radius: f64,
    pub mass: Option<f64>,
    pub goal_id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentAction {
    /// 0 none, 1 +x, 2 -x, 3 +y, 4 -y.
    Discrete(u8),
    Continuous(Vec2),
}

impl AgentAction {
    pub const NOOP: AgentAction = AgentAction::Discrete(0);

    /// Force in newtons. Continuous forces are clamped to the ball of radius
    /// `magnitude`; out-of-range discrete indices yield `None`.
    pub fn force(&self, magnitude: f64) -> Option<Vec2> {
        match *self {
            AgentAction::Discrete(i) => Some(match i {
                0 => Vec2::zeros(),
                1 => Vec2::new(magnitude, 0.0),
                2 => Vec2::new(-magnitude, 0.0),
                3 => Vec2::new(0.0, magnitude),
                4 => Vec2::new(0.0, -magnitude),
                _ => return None,
            }),
            AgentAction::Continuous(f) => Some(clamp_norm(f, magnitude)),
        }
    }
}

pub fn clamp_norm(v: Vec2, max: f64) -> Vec2 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Reward terms for one agent at one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardTerms {
    pub dist: f64,
    pub coll: f64,
    pub goal: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.dist + self.coll + self.goal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub rewards: Vec<f64>,
    pub terms: Vec<RewardTerms>,
    /// Agent overlaps any physical entity after this step.
    pub collided: Vec<bool>,
    /// Collision onsets credited to each agent this step.
    pub onsets: Vec<u32>,
    pub at_goal: Vec<bool>,
    pub done: bool,
}

impl StepOutcome {
    pub fn joint_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalReset {
    pub agent: usize,
    pub old: Vec2,
    pub new: Vec2,
}

/// One row of a trajectory stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub entity_id: usize,
    pub kind: EntityKind,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Agents only; `None` before the first step.
    pub reward: Option<f64>,
    pub collided: bool,
}

/// Receives per-step trajectory records.
pub trait TrajectorySink {
    fn record(&mut self, record: &TrajectoryRecord);
}

impl TrajectorySink for Vec<TrajectoryRecord> {
    fn record(&mut self, record: &TrajectoryRecord) {
        self.push(record.clone());
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Soft-penetration repulsion on entity `i` from entity `j`:
/// `k · margin · ln(1 + exp((r_i + r_j - |Δp|) / margin))` directed from `j`
/// toward `i`. Coincident centers push `i` along +x at the peak magnitude.
pub fn contact_force(p_i: Vec2, p_j: Vec2, r_i: f64, r_j: f64, gain: f64, margin: f64) -> Vec2 {
    let delta = p_i - p_j;
    let dist = delta.norm();
    let magnitude = gain * margin * softplus((r_i + r_j - dist) / margin);
    if dist == 0.0 {
        tracing::warn!("coincident entity centers; applying contact force along +x");
        return Vec2::new(magnitude, 0.0);
    }
    delta * (magnitude / dist)
}

/// Mutable simulation state for one episode.
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    dynamics: Dynamics,
    entities: Vec<Entity>,
    step_index: usize,
    reached_goal: Vec<bool>,
    first_reach_step: Vec<Option<usize>>,
    /// Overlap state of (agent, physical entity) pairs after the last step,
    /// row-major over `n_agents × entities.len()`.
    pair_overlap: Vec<bool>,
    overlapping: Vec<bool>,
    collision_events: u64,
    agent_collisions: Vec<u32>,
    overlap_pair_steps: u64,
}

impl World {
    /// Random scenario: agents, goals and obstacles placed uniformly in the
    /// square with no initial overlap. Agents start at rest.
    pub fn generate(config: &WorldConfig, seed: u64) -> Result<World, SimError> {
        config.validate()?;
        let mut rng = rng::stream(seed, Stream::Scenario);
        let w = config.env_half_width;
        let n = config.n_agents;
        let k = config.n_obstacles;
        let specs = std::iter::repeat((EntityKind::Agent, config.agent_radius))
            .take(n)
            .chain(std::iter::repeat((EntityKind::Goal, config.goal_reach_threshold)).take(n))
            .chain(std::iter::repeat((EntityKind::Obstacle, config.obstacle_radius)).take(k));

        let mut placed: Vec<(Vec2, f64)> = Vec::with_capacity(2 * n + k);
        for (index, (kind, radius)) in specs.enumerate() {
            let mut found = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let p = Vec2::new(rng.gen_range(-w..=w), rng.gen_range(-w..=w));
                let clear = placed
                    .iter()
                    .all(|(q, r)| (p - q).norm() > radius + r + config.contact_margin);
                if clear {
                    found = Some(p);
                    break;
                }
            }
            match found {
                Some(p) => placed.push((p, radius)),
                None => {
                    return Err(SimError::Placement {
                        kind,
                        index,
                        attempts: PLACEMENT_ATTEMPTS,
                        n_agents: n,
                        n_obstacles: k,
                        width: 2.0 * w,
                    })
                }
            }
        }

        let agents: Vec<(Vec2, Vec2)> = (0..n).map(|i| (placed[i].0, placed[n + i].0)).collect();
        let obstacles: Vec<Vec2> = placed[2 * n..].iter().map(|(p, _)| *p).collect();
        Self::build(config, &agents, &obstacles)
    }

    /// Hand-built scenario from `(agent start, goal)` pairs and obstacle
    /// positions. Agents start at rest. Overrides the config's entity counts.
    pub fn from_layout(config: &WorldConfig, agents: &[(Vec2, Vec2)], obstacles: &[Vec2]) -> Result<World, SimError> {
        let mut cfg = config.clone();
        cfg.n_agents = agents.len();
        cfg.n_obstacles = obstacles.len();
        cfg.validate()?;
        Self::build(&cfg, agents, obstacles)
    }

    fn build(config: &WorldConfig, agents: &[(Vec2, Vec2)], obstacles: &[Vec2]) -> Result<World, SimError> {
        let dynamics = config.dynamics()?;
        let n = agents.len();
        if n == 0 {
            return Err(SimError::Layout("at least one agent is required".into()));
        }
        let mut entities = Vec::with_capacity(2 * n + obstacles.len());
        for (i, (start, _)) in agents.iter().enumerate() {
            entities.push(Entity {
                id: i,
                kind: EntityKind::Agent,
                state: State2D::at_rest(*start),
                radius: config.agent_radius,
                mass: Some(dynamics.mass()),
                goal_id: Some(n + i),
            });
        }
        for (i, (_, goal)) in agents.iter().enumerate() {
            entities.push(Entity {
                id: n + i,
                kind: EntityKind::Goal,
                state: State2D::at_rest(*goal),
                radius: config.goal_reach_threshold,
                mass: None,
                goal_id: None,
            });
        }
        for (j, p) in obstacles.iter().enumerate() {
            entities.push(Entity {
                id: 2 * n + j,
                kind: EntityKind::Obstacle,
                state: State2D::at_rest(*p),
                radius: config.obstacle_radius,
                mass: None,
                goal_id: None,
            });
        }
        if entities.iter().any(|e| !e.state.is_finite()) {
            return Err(SimError::Layout("non-finite position".into()));
        }
        let total = entities.len();
        Ok(World {
            config: config.clone(),
            dynamics,
            entities,
            step_index: 0,
            reached_goal: vec![false; n],
            first_reach_step: vec![None; n],
            pair_overlap: vec![false; n * total],
            overlapping: vec![false; n],
            collision_events: 0,
            agent_collisions: vec![0; n],
            overlap_pair_steps: 0,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn n_agents(&self) -> usize {
        self.reached_goal.len()
    }

    pub fn agent(&self, agent: usize) -> &Entity {
        &self.entities[agent]
    }

    pub fn goal_of(&self, agent: usize) -> &Entity {
        &self.entities[self.n_agents() + agent]
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_done(&self) -> bool {
        self.step_index >= self.config.max_steps
    }

    pub fn reached_goal(&self) -> &[bool] {
        &self.reached_goal
    }

    pub fn first_reach_step(&self) -> &[Option<usize>] {
        &self.first_reach_step
    }

    /// Total collision onsets over agent-entity pairs.
    pub fn collision_count(&self) -> u64 {
        self.collision_events
    }

    /// Per-agent onset tallies; an agent-agent onset credits both agents.
    pub fn agent_collisions(&self) -> &[u32] {
        &self.agent_collisions
    }

    /// Sum over steps of the number of overlapping pairs (per-step counting).
    pub fn overlap_pair_steps(&self) -> u64 {
        self.overlap_pair_steps
    }

    pub fn is_overlapping(&self, agent: usize) -> bool {
        self.overlapping[agent]
    }

    pub fn distance_to_goal(&self, agent: usize) -> f64 {
        (self.agent(agent).state.position - self.goal_of(agent).state.position).norm()
    }

    pub fn at_goal(&self, agent: usize) -> bool {
        self.distance_to_goal(agent) < self.config.goal_reach_threshold
    }

    /// Reward terms for `agent` in the current state.
    pub fn reward_terms(&self, agent: usize) -> RewardTerms {
        RewardTerms {
            dist: -self.distance_to_goal(agent),
            coll: if self.overlapping[agent] {
                self.config.reward_collision
            } else {
                0.0
            },
            goal: if self.at_goal(agent) {
                self.config.reward_goal
            } else {
                0.0
            },
        }
    }

    pub fn reward(&self, agent: usize) -> f64 {
        self.reward_terms(agent).total()
    }

    pub fn joint_reward(&self) -> f64 {
        (0..self.n_agents()).map(|a| self.reward(a)).sum()
    }

    /// Contact forces on every agent from overlapping physical entities.
    pub fn contact_forces(&self) -> Vec<Vec2> {
        let n = self.n_agents();
        let gain = self.config.contact_gain;
        let margin = self.config.contact_margin;
        let mut forces = vec![Vec2::zeros(); n];
        if gain == 0.0 {
            return forces;
        }
        for i in 0..n {
            let a = &self.entities[i];
            for e in self.entities.iter().skip(i + 1) {
                if !e.kind.is_physical() {
                    continue;
                }
                let f = contact_force(a.state.position, e.state.position, a.radius, e.radius, gain, margin);
                forces[i] += f;
                if e.kind == EntityKind::Agent {
                    forces[e.id] -= f;
                }
            }
        }
        forces
    }

    /// Advances every agent by one step.
    pub fn step(&mut self, actions: &[AgentAction]) -> Result<StepOutcome, SimError> {
        let n = self.n_agents();
        if self.is_done() {
            return Err(SimError::EpisodeOver(self.step_index));
        }
        if actions.len() != n {
            return Err(SimError::ActionCount {
                expected: n,
                got: actions.len(),
            });
        }
        let mut control = Vec::with_capacity(n);
        for (agent, action) in actions.iter().enumerate() {
            if let AgentAction::Continuous(f) = action {
                if !(f.x.is_finite() && f.y.is_finite()) {
                    return Err(SimError::ActionNotFinite { agent });
                }
            }
            match action.force(self.config.action_force) {
                Some(f) => control.push(f),
                None => {
                    let AgentAction::Discrete(index) = *action else { unreachable!() };
                    return Err(SimError::ActionIndex { agent, index });
                }
            }
        }

        let contact = self.contact_forces();
        let dt = self.config.dt;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let s = self.dynamics.step(&self.entities[i].state, control[i] + contact[i], dt);
            if !s.is_finite() {
                return Err(SimError::NonFinite {
                    entity: i,
                    step: self.step_index,
                });
            }
            next.push(s);
        }
        let w = self.config.env_half_width;
        for (i, mut s) in next.into_iter().enumerate() {
            for axis in 0..2 {
                if s.position[axis] > w {
                    s.position[axis] = w;
                    s.velocity[axis] = 0.0;
                } else if s.position[axis] < -w {
                    s.position[axis] = -w;
                    s.velocity[axis] = 0.0;
                }
            }
            self.entities[i].state = s;
        }
        self.step_index += 1;

        let onsets = self.update_overlaps();

        let mut at_goal = vec![false; n];
        for (agent, flag) in at_goal.iter_mut().enumerate() {
            *flag = self.at_goal(agent);
            if *flag && !self.reached_goal[agent] {
                self.reached_goal[agent] = true;
                self.first_reach_step[agent] = Some(self.step_index);
            }
        }

        let terms: Vec<RewardTerms> = (0..n).map(|a| self.reward_terms(a)).collect();
        Ok(StepOutcome {
            rewards: terms.iter().map(RewardTerms::total).collect(),
            terms,
            collided: self.overlapping.clone(),
            onsets,
            at_goal,
            done: self.is_done(),
        })
    }

    fn update_overlaps(&mut self) -> Vec<u32> {
        let n = self.n_agents();
        let total = self.entities.len();
        let mut onsets = vec![0u32; n];
        self.overlapping.iter_mut().for_each(|o| *o = false);
        for i in 0..n {
            for j in (i + 1)..total {
                let e = &self.entities[j];
                if !e.kind.is_physical() {
                    continue;
                }
                let a = &self.entities[i];
                let now = (a.state.position - e.state.position).norm() < a.radius + e.radius;
                let slot = i * total + j;
                if now {
                    self.overlap_pair_steps += 1;
                    self.overlapping[i] = true;
                    if e.kind == EntityKind::Agent {
                        self.overlapping[j] = true;
                    }
                    if !self.pair_overlap[slot] {
                        self.collision_events += 1;
                        onsets[i] += 1;
                        if e.kind == EntityKind::Agent {
                            onsets[j] += 1;
                        }
                    }
                }
                self.pair_overlap[slot] = now;
            }
        }
        for (tally, o) in self.agent_collisions.iter_mut().zip(&onsets) {
            *tally += o;
        }
        onsets
    }

    /// Moves `agent`'s goal to an area-uniform random point within `rho_max`
    /// of its current position (clamped to the square) and clears the
    /// agent's reached latch.
    pub fn reset_goal<R: Rng + ?Sized>(&mut self, agent: usize, rho_max: f64, rng: &mut R) -> Result<GoalReset, SimError> {
        if agent >= self.n_agents() {
            return Err(SimError::UnknownAgent(agent));
        }
        let u: f64 = rng.gen();
        let theta: f64 = rng.gen::<f64>() * TAU;
        let radius = rho_max * u.sqrt();
        let w = self.config.env_half_width;
        let goal_id = self.n_agents() + agent;
        let old = self.entities[goal_id].state.position;
        let offset = Vec2::new(radius * theta.cos(), radius * theta.sin());
        let new = Vec2::new((old.x + offset.x).clamp(-w, w), (old.y + offset.y).clamp(-w, w));
        self.entities[goal_id].state.position = new;
        self.reached_goal[agent] = false;
        self.first_reach_step[agent] = None;
        Ok(GoalReset { agent, old, new })
    }

    /// Emits one record per entity in id order.
    pub fn emit_records(&self, outcome: Option<&StepOutcome>, sink: &mut dyn TrajectorySink) {
        let n = self.n_agents();
        for e in &self.entities {
            let (reward, collided) = match (e.kind, outcome) {
                (EntityKind::Agent, Some(o)) => (Some(o.rewards[e.id]), o.collided[e.id]),
                (EntityKind::Agent, None) => (None, false),
                _ => (None, false),
            };
            debug_assert!(e.kind != EntityKind::Agent || e.id < n);
            sink.record(&TrajectoryRecord {
                step: self.step_index,
                entity_id: e.id,
                kind: e.kind,
                position: e.state.position,
                velocity: e.state.velocity,
                reward,
                collided,
            });
        }
    }
}
