//! Action-selection interface and scripted baseline controllers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::config::{ActionMode, ConfigError, WorldConfig};
use crate::dynamics::{Dynamics, State2D, Vec2};
use crate::obsgraph::{LocalObservation, ObservationGraph};
use crate::world::{clamp_norm, AgentAction, EntityKind};

/// Fraction of full thrust the approach profile assumes is available for
/// braking; the rest absorbs drift and discretization.
const BRAKE_FRACTION: f64 = 0.5;
/// Perpendicular nudge, as a fraction of the repulsion, applied when the
/// field is exactly head-on.
const HEAD_ON_NUDGE: f64 = 0.25;

/// What a policy knows about the environment it acts in.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyContext {
    pub dynamics: Dynamics,
    pub dt: f64,
    pub action_mode: ActionMode,
    pub action_force: f64,
    pub goal_threshold: f64,
    pub sensing_radius: f64,
    pub n_agents: usize,
    /// Team size the policy was trained for; scripted baselines ignore it.
    pub train_agents: usize,
}

impl PolicyContext {
    pub fn from_config(config: &WorldConfig, train_agents: usize) -> Result<Self, ConfigError> {
        Ok(Self {
            dynamics: config.dynamics()?,
            dt: config.dt,
            action_mode: config.action_mode,
            action_force: config.action_force,
            goal_threshold: config.goal_reach_threshold,
            sensing_radius: config.sensing_radius,
            n_agents: config.n_agents,
            train_agents,
        })
    }

    /// Peak control acceleration in environment units.
    pub fn max_accel(&self) -> f64 {
        self.action_force / self.dynamics.mass() * self.dynamics.accel_scale()
    }
}

pub trait Policy: Send {
    fn act(&mut self, obs: &LocalObservation, graph: &ObservationGraph, rng: &mut dyn RngCore) -> AgentAction;

    /// Clears per-episode state.
    fn reset(&mut self) {}
}

/// Builds one policy instance per agent per episode.
pub trait PolicyFactory: Sync {
    fn build(&self, ctx: &PolicyContext) -> Box<dyn Policy>;
}

impl<F> PolicyFactory for F
where
    F: Fn(&PolicyContext) -> Box<dyn Policy> + Sync,
{
    fn build(&self, ctx: &PolicyContext) -> Box<dyn Policy> {
        self(ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Greedy,
    Potential,
    PotentialIntent,
    Random,
    /// Served through the foreign-function bridge; not constructible here.
    External,
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected greedy, potential, potential+intent, random or external)")]
    Unknown(String),
    #[error("the `external` policy is only available through the bridge")]
    ExternalUnavailable,
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "greedy" => PolicyKind::Greedy,
            "potential" => PolicyKind::Potential,
            "potential+intent" => PolicyKind::PotentialIntent,
            "random" => PolicyKind::Random,
            "external" => PolicyKind::External,
            other => return Err(PolicyError::Unknown(other.to_string())),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Greedy => "greedy",
            PolicyKind::Potential => "potential",
            PolicyKind::PotentialIntent => "potential+intent",
            PolicyKind::Random => "random",
            PolicyKind::External => "external",
        })
    }
}

/// Factory for the built-in scripted policies.
#[derive(Debug, Clone, Copy)]
pub struct Builtin(PolicyKind);

impl PolicyKind {
    pub fn factory(self) -> Result<Builtin, PolicyError> {
        match self {
            PolicyKind::External => Err(PolicyError::ExternalUnavailable),
            k => Ok(Builtin(k)),
        }
    }
}

impl PolicyFactory for Builtin {
    fn build(&self, ctx: &PolicyContext) -> Box<dyn Policy> {
        match self.0 {
            PolicyKind::Greedy => Box::new(GreedyGoal::new(ctx.clone())),
            PolicyKind::Potential => Box::new(PotentialField::new(ctx.clone())),
            PolicyKind::PotentialIntent => Box::new(PotentialField::with_intent(ctx.clone())),
            PolicyKind::Random => Box::new(RandomPolicy::new(ctx.action_mode, ctx.action_force)),
            PolicyKind::External => unreachable!("rejected by PolicyKind::factory"),
        }
    }
}

/// Discrete action whose force has the largest projection on `field`;
/// no-op when no axis projects positively.
pub fn best_axis_action(field: Vec2) -> AgentAction {
    let scores = [0.0, field.x, -field.x, field.y, -field.y];
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    AgentAction::Discrete(best as u8)
}

/// Goal-seeking force: track a braking-limited approach velocity toward the
/// goal. The `-v` part of `(v_des - v)` is the damping term.
pub fn attraction_force(ctx: &PolicyContext, obs: &LocalObservation) -> Vec2 {
    let dist = obs.rel_goal.norm();
    if dist < ctx.goal_threshold {
        return Vec2::zeros();
    }
    let speed = (2.0 * BRAKE_FRACTION * ctx.max_accel() * dist).sqrt();
    let v_des = obs.rel_goal * (speed / dist);
    let gain = ctx.dynamics.mass() / (ctx.dt * ctx.dynamics.accel_scale());
    (v_des - obs.velocity) * gain
}

/// One-step-lookahead greedy controller.
///
/// Discrete mode simulates each of the five actions for one `dt` under the
/// true dynamics (contact forces ignored) and keeps the one landing closest
/// to the goal; ties go to the lower action index. Continuous mode applies
/// [`attraction_force`] clamped to the action ball.
#[derive(Debug, Clone)]
pub struct GreedyGoal {
    ctx: PolicyContext,
}

impl GreedyGoal {
    pub fn new(ctx: PolicyContext) -> Self {
        Self { ctx }
    }

    pub fn predicted_distance(&self, obs: &LocalObservation, action: AgentAction) -> f64 {
        let force = action.force(self.ctx.action_force).unwrap_or_else(Vec2::zeros);
        let next = self
            .ctx
            .dynamics
            .step(&State2D::new(obs.position, obs.velocity), force, self.ctx.dt);
        (obs.position + obs.rel_goal - next.position).norm()
    }

    fn act_obs(&self, obs: &LocalObservation) -> AgentAction {
        match self.ctx.action_mode {
            ActionMode::Discrete5 if obs.rel_goal.norm() < self.ctx.goal_threshold => AgentAction::NOOP,
            ActionMode::Discrete5 => {
                let mut best = (AgentAction::NOOP, self.predicted_distance(obs, AgentAction::NOOP));
                for i in 1..5u8 {
                    let a = AgentAction::Discrete(i);
                    let d = self.predicted_distance(obs, a);
                    if d < best.1 {
                        best = (a, d);
                    }
                }
                best.0
            }
            ActionMode::Continuous => {
                AgentAction::Continuous(clamp_norm(attraction_force(&self.ctx, obs), self.ctx.action_force))
            }
        }
    }
}

impl Policy for GreedyGoal {
    fn act(&mut self, obs: &LocalObservation, _graph: &ObservationGraph, _rng: &mut dyn RngCore) -> AgentAction {
        self.act_obs(obs)
    }
}

/// Attraction toward the goal plus repulsion from physical neighbors in the
/// observation graph.
///
/// A neighbor at center distance `r < d` pushes with magnitude
/// `k_rep (1/r - 1/d) / r²`, `k_rep = 0.1 d²`. With `intent` enabled, agent
/// neighbors whose goals are visible and whose straight path to that goal
/// stays clear of ours are discounted.
#[derive(Debug, Clone)]
pub struct PotentialField {
    ctx: PolicyContext,
    pub attraction_gain: f64,
    pub repulsion_gain: f64,
    intent: Option<Intent>,
}

#[derive(Debug, Clone, Copy)]
pub struct Intent {
    /// Paths closer than this are treated as conflicting.
    pub clearance: f64,
    /// Repulsion weight applied to non-conflicting neighbors.
    pub discount: f64,
}

impl PotentialField {
    pub fn new(ctx: PolicyContext) -> Self {
        let d = ctx.sensing_radius;
        Self {
            ctx,
            attraction_gain: 1.0,
            repulsion_gain: 0.1 * d * d,
            intent: None,
        }
    }

    pub fn with_intent(ctx: PolicyContext) -> Self {
        let d = ctx.sensing_radius;
        Self {
            intent: Some(Intent {
                clearance: 0.1 * d,
                discount: 0.0,
            }),
            ..Self::new(ctx)
        }
    }

    pub fn repulsion_magnitude(&self, r: f64) -> f64 {
        let d = self.ctx.sensing_radius;
        if r >= d {
            0.0
        } else {
            self.repulsion_gain * (1.0 / r - 1.0 / d) / (r * r)
        }
    }

    fn weight(&self, obs: &LocalObservation, rel_position: Vec2, rel_goal: Option<Vec2>) -> f64 {
        match (self.intent, rel_goal) {
            (Some(intent), Some(their_goal)) => {
                let gap = segment_distance(Vec2::zeros(), obs.rel_goal, rel_position, their_goal);
                if gap > intent.clearance {
                    intent.discount
                } else {
                    1.0
                }
            }
            _ => 1.0,
        }
    }

    /// Unclamped field in newtons.
    pub fn field(&self, obs: &LocalObservation, graph: &ObservationGraph) -> Vec2 {
        let attraction = attraction_force(&self.ctx, obs) * self.attraction_gain;
        let mut repulsion = Vec2::zeros();
        for node in graph.in_neighbors(obs.agent) {
            let f = &node.feature;
            if node.entity_id == obs.agent || f.kind == EntityKind::Goal {
                continue;
            }
            let r = f.rel_position.norm();
            let w = if f.kind == EntityKind::Agent {
                self.weight(obs, f.rel_position, f.rel_goal)
            } else {
                1.0
            };
            if w == 0.0 {
                continue;
            }
            if r == 0.0 {
                repulsion += Vec2::new(self.ctx.action_force * w, 0.0);
                continue;
            }
            repulsion -= f.rel_position * (w * self.repulsion_magnitude(r) / r);
        }

        let mut total = attraction + repulsion;
        let rn = repulsion.norm();
        let an = attraction.norm();
        if rn > 0.0 && an > 0.0 && obs.rel_goal.norm() > 0.0 {
            let g = obs.rel_goal.normalize();
            let cross = repulsion.x * g.y - repulsion.y * g.x;
            if cross.abs() <= 1e-9 * rn && repulsion.dot(&g) < 0.0 {
                total += Vec2::new(-g.y, g.x) * (HEAD_ON_NUDGE * rn);
            }
        }
        total
    }
}

impl Policy for PotentialField {
    fn act(&mut self, obs: &LocalObservation, graph: &ObservationGraph, _rng: &mut dyn RngCore) -> AgentAction {
        let f = clamp_norm(self.field(obs, graph), self.ctx.action_force);
        match self.ctx.action_mode {
            ActionMode::Discrete5 => best_axis_action(f),
            ActionMode::Continuous => AgentAction::Continuous(f),
        }
    }
}

/// Uniform random actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    mode: ActionMode,
    force: f64,
}

impl RandomPolicy {
    pub fn new(mode: ActionMode, force: f64) -> Self {
        Self { mode, force }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> AgentAction {
        match self.mode {
            ActionMode::Discrete5 => AgentAction::Discrete(rng.gen_range(0..5u8)),
            ActionMode::Continuous => {
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let m = rng.gen::<f64>() * self.force;
                AgentAction::Continuous(Vec2::new(m * theta.cos(), m * theta.sin()))
            }
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &LocalObservation, _graph: &ObservationGraph, rng: &mut dyn RngCore) -> AgentAction {
        self.sample(rng)
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Minimum distance between segments `[a0, a1]` and `[b0, b1]`.
pub fn segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    let cross = |u: Vec2, v: Vec2| u.x * v.y - u.y * v.x;
    let d1 = cross(a1 - a0, b0 - a0);
    let d2 = cross(a1 - a0, b1 - a0);
    let d3 = cross(b1 - b0, a0 - b0);
    let d4 = cross(b1 - b0, a1 - b0);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}
