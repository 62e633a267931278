//! Environment and experiment configuration.
//!
//! Configs are TOML. World parameters live at the top level and experiment
//! parameters under an `[experiment]` table. Keys left out take the defaults
//! of the selected `regime`; unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    self, CwParams, Dynamics, DynamicsError, GroundParams, J2Params, DEFAULT_ORBIT_RADIUS_KM, EARTH_J2, EARTH_MU,
    EARTH_RADIUS_KM,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unknown config key `{key}`{}", suggestion_suffix(.suggestion))]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn suggestion_suffix(s: &Option<String>) -> String {
    match s {
        Some(k) => format!(" (did you mean `{k}`?)"),
        None => String::new(),
    }
}

impl From<DynamicsError> for ConfigError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParam { name, reason } => ConfigError::Invalid { field: name, reason },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Ground,
    Cw,
    CwJ2,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Ground => "ground",
            Regime::Cw => "cw",
            Regime::CwJ2 => "cw_j2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// No-op, +x, -x, +y, -y at the configured force magnitude.
    Discrete5,
    /// Any force inside the ball of radius `action_force`.
    Continuous,
}

/// Full parameterization of one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub regime: Regime,
    /// Agents live in `[-env_half_width, env_half_width]²`.
    pub env_half_width: f64,
    pub n_agents: usize,
    pub n_obstacles: usize,
    pub sensing_radius: f64,
    /// Seconds.
    pub dt: f64,
    pub max_steps: usize,
    pub action_mode: ActionMode,
    /// Newtons.
    pub action_force: f64,
    pub goal_reach_threshold: f64,
    pub agent_radius: f64,
    pub obstacle_radius: f64,
    pub contact_gain: f64,
    pub contact_margin: f64,
    pub reward_collision: f64,
    pub reward_goal: f64,
    pub goal_sharing: bool,
    pub seed: u64,

    pub ground_mass: f64,
    pub ground_damping: f64,

    pub satellite_mass: f64,
    /// km³/s².
    pub mu: f64,
    /// Target orbit radius, km.
    pub orbit_radius: f64,
    /// Overrides `sqrt(mu / orbit_radius³)` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_n: Option<f64>,
    pub j2: f64,
    pub earth_radius: f64,
    pub inclination_deg: f64,
}

pub const WORLD_KEYS: &[&str] = &[
    "regime",
    "env_half_width",
    "n_agents",
    "n_obstacles",
    "sensing_radius",
    "dt",
    "max_steps",
    "action_mode",
    "action_force",
    "goal_reach_threshold",
    "agent_radius",
    "obstacle_radius",
    "contact_gain",
    "contact_margin",
    "reward_collision",
    "reward_goal",
    "goal_sharing",
    "seed",
    "ground_mass",
    "ground_damping",
    "satellite_mass",
    "mu",
    "orbit_radius",
    "omega_n",
    "j2",
    "earth_radius",
    "inclination_deg",
];

impl Default for WorldConfig {
    fn default() -> Self {
        Self::space(Regime::Cw)
    }
}

impl WorldConfig {
    /// Orbital defaults: a 2 km box, 100 steps of 36 s, 3 agents and 3 debris.
    pub fn space(regime: Regime) -> Self {
        Self {
            regime,
            env_half_width: 1.0,
            n_agents: 3,
            n_obstacles: 3,
            sensing_radius: 1.0,
            dt: 36.0,
            max_steps: 100,
            action_mode: ActionMode::Discrete5,
            action_force: 1.0,
            goal_reach_threshold: 0.05,
            agent_radius: 0.025,
            obstacle_radius: 0.025,
            contact_gain: 100.0,
            contact_margin: 1e-3,
            reward_collision: -5.0,
            reward_goal: 5.0,
            goal_sharing: true,
            seed: 0,
            ground_mass: 1.0,
            ground_damping: 0.25,
            satellite_mass: 100.0,
            mu: EARTH_MU,
            orbit_radius: DEFAULT_ORBIT_RADIUS_KM,
            omega_n: None,
            j2: EARTH_J2,
            earth_radius: EARTH_RADIUS_KM,
            inclination_deg: 0.0,
        }
    }

    /// Ground defaults: same geometry in meters, 25 steps of 0.1 s.
    pub fn ground() -> Self {
        Self {
            regime: Regime::Ground,
            dt: 0.1,
            max_steps: 25,
            ..Self::space(Regime::Ground)
        }
    }

    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Ground => Self::ground(),
            r => Self::space(r),
        }
    }

    pub fn resolved_omega_n(&self) -> f64 {
        self.omega_n
            .unwrap_or_else(|| dynamics::mean_motion(self.mu, self.orbit_radius))
    }

    /// Builds the acceleration model for the configured regime.
    pub fn dynamics(&self) -> Result<Dynamics, ConfigError> {
        Ok(match self.regime {
            Regime::Ground => Dynamics::Ground(GroundParams::new(self.ground_mass, self.ground_damping)?),
            Regime::Cw => Dynamics::Cw(CwParams::new(self.resolved_omega_n(), self.satellite_mass)?),
            Regime::CwJ2 => Dynamics::CwJ2(J2Params::new(
                self.resolved_omega_n(),
                self.satellite_mass,
                self.inclination_deg.to_radians(),
                self.j2,
                self.earth_radius,
                self.orbit_radius,
            )?),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        }
        fn finite(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field,
                    reason: format!("must be finite, got {v}"),
                })
            }
        }
        if self.n_agents < 1 {
            return Err(ConfigError::Invalid {
                field: "n_agents",
                reason: "at least one agent is required".into(),
            });
        }
        if self.max_steps < 1 {
            return Err(ConfigError::Invalid {
                field: "max_steps",
                reason: "at least one step is required".into(),
            });
        }
        positive("dt", self.dt)?;
        positive("env_half_width", self.env_half_width)?;
        positive("sensing_radius", self.sensing_radius)?;
        positive("action_force", self.action_force)?;
        positive("goal_reach_threshold", self.goal_reach_threshold)?;
        positive("agent_radius", self.agent_radius)?;
        positive("obstacle_radius", self.obstacle_radius)?;
        positive("contact_margin", self.contact_margin)?;
        if !(self.contact_gain >= 0.0 && self.contact_gain.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "contact_gain",
                reason: format!("must be non-negative, got {}", self.contact_gain),
            });
        }
        finite("reward_collision", self.reward_collision)?;
        finite("reward_goal", self.reward_goal)?;
        finite("inclination_deg", self.inclination_deg)?;
        positive("mu", self.mu)?;
        if let Some(w) = self.omega_n {
            positive("omega_n", w)?;
        }
        self.dynamics()?;
        Ok(())
    }
}

/// Parameters of the experiment protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub policy: String,
    /// Episodes per cell; `None` uses each protocol's own default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    pub train_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
    pub inclinations_deg: Vec<f64>,
    pub rho_max: f64,
    pub rho_step: f64,
    pub smoothing_span: f64,
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "policy",
    "episodes",
    "train_sizes",
    "test_sizes",
    "inclinations_deg",
    "rho_max",
    "rho_step",
    "smoothing_span",
];

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            policy: "potential".into(),
            episodes: None,
            train_sizes: vec![3, 5],
            test_sizes: vec![3, 5, 10],
            inclinations_deg: vec![0.0, 28.0, 45.0, 54.0, 63.0, 72.0, 81.0, 90.0],
            rho_max: 1.0,
            rho_step: 0.02,
            smoothing_span: 0.2,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.episodes == Some(0) {
            return Err(ConfigError::Invalid {
                field: "episodes",
                reason: "must be at least 1".into(),
            });
        }
        if self.train_sizes.iter().chain(&self.test_sizes).any(|&n| n == 0) {
            return Err(ConfigError::Invalid {
                field: "test_sizes",
                reason: "agent counts must be at least 1".into(),
            });
        }
        if !(self.rho_max >= 0.0 && self.rho_max.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "rho_max",
                reason: "must be non-negative".into(),
            });
        }
        if !(self.rho_step > 0.0 && self.rho_step.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "rho_step",
                reason: "must be positive".into(),
            });
        }
        if !(self.smoothing_span > 0.0 && self.smoothing_span.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "smoothing_span",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// A resolved config file: world plus experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub world: WorldConfig,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            experiment: ExperimentSpec::default(),
        }
    }
}

fn closest_key(key: &str, known: &[&str]) -> Option<String> {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 3 && *d < k.len())
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k.to_string())
}

fn check_keys(table: &toml::Table, known: &[&str]) -> Result<(), ConfigError> {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                key: key.clone(),
                suggestion: closest_key(key, known),
            });
        }
    }
    Ok(())
}

/// Parses config text. Missing keys fall back to the defaults of the
/// requested regime (default `cw`).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;

    let mut top_known: Vec<&str> = WORLD_KEYS.to_vec();
    top_known.push("experiment");
    check_keys(&table, &top_known)?;

    let experiment = match table.remove("experiment") {
        None => ExperimentSpec::default(),
        Some(toml::Value::Table(t)) => {
            check_keys(&t, EXPERIMENT_KEYS)?;
            toml::Value::Table(t)
                .try_into()
                .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
        }
        Some(_) => return Err(ConfigError::Parse("`experiment` must be a table".into())),
    };

    let regime: Regime = match table.get("regime") {
        None => Regime::Cw,
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|_| ConfigError::Invalid {
                field: "regime",
                reason: format!("expected one of ground, cw, cw_j2, got {v}"),
            })?,
    };

    let mut merged = match toml::Value::try_from(WorldConfig::for_regime(regime)) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("WorldConfig serializes to a table"),
    };
    merged.extend(table);
    let world: WorldConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;

    world.validate()?;
    experiment.validate()?;
    Ok(RunConfig { world, experiment })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Serializes a config so that [`parse_config`] reproduces it exactly.
pub fn to_toml(config: &RunConfig) -> String {
    toml::to_string(config).expect("config is always representable as TOML")
}
