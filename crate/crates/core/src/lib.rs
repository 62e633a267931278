//! Deterministic multi-agent navigation in ground and relative-orbit
//! regimes, with observation graphs, baseline policies and the experiment
//! harness used to evaluate them.

pub mod config;
pub mod dynamics;
pub mod env;
pub mod harness;
pub mod io;
pub mod obsgraph;
pub mod policy;
pub mod rng;
pub mod validation;
pub mod world;

pub use config::{ActionMode, Regime, RunConfig, WorldConfig};
pub use dynamics::{Dynamics, State2D, Vec2};
pub use env::Env;
pub use harness::{run_episode, EpisodeMetrics, EpisodeOptions};
pub use obsgraph::{build_graph, GraphBuffers, ObservationGraph};
pub use policy::{Policy, PolicyFactory, PolicyKind};
pub use world::{AgentAction, World};
