//! Per-agent observations: the local observation vector and the agent-entity
//! graph.
//!
//! The graph contains every agent plus each non-agent entity within the
//! sensing radius of at least one agent. Edges connect entities whose centers
//! are within the sensing radius:
//!
//! * agent ↔ agent yields both `(a, b)` and `(b, a)`;
//! * a non-agent near an agent yields only `(entity, agent)`;
//! * non-agent pairs and self loops never get edges.
//!
//! Node features are relative to the center agent. In the goal-hiding
//! variant, agent nodes carry no goal offset.
//!
//! # Buffer layout (`obsgraph.v1`)
//!
//! [`GraphBuffers`] flattens a graph into a row-major `f64` feature matrix and
//! a two-row edge index of node *row* indices. Each row is
//!
//! ```text
//! goal sharing (width 9): px py vx vy gx gy is_agent is_obstacle is_goal
//! goal hiding  (width 7): px py vx vy       is_agent is_obstacle is_goal
//! ```
//!
//! For obstacle and goal nodes the goal offset equals the position offset, so
//! the hiding layout drops the column for every row without losing anything.
//! Rows follow ascending entity id; edges are sorted by `(src, dst)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Vec2;
use crate::world::{EntityKind, World};

pub const LAYOUT_VERSION: &str = "obsgraph.v1";
pub const SHARING_WIDTH: usize = 9;
pub const HIDING_WIDTH: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFeature {
    pub rel_position: Vec2,
    pub rel_velocity: Vec2,
    /// Absent on agent nodes when goals are hidden.
    pub rel_goal: Option<Vec2>,
    pub kind: EntityKind,
}

impl NodeFeature {
    pub fn one_hot(&self) -> [f64; 3] {
        match self.kind {
            EntityKind::Agent => [1.0, 0.0, 0.0],
            EntityKind::Obstacle => [0.0, 1.0, 0.0],
            EntityKind::Goal => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub entity_id: usize,
    pub feature: NodeFeature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGraph {
    pub center: usize,
    pub goal_sharing: bool,
    /// Sorted by entity id.
    pub nodes: Vec<GraphNode>,
    /// `(src, dst)` entity ids, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl ObservationGraph {
    pub fn node(&self, entity_id: usize) -> Option<&GraphNode> {
        self.nodes
            .binary_search_by_key(&entity_id, |n| n.entity_id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn has_incident_edge(&self, agent: usize) -> bool {
        self.edges.iter().any(|&(s, d)| s == agent || d == agent)
    }

    /// Nodes with an edge into `agent`.
    pub fn in_neighbors(&self, agent: usize) -> impl Iterator<Item = &GraphNode> + '_ {
        self.edges
            .iter()
            .filter(move |&&(_, d)| d == agent)
            .filter_map(move |&(s, _)| self.node(s))
    }

    pub fn to_buffers(&self) -> GraphBuffers {
        let width = if self.goal_sharing { SHARING_WIDTH } else { HIDING_WIDTH };
        let mut features = Vec::with_capacity(width * self.nodes.len());
        for n in &self.nodes {
            let f = &n.feature;
            features.extend([f.rel_position.x, f.rel_position.y, f.rel_velocity.x, f.rel_velocity.y]);
            if self.goal_sharing {
                let g = f.rel_goal.unwrap_or(f.rel_position);
                features.extend([g.x, g.y]);
            }
            features.extend(f.one_hot());
        }
        let row = |id: usize| self.nodes.iter().position(|n| n.entity_id == id).expect("edge endpoint is a node") as u32;
        let (src, dst) = self.edges.iter().map(|&(s, d)| (row(s), row(d))).unzip();
        GraphBuffers {
            version: LAYOUT_VERSION.to_string(),
            width,
            center_row: row(self.center),
            node_ids: self.nodes.iter().map(|n| n.entity_id as u64).collect(),
            features,
            edge_index: [src, dst],
        }
    }

    pub fn from_buffers(buf: &GraphBuffers) -> Result<ObservationGraph, LayoutError> {
        if buf.version != LAYOUT_VERSION {
            return Err(LayoutError::Version(buf.version.clone()));
        }
        let goal_sharing = match buf.width {
            SHARING_WIDTH => true,
            HIDING_WIDTH => false,
            w => return Err(LayoutError::Width(w)),
        };
        let rows = buf.node_ids.len();
        if buf.features.len() != rows * buf.width {
            return Err(LayoutError::Length {
                expected: rows * buf.width,
                got: buf.features.len(),
            });
        }
        let mut nodes = Vec::with_capacity(rows);
        for (r, chunk) in buf.features.chunks_exact(buf.width).enumerate() {
            let rel_position = Vec2::new(chunk[0], chunk[1]);
            let rel_velocity = Vec2::new(chunk[2], chunk[3]);
            let hot = &chunk[buf.width - 3..];
            let kind = match hot {
                [1.0, 0.0, 0.0] => EntityKind::Agent,
                [0.0, 1.0, 0.0] => EntityKind::Obstacle,
                [0.0, 0.0, 1.0] => EntityKind::Goal,
                _ => return Err(LayoutError::EntityType(r)),
            };
            let rel_goal = match (goal_sharing, kind) {
                (true, _) => Some(Vec2::new(chunk[4], chunk[5])),
                (false, EntityKind::Agent) => None,
                (false, _) => Some(rel_position),
            };
            nodes.push(GraphNode {
                entity_id: buf.node_ids[r] as usize,
                feature: NodeFeature {
                    rel_position,
                    rel_velocity,
                    rel_goal,
                    kind,
                },
            });
        }
        let [src, dst] = &buf.edge_index;
        if src.len() != dst.len() {
            return Err(LayoutError::EdgeRows);
        }
        let id = |r: u32| -> Result<usize, LayoutError> {
            buf.node_ids
                .get(r as usize)
                .map(|&i| i as usize)
                .ok_or(LayoutError::EdgeRow(r))
        };
        let edges = src
            .iter()
            .zip(dst)
            .map(|(&s, &d)| Ok((id(s)?, id(d)?)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ObservationGraph {
            center: id(buf.center_row)?,
            goal_sharing,
            nodes,
            edges,
        })
    }
}

/// Flat interchange form of an [`ObservationGraph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphBuffers {
    pub version: String,
    pub width: usize,
    pub center_row: u32,
    pub node_ids: Vec<u64>,
    pub features: Vec<f64>,
    pub edge_index: [Vec<u32>; 2],
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("unsupported layout version {0}")]
    Version(String),
    #[error("feature width {0} is neither 9 nor 7")]
    Width(usize),
    #[error("feature buffer has {got} values, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("row {0} has an invalid entity-type one-hot")]
    EntityType(usize),
    #[error("edge index rows differ in length")]
    EdgeRows,
    #[error("edge refers to missing row {0}")]
    EdgeRow(u32),
}

/// Own-state observation in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservation {
    pub agent: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Goal position minus agent position.
    pub rel_goal: Vec2,
}

impl LocalObservation {
    /// `[px, py, vx, vy, gx, gy]`.
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
            self.rel_goal.x,
            self.rel_goal.y,
        ]
    }
}

pub fn local_observation(world: &World, agent: usize) -> LocalObservation {
    let a = world.agent(agent);
    LocalObservation {
        agent,
        position: a.state.position,
        velocity: a.state.velocity,
        rel_goal: world.goal_of(agent).state.position - a.state.position,
    }
}

/// Builds `agent`'s agent-entity graph from the current world state.
pub fn build_graph(world: &World, agent: usize, goal_sharing: bool) -> ObservationGraph {
    let d = world.config().sensing_radius;
    let n = world.n_agents();
    let entities = world.entities();
    let center = &entities[agent].state;
    let within = |i: usize, j: usize| (entities[i].state.position - entities[j].state.position).norm() <= d;

    let mut edges = Vec::new();
    let mut member = vec![false; entities.len()];
    member[..n].iter_mut().for_each(|m| *m = true);
    for a in 0..n {
        for (e, ent) in entities.iter().enumerate() {
            if e == a || !within(a, e) {
                continue;
            }
            match ent.kind {
                EntityKind::Agent => edges.push((e, a)),
                EntityKind::Obstacle | EntityKind::Goal => {
                    member[e] = true;
                    edges.push((e, a));
                }
            }
        }
    }
    edges.sort_unstable();

    let nodes = entities
        .iter()
        .filter(|e| member[e.id])
        .map(|e| {
            let rel_position = e.state.position - center.position;
            let rel_goal = match e.kind {
                EntityKind::Agent if goal_sharing => Some(world.goal_of(e.id).state.position - center.position),
                EntityKind::Agent => None,
                _ => Some(rel_position),
            };
            GraphNode {
                entity_id: e.id,
                feature: NodeFeature {
                    rel_position,
                    rel_velocity: e.state.velocity - center.velocity,
                    rel_goal,
                    kind: e.kind,
                },
            }
        })
        .collect();

    ObservationGraph {
        center: agent,
        goal_sharing,
        nodes,
        edges,
    }
}

/// Fraction of graphs (one agent, one per step) with an edge touching the
/// center agent.
pub fn connectivity_fraction<'a>(graphs: impl IntoIterator<Item = &'a ObservationGraph>) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for g in graphs {
        total += 1;
        if g.has_incident_edge(g.center) {
            hit += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::WorldConfig;

    fn config() -> WorldConfig {
        WorldConfig {
            sensing_radius: 1.0,
            env_half_width: 3.0,
            ..WorldConfig::ground()
        }
    }

    #[test]
    fn agent_pair_edges_are_bidirectional() {
        let w = World::from_layout(
            &config(),
            &[
                (Vec2::new(0.0, 0.0), Vec2::new(2.5, 2.5)),
                (Vec2::new(0.5, 0.0), Vec2::new(-2.5, -2.5)),
            ],
            &[],
        )
        .unwrap();
        let g = build_graph(&w, 0, true);
        assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
        assert_eq!(g.nodes.len(), 2);
    }

    #[test]
    fn obstacle_edge_points_to_agent() {
        let w = World::from_layout(&config(), &[(Vec2::new(0.0, 0.0), Vec2::new(2.5, 2.5))], &[Vec2::new(0.5, 0.0)]).unwrap();
        let g = build_graph(&w, 0, true);
        // Obstacle id is 2 (agent 0, goal 1).
        assert_eq!(g.edges, vec![(2, 0)]);
    }

    #[test]
    fn far_entities_are_omitted() {
        let w = World::from_layout(&config(), &[(Vec2::new(0.0, 0.0), Vec2::new(2.5, 2.5))], &[Vec2::new(1.5, 0.0)]).unwrap();
        let g = build_graph(&w, 0, true);
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes.len(), 1);
        assert!(!g.has_incident_edge(0));
    }

    #[test]
    fn goal_hiding_strips_only_agent_goals() {
        let w = World::from_layout(
            &config(),
            &[
                (Vec2::new(0.0, 0.0), Vec2::new(0.3, 0.3)),
                (Vec2::new(0.5, 0.0), Vec2::new(-2.5, -2.5)),
            ],
            &[Vec2::new(0.0, 0.6)],
        )
        .unwrap();
        let share = build_graph(&w, 0, true);
        let hide = build_graph(&w, 0, false);
        assert_eq!(share.edges, hide.edges);
        for (s, h) in share.nodes.iter().zip(&hide.nodes) {
            let mut stripped = s.clone();
            if s.feature.kind == EntityKind::Agent {
                stripped.feature.rel_goal = None;
            }
            assert_eq!(&stripped, h);
        }
        let other = share.node(1).unwrap();
        assert_eq!(other.feature.rel_goal, Some(Vec2::new(-2.5, -2.5)));
        let own = share.node(0).unwrap();
        assert_eq!(own.feature.rel_position, Vec2::zeros());
        assert_eq!(own.feature.rel_velocity, Vec2::zeros());
        let obstacle = share.node(4).unwrap();
        assert_eq!(obstacle.feature.rel_goal, Some(obstacle.feature.rel_position));
    }

    #[test]
    fn local_observation_offsets() {
        let mut cfg = config();
        cfg.ground_damping = 0.0;
        let w = World::from_layout(&cfg, &[(Vec2::new(1.0, 1.0), Vec2::new(1.0, 3.0))], &[]).unwrap();
        let o = local_observation(&w, 0);
        assert_eq!(o.rel_goal, Vec2::new(0.0, 2.0));
        assert_eq!(o.position, Vec2::new(1.0, 1.0));
        let w = World::from_layout(&cfg, &[(Vec2::new(0.2, 0.2), Vec2::new(0.2, 0.2))], &[]).unwrap();
        assert_eq!(local_observation(&w, 0).rel_goal, Vec2::zeros());
    }

    #[test]
    fn connectivity_counts_steps() {
        let connected = ObservationGraph {
            center: 0,
            goal_sharing: true,
            nodes: vec![],
            edges: vec![(2, 0)],
        };
        let isolated = ObservationGraph {
            edges: vec![],
            ..connected.clone()
        };
        let mut graphs = vec![connected.clone(); 90];
        graphs.extend(std::iter::repeat(isolated.clone()).take(10));
        assert_eq!(connectivity_fraction(&graphs), 0.9);
        assert_eq!(connectivity_fraction(std::iter::repeat(&connected).take(5)), 1.0);
        assert_eq!(connectivity_fraction(std::iter::repeat(&isolated).take(5)), 0.0);
    }

    #[test]
    fn buffers_round_trip_both_variants() {
        let w = World::generate(&WorldConfig::default(), 11).unwrap();
        for sharing in [true, false] {
            let g = build_graph(&w, 1, sharing);
            let buf = g.to_buffers();
            assert_eq!(buf.width, if sharing { 9 } else { 7 });
            assert_eq!(ObservationGraph::from_buffers(&buf).unwrap(), g);
        }
    }

    #[test]
    fn buffer_validation() {
        let w = World::generate(&WorldConfig::default(), 11).unwrap();
        let mut buf = build_graph(&w, 0, true).to_buffers();
        buf.features.pop();
        assert!(matches!(ObservationGraph::from_buffers(&buf), Err(LayoutError::Length { .. })));
        let mut buf = build_graph(&w, 0, true).to_buffers();
        buf.width = 8;
        assert_eq!(ObservationGraph::from_buffers(&buf), Err(LayoutError::Width(8)));
    }
}
