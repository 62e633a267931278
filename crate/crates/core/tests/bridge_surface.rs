//! The surface a foreign-language binding builds on: flat graph buffers and
//! the reset/step environment.

use proptest::prelude::*;

use orbitsim::config::{ActionMode, WorldConfig};
use orbitsim::dynamics::Vec2;
use orbitsim::env::{Env, EnvError};
use orbitsim::obsgraph::{build_graph, ObservationGraph, HIDING_WIDTH, LAYOUT_VERSION, SHARING_WIDTH};
use orbitsim::world::{AgentAction, EntityKind, World};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn buffers_follow_documented_column_order(seed in 0u64..100_000, n in 1usize..7, sharing: bool) {
        let cfg = WorldConfig { n_agents: n, ..WorldConfig::default() };
        let w = World::generate(&cfg, seed).unwrap();
        for a in 0..n {
            let g = build_graph(&w, a, sharing);
            let buf = g.to_buffers();
            prop_assert_eq!(&buf.version, LAYOUT_VERSION);
            let width = if sharing { SHARING_WIDTH } else { HIDING_WIDTH };
            prop_assert_eq!(buf.width, width);
            prop_assert_eq!(buf.node_ids[buf.center_row as usize], a as u64);
            for (row, id) in buf.node_ids.iter().enumerate() {
                let e = &w.entities()[*id as usize];
                let r = &buf.features[row * width..(row + 1) * width];
                let rel = e.state.position - w.agent(a).state.position;
                prop_assert_eq!(&r[0..2], &[rel.x, rel.y][..]);
                let hot = &r[width - 3..];
                let expect = match e.kind {
                    EntityKind::Agent => [1.0, 0.0, 0.0],
                    EntityKind::Obstacle => [0.0, 1.0, 0.0],
                    EntityKind::Goal => [0.0, 0.0, 1.0],
                };
                prop_assert_eq!(hot, &expect[..]);
                if sharing && e.kind == EntityKind::Agent {
                    let goal = w.goal_of(e.id).state.position - w.agent(a).state.position;
                    prop_assert_eq!(&r[4..6], &[goal.x, goal.y][..]);
                }
            }
            prop_assert_eq!(ObservationGraph::from_buffers(&buf).unwrap(), g);
            let edges = buf.edge_index[0].iter().zip(&buf.edge_index[1]);
            prop_assert!(edges.clone().zip(edges.skip(1)).all(|(a, b)| a <= b));
        }
    }
}

#[test]
fn continuous_env_rejects_non_finite_forces_without_stepping() {
    let cfg = WorldConfig {
        action_mode: ActionMode::Continuous,
        ..WorldConfig::default()
    };
    let mut env = Env::new(cfg).unwrap();
    env.reset(3).unwrap();
    let ok = AgentAction::Continuous(Vec2::new(0.5, 0.0));
    let bad = AgentAction::Continuous(Vec2::new(f64::NAN, 0.0));
    assert!(matches!(env.step(&[ok, bad, ok]), Err(EnvError::Action { agent: 1, .. })));
    assert_eq!(env.world().unwrap().step_index(), 0);
    let step = env.step(&[ok, ok, ok]).unwrap();
    assert_eq!(step.rewards.len(), 3);
    assert_eq!(env.world().unwrap().step_index(), 1);
}

#[test]
fn reset_is_reproducible_and_hiding_changes_width() {
    let mut env = Env::new(WorldConfig::default()).unwrap();
    let a = env.reset(21).unwrap();
    let b = env.reset(21).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].local.len(), 6);
    let mut hidden = Env::new(WorldConfig {
        goal_sharing: false,
        ..WorldConfig::default()
    })
    .unwrap();
    let h = hidden.reset(21).unwrap();
    assert_eq!(h[0].graph.width, HIDING_WIDTH);
    assert_eq!(h[0].graph.edge_index, a[0].graph.edge_index);
}
