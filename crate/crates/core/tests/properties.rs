use proptest::prelude::*;

use orbitsim::config::{ActionMode, Regime, WorldConfig};
use orbitsim::dynamics::{
    c_param, cw_accel, cw_closed_form, ground_accel, rk4_step, CwParams, GroundParams, State2D, Vec2,
    DEFAULT_ORBIT_RADIUS_KM, EARTH_J2, EARTH_RADIUS_KM,
};
use orbitsim::harness::{aggregate, run_episode, EpisodeOptions};
use orbitsim::obsgraph::{build_graph, ObservationGraph};
use orbitsim::policy::PolicyKind;
use orbitsim::world::{AgentAction, EntityKind, World};

fn regime() -> impl Strategy<Value = Regime> {
    prop_oneof![Just(Regime::Ground), Just(Regime::Cw), Just(Regime::CwJ2)]
}

fn actions(n: usize, steps: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..5, n), steps)
}

fn c_of(deg: f64) -> f64 {
    c_param(deg.to_radians(), EARTH_J2, EARTH_RADIUS_KM, DEFAULT_ORBIT_RADIUS_KM)
        .unwrap()
        .1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relative_features_match_world_frame(seed in 0u64..10_000, r in regime(), sharing: bool) {
        let cfg = WorldConfig { n_agents: 4, ..WorldConfig::for_regime(r) };
        let w = World::generate(&cfg, seed).unwrap();
        for a in 0..w.n_agents() {
            let g = build_graph(&w, a, sharing);
            let center = w.agent(a).state;
            for node in &g.nodes {
                let e = &w.entities()[node.entity_id];
                prop_assert_eq!(node.feature.rel_position, e.state.position - center.position);
                prop_assert_eq!(node.feature.rel_velocity, e.state.velocity - center.velocity);
            }
        }
    }

    #[test]
    fn agent_edges_are_symmetric_and_features_antisymmetric(seed in 0u64..10_000) {
        let cfg = WorldConfig { n_agents: 6, sensing_radius: 0.8, ..WorldConfig::default() };
        let w = World::generate(&cfg, seed).unwrap();
        let graphs: Vec<ObservationGraph> = (0..6).map(|a| build_graph(&w, a, true)).collect();
        for g in &graphs {
            let a = g.center;
            for &(s, d) in &g.edges {
                if s < 6 {
                    prop_assert!(g.edges.contains(&(d, s)));
                    let there = graphs[s].node(a).unwrap().feature.rel_position;
                    let here = g.node(s).unwrap().feature.rel_position;
                    prop_assert_eq!(there, -here);
                } else {
                    prop_assert!(d < 6, "edge into a non-agent");
                }
            }
        }
    }

    #[test]
    fn obstacles_and_goals_never_move(seed in 0u64..10_000, r in regime(), acts in actions(3, 30)) {
        let cfg = WorldConfig::for_regime(r);
        let mut w = World::generate(&cfg, seed).unwrap();
        let before: Vec<_> = w.entities().iter().filter(|e| e.kind != EntityKind::Agent).cloned().collect();
        for step in acts.iter().take(cfg.max_steps) {
            let a: Vec<_> = step.iter().map(|&i| AgentAction::Discrete(i)).collect();
            w.step(&a).unwrap();
        }
        let after: Vec<_> = w.entities().iter().filter(|e| e.kind != EntityKind::Agent).cloned().collect();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn rewards_decompose_and_agents_stay_inside(seed in 0u64..10_000, r in regime(), acts in actions(3, 25)) {
        let cfg = WorldConfig::for_regime(r);
        let mut w = World::generate(&cfg, seed).unwrap();
        let half = cfg.env_half_width;
        for step in &acts {
            let a: Vec<_> = step.iter().map(|&i| AgentAction::Discrete(i)).collect();
            let out = w.step(&a).unwrap();
            for agent in 0..3 {
                let t = out.terms[agent];
                prop_assert_eq!(t.total(), out.rewards[agent]);
                prop_assert_eq!(t.dist, -w.distance_to_goal(agent));
                prop_assert!(t.coll == 0.0 || t.coll == cfg.reward_collision);
                prop_assert!(t.goal == 0.0 || t.goal == cfg.reward_goal);
                let p = w.agent(agent).state.position;
                prop_assert!(p.x.abs() <= half && p.y.abs() <= half);
            }
        }
    }

    #[test]
    fn continuous_forces_never_exceed_the_limit_in_effect(seed in 0u64..1000, fx in -1e3f64..1e3, fy in -1e3f64..1e3) {
        let cfg = WorldConfig { action_mode: ActionMode::Continuous, contact_gain: 0.0, ground_damping: 0.0, ..WorldConfig::ground() };
        let mut w = World::generate(&cfg, seed).unwrap();
        let n = w.n_agents();
        let mut a = vec![AgentAction::Continuous(Vec2::zeros()); n];
        a[0] = AgentAction::Continuous(Vec2::new(fx, fy));
        w.step(&a).unwrap();
        // Agents start at rest, so the new velocity is the whole change.
        let v = w.agent(0).state.velocity;
        prop_assert!(v.norm() <= cfg.dt * cfg.action_force / cfg.ground_mass * (1.0 + 1e-12));
    }

    #[test]
    fn c_param_is_even_and_symmetric(deg in 0.0f64..180.0) {
        prop_assert!((c_of(deg) - c_of(-deg)).abs() <= 1e-15);
        prop_assert!((c_of(deg) - c_of(180.0 - deg)).abs() <= 1e-15);
    }

    #[test]
    fn c_param_decreases_towards_polar(a in 0.0f64..90.0, b in 0.0f64..90.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(c_of(lo) > c_of(hi));
    }

    #[test]
    fn damping_never_speeds_a_free_body(vx in -5.0f64..5.0, vy in -5.0f64..5.0, gamma in 0.0f64..2.0) {
        let p = GroundParams::new(1.0, gamma).unwrap();
        let mut s = State2D::new(Vec2::zeros(), Vec2::new(vx, vy));
        for _ in 0..50 {
            let next = rk4_step(|x, f| ground_accel(x, f, Vec2::zeros(), &p), &s, Vec2::zeros(), 0.1);
            prop_assert!(next.velocity.norm() <= s.velocity.norm() * (1.0 + 1e-15));
            s = next;
        }
    }

    #[test]
    fn aggregates_ignore_episode_order(seeds in prop::collection::vec(0u64..500, 2..6)) {
        let cfg = WorldConfig { max_steps: 20, ..WorldConfig::default() };
        let f = PolicyKind::Greedy.factory().unwrap();
        let mut recs: Vec<_> = seeds.iter().map(|&s| run_episode(&cfg, &f, EpisodeOptions::seed(s)).unwrap().metrics).collect();
        let forward = aggregate(&recs).unwrap();
        recs.reverse();
        prop_assert_eq!(forward, aggregate(&recs).unwrap());
    }
}

/// Error after one orbit at two step sizes; RK4 should shrink it by about
/// 2^4 when the step halves. Coarse steps keep truncation above roundoff.
#[test]
fn rk4_is_fourth_order() {
    let w = 1.1e-3;
    let params = CwParams::new(w, 1.0).unwrap();
    let s0 = State2D::new(Vec2::new(0.5, -0.3), Vec2::new(2e-4, 3e-4));
    let horizon = 5760.0;
    let error = |dt: f64| {
        let steps = (horizon / dt).round() as usize;
        let mut s = s0;
        for _ in 0..steps {
            s = rk4_step(|x, f| cw_accel(x, f, &params), &s, Vec2::zeros(), dt);
        }
        (s.position - cw_closed_form(&s0, w, horizon).position).norm()
    };
    let ratio = error(120.0) / error(60.0);
    assert!((13.0..19.0).contains(&ratio), "ratio {ratio}");
}
