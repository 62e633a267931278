//! Episode runner, metrics and the experiment protocols.
//!
//! Every episode is an independent unit seeded from its own integer. Sweeps
//! fan episodes out over a rayon pool and reduce them in seed order, so the
//! number of workers never changes a result.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Regime, WorldConfig};
use crate::obsgraph::{build_graph, local_observation, ObservationGraph};
use crate::policy::{PolicyContext, PolicyFactory};
use crate::rng::{self, Stream};
use crate::world::{GoalReset, SimError, StepOutcome, TrajectoryRecord, World};

/// Obstacle count used by the scalability protocol.
pub const SCALABILITY_OBSTACLES: usize = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("episode with seed {seed}: {source}")]
    Episode {
        seed: u64,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot aggregate an empty set of episodes")]
    Empty,
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// True for failures caused by a bad configuration rather than by the
    /// simulation itself.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Config(_) | HarnessError::Empty => true,
            HarnessError::Episode { source, .. } => matches!(source, SimError::Config(_) | SimError::Placement { .. }),
            HarnessError::Pool(_) => false,
        }
    }
}

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub n_agents: usize,
    pub goal_sharing: bool,
    /// Joint reward summed over all steps and agents.
    pub total_reward: f64,
    pub reward_per_agent: f64,
    pub agent_rewards: Vec<f64>,
    /// `first_reach_step / max_steps`, or 1 for agents that never reached.
    pub time_fractions: Vec<f64>,
    pub mean_time_fraction: f64,
    /// Collision onsets over agent-entity pairs.
    pub collision_events: u64,
    pub agent_collisions: Vec<u32>,
    /// Mean per-agent onset tally.
    pub collisions_per_agent: f64,
    /// Overlapping pairs summed over steps.
    pub overlap_pair_steps: u64,
    pub success: bool,
    pub connectivity: Vec<f64>,
    pub goal_reset: Option<GoalReset>,
}

/// Accumulates rewards and connectivity while an episode runs.
#[derive(Debug, Clone)]
pub struct EpisodeTracker {
    agent_rewards: Vec<f64>,
    connected_steps: Vec<usize>,
    observed_steps: usize,
    goal_reset: Option<GoalReset>,
}

impl EpisodeTracker {
    pub fn new(n_agents: usize) -> Self {
        Self {
            agent_rewards: vec![0.0; n_agents],
            connected_steps: vec![0; n_agents],
            observed_steps: 0,
            goal_reset: None,
        }
    }

    /// Records the graphs agents act on at one step, one per agent.
    pub fn observe(&mut self, graphs: &[ObservationGraph]) {
        self.observed_steps += 1;
        for g in graphs {
            if g.has_incident_edge(g.center) {
                self.connected_steps[g.center] += 1;
            }
        }
    }

    pub fn record(&mut self, outcome: &StepOutcome) {
        for (acc, r) in self.agent_rewards.iter_mut().zip(&outcome.rewards) {
            *acc += r;
        }
    }

    pub fn record_reset(&mut self, reset: GoalReset) {
        self.goal_reset = Some(reset);
    }

    pub fn finish(&self, world: &World, seed: u64) -> EpisodeMetrics {
        let n = world.n_agents();
        let max_steps = world.config().max_steps as f64;
        let time_fractions: Vec<f64> = world
            .first_reach_step()
            .iter()
            .map(|s| s.map_or(1.0, |k| k as f64 / max_steps))
            .collect();
        let total_reward: f64 = self.agent_rewards.iter().sum();
        let tallies = world.agent_collisions().to_vec();
        let tally_sum: u64 = tallies.iter().map(|&t| t as u64).sum();
        EpisodeMetrics {
            seed,
            n_agents: n,
            goal_sharing: world.config().goal_sharing,
            total_reward,
            reward_per_agent: total_reward / n as f64,
            agent_rewards: self.agent_rewards.clone(),
            mean_time_fraction: time_fractions.iter().sum::<f64>() / n as f64,
            success: time_fractions.iter().all(|&t| t < 1.0),
            time_fractions,
            collision_events: world.collision_count(),
            agent_collisions: tallies,
            collisions_per_agent: tally_sum as f64 / n as f64,
            overlap_pair_steps: world.overlap_pair_steps(),
            connectivity: self
                .connected_steps
                .iter()
                .map(|&c| {
                    if self.observed_steps == 0 {
                        0.0
                    } else {
                        c as f64 / self.observed_steps as f64
                    }
                })
                .collect(),
            goal_reset: self.goal_reset,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub metrics: EpisodeMetrics,
    pub trajectory: Option<Vec<TrajectoryRecord>>,
}

/// Parameters of a single episode beyond the world config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub seed: u64,
    /// Mid-episode goal reset radius; `None` disables the reset.
    pub goal_reset: Option<f64>,
    /// Team size handed to the policy factory.
    pub train_agents: Option<usize>,
    pub record_trajectory: bool,
}

impl EpisodeOptions {
    pub fn seed(seed: u64) -> Self {
        Self {
            seed,
            goal_reset: None,
            train_agents: None,
            record_trajectory: false,
        }
    }
}

/// Runs one full episode. At step `⌊max_steps/2⌋` a uniformly chosen agent's
/// goal is reset when `goal_reset` is set.
pub fn run_episode(
    config: &WorldConfig,
    factory: &dyn PolicyFactory,
    opts: EpisodeOptions,
) -> Result<EpisodeRun, HarnessError> {
    let seed = opts.seed;
    let wrap = |source: SimError| HarnessError::Episode { seed, source };
    let mut world = World::generate(config, seed).map_err(wrap)?;
    let n = world.n_agents();
    let ctx = PolicyContext::from_config(config, opts.train_agents.unwrap_or(n))?;
    let mut policies: Vec<_> = (0..n).map(|_| factory.build(&ctx)).collect();
    policies.iter_mut().for_each(|p| p.reset());

    let mut policy_rng = rng::stream(seed, Stream::Policy);
    let mut reset_rng = rng::stream(seed, Stream::GoalReset);
    let reset_step = config.max_steps / 2;
    let mut tracker = EpisodeTracker::new(n);
    let mut trajectory = opts.record_trajectory.then(Vec::new);
    if let Some(t) = trajectory.as_mut() {
        world.emit_records(None, t);
    }

    while !world.is_done() {
        if let Some(rho) = opts.goal_reset {
            if world.step_index() == reset_step {
                let agent = reset_rng.gen_range(0..n);
                let r = world.reset_goal(agent, rho, &mut reset_rng).map_err(wrap)?;
                tracker.record_reset(r);
            }
        }
        let graphs: Vec<_> = (0..n).map(|a| build_graph(&world, a, config.goal_sharing)).collect();
        tracker.observe(&graphs);
        let actions: Vec<_> = policies
            .iter_mut()
            .zip(&graphs)
            .enumerate()
            .map(|(a, (p, g))| p.act(&local_observation(&world, a), g, &mut policy_rng))
            .collect();
        let outcome = world.step(&actions).map_err(wrap)?;
        tracker.record(&outcome);
        if let Some(t) = trajectory.as_mut() {
            world.emit_records(Some(&outcome), t);
        }
    }

    Ok(EpisodeRun {
        metrics: tracker.finish(&world, seed),
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation (divisor `n`).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregates over the episodes of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub episodes: usize,
    pub reward_per_agent: MeanStd,
    pub total_reward: MeanStd,
    pub time_fraction: MeanStd,
    pub collisions_per_agent: MeanStd,
    /// Percent of episodes in which every agent reached its goal.
    pub success_pct: f64,
    pub median_collisions: f64,
    pub connectivity: f64,
}

impl CellStats {
    pub fn success_rate(&self) -> f64 {
        self.success_pct / 100.0
    }
}

/// Reduces per-episode records in seed order.
pub fn aggregate(records: &[EpisodeMetrics]) -> Result<CellStats, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Empty);
    }
    let mut sorted: Vec<&EpisodeMetrics> = records.iter().collect();
    sorted.sort_by_key(|m| (m.seed, m.n_agents, m.goal_sharing));
    let col = |f: &dyn Fn(&EpisodeMetrics) -> f64| sorted.iter().map(|m| f(m)).collect::<Vec<f64>>();
    let successes = sorted.iter().filter(|m| m.success).count();
    let connectivity = col(&|m| m.connectivity.iter().sum::<f64>() / m.connectivity.len() as f64);
    Ok(CellStats {
        episodes: sorted.len(),
        reward_per_agent: MeanStd::of(&col(&|m| m.reward_per_agent)),
        total_reward: MeanStd::of(&col(&|m| m.total_reward)),
        time_fraction: MeanStd::of(&col(&|m| m.mean_time_fraction)),
        collisions_per_agent: MeanStd::of(&col(&|m| m.collisions_per_agent)),
        success_pct: 100.0 * successes as f64 / sorted.len() as f64,
        median_collisions: median(&col(&|m| m.collision_events as f64)),
        connectivity: MeanStd::of(&connectivity).mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Scalability,
    Inclination,
    GoalSharing,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Scalability => "scalability",
            Protocol::Inclination => "inclination",
            Protocol::GoalSharing => "goal_sharing",
        }
    }
}

/// Identifies a sweep cell; unused axes are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellKey {
    pub train_agents: Option<usize>,
    pub test_agents: usize,
    pub inclination_deg: Option<f64>,
    pub rho_max: Option<f64>,
    pub goal_sharing: Option<bool>,
}

impl CellKey {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = self.train_agents {
            parts.push(format!("n={n}"));
        }
        parts.push(format!("m={}", self.test_agents));
        if let Some(phi) = self.inclination_deg {
            parts.push(format!("phi={phi}"));
        }
        if let Some(rho) = self.rho_max {
            parts.push(format!("rho={rho}"));
        }
        if let Some(s) = self.goal_sharing {
            parts.push(if s { "share".into() } else { "hide".into() });
        }
        parts.join(",")
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub key: CellKey,
    pub stats: CellStats,
    pub episodes: Vec<EpisodeMetrics>,
}

impl SweepCell {
    pub fn seeds(&self) -> Vec<u64> {
        self.episodes.iter().map(|e| e.seed).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub protocol: Protocol,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1 }
    }
}

struct Job {
    cell: usize,
    config: WorldConfig,
    opts: EpisodeOptions,
}

/// Runs every job on a pool of `opts.jobs` workers and groups the episodes
/// by cell, each cell sorted by seed.
fn run_jobs(
    jobs: Vec<Job>,
    n_cells: usize,
    factory: &dyn PolicyFactory,
    opts: &RunOptions,
) -> Result<Vec<Vec<EpisodeMetrics>>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results: Vec<Result<(usize, EpisodeMetrics), HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|j| run_episode(&j.config, factory, j.opts).map(|r| (j.cell, r.metrics)))
            .collect()
    });
    let mut cells: Vec<Vec<EpisodeMetrics>> = vec![Vec::new(); n_cells];
    for r in results {
        let (cell, m) = r?;
        cells[cell].push(m);
    }
    for c in &mut cells {
        c.sort_by_key(|m| m.seed);
    }
    Ok(cells)
}

fn finish_cells(keys: Vec<CellKey>, episodes: Vec<Vec<EpisodeMetrics>>) -> Result<Vec<SweepCell>, HarnessError> {
    keys.into_iter()
        .zip(episodes)
        .map(|(key, episodes)| {
            Ok(SweepCell {
                key,
                stats: aggregate(&episodes)?,
                episodes,
            })
        })
        .collect()
}

/// Scalability grid: policy built for `n` agents, evaluated with `m`.
/// Obstacles are held at [`SCALABILITY_OBSTACLES`]. Every cell uses seeds
/// `base.seed .. base.seed + episodes`.
pub fn run_scalability(
    base: &WorldConfig,
    train_sizes: &[usize],
    test_sizes: &[usize],
    episodes: usize,
    factory: &dyn PolicyFactory,
    opts: &RunOptions,
) -> Result<SweepResult, HarnessError> {
    let mut keys = Vec::new();
    let mut jobs = Vec::new();
    for &n in train_sizes {
        for &m in test_sizes {
            let cell = keys.len();
            keys.push(CellKey {
                train_agents: Some(n),
                test_agents: m,
                ..CellKey::default()
            });
            let config = WorldConfig {
                n_agents: m,
                n_obstacles: SCALABILITY_OBSTACLES,
                ..base.clone()
            };
            config.validate()?;
            for e in 0..episodes as u64 {
                jobs.push(Job {
                    cell,
                    config: config.clone(),
                    opts: EpisodeOptions {
                        train_agents: Some(n),
                        ..EpisodeOptions::seed(base.seed.wrapping_add(e))
                    },
                });
            }
        }
    }
    let n_cells = keys.len();
    let grouped = run_jobs(jobs, n_cells, factory, opts)?;
    Ok(SweepResult {
        protocol: Protocol::Scalability,
        cells: finish_cells(keys, grouped)?,
    })
}

/// Inclination sensitivity under the J2-perturbed model; `c` is recomputed
/// for each inclination. Seeds `base.seed .. base.seed + runs`.
pub fn run_inclination_sweep(
    base: &WorldConfig,
    inclinations_deg: &[f64],
    runs: usize,
    factory: &dyn PolicyFactory,
    opts: &RunOptions,
) -> Result<SweepResult, HarnessError> {
    let mut keys = Vec::new();
    let mut jobs = Vec::new();
    for &phi in inclinations_deg {
        let cell = keys.len();
        keys.push(CellKey {
            test_agents: base.n_agents,
            inclination_deg: Some(phi),
            ..CellKey::default()
        });
        let config = WorldConfig {
            regime: Regime::CwJ2,
            inclination_deg: phi,
            ..base.clone()
        };
        config.validate()?;
        for e in 0..runs as u64 {
            jobs.push(Job {
                cell,
                config: config.clone(),
                opts: EpisodeOptions::seed(base.seed.wrapping_add(e)),
            });
        }
    }
    let n_cells = keys.len();
    let grouped = run_jobs(jobs, n_cells, factory, opts)?;
    Ok(SweepResult {
        protocol: Protocol::Inclination,
        cells: finish_cells(keys, grouped)?,
    })
}

/// `0, step, 2·step, …` up to `max` inclusive.
pub fn rho_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Grid points spanned by a smoothing window of `span` at spacing `step`.
pub fn window_points(span: f64, step: f64) -> usize {
    ((span / step).round() as usize).max(1)
}

/// Relative gain of the sharing arm's success rate, in percent. `None` when
/// the non-sharing rate is zero.
pub fn improvement_success(share: f64, no_share: f64) -> Option<f64> {
    (no_share != 0.0).then(|| (share - no_share) / no_share * 100.0)
}

/// Relative decrease of the time-to-goal fraction, in percent.
pub fn improvement_time(share: f64, no_share: f64) -> Option<f64> {
    (no_share != 0.0).then(|| (no_share - share) / no_share * 100.0)
}

/// Centered moving mean over `window` points (`window/2` before, the rest
/// after), truncated at the ends. Missing values are skipped; a window with
/// none present stays missing.
pub fn moving_average(series: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let window = window.max(1);
    let before = window / 2;
    let after = window - 1 - before;
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after).min(series.len() - 1);
            let vals: Vec<f64> = series[lo..=hi].iter().flatten().copied().collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GoalSharingResult {
    pub rho_max: Vec<f64>,
    pub instances: usize,
    pub share: Vec<SweepCell>,
    pub hide: Vec<SweepCell>,
    /// Per-ρ improvements in percent; `None` where undefined.
    pub improvement_success: Vec<Option<f64>>,
    pub improvement_time: Vec<Option<f64>>,
    pub window_points: usize,
    pub smoothed_success: Vec<Option<f64>>,
    pub smoothed_time: Vec<Option<f64>>,
}

impl GoalSharingResult {
    pub fn as_sweep(&self) -> SweepResult {
        let cells = self
            .share
            .iter()
            .zip(&self.hide)
            .flat_map(|(s, h)| [s.clone(), h.clone()])
            .collect();
        SweepResult {
            protocol: Protocol::GoalSharing,
            cells,
        }
    }
}

/// Value-of-sharing sweep. Each instance runs twice on the same seed, once
/// with goal sharing and once with goals hidden; one agent's goal is reset
/// within `ρ_max` midway. Instance `i` at grid index `k` uses seed
/// `base.seed + k·instances + i`.
pub fn run_goal_sharing_sweep(
    base: &WorldConfig,
    rho_values: &[f64],
    instances: usize,
    smoothing_span: f64,
    factory: &dyn PolicyFactory,
    opts: &RunOptions,
) -> Result<GoalSharingResult, HarnessError> {
    base.validate()?;
    let mut keys = Vec::new();
    let mut jobs = Vec::new();
    for (k, &rho) in rho_values.iter().enumerate() {
        for sharing in [true, false] {
            let cell = keys.len();
            keys.push(CellKey {
                test_agents: base.n_agents,
                rho_max: Some(rho),
                goal_sharing: Some(sharing),
                ..CellKey::default()
            });
            let config = WorldConfig {
                goal_sharing: sharing,
                ..base.clone()
            };
            for i in 0..instances as u64 {
                let seed = base.seed.wrapping_add(k as u64 * instances as u64 + i);
                jobs.push(Job {
                    cell,
                    config: config.clone(),
                    opts: EpisodeOptions {
                        goal_reset: Some(rho),
                        ..EpisodeOptions::seed(seed)
                    },
                });
            }
        }
    }
    let n_cells = keys.len();
    let grouped = run_jobs(jobs, n_cells, factory, opts)?;
    let cells = finish_cells(keys, grouped)?;
    let mut share = Vec::new();
    let mut hide = Vec::new();
    for (i, c) in cells.into_iter().enumerate() {
        if i % 2 == 0 {
            share.push(c);
        } else {
            hide.push(c);
        }
    }
    let improvement_success: Vec<_> = share
        .iter()
        .zip(&hide)
        .map(|(s, h)| improvement_success(s.stats.success_rate(), h.stats.success_rate()))
        .collect();
    let improvement_time: Vec<_> = share
        .iter()
        .zip(&hide)
        .map(|(s, h)| improvement_time(s.stats.time_fraction.mean, h.stats.time_fraction.mean))
        .collect();
    let step = if rho_values.len() > 1 {
        rho_values[1] - rho_values[0]
    } else {
        smoothing_span
    };
    let window = window_points(smoothing_span, step);
    Ok(GoalSharingResult {
        rho_max: rho_values.to_vec(),
        instances,
        smoothed_success: moving_average(&improvement_success, window),
        smoothed_time: moving_average(&improvement_time, window),
        improvement_success,
        improvement_time,
        window_points: window,
        share,
        hide,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyKind;

    fn metrics(seed: u64, reward: f64, success: bool) -> EpisodeMetrics {
        EpisodeMetrics {
            seed,
            n_agents: 1,
            goal_sharing: true,
            total_reward: reward,
            reward_per_agent: reward,
            agent_rewards: vec![reward],
            time_fractions: vec![if success { 0.5 } else { 1.0 }],
            mean_time_fraction: if success { 0.5 } else { 1.0 },
            collision_events: seed,
            agent_collisions: vec![seed as u32],
            collisions_per_agent: seed as f64,
            overlap_pair_steps: 0,
            success,
            connectivity: vec![1.0],
            goal_reset: None,
        }
    }

    #[test]
    fn aggregate_mean() {
        let recs: Vec<_> = [1.0, 2.0, 3.0].iter().enumerate().map(|(i, r)| metrics(i as u64, *r, true)).collect();
        let s = aggregate(&recs).unwrap();
        assert_eq!(s.total_reward.mean, 2.0);
        assert_eq!(s.total_reward.std, (2.0f64 / 3.0).sqrt());
    }

    #[test]
    fn aggregate_is_order_independent() {
        let recs: Vec<_> = (0..7).map(|i| metrics(i, (i as f64).sin() * 10.0, i % 3 != 0)).collect();
        let mut rev = recs.clone();
        rev.reverse();
        rev.swap(1, 4);
        assert_eq!(aggregate(&recs).unwrap(), aggregate(&rev).unwrap());
    }

    #[test]
    fn aggregate_success_percent() {
        let recs = vec![
            metrics(0, 0.0, true),
            metrics(1, 0.0, false),
            metrics(2, 0.0, true),
            metrics(3, 0.0, true),
        ];
        assert_eq!(aggregate(&recs).unwrap().success_pct, 75.0);
        assert!(matches!(aggregate(&[]), Err(HarnessError::Empty)));
    }

    #[test]
    fn constant_values_have_zero_std() {
        assert_eq!(MeanStd::of(&[4.2; 5]).std, 0.0);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn improvement_formulas() {
        assert!((improvement_success(0.9, 0.45).unwrap() - 100.0).abs() < 1e-12);
        assert!((improvement_time(0.4, 0.5).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(improvement_success(0.3, 0.0), None);
    }

    #[test]
    fn rho_grid_has_51_points() {
        let g = rho_grid(1.0, 0.02);
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.0);
        assert!((g[50] - 1.0).abs() < 1e-15);
        assert_eq!(window_points(0.2, 0.02), 10);
    }

    #[test]
    fn moving_average_cases() {
        let constant = vec![Some(3.5); 20];
        assert_eq!(moving_average(&constant, 10), constant);

        // Direct convolution oracle for an impulse.
        let mut impulse = vec![Some(0.0); 51];
        impulse[25] = Some(10.0);
        let smoothed = moving_average(&impulse, 10);
        let mut spread = 0;
        for (i, v) in smoothed.iter().enumerate() {
            let expected = if (21..=30).contains(&i) { 1.0 } else { 0.0 };
            assert!((v.unwrap() - expected).abs() < 1e-12, "index {i}");
            if expected > 0.0 {
                spread += 1;
            }
        }
        assert_eq!(spread, 10);

        let ramp: Vec<_> = (0..6).map(|i| Some(i as f64)).collect();
        // index 0 sees points 0..=4
        assert_eq!(moving_average(&ramp, 10)[0], Some(2.0));
        assert_eq!(moving_average(&ramp, 10)[5], Some(2.5));
        assert_eq!(moving_average(&[None, Some(2.0), None], 1), vec![None, Some(2.0), None]);
    }

    #[test]
    fn run_episode_deterministic() {
        let cfg = WorldConfig::default();
        let f = PolicyKind::Potential.factory().unwrap();
        let a = run_episode(&cfg, &f, EpisodeOptions::seed(3)).unwrap();
        let b = run_episode(&cfg, &f, EpisodeOptions::seed(3)).unwrap();
        assert_eq!(a.metrics, b.metrics);
        let m = &a.metrics;
        assert!(m.time_fractions.iter().all(|t| (0.0..=1.0).contains(t)));
        assert_eq!(m.success, m.time_fractions.iter().all(|&t| t < 1.0));
    }

    #[test]
    fn goal_reset_happens_midway() {
        let cfg = WorldConfig::default();
        let f = PolicyKind::Greedy.factory().unwrap();
        let run = run_episode(
            &cfg,
            &f,
            EpisodeOptions {
                goal_reset: Some(0.5),
                record_trajectory: true,
                ..EpisodeOptions::seed(8)
            },
        )
        .unwrap();
        let r = run.metrics.goal_reset.expect("reset recorded");
        assert!((r.new - r.old).norm() <= 0.5);
        let goal_id = cfg.n_agents + r.agent;
        let traj = run.trajectory.unwrap();
        let at = |step: usize| {
            traj.iter()
                .find(|t| t.step == step && t.entity_id == goal_id)
                .unwrap()
                .position
        };
        assert_eq!(at(50), r.old);
        assert_eq!(at(51), r.new);
    }
}
