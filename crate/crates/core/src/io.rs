//! Result and trajectory serialization.
//!
//! # Files
//!
//! * `trajectory.jsonl`: one object per entity per step, ordered by
//!   `(step, entity_id)` and starting with the initial state at step 0:
//!   `{"step", "entity_id", "kind", "position": [x, y], "velocity": [x, y],
//!   "reward": number|null, "collided": bool}`.
//! * `episodes.jsonl`: one object per episode with the fields of
//!   [`EpisodeMetrics`] plus the cell label.
//! * `sweep.csv`: one row per sweep cell under [`SWEEP_HEADER`]. The first
//!   column carries [`SWEEP_SCHEMA`] so a reader can reject files from a
//!   different layout. Axes a protocol does not vary are left empty.
//! * `improvement.csv`: per-ρ success and time improvements, raw and
//!   smoothed, under [`IMPROVEMENT_HEADER`]. Undefined values are empty.
//! * `plot_success.dat` / `plot_time.dat`: two whitespace-separated
//!   columns, `rho_max improvement_pct`, smoothed, one line per grid point
//!   with a defined value.
//! * `manifest.json`: see [`RunManifest`].
//!
//! Floats are written in `{:.16e}` form (17 significant digits), which
//! round-trips every finite `f64` exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::harness::{EpisodeMetrics, GoalSharingResult, SweepCell, SweepResult};
use crate::world::TrajectoryRecord;

pub const SWEEP_SCHEMA: &str = "sweep.v1";
pub const MANIFEST_SCHEMA: &str = "manifest.v1";

pub const SWEEP_HEADER: &[&str] = &[
    "schema",
    "protocol",
    "cell",
    "train_agents",
    "test_agents",
    "inclination_deg",
    "rho_max",
    "goal_sharing",
    "episodes",
    "reward_per_agent_mean",
    "reward_per_agent_std",
    "total_reward_mean",
    "total_reward_std",
    "t_mean",
    "t_std",
    "col_per_agent_mean",
    "col_per_agent_std",
    "success_pct",
    "median_collisions",
    "connectivity_mean",
];

pub const IMPROVEMENT_HEADER: &[&str] = &[
    "schema",
    "rho_max",
    "success_share",
    "success_hide",
    "t_share",
    "t_hide",
    "improvement_success_pct",
    "improvement_time_pct",
    "smoothed_success_pct",
    "smoothed_time_pct",
];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_json_f64(x: f64) -> String {
    if x.is_finite() {
        fmt_f64(x)
    } else {
        "null".to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Minimal ordered JSON object writer; keeps float formatting under our
/// control, which serde_json does not.
struct JsonObject {
    buf: String,
}

impl JsonObject {
    fn new() -> Self {
        Self { buf: String::from("{") }
    }

    fn key(&mut self, k: &str) -> &mut String {
        if self.buf.len() > 1 {
            self.buf.push(',');
        }
        self.buf.push_str(&serde_json::to_string(k).expect("string key"));
        self.buf.push(':');
        &mut self.buf
    }

    fn raw(&mut self, k: &str, v: &str) -> &mut Self {
        self.key(k).push_str(v);
        self
    }

    fn num(&mut self, k: &str, v: f64) -> &mut Self {
        let s = fmt_json_f64(v);
        self.raw(k, &s)
    }

    fn int(&mut self, k: &str, v: impl ToString) -> &mut Self {
        self.raw(k, &v.to_string())
    }

    fn str(&mut self, k: &str, v: &str) -> &mut Self {
        let s = serde_json::to_string(v).expect("string value");
        self.raw(k, &s)
    }

    fn nums(&mut self, k: &str, vs: impl IntoIterator<Item = f64>) -> &mut Self {
        let items: Vec<String> = vs.into_iter().map(fmt_json_f64).collect();
        self.raw(k, &format!("[{}]", items.join(",")))
    }

    fn finish(&mut self) -> String {
        let mut s = std::mem::take(&mut self.buf);
        s.push('}');
        s
    }
}

pub fn trajectory_line(r: &TrajectoryRecord) -> String {
    JsonObject::new()
        .int("step", r.step)
        .int("entity_id", r.entity_id)
        .str("kind", r.kind.as_str())
        .nums("position", [r.position.x, r.position.y])
        .nums("velocity", [r.velocity.x, r.velocity.y])
        .raw("reward", &r.reward.map_or("null".to_string(), fmt_json_f64))
        .raw("collided", if r.collided { "true" } else { "false" })
        .finish()
}

/// Writes records sorted by `(step, entity_id)`.
pub fn write_trajectory<W: Write>(records: &[TrajectoryRecord], out: W) -> io::Result<()> {
    let mut sorted: Vec<&TrajectoryRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.step, r.entity_id));
    let mut out = BufWriter::new(out);
    for r in sorted {
        writeln!(out, "{}", trajectory_line(r))?;
    }
    out.flush()
}

pub fn episode_line(cell: &str, m: &EpisodeMetrics) -> String {
    let mut o = JsonObject::new();
    o.str("cell", cell)
        .int("seed", m.seed)
        .int("n_agents", m.n_agents)
        .raw("goal_sharing", if m.goal_sharing { "true" } else { "false" })
        .num("total_reward", m.total_reward)
        .num("reward_per_agent", m.reward_per_agent)
        .nums("agent_rewards", m.agent_rewards.iter().copied())
        .nums("time_fractions", m.time_fractions.iter().copied())
        .num("mean_time_fraction", m.mean_time_fraction)
        .int("collision_events", m.collision_events)
        .raw(
            "agent_collisions",
            &format!(
                "[{}]",
                m.agent_collisions.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            ),
        )
        .num("collisions_per_agent", m.collisions_per_agent)
        .int("overlap_pair_steps", m.overlap_pair_steps)
        .raw("success", if m.success { "true" } else { "false" })
        .nums("connectivity", m.connectivity.iter().copied());
    match &m.goal_reset {
        Some(r) => {
            let inner = JsonObject::new()
                .int("agent", r.agent)
                .nums("old", [r.old.x, r.old.y])
                .nums("new", [r.new.x, r.new.y])
                .finish();
            o.raw("goal_reset", &inner);
        }
        None => {
            o.raw("goal_reset", "null");
        }
    }
    o.finish()
}

pub fn write_episodes<'a, W: Write>(
    cells: impl IntoIterator<Item = (&'a str, &'a [EpisodeMetrics])>,
    out: W,
) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for (label, eps) in cells {
        for m in eps {
            writeln!(out, "{}", episode_line(label, m))?;
        }
    }
    out.flush()
}

fn sweep_row(protocol: &str, cell: &SweepCell) -> Vec<String> {
    let k = &cell.key;
    let s = &cell.stats;
    vec![
        SWEEP_SCHEMA.to_string(),
        protocol.to_string(),
        k.label(),
        opt(k.train_agents),
        k.test_agents.to_string(),
        opt_f64(k.inclination_deg),
        opt_f64(k.rho_max),
        opt(k.goal_sharing),
        s.episodes.to_string(),
        fmt_f64(s.reward_per_agent.mean),
        fmt_f64(s.reward_per_agent.std),
        fmt_f64(s.total_reward.mean),
        fmt_f64(s.total_reward.std),
        fmt_f64(s.time_fraction.mean),
        fmt_f64(s.time_fraction.std),
        fmt_f64(s.collisions_per_agent.mean),
        fmt_f64(s.collisions_per_agent.std),
        fmt_f64(s.success_pct),
        fmt_f64(s.median_collisions),
        fmt_f64(s.connectivity),
    ]
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for cell in &result.cells {
        w.write_record(sweep_row(result.protocol.as_str(), cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_improvement_csv<W: Write>(result: &GoalSharingResult, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(IMPROVEMENT_HEADER)?;
    for i in 0..result.rho_max.len() {
        let (s, h) = (&result.share[i].stats, &result.hide[i].stats);
        w.write_record([
            SWEEP_SCHEMA.to_string(),
            fmt_f64(result.rho_max[i]),
            fmt_f64(s.success_rate()),
            fmt_f64(h.success_rate()),
            fmt_f64(s.time_fraction.mean),
            fmt_f64(h.time_fraction.mean),
            opt_f64(result.improvement_success[i]),
            opt_f64(result.improvement_time[i]),
            opt_f64(result.smoothed_success[i]),
            opt_f64(result.smoothed_time[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `x y` series; points with no `y` are skipped.
pub fn write_plot_series<W: Write>(xs: &[f64], ys: &[Option<f64>], out: W) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for (x, y) in xs.iter().zip(ys) {
        if let Some(y) = y {
            writeln!(out, "{} {}", fmt_f64(*x), fmt_f64(*y))?;
        }
    }
    out.flush()
}

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub policy: String,
    pub jobs: usize,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
    pub graph_layout: String,
    pub sweep_schema: String,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self).map_err(io::Error::from)?;
        writeln!(f)?;
        f.flush()
    }

    pub fn read(path: &Path) -> io::Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(io::Error::from)
    }
}
