use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chrono::Utc;
use clap::{Parser, Subcommand};

use orbitsim::config::{load_config, RunConfig};
use orbitsim::harness::{
    self, run_episode, run_goal_sharing_sweep, run_inclination_sweep, run_scalability, EpisodeOptions, HarnessError,
    RunOptions, SweepResult,
};
use orbitsim::io::{self, RunManifest};
use orbitsim::obsgraph::LAYOUT_VERSION;
use orbitsim::policy::{PolicyError, PolicyKind};
use orbitsim::validation::run_oracle_suite;

const DEFAULT_SCALABILITY_EPISODES: usize = 100;
const DEFAULT_INCLINATION_RUNS: usize = 5;
const DEFAULT_SHARING_INSTANCES: usize = 100;

#[derive(Parser, Debug)]
#[command(name = "orbitsim", version, about = "Multi-agent navigation simulator and experiment harness")]
struct Cli {
    /// TOML config file; missing keys take the regime defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed (overrides the config value).
    #[arg(long, global = true, env = "ORBITSIM_SEED")]
    seed: Option<u64>,

    /// Episodes per cell (instances per ρ for goal-sharing).
    #[arg(long, global = true)]
    episodes: Option<usize>,

    /// greedy, potential, potential+intent or random.
    #[arg(long, global = true)]
    policy: Option<String>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Hide other agents' goals in the observation graph.
    #[arg(long, global = true)]
    goal_hiding: bool,

    /// Also write two-column improvement series for plotting.
    #[arg(long, global = true)]
    plot_data: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run a single episode and write its trajectory.
    Run,
    /// Train-size by test-size grid.
    Scalability,
    /// Total reward across orbital inclinations under J2.
    Inclination,
    /// Paired sharing/hiding sweep over the goal-reset radius.
    GoalSharing,
    /// Check the integrators against closed-form solutions.
    ValidateDynamics,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Scalability => "scalability",
            Command::Inclination => "inclination",
            Command::GoalSharing => "goal-sharing",
            Command::ValidateDynamics => "validate-dynamics",
        }
    }
}

/// Error classified by exit code.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<PolicyError> for Failure {
    fn from(e: PolicyError) -> Self {
        Failure::Validation(e.into())
    }
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path).map_err(|e| Failure::Validation(e.into()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.world.seed = seed;
    }
    if let Some(p) = &cli.policy {
        cfg.experiment.policy = p.clone();
    }
    if let Some(e) = cli.episodes {
        if e == 0 {
            return Err(Failure::Validation(anyhow::anyhow!("--episodes must be at least 1")));
        }
        cfg.experiment.episodes = Some(e);
    }
    if cli.goal_hiding {
        cfg.world.goal_sharing = false;
    }
    Ok(cfg)
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(runtime)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<File, Failure> {
        let path = self.dir.join(name);
        let f = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(runtime)?;
        self.files.push(PathBuf::from(name));
        Ok(f)
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Command::ValidateDynamics = cli.command {
        return validate_dynamics(cli.seed.unwrap_or(0));
    }
    let cfg = resolve_config(cli)?;
    let kind: PolicyKind = cfg.experiment.policy.parse()?;
    let factory = kind.factory()?;
    let opts = RunOptions { jobs: cli.jobs };
    let started_at = Utc::now().to_rfc3339();
    let mut out = Outputs::new(&cli.out_dir)?;
    let mut seeds = Vec::new();

    match cli.command {
        Command::Run => {
            let run = run_episode(
                &cfg.world,
                &factory,
                EpisodeOptions {
                    record_trajectory: true,
                    ..EpisodeOptions::seed(cfg.world.seed)
                },
            )?;
            seeds.push(cfg.world.seed);
            let traj = run.trajectory.as_deref().unwrap_or_default();
            io::write_trajectory(traj, out.create("trajectory.jsonl")?).map_err(runtime)?;
            io::write_episodes([("run", std::slice::from_ref(&run.metrics))], out.create("episodes.jsonl")?)
                .map_err(runtime)?;
            let m = &run.metrics;
            println!(
                "seed {}: reward/m {:.4}  T {:.3}  #col/m {:.3}  success {}",
                m.seed, m.reward_per_agent, m.mean_time_fraction, m.collisions_per_agent, m.success
            );
        }
        Command::Scalability => {
            let episodes = cfg.experiment.episodes.unwrap_or(DEFAULT_SCALABILITY_EPISODES);
            let result = run_scalability(
                &cfg.world,
                &cfg.experiment.train_sizes,
                &cfg.experiment.test_sizes,
                episodes,
                &factory,
                &opts,
            )?;
            write_sweep(&result, &mut out, &mut seeds)?;
        }
        Command::Inclination => {
            let runs = cfg.experiment.episodes.unwrap_or(DEFAULT_INCLINATION_RUNS);
            let result = run_inclination_sweep(&cfg.world, &cfg.experiment.inclinations_deg, runs, &factory, &opts)?;
            write_sweep(&result, &mut out, &mut seeds)?;
        }
        Command::GoalSharing => {
            let instances = cfg.experiment.episodes.unwrap_or(DEFAULT_SHARING_INSTANCES);
            let grid = harness::rho_grid(cfg.experiment.rho_max, cfg.experiment.rho_step);
            let result = run_goal_sharing_sweep(
                &cfg.world,
                &grid,
                instances,
                cfg.experiment.smoothing_span,
                &factory,
                &opts,
            )?;
            write_sweep(&result.as_sweep(), &mut out, &mut seeds)?;
            io::write_improvement_csv(&result, out.create("improvement.csv")?).map_err(runtime)?;
            if cli.plot_data {
                io::write_plot_series(&result.rho_max, &result.smoothed_success, out.create("plot_success.dat")?)
                    .map_err(runtime)?;
                io::write_plot_series(&result.rho_max, &result.smoothed_time, out.create("plot_time.dat")?)
                    .map_err(runtime)?;
            }
            for (rho, (s, t)) in result
                .rho_max
                .iter()
                .zip(result.smoothed_success.iter().zip(&result.smoothed_time))
            {
                println!("rho {rho:.2}  dS% {}  dT% {}", show(*s), show(*t));
            }
        }
        Command::ValidateDynamics => unreachable!("handled above"),
    }

    let manifest = RunManifest {
        schema: io::MANIFEST_SCHEMA.into(),
        tool: "orbitsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        policy: kind.to_string(),
        jobs: cli.jobs,
        config: cfg,
        seeds,
        started_at,
        finished_at: Utc::now().to_rfc3339(),
        outputs: out.files.clone(),
        graph_layout: LAYOUT_VERSION.into(),
        sweep_schema: io::SWEEP_SCHEMA.into(),
    };
    manifest.write(&out.dir.join("manifest.json")).map_err(runtime)?;
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

fn write_sweep(result: &SweepResult, out: &mut Outputs, seeds: &mut Vec<u64>) -> Result<(), Failure> {
    let labels: Vec<String> = result.cells.iter().map(|c| c.key.label()).collect();
    io::write_sweep_csv(result, out.create("sweep.csv")?).map_err(runtime)?;
    io::write_episodes(
        labels.iter().zip(&result.cells).map(|(l, c)| (l.as_str(), c.episodes.as_slice())),
        out.create("episodes.jsonl")?,
    )
    .map_err(runtime)?;
    for c in &result.cells {
        for s in c.seeds() {
            if !seeds.contains(&s) {
                seeds.push(s);
            }
        }
        let st = &c.stats;
        println!(
            "{:<24} reward/m {:>10.3} ± {:<8.3} T {:.3}  #col/m {:.3}  S% {:.1}",
            c.key.label(),
            st.reward_per_agent.mean,
            st.reward_per_agent.std,
            st.time_fraction.mean,
            st.collisions_per_agent.mean,
            st.success_pct
        );
    }
    seeds.sort_unstable();
    Ok(())
}

fn validate_dynamics(seed: u64) -> Result<(), Failure> {
    let checks = run_oracle_suite(seed);
    let mut ok = true;
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        println!("{:<30} {:.3e}  (tolerance {:.1e})  {status}", c.name, c.value, c.tolerance);
        ok &= c.passed();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("dynamics validation failed")))
    }
}
