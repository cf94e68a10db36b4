use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gridmix::checkpoint::load_bundle;
use gridmix::grid_world::{EnvConfig, MapRecord};
use gridmix::harness::baseline::baseline_policy;
use gridmix::harness::bench::bench;
use gridmix::harness::eval::{check_compatible, evaluate, rollout};
use gridmix::harness::render::{render_episode, render_map, EpisodeLog};
use gridmix::harness::train::{train_with, TrainOptions};
use gridmix::harness::{BaselineKind, HarnessError, LearnedPolicy, MapKind, MapSet, Policy, RunConfig};

#[derive(Parser)]
#[command(name = "gridmix", version, about = "Multi-agent grid pathfinding with QMIX, VDN and IQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learner; writes metrics.csv, timing.csv and checkpoint.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Greedy evaluation of a checkpoint (or a baseline) on a map set.
    Eval {
        #[arg(long, required_unless_present = "baseline")]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        maps: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, conflicts_with = "ckpt")]
        baseline: Option<BaselineKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the episode on map 0 as a replayable log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Generate a fixed map set.
    GenMaps {
        #[arg(long)]
        kind: MapKind,
        #[arg(long)]
        count: usize,
        /// Run config or bare environment config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print ASCII frames of an episode log, a map set, or a single map.
    Render {
        #[arg(long)]
        log: PathBuf,
    },
    /// Measure stepping and training throughput.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3.0)]
        seconds: f64,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_env_config(path: &PathBuf) -> Result<EnvConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    match RunConfig::from_json(&text) {
        Ok(c) => Ok(c.env),
        Err(_) => {
            let env: EnvConfig = serde_json::from_str(&text)?;
            env.validate()?;
            Ok(env)
        }
    }
}

fn default_bench_config() -> RunConfig {
    RunConfig::new(EnvConfig { size: 8, density: 0.3, n_agents: 2, obs_radius: 5, horizon: 16, goal_dist: Some(5), seed: 0 })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, out, quiet } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = train_with(&cfg, &out, TrainOptions { verbose: !quiet, ..Default::default() })?;
            println!(
                "final eval success {:.4} after {} env steps; checkpoint {}",
                outcome.final_eval().mean,
                outcome.env_steps,
                outcome.checkpoint_path.display()
            );
        }
        Command::Eval { ckpt, maps, repeats, baseline, seed, log } => {
            let maps = MapSet::load(&maps)?;
            let bundle = ckpt.map(|p| load_bundle(&p)).transpose()?;
            let mut policy: Box<dyn Policy + '_> = match (&bundle, baseline) {
                (Some(b), _) => {
                    check_compatible(b, &maps)?;
                    Box::new(LearnedPolicy::new(b, 0.0))
                }
                (None, Some(kind)) => baseline_policy(kind),
                (None, None) => unreachable!("clap requires one of --ckpt or --baseline"),
            };
            let report = evaluate(policy.as_mut(), &maps, repeats, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(path) = log {
                let mut actions = Vec::new();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rollout(maps.episode(0)?, policy.as_mut(), &mut rng, Some(&mut actions))?;
                EpisodeLog { config: maps.config.clone(), map: maps.maps[0].clone(), actions }.save(&path)?;
            }
        }
        Command::GenMaps { kind, count, config, seed, out } => {
            let env = load_env_config(&config)?;
            let set = gridmix::harness::gen_mapset(kind, count, &env, seed)?;
            set.save(&out)?;
            println!("wrote {} maps to {} (sha256 {})", set.len(), out.display(), set.sha256_hex());
        }
        Command::Render { log } => {
            let text = std::fs::read_to_string(&log)?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::MalformedLog(e.to_string()))?;
            let malformed = |e: serde_json::Error| HarnessError::MalformedLog(e.to_string());
            if value.get("actions").is_some() {
                let log: EpisodeLog = serde_json::from_value(value).map_err(malformed)?;
                for (t, frame) in render_episode(&log)?.iter().enumerate() {
                    println!("t={t}\n{frame}\n");
                }
            } else if value.get("maps").is_some() {
                let set: MapSet = serde_json::from_value(value).map_err(malformed)?;
                for (i, m) in set.maps.iter().enumerate() {
                    println!("map {i}\n{}\n", render_map(m)?);
                }
            } else {
                let map: MapRecord = serde_json::from_value(value).map_err(malformed)?;
                println!("{}", render_map(&map)?);
            }
        }
        Command::Bench { config, seconds, out } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => default_bench_config(),
            };
            let report = bench(&cfg, Duration::from_secs_f64(seconds / 2.0))?;
            let json = serde_json::to_string_pretty(&report)?;
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(path, json)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
