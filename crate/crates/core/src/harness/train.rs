//! The training loop.
//!
//! Output directory layout:
//!
//! - `metrics.csv`: a `# mapset_sha256=<hex>` header line, a column line,
//!   then one row per evaluation. Only deterministic quantities go here, so
//!   two runs with equal configs produce identical files.
//! - `timing.csv`: wall-clock time and throughput for the same rows.
//! - `checkpoint.json`: the final learner.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use super::config::RunConfig;
use super::eval::{evaluate_bundle, EvalReport};
use super::mapset::{gen_mapset, gen_mapset_excluding, MapKind, MapSet};
use super::vec_env::{EpisodeSource, VecEnv};
use super::{derive_seed, HarnessError};
use crate::checkpoint::save_bundle;
use crate::grid_world::MapRecord;
use crate::qmix::MixerBundle;
use crate::replay_buffer::ReplayBuffer;

pub const METRICS_COLUMNS: &str = "steps,loss_mean,q_tot_mean,grad_norm,eval_success_mean,eval_success_per_map_json";
pub const TIMING_COLUMNS: &str = "steps,wall_s,env_steps_per_s";

// Stream keys for the sub-seeds of a run.
const KEY_LEARNER: u64 = 1 << 32;
const KEY_REPLAY: u64 = 2 << 32;
const KEY_ENVS: u64 = 3 << 32;
const KEY_POOL: u64 = 4 << 32;

/// Optional knobs that are not part of the run config.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Pre-loaded evaluation set, overriding `eval_maps` in the config.
    pub eval_maps: Option<MapSet>,
    /// Pre-generated training pool for give-way training.
    pub train_pool: Option<Arc<Vec<MapRecord>>>,
    /// Stop after the first evaluation whose mean reaches this value.
    pub stop_at: Option<f64>,
    /// Print one progress line per evaluation to stderr.
    pub verbose: bool,
}

pub struct TrainOutcome {
    pub bundle: MixerBundle,
    pub evals: Vec<EvalReport>,
    pub env_steps: u64,
    pub metrics_path: PathBuf,
    pub timing_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub mapset_sha256: String,
}

impl TrainOutcome {
    pub fn final_eval(&self) -> &EvalReport {
        self.evals.last().expect("at least the initial evaluation")
    }
}

pub fn train(config: &RunConfig, out_dir: &Path) -> Result<TrainOutcome, HarnessError> {
    train_with(config, out_dir, TrainOptions::default())
}

/// Resolves the evaluation set of a run. A loaded set may use a different
/// grid size (greedy acting needs only the agent network) but must match
/// the agent count and observation radius.
pub fn eval_mapset(config: &RunConfig) -> Result<MapSet, HarnessError> {
    let maps = match &config.eval_maps {
        Some(path) => MapSet::load(path)?,
        None => gen_mapset(config.eval_kind, config.eval_count, &config.env, config.eval_seed)?,
    };
    let (a, b) = (&maps.config, &config.env);
    if a.n_agents != b.n_agents || a.obs_radius != b.obs_radius {
        return Err(HarnessError::TopologyMismatch(format!(
            "evaluation maps have {} agents and radius {}, run has {} agents and radius {}",
            a.n_agents, a.obs_radius, b.n_agents, b.obs_radius
        )));
    }
    Ok(maps)
}

/// Training pool of give-way maps disjoint from `exclude`.
pub fn giveway_pool(config: &RunConfig, exclude: &HashSet<u64>) -> Result<Arc<Vec<MapRecord>>, HarnessError> {
    let set = gen_mapset_excluding(MapKind::Giveway, config.giveway_pool, &config.env, derive_seed(config.env.seed, KEY_POOL), exclude)?;
    Ok(Arc::new(set.maps))
}

#[derive(Default)]
struct Window {
    loss: f64,
    q_tot: f64,
    grad_norm: f64,
    count: u64,
}

impl Window {
    fn mean(&self, v: f64) -> String {
        if self.count == 0 {
            String::new()
        } else {
            format!("{}", v / self.count as f64)
        }
    }
}

pub fn train_with(config: &RunConfig, out_dir: &Path, options: TrainOptions) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let seed = config.env.seed;
    let maps = match options.eval_maps {
        Some(m) => m,
        None => eval_mapset(config)?,
    };
    let hash = maps.sha256_hex();
    let exclude: Arc<HashSet<u64>> = Arc::new(maps.layout_hashes());

    let source = match config.train_kind {
        MapKind::Random => EpisodeSource::Random(config.env.clone()),
        MapKind::Giveway => {
            let pool = match options.train_pool {
                Some(p) => p,
                None => giveway_pool(config, &exclude)?,
            };
            let mut env = config.env.clone();
            env.goal_dist = None;
            EpisodeSource::Pool { config: env, maps: pool }
        }
    };

    let mut bundle = MixerBundle::new(config.learner_config(), derive_seed(seed, KEY_LEARNER))?;
    let mut replay = ReplayBuffer::new(config.buffer_capacity, derive_seed(seed, KEY_REPLAY));
    let mut venv = VecEnv::new(source, config.n_envs, derive_seed(seed, KEY_ENVS), exclude)?;

    let metrics_path = out_dir.join("metrics.csv");
    let timing_path = out_dir.join("timing.csv");
    let checkpoint_path = out_dir.join("checkpoint.json");
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    let mut timing = BufWriter::new(File::create(&timing_path)?);
    writeln!(metrics, "# mapset_sha256={hash}")?;
    writeln!(metrics, "{METRICS_COLUMNS}")?;
    writeln!(timing, "{TIMING_COLUMNS}")?;

    let start = Instant::now();
    let mut evals = Vec::new();
    let mut window = Window::default();
    let mut env_steps: u64 = 0;
    let mut since_train = 0usize;
    let learn_start = config.learn_start.max(config.batch_size);

    let mut record = |env_steps: u64,
                      window: &mut Window,
                      bundle: &MixerBundle,
                      evals: &mut Vec<EvalReport>|
     -> Result<f64, HarnessError> {
        let mut rep = evaluate_bundle(bundle, &maps, config.eval_repeats, config.eval_seed)?;
        rep.steps = env_steps;
        let wall = start.elapsed().as_secs_f64();
        rep.wall_s = wall;
        writeln!(
            metrics,
            "{},{},{},{},{},\"{}\"",
            env_steps,
            window.mean(window.loss),
            window.mean(window.q_tot),
            window.mean(window.grad_norm),
            rep.mean,
            serde_json::to_string(&rep.per_map)?
        )?;
        metrics.flush()?;
        let rate = if wall > 0.0 { env_steps as f64 / wall } else { 0.0 };
        writeln!(timing, "{env_steps},{wall:.3},{rate:.1}")?;
        timing.flush()?;
        if options.verbose {
            eprintln!(
                "steps {env_steps:>9}  eval {:.3}  loss {:>10}  eps {:.3}  {:.0} env-steps/s",
                rep.mean,
                window.mean(window.loss),
                config.epsilon(env_steps),
                rate
            );
        }
        *window = Window::default();
        let mean = rep.mean;
        evals.push(rep);
        Ok(mean)
    };

    let mut last = record(0, &mut window, &bundle, &mut evals)?;
    let mut next_eval = config.eval_interval;
    let n_envs = config.n_envs as u64;
    while env_steps < config.total_steps && !options.stop_at.is_some_and(|s| last >= s) {
        let step = venv.step(Some(&bundle), config.epsilon(env_steps))?;
        for t in step.transitions {
            replay.push(t);
        }
        env_steps += n_envs;
        since_train += config.n_envs;
        while since_train >= config.train_every {
            since_train -= config.train_every;
            if replay.len() < learn_start {
                continue;
            }
            let batch = replay.sample(config.batch_size).expect("buffer holds a batch");
            let rep = bundle.train_step(&batch)?;
            window.loss += rep.loss;
            window.q_tot += rep.q_tot_mean;
            window.grad_norm += rep.grad_norm;
            window.count += 1;
            if bundle.train_steps() % config.target_sync == 0 {
                bundle.sync_targets();
            }
        }
        if env_steps >= next_eval {
            last = record(env_steps, &mut window, &bundle, &mut evals)?;
            while next_eval <= env_steps {
                next_eval += config.eval_interval;
            }
        }
    }
    if evals.last().is_some_and(|e| e.steps != env_steps) {
        record(env_steps, &mut window, &bundle, &mut evals)?;
    }
    save_bundle(&bundle, &checkpoint_path)?;
    Ok(TrainOutcome { bundle, evals, env_steps, metrics_path, timing_path, checkpoint_path, mapset_sha256: hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_world::EnvConfig;
    use crate::qmix::MixerMode;

    fn small(mode: MixerMode) -> RunConfig {
        let env = EnvConfig { size: 6, density: 0.2, n_agents: 2, obs_radius: 2, horizon: 10, goal_dist: Some(3), seed: 4 };
        let mut c = RunConfig::new(env);
        c.mode = mode;
        c.total_steps = 800;
        c.eval_interval = 400;
        c.eval_count = 5;
        c.learn_start = 100;
        c.batch_size = 8;
        c.hidden = vec![16];
        c.embed_dim = 4;
        c
    }

    #[test]
    fn zero_steps_writes_initial_row_and_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(MixerMode::Qmix);
        c.total_steps = 0;
        let out = train(&c, dir.path()).unwrap();
        assert_eq!(out.evals.len(), 1);
        assert_eq!(out.bundle.train_steps(), 0);
        let text = std::fs::read_to_string(&out.metrics_path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("# mapset_sha256="));
        assert!(out.checkpoint_path.exists());
    }

    #[test]
    fn short_runs_are_reproducible() {
        for mode in [MixerMode::Qmix, MixerMode::Vdn, MixerMode::Iql] {
            let a = tempfile::tempdir().unwrap();
            let b = tempfile::tempdir().unwrap();
            let c = small(mode);
            let ra = train(&c, a.path()).unwrap();
            train(&c, b.path()).unwrap();
            let ma = std::fs::read(a.path().join("metrics.csv")).unwrap();
            let mb = std::fs::read(b.path().join("metrics.csv")).unwrap();
            assert_eq!(ma, mb);
            assert_eq!(ra.evals.len(), 3);
            assert!(ra.bundle.train_steps() > 0);
            let steps: Vec<u64> = ra.evals.iter().map(|e| e.steps).collect();
            assert!(steps.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
