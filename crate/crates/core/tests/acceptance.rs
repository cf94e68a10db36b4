//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `GRIDMIX_LONG=1` to include the long 15x15 training run (criterion
//! 12); otherwise it is reported as SKIP.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{chi_square_uniform_p, random_actions, random_bundle, random_obs, random_state, random_transition, to_actions, BruteSim, LossFn};
use gridmix::dense_net::finite_diff_check;
use gridmix::grid_world::{generate, EnvConfig};
use gridmix::harness::bench::bench;
use gridmix::harness::eval::evaluate;
use gridmix::harness::train::{train_with, TrainOptions};
use gridmix::harness::{gen_mapset, GreedyBfsPolicy, MapKind, MapSet, RandomPolicy, RunConfig};
use gridmix::observation::project_goal;
use gridmix::qmix::{argmax, MixerMode, Which};
use gridmix::replay_buffer::ReplayBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::*;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn env8(n_agents: usize, radius: usize, seed: u64) -> EnvConfig {
    EnvConfig { size: 8, density: 0.3, n_agents, obs_radius: radius, horizon: 16, goal_dist: Some(5), seed }
}

/// 500 random episodes stepped in lockstep with the brute-force simulator.
/// Criterion 1 compares every step outcome bit for bit; criterion 2 checks
/// that every executed move changes the mover's distance by exactly one.
fn c1_c2_dynamics() -> (Verdict, Verdict) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut mismatches, mut steps, mut moves, mut bad_moves) = (0u64, 0u64, 0u64, 0u64);
    for e in 0..500u64 {
        let mut env = match generate(&env8(2, 5, e)) {
            Ok(env) => env,
            Err(err) => return (Fail(err.to_string()), Fail(err.to_string())),
        };
        let mut brute = BruteSim::from_env(&env);
        while !env.is_over() {
            let codes = random_actions(&mut rng, 2);
            let out = env.step(&to_actions(&codes)).unwrap();
            let b = brute.step(&codes);
            let same_state = env.agents.iter().enumerate().all(|(i, a)| a.pos == brute.pos[i] && a.active == brute.active[i]);
            let same_outcome = out.rewards.iter().map(|r| r.to_bits()).eq(b.rewards.iter().map(|r| r.to_bits()))
                && out.done == b.done
                && out.episode_over == b.over;
            if !(same_state && same_outcome) {
                mismatches += 1;
            }
            for &(_, d0, d1) in &b.moves {
                moves += 1;
                if d0.abs_diff(d1) != 1 {
                    bad_moves += 1;
                }
            }
            steps += 1;
        }
    }
    let s = start.elapsed().as_secs_f64();
    (
        verdict(mismatches == 0 && s < 10.0, format!("{mismatches} mismatching steps out of {steps} over 500 episodes in {s:.3} s, limit 10 s")),
        verdict(bad_moves == 0 && moves > 0, format!("{bad_moves} violations over {moves} executed moves")),
    )
}

fn c3_projection() -> Verdict {
    let mut wrong = 0;
    let mut checked = 0;
    for radius in 1..=5usize {
        let r = radius as isize;
        let reach = 2 * r + 3;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let (pr, pc) = project_goal(dr, dc, radius);
                let d2 = |a: isize, b: isize| (a - dr).pow(2) + (b - dc).pow(2);
                let best = (-r..=r).flat_map(|a| (-r..=r).map(move |b| (a, b))).map(|(a, b)| d2(a, b)).min().unwrap();
                if pr.abs() > r || pc.abs() > r || d2(pr, pc) != best || (pr, pc) != (dr.clamp(-r, r), dc.clamp(-r, r)) {
                    wrong += 1;
                }
                checked += 1;
            }
        }
    }
    verdict(wrong == 0, format!("{wrong} wrong projections out of {checked}"))
}

fn c4_monotonicity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(1..5);
        let b = random_bundle(&mut rng, MixerMode::Qmix, n, 1, 16);
        let state = random_state(&mut rng, 16);
        let qs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let base = b.mix(Which::Online, &qs, &state).unwrap();
        let i = rng.gen_range(0..n);
        for delta in [1e-3, 0.1, 1.0] {
            let mut up = qs.clone();
            up[i] += delta;
            worst = worst.min(b.mix(Which::Online, &up, &state).unwrap() - base);
        }
    }
    verdict(worst >= -1e-12, format!("smallest Q_tot increase {worst:.3e}, limit -1e-12"))
}

fn c5_argmax_consistency() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut wrong = 0;
    for k in 0..200 {
        let n = 1 + k % 4;
        let b = random_bundle(&mut rng, MixerMode::Qmix, n, 1, 16);
        let state = random_state(&mut rng, 16);
        let q: Vec<[f64; 5]> = (0..n).map(|_| b.agent_q_values(Which::Online, &random_obs(&mut rng, 1)).unwrap()).collect();
        let value = |profile: &[usize]| {
            let qs: Vec<f64> = profile.iter().enumerate().map(|(i, &a)| q[i][a]).collect();
            b.mix(Which::Online, &qs, &state).unwrap()
        };
        let greedy: Vec<usize> = q.iter().map(|v| argmax(v)).collect();
        let best = (0..5usize.pow(n as u32))
            .map(|code| value(&(0..n).map(|i| code / 5usize.pow(i as u32) % 5).collect::<Vec<_>>()))
            .fold(f64::NEG_INFINITY, f64::max);
        if value(&greedy) < best - 1e-12 {
            wrong += 1;
        }
    }
    verdict(wrong == 0, format!("{wrong} of 200 instances where the greedy profile is not a joint maximizer"))
}

fn c6_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut coords = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..4);
        let mut b = random_bundle(&mut rng, MixerMode::Qmix, n, 1, 12);
        let batch: Vec<_> = (0..4).map(|_| random_transition(&mut rng, n, 1, 12)).collect();
        let refs: Vec<_> = batch.iter().collect();
        let params = b.online_params().to_vec();
        let rep = finite_diff_check(&params, &mut LossFn::new(&mut b, &refs), 1e-5, None, 1e-6, &mut rng);
        worst = worst.max(rep.max_rel_error);
        coords += rep.coords_checked;
    }
    verdict(worst < 1e-4, format!("full QMIX loss, 100 instances: max relative error {worst:.3e} over {coords} coordinates, limit 1e-4"))
}

fn c7_determinism(scratch: &std::path::Path) -> Verdict {
    let mut cfg = RunConfig::new(env8(2, 5, 7));
    cfg.total_steps = 20_000;
    cfg.eval_interval = 5_000;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let dir = scratch.join(name);
        let out = train_with(&cfg, &dir, TrainOptions::default()).map_err(|e| e.to_string())?;
        std::fs::read(out.metrics_path).map_err(|e| e.to_string())
    };
    match (run("det_a"), run("det_b")) {
        (Ok(a), Ok(b)) => verdict(a == b, format!("metrics.csv of two 20k-step runs: {} and {} bytes, identical: {}", a.len(), b.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => Fail(e),
    }
}

fn c8_replay_uniformity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut buf = ReplayBuffer::new(16, 8);
    for _ in 0..40 {
        buf.push(random_transition(&mut rng, 1, 1, 4));
    }
    let mut counts = [0u64; 16];
    for _ in 0..(100_000 / 16) {
        for i in buf.sample_indices(16).unwrap() {
            counts[i] += 1;
        }
    }
    let p = chi_square_uniform_p(&counts);
    verdict(p > 0.001, format!("chi-square p = {p:.4} over 1e5 draws from 16 entries, limit 0.001"))
}

/// Majority over up to three seeds, stopping once two agree.
fn majority(mut trial: impl FnMut(u64) -> Result<(bool, String), String>) -> Verdict {
    let (mut wins, mut losses) = (0, 0);
    let mut notes = Vec::new();
    for seed in 1..=3u64 {
        match trial(seed) {
            Ok((ok, note)) => {
                if ok {
                    wins += 1;
                } else {
                    losses += 1;
                }
                println!("    seed {seed}: {} {note}", if ok { "ok" } else { "miss" });
                notes.push(format!("seed {seed}: {note}"));
            }
            Err(e) => return Fail(format!("seed {seed}: {e}")),
        }
        if wins == 2 || losses == 2 {
            break;
        }
    }
    verdict(wins >= 2, format!("{wins} of {} seeds; {}", wins + losses, notes.join("; ")))
}

fn c9_single_agent() -> Verdict {
    majority(|seed| {
        let mut cfg = RunConfig::new(env8(1, 5, seed));
        cfg.mode = MixerMode::Iql;
        cfg.total_steps = 300_000;
        cfg.eval_interval = 10_000;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = train_with(&cfg, dir.path(), TrainOptions { stop_at: Some(0.8), ..Default::default() }).map_err(|e| e.to_string())?;
        let last = out.final_eval();
        Ok((last.mean >= 0.8, format!("success {:.3} after {} steps", last.mean, last.steps)))
    })
}

const GIVEWAY_STEPS: u64 = 300_000;

fn giveway_env(seed: u64) -> EnvConfig {
    EnvConfig { size: 8, density: 0.3, n_agents: 2, obs_radius: 5, horizon: 16, goal_dist: None, seed }
}

struct GivewayRun {
    qmix: f64,
    vdn: f64,
    iql: f64,
}

fn c10_c11_giveway() -> (Verdict, Verdict) {
    let maps = match gen_mapset(MapKind::Giveway, 70, &giveway_env(0), 0x9e3779b9) {
        Ok(m) => m,
        Err(e) => return (Fail(e.to_string()), Fail(e.to_string())),
    };
    let random = evaluate(&mut RandomPolicy, &maps, 10, 1).map(|r| r.mean).unwrap_or(f64::NAN);
    let greedy = evaluate(&mut GreedyBfsPolicy, &maps, 1, 1).map(|r| r.mean).unwrap_or(f64::NAN);
    println!("    baselines on 70 give-way maps: random {random:.3}, greedy {greedy:.3}");

    let train_mode = |mode: MixerMode, seed: u64, maps: &MapSet| -> Result<f64, String> {
        let mut cfg = RunConfig::new(giveway_env(seed));
        cfg.mode = mode;
        cfg.total_steps = GIVEWAY_STEPS;
        cfg.eval_interval = GIVEWAY_STEPS;
        cfg.eval_kind = MapKind::Giveway;
        cfg.train_kind = MapKind::Giveway;
        cfg.eval_count = maps.len();
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let opts = TrainOptions { eval_maps: Some(maps.clone()), ..Default::default() };
        let out = train_with(&cfg, dir.path(), opts).map_err(|e| e.to_string())?;
        Ok(out.final_eval().mean)
    };

    let mut runs: Vec<GivewayRun> = Vec::new();
    let c10 = |r: &GivewayRun| r.qmix >= random + 0.2 && r.qmix >= greedy + 0.2 && r.qmix > r.iql;
    let c11 = |r: &GivewayRun| r.vdn >= r.iql - 0.05 && r.vdn <= r.qmix + 0.05;
    let settled = |runs: &[GivewayRun], f: &dyn Fn(&GivewayRun) -> bool| {
        let wins = runs.iter().filter(|r| f(r)).count();
        wins >= 2 || runs.len() - wins >= 2
    };
    for seed in 1..=3u64 {
        let run = (|| -> Result<GivewayRun, String> {
            Ok(GivewayRun {
                qmix: train_mode(MixerMode::Qmix, seed, &maps)?,
                vdn: train_mode(MixerMode::Vdn, seed, &maps)?,
                iql: train_mode(MixerMode::Iql, seed, &maps)?,
            })
        })();
        match run {
            Ok(r) => {
                println!("    seed {seed}: qmix {:.3}, vdn {:.3}, iql {:.3}", r.qmix, r.vdn, r.iql);
                runs.push(r);
            }
            Err(e) => return (Fail(format!("seed {seed}: {e}")), Fail(format!("seed {seed}: {e}"))),
        }
        if settled(&runs, &c10) && settled(&runs, &c11) {
            break;
        }
    }
    let summary = |f: &dyn Fn(&GivewayRun) -> f64| runs.iter().map(|r| format!("{:.3}", f(r))).collect::<Vec<_>>().join("/");
    let (q, v, i) = (summary(&|r| r.qmix), summary(&|r| r.vdn), summary(&|r| r.iql));
    let wins10 = runs.iter().filter(|r| c10(r)).count();
    let wins11 = runs.iter().filter(|r| c11(r)).count();
    (
        verdict(
            wins10 >= 2,
            format!(
                "{wins10} of {} seeds at {GIVEWAY_STEPS} steps; qmix {q}, iql {i}, random {random:.3}, greedy {greedy:.3}",
                runs.len()
            ),
        ),
        verdict(wins11 >= 2, format!("{wins11} of {} seeds; vdn {v} within [iql - 0.05, qmix + 0.05] with iql {i}, qmix {q}", runs.len())),
    )
}

fn c12_long_run() -> Verdict {
    if std::env::var("GRIDMIX_LONG").map_or(true, |v| v != "1") {
        return Skip("set GRIDMIX_LONG=1 to train 1.5M steps on 15x15 and evaluate on 8x8".into());
    }
    let env = EnvConfig { size: 15, density: 0.3, n_agents: 2, obs_radius: 5, horizon: 30, goal_dist: Some(8), seed: 12 };
    let mut cfg = RunConfig::new(env);
    cfg.mode = MixerMode::Qmix;
    cfg.total_steps = 1_500_000;
    cfg.eval_interval = 100_000;
    let maps = match gen_mapset(MapKind::Random, 200, &env8(2, 5, 0), cfg.eval_seed) {
        Ok(m) => m,
        Err(e) => return Fail(e.to_string()),
    };
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Fail(e.to_string()),
    };
    let opts = TrainOptions { eval_maps: Some(maps), verbose: true, ..Default::default() };
    match train_with(&cfg, dir.path(), opts) {
        Ok(out) => {
            let s = out.final_eval().mean;
            verdict((s - 0.738).abs() <= 0.15, format!("8x8 success {s:.3} after 1.5M steps, target 0.738 +- 0.15"))
        }
        Err(e) => Fail(e.to_string()),
    }
}

fn c13_bench() -> Verdict {
    let cfg = RunConfig::new(env8(2, 5, 13));
    match bench(&cfg, Duration::from_secs(4)) {
        Ok(r) => {
            let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-bench.json");
            let _ = std::fs::write(&path, serde_json::to_string_pretty(&r).unwrap_or_default());
            verdict(
                r.env_agent_steps_per_s >= 50_000.0 && r.train_env_steps_per_s >= 2_000.0,
                format!(
                    "{:.0} agent-steps/s (limit 50000), {:.0} training env-steps/s (limit 2000), {} threads",
                    r.env_agent_steps_per_s, r.train_env_steps_per_s, r.threads
                ),
            )
        }
        Err(e) => Fail(e.to_string()),
    }
}

fn main() -> ExitCode {
    // `cargo test` passes libtest flags; a filter that is not ours means
    // this target was not selected.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    let mut report = |n: u32, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {n:>2} {name}: {detail}");
    };

    let (c1, c2) = c1_c2_dynamics();
    report(1, "dynamics match brute force", c1);
    report(2, "moves change distance by one", c2);
    report(3, "goal projection", c3_projection());
    report(4, "mixer monotonicity", c4_monotonicity());
    report(5, "greedy argmax consistency", c5_argmax_consistency());
    report(6, "analytic gradients", c6_gradients());
    report(7, "deterministic training", c7_determinism(scratch.path()));
    report(8, "replay uniformity", c8_replay_uniformity());
    report(9, "single-agent learning", c9_single_agent());
    let (c10, c11) = c10_c11_giveway();
    report(10, "QMIX on give-way maps", c10);
    report(11, "VDN between IQL and QMIX", c11);
    report(12, "long 15x15 run", c12_long_run());
    report(13, "throughput benchmark", c13_bench());

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
