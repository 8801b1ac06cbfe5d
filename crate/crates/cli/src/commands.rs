use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sail_core::baselines::{run_random, train_bc};
use sail_core::data::{
    load_trajectories, manifest_path, save_trajectories, state_only, GenerationInfo, Trajectory,
    TrajectoryManifest,
};
use sail_core::env::EnvName;
use sail_core::experts::{default_min_return, generate_teacher, ExpertKind};
use sail_core::metrics::{
    aer, fmt_float, published_rows, write_behaviour, write_results, write_sweep, BehaviourRow,
    EvalResult, ReferenceBand, ResultRow, SweepRow, SWEEP_COUNTS,
};
use sail_core::models::{ActMode, ModelBundle};
use sail_core::sail::{evaluate_policy, measure_band, train, MetricsLog};
use sail_core::{Error, Result};

use crate::config::{Agent, RunConfig};
use crate::manifest::{hash_dir, hash_file, write_json, InputHash};

/// Evaluation seeds are derived from the run seed so a manifest pins them.
const EVAL_SEED_OFFSET: u64 = 0x9e37_79b9;
const BAND_SEED_OFFSET: u64 = 0x2545_f491;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub struct GenExperts {
    pub env: EnvName,
    pub episodes: usize,
    pub min_return: Option<f64>,
    pub controller: Option<ExpertKind>,
    pub out: PathBuf,
    pub seed: u64,
}

pub fn gen_experts(args: &GenExperts) -> Result<()> {
    let kind = args
        .controller
        .unwrap_or_else(|| ExpertKind::default_for(args.env));
    if kind.env() != args.env {
        return Err(Error::Config(format!(
            "controller {kind} drives {}, not {}",
            kind.env(),
            args.env
        )));
    }
    let min_return = args
        .min_return
        .unwrap_or_else(|| default_min_return(args.env));
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let trajectories = generate_teacher(args.env, kind, args.episodes, min_return, &mut rng)?;
    let manifest = TrajectoryManifest {
        generator: Some(GenerationInfo {
            controller: kind.to_string(),
            episodes: args.episodes,
            min_return,
        }),
        ..TrajectoryManifest::new(args.env, args.seed)
    };
    save_trajectories(&args.out, &manifest, &trajectories)?;
    let returns: Vec<f64> = trajectories.iter().map(|t| t.episode_return).collect();
    let (mean, std) = aer(&returns)?;
    println!(
        "wrote {} {} episodes from {kind} to {} (return {mean:.2} ± {std:.2})",
        trajectories.len(),
        args.env,
        args.out.display()
    );
    Ok(())
}

fn load_teacher(path: &Path, env: EnvName) -> Result<(Vec<Trajectory>, Vec<InputHash>)> {
    let (manifest, trajectories) = load_trajectories(path)?;
    if manifest.env != env {
        return Err(Error::Validation(format!(
            "{} holds {} trajectories, expected {env}",
            path.display(),
            manifest.env
        )));
    }
    if trajectories.is_empty() {
        return Err(Error::Usage(format!(
            "{} holds no trajectories",
            path.display()
        )));
    }
    let hashes = vec![hash_file(path)?, hash_file(&manifest_path(path))?];
    Ok((trajectories, hashes))
}

struct Fitted {
    bundle: ModelBundle<f64>,
    log: Option<MetricsLog>,
    best_epoch: Option<usize>,
}

fn fit(config: &RunConfig, env: EnvName, teacher: &[Trajectory], seed: u64) -> Result<Fitted> {
    match config.agent {
        Agent::Bc => Ok(Fitted {
            bundle: train_bc(env, teacher, &config.bc_for(seed))?,
            log: None,
            best_epoch: None,
        }),
        Agent::Sail | Agent::SailNoAdversarial => {
            let out = train::<f64>(&config.sail_for(seed), env, &state_only(teacher))?;
            Ok(Fitted {
                bundle: out.bundle,
                log: Some(out.log),
                best_epoch: out.best_epoch,
            })
        }
    }
}

fn band_for(env: EnvName, teacher: &[Trajectory], seed: u64) -> Result<ReferenceBand> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(BAND_SEED_OFFSET));
    measure_band(env, &state_only(teacher), &mut rng).ok_or_else(|| {
        Error::Validation("teacher and random returns coincide; no reference band".into())
    })
}

fn evaluate_bundle(
    bundle: &ModelBundle<f64>,
    episodes: usize,
    seed: u64,
    band: Option<&ReferenceBand>,
) -> Result<EvalResult> {
    let returns = evaluate_policy(
        &bundle.policy,
        &bundle.store,
        bundle.env,
        episodes,
        ActMode::Argmax,
        seed.wrapping_add(EVAL_SEED_OFFSET),
    )?;
    EvalResult::new(returns, band)
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    best_epoch: Option<usize>,
    aer_mean: f64,
    aer_std: f64,
    performance: Option<f64>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    inputs: Vec<InputHash>,
    band: Option<ReferenceBand>,
    runs: Vec<SeedSummary>,
}

struct SeedRun {
    seed: u64,
    fitted: Fitted,
    eval: EvalResult,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    aer(xs).unwrap_or((f64::NAN, f64::NAN))
}

pub fn train_cmd(config: &RunConfig, config_file: Option<&Path>) -> Result<()> {
    let r = config.resolve()?;
    let (teacher, mut inputs) = load_teacher(&r.teacher, r.env)?;
    if let Some(p) = config_file {
        inputs.push(hash_file(p)?);
    }
    let band = band_for(r.env, &teacher, r.seeds[0])?;

    let mut runs = Vec::with_capacity(r.seeds.len());
    for &seed in &r.seeds {
        log::info!(
            "training {} on {} with seed {seed}",
            config.agent.label(),
            r.env
        );
        let fitted = fit(config, r.env, &teacher, seed)?;
        let eval = evaluate_bundle(&fitted.bundle, r.eval_episodes, seed, Some(&band))?;
        println!(
            "seed {seed}: AER {:.2} ± {:.2} over {} episodes, P {:.3}",
            eval.aer_mean,
            eval.aer_std,
            eval.returns.len(),
            eval.performance.unwrap_or(f64::NAN)
        );
        runs.push(SeedRun { seed, fitted, eval });
    }

    // nothing is written until every run has finished
    fs::create_dir_all(&r.out).map_err(io(&r.out))?;
    let mut results = Vec::new();
    for run in &runs {
        let dir = r.out.join(format!("seed-{}", run.seed));
        run.fitted.bundle.save(&dir.join("model"))?;
        if let Some(log) = &run.fitted.log {
            log.write_csv(&dir.join("metrics.csv"))?;
        }
        write_json(&dir.join("eval.json"), &run.eval)?;
        results.push(ResultRow {
            algorithm: config.agent.label().to_string(),
            env: r.env.to_string(),
            aer_mean: run.eval.aer_mean,
            aer_std: run.eval.aer_std,
            performance: run.eval.performance.unwrap_or(f64::NAN),
        });
    }
    results.extend(
        published_rows()
            .into_iter()
            .filter(|p| p.env == r.env.as_str()),
    );
    write_results(&r.out.join("results.csv"), &results)?;

    if config.agent == Agent::Sail {
        let mut d_acc = Vec::new();
        let mut g_loss = Vec::new();
        let mut perf = Vec::new();
        for run in &runs {
            let (Some(log), Some(best)) = (&run.fitted.log, run.fitted.best_epoch) else {
                continue;
            };
            let rec = &log.records[best - 1];
            d_acc.push(rec.discriminator_accuracy);
            g_loss.push(rec.generator_loss);
            perf.push(run.eval.performance.unwrap_or(f64::NAN));
        }
        let rows: Vec<BehaviourRow> = if d_acc.is_empty() {
            Vec::new()
        } else {
            let (d_mean, d_std) = mean_std(&d_acc);
            vec![BehaviourRow {
                env: r.env.to_string(),
                d_accuracy_mean: d_mean,
                d_accuracy_std: d_std,
                g_loss: mean_std(&g_loss).0,
                policy_performance: mean_std(&perf).0,
            }]
        };
        write_behaviour(&r.out.join("behaviour.csv"), &rows)?;
    }

    let manifest = RunManifest {
        command: "train",
        version: env!("CARGO_PKG_VERSION"),
        config,
        inputs,
        band: Some(band),
        runs: runs
            .iter()
            .map(|run| SeedSummary {
                seed: run.seed,
                best_epoch: run.fitted.best_epoch,
                aer_mean: run.eval.aer_mean,
                aer_std: run.eval.aer_std,
                performance: run.eval.performance,
            })
            .collect(),
    };
    write_json(&r.out.join("run.json"), &manifest)
}

pub enum EvalTarget {
    Model(PathBuf),
    Random,
}

pub struct Evaluate {
    pub target: EvalTarget,
    pub env: Option<EnvName>,
    pub episodes: usize,
    pub seed: u64,
    pub teacher: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalManifest<'a> {
    command: &'a str,
    version: &'a str,
    target: String,
    env: EnvName,
    episodes: usize,
    seed: u64,
    inputs: Vec<InputHash>,
    result: &'a EvalResult,
}

pub fn evaluate_cmd(args: &Evaluate) -> Result<()> {
    if args.episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let mut inputs = Vec::new();
    let (env, label, returns) = match &args.target {
        EvalTarget::Model(dir) => {
            let bundle = ModelBundle::<f64>::load(dir)?;
            if let Some(env) = args.env.filter(|&e| e != bundle.env) {
                return Err(Error::Validation(format!(
                    "model at {} was trained on {}, not {env}",
                    dir.display(),
                    bundle.env
                )));
            }
            inputs.extend(hash_dir(dir)?);
            let returns = evaluate_bundle(&bundle, args.episodes, args.seed, None)?.returns;
            (bundle.env, "model".to_string(), returns)
        }
        EvalTarget::Random => {
            let env = args
                .env
                .ok_or_else(|| Error::Config("--env is required with --baseline random".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(EVAL_SEED_OFFSET));
            (
                env,
                "Random".to_string(),
                run_random(env, args.episodes, &mut rng)?,
            )
        }
    };
    let band = match &args.teacher {
        Some(path) => {
            let (teacher, hashes) = load_teacher(path, env)?;
            inputs.extend(hashes);
            Some(band_for(env, &teacher, args.seed)?)
        }
        None => None,
    };
    let result = EvalResult::new(returns, band.as_ref())?;
    let perf = result
        .performance
        .map(|p| format!(", P {}", fmt_float(p)))
        .unwrap_or_default();
    println!(
        "{label} on {env}: AER {} ± {} over {} episodes (min {}, max {}){perf}",
        fmt_float(result.aer_mean),
        fmt_float(result.aer_std),
        result.returns.len(),
        fmt_float(result.min()),
        fmt_float(result.max()),
    );
    if let Some(out) = &args.out {
        let row = ResultRow {
            algorithm: label.clone(),
            env: env.to_string(),
            aer_mean: result.aer_mean,
            aer_std: result.aer_std,
            performance: result.performance.unwrap_or(f64::NAN),
        };
        write_results(out, &[row])?;
        let manifest = EvalManifest {
            command: "evaluate",
            version: env!("CARGO_PKG_VERSION"),
            target: match &args.target {
                EvalTarget::Model(p) => p.display().to_string(),
                EvalTarget::Random => "random".into(),
            },
            env,
            episodes: args.episodes,
            seed: args.seed,
            inputs,
            result: &result,
        };
        write_json(&out.with_extension("run.json"), &manifest)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    counts: &'a [usize],
    inputs: Vec<InputHash>,
    band: ReferenceBand,
}

/// One training run per teacher-set size, each on the first `n`
/// trajectories of the file. Returns are pooled over seeds.
pub fn sweep_cmd(
    config: &RunConfig,
    config_file: Option<&Path>,
    counts: Option<&[usize]>,
) -> Result<()> {
    let r = config.resolve()?;
    let counts = counts.unwrap_or(&SWEEP_COUNTS);
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::Config("trajectory counts must be positive".into()));
    }
    let (teacher, mut inputs) = load_teacher(&r.teacher, r.env)?;
    if let Some(p) = config_file {
        inputs.push(hash_file(p)?);
    }
    let need = *counts.iter().max().expect("non-empty");
    if teacher.len() < need {
        return Err(Error::Usage(format!(
            "sweep needs {need} teacher trajectories, {} holds {}",
            r.teacher.display(),
            teacher.len()
        )));
    }
    // one band for every count, anchored on the full teacher file
    let band = band_for(r.env, &teacher, r.seeds[0])?;

    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for &n in counts {
        let mut returns = Vec::new();
        for &seed in &r.seeds {
            log::info!("sweep: {n} trajectories, seed {seed}");
            let fitted = fit(config, r.env, &teacher[..n], seed)?;
            let eval = evaluate_bundle(&fitted.bundle, r.eval_episodes, seed, Some(&band))?;
            returns.extend(eval.returns);
            if let Some(log) = fitted.log {
                logs.push((n, seed, log));
            }
        }
        let result = EvalResult::new(returns, Some(&band))?;
        let p = result.performance.expect("band given");
        println!(
            "{n} trajectories: P {p:.3}, AER {:.2} ± {:.2}",
            result.aer_mean, result.aer_std
        );
        rows.push(SweepRow {
            env: r.env.to_string(),
            n_trajectories: n,
            performance: p,
            aer_avg: result.aer_mean,
            aer_min: result.min(),
            aer_max: result.max(),
            sd: result.aer_std,
        });
    }

    fs::create_dir_all(&r.out).map_err(io(&r.out))?;
    for (n, seed, log) in &logs {
        log.write_csv(
            &r.out
                .join(format!("n-{n}"))
                .join(format!("seed-{seed}"))
                .join("metrics.csv"),
        )?;
    }
    write_sweep(&r.out.join("sweep.csv"), &rows)?;
    let manifest = SweepManifest {
        command: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        config,
        counts,
        inputs,
        band,
    };
    write_json(&r.out.join("run.json"), &manifest)
}
