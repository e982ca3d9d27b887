use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use ailrs_core::bc::bc_fit;
use ailrs_core::checkpoint::{Algo, Checkpoint};
use ailrs_core::config::RunConfig;
use ailrs_core::discriminator::Discriminator;
use ailrs_core::eval::{normalize_metrics, run_eval, run_policy_eval, EvalMetrics, ExpertDriver};
use ailrs_core::expert::{generate_demos, DemoDataset};
use ailrs_core::highway::HighwayEnv;
use ailrs_core::persist::write_atomic;
use ailrs_core::trainer::{init_discriminator, train, IterationRecord, TrainerState};

const TRAIN_LOG: &str = "train_log.csv";
const EVAL_REPORT: &str = "eval_report.csv";
const RUN_CONFIG: &str = "run_config.json";
const FINAL_CKPT: &str = "ckpt_final";

#[derive(Parser)]
#[command(
    name = "ailrs",
    version,
    about = "Lane-change imitation learning on a synthetic highway"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record expert demonstrations as JSONL.
    GenExpert {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to `demo_episodes` from the config.
        #[arg(long)]
        episodes: Option<usize>,
        /// Defaults to `train.master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a policy from demonstrations.
    Train {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Evaluate checkpoints against the expert on shared seeds.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// May be given more than once.
        #[arg(long)]
        ckpt: Vec<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot-ready CSVs for a finished run.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Ailrs,
    Bc,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::GenExpert {
            config,
            episodes,
            seed,
            out,
        } => gen_expert(config.as_deref(), episodes, seed, &out),
        Command::Train {
            algo,
            config,
            demos,
            run_dir,
        } => train_cmd(algo, config.as_deref(), demos, run_dir),
        Command::Eval {
            config,
            ckpt,
            episodes,
            seed,
            out,
        } => eval_cmd(config.as_deref(), &ckpt, episodes, seed, &out),
        Command::Report { run_dir } => report(&run_dir),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("AILRS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("AILRS_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn gen_expert(
    config: Option<&Path>,
    episodes: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let episodes = episodes.unwrap_or(cfg.demo_episodes);
    let seed = seed.unwrap_or(cfg.train.master_seed);
    let demos = generate_demos(&cfg.env, &cfg.expert, episodes, seed)?;
    demos.save(out)?;
    info!("wrote {} expert pairs to {}", demos.len(), out.display());
    Ok(())
}

fn train_cmd(
    algo: AlgoArg,
    config: Option<&Path>,
    demos: Option<PathBuf>,
    run_dir: Option<PathBuf>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let demos_path = demos
        .or_else(|| cfg.paths.demos.clone())
        .context("no demonstrations given (pass --demos or set paths.demos)")?;
    let run_dir = run_dir
        .or_else(|| cfg.paths.run_dir.clone())
        .context("no run directory given (pass --run-dir or set paths.run_dir)")?;
    let demos = DemoDataset::load(&demos_path)?;
    if demos.env_config != cfg.env {
        bail!(
            "{} was recorded with a different env config than the run config",
            demos_path.display()
        );
    }
    fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    write_atomic(&run_dir.join(RUN_CONFIG), cfg.to_json_pretty().as_bytes())?;

    let pairs = demos.pairs();
    let seed = cfg.train.master_seed;
    match algo {
        AlgoArg::Bc => {
            let (policy, stats) = bc_fit(&pairs, cfg.bc.ridge)?;
            let ckpt = Checkpoint {
                algo: Algo::Bc,
                iteration: 0,
                policy,
                stats,
                discriminator: None,
                config: cfg.clone(),
                master_seed: seed,
            };
            ckpt.save(&checkpoint_path(&run_dir, FINAL_CKPT))?;
        }
        AlgoArg::Ailrs => {
            let env = HighwayEnv::new(cfg.env.clone())?;
            let disc = init_discriminator(&pairs, cfg.disc.clone(), seed)?;
            let mut state = TrainerState::new(cfg.env.obs_dim(), disc, seed);
            let log_path = run_dir.join(TRAIN_LOG);
            let mut log = csv::Writer::from_path(&log_path)
                .with_context(|| format!("creating {}", log_path.display()))?;
            let mut on_iteration =
                |record: &IterationRecord, state: &TrainerState<Discriminator>| {
                    let mut row = record.clone();
                    if !cfg.record_wall_time {
                        row.wall_ms = 0.0;
                    }
                    log.serialize(&row)
                        .and_then(|()| Ok(log.flush()?))
                        .map_err(|e| {
                            ailrs_core::Error::Data(format!("writing {}: {e}", log_path.display()))
                        })?;
                    info!(
                        "iteration {} mean_return {:.4} disc_loss {:.4}",
                        record.iteration, record.mean_return, record.disc_loss
                    );
                    if state.iteration.is_multiple_of(cfg.train.checkpoint_every) {
                        ailrs_checkpoint(state, &cfg).save(&checkpoint_path(
                            &run_dir,
                            &format!("ckpt_{}", state.iteration),
                        ))?;
                    }
                    Ok(())
                };
            train(&mut state, &pairs, &env, &cfg.train, &mut on_iteration)?;
            ailrs_checkpoint(&state, &cfg).save(&checkpoint_path(&run_dir, FINAL_CKPT))?;
        }
    }
    info!("run written to {}", run_dir.display());
    Ok(())
}

fn ailrs_checkpoint(state: &TrainerState<Discriminator>, cfg: &RunConfig) -> Checkpoint {
    Checkpoint {
        algo: Algo::Ailrs,
        iteration: state.iteration,
        policy: state.policy.clone(),
        stats: state.stats.clone(),
        discriminator: Some(state.reward_model.clone()),
        config: cfg.clone(),
        master_seed: cfg.train.master_seed,
    }
}

fn checkpoint_path(run_dir: &Path, name: &str) -> PathBuf {
    run_dir.join(name).join("checkpoint.json")
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportRow {
    policy_name: String,
    episodes: usize,
    lane_changes_mean: f64,
    lane_change_reward_mean: f64,
    collision_rate: f64,
    count_ratio: f64,
    reward_ratio: f64,
    seed: u64,
}

impl ReportRow {
    fn new(name: String, m: &EvalMetrics, expert: &EvalMetrics) -> Result<ReportRow> {
        let ratios = normalize_metrics(m, expert)?;
        Ok(ReportRow {
            policy_name: name,
            episodes: m.episodes,
            lane_changes_mean: m.lane_change_count,
            lane_change_reward_mean: m.lane_change_reward,
            collision_rate: m.collision_rate,
            count_ratio: ratios.count_ratio,
            reward_ratio: ratios.reward_ratio,
            seed: m.seed,
        })
    }
}

fn eval_cmd(
    config: Option<&Path>,
    ckpts: &[PathBuf],
    episodes: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let episodes = episodes.unwrap_or(cfg.eval.episodes);
    let seed = seed.unwrap_or(cfg.eval.seed);
    let loaded: Vec<(String, Checkpoint)> = ckpts
        .iter()
        .map(|p| {
            let ck = Checkpoint::load(p)?;
            ck.check_compatible(cfg.env.obs_dim())
                .with_context(|| format!("checkpoint {}", p.display()))?;
            Ok((format!("{}:{}", ck.algo, p.display()), ck))
        })
        .collect::<Result<_>>()?;
    let rows = evaluate(&cfg, &loaded, episodes, seed)?;
    write_csv(out, &rows)
}

fn evaluate(
    cfg: &RunConfig,
    policies: &[(String, Checkpoint)],
    episodes: usize,
    seed: u64,
) -> Result<Vec<ReportRow>> {
    let expert_driver = ExpertDriver {
        env: &cfg.env,
        rule: &cfg.expert,
    };
    let expert = run_eval(&cfg.env, &expert_driver, episodes, seed)?;
    let mut rows = vec![ReportRow::new("expert".into(), &expert, &expert)?];
    for (name, ck) in policies {
        let m = run_policy_eval(&cfg.env, &ck.policy, &ck.stats, episodes, seed)?;
        info!("{name}: {m:?}");
        rows.push(ReportRow::new(name.clone(), &m, &expert)?);
    }
    Ok(rows)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().context("flushing csv buffer")?;
    write_atomic(path, &bytes)?;
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    iteration: usize,
    mean_return: f64,
    max_return: f64,
    disc_loss: f64,
    lane_changes: f64,
    lane_change_reward: f64,
}

#[derive(Serialize)]
struct RatioRow {
    policy_name: String,
    count_ratio: f64,
    reward_ratio: f64,
}

/// `training_curve.csv` from the training log (when present) and
/// `lane_change_ratios.csv` from the eval report, evaluating the final
/// checkpoint first if the run has no report yet.
fn report(run_dir: &Path) -> Result<()> {
    let cfg = RunConfig::load(&run_dir.join(RUN_CONFIG))?;
    let log_path = run_dir.join(TRAIN_LOG);
    if log_path.exists() {
        let mut reader = csv::Reader::from_path(&log_path)
            .with_context(|| format!("reading {}", log_path.display()))?;
        let curve = reader
            .deserialize()
            .map(|r| {
                let r: IterationRecord =
                    r.with_context(|| format!("parsing {}", log_path.display()))?;
                Ok(CurveRow {
                    iteration: r.iteration,
                    mean_return: r.mean_return,
                    max_return: r.max_return,
                    disc_loss: r.disc_loss,
                    lane_changes: r.lane_changes,
                    lane_change_reward: r.lane_change_reward,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(&run_dir.join("training_curve.csv"), &curve)?;
    }

    let report_path = run_dir.join(EVAL_REPORT);
    if !report_path.exists() {
        let ckpt_path = checkpoint_path(run_dir, FINAL_CKPT);
        let ck = Checkpoint::load(&ckpt_path)?;
        let name = ck.algo.to_string();
        let rows = evaluate(&cfg, &[(name, ck)], cfg.eval.episodes, cfg.eval.seed)?;
        write_csv(&report_path, &rows)?;
    }
    let mut reader = csv::Reader::from_path(&report_path)
        .with_context(|| format!("reading {}", report_path.display()))?;
    let ratios = reader
        .deserialize()
        .map(|r| {
            let r: ReportRow = r.with_context(|| format!("parsing {}", report_path.display()))?;
            Ok(RatioRow {
                policy_name: r.policy_name,
                count_ratio: r.count_ratio,
                reward_ratio: r.reward_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&run_dir.join("lane_change_ratios.csv"), &ratios)
}
