//! `hfnav`: train, sweep, evaluate and serve feedback-guided navigation agents.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hfnav::env::{RewardMode, TaskMode, WorldMap};
use hfnav::error::{Error, Result};
use hfnav::experiment::{self, Condition, ExperimentConfig, Manifest, SweepConfig};
use hfnav::hf::{HfModel, StageEnd};
use hfnav::metrics::{self, derive_seed};
use hfnav::nn::DenseNet;
use hfnav::planner::Planner;
use hfnav::trainer::{evaluate, train, Controller, Guidance, NetPolicy, OracleController};
use hfnav_gateway::{Server, SessionConfig, SessionEnd};
use serde::Serialize;

/// Output root used when `--out` is not given.
const OUT_ENV: &str = "HFNAV_OUT";

#[derive(Parser)]
#[command(name = "hfnav", version, about = "Human-feedback-guided PPO for sparse-reward navigation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a feedback policy from the simulated oracle or a live client.
    TrainHf {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Source::Oracle)]
        source: Source,
        /// Listen address for `--source gateway`.
        #[arg(long, default_value = "127.0.0.1:8765")]
        bind: String,
    },
    /// Train PPO, optionally guided by a saved feedback policy.
    TrainRl {
        #[command(flatten)]
        common: Common,
        /// Feedback-policy checkpoint; required with `--guidance hf`.
        #[arg(long)]
        hf_checkpoint: Option<PathBuf>,
    },
    /// Feedback stage then PPO for every accuracy and seed, aggregated.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Oracle accuracies to sweep; ignored without guidance.
        #[arg(long, value_delimiter = ',', default_values_t = [0.55, 0.6, 0.7])]
        accuracies: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
    },
    /// Score a saved policy, or the planner itself, over fresh episodes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// Follow the shortest-path planner instead of a checkpoint.
        #[arg(long)]
        oracle: bool,
        /// Episodes to run; the configured evaluation count when absent.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run live feedback sessions until interrupted.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Stop after this many sessions.
        #[arg(long)]
        sessions: Option<u64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    Oracle,
    Gateway,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    accuracy: Option<f64>,
    #[arg(long)]
    task: Option<TaskMode>,
    #[arg(long)]
    reward: Option<RewardMode>,
    #[arg(long)]
    guidance: Option<Guidance>,
    #[arg(long)]
    total_steps: Option<u64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    t_hf: Option<usize>,
    /// Output directory; defaults to `$HFNAV_OUT`, then `./runs`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    /// Configuration file merged with flag overrides, validated.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.map {
            cfg.map = Some(v.clone());
        }
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(accuracy => accuracy);
        set!(task => train.task);
        set!(reward => train.reward);
        set!(guidance => train.guidance);
        set!(total_steps => train.total_steps);
        set!(eval_every => train.eval_every);
        set!(eval_episodes => train.eval_episodes);
        set!(t_hf => hf.t_hf);
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Json(_) => 2,
        Error::SessionAborted(_) => 3,
        Error::Io(_) | Error::Csv(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::TrainHf { common, source, bind } => train_hf(&common, source, &bind),
        Cmd::TrainRl { common, hf_checkpoint } => train_rl(&common, hf_checkpoint.as_deref()),
        Cmd::Sweep { common, accuracies, seeds, parallelism } => sweep(&common, &accuracies, seeds, parallelism),
        Cmd::Eval { common, checkpoint, oracle, episodes } => eval(&common, checkpoint.as_deref(), oracle, episodes),
        Cmd::Serve { common, host, port, sessions } => serve(&common, &format!("{host}:{port}"), sessions),
    }
}

fn manifest<T: Serialize>(dir: &Path, command: &str, map: &WorldMap, cfg: &T, outputs: Vec<String>) -> Result<()> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        map_hash: map.content_hash(),
        config: cfg,
        seeds: serde_json::Value::Null,
        outputs,
        excluded_eval_episodes: 0,
    };
    metrics::write_json(&dir.join("manifest.json"), &manifest)
}

fn session_config(cfg: &ExperimentConfig, map: Arc<WorldMap>, out: &Path) -> SessionConfig {
    SessionConfig { map, task: cfg.train.task, hf: cfg.hf.clone(), seeds: cfg.hf_seeds(), timing: cfg.serve, out_dir: out.to_path_buf() }
}

fn train_hf(common: &Common, source: Source, bind: &str) -> Result<()> {
    let cfg = common.resolve()?;
    let out = common.out_dir();
    std::fs::create_dir_all(&out)?;
    let map = Arc::new(cfg.load_map()?);
    if source == Source::Gateway {
        let server = Server::bind(bind, session_config(&cfg, Arc::clone(&map), &out))?;
        log::info!("waiting for a feedback client on ws://{}", server.local_addr()?);
        let report = server.serve(Some(1))?.remove(0);
        manifest(&out, "train-hf", &map, &cfg, vec!["session_000".into()])?;
        return match report.end {
            SessionEnd::Aborted => Err(Error::SessionAborted(report.abort_reason.unwrap_or_default())),
            _ => Ok(()),
        };
    }
    let planner = Planner::new(Arc::clone(&map));
    let (outcome, eval) = experiment::run_oracle_hf(&map, &planner, &cfg)?;
    let mut outputs = experiment::write_hf_outputs(&out, &outcome)?;
    metrics::write_json(&out.join("hf_eval.json"), &eval)?;
    outputs.push("hf_eval.json".into());
    let mut m = serde_json::to_value(Manifest {
        command: "train-hf",
        version: env!("CARGO_PKG_VERSION"),
        map_hash: map.content_hash(),
        config: &cfg,
        seeds: experiment::seeds_json(&cfg),
        outputs,
        excluded_eval_episodes: eval.excluded,
    })?;
    m["stage_end"] = serde_json::to_value(outcome.end)?;
    metrics::write_json(&out.join("manifest.json"), &m)?;
    log::info!("feedback policy: SPL {:.3}, success {:.2}", eval.spl, eval.success_rate);
    match outcome.end {
        StageEnd::Completed => Ok(()),
        StageEnd::StoppedBySource => Err(Error::SessionAborted("feedback stage stopped early".into())),
    }
}

fn train_rl(common: &Common, hf_checkpoint: Option<&Path>) -> Result<()> {
    let cfg = common.resolve()?;
    let hf = match (cfg.train.guidance, hf_checkpoint) {
        (Guidance::Hf, None) => return Err(Error::config("hf_checkpoint", "guidance hf needs --hf-checkpoint")),
        (Guidance::Hf, Some(path)) => Some(HfModel::from_net(load_net(path)?).map_err(|e| Error::config("hf_checkpoint", e.to_string()))?),
        (Guidance::None, _) => None,
    };
    let out = common.out_dir();
    std::fs::create_dir_all(&out)?;
    let map = Arc::new(cfg.load_map()?);
    let planner = Planner::new(Arc::clone(&map));
    let run = train(&map, &planner, &cfg.train, hf.as_ref(), cfg.train_seeds())?;
    let artifacts = experiment::RunArtifacts { hf: None, train: run };
    experiment::write_run(&out, &map, &cfg, &artifacts)?;
    let last = &artifacts.train.final_eval;
    log::info!("final SPL {:.3}, success {:.2}", last.spl, last.success_rate);
    Ok(())
}

fn load_net(path: &Path) -> Result<DenseNet> {
    DenseNet::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(io),
        other => Error::config("checkpoint", format!("{}: {other}", path.display())),
    })
}

fn sweep(common: &Common, accuracies: &[f64], seeds: usize, parallelism: usize) -> Result<()> {
    let base = common.resolve()?;
    let t = &base.train;
    let conditions = match t.guidance {
        Guidance::Hf => accuracies
            .iter()
            .map(|&c| Condition { name: format!("c{c}"), task: t.task, reward: t.reward, guidance: Guidance::Hf, accuracy: Some(c) })
            .collect(),
        Guidance::None => vec![Condition { name: format!("{}-{}", format!("{:?}", t.reward).to_lowercase(), t.task), task: t.task, reward: t.reward, guidance: Guidance::None, accuracy: None }],
    };
    let sweep = SweepConfig { base, conditions, seeds, parallelism };
    let out = common.out_dir();
    let result = experiment::run_sweep(&sweep, Some(&out))?;
    for c in &result.conditions {
        log::info!("{}: SPL {:?} ± {:?} over {} runs ({} failed)", c.condition, c.spl_mean, c.spl_std, c.runs, c.failed);
    }
    Ok(())
}

fn eval(common: &Common, checkpoint: Option<&Path>, oracle: bool, episodes: Option<usize>) -> Result<()> {
    let cfg = common.resolve()?;
    let episodes = episodes.unwrap_or(cfg.train.eval_episodes);
    if episodes == 0 {
        return Err(Error::config("episodes", "must be positive"));
    }
    let map = Arc::new(cfg.load_map()?);
    let planner = Planner::new(Arc::clone(&map));
    let seed = derive_seed(cfg.seed, "eval");
    let result = if oracle {
        let mut ctrl = OracleController(&planner);
        evaluate(&mut ctrl, &map, cfg.train.task, cfg.train.reward, &planner, episodes, seed)?
    } else {
        let path = checkpoint.expect("clap requires a checkpoint without --oracle");
        let mut ctrl = NetPolicy::new(load_net(path)?)?;
        evaluate(&mut ctrl as &mut dyn Controller, &map, cfg.train.task, cfg.train.reward, &planner, episodes, seed)?
    };
    let report = serde_json::json!({
        "spl": result.spl,
        "success_rate": result.success_rate,
        "mean_return": result.mean_return,
        "episodes": result.outcomes.len(),
        "excluded": result.excluded,
        "map_hash": map.content_hash(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    let out = common.out_dir();
    std::fs::create_dir_all(&out)?;
    metrics::write_json(&out.join("eval.json"), &report)
}

fn serve(common: &Common, addr: &str, sessions: Option<u64>) -> Result<()> {
    let cfg = common.resolve()?;
    let out = common.out_dir();
    std::fs::create_dir_all(&out)?;
    let map = Arc::new(cfg.load_map()?);
    let server = Server::bind(addr, session_config(&cfg, Arc::clone(&map), &out))?;
    log::info!("serving feedback sessions on ws://{}", server.local_addr()?);
    manifest(&out, "serve", &map, &cfg, Vec::new())?;
    let reports = server.serve(sessions)?;
    log::info!("{} sessions served", reports.len());
    Ok(())
}
