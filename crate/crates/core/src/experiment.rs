//! Whole runs and seed sweeps: configuration, the two-stage pipeline, and
//! the files each run leaves behind.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{NavEnv, RewardMode, TaskMode, WorldMap};
use crate::error::{Error, Result};
use crate::hf::{run_hf_stage, HfConfig, HfOutcome, HfSeeds, OracleFeedback};
use crate::metrics::{self, derive_seed};
use crate::planner::{check_accuracy, Planner};
use crate::trainer::{evaluate, train, EvalResult, Guidance, RunRow, TrainConfig, TrainOutcome, TrainSeeds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Map file; the built-in benchmark map when absent.
    pub map: Option<PathBuf>,
    /// Accuracy of the simulated feedback channel.
    pub accuracy: f64,
    pub seed: u64,
    pub hf: HfConfig,
    pub train: TrainConfig,
    pub serve: ServeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: None,
            accuracy: 0.7,
            seed: 0,
            hf: HfConfig::default(),
            train: TrainConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

/// Timing of a live feedback session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    /// Time between consecutive frames.
    pub action_period_ms: u64,
    /// How long a frame accepts feedback; the action period when absent.
    pub feedback_window_ms: Option<u64>,
    /// Wall-clock cap on one session.
    pub max_session_secs: u64,
    /// Send a `stats` message after every this many labels.
    pub stats_every: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig { action_period_ms: 1500, feedback_window_ms: None, max_session_secs: 3600, stats_every: 1 }
    }
}

impl ServeConfig {
    pub fn window_ms(&self) -> u64 {
        self.feedback_window_ms.unwrap_or(self.action_period_ms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.action_period_ms == 0 {
            return Err(Error::config("serve.action_period_ms", "must be positive"));
        }
        if self.window_ms() == 0 || self.window_ms() > self.action_period_ms {
            return Err(Error::config("serve.feedback_window_ms", "must be positive and no longer than the action period"));
        }
        if self.max_session_secs == 0 || self.stats_every == 0 {
            return Err(Error::config("serve", "max_session_secs and stats_every must be positive"));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_accuracy(self.accuracy)?;
        self.hf.validate()?;
        self.train.validate()?;
        self.serve.validate()
    }

    pub fn load_map(&self) -> Result<WorldMap> {
        match &self.map {
            Some(path) => WorldMap::load(path),
            None => Ok(WorldMap::benchmark()),
        }
    }

    pub fn hf_seeds(&self) -> HfSeeds {
        HfSeeds::derive(derive_seed(self.seed, "hf"))
    }

    pub fn train_seeds(&self) -> TrainSeeds {
        TrainSeeds::derive(derive_seed(self.seed, "rl"))
    }

    pub fn hf_eval_seed(&self) -> u64 {
        derive_seed(self.seed, "hf/eval")
    }
}

/// Feedback stage against the simulated oracle, followed by a greedy
/// evaluation of the resulting `π_HF`.
pub fn run_oracle_hf(map: &Arc<WorldMap>, planner: &Planner, cfg: &ExperimentConfig) -> Result<(HfOutcome, EvalResult)> {
    let seeds = cfg.hf_seeds();
    let mut env = NavEnv::new(Arc::clone(map), cfg.train.task);
    let mut oracle = OracleFeedback::new(planner, cfg.accuracy, seeds.oracle)?;
    let outcome = run_hf_stage(&mut env, &mut oracle, &cfg.hf, seeds).map_err(|e| e.cause)?;
    let eval = evaluate_hf(map, planner, cfg, &outcome)?;
    Ok((outcome, eval))
}

pub fn evaluate_hf(map: &Arc<WorldMap>, planner: &Planner, cfg: &ExperimentConfig, hf: &HfOutcome) -> Result<EvalResult> {
    let mut model = hf.model.clone();
    evaluate(
        &mut model,
        map,
        cfg.train.task,
        cfg.train.reward,
        planner,
        cfg.train.eval_episodes,
        cfg.hf_eval_seed(),
    )
}

pub struct RunArtifacts {
    pub hf: Option<(HfOutcome, EvalResult)>,
    pub train: TrainOutcome,
}

/// The full pipeline for one seed: an oracle feedback stage when guided,
/// then PPO training.
pub fn run_experiment(map: &Arc<WorldMap>, planner: &Planner, cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let hf = match cfg.train.guidance {
        Guidance::Hf => Some(run_oracle_hf(map, planner, cfg)?),
        Guidance::None => None,
    };
    let train = train(map, planner, &cfg.train, hf.as_ref().map(|(o, _)| &o.model), cfg.train_seeds())?;
    Ok(RunArtifacts { hf, train })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'static str,
    pub map_hash: String,
    pub config: &'a T,
    pub seeds: serde_json::Value,
    pub outputs: Vec<String>,
    pub excluded_eval_episodes: usize,
}

pub fn seeds_json(cfg: &ExperimentConfig) -> serde_json::Value {
    let hf = cfg.hf_seeds();
    let rl = cfg.train_seeds();
    serde_json::json!({
        "master": cfg.seed,
        "hf": { "init": hf.init, "env": hf.env, "replay": hf.replay, "explore": hf.explore, "oracle": hf.oracle },
        "hf_eval": cfg.hf_eval_seed(),
        "rl": {
            "init": rl.init, "env": rl.env, "policy": rl.policy,
            "select": rl.select, "minibatch": rl.minibatch, "eval": rl.eval
        },
    })
}

pub fn write_hf_outputs(dir: &Path, outcome: &HfOutcome) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    metrics::write_csv(&dir.join("hf_stats.csv"), &outcome.stats)?;
    outcome.model.net().save(&dir.join("hf_model.json"))?;
    Ok(vec!["hf_stats.csv".into(), "hf_model.json".into()])
}

/// Writes logs, checkpoints and the manifest of one run into `dir`.
pub fn write_run(dir: &Path, map: &WorldMap, cfg: &ExperimentConfig, run: &RunArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    let mut excluded = run.train.final_eval.excluded;
    if let Some((outcome, eval)) = &run.hf {
        outputs.extend(write_hf_outputs(dir, outcome)?);
        metrics::write_json(&dir.join("hf_eval.json"), eval)?;
        outputs.push("hf_eval.json".into());
        excluded += eval.excluded;
    }
    metrics::write_csv(&dir.join("run_log.csv"), &run.train.log.rows)?;
    metrics::write_csv(&dir.join("episodes.csv"), &run.train.log.episodes)?;
    run.train.agent.policy_net().save(&dir.join("policy.json"))?;
    run.train.agent.value_net().save(&dir.join("value.json"))?;
    outputs.extend(["run_log.csv", "episodes.csv", "policy.json", "value.json"].map(String::from));
    let manifest = Manifest {
        command: "train-rl",
        version: env!("CARGO_PKG_VERSION"),
        map_hash: map.content_hash(),
        config: cfg,
        seeds: seeds_json(cfg),
        outputs,
        excluded_eval_episodes: excluded,
    };
    metrics::write_json(&dir.join("manifest.json"), &manifest)
}

/// One cell of a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub name: String,
    pub task: TaskMode,
    pub reward: RewardMode,
    pub guidance: Guidance,
    #[serde(default)]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub conditions: Vec<Condition>,
    /// Runs per condition. Run `i` of every condition shares the same seed.
    pub seeds: usize,
    /// Worker threads; 0 uses all cores.
    pub parallelism: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { base: ExperimentConfig::default(), conditions: Vec::new(), seeds: 10, parallelism: 0 }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.conditions.is_empty() {
            return Err(Error::config("conditions", "a sweep needs at least one condition"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "must be positive"));
        }
        let mut names: Vec<&str> = self.conditions.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("conditions", "condition names must be unique"));
        }
        for c in &self.conditions {
            if let Some(a) = c.accuracy {
                check_accuracy(a)?;
            }
        }
        Ok(())
    }

    pub fn run_seed(&self, index: usize) -> u64 {
        derive_seed(self.base.seed, &format!("run/{index}"))
    }

    /// The experiment configuration of run `index` of `condition`.
    pub fn job(&self, condition: &Condition, index: usize) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        cfg.seed = self.run_seed(index);
        cfg.train.task = condition.task;
        cfg.train.reward = condition.reward;
        cfg.train.guidance = condition.guidance;
        if let Some(a) = condition.accuracy {
            cfg.accuracy = a;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub condition: String,
    pub run: usize,
    pub seed: u64,
    pub final_spl: Option<f64>,
    pub final_success: Option<f64>,
    pub hf_spl: Option<f64>,
    pub hf_success: Option<f64>,
    pub hf_val_accuracy: Option<f64>,
    pub error: Option<String>,
}

/// Mean and population standard deviation of evaluation SPL across the
/// runs of one condition at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub condition: String,
    pub env_steps: u64,
    pub runs: usize,
    pub spl_mean: f64,
    pub spl_std: f64,
    pub success_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub runs: usize,
    pub failed: usize,
    pub spl_mean: Option<f64>,
    pub spl_std: Option<f64>,
    pub success_mean: Option<f64>,
    pub hf_spl_mean: Option<f64>,
    pub hf_spl_std: Option<f64>,
}

pub struct SweepResult {
    pub runs: Vec<RunSummary>,
    pub curves: Vec<CurvePoint>,
    pub conditions: Vec<ConditionSummary>,
}

impl SweepResult {
    pub fn condition(&self, name: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.condition == name)
    }

    pub fn runs_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RunSummary> + 'a {
        self.runs.iter().filter(move |r| r.condition == name)
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }
}

pub fn summarize(run: usize, condition: &Condition, cfg: &ExperimentConfig, artifacts: &RunArtifacts) -> RunSummary {
    let eval = &artifacts.train.final_eval;
    RunSummary {
        condition: condition.name.clone(),
        run,
        seed: cfg.seed,
        final_spl: Some(eval.spl),
        final_success: Some(eval.success_rate),
        hf_spl: artifacts.hf.as_ref().map(|(_, e)| e.spl),
        hf_success: artifacts.hf.as_ref().map(|(_, e)| e.success_rate),
        hf_val_accuracy: artifacts.hf.as_ref().and_then(|(o, _)| o.stats.last().and_then(|s| s.val_accuracy)),
        error: None,
    }
}

fn failed(run: usize, condition: &Condition, cfg: &ExperimentConfig, err: &Error) -> RunSummary {
    RunSummary {
        condition: condition.name.clone(),
        run,
        seed: cfg.seed,
        final_spl: None,
        final_success: None,
        hf_spl: None,
        hf_success: None,
        hf_val_accuracy: None,
        error: Some(err.to_string()),
    }
}

/// Per-checkpoint statistics of every condition, from the learning curves
/// of its successful runs. Runs are grouped by position in the log, so
/// all of them must share one evaluation schedule.
pub fn aggregate_curves(conditions: &[Condition], curves: &[(String, Vec<RunRow>)]) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for c in conditions {
        let mine: Vec<&Vec<RunRow>> = curves.iter().filter(|(n, _)| *n == c.name).map(|(_, r)| r).collect();
        let Some(first) = mine.first() else { continue };
        for (k, row) in first.iter().enumerate() {
            let spl: Vec<f64> = mine.iter().filter_map(|r| r.get(k)).map(|r| r.eval_spl).collect();
            let success: Vec<f64> = mine.iter().filter_map(|r| r.get(k)).map(|r| r.eval_success).collect();
            let (spl_mean, spl_std) = metrics::mean_std(&spl).expect("at least one run");
            out.push(CurvePoint {
                condition: c.name.clone(),
                env_steps: row.env_steps,
                runs: spl.len(),
                spl_mean,
                spl_std,
                success_mean: metrics::mean_std(&success).expect("at least one run").0,
            });
        }
    }
    out
}

pub fn aggregate(conditions: &[Condition], runs: &[RunSummary]) -> Vec<ConditionSummary> {
    conditions
        .iter()
        .map(|c| {
            let mine: Vec<&RunSummary> = runs.iter().filter(|r| r.condition == c.name).collect();
            let spl: Vec<f64> = mine.iter().filter_map(|r| r.final_spl).collect();
            let success: Vec<f64> = mine.iter().filter_map(|r| r.final_success).collect();
            let hf: Vec<f64> = mine.iter().filter_map(|r| r.hf_spl).collect();
            let spl_stats = metrics::mean_std(&spl);
            let hf_stats = metrics::mean_std(&hf);
            ConditionSummary {
                condition: c.name.clone(),
                runs: mine.len(),
                failed: mine.iter().filter(|r| r.error.is_some()).count(),
                spl_mean: spl_stats.map(|(m, _)| m),
                spl_std: spl_stats.map(|(_, s)| s),
                success_mean: metrics::mean_std(&success).map(|(m, _)| m),
                hf_spl_mean: hf_stats.map(|(m, _)| m),
                hf_spl_std: hf_stats.map(|(_, s)| s),
            }
        })
        .collect()
}

/// Runs every (condition, seed) pair, in parallel when allowed. Results
/// are ordered by condition then run index regardless of scheduling. A
/// failing run is recorded and the sweep carries on.
///
/// When `out_dir` is given each run writes its files to
/// `<out_dir>/<condition>/run_<i>` and the sweep writes `runs.csv`,
/// `summary.csv` and the per-checkpoint `aggregate.csv`.
pub fn run_sweep(sweep: &SweepConfig, out_dir: Option<&Path>) -> Result<SweepResult> {
    sweep.validate()?;
    let map = Arc::new(sweep.base.load_map()?);
    let planner = Planner::new(Arc::clone(&map));
    let jobs: Vec<(usize, &Condition)> =
        sweep.conditions.iter().flat_map(|c| (0..sweep.seeds).map(move |i| (i, c))).collect();

    let work = |&(i, c): &(usize, &Condition)| -> (RunSummary, Option<Vec<RunRow>>) {
        let cfg = sweep.job(c, i);
        let outcome = run_experiment(&map, &planner, &cfg).and_then(|artifacts| {
            if let Some(dir) = out_dir {
                write_run(&dir.join(&c.name).join(format!("run_{i}")), &map, &cfg, &artifacts)?;
            }
            Ok(artifacts)
        });
        match outcome {
            Ok(artifacts) => (summarize(i, c, &cfg, &artifacts), Some(artifacts.train.log.rows)),
            Err(e) => {
                log::warn!("{} run {i} failed: {e}", c.name);
                (failed(i, c, &cfg, &e), None)
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.parallelism)
        .build()
        .map_err(|e| Error::config("parallelism", e.to_string()))?;
    let results: Vec<(RunSummary, Option<Vec<RunRow>>)> = pool.install(|| jobs.par_iter().map(work).collect());

    let mut runs = Vec::with_capacity(results.len());
    let mut logs = Vec::new();
    for (summary, rows) in results {
        if let Some(rows) = rows {
            logs.push((summary.condition.clone(), rows));
        }
        runs.push(summary);
    }
    let curves = aggregate_curves(&sweep.conditions, &logs);
    let conditions = aggregate(&sweep.conditions, &runs);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        metrics::write_csv(&dir.join("runs.csv"), &runs)?;
        metrics::write_csv(&dir.join("summary.csv"), &conditions)?;
        metrics::write_csv(&dir.join("aggregate.csv"), &curves)?;
        let manifest = Manifest {
            command: "sweep",
            version: env!("CARGO_PKG_VERSION"),
            map_hash: map.content_hash(),
            config: sweep,
            seeds: serde_json::json!((0..sweep.seeds).map(|i| sweep.run_seed(i)).collect::<Vec<_>>()),
            outputs: vec!["runs.csv".into(), "summary.csv".into(), "aggregate.csv".into()],
            excluded_eval_episodes: 0,
        };
        metrics::write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(SweepResult { runs, curves, conditions })
}
