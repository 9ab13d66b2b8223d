//! PPO training with optional guidance from a frozen feedback policy, and
//! greedy evaluation.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, NavEnv, RewardMode, TaskMode, Terminal, WorldMap, OBS_DIM};
use crate::error::{Error, Result};
use crate::hf::HfModel;
use crate::metrics::{self, derive_seed, EpisodeOutcome};
use crate::nn::DenseNet;
use crate::planner::Planner;
use crate::ppo::{Greedy, LossParts, PpoAgent, PpoConfig, Rollout};

/// Anything that can drive the robot for one step.
pub trait Controller {
    fn decide(&mut self, env: &NavEnv) -> Result<Action>;
}

/// Greedy controller over a saved network: the action with the largest output.
pub struct NetPolicy(DenseNet);

impl NetPolicy {
    pub fn new(net: DenseNet) -> Result<NetPolicy> {
        if net.input_dim() != OBS_DIM || net.output_dim() != 3 {
            return Err(Error::config("checkpoint", "a policy network maps 13 inputs to 3 action scores"));
        }
        Ok(NetPolicy(net))
    }
}

impl Controller for NetPolicy {
    fn decide(&mut self, env: &NavEnv) -> Result<Action> {
        let out = self.0.predict(&env.observation().normalized(env.map()))?;
        Ok(Action::from_index(crate::hf::argmax(&out)).expect("three outputs"))
    }
}

/// Follows a shortest path, preferring the lowest-index optimal action.
pub struct OracleController<'p>(pub &'p Planner);

impl Controller for OracleController<'_> {
    fn decide(&mut self, env: &NavEnv) -> Result<Action> {
        let plan = self.0.plan(&env.pose())?;
        Ok(plan.optimal_actions.iter().next().unwrap_or(Action::Forward))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guidance {
    None,
    Hf,
}

impl std::str::FromStr for Guidance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Guidance> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Guidance::None),
            "hf" => Ok(Guidance::Hf),
            _ => Err(Error::config("guidance", format!("expected none or hf, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Rl,
    Hf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub task: TaskMode,
    pub reward: RewardMode,
    pub guidance: Guidance,
    /// Probability of an HF-driven episode at step 0.
    pub eps_start: f64,
    /// Guidance ends after this fraction of `total_steps`.
    pub transition_fraction: f64,
    /// Whether episodes driven by the feedback policy are used for PPO updates.
    pub learn_from_hf_episodes: bool,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 200_000,
            eval_every: 5_000,
            eval_episodes: 20,
            task: TaskMode::Sssg,
            reward: RewardMode::Sparse,
            guidance: Guidance::None,
            eps_start: 0.8,
            transition_fraction: 0.5,
            learn_from_hf_episodes: true,
            ppo: PpoConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::config("train.total_steps", "must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("train.eval_every", "must be positive"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("train.eval_episodes", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.eps_start) {
            return Err(Error::config("train.eps_start", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.transition_fraction) {
            return Err(Error::config("train.transition_fraction", "must lie in [0, 1]"));
        }
        self.ppo.validate()
    }

    pub fn t_trans(&self) -> f64 {
        self.transition_fraction * self.total_steps as f64
    }

    pub fn epsilon(&self, steps: u64) -> f64 {
        epsilon_hf(steps, self.eps_start, self.t_trans())
    }
}

/// `max(0, ε₀ · (1 − steps / t_trans))`; zero once guidance has ended.
pub fn epsilon_hf(steps: u64, eps_start: f64, t_trans: f64) -> f64 {
    if t_trans <= 0.0 {
        return 0.0;
    }
    (eps_start * (1.0 - steps as f64 / t_trans)).max(0.0)
}

/// Picks the behavior policy for a whole episode. Unguided runs never
/// consume randomness here.
pub fn select_behavior<R: Rng + ?Sized>(guidance: Guidance, epsilon: f64, rng: &mut R) -> Behavior {
    match guidance {
        Guidance::None => Behavior::Rl,
        Guidance::Hf if rng.gen::<f64>() < epsilon => Behavior::Hf,
        Guidance::Hf => Behavior::Rl,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub spl: f64,
    pub success_rate: f64,
    pub mean_return: f64,
    pub outcomes: Vec<EpisodeOutcome>,
    /// Episodes whose start had no path to the goal; not scored.
    pub excluded: usize,
}

/// Runs `episodes` episodes with `controller` and scores them against
/// shortest paths from each realized start.
pub fn evaluate(
    controller: &mut dyn Controller,
    map: &Arc<WorldMap>,
    task: TaskMode,
    reward: RewardMode,
    planner: &Planner,
    episodes: usize,
    seed: u64,
) -> Result<EvalResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = NavEnv::new(Arc::clone(map), task);
    let mut outcomes = Vec::with_capacity(episodes);
    let mut returns = Vec::with_capacity(episodes);
    let mut excluded = 0;
    for _ in 0..episodes {
        env.reset(&mut rng);
        let oracle_steps = match planner.shortest_steps(&env.pose()) {
            Ok(steps) => steps,
            Err(Error::Unreachable { .. }) => {
                excluded += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut ret = 0.0;
        let result = loop {
            let action = controller.decide(&env)?;
            let r = env.step(action)?;
            ret += reward.select(&r);
            if r.terminal.is_terminal() {
                break r;
            }
        };
        outcomes.push(EpisodeOutcome {
            success: result.terminal == Terminal::Goal,
            agent_steps: result.step as u32,
            oracle_steps,
        });
        returns.push(ret);
    }
    Ok(EvalResult {
        spl: metrics::spl(&outcomes)?,
        success_rate: metrics::success_rate(&outcomes)?,
        mean_return: metrics::mean_return(&returns)?,
        outcomes,
        excluded,
    })
}

/// One evaluation point of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub env_steps: u64,
    pub episodes: u64,
    pub epsilon_hf: f64,
    /// Mean training return of episodes finished since the previous row.
    pub train_return_mean: Option<f64>,
    pub eval_spl: f64,
    pub eval_success: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: u64,
    pub start_step: u64,
    pub behavior: Behavior,
    pub epsilon_hf: f64,
    pub length: u32,
    pub train_return: f64,
    pub success: bool,
    /// False when the episode was not used for a PPO update.
    pub learned: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub rows: Vec<RunRow>,
    pub episodes: Vec<EpisodeTrace>,
}

impl RunLog {
    pub fn final_row(&self) -> Option<&RunRow> {
        self.rows.last()
    }

    /// Rows with wall-clock time zeroed, for reproducibility comparisons.
    pub fn timeless_rows(&self) -> Vec<RunRow> {
        self.rows.iter().map(|r| RunRow { wall_ms: 0, ..*r }).collect()
    }
}

pub struct TrainOutcome {
    pub agent: PpoAgent,
    pub log: RunLog,
    pub final_eval: EvalResult,
}

/// Independent random streams of one training run.
#[derive(Debug, Clone, Copy)]
pub struct TrainSeeds {
    pub init: u64,
    pub env: u64,
    pub policy: u64,
    pub select: u64,
    pub minibatch: u64,
    pub eval: u64,
}

impl TrainSeeds {
    pub fn derive(seed: u64) -> TrainSeeds {
        TrainSeeds {
            init: derive_seed(seed, "rl/init"),
            env: derive_seed(seed, "rl/env"),
            policy: derive_seed(seed, "rl/policy"),
            select: derive_seed(seed, "rl/select"),
            minibatch: derive_seed(seed, "rl/minibatch"),
            eval: derive_seed(seed, "rl/eval"),
        }
    }
}

/// Trains a fresh PPO agent for `total_steps` environment steps.
///
/// With HF guidance each episode is driven entirely by `hf` with
/// probability `ε_HF(steps at episode start)`. Such episodes store the
/// learner's own log-probability of the HF action as the behavior
/// log-probability, so they enter PPO like on-policy data.
pub fn train(
    map: &Arc<WorldMap>,
    planner: &Planner,
    cfg: &TrainConfig,
    hf: Option<&HfModel>,
    seeds: TrainSeeds,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.guidance == Guidance::Hf && hf.is_none() {
        return Err(Error::config("train.guidance", "hf guidance needs a feedback model"));
    }
    let started = Instant::now();
    let mut agent = PpoAgent::new(cfg.ppo, &mut ChaCha8Rng::seed_from_u64(seeds.init))?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(seeds.env);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seeds.policy);
    let mut select_rng = ChaCha8Rng::seed_from_u64(seeds.select);
    let mut mb_rng = ChaCha8Rng::seed_from_u64(seeds.minibatch);
    let mut env = NavEnv::new(Arc::clone(map), cfg.task);
    let mut log = RunLog::default();
    let mut recent_returns = Vec::new();
    let mut steps = 0u64;
    let mut eval_round = 0u64;

    let mut record = |agent: &PpoAgent, steps: u64, episodes: u64, recent: &mut Vec<f64>, log: &mut RunLog| -> Result<EvalResult> {
        eval_round += 1;
        let eval = evaluate(
            &mut Greedy(agent),
            map,
            cfg.task,
            cfg.reward,
            planner,
            cfg.eval_episodes,
            derive_seed(seeds.eval, &eval_round.to_string()),
        )?;
        log.rows.push(RunRow {
            env_steps: steps,
            episodes,
            epsilon_hf: if cfg.guidance == Guidance::Hf { cfg.epsilon(steps) } else { 0.0 },
            train_return_mean: metrics::mean_return(recent).ok(),
            eval_spl: eval.spl,
            eval_success: eval.success_rate,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        recent.clear();
        Ok(eval)
    };

    while steps < cfg.total_steps {
        let epsilon = if cfg.guidance == Guidance::Hf { cfg.epsilon(steps) } else { 0.0 };
        let behavior = select_behavior(cfg.guidance, epsilon, &mut select_rng);
        let start_step = steps;
        env.reset(&mut env_rng);
        let mut rollout = Rollout::default();
        let last = loop {
            let obs = env.observation().normalized(env.map());
            let (action, logp) = match (behavior, hf) {
                (Behavior::Hf, Some(model)) => {
                    let a = model.pi_hf(&obs);
                    (a, agent.log_probs(&obs)[a.index()])
                }
                _ => agent.act(&obs, &mut policy_rng),
            };
            let r = env.step(action)?;
            rollout.push(obs, action, logp, cfg.reward.select(&r));
            steps += 1;
            if steps % cfg.eval_every == 0 && steps < cfg.total_steps {
                record(&agent, steps, log.episodes.len() as u64, &mut recent_returns, &mut log)?;
            }
            if r.terminal.is_terminal() || steps >= cfg.total_steps {
                break r;
            }
        };
        rollout.final_obs = last.observation.normalized(env.map());
        rollout.terminated = matches!(last.terminal, Terminal::Goal | Terminal::Collision);
        let learned = behavior == Behavior::Rl || cfg.learn_from_hf_episodes;
        if learned {
            let parts: LossParts = agent.update(&rollout, &mut mb_rng)?;
            log::trace!(
                "episode {} len {} return {:.1} policy {:.4} value {:.3} entropy {:.4} kl {:.5} clip {:.3}",
                log.episodes.len(),
                rollout.len(),
                rollout.total_reward(),
                parts.policy,
                parts.value,
                parts.entropy,
                parts.approx_kl,
                parts.clip_fraction
            );
        }
        recent_returns.push(rollout.total_reward());
        log.episodes.push(EpisodeTrace {
            episode: log.episodes.len() as u64,
            start_step,
            behavior,
            epsilon_hf: epsilon,
            length: rollout.len() as u32,
            train_return: rollout.total_reward(),
            success: last.terminal == Terminal::Goal,
            learned,
        });
    }
    let final_eval = record(&agent, steps, log.episodes.len() as u64, &mut recent_returns, &mut log)?;
    Ok(TrainOutcome { agent, log, final_eval })
}
