//! Online learning of the feedback function `F̂(s, a)` and the greedy
//! policy `π_HF(s) = argmax_a F̂(s, a)`.
//!
//! `F̂` is a 13 → 16 (tanh) → 3 network with one logit per action. A label
//! only ever trains the logit of the action it judged: the other two
//! output nodes receive exactly zero gradient.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, NavEnv, Pose, StepResult, Terminal, OBS_DIM};
use crate::error::{Error, Result};
use crate::metrics::derive_seed;
use crate::nn::{bce_single_logit, sigmoid, Activation, DenseNet, Gradients, Optimizer, OptimizerMode};
use crate::planner::{noisy_feedback, Label, Planner};
use crate::trainer::Controller;

pub const HIDDEN_UNITS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct HfModel {
    net: DenseNet,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl HfModel {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> HfModel {
        let net = DenseNet::glorot(&[OBS_DIM, HIDDEN_UNITS, 3], &[Activation::Tanh, Activation::Identity], rng)
            .expect("fixed layout is valid");
        HfModel { net }
    }

    pub fn from_net(net: DenseNet) -> Result<HfModel> {
        let layers = net.layers();
        if net.input_dim() != OBS_DIM || net.output_dim() != 3 || layers.last().map(|l| l.activation()) != Some(Activation::Identity) {
            return Err(Error::contract("feedback model must map 13 inputs to 3 raw logits"));
        }
        Ok(HfModel { net })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn logits(&self, obs: &[f64; OBS_DIM]) -> [f64; 3] {
        let out = self.net.predict(obs).expect("input dimension fixed by type");
        [out[0], out[1], out[2]]
    }

    /// Predicted probability that each action would be judged correct.
    pub fn f_hat(&self, obs: &[f64; OBS_DIM]) -> [f64; 3] {
        self.logits(obs).map(sigmoid)
    }

    pub fn pi_hf(&self, obs: &[f64; OBS_DIM]) -> Action {
        // sigmoid is monotone, so the logits give the same argmax
        Action::from_index(argmax(&self.logits(obs))).expect("three outputs")
    }

    fn accumulate(&self, sample: &FeedbackSample, scale: f64, grads: &mut Gradients) -> Result<f64> {
        let acts = self.net.forward(&sample.obs)?;
        let a = sample.action.index();
        let (loss, dlogit) = bce_single_logit(acts.output()[a], sample.label.value());
        let mut grad_out = [0.0; 3];
        grad_out[a] = dlogit * scale;
        self.net.backward_into(&acts, &grad_out, grads)?;
        Ok(loss)
    }

    /// One optimizer step on a single labelled sample. Returns its loss.
    pub fn update_single(&mut self, sample: &FeedbackSample, opt: &mut Optimizer) -> Result<f64> {
        let mut grads = Gradients::zeros_like(&self.net);
        let loss = self.accumulate(sample, 1.0, &mut grads)?;
        self.net.apply_update(&grads, opt)?;
        Ok(loss)
    }

    /// One optimizer step on the mean loss of a minibatch. Returns the mean loss.
    pub fn update_batch(&mut self, batch: &[&FeedbackSample], opt: &mut Optimizer) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut grads = Gradients::zeros_like(&self.net);
        let mut loss = 0.0;
        for s in batch {
            loss += self.accumulate(s, scale, &mut grads)? * scale;
        }
        self.net.apply_update(&grads, opt)?;
        Ok(loss)
    }
}

impl Controller for HfModel {
    fn decide(&mut self, env: &NavEnv) -> Result<Action> {
        Ok(self.pi_hf(&env.observation().normalized(env.map())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSample {
    /// Normalized observation the action was taken from.
    pub obs: [f64; OBS_DIM],
    pub action: Action,
    pub label: Label,
    pub seq_no: u64,
}

/// Replay store for feedback. Every fifth sample (`seq_no % 5 == 4`) is
/// held out for validation; training draws weight a sample by
/// `λ^(latest seq_no − its seq_no)` so newer feedback dominates.
#[derive(Debug, Clone)]
pub struct FeedbackBuffer {
    train: Vec<FeedbackSample>,
    validation: Vec<FeedbackSample>,
    lambda: f64,
    latest: Option<u64>,
}

impl FeedbackBuffer {
    pub fn new(lambda: f64) -> Result<FeedbackBuffer> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::config("lambda", format!("recency decay must lie in (0, 1], got {lambda}")));
        }
        Ok(FeedbackBuffer { train: Vec::new(), validation: Vec::new(), lambda, latest: None })
    }

    pub fn is_validation(seq_no: u64) -> bool {
        seq_no % 5 == 4
    }

    pub fn record(&mut self, sample: FeedbackSample) -> Result<()> {
        if let Some(latest) = self.latest {
            if sample.seq_no <= latest {
                return Err(Error::contract(format!(
                    "feedback seq_no {} is not newer than {latest}",
                    sample.seq_no
                )));
            }
        }
        self.latest = Some(sample.seq_no);
        if Self::is_validation(sample.seq_no) {
            self.validation.push(sample);
        } else {
            self.train.push(sample);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn train(&self) -> &[FeedbackSample] {
        &self.train
    }

    pub fn validation(&self) -> &[FeedbackSample] {
        &self.validation
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Unnormalized sampling weight of each training sample.
    pub fn weights(&self) -> Vec<f64> {
        let latest = self.latest.unwrap_or(0);
        self.train.iter().map(|s| self.lambda.powf((latest - s.seq_no) as f64)).collect()
    }

    /// `k` i.i.d. draws with replacement, `P(i) ∝ λ^age_i`.
    pub fn sample_batch<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<&FeedbackSample>> {
        if self.train.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if self.train.len() == 1 {
            return Ok(vec![&self.train[0]; k]);
        }
        let dist = WeightedIndex::new(self.weights()).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok((0..k).map(|_| &self.train[dist.sample(rng)]).collect())
    }

    /// Fraction of held-out samples where `F̂(s, a) ≥ 0.5` agrees with the label.
    pub fn val_accuracy(&self, model: &HfModel) -> Result<f64> {
        if self.validation.is_empty() {
            return Err(Error::UndefinedMetric("validation accuracy with no validation samples"));
        }
        let hits = self
            .validation
            .iter()
            .filter(|s| {
                let predicted = model.logits(&s.obs)[s.action.index()] >= 0.0;
                predicted == (s.label == Label::Correct)
            })
            .count();
        Ok(hits as f64 / self.validation.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HfConfig {
    /// Number of feedback labels collected.
    pub t_hf: usize,
    /// Replay minibatch updates after each new label.
    pub k_hf: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerMode,
    /// Recency decay of replay sampling weights.
    pub lambda: f64,
    /// Probability of a uniformly random action instead of `π_HF`; 0 follows `π_HF` greedily.
    pub explore_epsilon: f64,
}

impl Default for HfConfig {
    fn default() -> Self {
        HfConfig {
            t_hf: 1000,
            k_hf: 4,
            batch_size: 32,
            lr: 0.01,
            optimizer: OptimizerMode::Adam,
            lambda: 0.995,
            explore_epsilon: 0.0,
        }
    }
}

impl HfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_hf == 0 {
            return Err(Error::config("hf.t_hf", "must be positive"));
        }
        if self.k_hf == 0 {
            return Err(Error::config("hf.k_hf", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("hf.batch_size", "must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("hf.lr", "must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::config("hf.lambda", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.explore_epsilon) {
            return Err(Error::config("hf.explore_epsilon", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Everything a feedback provider may look at for one executed action.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackQuery<'a> {
    pub seq_no: u64,
    pub episode: u64,
    pub pose_before: Pose,
    pub action: Action,
    pub pose_after: Pose,
    pub result: &'a StepResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackReply {
    Label(Label),
    /// The provider ended the session; keep what has been learned so far.
    Stop,
}

pub trait FeedbackSource {
    fn feedback(&mut self, query: &FeedbackQuery<'_>) -> Result<FeedbackReply>;

    /// Called after each label has been learned from.
    fn on_progress(&mut self, _stats: &HfStepStats) -> Result<()> {
        Ok(())
    }
}

/// Simulated evaluator: shortest-path ground truth passed through a
/// symmetric noisy channel of the given accuracy.
pub struct OracleFeedback<'p> {
    planner: &'p Planner,
    accuracy: f64,
    rng: ChaCha8Rng,
}

impl<'p> OracleFeedback<'p> {
    pub fn new(planner: &'p Planner, accuracy: f64, seed: u64) -> Result<Self> {
        crate::planner::check_accuracy(accuracy)?;
        Ok(OracleFeedback { planner, accuracy, rng: ChaCha8Rng::seed_from_u64(seed) })
    }
}

impl FeedbackSource for OracleFeedback<'_> {
    fn feedback(&mut self, q: &FeedbackQuery<'_>) -> Result<FeedbackReply> {
        let truth = self.planner.ground_truth_label(&q.pose_before, q.action)?;
        Ok(FeedbackReply::Label(noisy_feedback(truth, self.accuracy, &mut self.rng)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfStepStats {
    pub step: u64,
    pub val_accuracy: Option<f64>,
    pub buffer_size: usize,
    pub episodes_completed: u64,
    pub success_so_far: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageEnd {
    Completed,
    StoppedBySource,
}

#[derive(Debug, Clone)]
pub struct HfOutcome {
    pub model: HfModel,
    pub buffer: FeedbackBuffer,
    pub stats: Vec<HfStepStats>,
    pub end: StageEnd,
}

/// The stage failed part-way; `partial` holds the model learned so far.
#[derive(Debug)]
pub struct StageAborted {
    pub partial: Box<HfOutcome>,
    pub cause: Error,
}

impl std::fmt::Display for StageAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "feedback stage aborted after {} labels: {}", self.partial.stats.len(), self.cause)
    }
}

impl std::error::Error for StageAborted {}

/// Random streams of one feedback stage, all derived from a single seed.
#[derive(Debug, Clone, Copy)]
pub struct HfSeeds {
    pub init: u64,
    pub env: u64,
    pub replay: u64,
    pub explore: u64,
    pub oracle: u64,
}

impl HfSeeds {
    pub fn derive(seed: u64) -> HfSeeds {
        HfSeeds {
            init: derive_seed(seed, "hf/init"),
            env: derive_seed(seed, "hf/env"),
            replay: derive_seed(seed, "hf/replay"),
            explore: derive_seed(seed, "hf/explore"),
            oracle: derive_seed(seed, "hf/oracle"),
        }
    }
}

/// Collects `t_HF` labels on the agent's own greedy actions, learning from
/// each one immediately and then from `K_HF` replayed minibatches.
pub fn run_hf_stage(
    env: &mut NavEnv,
    source: &mut dyn FeedbackSource,
    cfg: &HfConfig,
    seeds: HfSeeds,
) -> std::result::Result<HfOutcome, StageAborted> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(seeds.init);
    let model = HfModel::new(&mut init_rng);
    let buffer = match FeedbackBuffer::new(cfg.lambda) {
        Ok(b) => b,
        Err(cause) => return Err(abort(model, FeedbackBuffer::empty(), Vec::new(), cause)),
    };
    let mut state = Stage { model, buffer, stats: Vec::with_capacity(cfg.t_hf) };
    match state.run(env, source, cfg, seeds) {
        Ok(end) => Ok(HfOutcome { model: state.model, buffer: state.buffer, stats: state.stats, end }),
        Err(cause) => Err(abort(state.model, state.buffer, state.stats, cause)),
    }
}

fn abort(model: HfModel, buffer: FeedbackBuffer, stats: Vec<HfStepStats>, cause: Error) -> StageAborted {
    StageAborted { partial: Box::new(HfOutcome { model, buffer, stats, end: StageEnd::StoppedBySource }), cause }
}

impl FeedbackBuffer {
    fn empty() -> FeedbackBuffer {
        FeedbackBuffer { train: Vec::new(), validation: Vec::new(), lambda: 1.0, latest: None }
    }
}

struct Stage {
    model: HfModel,
    buffer: FeedbackBuffer,
    stats: Vec<HfStepStats>,
}

impl Stage {
    fn run(&mut self, env: &mut NavEnv, source: &mut dyn FeedbackSource, cfg: &HfConfig, seeds: HfSeeds) -> Result<StageEnd> {
        cfg.validate()?;
        let mut opt = Optimizer::new(cfg.optimizer, cfg.lr)?;
        let mut env_rng = ChaCha8Rng::seed_from_u64(seeds.env);
        let mut replay_rng = ChaCha8Rng::seed_from_u64(seeds.replay);
        let mut explore_rng = ChaCha8Rng::seed_from_u64(seeds.explore);
        let (mut episodes, mut successes) = (0u64, 0u64);

        env.reset(&mut env_rng);
        for t in 0..cfg.t_hf as u64 {
            let obs = env.observation().normalized(env.map());
            let action = if cfg.explore_epsilon > 0.0 && explore_rng.gen::<f64>() < cfg.explore_epsilon {
                Action::ALL[explore_rng.gen_range(0..3)]
            } else {
                self.model.pi_hf(&obs)
            };
            let pose_before = env.pose();
            let result = env.step(action)?;
            let query = FeedbackQuery { seq_no: t, episode: episodes, pose_before, action, pose_after: env.pose(), result: &result };
            let label = match source.feedback(&query)? {
                FeedbackReply::Label(l) => l,
                FeedbackReply::Stop => return Ok(StageEnd::StoppedBySource),
            };

            let sample = FeedbackSample { obs, action, label, seq_no: t };
            self.model.update_single(&sample, &mut opt)?;
            if !self.buffer.train().is_empty() {
                for _ in 0..cfg.k_hf {
                    let batch = self.buffer.sample_batch(cfg.batch_size, &mut replay_rng)?;
                    self.model.update_batch(&batch, &mut opt)?;
                }
            }
            self.buffer.record(sample)?;

            if result.terminal.is_terminal() {
                episodes += 1;
                if result.terminal == Terminal::Goal {
                    successes += 1;
                }
                env.reset(&mut env_rng);
            }
            let stats = HfStepStats {
                step: t + 1,
                val_accuracy: self.buffer.val_accuracy(&self.model).ok(),
                buffer_size: self.buffer.len(),
                episodes_completed: episodes,
                success_so_far: successes,
            };
            self.stats.push(stats);
            source.on_progress(&stats)?;
        }
        Ok(StageEnd::Completed)
    }
}
