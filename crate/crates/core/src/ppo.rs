//! Clipped-surrogate PPO with separate policy and value networks and
//! generalized advantage estimation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, NavEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::hf::argmax;
use crate::nn::{log_softmax, Activation, DenseNet, Gradients, Optimizer, OptimizerMode};
use crate::trainer::Controller;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub lr: f64,
    /// Adam denominator offset; damps steps driven by vanishing gradients.
    pub adam_eps: f64,
    /// Passes over each batch.
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    /// Rescale each network's minibatch gradient to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
    /// Skip the remaining epochs of an update once a minibatch's approximate
    /// KL from the behavior policy exceeds 1.5 times this value.
    pub target_kl: Option<f64>,
    /// Multiplier applied to rewards before advantages and returns.
    pub reward_scale: f64,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            adam_eps: 1e-3,
            epochs: 10,
            minibatch: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            normalize_advantages: false,
            max_grad_norm: None,
            target_kl: Some(0.01),
            reward_scale: 0.01,
            hidden: 64,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) {
            return Err(Error::config("ppo.gamma", "must lie in [0, 1]"));
        }
        if !unit(self.gae_lambda) {
            return Err(Error::config("ppo.gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("ppo.clip", "must lie in (0, 1)"));
        }
        if self.target_kl.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::config("ppo.target_kl", "must be positive"));
        }
        if self.max_grad_norm.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::config("ppo.max_grad_norm", "must be positive"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("ppo.reward_scale", "must be positive"));
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return Err(Error::config("ppo.adam_eps", "must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("ppo.lr", "must be positive"));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.hidden == 0 {
            return Err(Error::config("ppo", "epochs, minibatch and hidden must be positive"));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::config("ppo", "loss coefficients must be non-negative"));
        }
        Ok(())
    }
}

/// Discounted advantages and returns for one trajectory.
///
/// `bootstrap` is `V(s_T)` when the trajectory was cut off and 0 when it
/// reached a true terminal state. Returns are `advantages + values`.
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.len() != values.len() {
        return Err(Error::contract(format!("{} rewards but {} values", rewards.len(), values.len())));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut running = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// In-place `(x - mean) / max(std, 1e-8)` with population std.
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-8);
    for v in values {
        *v = (*v - mean) / std;
    }
}

/// One episode of experience, whichever policy produced it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    pub obs: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<Action>,
    /// `log π_old(a | s)` under the learner's policy at collection time.
    pub logp: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Observation after the last action; used to bootstrap when not terminated.
    pub final_obs: [f64; OBS_DIM],
    /// True when the episode ended in goal or collision.
    pub terminated: bool,
}

impl Rollout {
    pub fn push(&mut self, obs: [f64; OBS_DIM], action: Action, logp: f64, reward: f64) {
        self.obs.push(obs);
        self.actions.push(action);
        self.logp.push(logp);
        self.rewards.push(reward);
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// A single transition ready for the surrogate loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub obs: [f64; OBS_DIM],
    pub action: Action,
    pub logp_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl LossParts {
    pub fn total(&self, cfg: &PpoConfig) -> f64 {
        self.policy + cfg.value_coef * self.value - cfg.entropy_coef * self.entropy
    }
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    policy: DenseNet,
    value: DenseNet,
    pi_opt: Optimizer,
    v_opt: Optimizer,
    cfg: PpoConfig,
}

impl PpoAgent {
    pub fn new<R: Rng + ?Sized>(cfg: PpoConfig, rng: &mut R) -> Result<PpoAgent> {
        cfg.validate()?;
        let hidden = [Activation::Tanh, Activation::Tanh, Activation::Identity];
        let policy = DenseNet::glorot(&[OBS_DIM, cfg.hidden, cfg.hidden, 3], &hidden, rng)?;
        let value = DenseNet::glorot(&[OBS_DIM, cfg.hidden, cfg.hidden, 1], &hidden, rng)?;
        // small policy head keeps the initial policy close to uniform
        let mut policy = policy;
        let head = policy.layers_mut().last_mut().expect("three layers");
        head.weights_mut().iter_mut().for_each(|w| *w *= 0.01);
        Ok(PpoAgent {
            policy,
            value,
            pi_opt: Optimizer::new(OptimizerMode::Adam, cfg.lr)?.with_eps(cfg.adam_eps)?,
            v_opt: Optimizer::new(OptimizerMode::Adam, cfg.lr)?.with_eps(cfg.adam_eps)?,
            cfg,
        })
    }

    /// Rebuilds an agent from saved networks with fresh optimizer state.
    pub fn from_nets(cfg: PpoConfig, policy: DenseNet, value: DenseNet) -> Result<PpoAgent> {
        cfg.validate()?;
        if policy.input_dim() != OBS_DIM || policy.output_dim() != 3 {
            return Err(Error::contract("policy network must map 13 inputs to 3 logits"));
        }
        if value.input_dim() != OBS_DIM || value.output_dim() != 1 {
            return Err(Error::contract("value network must map 13 inputs to 1 output"));
        }
        Ok(PpoAgent {
            policy,
            value,
            pi_opt: Optimizer::new(OptimizerMode::Adam, cfg.lr)?.with_eps(cfg.adam_eps)?,
            v_opt: Optimizer::new(OptimizerMode::Adam, cfg.lr)?.with_eps(cfg.adam_eps)?,
            cfg,
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn policy_net(&self) -> &DenseNet {
        &self.policy
    }

    pub fn value_net(&self) -> &DenseNet {
        &self.value
    }

    pub fn policy_net_mut(&mut self) -> &mut DenseNet {
        &mut self.policy
    }

    pub fn value_net_mut(&mut self) -> &mut DenseNet {
        &mut self.value
    }

    pub fn log_probs(&self, obs: &[f64; OBS_DIM]) -> [f64; 3] {
        let lp = log_softmax(&self.policy.predict(obs).expect("input dimension fixed by type"));
        [lp[0], lp[1], lp[2]]
    }

    pub fn value_of(&self, obs: &[f64; OBS_DIM]) -> f64 {
        self.value.predict(obs).expect("input dimension fixed by type")[0]
    }

    /// Samples an action; returns it with its log-probability.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64; OBS_DIM], rng: &mut R) -> (Action, f64) {
        let lp = self.log_probs(obs);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = 2;
        for (i, l) in lp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                chosen = i;
                break;
            }
        }
        (Action::ALL[chosen], lp[chosen])
    }

    pub fn greedy(&self, obs: &[f64; OBS_DIM]) -> Action {
        Action::ALL[argmax(&self.log_probs(obs))]
    }

    /// Turns a finished rollout into loss-ready samples.
    pub fn prepare(&self, rollout: &Rollout) -> Result<Vec<Sample>> {
        if rollout.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let values: Vec<f64> = rollout.obs.iter().map(|o| self.value_of(o)).collect();
        let bootstrap = if rollout.terminated { 0.0 } else { self.value_of(&rollout.final_obs) };
        let rewards: Vec<f64> = rollout.rewards.iter().map(|r| r * self.cfg.reward_scale).collect();
        let (mut adv, returns) = gae(&rewards, &values, bootstrap, self.cfg.gamma, self.cfg.gae_lambda)?;
        if self.cfg.normalize_advantages {
            normalize(&mut adv);
        }
        Ok((0..rollout.len())
            .map(|i| Sample {
                obs: rollout.obs[i],
                action: rollout.actions[i],
                logp_old: rollout.logp[i],
                advantage: adv[i],
                ret: returns[i],
            })
            .collect())
    }

    /// Mean surrogate loss over `batch` and its gradients for both networks.
    pub fn loss_and_grads(&self, batch: &[Sample]) -> Result<(LossParts, Gradients, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let cfg = &self.cfg;
        let inv = 1.0 / batch.len() as f64;
        let mut g_pi = Gradients::zeros_like(&self.policy);
        let mut g_v = Gradients::zeros_like(&self.value);
        let mut parts = LossParts::default();
        for s in batch {
            let acts = self.policy.forward(&s.obs)?;
            let lp = log_softmax(acts.output());
            let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            let a = s.action.index();
            let log_ratio = lp[a] - s.logp_old;
            let ratio = log_ratio.exp();
            let clipped = (ratio < 1.0 - cfg.clip && s.advantage < 0.0) || (ratio > 1.0 + cfg.clip && s.advantage > 0.0);
            let surrogate = (ratio * s.advantage).min(ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage);
            let h: f64 = -p.iter().zip(&lp).map(|(pi, li)| pi * li).sum::<f64>();

            parts.policy -= surrogate * inv;
            parts.entropy += h * inv;
            parts.approx_kl += ((ratio - 1.0) - log_ratio) * inv;
            if (ratio - 1.0).abs() > cfg.clip {
                parts.clip_fraction += inv;
            }

            let mut grad_logits = [0.0; 3];
            for j in 0..3 {
                let onehot = if j == a { 1.0 } else { 0.0 };
                if !clipped {
                    grad_logits[j] -= ratio * s.advantage * (onehot - p[j]);
                }
                grad_logits[j] += cfg.entropy_coef * p[j] * (lp[j] + h);
                grad_logits[j] *= inv;
            }
            self.policy.backward_into(&acts, &grad_logits, &mut g_pi)?;

            let vacts = self.value.forward(&s.obs)?;
            let err = vacts.output()[0] - s.ret;
            parts.value += err * err * inv;
            self.value.backward_into(&vacts, &[2.0 * cfg.value_coef * err * inv], &mut g_v)?;
        }
        Ok((parts, g_pi, g_v))
    }

    /// `epochs` passes of shuffled minibatch updates over one rollout.
    /// Returns the loss components averaged over all minibatches.
    pub fn update<R: Rng + ?Sized>(&mut self, rollout: &Rollout, rng: &mut R) -> Result<LossParts> {
        let samples = self.prepare(rollout)?;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut mean = LossParts::default();
        let mut count = 0.0;
        let mut batch = Vec::with_capacity(self.cfg.minibatch);
        'epochs: for _ in 0..self.cfg.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.cfg.minibatch) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| samples[i]));
                let (parts, mut g_pi, mut g_v) = self.loss_and_grads(&batch)?;
                if self.cfg.target_kl.is_some_and(|t| parts.approx_kl > 1.5 * t) && count > 0.0 {
                    break 'epochs;
                }
                if let Some(limit) = self.cfg.max_grad_norm {
                    for g in [&mut g_pi, &mut g_v] {
                        let norm = g.l2_norm();
                        if norm > limit {
                            g.scale(limit / norm);
                        }
                    }
                }
                self.policy.apply_update(&g_pi, &mut self.pi_opt)?;
                self.value.apply_update(&g_v, &mut self.v_opt)?;
                mean.policy += parts.policy;
                mean.value += parts.value;
                mean.entropy += parts.entropy;
                mean.approx_kl += parts.approx_kl;
                mean.clip_fraction += parts.clip_fraction;
                count += 1.0;
            }
        }
        mean.policy /= count;
        mean.value /= count;
        mean.entropy /= count;
        mean.approx_kl /= count;
        mean.clip_fraction /= count;
        Ok(mean)
    }
}

/// Greedy view of a learner's policy.
pub struct Greedy<'a>(pub &'a PpoAgent);

impl Controller for Greedy<'_> {
    fn decide(&mut self, env: &NavEnv) -> Result<Action> {
        Ok(self.0.greedy(&env.observation().normalized(env.map())))
    }
}

/// Agent initialized from a seed, for tests and tools.
pub fn seeded_agent(cfg: PpoConfig, seed: u64) -> Result<PpoAgent> {
    PpoAgent::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_gae(r: &[f64], v: &[f64], boot: f64, gamma: f64, lambda: f64) -> Vec<f64> {
        let n = r.len();
        let next = |t: usize| if t + 1 < n { v[t + 1] } else { boot };
        (0..n)
            .map(|t| (t..n).map(|l| (gamma * lambda).powi((l - t) as i32) * (r[l] + gamma * next(l) - v[l])).sum())
            .collect()
    }

    #[test]
    fn gae_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let n = rng.gen_range(1..130);
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let boot = if trial % 2 == 0 { 0.0 } else { rng.gen_range(-50.0..50.0) };
            let (adv, ret) = gae(&r, &v, boot, 0.99, 0.95).unwrap();
            let reference = brute_force_gae(&r, &v, boot, 0.99, 0.95);
            for t in 0..n {
                assert!((adv[t] - reference[t]).abs() < 1e-10, "t={t}: {} vs {}", adv[t], reference[t]);
                assert_eq!(ret[t], adv[t] + v[t]);
            }
        }
    }

    #[test]
    fn gae_special_cases() {
        // λ = 1, V = 0: advantages are discounted reward-to-go
        let r = [1.0, 2.0, 3.0];
        let (adv, _) = gae(&r, &[0.0; 3], 0.0, 0.5, 1.0).unwrap();
        assert_eq!(adv, vec![1.0 + 0.5 * 2.0 + 0.25 * 3.0, 2.0 + 0.5 * 3.0, 3.0]);
        // λ = 0: one-step TD errors
        let (adv, _) = gae(&r, &[1.0, 1.0, 1.0], 4.0, 0.5, 0.0).unwrap();
        assert_eq!(adv, vec![0.5, 1.5, 4.0]);
        // truncated episodes bootstrap, terminated ones do not
        let (cut, _) = gae(&[0.0], &[0.0], 10.0, 0.9, 0.95).unwrap();
        let (end, _) = gae(&[0.0], &[0.0], 0.0, 0.9, 0.95).unwrap();
        assert_eq!((cut[0], end[0]), (9.0, 0.0));
        assert!(gae(&[1.0], &[], 0.0, 0.9, 0.9).is_err());
    }

    #[test]
    fn normalization_guards_constant_input() {
        let mut v = vec![3.0; 5];
        normalize(&mut v);
        assert!(v.iter().all(|x| *x == 0.0));
        let mut v = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut v);
        let mean: f64 = v.iter().sum::<f64>() / 4.0;
        let var: f64 = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_frequencies_follow_policy() {
        let agent = seeded_agent(PpoConfig::default(), 1).unwrap();
        let obs = [0.2; OBS_DIM];
        let p: Vec<f64> = agent.log_probs(&obs).iter().map(|l| l.exp()).collect();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            let (a, lp) = agent.act(&obs, &mut rng);
            assert_eq!(lp, agent.log_probs(&obs)[a.index()]);
            counts[a.index()] += 1;
        }
        for j in 0..3 {
            assert!((counts[j] as f64 / 30_000.0 - p[j]).abs() < 0.015);
        }
    }

    fn random_batch(agent: &PpoAgent, rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| {
                let obs: [f64; OBS_DIM] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let a = Action::ALL[rng.gen_range(0..3)];
                // old log-prob near the current one so most samples sit inside the clip band
                let logp_old = agent.log_probs(&obs)[a.index()] + rng.gen_range(-0.1..0.1);
                Sample { obs, action: a, logp_old, advantage: rng.gen_range(-2.0..2.0), ret: rng.gen_range(-3.0..3.0) }
            })
            .collect()
    }

    fn total_loss(agent: &PpoAgent, batch: &[Sample]) -> f64 {
        agent.loss_and_grads(batch).unwrap().0.total(agent.config())
    }

    fn nudge(agent: &mut PpoAgent, net_idx: usize, layer: usize, k: usize, delta: f64) {
        let net = if net_idx == 0 { agent.policy_net_mut() } else { agent.value_net_mut() };
        net.layers_mut()[layer].weights_mut()[k] += delta;
    }

    #[test]
    fn surrogate_gradients_match_finite_differences() {
        let cfg = PpoConfig { hidden: 8, ..PpoConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut agent = seeded_agent(cfg, 4).unwrap();
        let batch = random_batch(&agent, &mut rng, 16);
        let (_, g_pi, g_v) = agent.loss_and_grads(&batch).unwrap();
        let h = 1e-5;
        for (net_idx, grads) in [(0, &g_pi), (1, &g_v)] {
            for (l, lg) in grads.layers.iter().enumerate() {
                for k in (0..lg.weights.len()).step_by(7) {
                    nudge(&mut agent, net_idx, l, k, h);
                    let up = total_loss(&agent, &batch);
                    nudge(&mut agent, net_idx, l, k, -2.0 * h);
                    let down = total_loss(&agent, &batch);
                    nudge(&mut agent, net_idx, l, k, h);
                    let numeric = (up - down) / (2.0 * h);
                    let analytic = lg.weights[k];
                    let scale = numeric.abs().max(analytic.abs()).max(1e-6);
                    assert!((numeric - analytic).abs() / scale < 1e-4, "net {net_idx} layer {l} w{k}: {analytic} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn clipped_samples_contribute_no_surrogate_gradient() {
        let cfg = PpoConfig { entropy_coef: 0.0, ..PpoConfig::default() };
        let agent = seeded_agent(cfg, 5).unwrap();
        let obs = [0.1; OBS_DIM];
        let lp = agent.log_probs(&obs)[0];
        // ratio = e^0.5 > 1.2 with positive advantage: outside the trust region
        let s = Sample { obs, action: Action::Forward, logp_old: lp - 0.5, advantage: 1.0, ret: 0.0 };
        let (parts, g_pi, _) = agent.loss_and_grads(&[s]).unwrap();
        assert!(g_pi.values().all(|v| v == 0.0));
        assert_eq!(parts.clip_fraction, 1.0);
        assert!((parts.policy + 1.2).abs() < 1e-12);
    }

    #[test]
    fn update_increases_probability_of_advantaged_action() {
        let mut agent = seeded_agent(PpoConfig::default(), 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let obs = [0.3; OBS_DIM];
        let before = agent.log_probs(&obs)[1];
        let mut rollout = Rollout { final_obs: obs, terminated: true, ..Rollout::default() };
        for i in 0..20 {
            let action = if i % 2 == 0 { Action::TurnLeft } else { Action::TurnRight };
            let reward = if action == Action::TurnLeft { 1.0 } else { -1.0 };
            rollout.push(obs, action, agent.log_probs(&obs)[action.index()], reward);
        }
        let parts = agent.update(&rollout, &mut rng).unwrap();
        assert!(parts.approx_kl >= 0.0);
        assert!(agent.log_probs(&obs)[1] > before);
    }

    #[test]
    fn update_is_deterministic_under_seed() {
        let obs = [0.5; OBS_DIM];
        let run = || {
            let mut agent = seeded_agent(PpoConfig::default(), 9).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut rollout = Rollout { final_obs: obs, ..Rollout::default() };
            for i in 0..70 {
                let (a, lp) = agent.act(&obs, &mut rng);
                rollout.push(obs, a, lp, if i == 69 { 100.0 } else { -1.0 });
            }
            agent.update(&rollout, &mut rng).unwrap();
            agent
        };
        let (a, b) = (run(), run());
        assert_eq!(a.policy_net(), b.policy_net());
        assert_eq!(a.value_net(), b.value_net());
        assert!(seeded_agent(PpoConfig { epochs: 0, ..PpoConfig::default() }, 0).is_err());
    }
}
