//! Soft actor-critic with twin Q-functions and polyak-averaged targets.

use rand::Rng;

use crate::approx::{ActionMode, GmmPolicy, QFunction};
use crate::buffer::{Batch, ReplayBuffer, Transition, TransitionShape};
use crate::config::Config;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::{polyak_update, Adam, Mat};
use crate::seeding::component_rng;

/// Soft TD target for one transition.
///
/// `y = r + gamma (1 - done) (min_target_q - alpha ln pi(a'|s'))`
pub fn td_target(reward: f64, done: bool, discount: f64, min_target_q: f64, entropy_weight: f64, next_log_prob: f64) -> f64 {
    if done {
        return reward;
    }
    reward + discount * (min_target_q - entropy_weight * next_log_prob)
}

/// Losses of one gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SacLosses {
    pub q1: f64,
    pub q2: f64,
    pub policy: f64,
}

#[derive(Debug, Clone)]
pub struct SacTrainer {
    pub policy: GmmPolicy,
    pub q: [QFunction; 2],
    pub q_target: [QFunction; 2],
    pub policy_opt: Adam,
    pub q_opt: [Adam; 2],
    pub entropy_weight: f64,
    pub discount: f64,
    pub polyak_rate: f64,
}

impl SacTrainer {
    pub fn new<R: Rng + ?Sized>(config: &Config, num_skills: usize, rng: &mut R) -> Self {
        let (s, a, h) = (config.state_dim, config.action_dim, config.hidden_width);
        let policy = GmmPolicy::new(s, num_skills, a, config.gmm_components, h, config.gumbel_temperature, rng);
        let q1 = QFunction::new(s, num_skills, a, h, rng);
        let q2 = QFunction::new(s, num_skills, a, h, rng);
        Self::from_parts(policy, [q1, q2], config)
    }

    /// Fresh optimizers; targets start as copies of the Q-functions.
    pub fn from_parts(policy: GmmPolicy, q: [QFunction; 2], config: &Config) -> Self {
        let policy_opt = Adam::new(policy.net().num_params(), config.lr_policy);
        let q_opt = [
            Adam::new(q[0].net().num_params(), config.lr_q),
            Adam::new(q[1].net().num_params(), config.lr_q),
        ];
        SacTrainer {
            q_target: q.clone(),
            policy,
            q,
            policy_opt,
            q_opt,
            entropy_weight: config.entropy_weight,
            discount: config.discount,
            polyak_rate: config.polyak_rate,
        }
    }

    /// Soft TD targets for `rewards`. Nothing here touches a gradient, so
    /// targets never backpropagate into the target networks.
    pub fn compute_td_target<R: Rng + ?Sized>(&self, batch: &Batch, rewards: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if rewards.len() != batch.len() || batch.is_empty() {
            return Err(Error::Validation(format!(
                "{} rewards for a batch of {}",
                rewards.len(),
                batch.len()
            )));
        }
        let next = self
            .policy
            .sample(&batch.next_states, &batch.skills, ActionMode::Stochastic, rng)?;
        let q1 = self.q_target[0].values(&batch.next_states, &batch.skills, &next.actions)?;
        let q2 = self.q_target[1].values(&batch.next_states, &batch.skills, &next.actions)?;
        Ok((0..batch.len())
            .map(|i| {
                td_target(
                    rewards[i],
                    batch.dones[i],
                    self.discount,
                    q1[i].min(q2[i]),
                    self.entropy_weight,
                    next.log_probs[i],
                )
            })
            .collect())
    }

    /// One step of both Q-functions on the mean squared TD error.
    pub fn q_update(&mut self, batch: &Batch, targets: &[f64]) -> Result<[f64; 2]> {
        let mut losses = [0.0; 2];
        let n = targets.len() as f64;
        for (i, loss) in losses.iter_mut().enumerate() {
            let (values, trace) = self.q[i].forward(&batch.states, &batch.skills, &batch.actions)?;
            let mut d = Mat::zeros(values.len(), 1);
            for (r, (v, y)) in values.iter().zip(targets).enumerate() {
                let err = v - y;
                *loss += err * err / n;
                d.data[r] = 2.0 * err / n;
            }
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("Q{} loss is {loss}", i + 1)));
            }
            let mut grads = vec![0.0; self.q[i].net().num_params()];
            self.q[i].net().backward(&trace, &d, Some(&mut grads), false);
            self.q_opt[i].step(self.q[i].net_mut().params_mut(), &grads);
        }
        Ok(losses)
    }

    /// One policy step on `mean(alpha ln pi(a|s) - min_i Q_i(s, a))` with
    /// reparameterized actions.
    pub fn policy_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<f64> {
        let (sample, tape) = self.policy.sample_reparam(&batch.states, &batch.skills, rng)?;
        let n = batch.len() as f64;
        let (v1, t1) = self.q[0].forward(&batch.states, &batch.skills, &sample.actions)?;
        let (v2, t2) = self.q[1].forward(&batch.states, &batch.skills, &sample.actions)?;
        let mut d1 = vec![0.0; v1.len()];
        let mut d2 = vec![0.0; v2.len()];
        let mut loss = 0.0;
        for r in 0..v1.len() {
            let q_min = if v1[r] <= v2[r] {
                d1[r] = -1.0 / n;
                v1[r]
            } else {
                d2[r] = -1.0 / n;
                v2[r]
            };
            loss += (self.entropy_weight * sample.log_probs[r] - q_min) / n;
        }
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("policy loss is {loss}")));
        }
        let mut d_actions = self.q[0].action_gradient(&t1, &d1);
        let g2 = self.q[1].action_gradient(&t2, &d2);
        d_actions.data.iter_mut().zip(&g2.data).for_each(|(a, b)| *a += b);
        let d_log_probs = vec![self.entropy_weight / n; v1.len()];
        let mut grads = vec![0.0; self.policy.net().num_params()];
        self.policy
            .reparam_backward(&tape, &sample, &d_actions, &d_log_probs, &mut grads);
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("non-finite policy gradient".into()));
        }
        self.policy_opt.step(self.policy.net_mut().params_mut(), &grads);
        Ok(loss)
    }

    pub fn update_targets(&mut self) -> Result<()> {
        for i in 0..2 {
            polyak_update(self.q[i].net().params(), self.q_target[i].net_mut().params_mut(), self.polyak_rate)?;
        }
        Ok(())
    }

    /// TD targets, Q step, policy step, then target averaging.
    pub fn train_step<R: Rng + ?Sized>(&mut self, batch: &Batch, rewards: &[f64], rng: &mut R) -> Result<SacLosses> {
        let targets = self.compute_td_target(batch, rewards, rng)?;
        let [q1, q2] = self.q_update(batch, &targets)?;
        let policy = self.policy_update(batch, rng)?;
        self.update_targets()?;
        Ok(SacLosses { q1, q2, policy })
    }
}

/// One evaluation checkpoint of reference training.
#[derive(Debug, Clone, PartialEq)]
pub struct RefEpochMetrics {
    pub epoch: usize,
    pub env_steps: u64,
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub policy_loss: f64,
    /// Mean deterministic evaluation return.
    pub eval_return: f64,
    /// Mean best achievable return from the same starts, or NaN.
    pub optimal_return: f64,
    /// Final states of the evaluation episodes.
    pub final_states: Vec<Vec<f64>>,
}

pub struct ReferenceRun {
    pub trainer: SacTrainer,
    pub metrics: Vec<RefEpochMetrics>,
    pub env_steps: u64,
    pub stopped_early: bool,
}

/// Best achievable return as a function of the episode's start state.
pub type OptimalReturn<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Trains a single-skill SAC agent on the extrinsic reward.
///
/// Runs up to `config.ref_epochs` epochs, evaluating after each with
/// `ref_eval_episodes` deterministic episodes on `eval_env`. When `optimum`
/// is given, training stops once the mean evaluation return reaches
/// `ref_early_stop` times the mean optimal return of those episodes.
pub fn train_reference_policy<E: Environment, F: Environment>(
    env: &mut E,
    eval_env: &mut F,
    config: &Config,
    optimum: Option<OptimalReturn<'_>>,
    mut on_epoch: impl FnMut(&RefEpochMetrics),
) -> Result<ReferenceRun> {
    env.spec().expect_dims(config.state_dim, config.action_dim)?;
    eval_env.spec().expect_dims(config.state_dim, config.action_dim)?;
    env.seed(crate::seeding::derive_seed(config.seed, "ref-env"))?;
    eval_env.seed(crate::seeding::derive_seed(config.seed, "ref-eval-env"))?;
    let mut init_rng = component_rng(config.seed, "ref-init");
    let mut act_rng = component_rng(config.seed, "ref-act");
    let mut train_rng = component_rng(config.seed, "ref-train");
    let mut trainer = SacTrainer::new(config, 1, &mut init_rng);
    let shape = TransitionShape {
        state_dim: config.state_dim,
        action_dim: config.action_dim,
        num_skills: 1,
    };
    let mut buffer = ReplayBuffer::new(config.buffer_capacity, shape);
    let mut state = env.reset()?;
    let mut env_steps = 0u64;
    let mut metrics = Vec::new();
    let mut stopped_early = false;
    for epoch in 0..config.ref_epochs {
        for _ in 0..config.env_steps_per_epoch {
            let action = trainer.policy.act(&state, 0, ActionMode::Stochastic, &mut act_rng)?;
            let step = env.step(&action)?;
            buffer.add(Transition {
                state: std::mem::take(&mut state),
                skill: 0,
                action,
                next_state: step.next_state.clone(),
                extrinsic_reward: step.extrinsic_reward,
                done: step.terminal(),
            })?;
            env_steps += 1;
            state = if step.done { env.reset()? } else { step.next_state };
        }
        let mut sums = SacLosses::default();
        for _ in 0..config.train_steps_per_epoch {
            let batch = buffer.sample(config.batch_size, &mut train_rng)?;
            let rewards = batch.extrinsic_rewards.clone();
            let l = trainer.train_step(&batch, &rewards, &mut train_rng)?;
            sums.q1 += l.q1;
            sums.q2 += l.q2;
            sums.policy += l.policy;
        }
        let n = config.train_steps_per_epoch.max(1) as f64;
        let (eval_return, optimal_return, final_states) =
            evaluate_reference(&trainer.policy, eval_env, config.ref_eval_episodes, optimum)?;
        let m = RefEpochMetrics {
            epoch,
            env_steps,
            q1_loss: sums.q1 / n,
            q2_loss: sums.q2 / n,
            policy_loss: sums.policy / n,
            eval_return,
            optimal_return,
            final_states,
        };
        on_epoch(&m);
        let done = optimum.is_some() && eval_return >= config.ref_early_stop * optimal_return;
        metrics.push(m);
        if done {
            stopped_early = true;
            break;
        }
    }
    Ok(ReferenceRun {
        trainer,
        metrics,
        env_steps,
        stopped_early,
    })
}

fn evaluate_reference<F: Environment>(
    policy: &GmmPolicy,
    env: &mut F,
    episodes: usize,
    optimum: Option<OptimalReturn<'_>>,
) -> Result<(f64, f64, Vec<Vec<f64>>)> {
    let mut rng = component_rng(0, "unused-deterministic");
    let mut total = 0.0;
    let mut best = 0.0;
    let mut finals = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset()?;
        best += optimum.map_or(f64::NAN, |f| f(&state));
        loop {
            let action = policy.act(&state, 0, ActionMode::Deterministic, &mut rng)?;
            let step = env.step(&action)?;
            total += step.extrinsic_reward;
            state = step.next_state;
            if step.done {
                break;
            }
        }
        finals.push(state);
    }
    let n = episodes.max(1) as f64;
    Ok((total / n, best / n, finals))
}
