//! The skill-discovery loop: skill prior, intrinsic reward, discriminator
//! training and the epoch structure.

use rand::Rng;

use crate::approx::{ActionMode, DiscriminatorStats, LinearProjection, SkillDiscriminator};
use crate::buffer::{ReplayBuffer, Transition, TransitionShape};
use crate::config::Config;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::{Adam, Mat};
use crate::sac::SacTrainer;
use crate::seeding::{component_rng, derive_indexed_seed, indexed_rng};

/// Uniform categorical prior over `K` skills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkillPrior {
    num_skills: usize,
}

impl SkillPrior {
    pub fn new(num_skills: usize) -> Result<Self> {
        if num_skills == 0 {
            return Err(Error::Config("need at least one skill".into()));
        }
        Ok(SkillPrior { num_skills })
    }

    pub fn num_skills(&self) -> usize {
        self.num_skills
    }

    /// `ln p(z) = -ln K` for every skill.
    pub fn log_prob(&self) -> f64 {
        -(self.num_skills as f64).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..self.num_skills)
    }
}

/// `ln q(z | chi s') - ln p(z)` per row of `next_states`.
pub fn intrinsic_rewards(
    disc: &SkillDiscriminator,
    proj: &LinearProjection,
    next_states: &Mat,
    skills: &[usize],
    prior: &SkillPrior,
) -> Result<Vec<f64>> {
    let e = proj.embed_batch(next_states)?;
    let lp = disc.log_prob_of(&e, skills)?;
    Ok(lp.into_iter().map(|l| l - prior.log_prob()).collect())
}

pub fn intrinsic_reward(
    disc: &SkillDiscriminator,
    proj: &LinearProjection,
    next_state: &[f64],
    skill: usize,
    prior: &SkillPrior,
) -> Result<f64> {
    let s = Mat::from_vec(1, next_state.len(), next_state.to_vec());
    Ok(intrinsic_rewards(disc, proj, &s, &[skill], prior)?[0])
}

/// One maximum-likelihood step of the discriminator on `(embedding, skill)`
/// pairs; returns the pre-step loss and accuracy.
pub fn discriminator_update(
    disc: &mut SkillDiscriminator,
    opt: &mut Adam,
    embeddings: &Mat,
    skills: &[usize],
) -> Result<DiscriminatorStats> {
    let mut grads = vec![0.0; disc.net().num_params()];
    let stats = disc.nll_backward(embeddings, skills, &mut grads)?;
    if !stats.loss.is_finite() {
        return Err(Error::Numerical(format!("discriminator loss is {}", stats.loss)));
    }
    opt.step(disc.net_mut().params_mut(), &grads);
    Ok(stats)
}

/// Per-epoch training summary; the CSV columns of the metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillEpochMetrics {
    pub epoch: usize,
    pub env_steps: u64,
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub policy_loss: f64,
    pub disc_loss: f64,
    pub disc_acc: f64,
    pub mean_intrinsic_reward: f64,
    /// Skills of the episodes started this epoch, in order.
    pub episode_skills: Vec<usize>,
}

pub const METRICS_HEADER: &str =
    "epoch,env_steps,q1_loss,q2_loss,policy_loss,disc_loss,disc_acc,mean_intrinsic_reward";

impl SkillEpochMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.env_steps,
            self.q1_loss,
            self.q2_loss,
            self.policy_loss,
            self.disc_loss,
            self.disc_acc,
            self.mean_intrinsic_reward
        )
    }
}

/// Everything skill discovery updates.
#[derive(Debug, Clone)]
pub struct SkillTrainer {
    pub config: Config,
    pub sac: SacTrainer,
    pub discriminator: SkillDiscriminator,
    pub disc_opt: Adam,
    pub projection: LinearProjection,
    pub prior: SkillPrior,
    pub buffer: ReplayBuffer,
    /// Epochs completed so far.
    pub epoch: usize,
    pub env_steps: u64,
}

impl SkillTrainer {
    /// The discriminator input width is the projection's output width;
    /// pass [`LinearProjection::identity`] for the baseline.
    pub fn new(config: &Config, projection: LinearProjection) -> Result<Self> {
        if projection.state_dim() != config.state_dim {
            return Err(Error::Validation(format!(
                "projection expects |S|={}, config has {}",
                projection.state_dim(),
                config.state_dim
            )));
        }
        let prior = SkillPrior::new(config.num_skills)?;
        let mut rng = component_rng(config.seed, "skill-init");
        let sac = SacTrainer::new(config, config.num_skills, &mut rng);
        let discriminator =
            SkillDiscriminator::new(projection.embedding_dim(), config.num_skills, config.hidden_width, &mut rng);
        let disc_opt = Adam::new(discriminator.net().num_params(), config.lr_discriminator);
        let shape = TransitionShape {
            state_dim: config.state_dim,
            action_dim: config.action_dim,
            num_skills: config.num_skills,
        };
        Ok(SkillTrainer {
            config: config.clone(),
            sac,
            discriminator,
            disc_opt,
            projection,
            prior,
            buffer: ReplayBuffer::new(config.buffer_capacity, shape),
            epoch: 0,
            env_steps: 0,
        })
    }

    /// Collects `env_steps_per_epoch` transitions, resampling the skill at
    /// every episode start, then runs `train_steps_per_epoch` updates.
    ///
    /// Every epoch starts a fresh episode, and all randomness of the epoch
    /// derives from `(seed, epoch)`, so a run resumed from a checkpoint
    /// continues exactly.
    pub fn run_skill_epoch<E: Environment>(&mut self, env: &mut E) -> Result<SkillEpochMetrics> {
        let cfg = &self.config;
        env.spec().expect_dims(cfg.state_dim, cfg.action_dim)?;
        let epoch = self.epoch as u64;
        env.seed(derive_indexed_seed(cfg.seed, "skill-env", epoch))?;
        let mut skill_rng = indexed_rng(cfg.seed, "skill-prior", epoch);
        let mut act_rng = indexed_rng(cfg.seed, "skill-act", epoch);
        let mut train_rng = indexed_rng(cfg.seed, "skill-train", epoch);

        let mut episode_skills = Vec::new();
        let mut state = Vec::new();
        let mut skill = 0;
        let mut fresh = true;
        for _ in 0..cfg.env_steps_per_epoch {
            if std::mem::take(&mut fresh) {
                state = env.reset()?;
                skill = self.prior.sample(&mut skill_rng);
                episode_skills.push(skill);
            }
            let action = self.sac.policy.act(&state, skill, ActionMode::Stochastic, &mut act_rng)?;
            let step = env.step(&action)?;
            self.buffer.add(Transition {
                state: std::mem::take(&mut state),
                skill,
                action,
                next_state: step.next_state.clone(),
                extrinsic_reward: step.extrinsic_reward,
                done: step.terminal(),
            })?;
            self.env_steps += 1;
            state = step.next_state;
            fresh = step.done;
        }

        let mut sums = [0.0; 6];
        for _ in 0..cfg.train_steps_per_epoch {
            let batch = self.buffer.sample(cfg.batch_size, &mut train_rng)?;
            let e = self.projection.embed_batch(&batch.next_states)?;
            let rewards: Vec<f64> = self
                .discriminator
                .log_prob_of(&e, &batch.skills)?
                .into_iter()
                .map(|l| l - self.prior.log_prob())
                .collect();
            let losses = self.sac.train_step(&batch, &rewards, &mut train_rng)?;
            let stats = discriminator_update(&mut self.discriminator, &mut self.disc_opt, &e, &batch.skills)?;
            let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
            for (s, v) in sums
                .iter_mut()
                .zip([losses.q1, losses.q2, losses.policy, stats.loss, stats.accuracy, mean_reward])
            {
                *s += v;
            }
        }
        let n = cfg.train_steps_per_epoch as f64;
        let avg = |i: usize| if n > 0.0 { sums[i] / n } else { f64::NAN };
        let metrics = SkillEpochMetrics {
            epoch: self.epoch,
            env_steps: self.env_steps,
            q1_loss: avg(0),
            q2_loss: avg(1),
            policy_loss: avg(2),
            disc_loss: avg(3),
            disc_acc: avg(4),
            mean_intrinsic_reward: avg(5),
            episode_skills,
        };
        self.epoch += 1;
        Ok(metrics)
    }
}

/// `E_p[ln p(z|s)]` and `E_p[ln q(z|s)]` by enumeration, with `p(s)` given
/// by `state_probs` and both posteriors as `|S| x K` tables. Zero-probability
/// outcomes contribute nothing.
pub fn mi_lower_bound_check(state_probs: &[f64], posterior: &Mat, variational: &Mat) -> Result<(f64, f64)> {
    let tol = 1e-9;
    let normalized = |xs: &[f64]| xs.iter().all(|&x| x >= 0.0) && (xs.iter().sum::<f64>() - 1.0).abs() <= tol;
    if posterior.rows != state_probs.len()
        || variational.rows != state_probs.len()
        || posterior.cols != variational.cols
    {
        return Err(Error::Validation("table shapes disagree".into()));
    }
    if !normalized(state_probs) {
        return Err(Error::Validation("state distribution is not normalized".into()));
    }
    for s in 0..state_probs.len() {
        if !normalized(posterior.row(s)) || !normalized(variational.row(s)) {
            return Err(Error::Validation(format!("posterior row {s} is not normalized")));
        }
    }
    let mut exact = 0.0;
    let mut bound = 0.0;
    for (s, &ps) in state_probs.iter().enumerate() {
        for z in 0..posterior.cols {
            let joint = ps * posterior.get(s, z);
            if joint > 0.0 {
                exact += joint * posterior.get(s, z).ln();
                bound += joint * variational.get(s, z).ln();
            }
        }
    }
    Ok((exact, bound))
}
