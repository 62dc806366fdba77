//! Encoder pretraining: label states by the policy that visited them, then
//! fit the linear projection jointly with an expert-vs-random classifier.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::approx::{ActionMode, ExpertClassifier, GmmPolicy, LinearProjection};
use crate::config::Config;
use crate::dataset::{LabeledState, LabeledStateDataset};
use crate::env::Environment;
use crate::error::{ensure_finite, Error, Result};
use crate::nn::{Adam, Mat};
use crate::seeding::component_rng;

/// Uniform draw from the open interval (-1, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let a = rng.gen_range(-1.0..1.0);
        if a > -1.0 {
            return a;
        }
    }
}

/// Rolls out `n_traj` trajectories of `horizon` steps with the expert
/// (stochastic mode, skill 0) and as many with uniform random actions, and
/// labels every visited next-state by its source. An episode that ends
/// before `horizon` is continued from a fresh reset.
///
/// The standardizer is fitted over both labels unless `standardize` is off.
pub fn collect_labeled_states<E: Environment>(
    env: &mut E,
    expert: &GmmPolicy,
    n_traj: usize,
    horizon: usize,
    seed: u64,
    standardize: bool,
) -> Result<LabeledStateDataset> {
    let spec = env.spec().clone();
    spec.expect_dims(expert.state_dim(), expert.action_dim())?;
    if n_traj == 0 || horizon == 0 {
        return Err(Error::Config("n_traj and horizon must be positive".into()));
    }
    let mut samples = Vec::with_capacity(2 * n_traj * horizon);
    for expert_label in [true, false] {
        let tag = if expert_label { "collect-expert" } else { "collect-random" };
        env.seed(crate::seeding::derive_seed(seed, tag))?;
        let mut rng = component_rng(seed, &format!("{tag}-act"));
        for _ in 0..n_traj {
            let mut state = env.reset()?;
            for _ in 0..horizon {
                let action = if expert_label {
                    expert.act(&state, 0, ActionMode::Stochastic, &mut rng)?
                } else {
                    (0..spec.action_dim).map(|_| open_unit(&mut rng)).collect()
                };
                let step = env.step(&action)?;
                samples.push(LabeledState {
                    state: step.next_state.clone(),
                    expert: expert_label,
                });
                state = if step.done { env.reset()? } else { step.next_state };
            }
        }
    }
    let dataset = LabeledStateDataset::new(samples)?;
    Ok(if standardize { dataset } else { dataset.without_standardization() })
}

/// Result of [`pretrain_encoder`]. The classifier is not part of it.
#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub projection: LinearProjection,
    pub held_out_accuracy: f64,
    pub train_accuracy: f64,
    /// Training loss before each step.
    pub losses: Vec<f64>,
}

impl PretrainOutcome {
    pub fn steps(&self) -> usize {
        self.losses.len()
    }
}

/// Stratified split: `(train, held_out)` index lists with 20% of each label
/// held out.
pub fn stratified_split<R: Rng + ?Sized>(dataset: &LabeledStateDataset, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for label in [true, false] {
        let mut idx: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.samples[i].expert == label)
            .collect();
        idx.shuffle(rng);
        let n_held = (idx.len() as f64 * 0.2).round() as usize;
        held.extend_from_slice(&idx[..n_held]);
        train.extend_from_slice(&idx[n_held..]);
    }
    (train, held)
}

fn standardized_rows(dataset: &LabeledStateDataset, idx: &[usize]) -> (Mat, Vec<bool>) {
    let s = dataset.state_dim();
    let mut x = Mat::zeros(idx.len(), s);
    let mut labels = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        let row = x.row_mut(r);
        row.copy_from_slice(&dataset.samples[i].state);
        dataset.standardizer.apply_in_place(row);
        labels.push(dataset.samples[i].expert);
    }
    (x, labels)
}

/// `X chi^T` for row-major `X` (`n x S`) and `chi` (`E x S`).
fn project_rows(x: &Mat, chi: &Mat) -> Mat {
    let mut e = Mat::zeros(x.rows, chi.rows);
    crate::nn::gemm(x.rows, x.cols, chi.rows, 1.0, &x.data, false, &chi.data, true, 0.0, &mut e.data);
    e
}

/// Trains `chi` (`E x S`) and a classifier on `chi s` by full-batch binary
/// cross-entropy, on 80% of the data. Stops when the loss improves by less
/// than `pretrain_min_improvement` over `pretrain_patience` steps, or after
/// `pretrain_max_steps`.
pub fn pretrain_encoder(dataset: &LabeledStateDataset, embedding_dim: usize, config: &Config) -> Result<PretrainOutcome> {
    let s = dataset.state_dim();
    if embedding_dim == 0 || embedding_dim >= s {
        return Err(Error::Config(format!(
            "embedding_dim must be in [1, {s}) for |S|={s}, got {embedding_dim}"
        )));
    }
    let mut rng = component_rng(config.seed, "pretrain");
    let (train_idx, held_idx) = stratified_split(dataset, &mut rng);
    if train_idx.is_empty() {
        return Err(Error::Validation("dataset too small to split".into()));
    }
    let (x, labels) = standardized_rows(dataset, &train_idx);

    let bound = 1.0 / (s as f64).sqrt();
    let mut chi = Mat::from_vec(
        embedding_dim,
        s,
        (0..embedding_dim * s).map(|_| rng.gen_range(-bound..bound)).collect(),
    );
    let mut clf = ExpertClassifier::new(embedding_dim, config.hidden_width, &mut rng);
    let mut chi_opt = Adam::new(chi.data.len(), config.lr_classifier);
    let mut clf_opt = Adam::new(clf.net().num_params(), config.lr_classifier);

    let mut losses = Vec::new();
    let mut clf_grads = vec![0.0; clf.net().num_params()];
    for step in 0..config.pretrain_max_steps {
        let e = project_rows(&x, &chi);
        clf_grads.iter_mut().for_each(|g| *g = 0.0);
        let (loss, d_e) = clf.bce_backward(&e, &labels, &mut clf_grads)?;
        ensure_finite("encoder pretraining loss", loss)?;
        losses.push(loss);
        let patience = config.pretrain_patience;
        if step >= patience && losses[step - patience] - loss < config.pretrain_min_improvement {
            break;
        }
        // d chi = d_e^T X
        let mut d_chi = vec![0.0; chi.data.len()];
        crate::nn::gemm(embedding_dim, x.rows, s, 1.0, &d_e.data, true, &x.data, false, 0.0, &mut d_chi);
        chi_opt.step(&mut chi.data, &d_chi);
        clf_opt.step(clf.net_mut().params_mut(), &clf_grads);
    }

    let train_accuracy = clf.accuracy(&project_rows(&x, &chi), &labels)?;
    let held_out_accuracy = if held_idx.is_empty() {
        f64::NAN
    } else {
        let (xh, lh) = standardized_rows(dataset, &held_idx);
        clf.accuracy(&project_rows(&xh, &chi), &lh)?
    };
    Ok(PretrainOutcome {
        projection: LinearProjection::new(chi, dataset.standardizer.clone())?,
        held_out_accuracy,
        train_accuracy,
        losses,
    })
}

pub fn export_projection(proj: &LinearProjection, path: impl AsRef<Path>) -> Result<()> {
    proj.write(path)
}

pub fn import_projection(path: impl AsRef<Path>) -> Result<LinearProjection> {
    LinearProjection::read(path)
}
