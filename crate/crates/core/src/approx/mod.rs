//! Function approximators: the mixture policy, Q-functions, the skill
//! discriminator, the expert classifier and the linear projection.

mod classifier;
mod critic;
mod discriminator;
mod policy;
mod projection;

pub use classifier::ExpertClassifier;
pub use critic::QFunction;
pub use discriminator::{DiscriminatorStats, SkillDiscriminator};
pub use policy::{
    gumbel_softmax, log_squash_jacobian, mixture_log_prob, mixture_log_prob_grad, relaxed_weights,
    relaxed_pre_squash, reparam_backward, reparam_pre_squash, sample_gumbel, squash, ActionMode, ActionSample, GmmPolicy,
    LogProbGrad, MixtureView, ReparamNoise, ReparamTape, LOG_STD_MAX, LOG_STD_MIN,
};
pub use projection::LinearProjection;
