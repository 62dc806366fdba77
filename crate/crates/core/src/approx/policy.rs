//! Skill-conditioned policy with a tanh-squashed Gaussian-mixture head.
//!
//! The network maps `[state | one_hot(skill)]` to, per row, the mixture
//! logits (`C`), the component means (`C x A`, component-major) and the raw
//! component log-stds (`C x A`). Log-stds are clamped to
//! `[LOG_STD_MIN, LOG_STD_MAX]` before use.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, softmax, softplus, Mat, Mlp, Trace};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Squashed actions are kept this far inside the open unit box; `tanh`
/// rounds to exactly 1.0 for pre-squash values beyond ~19.
const ACTION_LIMIT: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Sample a component, then a Gaussian, then squash.
    Stochastic,
    /// `tanh` of the mean of the most probable component.
    Deterministic,
    /// Gaussian reparameterization per component and straight-through
    /// Gumbel-Softmax across components, so the action is differentiable.
    Reparameterized,
}

impl std::str::FromStr for ActionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(ActionMode::Stochastic),
            "deterministic" => Ok(ActionMode::Deterministic),
            "reparameterized" => Ok(ActionMode::Reparameterized),
            other => Err(Error::Validation(format!("unknown action mode {other:?}"))),
        }
    }
}

/// Squash to the open unit interval.
pub fn squash(u: f64) -> f64 {
    u.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT)
}

/// `ln(1 - tanh(u)^2)` in the cancellation-free form `2 (ln 2 - u - softplus(-2u))`.
pub fn log_squash_jacobian(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Borrowed view of one row of head output.
#[derive(Debug, Clone, Copy)]
pub struct MixtureView<'a> {
    pub logits: &'a [f64],
    pub means: &'a [f64],
    /// Unclamped log-stds as produced by the network.
    pub raw_log_stds: &'a [f64],
    pub action_dim: usize,
}

impl<'a> MixtureView<'a> {
    pub fn from_row(row: &'a [f64], components: usize, action_dim: usize) -> Self {
        let ca = components * action_dim;
        MixtureView {
            logits: &row[..components],
            means: &row[components..components + ca],
            raw_log_stds: &row[components + ca..components + 2 * ca],
            action_dim,
        }
    }

    pub fn components(&self) -> usize {
        self.logits.len()
    }

    pub fn log_std(&self, k: usize, i: usize) -> f64 {
        self.raw_log_stds[k * self.action_dim + i].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn mean(&self, k: usize, i: usize) -> f64 {
        self.means[k * self.action_dim + i]
    }

    /// Index of the most probable component (first on ties).
    pub fn top_component(&self) -> usize {
        let mut best = 0;
        for (k, &l) in self.logits.iter().enumerate() {
            if l > self.logits[best] {
                best = k;
            }
        }
        best
    }

    /// `ln N(u; mu_k, sigma_k)` summed over action dimensions.
    fn component_log_density(&self, k: usize, u: &[f64]) -> f64 {
        (0..self.action_dim)
            .map(|i| {
                let ls = self.log_std(k, i);
                let z = (u[i] - self.mean(k, i)) * (-ls).exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }
}

/// Log-density of the squashed action `tanh(u)`, given the pre-squash `u`:
/// `ln sum_k w_k N(u; mu_k, sigma_k) - sum_i ln(1 - tanh(u_i)^2)`.
pub fn mixture_log_prob(view: MixtureView<'_>, u: &[f64]) -> f64 {
    let lse_logits = log_sum_exp(view.logits);
    let joint: Vec<f64> = (0..view.components())
        .map(|k| view.logits[k] - lse_logits + view.component_log_density(k, u))
        .collect();
    let correction: f64 = u.iter().map(|&x| log_squash_jacobian(x)).sum();
    log_sum_exp(&joint) - correction
}

/// Gradients of [`mixture_log_prob`] w.r.t. one head row and `u`.
#[derive(Debug, Clone)]
pub struct LogProbGrad {
    pub value: f64,
    /// Same layout as the head row: logits, means, raw log-stds.
    pub d_head: Vec<f64>,
    pub d_u: Vec<f64>,
}

pub fn mixture_log_prob_grad(view: MixtureView<'_>, u: &[f64]) -> LogProbGrad {
    let c = view.components();
    let a = view.action_dim;
    let lse_logits = log_sum_exp(view.logits);
    let weights: Vec<f64> = view.logits.iter().map(|l| (l - lse_logits).exp()).collect();
    let joint: Vec<f64> = (0..c)
        .map(|k| view.logits[k] - lse_logits + view.component_log_density(k, u))
        .collect();
    let lse_joint = log_sum_exp(&joint);
    let resp: Vec<f64> = joint.iter().map(|j| (j - lse_joint).exp()).collect();

    let mut d_head = vec![0.0; c + 2 * c * a];
    let mut d_u = vec![0.0; a];
    for k in 0..c {
        d_head[k] = resp[k] - weights[k];
        for i in 0..a {
            let raw = view.raw_log_stds[k * a + i];
            let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let inv_var = (-2.0 * ls).exp();
            let diff = u[i] - view.mean(k, i);
            d_head[c + k * a + i] = resp[k] * diff * inv_var;
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                d_head[c + c * a + k * a + i] = resp[k] * (diff * diff * inv_var - 1.0);
            }
            d_u[i] -= resp[k] * diff * inv_var;
        }
    }
    // d/du of -ln(1 - tanh(u)^2) is 2 tanh(u)
    for (d, &x) in d_u.iter_mut().zip(u) {
        *d += 2.0 * x.tanh();
    }
    let correction: f64 = u.iter().map(|&x| log_squash_jacobian(x)).sum();
    LogProbGrad {
        value: lse_joint - correction,
        d_head,
        d_u,
    }
}

/// Gumbel-Softmax relaxation of a categorical draw: `softmax((logits + g) / T)`
/// with `g` standard Gumbel noise.
pub fn gumbel_softmax<R: Rng + ?Sized>(logits: &[f64], temperature: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::Validation(format!("gumbel temperature must be > 0, got {temperature}")));
    }
    let noise: Vec<f64> = logits.iter().map(|_| sample_gumbel(rng)).collect();
    Ok(relaxed_weights(logits, &noise, temperature))
}

pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // open interval keeps both logarithms finite
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    -(-u.ln()).ln()
}

/// Softmax of `(logits + noise) / temperature`.
pub fn relaxed_weights(logits: &[f64], noise: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(l, g)| (l + g) / temperature)
        .collect();
    softmax(&scaled)
}

/// Noise drawn for one reparameterized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamNoise {
    /// Gumbel noise per component.
    pub gumbel: Vec<f64>,
    /// Standard normal noise, `C x A`.
    pub normal: Vec<f64>,
}

impl ReparamNoise {
    pub fn sample<R: Rng + ?Sized>(components: usize, action_dim: usize, rng: &mut R) -> Self {
        ReparamNoise {
            gumbel: (0..components).map(|_| sample_gumbel(rng)).collect(),
            normal: (0..components * action_dim)
                .map(|_| StandardNormal.sample(rng))
                .collect(),
        }
    }
}

/// Pre-squash value of a reparameterized sample, straight-through style:
/// the forward value is `mu_k + sigma_k eps_k` for the component `k` with the
/// largest Gumbel-Softmax weight, so it is an exact draw from the mixture.
/// Returns `u` and the soft weights `g` that carry the logit gradient.
pub fn reparam_pre_squash(view: MixtureView<'_>, noise: &ReparamNoise, temperature: f64) -> (Vec<f64>, Vec<f64>) {
    let a = view.action_dim;
    let g = relaxed_weights(view.logits, &noise.gumbel, temperature);
    let k = argmax(&g);
    let u = (0..a)
        .map(|i| view.mean(k, i) + view.log_std(k, i).exp() * noise.normal[k * a + i])
        .collect();
    (u, g)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `sum_k g_k (mu_k + sigma_k eps_k)`: the relaxed sample whose gradient the
/// straight-through estimator uses for the logits.
pub fn relaxed_pre_squash(view: MixtureView<'_>, noise: &ReparamNoise, temperature: f64) -> Vec<f64> {
    let a = view.action_dim;
    let g = relaxed_weights(view.logits, &noise.gumbel, temperature);
    let mut u = vec![0.0; a];
    for (k, gk) in g.iter().enumerate() {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += gk * (view.mean(k, i) + view.log_std(k, i).exp() * noise.normal[k * a + i]);
        }
    }
    u
}

/// Backpropagates `d_u` (loss gradient w.r.t. the pre-squash sample) to the
/// head row, accumulating into `d_head`. Means and log-stds get the exact
/// gradient of the selected component; logits get the gradient of
/// [`relaxed_pre_squash`].
pub fn reparam_backward(
    view: MixtureView<'_>,
    noise: &ReparamNoise,
    weights: &[f64],
    temperature: f64,
    d_u: &[f64],
    d_head: &mut [f64],
) {
    let c = view.components();
    let a = view.action_dim;
    let chosen = argmax(weights);
    let mut d_g = vec![0.0; c];
    for k in 0..c {
        let hard = if k == chosen { 1.0 } else { 0.0 };
        for i in 0..a {
            let raw = view.raw_log_stds[k * a + i];
            let sigma = view.log_std(k, i).exp();
            let eps = noise.normal[k * a + i];
            d_g[k] += d_u[i] * (view.mean(k, i) + sigma * eps);
            d_head[c + k * a + i] += d_u[i] * hard;
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                d_head[c + c * a + k * a + i] += d_u[i] * hard * sigma * eps;
            }
        }
    }
    let dot: f64 = d_g.iter().zip(weights).map(|(d, g)| d * g).sum();
    for k in 0..c {
        d_head[k] += weights[k] * (d_g[k] - dot) / temperature;
    }
}

/// Result of sampling actions for a batch of states.
#[derive(Debug, Clone)]
pub struct ActionSample {
    /// Squashed actions, `B x A`.
    pub actions: Mat,
    /// Pre-squash values, `B x A`.
    pub pre_squash: Mat,
    /// `ln pi(a | s, z)` per row.
    pub log_probs: Vec<f64>,
}

/// Everything the backward pass of a reparameterized batch needs.
#[derive(Debug)]
pub struct ReparamTape {
    head: Mat,
    trace: Trace,
    noise: Vec<ReparamNoise>,
    weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmPolicy {
    net: Mlp,
    state_dim: usize,
    num_skills: usize,
    action_dim: usize,
    components: usize,
    temperature: f64,
}

impl GmmPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        num_skills: usize,
        action_dim: usize,
        components: usize,
        hidden: usize,
        temperature: f64,
        rng: &mut R,
    ) -> Self {
        let out = components + 2 * components * action_dim;
        GmmPolicy {
            net: Mlp::new(&[state_dim + num_skills, hidden, hidden, out], rng),
            state_dim,
            num_skills,
            action_dim,
            components,
            temperature,
        }
    }

    /// Wraps an existing network; its layout must match the head size.
    pub fn from_net(
        net: Mlp,
        state_dim: usize,
        num_skills: usize,
        action_dim: usize,
        components: usize,
        temperature: f64,
    ) -> Result<Self> {
        let out = components + 2 * components * action_dim;
        if net.input_dim() != state_dim + num_skills || net.output_dim() != out {
            return Err(Error::Validation(format!(
                "policy network {:?} does not fit |S|={state_dim}, K={num_skills}, |A|={action_dim}, C={components}",
                net.sizes()
            )));
        }
        Ok(GmmPolicy {
            net,
            state_dim,
            num_skills,
            action_dim,
            components,
            temperature,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn num_skills(&self) -> usize {
        self.num_skills
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Network input `[state | one_hot(skill)]`.
    pub fn input(&self, states: &Mat, skills: &[usize]) -> Result<Mat> {
        if states.cols != self.state_dim || states.rows != skills.len() {
            return Err(Error::Validation(format!(
                "policy expects {} x {} states, got {} x {}",
                skills.len(),
                self.state_dim,
                states.rows,
                states.cols
            )));
        }
        if let Some(&z) = skills.iter().find(|&&z| z >= self.num_skills) {
            return Err(Error::Validation(format!("skill {z} outside [0, {})", self.num_skills)));
        }
        Ok(Mat::hcat(&[states, &Mat::one_hot(skills, self.num_skills)]))
    }

    /// Raw head output, one row per state.
    pub fn head(&self, states: &Mat, skills: &[usize]) -> Result<Mat> {
        self.net.predict(&self.input(states, skills)?)
    }

    pub fn view<'a>(&self, head_row: &'a [f64]) -> MixtureView<'a> {
        MixtureView::from_row(head_row, self.components, self.action_dim)
    }

    /// `ln pi(tanh(u) | s, z)` for given pre-squash values.
    pub fn log_prob(&self, states: &Mat, skills: &[usize], pre_squash: &Mat) -> Result<Vec<f64>> {
        let head = self.head(states, skills)?;
        Ok((0..head.rows)
            .map(|r| mixture_log_prob(self.view(head.row(r)), pre_squash.row(r)))
            .collect())
    }

    /// Draws actions without recording anything for backprop.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        states: &Mat,
        skills: &[usize],
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<ActionSample> {
        let head = self.head(states, skills)?;
        let (b, a) = (head.rows, self.action_dim);
        let mut pre = Mat::zeros(b, a);
        for r in 0..b {
            let view = self.view(head.row(r));
            let u = pre.row_mut(r);
            match mode {
                ActionMode::Deterministic => {
                    let k = view.top_component();
                    for (i, ui) in u.iter_mut().enumerate() {
                        *ui = view.mean(k, i);
                    }
                }
                ActionMode::Stochastic => {
                    let w = softmax(view.logits);
                    let mut pick: f64 = rng.gen();
                    let mut k = w.len() - 1;
                    for (j, wj) in w.iter().enumerate() {
                        if pick < *wj {
                            k = j;
                            break;
                        }
                        pick -= wj;
                    }
                    for (i, ui) in u.iter_mut().enumerate() {
                        let eps: f64 = StandardNormal.sample(rng);
                        *ui = view.mean(k, i) + view.log_std(k, i).exp() * eps;
                    }
                }
                ActionMode::Reparameterized => {
                    let noise = ReparamNoise::sample(self.components, a, rng);
                    u.copy_from_slice(&reparam_pre_squash(view, &noise, self.temperature).0);
                }
            }
        }
        Ok(self.finish_sample(&head, pre))
    }

    fn finish_sample(&self, head: &Mat, pre_squash: Mat) -> ActionSample {
        let actions = Mat::from_vec(
            pre_squash.rows,
            pre_squash.cols,
            pre_squash.data.iter().map(|&u| squash(u)).collect(),
        );
        let log_probs = (0..head.rows)
            .map(|r| mixture_log_prob(self.view(head.row(r)), pre_squash.row(r)))
            .collect();
        ActionSample {
            actions,
            pre_squash,
            log_probs,
        }
    }

    /// Single-state convenience wrapper around [`GmmPolicy::sample`].
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], skill: usize, mode: ActionMode, rng: &mut R) -> Result<Vec<f64>> {
        let states = Mat::from_vec(1, state.len(), state.to_vec());
        Ok(self.sample(&states, &[skill], mode, rng)?.actions.data)
    }

    /// Reparameterized batch sample, keeping what [`GmmPolicy::reparam_backward`] needs.
    pub fn sample_reparam<R: Rng + ?Sized>(
        &self,
        states: &Mat,
        skills: &[usize],
        rng: &mut R,
    ) -> Result<(ActionSample, ReparamTape)> {
        let noise: Vec<ReparamNoise> = (0..states.rows)
            .map(|_| ReparamNoise::sample(self.components, self.action_dim, rng))
            .collect();
        self.sample_reparam_with(states, skills, noise)
    }

    /// Same as [`GmmPolicy::sample_reparam`] with caller-provided noise.
    pub fn sample_reparam_with(
        &self,
        states: &Mat,
        skills: &[usize],
        noise: Vec<ReparamNoise>,
    ) -> Result<(ActionSample, ReparamTape)> {
        let (head, trace) = self.net.forward(&self.input(states, skills)?)?;
        let mut pre = Mat::zeros(head.rows, self.action_dim);
        let mut weights = Vec::with_capacity(head.rows);
        for (r, n) in noise.iter().enumerate() {
            let (u, g) = reparam_pre_squash(self.view(head.row(r)), n, self.temperature);
            pre.row_mut(r).copy_from_slice(&u);
            weights.push(g);
        }
        let sample = self.finish_sample(&head, pre);
        Ok((
            sample,
            ReparamTape {
                head,
                trace,
                noise,
                weights,
            },
        ))
    }

    /// Gradient of `sum_r (d_action_r . a_r + d_log_prob_r * ln pi(a_r))`
    /// w.r.t. the policy parameters, for a batch drawn by
    /// [`GmmPolicy::sample_reparam`]. Accumulates into `grads`.
    pub fn reparam_backward(
        &self,
        tape: &ReparamTape,
        sample: &ActionSample,
        d_actions: &Mat,
        d_log_probs: &[f64],
        grads: &mut [f64],
    ) {
        let width = tape.head.cols;
        let mut d_head = Mat::zeros(tape.head.rows, width);
        for r in 0..tape.head.rows {
            let view = self.view(tape.head.row(r));
            let u = sample.pre_squash.row(r);
            let lp = mixture_log_prob_grad(view, u);
            let row = d_head.row_mut(r);
            for (d, g) in row.iter_mut().zip(&lp.d_head) {
                *d += d_log_probs[r] * g;
            }
            let d_u: Vec<f64> = (0..self.action_dim)
                .map(|i| {
                    let t = u[i].tanh();
                    d_actions.get(r, i) * (1.0 - t * t) + d_log_probs[r] * lp.d_u[i]
                })
                .collect();
            reparam_backward(view, &tape.noise[r], &tape.weights[r], self.temperature, &d_u, row);
        }
        self.net.backward(&tape.trace, &d_head, Some(grads), false);
    }

    /// Gradient of `sum_r ln pi(tanh(u_r) | s_r, z_r)` for fixed `u` w.r.t.
    /// the policy parameters. Returns the per-row log-probabilities.
    pub fn log_prob_backward(
        &self,
        states: &Mat,
        skills: &[usize],
        pre_squash: &Mat,
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        let (head, trace) = self.net.forward(&self.input(states, skills)?)?;
        let mut d_head = Mat::zeros(head.rows, head.cols);
        let mut values = Vec::with_capacity(head.rows);
        for r in 0..head.rows {
            let g = mixture_log_prob_grad(self.view(head.row(r)), pre_squash.row(r));
            d_head.row_mut(r).copy_from_slice(&g.d_head);
            values.push(g.value);
        }
        self.net.backward(&trace, &d_head, Some(grads), false);
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::component_rng;

    fn row(logits: &[f64], means: &[f64], log_stds: &[f64]) -> Vec<f64> {
        [logits, means, log_stds].concat()
    }

    #[test]
    fn standard_normal_at_mode() {
        let r = row(&[0.0], &[0.0], &[0.0]);
        let lp = mixture_log_prob(MixtureView::from_row(&r, 1, 1), &[0.0]);
        assert!((lp + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        assert!((lp + 0.918_94).abs() < 1e-5);
    }

    #[test]
    fn independent_dimensions_add() {
        let r = row(&[0.0], &[0.0, 0.0], &[0.0, 0.0]);
        let lp = mixture_log_prob(MixtureView::from_row(&r, 1, 2), &[0.0, 0.0]);
        assert!((lp + 1.837_88).abs() < 1e-5);
    }

    #[test]
    fn jacobian_form_is_stable() {
        for u in [-30.0, -3.0, -0.1, 0.0, 0.7, 5.0, 40.0] {
            let v = log_squash_jacobian(u);
            assert!(v.is_finite() && v <= 0.0);
            if u.abs() < 5.0 {
                let direct = (1.0 - u.tanh().powi(2)).ln();
                assert!((v - direct).abs() < 1e-10);
            }
        }
    }

    /// Squashed density integrates to one over (-1, 1) (midpoint rule in `a`).
    #[test]
    fn squashed_density_has_unit_mass() {
        let mut rng = component_rng(1, "mass");
        for _ in 0..5 {
            let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let means: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let stds: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..0.5)).collect();
            let r = row(&logits, &means, &stds);
            let view = MixtureView::from_row(&r, 4, 1);
            let n = 200_000;
            let h = 2.0 / n as f64;
            let mass: f64 = (0..n)
                .map(|j| {
                    let a = -1.0 + (j as f64 + 0.5) * h;
                    mixture_log_prob(view, &[a.atanh()]).exp() * h
                })
                .sum();
            assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        }
    }

    #[test]
    fn log_prob_grad_matches_finite_differences() {
        let mut rng = component_rng(2, "lp-grad");
        for _ in 0..10 {
            let (c, a) = (4, 3);
            let mut r: Vec<f64> = (0..c + 2 * c * a).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..a).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = mixture_log_prob_grad(MixtureView::from_row(&r, c, a), &u);
            let h = 1e-6;
            for p in 0..r.len() {
                let orig = r[p];
                r[p] = orig + h;
                let fp = mixture_log_prob(MixtureView::from_row(&r, c, a), &u);
                r[p] = orig - h;
                let fm = mixture_log_prob(MixtureView::from_row(&r, c, a), &u);
                r[p] = orig;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - g.d_head[p]).abs() < 1e-6, "head {p}: {fd} vs {}", g.d_head[p]);
            }
            let mut uu = u.clone();
            for i in 0..a {
                uu[i] = u[i] + h;
                let fp = mixture_log_prob(MixtureView::from_row(&r, c, a), &uu);
                uu[i] = u[i] - h;
                let fm = mixture_log_prob(MixtureView::from_row(&r, c, a), &uu);
                uu[i] = u[i];
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - g.d_u[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn clamped_log_std_has_no_gradient() {
        let r = row(&[0.0], &[0.1], &[5.0]);
        let g = mixture_log_prob_grad(MixtureView::from_row(&r, 1, 1), &[0.3]);
        assert_eq!(g.d_head[2], 0.0);
        assert_eq!(MixtureView::from_row(&r, 1, 1).log_std(0, 0), LOG_STD_MAX);
    }

    #[test]
    fn gumbel_softmax_dominant_logit() {
        let mut rng = component_rng(3, "gumbel");
        for _ in 0..100 {
            let w = gumbel_softmax(&[20.0, -20.0], 0.1, &mut rng).unwrap();
            assert!((w[0] - 1.0).abs() < 1e-4 && w[1].abs() < 1e-4, "{w:?}");
        }
    }

    #[test]
    fn gumbel_softmax_high_temperature_is_uniform() {
        let mut rng = component_rng(3, "gumbel-hot");
        for _ in 0..100 {
            let w = gumbel_softmax(&[1.0, -2.0, 0.5, 3.0], 1e6, &mut rng).unwrap();
            for x in w {
                assert!((x - 0.25).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gumbel_softmax_rejects_bad_temperature() {
        let mut rng = component_rng(3, "gumbel-bad");
        assert!(gumbel_softmax(&[0.0, 0.0], 0.0, &mut rng).is_err());
        assert!(gumbel_softmax(&[0.0, 0.0], -1.0, &mut rng).is_err());
    }

    #[test]
    fn gumbel_softmax_equal_logits_mean_is_uniform() {
        // Monte-Carlo oracle: by symmetry E[w_k] = 1/K; the standard error
        // is estimated from the sample itself.
        let mut rng = component_rng(4, "gumbel-mc");
        let (k, n) = (3, 100_000);
        let mut sum = vec![0.0; k];
        let mut sum_sq = vec![0.0; k];
        for _ in 0..n {
            let w = gumbel_softmax(&[0.3; 3], 1.0, &mut rng).unwrap();
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-12 && w.iter().all(|&x| x >= 0.0));
            for j in 0..k {
                sum[j] += w[j];
                sum_sq[j] += w[j] * w[j];
            }
        }
        for j in 0..k {
            let mean = sum[j] / n as f64;
            let var = sum_sq[j] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - 1.0 / k as f64).abs() < 5.0 * se, "component {j}: {mean} (se {se})");
        }
    }

    #[test]
    fn reparam_backward_matches_finite_differences() {
        // Means and log-stds: the hard selection is locally constant, so the
        // forward value is differentiated directly. Logits: the relaxed
        // sample is.
        let mut rng = component_rng(5, "reparam-grad");
        let (c, a, t) = (4, 2, 0.7);
        for _ in 0..10 {
            let mut r: Vec<f64> = (0..c + 2 * c * a).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise = ReparamNoise::sample(c, a, &mut rng);
            let coef: Vec<f64> = (0..a).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dot = |u: Vec<f64>| -> f64 { u.iter().zip(&coef).map(|(x, y)| x * y).sum() };
            let hard = |r: &[f64]| dot(reparam_pre_squash(MixtureView::from_row(r, c, a), &noise, t).0);
            let soft = |r: &[f64]| dot(relaxed_pre_squash(MixtureView::from_row(r, c, a), &noise, t));
            let (_, g) = reparam_pre_squash(MixtureView::from_row(&r, c, a), &noise, t);
            let mut d_head = vec![0.0; r.len()];
            reparam_backward(MixtureView::from_row(&r, c, a), &noise, &g, t, &coef, &mut d_head);
            let h = 1e-6;
            for p in 0..r.len() {
                let f: &dyn Fn(&[f64]) -> f64 = if p < c { &soft } else { &hard };
                let orig = r[p];
                r[p] = orig + h;
                let fp = f(&r);
                r[p] = orig - h;
                let fm = f(&r);
                r[p] = orig;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - d_head[p]).abs() < 1e-6, "param {p}: {fd} vs {}", d_head[p]);
            }
        }
    }

    #[test]
    fn reparam_sample_is_a_mixture_draw() {
        // two far-apart narrow components: every sample sits near one mean
        let r = [0.0, 0.0, -3.0, 3.0, -6.0, -6.0];
        let view = MixtureView::from_row(&r, 2, 1);
        let mut rng = component_rng(5, "st-draw");
        let mut left = 0;
        for _ in 0..2000 {
            let (u, _) = reparam_pre_squash(view, &ReparamNoise::sample(2, 1, &mut rng), 1.0);
            assert!((u[0].abs() - 3.0).abs() < 0.05, "{u:?}");
            left += (u[0] < 0.0) as usize;
        }
        assert!((800..1200).contains(&left), "{left}");
    }

    fn tiny_policy(components: usize, seed: u64) -> GmmPolicy {
        GmmPolicy::new(3, 2, 2, components, 16, 1.0, &mut component_rng(seed, "policy"))
    }

    #[test]
    fn degenerate_mixture_acts_at_zero() {
        let mut net = Mlp::zeros(&[2, 4, 4, 3]);
        net.layer_mut(2).1.copy_from_slice(&[0.0, 0.0, -20.0]);
        let policy = GmmPolicy::from_net(net, 1, 1, 1, 1, 1.0).unwrap();
        let mut rng = component_rng(0, "deg");
        for mode in [ActionMode::Stochastic, ActionMode::Reparameterized, ActionMode::Deterministic] {
            let a = policy.act(&[0.4], 0, mode, &mut rng).unwrap();
            assert!(a[0].abs() < 1e-6, "{mode:?}: {a:?}");
        }
    }

    #[test]
    fn large_mean_saturates() {
        let mut net = Mlp::zeros(&[2, 4, 4, 3]);
        net.layer_mut(2).1.copy_from_slice(&[0.0, 10.0, 0.0]);
        let policy = GmmPolicy::from_net(net, 1, 1, 1, 1, 1.0).unwrap();
        let mut rng = component_rng(0, "sat");
        for _ in 0..200 {
            let a = policy.act(&[0.0], 0, ActionMode::Stochastic, &mut rng).unwrap();
            assert!(a[0] > 0.999 && a[0] < 1.0, "{a:?}");
        }
    }

    #[test]
    fn deterministic_is_repeatable_and_scale_invariant() {
        let policy = tiny_policy(4, 8);
        let mut rng = component_rng(0, "det");
        let s = [0.2, -0.4, 0.9];
        let a1 = policy.act(&s, 1, ActionMode::Deterministic, &mut rng).unwrap();
        let a2 = policy.act(&s, 1, ActionMode::Deterministic, &mut rng).unwrap();
        assert_eq!(a1, a2);
        let head = policy.head(&Mat::from_vec(1, 3, s.to_vec()), &[1]).unwrap();
        let view = policy.view(head.row(0));
        let scaled: Vec<f64> = view.logits.iter().map(|l| l * 3.7).collect();
        let mut rescaled = head.row(0).to_vec();
        rescaled[..4].copy_from_slice(&scaled);
        assert_eq!(policy.view(&rescaled).top_component(), view.top_component());
    }

    #[test]
    fn sampled_actions_inside_open_box() {
        let policy = tiny_policy(4, 9);
        let mut rng = component_rng(0, "box");
        let states = Mat::from_vec(64, 3, (0..192).map(|_| rng.gen_range(-50.0..50.0)).collect());
        let skills: Vec<usize> = (0..64).map(|i| i % 2).collect();
        for mode in [ActionMode::Stochastic, ActionMode::Reparameterized, ActionMode::Deterministic] {
            let s = policy.sample(&states, &skills, mode, &mut rng).unwrap();
            assert!(s.actions.data.iter().all(|a| a.abs() < 1.0));
            assert!(s.log_probs.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn invalid_skill_rejected() {
        let policy = tiny_policy(4, 1);
        let mut rng = component_rng(0, "skill");
        assert!(policy.act(&[0.0; 3], 2, ActionMode::Stochastic, &mut rng).is_err());
        assert!("greedy".parse::<ActionMode>().is_err());
    }

    /// Pathwise gradient of E[tanh(mu + sigma eps)] w.r.t. mu, estimated from
    /// 1e5 reparameterized samples, against the same derivative by quadrature.
    #[test]
    fn reparam_mean_gradient_matches_quadrature() {
        let (mu, log_std) = (0.6, -0.7f64);
        let sigma = log_std.exp();
        let mut net = Mlp::zeros(&[2, 4, 4, 3]);
        net.layer_mut(2).1.copy_from_slice(&[0.0, mu, log_std]);
        let policy = GmmPolicy::from_net(net, 1, 1, 1, 1, 1.0).unwrap();
        let mut rng = component_rng(6, "pathwise");
        let n = 100_000;
        let states = Mat::zeros(n, 1);
        let skills = vec![0; n];
        let (sample, tape) = policy.sample_reparam(&states, &skills, &mut rng).unwrap();
        let d_actions = Mat::from_vec(n, 1, vec![1.0 / n as f64; n]);
        let mut grads = vec![0.0; policy.net().num_params()];
        policy.reparam_backward(&tape, &sample, &d_actions, &vec![0.0; n], &mut grads);
        // the component mean is the second output bias
        let estimate = grads[policy.net().num_params() - 2];
        let per_sample: Vec<f64> = sample.pre_squash.data.iter().map(|u| 1.0 - u.tanh().powi(2)).collect();
        let m = per_sample.iter().sum::<f64>() / n as f64;
        let var = per_sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        // d/dmu E[tanh(mu + sigma x)] = integral of tanh'(mu + sigma x) phi(x) dx
        let steps = 200_000;
        let h = 20.0 / steps as f64;
        let quadrature: f64 = (0..steps)
            .map(|j| {
                let x = -10.0 + (j as f64 + 0.5) * h;
                let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                (1.0 - (mu + sigma * x).tanh().powi(2)) * phi * h
            })
            .sum();
        assert!((estimate - quadrature).abs() < 3.0 * se, "{estimate} vs {quadrature} (se {se})");
        // as sigma shrinks the target is the derivative of tanh at the mean
        assert!((quadrature - (1.0 - mu.tanh().powi(2))).abs() < 0.1);
    }
}
