use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Mat, Mlp, Trace};

/// Soft Q-function over `[state | one_hot(skill) | action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    net: Mlp,
    state_dim: usize,
    num_skills: usize,
    action_dim: usize,
}

impl QFunction {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, num_skills: usize, action_dim: usize, hidden: usize, rng: &mut R) -> Self {
        QFunction {
            net: Mlp::new(&[state_dim + num_skills + action_dim, hidden, hidden, 1], rng),
            state_dim,
            num_skills,
            action_dim,
        }
    }

    pub fn from_net(net: Mlp, state_dim: usize, num_skills: usize, action_dim: usize) -> Result<Self> {
        if net.input_dim() != state_dim + num_skills + action_dim || net.output_dim() != 1 {
            return Err(Error::Validation(format!(
                "Q network {:?} does not fit |S|={state_dim}, K={num_skills}, |A|={action_dim}",
                net.sizes()
            )));
        }
        Ok(QFunction {
            net,
            state_dim,
            num_skills,
            action_dim,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input(&self, states: &Mat, skills: &[usize], actions: &Mat) -> Result<Mat> {
        if states.cols != self.state_dim || actions.cols != self.action_dim {
            return Err(Error::Validation(format!(
                "Q expects |S|={}, |A|={}, got {} and {}",
                self.state_dim, self.action_dim, states.cols, actions.cols
            )));
        }
        if states.rows != skills.len() || actions.rows != skills.len() {
            return Err(Error::Validation("Q input batch sizes differ".into()));
        }
        if let Some(&z) = skills.iter().find(|&&z| z >= self.num_skills) {
            return Err(Error::Validation(format!("skill {z} outside [0, {})", self.num_skills)));
        }
        Ok(Mat::hcat(&[states, &Mat::one_hot(skills, self.num_skills), actions]))
    }

    pub fn values(&self, states: &Mat, skills: &[usize], actions: &Mat) -> Result<Vec<f64>> {
        Ok(self.net.predict(&self.input(states, skills, actions)?)?.data)
    }

    pub fn forward(&self, states: &Mat, skills: &[usize], actions: &Mat) -> Result<(Vec<f64>, Trace)> {
        let (out, trace) = self.net.forward(&self.input(states, skills, actions)?)?;
        Ok((out.data, trace))
    }

    /// Gradient w.r.t. the action columns of the input for upstream `d_values`.
    pub fn action_gradient(&self, trace: &Trace, d_values: &[f64]) -> Mat {
        let d_out = Mat::from_vec(d_values.len(), 1, d_values.to_vec());
        let d_in = self
            .net
            .backward(trace, &d_out, None, true)
            .expect("input gradient requested");
        d_in.columns(self.state_dim + self.num_skills, self.action_dim)
    }
}
