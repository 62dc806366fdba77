use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{log_softmax_in_place, Mat, Mlp};

/// Skill classifier `q(z | e)` producing log-softmax outputs over `K` skills.
///
/// It sees only the embedding (or the raw state in baseline mode), never
/// the skill one-hot.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillDiscriminator {
    net: Mlp,
}

/// Mean negative log-likelihood and accuracy of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorStats {
    pub loss: f64,
    pub accuracy: f64,
}

impl SkillDiscriminator {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, num_skills: usize, hidden: usize, rng: &mut R) -> Self {
        SkillDiscriminator {
            net: Mlp::new(&[input_dim, hidden, hidden, num_skills], rng),
        }
    }

    pub fn from_net(net: Mlp) -> Self {
        SkillDiscriminator { net }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn num_skills(&self) -> usize {
        self.net.output_dim()
    }

    /// Row-wise log-probabilities over skills.
    pub fn log_probs(&self, embeddings: &Mat) -> Result<Mat> {
        let mut out = self.net.predict(embeddings)?;
        for r in 0..out.rows {
            log_softmax_in_place(out.row_mut(r));
        }
        Ok(out)
    }

    pub fn log_prob_of(&self, embeddings: &Mat, skills: &[usize]) -> Result<Vec<f64>> {
        self.check_skills(embeddings, skills)?;
        let lp = self.log_probs(embeddings)?;
        Ok(skills.iter().enumerate().map(|(r, &z)| lp.get(r, z)).collect())
    }

    /// Most probable skill per row.
    pub fn predict(&self, embeddings: &Mat) -> Result<Vec<usize>> {
        let lp = self.log_probs(embeddings)?;
        Ok((0..lp.rows).map(|r| argmax(lp.row(r))).collect())
    }

    fn check_skills(&self, embeddings: &Mat, skills: &[usize]) -> Result<()> {
        if embeddings.rows != skills.len() {
            return Err(Error::Validation("embedding and skill counts differ".into()));
        }
        if let Some(&z) = skills.iter().find(|&&z| z >= self.num_skills()) {
            return Err(Error::Validation(format!("skill {z} outside [0, {})", self.num_skills())));
        }
        Ok(())
    }

    /// Mean cross-entropy of the labeled batch; accumulates its parameter
    /// gradient into `grads`.
    pub fn nll_backward(&self, embeddings: &Mat, skills: &[usize], grads: &mut [f64]) -> Result<DiscriminatorStats> {
        self.check_skills(embeddings, skills)?;
        let (mut logits, trace) = self.net.forward(embeddings)?;
        let n = skills.len() as f64;
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (r, &z) in skills.iter().enumerate() {
            let row = logits.row_mut(r);
            if argmax(row) == z {
                correct += 1;
            }
            log_softmax_in_place(row);
            loss -= row[z];
            // d/dlogits of -log softmax_z is softmax - one_hot(z)
            for (k, v) in row.iter_mut().enumerate() {
                *v = (v.exp() - if k == z { 1.0 } else { 0.0 }) / n;
            }
        }
        self.net.backward(&trace, &logits, Some(grads), false);
        Ok(DiscriminatorStats {
            loss: loss / n,
            accuracy: correct as f64 / n,
        })
    }

    pub fn nll(&self, embeddings: &Mat, skills: &[usize]) -> Result<DiscriminatorStats> {
        let lp = self.log_probs(embeddings)?;
        self.check_skills(embeddings, skills)?;
        let n = skills.len() as f64;
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (r, &z) in skills.iter().enumerate() {
            loss -= lp.get(r, z);
            if argmax(lp.row(r)) == z {
                correct += 1;
            }
        }
        Ok(DiscriminatorStats {
            loss: loss / n,
            accuracy: correct as f64 / n,
        })
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
