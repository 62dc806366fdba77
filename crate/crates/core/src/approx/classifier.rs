use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{sigmoid, softplus, Mat, Mlp};

/// Largest double below one.
const PROB_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Binary expert-vs-random classifier over embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertClassifier {
    net: Mlp,
}

impl ExpertClassifier {
    pub fn new<R: Rng + ?Sized>(embedding_dim: usize, hidden: usize, rng: &mut R) -> Self {
        ExpertClassifier {
            net: Mlp::new(&[embedding_dim, hidden, hidden, 1], rng),
        }
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Validation("classifier network must have one output".into()));
        }
        Ok(ExpertClassifier { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn logits(&self, embeddings: &Mat) -> Result<Vec<f64>> {
        Ok(self.net.predict(embeddings)?.data)
    }

    /// Probability that each embedding came from the reference policy,
    /// strictly inside (0, 1).
    pub fn probs(&self, embeddings: &Mat) -> Result<Vec<f64>> {
        Ok(self
            .logits(embeddings)?
            .into_iter()
            .map(|l| sigmoid(l).clamp(f64::MIN_POSITIVE, PROB_MAX))
            .collect())
    }

    pub fn prob(&self, embedding: &[f64]) -> Result<f64> {
        Ok(self.probs(&Mat::from_vec(1, embedding.len(), embedding.to_vec()))?[0])
    }

    /// Mean binary cross-entropy `-[x ln h + (1 - x) ln(1 - h)]`, computed
    /// from logits. Accumulates parameter gradients into `grads` and returns
    /// the loss with the gradient w.r.t. the embeddings.
    pub fn bce_backward(&self, embeddings: &Mat, expert: &[bool], grads: &mut [f64]) -> Result<(f64, Mat)> {
        if embeddings.rows != expert.len() {
            return Err(Error::Validation("embedding and label counts differ".into()));
        }
        let (logits, trace) = self.net.forward(embeddings)?;
        let n = expert.len() as f64;
        let mut loss = 0.0;
        let mut d_logits = Mat::zeros(logits.rows, 1);
        for (r, (&l, &x)) in logits.data.iter().zip(expert).enumerate() {
            let x = if x { 1.0 } else { 0.0 };
            loss += softplus(l) - x * l;
            d_logits.data[r] = (sigmoid(l) - x) / n;
        }
        let d_e = self
            .net
            .backward(&trace, &d_logits, Some(grads), true)
            .expect("input gradient requested");
        Ok((loss / n, d_e))
    }

    pub fn bce(&self, embeddings: &Mat, expert: &[bool]) -> Result<f64> {
        let logits = self.logits(embeddings)?;
        let n = expert.len() as f64;
        Ok(logits
            .iter()
            .zip(expert)
            .map(|(&l, &x)| softplus(l) - if x { l } else { 0.0 })
            .sum::<f64>()
            / n)
    }

    /// Fraction of embeddings classified correctly at threshold 0.5.
    pub fn accuracy(&self, embeddings: &Mat, expert: &[bool]) -> Result<f64> {
        let logits = self.logits(embeddings)?;
        let correct = logits.iter().zip(expert).filter(|(&l, &x)| (l > 0.0) == x).count();
        Ok(correct as f64 / expert.len().max(1) as f64)
    }
}
