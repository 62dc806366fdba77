use crate::error::{Error, Result};

/// Adaptive-moment optimizer over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = self.lr / bc1;
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step_size * *m / ((*v / bc2).sqrt() + self.eps);
        }
    }

    /// Moment state as `[step, m..., v...]` for checkpointing.
    pub fn state(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(1 + 2 * self.m.len());
        out.push(self.step as f64);
        out.extend_from_slice(&self.m);
        out.extend_from_slice(&self.v);
        out
    }

    pub fn restore(&mut self, state: &[f64]) -> Result<()> {
        let n = self.m.len();
        if state.len() != 1 + 2 * n {
            return Err(Error::Validation(format!(
                "optimizer state holds {} values, expected {}",
                state.len(),
                1 + 2 * n
            )));
        }
        self.step = state[0] as u64;
        self.m.copy_from_slice(&state[1..1 + n]);
        self.v.copy_from_slice(&state[1 + n..]);
        Ok(())
    }
}

/// `target <- tau * main + (1 - tau) * target`, elementwise.
pub fn polyak_update(main: &[f64], target: &mut [f64], tau: f64) -> Result<()> {
    if main.len() != target.len() {
        return Err(Error::Validation(format!(
            "polyak shape mismatch: {} vs {}",
            main.len(),
            target.len()
        )));
    }
    if tau == 1.0 {
        target.copy_from_slice(main);
        return Ok(());
    }
    for (t, m) in target.iter_mut().zip(main) {
        *t = tau * m + (1.0 - tau) * *t;
    }
    Ok(())
}
