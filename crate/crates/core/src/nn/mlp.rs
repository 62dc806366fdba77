use rand::Rng;

use super::mat::{gemm, Mat};
use crate::error::{Error, Result};

/// Fully connected network with rectifier hidden layers and a linear output.
///
/// All parameters live in one flat vector: for each layer the `in x out`
/// row-major weight block followed by the `out` biases. Gradients, optimizer
/// moments and target copies share that layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Mat>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[offset..offset + w[0] * w[1] + w[1]] {
                *p = rng.gen_range(-bound..bound);
            }
            offset += w[0] * w[1] + w[1];
        }
        net
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; count],
        }
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes);
        if params.len() != net.params.len() {
            return Err(Error::Validation(format!(
                "expected {} parameters for layout {:?}, got {}",
                net.params.len(),
                sizes,
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.sizes.windows(2).scan(0usize, |offset, w| {
            let start = *offset;
            *offset += w[0] * w[1] + w[1];
            Some((start, w[0], w[1]))
        })
    }

    /// Weight block and bias vector of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (start, i, o) = self.layer_offsets().nth(l).expect("layer index");
        let w = &self.params[start..start + i * o];
        let b = &self.params[start + i * o..start + i * o + o];
        (w, b)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (start, i, o) = self.layer_offsets().nth(l).expect("layer index");
        let (w, rest) = self.params[start..].split_at_mut(i * o);
        (w, &mut rest[..o])
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        if x.cols != self.input_dim() {
            return Err(Error::Validation(format!(
                "network expects input width {}, got {}",
                self.input_dim(),
                x.cols
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Mat) -> Result<(Mat, Trace)> {
        self.check_input(x)?;
        let batch = x.rows;
        let depth = self.sizes.len() - 1;
        let mut inputs = Vec::with_capacity(depth);
        let mut h = x.clone();
        for (l, (start, i, o)) in self.layer_offsets().enumerate() {
            let w = &self.params[start..start + i * o];
            let b = &self.params[start + i * o..start + i * o + o];
            let mut out = Mat::zeros(batch, o);
            for r in 0..batch {
                out.row_mut(r).copy_from_slice(b);
            }
            gemm(batch, i, o, 1.0, &h.data, false, w, false, 1.0, &mut out.data);
            if l + 1 < depth {
                for v in &mut out.data {
                    *v = v.max(0.0);
                }
            }
            inputs.push(std::mem::replace(&mut h, out));
        }
        Ok((h, Trace { inputs }))
    }

    /// Forward pass without keeping the trace.
    pub fn predict(&self, x: &Mat) -> Result<Mat> {
        Ok(self.forward(x)?.0)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&Mat::from_vec(1, x.len(), x.to_vec()))?.data)
    }

    /// Backpropagates `d_out` (gradient of the loss w.r.t. the network output).
    ///
    /// Parameter gradients are accumulated into `grads` when given. The
    /// gradient w.r.t. the network input is returned when `input_grad` is set.
    pub fn backward(
        &self,
        trace: &Trace,
        d_out: &Mat,
        mut grads: Option<&mut [f64]>,
        input_grad: bool,
    ) -> Option<Mat> {
        let batch = d_out.rows;
        let layers: Vec<_> = self.layer_offsets().collect();
        let mut delta = d_out.clone();
        for (l, &(start, i, o)) in layers.iter().enumerate().rev() {
            let input = &trace.inputs[l];
            if let Some(g) = grads.as_deref_mut() {
                gemm(i, batch, o, 1.0, &input.data, true, &delta.data, false, 1.0, &mut g[start..start + i * o]);
                let gb = &mut g[start + i * o..start + i * o + o];
                for r in 0..batch {
                    for (acc, d) in gb.iter_mut().zip(delta.row(r)) {
                        *acc += d;
                    }
                }
            }
            if l == 0 && !input_grad {
                return None;
            }
            let w = &self.params[start..start + i * o];
            let mut below = Mat::zeros(batch, i);
            gemm(batch, o, i, 1.0, &delta.data, false, w, true, 0.0, &mut below.data);
            if l > 0 {
                // rectifier derivative, read from the stored post-activation
                for (d, a) in below.data.iter_mut().zip(&input.data) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = below;
        }
        Some(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::component_rng;

    /// Plain-loop forward pass used as an oracle.
    fn oracle_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let depth = net.sizes().len() - 1;
        let mut h = x.to_vec();
        for l in 0..depth {
            let (w, b) = net.layer(l);
            let (i, o) = (net.sizes()[l], net.sizes()[l + 1]);
            let mut out = b.to_vec();
            for (j, out_j) in out.iter_mut().enumerate() {
                for (k, h_k) in h.iter().enumerate().take(i) {
                    *out_j += h_k * w[k * o + j];
                }
            }
            if l + 1 < depth {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = out;
        }
        h
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut net = Mlp::zeros(&[3, 4, 4, 2]);
        net.layer_mut(2).1.copy_from_slice(&[0.25, -1.5]);
        assert_eq!(net.predict_one(&[1.0, 2.0, 3.0]).unwrap(), vec![0.25, -1.5]);
    }

    #[test]
    fn identity_single_layer() {
        let mut net = Mlp::zeros(&[3, 3]);
        let w = net.layer_mut(0).0;
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        assert_eq!(net.predict_one(&[0.5, -2.0, 7.0]).unwrap(), vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn forward_matches_oracle() {
        let mut rng = component_rng(3, "mlp-test");
        let net = Mlp::new(&[5, 300, 300, 7], &mut rng);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let out = net.predict(&Mat::from_rows(&rows)).unwrap();
        for (r, x) in rows.iter().enumerate() {
            let expect = oracle_forward(&net, x);
            for (a, b) in out.row(r).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = Mlp::zeros(&[3, 2]);
        assert!(net.predict_one(&[1.0, 2.0]).is_err());
        assert!(Mlp::from_params(&[3, 2], vec![0.0; 5]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = component_rng(5, "mlp-grad");
        let net = Mlp::new(&[4, 16, 16, 3], &mut rng);
        let x = Mat::from_vec(5, 4, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let weights: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // loss = sum(weights * output)
        let loss = |n: &Mlp, x: &Mat| -> f64 {
            n.predict(x).unwrap().data.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let (_, trace) = net.forward(&x).unwrap();
        let d_out = Mat::from_vec(5, 3, weights.clone());
        let mut grads = vec![0.0; net.num_params()];
        let dx = net.backward(&trace, &d_out, Some(&mut grads), true).unwrap();
        let h = 1e-6;
        for p in (0..net.num_params()).step_by(7) {
            let mut plus = net.clone();
            plus.params_mut()[p] += h;
            let mut minus = net.clone();
            minus.params_mut()[p] -= h;
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            assert!((fd - grads[p]).abs() < 1e-6, "param {p}: {fd} vs {}", grads[p]);
        }
        for idx in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[idx] += h;
            let mut xm = x.clone();
            xm.data[idx] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert!((fd - dx.data[idx]).abs() < 1e-6);
        }
    }
}
