//! A small fully connected network with rectified-linear hidden layers and a
//! linear output layer, trained by plain gradient descent.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn uniform<R: Rng>(inputs: usize, outputs: usize, scale: f64, rng: &mut R) -> Self {
        let mut layer = Dense::zeros(inputs, outputs);
        if scale > 0.0 {
            for w in &mut layer.weights {
                *w = rng.gen_range(-scale..scale);
            }
        }
        layer
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().copied());
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

/// Parameter gradients laid out like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// He-uniform hidden layers; the output layer is scaled by `output_scale`
    /// (0 gives an all-zero output).
    pub fn new<R: Rng>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let he = (6.0 / w[0] as f64).sqrt();
                let scale = if i == last { he * output_scale } else { he };
                Dense::uniform(w[0], w[1], scale, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn shapes(&self) -> Vec<[usize; 2]> {
        self.layers.iter().map(|l| [l.outputs, l.inputs]).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut it = flat.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.activations(input).pop().unwrap()
    }

    /// Outputs of every layer (post-activation for hidden ones), input first.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().unwrap(), &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error of selected outputs and its gradient:
    /// `mean_j (target_j - out(input_j)[index_j])^2`.
    pub fn loss_and_gradient(&self, samples: &[(&[f64], usize, f64)]) -> (f64, Gradients) {
        let mut grads = Gradients {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        };
        if samples.is_empty() {
            return (0.0, grads);
        }
        let scale = 1.0 / samples.len() as f64;
        let mut loss = 0.0;
        for &(input, index, target) in samples {
            let acts = self.activations(input);
            let err = acts.last().unwrap()[index] - target;
            loss += err * err;

            let mut delta = vec![0.0; self.output_dim()];
            delta[index] = 2.0 * err * scale;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let below = &acts[li];
                let g = &mut grads.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &x) in row.iter_mut().zip(below) {
                        *gw += d * x;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut next = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (n, &w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                // Rectifier derivative, taken as 0 at the kink.
                for (n, &a) in next.iter_mut().zip(below) {
                    if a <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        (loss * scale, grads)
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn loss_at(net: &Mlp, params: &[f64], samples: &[(&[f64], usize, f64)]) -> f64 {
        let mut probe = net.clone();
        probe.set_params(params);
        probe.loss_and_gradient(samples).0
    }

    /// Central differences, h = 1e-5, against backprop.
    fn check_gradients(net: &Mlp, samples: &[(&[f64], usize, f64)]) {
        let (_, grads) = net.loss_and_gradient(samples);
        let analytic = grads.flat();
        let base = net.params();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let numeric = (loss_at(net, &plus, samples) - loss_at(net, &minus, samples)) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic[i] - numeric).abs() / denom;
            assert!(rel < 1e-4 || (analytic[i] - numeric).abs() < 1e-9, "param {i}: {} vs {numeric}", analytic[i]);
        }
    }

    #[test]
    fn five_parameter_toy_gradient() {
        // 2 -> 1 (relu) -> 1: 2 + 1 + 1 + 1 parameters.
        let mut net = Mlp { layers: vec![Dense::zeros(2, 1), Dense::zeros(1, 1)] };
        net.set_params(&[0.7, -0.3, 0.2, 1.3, -0.4]);
        assert_eq!(net.param_count(), 5);
        let a = [0.5, 0.25];
        let b = [1.0, -0.5];
        check_gradients(&net, &[(&a, 0, 2.0), (&b, 0, -1.0)]);
    }

    #[test]
    fn layered_network_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[6, 5, 4, 3], 1.0, &mut rng);
        let x1 = [0.1, 0.9, -0.3, 0.4, 0.0, 0.7];
        let x2 = [0.5, -0.2, 0.8, 0.1, 0.3, -0.6];
        check_gradients(&net, &[(&x1, 2, -10.0), (&x2, 0, 3.0), (&x1, 1, 0.5)]);
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[66, 64, 64, 16], 0.0, &mut rng);
        assert!(net.forward(&[0.3; 66]).iter().all(|&q| q == 0.0));
    }
}
