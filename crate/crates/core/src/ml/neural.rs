//! Fully connected feed-forward network: ReLU hidden layers, softmax output,
//! cross-entropy loss, mini-batch SGD, Glorot-uniform initialization.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const N_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major rows x cols weight matrix.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let mut z = self.b[r];
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            for (wv, xv) in row.iter().zip(input) {
                z += wv * xv;
            }
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub layers: Vec<Layer>,
}

impl NeuralModel {
    /// Glorot-uniform initialized network for the given hidden sizes.
    pub fn init(input_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> NeuralModel {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(N_CLASSES);
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    rows: fan_out,
                    cols: fan_in,
                    w: (0..fan_in * fan_out)
                        .map(|_| rng.gen_range(-limit..limit))
                        .collect(),
                    b: vec![0.0; fan_out],
                }
            })
            .collect();
        NeuralModel { layers }
    }

    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[u8],
        hidden: &[usize],
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
    ) -> NeuralModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = NeuralModel::init(rows[0].len(), hidden, &mut rng);
        let mut indices: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..epochs {
            indices.shuffle(&mut rng);
            for batch in indices.chunks(batch_size) {
                let batch_rows: Vec<&Vec<f64>> = batch.iter().map(|&i| &rows[i]).collect();
                let batch_labels: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
                let grads = model.gradients_for(&batch_rows, &batch_labels);
                model.apply_update(&grads, learning_rate);
            }
        }
        model
    }

    /// Argmax over output logits; equal logits favor the smaller index.
    pub fn predict(&self, sample: &[f64]) -> usize {
        let logits = self.logits(sample);
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    }

    fn logits(&self, sample: &[f64]) -> Vec<f64> {
        let mut a = sample.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if l < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        a
    }

    /// Mean cross-entropy over a batch (numerically stable softmax).
    pub fn batch_loss(&self, rows: &[&Vec<f64>], labels: &[u8]) -> f64 {
        let mut total = 0.0;
        for (row, &label) in rows.iter().zip(labels) {
            let logits = self.logits(row);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
            total += logsum - logits[label as usize];
        }
        total / rows.len() as f64
    }

    /// Mean gradients for a batch, flattened in parameter order
    /// (per layer: weights row-major, then biases). Matches [`Self::batch_loss`].
    pub fn batch_gradients(&self, rows: &[&Vec<f64>], labels: &[u8]) -> Vec<f64> {
        self.gradients_for(rows, labels).into_flat()
    }

    fn gradients_for(&self, rows: &[&Vec<f64>], labels: &[u8]) -> Grads {
        let mut grads = Grads::zeros(&self.layers);
        for (row, &label) in rows.iter().zip(labels) {
            self.accumulate_sample(row, label, &mut grads);
        }
        grads.scale(1.0 / rows.len() as f64);
        grads
    }

    fn accumulate_sample(&self, row: &[f64], label: u8, grads: &mut Grads) {
        let last = self.layers.len() - 1;
        // forward pass keeping each layer's activation
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(row.to_vec());
        let mut buf = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(activations.last().unwrap(), &mut buf);
            if l < last {
                for v in &mut buf {
                    *v = v.max(0.0);
                }
            }
            activations.push(buf.clone());
        }

        // output delta: softmax - onehot
        let logits = activations.last().unwrap();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let mut delta: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        delta[label as usize] -= 1.0;

        for l in (0..self.layers.len()).rev() {
            let input = &activations[l];
            let (gw, gb) = &mut grads.layers[l];
            let cols = self.layers[l].cols;
            for (r, &d) in delta.iter().enumerate() {
                gb[r] += d;
                let grow = &mut gw[r * cols..(r + 1) * cols];
                for (g, &x) in grow.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l > 0 {
                // propagate through the weights, then the ReLU of layer l-1;
                // activations[l] is post-ReLU, so a > 0 marks active units
                let layer = &self.layers[l];
                let mut prev = vec![0.0; layer.cols];
                for (r, &d) in delta.iter().enumerate() {
                    let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                    for (p, &wv) in prev.iter_mut().zip(row) {
                        *p += d * wv;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(&activations[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    fn apply_update(&mut self, grads: &Grads, learning_rate: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, g) in layer.w.iter_mut().zip(gw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.b.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }

    /// All parameters flattened (per layer: weights, then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.w.len();
            layer.w.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = layer.b.len();
            layer.b.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        assert_eq!(at, params.len());
    }
}

struct Grads {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Grads {
    fn zeros(layers: &[Layer]) -> Grads {
        Grads {
            layers: layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for (gw, gb) in &mut self.layers {
            for g in gw.iter_mut().chain(gb.iter_mut()) {
                *g *= factor;
            }
        }
    }

    fn into_flat(self) -> Vec<f64> {
        let mut out = Vec::new();
        for (gw, gb) in self.layers {
            out.extend(gw);
            out.extend(gb);
        }
        out
    }
}
