//! Small fully connected regressor: ReLU hidden layers, inverted dropout, Adam, early
//! stopping on a validation split with best-checkpoint restore.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LearnedError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; `None` trains all epochs.
    pub patience: Option<usize>,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![32, 16],
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 2000,
            patience: Some(20),
            dropout: 0.1,
            seed: 0,
        }
    }
}

/// Per-feature standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fits on `rows`; constant columns get unit spread.
    pub fn fit(rows: &[&[f64]]) -> Scaler {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x / n;
            }
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, x), m) in std.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (x - m).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Scaler { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// A trained network with its input and target scalers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// Layer widths including input and the single output.
    pub widths: Vec<usize>,
    /// Per layer: weights (out x in, row-major) then biases.
    pub params: Vec<f64>,
    pub scaler: Scaler,
    pub target_mean: f64,
    pub target_std: f64,
    pub config: MlpConfig,
}

/// Raw network over already scaled inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub widths: Vec<usize>,
    pub params: Vec<f64>,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Network {
    /// Uniform He initialization.
    pub fn init(widths: &[usize], rng: &mut impl Rng) -> Network {
        let mut params = Vec::with_capacity(param_count(widths));
        for w in widths.windows(2) {
            let limit = (6.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(rng.gen_range(-limit..limit));
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Network {
            widths: widths.to_vec(),
            params,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.forward(x, None).last().map_or(0.0, |a| a[0])
    }

    /// Activations of every layer; `masks` scales hidden units (dropout).
    fn forward(&self, x: &[f64], masks: Option<&[Vec<f64>]>) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let last = self.widths.len() - 2;
        for (l, w) in self.widths.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let input = &acts[l];
            let mut out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + bias[o]
                })
                .collect();
            if l < last {
                for (j, v) in out.iter_mut().enumerate() {
                    *v = v.max(0.0);
                    if let Some(m) = masks {
                        *v *= m[l][j];
                    }
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over `(x, y)` and its gradient with respect to `params`.
    pub fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, Vec<f64>) {
        self.loss_and_gradient_masked(xs, ys, None)
    }

    fn loss_and_gradient_masked(
        &self,
        xs: &[&[f64]],
        ys: &[f64],
        masks: Option<&[Vec<Vec<f64>>]>,
    ) -> (f64, Vec<f64>) {
        let n = xs.len().max(1) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let n_layers = self.widths.len() - 1;
        // parameter offsets per layer
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        for (s, (x, &y)) in xs.iter().zip(ys).enumerate() {
            let m = masks.map(|m| m[s].as_slice());
            let acts = self.forward(x, m);
            let out = acts[n_layers][0];
            let err = out - y;
            loss += err * err / n;
            let mut delta = vec![2.0 * err / n];
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
                let o = offsets[l];
                let input = &acts[l];
                for j in 0..n_out {
                    let row = o + j * n_in;
                    for i in 0..n_in {
                        grad[row + i] += delta[j] * input[i];
                    }
                    grad[o + n_in * n_out + j] += delta[j];
                }
                if l == 0 {
                    break;
                }
                // back through the hidden activation of layer l-1 output
                let mut prev = vec![0.0; n_in];
                for (j, d) in delta.iter().enumerate() {
                    let row = o + j * n_in;
                    for (i, p) in prev.iter_mut().enumerate() {
                        *p += self.params[row + i] * d;
                    }
                }
                for (i, p) in prev.iter_mut().enumerate() {
                    // acts[l] is post-ReLU (and post-mask); zero means inactive or dropped
                    let scale = match m {
                        Some(masks) => masks[l - 1][i],
                        None => 1.0,
                    };
                    if acts[l][i] <= 0.0 {
                        *p = 0.0;
                    } else {
                        *p *= scale;
                    }
                }
                delta = prev;
            }
        }
        (loss, grad)
    }

    pub fn mse(&self, xs: &[&[f64]], ys: &[f64]) -> f64 {
        let n = xs.len().max(1) as f64;
        xs.iter().zip(ys).map(|(x, y)| (self.predict(x) - y).powi(2)).sum::<f64>() / n
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Trains on `(x_train, y_train)`, early-stopping on `(x_val, y_val)` when patience is set
/// and the validation set is non-empty. Inputs and targets are raw; scalers are fitted on
/// the training rows only.
pub fn train_mlp(
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_val: &[Vec<f64>],
    y_val: &[f64],
    config: &MlpConfig,
) -> Result<(MlpModel, TrainHistory), LearnedError> {
    if x_train.is_empty() || x_train.len() != y_train.len() || x_val.len() != y_val.len() {
        return Err(LearnedError::TooFewRecords { have: x_train.len(), need: 1 });
    }
    let d_in = x_train[0].len();
    if x_train.iter().chain(x_val).any(|x| x.len() != d_in) {
        return Err(LearnedError::FeatureMismatch {
            expected: d_in,
            got: x_train.iter().chain(x_val).map(Vec::len).find(|&l| l != d_in).unwrap_or(0),
        });
    }
    let rows: Vec<&[f64]> = x_train.iter().map(Vec::as_slice).collect();
    let scaler = Scaler::fit(&rows);
    let y_scaler = Scaler::fit(&y_train.iter().map(std::slice::from_ref).collect::<Vec<_>>());
    let (t_mean, t_std) = (y_scaler.mean[0], y_scaler.std[0]);

    let xt: Vec<Vec<f64>> = x_train.iter().map(|x| scaler.transform(x)).collect();
    let yt: Vec<f64> = y_train.iter().map(|y| (y - t_mean) / t_std).collect();
    let xv: Vec<Vec<f64>> = x_val.iter().map(|x| scaler.transform(x)).collect();
    let yv: Vec<f64> = y_val.iter().map(|y| (y - t_mean) / t_std).collect();
    let xt_ref: Vec<&[f64]> = xt.iter().map(Vec::as_slice).collect();
    let xv_ref: Vec<&[f64]> = xv.iter().map(Vec::as_slice).collect();

    let mut widths = vec![d_in];
    widths.extend(config.hidden.iter().map(|&h| h.max(1)));
    widths.push(1);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(&widths, &mut rng);
    let mut adam = Adam::new(net.params.len(), config.learning_rate);
    let keep = 1.0 - config.dropout.clamp(0.0, 0.95);
    let batch = config.batch_size.max(1);
    let use_val = config.patience.is_some() && !xv.is_empty();

    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
    };
    let mut best = (f64::INFINITY, net.params.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..xt.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let bx: Vec<&[f64]> = chunk.iter().map(|&i| xt_ref[i]).collect();
            let by: Vec<f64> = chunk.iter().map(|&i| yt[i]).collect();
            let grad = if config.dropout > 0.0 {
                let masks: Vec<Vec<Vec<f64>>> = chunk
                    .iter()
                    .map(|_| {
                        widths[1..widths.len() - 1]
                            .iter()
                            .map(|&h| {
                                (0..h)
                                    .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                net.loss_and_gradient_masked(&bx, &by, Some(&masks)).1
            } else {
                net.loss_and_gradient(&bx, &by).1
            };
            adam.step(&mut net.params, &grad);
        }
        let train_loss = net.mse(&xt_ref, &yt);
        history.train_loss.push(train_loss);
        let monitored = if use_val {
            let v = net.mse(&xv_ref, &yv);
            history.val_loss.push(v);
            v
        } else {
            train_loss
        };
        if monitored < best.0 {
            best = (monitored, net.params.clone());
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if use_val && config.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    net.params = best.1;
    Ok((
        MlpModel {
            widths,
            params: net.params,
            scaler,
            target_mean: t_mean,
            target_std: t_std,
            config: config.clone(),
        },
        history,
    ))
}

impl MlpModel {
    pub fn network(&self) -> Network {
        Network {
            widths: self.widths.clone(),
            params: self.params.clone(),
        }
    }

    /// Prediction in target units for one raw feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnedError> {
        if x.len() != self.widths[0] {
            return Err(LearnedError::FeatureMismatch {
                expected: self.widths[0],
                got: x.len(),
            });
        }
        let z = self.network().predict(&self.scaler.transform(x));
        Ok(z * self.target_std + self.target_mean)
    }
}
