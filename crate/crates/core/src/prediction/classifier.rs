//! Binary lane-change classifier: logistic regression with an optional tanh
//! hidden layer, trained by mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Mini-batch size; at least the sample count means full-batch.
    pub batch: usize,
    pub hidden: Option<usize>,
    pub optimizer: Optimizer,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.001,
            batch: 64,
            hidden: Some(64),
            optimizer: Optimizer::Adam,
            shuffle: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayer {
    /// Row-major, `width x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub hidden: Option<HiddenLayer>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against label `y`, computed stably.
fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl Classifier {
    pub fn new(dim: usize, hidden: Option<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-a..a)).collect()
        };
        let (hidden, out_dim) = match hidden {
            Some(w) => (
                Some(HiddenLayer {
                    weights: init(dim, w, w * dim),
                    bias: vec![0.0; w],
                }),
                w,
            ),
            None => (None, dim),
        };
        Self {
            feature_mean: vec![0.0; dim],
            feature_scale: vec![1.0; dim],
            hidden,
            output_weights: init(out_dim, 1, out_dim),
            output_bias: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Fits the standardization to `rows`; constant columns get unit scale.
    pub fn fit_scaler(&mut self, rows: &[&[f64]]) {
        let n = rows.len() as f64;
        for j in 0..self.input_dim() {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            self.feature_mean[j] = mean;
            self.feature_scale[j] = if var > 1e-12 { var.sqrt() } else { 1.0 };
        }
    }

    fn hidden_activations(&self, z: &[f64]) -> Option<Vec<f64>> {
        self.hidden.as_ref().map(|h| {
            let d = z.len();
            h.bias
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let row = &h.weights[k * d..(k + 1) * d];
                    (b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()).tanh()
                })
                .collect()
        })
    }

    fn logit_standardized(&self, z: &[f64]) -> (f64, Option<Vec<f64>>) {
        let h = self.hidden_activations(z);
        let last = h.as_deref().unwrap_or(z);
        let logit = self.output_bias
            + self
                .output_weights
                .iter()
                .zip(last)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        (logit, h)
    }

    /// Probability of a lane change for a raw feature vector.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(
            self.logit_standardized(&self.standardize(x))
                .0
                .clamp(-36.0, 36.0),
        )
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.probability(x) > 0.5
    }

    /// All trainable parameters in a fixed order: hidden weights, hidden
    /// bias, output weights, output bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        if let Some(h) = &self.hidden {
            p.extend(&h.weights);
            p.extend(&h.bias);
        }
        p.extend(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        if let Some(h) = self.hidden.as_mut() {
            h.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            h.bias.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.output_weights
            .iter_mut()
            .for_each(|w| *w = it.next().unwrap());
        self.output_bias = it.next().unwrap();
    }

    /// Mean cross-entropy over a batch of standardized inputs, with its
    /// gradient in `params()` order.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut grad = vec![0.0; self.params().len()];
        let mut loss = 0.0;
        let d = self.input_dim();
        let hw = self.hidden.as_ref().map_or(0, |h| h.bias.len());
        let out_off = hw * d + hw;
        for (z, &y) in xs.iter().zip(ys) {
            let (logit, h) = self.logit_standardized(z);
            loss += bce(logit, y);
            let e = (sigmoid(logit) - y) / n;
            let last = h.as_deref().unwrap_or(z);
            for (g, x) in grad[out_off..out_off + last.len()].iter_mut().zip(last) {
                *g += e * x;
            }
            grad[out_off + last.len()] += e;
            if let Some(h) = h {
                for k in 0..hw {
                    let back = e * self.output_weights[k] * (1.0 - h[k] * h[k]);
                    for (g, x) in grad[k * d..(k + 1) * d].iter_mut().zip(z) {
                        *g += back * x;
                    }
                    grad[hw * d + k] += back;
                }
            }
        }
        (loss / n, grad)
    }
}

/// Trains on `(features, label)` rows. Returns the model and its final mean
/// training loss.
pub fn train_classifier(rows: &[(&[f64], bool)], cfg: &TrainConfig) -> Result<(Classifier, f64)> {
    if rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let positives = rows.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == rows.len() {
        return Err(Error::SingleClass);
    }
    if cfg.epochs == 0 || cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidConfig(
            "training needs positive epochs, batch and lr".into(),
        ));
    }
    let dim = rows[0].0.len();
    let mut model = Classifier::new(dim, cfg.hidden, cfg.seed);
    let raw: Vec<&[f64]> = rows.iter().map(|(x, _)| *x).collect();
    model.fit_scaler(&raw);
    let xs: Vec<Vec<f64>> = raw.iter().map(|x| model.standardize(x)).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, y)| f64::from(u8::from(*y))).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut params = model.params();
    let mut adam = Adam::new(params.len());
    let mut bx = Vec::with_capacity(cfg.batch);
    let mut by = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(cfg.batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(xs[i].clone());
                by.push(ys[i]);
            }
            let (_, g) = model.loss_and_gradient(&bx, &by);
            match cfg.optimizer {
                Optimizer::Sgd => params
                    .iter_mut()
                    .zip(&g)
                    .for_each(|(p, g)| *p -= cfg.lr * g),
                Optimizer::Adam => adam.step(&mut params, &g, cfg.lr),
            }
            model.set_params(&params);
        }
    }
    let (loss, _) = model.loss_and_gradient(&xs, &ys);
    Ok((model, loss))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..p.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<(Vec<f64>, bool)> {
        (0..40)
            .map(|i| {
                let a = i as f64 / 4.0 - 5.0;
                let b = ((i * 7) % 11) as f64 / 3.0;
                (vec![a, b], a + 0.1 * b > 0.3)
            })
            .collect()
    }

    fn refs(data: &[(Vec<f64>, bool)]) -> Vec<(&[f64], bool)> {
        data.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data = toy();
        let cfg = TrainConfig {
            epochs: 400,
            lr: 0.05,
            batch: 8,
            hidden: None,
            ..TrainConfig::default()
        };
        let (m, _) = train_classifier(&refs(&data), &cfg).unwrap();
        assert!(data.iter().all(|(x, y)| m.predict(x) == *y));
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let data = toy();
        let rows = refs(&data);
        let mut prev = f64::INFINITY;
        for epochs in 1..30 {
            let cfg = TrainConfig {
                epochs,
                lr: 0.1,
                batch: rows.len(),
                hidden: Some(8),
                optimizer: Optimizer::Sgd,
                shuffle: false,
                seed: 3,
            };
            let (_, loss) = train_classifier(&rows, &cfg).unwrap();
            assert!(loss <= prev + 1e-12, "epoch {epochs}: {loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = [1.0, 2.0];
        let rows = vec![(&x[..], false); 4];
        assert!(matches!(
            train_classifier(&rows, &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            train_classifier(&[], &TrainConfig::default()),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn probability_is_strictly_inside_unit_interval() {
        let m = Classifier::new(3, Some(4), 1);
        for x in [[0.0, 0.0, 0.0], [1e3, -1e3, 5.0], [-40.0, 2.0, 9.0]] {
            let p = m.probability(&x);
            assert!(p > 0.0 && p < 1.0, "{p}");
        }
    }

    #[test]
    fn json_round_trip() {
        let m = Classifier::new(5, Some(3), 9);
        let s = serde_json::to_string(&m).unwrap();
        let back: Classifier = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
