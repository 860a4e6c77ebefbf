//! Fully connected ReLU regressor over flat parameter vectors.
//!
//! Parameters are stored layer-major as `W1, b1, W2, b2, ..., WL, bL`, each
//! weight matrix row-major with shape `(out, in)`. Hidden layers use ReLU and
//! the output layer is linear with a single unit.

use std::fmt;
use std::fs;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{BatchSampler, NodeShard, Sample, FEATURES};
use crate::error::{Error, Result};

/// Flat model parameters (or anything shaped like them, such as an update).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// A local model update `Δw` submitted by one node in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUpdate {
    pub delta: ParamVector,
    pub node_id: usize,
    pub episode: usize,
}

impl ModelUpdate {
    pub fn new(delta: ParamVector, node_id: usize, episode: usize) -> Self {
        Self {
            delta,
            node_id,
            episode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Mbgd,
    Adamax,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Mbgd => "mbgd",
            OptimizerKind::Adamax => "adamax",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_steps: usize,
    pub early_stop: bool,
    pub patience: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Mbgd,
            learning_rate: 0.001,
            batch_size: 32,
            local_steps: 5,
            early_stop: true,
            patience: 3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning_rate", "must be finite and >= 0"));
        }
        if self.local_steps == 0 {
            return Err(Error::param("local_steps", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if self.early_stop && self.patience == 0 {
            return Err(Error::param("patience", "must be at least 1"));
        }
        Ok(())
    }
}

/// Layer widths of the network, input first, output (always 1) last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
}

impl Default for Mlp {
    fn default() -> Self {
        Self::new(&[16, 8])
    }
}

impl Mlp {
    /// Builds a regressor with the given hidden widths.
    pub fn new(hidden: &[usize]) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(FEATURES);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self { sizes }
    }

    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes[0] != FEATURES || *sizes.last().unwrap() != 1 {
            return Err(Error::param(
                "layers",
                format!("expected {FEATURES} inputs and 1 output, got {sizes:?}"),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::param("layers", "zero-width layer"));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    /// Number of parameters `q`.
    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        let q = self.param_count();
        if params.len() != q {
            return Err(Error::Dimension {
                expected: q,
                got: params.len(),
            });
        }
        Ok(())
    }

    /// He-normal hidden weights, Glorot-normal output weights, zero biases.
    pub fn init(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        let mut out = Vec::with_capacity(self.param_count());
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = if l == last {
                (2.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (2.0 / fan_in as f64).sqrt()
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            out.extend((0..fan_in * fan_out).map(|_| normal.sample(rng)));
            out.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector(out)
    }

    /// Initialization with uniform weights in `[-scale, scale]`; for tests.
    pub fn init_uniform(&self, rng: &mut ChaCha8Rng, scale: f64) -> ParamVector {
        ParamVector(
            (0..self.param_count())
                .map(|_| rng.random_range(-scale..=scale))
                .collect(),
        )
    }

    fn predict_one(&self, params: &[f64], x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.clear();
        acts.push(x.to_vec());
        let mut offset = 0;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let biases = &params[offset + fan_in * fan_out..offset + fan_out * (fan_in + 1)];
            offset += fan_out * (fan_in + 1);
            let input = &acts[l];
            let mut next = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                let z = biases[j] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                next.push(if l + 1 < n_layers { z.max(0.0) } else { z });
            }
            acts.push(next);
        }
        acts[n_layers][0]
    }

    pub fn forward(&self, params: &[f64], batch: &[Sample]) -> Result<Vec<f64>> {
        self.check(params)?;
        let mut acts = Vec::new();
        Ok(batch
            .iter()
            .map(|s| self.predict_one(params, &s.features, &mut acts))
            .collect())
    }

    pub fn mse_loss(&self, params: &[f64], data: &[Sample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Empty("loss data"));
        }
        let preds = self.forward(params, data)?;
        let sum: f64 = preds
            .iter()
            .zip(data)
            .map(|(p, s)| (p - s.target).powi(2))
            .sum();
        Ok(sum / data.len() as f64)
    }

    /// Exact gradient of [`Mlp::mse_loss`] over `batch`.
    pub fn gradient(&self, params: &[f64], batch: &[Sample]) -> Result<ParamVector> {
        self.loss_and_gradient(params, batch).map(|(_, g)| g)
    }

    /// Batch loss and its gradient from a single pass.
    pub fn loss_and_gradient(&self, params: &[f64], batch: &[Sample]) -> Result<(f64, ParamVector)> {
        self.check(params)?;
        if batch.is_empty() {
            return Err(Error::Empty("gradient batch"));
        }
        let n_layers = self.sizes.len() - 1;
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |acc, w| {
                let start = *acc;
                *acc += w[1] * (w[0] + 1);
                Some(start)
            })
            .collect();
        let mut grad = vec![0.0; params.len()];
        let mut acts = Vec::new();
        let scale = 2.0 / batch.len() as f64;
        let mut loss = 0.0;
        for sample in batch {
            let pred = self.predict_one(params, &sample.features, &mut acts);
            let residual = pred - sample.target;
            loss += residual * residual;
            // dL/dz for the current layer's outputs
            let mut delta = vec![scale * residual];
            for l in (0..n_layers).rev() {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let w_off = offsets[l];
                let b_off = w_off + fan_in * fan_out;
                let input = &acts[l];
                for j in 0..fan_out {
                    let d = delta[j];
                    if d == 0.0 {
                        continue;
                    }
                    grad[b_off + j] += d;
                    let g_row = &mut grad[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                    for (g, a) in g_row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    let weights = &params[w_off..b_off];
                    let mut prev = vec![0.0; fan_in];
                    for j in 0..fan_out {
                        let d = delta[j];
                        if d == 0.0 {
                            continue;
                        }
                        for (p, w) in prev.iter_mut().zip(&weights[j * fan_in..(j + 1) * fan_in]) {
                            *p += d * w;
                        }
                    }
                    // ReLU derivative, taken as 0 at the kink
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss / batch.len() as f64, ParamVector(grad)))
    }

    /// Trains from `global` on the shard's training split and returns
    /// `Δw = w_k - w_g`.
    pub fn local_train(
        &self,
        global: &ParamVector,
        shard: &NodeShard,
        cfg: &OptimizerConfig,
        episode: usize,
        rng: ChaCha8Rng,
    ) -> Result<ModelUpdate> {
        cfg.validate()?;
        self.check(global)?;
        let mut params = global.clone();
        let mut sampler = BatchSampler::new(&shard.train, cfg.batch_size, rng)?;
        let mut optimizer = Optimizer::new(cfg, params.len());
        let monitor = cfg.early_stop && !shard.validation.is_empty();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        for step in 0..cfg.local_steps {
            let batch = sampler.next_batch();
            let (loss, grad) = self.loss_and_gradient(&params, &batch)?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            optimizer.step(&mut params, &grad);
            if monitor {
                let val = self.mse_loss(&params, &shard.validation)?;
                if !val.is_finite() {
                    return Err(Error::NonFiniteLoss { step });
                }
                if val < best {
                    best = val;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= cfg.patience {
                        break;
                    }
                }
            }
        }
        let delta = params
            .iter()
            .zip(global.iter())
            .map(|(w, g)| w - g)
            .collect::<Vec<_>>();
        Ok(ModelUpdate::new(ParamVector(delta), shard.node_id, episode))
    }
}

enum Optimizer {
    Mbgd {
        lr: f64,
    },
    Adamax {
        lr: f64,
        m: Vec<f64>,
        u: Vec<f64>,
        t: i32,
    },
}

const ADAMAX_BETA1: f64 = 0.9;
const ADAMAX_BETA2: f64 = 0.999;
const ADAMAX_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(cfg: &OptimizerConfig, q: usize) -> Self {
        match cfg.kind {
            OptimizerKind::Mbgd => Optimizer::Mbgd {
                lr: cfg.learning_rate,
            },
            OptimizerKind::Adamax => Optimizer::Adamax {
                lr: cfg.learning_rate,
                m: vec![0.0; q],
                u: vec![0.0; q],
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Mbgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adamax { lr, m, u, t } => {
                *t += 1;
                let step = *lr / (1.0 - ADAMAX_BETA1.powi(*t));
                for i in 0..params.len() {
                    m[i] = ADAMAX_BETA1 * m[i] + (1.0 - ADAMAX_BETA1) * grad[i];
                    u[i] = (ADAMAX_BETA2 * u[i]).max(grad[i].abs());
                    params[i] -= step * m[i] / (u[i] + ADAMAX_EPS);
                }
            }
        }
    }
}

/// Versioned text checkpoint:
///
/// ```text
/// ldpfl-checkpoint v1
/// layers 6 16 8 1
/// activations relu relu linear
/// values 257
/// <one value per line>
/// ```
pub mod checkpoint {
    use super::*;

    pub const MAGIC: &str = "ldpfl-checkpoint v1";

    pub fn to_string(model: &Mlp, params: &ParamVector) -> Result<String> {
        model.check(params)?;
        let mut out = format!("{MAGIC}\nlayers");
        for s in model.sizes() {
            out.push_str(&format!(" {s}"));
        }
        out.push_str("\nactivations");
        for _ in model.hidden() {
            out.push_str(" relu");
        }
        out.push_str(" linear\n");
        out.push_str(&format!("values {}\n", params.len()));
        for v in params.iter() {
            out.push_str(&format!("{v}\n"));
        }
        Ok(out)
    }

    pub fn from_str(text: &str) -> Result<(Mlp, ParamVector)> {
        let mut lines = text.lines();
        let magic = lines.next().unwrap_or_default();
        if magic != MAGIC {
            return Err(Error::Parse(format!("unsupported checkpoint header `{magic}`")));
        }
        let layers = lines
            .next()
            .and_then(|l| l.strip_prefix("layers "))
            .ok_or_else(|| Error::Parse("missing layers line".into()))?;
        let sizes = layers
            .split_whitespace()
            .map(|v| v.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let model = Mlp::from_sizes(sizes)?;
        let acts: Vec<&str> = lines
            .next()
            .and_then(|l| l.strip_prefix("activations "))
            .ok_or_else(|| Error::Parse("missing activations line".into()))?
            .split_whitespace()
            .collect();
        let expected: Vec<&str> = model
            .hidden()
            .iter()
            .map(|_| "relu")
            .chain(std::iter::once("linear"))
            .collect();
        if acts != expected {
            return Err(Error::Parse(format!("unsupported activations {acts:?}")));
        }
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("values "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse("missing values line".into()))?;
        let values = lines
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(Error::Dimension {
                expected: count,
                got: values.len(),
            });
        }
        let params = ParamVector(values);
        model.check(&params)?;
        Ok((model, params))
    }

    pub fn save(path: &Path, model: &Mlp, params: &ParamVector) -> Result<()> {
        fs::write(path, to_string(model, params)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Mlp, ParamVector)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        from_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize;
    use crate::rng::{substream, Purpose};

    fn shard(n: usize, seed: u64) -> NodeShard {
        let data = synthesize(n, seed).unwrap();
        let split = n * 4 / 5;
        NodeShard {
            node_id: 3,
            train: data[..split].to_vec(),
            validation: data[split..].to_vec(),
        }
    }

    #[test]
    fn default_architecture_size() {
        // 6*16+16 + 16*8+8 + 8*1+1
        assert_eq!(Mlp::default().param_count(), 257);
    }

    #[test]
    fn zero_params_predict_zero() {
        let model = Mlp::default();
        let data = synthesize(10, 1).unwrap();
        let preds = model.forward(&vec![0.0; 257], &data).unwrap();
        assert!(preds.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn forward_is_batch_independent() {
        let model = Mlp::default();
        let params = model.init(&mut substream(2, Purpose::Init, 0, 0));
        let data = synthesize(32, 2).unwrap();
        let all = model.forward(&params, &data).unwrap();
        let one = model.forward(&params, &data[7..8]).unwrap();
        assert_eq!(all[7], one[0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let model = Mlp::default();
        let data = synthesize(2, 2).unwrap();
        assert!(matches!(
            model.forward(&[0.0; 10], &data),
            Err(Error::Dimension { expected: 257, got: 10 })
        ));
    }

    #[test]
    fn loss_edge_cases() {
        let model = Mlp::default();
        let zero = vec![0.0; 257];
        assert!(model.mse_loss(&zero, &[]).is_err());
        let ones: Vec<Sample> = (0..5).map(|_| Sample::new([0.3; 6], 1.0)).collect();
        assert_eq!(model.mse_loss(&zero, &ones).unwrap(), 1.0);
        let zeros: Vec<Sample> = (0..5).map(|_| Sample::new([0.3; 6], 0.0)).collect();
        assert_eq!(model.mse_loss(&zero, &zeros).unwrap(), 0.0);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let model = Mlp::default();
        let zeros: Vec<Sample> = (0..5).map(|_| Sample::new([0.3; 6], 0.0)).collect();
        let g = model.gradient(&vec![0.0; 257], &zeros).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_neuron_gradient_is_two_residual_input() {
        // no hidden layers: pred = w . x + b
        let model = Mlp::new(&[]);
        assert_eq!(model.param_count(), 7);
        let params = [0.5, -0.25, 0.0, 1.0, 0.0, 0.0, 0.1];
        let x = [0.2, 0.4, 0.6, 0.8, 1.0, 0.0];
        let sample = Sample::new(x, 0.3);
        let pred = 0.5 * 0.2 - 0.25 * 0.4 + 0.8 + 0.1;
        let residual = pred - 0.3;
        let g = model.gradient(&params, &[sample]).unwrap();
        for j in 0..6 {
            assert!((g[j] - 2.0 * residual * x[j]).abs() < 1e-15);
        }
        assert!((g[6] - 2.0 * residual).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_gives_zero_update() {
        let model = Mlp::default();
        let global = model.init(&mut substream(3, Purpose::Init, 0, 0));
        let cfg = OptimizerConfig {
            learning_rate: 0.0,
            ..OptimizerConfig::default()
        };
        let up = model
            .local_train(&global, &shard(100, 3), &cfg, 1, substream(3, Purpose::Batches, 3, 1))
            .unwrap();
        assert!(up.delta.iter().all(|&v| v == 0.0));
        assert_eq!((up.node_id, up.episode), (3, 1));
    }

    #[test]
    fn single_mbgd_step_is_minus_lr_gradient() {
        let model = Mlp::default();
        let global = model.init(&mut substream(4, Purpose::Init, 0, 0));
        let sh = shard(100, 4);
        let cfg = OptimizerConfig {
            learning_rate: 0.05,
            local_steps: 1,
            ..OptimizerConfig::default()
        };
        let up = model
            .local_train(&global, &sh, &cfg, 0, substream(4, Purpose::Batches, 3, 0))
            .unwrap();
        let first = BatchSampler::new(&sh.train, 32, substream(4, Purpose::Batches, 3, 0))
            .unwrap()
            .next_batch();
        let g = model.gradient(&global, &first).unwrap();
        for ((d, gi), w) in up.delta.iter().zip(g.iter()).zip(global.iter()) {
            assert_eq!(*d, (w - 0.05 * gi) - w);
        }
    }

    #[test]
    fn local_train_is_deterministic() {
        let model = Mlp::default();
        let global = model.init(&mut substream(5, Purpose::Init, 0, 0));
        let sh = shard(120, 5);
        let cfg = OptimizerConfig {
            learning_rate: 0.01,
            kind: OptimizerKind::Adamax,
            ..OptimizerConfig::default()
        };
        let a = model
            .local_train(&global, &sh, &cfg, 2, substream(5, Purpose::Batches, 3, 2))
            .unwrap();
        let b = model
            .local_train(&global, &sh, &cfg, 2, substream(5, Purpose::Batches, 3, 2))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_reports_the_step() {
        let model = Mlp::default();
        let global = ParamVector(vec![1e200; 257]);
        let cfg = OptimizerConfig::default();
        let err = model
            .local_train(&global, &shard(50, 6), &cfg, 0, substream(6, Purpose::Batches, 0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { step: 0 }));
    }

    #[test]
    fn early_stop_cuts_training_short() {
        let model = Mlp::default();
        let global = model.init(&mut substream(7, Purpose::Init, 0, 0));
        let sh = shard(100, 7);
        // a huge learning rate makes validation loss worse immediately
        let base = OptimizerConfig {
            learning_rate: 5.0,
            local_steps: 50,
            patience: 1,
            ..OptimizerConfig::default()
        };
        let stopped = model
            .local_train(&global, &sh, &base, 0, substream(7, Purpose::Batches, 0, 0));
        let full = model.local_train(
            &global,
            &sh,
            &OptimizerConfig {
                early_stop: false,
                ..base.clone()
            },
            0,
            substream(7, Purpose::Batches, 0, 0),
        );
        match (stopped, full) {
            (Ok(a), Ok(b)) => assert_ne!(a.delta, b.delta),
            (Ok(_), Err(Error::NonFiniteLoss { .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adamax_moves_against_the_gradient() {
        let model = Mlp::new(&[]);
        let params = ParamVector(vec![0.0; 7]);
        let batch = vec![Sample::new([1.0; 6], 1.0)];
        let cfg = OptimizerConfig {
            kind: OptimizerKind::Adamax,
            learning_rate: 0.1,
            ..OptimizerConfig::default()
        };
        let mut opt = Optimizer::new(&cfg, 7);
        let g = model.gradient(&params, &batch).unwrap();
        let mut p = params.clone();
        opt.step(&mut p, &g);
        // first Adamax step has magnitude lr in every coordinate with nonzero gradient
        for (pi, gi) in p.iter().zip(g.iter()) {
            assert!((pi + 0.1 * gi.signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = Mlp::new(&[4, 3]);
        let params = model.init(&mut substream(8, Purpose::Init, 0, 0));
        let text = checkpoint::to_string(&model, &params).unwrap();
        assert!(text.starts_with("ldpfl-checkpoint v1\nlayers 6 4 3 1\nactivations relu relu linear\n"));
        let (m2, p2) = checkpoint::from_str(&text).unwrap();
        assert_eq!(m2, model);
        assert_eq!(p2, params);
        assert!(checkpoint::from_str("ldpfl-checkpoint v0\n").is_err());
    }
}
