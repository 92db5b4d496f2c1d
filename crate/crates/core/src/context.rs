//! Context identification: scan features, an evidential classifier with
//! Dirichlet outputs, the confidence gate and the mode filter.

use std::collections::VecDeque;
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::intervention::LabeledDataset;
use crate::nav::PlannerInput;

pub const FEATURE_DIM: usize = 76;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("scan has {got} beams, at least {need} needed")]
    TooFewBeams { got: usize, need: usize },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("feature configuration mismatch: file {file}, expected {expected}")]
    FeatureMismatch { file: String, expected: String },
    #[error("malformed classifier: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub bins: usize,
    /// Goal distances are capped at this (m).
    pub goal_cap: f64,
    /// Speed normalizer (m/s).
    pub max_v: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            bins: 72,
            goal_cap: 5.0,
            max_v: 2.0,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.bins + 4
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Min-pooled scan bins (scaled by the scan's max range), goal distance,
/// goal bearing as (sin, cos) and speed.
pub fn featurize(x: &PlannerInput, cfg: &FeatureConfig) -> Result<Vec<f64>, ContextError> {
    let n = x.scan.ranges.len();
    if n < cfg.bins {
        return Err(ContextError::TooFewBeams {
            got: n,
            need: cfg.bins,
        });
    }
    let max_range = x.scan.max_range;
    let mut f = Vec::with_capacity(cfg.dim());
    for b in 0..cfg.bins {
        let (lo, hi) = (b * n / cfg.bins, (b + 1) * n / cfg.bins);
        let m = x.scan.ranges[lo..hi]
            .iter()
            .map(|r| if r.is_finite() { r.min(max_range) } else { max_range })
            .fold(max_range, f64::min);
        f.push((m / max_range).clamp(0.0, 1.0));
    }
    let pose = x.state.pose;
    let (dx, dy) = (x.goal.x - pose.x, x.goal.y - pose.y);
    let dist = dx.hypot(dy);
    f.push(dist.min(cfg.goal_cap) / cfg.goal_cap);
    let bearing = if dist > 0.0 {
        dy.atan2(dx) - pose.theta
    } else {
        0.0
    };
    f.push(bearing.sin());
    f.push(bearing.cos());
    f.push((x.state.vel.v.abs() / cfg.max_v).min(1.0));
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn he(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive scale");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Fully connected network `[in, h, h, K]` with rectifier hidden layers and
/// evidence `relu(logits)`. `contexts` of the `K` outputs are real; any
/// extra output is a padding class that keeps a single-context problem
/// non-degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidentialNet {
    pub layers: Vec<Layer>,
    pub contexts: usize,
}

/// Per-class output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPrediction {
    /// Most supported context in `1..=N`.
    pub context: u32,
    /// `1 - K / sum(alpha)`, in [0, 1).
    pub confidence: f64,
    pub alpha: Vec<f64>,
}

impl ContextPrediction {
    /// Argmax over the first `contexts` entries (lowest id on ties) and the
    /// confidence over all of them.
    pub fn from_alpha(alpha: Vec<f64>, contexts: usize) -> Self {
        let mut best = 0;
        for k in 1..contexts.min(alpha.len()) {
            if alpha[k] > alpha[best] {
                best = k;
            }
        }
        let s: f64 = alpha.iter().sum();
        Self {
            context: best as u32 + 1,
            confidence: 1.0 - alpha.len() as f64 / s,
            alpha,
        }
    }
}

/// Gradients with the same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros(net: &EvidentialNet) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

impl EvidentialNet {
    /// He-initialized network; the output width is `max(contexts, 2)`.
    pub fn new(input: usize, hidden: &[usize], contexts: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(contexts.max(2));
        let layers = sizes.windows(2).map(|w| Layer::he(w[0], w[1], &mut rng)).collect();
        Self { layers, contexts }
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    /// Pre-activations of every layer.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut input: Vec<f64> = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&input, &mut z);
            if i + 1 < self.layers.len() {
                input = z.iter().map(|v| v.max(0.0)).collect();
            }
            acts.push(z);
        }
        acts
    }

    pub fn alpha(&self, x: &[f64]) -> Vec<f64> {
        let acts = self.activations(x);
        acts.last()
            .expect("network has layers")
            .iter()
            .map(|z| z.max(0.0) + 1.0)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> ContextPrediction {
        ContextPrediction::from_alpha(self.alpha(x), self.contexts)
    }

    /// Loss for one sample and its gradient, accumulated into `grads`
    /// scaled by `scale`.
    pub fn backprop(&self, x: &[f64], target: Target, anneal: f64, grads: &mut Grads, scale: f64) -> f64 {
        let acts = self.activations(x);
        let logits = acts.last().expect("network has layers");
        let alpha: Vec<f64> = logits.iter().map(|z| z.max(0.0) + 1.0).collect();
        let (loss, d_alpha) = match target {
            Target::Class(c) => edl_loss_grad(&alpha, c, anneal),
            Target::Background => {
                let (l, g) = kl_to_uniform(&alpha, None);
                (anneal * l, g.into_iter().map(|v| anneal * v).collect())
            }
        };
        let mut delta: Vec<f64> = d_alpha
            .iter()
            .zip(logits)
            .map(|(g, z)| if *z > 0.0 { g * scale } else { 0.0 })
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input: Vec<f64> = if li == 0 {
                x.to_vec()
            } else {
                acts[li - 1].iter().map(|v| v.max(0.0)).collect()
            };
            let gw = &mut grads.weights[li];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                grads.bias[li][o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, v) in row.iter_mut().zip(&input) {
                    *g += d * v;
                }
            }
            if li > 0 {
                let prev = &acts[li - 1];
                let mut next = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                for (n, z) in next.iter_mut().zip(prev) {
                    if *z <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        loss
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

/// Trigamma by recurrence up to x >= 12, then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0))))
}

/// Expected squared error under Dir(alpha) plus `anneal` times
/// KL(Dir(alpha~) || Dir(1)), where alpha~ keeps only off-label evidence.
pub fn edl_loss(alpha: &[f64], class: usize, anneal: f64) -> f64 {
    edl_loss_grad(alpha, class, anneal).0
}

/// Loss and its gradient with respect to `alpha`.
pub fn edl_loss_grad(alpha: &[f64], class: usize, anneal: f64) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let s: f64 = alpha.iter().sum();
    let p: Vec<f64> = alpha.iter().map(|a| a / s).collect();
    let y = |j: usize| if j == class { 1.0 } else { 0.0 };
    let mut loss = 0.0;
    let mut var = 0.0;
    let mut g = vec![0.0; k];
    for j in 0..k {
        let err = y(j) - p[j];
        let v = p[j] * (1.0 - p[j]);
        loss += err * err + v / (s + 1.0);
        var += v;
        g[j] = -2.0 * err + (1.0 - 2.0 * p[j]) / (s + 1.0);
    }
    let gp: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
    let mut grad: Vec<f64> = g
        .iter()
        .map(|gj| (gj - gp) / s - var / ((s + 1.0) * (s + 1.0)))
        .collect();

    if anneal > 0.0 {
        let (kl, g) = kl_to_uniform(alpha, Some(class));
        loss += anneal * kl;
        for (d, gk) in grad.iter_mut().zip(g) {
            *d += anneal * gk;
        }
    }
    (loss, grad)
}

/// KL(Dir(alpha~) || Dir(1)) and its gradient in `alpha`, where alpha~ has
/// the `keep` entry replaced by 1.
pub fn kl_to_uniform(alpha: &[f64], keep: Option<usize>) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let at: Vec<f64> = (0..k).map(|j| if Some(j) == keep { 1.0 } else { alpha[j] }).collect();
    let st: f64 = at.iter().sum();
    let psi_s = digamma(st);
    let mut kl = ln_gamma(st) - ln_gamma(k as f64);
    let mut excess = 0.0;
    for a in &at {
        kl += -ln_gamma(*a) + (a - 1.0) * (digamma(*a) - psi_s);
        excess += a - 1.0;
    }
    let tri_s = trigamma(st);
    let grad = (0..k)
        .map(|j| {
            if Some(j) == keep {
                0.0
            } else {
                (at[j] - 1.0) * trigamma(at[j]) - tri_s * excess
            }
        })
        .collect();
    (kl, grad)
}

/// What one training sample asks of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Class(usize),
    /// No evidence for any class.
    Background,
}

/// Uniform draws over the feature domain: bins, distance and speed in
/// [0, 1], bearing as (sin, cos) of a uniform angle.
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn domain_samples(cfg: &FeatureConfig, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut f: Vec<f64> = (0..=cfg.bins).map(|_| rng.random::<f64>()).collect();
            let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            f.push(a.sin());
            f.push(a.cos());
            f.push(rng.random::<f64>());
            f
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    /// Lower bound on optimizer steps; small datasets run extra epochs.
    pub min_steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Initial output bias; positive so no evidence unit starts dead.
    pub output_bias: f64,
    /// Domain samples trained towards zero evidence, per labeled sample.
    pub background_ratio: f64,
    /// Nominal inputs closer than this to a labeled sample are dropped.
    pub nominal_margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 200,
            min_steps: 8000,
            batch: 64,
            lr: 1e-3,
            output_bias: 1.0,
            background_ratio: 1.0,
            nominal_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Mini-batch Adam on the evidential loss with cosine step-size decay and
/// the KL weight ramped from 0 to 1 over the first half of the epochs.
/// Runs at least `min_steps` updates.
/// Labels are classes `0..contexts`.
pub fn train_net(
    features: &[Vec<f64>],
    labels: &[usize],
    background: &[Vec<f64>],
    contexts: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(EvidentialNet, TrainReport), ContextError> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(ContextError::Config("features and labels must be non-empty and aligned".into()));
    }
    if contexts == 0 || labels.iter().any(|l| *l >= contexts) {
        return Err(ContextError::Config("labels must be below the context count".into()));
    }
    if cfg.batch == 0 || cfg.epochs == 0 {
        return Err(ContextError::Config("batch and epochs must be positive".into()));
    }
    let dim = features[0].len();
    if features.iter().chain(background).any(|f| f.len() != dim) {
        return Err(ContextError::Config("feature vectors differ in length".into()));
    }
    let mut net = EvidentialNet::new(dim, &cfg.hidden, contexts, seed);
    if let Some(out) = net.layers.last_mut() {
        out.bias.iter_mut().for_each(|b| *b = cfg.output_bias);
    }
    let samples: Vec<(&[f64], Target)> = features
        .iter()
        .zip(labels)
        .map(|(f, l)| (f.as_slice(), Target::Class(*l)))
        .chain(background.iter().map(|f| (f.as_slice(), Target::Background)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let np = net.param_count();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batches = samples.len().div_ceil(cfg.batch);
    let epochs = cfg.epochs.max(cfg.min_steps.div_ceil(batches));
    let total_steps = (batches * epochs) as f64;
    let ramp = (epochs / 2).max(1) as f64;
    let mut step = 0usize;
    let mut epoch_loss = 0.0;
    for epoch in 0..epochs {
        let anneal = (epoch as f64 / ramp).min(1.0);
        order.shuffle(&mut rng);
        epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let mut grads = Grads::zeros(&net);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (x, target) = samples[i];
                epoch_loss += net.backprop(x, target, anneal, &mut grads, scale);
            }
            step += 1;
            let lr = 0.5 * cfg.lr * (1.0 + (std::f64::consts::PI * (step - 1) as f64 / total_steps).cos());
            let (c1, c2) = (1.0 - b1.powi(step as i32), 1.0 - b2.powi(step as i32));
            for (((p, g), mi), vi) in net.params_mut().zip(grads.flat()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
            }
        }
        epoch_loss /= samples.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(ContextError::Diverged {
                epoch,
                loss: epoch_loss,
            });
        }
    }
    let correct = features
        .iter()
        .zip(labels)
        .filter(|(f, l)| net.predict(f).context as usize == **l + 1)
        .count();
    let report = TrainReport {
        final_loss: epoch_loss,
        accuracy: correct as f64 / features.len() as f64,
    };
    Ok((net, report))
}

/// A trained network bundled with its feature configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextClassifier {
    pub net: EvidentialNet,
    pub features: FeatureConfig,
}

#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    version: u32,
    layer_sizes: Vec<usize>,
    contexts: usize,
    feature_config: FeatureConfig,
    feature_hash: String,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl ContextClassifier {
    /// Trains on the labeled dataset. `nominal` holds inputs observed while
    /// the default parameters were driving without intervention; together
    /// with uniform domain samples they are trained towards zero evidence.
    pub fn train(
        dataset: &LabeledDataset,
        nominal: &[PlannerInput],
        features: FeatureConfig,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<(Self, TrainReport), ContextError> {
        let xs = dataset
            .items
            .iter()
            .map(|(x, _)| featurize(x, &features))
            .collect::<Result<Vec<_>, _>>()?;
        let ys: Vec<usize> = dataset.items.iter().map(|(_, c)| *c as usize - 1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_bg = (xs.len() as f64 * cfg.background_ratio).round() as usize;
        let mut bg = domain_samples(&features, n_bg, &mut rng);
        for x in nominal {
            let f = featurize(x, &features)?;
            if xs.iter().all(|l| distance(l, &f) > cfg.nominal_margin) {
                bg.push(f);
            }
        }
        let (net, report) = train_net(&xs, &ys, &bg, dataset.context_count, cfg, seed)?;
        Ok((Self { net, features }, report))
    }

    pub fn contexts(&self) -> usize {
        self.net.contexts
    }

    pub fn predict(&self, x: &PlannerInput) -> Result<ContextPrediction, ContextError> {
        Ok(self.net.predict(&featurize(x, &self.features)?))
    }

    pub fn to_json(&self) -> String {
        let file = ClassifierFile {
            version: FORMAT_VERSION,
            layer_sizes: self.net.layer_sizes(),
            contexts: self.net.contexts,
            feature_config: self.features.clone(),
            feature_hash: self.features.hash(),
            weights: self.net.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.net.layers.iter().map(|l| l.bias.clone()).collect(),
        };
        serde_json::to_string(&file).expect("classifier serializes")
    }

    /// Parses a classifier and checks it was trained on `expected` features.
    pub fn from_json(text: &str, expected: &FeatureConfig) -> Result<Self, ContextError> {
        let f: ClassifierFile = serde_json::from_str(text)?;
        if f.version != FORMAT_VERSION {
            return Err(ContextError::Malformed(format!("unsupported version {}", f.version)));
        }
        let want = expected.hash();
        if f.feature_hash != want || f.feature_config.hash() != want {
            return Err(ContextError::FeatureMismatch {
                file: f.feature_hash,
                expected: want,
            });
        }
        let sizes = &f.layer_sizes;
        if sizes.len() < 2 || f.weights.len() != sizes.len() - 1 || f.biases.len() != sizes.len() - 1 {
            return Err(ContextError::Malformed("layer count".into()));
        }
        let mut layers = Vec::new();
        for (i, (w, b)) in f.weights.into_iter().zip(f.biases).enumerate() {
            let (inputs, outputs) = (sizes[i], sizes[i + 1]);
            if w.len() != inputs * outputs || b.len() != outputs {
                return Err(ContextError::Malformed(format!("layer {i} shape")));
            }
            layers.push(Layer {
                inputs,
                outputs,
                weights: w,
                bias: b,
            });
        }
        if sizes[0] != expected.dim() || *sizes.last().unwrap() != f.contexts.max(2) {
            return Err(ContextError::Malformed("input or output width".into()));
        }
        Ok(Self {
            net: EvidentialNet {
                layers,
                contexts: f.contexts,
            },
            features: f.feature_config,
        })
    }

    pub fn save(&self, path: &FsPath) -> Result<(), ContextError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &FsPath, expected: &FeatureConfig) -> Result<Self, ContextError> {
        Self::from_json(&std::fs::read_to_string(path)?, expected)
    }
}

/// The prediction's context when its confidence reaches `epsilon_u`,
/// otherwise the default context 0.
pub fn gate(p: &ContextPrediction, epsilon_u: f64) -> u32 {
    if p.confidence >= epsilon_u {
        p.context
    } else {
        0
    }
}

/// Most frequent value; ties go to 0, then to the smallest id.
pub fn mode(window: &[u32]) -> u32 {
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for &c in window {
        match counts.iter_mut().find(|(v, _)| *v == c) {
            Some(e) => e.1 += 1,
            None => counts.push((c, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(c, _)| c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub epsilon_u: f64,
    pub window: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            epsilon_u: 0.8,
            window: 21,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), ContextError> {
        if !(self.epsilon_u > 0.0 && self.epsilon_u < 1.0) {
            return Err(ContextError::Config("epsilon_u must lie in (0, 1)".into()));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(ContextError::Config("window must be odd and positive".into()));
        }
        Ok(())
    }
}

/// Sliding window of selected contexts, seeded with zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFilter {
    window: usize,
    history: VecDeque<u32>,
}

impl ModeFilter {
    pub fn new(window: usize) -> Self {
        let window = window.max(1);
        Self {
            window,
            history: std::iter::repeat_n(0, window).collect(),
        }
    }

    pub fn push(&mut self, c: u32) -> u32 {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(c);
        self.current()
    }

    pub fn current(&self) -> u32 {
        mode(&self.history())
    }

    pub fn history(&self) -> Vec<u32> {
        self.history.iter().copied().collect()
    }
}
