//! Compact residual CNN with a shared encoder and per-task heads, trained by
//! mini-batch SGD on a combined cross-entropy + RMSE loss.
//!
//! The encoder is a stem convolution (stride 2 on the frequency axis), a
//! max-pool, and three residual blocks of two 3x3 convolutions with channel
//! widths {16, 32, 64}, followed by global average pooling over both axes.
//! The pooled embedding feeds one linear head per task, so the same
//! parameters accept any snapshot length from 1 to 34 windows.
//!
//! There is no batch normalization: a one-shot warmup statistics pass
//! rescales each convolution channel to unit pre-activation variance
//! (folded into the weights), which keeps the backward pass exactly
//! checkable against finite differences.

pub mod checkpoint;
pub mod layers;
pub mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix_seed, DetRng};
use crate::spectro::Spectrogram;
use layers::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, Conv2d, Linear,
    MaxPool2d,
};
use tensor::{Matrix, Tensor};

#[derive(Debug, Error, PartialEq)]
pub enum NnetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("missing or mistyped label: {0}")]
    MissingLabel(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid head: {0}")]
    InvalidHead(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Per-task output head descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHead {
    pub task_id: String,
    pub kind: TaskKind,
    /// Classes for classification; 1 for regression.
    pub n_c: usize,
    /// Loss weight; 0 disables the head.
    pub weight: f64,
}

impl TaskHead {
    pub fn classification(task_id: &str, n_c: usize) -> TaskHead {
        TaskHead { task_id: task_id.into(), kind: TaskKind::Classification, n_c, weight: 1.0 }
    }

    pub fn regression(task_id: &str) -> TaskHead {
        TaskHead { task_id: task_id.into(), kind: TaskKind::Regression, n_c: 1, weight: 1.0 }
    }

    pub fn validate(&self) -> Result<(), NnetError> {
        match self.kind {
            TaskKind::Classification if self.n_c < 2 => Err(NnetError::InvalidHead(format!(
                "classification head '{}' needs >= 2 classes",
                self.task_id
            ))),
            TaskKind::Regression if self.n_c != 1 => Err(NnetError::InvalidHead(format!(
                "regression head '{}' must have n_c = 1",
                self.task_id
            ))),
            _ if !(self.weight >= 0.0) => Err(NnetError::InvalidHead(format!(
                "head '{}' needs weight >= 0",
                self.task_id
            ))),
            _ => Ok(()),
        }
    }
}

/// One training label; order matches the head list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelValue {
    Class(usize),
    Scalar(f64),
}

/// One training sample.
#[derive(Debug, Clone)]
pub struct Sample {
    pub spectrogram: Spectrogram,
    pub labels: Vec<LabelValue>,
}

/// Encoder geometry. The defaults are the compact desk-scale network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub stem_channels: usize,
    pub stem_kernel: (usize, usize),
    pub stem_stride: (usize, usize),
    pub pool: MaxPool2d,
    pub block_widths: Vec<usize>,
    pub block_strides: Vec<(usize, usize)>,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            stem_channels: 8,
            stem_kernel: (7, 1),
            stem_stride: (2, 1),
            pool: MaxPool2d { kernel: (8, 4), stride: (8, 4) },
            block_widths: vec![16, 32, 64],
            block_strides: vec![(2, 1), (2, 2), (2, 2)],
        }
    }
}

impl NetConfig {
    pub fn embedding_dim(&self) -> usize {
        *self.block_widths.last().expect("at least one block")
    }
}

/// Residual block: two 3x3 convolutions with a 1x1 strided projection skip.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub proj: Conv2d,
}

impl ResBlock {
    fn new(in_c: usize, out_c: usize, stride: (usize, usize), rng: &mut DetRng) -> ResBlock {
        ResBlock {
            conv1: Conv2d::new_he_init(in_c, out_c, (3, 3), stride, (1, 1), rng),
            conv2: Conv2d::new_he_init(out_c, out_c, (3, 3), (1, 1), (1, 1), rng),
            proj: Conv2d::new_he_init(in_c, out_c, (1, 1), stride, (0, 0), rng),
        }
    }
}

/// Head parameters plus the regression target statistics frozen at train
/// time (predictions are de-standardized with these).
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub spec: TaskHead,
    pub linear: Linear,
    pub target_mean: f64,
    pub target_std: f64,
}

/// All weights of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetConfig,
    pub stem: Conv2d,
    pub blocks: Vec<ResBlock>,
    pub heads: Vec<HeadParams>,
}

impl NetworkParams {
    pub fn init(config: NetConfig, heads: &[TaskHead], rng: &mut DetRng) -> Result<Self, NnetError> {
        if heads.is_empty() {
            return Err(NnetError::InvalidHead("at least one head required".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for h in heads {
            h.validate()?;
            if !ids.insert(h.task_id.clone()) {
                return Err(NnetError::InvalidHead(format!("duplicate task id '{}'", h.task_id)));
            }
        }
        let stem = Conv2d::new_he_init(
            1,
            config.stem_channels,
            config.stem_kernel,
            config.stem_stride,
            (config.stem_kernel.0 / 2, config.stem_kernel.1 / 2),
            rng,
        );
        let mut blocks = Vec::new();
        let mut in_c = config.stem_channels;
        for (w, s) in config.block_widths.iter().zip(&config.block_strides) {
            blocks.push(ResBlock::new(in_c, *w, *s, rng));
            in_c = *w;
        }
        let emb = config.embedding_dim();
        let heads = heads
            .iter()
            .map(|h| HeadParams {
                spec: h.clone(),
                linear: Linear::new_he_init(emb, h.n_c, rng),
                target_mean: 0.0,
                target_std: 1.0,
            })
            .collect();
        Ok(NetworkParams { config, stem, blocks, heads })
    }

    /// All parameter vectors in a fixed order (stem, blocks, heads); the
    /// gradient layout and the checkpoint format follow this order.
    pub fn param_blocks(&self) -> Vec<&Vec<f64>> {
        let mut v: Vec<&Vec<f64>> = vec![&self.stem.weight, &self.stem.bias];
        for b in &self.blocks {
            v.push(&b.conv1.weight);
            v.push(&b.conv1.bias);
            v.push(&b.conv2.weight);
            v.push(&b.conv2.bias);
            v.push(&b.proj.weight);
            v.push(&b.proj.bias);
        }
        for h in &self.heads {
            v.push(&h.linear.weight);
            v.push(&h.linear.bias);
        }
        v
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v: Vec<&mut Vec<f64>> = vec![&mut self.stem.weight, &mut self.stem.bias];
        for b in &mut self.blocks {
            v.push(&mut b.conv1.weight);
            v.push(&mut b.conv1.bias);
            v.push(&mut b.conv2.weight);
            v.push(&mut b.conv2.bias);
            v.push(&mut b.proj.weight);
            v.push(&mut b.proj.bias);
        }
        for h in &mut self.heads {
            v.push(&mut h.linear.weight);
            v.push(&mut h.linear.bias);
        }
        v
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    pub fn head_index(&self, task_id: &str) -> Option<usize> {
        self.heads.iter().position(|h| h.spec.task_id == task_id)
    }
}

/// Parameter gradients, laid out exactly like
/// [`NetworkParams::param_blocks`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub blocks: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Gradients {
        Gradients { blocks: params.param_blocks().iter().map(|b| vec![0.0; b.len()]).collect() }
    }
}

/// Loss value with its per-head decomposition (already weighted); the total
/// is exactly the sum of the parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_head: Vec<f64>,
}

struct BlockCache {
    r1: Tensor,
    out: Tensor,
}

struct NetCache {
    input: Tensor,
    stem_relu: Tensor,
    pool_out: Tensor,
    pool_argmax: Vec<usize>,
    blocks: Vec<BlockCache>,
    embed: Matrix,
}

fn forward_cached(params: &NetworkParams, input: Tensor) -> (Vec<Matrix>, NetCache) {
    let stem_relu = relu(&params.stem.forward(&input));
    let (pool_out, pool_argmax) = params.config.pool.forward(&stem_relu);

    let mut blocks = Vec::with_capacity(params.blocks.len());
    let mut x = pool_out.clone();
    for b in &params.blocks {
        let r1 = relu(&b.conv1.forward(&x));
        let mut sum = b.conv2.forward(&r1);
        let skip = b.proj.forward(&x);
        for (s, k) in sum.data.iter_mut().zip(&skip.data) {
            *s += k;
        }
        let out = relu(&sum);
        blocks.push(BlockCache { r1, out: out.clone() });
        x = out;
    }

    let embed = global_avg_pool(&x);
    let outputs = params.heads.iter().map(|h| h.linear.forward(&embed)).collect();
    (
        outputs,
        NetCache { input, stem_relu, pool_out, pool_argmax, blocks, embed },
    )
}

fn batch_tensor(batch: &[&Spectrogram]) -> Result<Tensor, NnetError> {
    if batch.is_empty() {
        return Err(NnetError::ShapeMismatch("empty batch".into()));
    }
    Tensor::from_spectrograms(batch)
        .ok_or_else(|| NnetError::ShapeMismatch("batch mixes snapshot lengths".into()))
}

/// Runs the network; returns one output matrix per head (logits for
/// classification, standardized scalars for regression).
pub fn forward(params: &NetworkParams, batch: &[&Spectrogram]) -> Result<Vec<Matrix>, NnetError> {
    let input = batch_tensor(batch)?;
    Ok(forward_cached(params, input).0)
}

/// Pooled encoder embedding for each sample.
pub fn embed(params: &NetworkParams, batch: &[&Spectrogram]) -> Result<Matrix, NnetError> {
    let input = batch_tensor(batch)?;
    Ok(forward_cached(params, input).1.embed)
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_labels(
    heads: &[HeadParams],
    labels: &[Vec<LabelValue>],
    batch_len: usize,
) -> Result<(), NnetError> {
    if labels.len() != batch_len {
        return Err(NnetError::MissingLabel(format!(
            "{} label rows for {} samples",
            labels.len(),
            batch_len
        )));
    }
    for (i, row) in labels.iter().enumerate() {
        if row.len() != heads.len() {
            return Err(NnetError::MissingLabel(format!(
                "sample {i} has {} labels for {} heads",
                row.len(),
                heads.len()
            )));
        }
        for (h, l) in heads.iter().zip(row) {
            match (h.spec.kind, l) {
                (TaskKind::Classification, LabelValue::Class(c)) if *c < h.spec.n_c => {}
                (TaskKind::Regression, LabelValue::Scalar(v)) if v.is_finite() => {}
                _ => {
                    return Err(NnetError::MissingLabel(format!(
                        "sample {i}, head '{}': wrong label kind or out-of-range class",
                        h.spec.task_id
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Loss with per-head breakdown. Classification heads use mean cross-entropy
/// of the softmax; regression heads use RMSE over the batch in standardized
/// target units. `total = sum(weight_h * loss_h)`.
pub fn loss(
    params: &NetworkParams,
    outputs: &[Matrix],
    labels: &[Vec<LabelValue>],
) -> Result<LossBreakdown, NnetError> {
    Ok(loss_and_output_grads(params, outputs, labels, false)?.0)
}

fn loss_and_output_grads(
    params: &NetworkParams,
    outputs: &[Matrix],
    labels: &[Vec<LabelValue>],
    want_grads: bool,
) -> Result<(LossBreakdown, Vec<Matrix>), NnetError> {
    if outputs.len() != params.heads.len() {
        return Err(NnetError::ShapeMismatch("outputs vs heads".into()));
    }
    let n = outputs.first().map(|m| m.rows).unwrap_or(0);
    check_labels(&params.heads, labels, n)?;

    let mut per_head = Vec::with_capacity(params.heads.len());
    let mut grads = Vec::with_capacity(params.heads.len());
    for (hi, h) in params.heads.iter().enumerate() {
        let out = &outputs[hi];
        let w = h.spec.weight;
        let mut grad = Matrix::zeros(out.rows, out.cols);
        let value = match h.spec.kind {
            TaskKind::Classification => {
                let mut ce = 0.0;
                for r in 0..n {
                    let probs = softmax(out.row(r));
                    let target = match labels[r][hi] {
                        LabelValue::Class(c) => c,
                        LabelValue::Scalar(_) => unreachable!("checked above"),
                    };
                    ce += -probs[target].max(1e-300).ln();
                    if want_grads && w > 0.0 {
                        for c in 0..out.cols {
                            let delta = if c == target { 1.0 } else { 0.0 };
                            grad.set(r, c, w * (probs[c] - delta) / n as f64);
                        }
                    }
                }
                ce / n as f64
            }
            TaskKind::Regression => {
                let mut sq = 0.0;
                let mut diffs = vec![0.0; n];
                for r in 0..n {
                    let target = match labels[r][hi] {
                        LabelValue::Scalar(v) => (v - h.target_mean) / h.target_std,
                        LabelValue::Class(_) => unreachable!("checked above"),
                    };
                    let d = out.at(r, 0) - target;
                    diffs[r] = d;
                    sq += d * d;
                }
                let rmse = (sq / n as f64).sqrt();
                if want_grads && w > 0.0 && rmse > 0.0 {
                    for r in 0..n {
                        grad.set(r, 0, w * diffs[r] / (n as f64 * rmse));
                    }
                }
                rmse
            }
        };
        per_head.push(w * value);
        grads.push(grad);
    }
    let total = per_head.iter().sum();
    Ok((LossBreakdown { total, per_head }, grads))
}

/// Exact gradient of the total loss w.r.t. every parameter.
pub fn backward(
    params: &NetworkParams,
    batch: &[&Spectrogram],
    labels: &[Vec<LabelValue>],
) -> Result<(LossBreakdown, Gradients), NnetError> {
    let input = batch_tensor(batch)?;
    let (outputs, cache) = forward_cached(params, input);
    let (breakdown, out_grads) = loss_and_output_grads(params, &outputs, labels, true)?;
    let grads = backprop(params, &cache, &out_grads);
    Ok((breakdown, grads))
}

fn backprop(params: &NetworkParams, cache: &NetCache, out_grads: &[Matrix]) -> Gradients {
    let mut grads = Gradients::zeros_like(params);
    let n_blocks = params.blocks.len();
    // Gradient block layout: [stem_w, stem_b] ++ 6 per res block ++ 2 per head.
    let head_base = 2 + 6 * n_blocks;

    // Heads: accumulate into the shared embedding gradient.
    let mut grad_embed = Matrix::zeros(cache.embed.rows, cache.embed.cols);
    for (hi, h) in params.heads.iter().enumerate() {
        let (gw, gb) = {
            let (left, right) = grads.blocks.split_at_mut(head_base + 2 * hi + 1);
            (left.last_mut().unwrap(), right.first_mut().unwrap())
        };
        let gin = h.linear.backward(&cache.embed, &out_grads[hi], gw, gb);
        for (a, b) in grad_embed.data.iter_mut().zip(&gin.data) {
            *a += b;
        }
    }

    // Encoder tail.
    let last_out = cache
        .blocks
        .last()
        .map(|b| &b.out)
        .unwrap_or(&cache.pool_out);
    let mut grad = global_avg_pool_backward(last_out, &grad_embed);

    // Residual blocks, last to first.
    for bi in (0..n_blocks).rev() {
        let block = &params.blocks[bi];
        let bc = &cache.blocks[bi];
        let x_in = if bi == 0 { &cache.pool_out } else { &cache.blocks[bi - 1].out };

        let g_sum = relu_backward(&bc.out, &grad);
        let base = 2 + 6 * bi;
        let (g_x_conv, g_x_proj);
        {
            let blocks = &mut grads.blocks;
            // conv2 path
            let mut gw2 = std::mem::take(&mut blocks[base + 2]);
            let mut gb2 = std::mem::take(&mut blocks[base + 3]);
            let g_r1 = block.conv2.backward(&bc.r1, &g_sum, &mut gw2, &mut gb2);
            blocks[base + 2] = gw2;
            blocks[base + 3] = gb2;

            let g_a1 = relu_backward(&bc.r1, &g_r1);
            let mut gw1 = std::mem::take(&mut blocks[base]);
            let mut gb1 = std::mem::take(&mut blocks[base + 1]);
            g_x_conv = block.conv1.backward(x_in, &g_a1, &mut gw1, &mut gb1);
            blocks[base] = gw1;
            blocks[base + 1] = gb1;

            // projection skip path
            let mut gwp = std::mem::take(&mut blocks[base + 4]);
            let mut gbp = std::mem::take(&mut blocks[base + 5]);
            g_x_proj = block.proj.backward(x_in, &g_sum, &mut gwp, &mut gbp);
            blocks[base + 4] = gwp;
            blocks[base + 5] = gbp;
        }
        grad = g_x_conv;
        for (a, b) in grad.data.iter_mut().zip(&g_x_proj.data) {
            *a += b;
        }
    }

    // Pool and stem.
    let grad = params.config.pool.backward(&cache.stem_relu, &grad, &cache.pool_argmax);
    let grad = relu_backward(&cache.stem_relu, &grad);
    {
        let blocks = &mut grads.blocks;
        let mut gw = std::mem::take(&mut blocks[0]);
        let mut gb = std::mem::take(&mut blocks[1]);
        params.stem.backward(&cache.input, &grad, &mut gw, &mut gb);
        blocks[0] = gw;
        blocks[1] = gb;
    }
    grads
}

/// Training configuration. Defaults are the desk-scale settings; the
/// full-scale reference settings are 200 epochs with the same optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Epochs at which the learning rate drops by 10x. `None` resolves to
    /// {epochs/2, 3*epochs/4}.
    pub lr_milestones: Option<Vec<usize>>,
    pub batch_size: usize,
    /// Seeds the data order (shuffling); weight init comes from the rng
    /// handed to [`train`], so ensemble members share identical batches and
    /// differ only in initialization.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 30,
            lr_milestones: None,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn resolved_milestones(&self) -> Vec<usize> {
        match &self.lr_milestones {
            Some(m) => m.clone(),
            None => {
                let mut m = vec![self.epochs / 2, self.epochs * 3 / 4];
                m.dedup(); // coincide for tiny epoch counts
                m
            }
        }
    }

    pub fn validate(&self) -> Result<(), NnetError> {
        if !(self.lr > 0.0) {
            return Err(NnetError::InvalidHead("lr must be positive".into()));
        }
        let m = self.resolved_milestones();
        if m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NnetError::InvalidHead("milestones must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Per-epoch record of the training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epoch_loss: Vec<f64>,
    pub epoch_lr: Vec<f64>,
}

/// One-shot warmup statistics pass: rescales and recenters every
/// convolution output channel to zero-mean, unit-std pre-activations on the
/// warmup batch. Scale and shift fold into the weights and biases, so
/// afterwards the network is a plain composition of its layers.
fn calibrate_activations(params: &mut NetworkParams, warmup: &Tensor) {
    fn scale_channels(conv: &mut Conv2d, pre: &Tensor) {
        let per = conv.in_c * conv.kernel.0 * conv.kernel.1;
        for oc in 0..conv.out_c {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut count = 0usize;
            for n in 0..pre.n {
                let base = (n * pre.c + oc) * pre.h * pre.w;
                for &v in &pre.data[base..base + pre.h * pre.w] {
                    sum += v;
                    sumsq += v * v;
                    count += 1;
                }
            }
            let mean = sum / count as f64;
            let std = (sumsq / count as f64 - mean * mean).max(0.0).sqrt().max(1e-6);
            let inv = 1.0 / std;
            for w in &mut conv.weight[oc * per..(oc + 1) * per] {
                *w *= inv;
            }
            conv.bias[oc] = (conv.bias[oc] - mean) * inv;
        }
    }

    let pre = params.stem.forward(warmup);
    scale_channels(&mut params.stem, &pre);
    let x = relu(&params.stem.forward(warmup));
    let (mut x, _) = params.config.pool.forward(&x);
    for b in &mut params.blocks {
        let pre1 = b.conv1.forward(&x);
        scale_channels(&mut b.conv1, &pre1);
        let r1 = relu(&b.conv1.forward(&x));
        let pre2 = b.conv2.forward(&r1);
        scale_channels(&mut b.conv2, &pre2);
        let prep = b.proj.forward(&x);
        scale_channels(&mut b.proj, &prep);
        let mut sum = b.conv2.forward(&r1);
        for (s, k) in sum.data.iter_mut().zip(&b.proj.forward(&x).data) {
            *s += k;
        }
        x = relu(&sum);
    }
}

/// Trains a network on `samples`. Weight initialization draws from `rng`;
/// the data order is derived from `cfg.seed` alone so that ensemble members
/// trained with different rngs see identical batch sequences.
pub fn train(
    samples: &[Sample],
    heads: &[TaskHead],
    cfg: &TrainConfig,
    rng: &mut DetRng,
) -> Result<(NetworkParams, TrainTrace), NnetError> {
    if samples.is_empty() {
        return Err(NnetError::EmptyDataset);
    }
    cfg.validate()?;
    let mut params = NetworkParams::init(NetConfig::default(), heads, rng)?;
    let labels: Vec<Vec<LabelValue>> = samples.iter().map(|s| s.labels.clone()).collect();
    check_labels(&params.heads, &labels, samples.len())?;

    // Freeze regression target statistics from the training set.
    for (hi, h) in params.heads.iter_mut().enumerate() {
        if h.spec.kind == TaskKind::Regression {
            let vals: Vec<f64> = labels
                .iter()
                .map(|row| match row[hi] {
                    LabelValue::Scalar(v) => v,
                    LabelValue::Class(_) => unreachable!("checked above"),
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            h.target_mean = mean;
            h.target_std = var.sqrt().max(1e-9);
        }
    }

    // Warmup statistics pass on a deterministic stride through the dataset,
    // so the calibration batch covers the label variety even when the
    // dataset is stored grouped by class.
    let warm_n = samples.len().min(cfg.batch_size.max(1));
    let warm_refs: Vec<&Spectrogram> = (0..warm_n)
        .map(|k| &samples[k * samples.len() / warm_n].spectrogram)
        .collect();
    let warm = batch_tensor(&warm_refs)?;
    calibrate_activations(&mut params, &warm);

    let mut data_rng = DetRng::new(mix_seed(cfg.seed, 0xda7a));
    let milestones = cfg.resolved_milestones();
    let mut trace = TrainTrace { epoch_loss: Vec::new(), epoch_lr: Vec::new() };
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..cfg.epochs {
        let drops = milestones.iter().filter(|&&m| epoch >= m).count() as i32;
        let lr = cfg.lr * 0.1f64.powi(drops);
        data_rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&Spectrogram> = chunk.iter().map(|&i| &samples[i].spectrogram).collect();
            let batch_labels: Vec<Vec<LabelValue>> =
                chunk.iter().map(|&i| labels[i].clone()).collect();
            let (breakdown, grads) = backward(&params, &batch, &batch_labels)?;
            epoch_loss += breakdown.total * chunk.len() as f64;
            seen += chunk.len();

            for (p, g) in params.param_blocks_mut().into_iter().zip(&grads.blocks) {
                for (pv, gv) in p.iter_mut().zip(g) {
                    *pv -= lr * (gv + cfg.weight_decay * *pv);
                }
            }
        }
        trace.epoch_loss.push(epoch_loss / seen as f64);
        trace.epoch_lr.push(lr);
    }
    Ok((params, trace))
}

/// Argmax class predictions of one classification head.
pub fn predict_classes(
    params: &NetworkParams,
    batch: &[&Spectrogram],
    head_idx: usize,
) -> Result<Vec<usize>, NnetError> {
    let out = &forward(params, batch)?[head_idx];
    Ok((0..out.rows)
        .map(|r| {
            let row = out.row(r);
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect())
}

/// Softmax probabilities of one classification head.
pub fn predict_probs(
    params: &NetworkParams,
    batch: &[&Spectrogram],
    head_idx: usize,
) -> Result<Vec<Vec<f64>>, NnetError> {
    let out = &forward(params, batch)?[head_idx];
    Ok((0..out.rows).map(|r| softmax(out.row(r))).collect())
}

/// De-standardized regression predictions, in physical units.
pub fn predict_regression(
    params: &NetworkParams,
    batch: &[&Spectrogram],
    head_idx: usize,
) -> Result<Vec<f64>, NnetError> {
    let h = &params.heads[head_idx];
    let out = &forward(params, batch)?[head_idx];
    Ok((0..out.rows)
        .map(|r| out.at(r, 0) * h.target_std + h.target_mean)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectro::WINDOW;

    fn random_spectrogram(n_t: usize, seed: u64) -> Spectrogram {
        let mut rng = DetRng::new(seed);
        Spectrogram {
            grid: (0..WINDOW * n_t).map(|_| rng.uniform() as f32).collect(),
            n_t,
            raw_db_range: (-182.77, -17.12),
        }
    }

    fn constant_column_spectrogram(n_t: usize, seed: u64) -> Spectrogram {
        let mut rng = DetRng::new(seed);
        let column: Vec<f32> = (0..WINDOW).map(|_| rng.uniform() as f32).collect();
        Spectrogram {
            grid: (0..n_t).flat_map(|_| column.iter().copied()).collect(),
            n_t,
            raw_db_range: (-182.77, -17.12),
        }
    }

    fn two_head_params(seed: u64) -> NetworkParams {
        let heads = vec![
            TaskHead::classification("type", 3),
            TaskHead::regression("bandwidth_mhz"),
        ];
        NetworkParams::init(NetConfig::default(), &heads, &mut DetRng::new(seed)).unwrap()
    }

    fn two_head_labels(n: usize, seed: u64) -> Vec<Vec<LabelValue>> {
        let mut rng = DetRng::new(seed);
        (0..n)
            .map(|_| {
                vec![
                    LabelValue::Class(rng.below(3)),
                    LabelValue::Scalar(rng.uniform_in(-1.0, 1.0)),
                ]
            })
            .collect()
    }

    #[test]
    fn zero_initialized_head_gives_uniform_softmax() {
        let heads = vec![TaskHead::classification("type", 7)];
        let mut params =
            NetworkParams::init(NetConfig::default(), &heads, &mut DetRng::new(1)).unwrap();
        params.heads[0].linear.weight.iter_mut().for_each(|w| *w = 0.0);
        params.heads[0].linear.bias.iter_mut().for_each(|b| *b = 0.0);
        let s = random_spectrogram(4, 2);
        let probs = predict_probs(&params, &[&s], 0).unwrap();
        for p in &probs[0] {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_inputs_give_identical_rows() {
        let params = two_head_params(3);
        let s = random_spectrogram(5, 4);
        let out = forward(&params, &[&s, &s]).unwrap();
        for m in &out {
            assert_eq!(m.row(0), m.row(1));
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let params = two_head_params(5);
        let batch: Vec<Spectrogram> = (0..4).map(|i| random_spectrogram(3, 10 + i)).collect();
        let refs: Vec<&Spectrogram> = batch.iter().collect();
        let probs = predict_probs(&params, &refs, 0).unwrap();
        for row in probs {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn accepts_any_snapshot_length_without_parameter_change() {
        let params = two_head_params(6);
        for n_t in [1usize, 2, 17, 34] {
            let s = random_spectrogram(n_t, 20 + n_t as u64);
            let out = forward(&params, &[&s]).unwrap();
            assert_eq!(out[0].cols, 3);
            assert_eq!(out[1].cols, 1);
        }
    }

    #[test]
    fn mixed_lengths_in_one_batch_rejected() {
        let params = two_head_params(7);
        let a = random_spectrogram(4, 1);
        let b = random_spectrogram(5, 2);
        assert!(matches!(
            forward(&params, &[&a, &b]),
            Err(NnetError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn embedding_invariant_to_duplicated_time_columns() {
        // Constant-in-time input: replicate time padding makes the encoder
        // output independent of the snapshot length.
        let params = two_head_params(8);
        let short = constant_column_spectrogram(4, 30);
        let long = constant_column_spectrogram(16, 30);
        let e_short = embed(&params, &[&short]).unwrap();
        let e_long = embed(&params, &[&long]).unwrap();
        for (a, b) in e_short.data.iter().zip(&e_long.data) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn loss_examples() {
        // Uniform 7-class prediction -> CE = ln 7.
        let heads = vec![TaskHead::classification("type", 7)];
        let mut params =
            NetworkParams::init(NetConfig::default(), &heads, &mut DetRng::new(9)).unwrap();
        params.heads[0].linear.weight.iter_mut().for_each(|w| *w = 0.0);
        params.heads[0].linear.bias.iter_mut().for_each(|b| *b = 0.0);
        let s = random_spectrogram(2, 3);
        let out = forward(&params, &[&s]).unwrap();
        let l = loss(&params, &out, &[vec![LabelValue::Class(4)]]).unwrap();
        assert!((l.total - 7f64.ln()).abs() < 1e-12);
        assert!((l.total - 1.945910).abs() < 1e-6);

        // Perfect regression -> RMSE term 0; total = sum of parts.
        let params2 = two_head_params(10);
        let out2 = forward(&params2, &[&s]).unwrap();
        let pred = out2[1].at(0, 0);
        let labels = vec![vec![LabelValue::Class(1), LabelValue::Scalar(pred)]];
        let l2 = loss(&params2, &out2, &labels).unwrap();
        assert_eq!(l2.per_head[1], 0.0);
        assert_eq!(l2.total, l2.per_head.iter().sum::<f64>());
    }

    #[test]
    fn loss_decomposition_sums_exactly() {
        let params = two_head_params(11);
        let batch: Vec<Spectrogram> = (0..3).map(|i| random_spectrogram(4, 40 + i)).collect();
        let refs: Vec<&Spectrogram> = batch.iter().collect();
        let out = forward(&params, &refs).unwrap();
        let labels = two_head_labels(3, 41);
        let l = loss(&params, &out, &labels).unwrap();
        assert_eq!(l.total, l.per_head.iter().sum::<f64>());
        assert!(l.per_head.iter().all(|&v| v >= 0.0));
    }

    /// Central finite differences on a sampled subset of parameters; the
    /// full 200-parameter sweep runs in the acceptance suite.
    #[test]
    fn gradients_match_finite_differences() {
        let mut params = two_head_params(12);
        let batch: Vec<Spectrogram> = (0..3).map(|i| random_spectrogram(4, 50 + i)).collect();
        let refs: Vec<&Spectrogram> = batch.iter().collect();
        let labels = two_head_labels(3, 51);

        let (_, grads) = backward(&params, &refs, &labels).unwrap();
        let n_blocks = params.param_blocks().len();
        let mut rng = DetRng::new(52);
        let mut checked = 0;
        for b in 0..n_blocks {
            let len = params.param_blocks()[b].len();
            for _ in 0..3.min(len) {
                let i = rng.below(len);
                let h = 1e-4;
                let orig = params.param_blocks()[b][i];
                params.param_blocks_mut()[b][i] = orig + h;
                let out_p = forward(&params, &refs).unwrap();
                let lp = loss(&params, &out_p, &labels).unwrap().total;
                params.param_blocks_mut()[b][i] = orig - h;
                let out_m = forward(&params, &refs).unwrap();
                let lm = loss(&params, &out_m, &labels).unwrap().total;
                params.param_blocks_mut()[b][i] = orig;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.blocks[b][i];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
                assert!(
                    rel < 1e-4,
                    "block {b} idx {i}: numeric {numeric:.3e} analytic {analytic:.3e} rel {rel:.3e}"
                );
                checked += 1;
            }
        }
        assert!(checked >= 40, "only {checked} parameters checked");
    }

    #[test]
    fn zero_weight_head_gets_zero_gradient() {
        let heads = vec![
            TaskHead::classification("type", 3),
            TaskHead { weight: 0.0, ..TaskHead::regression("bandwidth_mhz") },
        ];
        let params = NetworkParams::init(NetConfig::default(), &heads, &mut DetRng::new(13)).unwrap();
        let batch: Vec<Spectrogram> = (0..2).map(|i| random_spectrogram(3, 60 + i)).collect();
        let refs: Vec<&Spectrogram> = batch.iter().collect();
        let labels = two_head_labels(2, 61);
        let (_, grads) = backward(&params, &refs, &labels).unwrap();
        // The inactive head's parameter gradients are exactly zero.
        let n = grads.blocks.len();
        assert!(grads.blocks[n - 2].iter().all(|&g| g == 0.0));
        assert!(grads.blocks[n - 1].iter().all(|&g| g == 0.0));
        // The active head's are not.
        assert!(grads.blocks[n - 4].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn gradients_are_deterministic() {
        let params = two_head_params(14);
        let batch: Vec<Spectrogram> = (0..2).map(|i| random_spectrogram(3, 70 + i)).collect();
        let refs: Vec<&Spectrogram> = batch.iter().collect();
        let labels = two_head_labels(2, 71);
        let (la, ga) = backward(&params, &refs, &labels).unwrap();
        let (lb, gb) = backward(&params, &refs, &labels).unwrap();
        assert_eq!(la, lb);
        for (a, b) in ga.blocks.iter().zip(&gb.blocks) {
            assert_eq!(a, b);
        }
    }

    fn tiny_training_set(n_per_class: usize, seed: u64) -> Vec<Sample> {
        // Linearly separable toy set: class k has a bright band at a
        // class-specific frequency range.
        let mut rng = DetRng::new(seed);
        let mut out = Vec::new();
        for class in 0..3usize {
            for _ in 0..n_per_class {
                let mut grid = vec![0.0f32; WINDOW * 4];
                for col in 0..4 {
                    for bin in 0..WINDOW {
                        let base = if bin >= class * 300 && bin < class * 300 + 200 { 0.8 } else { 0.2 };
                        grid[col * WINDOW + bin] = base + 0.05 * rng.uniform() as f32;
                    }
                }
                out.push(Sample {
                    spectrogram: Spectrogram { grid, n_t: 4, raw_db_range: (-182.77, -17.12) },
                    labels: vec![LabelValue::Class(class)],
                });
            }
        }
        out
    }

    #[test]
    fn lr_schedule_follows_milestones() {
        let samples = tiny_training_set(2, 80);
        let heads = vec![TaskHead::classification("type", 3)];
        let cfg = TrainConfig { epochs: 8, batch_size: 4, ..TrainConfig::default() };
        let (_, trace) = train(&samples, &heads, &cfg, &mut DetRng::new(81)).unwrap();
        // Milestones resolve to {4, 6}.
        assert_eq!(trace.epoch_lr[0], 0.01);
        assert_eq!(trace.epoch_lr[3], 0.01);
        assert!((trace.epoch_lr[4] - 0.001).abs() < 1e-15);
        assert!((trace.epoch_lr[6] - 0.0001).abs() < 1e-15);
        assert_eq!(trace.epoch_loss.len(), 8);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let samples = tiny_training_set(2, 90);
        let heads = vec![TaskHead::classification("type", 3)];
        let cfg = TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::default() };
        let (pa, _) = train(&samples, &heads, &cfg, &mut DetRng::new(91)).unwrap();
        let (pb, _) = train(&samples, &heads, &cfg, &mut DetRng::new(91)).unwrap();
        assert_eq!(pa, pb);
        let (pc, _) = train(&samples, &heads, &cfg, &mut DetRng::new(92)).unwrap();
        assert_ne!(pa, pc);
    }

    #[test]
    fn single_sample_loss_is_nonincreasing() {
        let samples = tiny_training_set(1, 95)[..1].to_vec();
        let heads = vec![TaskHead::classification("type", 3)];
        let cfg = TrainConfig { epochs: 10, batch_size: 1, ..TrainConfig::default() };
        let (_, trace) = train(&samples, &heads, &cfg, &mut DetRng::new(96)).unwrap();
        for w in trace.epoch_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss went up: {w:?}");
        }
    }

    #[test]
    fn toy_classes_are_learnable() {
        let samples = tiny_training_set(8, 100);
        let heads = vec![TaskHead::classification("type", 3)];
        let cfg = TrainConfig { epochs: 12, batch_size: 8, ..TrainConfig::default() };
        let (params, _) = train(&samples, &heads, &cfg, &mut DetRng::new(101)).unwrap();
        let refs: Vec<&Spectrogram> = samples.iter().map(|s| &s.spectrogram).collect();
        let preds = predict_classes(&params, &refs, 0).unwrap();
        let truths: Vec<usize> = samples
            .iter()
            .map(|s| match s.labels[0] {
                LabelValue::Class(c) => c,
                _ => unreachable!(),
            })
            .collect();
        let acc = crate::metrics::accuracy(&preds, &truths).unwrap();
        assert!(acc >= 99.0, "train accuracy {acc}");
    }

    #[test]
    fn empty_dataset_and_bad_labels_rejected() {
        let heads = vec![TaskHead::classification("type", 3)];
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&[], &heads, &cfg, &mut DetRng::new(1)),
            Err(NnetError::EmptyDataset)
        ));

        let mut bad = tiny_training_set(1, 1);
        bad[0].labels = vec![LabelValue::Scalar(1.0)];
        assert!(matches!(
            train(&bad, &heads, &cfg, &mut DetRng::new(1)),
            Err(NnetError::MissingLabel(_))
        ));

        let mut out_of_range = tiny_training_set(1, 2);
        out_of_range[0].labels = vec![LabelValue::Class(3)];
        assert!(matches!(
            train(&out_of_range, &heads, &cfg, &mut DetRng::new(1)),
            Err(NnetError::MissingLabel(_))
        ));
    }

    #[test]
    fn regression_predictions_destandardize() {
        // Train on a constant target; predictions come back in physical
        // units near that constant.
        let mut samples = tiny_training_set(4, 110);
        for s in &mut samples {
            s.labels = vec![s.labels[0], LabelValue::Scalar(42.0)];
        }
        let heads = vec![
            TaskHead::classification("type", 3),
            TaskHead::regression("bandwidth_mhz"),
        ];
        let cfg = TrainConfig { epochs: 3, batch_size: 4, ..TrainConfig::default() };
        let (params, _) = train(&samples, &heads, &cfg, &mut DetRng::new(111)).unwrap();
        assert_eq!(params.heads[1].target_mean, 42.0);
        let refs: Vec<&Spectrogram> = samples.iter().map(|s| &s.spectrogram).collect();
        let preds = predict_regression(&params, &refs, 1).unwrap();
        for p in preds {
            assert!((p - 42.0).abs() < 1.0, "prediction {p}");
        }
    }
}
