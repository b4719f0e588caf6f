//! Deep-ensemble orchestration and softmax-variability decomposition of
//! predictive uncertainty into aleatoric and epistemic parts.
//!
//! For member softmax rows `p_m` with mean `pbar`:
//! `aleatoric = mean_m(diag(p_m) - p_m p_m^T)` and
//! `epistemic = mean_m((p_m - pbar)(p_m - pbar)^T)`; the two sum to
//! `diag(pbar) - pbar pbar^T`.

use rayon::prelude::*;
use thiserror::Error;

use crate::nnet::{self, NetworkParams, NnetError, Sample, TaskHead, TrainConfig, TrainTrace};
use crate::rng::DetRng;
use crate::spectro::Spectrogram;

#[derive(Debug, Error, PartialEq)]
pub enum UncertError {
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("invalid member probabilities: {0}")]
    InvalidProbs(String),
}

/// Softmax outputs of every ensemble member for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    /// M x C, row per member.
    pub probs: Vec<Vec<f64>>,
    pub member_seeds: Vec<u64>,
}

impl EnsemblePrediction {
    pub fn new(probs: Vec<Vec<f64>>, member_seeds: Vec<u64>) -> Result<Self, UncertError> {
        if probs.is_empty() {
            return Err(UncertError::EmptyEnsemble);
        }
        let c = probs[0].len();
        for (m, row) in probs.iter().enumerate() {
            if row.len() != c {
                return Err(UncertError::InvalidProbs(format!("row {m} has wrong length")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                return Err(UncertError::InvalidProbs(format!("row {m} is not a distribution")));
            }
        }
        Ok(EnsemblePrediction { probs, member_seeds })
    }

    pub fn n_members(&self) -> usize {
        self.probs.len()
    }

    pub fn n_classes(&self) -> usize {
        self.probs[0].len()
    }

    /// Mean softmax across members.
    pub fn mean_probs(&self) -> Vec<f64> {
        let c = self.n_classes();
        let mut mean = vec![0.0; c];
        for row in &self.probs {
            for (m, p) in mean.iter_mut().zip(row) {
                *m += p;
            }
        }
        let inv = 1.0 / self.n_members() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }

    /// Argmax of the mean softmax; ties break toward the lowest class index.
    pub fn predicted_class(&self) -> usize {
        let mean = self.mean_probs();
        let mut best = 0;
        for (i, &p) in mean.iter().enumerate() {
            if p > mean[best] {
                best = i;
            }
        }
        best
    }
}

/// C x C uncertainty decomposition for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    pub mean_probs: Vec<f64>,
    /// Row-major C x C matrices.
    pub aleatoric: Vec<f64>,
    pub epistemic: Vec<f64>,
    pub per_class_aleatoric: Vec<f64>,
    pub per_class_epistemic: Vec<f64>,
}

impl UncertaintyReport {
    pub fn n_classes(&self) -> usize {
        self.mean_probs.len()
    }

    /// Total (summed diagonal) aleatoric uncertainty.
    pub fn aleatoric_trace(&self) -> f64 {
        self.per_class_aleatoric.iter().sum()
    }

    pub fn epistemic_trace(&self) -> f64 {
        self.per_class_epistemic.iter().sum()
    }
}

/// Kwon-style decomposition from the member softmax rows.
pub fn decompose(ens: &EnsemblePrediction) -> UncertaintyReport {
    let m = ens.n_members() as f64;
    let c = ens.n_classes();
    let mean = ens.mean_probs();

    let mut aleatoric = vec![0.0; c * c];
    let mut epistemic = vec![0.0; c * c];
    for row in &ens.probs {
        for i in 0..c {
            let dev_i = row[i] - mean[i];
            for j in 0..c {
                // diag(p) - p p^T accumulated member by member.
                let d = if i == j { row[i] } else { 0.0 };
                aleatoric[i * c + j] += d - row[i] * row[j];
                epistemic[i * c + j] += dev_i * (row[j] - mean[j]);
            }
        }
    }
    for v in aleatoric.iter_mut().chain(epistemic.iter_mut()) {
        *v /= m;
    }
    let per_class_aleatoric = (0..c).map(|i| aleatoric[i * c + i]).collect();
    let per_class_epistemic = (0..c).map(|i| epistemic[i * c + i]).collect();
    UncertaintyReport {
        mean_probs: mean,
        aleatoric,
        epistemic,
        per_class_aleatoric,
        per_class_epistemic,
    }
}

/// Trains `m` networks that differ only in their initialization seed; the
/// members come back in seed order. Training data order is fixed by
/// `cfg.seed`, so initialization is the sole source of stochasticity.
pub fn train_ensemble(
    samples: &[Sample],
    heads: &[TaskHead],
    cfg: &TrainConfig,
    m: usize,
    base: &DetRng,
) -> Result<Vec<(NetworkParams, TrainTrace)>, NnetError> {
    if m == 0 {
        return Err(NnetError::EmptyDataset);
    }
    (0..m)
        .into_par_iter()
        .map(|i| {
            let mut member_rng = base.derive(i as u64);
            nnet::train(samples, heads, cfg, &mut member_rng)
        })
        .collect()
}

/// Per-sample ensemble predictions of one classification head.
pub fn ensemble_predict(
    members: &[NetworkParams],
    batch: &[&Spectrogram],
    head_idx: usize,
    member_seeds: &[u64],
) -> Result<Vec<EnsemblePrediction>, NnetError> {
    if members.is_empty() {
        return Err(NnetError::EmptyDataset);
    }
    let per_member: Vec<Vec<Vec<f64>>> = members
        .iter()
        .map(|p| nnet::predict_probs(p, batch, head_idx))
        .collect::<Result<_, _>>()?;
    Ok((0..batch.len())
        .map(|s| EnsemblePrediction {
            probs: per_member.iter().map(|m| m[s].clone()).collect(),
            member_seeds: member_seeds.to_vec(),
        })
        .collect())
}

/// Ensemble mean and across-member standard deviation of a regression head
/// (epistemic spread only; there is no predicted-variance head).
pub fn ensemble_regression(
    members: &[NetworkParams],
    batch: &[&Spectrogram],
    head_idx: usize,
) -> Result<Vec<(f64, f64)>, NnetError> {
    if members.is_empty() {
        return Err(NnetError::EmptyDataset);
    }
    let per_member: Vec<Vec<f64>> = members
        .iter()
        .map(|p| nnet::predict_regression(p, batch, head_idx))
        .collect::<Result<_, _>>()?;
    let m = members.len() as f64;
    Ok((0..batch.len())
        .map(|s| {
            let mean = per_member.iter().map(|v| v[s]).sum::<f64>() / m;
            let var = per_member.iter().map(|v| (v[s] - mean) * (v[s] - mean)).sum::<f64>() / m;
            (mean, var.sqrt())
        })
        .collect())
}

/// Mean per-class uncertainty of samples grouped by (true, predicted) cell;
/// one C x C map for aleatoric, one for epistemic. Empty cells hold 0.
pub fn confusion_conditioned_uncertainty(
    reports: &[UncertaintyReport],
    truths: &[usize],
    preds: &[usize],
    n_classes: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut alea = vec![0.0; n_classes * n_classes];
    let mut epis = vec![0.0; n_classes * n_classes];
    let mut count = vec![0usize; n_classes * n_classes];
    for ((r, &t), &p) in reports.iter().zip(truths).zip(preds) {
        let cell = t * n_classes + p;
        alea[cell] += r.aleatoric_trace();
        epis[cell] += r.epistemic_trace();
        count[cell] += 1;
    }
    for i in 0..n_classes * n_classes {
        if count[i] > 0 {
            alea[i] /= count[i] as f64;
            epis[i] /= count[i] as f64;
        }
    }
    (alea, epis)
}

/// CSV with one row per sample: true label, prediction, then the per-class
/// aleatoric and epistemic diagonals.
pub fn uncertainty_csv(
    reports: &[UncertaintyReport],
    truths: &[usize],
    preds: &[usize],
) -> String {
    let c = reports.first().map(|r| r.n_classes()).unwrap_or(0);
    let mut out = String::from("true,pred");
    for i in 0..c {
        out.push_str(&format!(",aleatoric_{i}"));
    }
    for i in 0..c {
        out.push_str(&format!(",epistemic_{i}"));
    }
    out.push('\n');
    for ((r, &t), &p) in reports.iter().zip(truths).zip(preds) {
        out.push_str(&format!("{t},{p}"));
        for v in &r.per_class_aleatoric {
            out.push_str(&format!(",{v:.9}"));
        }
        for v in &r.per_class_epistemic {
            out.push_str(&format!(",{v:.9}"));
        }
        out.push('\n');
    }
    out
}
