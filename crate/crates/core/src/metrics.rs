//! Classification and regression metrics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("prediction and truth lengths differ: {preds} vs {truths}")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("empty input")]
    Empty,
}

fn check_lengths<P, T>(preds: &[P], truths: &[T]) -> Result<(), MetricError> {
    if preds.len() != truths.len() {
        return Err(MetricError::LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Share of correctly classified samples, in percent.
pub fn accuracy(preds: &[usize], truths: &[usize]) -> Result<f64, MetricError> {
    check_lengths(preds, truths)?;
    let correct = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / preds.len() as f64)
}

/// Support-weighted F2 score: per-class one-vs-rest
/// `F2 = 5*precision*recall / (4*precision + recall)`, classes with zero
/// precision and recall score 0, averaged with true-class support weights.
pub fn weighted_f2(preds: &[usize], truths: &[usize], n_classes: usize) -> Result<f64, MetricError> {
    check_lengths(preds, truths)?;
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fnn = vec![0usize; n_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if p == t {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fnn[t] += 1;
        }
    }
    let mut weighted = 0.0;
    let mut support_total = 0usize;
    for c in 0..n_classes {
        let support = tp[c] + fnn[c];
        if support == 0 {
            continue;
        }
        support_total += support;
        let precision = if tp[c] + fp[c] > 0 { tp[c] as f64 / (tp[c] + fp[c]) as f64 } else { 0.0 };
        let recall = tp[c] as f64 / support as f64;
        let f2 = if 4.0 * precision + recall > 0.0 {
            5.0 * precision * recall / (4.0 * precision + recall)
        } else {
            0.0
        };
        weighted += support as f64 * f2;
    }
    Ok(weighted / support_total as f64)
}

/// Mean absolute error in the targets' units.
pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64, MetricError> {
    check_lengths(preds, truths)?;
    Ok(preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn from_predictions(
        preds: &[usize],
        truths: &[usize],
        n_classes: usize,
    ) -> Result<ConfusionMatrix, MetricError> {
        check_lengths(preds, truths)?;
        let mut counts = vec![0usize; n_classes * n_classes];
        for (&p, &t) in preds.iter().zip(truths) {
            counts[t * n_classes + p] += 1;
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn at(&self, truth: usize, pred: usize) -> usize {
        self.counts[truth * self.n_classes + pred]
    }

    /// Per-true-class sample counts.
    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n_classes)
            .map(|t| self.counts[t * self.n_classes..(t + 1) * self.n_classes].iter().sum())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// trace/total in percent; equals [`accuracy`] by construction.
    pub fn accuracy(&self) -> f64 {
        let trace: usize = (0..self.n_classes).map(|c| self.at(c, c)).sum();
        100.0 * trace as f64 / self.total() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for c in 0..self.n_classes {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for t in 0..self.n_classes {
            out.push_str(&t.to_string());
            for p in 0..self.n_classes {
                out.push_str(&format!(",{}", self.at(t, p)));
            }
            out.push('\n');
        }
        out
    }
}

/// Mean and population standard deviation of repeated runs.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert_eq!(accuracy(&[0, 1, 2, 2], &[0, 1, 1, 2]).unwrap(), 75.0);
        assert_eq!(accuracy(&[1], &[0]).unwrap(), 0.0);
        assert_eq!(accuracy(&[], &[]).unwrap_err(), MetricError::Empty);
        assert!(matches!(
            accuracy(&[1], &[1, 2]),
            Err(MetricError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn f2_perfect_is_one() {
        assert!((weighted_f2(&[0, 1, 2], &[0, 1, 2], 3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f2_single_class_formula() {
        // One class carries all support with precision 0.5 and recall 1.0:
        // truths all 1, predictions half 1 half 0 on a set where class 0
        // never occurs as truth.
        let truths = vec![1, 1];
        let preds = vec![1, 1];
        // Build P=0.5 via false positives on an extra class-1 truth set:
        // preds [1,1,1,1] truths [1,1,0,0] gives class1 P=0.5 R=1.
        let preds2 = vec![1, 1, 1, 1];
        let truths2 = vec![1, 1, 0, 0];
        let f2_all = weighted_f2(&preds2, &truths2, 2).unwrap();
        // class1: F2 = 5*0.5*1/(4*0.5+1) = 0.8333..; class0: R=0 -> 0.
        // supports equal, so weighted = 0.41666...
        assert!((f2_all - 5.0 / 12.0).abs() < 1e-12, "{f2_all}");
        assert!((weighted_f2(&preds, &truths, 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f2_constant_predictor_example() {
        // Constant class 0 on a balanced 2-class set of 4: class0 F2 =
        // 0.8333, class1 F2 = 0, weighted = 0.41666...
        let f2 = weighted_f2(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((f2 - 5.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        let truths = [4.0, -2.0, 7.5];
        let shifted: Vec<f64> = truths.iter().map(|t| t + 3.5).collect();
        assert!((mae(&shifted, &truths).unwrap() - 3.5).abs() < 1e-12);
    }

    /// Brute-force re-implementations used as the metric oracle.
    pub mod oracle {
        pub fn accuracy(preds: &[usize], truths: &[usize]) -> f64 {
            let mut correct = 0.0;
            for i in 0..preds.len() {
                if preds[i] == truths[i] {
                    correct += 1.0;
                }
            }
            100.0 * correct / preds.len() as f64
        }

        pub fn mae(preds: &[f64], truths: &[f64]) -> f64 {
            let mut acc = 0.0;
            for i in 0..preds.len() {
                acc += (preds[i] - truths[i]).abs();
            }
            acc / preds.len() as f64
        }

        /// Direct one-vs-rest evaluation of the F2 definition.
        pub fn weighted_f2(preds: &[usize], truths: &[usize], n_classes: usize) -> f64 {
            let mut weighted = 0.0;
            let mut total_support = 0.0;
            for c in 0..n_classes {
                let support = truths.iter().filter(|&&t| t == c).count();
                if support == 0 {
                    continue;
                }
                let tp = preds
                    .iter()
                    .zip(truths)
                    .filter(|&(&p, &t)| p == c && t == c)
                    .count() as f64;
                let pred_pos = preds.iter().filter(|&&p| p == c).count() as f64;
                let precision = if pred_pos > 0.0 { tp / pred_pos } else { 0.0 };
                let recall = tp / support as f64;
                let f2 = if 4.0 * precision + recall > 0.0 {
                    5.0 * precision * recall / (4.0 * precision + recall)
                } else {
                    0.0
                };
                weighted += support as f64 * f2;
                total_support += support as f64;
            }
            weighted / total_support
        }
    }

    #[test]
    fn metrics_match_brute_force_oracle() {
        let mut rng = DetRng::new(31);
        for _ in 0..200 {
            let n = 1 + rng.below(50);
            let c = 2 + rng.below(8);
            let preds: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
            let truths: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
            assert_eq!(accuracy(&preds, &truths).unwrap(), oracle::accuracy(&preds, &truths));
            let f2 = weighted_f2(&preds, &truths, c).unwrap();
            assert!((f2 - oracle::weighted_f2(&preds, &truths, c)).abs() < 1e-12);

            let rp: Vec<f64> = (0..n).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
            let rt: Vec<f64> = (0..n).map(|_| rng.uniform_in(-10.0, 10.0)).collect();
            assert_eq!(mae(&rp, &rt).unwrap(), oracle::mae(&rp, &rt));
        }
    }

    #[test]
    fn confusion_matrix_row_sums_and_trace() {
        let preds = [0, 1, 1, 2, 2, 2];
        let truths = [0, 1, 2, 2, 2, 0];
        let cm = ConfusionMatrix::from_predictions(&preds, &truths, 3).unwrap();
        assert_eq!(cm.row_sums(), vec![2, 1, 3]);
        assert_eq!(cm.total(), 6);
        let acc = accuracy(&preds, &truths).unwrap();
        assert!((cm.accuracy() - acc).abs() < 1e-12);
        assert_eq!(cm.at(2, 2), 2);
        assert_eq!(cm.at(0, 2), 1);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((m - 5.0).abs() < 1e-12);
        assert!((s - 2.0).abs() < 1e-12);
    }
}
