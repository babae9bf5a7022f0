//! ROC AUC via the Mann-Whitney rank statistic and true-label-normalized
//! confusion matrices.

use serde::{Deserialize, Serialize};

use crate::model::{sigmoid, softmax, Task};
use crate::{Error, Result};

/// Area under the ROC curve for binary labels (`1` is positive).
///
/// Tied scores receive their average rank, which matches trapezoidal
/// integration of the empirical ROC curve.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::LabelOutOfRange { label, n_classes: 2 });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg_rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += avg_rank * pos_in_tie as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One-vs-all AUC of every class from per-class scores.
pub fn roc_auc_one_vs_all(scores: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    (0..n_classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|row| row[c]).collect();
            let l: Vec<usize> = labels.iter().map(|&y| usize::from(y == c)).collect();
            roc_auc(&s, &l)
        })
        .collect()
}

/// Predicted class of a raw model output.
pub fn predicted_class(output: &[f64], task: Task) -> usize {
    match task {
        Task::Binary => usize::from(output[0] > 0.0),
        Task::MultiClass => output
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i),
    }
}

/// Confusion matrix `[true][predicted]`, each row divided by its true-class count.
pub fn confusion_matrix(outputs: &[Vec<f64>], labels: &[usize], task: Task) -> Result<Vec<Vec<f64>>> {
    if outputs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: outputs.len(),
            found: labels.len(),
        });
    }
    let n_classes = match task {
        Task::Binary => 2,
        Task::MultiClass => outputs.first().map_or(0, Vec::len),
    };
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (out, &y) in outputs.iter().zip(labels) {
        if y >= n_classes {
            return Err(Error::LabelOutOfRange { label: y, n_classes });
        }
        counts[y][predicted_class(out, task)] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.into_iter()
                .map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AucReport {
    Binary(f64),
    PerClass(Vec<f64>),
}

impl AucReport {
    /// Scalar summary: the binary AUC or the mean one-vs-all AUC.
    pub fn mean(&self) -> f64 {
        match self {
            AucReport::Binary(v) => *v,
            AucReport::PerClass(v) => v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// AUC from raw outputs: `sigmoid(f)` for binary, softmax probabilities per class otherwise.
pub fn auc_from_outputs(outputs: &[Vec<f64>], labels: &[usize], task: Task) -> Result<AucReport> {
    match task {
        Task::Binary => {
            let s: Vec<f64> = outputs.iter().map(|o| sigmoid(o[0])).collect();
            roc_auc(&s, labels).map(AucReport::Binary)
        }
        Task::MultiClass => {
            let n_classes = outputs.first().map_or(0, Vec::len);
            let probs: Vec<Vec<f64>> = outputs.iter().map(|o| softmax(o)).collect();
            roc_auc_one_vs_all(&probs, labels, n_classes).map(AucReport::PerClass)
        }
    }
}
