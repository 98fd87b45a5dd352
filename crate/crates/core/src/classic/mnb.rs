//! Multinomial naive Bayes over term-count vectors with Laplace smoothing.

use serde::{Deserialize, Serialize};

use crate::classic::{argmax_lowest, classes_from_labels};
use crate::error::{Error, Result};
use crate::vectorize::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub classes: Vec<u8>,
    pub dim: usize,
    pub alpha: f64,
    pub log_prior: Vec<f64>,
    /// Per-class token log-likelihood table, `[class][feature]`.
    pub log_likelihood: Vec<Vec<f64>>,
}

/// Fit class log-priors from label frequencies and token log-likelihoods
/// with Laplace smoothing `alpha`. Inputs are raw term counts.
pub fn train_mnb(x: &[SparseVector], y: &[u8], alpha: f64) -> Result<MnbModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Model("training set empty or mismatched".into()));
    }
    if alpha <= 0.0 {
        return Err(Error::Model(format!("alpha must be positive, got {alpha}")));
    }
    if x.iter().any(|v| v.values.iter().any(|&c| c < 0.0)) {
        return Err(Error::Model("term counts must be non-negative".into()));
    }
    let classes = classes_from_labels(y);
    if classes.len() < 2 {
        return Err(Error::Model("need at least two classes".into()));
    }
    let dim = x[0].dim;
    let n = x.len() as f64;

    let mut log_prior = Vec::with_capacity(classes.len());
    let mut log_likelihood = Vec::with_capacity(classes.len());
    for &class in &classes {
        let mut token_counts = vec![0.0f64; dim];
        let mut class_docs = 0usize;
        for (v, &label) in x.iter().zip(y) {
            if label != class {
                continue;
            }
            class_docs += 1;
            for (&i, &c) in v.indices.iter().zip(&v.values) {
                token_counts[i] += c;
            }
        }
        if class_docs == 0 {
            return Err(Error::Model(format!("class {class} absent from labels")));
        }
        let total: f64 = token_counts.iter().sum();
        let denom = total + alpha * dim as f64;
        log_prior.push((class_docs as f64 / n).ln());
        log_likelihood.push(
            token_counts
                .iter()
                .map(|&c| ((c + alpha) / denom).ln())
                .collect(),
        );
    }

    Ok(MnbModel {
        classes,
        dim,
        alpha,
        log_prior,
        log_likelihood,
    })
}

impl MnbModel {
    fn log_posterior(&self, v: &SparseVector) -> Vec<f64> {
        self.classes
            .iter()
            .enumerate()
            .map(|(c, _)| {
                let table = &self.log_likelihood[c];
                let mut lp = self.log_prior[c];
                for (&i, &count) in v.indices.iter().zip(&v.values) {
                    lp += count * table[i];
                }
                lp
            })
            .collect()
    }

    /// Posterior probabilities per class (rows sum to 1).
    pub fn scores(&self, x: &[SparseVector]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|v| {
                let lp = self.log_posterior(v);
                let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs: Vec<f64> = lp.iter().map(|&l| (l - max).exp()).collect();
                let sum: f64 = probs.iter().sum();
                for p in &mut probs {
                    *p /= sum;
                }
                probs
            })
            .collect()
    }

    pub fn predict(&self, x: &[SparseVector]) -> Vec<u8> {
        x.iter()
            .map(|v| self.classes[argmax_lowest(&self.log_posterior(v))])
            .collect()
    }
}
