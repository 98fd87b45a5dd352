//! Linear baselines: multinomial logistic regression by full-batch
//! gradient descent, and a one-vs-rest linear SVC trained with seeded
//! subgradient descent on the regularized hinge loss.

use serde::{Deserialize, Serialize};

use crate::classic::{argmax_lowest, classes_from_labels};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vectorize::SparseVector;

// --- logistic regression ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            lr: 0.1,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub classes: Vec<u8>,
    pub dim: usize,
    /// Row-major weight matrix, `[class][feature]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub iterations: usize,
}

/// Softmax cross-entropy loss and gradients for a weight/bias pair.
/// Biases are not regularized. Exposed within the crate for the
/// finite-difference unit test.
pub(crate) fn logreg_loss_grads(
    weights: &[f64],
    bias: &[f64],
    x: &[SparseVector],
    targets: &[usize],
    num_classes: usize,
    dim: usize,
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; num_classes * dim];
    let mut gb = vec![0.0; num_classes];

    for (v, &target) in x.iter().zip(targets) {
        let mut logits = bias.to_vec();
        for (&i, &val) in v.indices.iter().zip(&v.values) {
            for (c, logit) in logits.iter_mut().enumerate() {
                *logit += val * weights[c * dim + i];
            }
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        loss += (lse - logits[target]) / n;
        for c in 0..num_classes {
            let p = (logits[c] - lse).exp();
            let d = (p - if c == target { 1.0 } else { 0.0 }) / n;
            gb[c] += d;
            for (&i, &val) in v.indices.iter().zip(&v.values) {
                gw[c * dim + i] += d * val;
            }
        }
    }

    let mut reg = 0.0;
    for (g, &w) in gw.iter_mut().zip(weights) {
        *g += l2 * w;
        reg += w * w;
    }
    loss += 0.5 * l2 * reg;
    (loss, gw, gb)
}

/// Multinomial logistic regression by full-batch gradient descent on the
/// L2-regularized cross-entropy. Stops at `max_iter` or when the gradient
/// infinity-norm falls below `tol`.
pub fn train_logreg(x: &[SparseVector], y: &[u8], config: LogRegConfig) -> Result<LogRegModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Model("training set empty or mismatched".into()));
    }
    let classes = classes_from_labels(y);
    if classes.len() < 2 {
        return Err(Error::Model("need at least two classes".into()));
    }
    let dim = x[0].dim;
    let num_classes = classes.len();
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();

    let mut weights = vec![0.0; num_classes * dim];
    let mut bias = vec![0.0; num_classes];
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        let (_, gw, gb) =
            logreg_loss_grads(&weights, &bias, x, &targets, num_classes, dim, config.l2);
        let inf_norm = gw
            .iter()
            .chain(gb.iter())
            .fold(0.0f64, |m, &g| m.max(g.abs()));
        if inf_norm < config.tol {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= config.lr * g;
        }
        for (b, g) in bias.iter_mut().zip(&gb) {
            *b -= config.lr * g;
        }
        iterations += 1;
    }

    Ok(LogRegModel {
        classes,
        dim,
        weights,
        bias,
        iterations,
    })
}

impl LogRegModel {
    fn logits(&self, v: &SparseVector) -> Vec<f64> {
        let mut logits = self.bias.clone();
        for (&i, &val) in v.indices.iter().zip(&v.values) {
            for (c, logit) in logits.iter_mut().enumerate() {
                *logit += val * self.weights[c * self.dim + i];
            }
        }
        logits
    }

    /// Softmax probabilities per class.
    pub fn scores(&self, x: &[SparseVector]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|v| {
                let logits = self.logits(v);
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut probs: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
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
            .map(|v| self.classes[argmax_lowest(&self.logits(v))])
            .collect()
    }
}

// --- linear SVC ------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsvcConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl LsvcConfig {
    pub fn with_seed(seed: u64) -> LsvcConfig {
        LsvcConfig {
            c: 1.0,
            epochs: 50,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsvcModel {
    pub classes: Vec<u8>,
    pub dim: usize,
    /// One weight vector per one-vs-rest machine (a single machine for the
    /// binary case), `[machine][feature]`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// One-vs-rest linear SVC trained by seeded subgradient descent on the
/// L2-regularized hinge loss (step size 1/(lambda t), bias unregularized).
pub fn train_lsvc(x: &[SparseVector], y: &[u8], config: LsvcConfig) -> Result<LsvcModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Model("training set empty or mismatched".into()));
    }
    if config.c <= 0.0 {
        return Err(Error::Model("C must be positive".into()));
    }
    let classes = classes_from_labels(y);
    if classes.len() < 2 {
        return Err(Error::Model("need at least two classes".into()));
    }
    let dim = x[0].dim;
    let n = x.len();
    let lambda = 1.0 / (config.c * n as f64);
    let machines = if classes.len() == 2 { 1 } else { classes.len() };

    let mut weights = Vec::with_capacity(machines);
    let mut bias = Vec::with_capacity(machines);
    for (m, &positive) in classes.iter().enumerate().take(machines) {
        let signs: Vec<f64> = y
            .iter()
            .map(|&l| if l == positive { 1.0 } else { -1.0 })
            .collect();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut rng = Rng::derived(config.seed, "classic.lsvc.machine", m as u64);
        let mut t = 0usize;
        for _ in 0..config.epochs {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let v = &x[i];
                let margin = signs[i]
                    * (b + v
                        .indices
                        .iter()
                        .zip(&v.values)
                        .map(|(&j, &val)| val * w[j])
                        .sum::<f64>());
                let shrink = 1.0 - eta * lambda;
                for wj in w.iter_mut() {
                    *wj *= shrink;
                }
                if margin < 1.0 {
                    for (&j, &val) in v.indices.iter().zip(&v.values) {
                        w[j] += eta * signs[i] * val;
                    }
                    b += eta * signs[i] * 0.1;
                }
            }
        }
        weights.push(w);
        bias.push(b);
    }

    Ok(LsvcModel {
        classes,
        dim,
        weights,
        bias,
    })
}

impl LsvcModel {
    fn margins(&self, v: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| {
                b + v
                    .indices
                    .iter()
                    .zip(&v.values)
                    .map(|(&j, &val)| val * w[j])
                    .sum::<f64>()
            })
            .collect()
    }

    /// Per-class signed margins. For the binary case the single machine's
    /// margin is reported as `[m, -m]` over the sorted classes.
    pub fn scores(&self, x: &[SparseVector]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|v| {
                let margins = self.margins(v);
                if self.classes.len() == 2 {
                    vec![margins[0], -margins[0]]
                } else {
                    margins
                }
            })
            .collect()
    }

    pub fn predict(&self, x: &[SparseVector]) -> Vec<u8> {
        self.scores(x)
            .into_iter()
            .map(|row| self.classes[argmax_lowest(&row)])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_toy() -> (Vec<SparseVector>, Vec<u8>) {
        let x = vec![
            SparseVector::new(vec![0, 1], vec![1.0, 1.2], 2),
            SparseVector::new(vec![0, 1], vec![0.9, 1.4], 2),
            SparseVector::new(vec![0, 1], vec![-1.1, -0.8], 2),
            SparseVector::new(vec![0, 1], vec![-0.9, -1.3], 2),
        ];
        (x, vec![1, 1, 2, 2])
    }

    fn xor_set() -> (Vec<SparseVector>, Vec<u8>) {
        let x = vec![
            SparseVector::new(vec![], vec![], 2),
            SparseVector::new(vec![0, 1], vec![1.0, 1.0], 2),
            SparseVector::new(vec![1], vec![1.0], 2),
            SparseVector::new(vec![0], vec![1.0], 2),
        ];
        (x, vec![1, 1, 2, 2])
    }

    #[test]
    fn logreg_separates_toy() {
        let (x, y) = separable_toy();
        let model = train_logreg(&x, &y, LogRegConfig::default()).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn logreg_zero_iterations_uniform() {
        let (x, y) = separable_toy();
        let config = LogRegConfig {
            max_iter: 0,
            ..LogRegConfig::default()
        };
        let model = train_logreg(&x, &y, config).unwrap();
        for row in model.scores(&x) {
            assert!((row[0] - 0.5).abs() < 1e-12);
            assert!((row[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn logreg_gradient_matches_finite_differences() {
        // 3 samples, 4 features, 3 classes.
        let x = vec![
            SparseVector::new(vec![0, 2], vec![0.7, -1.1], 4),
            SparseVector::new(vec![1, 3], vec![1.3, 0.2], 4),
            SparseVector::new(vec![0, 3], vec![-0.4, 0.9], 4),
        ];
        let targets = vec![0usize, 1, 2];
        let mut rng = Rng::from_seed(17);
        let weights: Vec<f64> = (0..12).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let bias: Vec<f64> = (0..3).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let l2 = 1e-2;
        let (_, gw, gb) = logreg_loss_grads(&weights, &bias, &x, &targets, 3, 4, l2);

        let eps = 1e-6;
        let loss_at = |w: &[f64], b: &[f64]| logreg_loss_grads(w, b, &x, &targets, 3, 4, l2).0;
        for i in 0..weights.len() {
            let mut wp = weights.clone();
            wp[i] += eps;
            let mut wm = weights.clone();
            wm[i] -= eps;
            let fd = (loss_at(&wp, &bias) - loss_at(&wm, &bias)) / (2.0 * eps);
            let rel = (gw[i] - fd).abs() / (gw[i].abs() + fd.abs()).max(1e-8);
            assert!(rel < 1e-6, "weight {i}: {} vs {fd}", gw[i]);
        }
        for i in 0..bias.len() {
            let mut bp = bias.clone();
            bp[i] += eps;
            let mut bm = bias.clone();
            bm[i] -= eps;
            let fd = (loss_at(&weights, &bp) - loss_at(&weights, &bm)) / (2.0 * eps);
            let rel = (gb[i] - fd).abs() / (gb[i].abs() + fd.abs()).max(1e-8);
            assert!(rel < 1e-6, "bias {i}: {} vs {fd}", gb[i]);
        }
    }

    #[test]
    fn logreg_loss_non_increasing() {
        let (x, y) = separable_toy();
        let classes = classes_from_labels(&y);
        let targets: Vec<usize> = y
            .iter()
            .map(|l| classes.iter().position(|c| c == l).unwrap())
            .collect();
        let config = LogRegConfig::default();
        let mut weights = vec![0.0; 2 * 2];
        let mut bias = vec![0.0; 2];
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let (loss, gw, gb) = logreg_loss_grads(&weights, &bias, &x, &targets, 2, 2, config.l2);
            assert!(loss <= last + 1e-12, "loss increased: {last} -> {loss}");
            last = loss;
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= config.lr * g;
            }
            for (b, g) in bias.iter_mut().zip(&gb) {
                *b -= config.lr * g;
            }
        }
    }

    #[test]
    fn lsvc_separates_toy() {
        let (x, y) = separable_toy();
        let model = train_lsvc(&x, &y, LsvcConfig::with_seed(3)).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn lsvc_cannot_solve_xor() {
        let (x, y) = xor_set();
        let model = train_lsvc(&x, &y, LsvcConfig::with_seed(5)).unwrap();
        let correct = model
            .predict(&x)
            .iter()
            .zip(&y)
            .filter(|(p, t)| p == t)
            .count();
        assert!(correct <= 3, "linear model reached {correct}/4 on XOR");
    }

    #[test]
    fn no_linear_separator_for_xor_exists() {
        // Grid search over (w1, w2, b): no sign pattern matches XOR labels.
        let (x, y) = xor_set();
        let signs: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let steps: Vec<f64> = (-30..=30).map(|i| i as f64 / 10.0).collect();
        for &w1 in &steps {
            for &w2 in &steps {
                for &b in &steps {
                    let all_correct = x.iter().zip(&signs).all(|(v, &s)| {
                        let d = v.to_dense();
                        s * (w1 * d[0] + w2 * d[1] + b) > 0.0
                    });
                    assert!(!all_correct, "separator found: {w1} {w2} {b}");
                }
            }
        }
    }

    #[test]
    fn lsvc_deterministic() {
        let (x, y) = separable_toy();
        let a = train_lsvc(&x, &y, LsvcConfig::with_seed(9)).unwrap();
        let b = train_lsvc(&x, &y, LsvcConfig::with_seed(9)).unwrap();
        assert_eq!(a, b);
    }
}
