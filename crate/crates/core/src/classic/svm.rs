//! RBF-kernel SVM trained with simplified sequential minimal optimization:
//! repeated two-variable coordinate ascent on the dual with randomized
//! partner selection, terminating after `max_passes` sweeps without an
//! alpha update.

use serde::{Deserialize, Serialize};

use crate::classic::{argmax_lowest, classes_from_labels};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vectorize::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// 1 / (n_features * Var(X)) with the variance over all matrix entries.
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl SvmConfig {
    pub fn with_seed(seed: u64) -> SvmConfig {
        SvmConfig {
            c: 1.0,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_passes: 10,
            seed,
        }
    }
}

/// One binary machine: support vectors with their signed dual coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmMachine {
    pub support: Vec<SparseVector>,
    /// alpha_i * y_i per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmRbfModel {
    pub classes: Vec<u8>,
    pub dim: usize,
    pub gamma: f64,
    /// One machine per class (one for the binary case).
    pub machines: Vec<SvmMachine>,
}

fn rbf(gamma: f64, a: &SparseVector, b: &SparseVector) -> f64 {
    (-gamma * a.sq_dist(b)).exp()
}

/// Outcome of the dual solver for one binary problem.
struct SmoResult {
    alpha: Vec<f64>,
    bias: f64,
}

fn smo_solve(
    kernel: &[f64],
    signs: &[f64],
    n: usize,
    c: f64,
    tol: f64,
    max_passes: usize,
    rng: &mut Rng,
) -> SmoResult {
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut bias = 0.0;
    let decision = |alpha: &[f64], bias: f64, i: usize| -> f64 {
        let mut f = bias;
        for j in 0..n {
            if alpha[j] != 0.0 {
                f += alpha[j] * signs[j] * k(j, i);
            }
        }
        f
    };

    let mut passes = 0;
    // Hard cap keeps degenerate problems from cycling forever.
    let mut sweeps = 0;
    while passes < max_passes && sweeps < 10_000 {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = decision(&alpha, bias, i) - signs[i];
            let r_i = signs[i] * e_i;
            if !((r_i < -tol && alpha[i] < c) || (r_i > tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.below(n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = decision(&alpha, bias, j) - signs[j];
            let (a_i_old, a_j_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if signs[i] == signs[j] {
                ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
            } else {
                ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
            };
            if lo >= hi {
                continue;
            }
            let eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
            if eta >= 0.0 {
                continue;
            }
            let mut a_j = a_j_old - signs[j] * (e_i - e_j) / eta;
            a_j = a_j.clamp(lo, hi);
            if (a_j - a_j_old).abs() < 1e-7 {
                continue;
            }
            let a_i = a_i_old + signs[i] * signs[j] * (a_j_old - a_j);
            alpha[i] = a_i;
            alpha[j] = a_j;

            let b1 = bias
                - e_i
                - signs[i] * (a_i - a_i_old) * k(i, i)
                - signs[j] * (a_j - a_j_old) * k(i, j);
            let b2 = bias
                - e_j
                - signs[i] * (a_i - a_i_old) * k(i, j)
                - signs[j] * (a_j - a_j_old) * k(j, j);
            bias = if a_i > 0.0 && a_i < c {
                b1
            } else if a_j > 0.0 && a_j < c {
                b2
            } else {
                0.5 * (b1 + b2)
            };
            changed += 1;
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }

    SmoResult { alpha, bias }
}

/// Train a one-vs-rest RBF-kernel SVM with simplified SMO.
pub fn train_svm_rbf(x: &[SparseVector], y: &[u8], config: SvmConfig) -> Result<SvmRbfModel> {
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

    let gamma = match config.gamma {
        Gamma::Fixed(g) => g,
        Gamma::Scale => {
            let total = (n * dim) as f64;
            let sum: f64 = x.iter().flat_map(|v| v.values.iter()).sum();
            let sum_sq: f64 = x.iter().flat_map(|v| v.values.iter()).map(|&v| v * v).sum();
            let mean = sum / total;
            let var = sum_sq / total - mean * mean;
            if var > 0.0 {
                1.0 / (dim as f64 * var)
            } else {
                1.0
            }
        }
    };

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = rbf(gamma, &x[i], &x[j]);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    let machines_n = if classes.len() == 2 { 1 } else { classes.len() };
    let mut machines = Vec::with_capacity(machines_n);
    for (m, &positive) in classes.iter().enumerate().take(machines_n) {
        let signs: Vec<f64> = y
            .iter()
            .map(|&l| if l == positive { 1.0 } else { -1.0 })
            .collect();
        let mut rng = Rng::derived(config.seed, "classic.svm.machine", m as u64);
        let result = smo_solve(
            &kernel,
            &signs,
            n,
            config.c,
            config.tol,
            config.max_passes,
            &mut rng,
        );
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            if result.alpha[i] > 1e-12 {
                support.push(x[i].clone());
                coef.push(result.alpha[i] * signs[i]);
            }
        }
        machines.push(SvmMachine {
            support,
            coef,
            bias: result.bias,
        });
    }

    Ok(SvmRbfModel {
        classes,
        dim,
        gamma,
        machines,
    })
}

impl SvmRbfModel {
    fn decision(&self, machine: &SvmMachine, v: &SparseVector) -> f64 {
        machine.bias
            + machine
                .support
                .iter()
                .zip(&machine.coef)
                .map(|(s, &c)| c * rbf(self.gamma, s, v))
                .sum::<f64>()
    }

    /// Per-class decision margins; `[m, -m]` in the binary case.
    pub fn scores(&self, x: &[SparseVector]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|v| {
                if self.classes.len() == 2 {
                    let m = self.decision(&self.machines[0], v);
                    vec![m, -m]
                } else {
                    self.machines.iter().map(|m| self.decision(m, v)).collect()
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
    fn rbf_solves_xor() {
        let (x, y) = xor_set();
        let model = train_svm_rbf(&x, &y, SvmConfig::with_seed(11)).unwrap();
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn gamma_scale_on_xor_is_two() {
        // Entries of the 4x2 design matrix are {0, 1} with mean 0.5,
        // so Var = 0.25 and gamma = 1 / (2 * 0.25) = 2.
        let (x, y) = xor_set();
        let model = train_svm_rbf(&x, &y, SvmConfig::with_seed(11)).unwrap();
        assert!((model.gamma - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dual_constraints_hold() {
        let (x, y) = xor_set();
        let config = SvmConfig::with_seed(13);
        let signs: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let n = x.len();
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                kernel[i * n + j] = rbf(2.0, &x[i], &x[j]);
            }
        }
        let mut rng = Rng::derived(config.seed, "classic.svm.machine", 0);
        let result = smo_solve(
            &kernel,
            &signs,
            n,
            config.c,
            config.tol,
            config.max_passes,
            &mut rng,
        );
        let mut dual_sum = 0.0;
        for (alpha, sign) in result.alpha.iter().zip(&signs) {
            assert!(*alpha >= -1e-12 && *alpha <= config.c + 1e-12);
            dual_sum += alpha * sign;
        }
        assert!(dual_sum.abs() < 1e-9, "sum alpha_i y_i = {dual_sum}");
    }

    #[test]
    fn symmetric_layout_gives_symmetric_class_mass() {
        // Two duplicated points per class at mirrored positions.
        let x = vec![
            SparseVector::new(vec![0], vec![1.0], 1),
            SparseVector::new(vec![0], vec![1.0], 1),
            SparseVector::new(vec![0], vec![-1.0], 1),
            SparseVector::new(vec![0], vec![-1.0], 1),
        ];
        let y = vec![1, 1, 2, 2];
        let model = train_svm_rbf(&x, &y, SvmConfig::with_seed(7)).unwrap();
        let positive: f64 = model.machines[0].coef.iter().filter(|&&c| c > 0.0).sum();
        let negative: f64 = model.machines[0].coef.iter().filter(|&&c| c < 0.0).sum();
        assert!((positive + negative).abs() < 1e-9);
        // Two-point version pins the alphas equal exactly.
        let x2 = vec![x[0].clone(), x[2].clone()];
        let model2 = train_svm_rbf(&x2, &[1, 2], SvmConfig::with_seed(7)).unwrap();
        if model2.machines[0].coef.len() == 2 {
            assert!((model2.machines[0].coef[0] + model2.machines[0].coef[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = xor_set();
        let a = train_svm_rbf(&x, &y, SvmConfig::with_seed(3)).unwrap();
        let b = train_svm_rbf(&x, &y, SvmConfig::with_seed(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multiclass_one_vs_rest() {
        let x = vec![
            SparseVector::new(vec![0], vec![2.0], 2),
            SparseVector::new(vec![0], vec![2.1], 2),
            SparseVector::new(vec![1], vec![2.0], 2),
            SparseVector::new(vec![1], vec![2.1], 2),
            SparseVector::new(vec![0, 1], vec![-2.0, -2.0], 2),
            SparseVector::new(vec![0, 1], vec![-2.1, -2.1], 2),
        ];
        let y = vec![1, 1, 2, 2, 3, 3];
        let model = train_svm_rbf(&x, &y, SvmConfig::with_seed(19)).unwrap();
        assert_eq!(model.machines.len(), 3);
        assert_eq!(model.predict(&x), y);
    }
}
