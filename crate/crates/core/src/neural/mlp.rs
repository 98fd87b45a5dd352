//! Dense-only baseline on the same engine: one ReLU hidden layer over
//! sparse feature vectors, softmax head, trained with Adam and
//! cross-entropy exactly like the sequence model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::cnn_lstm::{softmax_ce, TrainMeta};
use crate::neural::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::rng::Rng;
use crate::vectorize::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub num_classes: usize,
}

impl MlpSpec {
    pub fn with_defaults(input_dim: usize, num_classes: usize) -> MlpSpec {
        MlpSpec {
            input_dim,
            hidden: 100,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.num_classes < 2 {
            return Err(Error::Model("invalid MLP dimensions".into()));
        }
        Ok(())
    }
}

/// Parameter order: w1 stored transposed as [input_dim, hidden] so sparse
/// rows hit contiguous memory, then b1 [hidden], w2 [classes, hidden],
/// b2 [classes].
pub const MLP_PARAM_NAMES: [&str; 4] = ["w1t", "b1", "w2", "b2"];

pub(crate) const M_W1T: usize = 0;
pub(crate) const M_B1: usize = 1;
pub(crate) const M_W2: usize = 2;
pub(crate) const M_B2: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub spec: MlpSpec,
    pub params: Vec<Tensor>,
    pub meta: TrainMeta,
}

pub fn build_mlp(spec: MlpSpec, seed: u64) -> Result<MlpModel> {
    spec.validate()?;
    let mut rng = Rng::derived(seed, "neural.mlp.init", 0);
    let params = vec![
        Tensor::uniform(&[spec.input_dim, spec.hidden], -0.05, 0.05, &mut rng),
        Tensor::zeros(&[spec.hidden]),
        Tensor::uniform(&[spec.num_classes, spec.hidden], -0.05, 0.05, &mut rng),
        Tensor::zeros(&[spec.num_classes]),
    ];
    Ok(MlpModel {
        spec,
        params,
        meta: TrainMeta {
            seed,
            epochs: 0,
            loss_history: Vec::new(),
        },
    })
}

impl MlpModel {
    fn check_batch(&self, batch: &[&SparseVector]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Model("empty batch".into()));
        }
        for x in batch {
            if x.dim != self.spec.input_dim {
                return Err(Error::Model(format!(
                    "input dimension {} does not match model {}",
                    x.dim, self.spec.input_dim
                )));
            }
        }
        Ok(())
    }

    /// Hidden activations (post-ReLU) and logits for a batch.
    fn forward_raw(&self, batch: &[&SparseVector]) -> (Vec<f64>, Vec<f64>) {
        let (h_n, c_n) = (self.spec.hidden, self.spec.num_classes);
        let b_n = batch.len();
        let w1t = self.params[M_W1T].data();
        let b1 = self.params[M_B1].data();
        let w2 = self.params[M_W2].data();
        let b2 = self.params[M_B2].data();

        let mut hidden = vec![0.0; b_n * h_n];
        for (b, x) in batch.iter().enumerate() {
            let row = &mut hidden[b * h_n..(b + 1) * h_n];
            row.copy_from_slice(b1);
            for (&idx, &val) in x.indices.iter().zip(&x.values) {
                let w_row = &w1t[idx * h_n..(idx + 1) * h_n];
                for (acc, &w) in row.iter_mut().zip(w_row) {
                    *acc += val * w;
                }
            }
            for v in row.iter_mut() {
                *v = v.max(0.0);
            }
        }

        let mut logits = vec![0.0; b_n * c_n];
        gemm_nt(b_n, h_n, c_n, 1.0, &hidden, w2, 0.0, &mut logits);
        for row in logits.chunks_exact_mut(c_n) {
            for (x, &b) in row.iter_mut().zip(b2) {
                *x += b;
            }
        }
        (hidden, logits)
    }

    pub fn forward(&self, batch: &[&SparseVector]) -> Result<Vec<Vec<f64>>> {
        self.check_batch(batch)?;
        let c_n = self.spec.num_classes;
        let (_, logits) = self.forward_raw(batch);
        let mut probs = vec![0.0; batch.len() * c_n];
        softmax_ce(&logits, batch.len(), c_n, None, &mut probs, None);
        Ok(probs.chunks_exact(c_n).map(<[f64]>::to_vec).collect())
    }

    pub fn loss_and_grads(
        &self,
        batch: &[&SparseVector],
        targets: &[usize],
    ) -> Result<(f64, Vec<Tensor>)> {
        self.check_batch(batch)?;
        if targets.len() != batch.len() {
            return Err(Error::Model("targets/batch length mismatch".into()));
        }
        let (h_n, c_n) = (self.spec.hidden, self.spec.num_classes);
        let b_n = batch.len();
        let (hidden, logits) = self.forward_raw(batch);

        let mut probs = vec![0.0; b_n * c_n];
        let mut dlogits = vec![0.0; b_n * c_n];
        let loss = softmax_ce(
            &logits,
            b_n,
            c_n,
            Some(targets),
            &mut probs,
            Some(&mut dlogits),
        );

        let mut grads: Vec<Tensor> = self
            .params
            .iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();

        gemm_tn(
            c_n,
            b_n,
            h_n,
            1.0,
            &dlogits,
            &hidden,
            0.0,
            grads[M_W2].data_mut(),
        );
        {
            let db = grads[M_B2].data_mut();
            for row in dlogits.chunks_exact(c_n) {
                for (d, &v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }

        let w2 = self.params[M_W2].data();
        let mut dhidden = vec![0.0; b_n * h_n];
        gemm_nn(b_n, c_n, h_n, 1.0, &dlogits, w2, 0.0, &mut dhidden);
        for (d, &h) in dhidden.iter_mut().zip(&hidden) {
            if h <= 0.0 {
                *d = 0.0;
            }
        }

        {
            let db = grads[M_B1].data_mut();
            for row in dhidden.chunks_exact(h_n) {
                for (d, &v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        {
            let dw1t = grads[M_W1T].data_mut();
            for (b, x) in batch.iter().enumerate() {
                let drow = &dhidden[b * h_n..(b + 1) * h_n];
                for (&idx, &val) in x.indices.iter().zip(&x.values) {
                    let dst = &mut dw1t[idx * h_n..(idx + 1) * h_n];
                    for (d, &v) in dst.iter_mut().zip(drow) {
                        *d += val * v;
                    }
                }
            }
        }

        Ok((loss, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_inputs() -> Vec<SparseVector> {
        vec![
            SparseVector::new(vec![0, 2], vec![1.0, 0.5], 4),
            SparseVector::new(vec![1], vec![-0.8], 4),
            SparseVector::new(vec![0, 3], vec![0.3, 1.2], 4),
        ]
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let mut model = build_mlp(MlpSpec::with_defaults(4, 3), 2).unwrap();
        for p in &mut model.params {
            p.fill(0.0);
        }
        let inputs = toy_inputs();
        let refs: Vec<&SparseVector> = inputs.iter().collect();
        for row in model.forward(&refs).unwrap() {
            for p in row {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = build_mlp(
            MlpSpec {
                input_dim: 4,
                hidden: 6,
                num_classes: 3,
            },
            15,
        )
        .unwrap();
        let inputs = toy_inputs();
        let refs: Vec<&SparseVector> = inputs.iter().collect();
        let targets = vec![0usize, 2, 1];
        let (_, grads) = model.loss_and_grads(&refs, &targets).unwrap();

        let eps = 1e-5;
        let mut worst = 0.0f64;
        #[allow(clippy::needless_range_loop)]
        for p_idx in 0..model.params.len() {
            for i in 0..model.params[p_idx].numel() {
                let mut plus = model.clone();
                plus.params[p_idx].data_mut()[i] += eps;
                let (lp, _) = plus.loss_and_grads(&refs, &targets).unwrap();
                let mut minus = model.clone();
                minus.params[p_idx].data_mut()[i] -= eps;
                let (lm, _) = minus.loss_and_grads(&refs, &targets).unwrap();
                let fd = (lp - lm) / (2.0 * eps);
                let g = grads[p_idx].data()[i];
                let rel = (g - fd).abs() / (g.abs() + fd.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let model = build_mlp(MlpSpec::with_defaults(4, 2), 1).unwrap();
        let bad = SparseVector::new(vec![0], vec![1.0], 7);
        assert!(model.forward(&[&bad]).is_err());
    }
}
