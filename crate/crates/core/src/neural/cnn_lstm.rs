//! The sequence classifier: embedding -> 1-D convolution + ReLU -> max-pool
//! -> LSTM -> dense softmax head, with hand-derived backward passes.
//!
//! Forward activations are cached per batch and replayed by the backward
//! pass (backpropagation through time for the LSTM, argmax routing for the
//! pool, a col2im scatter for the convolution, and per-token scatter-add
//! into the embedding table, skipping the frozen PAD row).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::rng::Rng;
use crate::textprep::{TokenSequence, PAD_ID};

/// Layer-by-layer description of the CNN-LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub conv_filters: usize,
    pub kernel_width: usize,
    pub pool_width: usize,
    pub lstm_units: usize,
    pub num_classes: usize,
    pub max_len: usize,
    pub dropout_rate: f64,
}

impl ModelSpec {
    /// Default layer sizes for a given vocabulary and class count.
    pub fn with_defaults(vocab_size: usize, num_classes: usize) -> ModelSpec {
        ModelSpec {
            vocab_size,
            embed_dim: 100,
            conv_filters: 128,
            kernel_width: 5,
            pool_width: 2,
            lstm_units: 128,
            num_classes,
            max_len: 200,
            dropout_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.vocab_size,
            self.embed_dim,
            self.conv_filters,
            self.kernel_width,
            self.pool_width,
            self.lstm_units,
            self.max_len,
        ];
        if dims.contains(&0) {
            return Err(Error::Model("model dimensions must all be >= 1".into()));
        }
        if self.num_classes != 2 && self.num_classes != 4 {
            return Err(Error::Model(format!(
                "num_classes must be 2 or 4, got {}",
                self.num_classes
            )));
        }
        if self.kernel_width > self.max_len {
            return Err(Error::Model(format!(
                "kernel width {} exceeds max_len {}",
                self.kernel_width, self.max_len
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Model(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.conv_len() < self.pool_width {
            return Err(Error::Model(
                "sequence too short for one pooling window".into(),
            ));
        }
        Ok(())
    }

    /// Convolution output length under valid padding.
    pub fn conv_len(&self) -> usize {
        self.max_len - self.kernel_width + 1
    }

    /// Pooled sequence length consumed by the LSTM.
    pub fn pooled_len(&self) -> usize {
        self.conv_len() / self.pool_width
    }

    /// Number of pooled steps that contain any real (non-PAD) content for
    /// a sequence with `true_length` tokens. The LSTM carries its state
    /// unchanged through the remaining PAD-only steps, so short documents
    /// are not washed out by the padding tail.
    pub fn effective_steps(&self, true_length: usize) -> usize {
        if true_length == 0 {
            return 0;
        }
        let real_windows = true_length.min(self.conv_len());
        real_windows
            .div_ceil(self.pool_width)
            .min(self.pooled_len())
    }
}

/// Names of the parameter tensors, in storage order.
pub const PARAM_NAMES: [&str; 8] = [
    "embedding",
    "conv_w",
    "conv_b",
    "lstm_wx",
    "lstm_wh",
    "lstm_b",
    "dense_w",
    "dense_b",
];

pub(crate) const P_EMBED: usize = 0;
pub(crate) const P_CONV_W: usize = 1;
pub(crate) const P_CONV_B: usize = 2;
pub(crate) const P_LSTM_WX: usize = 3;
pub(crate) const P_LSTM_WH: usize = 4;
pub(crate) const P_LSTM_B: usize = 5;
pub(crate) const P_DENSE_W: usize = 6;
pub(crate) const P_DENSE_B: usize = 7;

/// Training provenance stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub loss_history: Vec<f64>,
}

/// A CNN-LSTM with its parameter tensors (possibly still untrained).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Tensors in [`PARAM_NAMES`] order.
    pub params: Vec<Tensor>,
    pub meta: TrainMeta,
}

/// Initialize a model: weights uniform in [-0.05, 0.05] from the seeded
/// RNG, biases zero except the LSTM forget gate (1), and the PAD embedding
/// row zeroed and frozen.
pub fn build_model(spec: ModelSpec, seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    let mut rng = Rng::derived(seed, "neural.init", 0);
    let u = spec.lstm_units;
    let ke = spec.kernel_width * spec.embed_dim;

    let mut embedding = Tensor::uniform(&[spec.vocab_size, spec.embed_dim], -0.05, 0.05, &mut rng);
    embedding.data_mut()[..spec.embed_dim].fill(0.0);

    let conv_w = Tensor::uniform(&[spec.conv_filters, ke], -0.05, 0.05, &mut rng);
    let conv_b = Tensor::zeros(&[spec.conv_filters]);
    let lstm_wx = Tensor::uniform(&[4 * u, spec.conv_filters], -0.05, 0.05, &mut rng);
    let lstm_wh = Tensor::uniform(&[4 * u, u], -0.05, 0.05, &mut rng);
    let mut lstm_b = Tensor::zeros(&[4 * u]);
    lstm_b.data_mut()[u..2 * u].fill(1.0);
    let dense_w = Tensor::uniform(&[spec.num_classes, u], -0.05, 0.05, &mut rng);
    let dense_b = Tensor::zeros(&[spec.num_classes]);

    Ok(TrainedModel {
        spec,
        params: vec![
            embedding, conv_w, conv_b, lstm_wx, lstm_wh, lstm_b, dense_w, dense_b,
        ],
        meta: TrainMeta {
            seed,
            epochs: 0,
            loss_history: Vec::new(),
        },
    })
}

/// Numerically stable fused softmax / cross-entropy.
///
/// Writes probabilities into `probs` and, when `dlogits` is provided, the
/// gradient `(softmax - onehot) / batch`. Returns the mean loss when
/// targets are given.
pub(crate) fn softmax_ce(
    logits: &[f64],
    batch: usize,
    classes: usize,
    targets: Option<&[usize]>,
    probs: &mut [f64],
    mut dlogits: Option<&mut [f64]>,
) -> f64 {
    debug_assert_eq!(logits.len(), batch * classes);
    let mut total_loss = 0.0;
    for b in 0..batch {
        let row = &logits[b * classes..(b + 1) * classes];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &x in row {
            sum += (x - max).exp();
        }
        let lse = max + sum.ln();
        for (c, &x) in row.iter().enumerate() {
            probs[b * classes + c] = (x - lse).exp();
        }
        if let Some(targets) = targets {
            total_loss += lse - row[targets[b]];
            if let Some(dl) = dlogits.as_deref_mut() {
                for c in 0..classes {
                    let indicator = if c == targets[b] { 1.0 } else { 0.0 };
                    dl[b * classes + c] = (probs[b * classes + c] - indicator) / batch as f64;
                }
            }
        }
    }
    if targets.is_some() {
        total_loss / batch as f64
    } else {
        0.0
    }
}

/// Per-batch forward activations kept for the backward pass.
struct Caches {
    batch: usize,
    /// im2col matrix, [B*T, K*E].
    cols: Vec<f64>,
    /// Post-ReLU convolution activations, [B*T, F].
    conv_act: Vec<f64>,
    /// Pooled sequence in step-major layout, [M, B, F].
    pooled: Vec<f64>,
    /// Winning conv row per pooled cell, [M, B, F].
    argmax: Vec<u32>,
    /// Per-sample count of pooled steps with real content.
    eff: Vec<usize>,
    /// Per-step gate activations and states, each [M, B, U].
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    cell: Vec<f64>,
    tanh_c: Vec<f64>,
    hidden: Vec<f64>,
    /// Final hidden state after optional dropout, [B, U].
    head_in: Vec<f64>,
    /// Inverted-dropout mask over the final hidden state, [B, U].
    dropout_mask: Option<Vec<f64>>,
    /// Logits, [B, C].
    logits: Vec<f64>,
}

impl TrainedModel {
    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    fn check_batch(&self, batch: &[TokenSequence]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Model("empty batch".into()));
        }
        for seq in batch {
            if seq.ids.len() != self.spec.max_len {
                return Err(Error::Model(format!(
                    "sequence length {} does not match max_len {}",
                    seq.ids.len(),
                    self.spec.max_len
                )));
            }
            if let Some(&id) = seq.ids.iter().find(|&&id| id >= self.spec.vocab_size) {
                return Err(Error::Model(format!(
                    "token id {id} out of range for vocabulary of {}",
                    self.spec.vocab_size
                )));
            }
        }
        Ok(())
    }

    fn forward_full(&self, batch: &[TokenSequence], dropout_rng: Option<&mut Rng>) -> Caches {
        let spec = &self.spec;
        let b_n = batch.len();
        let (e, f, k, u, c_n) = (
            spec.embed_dim,
            spec.conv_filters,
            spec.kernel_width,
            spec.lstm_units,
            spec.num_classes,
        );
        let t_n = spec.conv_len();
        let m_n = spec.pooled_len();
        let ke = k * e;

        let embedding = self.params[P_EMBED].data();
        let conv_w = self.params[P_CONV_W].data();
        let conv_b = self.params[P_CONV_B].data();
        let lstm_wx = self.params[P_LSTM_WX].data();
        let lstm_wh = self.params[P_LSTM_WH].data();
        let lstm_b = self.params[P_LSTM_B].data();
        let dense_w = self.params[P_DENSE_W].data();
        let dense_b = self.params[P_DENSE_B].data();

        // Embedding gather straight into the im2col layout.
        let mut cols = vec![0.0; b_n * t_n * ke];
        for (b, seq) in batch.iter().enumerate() {
            for t in 0..t_n {
                let row = &mut cols[(b * t_n + t) * ke..(b * t_n + t + 1) * ke];
                for w in 0..k {
                    let id = seq.ids[t + w];
                    row[w * e..(w + 1) * e].copy_from_slice(&embedding[id * e..(id + 1) * e]);
                }
            }
        }

        // Convolution (valid padding) + bias + ReLU.
        let mut conv_act = vec![0.0; b_n * t_n * f];
        gemm_nt(b_n * t_n, ke, f, 1.0, &cols, conv_w, 0.0, &mut conv_act);
        for row in conv_act.chunks_exact_mut(f) {
            for (x, &b) in row.iter_mut().zip(conv_b) {
                *x = (*x + b).max(0.0);
            }
        }

        // Max-pool with argmax routing, emitted step-major [M, B, F].
        let p = spec.pool_width;
        let mut pooled = vec![0.0; m_n * b_n * f];
        let mut argmax = vec![0u32; m_n * b_n * f];
        for b in 0..b_n {
            for m in 0..m_n {
                let out = (m * b_n + b) * f;
                for j in 0..p {
                    let row = b * t_n + m * p + j;
                    let src = row * f;
                    if j == 0 {
                        pooled[out..out + f].copy_from_slice(&conv_act[src..src + f]);
                        argmax[out..out + f]
                            .iter_mut()
                            .for_each(|a| *a = row as u32);
                    } else {
                        for i in 0..f {
                            if conv_act[src + i] > pooled[out + i] {
                                pooled[out + i] = conv_act[src + i];
                                argmax[out + i] = row as u32;
                            }
                        }
                    }
                }
            }
        }

        // LSTM over the pooled sequence. Steps past a sample's effective
        // length (PAD-only windows) carry the state through unchanged.
        let eff: Vec<usize> = batch
            .iter()
            .map(|seq| spec.effective_steps(seq.true_length))
            .collect();
        let mut gate_i = vec![0.0; m_n * b_n * u];
        let mut gate_f = vec![0.0; m_n * b_n * u];
        let mut gate_g = vec![0.0; m_n * b_n * u];
        let mut gate_o = vec![0.0; m_n * b_n * u];
        let mut cell = vec![0.0; m_n * b_n * u];
        let mut tanh_c = vec![0.0; m_n * b_n * u];
        let mut hidden = vec![0.0; m_n * b_n * u];
        let mut gates = vec![0.0; b_n * 4 * u];

        for m in 0..m_n {
            let x_t = &pooled[m * b_n * f..(m + 1) * b_n * f];
            gemm_nt(b_n, f, 4 * u, 1.0, x_t, lstm_wx, 0.0, &mut gates);
            if m > 0 {
                let h_prev = &hidden[(m - 1) * b_n * u..m * b_n * u];
                gemm_nt(b_n, u, 4 * u, 1.0, h_prev, lstm_wh, 1.0, &mut gates);
            }
            let step = m * b_n * u;
            for b in 0..b_n {
                let idx = step + b * u;
                if m >= eff[b] {
                    // PAD-only step: copy state forward.
                    if m > 0 {
                        for j in 0..u {
                            cell[idx + j] = cell[idx - b_n * u + j];
                            hidden[idx + j] = hidden[idx - b_n * u + j];
                        }
                    }
                    continue;
                }
                let g_row = &mut gates[b * 4 * u..(b + 1) * 4 * u];
                for j in 0..4 * u {
                    g_row[j] += lstm_b[j];
                }
                for j in 0..u {
                    let i_v = sigmoid(g_row[j]);
                    let f_v = sigmoid(g_row[u + j]);
                    let g_v = g_row[2 * u + j].tanh();
                    let o_v = sigmoid(g_row[3 * u + j]);
                    let c_prev = if m > 0 { cell[idx - b_n * u + j] } else { 0.0 };
                    let c_v = f_v * c_prev + i_v * g_v;
                    let tc = c_v.tanh();
                    gate_i[idx + j] = i_v;
                    gate_f[idx + j] = f_v;
                    gate_g[idx + j] = g_v;
                    gate_o[idx + j] = o_v;
                    cell[idx + j] = c_v;
                    tanh_c[idx + j] = tc;
                    hidden[idx + j] = o_v * tc;
                }
            }
        }

        // Optional inverted dropout on the final hidden state (training only).
        let h_last = &hidden[(m_n - 1) * b_n * u..m_n * b_n * u];
        let (head_in, dropout_mask) = match dropout_rng {
            Some(rng) if spec.dropout_rate > 0.0 => {
                let keep = 1.0 - spec.dropout_rate;
                let mask: Vec<f64> = (0..b_n * u)
                    .map(|_| {
                        if rng.next_f64() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let dropped: Vec<f64> = h_last.iter().zip(&mask).map(|(h, m)| h * m).collect();
                (dropped, Some(mask))
            }
            _ => (h_last.to_vec(), None),
        };

        // Dense head.
        let mut logits = vec![0.0; b_n * c_n];
        gemm_nt(b_n, u, c_n, 1.0, &head_in, dense_w, 0.0, &mut logits);
        for row in logits.chunks_exact_mut(c_n) {
            for (x, &b) in row.iter_mut().zip(dense_b) {
                *x += b;
            }
        }

        Caches {
            batch: b_n,
            cols,
            conv_act,
            pooled,
            argmax,
            eff,
            gate_i,
            gate_f,
            gate_g,
            gate_o,
            cell,
            tanh_c,
            hidden,
            head_in,
            dropout_mask,
            logits,
        }
    }

    /// Class-probability rows for a batch of encoded sequences.
    pub fn forward(&self, batch: &[TokenSequence]) -> Result<Vec<Vec<f64>>> {
        self.check_batch(batch)?;
        let caches = self.forward_full(batch, None);
        let c_n = self.spec.num_classes;
        let mut probs = vec![0.0; batch.len() * c_n];
        softmax_ce(&caches.logits, batch.len(), c_n, None, &mut probs, None);
        Ok(probs.chunks_exact(c_n).map(<[f64]>::to_vec).collect())
    }

    /// Mean cross-entropy loss and gradients for every parameter tensor,
    /// in [`PARAM_NAMES`] order. `targets` holds class indices.
    pub fn loss_and_grads(
        &self,
        batch: &[TokenSequence],
        targets: &[usize],
    ) -> Result<(f64, Vec<Tensor>)> {
        self.loss_and_grads_inner(batch, targets, None)
    }

    pub(crate) fn loss_and_grads_inner(
        &self,
        batch: &[TokenSequence],
        targets: &[usize],
        dropout_rng: Option<&mut Rng>,
    ) -> Result<(f64, Vec<Tensor>)> {
        self.check_batch(batch)?;
        if targets.len() != batch.len() {
            return Err(Error::Model("targets/batch length mismatch".into()));
        }
        let spec = &self.spec;
        if let Some(&t) = targets.iter().find(|&&t| t >= spec.num_classes) {
            return Err(Error::Model(format!("target class {t} out of range")));
        }

        let caches = self.forward_full(batch, dropout_rng);
        let b_n = caches.batch;
        let (e, f, k, u, c_n) = (
            spec.embed_dim,
            spec.conv_filters,
            spec.kernel_width,
            spec.lstm_units,
            spec.num_classes,
        );
        let t_n = spec.conv_len();
        let m_n = spec.pooled_len();
        let ke = k * e;

        let mut probs = vec![0.0; b_n * c_n];
        let mut dlogits = vec![0.0; b_n * c_n];
        let loss = softmax_ce(
            &caches.logits,
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

        // Dense head backward.
        gemm_tn(
            c_n,
            b_n,
            u,
            1.0,
            &dlogits,
            &caches.head_in,
            0.0,
            grads[P_DENSE_W].data_mut(),
        );
        {
            let db = grads[P_DENSE_B].data_mut();
            for row in dlogits.chunks_exact(c_n) {
                for (d, &v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        let dense_w = self.params[P_DENSE_W].data();
        let mut dh = vec![0.0; b_n * u];
        gemm_nn(b_n, c_n, u, 1.0, &dlogits, dense_w, 0.0, &mut dh);
        if let Some(mask) = &caches.dropout_mask {
            for (d, &m) in dh.iter_mut().zip(mask) {
                *d *= m;
            }
        }

        // LSTM backward through time. Steps past a sample's effective
        // length carried the state forward, so their gradient passes dh and
        // dcell through unchanged and touches no parameters.
        let lstm_wx = self.params[P_LSTM_WX].data();
        let lstm_wh = self.params[P_LSTM_WH].data();
        let mut dcell = vec![0.0; b_n * u];
        let mut dgates = vec![0.0; b_n * 4 * u];
        let mut dh_prev = vec![0.0; b_n * u];
        let mut d_pooled = vec![0.0; m_n * b_n * f];
        for m in (0..m_n).rev() {
            let step = m * b_n * u;
            for b in 0..b_n {
                let idx = step + b * u;
                let g_row = &mut dgates[b * 4 * u..(b + 1) * 4 * u];
                if m >= caches.eff[b] {
                    g_row.fill(0.0);
                    continue;
                }
                for j in 0..u {
                    let i_v = caches.gate_i[idx + j];
                    let f_v = caches.gate_f[idx + j];
                    let g_v = caches.gate_g[idx + j];
                    let o_v = caches.gate_o[idx + j];
                    let tc = caches.tanh_c[idx + j];
                    let dh_j = dh[b * u + j];
                    let dc = dcell[b * u + j] + dh_j * o_v * (1.0 - tc * tc);
                    let c_prev = if m > 0 {
                        caches.cell[idx - b_n * u + j]
                    } else {
                        0.0
                    };
                    g_row[j] = dc * g_v * i_v * (1.0 - i_v);
                    g_row[u + j] = dc * c_prev * f_v * (1.0 - f_v);
                    g_row[2 * u + j] = dc * i_v * (1.0 - g_v * g_v);
                    g_row[3 * u + j] = dh_j * tc * o_v * (1.0 - o_v);
                    dcell[b * u + j] = dc * f_v;
                }
            }
            let x_t = &caches.pooled[m * b_n * f..(m + 1) * b_n * f];
            gemm_tn(
                4 * u,
                b_n,
                f,
                1.0,
                &dgates,
                x_t,
                1.0,
                grads[P_LSTM_WX].data_mut(),
            );
            if m > 0 {
                let h_prev = &caches.hidden[(m - 1) * b_n * u..m * b_n * u];
                gemm_tn(
                    4 * u,
                    b_n,
                    u,
                    1.0,
                    &dgates,
                    h_prev,
                    1.0,
                    grads[P_LSTM_WH].data_mut(),
                );
            }
            {
                let db = grads[P_LSTM_B].data_mut();
                for row in dgates.chunks_exact(4 * u) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
            }
            let dx_t = &mut d_pooled[m * b_n * f..(m + 1) * b_n * f];
            gemm_nn(b_n, 4 * u, f, 1.0, &dgates, lstm_wx, 0.0, dx_t);
            if m > 0 {
                gemm_nn(b_n, 4 * u, u, 1.0, &dgates, lstm_wh, 0.0, &mut dh_prev);
                for b in 0..b_n {
                    if m < caches.eff[b] {
                        dh[b * u..(b + 1) * u].copy_from_slice(&dh_prev[b * u..(b + 1) * u]);
                    }
                    // Inactive step: dh and dcell carry through unchanged.
                }
            }
        }

        // Pool backward: route each pooled gradient to its argmax conv row,
        // then gate by the ReLU mask.
        let mut d_conv = vec![0.0; b_n * t_n * f];
        for m in 0..m_n {
            for b in 0..b_n {
                let src = (m * b_n + b) * f;
                for i in 0..f {
                    let row = caches.argmax[src + i] as usize;
                    d_conv[row * f + i] += d_pooled[src + i];
                }
            }
        }
        for (d, &a) in d_conv.iter_mut().zip(&caches.conv_act) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }

        // Convolution backward.
        gemm_tn(
            f,
            b_n * t_n,
            ke,
            1.0,
            &d_conv,
            &caches.cols,
            1.0,
            grads[P_CONV_W].data_mut(),
        );
        {
            let db = grads[P_CONV_B].data_mut();
            for row in d_conv.chunks_exact(f) {
                for (d, &v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        let conv_w = self.params[P_CONV_W].data();
        let mut d_cols = vec![0.0; b_n * t_n * ke];
        gemm_nn(b_n * t_n, f, ke, 1.0, &d_conv, conv_w, 0.0, &mut d_cols);

        // Embedding scatter-add; the PAD row is frozen and skipped.
        {
            let d_emb = grads[P_EMBED].data_mut();
            for (b, seq) in batch.iter().enumerate() {
                for t in 0..t_n {
                    let row = &d_cols[(b * t_n + t) * ke..(b * t_n + t + 1) * ke];
                    for w in 0..k {
                        let id = seq.ids[t + w];
                        if id == PAD_ID {
                            continue;
                        }
                        let dst = &mut d_emb[id * e..(id + 1) * e];
                        for (d, &v) in dst.iter_mut().zip(&row[w * e..(w + 1) * e]) {
                            *d += v;
                        }
                    }
                }
            }
        }

        Ok((loss, grads))
    }

    /// Final LSTM hidden state for a batch (exposed for tests).
    #[cfg(test)]
    fn final_hidden(&self, batch: &[TokenSequence]) -> Vec<f64> {
        let caches = self.forward_full(batch, None);
        caches.head_in
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro_spec() -> ModelSpec {
        ModelSpec {
            vocab_size: 20,
            embed_dim: 4,
            conv_filters: 3,
            kernel_width: 5,
            pool_width: 2,
            lstm_units: 5,
            num_classes: 4,
            max_len: 8,
            dropout_rate: 0.0,
        }
    }

    fn micro_batch(spec: &ModelSpec) -> Vec<TokenSequence> {
        // One near-full sequence and one short one, so the PAD-masked LSTM
        // steps are exercised too.
        let mut rng = Rng::from_seed(77);
        [5 + rng.below(3), 2]
            .iter()
            .map(|&len| {
                let mut ids: Vec<usize> = (0..len)
                    .map(|_| 2 + rng.below(spec.vocab_size - 2))
                    .collect();
                let true_length = ids.len();
                ids.resize(spec.max_len, PAD_ID);
                TokenSequence { ids, true_length }
            })
            .collect()
    }

    #[test]
    fn shape_chain_for_defaults() {
        let spec = ModelSpec::with_defaults(5000, 4);
        assert_eq!(spec.conv_len(), 196);
        assert_eq!(spec.pooled_len(), 98);
    }

    #[test]
    fn build_is_deterministic() {
        let spec = micro_spec();
        let a = build_model(spec, 9).unwrap();
        let b = build_model(spec, 9).unwrap();
        assert_eq!(a.params, b.params);
        let c = build_model(spec, 10).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn pad_embedding_row_is_zero() {
        let model = build_model(micro_spec(), 4).unwrap();
        let e = model.spec.embed_dim;
        assert!(model.params[P_EMBED].data()[..e].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn param_count_matches_closed_form() {
        let spec = ModelSpec::with_defaults(5000, 4);
        let model = build_model(spec, 1).unwrap();
        let (v, e, f, k, u, c) = (5000, 100, 128, 5, 128, 4);
        let expected = v * e + (f * k * e + f) + (4 * u * f + 4 * u * u + 4 * u) + (c * u + c);
        assert_eq!(model.param_count(), expected);
    }

    #[test]
    fn zero_dense_head_gives_uniform_probabilities() {
        let mut model = build_model(micro_spec(), 3).unwrap();
        model.params[P_DENSE_W].fill(0.0);
        model.params[P_DENSE_B].fill(0.0);
        let batch = micro_batch(&model.spec);
        let probs = model.forward(&batch).unwrap();
        for row in &probs {
            for &p in row {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_lstm_gives_zero_final_hidden() {
        let mut model = build_model(micro_spec(), 3).unwrap();
        model.params[P_LSTM_WX].fill(0.0);
        model.params[P_LSTM_WH].fill(0.0);
        model.params[P_LSTM_B].fill(0.0); // forget bias forced to 0
        let batch = micro_batch(&model.spec);
        let hidden = model.final_hidden(&batch);
        assert!(hidden.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let model = build_model(micro_spec(), 5).unwrap();
        let batch = micro_batch(&model.spec);
        for row in model.forward(&batch).unwrap() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_probability_loss_is_ln_num_classes() {
        let mut model = build_model(micro_spec(), 3).unwrap();
        model.params[P_DENSE_W].fill(0.0);
        model.params[P_DENSE_B].fill(0.0);
        let batch = micro_batch(&model.spec);
        let (loss, _) = model.loss_and_grads(&batch, &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn near_perfect_prediction_loss_near_zero() {
        let mut probs = vec![0.0; 2];
        let logits = vec![40.0, -40.0];
        let loss = softmax_ce(&logits, 1, 2, Some(&[0]), &mut probs, None);
        assert!(loss >= 0.0);
        assert!(loss < 1e-12);
        // Saturated wrong-way logits stay finite through the log-sum-exp path.
        let loss_bad = softmax_ce(&[-745.0, 745.0], 1, 2, Some(&[0]), &mut probs, None);
        assert!(loss_bad.is_finite());
    }

    #[test]
    fn rejects_out_of_range_ids_and_lengths() {
        let model = build_model(micro_spec(), 3).unwrap();
        let bad = TokenSequence {
            ids: vec![25; model.spec.max_len],
            true_length: 3,
        };
        assert!(model.forward(&[bad]).is_err());
        let short = TokenSequence {
            ids: vec![2; 3],
            true_length: 3,
        };
        assert!(model.forward(&[short]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = micro_spec();
        let model = build_model(spec, 12).unwrap();
        let batch = micro_batch(&spec);
        let targets = [1usize, 2];
        let (_, grads) = model.loss_and_grads(&batch, &targets).unwrap();

        let eps = 1e-5;
        let mut worst = 0.0f64;
        #[allow(clippy::needless_range_loop)]
        for p_idx in 0..model.params.len() {
            let numel = model.params[p_idx].numel();
            // Probe a deterministic subset of each tensor to keep this unit
            // test fast; the acceptance suite sweeps every coordinate.
            let stride = (numel / 7).max(1);
            for i in (0..numel).step_by(stride) {
                // The PAD embedding row is frozen, not a free parameter.
                if p_idx == P_EMBED && i < spec.embed_dim {
                    continue;
                }
                let mut plus = model.clone();
                plus.params[p_idx].data_mut()[i] += eps;
                let (lp, _) = plus.loss_and_grads(&batch, &targets).unwrap();
                let mut minus = model.clone();
                minus.params[p_idx].data_mut()[i] -= eps;
                let (lm, _) = minus.loss_and_grads(&batch, &targets).unwrap();
                let fd = (lp - lm) / (2.0 * eps);
                let g = grads[p_idx].data()[i];
                let rel = (g - fd).abs() / (g.abs() + fd.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn pad_gradient_is_zero() {
        let spec = micro_spec();
        let model = build_model(spec, 12).unwrap();
        let batch = micro_batch(&spec);
        let (_, grads) = model.loss_and_grads(&batch, &[0, 1]).unwrap();
        let e = spec.embed_dim;
        assert!(grads[P_EMBED].data()[..e].iter().all(|&g| g == 0.0));
    }
}
