//! TF-IDF featurization for the classical models.
//!
//! Weights are raw term count times smoothed inverse document frequency
//! `ln((1+N)/(1+df)) + 1`, L2-normalized per document. Tokens outside the
//! fitted vocabulary are dropped at transform time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::Vocabulary;

/// Sparse feature vector: strictly increasing indices with nonzero weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    pub fn new(indices: Vec<usize>, values: Vec<f64>, dim: usize) -> SparseVector {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.iter().all(|&i| i < dim));
        SparseVector {
            indices,
            values,
            dim,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    /// Squared Euclidean distance to another vector.
    pub fn sq_dist(&self, other: &SparseVector) -> f64 {
        let a = self.values.iter().map(|v| v * v).sum::<f64>();
        let b = other.values.iter().map(|v| v * v).sum::<f64>();
        a + b - 2.0 * self.dot(other)
    }

    /// Densify into a `dim`-length vector.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            dense[i] = v;
        }
        dense
    }
}

/// Fitted TF-IDF weights over a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// Smoothed idf per token id; length equals the vocabulary size.
    pub idf: Vec<f64>,
    /// Document count the model was fitted on.
    pub num_documents: usize,
}

impl TfidfModel {
    /// Fit idf weights from tokenized documents over `vocab`.
    ///
    /// `idf(t) = ln((1+N)/(1+df(t))) + 1`; tokens with zero document
    /// frequency (including the PAD/OOV slots) get `ln(1+N) + 1`.
    pub fn fit<S: AsRef<str>, D: AsRef<[S]>>(vocab: &Vocabulary, docs: &[D]) -> Result<TfidfModel> {
        if docs.is_empty() {
            return Err(Error::Validation(
                "cannot fit TF-IDF on an empty corpus".into(),
            ));
        }
        let n = docs.len();
        let mut df = vec![0usize; vocab.len()];
        let mut seen = vec![usize::MAX; vocab.len()];
        for (doc_idx, doc) in docs.iter().enumerate() {
            for tok in doc.as_ref() {
                if let Some(id) = vocab.id_opt(tok.as_ref()) {
                    if seen[id] != doc_idx {
                        seen[id] = doc_idx;
                        df[id] += 1;
                    }
                }
            }
        }
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(TfidfModel {
            idf,
            num_documents: n,
        })
    }

    /// Transform one tokenized document into an L2-normalized TF-IDF vector.
    ///
    /// Out-of-vocabulary tokens are ignored; a document with no known tokens
    /// maps to the zero vector.
    pub fn transform<S: AsRef<str>>(&self, vocab: &Vocabulary, tokens: &[S]) -> SparseVector {
        let counts = count_vector(vocab, tokens);
        let mut values: Vec<f64> = counts
            .indices
            .iter()
            .zip(&counts.values)
            .map(|(&i, &c)| c * self.idf[i])
            .collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        SparseVector::new(counts.indices, values, vocab.len())
    }
}

/// Raw term-count vector over the vocabulary (input for multinomial NB).
pub fn count_vector<S: AsRef<str>>(vocab: &Vocabulary, tokens: &[S]) -> SparseVector {
    let mut counts: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for tok in tokens {
        if let Some(id) = vocab.id_opt(tok.as_ref()) {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    let (indices, values): (Vec<usize>, Vec<f64>) = counts.into_iter().unzip();
    SparseVector::new(indices, values, vocab.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_ab_ac() -> (Vocabulary, Vec<Vec<String>>) {
        let docs = vec![
            vec!["a".to_string(), "b".to_string()],
            vec!["a".to_string(), "c".to_string()],
        ];
        let vocab = Vocabulary::build(&docs, 1);
        (vocab, docs)
    }

    #[test]
    fn idf_matches_hand_formula() {
        let (vocab, docs) = docs_ab_ac();
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        let idf_a = model.idf[vocab.id("a")];
        let idf_b = model.idf[vocab.id("b")];
        let idf_c = model.idf[vocab.id("c")];
        assert!((idf_a - 1.0).abs() < 1e-12);
        let expected_bc = (3.0f64 / 2.0).ln() + 1.0;
        assert!((idf_b - expected_bc).abs() < 1e-12);
        assert!((idf_c - expected_bc).abs() < 1e-12);
        assert!((expected_bc - 1.405465).abs() < 1e-6);
    }

    #[test]
    fn idf_single_document_all_equal() {
        let docs = vec![vec!["x".to_string(), "y".to_string()]];
        let vocab = Vocabulary::build(&docs, 1);
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        assert!((model.idf[vocab.id("x")] - 1.0).abs() < 1e-12);
        assert!((model.idf[vocab.id("y")] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idf_zero_df_edge_case() {
        // Vocabulary built over a superset; "b" never occurs in the fit docs.
        let vocab_docs = vec![vec!["a".to_string(), "b".to_string()]];
        let vocab = Vocabulary::build(&vocab_docs, 1);
        let fit_docs = vec![vec!["a".to_string()], vec!["a".to_string()]];
        let model = TfidfModel::fit(&vocab, &fit_docs).unwrap();
        let expected = (3.0f64 / 1.0).ln() + 1.0;
        assert!((model.idf[vocab.id("b")] - expected).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_empty_corpus() {
        let vocab = Vocabulary::build(&Vec::<Vec<String>>::new(), 1);
        assert!(TfidfModel::fit(&vocab, &Vec::<Vec<String>>::new()).is_err());
    }

    #[test]
    fn transform_matches_hand_computation() {
        let (vocab, docs) = docs_ab_ac();
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        let vec = model.transform(&vocab, &["a", "b"]);
        // Weights (1.0, 1.405465) L2-normalized.
        let a_pos = vec
            .indices
            .iter()
            .position(|&i| i == vocab.id("a"))
            .unwrap();
        let b_pos = vec
            .indices
            .iter()
            .position(|&i| i == vocab.id("b"))
            .unwrap();
        assert!((vec.values[a_pos] - 0.5797).abs() < 1e-4);
        assert!((vec.values[b_pos] - 0.8148).abs() < 1e-4);
        assert!((vec.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_unknown_tokens_zero_vector() {
        let (vocab, docs) = docs_ab_ac();
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        let vec = model.transform(&vocab, &["zzz", "qqq"]);
        assert_eq!(vec.nnz(), 0);
        assert_eq!(vec.l2_norm(), 0.0);
    }

    #[test]
    fn transform_single_direction() {
        let (vocab, docs) = docs_ab_ac();
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        let vec = model.transform(&vocab, &["a", "a"]);
        assert_eq!(vec.nnz(), 1);
        assert!((vec.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn idf_scaling_leaves_normalized_output_unchanged() {
        let (vocab, docs) = docs_ab_ac();
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        let mut scaled = model.clone();
        for v in &mut scaled.idf {
            *v *= 2.0;
        }
        let a = model.transform(&vocab, &["a", "b", "b"]);
        let b = scaled.transform(&vocab, &["a", "b", "b"]);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_order_independent() {
        let (vocab, docs) = docs_ab_ac();
        let model = TfidfModel::fit(&vocab, &docs).unwrap();
        let a = model.transform(&vocab, &["a", "b", "c"]);
        let b = model.transform(&vocab, &["c", "b", "a"]);
        assert_eq!(a, b);
    }

    #[test]
    fn count_vector_counts() {
        let (vocab, _) = docs_ab_ac();
        let counts = count_vector(&vocab, &["a", "b", "a", "zzz"]);
        let a_pos = counts
            .indices
            .iter()
            .position(|&i| i == vocab.id("a"))
            .unwrap();
        assert_eq!(counts.values[a_pos], 2.0);
        assert_eq!(counts.nnz(), 2);
    }

    #[test]
    fn sparse_dot_and_dist() {
        let x = SparseVector::new(vec![0, 2], vec![1.0, 2.0], 4);
        let y = SparseVector::new(vec![1, 2], vec![3.0, 4.0], 4);
        assert_eq!(x.dot(&y), 8.0);
        // |x|^2 = 5, |y|^2 = 25, d = 5 + 25 - 16 = 14
        assert!((x.sq_dist(&y) - 14.0).abs() < 1e-12);
    }
}
