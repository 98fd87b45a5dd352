//! Text cleaning, tokenization, vocabulary construction, and fixed-length
//! token-id encoding.
//!
//! Cleaning strips every digit and non-alphabetic symbol from a report body
//! and lowercases what remains, so downstream models only ever see
//! `[a-z ]` (plus lowercased non-ASCII letters, which are retained).

use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Token id reserved for right-padding.
pub const PAD_ID: usize = 0;
/// Token id reserved for out-of-vocabulary tokens.
pub const OOV_ID: usize = 1;

/// Remove digits and symbols, lowercase, and collapse whitespace.
///
/// Idempotent: cleaning already-clean text is a no-op.
pub fn clean(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(|c| {
            if c.is_alphabetic() {
                c.to_lowercase().collect::<Vec<char>>()
            } else {
                vec![' ']
            }
        })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace-split an already-cleaned text into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Token-to-id map with reserved PAD (0) and OOV (1) slots.
///
/// Real tokens get ids starting at 2, assigned in (corpus frequency
/// descending, token ascending) order, which makes construction
/// deterministic for a fixed corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    ids: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Build a vocabulary from tokenized documents, keeping tokens whose
    /// corpus frequency is at least `min_freq`.
    pub fn build<S: AsRef<str>, D: AsRef<[S]>>(docs: &[D], min_freq: usize) -> Vocabulary {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for doc in docs {
            for tok in doc.as_ref() {
                *freq.entry(tok.as_ref()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = freq
            .into_iter()
            .filter(|&(_, n)| n >= min_freq.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let ids = kept
            .into_iter()
            .enumerate()
            .map(|(i, (tok, _))| (tok.to_owned(), i + 2))
            .collect();
        Vocabulary { ids }
    }

    /// Reconstruct from a persisted token map. Ids must be contiguous from 2.
    pub fn from_ids(ids: BTreeMap<String, usize>) -> crate::Result<Vocabulary> {
        let mut seen: Vec<usize> = ids.values().copied().collect();
        seen.sort_unstable();
        for (k, &id) in seen.iter().enumerate() {
            if id != k + 2 {
                return Err(crate::Error::Validation(format!(
                    "vocabulary ids must be contiguous from 2, found {id}"
                )));
            }
        }
        Ok(Vocabulary { ids })
    }

    /// Total size including the PAD and OOV slots.
    pub fn len(&self) -> usize {
        self.ids.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Id for a token; unknown tokens map to [`OOV_ID`].
    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(OOV_ID)
    }

    /// Id for a token only if it is in-vocabulary.
    pub fn id_opt(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    /// Iterate `(token, id)` pairs in token order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.ids.iter().map(|(t, &i)| (t.as_str(), i))
    }

    pub fn token_map(&self) -> &BTreeMap<String, usize> {
        &self.ids
    }
}

/// A fixed-length sequence of token ids, right-padded with [`PAD_ID`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
    /// Number of real (pre-padding) tokens; the rest of `ids` is PAD.
    pub true_length: usize,
}

/// Encode tokens as ids, truncating to `max_len` and right-padding with PAD.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    assert!(max_len >= 1, "max_len must be at least 1");
    let true_length = tokens.len().min(max_len);
    let mut ids = Vec::with_capacity(max_len);
    for tok in &tokens[..true_length] {
        ids.push(vocab.id(tok.as_ref()));
    }
    ids.resize(max_len, PAD_ID);
    TokenSequence { ids, true_length }
}
