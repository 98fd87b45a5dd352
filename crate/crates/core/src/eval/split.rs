//! Stratified splitting, stratified k-fold plans, and random oversampling.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::{Document, LabeledCorpus};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Assignment of document positions to folds.
#[derive(Debug, Clone, Serialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Training indices for one held-out fold, in corpus order.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        let mut test = self.folds[fold].clone();
        test.sort_unstable();
        test
    }
}

fn indices_by_class(labels: &[u8]) -> BTreeMap<u8, Vec<usize>> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    by_class
}

/// Stratified train/test split over label values; per-class test counts are
/// `round(m_c * test_frac)`, so proportions hold to within one document.
pub fn stratified_split_indices(
    labels: &[u8],
    test_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_frac) || test_frac == 0.0 {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_frac}"
        )));
    }
    let by_class = indices_by_class(labels);
    let mut rng = Rng::derived(seed, "eval.split", 0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut members) in by_class {
        if members.len() < 2 {
            return Err(Error::Validation(format!(
                "class {label} has {} documents, need at least 2 to split",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        let test_n = (members.len() as f64 * test_frac).round() as usize;
        test.extend_from_slice(&members[..test_n]);
        train.extend_from_slice(&members[test_n..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split returning materialized corpora.
pub fn stratified_split(
    corpus: &LabeledCorpus,
    test_frac: f64,
    seed: u64,
) -> Result<(LabeledCorpus, LabeledCorpus)> {
    let labels: Vec<u8> = corpus.documents.iter().map(|d| d.label.get()).collect();
    let (train_idx, test_idx) = stratified_split_indices(&labels, test_frac, seed)?;
    let pick = |idx: &[usize]| -> Result<LabeledCorpus> {
        LabeledCorpus::new(
            idx.iter().map(|&i| corpus.documents[i].clone()).collect(),
            corpus.scheme,
        )
    };
    Ok((pick(&train_idx)?, pick(&test_idx)?))
}

/// Stratified k-fold plan: folds partition the corpus and per-class fold
/// sizes differ by at most one. Each class's remainder documents rotate to
/// a different starting fold so overall fold sizes stay balanced too.
pub fn kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let by_class = indices_by_class(labels);
    let mut rng = Rng::derived(seed, "eval.kfold", 0);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class_pos, (label, mut members)) in by_class.into_iter().enumerate() {
        if members.len() < k {
            return Err(Error::Validation(format!(
                "class {label} has {} documents, need at least k = {k}",
                members.len()
            )));
        }
        rng.shuffle(&mut members);
        let base = members.len() / k;
        let extra = members.len() % k;
        let mut cursor = 0;
        for j in 0..k {
            // Rotate which folds receive this class's remainder.
            let fold = (class_pos + j) % k;
            let take = base + usize::from(j < extra);
            folds[fold].extend_from_slice(&members[cursor..cursor + take]);
            cursor += take;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Expand `subset` (positions into `labels`) so every class present reaches
/// the majority-class count; duplicates are drawn with replacement from the
/// class's own members. Original positions are all retained, in order.
pub fn oversample_indices(labels: &[u8], subset: &[usize], seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for &i in subset {
        by_class.entry(labels[i]).or_default().push(i);
    }
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = Rng::derived(seed, "eval.oversample", 0);
    let mut out = subset.to_vec();
    for members in by_class.values() {
        for _ in members.len()..target {
            out.push(members[rng.below(members.len())]);
        }
    }
    out
}

/// Oversample a whole corpus, returning the balanced training multiset.
/// Added documents are copies of existing ones (ids included).
pub fn oversample(corpus: &LabeledCorpus, seed: u64) -> Vec<Document> {
    let labels: Vec<u8> = corpus.documents.iter().map(|d| d.label.get()).collect();
    let subset: Vec<usize> = (0..labels.len()).collect();
    oversample_indices(&labels, &subset, seed)
        .into_iter()
        .map(|i| corpus.documents[i].clone())
        .collect()
}
