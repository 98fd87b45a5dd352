//! Command implementations behind the `triage` binary: corpus synthesis,
//! single-model training, the evaluation grid, statistical comparison, and
//! one-shot prediction. The binary is a thin argument-parsing wrapper so
//! integration tests can drive these directly.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::classic::{self, ModelKindName};
use crate::corpus::{
    load_corpus, merge_labels, save_corpus, synth_corpus, CorpusFormat, LabeledCorpus, Scheme,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare_cell, render_comparison_text, render_text, run_experiment, ExperimentConfig,
    ExperimentReport, MetricName,
};
use crate::model_file::{config_digest, save_pipeline, Featurizer, Pipeline, PipelineModel};
use crate::neural;
use crate::rng::derive_seed;
use crate::textprep::{clean, encode, tokenize, Vocabulary};
use crate::vectorize::{count_vector, SparseVector, TfidfModel};

/// Options shared by the training entry points.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub scheme: Scheme,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub min_freq: usize,
    pub test_frac: f64,
    pub mnb_tfidf: bool,
    pub seed: u64,
}

impl TrainOptions {
    pub fn with_seed(seed: u64) -> TrainOptions {
        TrainOptions {
            scheme: Scheme::TwoClass,
            epochs: 10,
            batch_size: 32,
            max_len: 200,
            min_freq: 1,
            test_frac: 0.2,
            mnb_tfidf: false,
            seed,
        }
    }
}

/// Fit one complete pipeline (preprocessing + model) on tokenized documents.
pub fn fit_pipeline(
    tokens: &[Vec<String>],
    labels: &[u8],
    kind: ModelKindName,
    options: &TrainOptions,
) -> Result<Pipeline> {
    if tokens.is_empty() || tokens.len() != labels.len() {
        return Err(Error::Validation("training set empty or mismatched".into()));
    }
    let vocab = Vocabulary::build(tokens, options.min_freq);
    let model_seed = derive_seed(options.seed, &format!("train.{kind}"), 0);
    let digest = config_digest(&[
        &kind.to_string(),
        &options.scheme.to_string(),
        &options.epochs.to_string(),
        &options.batch_size.to_string(),
        &options.max_len.to_string(),
        &options.min_freq.to_string(),
        &options.seed.to_string(),
    ]);

    let needs_tfidf = !matches!(kind, ModelKindName::CnnLstm)
        && (kind != ModelKindName::Mnb || options.mnb_tfidf);
    let tfidf = if needs_tfidf {
        Some(TfidfModel::fit(&vocab, tokens)?)
    } else {
        None
    };

    let train_config = neural::TrainConfig {
        epochs: options.epochs,
        batch_size: options.batch_size,
        seed: model_seed,
        adam: neural::AdamConfig::default(),
    };

    let (model, featurizer) = match kind {
        ModelKindName::CnnLstm => {
            let sequences: Vec<_> = tokens
                .iter()
                .map(|t| encode(t, &vocab, options.max_len))
                .collect();
            let classes: Vec<u8> = options.scheme.labels().to_vec();
            let targets: Vec<usize> = labels
                .iter()
                .map(|l| {
                    classes
                        .iter()
                        .position(|c| c == l)
                        .ok_or_else(|| Error::Validation(format!("label {l} outside scheme")))
                })
                .collect::<Result<_>>()?;
            let spec = neural::ModelSpec {
                max_len: options.max_len,
                ..neural::ModelSpec::with_defaults(vocab.len(), classes.len())
            };
            let trained = neural::train(
                neural::build_model(spec, model_seed)?,
                &sequences,
                &targets,
                train_config,
            )?;
            (PipelineModel::Neural(trained), Featurizer::Sequence)
        }
        ModelKindName::Mnb if !options.mnb_tfidf => {
            let counts: Vec<SparseVector> =
                tokens.iter().map(|t| count_vector(&vocab, t)).collect();
            let m = classic::train_mnb(&counts, labels, 1.0)?;
            (
                PipelineModel::Classic(classic::ClassifierModel::Mnb(m)),
                Featurizer::Counts,
            )
        }
        other => {
            let vectors: Vec<SparseVector> = tokens
                .iter()
                .map(|t| tfidf.as_ref().unwrap().transform(&vocab, t))
                .collect();
            let classic_model =
                match other {
                    ModelKindName::Mnb => {
                        classic::ClassifierModel::Mnb(classic::train_mnb(&vectors, labels, 1.0)?)
                    }
                    ModelKindName::Logreg => classic::ClassifierModel::LogReg(
                        classic::train_logreg(&vectors, labels, classic::LogRegConfig::default())?,
                    ),
                    ModelKindName::Lsvc => classic::ClassifierModel::Lsvc(classic::train_lsvc(
                        &vectors,
                        labels,
                        classic::LsvcConfig::with_seed(model_seed),
                    )?),
                    ModelKindName::SvmRbf => {
                        classic::ClassifierModel::SvmRbf(classic::train_svm_rbf(
                            &vectors,
                            labels,
                            classic::SvmConfig::with_seed(model_seed),
                        )?)
                    }
                    ModelKindName::Dtree => classic::ClassifierModel::DTree(classic::train_dtree(
                        &vectors,
                        labels,
                        classic::TreeConfig::default(),
                    )?),
                    ModelKindName::Rforest => {
                        classic::ClassifierModel::RForest(classic::train_rforest(
                            &vectors,
                            labels,
                            classic::ForestConfig::with_seed(model_seed),
                        )?)
                    }
                    ModelKindName::Mlp => classic::ClassifierModel::Mlp(
                        classic::train_mlp_classifier(&vectors, labels, 100, train_config)?,
                    ),
                    ModelKindName::CnnLstm => unreachable!(),
                };
            (PipelineModel::Classic(classic_model), Featurizer::Tfidf)
        }
    };

    Ok(Pipeline {
        kind,
        scheme: options.scheme,
        featurizer,
        vocab,
        max_len: options.max_len,
        min_freq: options.min_freq,
        tfidf: if featurizer == Featurizer::Tfidf {
            tfidf
        } else {
            None
        },
        model,
        seed: options.seed,
        config_digest: digest,
    })
}

/// `triage synth`: write a synthetic JSONL corpus.
pub fn cmd_synth(n: usize, seed: u64, weights: [f64; 4], out: &Path) -> Result<usize> {
    let corpus = synth_corpus(n, seed, weights)?;
    save_corpus(&corpus, out)?;
    Ok(corpus.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub model: ModelKindName,
    pub scheme: Scheme,
    pub train_documents: usize,
    pub test_documents: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub final_loss: Option<f64>,
    pub model_path: PathBuf,
}

fn corpus_tokens(corpus: &LabeledCorpus) -> (Vec<Vec<String>>, Vec<u8>) {
    let tokens = corpus
        .documents
        .iter()
        .map(|d| tokenize(&clean(&d.body_text)))
        .collect();
    let labels = corpus.documents.iter().map(|d| d.label.get()).collect();
    (tokens, labels)
}

fn pipeline_accuracy(pipeline: &Pipeline, corpus: &LabeledCorpus) -> Result<f64> {
    let mut correct = 0usize;
    for doc in &corpus.documents {
        let (label, _) = pipeline.predict_text(&doc.body_text)?;
        if label == doc.label.get() {
            correct += 1;
        }
    }
    Ok(correct as f64 / corpus.len() as f64)
}

/// `triage train`: train one model on the train split of a corpus and
/// write the unified model file.
pub fn cmd_train(
    corpus_path: &Path,
    format: CorpusFormat,
    kind: ModelKindName,
    options: &TrainOptions,
    out: &Path,
) -> Result<TrainSummary> {
    let corpus = load_corpus(corpus_path, format)?;
    let view = match options.scheme {
        Scheme::FourClass => corpus,
        Scheme::TwoClass => merge_labels(&corpus)?,
    };
    let (train, test) = crate::eval::stratified_split(
        &view,
        options.test_frac,
        derive_seed(options.seed, "train.split", 0),
    )?;
    let (tokens, labels) = corpus_tokens(&train);
    let pipeline = fit_pipeline(&tokens, &labels, kind, options)?;
    save_pipeline(&pipeline, out)?;

    let final_loss = match &pipeline.model {
        PipelineModel::Neural(m) => m.meta.loss_history.last().copied(),
        PipelineModel::Classic(classic::ClassifierModel::Mlp(m)) => {
            m.model.meta.loss_history.last().copied()
        }
        PipelineModel::Classic(_) => None,
    };

    Ok(TrainSummary {
        model: kind,
        scheme: options.scheme,
        train_documents: train.len(),
        test_documents: test.len(),
        train_accuracy: pipeline_accuracy(&pipeline, &train)?,
        test_accuracy: pipeline_accuracy(&pipeline, &test)?,
        final_loss,
        model_path: out.to_path_buf(),
    })
}

/// Paths produced by `cmd_evaluate`.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluateOutput {
    pub json_path: PathBuf,
    pub text_path: PathBuf,
}

/// `triage evaluate`: run the experiment grid and write `report.json` and
/// `report.txt` (both byte-deterministic for a fixed config and seed).
pub fn cmd_evaluate(
    corpus_path: &Path,
    format: CorpusFormat,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(ExperimentReport, EvaluateOutput)> {
    let corpus = load_corpus(corpus_path, format)?;
    let report = run_experiment(&corpus, config)?;
    std::fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("report.json");
    let text_path = out_dir.join("report.txt");
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Validation(format!("report encode: {e}")))?;
    std::fs::write(&json_path, json + "\n")?;
    std::fs::write(&text_path, render_text(&report))?;
    Ok((
        report,
        EvaluateOutput {
            json_path,
            text_path,
        },
    ))
}

/// `triage compare`: evaluate, then run ANOVA + Tukey HSD over the
/// per-fold metric vectors of one cell.
#[allow(clippy::too_many_arguments)]
pub fn cmd_compare(
    corpus_path: &Path,
    format: CorpusFormat,
    config: &ExperimentConfig,
    scheme: Scheme,
    balanced: bool,
    metric: MetricName,
    alpha: f64,
    out_dir: &Path,
) -> Result<(crate::eval::ComparisonReport, PathBuf)> {
    let (report, _) = cmd_evaluate(corpus_path, format, config, out_dir)?;
    let comparison = compare_cell(&report, scheme, balanced, metric, alpha)?;
    let text_path = out_dir.join("comparison.txt");
    std::fs::write(&text_path, render_comparison_text(&comparison))?;
    let json_path = out_dir.join("comparison.json");
    let json = serde_json::to_string_pretty(&comparison)
        .map_err(|e| Error::Validation(format!("comparison encode: {e}")))?;
    std::fs::write(&json_path, json + "\n")?;
    Ok((comparison, text_path))
}

/// Prediction output for one document.
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub label: u8,
    pub scheme: Scheme,
    pub scores: std::collections::BTreeMap<String, f64>,
}

/// `triage predict`: apply a stored pipeline to one document.
pub fn cmd_predict(model_path: &Path, text: &str) -> Result<Prediction> {
    let pipeline = crate::model_file::load_pipeline(model_path)?;
    let (label, scores) = pipeline.predict_text(text)?;
    Ok(Prediction {
        label,
        scheme: pipeline.scheme,
        scores: scores
            .into_iter()
            .map(|(l, s)| (l.to_string(), s))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_writes_expected_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let n = cmd_synth(1134, 7, [0.15, 0.2, 0.3, 0.35], &path).unwrap();
        assert_eq!(n, 1134);
        let contents = std::fs::read_to_string(&path).unwrap();
        assert_eq!(contents.lines().count(), 1134);
    }

    #[test]
    fn synth_reruns_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        cmd_synth(50, 3, [0.25, 0.25, 0.25, 0.25], &a).unwrap();
        cmd_synth(50, 3, [0.25, 0.25, 0.25, 0.25], &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn synth_rejects_bad_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        assert!(cmd_synth(50, 3, [0.5, 0.5, 0.5, 0.5], &path).is_err());
    }

    #[test]
    fn train_save_load_predict_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_path = dir.path().join("corpus.jsonl");
        cmd_synth(120, 5, [0.25, 0.25, 0.25, 0.25], &corpus_path).unwrap();
        let model_path = dir.path().join("model.tria");
        let options = TrainOptions::with_seed(11);
        let summary = cmd_train(
            &corpus_path,
            CorpusFormat::Jsonl,
            ModelKindName::Mnb,
            &options,
            &model_path,
        )
        .unwrap();
        assert!(summary.train_accuracy > 0.5);

        // Reload and compare against an in-memory refit on the same split.
        let corpus = load_corpus(&corpus_path, CorpusFormat::Jsonl).unwrap();
        let view = merge_labels(&corpus).unwrap();
        let (train, _) = crate::eval::stratified_split(
            &view,
            options.test_frac,
            derive_seed(options.seed, "train.split", 0),
        )
        .unwrap();
        let (tokens, labels) = corpus_tokens(&train);
        let in_memory = fit_pipeline(&tokens, &labels, ModelKindName::Mnb, &options).unwrap();
        let loaded = crate::model_file::load_pipeline(&model_path).unwrap();
        let probe = synth_corpus(100, 77, [0.25, 0.25, 0.25, 0.25]).unwrap();
        for doc in &probe.documents {
            let (a, sa) = in_memory.predict_text(&doc.body_text).unwrap();
            let (b, sb) = loaded.predict_text(&doc.body_text).unwrap();
            assert_eq!(a, b);
            for ((_, x), (_, y)) in sa.iter().zip(&sb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn train_same_seed_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_path = dir.path().join("corpus.jsonl");
        cmd_synth(80, 5, [0.25, 0.25, 0.25, 0.25], &corpus_path).unwrap();
        let a = dir.path().join("a.tria");
        let b = dir.path().join("b.tria");
        let options = TrainOptions::with_seed(21);
        cmd_train(
            &corpus_path,
            CorpusFormat::Jsonl,
            ModelKindName::Dtree,
            &options,
            &a,
        )
        .unwrap();
        cmd_train(
            &corpus_path,
            CorpusFormat::Jsonl,
            ModelKindName::Dtree,
            &options,
            &b,
        )
        .unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn predict_scores_sum_to_one_for_probabilistic_models() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_path = dir.path().join("corpus.jsonl");
        cmd_synth(100, 5, [0.25, 0.25, 0.25, 0.25], &corpus_path).unwrap();
        let model_path = dir.path().join("model.tria");
        cmd_train(
            &corpus_path,
            CorpusFormat::Jsonl,
            ModelKindName::Logreg,
            &TrainOptions::with_seed(4),
            &model_path,
        )
        .unwrap();
        let prediction =
            cmd_predict(&model_path, "the lesion shows destruction of the cortex").unwrap();
        let sum: f64 = prediction.scores.values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(prediction.scheme, Scheme::TwoClass);
    }

    #[test]
    fn predict_empty_text_errors() {
        let dir = tempfile::tempdir().unwrap();
        let corpus_path = dir.path().join("corpus.jsonl");
        cmd_synth(60, 5, [0.25, 0.25, 0.25, 0.25], &corpus_path).unwrap();
        let model_path = dir.path().join("model.tria");
        cmd_train(
            &corpus_path,
            CorpusFormat::Jsonl,
            ModelKindName::Mnb,
            &TrainOptions::with_seed(4),
            &model_path,
        )
        .unwrap();
        let err = cmd_predict(&model_path, "  ").unwrap_err();
        assert!(err.to_string().contains("empty document"));
    }

    use crate::corpus::synth_corpus;
}
