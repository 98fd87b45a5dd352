//! The cross-validated experiment grid: {two-class, four-class} x
//! {balanced, imbalanced} x model list, with per-fold metrics collected for
//! the statistical comparison step.
//!
//! Preprocessing (vocabulary, TF-IDF) is fitted inside each training fold.
//! In the default mode oversampling also happens inside the training fold
//! only; `paper_mode` switches to oversampling the whole corpus before
//! splitting, which mirrors a balance-first protocol at the cost of
//! duplicate documents straddling the fold boundary.

use serde::Serialize;

use crate::classic::{self, ModelKindName};
use crate::corpus::{merge_labels, LabeledCorpus, Scheme};
use crate::error::{Error, Result};
use crate::eval::metrics::{compute_metrics, roc_auc, MetricName, MetricsReport};
use crate::eval::split::{kfold, oversample_indices};
use crate::neural;
use crate::rng::derive_seed;
use crate::stats::{one_way_anova, tukey_hsd, AnovaResult, TukeyReport};
use crate::textprep::{clean, encode, tokenize, Vocabulary};
use crate::vectorize::{count_vector, SparseVector, TfidfModel};

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    /// Balanced flags to evaluate (false = imbalanced cell).
    pub modes: Vec<bool>,
    pub models: Vec<ModelKindName>,
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub min_freq: usize,
    pub seed: u64,
    /// Oversample the whole corpus before splitting instead of inside each
    /// training fold.
    pub paper_mode: bool,
    /// Feed TF-IDF vectors (not raw counts) to multinomial NB.
    pub mnb_tfidf: bool,
    #[serde(skip)]
    pub verbose: bool,
}

impl ExperimentConfig {
    pub fn with_seed(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            schemes: vec![Scheme::FourClass, Scheme::TwoClass],
            modes: vec![false, true],
            models: ModelKindName::ALL.to_vec(),
            k: 5,
            epochs: 10,
            batch_size: 32,
            max_len: 200,
            min_freq: 1,
            seed,
            paper_mode: false,
            mnb_tfidf: false,
            verbose: false,
        }
    }
}

/// Mean metrics over the folds of one cell row.
#[derive(Debug, Clone, Serialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub roc_auc: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelRow {
    pub model: ModelKindName,
    pub display: &'static str,
    pub per_fold: Vec<MetricsReport>,
    pub mean: MeanMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub scheme: Scheme,
    pub balanced: bool,
    pub rows: Vec<ModelRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
}

fn cell_id(scheme: Scheme, balanced: bool) -> String {
    format!(
        "{scheme}/{}",
        if balanced { "balanced" } else { "imbalanced" }
    )
}

/// Featurizations of one training fold plus the held-out fold.
struct FoldFeatures {
    vocab: Vocabulary,
    tfidf_train: Option<Vec<SparseVector>>,
    tfidf_test: Option<Vec<SparseVector>>,
    counts_train: Option<Vec<SparseVector>>,
    counts_test: Option<Vec<SparseVector>>,
    seq_train: Option<Vec<crate::textprep::TokenSequence>>,
    seq_test: Option<Vec<crate::textprep::TokenSequence>>,
}

fn build_fold_features(
    tokens: &[&Vec<String>],
    train_pos: &[usize],
    test_pos: &[usize],
    config: &ExperimentConfig,
    needs_tfidf: bool,
    needs_counts: bool,
    needs_seq: bool,
) -> Result<FoldFeatures> {
    let train_tokens: Vec<&Vec<String>> = train_pos.iter().map(|&p| tokens[p]).collect();
    let vocab = Vocabulary::build(&train_tokens, config.min_freq);

    let (tfidf_train, tfidf_test) = if needs_tfidf {
        let model = TfidfModel::fit(&vocab, &train_tokens)?;
        let tr = train_pos
            .iter()
            .map(|&p| model.transform(&vocab, tokens[p]))
            .collect();
        let te = test_pos
            .iter()
            .map(|&p| model.transform(&vocab, tokens[p]))
            .collect();
        (Some(tr), Some(te))
    } else {
        (None, None)
    };

    let (counts_train, counts_test) = if needs_counts {
        let tr = train_pos
            .iter()
            .map(|&p| count_vector(&vocab, tokens[p]))
            .collect();
        let te = test_pos
            .iter()
            .map(|&p| count_vector(&vocab, tokens[p]))
            .collect();
        (Some(tr), Some(te))
    } else {
        (None, None)
    };

    let (seq_train, seq_test) = if needs_seq {
        let tr = train_pos
            .iter()
            .map(|&p| encode(tokens[p], &vocab, config.max_len))
            .collect();
        let te = test_pos
            .iter()
            .map(|&p| encode(tokens[p], &vocab, config.max_len))
            .collect();
        (Some(tr), Some(te))
    } else {
        (None, None)
    };

    Ok(FoldFeatures {
        vocab,
        tfidf_train,
        tfidf_test,
        counts_train,
        counts_test,
        seq_train,
        seq_test,
    })
}

/// Train one model on a fold and score the held-out documents.
/// Returns predictions and, when the model defines one, the score of the
/// positive class for ROC-AUC.
fn train_and_score(
    model: ModelKindName,
    features: &FoldFeatures,
    y_train: &[u8],
    scheme: Scheme,
    config: &ExperimentConfig,
    model_seed: u64,
) -> Result<(Vec<u8>, Option<Vec<f64>>)> {
    let tfidf_train = features.tfidf_train.as_deref();
    let tfidf_test = features.tfidf_test.as_deref();

    let classic_model = match model {
        ModelKindName::Mnb => {
            let (train, _test) = if config.mnb_tfidf {
                (tfidf_train.unwrap(), tfidf_test.unwrap())
            } else {
                (
                    features.counts_train.as_deref().unwrap(),
                    features.counts_test.as_deref().unwrap(),
                )
            };
            Some(classic::ClassifierModel::Mnb(classic::train_mnb(
                train, y_train, 1.0,
            )?))
        }
        ModelKindName::Logreg => Some(classic::ClassifierModel::LogReg(classic::train_logreg(
            tfidf_train.unwrap(),
            y_train,
            classic::LogRegConfig::default(),
        )?)),
        ModelKindName::Lsvc => Some(classic::ClassifierModel::Lsvc(classic::train_lsvc(
            tfidf_train.unwrap(),
            y_train,
            classic::LsvcConfig::with_seed(model_seed),
        )?)),
        ModelKindName::SvmRbf => Some(classic::ClassifierModel::SvmRbf(classic::train_svm_rbf(
            tfidf_train.unwrap(),
            y_train,
            classic::SvmConfig::with_seed(model_seed),
        )?)),
        ModelKindName::Dtree => Some(classic::ClassifierModel::DTree(classic::train_dtree(
            tfidf_train.unwrap(),
            y_train,
            classic::TreeConfig::default(),
        )?)),
        ModelKindName::Rforest => Some(classic::ClassifierModel::RForest(classic::train_rforest(
            tfidf_train.unwrap(),
            y_train,
            classic::ForestConfig::with_seed(model_seed),
        )?)),
        ModelKindName::Mlp => {
            let train_config = neural::TrainConfig {
                epochs: config.epochs,
                batch_size: config.batch_size,
                seed: model_seed,
                adam: neural::AdamConfig::default(),
            };
            Some(classic::ClassifierModel::Mlp(
                classic::train_mlp_classifier(tfidf_train.unwrap(), y_train, 100, train_config)?,
            ))
        }
        ModelKindName::CnnLstm => None,
    };

    if let Some(trained) = classic_model {
        let test = if model == ModelKindName::Mnb && !config.mnb_tfidf {
            features.counts_test.as_deref().unwrap()
        } else {
            tfidf_test.unwrap()
        };
        let predictions = trained.predict(test)?;
        let pos_scores = if scheme == Scheme::TwoClass {
            Some(trained.positive_scores(test)?)
        } else {
            None
        };
        return Ok((predictions, pos_scores));
    }

    // CNN-LSTM path.
    let seq_train = features.seq_train.as_deref().unwrap();
    let seq_test = features.seq_test.as_deref().unwrap();
    let classes: Vec<u8> = scheme.labels().to_vec();
    let targets: Vec<usize> = y_train
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let spec = neural::ModelSpec {
        max_len: config.max_len,
        ..neural::ModelSpec::with_defaults(features.vocab.len(), classes.len())
    };
    let model = neural::build_model(spec, model_seed)?;
    let trained = neural::train(
        model,
        seq_train,
        &targets,
        neural::TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            seed: model_seed,
            adam: neural::AdamConfig::default(),
        },
    )?;
    let probs = trained.forward(seq_test)?;
    let predictions: Vec<u8> = probs
        .iter()
        .map(|row| classes[classic::argmax_lowest(row)])
        .collect();
    let pos_scores = if scheme == Scheme::TwoClass {
        let pos_idx = classes.iter().position(|&c| c == 1).unwrap();
        Some(probs.iter().map(|row| row[pos_idx]).collect())
    } else {
        None
    };
    Ok((predictions, pos_scores))
}

/// Run the full grid over a four-class corpus.
pub fn run_experiment(
    corpus: &LabeledCorpus,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if corpus.scheme != Scheme::FourClass {
        return Err(Error::Config(
            "experiments start from a four-class corpus".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(Error::Validation("corpus is empty".into()));
    }
    if config.models.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }

    let base_tokens: Vec<Vec<String>> = corpus
        .documents
        .iter()
        .map(|d| tokenize(&clean(&d.body_text)))
        .collect();

    let needs_tfidf = config.models.iter().any(|m| {
        matches!(
            m,
            ModelKindName::Logreg
                | ModelKindName::Lsvc
                | ModelKindName::SvmRbf
                | ModelKindName::Dtree
                | ModelKindName::Rforest
                | ModelKindName::Mlp
        )
    }) || (config.models.contains(&ModelKindName::Mnb) && config.mnb_tfidf);
    let needs_counts = config.models.contains(&ModelKindName::Mnb) && !config.mnb_tfidf;
    let needs_seq = config.models.contains(&ModelKindName::CnnLstm);

    let mut cells = Vec::new();
    for &scheme in &config.schemes {
        let view = match scheme {
            Scheme::FourClass => corpus.clone(),
            Scheme::TwoClass => merge_labels(corpus)?,
        };
        let view_labels: Vec<u8> = view.documents.iter().map(|d| d.label.get()).collect();

        for &balanced in &config.modes {
            let cell = cell_id(scheme, balanced);

            // Positions into the base corpus this cell trains/tests over.
            let positions: Vec<usize> = if balanced && config.paper_mode {
                let all: Vec<usize> = (0..view_labels.len()).collect();
                oversample_indices(
                    &view_labels,
                    &all,
                    derive_seed(config.seed, &format!("exp.presplit.{cell}"), 0),
                )
            } else {
                (0..view_labels.len()).collect()
            };
            let cell_labels: Vec<u8> = positions.iter().map(|&p| view_labels[p]).collect();

            let plan = kfold(
                &cell_labels,
                config.k,
                derive_seed(config.seed, &format!("exp.kfold.{cell}"), 0),
            )?;

            let mut rows: Vec<ModelRow> = config
                .models
                .iter()
                .map(|&model| ModelRow {
                    model,
                    display: model.display_name(),
                    per_fold: Vec::with_capacity(config.k),
                    mean: MeanMetrics {
                        accuracy: 0.0,
                        precision: 0.0,
                        recall: 0.0,
                        f_measure: 0.0,
                        roc_auc: None,
                    },
                })
                .collect();

            for fold in 0..config.k {
                let mut train_pos = plan.train_indices(fold);
                let test_pos = plan.test_indices(fold);
                if balanced && !config.paper_mode {
                    train_pos = oversample_indices(
                        &cell_labels,
                        &train_pos,
                        derive_seed(config.seed, &format!("exp.oversample.{cell}.fold{fold}"), 0),
                    );
                }
                let token_refs: Vec<&Vec<String>> =
                    positions.iter().map(|&p| &base_tokens[p]).collect();
                let features = build_fold_features(
                    &token_refs,
                    &train_pos,
                    &test_pos,
                    config,
                    needs_tfidf,
                    needs_counts,
                    needs_seq,
                )?;
                let y_train: Vec<u8> = train_pos.iter().map(|&p| cell_labels[p]).collect();
                let y_test: Vec<u8> = test_pos.iter().map(|&p| cell_labels[p]).collect();

                for row in rows.iter_mut() {
                    if config.verbose {
                        eprintln!("[evaluate] {cell} fold {fold} {}", row.model);
                    }
                    let model_seed = derive_seed(
                        config.seed,
                        &format!("exp.model.{cell}.fold{fold}.{}", row.model),
                        0,
                    );
                    let (predictions, pos_scores) = train_and_score(
                        row.model, &features, &y_train, scheme, config, model_seed,
                    )?;
                    let mut metrics = compute_metrics(&y_test, &predictions, scheme)?;
                    metrics.fold = fold;
                    if let Some(scores) = pos_scores {
                        metrics.roc_auc = Some(roc_auc(&y_test, &scores)?);
                    }
                    row.per_fold.push(metrics);
                }
            }

            for row in rows.iter_mut() {
                let k = row.per_fold.len() as f64;
                row.mean = MeanMetrics {
                    accuracy: row.per_fold.iter().map(|m| m.accuracy).sum::<f64>() / k,
                    precision: row.per_fold.iter().map(|m| m.precision).sum::<f64>() / k,
                    recall: row.per_fold.iter().map(|m| m.recall).sum::<f64>() / k,
                    f_measure: row.per_fold.iter().map(|m| m.f_measure).sum::<f64>() / k,
                    roc_auc: if row.per_fold.iter().all(|m| m.roc_auc.is_some()) {
                        Some(row.per_fold.iter().map(|m| m.roc_auc.unwrap()).sum::<f64>() / k)
                    } else {
                        None
                    },
                };
            }

            cells.push(CellReport {
                scheme,
                balanced,
                rows,
            });
        }
    }

    Ok(ExperimentReport {
        config: config.clone(),
        cells,
    })
}

/// Statistical comparison of the models in one cell: one-way ANOVA across
/// per-fold metric vectors plus Tukey's HSD over all pairs. Metric values
/// are expressed in percentage points.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scheme: Scheme,
    pub balanced: bool,
    pub metric: MetricName,
    pub alpha: f64,
    pub anova: AnovaResult,
    pub tukey: TukeyReport,
}

pub fn compare_cell(
    report: &ExperimentReport,
    scheme: Scheme,
    balanced: bool,
    metric: MetricName,
    alpha: f64,
) -> Result<ComparisonReport> {
    let cell = report
        .cells
        .iter()
        .find(|c| c.scheme == scheme && c.balanced == balanced)
        .ok_or_else(|| {
            Error::Config(format!("cell {} not in report", cell_id(scheme, balanced)))
        })?;
    let mut groups = Vec::new();
    for row in &cell.rows {
        let values: Vec<f64> = row
            .per_fold
            .iter()
            .map(|m| {
                m.metric(metric)
                    .map(|v| v * 100.0)
                    .ok_or_else(|| Error::Config(format!("metric unavailable for {}", row.model)))
            })
            .collect::<Result<_>>()?;
        groups.push((row.display.to_string(), values));
    }
    let values_only: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
    let anova = one_way_anova(&values_only)?;
    let tukey = tukey_hsd(&groups, alpha)?;
    Ok(ComparisonReport {
        scheme,
        balanced,
        metric,
        alpha,
        anova,
        tukey,
    })
}

// --- report rendering -------------------------------------------------------

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

/// Aligned-text tables, one block per cell. Two-class cells carry the full
/// metric columns; four-class cells carry accuracy only.
pub fn render_text(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for cell in &report.cells {
        let mode = if cell.balanced {
            "balanced"
        } else {
            "imbalanced"
        };
        out.push_str(&format!(
            "## {} dataset, {} classes\n",
            mode,
            cell.scheme.num_classes()
        ));
        match cell.scheme {
            Scheme::FourClass => {
                out.push_str(&format!("{:<10} {:>9}\n", "Model", "Accuracy"));
                for row in &cell.rows {
                    out.push_str(&format!(
                        "{:<10} {:>9}\n",
                        row.display,
                        pct(row.mean.accuracy)
                    ));
                }
            }
            Scheme::TwoClass => {
                out.push_str(&format!(
                    "{:<10} {:>9} {:>10} {:>7} {:>10} {:>8}\n",
                    "Model", "Accuracy", "Precision", "Recall", "F-measure", "ROC-AUC"
                ));
                for row in &cell.rows {
                    out.push_str(&format!(
                        "{:<10} {:>9} {:>10} {:>7} {:>10} {:>8}\n",
                        row.display,
                        pct(row.mean.accuracy),
                        pct(row.mean.precision),
                        pct(row.mean.recall),
                        pct(row.mean.f_measure),
                        row.mean.roc_auc.map_or("-".to_string(), pct),
                    ));
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Aligned-text pairwise comparison table.
pub fn render_comparison_text(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let mode = if report.balanced {
        "balanced"
    } else {
        "imbalanced"
    };
    out.push_str(&format!(
        "One-way ANOVA over per-fold {} ({}, {} classes): F = {:.4} (df {}, {}), p = {:.6}\n\n",
        match report.metric {
            MetricName::Accuracy => "accuracy",
            MetricName::Precision => "precision",
            MetricName::Recall => "recall",
            MetricName::FMeasure => "F-measure",
            MetricName::RocAuc => "ROC-AUC",
        },
        mode,
        match report.scheme {
            Scheme::FourClass => 4,
            Scheme::TwoClass => 2,
        },
        report.anova.f_statistic,
        report.anova.df_between,
        report.anova.df_within,
        report.anova.p_value
    ));
    out.push_str("Pair | Difference | SE | Critical mean | p-value\n");
    for pair in &report.tukey.pairs {
        out.push_str(&format!(
            "{} | {:.4} | {:.4} | {:.4} | {:.6}\n",
            pair.pair, pair.difference, pair.se, pair.critical_mean, pair.p_value
        ));
    }
    out
}
