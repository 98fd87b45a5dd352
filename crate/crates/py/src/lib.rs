//! Python bindings for the triage toolkit.
//!
//! Exposes text preprocessing, corpus synthesis, model training, the
//! stored-pipeline predictor, evaluation metrics, and the ANOVA / Tukey
//! HSD statistics. Build the extension with
//! `cargo build -p triage-py --release`, then run
//! `python3 python/smoke_test.py` from the repository root.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use triage_core::classic::ModelKindName;
use triage_core::cli::{cmd_synth, cmd_train, TrainOptions};
use triage_core::corpus::{CorpusFormat, Scheme};
use triage_core::error::Error;
use triage_core::eval;
use triage_core::stats;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    match s {
        "two_class" => Ok(Scheme::TwoClass),
        "four_class" => Ok(Scheme::FourClass),
        other => Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    }
}

/// Remove digits and symbols, lowercase, collapse whitespace.
#[pyfunction]
fn clean(text: &str) -> String {
    triage_core::textprep::clean(text)
}

/// Extract the clinical body from a raw report record.
#[pyfunction]
fn extract_body(text: &str) -> String {
    triage_core::corpus::extract_body(text)
}

/// Whitespace tokens of an already-cleaned text.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    triage_core::textprep::tokenize(text)
}

/// Write a deterministic synthetic corpus; returns the document count.
#[pyfunction]
#[pyo3(signature = (path, n, seed, weights=None))]
fn synth_corpus(path: PathBuf, n: usize, seed: u64, weights: Option<[f64; 4]>) -> PyResult<usize> {
    let weights = weights.unwrap_or([0.15, 0.2, 0.3, 0.35]);
    cmd_synth(n, seed, weights, &path).map_err(to_py_err)
}

/// Train one model on the train split of a corpus and write a model file.
/// Returns a summary dict.
#[pyfunction]
#[pyo3(signature = (corpus, model, out, seed, scheme="two_class", epochs=10, batch_size=32,
                    max_len=200, min_freq=1, test_frac=0.2, mnb_tfidf=false))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    corpus: PathBuf,
    model: &str,
    out: PathBuf,
    seed: u64,
    scheme: &str,
    epochs: usize,
    batch_size: usize,
    max_len: usize,
    min_freq: usize,
    test_frac: f64,
    mnb_tfidf: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: ModelKindName = model.parse().map_err(to_py_err)?;
    let options = TrainOptions {
        scheme: parse_scheme(scheme)?,
        epochs,
        batch_size,
        max_len,
        min_freq,
        test_frac,
        mnb_tfidf,
        seed,
    };
    let summary =
        cmd_train(&corpus, CorpusFormat::Jsonl, kind, &options, &out).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("model", summary.model.as_str())?;
    dict.set_item("scheme", summary.scheme.to_string())?;
    dict.set_item("train_documents", summary.train_documents)?;
    dict.set_item("test_documents", summary.test_documents)?;
    dict.set_item("train_accuracy", summary.train_accuracy)?;
    dict.set_item("test_accuracy", summary.test_accuracy)?;
    dict.set_item("final_loss", summary.final_loss)?;
    Ok(dict)
}

/// A stored prediction pipeline loaded from a model file.
#[pyclass]
struct Pipeline {
    inner: triage_core::model_file::Pipeline,
}

#[pymethods]
impl Pipeline {
    /// Load a pipeline from a `triage train` model file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Pipeline> {
        Ok(Pipeline {
            inner: triage_core::model_file::load_pipeline(&path).map_err(to_py_err)?,
        })
    }

    /// Model kind stored in the file.
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.as_str()
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme.to_string()
    }

    /// Predict one document: returns {"label", "scheme", "scores"}.
    fn predict<'py>(&self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
        let (label, scores) = self.inner.predict_text(text).map_err(to_py_err)?;
        let dict = PyDict::new(py);
        dict.set_item("label", label)?;
        dict.set_item("scheme", self.inner.scheme.to_string())?;
        let score_map: BTreeMap<String, f64> = scores
            .into_iter()
            .map(|(l, s)| (l.to_string(), s))
            .collect();
        dict.set_item("scores", score_map)?;
        Ok(dict)
    }
}

/// CDF of the studentized range distribution.
#[pyfunction]
fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    stats::ptukey(q, k, df)
}

/// Quantile of the studentized range distribution.
#[pyfunction]
fn qtukey(p: f64, k: usize, df: f64) -> PyResult<f64> {
    stats::qtukey(p, k, df).map_err(to_py_err)
}

/// One-way ANOVA over groups of observations.
#[pyfunction]
fn one_way_anova<'py>(py: Python<'py>, groups: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = stats::one_way_anova(&groups).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("f_statistic", r.f_statistic)?;
    dict.set_item("df_between", r.df_between)?;
    dict.set_item("df_within", r.df_within)?;
    dict.set_item("p_value", r.p_value)?;
    Ok(dict)
}

fn tukey_report_to_py<'py>(
    py: Python<'py>,
    report: &stats::TukeyReport,
) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("alpha", report.alpha)?;
    dict.set_item("k", report.k)?;
    dict.set_item("df", report.df)?;
    dict.set_item("q_critical", report.q_critical)?;
    let mut pairs = Vec::new();
    for pair in &report.pairs {
        let p = PyDict::new(py);
        p.set_item("pair", &pair.pair)?;
        p.set_item("difference", pair.difference)?;
        p.set_item("se", pair.se)?;
        p.set_item("critical_mean", pair.critical_mean)?;
        p.set_item("p_value", pair.p_value)?;
        p.set_item("significant", pair.significant)?;
        pairs.push(p);
    }
    dict.set_item("pairs", pairs)?;
    Ok(dict)
}

/// Tukey HSD over named groups of per-fold values.
#[pyfunction]
#[pyo3(signature = (groups, alpha=0.05))]
fn tukey_hsd<'py>(
    py: Python<'py>,
    groups: Vec<(String, Vec<f64>)>,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = stats::tukey_hsd(&groups, alpha).map_err(to_py_err)?;
    tukey_report_to_py(py, &report)
}

/// Tukey HSD arithmetic from published summary statistics.
#[pyfunction]
#[pyo3(signature = (diffs, se, k, df, alpha=0.05))]
fn tukey_from_summary<'py>(
    py: Python<'py>,
    diffs: Vec<(String, f64)>,
    se: f64,
    k: usize,
    df: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = stats::tukey_from_summary(&diffs, se, k, df, alpha).map_err(to_py_err)?;
    tukey_report_to_py(py, &report)
}

/// Accuracy and support-weighted precision/recall/F1 for predictions.
#[pyfunction]
fn compute_metrics<'py>(
    py: Python<'py>,
    y_true: Vec<u8>,
    y_pred: Vec<u8>,
    scheme: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let m = eval::compute_metrics(&y_true, &y_pred, parse_scheme(scheme)?).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("accuracy", m.accuracy)?;
    dict.set_item("precision", m.precision)?;
    dict.set_item("recall", m.recall)?;
    dict.set_item("f_measure", m.f_measure)?;
    Ok(dict)
}

/// Rank-based ROC-AUC with label 1 as the positive class.
#[pyfunction]
fn roc_auc(y_true: Vec<u8>, scores: Vec<f64>) -> PyResult<f64> {
    eval::roc_auc(&y_true, &scores).map_err(to_py_err)
}

#[pymodule]
fn triage_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(clean, m)?)?;
    m.add_function(wrap_pyfunction!(extract_body, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(ptukey, m)?)?;
    m.add_function(wrap_pyfunction!(qtukey, m)?)?;
    m.add_function(wrap_pyfunction!(one_way_anova, m)?)?;
    m.add_function(wrap_pyfunction!(tukey_hsd, m)?)?;
    m.add_function(wrap_pyfunction!(tukey_from_summary, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_class::<Pipeline>()?;
    Ok(())
}
