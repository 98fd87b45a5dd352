//! The classical baselines over sparse document vectors: multinomial naive
//! Bayes, softmax logistic regression, linear SVC, RBF-kernel SVM via SMO,
//! CART decision tree, random forest, and an MLP wrapper over the neural
//! engine.
//!
//! Every trainer is deterministic given its data, hyperparameters, and
//! seed. Argmax and voting ties always resolve to the lowest label.

pub mod linear;
pub mod mnb;
pub mod svm;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::MlpModel;
use crate::vectorize::SparseVector;

pub use linear::{train_logreg, train_lsvc, LogRegConfig, LogRegModel, LsvcConfig, LsvcModel};
pub use mnb::{train_mnb, MnbModel};
pub use svm::{train_svm_rbf, Gamma, SvmConfig, SvmRbfModel};
pub use tree::{
    train_dtree, train_rforest, ForestConfig, ForestModel, MaxFeatures, TreeConfig, TreeModel,
};

/// Sorted distinct labels present in a training set.
pub(crate) fn classes_from_labels(y: &[u8]) -> Vec<u8> {
    let mut classes: Vec<u8> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// Index of the best score, lowest index on ties.
pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// MLP baseline adapted to the classifier interface: maps labels to class
/// indices and delegates to the neural engine.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    pub classes: Vec<u8>,
    pub model: MlpModel,
}

/// A trained classical model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel {
    Mnb(MnbModel),
    LogReg(LogRegModel),
    Lsvc(LsvcModel),
    SvmRbf(SvmRbfModel),
    DTree(TreeModel),
    RForest(ForestModel),
    Mlp(MlpClassifier),
}

impl ClassifierModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassifierModel::Mnb(_) => "mnb",
            ClassifierModel::LogReg(_) => "logreg",
            ClassifierModel::Lsvc(_) => "lsvc",
            ClassifierModel::SvmRbf(_) => "svm_rbf",
            ClassifierModel::DTree(_) => "dtree",
            ClassifierModel::RForest(_) => "rforest",
            ClassifierModel::Mlp(_) => "mlp",
        }
    }

    pub fn classes(&self) -> &[u8] {
        match self {
            ClassifierModel::Mnb(m) => &m.classes,
            ClassifierModel::LogReg(m) => &m.classes,
            ClassifierModel::Lsvc(m) => &m.classes,
            ClassifierModel::SvmRbf(m) => &m.classes,
            ClassifierModel::DTree(m) => &m.classes,
            ClassifierModel::RForest(m) => &m.classes,
            ClassifierModel::Mlp(m) => &m.classes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ClassifierModel::Mnb(m) => m.dim,
            ClassifierModel::LogReg(m) => m.dim,
            ClassifierModel::Lsvc(m) => m.dim,
            ClassifierModel::SvmRbf(m) => m.dim,
            ClassifierModel::DTree(m) => m.dim,
            ClassifierModel::RForest(m) => m.dim,
            ClassifierModel::Mlp(m) => m.model.spec.input_dim,
        }
    }

    fn check_dim(&self, x: &[SparseVector]) -> Result<()> {
        for v in x {
            if v.dim != self.dim() {
                return Err(Error::Model(format!(
                    "input dimension {} does not match model dimension {}",
                    v.dim,
                    self.dim()
                )));
            }
        }
        Ok(())
    }

    /// Per-class scores, rows aligned with [`Self::classes`]. Probabilistic
    /// models produce rows summing to 1; margin models produce signed
    /// margins (monotone in the decision function).
    pub fn predict_scores(&self, x: &[SparseVector]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        Ok(match self {
            ClassifierModel::Mnb(m) => m.scores(x),
            ClassifierModel::LogReg(m) => m.scores(x),
            ClassifierModel::Lsvc(m) => m.scores(x),
            ClassifierModel::SvmRbf(m) => m.scores(x),
            ClassifierModel::DTree(m) => m.scores(x),
            ClassifierModel::RForest(m) => m.scores(x),
            ClassifierModel::Mlp(m) => {
                let refs: Vec<&SparseVector> = x.iter().collect();
                m.model.forward(&refs)?
            }
        })
    }

    /// Predicted labels, ties resolved to the lowest label.
    pub fn predict(&self, x: &[SparseVector]) -> Result<Vec<u8>> {
        let scores = self.predict_scores(x)?;
        let classes = self.classes();
        Ok(scores
            .iter()
            .map(|row| classes[argmax_lowest(row)])
            .collect())
    }

    /// Score of the positive class (label 1) for ROC-AUC in the two-class
    /// scheme.
    pub fn positive_scores(&self, x: &[SparseVector]) -> Result<Vec<f64>> {
        let idx = self
            .classes()
            .iter()
            .position(|&c| c == 1)
            .ok_or_else(|| Error::Model("model has no class labeled 1".into()))?;
        Ok(self
            .predict_scores(x)?
            .into_iter()
            .map(|row| row[idx])
            .collect())
    }
}

/// Train the MLP baseline over sparse vectors.
pub fn train_mlp_classifier(
    x: &[SparseVector],
    y: &[u8],
    hidden: usize,
    config: crate::neural::TrainConfig,
) -> Result<MlpClassifier> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Model("training set empty or mismatched".into()));
    }
    let classes = classes_from_labels(y);
    if classes.len() < 2 {
        return Err(Error::Model("need at least two classes".into()));
    }
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let spec = crate::neural::MlpSpec {
        input_dim: x[0].dim,
        hidden,
        num_classes: classes.len(),
    };
    let model = crate::neural::build_mlp(spec, config.seed)?;
    let model = crate::neural::train_mlp(model, x, &targets, config)?;
    Ok(MlpClassifier { classes, model })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindName {
    Mnb,
    Logreg,
    Lsvc,
    SvmRbf,
    Dtree,
    Rforest,
    Mlp,
    CnnLstm,
}

impl ModelKindName {
    pub const ALL: [ModelKindName; 8] = [
        ModelKindName::Mnb,
        ModelKindName::Logreg,
        ModelKindName::Lsvc,
        ModelKindName::Mlp,
        ModelKindName::SvmRbf,
        ModelKindName::Dtree,
        ModelKindName::Rforest,
        ModelKindName::CnnLstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKindName::Mnb => "mnb",
            ModelKindName::Logreg => "logreg",
            ModelKindName::Lsvc => "lsvc",
            ModelKindName::SvmRbf => "svm_rbf",
            ModelKindName::Dtree => "dtree",
            ModelKindName::Rforest => "rforest",
            ModelKindName::Mlp => "mlp",
            ModelKindName::CnnLstm => "cnn_lstm",
        }
    }

    /// Row name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKindName::Mnb => "MNB",
            ModelKindName::Logreg => "LR",
            ModelKindName::Lsvc => "LSVC",
            ModelKindName::SvmRbf => "SVM",
            ModelKindName::Dtree => "DT",
            ModelKindName::Rforest => "RF",
            ModelKindName::Mlp => "MLP",
            ModelKindName::CnnLstm => "CNN_LSTM",
        }
    }
}

impl std::str::FromStr for ModelKindName {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKindName> {
        match s {
            "mnb" => Ok(ModelKindName::Mnb),
            "logreg" => Ok(ModelKindName::Logreg),
            "lsvc" => Ok(ModelKindName::Lsvc),
            "svm_rbf" => Ok(ModelKindName::SvmRbf),
            "dtree" => Ok(ModelKindName::Dtree),
            "rforest" => Ok(ModelKindName::Rforest),
            "mlp" => Ok(ModelKindName::Mlp),
            "cnn_lstm" => Ok(ModelKindName::CnnLstm),
            other => Err(Error::Config(format!(
                "unknown model {other:?}; valid names: mnb, logreg, lsvc, svm_rbf, dtree, rforest, mlp, cnn_lstm"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKindName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let x = vec![
            SparseVector::new(vec![0], vec![1.0], 4),
            SparseVector::new(vec![2], vec![1.0], 4),
        ];
        let model = ClassifierModel::Mnb(mnb::train_mnb(&x, &[1, 2], 1.0).unwrap());
        let wrong = SparseVector::new(vec![0], vec![1.0], 7);
        assert!(model.predict(&[wrong]).is_err());
        assert!(model.predict(&x).is_ok());
    }

    #[test]
    fn positive_scores_require_label_one() {
        let x = vec![
            SparseVector::new(vec![0], vec![1.0], 2),
            SparseVector::new(vec![1], vec![1.0], 2),
        ];
        let model = ClassifierModel::Mnb(mnb::train_mnb(&x, &[3, 4], 1.0).unwrap());
        assert!(model.positive_scores(&x).is_err());
    }

    #[test]
    fn model_names_round_trip() {
        for kind in ModelKindName::ALL {
            let parsed: ModelKindName = kind.as_str().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("perceptron".parse::<ModelKindName>().is_err());
    }
}
