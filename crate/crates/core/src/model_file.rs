//! The unified on-disk model format and the prediction pipeline it stores.
//!
//! Layout: magic `TRIA`, little-endian u32 format version, little-endian
//! u64 header length, a JSON header block, then the raw little-endian fp64
//! parameter arrays named by the header's shape manifest. The header
//! embeds the complete preprocessing state (vocabulary, featurizer kind,
//! TF-IDF weights reference, sequence length), so a loaded pipeline always
//! cleans and encodes text exactly the way training did.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classic::{ClassifierModel, MlpClassifier, ModelKindName};
use crate::corpus::Scheme;
use crate::error::{Error, Result};
use crate::neural::{self, MlpModel, Tensor, TrainMeta, TrainedModel};
use crate::textprep::{clean, encode, tokenize, Vocabulary};
use crate::vectorize::{count_vector, SparseVector, TfidfModel};

pub const MAGIC: &[u8; 4] = b"TRIA";
pub const FORMAT_VERSION: u32 = 1;

/// How raw text is turned into model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Featurizer {
    /// Raw term counts over the vocabulary (multinomial NB).
    Counts,
    /// L2-normalized TF-IDF.
    Tfidf,
    /// Padded token-id sequences (CNN-LSTM).
    Sequence,
}

/// A trained model plus the preprocessing state needed to apply it.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub kind: ModelKindName,
    pub scheme: Scheme,
    pub featurizer: Featurizer,
    pub vocab: Vocabulary,
    pub max_len: usize,
    pub min_freq: usize,
    pub tfidf: Option<TfidfModel>,
    pub model: PipelineModel,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone)]
pub enum PipelineModel {
    Classic(ClassifierModel),
    Neural(TrainedModel),
}

impl Pipeline {
    pub fn classes(&self) -> Vec<u8> {
        match &self.model {
            PipelineModel::Classic(m) => m.classes().to_vec(),
            PipelineModel::Neural(_) => self.scheme.labels().to_vec(),
        }
    }

    /// Predicted label and per-label scores for one document.
    pub fn predict_text(&self, text: &str) -> Result<(u8, Vec<(u8, f64)>)> {
        if text.trim().is_empty() {
            return Err(Error::Validation("empty document".into()));
        }
        let tokens = tokenize(&clean(text));
        let classes = self.classes();
        let scores: Vec<f64> = match (&self.model, self.featurizer) {
            (PipelineModel::Neural(model), Featurizer::Sequence) => {
                let seq = encode(&tokens, &self.vocab, self.max_len);
                model.forward(&[seq])?.remove(0)
            }
            (PipelineModel::Classic(model), Featurizer::Counts) => {
                let v = count_vector(&self.vocab, &tokens);
                model.predict_scores(&[v])?.remove(0)
            }
            (PipelineModel::Classic(model), Featurizer::Tfidf) => {
                let tfidf = self
                    .tfidf
                    .as_ref()
                    .ok_or_else(|| Error::Model("pipeline is missing TF-IDF weights".into()))?;
                let v = tfidf.transform(&self.vocab, &tokens);
                model.predict_scores(&[v])?.remove(0)
            }
            _ => return Err(Error::Model("inconsistent pipeline featurizer".into())),
        };
        let best = crate::classic::argmax_lowest(&scores);
        Ok((classes[best], classes.iter().copied().zip(scores).collect()))
    }
}

// --- header schema -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SvmMachineHeader {
    n_support: usize,
    bias: f64,
}

/// Model-specific structure kept in the JSON header; dense fp64 payloads
/// live in the binary array section.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelHeader {
    Mnb {
        classes: Vec<u8>,
        dim: usize,
        alpha: f64,
    },
    Logreg {
        classes: Vec<u8>,
        dim: usize,
        iterations: usize,
    },
    Lsvc {
        classes: Vec<u8>,
        dim: usize,
        machines: usize,
    },
    SvmRbf {
        classes: Vec<u8>,
        dim: usize,
        gamma: f64,
        machines: Vec<SvmMachineHeader>,
    },
    Dtree(crate::classic::TreeModel),
    Rforest(crate::classic::ForestModel),
    Mlp {
        classes: Vec<u8>,
        spec: neural::MlpSpec,
        meta: TrainMeta,
    },
    CnnLstm {
        spec: neural::ModelSpec,
        meta: TrainMeta,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: ModelKindName,
    scheme: Scheme,
    featurizer: Featurizer,
    pad_id: usize,
    oov_id: usize,
    vocab: BTreeMap<String, usize>,
    max_len: usize,
    min_freq: usize,
    tfidf_documents: Option<usize>,
    seed: u64,
    config_digest: String,
    model: ModelHeader,
    arrays: Vec<ArraySpec>,
}

/// Named fp64 arrays for the binary section.
struct ArrayBag {
    entries: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl ArrayBag {
    fn new() -> ArrayBag {
        ArrayBag {
            entries: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push((name.to_string(), shape, data));
    }

    fn push_tensor(&mut self, name: &str, t: &Tensor) {
        self.push(name, t.shape().to_vec(), t.data().to_vec());
    }

    fn specs(&self) -> Vec<ArraySpec> {
        self.entries
            .iter()
            .map(|(name, shape, _)| ArraySpec {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect()
    }
}

/// Reader-side view over the decoded arrays.
struct ArrayMap {
    map: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
}

impl ArrayMap {
    fn take(&mut self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        self.map
            .remove(name)
            .ok_or_else(|| Error::Model(format!("model file is missing array {name:?}")))
    }

    fn take_tensor(&mut self, name: &str) -> Result<Tensor> {
        let (shape, data) = self.take(name)?;
        Ok(Tensor::from_vec(&shape, data))
    }

    fn take_vec(&mut self, name: &str) -> Result<Vec<f64>> {
        Ok(self.take(name)?.1)
    }
}

fn sparse_arrays(bag: &mut ArrayBag, prefix: &str, vectors: &[SparseVector]) {
    let mut offsets = Vec::with_capacity(vectors.len() + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    offsets.push(0.0);
    for v in vectors {
        indices.extend(v.indices.iter().map(|&i| i as f64));
        values.extend_from_slice(&v.values);
        offsets.push(indices.len() as f64);
    }
    bag.push(&format!("{prefix}_offsets"), vec![offsets.len()], offsets);
    bag.push(&format!("{prefix}_indices"), vec![indices.len()], indices);
    bag.push(&format!("{prefix}_values"), vec![values.len()], values);
}

fn sparse_from_arrays(
    arrays: &mut ArrayMap,
    prefix: &str,
    dim: usize,
) -> Result<Vec<SparseVector>> {
    let offsets = arrays.take_vec(&format!("{prefix}_offsets"))?;
    let indices = arrays.take_vec(&format!("{prefix}_indices"))?;
    let values = arrays.take_vec(&format!("{prefix}_values"))?;
    let mut out = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (a, b) = (w[0] as usize, w[1] as usize);
        out.push(SparseVector::new(
            indices[a..b].iter().map(|&i| i as usize).collect(),
            values[a..b].to_vec(),
            dim,
        ));
    }
    Ok(out)
}

fn encode_model(model: &PipelineModel) -> (ModelHeader, ArrayBag) {
    let mut bag = ArrayBag::new();
    let header = match model {
        PipelineModel::Neural(m) => {
            for (name, tensor) in neural::PARAM_NAMES.iter().zip(&m.params) {
                bag.push_tensor(name, tensor);
            }
            ModelHeader::CnnLstm {
                spec: m.spec,
                meta: m.meta.clone(),
            }
        }
        PipelineModel::Classic(classic) => match classic {
            ClassifierModel::Mnb(m) => {
                bag.push("log_prior", vec![m.log_prior.len()], m.log_prior.clone());
                bag.push(
                    "log_likelihood",
                    vec![m.classes.len(), m.dim],
                    m.log_likelihood.concat(),
                );
                ModelHeader::Mnb {
                    classes: m.classes.clone(),
                    dim: m.dim,
                    alpha: m.alpha,
                }
            }
            ClassifierModel::LogReg(m) => {
                bag.push("weights", vec![m.classes.len(), m.dim], m.weights.clone());
                bag.push("bias", vec![m.bias.len()], m.bias.clone());
                ModelHeader::Logreg {
                    classes: m.classes.clone(),
                    dim: m.dim,
                    iterations: m.iterations,
                }
            }
            ClassifierModel::Lsvc(m) => {
                bag.push("weights", vec![m.weights.len(), m.dim], m.weights.concat());
                bag.push("bias", vec![m.bias.len()], m.bias.clone());
                ModelHeader::Lsvc {
                    classes: m.classes.clone(),
                    dim: m.dim,
                    machines: m.weights.len(),
                }
            }
            ClassifierModel::SvmRbf(m) => {
                let mut machines = Vec::new();
                for (i, machine) in m.machines.iter().enumerate() {
                    let prefix = format!("svm{i}");
                    bag.push(
                        &format!("{prefix}_coef"),
                        vec![machine.coef.len()],
                        machine.coef.clone(),
                    );
                    sparse_arrays(&mut bag, &format!("{prefix}_sv"), &machine.support);
                    machines.push(SvmMachineHeader {
                        n_support: machine.support.len(),
                        bias: machine.bias,
                    });
                }
                ModelHeader::SvmRbf {
                    classes: m.classes.clone(),
                    dim: m.dim,
                    gamma: m.gamma,
                    machines,
                }
            }
            ClassifierModel::DTree(m) => ModelHeader::Dtree(m.clone()),
            ClassifierModel::RForest(m) => ModelHeader::Rforest(m.clone()),
            ClassifierModel::Mlp(m) => {
                for (name, tensor) in neural::MLP_PARAM_NAMES.iter().zip(&m.model.params) {
                    bag.push_tensor(name, tensor);
                }
                ModelHeader::Mlp {
                    classes: m.classes.clone(),
                    spec: m.model.spec,
                    meta: m.model.meta.clone(),
                }
            }
        },
    };
    (header, bag)
}

fn decode_model(header: ModelHeader, arrays: &mut ArrayMap) -> Result<PipelineModel> {
    Ok(match header {
        ModelHeader::CnnLstm { spec, meta } => {
            let params = neural::PARAM_NAMES
                .iter()
                .map(|name| arrays.take_tensor(name))
                .collect::<Result<Vec<_>>>()?;
            PipelineModel::Neural(TrainedModel { spec, params, meta })
        }
        ModelHeader::Mnb {
            classes,
            dim,
            alpha,
        } => {
            let log_prior = arrays.take_vec("log_prior")?;
            let (shape, flat) = arrays.take("log_likelihood")?;
            if shape != vec![classes.len(), dim] {
                return Err(Error::Model("log_likelihood shape mismatch".into()));
            }
            let log_likelihood = flat.chunks_exact(dim).map(<[f64]>::to_vec).collect();
            PipelineModel::Classic(ClassifierModel::Mnb(crate::classic::MnbModel {
                classes,
                dim,
                alpha,
                log_prior,
                log_likelihood,
            }))
        }
        ModelHeader::Logreg {
            classes,
            dim,
            iterations,
        } => {
            let weights = arrays.take_vec("weights")?;
            let bias = arrays.take_vec("bias")?;
            PipelineModel::Classic(ClassifierModel::LogReg(crate::classic::LogRegModel {
                classes,
                dim,
                weights,
                bias,
                iterations,
            }))
        }
        ModelHeader::Lsvc {
            classes,
            dim,
            machines,
        } => {
            let flat = arrays.take_vec("weights")?;
            let bias = arrays.take_vec("bias")?;
            if machines == 0 || flat.len() != machines * dim {
                return Err(Error::Model("lsvc weight shape mismatch".into()));
            }
            let weights = flat.chunks_exact(dim).map(<[f64]>::to_vec).collect();
            PipelineModel::Classic(ClassifierModel::Lsvc(crate::classic::LsvcModel {
                classes,
                dim,
                weights,
                bias,
            }))
        }
        ModelHeader::SvmRbf {
            classes,
            dim,
            gamma,
            machines,
        } => {
            let mut decoded = Vec::with_capacity(machines.len());
            for (i, m) in machines.iter().enumerate() {
                let prefix = format!("svm{i}");
                let coef = arrays.take_vec(&format!("{prefix}_coef"))?;
                let support = sparse_from_arrays(arrays, &format!("{prefix}_sv"), dim)?;
                if support.len() != m.n_support || coef.len() != m.n_support {
                    return Err(Error::Model("support vector count mismatch".into()));
                }
                decoded.push(crate::classic::svm::SvmMachine {
                    support,
                    coef,
                    bias: m.bias,
                });
            }
            PipelineModel::Classic(ClassifierModel::SvmRbf(crate::classic::SvmRbfModel {
                classes,
                dim,
                gamma,
                machines: decoded,
            }))
        }
        ModelHeader::Dtree(m) => PipelineModel::Classic(ClassifierModel::DTree(m)),
        ModelHeader::Rforest(m) => PipelineModel::Classic(ClassifierModel::RForest(m)),
        ModelHeader::Mlp {
            classes,
            spec,
            meta,
        } => {
            let params = neural::MLP_PARAM_NAMES
                .iter()
                .map(|name| arrays.take_tensor(name))
                .collect::<Result<Vec<_>>>()?;
            PipelineModel::Classic(ClassifierModel::Mlp(MlpClassifier {
                classes,
                model: MlpModel { spec, params, meta },
            }))
        }
    })
}

/// Serialize a pipeline to the unified model format.
pub fn save_pipeline<P: AsRef<Path>>(pipeline: &Pipeline, path: P) -> Result<()> {
    let (model_header, bag) = encode_model(&pipeline.model);
    let header = Header {
        kind: pipeline.kind,
        scheme: pipeline.scheme,
        featurizer: pipeline.featurizer,
        pad_id: crate::textprep::PAD_ID,
        oov_id: crate::textprep::OOV_ID,
        vocab: pipeline.vocab.token_map().clone(),
        max_len: pipeline.max_len,
        min_freq: pipeline.min_freq,
        tfidf_documents: pipeline.tfidf.as_ref().map(|t| t.num_documents),
        seed: pipeline.seed,
        config_digest: pipeline.config_digest.clone(),
        model: model_header,
        arrays: {
            let mut specs = bag.specs();
            if let Some(tfidf) = &pipeline.tfidf {
                specs.push(ArraySpec {
                    name: "tfidf_idf".to_string(),
                    shape: vec![tfidf.idf.len()],
                });
            }
            specs
        },
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::Model(format!("header encode: {e}")))?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(header_json.len() as u64).to_le_bytes())?;
    out.write_all(&header_json)?;
    for (_, _, data) in &bag.entries {
        for v in data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    if let Some(tfidf) = &pipeline.tfidf {
        for v in &tfidf.idf {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Load a pipeline, rejecting unknown magic or version.
pub fn load_pipeline<P: AsRef<Path>>(path: P) -> Result<Pipeline> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path.as_ref())?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Model("not a model file (bad magic)".into()));
    }
    let mut version_bytes = [0u8; 4];
    file.read_exact(&mut version_bytes)?;
    let version = u32::from_le_bytes(version_bytes);
    if version != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| Error::Model(format!("corrupted model header: {e}")))?;

    let mut map = BTreeMap::new();
    for spec in &header.arrays {
        let numel: usize = spec.shape.iter().product();
        let mut buf = vec![0u8; numel * 8];
        file.read_exact(&mut buf).map_err(|_| {
            Error::Model(format!(
                "model file truncated reading array {:?}",
                spec.name
            ))
        })?;
        let data: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        map.insert(spec.name.clone(), (spec.shape.clone(), data));
    }
    let mut arrays = ArrayMap { map };

    let tfidf = match header.tfidf_documents {
        Some(n) => Some(TfidfModel {
            idf: arrays.take_vec("tfidf_idf")?,
            num_documents: n,
        }),
        None => None,
    };
    let model = decode_model(header.model, &mut arrays)?;
    let vocab = Vocabulary::from_ids(header.vocab)?;

    Ok(Pipeline {
        kind: header.kind,
        scheme: header.scheme,
        featurizer: header.featurizer,
        vocab,
        max_len: header.max_len,
        min_freq: header.min_freq,
        tfidf,
        model,
        seed: header.seed,
        config_digest: header.config_digest,
    })
}

/// FNV-1a digest of a canonical config string, hex-encoded.
pub fn config_digest(parts: &[&str]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in part.as_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::{train_mnb, train_svm_rbf, SvmConfig};
    use crate::corpus::synth_corpus;

    fn mnb_pipeline() -> Pipeline {
        let corpus = synth_corpus(60, 3, [0.25, 0.25, 0.25, 0.25]).unwrap();
        let tokens: Vec<Vec<String>> = corpus
            .documents
            .iter()
            .map(|d| tokenize(&clean(&d.body_text)))
            .collect();
        let labels: Vec<u8> = corpus.documents.iter().map(|d| d.label.get()).collect();
        let vocab = Vocabulary::build(&tokens, 1);
        let counts: Vec<SparseVector> = tokens.iter().map(|t| count_vector(&vocab, t)).collect();
        let model = train_mnb(&counts, &labels, 1.0).unwrap();
        Pipeline {
            kind: ModelKindName::Mnb,
            scheme: Scheme::FourClass,
            featurizer: Featurizer::Counts,
            vocab,
            max_len: 200,
            min_freq: 1,
            tfidf: None,
            model: PipelineModel::Classic(ClassifierModel::Mnb(model)),
            seed: 3,
            config_digest: config_digest(&["test"]),
        }
    }

    #[test]
    fn roundtrip_preserves_predictions_exactly() {
        let pipeline = mnb_pipeline();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tria");
        save_pipeline(&pipeline, &path).unwrap();
        let loaded = load_pipeline(&path).unwrap();

        let corpus = synth_corpus(30, 99, [0.25, 0.25, 0.25, 0.25]).unwrap();
        for doc in &corpus.documents {
            let (a_label, a_scores) = pipeline.predict_text(&doc.body_text).unwrap();
            let (b_label, b_scores) = loaded.predict_text(&doc.body_text).unwrap();
            assert_eq!(a_label, b_label);
            for ((_, x), (_, y)) in a_scores.iter().zip(&b_scores) {
                assert_eq!(x.to_bits(), y.to_bits(), "score changed across round-trip");
            }
        }
    }

    #[test]
    fn svm_pipeline_roundtrip() {
        let x = vec![
            SparseVector::new(vec![], vec![], 2),
            SparseVector::new(vec![0, 1], vec![1.0, 1.0], 2),
            SparseVector::new(vec![1], vec![1.0], 2),
            SparseVector::new(vec![0], vec![1.0], 2),
        ];
        let y = vec![1, 1, 2, 2];
        let model = train_svm_rbf(&x, &y, SvmConfig::with_seed(2)).unwrap();
        let docs = vec![vec!["a".to_string(), "b".to_string()]];
        let vocab = Vocabulary::build(&docs, 1);
        let pipeline = Pipeline {
            kind: ModelKindName::SvmRbf,
            scheme: Scheme::TwoClass,
            featurizer: Featurizer::Tfidf,
            vocab: vocab.clone(),
            max_len: 10,
            min_freq: 1,
            tfidf: Some(TfidfModel::fit(&vocab, &docs).unwrap()),
            model: PipelineModel::Classic(ClassifierModel::SvmRbf(model.clone())),
            seed: 2,
            config_digest: config_digest(&["svm"]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("svm.tria");
        save_pipeline(&pipeline, &path).unwrap();
        let loaded = load_pipeline(&path).unwrap();
        match loaded.model {
            PipelineModel::Classic(ClassifierModel::SvmRbf(m)) => assert_eq!(m, model),
            _ => panic!("wrong model kind after load"),
        }
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.tria");
        std::fs::write(&path, b"JUNKxxxxxxxxxxxxxxxx").unwrap();
        assert!(load_pipeline(&path).is_err());

        let pipeline = mnb_pipeline();
        let good = dir.path().join("good.tria");
        save_pipeline(&pipeline, &good).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes[4] = 99; // version
        let bad = dir.path().join("bad.tria");
        std::fs::write(&bad, &bytes).unwrap();
        let err = load_pipeline(&bad).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn empty_document_is_error() {
        let pipeline = mnb_pipeline();
        let err = pipeline.predict_text("   ").unwrap_err();
        assert!(err.to_string().contains("empty document"));
    }

    #[test]
    fn save_is_byte_deterministic() {
        let pipeline = mnb_pipeline();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.tria");
        let b = dir.path().join("b.tria");
        save_pipeline(&pipeline, &a).unwrap();
        save_pipeline(&pipeline, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
