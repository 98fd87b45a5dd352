//! Labeled report corpora: loading, validation, synthesis, body extraction,
//! and merging the four-level severity scheme down to the two-level
//! emergency / non-emergency scheme.
//!
//! The on-disk format is JSON Lines, one object per record with keys `id`,
//! `text`, `label` (CSV with the same columns is also accepted). Severity
//! labels run 1 (extremely critical) through 4 (no identified risk).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Four-level severity annotation, 1 = extremely critical ... 4 = no risk.
///
/// Under the merged two-level scheme the same type carries 1 = emergency,
/// 2 = non-emergency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeverityLabel(u8);

impl SeverityLabel {
    pub fn new(value: u8) -> Result<SeverityLabel> {
        if (1..=4).contains(&value) {
            Ok(SeverityLabel(value))
        } else {
            Err(Error::Validation(format!(
                "severity label must be 1-4, got {value}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for SeverityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Label scheme a corpus is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FourClass,
    TwoClass,
}

impl Scheme {
    pub fn labels(self) -> &'static [u8] {
        match self {
            Scheme::FourClass => &[1, 2, 3, 4],
            Scheme::TwoClass => &[1, 2],
        }
    }

    pub fn num_classes(self) -> usize {
        self.labels().len()
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::FourClass => write!(f, "four_class"),
            Scheme::TwoClass => write!(f, "two_class"),
        }
    }
}

/// One patient record: raw text, extracted clinical body, and label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub body_text: String,
    pub label: SeverityLabel,
}

impl Document {
    pub fn new(id: String, raw_text: String, label: SeverityLabel) -> Document {
        let body_text = extract_body(&raw_text);
        Document {
            id,
            raw_text,
            body_text,
            label,
        }
    }
}

/// An ordered collection of documents under a declared label scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub documents: Vec<Document>,
    pub scheme: Scheme,
}

impl LabeledCorpus {
    pub fn new(documents: Vec<Document>, scheme: Scheme) -> Result<LabeledCorpus> {
        let corpus = LabeledCorpus { documents, scheme };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Check id uniqueness and that every label belongs to the scheme.
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::with_capacity(self.documents.len());
        for doc in &self.documents {
            if !ids.insert(doc.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate document id {:?}",
                    doc.id
                )));
            }
            if !self.scheme.labels().contains(&doc.label.get()) {
                return Err(Error::Validation(format!(
                    "label {} outside scheme {}",
                    doc.label, self.scheme
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Histogram of label values.
    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for doc in &self.documents {
            *counts.entry(doc.label.get()).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    text: String,
    label: u8,
}

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<CorpusFormat> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown corpus format {other:?} (expected jsonl or csv)"
            ))),
        }
    }
}

/// Load a labeled corpus from disk. Files always carry the four-level scheme.
pub fn load_corpus<P: AsRef<Path>>(path: P, format: CorpusFormat) -> Result<LabeledCorpus> {
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    match format {
        CorpusFormat::Jsonl => {
            for (idx, line) in reader.lines().enumerate() {
                let line_no = idx + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                let label = SeverityLabel::new(rec.label).map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                documents.push(Document::new(rec.id, rec.text, label));
            }
        }
        CorpusFormat::Csv => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(reader);
            for record in csv_reader.deserialize::<JsonRecord>() {
                let rec = record.map_err(|e| {
                    let line = e.position().map(|p| p.line() as usize).unwrap_or_default();
                    Error::Parse {
                        line,
                        msg: e.to_string(),
                    }
                })?;
                let label = SeverityLabel::new(rec.label)
                    .map_err(|e| Error::Validation(format!("record {:?}: {e}", rec.id)))?;
                documents.push(Document::new(rec.id, rec.text, label));
            }
        }
    }
    LabeledCorpus::new(documents, Scheme::FourClass)
}

/// Write a corpus as UTF-8, LF-terminated JSON Lines.
pub fn save_corpus<P: AsRef<Path>>(corpus: &LabeledCorpus, path: P) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    for doc in &corpus.documents {
        let rec = JsonRecord {
            id: doc.id.clone(),
            text: doc.raw_text.clone(),
            label: doc.label.get(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Validation(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Extract the clinical body from a raw record.
///
/// The body starts at the first line containing `CBCT`. Records without such
/// a line have their leading header lines (`Date:`, `Patient's name:`, or
/// lines beginning `Dear`) dropped instead; records with no header markers
/// at all are returned unchanged.
pub fn extract_body(raw_text: &str) -> String {
    let lines: Vec<&str> = raw_text.lines().collect();
    if let Some(pos) = lines.iter().position(|l| l.contains("CBCT")) {
        return lines[pos..].join("\n");
    }
    let mut start = 0;
    let mut dropped_header = false;
    while start < lines.len() {
        let t = lines[start].trim_start();
        let is_header =
            t.starts_with("Date:") || t.starts_with("Patient's name:") || t.starts_with("Dear");
        if is_header {
            dropped_header = true;
            start += 1;
        } else if dropped_header && t.is_empty() {
            start += 1;
        } else {
            break;
        }
    }
    if !dropped_header {
        return raw_text.to_string();
    }
    lines[start..].join("\n")
}

/// Merge the four-level scheme into the two-level one (1,2 -> 1; 3,4 -> 2).
pub fn merge_labels(corpus: &LabeledCorpus) -> Result<LabeledCorpus> {
    if corpus.scheme == Scheme::TwoClass {
        return Err(Error::Validation(
            "corpus is already in the two-class scheme".to_string(),
        ));
    }
    let documents = corpus
        .documents
        .iter()
        .map(|doc| {
            let merged = match doc.label.get() {
                1 | 2 => 1,
                _ => 2,
            };
            Document {
                label: SeverityLabel(merged),
                ..doc.clone()
            }
        })
        .collect();
    LabeledCorpus::new(documents, Scheme::TwoClass)
}

// --- Synthetic corpus generation ------------------------------------------
//
// The generator assembles records shaped like real CBCT report sheets: a
// few header lines, an opening line naming the imaged region, and a body
// built from finding phrases. Every finding phrase occurs on both sides of
// the emergency / non-emergency boundary -- affirmed in records of its own
// severity side and explicitly negated in records of the other -- with
// matched count distributions, so single-word statistics overlap heavily
// between classes while word order (the position of the negator) stays
// fully informative. A tunable fraction of records additionally carries a
// side-exclusive "tone" sentence, which is the honest bag-of-words signal
// that keeps the classes learnable for every model.

const OPENINGS: &[&str] = &[
    "CBCT image of the proposed area was prepared for the patient based on your order. As you see based on the images:",
    "CBCT image of the mandibular region was prepared for the patient who is a %AGE% yrs old man, based on your order. As you see based on the images:",
    "CBCT of the maxillary region was performed for the patient based on your request. As you see on the images:",
];

/// Findings typical of extremely critical records (severity 1).
const FINDINGS_TIER1: &[&str] = &[
    "a large malignant lesion with aggressive destruction of the cortex",
    "extensive invasion of the surrounding soft tissue",
    "an ill defined lesion with expansion of the buccal cortical plate",
    "perforation of the cortex with periosteal reaction",
];

/// Findings typical of critical but less urgent records (severity 2).
const FINDINGS_TIER2: &[&str] = &[
    "displacement of the adjacent roots by the impacted tooth",
    "loss of continuity of the palatal cortex",
    "resorption of the adjacent tooth",
    "displacement of the inferior alveolar nerve canal",
];

/// Minor findings (severity 3).
const FINDINGS_TIER3: &[&str] = &[
    "mild thinning of the lingual cortical plate",
    "direct contact of the tooth with the canal",
    "hypercementosis in the apical region of the tooth",
    "horizontal orientation of the second premolar tooth",
];

/// Normal or planning findings (severity 4).
const FINDINGS_TIER4: &[&str] = &[
    "normal bone height and width for implant placement",
    "a normal trabecular pattern throughout the region",
    "intact cortical borders of the canal",
    "normal pneumatization of the sinus floor",
];

/// Sentences with side-exclusive vocabulary, present in a fraction of
/// records; these carry the unigram-level class signal.
const TONE_SEVERE: &[&str] = &[
    "The appearance is highly suspicious and requires urgent attention.",
    "Aggressive periosteal reaction is also noted in this area.",
    "The margins are ill defined and worrisome.",
];

const TONE_MILD: &[&str] = &[
    "The overall appearance is unremarkable.",
    "Bone quality is adequate for implant planning.",
    "The periodontal condition appears stable.",
];

const FILLERS: &[&str] = &[
    "Axial and cross sectional views were reconstructed for evaluation.",
    "The patient is advised to consult the referring physician with these findings.",
    "Thanks for your consult regarding this patient.",
    "Further clinical correlation is recommended.",
];

/// Probability that a record carries its side's tone sentence.
const TONE_PROB: f64 = 0.7;
/// Probability that a record carries a neutral filler sentence.
const FILLER_PROB: f64 = 0.7;
/// Probability that an affirmed finding comes from the label's primary
/// tier (the remainder comes from the side's other tier).
const PRIMARY_TIER_PROB: f64 = 0.7;

fn severe_pool() -> Vec<&'static str> {
    FINDINGS_TIER1
        .iter()
        .chain(FINDINGS_TIER2)
        .copied()
        .collect()
}

fn mild_pool() -> Vec<&'static str> {
    FINDINGS_TIER3
        .iter()
        .chain(FINDINGS_TIER4)
        .copied()
        .collect()
}

/// The full finding pool a label's records affirm from (used by tests).
#[cfg(test)]
pub(crate) fn class_bank(label: u8) -> Vec<&'static str> {
    if label <= 2 {
        severe_pool()
    } else {
        mild_pool()
    }
}

fn strip_article(finding: &str) -> &str {
    finding
        .strip_prefix("a ")
        .or_else(|| finding.strip_prefix("an "))
        .unwrap_or(finding)
}

fn affirm(finding: &str, rng: &mut Rng) -> String {
    match rng.below(4) {
        0 => format!("There is {finding}."),
        1 => format!("{} is evident.", finding),
        2 => format!("{} is noted on the images.", finding),
        _ => format!("The images show {finding}."),
    }
}

fn negate(finding: &str, rng: &mut Rng) -> String {
    let bare = strip_article(finding);
    match rng.below(4) {
        0 => format!("There is no {bare}."),
        1 => format!("No {bare} is seen."),
        2 => format!("No {bare} is identified."),
        _ => format!("The images show no {bare}."),
    }
}

/// Draw one affirmed finding for a label, honoring the tier mixture.
fn draw_finding(label: u8, rng: &mut Rng) -> &'static str {
    let primary = rng.next_f64() < PRIMARY_TIER_PROB;
    let tier: &[&str] = match (label, primary) {
        (1, true) | (2, false) => FINDINGS_TIER1,
        (1, false) | (2, true) => FINDINGS_TIER2,
        (3, true) | (4, false) => FINDINGS_TIER3,
        _ => FINDINGS_TIER4,
    };
    rng.choose(tier)
}

/// Largest-remainder allocation of `n` items over `weights`.
///
/// Fractional remainders break ties toward the lower index, so the result
/// is exact on exact multiples and deterministic otherwise.
pub fn largest_remainder_counts(n: usize, weights: &[f64; 4]) -> [usize; 4] {
    let mut counts = [0usize; 4];
    let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut assigned = 0;
    for (i, &w) in weights.iter().enumerate() {
        let quota = n as f64 * w;
        let base = quota.floor() as usize;
        counts[i] = base;
        assigned += base;
        fractions.push((i, quota - base as f64));
    }
    fractions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in fractions.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

fn synth_document(index: usize, label: u8, rng: &mut Rng) -> Document {
    let month = 1 + rng.below(12);
    let day = 1 + rng.below(28);
    let age = 18 + rng.below(60);
    let title = if rng.next_f64() < 0.5 { "Mr." } else { "Mrs." };

    let opening = rng.choose(OPENINGS).replace("%AGE%", &age.to_string());
    let severe = label <= 2;

    // Affirmed findings from the record's own side, negated findings from
    // the other side; both counts are drawn from the same {1, 2, 3}
    // distribution so word counts alone barely separate the sides.
    let mut body_sentences: Vec<String> = Vec::new();
    let affirm_count = 1 + rng.below(3);
    for _ in 0..affirm_count {
        let finding = draw_finding(label, rng);
        body_sentences.push(affirm(finding, rng));
    }
    let negate_count = 1 + rng.below(3);
    let opposite = if severe { mild_pool() } else { severe_pool() };
    for _ in 0..negate_count {
        body_sentences.push(negate(rng.choose(&opposite), rng));
    }
    if rng.next_f64() < TONE_PROB {
        let tone = if severe { TONE_SEVERE } else { TONE_MILD };
        body_sentences.push(rng.choose(tone).to_string());
    }
    if rng.next_f64() < FILLER_PROB {
        body_sentences.push(rng.choose(FILLERS).to_string());
    }
    rng.shuffle(&mut body_sentences);

    let raw_text = format!(
        "Date: 97.{month}.{day}\n\nPatient's name: {title}\n\nDear Dr.\n\n{opening}\n{}",
        body_sentences.join(" ")
    );
    Document::new(format!("synth-{index:05}"), raw_text, SeverityLabel(label))
}

/// Generate a deterministic synthetic four-class corpus.
///
/// Per-class counts follow largest-remainder allocation of `class_weights`;
/// each document mixes phrases from its class bank with shared fillers and
/// occasional negated findings from the opposite severity side.
pub fn synth_corpus(n: usize, seed: u64, class_weights: [f64; 4]) -> Result<LabeledCorpus> {
    if n < 4 {
        return Err(Error::Config(format!(
            "synthetic corpus needs n >= 4, got {n}"
        )));
    }
    if class_weights.iter().any(|&w| w < 0.0) {
        return Err(Error::Config(
            "class weights must be non-negative".to_string(),
        ));
    }
    let total: f64 = class_weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "class weights must sum to 1 (got {total})"
        )));
    }

    let counts = largest_remainder_counts(n, &class_weights);
    let mut labels: Vec<u8> = Vec::with_capacity(n);
    for (class_idx, &count) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(class_idx as u8 + 1, count));
    }
    let mut label_rng = Rng::derived(seed, "corpus.synth.labels", 0);
    label_rng.shuffle(&mut labels);

    let documents = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut doc_rng = Rng::derived(seed, "corpus.synth.doc", i as u64);
            synth_document(i, label, &mut doc_rng)
        })
        .collect();
    LabeledCorpus::new(documents, Scheme::FourClass)
}
