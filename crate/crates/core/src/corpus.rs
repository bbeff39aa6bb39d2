//! Annotated paired corpora: reference vs. generated paragraphs with
//! per-sentence annotations of the generated side.
//!
//! The on-disk format is JSONL, one record per line:
//!
//! ```text
//! { "schema": "embdyn-corpus/1", "id": "...", "concept": "...",
//!   "reference": { "sentences": [..], "embeddings": [[..], ..] },
//!   "generated": { "sentences": [..], "embeddings": [[..], ..],
//!                  "annotations": ["major_inaccurate" | "minor_inaccurate" | "accurate", ..] },
//!   "paragraph_label": ".." }            // optional, cross-checked only
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dmd::EmbeddingMatrix;
use crate::linalg::RealMatrix;

pub const SCHEMA_VERSION: &str = "embdyn-corpus/1";

/// Sentence-level annotation, ordered by severity (`Accurate` lowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    Accurate,
    MinorInaccurate,
    MajorInaccurate,
}

impl Annotation {
    /// Most severe first, the order used in reports.
    pub const ALL: [Annotation; 3] = [
        Annotation::MajorInaccurate,
        Annotation::MinorInaccurate,
        Annotation::Accurate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Annotation::Accurate => "accurate",
            Annotation::MinorInaccurate => "minor_inaccurate",
            Annotation::MajorInaccurate => "major_inaccurate",
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot aggregate an empty annotation list")]
pub struct EmptyAnnotations;

/// Paragraph label: the most frequent annotation, ties broken toward the
/// most severe of the tied annotations.
pub fn aggregate_label(annotations: &[Annotation]) -> Result<Annotation, EmptyAnnotations> {
    let mut counts: BTreeMap<Annotation, usize> = BTreeMap::new();
    for a in annotations {
        *counts.entry(*a).or_default() += 1;
    }
    // BTreeMap iterates by increasing severity, so max_by_key's
    // last-maximum rule picks the most severe among ties.
    counts
        .into_iter()
        .max_by_key(|&(_, count)| count)
        .map(|(label, _)| label)
        .ok_or(EmptyAnnotations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSample {
    pub id: String,
    pub concept: String,
    pub reference_sentences: Vec<String>,
    pub reference_embeddings: EmbeddingMatrix,
    pub generated_sentences: Vec<String>,
    pub generated_embeddings: EmbeddingMatrix,
    pub sentence_annotations: Vec<Annotation>,
    pub paragraph_label: Annotation,
}

impl AnnotatedSample {
    pub fn dim(&self) -> usize {
        self.reference_embeddings.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSide {
    pub sentences: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSide {
    pub sentences: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    pub annotations: Vec<Annotation>,
}

/// Wire form of one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub schema: String,
    pub id: String,
    pub concept: String,
    pub reference: ReferenceSide,
    pub generated: GeneratedSide,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraph_label: Option<Annotation>,
}

impl From<&AnnotatedSample> for CorpusRecord {
    fn from(s: &AnnotatedSample) -> Self {
        let rows = |e: &EmbeddingMatrix| (0..e.sentences()).map(|p| e.sentence_vector(p)).collect();
        CorpusRecord {
            schema: SCHEMA_VERSION.to_string(),
            id: s.id.clone(),
            concept: s.concept.clone(),
            reference: ReferenceSide {
                sentences: s.reference_sentences.clone(),
                embeddings: rows(&s.reference_embeddings),
            },
            generated: GeneratedSide {
                sentences: s.generated_sentences.clone(),
                embeddings: rows(&s.generated_embeddings),
                annotations: s.sentence_annotations.clone(),
            },
            paragraph_label: Some(s.paragraph_label),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("failed to read corpus: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: unsupported schema '{found}' (expected '{SCHEMA_VERSION}')")]
    SchemaVersion { line: usize, found: String },
    #[error("empty corpus")]
    Empty,
    #[error(
        "inconsistent embedding dimension: sample '{id}' has dim {found}, expected {expected}"
    )]
    MixedDimension {
        id: String,
        expected: usize,
        found: usize,
    },
}

/// A record that could not be parsed or violates the record invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// A well-formed record excluded from analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipReport {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

impl fmt::Display for SkipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} ({}): {}", self.line, self.id, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMismatch {
    pub line: usize,
    pub id: String,
    pub stored: Annotation,
    pub derived: Annotation,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub samples: Vec<AnnotatedSample>,
    pub skips: Vec<SkipReport>,
    pub errors: Vec<RecordError>,
    pub label_mismatches: Vec<LabelMismatch>,
    /// Non-blank lines seen.
    pub records: usize,
}

pub const TOO_FEW_SENTENCES: &str = "too few sentences";

pub fn load_corpus(path: &Path) -> Result<LoadReport, CorpusError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CorpusError::NotFound(path.to_path_buf()),
        _ => CorpusError::Io(e),
    })?;
    read_corpus(BufReader::new(file))
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<LoadReport, CorpusError> {
    let mut report = LoadReport::default();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.records += 1;

        let value: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                report.errors.push(RecordError {
                    line: line_no,
                    message: format!("invalid JSON: {e}"),
                });
                continue;
            }
        };
        match value.get("schema") {
            Some(Value::String(s)) if s == SCHEMA_VERSION => {}
            Some(Value::String(s)) => {
                return Err(CorpusError::SchemaVersion {
                    line: line_no,
                    found: s.clone(),
                })
            }
            Some(_) => {
                report.errors.push(RecordError {
                    line: line_no,
                    message: "field 'schema' must be a string".into(),
                });
                continue;
            }
            None => {
                report.errors.push(RecordError {
                    line: line_no,
                    message: "missing required field 'schema'".into(),
                });
                continue;
            }
        }
        let record: CorpusRecord = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RecordError {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match sample_from_record(record) {
            Ok(Conversion::Sample(sample, stored)) => {
                if let Some(stored) = stored.filter(|s| *s != sample.paragraph_label) {
                    report.label_mismatches.push(LabelMismatch {
                        line: line_no,
                        id: sample.id.clone(),
                        stored,
                        derived: sample.paragraph_label,
                    });
                }
                report.samples.push(sample);
            }
            Ok(Conversion::Skip { id, reason }) => report.skips.push(SkipReport {
                line: line_no,
                id,
                reason,
            }),
            Err(message) => report.errors.push(RecordError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(report)
}

enum Conversion {
    Sample(AnnotatedSample, Option<Annotation>),
    Skip { id: String, reason: String },
}

fn sample_from_record(r: CorpusRecord) -> Result<Conversion, String> {
    check_side("reference", &r.reference.sentences, &r.reference.embeddings)?;
    check_side("generated", &r.generated.sentences, &r.generated.embeddings)?;
    if r.generated.annotations.len() != r.generated.sentences.len() {
        return Err(format!(
            "generated: {} annotations for {} sentences",
            r.generated.annotations.len(),
            r.generated.sentences.len()
        ));
    }
    let ref_dim = r.reference.embeddings.first().map(Vec::len);
    let gen_dim = r.generated.embeddings.first().map(Vec::len);
    if let (Some(a), Some(b)) = (ref_dim, gen_dim) {
        if a != b {
            return Err(format!("reference dim {a} differs from generated dim {b}"));
        }
    }

    let shortest = r.reference.sentences.len().min(r.generated.sentences.len());
    if shortest < 2 {
        return Ok(Conversion::Skip {
            id: r.id,
            reason: format!("{TOO_FEW_SENTENCES} ({shortest})"),
        });
    }

    let paragraph_label = aggregate_label(&r.generated.annotations).map_err(|e| e.to_string())?;
    let reference_embeddings = embedding_matrix("reference", &r.reference.embeddings)?;
    let generated_embeddings = embedding_matrix("generated", &r.generated.embeddings)?;
    Ok(Conversion::Sample(
        AnnotatedSample {
            id: r.id,
            concept: r.concept,
            reference_sentences: r.reference.sentences,
            reference_embeddings,
            generated_sentences: r.generated.sentences,
            generated_embeddings,
            sentence_annotations: r.generated.annotations,
            paragraph_label,
        },
        r.paragraph_label,
    ))
}

fn check_side(side: &str, sentences: &[String], embeddings: &[Vec<f64>]) -> Result<(), String> {
    if sentences.len() != embeddings.len() {
        return Err(format!(
            "{side}: {} embeddings for {} sentences",
            embeddings.len(),
            sentences.len()
        ));
    }
    if let Some(first) = embeddings.first() {
        if first.is_empty() {
            return Err(format!("{side}: empty embedding vector"));
        }
        if let Some(i) = embeddings.iter().position(|row| row.len() != first.len()) {
            return Err(format!(
                "{side}: embedding {i} has length {}, expected {}",
                embeddings[i].len(),
                first.len()
            ));
        }
    }
    for (i, row) in embeddings.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(format!("{side}: non-finite embedding at sentence {i}"));
        }
    }
    Ok(())
}

fn embedding_matrix(side: &str, rows: &[Vec<f64>]) -> Result<EmbeddingMatrix, String> {
    RealMatrix::from_columns(rows)
        .map_err(|e| e.to_string())
        .and_then(|m| EmbeddingMatrix::new(m).map_err(|e| e.to_string()))
        .map_err(|e| format!("{side}: {e}"))
}

/// Writes samples in the JSONL wire format, one record per line.
pub fn write_corpus<W: Write>(samples: &[AnnotatedSample], mut out: W) -> io::Result<()> {
    for s in samples {
        let line = serde_json::to_string(&CorpusRecord::from(s))?;
        writeln!(out, "{line}")?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub sample_count: usize,
    pub label_counts: BTreeMap<Annotation, usize>,
    /// Histogram: sentence count → number of paragraphs.
    pub reference_sentence_counts: BTreeMap<usize, usize>,
    pub generated_sentence_counts: BTreeMap<usize, usize>,
    pub dim: usize,
}

pub fn validate(samples: &[AnnotatedSample]) -> Result<CorpusStats, CorpusError> {
    let first = samples.first().ok_or(CorpusError::Empty)?;
    let dim = first.dim();
    let mut stats = CorpusStats {
        sample_count: samples.len(),
        label_counts: Annotation::ALL.iter().map(|a| (*a, 0)).collect(),
        reference_sentence_counts: BTreeMap::new(),
        generated_sentence_counts: BTreeMap::new(),
        dim,
    };
    for s in samples {
        for found in [s.reference_embeddings.dim(), s.generated_embeddings.dim()] {
            if found != dim {
                return Err(CorpusError::MixedDimension {
                    id: s.id.clone(),
                    expected: dim,
                    found,
                });
            }
        }
        *stats.label_counts.entry(s.paragraph_label).or_default() += 1;
        *stats
            .reference_sentence_counts
            .entry(s.reference_embeddings.sentences())
            .or_default() += 1;
        *stats
            .generated_sentence_counts
            .entry(s.generated_embeddings.sentences())
            .or_default() += 1;
    }
    Ok(stats)
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} samples, dim {}", self.sample_count, self.dim)?;
        for label in Annotation::ALL {
            writeln!(
                f,
                "  {label}: {}",
                self.label_counts.get(&label).unwrap_or(&0)
            )?;
        }
        let hist = |h: &BTreeMap<usize, usize>| {
            h.iter()
                .map(|(k, v)| format!("{k}:{v}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            f,
            "  reference sentences: {}",
            hist(&self.reference_sentence_counts)
        )?;
        write!(
            f,
            "  generated sentences: {}",
            hist(&self.generated_sentence_counts)
        )
    }
}
