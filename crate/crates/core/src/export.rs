//! Tabular exports of the analysis results.
//!
//! Column layouts (CSV header row; JSON uses the same names as record keys):
//!
//! | file                | columns |
//! |---------------------|---------|
//! | `spectrum`          | source,label,index,mean,std,count |
//! | `eigs`              | source,label,sample_id,re,im,modulus,is_complex,circle_class |
//! | `eigs_summary`      | source,label,n_samples,n_skipped,n_eigs,complex_fraction,inside_fraction,on_fraction,outside_fraction,max_modulus |
//! | `dynamics`          | source,label,sample_id,mode_index,sentence_index,magnitude,normalized_magnitude |
//! | `dynamics_envelope` | source,label,sentence_index,curves,q10,q50,q90 |
//!
//! Floats use Rust's shortest round-trip formatting. An empty
//! `normalized_magnitude` (JSON `null`) marks a curve whose initial
//! amplitude was too small to normalize.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Source;
use crate::analysis::{DynamicsBundle, EigenCloud, GroupKey, SpectrumSummary};
use crate::corpus::Annotation;
use crate::dmd::EigenKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    #[default]
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(format!("expected 'csv' or 'json', got '{s}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot write {}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// A row of one of the export tables.
pub trait TableRow: Serialize {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub source: Source,
    pub label: Annotation,
    pub index: usize,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl TableRow for SpectrumRow {
    const HEADER: &'static [&'static str] = &["source", "label", "index", "mean", "std", "count"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.source.to_string(),
            self.label.to_string(),
            self.index.to_string(),
            self.mean.to_string(),
            self.std.to_string(),
            self.count.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigRow {
    pub source: Source,
    pub label: Annotation,
    pub sample_id: String,
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub is_complex: bool,
    pub circle_class: &'static str,
}

impl TableRow for EigRow {
    const HEADER: &'static [&'static str] = &[
        "source",
        "label",
        "sample_id",
        "re",
        "im",
        "modulus",
        "is_complex",
        "circle_class",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.source.to_string(),
            self.label.to_string(),
            self.sample_id.clone(),
            self.re.to_string(),
            self.im.to_string(),
            self.modulus.to_string(),
            self.is_complex.to_string(),
            self.circle_class.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigSummaryRow {
    pub source: Source,
    pub label: Annotation,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub n_eigs: usize,
    pub complex_fraction: f64,
    pub inside_fraction: f64,
    pub on_fraction: f64,
    pub outside_fraction: f64,
    pub max_modulus: f64,
}

impl TableRow for EigSummaryRow {
    const HEADER: &'static [&'static str] = &[
        "source",
        "label",
        "n_samples",
        "n_skipped",
        "n_eigs",
        "complex_fraction",
        "inside_fraction",
        "on_fraction",
        "outside_fraction",
        "max_modulus",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.source.to_string(),
            self.label.to_string(),
            self.n_samples.to_string(),
            self.n_skipped.to_string(),
            self.n_eigs.to_string(),
            self.complex_fraction.to_string(),
            self.inside_fraction.to_string(),
            self.on_fraction.to_string(),
            self.outside_fraction.to_string(),
            self.max_modulus.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsRow {
    pub source: Source,
    pub label: Annotation,
    pub sample_id: String,
    pub mode_index: usize,
    pub sentence_index: usize,
    pub magnitude: f64,
    pub normalized_magnitude: Option<f64>,
}

impl TableRow for DynamicsRow {
    const HEADER: &'static [&'static str] = &[
        "source",
        "label",
        "sample_id",
        "mode_index",
        "sentence_index",
        "magnitude",
        "normalized_magnitude",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.source.to_string(),
            self.label.to_string(),
            self.sample_id.clone(),
            self.mode_index.to_string(),
            self.sentence_index.to_string(),
            self.magnitude.to_string(),
            opt(self.normalized_magnitude),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub source: Source,
    pub label: Annotation,
    pub sentence_index: usize,
    pub curves: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

impl TableRow for EnvelopeRow {
    const HEADER: &'static [&'static str] = &[
        "source",
        "label",
        "sentence_index",
        "curves",
        "q10",
        "q50",
        "q90",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.source.to_string(),
            self.label.to_string(),
            self.sentence_index.to_string(),
            self.curves.to_string(),
            self.q10.to_string(),
            self.q50.to_string(),
            self.q90.to_string(),
        ]
    }
}

pub fn spectrum_rows(groups: &[(GroupKey, SpectrumSummary)]) -> Vec<SpectrumRow> {
    groups
        .iter()
        .flat_map(|(key, summary)| {
            summary.entries.iter().map(move |e| SpectrumRow {
                source: key.source,
                label: key.label,
                index: e.index,
                mean: e.mean,
                std: e.std,
                count: e.count,
            })
        })
        .collect()
}

pub fn eig_rows(groups: &[(GroupKey, EigenCloud)]) -> Vec<EigRow> {
    groups
        .iter()
        .flat_map(|(key, cloud)| {
            cloud.points.iter().map(move |p| EigRow {
                source: key.source,
                label: key.label,
                sample_id: p.sample_id.clone(),
                re: p.value.re,
                im: p.value.im,
                modulus: p.value.norm(),
                is_complex: p.class.kind == EigenKind::Complex,
                circle_class: p.class.circle.as_str(),
            })
        })
        .collect()
}

pub fn eig_summary_rows(groups: &[(GroupKey, EigenCloud)]) -> Vec<EigSummaryRow> {
    groups
        .iter()
        .map(|(key, cloud)| EigSummaryRow {
            source: key.source,
            label: key.label,
            n_samples: cloud.fitted_samples + cloud.skips.len(),
            n_skipped: cloud.skips.len(),
            n_eigs: cloud.points.len(),
            complex_fraction: cloud.complex_fraction,
            inside_fraction: cloud.inside_fraction,
            on_fraction: cloud.on_fraction,
            outside_fraction: cloud.outside_fraction,
            max_modulus: cloud.max_modulus,
        })
        .collect()
}

pub fn dynamics_rows(groups: &[(GroupKey, DynamicsBundle)]) -> Vec<DynamicsRow> {
    let mut rows = Vec::new();
    for (key, bundle) in groups {
        for sample in &bundle.samples {
            for (mode_index, curve) in sample.magnitudes.iter().enumerate() {
                let normalized = sample.normalized(mode_index);
                for (sentence_index, &magnitude) in curve.iter().enumerate() {
                    rows.push(DynamicsRow {
                        source: key.source,
                        label: key.label,
                        sample_id: sample.sample_id.clone(),
                        mode_index,
                        sentence_index,
                        magnitude,
                        normalized_magnitude: normalized.as_ref().map(|c| c[sentence_index]),
                    });
                }
            }
        }
    }
    rows
}

pub fn envelope_rows(groups: &[(GroupKey, DynamicsBundle)]) -> Vec<EnvelopeRow> {
    groups
        .iter()
        .flat_map(|(key, bundle)| {
            bundle.envelope.iter().map(move |e| EnvelopeRow {
                source: key.source,
                label: key.label,
                sentence_index: e.sentence_index,
                curves: e.curves,
                q10: e.q10,
                q50: e.q50,
                q90: e.q90,
            })
        })
        .collect()
}

pub fn write_csv<R: TableRow, W: Write>(rows: &[R], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(R::HEADER)?;
    for row in rows {
        writer.write_record(row.cells())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json<R: TableRow, W: Write>(rows: &[R], mut out: W) -> Result<(), serde_json::Error> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    out.write_all(b"\n").map_err(serde_json::Error::io)?;
    out.flush().map_err(serde_json::Error::io)
}

/// Writes `rows` to `dir/<stem>.<ext>` and returns the path written.
pub fn export<R: TableRow>(
    rows: &[R],
    format: ExportFormat,
    dir: &Path,
    stem: &str,
) -> Result<PathBuf, ExportError> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let file = File::create(&path).map_err(|source| ExportError::Io {
        path: path.clone(),
        source,
    })?;
    let out = BufWriter::new(file);
    match format {
        ExportFormat::Csv => write_csv(rows, out).map_err(|source| ExportError::Csv {
            path: path.clone(),
            source,
        })?,
        ExportFormat::Json => write_json(rows, out).map_err(|source| ExportError::Json {
            path: path.clone(),
            source,
        })?,
    }
    Ok(path)
}
