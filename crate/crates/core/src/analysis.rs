//! Corpus-level aggregation by (source, paragraph label).
//!
//! Per-sample work runs on the rayon pool; every reduction walks samples in
//! group order so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSample, Annotation};
use crate::dmd::{
    self, classify_eigenvalue, CirclePosition, DmdError, EigenClass, EigenKind, EmbeddingMatrix,
    RankPolicy,
};
use crate::linalg::{self, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Reference,
    Generated,
}

impl Source {
    pub const ALL: [Source; 2] = [Source::Reference, Source::Generated];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Reference => "reference",
            Source::Generated => "generated",
        }
    }

    pub fn embeddings(self, sample: &AnnotatedSample) -> &EmbeddingMatrix {
        match self {
            Source::Reference => &sample.reference_embeddings,
            Source::Generated => &sample.generated_embeddings,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub source: Source,
    pub label: Annotation,
}

impl GroupKey {
    /// The six keys in report order: reference before generated, most
    /// severe label first.
    pub fn all() -> impl Iterator<Item = GroupKey> {
        Source::ALL.into_iter().flat_map(|source| {
            Annotation::ALL
                .into_iter()
                .map(move |label| GroupKey { source, label })
        })
    }
}

/// Every sample sits under `(reference, label)` and `(generated, label)`,
/// where `label` is the generated paragraph's label. Within a group samples
/// are ordered by id.
pub fn group(samples: &[AnnotatedSample]) -> BTreeMap<GroupKey, Vec<&AnnotatedSample>> {
    let mut groups: BTreeMap<GroupKey, Vec<&AnnotatedSample>> =
        GroupKey::all().map(|k| (k, Vec::new())).collect();
    for sample in samples {
        for source in Source::ALL {
            groups
                .get_mut(&GroupKey {
                    source,
                    label: sample.paragraph_label,
                })
                .expect("all keys present")
                .push(sample);
        }
    }
    for members in groups.values_mut() {
        members.sort_by(|a, b| a.id.cmp(&b.id));
    }
    groups
}

/// Which matrix the singular-value spectrum is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMatrix {
    /// The snapshot matrix `X` (first `P − 1` sentences).
    #[default]
    Snapshots,
    /// All `P` sentences.
    Paragraph,
}

impl SpectrumMatrix {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumMatrix::Snapshots => "snapshots",
            SpectrumMatrix::Paragraph => "paragraph",
        }
    }
}

impl fmt::Display for SpectrumMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpectrumMatrix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snapshots" => Ok(SpectrumMatrix::Snapshots),
            "paragraph" => Ok(SpectrumMatrix::Paragraph),
            _ => Err(format!("expected 'snapshots' or 'paragraph', got '{s}'")),
        }
    }
}

pub fn sample_spectrum(
    embeddings: &EmbeddingMatrix,
    which: SpectrumMatrix,
) -> Result<Vec<f64>, linalg::LinalgError> {
    let m = match which {
        SpectrumMatrix::Snapshots => dmd::build_snapshots(embeddings).x,
        SpectrumMatrix::Paragraph => embeddings.matrix().clone(),
    };
    Ok(linalg::svd(&m)?.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    pub index: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumSummary {
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumSummary {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn means(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mean).collect()
    }
}

/// Ragged mean: index `i` averages over the spectra longer than `i`.
pub fn ragged_summary(spectra: &[Vec<f64>]) -> SpectrumSummary {
    let longest = spectra.iter().map(Vec::len).max().unwrap_or(0);
    let entries = (0..longest)
        .map(|index| {
            let values: Vec<f64> = spectra
                .iter()
                .filter_map(|s| s.get(index).copied())
                .collect();
            let count = values.len() as f64;
            let mean = values.iter().sum::<f64>() / count;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            SpectrumEntry {
                index,
                mean,
                std: var.sqrt(),
                count: values.len(),
            }
        })
        .collect();
    SpectrumSummary { entries }
}

pub fn average_spectrum(
    group: &[&AnnotatedSample],
    source: Source,
    which: SpectrumMatrix,
) -> SpectrumSummary {
    let spectra: Vec<Vec<f64>> = group
        .par_iter()
        .filter_map(|s| sample_spectrum(source.embeddings(s), which).ok())
        .collect();
    ragged_summary(&spectra)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSkip {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct EigenPoint {
    pub sample_id: String,
    pub value: Complex64,
    pub class: EigenClass,
}

#[derive(Debug, Clone, Default)]
pub struct EigenCloud {
    pub points: Vec<EigenPoint>,
    pub fitted_samples: usize,
    pub skips: Vec<FitSkip>,
    pub complex_fraction: f64,
    pub inside_fraction: f64,
    pub on_fraction: f64,
    pub outside_fraction: f64,
    /// 0 for an empty cloud.
    pub max_modulus: f64,
}

fn fit_group(
    group: &[&AnnotatedSample],
    source: Source,
    policy: RankPolicy,
) -> Vec<(String, Result<dmd::DmdResult, DmdError>)> {
    group
        .par_iter()
        .map(|s| {
            (
                s.id.clone(),
                dmd::fit_embeddings(source.embeddings(s), policy),
            )
        })
        .collect()
}

pub fn eigen_cloud(group: &[&AnnotatedSample], source: Source, policy: RankPolicy) -> EigenCloud {
    let mut cloud = EigenCloud::default();
    for (sample_id, fit) in fit_group(group, source, policy) {
        match fit {
            Ok(result) => {
                cloud.fitted_samples += 1;
                cloud
                    .points
                    .extend(result.eigenvalues.iter().map(|&value| EigenPoint {
                        sample_id: sample_id.clone(),
                        value,
                        class: classify_eigenvalue(value),
                    }));
            }
            Err(e) => cloud.skips.push(FitSkip {
                sample_id,
                reason: e.to_string(),
            }),
        }
    }
    let n = cloud.points.len();
    if n > 0 {
        let fraction = |pred: &dyn Fn(&EigenClass) -> bool| {
            cloud.points.iter().filter(|p| pred(&p.class)).count() as f64 / n as f64
        };
        cloud.complex_fraction = fraction(&|c| c.kind == EigenKind::Complex);
        cloud.inside_fraction = fraction(&|c| c.circle == CirclePosition::Inside);
        cloud.on_fraction = fraction(&|c| c.circle == CirclePosition::On);
        cloud.outside_fraction = fraction(&|c| c.circle == CirclePosition::Outside);
        cloud.max_modulus = cloud
            .points
            .iter()
            .map(|p| p.value.norm())
            .fold(0.0, f64::max);
    }
    cloud
}

/// Curves whose initial amplitude falls below this are left unnormalized.
pub const MIN_NORMALIZABLE_AMPLITUDE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SampleDynamics {
    pub sample_id: String,
    pub eigenvalues: Vec<Complex64>,
    /// `r x P` magnitudes `|b_i| · |λ_i|^p`.
    pub magnitudes: Vec<Vec<f64>>,
}

impl SampleDynamics {
    /// Mode `i`'s curve divided by its `p = 0` value, or `None` when the
    /// amplitude is too small to normalize.
    pub fn normalized(&self, mode: usize) -> Option<Vec<f64>> {
        let row = &self.magnitudes[mode];
        let start = row[0];
        (start >= MIN_NORMALIZABLE_AMPLITUDE).then(|| row.iter().map(|v| v / start).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub sentence_index: usize,
    pub curves: usize,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DynamicsBundle {
    pub samples: Vec<SampleDynamics>,
    pub envelope: Vec<EnvelopePoint>,
    pub skips: Vec<FitSkip>,
}

impl DynamicsBundle {
    /// Every normalizable mode curve, in sample then mode order.
    pub fn normalized_curves(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .flat_map(|s| (0..s.magnitudes.len()).filter_map(move |i| s.normalized(i)))
            .collect()
    }
}

/// Linearly interpolated quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn envelope(curves: &[Vec<f64>]) -> Vec<EnvelopePoint> {
    let longest = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|p| {
            let mut values: Vec<f64> = curves.iter().filter_map(|c| c.get(p).copied()).collect();
            values.sort_by(f64::total_cmp);
            EnvelopePoint {
                sentence_index: p,
                curves: values.len(),
                q10: quantile_sorted(&values, 0.1),
                q50: quantile_sorted(&values, 0.5),
                q90: quantile_sorted(&values, 0.9),
            }
        })
        .collect()
}

pub fn dynamics_bundle(
    group: &[&AnnotatedSample],
    source: Source,
    policy: RankPolicy,
) -> DynamicsBundle {
    let steps: BTreeMap<&str, usize> = group
        .iter()
        .map(|s| (s.id.as_str(), source.embeddings(s).sentences()))
        .collect();
    let mut bundle = DynamicsBundle::default();
    for (sample_id, fit) in fit_group(group, source, policy) {
        let dynamics = fit.and_then(|r| {
            dmd::mode_dynamics(&r, steps[sample_id.as_str()]).map(|m| (r.eigenvalues, m))
        });
        match dynamics {
            Ok((eigenvalues, magnitudes)) => bundle.samples.push(SampleDynamics {
                sample_id,
                eigenvalues,
                magnitudes,
            }),
            Err(e) => bundle.skips.push(FitSkip {
                sample_id,
                reason: e.to_string(),
            }),
        }
    }
    bundle.envelope = envelope(&bundle.normalized_curves());
    bundle
}

/// All six groups, in report order.
pub fn spectra_by_group(
    samples: &[AnnotatedSample],
    which: SpectrumMatrix,
) -> Vec<(GroupKey, SpectrumSummary)> {
    let groups = group(samples);
    GroupKey::all()
        .map(|k| (k, average_spectrum(&groups[&k], k.source, which)))
        .collect()
}

pub fn eigen_clouds_by_group(
    samples: &[AnnotatedSample],
    policy: RankPolicy,
) -> Vec<(GroupKey, EigenCloud)> {
    let groups = group(samples);
    GroupKey::all()
        .map(|k| (k, eigen_cloud(&groups[&k], k.source, policy)))
        .collect()
}

pub fn dynamics_by_group(
    samples: &[AnnotatedSample],
    policy: RankPolicy,
) -> Vec<(GroupKey, DynamicsBundle)> {
    let groups = group(samples);
    GroupKey::all()
        .map(|k| (k, dynamics_bundle(&groups[&k], k.source, policy)))
        .collect()
}
