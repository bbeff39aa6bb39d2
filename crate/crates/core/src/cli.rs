//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 missing input, 3 corpus
//! schema/consistency failure, 4 nothing left to analyze.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, SpectrumMatrix};
use crate::corpus::{self, AnnotatedSample, CorpusError, CorpusStats, LoadReport};
use crate::dmd::RankPolicy;
use crate::export::{self, ExportFormat};

#[derive(Debug, Parser)]
#[command(
    name = "embdyn",
    version,
    about = "Spectral diagnostics of sentence-embedding dynamics"
)]
pub struct Cli {
    /// TOML file with defaults for the options below; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// JSONL corpus (embdyn-corpus/1).
    #[arg(long, global = true, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// DMD truncation: optimal, full, or a fixed rank [default: optimal]
    #[arg(long, global = true, value_name = "optimal|full|INT")]
    pub rank: Option<RankPolicy>,
    /// Matrix whose singular values form the spectrum [default: snapshots]
    #[arg(
        long = "spectrum-on",
        global = true,
        value_name = "snapshots|paragraph"
    )]
    pub spectrum_on: Option<SpectrumMatrix>,
    /// Export format [default: csv]
    #[arg(long, global = true, value_name = "csv|json")]
    pub format: Option<ExportFormat>,
    /// Report each skipped, malformed or mislabeled record
    #[arg(short, long, global = true, action = ArgAction::Count, conflicts_with = "quiet")]
    pub verbose: u8,
    /// Print nothing but fatal errors
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the corpus and print its statistics.
    Validate,
    /// Average singular-value spectra per group.
    Spectrum,
    /// Pooled DMD eigenvalues per group, with a summary table.
    Eigs,
    /// Mode dynamics per sample and per-group envelopes.
    Dynamics,
    /// Run every analysis and write a manifest.
    Report,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    corpus: Option<PathBuf>,
    out: Option<PathBuf>,
    rank: Option<RankSetting>,
    spectrum_on: Option<SpectrumMatrix>,
    format: Option<ExportFormat>,
    verbosity: Option<i8>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RankSetting {
    Fixed(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(skip)]
    pub out: PathBuf,
    pub rank: RankPolicy,
    pub spectrum_on: SpectrumMatrix,
    pub format: ExportFormat,
    /// -1 quiet, 0 normal, >0 verbose.
    #[serde(skip)]
    pub verbosity: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    MissingInput(String),
    Corpus(String),
    NoSamples,
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Other(_) => 1,
            Failure::MissingInput(_) => 2,
            Failure::Corpus(_) => 3,
            Failure::NoSamples => 4,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::MissingInput(m) | Failure::Corpus(m) | Failure::Other(m) => m.clone(),
            Failure::NoSamples => "no analyzable samples".to_string(),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::NotFound(_) => Failure::MissingInput(e.to_string()),
            CorpusError::Io(_) => Failure::Other(e.to_string()),
            CorpusError::SchemaVersion { .. }
            | CorpusError::Empty
            | CorpusError::MixedDimension { .. } => Failure::Corpus(e.to_string()),
        }
    }
}

impl From<export::ExportError> for Failure {
    fn from(e: export::ExportError) -> Self {
        Failure::Other(e.to_string())
    }
}

impl Cli {
    /// Merges flags over the optional config file over built-in defaults.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(path) => read_config_file(path)?,
            None => FileConfig::default(),
        };
        let rank = match (self.rank, file.rank) {
            (Some(r), _) => r,
            (None, Some(RankSetting::Fixed(0))) => {
                return Err(Failure::Other(
                    "config: fixed rank must be at least 1".into(),
                ))
            }
            (None, Some(RankSetting::Fixed(r))) => RankPolicy::Fixed(r),
            (None, Some(RankSetting::Named(s))) => s
                .parse()
                .map_err(|e| Failure::Other(format!("config: {e}")))?,
            (None, None) => RankPolicy::Optimal,
        };
        let verbosity = if self.quiet {
            -1
        } else if self.verbose > 0 {
            self.verbose.min(i8::MAX as u8) as i8
        } else {
            file.verbosity.unwrap_or(0)
        };
        let corpus = self
            .corpus
            .clone()
            .or(file.corpus)
            .ok_or_else(|| Failure::MissingInput("no corpus given (use --corpus)".into()))?;
        Ok(RunConfig {
            corpus,
            out: self
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| "out".into()),
            rank,
            spectrum_on: self.spectrum_on.or(file.spectrum_on).unwrap_or_default(),
            format: self.format.or(file.format).unwrap_or_default(),
            verbosity,
        })
    }
}

fn read_config_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::MissingInput(format!("config not found: {}", path.display()))
        } else {
            Failure::Other(format!("cannot read config {}: {e}", path.display()))
        }
    })?;
    toml::from_str(&text)
        .map_err(|e| Failure::Other(format!("invalid config {}: {e}", path.display())))
}

struct Loaded {
    samples: Vec<AnnotatedSample>,
    report: LoadReport,
    stats: CorpusStats,
}

fn note(config: &RunConfig, level: i8, message: impl AsRef<str>) {
    if config.verbosity >= level {
        eprintln!("{}", message.as_ref());
    }
}

fn load(config: &RunConfig) -> Result<Loaded, Failure> {
    let mut report = corpus::load_corpus(&config.corpus)?;
    for e in &report.errors {
        note(config, 1, format!("malformed record: {e}"));
    }
    for s in &report.skips {
        note(config, 1, format!("skipped: {s}"));
    }
    for m in &report.label_mismatches {
        note(
            config,
            1,
            format!(
                "line {} ({}): stored label {} differs from derived {}",
                m.line, m.id, m.stored, m.derived
            ),
        );
    }
    let issues = report.errors.len() + report.skips.len() + report.label_mismatches.len();
    if issues > 0 {
        note(
            config,
            0,
            format!(
                "{} malformed, {} skipped, {} label mismatches{}",
                report.errors.len(),
                report.skips.len(),
                report.label_mismatches.len(),
                if config.verbosity < 1 {
                    " (-v for details)"
                } else {
                    ""
                }
            ),
        );
    }
    if report.samples.is_empty() {
        return Err(if report.records == 0 {
            Failure::Corpus(CorpusError::Empty.to_string())
        } else {
            Failure::NoSamples
        });
    }
    let stats = corpus::validate(&report.samples)?;
    let samples = std::mem::take(&mut report.samples);
    Ok(Loaded {
        samples,
        report,
        stats,
    })
}

fn ensure_out_dir(config: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&config.out).map_err(|e| {
        Failure::Other(format!(
            "cannot create output directory {}: {e}",
            config.out.display()
        ))
    })
}

#[derive(Debug, Clone, Serialize)]
struct ProducedFile {
    path: String,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum_on: Option<SpectrumMatrix>,
}

fn produced(path: &Path, kind: &'static str) -> ProducedFile {
    ProducedFile {
        path: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        kind,
        spectrum_on: None,
    }
}

fn stage_spectrum(
    config: &RunConfig,
    samples: &[AnnotatedSample],
) -> Result<Vec<ProducedFile>, Failure> {
    let groups = analysis::spectra_by_group(samples, config.spectrum_on);
    let path = export::export(
        &export::spectrum_rows(&groups),
        config.format,
        &config.out,
        "spectrum",
    )?;
    note(config, 0, format!("wrote {}", path.display()));
    let mut file = produced(&path, "spectrum");
    file.spectrum_on = Some(config.spectrum_on);
    Ok(vec![file])
}

fn stage_eigs(
    config: &RunConfig,
    samples: &[AnnotatedSample],
) -> Result<Vec<ProducedFile>, Failure> {
    let groups = analysis::eigen_clouds_by_group(samples, config.rank);
    for (key, cloud) in &groups {
        for skip in &cloud.skips {
            note(
                config,
                1,
                format!(
                    "{} {}: fit failed for {}: {}",
                    key.source, key.label, skip.sample_id, skip.reason
                ),
            );
        }
    }
    let summary = export::eig_summary_rows(&groups);
    let eigs = export::export(
        &export::eig_rows(&groups),
        config.format,
        &config.out,
        "eigs",
    )?;
    let table = export::export(&summary, config.format, &config.out, "eigs_summary")?;
    if config.verbosity >= 0 {
        println!(
            "{:<10} {:<17} {:>9} {:>6} {:>9} {:>9} {:>11}",
            "source", "label", "n_samples", "n_eigs", "complex", "inside", "max_modulus"
        );
        for row in &summary {
            println!(
                "{:<10} {:<17} {:>9} {:>6} {:>9.4} {:>9.4} {:>11.6}",
                row.source.as_str(),
                row.label.as_str(),
                row.n_samples,
                row.n_eigs,
                row.complex_fraction,
                row.inside_fraction,
                row.max_modulus
            );
        }
    }
    note(
        config,
        0,
        format!("wrote {} and {}", eigs.display(), table.display()),
    );
    Ok(vec![
        produced(&eigs, "eigs"),
        produced(&table, "eigs_summary"),
    ])
}

fn stage_dynamics(
    config: &RunConfig,
    samples: &[AnnotatedSample],
) -> Result<Vec<ProducedFile>, Failure> {
    let groups = analysis::dynamics_by_group(samples, config.rank);
    let dynamics = export::export(
        &export::dynamics_rows(&groups),
        config.format,
        &config.out,
        "dynamics",
    )?;
    let envelope = export::export(
        &export::envelope_rows(&groups),
        config.format,
        &config.out,
        "dynamics_envelope",
    )?;
    note(
        config,
        0,
        format!("wrote {} and {}", dynamics.display(), envelope.display()),
    );
    Ok(vec![
        produced(&dynamics, "dynamics"),
        produced(&envelope, "dynamics_envelope"),
    ])
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    corpus: CorpusSummary,
    files: Vec<ProducedFile>,
}

#[derive(Debug, Serialize)]
struct CorpusSummary {
    records: usize,
    samples: usize,
    skipped: usize,
    malformed: usize,
    label_mismatches: usize,
    dim: usize,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn execute(command: Command, config: &RunConfig) -> Result<(), Failure> {
    let loaded = load(config)?;
    if command == Command::Validate {
        if config.verbosity >= 0 {
            println!("{}", loaded.stats);
        }
        return Ok(());
    }
    ensure_out_dir(config)?;
    let samples = &loaded.samples;
    let files = match command {
        Command::Validate => unreachable!(),
        Command::Spectrum => stage_spectrum(config, samples)?,
        Command::Eigs => stage_eigs(config, samples)?,
        Command::Dynamics => stage_dynamics(config, samples)?,
        Command::Report => {
            if config.verbosity >= 0 {
                println!("{}", loaded.stats);
            }
            let mut files = stage_spectrum(config, samples)?;
            files.extend(stage_eigs(config, samples)?);
            files.extend(stage_dynamics(config, samples)?);
            files
        }
    };
    if command == Command::Report {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config,
            corpus: CorpusSummary {
                records: loaded.report.records,
                samples: samples.len(),
                skipped: loaded.report.skips.len(),
                malformed: loaded.report.errors.len(),
                label_mismatches: loaded.report.label_mismatches.len(),
                dim: loaded.stats.dim,
            },
            files,
        };
        let path = config.out.join(MANIFEST_NAME);
        let mut text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Other(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))?;
        note(config, 0, format!("wrote {}", path.display()));
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = cli
        .resolve()
        .and_then(|config| execute(cli.command, &config));
    match outcome {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}
