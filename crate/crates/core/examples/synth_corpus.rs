//! Writes the synthetic fixture corpora used by the integration tests.
//!
//! ```text
//! cargo run -p embdyn --example synth_corpus -- crates/core/tests/fixtures
//! ```
//!
//! Paragraphs are noisy trajectories of random stable linear systems.
//! Reference paragraphs get more oscillatory modes than generated ones, and
//! more of them for worse labels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use embdyn::corpus::{Annotation, CorpusRecord, GeneratedSide, ReferenceSide, SCHEMA_VERSION};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 16;

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

/// Block-diagonal operator with `oscillatory` rotation-scaling blocks and
/// `decaying` real eigenvalues, rotated into a random basis.
fn system(rng: &mut ChaCha8Rng, oscillatory: usize, decaying: usize) -> DMatrix<f64> {
    let mut block = DMatrix::zeros(DIM, DIM);
    let mut k = 0;
    for _ in 0..oscillatory {
        let r = rng.gen_range(0.75..0.97);
        let theta = rng.gen_range(0.3..2.5_f64);
        let (s, c) = theta.sin_cos();
        block[(k, k)] = r * c;
        block[(k, k + 1)] = -r * s;
        block[(k + 1, k)] = r * s;
        block[(k + 1, k + 1)] = r * c;
        k += 2;
    }
    for _ in 0..decaying {
        block[(k, k)] = rng.gen_range(0.2..0.8);
        k += 1;
    }
    let q = random_orthogonal(rng, DIM);
    &q * block * q.transpose()
}

fn trajectory(
    rng: &mut ChaCha8Rng,
    a: &DMatrix<f64>,
    sentences: usize,
    noise: f64,
) -> Vec<Vec<f64>> {
    let mut x = DVector::from_fn(DIM, |_, _| rng.gen_range(-1.0..1.0));
    let mut out = Vec::with_capacity(sentences);
    for _ in 0..sentences {
        out.push(x.iter().copied().collect());
        x = a * &x + DVector::from_fn(DIM, |_, _| noise * rng.gen_range(-1.0..1.0));
    }
    out
}

fn sentences(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix} sentence {i}.")).collect()
}

fn synthetic(rng: &mut ChaCha8Rng, count: usize) -> Vec<CorpusRecord> {
    (0..count)
        .map(|i| {
            let label = Annotation::ALL[i % 3];
            let (ref_osc, gen_osc) = match label {
                Annotation::MajorInaccurate => (4, 0),
                Annotation::MinorInaccurate => (2, 0),
                Annotation::Accurate => (1, 1),
            };
            let ref_p = rng.gen_range(6..12);
            let gen_p = rng.gen_range(5..10);
            let a_ref = system(rng, ref_osc, 6);
            let a_gen = system(rng, gen_osc, 2);
            let reference = trajectory(rng, &a_ref, ref_p, 1e-3);
            let generated = trajectory(rng, &a_gen, gen_p, 1e-3);
            // Mostly `label`, with one dissenting sentence that never outvotes it.
            let mut annotations = vec![label; gen_p];
            annotations[gen_p - 1] = Annotation::ALL[(i + 1) % 3];
            CorpusRecord {
                schema: SCHEMA_VERSION.into(),
                id: format!("synth-{i:03}"),
                concept: format!("Concept {i}"),
                reference: ReferenceSide {
                    sentences: sentences("Reference", ref_p),
                    embeddings: reference,
                },
                generated: GeneratedSide {
                    sentences: sentences("Generated", gen_p),
                    embeddings: generated,
                    annotations,
                },
                paragraph_label: Some(label),
            }
        })
        .collect()
}

fn record(
    id: &str,
    reference: Vec<Vec<f64>>,
    generated: Vec<Vec<f64>>,
    label: Annotation,
) -> CorpusRecord {
    CorpusRecord {
        schema: SCHEMA_VERSION.into(),
        id: id.into(),
        concept: id.into(),
        reference: ReferenceSide {
            sentences: sentences("Reference", reference.len()),
            embeddings: reference,
        },
        generated: GeneratedSide {
            sentences: sentences("Generated", generated.len()),
            annotations: vec![label; generated.len()],
            embeddings: generated,
        },
        paragraph_label: None,
    }
}

fn half_decay() -> Vec<CorpusRecord> {
    let columns: Vec<Vec<f64>> = (0..6).map(|p| vec![0.5f64.powi(p); 2]).collect();
    vec![record(
        "half-decay",
        columns.clone(),
        columns,
        Annotation::Accurate,
    )]
}

fn mixed_dim() -> Vec<CorpusRecord> {
    let paragraph = |dim: usize| -> Vec<Vec<f64>> {
        (0..3)
            .map(|p| (0..dim).map(|d| ((p * dim + d) as f64).sin()).collect())
            .collect()
    };
    [4, 4, 6]
        .iter()
        .enumerate()
        .map(|(i, &dim)| {
            record(
                &format!("dim-{i}"),
                paragraph(dim),
                paragraph(dim),
                Annotation::Accurate,
            )
        })
        .collect()
}

fn all_skipped() -> Vec<CorpusRecord> {
    (0..2)
        .map(|i| {
            record(
                &format!("short-{i}"),
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1.0, 1.0]],
                Annotation::MinorInaccurate,
            )
        })
        .collect()
}

fn write(
    dir: &Path,
    name: &str,
    records: &[CorpusRecord],
    extra_lines: &[&str],
) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path)?);
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    for line in extra_lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(path)
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/core/tests/fixtures".into()),
    );
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let corpus = synthetic(&mut rng, 30);
    let mut written = vec![
        write(&dir, "synthetic.jsonl", &corpus, &[])?,
        write(&dir, "half_decay.jsonl", &half_decay(), &[])?,
        write(&dir, "mixed_dim.jsonl", &mixed_dim(), &[])?,
        write(&dir, "all_skipped.jsonl", &all_skipped(), &[])?,
    ];

    // One usable record, one skip, one malformed line, one stored-label mismatch.
    let mut issues = synthetic(&mut rng, 2);
    issues[1].paragraph_label = Some(Annotation::Accurate);
    issues[1].id = "mismatch".into();
    let mut records = vec![
        issues[0].clone(),
        all_skipped().remove(0),
        issues[1].clone(),
    ];
    records[0].id = "good".into();
    written.push(write(
        &dir,
        "with_issues.jsonl",
        &records,
        &[r#"{"schema": "embdyn-corpus/1", "id": "broken"}"#],
    )?);

    let mut bad_schema = half_decay();
    bad_schema[0].schema = "embdyn-corpus/0".into();
    written.push(write(&dir, "bad_schema.jsonl", &bad_schema, &[])?);

    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
