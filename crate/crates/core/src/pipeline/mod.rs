//! Corpus ingestion, dataset files, and the query and evaluation loops the
//! command line is built from.

pub mod config;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aml::{parse_program, print_program, ApiDatabase, DbError, Program};
use crate::concretize::{concretize_top_k, ConcretizeError, RankedProgram, WalkConfig};
use crate::labels::{extract_label, Label, Vocabularies};
use crate::metrics::{evaluate, EvalItem, MetricsError, Report};
use crate::model::checkpoint::CheckpointError;
use crate::model::train::rng_for;
use crate::model::{posterior, sample_z, Model, ModelError, SampleMode, TrainState};
use crate::sketch::{abstract_program, production_paths, record_to_sketch, sketch_to_record, RecordError, Sketch};

pub use config::{EvalConfig, Paths, RunConfig, SampleConfig, CONFIG_ENV};

/// Ingestion aborts when more than this fraction of records is skipped.
pub const MAX_SKIP_RATE: f64 = 0.5;

/// Stream of the run seed used for sketch sampling.
const SAMPLE_STREAM: u64 = 1 << 40;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Input { path: PathBuf, line: usize, message: String },
    #[error("skipped {skipped} of {total} records (more than half); first problem: {first}")]
    TooManySkipped { skipped: usize, total: usize, first: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no sketch could be sampled ({failures} attempts failed)")]
    NoSketches { failures: usize },
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Concretize(#[from] ConcretizeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.into(), source }
    }

    /// Whether the failure stems from the user's inputs or settings rather
    /// than from a defect.
    pub fn is_user_error(&self) -> bool {
        match self {
            PipelineError::Metrics(_) | PipelineError::Csv(_) => false,
            PipelineError::Model(e) => matches!(
                e,
                ModelError::InvalidHyperparams(_)
                    | ModelError::UnknownVariant(_)
                    | ModelError::EmptyCorpus
                    | ModelError::ShapeMismatch(_)
                    | ModelError::SymbolOutOfVocabulary(_)
            ),
            PipelineError::Concretize(e) => !matches!(e, ConcretizeError::TooMany(_)),
            _ => true,
        }
    }
}

/// One line of a corpus file. A missing label is extracted from the program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub program: String,
    pub label: Label,
    pub sketch: serde_json::Value,
    pub paths: Vec<String>,
}

/// A decoded dataset record.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub program: Program,
    pub label: Label,
    pub sketch: Sketch,
}

impl Entry {
    pub fn to_record(&self) -> DatasetRecord {
        DatasetRecord {
            program: print_program(&self.program),
            label: self.label.clone(),
            sketch: sketch_to_record(&self.sketch),
            paths: production_paths(&self.sketch).iter().map(|p| p.to_string()).collect(),
        }
    }

    pub fn from_record(r: &DatasetRecord) -> Result<Self, String> {
        let program = parse_program(&r.program).map_err(|e| e.to_string())?;
        let sketch = record_to_sketch(&r.sketch).map_err(|e: RecordError| e.to_string())?;
        Ok(Entry { program, label: r.label.clone(), sketch })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skipped {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub entries: Vec<Entry>,
    pub skipped: Vec<Skipped>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, PipelineError> {
    let f = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), PipelineError> {
    let mut text = String::new();
    for it in items {
        text.push_str(&serde_json::to_string(&it).expect("record serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Reads a JSON-lines corpus; blank lines are ignored.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<(usize, CorpusRecord)>, PipelineError> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map(|r| (line, r)).map_err(|e| PipelineError::Input {
                path: path.into(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<(), PipelineError> {
    write_jsonl(path.as_ref(), records)
}

/// Parses, type-checks, labels, and abstracts every record. Records that
/// fail to parse or type-check are skipped; more than half skipped aborts.
pub fn ingest(records: &[(usize, CorpusRecord)], db: &ApiDatabase) -> Result<Ingested, PipelineError> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (line, r) in records {
        let entry = parse_program(&r.program).map_err(|e| e.to_string()).and_then(|program| {
            let sketch = abstract_program(&program, db).map_err(|e| e.to_string())?;
            let label = match &r.label {
                Some(x) => x.clone(),
                None => extract_label(&program, db).map_err(|e| e.to_string())?,
            };
            Ok(Entry { program, label, sketch })
        });
        match entry {
            Ok(e) => entries.push(e),
            Err(reason) => {
                log::warn!("record at line {line} skipped: {reason}");
                skipped.push(Skipped { line: *line, reason });
            }
        }
    }
    let total = records.len();
    if total > 0 && skipped.len() as f64 > MAX_SKIP_RATE * total as f64 {
        return Err(PipelineError::TooManySkipped {
            skipped: skipped.len(),
            total,
            first: format!("line {}: {}", skipped[0].line, skipped[0].reason),
        });
    }
    log::info!("ingested {} records, skipped {}", entries.len(), skipped.len());
    Ok(Ingested { entries, skipped })
}

pub fn write_dataset(path: impl AsRef<Path>, entries: &[Entry]) -> Result<(), PipelineError> {
    write_jsonl(path.as_ref(), entries.iter().map(Entry::to_record))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<Entry>, PipelineError> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let bad = |message: String| PipelineError::Input { path: path.into(), line, message };
            let r: DatasetRecord = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            Entry::from_record(&r).map_err(bad)
        })
        .collect()
}

/// Writes `vocab.json` (all vocabularies) plus one plain-text file per
/// vocabulary into `dir`.
pub fn write_vocab(dir: impl AsRef<Path>, vocab: &Vocabularies) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    let json = dir.join("vocab.json");
    fs::write(&json, serde_json::to_string_pretty(vocab).expect("vocab serializes"))
        .map_err(|e| PipelineError::io(&json, e))?;
    files.push(json);
    let lists: [(&str, Vec<String>); 4] = [
        ("vocab.calls.txt", vocab.calls.items().to_vec()),
        ("vocab.types.txt", vocab.types.items().to_vec()),
        ("vocab.keys.txt", vocab.keys.items().to_vec()),
        ("vocab.symbols.txt", vocab.symbols.items().iter().map(|s| s.to_string()).collect()),
    ];
    for (name, items) in lists {
        let path = dir.join(name);
        let mut text = items.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;
        files.push(path);
    }
    Ok(files)
}

pub fn vocabularies(entries: &[Entry]) -> Vocabularies {
    Vocabularies::build(entries.iter().map(|e| (&e.label, &e.sketch)))
}

/// Builds a fresh model for `entries` and trains it, resuming from `state`
/// when given. Epoch losses are appended to `loss_csv` as `epoch,loss,seed`.
pub fn train_model<W: Write>(
    model: &mut Model,
    entries: &[Entry],
    state: &mut TrainState,
    loss_csv: W,
) -> Result<(), PipelineError> {
    if entries.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let examples = entries.iter().map(|e| model.example(&e.label, &e.sketch)).collect::<Result<Vec<_>, _>>()?;
    let mut w = csv::Writer::from_writer(loss_csv);
    w.write_record(["epoch", "loss", "seed"])?;
    for (i, l) in state.losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string(), model.hyper.seed.to_string()])?;
    }
    let seed = model.hyper.seed;
    let mut failure = None;
    crate::model::train(model, &examples, state, |epoch, loss| {
        log::info!("epoch {epoch}: loss {loss:.6}");
        if let Err(e) = w.write_record([epoch.to_string(), loss.to_string(), seed.to_string()]) {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    w.flush().map_err(|e| PipelineError::Csv(e.into()))?;
    Ok(())
}

/// Result of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub ranked: Vec<RankedProgram>,
    pub sampled: usize,
    pub sample_failures: usize,
    /// Label elements outside the model's vocabularies.
    pub dropped: Vec<String>,
    /// No label element was known, so sketches came from the prior.
    pub prior_fallback: bool,
    pub elapsed: Duration,
}

/// Samples `cfg.samples` sketches for `x`, concretizes them, and returns the
/// top `cfg.top_k` programs.
pub fn generate(
    model: &Model,
    db: &ApiDatabase,
    x: &Label,
    cfg: &SampleConfig,
    walk: &WalkConfig,
    seed: u64,
) -> Result<Generated, PipelineError> {
    let start = Instant::now();
    let (encoded, dropped) = model.vocab.encode_label(x);
    let prior_fallback = encoded.is_empty() && !x.is_empty();
    if prior_fallback {
        log::warn!("no label element is in the vocabulary; sampling from the prior");
    }
    let post = posterior(&encoded, &model.params);
    let mut rng = rng_for(seed, SAMPLE_STREAM);
    let mut sketches = Vec::with_capacity(cfg.samples);
    let mut sample_failures = 0;
    for _ in 0..cfg.samples {
        let z = sample_z(&post, &mut rng);
        match model.sample_sketch_from(&z, &post, &mut rng, SampleMode::Sample) {
            Ok(y) => sketches.push(y),
            Err(e) => {
                log::debug!("sketch sample failed: {e}");
                sample_failures += 1;
            }
        }
    }
    if sketches.is_empty() {
        return Err(PipelineError::NoSketches { failures: sample_failures });
    }
    let walk = WalkConfig { seed, ..walk.clone() };
    let ranked = concretize_top_k(&sketches, db, &walk, cfg.top_k)?;
    let elapsed = start.elapsed();
    log::info!("generated {} programs from {} sketches in {:.3}s", ranked.len(), sketches.len(), elapsed.as_secs_f64());
    Ok(Generated { ranked, sampled: sketches.len(), sample_failures, dropped, prior_fallback, elapsed })
}

/// Entries of `test` whose (label, sketch) pair never occurs in `train`.
pub fn unseen<'a>(test: &'a [Entry], train: &[Entry]) -> Vec<&'a Entry> {
    let seen: HashSet<(&Label, &Sketch)> = train.iter().map(|e| (&e.label, &e.sketch)).collect();
    test.iter().filter(|e| !seen.contains(&(&e.label, &e.sketch))).collect()
}

/// The metric table over `test`, and, when `train` is given, the same table
/// restricted to records unseen in training.
pub fn evaluate_model(
    model: &Model,
    db: &ApiDatabase,
    test: &[Entry],
    train: Option<&[Entry]>,
    cfg: &RunConfig,
) -> Result<(Report, Option<Report>), PipelineError> {
    let predict = |x: &Label, seed: u64| match generate(model, db, x, &cfg.sample, &cfg.walk, seed) {
        Ok(g) => g.ranked.into_iter().map(|r| r.program).collect(),
        Err(e) => {
            log::warn!("query failed: {e}");
            Vec::new()
        }
    };
    let items = |es: &[&Entry]| -> Vec<EvalItem> {
        es.iter().map(|e| EvalItem { label: e.label.clone(), program: e.program.clone() }).collect()
    };
    let all: Vec<&Entry> = test.iter().collect();
    let fractions = &cfg.eval.fractions;
    let report = evaluate("all records", &items(&all), fractions, cfg.seed, db, predict)?;
    let sub = match train {
        Some(train) => {
            let u = unseen(test, train);
            Some(evaluate("unseen records", &items(&u), fractions, cfg.seed, db, predict)?)
        }
        None => None,
    };
    Ok((report, sub))
}

/// Ranked programs as text, one block per program.
pub fn format_ranked(ranked: &[RankedProgram]) -> String {
    let mut s = String::new();
    for r in ranked {
        s.push_str(&format!(
            "#{} cost={} sketch_frequency={} success_rate={:.3}\n{}\n\n",
            r.rank,
            r.cost,
            r.sketch_frequency,
            r.success_rate,
            print_program(&r.program)
        ));
    }
    s
}

/// Record of one command invocation, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    /// Writes `<command>.run.json` into `dir` and returns its path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf, PipelineError> {
        let path = dir.as_ref().join(format!("{}.run.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes"))
            .map_err(|e| PipelineError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    fn toy_records(n: usize) -> Vec<(usize, CorpusRecord)> {
        toy::PROGRAMS[..n]
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1, CorpusRecord { program: p.to_string(), label: None }))
            .collect()
    }

    #[test]
    fn ingest_skips_ill_typed() {
        let db = toy::database();
        let mut records = toy_records(3);
        records.push((4, CorpusRecord { program: "call $File.read()".into(), label: None }));
        let out = ingest(&records, &db).unwrap();
        assert_eq!(out.entries.len(), 3);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].line, 4);
    }

    #[test]
    fn ingest_aborts_on_majority_skipped() {
        let db = toy::database();
        let mut records = toy_records(1);
        for i in 0..2 {
            records.push((i + 2, CorpusRecord { program: "call $Nope.x()".into(), label: None }));
        }
        assert!(matches!(ingest(&records, &db), Err(PipelineError::TooManySkipped { skipped: 2, total: 3, .. })));
    }

    #[test]
    fn dataset_round_trip() {
        let db = toy::database();
        let out = ingest(&toy_records(10), &db).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        write_dataset(&path, &out.entries).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), out.entries);
        let files = write_vocab(dir.path(), &vocabularies(&out.entries)).unwrap();
        assert_eq!(files.len(), 5);
    }

    #[test]
    fn unseen_excludes_training_pairs() {
        let db = toy::database();
        let out = ingest(&toy_records(4), &db).unwrap();
        let u = unseen(&out.entries, &out.entries[..2]);
        assert_eq!(u.len(), 2);
    }
}
