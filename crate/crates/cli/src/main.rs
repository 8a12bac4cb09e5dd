use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sketchgen::aml::{parse_program, ApiDatabase};
use sketchgen::labels::Label;
use sketchgen::model::latent::export_latent;
use sketchgen::model::train::rng_for;
use sketchgen::model::{load_checkpoint, save_checkpoint, Model, TrainState};
use sketchgen::pipeline::{self, PipelineError, RunConfig, RunManifest, CONFIG_ENV};
use sketchgen::sketch::{abstract_program, production_paths, sketch_to_record};
use sketchgen::toy;

/// Stream of the run seed used for latent export.
const LATENT_STREAM: u64 = 1 << 41;

#[derive(Parser, Debug)]
#[command(name = "sketchgen", version, about = "Generate typed API programs from labels via sketches")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Directory for outputs and run manifests
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    max_steps: Option<usize>,
    #[arg(long, global = true)]
    max_restarts: Option<usize>,
    #[arg(long, global = true)]
    simplicity_bias: Option<f64>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the toy API database, corpus, and run configuration
    Toy,
    /// Parse, type-check, label, and abstract a corpus into a dataset
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        api_db: Option<PathBuf>,
    },
    /// Print the sketch and production paths of one program
    Abstract {
        /// File holding the program text
        program: PathBuf,
        #[arg(long)]
        api_db: Option<PathBuf>,
    },
    /// Train a model on a dataset
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from the checkpoint's training state
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Generate ranked programs for a label
    Sample {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        api_db: Option<PathBuf>,
        /// Label as JSON, e.g. '{"calls":["readLine"]}'
        #[arg(long, conflicts_with = "label_file")]
        label: Option<String>,
        #[arg(long)]
        label_file: Option<PathBuf>,
        /// Sketches drawn before ranking
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Score a model on a dataset at several observability levels
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        api_db: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Training dataset; adds a report over records unseen in it
        #[arg(long)]
        train_dataset: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
    /// Write latent vectors and API labels of a dataset as CSV
    ExportLatent {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure caused by the invocation rather than by a defect.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn is_user_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<UsageError>().is_some() || c.downcast_ref::<PipelineError>().is_some_and(|p| p.is_user_error())
    })
}

fn pick(flag: &Option<PathBuf>, config: &Option<PathBuf>, what: &str, flag_name: &str) -> Result<PathBuf> {
    let p = flag
        .clone()
        .or_else(|| config.clone())
        .ok_or_else(|| usage(format!("no {what}: pass --{flag_name} or set it in the config")))?;
    if !p.exists() {
        return Err(usage(format!("{what} {} does not exist", p.display())));
    }
    Ok(p)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn load_db(path: &Path) -> Result<ApiDatabase> {
    Ok(ApiDatabase::load(path).map_err(PipelineError::from)?)
}

fn load_model(path: &Path) -> Result<(Model, Option<TrainState>)> {
    Ok(load_checkpoint(path).map_err(PipelineError::from)?)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| PipelineError::io(path, e).into())
}

fn config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::resolve(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(d) = &common.out_dir {
        cfg.paths.out_dir = Some(d.clone());
    }
    if common.max_steps.is_some() {
        cfg.walk.max_steps = common.max_steps;
    }
    if let Some(n) = common.max_restarts {
        cfg.walk.max_restarts = n;
    }
    if let Some(b) = common.simplicity_bias {
        cfg.walk.simplicity_bias = b;
    }
    if let Some(k) = common.top_k {
        cfg.sample.top_k = k;
    }
    Ok(cfg)
}

fn manifest(cfg: &RunConfig, command: &str, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Result<()> {
    let m = RunManifest { command: command.into(), seed: cfg.seed, config: cfg.clone(), inputs, outputs };
    let path = m.write(out_dir(cfg)?)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = config(&cli.common)?;
    match cli.command {
        Command::Toy => {
            let dir = out_dir(&cfg)?;
            let db = dir.join("api.yaml");
            let corpus = dir.join("corpus.jsonl");
            let config = dir.join("config.toml");
            write_file(&db, toy::API_YAML)?;
            pipeline::write_corpus(&corpus, &toy::corpus_records())?;
            write_file(&config, toy::CONFIG_TOML)?;
            for p in [&db, &corpus, &config] {
                println!("{}", p.display());
            }
        }
        Command::Ingest { corpus, api_db } => {
            let corpus = pick(&corpus, &cfg.paths.corpus, "corpus", "corpus")?;
            let db_path = pick(&api_db, &cfg.paths.api_db, "API database", "api-db")?;
            let db = load_db(&db_path)?;
            let records = pipeline::read_corpus(&corpus)?;
            let out = pipeline::ingest(&records, &db)?;
            let dir = out_dir(&cfg)?;
            let dataset = dir.join("dataset.jsonl");
            pipeline::write_dataset(&dataset, &out.entries)?;
            let mut outputs = vec![dataset.clone()];
            outputs.extend(pipeline::write_vocab(&dir, &pipeline::vocabularies(&out.entries))?);
            println!("{} records written to {}, {} skipped", out.entries.len(), dataset.display(), out.skipped.len());
            for s in &out.skipped {
                println!("skipped line {}: {}", s.line, s.reason);
            }
            manifest(&cfg, "ingest", vec![corpus, db_path], outputs)?;
        }
        Command::Abstract { program, api_db } => {
            let db = load_db(&pick(&api_db, &cfg.paths.api_db, "API database", "api-db")?)?;
            let text = fs::read_to_string(&program).map_err(|e| PipelineError::io(&program, e))?;
            let p = parse_program(&text).map_err(|e| usage(format!("{}: {e}", program.display())))?;
            let y = abstract_program(&p, &db).map_err(|e| usage(format!("{}: {e}", program.display())))?;
            println!("{}", serde_json::to_string_pretty(&sketch_to_record(&y))?);
            for path in production_paths(&y) {
                println!("{path}");
            }
        }
        Command::Train { dataset, checkpoint, resume, epochs, variant } => {
            let dataset = pick(&dataset, &cfg.paths.dataset, "dataset", "dataset")?;
            if let Some(e) = epochs {
                cfg.model.epochs = e;
            }
            if let Some(v) = variant {
                cfg.model.variant = v;
            }
            cfg.validate()?;
            let dir = out_dir(&cfg)?;
            let ckpt =
                checkpoint.or_else(|| cfg.paths.checkpoint.clone()).unwrap_or_else(|| dir.join("checkpoint.json"));
            let entries = pipeline::read_dataset(&dataset)?;
            let (mut model, mut state) = if resume {
                if !ckpt.exists() {
                    return Err(usage(format!("cannot resume: {} does not exist", ckpt.display())));
                }
                let (mut model, state) = load_model(&ckpt)?;
                let Some(state) = state else {
                    return Err(usage(format!("{} holds no training state", ckpt.display())));
                };
                if model.vocab != pipeline::vocabularies(&entries) {
                    return Err(usage("dataset vocabularies differ from the checkpoint's"));
                }
                model.hyper.epochs = cfg.model.epochs;
                (model, state)
            } else {
                let model = Model::new(cfg.model.clone(), pipeline::vocabularies(&entries))?;
                let state = TrainState::new(&model.params);
                (model, state)
            };
            let loss_path = dir.join("loss.csv");
            let mut buf = Vec::new();
            pipeline::train_model(&mut model, &entries, &mut state, &mut buf)?;
            write_file(&loss_path, std::str::from_utf8(&buf)?)?;
            save_checkpoint(&ckpt, &model, Some(&state)).map_err(PipelineError::from)?;
            println!(
                "trained {} epochs, final loss {}; checkpoint {}",
                state.epochs_done,
                state.losses.last().map_or("n/a".into(), |l| format!("{l:.6}")),
                ckpt.display()
            );
            manifest(&cfg, "train", vec![dataset], vec![ckpt, loss_path])?;
        }
        Command::Sample { checkpoint, api_db, label, label_file, samples } => {
            let ckpt = pick(&checkpoint, &cfg.paths.checkpoint, "checkpoint", "checkpoint")?;
            let db = load_db(&pick(&api_db, &cfg.paths.api_db, "API database", "api-db")?)?;
            let text = match (label, label_file) {
                (Some(t), _) => t,
                (None, Some(f)) => fs::read_to_string(&f).map_err(|e| PipelineError::io(&f, e))?,
                (None, None) => return Err(usage("pass --label or --label-file")),
            };
            let x: Label = serde_json::from_str(&text).map_err(|e| usage(format!("invalid label: {e}")))?;
            if let Some(n) = samples {
                cfg.sample.samples = n;
            }
            cfg.validate()?;
            let (model, _) = load_model(&ckpt)?;
            let g = pipeline::generate(&model, &db, &x, &cfg.sample, &cfg.walk, cfg.seed)?;
            if !g.dropped.is_empty() {
                eprintln!("ignored out-of-vocabulary label elements: {}", g.dropped.join(", "));
            }
            if g.prior_fallback {
                eprintln!("warning: no known label element; sampled from the prior");
            }
            println!("# seed {}; {} sketches sampled, {} failed", cfg.seed, g.sampled, g.sample_failures);
            print!("{}", pipeline::format_ranked(&g.ranked));
            log::info!("wall time {:.3}s", g.elapsed.as_secs_f64());
            eprintln!("wall time {:.3}s", g.elapsed.as_secs_f64());
        }
        Command::Eval { checkpoint, api_db, dataset, train_dataset, fractions } => {
            let ckpt = pick(&checkpoint, &cfg.paths.checkpoint, "checkpoint", "checkpoint")?;
            let db = load_db(&pick(&api_db, &cfg.paths.api_db, "API database", "api-db")?)?;
            let dataset = pick(&dataset, &cfg.paths.dataset, "dataset", "dataset")?;
            if let Some(f) = fractions {
                cfg.eval.fractions = f;
            }
            cfg.validate()?;
            let train = match &train_dataset {
                Some(p) if !p.exists() => {
                    return Err(usage(format!("training dataset {} does not exist", p.display())))
                }
                Some(p) => Some(pipeline::read_dataset(p)?),
                None => None,
            };
            let (model, _) = load_model(&ckpt)?;
            let test = pipeline::read_dataset(&dataset)?;
            let (report, unseen) = pipeline::evaluate_model(&model, &db, &test, train.as_deref(), &cfg)?;
            let dir = out_dir(&cfg)?;
            let mut outputs = Vec::new();
            for (name, r) in std::iter::once(("report", &report)).chain(unseen.as_ref().map(|u| ("report.unseen", u))) {
                let csv = dir.join(format!("{name}.csv"));
                let txt = dir.join(format!("{name}.txt"));
                write_file(&csv, &r.to_csv())?;
                write_file(&txt, &r.to_text())?;
                print!("{}", r.to_text());
                outputs.extend([csv, txt]);
            }
            let mut inputs = vec![ckpt, dataset];
            inputs.extend(train_dataset);
            manifest(&cfg, "eval", inputs, outputs)?;
        }
        Command::ExportLatent { checkpoint, dataset, out } => {
            let ckpt = pick(&checkpoint, &cfg.paths.checkpoint, "checkpoint", "checkpoint")?;
            let dataset = pick(&dataset, &cfg.paths.dataset, "dataset", "dataset")?;
            let (model, _) = load_model(&ckpt)?;
            let entries = pipeline::read_dataset(&dataset)?;
            let records: Vec<_> = entries.iter().map(|e| (e.label.clone(), e.sketch.clone())).collect();
            let out = match out {
                Some(p) => p,
                None => out_dir(&cfg)?.join("latent.csv"),
            };
            let mut buf = Vec::new();
            export_latent(&model, &records, &mut rng_for(cfg.seed, LATENT_STREAM), &mut buf)
                .map_err(PipelineError::from)?;
            write_file(&out, std::str::from_utf8(&buf)?)?;
            println!("{} rows written to {}", records.len(), out.display());
            manifest(&cfg, "export-latent", vec![ckpt, dataset], vec![out])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e:#}");
            if is_user_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
