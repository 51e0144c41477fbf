//! `kgqa` command-line front-end.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use kgqa::abstraction::AbstractSubgraph;
use kgqa::config::{EncoderKind, RunConfig};
use kgqa::encoder::{CacheEntry, Encoder};
use kgqa::eval::{choose_threshold, synth_dataset, EvalReport, QuestionRecord};
use kgqa::experiment::toy_encoder;
use kgqa::kg::{load_graph, load_questions, write_questions, write_triples, EntityId, KnowledgeGraph, QaInstance, Subgraph};
use kgqa::model::{Checkpoint, ModelParams};
use kgqa::pipeline::{rank_entities, retrieve_with};
use kgqa::training::{
    finetune, hits_at_1, pretrain_qrm, reasoning_example, relevant_relations, retrieval_example, transfer_params,
    EpochRecord, Example, Phase,
};
use kgqa::{Error, Result};

#[derive(Parser)]
#[command(name = "kgqa", version, about = "Retrieve-then-reason question answering over knowledge graphs")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config override, e.g. `--set retrieval.K=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a triple file and a question file and write normalised copies.
    Ingest {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic benchmark (kg.tsv, train/valid/test.jsonl).
    SynthData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Contrastive encoder pre-training.
    Pretrain(TrainArgs),
    /// Retrieval fine-tuning on abstract subgraphs.
    TrainRetriever(TrainArgs),
    /// Reasoning fine-tuning on retrieved subgraphs.
    TrainReasoner(TrainArgs),
    /// Any training phase selected by `--phase`.
    Train {
        #[arg(long, value_enum)]
        phase: PhaseArg,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Retrieve a subgraph per question.
    Retrieve {
        #[command(flatten)]
        io: InferArgs,
        /// Write each question's abstract subgraph as JSON into this directory.
        #[arg(long)]
        dump_abstract: Option<PathBuf>,
    },
    /// Rank answers over retrieved subgraphs.
    Answer {
        #[command(flatten)]
        io: InferArgs,
        /// Retrieval output for the same questions.
        #[arg(long)]
        retrieved: PathBuf,
    },
    /// Score answer results against gold questions.
    Eval {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Validation results/gold used to pick the F1 threshold.
        #[arg(long, requires = "valid_gold")]
        valid_results: Option<PathBuf>,
        #[arg(long)]
        valid_gold: Option<PathBuf>,
        /// Fixed F1 threshold instead of the validation grid search.
        #[arg(long, conflicts_with = "valid_results")]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Pretrain,
    Retriever,
    Reasoner,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Training questions.
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    valid_questions: Option<PathBuf>,
    /// Extra question files whose tokens join the toy vocabulary (pretrain).
    #[arg(long, num_args = 1..)]
    vocab_from: Vec<PathBuf>,
    /// Encoder checkpoint (retriever and reasoner phases).
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Retrieval output for the training questions (reasoner).
    #[arg(long)]
    retrieved: Option<PathBuf>,
    /// Retrieval output for the validation questions (reasoner).
    #[arg(long)]
    valid_retrieved: Option<PathBuf>,
    /// Retriever checkpoint to transfer into the reasoner.
    #[arg(long)]
    init_from: Option<PathBuf>,
    /// Ignore `--init-from` and start the reasoner from random parameters.
    #[arg(long)]
    no_transfer: bool,
    /// Write the untrained, frozen toy encoder instead of pre-training it.
    #[arg(long)]
    no_pretrain: bool,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Metrics log; defaults to `<out>.metrics.jsonl`.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Model checkpoint (retriever for `retrieve`, reasoner for `answer`).
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct RetrievedRow {
    id: String,
    entities: Vec<String>,
    selected: Vec<(usize, f64)>,
    coverage: Option<bool>,
    subgraph_size: usize,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct RankedRow {
    entity: String,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct ResultRow {
    id: String,
    answers: Vec<RankedRow>,
    coverage: Option<bool>,
    subgraph_size: usize,
    fingerprint: String,
}

#[derive(Serialize)]
struct MetricsLine<'a> {
    #[serde(flatten)]
    record: &'a EpochRecord,
    seed: u64,
    fingerprint: &'a str,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = error_kind(&e);
            let line = serde_json::json!({ "error": kind, "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(1)
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io(_) => "io",
        Error::Parse { .. } | Error::Json(_) => "parse",
        Error::Config(_) => "config",
        Error::UnresolvedLabels(_) | Error::UnknownEntity(_) | Error::UnknownRelation(_) => "unknown_label",
        Error::Checkpoint(_) => "checkpoint",
        Error::RemoteEncoder { .. } | Error::Encoder(_) | Error::MissingEmbedding(_) | Error::Batch { .. } => "encoder",
        Error::NoTrainableInstances(_) => "no_trainable_instances",
        _ => "runtime",
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.synth.seed = seed;
    }
    cfg.apply_env();
    match cli.command {
        Command::Ingest { kg, questions, out } => ingest(&kg, questions.as_deref(), &out),
        Command::SynthData { out } => synth(&cfg, &out),
        Command::Pretrain(a) => pretrain(&cfg, &a),
        Command::TrainRetriever(a) => train_retriever(&cfg, &a),
        Command::TrainReasoner(a) => train_reasoner(&cfg, &a),
        Command::Train { phase, args } => match phase {
            PhaseArg::Pretrain => pretrain(&cfg, &args),
            PhaseArg::Retriever => train_retriever(&cfg, &args),
            PhaseArg::Reasoner => train_reasoner(&cfg, &args),
        },
        Command::Retrieve { io, dump_abstract } => retrieve_cmd(&cfg, &io, dump_abstract.as_deref()),
        Command::Answer { io, retrieved } => answer_cmd(&cfg, &io, &retrieved),
        Command::Eval { kg, results, gold, valid_results, valid_gold, threshold, out } => {
            eval_cmd(&cfg, &kg, &results, &gold, valid_results.zip(valid_gold), threshold, &out)
        }
    }
}

fn required<'a>(value: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    let p = value
        .as_deref()
        .or(fallback.as_deref())
        .ok_or_else(|| Error::Config(format!("--{name} is required")))?;
    if !p.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", p.display()),
        )));
    }
    Ok(p)
}

fn existing(p: &Path) -> Result<&Path> {
    required(&Some(p.to_path_buf()), &None, "").map(|_| p)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(existing(path)?)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn metrics_path(args: &TrainArgs) -> PathBuf {
    args.metrics.clone().unwrap_or_else(|| {
        let mut name = args.out.clone().into_os_string();
        name.push(".metrics.jsonl");
        PathBuf::from(name)
    })
}

fn write_metrics(cfg: &RunConfig, args: &TrainArgs, history: &[EpochRecord]) -> Result<()> {
    let fp = cfg.fingerprint();
    write_jsonl(
        &metrics_path(args),
        history.iter().map(|record| MetricsLine { record, seed: cfg.seed, fingerprint: &fp }),
    )
}

fn ingest(kg_path: &Path, questions: Option<&Path>, out: &Path) -> Result<()> {
    let kg = load_graph(existing(kg_path)?)?;
    std::fs::create_dir_all(out)?;
    write_triples(out.join("kg.tsv"), &kg)?;
    let mut summary = serde_json::json!({
        "entities": kg.num_entities(),
        "relations": kg.num_relations() / 2,
        "triples": kg.num_triples() / 2,
    });
    if let Some(q) = questions {
        let qs = load_questions(existing(q)?, &kg)?;
        write_questions(out.join("questions.jsonl"), &kg, &qs)?;
        summary["questions"] = qs.len().into();
    }
    println!("{summary}");
    Ok(())
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let ds = synth_dataset(&kgqa::eval::SynthConfig { seed: cfg.seed, ..cfg.synth.clone() })?;
    std::fs::create_dir_all(out)?;
    write_triples(out.join("kg.tsv"), &ds.kg)?;
    write_questions(out.join("train.jsonl"), &ds.kg, &ds.train)?;
    write_questions(out.join("valid.jsonl"), &ds.kg, &ds.valid)?;
    write_questions(out.join("test.jsonl"), &ds.kg, &ds.test)?;
    println!(
        "{}",
        serde_json::json!({
            "entities": ds.kg.num_entities(),
            "triples": ds.kg.num_triples() / 2,
            "train": ds.train.len(),
            "valid": ds.valid.len(),
            "test": ds.test.len(),
        })
    );
    Ok(())
}

fn load_kg(cfg: &RunConfig, arg: &Option<PathBuf>) -> Result<KnowledgeGraph> {
    load_graph(required(arg, &cfg.kg, "kg")?)
}

fn load_qs(cfg: &RunConfig, kg: &KnowledgeGraph, arg: &Option<PathBuf>) -> Result<Vec<QaInstance>> {
    load_questions(required(arg, &cfg.questions, "questions")?, kg)
}

/// Toy checkpoint from `--encoder`, or the configured file/remote backend.
fn load_encoder(cfg: &RunConfig, arg: &Option<PathBuf>) -> Result<Encoder<f64>> {
    let encoder = match cfg.encoder {
        EncoderKind::Toy => RunConfig::toy_encoder(required(arg, &None, "encoder")?)?,
        _ => cfg.external_encoder()?,
    };
    if let Some(path) = cfg.embedding_cache_path().filter(|p| p.exists()) {
        let entries: Vec<CacheEntry> = read_jsonl(&path)?;
        let n = encoder.preload_cache(entries)?;
        log::debug!("{n} cached embeddings from {}", path.display());
    }
    Ok(encoder)
}

/// Writes the remote embedding cache back so later runs skip the service.
fn persist_cache(cfg: &RunConfig, encoder: &Encoder<f64>) -> Result<()> {
    match cfg.embedding_cache_path() {
        Some(path) => {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            write_jsonl(&path, encoder.cache_entries())
        }
        None => Ok(()),
    }
}

fn encoder_ref(cfg: &RunConfig, arg: &Option<PathBuf>) -> String {
    match cfg.encoder {
        EncoderKind::Toy => arg.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        EncoderKind::File => format!("file:{}", cfg.encoder_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        EncoderKind::Remote => format!("remote:{}", cfg.encoder_url.clone().unwrap_or_default()),
    }
}

fn pretrain(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    if cfg.encoder != EncoderKind::Toy {
        return Err(Error::NotTrainable);
    }
    let kg = load_kg(cfg, &args.kg)?;
    let train = load_qs(cfg, &kg, &args.questions)?;
    let mut vocab = train.clone();
    for p in &args.vocab_from {
        vocab.extend(load_questions(existing(p)?, &kg)?);
    }
    let mut encoder = toy_encoder::<f64>(&kg, &vocab, cfg.dims.hidden, cfg.seed);
    let tc = kgqa::training::TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let history: Vec<EpochRecord> = if args.no_pretrain {
        encoder.freeze();
        Vec::new()
    } else {
        let sources = relevant_relations(&kg, &train, cfg.supervision);
        let report = pretrain_qrm(&kg, &sources, &mut encoder, &tc)?;
        report
            .epoch_losses
            .iter()
            .enumerate()
            .map(|(i, &loss)| EpochRecord { epoch: i + 1, phase: Phase::Pretrain, loss, valid_hits_at_1: None, seconds: 0.0 })
            .collect()
    };
    encoder.toy().expect("toy backend").save(&args.out)?;
    let mut meta = args.out.clone().into_os_string();
    meta.push(".meta.json");
    std::fs::write(
        PathBuf::from(meta),
        serde_json::json!({ "fingerprint": cfg.fingerprint(), "seed": cfg.seed, "pretrained": !args.no_pretrain }).to_string(),
    )?;
    write_metrics(cfg, args, &history)
}

fn train_retriever(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let kg = load_kg(cfg, &args.kg)?;
    let train = load_qs(cfg, &kg, &args.questions)?;
    let encoder = load_encoder(cfg, &args.encoder)?;
    let examples = |qs: &[QaInstance]| -> Result<Vec<Example<f64>>> {
        qs.iter().map(|q| retrieval_example(&kg, q, &encoder, cfg.max_hops).map(|(e, _)| e)).collect()
    };
    let train_ex = examples(&train)?;
    let valid_ex = match args.valid_questions.as_ref().or(cfg.valid_questions.as_ref()) {
        Some(p) => Some(examples(&load_questions(existing(p)?, &kg)?)?),
        None => None,
    };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let init = ModelParams::random(cfg.dims, &mut rng)?;
    let tc = kgqa::training::TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let outcome = match &valid_ex {
        Some(v) => {
            let mut f = |p: &ModelParams<f64>| hits_at_1(p, v);
            finetune(Phase::Retrieval, init, &train_ex, &tc, tc.retrieval_epochs, Some(&mut f))?
        }
        None => finetune(Phase::Retrieval, init, &train_ex, &tc, tc.retrieval_epochs, None)?,
    };
    persist_cache(cfg, &encoder)?;
    Checkpoint { params: outcome.params, encoder_ref: encoder_ref(cfg, &args.encoder), fingerprint: cfg.fingerprint() }
        .save(&args.out)?;
    write_metrics(cfg, args, &outcome.history)
}

fn subgraphs_from(kg: &KnowledgeGraph, qs: &[QaInstance], rows: &[RetrievedRow]) -> Result<Vec<Subgraph>> {
    if rows.len() != qs.len() {
        return Err(Error::Shape(format!("{} retrieval rows for {} questions", rows.len(), qs.len())));
    }
    qs.iter()
        .zip(rows)
        .map(|(q, row)| {
            if row.id != q.id {
                return Err(Error::InvalidArgument(format!("retrieval row {} does not match question {}", row.id, q.id)));
            }
            let ids = row
                .entities
                .iter()
                .map(|l| kg.entity(l).ok_or_else(|| Error::UnknownEntity(l.clone())))
                .collect::<Result<Vec<EntityId>>>()?;
            Ok(Subgraph::induced(kg, ids))
        })
        .collect()
}

fn train_reasoner(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let kg = load_kg(cfg, &args.kg)?;
    let train = load_qs(cfg, &kg, &args.questions)?;
    let encoder = load_encoder(cfg, &args.encoder)?;
    let retrieved: Vec<RetrievedRow> = read_jsonl(required(&args.retrieved, &None, "retrieved")?)?;
    let subs = subgraphs_from(&kg, &train, &retrieved)?;
    let train_ex = train
        .iter()
        .zip(&subs)
        .map(|(q, s)| reasoning_example(&kg, q, s, &encoder))
        .collect::<Result<Vec<_>>>()?;
    let valid_ex = match (args.valid_questions.as_ref().or(cfg.valid_questions.as_ref()), &args.valid_retrieved) {
        (Some(vq), Some(vr)) => {
            let qs = load_questions(existing(vq)?, &kg)?;
            let subs = subgraphs_from(&kg, &qs, &read_jsonl(existing(vr)?)?)?;
            Some(qs.iter().zip(&subs).map(|(q, s)| reasoning_example(&kg, q, s, &encoder)).collect::<Result<Vec<_>>>()?)
        }
        _ => None,
    };
    let init = match (&args.init_from, args.no_transfer) {
        (Some(p), false) => transfer_params(&Checkpoint::<f64>::load(existing(p)?)?.params, cfg.dims)?,
        _ => {
            // a distinct stream from the retriever's initialisation
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed ^ 0x7265_6173);
            ModelParams::random(cfg.dims, &mut rng)?
        }
    };
    let tc = kgqa::training::TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let outcome = match &valid_ex {
        Some(v) => {
            let mut f = |p: &ModelParams<f64>| hits_at_1(p, v);
            finetune(Phase::Reasoning, init, &train_ex, &tc, tc.reasoning_epochs, Some(&mut f))?
        }
        None => finetune(Phase::Reasoning, init, &train_ex, &tc, tc.reasoning_epochs, None)?,
    };
    persist_cache(cfg, &encoder)?;
    Checkpoint { params: outcome.params, encoder_ref: encoder_ref(cfg, &args.encoder), fingerprint: cfg.fingerprint() }
        .save(&args.out)?;
    write_metrics(cfg, args, &outcome.history)
}

fn dump_abstract(dir: &Path, id: &str, abs: &AbstractSubgraph, kg: &KnowledgeGraph) -> Result<()> {
    let safe: String = id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    std::fs::write(dir.join(format!("{safe}.json")), serde_json::to_string_pretty(&abs.to_json(kg))?)?;
    Ok(())
}

fn retrieve_cmd(cfg: &RunConfig, io: &InferArgs, dump: Option<&Path>) -> Result<()> {
    let kg = load_kg(cfg, &io.kg)?;
    let qs = load_qs(cfg, &kg, &io.questions)?;
    let encoder = load_encoder(cfg, &io.encoder)?;
    let params = Checkpoint::<f64>::load(existing(&io.checkpoint)?)?.params;
    if let Some(d) = dump {
        std::fs::create_dir_all(d)?;
    }
    let fp = cfg.fingerprint();
    let mut rows = Vec::with_capacity(qs.len());
    for q in &qs {
        let r = retrieve_with(q, &kg, &params, &encoder, cfg.k, cfg.max_hops, cfg.score_mode)?;
        if let Some(d) = dump {
            dump_abstract(d, &q.id, &r.abstract_graph, &kg)?;
        }
        rows.push(RetrievedRow {
            id: q.id.clone(),
            entities: r.subgraph.entities.iter().map(|&e| kg.entity_label(e).to_string()).collect(),
            selected: r.selected,
            coverage: r.coverage,
            subgraph_size: r.subgraph.entities.len(),
            fingerprint: fp.clone(),
        });
    }
    persist_cache(cfg, &encoder)?;
    write_jsonl(&io.out, rows)
}

fn answer_cmd(cfg: &RunConfig, io: &InferArgs, retrieved: &Path) -> Result<()> {
    let kg = load_kg(cfg, &io.kg)?;
    let qs = load_qs(cfg, &kg, &io.questions)?;
    let encoder = load_encoder(cfg, &io.encoder)?;
    let params = Checkpoint::<f64>::load(existing(&io.checkpoint)?)?.params;
    let rows: Vec<RetrievedRow> = read_jsonl(retrieved)?;
    let subs = subgraphs_from(&kg, &qs, &rows)?;
    let fp = cfg.fingerprint();
    let mut out = Vec::with_capacity(qs.len());
    for ((q, sub), row) in qs.iter().zip(&subs).zip(&rows) {
        let mut ranked = rank_entities(q, sub, &kg, &params, &encoder)?;
        ranked.truncate(cfg.top_n);
        out.push(ResultRow {
            id: q.id.clone(),
            answers: ranked
                .into_iter()
                .map(|r| RankedRow { entity: kg.entity_label(r.entity).to_string(), score: r.score })
                .collect(),
            coverage: row.coverage,
            subgraph_size: row.subgraph_size,
            fingerprint: fp.clone(),
        });
    }
    persist_cache(cfg, &encoder)?;
    write_jsonl(&io.out, out)
}

type Scored = (Vec<(EntityId, f64)>, Vec<EntityId>, ResultRow);

fn join_results(kg: &KnowledgeGraph, results: &Path, gold: &Path) -> Result<Vec<Scored>> {
    let rows: Vec<ResultRow> = read_jsonl(results)?;
    let qs = load_questions(existing(gold)?, kg)?;
    let by_id: std::collections::HashMap<&str, &QaInstance> = qs.iter().map(|q| (q.id.as_str(), q)).collect();
    rows.into_iter()
        .map(|row| {
            let q = by_id
                .get(row.id.as_str())
                .ok_or_else(|| Error::InvalidArgument(format!("result {} has no gold question", row.id)))?;
            let ranked = row
                .answers
                .iter()
                .map(|a| kg.entity(&a.entity).map(|e| (e, a.score)).ok_or_else(|| Error::UnknownEntity(a.entity.clone())))
                .collect::<Result<Vec<_>>>()?;
            Ok((ranked, q.answers.clone(), row))
        })
        .collect()
}

fn eval_cmd(
    cfg: &RunConfig,
    kg_path: &Path,
    results: &Path,
    gold: &Path,
    valid: Option<(PathBuf, PathBuf)>,
    threshold: Option<f64>,
    out: &Path,
) -> Result<()> {
    let kg = load_graph(existing(kg_path)?)?;
    let scored = join_results(&kg, results, gold)?;
    let threshold = match (threshold, valid) {
        (Some(t), _) => t,
        (None, Some((vr, vg))) => choose_threshold(
            &join_results(&kg, &vr, &vg)?
                .into_iter()
                .map(|(r, g, _)| (r, g.into_iter().collect()))
                .collect::<Vec<_>>(),
        ),
        (None, None) => choose_threshold(
            &scored.iter().map(|(r, g, _)| (r.clone(), g.iter().copied().collect())).collect::<Vec<_>>(),
        ),
    };
    let records = scored
        .iter()
        .map(|(ranked, gold, row)| {
            QuestionRecord::score(row.id.clone(), ranked, gold, threshold, row.coverage.unwrap_or(false), row.subgraph_size)
        })
        .collect();
    let report = EvalReport::from_records(records, threshold, cfg.fingerprint(), cfg.seed);
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    println!(
        "{}",
        serde_json::json!({ "hits_at_1": report.hits_at_1, "f1": report.f1, "coverage_rate": report.coverage_rate, "threshold": report.threshold })
    );
    Ok(())
}

