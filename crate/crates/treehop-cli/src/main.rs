//! `treehop`: corpus preparation, gate training, and multi-hop retrieval
//! from the command line. Subcommands chain through files: `synth` (or
//! your own exporter) produces JSONL, `ingest` packs a binary store,
//! `build-pairs`/`train` fit the gate, `retrieve`/`eval` run it.

mod config;
mod manifest;

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use treehop_core::data::{
    build_train_examples, curate, generate_synthetic, load_records_jsonl, write_corpus,
    DecompositionRecord,
};
use treehop_core::embedding::Embedding;
use treehop_core::eval::{build_report, load_eval_queries, render_markdown, run_eval, EvalSystem};
use treehop_core::gradcheck::{gradcheck, GradCheckReport};
use treehop_core::multihop::{multihop_retrieve, multihop_retrieve_timed, HopTrace};
use treehop_core::store::VectorStore;
use treehop_core::training::{load_examples_jsonl, save_examples_jsonl, train};
use treehop_core::{Error, Model64, Result, Store64};

#[derive(Parser)]
#[command(name = "treehop", version, about = "Embedding-level multi-hop retrieval")]
struct Cli {
    /// Base seed for anything stochastic (generation, sampling, dropout).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Emit machine-readable JSON on stdout instead of human text.
    #[arg(long, global = true)]
    json: bool,

    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-hop corpus with known gold chains.
    Synth(SynthArgs),
    /// Pack chunk JSONL into a binary vector store.
    Ingest(IngestArgs),
    /// Filter decomposition records down to trainable ones.
    Curate(CurateArgs),
    /// Expand records into hop-level training examples.
    BuildPairs(BuildPairsArgs),
    /// Fit the gate network contrastively and write a checkpoint.
    Train(TrainArgs),
    /// Run multi-hop retrieval for one query embedding.
    Retrieve(RetrieveArgs),
    /// Compare direct and multi-hop retrieval on a query set.
    Eval(EvalArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for chunks.jsonl, records.jsonl, queries.jsonl.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Embedding width.
    #[arg(long)]
    dim: Option<usize>,
    /// Entity vectors to draw (needs at least 3 per chain).
    #[arg(long)]
    entities: Option<usize>,
    /// Relation vectors to draw.
    #[arg(long)]
    relations: Option<usize>,
    /// Two-hop chains, each contributing two chunks and one query.
    #[arg(long)]
    chains: Option<usize>,
    /// Distractor chunks from unused entity-relation triples.
    #[arg(long)]
    distractors: Option<usize>,
    /// Gaussian noise added to every embedding before normalization.
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Args)]
struct IngestArgs {
    /// Chunk JSONL with {"id", "title"?, "text"?, "embedding"} lines.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Output store file (binary, f32 payload, metadata sidecar).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Required embedding width; defaults to the first record's width.
    #[arg(long)]
    dim: Option<usize>,
    /// Store embeddings as-is; by default they are unit-normalized on the
    /// way in. Cosine scores are unaffected either way, but the branch
    /// update subtracts the stored chunk from the query, so scale matters
    /// from the second hop on.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct CurateArgs {
    /// Decomposition records JSONL.
    #[arg(long, value_name = "FILE")]
    records: PathBuf,
    /// Optional store; records whose gold chunks are missing are dropped.
    #[arg(long, value_name = "FILE")]
    store: Option<PathBuf>,
    /// Output JSONL of the records that survived.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct BuildPairsArgs {
    /// Curated decomposition records JSONL.
    #[arg(long, value_name = "FILE")]
    records: PathBuf,
    /// Store the gold chunks resolve against.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,
    /// Output training-example JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Negatives sampled per example.
    #[arg(long)]
    negatives: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training-example JSONL from build-pairs.
    #[arg(long, value_name = "FILE")]
    examples: PathBuf,
    /// Store the example chunk ids resolve against.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,
    /// Output checkpoint (binary, f32 payload).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Softmax temperature of the contrastive loss.
    #[arg(long)]
    temperature: Option<f64>,
    /// Negatives scored per example.
    #[arg(long)]
    negatives: Option<usize>,
    /// Examples per optimizer step.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Attention-weight dropout rate during training.
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Vector store file.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,
    /// Gate checkpoint; omitted runs the untrained gate (pure q - c hops).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Query embedding JSON: a bare array or {"embedding": [...]}; "-" reads stdin.
    #[arg(long, value_name = "FILE|-")]
    query: String,
    /// Chunks kept per branch and per layer.
    #[arg(long)]
    k: Option<usize>,
    /// Retrieval layers to run.
    #[arg(long)]
    hops: Option<usize>,
    /// Drop candidates already retrieved by an earlier layer.
    #[arg(long, value_name = "BOOL")]
    redundancy_pruning: Option<bool>,
    /// Keep only the top K of each layer's merged candidate pool.
    #[arg(long, value_name = "BOOL")]
    layerwise_top_pruning: Option<bool>,
    /// Unit-normalize each branch query before its next hop.
    #[arg(long, value_name = "BOOL")]
    normalize_queries: Option<bool>,
    /// Write the full trace JSON here.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Include wall-clock timings in the trace (output is then not
    /// byte-reproducible across runs).
    #[arg(long)]
    timed: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Vector store file.
    #[arg(long, value_name = "FILE")]
    store: PathBuf,
    /// Eval queries JSONL with {"question_id", "query_emb", "gold_ids"}.
    #[arg(long, value_name = "FILE")]
    queries: PathBuf,
    /// Gate checkpoint for the multi-hop row; omitted = untrained gate.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Chunks kept per branch and per layer.
    #[arg(long)]
    k: Option<usize>,
    /// Retrieval layers to run.
    #[arg(long)]
    hops: Option<usize>,
    /// Drop candidates already retrieved by an earlier layer.
    #[arg(long, value_name = "BOOL")]
    redundancy_pruning: Option<bool>,
    /// Keep only the top K of each layer's merged candidate pool.
    #[arg(long, value_name = "BOOL")]
    layerwise_top_pruning: Option<bool>,
    /// Unit-normalize each branch query before its next hop.
    #[arg(long, value_name = "BOOL")]
    normalize_queries: Option<bool>,
    /// Timed passes per system for the latency column.
    #[arg(long)]
    reps: Option<usize>,
    /// Write the report JSON here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Embedding widths to test (repeatable; default 2, 4, 8).
    #[arg(long = "dim", value_name = "N")]
    dims: Vec<usize>,
    /// Random instances per width.
    #[arg(long)]
    trials: Option<usize>,
    /// Maximum allowed relative error.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(msg) = setup_threads() {
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

/// Usage and configuration mistakes exit 1, bad or missing data exits 2,
/// numeric failures exit 3.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidDimension => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// `TREEHOP_THREADS` pins the worker pool; 0 or unset keeps the default.
fn setup_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("TREEHOP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("TREEHOP_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<i32> {
    let file_cfg = config::load(cli.config.as_deref())?;
    let seed = config::resolve_seed(cli.seed, &file_cfg);
    let ctx = Ctx { json: cli.json, seed, config_path: cli.config.clone() };
    match cli.command {
        Command::Synth(args) => cmd_synth(&ctx, args, &file_cfg),
        Command::Ingest(args) => cmd_ingest(&ctx, args),
        Command::Curate(args) => cmd_curate(&ctx, args),
        Command::BuildPairs(args) => cmd_build_pairs(&ctx, args, &file_cfg),
        Command::Train(args) => cmd_train(&ctx, args, &file_cfg),
        Command::Retrieve(args) => cmd_retrieve(&ctx, args, &file_cfg),
        Command::Eval(args) => cmd_eval(&ctx, args, &file_cfg),
        Command::Gradcheck(args) => cmd_gradcheck(&ctx, args),
    }
}

struct Ctx {
    json: bool,
    seed: u64,
    config_path: Option<PathBuf>,
}

impl Ctx {
    fn manifest(&self, subcommand: &str) -> manifest::RunManifest {
        manifest::RunManifest::new(subcommand, self.seed, self.config_path.as_deref())
    }

    fn emit<T: serde::Serialize>(&self, value: &T, human: &str) -> Result<()> {
        if self.json {
            println!(
                "{}",
                serde_json::to_string_pretty(value)
                    .map_err(|e| Error::Config(format!("output: {e}")))?
            );
        } else {
            println!("{human}");
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn load_store(path: &Path) -> Result<Store64> {
    Store64::load(path)
}

fn load_model_or_zero(path: Option<&Path>, dim: usize) -> Result<Model64> {
    match path {
        Some(p) => Model64::load(p),
        None => Model64::zeros(dim, 0.0),
    }
}

fn cmd_synth(ctx: &Ctx, args: SynthArgs, file_cfg: &config::FileConfig) -> Result<i32> {
    let flags = config::SynthFlags {
        dim: args.dim,
        entities: args.entities,
        relations: args.relations,
        chains: args.chains,
        distractors: args.distractors,
        noise_sigma: args.noise_sigma,
    };
    let cfg = config::resolve_synth(&flags, &file_cfg.synth, ctx.seed);
    let corpus = generate_synthetic(&cfg)?;
    let paths = write_corpus(&corpus, &args.out)?;

    let m = ctx
        .manifest("synth")
        .output("chunks", &paths.chunks)
        .output("records", &paths.records)
        .output("queries", &paths.queries)
        .config(&cfg)?;
    manifest::write(&manifest::for_dir(&args.out), &m)?;

    #[derive(serde::Serialize)]
    struct Summary<'a> {
        chunks: usize,
        records: usize,
        queries: usize,
        dir: &'a str,
    }
    let dir = args.out.display().to_string();
    ctx.emit(
        &Summary {
            chunks: corpus.chunks.len(),
            records: corpus.records.len(),
            queries: corpus.queries.len(),
            dir: &dir,
        },
        &format!(
            "wrote {} chunks, {} records, {} queries to {dir}",
            corpus.chunks.len(),
            corpus.records.len(),
            corpus.queries.len()
        ),
    )?;
    Ok(0)
}

fn cmd_ingest(ctx: &Ctx, args: IngestArgs) -> Result<i32> {
    let normalize = !args.no_normalize;
    let label = args.input.display().to_string();
    let store: Store64 =
        VectorStore::ingest_jsonl(open(&args.input)?, &label, args.dim, normalize)?;
    store.save(&args.out)?;

    let mut m = ctx
        .manifest("ingest")
        .input("chunks", &args.input)
        .output("store", &args.out)
        .config(&serde_json::json!({
            "dim": store.dim(),
            "normalize": normalize,
        }))?;
    let sidecar = args.out.with_file_name(format!(
        "{}.meta.jsonl",
        args.out.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    if sidecar.exists() {
        m = m.output("metadata", &sidecar);
    }
    manifest::write(&manifest::for_file(&args.out), &m)?;

    #[derive(serde::Serialize)]
    struct Summary {
        chunks: usize,
        dim: usize,
    }
    ctx.emit(
        &Summary { chunks: store.len(), dim: store.dim() },
        &format!("ingested {} chunks at dim {} into {}", store.len(), store.dim(), args.out.display()),
    )?;
    Ok(0)
}

fn write_records_jsonl(records: &[DecompositionRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut w, rec)
            .map_err(|e| Error::Numeric(format!("serialization: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_curate(ctx: &Ctx, args: CurateArgs) -> Result<i32> {
    let label = args.records.display().to_string();
    let records = load_records_jsonl(open(&args.records)?, &label)?;
    let known = match &args.store {
        Some(p) => {
            Some(load_store(p)?.ids().map(|s| s.to_string()).collect::<std::collections::HashSet<_>>())
        }
        None => None,
    };
    let (kept, report) = curate(records, known.as_ref());
    write_records_jsonl(&kept, &args.out)?;

    let mut m = ctx
        .manifest("curate")
        .input("records", &args.records)
        .output("records", &args.out)
        .config(&report)?;
    if let Some(p) = &args.store {
        m = m.input("store", p);
    }
    manifest::write(&manifest::for_file(&args.out), &m)?;

    let dropped: usize = report.dropped.values().sum();
    ctx.emit(
        &report,
        &format!("kept {} records, dropped {dropped} ({:?})", report.kept, report.dropped),
    )?;
    Ok(0)
}

fn cmd_build_pairs(ctx: &Ctx, args: BuildPairsArgs, file_cfg: &config::FileConfig) -> Result<i32> {
    let flags = config::TrainFlags {
        temperature: None,
        negatives: args.negatives,
        batch_size: None,
        learning_rate: None,
        weight_decay: None,
        epochs: None,
        dropout: None,
    };
    let cfg = config::resolve_train(&flags, &file_cfg.train, ctx.seed);
    let store = load_store(&args.store)?;
    let label = args.records.display().to_string();
    let records = load_records_jsonl(open(&args.records)?, &label)?;
    let examples = build_train_examples(&records, &store, &cfg)?;
    save_examples_jsonl(&examples, File::create(&args.out)?)?;

    let m = ctx
        .manifest("build-pairs")
        .input("records", &args.records)
        .input("store", &args.store)
        .output("examples", &args.out)
        .config(&serde_json::json!({
            "negatives": cfg.num_negatives,
            "seed": cfg.seed,
        }))?;
    manifest::write(&manifest::for_file(&args.out), &m)?;

    #[derive(serde::Serialize)]
    struct Summary {
        examples: usize,
    }
    ctx.emit(
        &Summary { examples: examples.len() },
        &format!("wrote {} training examples to {}", examples.len(), args.out.display()),
    )?;
    Ok(0)
}

fn cmd_train(ctx: &Ctx, args: TrainArgs, file_cfg: &config::FileConfig) -> Result<i32> {
    let flags = config::TrainFlags {
        temperature: args.temperature,
        negatives: args.negatives,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        weight_decay: args.weight_decay,
        epochs: args.epochs,
        dropout: args.dropout,
    };
    let cfg = config::resolve_train(&flags, &file_cfg.train, ctx.seed);
    let store = load_store(&args.store)?;
    let label = args.examples.display().to_string();
    let examples = load_examples_jsonl(open(&args.examples)?, &label, &store, &cfg)?;
    let (params, mut report) = train(&examples, &store, &cfg)?;
    params.save(&args.out)?;
    report.checkpoint_path = Some(args.out.display().to_string());

    let m = ctx
        .manifest("train")
        .input("examples", &args.examples)
        .input("store", &args.store)
        .output("checkpoint", &args.out)
        .config(&cfg)?;
    manifest::write(&manifest::for_file(&args.out), &m)?;

    ctx.emit(
        &report,
        &format!(
            "trained on {} examples for {} epochs in {:.1}s; loss {:.4} -> {:.4}; wrote {}",
            report.examples,
            report.epochs_run,
            report.wall_seconds,
            report.epoch_losses.first().unwrap_or(&f64::NAN),
            report.epoch_losses.last().unwrap_or(&f64::NAN),
            args.out.display()
        ),
    )?;
    Ok(0)
}

fn read_query_embedding(src: &str) -> Result<Vec<f64>> {
    let raw = if src == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        buf
    } else {
        std::fs::read_to_string(src)?
    };
    let value: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| Error::parse(src, 1, e.to_string()))?;
    let arr = match &value {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(m) => m
            .get("embedding")
            .or_else(|| m.get("query_emb"))
            .and_then(|v| v.as_array())
            .ok_or_else(|| {
                Error::parse(src, 1, "expected an array or an object with an \"embedding\" array")
            })?,
        _ => {
            return Err(Error::parse(
                src,
                1,
                "expected an array or an object with an \"embedding\" array",
            ))
        }
    };
    arr.iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::parse(src, 1, "embedding values must be numbers")))
        .collect()
}

fn cmd_retrieve(ctx: &Ctx, args: RetrieveArgs, file_cfg: &config::FileConfig) -> Result<i32> {
    let flags = config::ControllerFlags {
        k: args.k,
        hops: args.hops,
        redundancy_pruning: args.redundancy_pruning,
        layerwise_top_pruning: args.layerwise_top_pruning,
        normalize_queries: args.normalize_queries,
    };
    let cfg = config::resolve_controller(&flags, &file_cfg.controller);
    let store = load_store(&args.store)?;
    let params = load_model_or_zero(args.model.as_deref(), store.dim())?;
    let query = Embedding::from_f64(&read_query_embedding(&args.query)?)?;

    let trace: HopTrace = if args.timed {
        multihop_retrieve_timed(&store, &params, &query, &cfg)?
    } else {
        multihop_retrieve(&store, &params, &query, &cfg)?
    };

    if let Some(trace_path) = &args.trace {
        let json = serde_json::to_string_pretty(&trace)
            .map_err(|e| Error::Numeric(format!("trace serialization: {e}")))?;
        std::fs::write(trace_path, json + "\n")?;
        let mut m = ctx
            .manifest("retrieve")
            .input("store", &args.store)
            .output("trace", trace_path)
            .config(&cfg)?;
        if let Some(p) = &args.model {
            m = m.input("model", p);
        }
        if args.query != "-" {
            m = m.input("query", Path::new(&args.query));
        }
        manifest::write(&manifest::for_file(trace_path), &m)?;
    }

    if ctx.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&trace)
                .map_err(|e| Error::Numeric(format!("trace serialization: {e}")))?
        );
    } else {
        for chunk in &trace.retrieved {
            let title = store
                .get(&chunk.id)
                .and_then(|r| r.title.as_deref())
                .unwrap_or("");
            println!("layer {}  score {:+.6}  {}  {}", chunk.layer, chunk.score, chunk.id, title);
        }
        println!(
            "retrieved {} chunks over {} layers ({} gate forwards{})",
            trace.retrieved.len(),
            trace.layers.len(),
            trace.forward_count,
            if trace.early_terminated { ", stopped early" } else { "" }
        );
    }
    Ok(0)
}

fn cmd_eval(ctx: &Ctx, args: EvalArgs, file_cfg: &config::FileConfig) -> Result<i32> {
    let flags = config::ControllerFlags {
        k: args.k,
        hops: args.hops,
        redundancy_pruning: args.redundancy_pruning,
        layerwise_top_pruning: args.layerwise_top_pruning,
        normalize_queries: args.normalize_queries,
    };
    let cfg = config::resolve_controller(&flags, &file_cfg.controller);
    let reps = config::pick(args.reps, file_cfg.eval.reps, 3);
    let store = load_store(&args.store)?;
    let params = load_model_or_zero(args.model.as_deref(), store.dim())?;
    let label = args.queries.display().to_string();
    let queries = load_eval_queries(open(&args.queries)?, &label)?;

    let direct = run_eval("direct", &EvalSystem::Direct { k: cfg.k }, &store, &queries, reps)?;
    let multi = run_eval(
        "multihop",
        &EvalSystem::MultiHop { params: &params, config: cfg.clone() },
        &store,
        &queries,
        reps,
    )?;
    let report = build_report(&store, vec![direct, multi])?;

    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Numeric(format!("report serialization: {e}")))?;
        std::fs::write(out, json + "\n")?;
        let mut m = ctx
            .manifest("eval")
            .input("store", &args.store)
            .input("queries", &args.queries)
            .output("report", out)
            .config(&serde_json::json!({ "controller": cfg, "reps": reps }))?;
        if let Some(p) = &args.model {
            m = m.input("model", p);
        }
        manifest::write(&manifest::for_file(out), &m)?;
    }

    if ctx.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Numeric(format!("report serialization: {e}")))?
        );
    } else {
        print!("{}", render_markdown(&report));
    }
    Ok(0)
}

fn cmd_gradcheck(ctx: &Ctx, args: GradcheckArgs) -> Result<i32> {
    let dims = if args.dims.is_empty() { vec![2, 4, 8] } else { args.dims.clone() };
    let trials = args.trials.unwrap_or(34);
    let tolerance = args.tolerance.unwrap_or(1e-4);
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }

    let mut reports: Vec<GradCheckReport> = Vec::new();
    let mut max_rel_err = 0.0f64;
    for &dim in &dims {
        let report = gradcheck(dim, trials, ctx.seed)?;
        max_rel_err = max_rel_err.max(report.max_rel_err);
        reports.push(report);
    }
    let pass = max_rel_err < tolerance;

    if ctx.json {
        let out = serde_json::json!({
            "reports": reports,
            "max_rel_err": max_rel_err,
            "tolerance": tolerance,
            "pass": pass,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&out)
                .map_err(|e| Error::Numeric(format!("output: {e}")))?
        );
    } else {
        for r in &reports {
            println!("dim {:>3}: {} trials, max rel err {:.3e}", r.dim, r.trials, r.max_rel_err);
        }
        println!(
            "max relative error {max_rel_err:.3e} (tolerance {tolerance:.1e}): {}",
            if pass { "pass" } else { "FAIL" }
        );
    }
    Ok(if pass { 0 } else { 3 })
}
