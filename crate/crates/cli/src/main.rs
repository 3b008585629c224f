//! `seek`: train, evaluate, inspect and benchmark segmented knowledge-graph
//! embeddings.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

mod manifest;

use std::env;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use seek_core::bench::{bench_k, BenchConfig};
use seek_core::data::write_triples;
use seek_core::eval::write_case_study;
use seek_core::toy::{family_graph, ToyConfig};
use seek_core::trainer::write_loss_csv;
use seek_core::{
    case_study, evaluate, Checkpoint, Dataset, Error, FilterIndex, ScoreFn, Scorer, Split, TrainConfig, Trainer,
    Triple, TripleSet, Vocabulary,
};

use manifest::{is_info_key, Manifest};

/// Default dataset directory, and base for relative `--data` paths that do
/// not exist under the working directory.
const DATA_ROOT_ENV: &str = "SEEK_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(name = "seek", version = manifest::BUILD_ID, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train embeddings on `train.txt` and write a checkpoint.
    Train(TrainArgs),
    /// Filtered (or raw) link prediction on a split.
    Evaluate(EvaluateArgs),
    /// Forward and reverse probabilities for a list of triples.
    CaseStudy(CaseStudyArgs),
    /// Time score + gradient evaluation for several segment counts.
    BenchK(BenchArgs),
    /// Write the synthetic family graph as a dataset directory.
    Toy(ToyArgs),
    /// Repeat a run recorded in a manifest, writing outputs to a new directory.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Number of segments; must divide --dim.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 400)]
    dim: usize,
    /// L2 regularization weight.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Negative samples per positive triple.
    #[arg(long, default_value_t = 100)]
    neg: usize,
    /// AdaGrad initial learning rate.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training threads. Only 1 gives bit-reproducible results.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Scoring function: f1, f2, f3 or f4.
    #[arg(long = "fn", default_value = "f4", value_parser = parse_score_fn)]
    score_fn: ScoreFn,
    /// Redraw negatives that are known triples in any split.
    #[arg(long)]
    filter_negatives: bool,
}

impl ModelArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            k: self.k,
            dim: self.dim,
            lambda: self.lambda,
            neg: self.neg,
            lr: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            workers: self.workers,
            score_fn: self.score_fn,
            filter_negatives: self.filter_negatives,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory with train.txt, valid.txt and test.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    /// Also write the checkpoint every N epochs (0 disables).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Per-epoch loss trace; defaults to `<checkpoint>.loss.csv`.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    /// Run manifest; defaults to `<checkpoint>.manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long = "fn", default_value = "f4", value_parser = parse_score_fn)]
    score_fn: ScoreFn,
    /// Rank against all candidates instead of filtering known triples.
    #[arg(long)]
    raw: bool,
    /// Split to rank: test or valid.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    /// Report CSV (`metric,side,value`).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run manifest; defaults to `<csv>.manifest` when --csv is given.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CaseStudyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Tab-separated `head relation tail` lines.
    #[arg(long)]
    triples: PathBuf,
    #[arg(long = "fn", value_delimiter = ',', default_value = "f1,f2,f4", value_parser = parse_score_fn)]
    score_fns: Vec<ScoreFn>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Draw triples from this dataset's training split instead of a synthetic table.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,4,8,16,20")]
    ks: Vec<usize>,
    /// Score + gradient evaluations per timed run.
    #[arg(long, default_value_t = 20_000)]
    ops: usize,
    /// Timed runs per k; the fastest is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `k,seconds` CSV; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ToyArgs {
    /// Directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RerunArgs {
    manifest: PathBuf,
    /// Directory receiving the new outputs and manifest.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_score_fn(s: &str) -> Result<ScoreFn, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "test" => Ok(Split::Test),
        "valid" => Ok(Split::Valid),
        other => Err(format!("unknown split `{other}` (expected test or valid)")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("seek: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(message)) => {
            eprintln!("seek: error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::CaseStudy(args) => cmd_case_study(args),
        Command::BenchK(args) => cmd_bench_k(args),
        Command::Toy(args) => cmd_toy(args),
        Command::Rerun(args) => cmd_rerun(args),
    }
}

fn resolve_data(arg: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let root = env::var_os(DATA_ROOT_ENV).map(PathBuf::from);
    match (arg, root) {
        (Some(path), Some(root)) if path.is_relative() && !path.exists() => Ok(root.join(path)),
        (Some(path), _) => Ok(path),
        (None, Some(root)) => Ok(root),
        (None, None) => Err(Failure::Usage(format!(
            "no dataset given: pass --data or set {DATA_ROOT_ENV}"
        ))),
    }
}

fn load_dataset(dir: &Path) -> Result<Dataset, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Runtime(format!(
            "dataset directory {} not found",
            dir.display()
        )));
    }
    Ok(Dataset::load(dir)?)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(m: &mut Manifest, path: Option<PathBuf>) -> CmdResult {
    if let Some(path) = path {
        m.set_path("manifest", &path);
        m.write(&path).map_err(Failure::Runtime)?;
    }
    Ok(())
}

fn record_config(m: &mut Manifest, cfg: &TrainConfig) {
    m.set("k", cfg.k);
    m.set("dim", cfg.dim);
    m.set("lambda", cfg.lambda);
    m.set("neg", cfg.neg);
    m.set("lr", cfg.lr);
    m.set("epochs", cfg.epochs);
    m.set("seed", cfg.seed);
    m.set("workers", cfg.workers);
    m.set("fn", cfg.score_fn);
    m.set("filter-negatives", cfg.filter_negatives);
    m.set("deterministic", cfg.is_deterministic());
}

fn describe_triple(vocab: &Vocabulary, triple: Triple) -> String {
    match (vocab.entity(triple.h), vocab.relation(triple.r), vocab.entity(triple.t)) {
        (Some(h), Some(r), Some(t)) => format!("({h}, {r}, {t})"),
        _ => format!("({}, {}, {})", triple.h, triple.r, triple.t),
    }
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let cfg = args.model.config();
    cfg.validate().map_err(usage)?;
    let data_dir = resolve_data(args.data)?;
    let mut m = Manifest::new("train");

    let start = Instant::now();
    let data = load_dataset(&data_dir)?;
    m.time("load", start.elapsed().as_secs_f64());
    if data.train.is_empty() {
        return Err(Failure::Runtime(format!(
            "{} has no training triples",
            data_dir.display()
        )));
    }
    let filter = cfg.filter_negatives.then(|| data.filter_index());
    eprintln!(
        "loaded {} entities, {} relations, {} train triples",
        data.vocab.num_entities(),
        data.vocab.num_relations(),
        data.train.len()
    );

    let start = Instant::now();
    let mut trainer = Trainer::new(cfg.clone(), data.vocab.num_entities(), data.vocab.num_relations())?;
    let save = |table: &seek_core::EmbeddingTable| -> CmdResult {
        Checkpoint::new(cfg.k, data.vocab.clone(), table.clone())?.write(&args.checkpoint)?;
        Ok(())
    };
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let stats = trainer
            .run_epoch(epoch, &data.train.triples, filter.as_ref())
            .map_err(|e| match e {
                Error::NonFinite { triple, epoch } => Failure::Runtime(format!(
                    "training diverged: non-finite update on {} in epoch {}; try a smaller --lr or a larger --lambda",
                    describe_triple(&data.vocab, triple),
                    epoch.unwrap_or_default()
                )),
                other => other.into(),
            })?;
        eprintln!(
            "epoch {epoch}/{} mean_loss {:.6} ({:.2}s)",
            cfg.epochs, stats.mean_loss, stats.seconds
        );
        epochs.push(stats);
        if args.checkpoint_every > 0 && epoch % args.checkpoint_every == 0 && epoch < cfg.epochs {
            save(trainer.table())?;
        }
    }
    m.time("train", start.elapsed().as_secs_f64());

    let start = Instant::now();
    save(trainer.table())?;
    let loss_csv = args
        .loss_csv
        .unwrap_or_else(|| with_suffix(&args.checkpoint, ".loss.csv"));
    write_loss_csv(&loss_csv, &epochs)?;
    m.time("write", start.elapsed().as_secs_f64());

    m.set_path("data", &data_dir);
    record_config(&mut m, &cfg);
    m.set_path("checkpoint", &args.checkpoint);
    m.set("checkpoint-every", args.checkpoint_every);
    m.set_path("loss-csv", &loss_csv);
    if let Some(last) = epochs.last() {
        m.set("result.final_mean_loss", last.mean_loss);
    }
    let manifest = args
        .manifest
        .unwrap_or_else(|| with_suffix(&args.checkpoint, ".manifest"));
    write_manifest(&mut m, Some(manifest))?;
    eprintln!("wrote {}", args.checkpoint.display());
    Ok(())
}

/// Re-expresses a split in checkpoint ids, by name.
fn remap(set: &TripleSet, from: &Vocabulary, to: &Vocabulary) -> Result<Vec<Triple>, Failure> {
    set.iter()
        .map(|&t| {
            let (h, r, tail) = from.decode(t);
            to.encode(h, r, tail).map_err(Failure::from)
        })
        .collect()
}

fn cmd_evaluate(args: EvaluateArgs) -> CmdResult {
    let data_dir = resolve_data(args.data)?;
    let mut m = Manifest::new("evaluate");

    let start = Instant::now();
    let ckpt = Checkpoint::read(&args.checkpoint)?;
    let data = load_dataset(&data_dir)?;
    m.time("load", start.elapsed().as_secs_f64());

    let (ce, cr) = (ckpt.vocab.num_entities(), ckpt.vocab.num_relations());
    let (de, dr) = (data.vocab.num_entities(), data.vocab.num_relations());
    if (ce, cr) != (de, dr) {
        return Err(Failure::Runtime(format!(
            "checkpoint {} has {ce} entities and {cr} relations but dataset {} has {de} entities and {dr} relations",
            args.checkpoint.display(),
            data_dir.display()
        )));
    }
    let ids = |set: &TripleSet| remap(set, &data.vocab, &ckpt.vocab).map(|t| TripleSet::new(set.split, t));
    let (train, valid, test) = (ids(&data.train)?, ids(&data.valid)?, ids(&data.test)?);
    let target = match args.split {
        Split::Valid => &valid,
        _ => &test,
    };
    let filter: Option<FilterIndex> = (!args.raw).then(|| seek_core::build_filter_index(&train, &valid, &test));

    let start = Instant::now();
    let scorer = Scorer::new(args.score_fn, ckpt.segments);
    let report = evaluate(target, &ckpt.table, scorer, filter.as_ref())?;
    m.time("evaluate", start.elapsed().as_secs_f64());

    println!(
        "{} split, {} ranking, fn={}, {} triples",
        args.split.file_name().trim_end_matches(".txt"),
        if args.raw { "raw" } else { "filtered" },
        args.score_fn,
        target.len()
    );
    print!("{}", report.to_table());

    m.set_path("data", &data_dir);
    m.set_path("checkpoint", &args.checkpoint);
    m.set("fn", args.score_fn);
    m.set("raw", args.raw);
    m.set("split", args.split.file_name().trim_end_matches(".txt"));
    m.set("result.mrr", report.both.mrr);
    m.set("result.hits10", report.both.hits10);
    if let Some(csv) = &args.csv {
        report.write_csv(csv)?;
        m.set_path("csv", csv);
    }
    let manifest = args
        .manifest
        .or_else(|| args.csv.as_ref().map(|c| with_suffix(c, ".manifest")));
    write_manifest(&mut m, manifest)
}

/// Parses `head\trelation\ttail` lines against the checkpoint vocabulary.
fn read_named_triples(path: &Path, vocab: &Vocabulary) -> Result<Vec<Triple>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [h, r, t] = fields[..] else {
            return Err(Failure::Runtime(format!(
                "{}:{}: expected 3 tab-separated fields, found {}",
                path.display(),
                i + 1,
                fields.len()
            )));
        };
        let triple = vocab
            .encode(h, r, t)
            .map_err(|e| Failure::Runtime(format!("{}:{}: {e}", path.display(), i + 1)))?;
        triples.push(triple);
    }
    Ok(triples)
}

fn cmd_case_study(args: CaseStudyArgs) -> CmdResult {
    let mut m = Manifest::new("case-study");
    let ckpt = Checkpoint::read(&args.checkpoint)?;
    let triples = read_named_triples(&args.triples, &ckpt.vocab)?;

    let mut rows = Vec::new();
    for &f in &args.score_fns {
        rows.extend(case_study(&triples, &ckpt.table, ckpt.segments, f)?);
    }
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| io_failure(path, e))?;
            write_case_study(BufWriter::new(file), &rows, &ckpt.vocab).map_err(|e| io_failure(path, e))?;
        }
        None => write_case_study(io::stdout().lock(), &rows, &ckpt.vocab)
            .map_err(|e| Failure::Runtime(format!("stdout: {e}")))?,
    }

    m.set_path("checkpoint", &args.checkpoint);
    m.set_path("triples", &args.triples);
    let names: Vec<String> = args.score_fns.iter().map(ToString::to_string).collect();
    m.set("fn", names.join(","));
    if let Some(out) = &args.out {
        m.set_path("out", out);
    }
    let manifest = args
        .manifest
        .or_else(|| args.out.as_ref().map(|o| with_suffix(o, ".manifest")));
    write_manifest(&mut m, manifest)
}

fn cmd_bench_k(args: BenchArgs) -> CmdResult {
    let cfg = BenchConfig {
        dim: args.dim,
        ks: args.ks.clone(),
        ops: args.ops,
        repeats: args.repeats,
        seed: args.seed,
    };
    if cfg.ks.is_empty() || cfg.ops == 0 || cfg.repeats == 0 {
        return Err(Failure::Usage(
            "--ks, --ops and --repeats must be non-empty / positive".into(),
        ));
    }
    for &k in &cfg.ks {
        seek_core::ModelConfig::new(cfg.dim, k, 0).map_err(usage)?;
    }
    let mut m = Manifest::new("bench-k");
    let data = match &args.data {
        Some(dir) => Some(load_dataset(&resolve_data(Some(dir.clone()))?)?),
        None => None,
    };

    let start = Instant::now();
    let rows = match &data {
        Some(d) => bench_k(
            &cfg,
            Some(&d.train.triples),
            d.vocab.num_entities(),
            d.vocab.num_relations(),
        )?,
        None => bench_k(&cfg, None, 10_000, 100)?,
    };
    m.time("bench", start.elapsed().as_secs_f64());

    let mut text = String::from("k,seconds\n");
    for row in &rows {
        text.push_str(&format!("{},{}\n", row.k, row.seconds));
    }
    match &args.csv {
        Some(path) => fs::write(path, &text).map_err(|e| io_failure(path, e))?,
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Runtime(format!("stdout: {e}")))?,
    }

    if let Some(dir) = &args.data {
        m.set_path("data", &resolve_data(Some(dir.clone()))?);
    }
    m.set("dim", cfg.dim);
    let ks: Vec<String> = cfg.ks.iter().map(ToString::to_string).collect();
    m.set("ks", ks.join(","));
    m.set("ops", cfg.ops);
    m.set("repeats", cfg.repeats);
    m.set("seed", cfg.seed);
    if let Some(csv) = &args.csv {
        m.set_path("csv", csv);
    }
    let manifest = args
        .manifest
        .or_else(|| args.csv.as_ref().map(|c| with_suffix(c, ".manifest")));
    write_manifest(&mut m, manifest)
}

fn cmd_toy(args: ToyArgs) -> CmdResult {
    let data = family_graph(&ToyConfig {
        seed: args.seed,
        ..ToyConfig::default()
    });
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    for set in [&data.train, &data.valid, &data.test] {
        write_triples(&args.out.join(set.split.file_name()), &set.triples, &data.vocab)?;
    }
    eprintln!(
        "wrote {} train, {} valid, {} test triples to {}",
        data.train.len(),
        data.valid.len(),
        data.test.len(),
        args.out.display()
    );
    Ok(())
}

/// Output keys per command; rerun redirects these into `--out-dir`.
fn output_keys(command: &str) -> Option<&'static [&'static str]> {
    match command {
        "train" => Some(&["checkpoint", "loss-csv"]),
        "evaluate" => Some(&["csv"]),
        "case-study" => Some(&["out"]),
        "bench-k" => Some(&["csv"]),
        _ => None,
    }
}

fn cmd_rerun(args: RerunArgs) -> CmdResult {
    let m = Manifest::read(&args.manifest).map_err(Failure::Usage)?;
    let command = m.get("command").unwrap_or_default().to_string();
    let outputs = output_keys(&command).ok_or_else(|| Failure::Usage(format!("cannot rerun command `{command}`")))?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
    let relocate = |value: &str| {
        let name = Path::new(value)
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| value.into());
        args.out_dir.join(name).display().to_string()
    };

    let mut argv = vec!["seek".to_string(), command.clone()];
    for (key, value) in m.entries().filter(|(k, _)| !is_info_key(k)) {
        let value = if outputs.contains(&key) {
            relocate(value)
        } else {
            value.to_string()
        };
        match value.as_str() {
            "true" => argv.push(format!("--{key}")),
            "false" => {}
            _ => argv.extend([format!("--{key}"), value]),
        }
    }
    let manifest_name = m.get("manifest").unwrap_or("run.manifest");
    argv.extend(["--manifest".to_string(), relocate(manifest_name)]);

    let cli = Cli::try_parse_from(&argv).map_err(|e| Failure::Usage(format!("manifest does not parse: {e}")))?;
    run(cli)
}
