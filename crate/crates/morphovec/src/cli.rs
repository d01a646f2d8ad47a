//! Command-line pipeline: preprocess → train → derive → evaluate.
//!
//! One binary with subcommands. Every run logs its resolved configuration to
//! stderr before doing work, writes data to files or stdout only, and exits
//! 0 on success, 1 on usage errors, 2 on data/parse errors and 3 on runtime
//! failures. Existing outputs are never overwritten without `--overwrite`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::compose::{
    derive_suffix_offsets, Embedder, Scheme, SchemeEmbedder, StoreBundle, SuffixOffsetTable,
    DEFAULT_OOV_FILL,
};
use crate::config::{apply_to_train_config, parse_config_file};
use crate::corpus::{
    collect_annotated_types, read_annotated, read_raw, render_form, Lexicon, MorphForm,
};
use crate::error::{Error, Result};
use crate::eval::classify::{classify_docs, load_labeled_docs, ClassifyOptions};
use crate::eval::{
    analogy_accuracy, group_accuracy, load_analogy_questions, load_group_questions,
    rank_by_similarity, AnalogyOptions, EvalReport,
};
use crate::store::VectorStore;
use crate::subword::{
    train_bpe, train_subword, BpeModel, SubwordIndex, SubwordVectors, DEFAULT_BUCKETS,
    DEFAULT_N_MAX, DEFAULT_N_MIN,
};
use crate::trainer::{train, ModelKind, TrainConfig};
use crate::corpus::build_vocab;

#[derive(Parser)]
#[command(
    name = "morphovec",
    version,
    about = "Morphology-aware word embedding toolkit",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render an annotated corpus into a training form
    Preprocess(PreprocessArgs),
    /// Train word vectors over a corpus
    Train(TrainArgs),
    /// Train hashed character n-gram vectors
    TrainSubword(TrainSubwordArgs),
    /// Train a BPE piece tokenizer
    BpeTrain(BpeTrainArgs),
    /// Derive per-suffix offset vectors from surface/lemma differences
    DeriveSuffix(DeriveSuffixArgs),
    /// Analogy evaluation with occurrence-in-first-n reporting
    EvalAnalogy(EvalAnalogyArgs),
    /// Odd-one-out group evaluation
    EvalGroup(EvalGroupArgs),
    /// Averaged-embedding document classification
    EvalClassify(EvalClassifyArgs),
    /// Nearest neighbors of a token
    Nn(NnArgs),
    /// Summarize a vector store or BPE model
    Info(InfoArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (1 = deterministic)
    #[arg(long)]
    threads: Option<usize>,

    /// `key = value` config file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct TrainFlags {
    /// cbow or skipgram
    #[arg(long)]
    model: Option<String>,

    /// Vector dimension
    #[arg(long)]
    dim: Option<usize>,

    /// Context tokens per side
    #[arg(long)]
    window: Option<usize>,

    /// Negative samples per positive pair
    #[arg(long)]
    negatives: Option<usize>,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    lr_start: Option<f32>,

    #[arg(long)]
    lr_min: Option<f32>,

    /// Subsampling threshold, or `off`
    #[arg(long)]
    subsample: Option<String>,

    /// Minimum token count kept in the vocabulary
    #[arg(long)]
    min_count: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct CorpusInput {
    /// Input corpus path
    #[arg(long)]
    input: PathBuf,

    /// Input layout: `raw` (one sentence per line) or `annotated` (TSV)
    #[arg(long, default_value = "raw")]
    format: String,

    /// Rendering of annotated input: surface, lemma, lemma-suffix, pieces
    #[arg(long, default_value = "surface")]
    form: String,

    /// Trained BPE model, required by `--form pieces`
    #[arg(long)]
    bpe_model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[command(flatten)]
    corpus: CorpusInput,

    /// Rendered corpus output (one sentence per line)
    #[arg(long)]
    output: PathBuf,

    /// Also write a surface→analysis lexicon (annotated input only)
    #[arg(long)]
    lexicon_out: Option<PathBuf>,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusInput,

    /// Output vector store
    #[arg(long)]
    output: PathBuf,

    #[command(flatten)]
    flags: TrainFlags,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct TrainSubwordArgs {
    #[command(flatten)]
    corpus: CorpusInput,

    /// Output stem; writes <stem>.meta, <stem>.words.vec, <stem>.ngrams.vec
    #[arg(long)]
    output: PathBuf,

    #[arg(long, default_value_t = DEFAULT_N_MIN)]
    n_min: usize,

    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    n_max: usize,

    /// Hash space for n-gram vectors
    #[arg(long, default_value_t = DEFAULT_BUCKETS)]
    buckets: usize,

    #[command(flatten)]
    flags: TrainFlags,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct BpeTrainArgs {
    #[command(flatten)]
    corpus: CorpusInput,

    /// Target piece-vocabulary size
    #[arg(long, default_value_t = 32000)]
    target_size: usize,

    /// Output BPE model file
    #[arg(long)]
    output: PathBuf,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct DeriveSuffixArgs {
    /// Annotated corpus supplying (surface, lemma, suffix) types
    #[arg(long)]
    annotated: PathBuf,

    /// Store supplying surface vectors (and lemma vectors by default)
    #[arg(long)]
    surface_store: PathBuf,

    /// Optional separate store for the lemma side of the subtraction
    #[arg(long)]
    lemma_store: Option<PathBuf>,

    /// Output offset table (vector text format, `>>id` tokens)
    #[arg(long)]
    output: PathBuf,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    common: CommonArgs,
}

/// Store and scheme flags shared by the evaluation subcommands.
#[derive(Args, Debug, Clone)]
struct SchemeFlags {
    /// Composition scheme; omit to look tokens up directly in --store
    #[arg(long)]
    scheme: Option<String>,

    /// Surface→analysis lexicon (needed by lemma-based schemes)
    #[arg(long)]
    lexicon: Option<PathBuf>,

    #[arg(long)]
    surface_store: Option<PathBuf>,

    #[arg(long)]
    lemma_store: Option<PathBuf>,

    #[arg(long)]
    lemma_suffix_store: Option<PathBuf>,

    /// Derived suffix offset table
    #[arg(long)]
    offsets: Option<PathBuf>,

    #[arg(long)]
    pieces_store: Option<PathBuf>,

    #[arg(long)]
    bpe_model: Option<PathBuf>,

    /// Subword model stem (as written by train-subword)
    #[arg(long)]
    subword: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalAnalogyArgs {
    /// Candidate store queries are ranked against
    #[arg(long)]
    store: PathBuf,

    /// Question file: `a b c d` per line, `:` section headers skipped
    #[arg(long)]
    questions: PathBuf,

    /// Comma-separated ranks for occurrence-in-first-n columns
    #[arg(long, default_value = "1,3,5,10,20,40")]
    ns: String,

    /// Remove the three query words from the candidates
    #[arg(long)]
    exclude_inputs: bool,

    /// Row label in the report (defaults to the scheme or store name)
    #[arg(long)]
    label: Option<String>,

    /// Machine-readable `metric<TAB>value` output
    #[arg(long)]
    metrics: Option<PathBuf>,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    scheme: SchemeFlags,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct EvalGroupArgs {
    /// Store resolving group members (unless --scheme is given)
    #[arg(long)]
    store: PathBuf,

    /// Group file: members space-separated, odd one first
    #[arg(long)]
    questions: PathBuf,

    #[arg(long)]
    label: Option<String>,

    #[arg(long)]
    metrics: Option<PathBuf>,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    scheme: SchemeFlags,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct EvalClassifyArgs {
    /// Store embedding document tokens (unless --scheme is given)
    #[arg(long)]
    store: PathBuf,

    /// Training docs: `label<TAB>token token ...`
    #[arg(long)]
    train_docs: PathBuf,

    /// Held-out docs in the same format
    #[arg(long)]
    test_docs: PathBuf,

    /// Fill value of the out-of-vocabulary vector
    #[arg(long, default_value_t = DEFAULT_OOV_FILL)]
    oov_fill: f32,

    #[arg(long)]
    label: Option<String>,

    #[arg(long)]
    metrics: Option<PathBuf>,

    #[arg(long)]
    overwrite: bool,

    #[command(flatten)]
    scheme: SchemeFlags,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct NnArgs {
    #[arg(long)]
    store: PathBuf,

    /// Query token
    #[arg(long)]
    token: String,

    #[arg(long, default_value_t = 5)]
    top_n: usize,

    #[command(flatten)]
    scheme: SchemeFlags,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct InfoArgs {
    /// Vector store to summarize
    #[arg(long)]
    store: Option<PathBuf>,

    /// BPE model to summarize
    #[arg(long)]
    bpe: Option<PathBuf>,

    #[command(flatten)]
    common: CommonArgs,
}

/// Parses argv and runs the selected subcommand, returning the process exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::TrainSubword(args) => cmd_train_subword(args),
        Command::BpeTrain(args) => cmd_bpe_train(args),
        Command::DeriveSuffix(args) => cmd_derive_suffix(args),
        Command::EvalAnalogy(args) => cmd_eval_analogy(args),
        Command::EvalGroup(args) => cmd_eval_group(args),
        Command::EvalClassify(args) => cmd_eval_classify(args),
        Command::Nn(args) => cmd_nn(args),
        Command::Info(args) => cmd_info(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Seed and thread count for non-training commands, resolved from the
/// config file (when given) under the same file-then-flags precedence.
fn resolve_common(common: &CommonArgs) -> Result<(u64, usize)> {
    let mut seed = 1u64;
    let mut threads = 1usize;
    if let Some(path) = &common.config {
        let file = parse_config_file(path)?;
        if let Some(value) = file.get("seed") {
            seed = value
                .parse()
                .map_err(|_| Error::usage(format!("invalid seed {value:?}")))?;
        }
        if let Some(value) = file.get("threads") {
            threads = value
                .parse()
                .map_err(|_| Error::usage(format!("invalid thread count {value:?}")))?;
        }
    }
    if let Some(s) = common.seed {
        seed = s;
    }
    if let Some(t) = common.threads {
        threads = t;
    }
    Ok((seed, threads))
}

fn ensure_output(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(Error::usage(format!(
            "output {} already exists; pass --overwrite to replace it",
            path.display()
        )));
    }
    Ok(())
}

/// Inputs are checked up front so a run cannot fail halfway with partial
/// outputs on disk.
fn ensure_inputs(paths: &[Option<&PathBuf>]) -> Result<()> {
    for path in paths.iter().flatten() {
        if !path.is_file() {
            return Err(Error::io(
                path,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "input does not exist or is not a file",
                ),
            ));
        }
    }
    Ok(())
}

fn log_config(command: &str, entries: &[(&str, String)]) {
    eprintln!("# resolved configuration");
    eprintln!("command = {command}");
    for (key, value) in entries {
        eprintln!("{key} = {value}");
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn display_opt(path: &Option<PathBuf>) -> String {
    path.as_ref().map_or_else(|| "-".to_string(), |p| display(p))
}

/// Resolves a training config from defaults, an optional config file, then
/// flags, and normalizes the thread count for the current build.
fn resolve_train_config(flags: &TrainFlags, common: &CommonArgs) -> Result<TrainConfig> {
    let mut config = TrainConfig::new(ModelKind::Cbow);
    if let Some(path) = &common.config {
        let file = parse_config_file(path)?;
        apply_to_train_config(&file, &mut config)?;
    }
    if let Some(model) = &flags.model {
        config.model = ModelKind::parse(model)?;
        // model choice moves the default learning rate unless pinned below
        if flags.lr_start.is_none() {
            config.set_lr_start(config.model.default_lr());
        }
    }
    if let Some(dim) = flags.dim {
        config.dim = dim;
    }
    if let Some(window) = flags.window {
        config.window = window;
    }
    if let Some(negatives) = flags.negatives {
        config.negatives = negatives;
    }
    if let Some(epochs) = flags.epochs {
        config.epochs = epochs;
    }
    if let Some(lr) = flags.lr_start {
        config.set_lr_start(lr);
    }
    if let Some(lr_min) = flags.lr_min {
        config.lr_min = lr_min;
    }
    if let Some(subsample) = &flags.subsample {
        config.subsample_t = match subsample.as_str() {
            "off" | "none" | "disabled" => None,
            value => Some(value.parse().map_err(|_| {
                Error::usage(format!("invalid subsample threshold {value:?}"))
            })?),
        };
    }
    if let Some(min_count) = flags.min_count {
        config.min_count = min_count;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(threads) = common.threads {
        config.threads = threads;
    }
    #[cfg(not(feature = "parallel"))]
    if config.threads > 1 {
        eprintln!(
            "note: built without the parallel feature; running {} requested threads as 1",
            config.threads
        );
        config.threads = 1;
    }
    config.validate()?;
    Ok(config)
}

fn train_config_entries(config: &TrainConfig) -> Vec<(&'static str, String)> {
    vec![
        ("model", config.model.name().to_string()),
        ("dim", config.dim.to_string()),
        ("window", config.window.to_string()),
        ("negatives", config.negatives.to_string()),
        ("epochs", config.epochs.to_string()),
        ("lr_start", config.lr_start.to_string()),
        ("lr_min", config.lr_min.to_string()),
        (
            "subsample_t",
            config
                .subsample_t
                .map_or_else(|| "off".to_string(), |t| t.to_string()),
        ),
        ("min_count", config.min_count.to_string()),
        ("seed", config.seed.to_string()),
        ("threads", config.threads.to_string()),
    ]
}

/// Loads and renders the training corpus into token sentences.
fn load_sentences(corpus: &CorpusInput) -> Result<Vec<Vec<String>>> {
    match corpus.format.as_str() {
        "raw" => read_raw(&corpus.input)?.collect(),
        "annotated" => {
            let form = MorphForm::parse(&corpus.form)?;
            let bpe = match (form, &corpus.bpe_model) {
                (MorphForm::Pieces, Some(path)) => Some(BpeModel::load(path)?),
                (MorphForm::Pieces, None) => {
                    return Err(Error::usage("--form pieces requires --bpe-model"))
                }
                _ => None,
            };
            let mut sentences = Vec::new();
            for sentence in read_annotated(&corpus.input)? {
                sentences.push(render_form(&sentence?, form, bpe.as_ref())?);
            }
            Ok(sentences)
        }
        other => Err(Error::usage(format!(
            "unknown corpus format {other:?} (expected raw or annotated)"
        ))),
    }
}

fn corpus_entries(corpus: &CorpusInput) -> Vec<(&'static str, String)> {
    vec![
        ("input", display(&corpus.input)),
        ("format", corpus.format.clone()),
        ("form", corpus.form.clone()),
        ("bpe_model", display_opt(&corpus.bpe_model)),
    ]
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    ensure_output(&args.output, args.overwrite)?;
    if let Some(lexicon_out) = &args.lexicon_out {
        ensure_output(lexicon_out, args.overwrite)?;
        if args.corpus.format != "annotated" {
            return Err(Error::usage("--lexicon-out needs --format annotated"));
        }
    }
    ensure_inputs(&[Some(&args.corpus.input), args.corpus.bpe_model.as_ref()])?;
    let mut entries = corpus_entries(&args.corpus);
    entries.push(("output", display(&args.output)));
    entries.push(("lexicon_out", display_opt(&args.lexicon_out)));
    log_config("preprocess", &entries);

    let sentences = load_sentences(&args.corpus)?;
    let file = std::fs::File::create(&args.output).map_err(|e| Error::io(&args.output, e))?;
    let mut out = std::io::BufWriter::new(file);
    for sentence in &sentences {
        writeln!(out, "{}", sentence.join(" ")).map_err(|e| Error::io(&args.output, e))?;
    }
    out.flush().map_err(|e| Error::io(&args.output, e))?;
    eprintln!("wrote {} sentences to {}", sentences.len(), display(&args.output));

    if let Some(lexicon_out) = &args.lexicon_out {
        let types = collect_annotated_types(read_annotated(&args.corpus.input)?)?;
        let lexicon = Lexicon::from_types(&types);
        lexicon.save(lexicon_out)?;
        eprintln!("wrote {} lexicon entries to {}", lexicon.len(), display(lexicon_out));
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    ensure_output(&args.output, args.overwrite)?;
    ensure_inputs(&[Some(&args.corpus.input), args.corpus.bpe_model.as_ref()])?;
    let config = resolve_train_config(&args.flags, &args.common)?;
    let mut entries = corpus_entries(&args.corpus);
    entries.push(("output", display(&args.output)));
    entries.extend(train_config_entries(&config));
    log_config("train", &entries);

    let sentences = load_sentences(&args.corpus)?;
    let vocab = build_vocab(
        sentences.iter().flat_map(|s| s.iter().map(String::as_str)),
        config.min_count,
    );
    if vocab.is_empty() {
        return Err(Error::data(format!(
            "no token reached min_count = {}",
            config.min_count
        )));
    }
    eprintln!(
        "vocabulary: {} tokens, {} occurrences",
        vocab.len(),
        vocab.total_count()
    );
    let indexed: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| vocab.index_sentence(s))
        .collect();
    let (model, stats) = train(&indexed, &vocab, &config)?;
    for (epoch, loss) in stats.epoch_losses.iter().enumerate() {
        eprintln!("epoch {} mean loss {loss:.6}", epoch + 1);
    }
    model.to_store().save_text(&args.output)?;
    eprintln!("wrote {} vectors to {}", vocab.len(), display(&args.output));
    Ok(())
}

fn cmd_train_subword(args: TrainSubwordArgs) -> Result<()> {
    for suffix in [".meta", ".words.vec", ".ngrams.vec"] {
        let mut os = args.output.as_os_str().to_os_string();
        os.push(suffix);
        ensure_output(Path::new(&os), args.overwrite)?;
    }
    ensure_inputs(&[Some(&args.corpus.input), args.corpus.bpe_model.as_ref()])?;
    let config = resolve_train_config(&args.flags, &args.common)?;
    let mut entries = corpus_entries(&args.corpus);
    entries.push(("output", display(&args.output)));
    entries.push(("n_min", args.n_min.to_string()));
    entries.push(("n_max", args.n_max.to_string()));
    entries.push(("buckets", args.buckets.to_string()));
    entries.extend(train_config_entries(&config));
    log_config("train-subword", &entries);

    let sentences = load_sentences(&args.corpus)?;
    let vocab = build_vocab(
        sentences.iter().flat_map(|s| s.iter().map(String::as_str)),
        config.min_count,
    );
    if vocab.is_empty() {
        return Err(Error::data(format!(
            "no token reached min_count = {}",
            config.min_count
        )));
    }
    let indexed: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| vocab.index_sentence(s))
        .collect();
    let index = SubwordIndex::new(args.n_min, args.n_max, args.buckets, vocab)?;
    let (model, stats) = train_subword(&indexed, index, &config)?;
    for (epoch, loss) in stats.epoch_losses.iter().enumerate() {
        eprintln!("epoch {} mean loss {loss:.6}", epoch + 1);
    }
    model.to_vectors().save(&args.output)?;
    eprintln!("wrote subword model to {}.*", display(&args.output));
    Ok(())
}

fn cmd_bpe_train(args: BpeTrainArgs) -> Result<()> {
    ensure_output(&args.output, args.overwrite)?;
    ensure_inputs(&[Some(&args.corpus.input), args.corpus.bpe_model.as_ref()])?;
    let mut entries = corpus_entries(&args.corpus);
    entries.push(("target_size", args.target_size.to_string()));
    entries.push(("output", display(&args.output)));
    log_config("bpe-train", &entries);

    let sentences = load_sentences(&args.corpus)?;
    let mut counts: std::collections::HashMap<String, u64> = std::collections::HashMap::new();
    for sentence in &sentences {
        for token in sentence {
            *counts.entry(token.clone()).or_insert(0) += 1;
        }
    }
    let model = train_bpe(counts, args.target_size)?;
    eprintln!(
        "learned {} merges over {} pieces",
        model.merges().len(),
        model.piece_vocab().len()
    );
    model.save(&args.output)?;
    eprintln!("wrote BPE model to {}", display(&args.output));
    Ok(())
}

fn cmd_derive_suffix(args: DeriveSuffixArgs) -> Result<()> {
    ensure_output(&args.output, args.overwrite)?;
    ensure_inputs(&[
        Some(&args.annotated),
        Some(&args.surface_store),
        args.lemma_store.as_ref(),
    ])?;
    log_config(
        "derive-suffix",
        &[
            ("annotated", display(&args.annotated)),
            ("surface_store", display(&args.surface_store)),
            ("lemma_store", display_opt(&args.lemma_store)),
            ("output", display(&args.output)),
        ],
    );

    let types = collect_annotated_types(read_annotated(&args.annotated)?)?;
    let surface_store = VectorStore::load_text(&args.surface_store)?;
    let lemma_store = args
        .lemma_store
        .as_ref()
        .map(VectorStore::load_text)
        .transpose()?;
    let table = derive_suffix_offsets(&types, &surface_store, lemma_store.as_ref())?;
    eprintln!("derived offsets for {} suffixes", table.len());
    table.save(&args.output)?;
    eprintln!("wrote offsets to {}", display(&args.output));
    Ok(())
}

/// Loads every store the scheme flags name.
fn load_bundle(flags: &SchemeFlags) -> Result<(StoreBundle, Option<Lexicon>)> {
    let mut bundle = StoreBundle::default();
    if let Some(path) = &flags.surface_store {
        bundle.surface = Some(VectorStore::load_text(path)?);
    }
    if let Some(path) = &flags.lemma_store {
        bundle.lemma = Some(VectorStore::load_text(path)?);
    }
    if let Some(path) = &flags.lemma_suffix_store {
        bundle.lemma_suffix = Some(VectorStore::load_text(path)?);
    }
    if let Some(path) = &flags.offsets {
        bundle.offsets = Some(SuffixOffsetTable::load(path)?);
    }
    if let Some(path) = &flags.pieces_store {
        bundle.pieces = Some(VectorStore::load_text(path)?);
    }
    if let Some(path) = &flags.bpe_model {
        bundle.bpe = Some(BpeModel::load(path)?);
    }
    if let Some(stem) = &flags.subword {
        bundle.fasttext = Some(SubwordVectors::load(stem)?);
    }
    let lexicon = flags.lexicon.as_ref().map(Lexicon::load).transpose()?;
    Ok((bundle, lexicon))
}

fn ensure_scheme_inputs(flags: &SchemeFlags) -> Result<()> {
    ensure_inputs(&[
        flags.lexicon.as_ref(),
        flags.surface_store.as_ref(),
        flags.lemma_store.as_ref(),
        flags.lemma_suffix_store.as_ref(),
        flags.offsets.as_ref(),
        flags.pieces_store.as_ref(),
        flags.bpe_model.as_ref(),
    ])?;
    if let Some(stem) = &flags.subword {
        let mut meta = stem.as_os_str().to_os_string();
        meta.push(".meta");
        ensure_inputs(&[Some(&PathBuf::from(meta))])?;
    }
    Ok(())
}

fn scheme_entries(flags: &SchemeFlags) -> Vec<(&'static str, String)> {
    vec![
        (
            "scheme",
            flags.scheme.clone().unwrap_or_else(|| "store-lookup".into()),
        ),
        ("lexicon", display_opt(&flags.lexicon)),
        ("surface_store", display_opt(&flags.surface_store)),
        ("lemma_store", display_opt(&flags.lemma_store)),
        ("lemma_suffix_store", display_opt(&flags.lemma_suffix_store)),
        ("offsets", display_opt(&flags.offsets)),
        ("pieces_store", display_opt(&flags.pieces_store)),
        ("bpe_model", display_opt(&flags.bpe_model)),
        ("subword", display_opt(&flags.subword)),
    ]
}

/// Query-side embedder: scheme composition when requested, otherwise exact
/// lookup in the fallback store.
fn build_embedder<'a>(
    scheme: Option<Scheme>,
    bundle: &'a StoreBundle,
    lexicon: Option<&'a Lexicon>,
    fallback: &'a VectorStore,
) -> Result<Box<dyn Embedder + 'a>> {
    match scheme {
        Some(scheme) => Ok(Box::new(SchemeEmbedder::new(scheme, bundle, lexicon)?)),
        None => Ok(Box::new(fallback.clone())),
    }
}

fn parse_scheme(flags: &SchemeFlags) -> Result<Option<Scheme>> {
    flags.scheme.as_deref().map(Scheme::parse).transpose()
}

fn parse_ns(ns: &str) -> Result<Vec<usize>> {
    let parsed: std::result::Result<Vec<usize>, _> =
        ns.split(',').map(|n| n.trim().parse()).collect();
    parsed.map_err(|_| Error::usage(format!("invalid --ns list {ns:?}")))
}

fn effective_parallel(threads: usize) -> bool {
    cfg!(feature = "parallel") && threads > 1
}

fn cmd_eval_analogy(args: EvalAnalogyArgs) -> Result<()> {
    if let Some(metrics) = &args.metrics {
        ensure_output(metrics, args.overwrite)?;
    }
    let ns = parse_ns(&args.ns)?;
    let scheme = parse_scheme(&args.scheme)?;
    let (seed, threads) = resolve_common(&args.common)?;
    ensure_inputs(&[Some(&args.store), Some(&args.questions)])?;
    ensure_scheme_inputs(&args.scheme)?;
    let mut entries = vec![
        ("store", display(&args.store)),
        ("questions", display(&args.questions)),
        ("ns", args.ns.clone()),
        ("exclude_inputs", args.exclude_inputs.to_string()),
        ("seed", seed.to_string()),
        ("threads", threads.to_string()),
    ];
    entries.extend(scheme_entries(&args.scheme));
    log_config("eval-analogy", &entries);

    let store = VectorStore::load_text(&args.store)?;
    let (bundle, lexicon) = load_bundle(&args.scheme)?;
    let embedder = build_embedder(scheme, &bundle, lexicon.as_ref(), &store)?;
    let questions = load_analogy_questions(&args.questions)?;
    let report = analogy_accuracy(
        &questions,
        embedder.as_ref(),
        &store,
        &ns,
        AnalogyOptions {
            exclude_inputs: args.exclude_inputs,
            parallel: effective_parallel(threads),
        },
    )?;

    let label = args.label.clone().unwrap_or_else(|| {
        scheme.map_or_else(|| file_label(&args.store), |s| s.name().to_string())
    });
    let eval = EvalReport {
        label,
        analogy: Some(report),
        ..Default::default()
    };
    print!("{}", eval.render_table());
    if let Some(metrics) = &args.metrics {
        eval.write_metrics(metrics)?;
        eprintln!("wrote metrics to {}", display(metrics));
    }
    Ok(())
}

fn cmd_eval_group(args: EvalGroupArgs) -> Result<()> {
    if let Some(metrics) = &args.metrics {
        ensure_output(metrics, args.overwrite)?;
    }
    let scheme = parse_scheme(&args.scheme)?;
    let (seed, threads) = resolve_common(&args.common)?;
    ensure_inputs(&[Some(&args.store), Some(&args.questions)])?;
    ensure_scheme_inputs(&args.scheme)?;
    let mut entries = vec![
        ("store", display(&args.store)),
        ("questions", display(&args.questions)),
        ("seed", seed.to_string()),
        ("threads", threads.to_string()),
    ];
    entries.extend(scheme_entries(&args.scheme));
    log_config("eval-group", &entries);

    let store = VectorStore::load_text(&args.store)?;
    let (bundle, lexicon) = load_bundle(&args.scheme)?;
    let embedder = build_embedder(scheme, &bundle, lexicon.as_ref(), &store)?;
    let questions = load_group_questions(&args.questions, seed)?;
    let report = group_accuracy(&questions, embedder.as_ref(), effective_parallel(threads))?;

    let label = args.label.clone().unwrap_or_else(|| {
        scheme.map_or_else(|| file_label(&args.store), |s| s.name().to_string())
    });
    let eval = EvalReport {
        label,
        group: Some(report),
        ..Default::default()
    };
    print!("{}", eval.render_table());
    if let Some(metrics) = &args.metrics {
        eval.write_metrics(metrics)?;
        eprintln!("wrote metrics to {}", display(metrics));
    }
    Ok(())
}

fn cmd_eval_classify(args: EvalClassifyArgs) -> Result<()> {
    if let Some(metrics) = &args.metrics {
        ensure_output(metrics, args.overwrite)?;
    }
    let scheme = parse_scheme(&args.scheme)?;
    let (_, threads) = resolve_common(&args.common)?;
    ensure_inputs(&[
        Some(&args.store),
        Some(&args.train_docs),
        Some(&args.test_docs),
    ])?;
    ensure_scheme_inputs(&args.scheme)?;
    let mut entries = vec![
        ("store", display(&args.store)),
        ("train_docs", display(&args.train_docs)),
        ("test_docs", display(&args.test_docs)),
        ("oov_fill", args.oov_fill.to_string()),
        ("threads", threads.to_string()),
    ];
    entries.extend(scheme_entries(&args.scheme));
    log_config("eval-classify", &entries);

    let store = VectorStore::load_text(&args.store)?;
    let (bundle, lexicon) = load_bundle(&args.scheme)?;
    let embedder = build_embedder(scheme, &bundle, lexicon.as_ref(), &store)?;
    let train_docs = load_labeled_docs(&args.train_docs)?;
    let test_docs = load_labeled_docs(&args.test_docs)?;
    let accuracy = classify_docs(
        &train_docs,
        &test_docs,
        embedder.as_ref(),
        ClassifyOptions {
            oov_fill: args.oov_fill,
            parallel: effective_parallel(threads),
            ..Default::default()
        },
    )?;

    let label = args.label.clone().unwrap_or_else(|| {
        scheme.map_or_else(|| file_label(&args.store), |s| s.name().to_string())
    });
    let eval = EvalReport {
        label,
        classification_accuracy: Some(accuracy),
        ..Default::default()
    };
    print!("{}", eval.render_table());
    if let Some(metrics) = &args.metrics {
        eval.write_metrics(metrics)?;
        eprintln!("wrote metrics to {}", display(metrics));
    }
    Ok(())
}

fn cmd_nn(args: NnArgs) -> Result<()> {
    let scheme = parse_scheme(&args.scheme)?;
    let (_, threads) = resolve_common(&args.common)?;
    ensure_inputs(&[Some(&args.store)])?;
    ensure_scheme_inputs(&args.scheme)?;
    let mut entries = vec![
        ("store", display(&args.store)),
        ("token", args.token.clone()),
        ("top_n", args.top_n.to_string()),
        ("threads", threads.to_string()),
    ];
    entries.extend(scheme_entries(&args.scheme));
    log_config("nn", &entries);

    let store = VectorStore::load_text(&args.store)?;
    let (bundle, lexicon) = load_bundle(&args.scheme)?;
    let embedder = build_embedder(scheme, &bundle, lexicon.as_ref(), &store)?;
    let query = embedder.embed(&args.token).ok_or_else(|| {
        Error::data(format!("token {:?} is not resolvable", args.token))
    })?;
    let ranked = rank_by_similarity(
        &query,
        &store,
        args.top_n,
        &[args.token.as_str()],
        effective_parallel(threads),
    )?;
    let mut stdout = std::io::stdout().lock();
    for r in ranked {
        writeln!(stdout, "{}\t{:.6}", store.token(r.position), r.similarity)
            .map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

fn cmd_info(args: InfoArgs) -> Result<()> {
    log_config(
        "info",
        &[
            ("store", display_opt(&args.store)),
            ("bpe", display_opt(&args.bpe)),
        ],
    );
    if args.store.is_none() && args.bpe.is_none() {
        return Err(Error::usage("info needs --store and/or --bpe"));
    }
    let mut stdout = std::io::stdout().lock();
    if let Some(path) = &args.store {
        let store = VectorStore::load_text(path)?;
        writeln!(stdout, "store\t{}", display(path)).map_err(|e| Error::io("stdout", e))?;
        writeln!(stdout, "tokens\t{}", store.len()).map_err(|e| Error::io("stdout", e))?;
        writeln!(stdout, "dim\t{}", store.dim()).map_err(|e| Error::io("stdout", e))?;
        if store.duplicates_replaced() > 0 {
            writeln!(stdout, "duplicates_replaced\t{}", store.duplicates_replaced())
                .map_err(|e| Error::io("stdout", e))?;
        }
        for (i, token) in store.tokens().take(10).enumerate() {
            writeln!(stdout, "token[{i}]\t{token}").map_err(|e| Error::io("stdout", e))?;
        }
    }
    if let Some(path) = &args.bpe {
        let model = BpeModel::load(path)?;
        writeln!(stdout, "bpe\t{}", display(path)).map_err(|e| Error::io("stdout", e))?;
        writeln!(stdout, "target_size\t{}", model.target_size())
            .map_err(|e| Error::io("stdout", e))?;
        writeln!(stdout, "merges\t{}", model.merges().len())
            .map_err(|e| Error::io("stdout", e))?;
    }
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display(path))
}
