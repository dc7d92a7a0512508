//! `ladi` — command-line front end for the steering engine.
//!
//! Every subcommand prints one line of JSON to stdout on success and keeps
//! diagnostics on stderr, so commands compose in pipelines. Exit codes:
//! 0 success, 1 usage or configuration problem, 2 domain failure (grammar
//! rejection, unsatisfiable constraints, dead particle populations, …).
//!
//! Configuration lives in a JSON file, `./ladi.json` by default or
//! `--config PATH`. Relative paths inside the file resolve against the
//! file's own directory, so a config can travel with its fixtures.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ladi_core::grammar::{parse_grammar, enumerate_language, grammar_sample, Grammar, SampleParams};
use ladi_core::ngram::{word_vocab, NGramModel, DEFAULT_ALPHA, DEFAULT_ORDER};
use ladi_core::remote::RemoteModel;
use ladi_core::{
    beam_search, blacklist_word, build_negative_context, build_prompt, compile_constraint,
    guided_decode, keyframe_schedule, load_demos, parse_program_with, select_negative_demos,
    smc_run, ConstraintSpec, GuidanceConfig, LogProbVector, ModelError, PaletteTable,
    PromptExample, PromptSpec, PromptStore, SmcError, SmcOptions, TokenId, TokenModel,
    Vocabulary, BeamParams, DEFAULT_ESS_THRESHOLD, DEFAULT_GAMMA, DEFAULT_N_PARTICLES,
    DEFAULT_OVERLAP_THRESHOLD, DEFAULT_SHOTS,
};

#[derive(Parser)]
#[command(name = "ladi", version, about = "Grammar, beam, SMC, and guidance steering for token models")]
struct Cli {
    /// Configuration file (JSON). Relative paths inside it resolve against
    /// its directory.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect and enumerate grammars.
    #[command(subcommand)]
    Grammar(GrammarCmd),
    /// Generate text under various steering strategies.
    #[command(subcommand)]
    Gen(GenCmd),
    /// Build checklist prompts and keyframe schedules.
    #[command(subcommand)]
    Prompt(PromptCmd),
    /// Manage the prompt example store.
    #[command(subcommand)]
    Store(StoreCmd),
}

#[derive(Subcommand)]
enum GrammarCmd {
    /// Parse a grammar file and report its shape.
    Check { file: PathBuf },
    /// List every string the grammar derives with at most --max terminals.
    Enumerate {
        file: PathBuf,
        /// Maximum number of terminals per derivation.
        #[arg(long)]
        max: usize,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Sample a string guaranteed to parse under the grammar.
    Grammar {
        file: PathBuf,
        /// Sampling seed (default: config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Token budget (default: config max_tokens).
        #[arg(long)]
        max_tokens: Option<usize>,
    },
    /// Constrained beam search over a JSON list of constraints.
    Beam {
        /// JSON file: array of {"kind": ..., ...} constraint objects.
        #[arg(long)]
        constraints: PathBuf,
        /// Beam width (default: config beam_width).
        #[arg(long)]
        width: Option<usize>,
        /// Token budget (default: config max_tokens).
        #[arg(long)]
        max_tokens: Option<usize>,
    },
    /// Run a sequential Monte Carlo steering program.
    Smc {
        /// JSON program: {"prompt", "forbidden_words", "max_tokens", ...}.
        program: PathBuf,
    },
    /// Sample under classifier-free guidance.
    Guided {
        /// Text to continue.
        prompt: Option<String>,
        /// Guidance scale (default: config gamma).
        #[arg(long)]
        gamma: Option<f64>,
        /// JSON-lines file of negative demonstrations.
        #[arg(long, value_name = "FILE")]
        negative: Option<PathBuf>,
        /// Word to ban; repeatable. Bans every token containing the word.
        #[arg(long, value_name = "WORD")]
        blacklist: Vec<String>,
        /// Sampling seed (default: config seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Token budget (default: config max_tokens).
        #[arg(long)]
        max_tokens: Option<usize>,
    },
}

#[derive(Subcommand)]
enum PromptCmd {
    /// Assemble a checklist prompt from a spec file.
    Build { spec: PathBuf },
    /// Build a keyframe schedule from an anchor and stage descriptors.
    Travel {
        /// Phrase kept verbatim in every frame.
        #[arg(long)]
        anchor: String,
        /// JSON file: array of stage descriptor strings.
        #[arg(long, value_name = "FILE")]
        stages: PathBuf,
        /// Comma-separated frame indices, e.g. 1,15,30.
        #[arg(long, value_name = "LIST")]
        frames: String,
        /// Minimum adjacent word overlap (default: config overlap_threshold).
        #[arg(long)]
        overlap_threshold: Option<f64>,
    },
}

#[derive(Subcommand)]
enum StoreCmd {
    /// Add JSON-lines examples to the configured store.
    Add { file: PathBuf },
    /// Rank stored examples against a query.
    Query {
        query: String,
        /// How many results to return.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

/// Exit-code buckets: usage problems are 1, domain failures 2.
enum Failure {
    Usage(String),
    Domain(String),
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn domain(err: impl std::fmt::Display) -> Failure {
    Failure::Domain(err.to_string())
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelConfig {
    Ngram {
        corpus_path: PathBuf,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Remote { endpoint_url: String },
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct Defaults {
    beam_width: usize,
    gamma: f64,
    n_particles: usize,
    ess_threshold: f64,
    overlap_threshold: f64,
    max_tokens: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            beam_width: 4,
            gamma: DEFAULT_GAMMA,
            n_particles: DEFAULT_N_PARTICLES,
            ess_threshold: DEFAULT_ESS_THRESHOLD,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            max_tokens: 32,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct ConfigFile {
    model: Option<ModelConfig>,
    seed: u64,
    store_path: Option<PathBuf>,
    palette_path: Option<PathBuf>,
    defaults: Defaults,
}

struct Config {
    model: Option<ModelConfig>,
    seed: u64,
    store_path: Option<PathBuf>,
    palette_path: Option<PathBuf>,
    defaults: Defaults,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn load_config(arg: &Option<PathBuf>) -> CliResult<Config> {
    let (path, explicit) = match arg {
        Some(p) => (p.clone(), true),
        None => (PathBuf::from("./ladi.json"), false),
    };
    if !path.exists() {
        if explicit {
            return Err(usage(format!("config file {} not found", path.display())));
        }
        // No ./ladi.json: run on built-in defaults. Commands that need a
        // model or store will say so.
        return Ok(Config {
            model: None,
            seed: 0,
            store_path: None,
            palette_path: None,
            defaults: Defaults::default(),
        });
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let model = file.model.map(|m| match m {
        ModelConfig::Ngram { corpus_path, order, alpha } => ModelConfig::Ngram {
            corpus_path: resolve(&base, corpus_path),
            order,
            alpha,
        },
        remote => remote,
    });
    if let Some(ModelConfig::Ngram { corpus_path, .. }) = &model {
        if !corpus_path.exists() {
            return Err(usage(format!(
                "config corpus_path {} does not exist",
                corpus_path.display()
            )));
        }
    }
    let palette_path = file.palette_path.map(|p| resolve(&base, p));
    if let Some(p) = &palette_path {
        if !p.exists() {
            return Err(usage(format!("config palette_path {} does not exist", p.display())));
        }
    }
    let store_path = file.store_path.map(|p| resolve(&base, p));

    let d = &file.defaults;
    if d.beam_width < 1 {
        return Err(usage("config defaults.beam_width must be ≥ 1"));
    }
    if !d.gamma.is_finite() || d.gamma < 0.0 {
        return Err(usage("config defaults.gamma must be finite and ≥ 0"));
    }
    if d.n_particles < 1 {
        return Err(usage("config defaults.n_particles must be ≥ 1"));
    }
    if !(d.ess_threshold > 0.0 && d.ess_threshold <= 1.0) {
        return Err(usage("config defaults.ess_threshold must lie in (0, 1]"));
    }
    if !(0.0..=1.0).contains(&d.overlap_threshold) {
        return Err(usage("config defaults.overlap_threshold must lie in [0, 1]"));
    }
    if d.max_tokens < 1 {
        return Err(usage("config defaults.max_tokens must be ≥ 1"));
    }

    Ok(Config {
        model,
        seed: file.seed,
        store_path,
        palette_path,
        defaults: file.defaults,
    })
}

// ---------------------------------------------------------------------------
// Model plumbing

enum CliModel {
    NGram(NGramModel),
    Remote(RemoteModel),
}

impl TokenModel for CliModel {
    fn vocab(&self) -> &Vocabulary {
        match self {
            CliModel::NGram(m) => m.vocab(),
            CliModel::Remote(m) => m.vocab(),
        }
    }

    fn next_logprobs(&self, context: &[TokenId]) -> Result<LogProbVector, ModelError> {
        match self {
            CliModel::NGram(m) => m.next_logprobs(context),
            CliModel::Remote(m) => m.next_logprobs(context),
        }
    }
}

fn load_model(config: &Config) -> CliResult<CliModel> {
    match &config.model {
        None => Err(usage(
            "this command needs a model; add a \"model\" section to the config",
        )),
        Some(ModelConfig::Ngram { corpus_path, order, alpha }) => {
            let corpus = std::fs::read_to_string(corpus_path)
                .map_err(|e| usage(format!("cannot read corpus {}: {e}", corpus_path.display())))?;
            let vocab = word_vocab(&corpus);
            let model = NGramModel::train(&corpus, *order, *alpha, vocab).map_err(domain)?;
            Ok(CliModel::NGram(model))
        }
        Some(ModelConfig::Remote { endpoint_url }) => {
            let model = RemoteModel::connect(endpoint_url, RemoteModel::DEFAULT_TIMEOUT)
                .map_err(domain)?;
            Ok(CliModel::Remote(model))
        }
    }
}

fn load_palettes(config: &Config) -> CliResult<PaletteTable> {
    match &config.palette_path {
        None => Ok(PaletteTable::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read palettes {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| domain(format!("palette file {}: {e}", path.display())))
        }
    }
}

fn store_path(config: &Config) -> CliResult<&PathBuf> {
    config
        .store_path
        .as_ref()
        .ok_or_else(|| usage("this command needs \"store_path\" in the config"))
}

fn load_store(path: &Path) -> CliResult<PromptStore> {
    if !path.exists() {
        return Ok(PromptStore::new());
    }
    PromptStore::load(path).map_err(domain)
}

fn read_file(path: &Path, what: &str) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn load_grammar(path: &Path) -> CliResult<Grammar> {
    let source = read_file(path, "grammar file")?;
    parse_grammar(&source).map_err(domain)
}

/// Print one JSON line to stdout, shrugging off closed pipes (`ladi … | head`).
fn emit(value: &impl Serialize) {
    use std::io::Write;
    let line = serde_json::to_string(value).expect("output serializes");
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn complain(msg: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "error: {msg}");
}

// ---------------------------------------------------------------------------
// Subcommands

fn grammar_check(file: &Path) -> CliResult<()> {
    let grammar = load_grammar(file)?;

    #[derive(Serialize)]
    struct Report {
        ok: bool,
        start: String,
        nonterminals: usize,
        terminals: usize,
        productions: usize,
        separator: String,
        nullable_start: bool,
    }
    emit(&Report {
        ok: true,
        start: grammar.nonterminal_name(grammar.start()).to_string(),
        nonterminals: grammar.nonterminal_count(),
        terminals: grammar.terminal_count(),
        productions: grammar.production_count(),
        separator: String::from_utf8_lossy(grammar.separator()).into_owned(),
        nullable_start: grammar.is_nullable(grammar.start()),
    });
    Ok(())
}

fn grammar_enumerate(file: &Path, max: usize) -> CliResult<()> {
    let grammar = load_grammar(file)?;
    let language = enumerate_language(&grammar, max).map_err(domain)?;
    let strings: Vec<&String> = language.iter().collect();
    emit(&strings);
    Ok(())
}

fn gen_grammar(
    config: &Config,
    file: &Path,
    seed: Option<u64>,
    max_tokens: Option<usize>,
) -> CliResult<()> {
    let grammar = load_grammar(file)?;
    let model = load_model(config)?;
    let params = SampleParams {
        temperature: 1.0,
        seed: seed.unwrap_or(config.seed),
        max_tokens: max_tokens.unwrap_or(config.defaults.max_tokens),
    };
    let text = grammar_sample(&model, &grammar, &params).map_err(domain)?;
    emit(&serde_json::json!({ "text": text }));
    Ok(())
}

fn gen_beam(
    config: &Config,
    constraints_file: &Path,
    width: Option<usize>,
    max_tokens: Option<usize>,
) -> CliResult<()> {
    let model = load_model(config)?;
    let palettes = load_palettes(config)?;
    let text = read_file(constraints_file, "constraints file")?;
    let specs: Vec<ConstraintSpec> = serde_json::from_str(&text)
        .map_err(|e| domain(format!("constraints file {}: {e}", constraints_file.display())))?;
    let compiled: Vec<_> = specs
        .iter()
        .map(|s| compile_constraint(s, &palettes, model.vocab()))
        .collect::<Result<_, _>>()
        .map_err(domain)?;
    let params = BeamParams {
        width: width.unwrap_or(config.defaults.beam_width),
        max_tokens: max_tokens.unwrap_or(config.defaults.max_tokens),
        seed: config.seed,
    };
    let ranked = beam_search(&model, &compiled, &params).map_err(domain)?;

    #[derive(Serialize)]
    struct Hyp {
        text: String,
        score: f64,
    }
    let hypotheses: Vec<Hyp> = ranked
        .iter()
        .map(|h| Hyp {
            text: h.text(model.vocab()),
            score: h.score,
        })
        .collect();
    emit(&serde_json::json!({ "hypotheses": hypotheses }));
    Ok(())
}

fn gen_smc(config: &Config, program_file: &Path) -> CliResult<()> {
    let model = load_model(config)?;
    let text = read_file(program_file, "program file")?;
    let fallback = SmcOptions {
        n_particles: config.defaults.n_particles,
        ess_threshold: config.defaults.ess_threshold,
        seed: config.seed,
    };
    let (program, options) = parse_program_with(&text, &fallback).map_err(domain)?;

    fn render(outputs: &[(String, f64)]) -> serde_json::Value {
        let list: Vec<_> = outputs
            .iter()
            .map(|(text, weight)| serde_json::json!({ "text": text, "weight": weight }))
            .collect();
        serde_json::json!({ "outputs": list })
    }

    match smc_run(&model, &program, &options) {
        Ok(outputs) => {
            emit(&render(&outputs));
            Ok(())
        }
        // The finished subset is still a valid weighted sample; print it,
        // then fail so pipelines notice the truncation.
        Err(SmcError::BudgetExhausted { finished, max_tokens, unfinished, total }) => {
            emit(&render(&finished));
            Err(domain(SmcError::BudgetExhausted {
                finished: Vec::new(),
                max_tokens,
                unfinished,
                total,
            }))
        }
        Err(e) => Err(domain(e)),
    }
}

#[allow(clippy::too_many_arguments)]
fn gen_guided(
    config: &Config,
    prompt: &str,
    gamma: Option<f64>,
    negative: &Option<PathBuf>,
    blacklist_words: &[String],
    seed: Option<u64>,
    max_tokens: Option<usize>,
) -> CliResult<()> {
    let model = load_model(config)?;
    let vocab = model.vocab();

    let negative_context = match negative {
        None => Vec::new(),
        Some(path) => {
            let text = read_file(path, "negative demos file")?;
            let demos = load_demos(text.as_bytes()).map_err(domain)?;
            let picked =
                select_negative_demos(prompt, &demos, DEFAULT_SHOTS).map_err(domain)?;
            build_negative_context(&picked, vocab).map_err(domain)?
        }
    };
    let mut blacklist = BTreeSet::new();
    for word in blacklist_words {
        blacklist.extend(blacklist_word(word, vocab));
    }
    let guidance = GuidanceConfig {
        gamma: gamma.unwrap_or(config.defaults.gamma),
        negative_context,
        blacklist,
    };
    let params = SampleParams {
        temperature: 1.0,
        seed: seed.unwrap_or(config.seed),
        max_tokens: max_tokens.unwrap_or(config.defaults.max_tokens),
    };
    let prompt_ctx = vocab.tokenize(prompt).map_err(domain)?;
    let text = guided_decode(&model, &prompt_ctx, &guidance, &params).map_err(domain)?;
    emit(&serde_json::json!({ "text": text }));
    Ok(())
}

fn prompt_build(spec_file: &Path) -> CliResult<()> {
    let text = read_file(spec_file, "prompt spec")?;
    let spec: PromptSpec = serde_json::from_str(&text)
        .map_err(|e| domain(format!("prompt spec {}: {e}", spec_file.display())))?;
    let prompt = build_prompt(&spec).map_err(domain)?;
    emit(&serde_json::json!({ "prompt": prompt }));
    Ok(())
}

fn prompt_travel(
    config: &Config,
    anchor: &str,
    stages_file: &Path,
    frames: &str,
    overlap_threshold: Option<f64>,
) -> CliResult<()> {
    let text = read_file(stages_file, "stages file")?;
    let stages: Vec<String> = serde_json::from_str(&text)
        .map_err(|e| domain(format!("stages file {}: {e}", stages_file.display())))?;
    let indices: Vec<usize> = frames
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("--frames entry {part:?} is not a non-negative integer")))
        })
        .collect::<CliResult<_>>()?;
    let threshold = overlap_threshold.unwrap_or(config.defaults.overlap_threshold);
    let schedule = keyframe_schedule(anchor, &stages, &indices, threshold).map_err(domain)?;
    emit(&schedule);
    Ok(())
}

fn store_add(config: &Config, file: &Path) -> CliResult<()> {
    let path = store_path(config)?;
    let mut store = load_store(path)?;
    let text = read_file(file, "examples file")?;
    let mut added = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let example: PromptExample = serde_json::from_str(line)
            .map_err(|e| domain(format!("line {}: {e}", i + 1)))?;
        store.add(example).map_err(domain)?;
        added += 1;
    }
    store.save(path).map_err(domain)?;
    emit(&serde_json::json!({ "added": added, "total": store.len() }));
    Ok(())
}

fn store_query(config: &Config, query: &str, k: usize) -> CliResult<()> {
    let path = store_path(config)?;
    let store = load_store(path)?;
    let query_embedding = ladi_core::embed(query);

    #[derive(Serialize)]
    struct Hit {
        id: String,
        text: String,
        tags: Vec<String>,
        quality: f64,
        similarity: f64,
    }
    let results: Vec<Hit> = store
        .knn(query, k)
        .into_iter()
        .map(|e| Hit {
            similarity: ladi_core::cosine(&query_embedding, e.embedding()),
            id: e.id,
            text: e.text,
            tags: e.tags,
            quality: e.quality,
        })
        .collect();
    emit(&serde_json::json!({ "results": results }));
    Ok(())
}

// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = load_config(&cli.config)?;
    match &cli.command {
        Command::Grammar(GrammarCmd::Check { file }) => grammar_check(file),
        Command::Grammar(GrammarCmd::Enumerate { file, max }) => grammar_enumerate(file, *max),
        Command::Gen(GenCmd::Grammar { file, seed, max_tokens }) => {
            gen_grammar(&config, file, *seed, *max_tokens)
        }
        Command::Gen(GenCmd::Beam { constraints, width, max_tokens }) => {
            gen_beam(&config, constraints, *width, *max_tokens)
        }
        Command::Gen(GenCmd::Smc { program }) => gen_smc(&config, program),
        Command::Gen(GenCmd::Guided { prompt, gamma, negative, blacklist, seed, max_tokens }) => {
            gen_guided(
                &config,
                prompt.as_deref().unwrap_or(""),
                *gamma,
                negative,
                blacklist,
                *seed,
                *max_tokens,
            )
        }
        Command::Prompt(PromptCmd::Build { spec }) => prompt_build(spec),
        Command::Prompt(PromptCmd::Travel { anchor, stages, frames, overlap_threshold }) => {
            prompt_travel(&config, anchor, stages, frames, *overlap_threshold)
        }
        Command::Store(StoreCmd::Add { file }) => store_add(&config, file),
        Command::Store(StoreCmd::Query { query, k }) => store_query(&config, query, *k),
    }
}

fn main() {
    use std::io::Write;
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures.
            if e.use_stderr() {
                let _ = write!(std::io::stderr(), "{e}");
                std::process::exit(1);
            }
            let _ = write!(std::io::stdout(), "{e}");
            std::process::exit(0);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(Failure::Usage(msg)) => {
            complain(&msg);
            std::process::exit(1);
        }
        Err(Failure::Domain(msg)) => {
            complain(&msg);
            std::process::exit(2);
        }
    }
}
