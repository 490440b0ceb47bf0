//! `cohs` command-line interface.
//!
//! Exit codes: 0 on success, 1 on internal/runtime errors, 2 on usage,
//! configuration or malformed-input errors.

pub mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{locate_rationale, parse_coqa, to_coqa_json, ContextDoc, Conversation, TurnTask};
use crate::error::Error;
use crate::metrics::{evaluate, selection_stats_multi, SelectionStats};
use crate::pipeline::{prepare_prompt, relevance_for, run_conversation, PipelineOptions};
use crate::relevance::{turn_text, EmbeddingRecord};
use crate::selector::{parse_threshold, select, SelectionParams};
use crate::services::{make_stub_suite, ServiceHost};
use config::{BackendFlags, Resolved, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cohs", version, about = "Context and history selection for conversational question generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select context windows and history suffixes for dataset turns (JSON lines).
    Select(SelectCmd),
    /// Average selected sentences/turns for a list of thresholds.
    Analyze(AnalyzeCmd),
    /// Print the generator input for one dataset turn.
    Prompt(PromptCmd),
    /// Generate a conversation from a context (answer-unaware loop).
    Pipeline(PipelineCmd),
    /// BLEU-1..4 and ROUGE-L for line-aligned reference/hypothesis files.
    Eval(EvalCmd),
    /// Precompute embeddings for a dataset into a JSON-lines file.
    Embed(EmbedCmd),
    /// Host the stub models over the HTTP wire protocol.
    ServeStubs(ServeCmd),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Embedder backend: URL, stub:<seed> or file:<jsonl>.
    #[arg(long)]
    pub embedder: Option<String>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    #[arg(long)]
    pub retries: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Relevance threshold, or "inf" for the full selection.
    #[arg(long)]
    pub p: Option<String>,
    /// cohs | dyn_cs | dyn_hs | static
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub k_fixed: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Restrict to `ID` or `ID:TURN`; repeatable.
    #[arg(long = "turn")]
    pub turns: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated thresholds, e.g. 1,2,3,5,7,10,inf
    #[arg(long)]
    pub ps: String,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub k_fixed: Option<usize>,
    /// Label of the dataset split, echoed in the report.
    #[arg(long)]
    pub split: Option<String>,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PromptCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub conversation: String,
    #[arg(long)]
    pub turn: usize,
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Plain-text context file. Alternatively use --dataset with --conversation.
    #[arg(long)]
    pub context: Option<PathBuf>,
    #[arg(long)]
    pub conversation: Option<String>,
    /// Identifier written to the output conversation.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub qa: Option<String>,
    #[arg(long)]
    pub extractor: Option<String>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Use the whole rationale sentence as the answer.
    #[arg(long)]
    pub no_ae: bool,
    /// Accept every generated question.
    #[arg(long)]
    pub no_qf: bool,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    pub references: PathBuf,
    #[arg(long)]
    pub hypotheses: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedCmd {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "127.0.0.1:8808")]
    pub addr: String,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::InvalidParams(_)
            | Error::Io { .. }
            | Error::Schema { .. }
            | Error::Parse(_)
            | Error::Format(_)
            | Error::MissingRationale { .. }
            | Error::Locate { .. } => 2,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Entry point for the `cohs` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cohs: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Select(cmd) => cmd_select(cmd),
        Command::Analyze(cmd) => cmd_analyze(cmd),
        Command::Prompt(cmd) => cmd_prompt(cmd),
        Command::Pipeline(cmd) => cmd_pipeline(cmd),
        Command::Eval(cmd) => cmd_eval(cmd),
        Command::Embed(cmd) => cmd_embed(cmd),
        Command::ServeStubs(cmd) => cmd_serve(cmd),
    }
}

struct Setup {
    config: RunConfig,
    flags: BackendFlags,
}

impl Setup {
    fn new(common: &CommonArgs) -> CliResult<Self> {
        let mut config = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if common.timeout_ms.is_some() {
            config.timeout_ms = common.timeout_ms;
        }
        if common.retries.is_some() {
            config.retries = common.retries;
        }
        if common.dataset.is_some() {
            config.dataset = common.dataset.clone();
        }
        if common.out.is_some() {
            config.out = common.out.clone();
        }
        let flags = BackendFlags { embedder: common.embedder.clone(), ..Default::default() };
        Ok(Setup { config, flags })
    }

    fn params(&self, args: &ParamArgs) -> CliResult<SelectionParams> {
        let p = args.p.as_deref().map(parse_threshold).transpose()?;
        Ok(self.config.selection_params(p, args.mode.as_deref(), args.k_fixed)?)
    }

    fn dataset(&self) -> CliResult<Vec<Conversation>> {
        let path = self.config.dataset.as_ref().ok_or_else(|| CliError::usage("missing --dataset"))?;
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Ok(parse_coqa(&text)?)
    }

    fn output(&self) -> CliResult<Box<dyn Write>> {
        open_output(self.config.out.as_deref())
    }
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_err(e: io::Error) -> CliError {
    CliError { code: 1, message: format!("write failed: {e}") }
}

#[derive(Debug, Serialize)]
pub struct SelectionRecord {
    pub conversation_id: String,
    pub turn: usize,
    pub window_start: usize,
    pub u: usize,
    pub k: usize,
    pub sum: f64,
    pub fallback: bool,
}

fn turn_filter(specs: &[String]) -> CliResult<Vec<(String, Option<usize>)>> {
    specs
        .iter()
        .map(|s| match s.rsplit_once(':') {
            Some((id, n)) => {
                n.parse().map(|n| (id.to_owned(), Some(n))).map_err(|_| CliError::usage(format!("bad turn spec {s:?}")))
            }
            None => Ok((s.clone(), None)),
        })
        .collect()
}

fn cmd_select(cmd: SelectCmd) -> CliResult<()> {
    let setup = Setup::new(&cmd.common)?;
    let params = setup.params(&cmd.params)?;
    let clients = Resolved::new(&setup.config, &setup.flags)?.clients(false)?;
    let corpus = setup.dataset()?;
    let filter = turn_filter(&cmd.turns)?;
    let wanted = |id: &str, n: usize| {
        filter.is_empty() || filter.iter().any(|(fid, fn_)| fid == id && fn_.is_none_or(|x| x == n))
    };
    let mut out = setup.output()?;
    for conv in &corpus {
        if !conv.turns.iter().any(|t| wanted(&conv.id, t.turn_id)) {
            continue;
        }
        let full = relevance_for(&conv.context, &conv.turns, &clients).map_err(|e| e.at_turn(&conv.id, 0))?;
        for (i, turn) in conv.turns.iter().enumerate() {
            if !wanted(&conv.id, turn.turn_id) {
                continue;
            }
            let Some(span) = turn.rationale_span else { continue };
            let Ok(c_s) = locate_rationale(&conv.context, span) else { continue };
            let t = full.leading_columns(i)?;
            let s = select(&t, c_s, &params).map_err(|e| e.at_turn(&conv.id, turn.turn_id))?;
            let rec = SelectionRecord {
                conversation_id: conv.id.clone(),
                turn: turn.turn_id,
                window_start: s.window_start,
                u: s.u,
                k: s.k,
                sum: s.achieved_sum,
                fallback: s.fallback,
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(out, "{line}").map_err(write_err)?;
        }
    }
    out.flush().map_err(write_err)
}

#[derive(Debug, Serialize)]
struct AnalyzeReport<'a> {
    split: Option<&'a str>,
    rows: Vec<AnalyzeRow>,
}

#[derive(Debug, Serialize)]
struct AnalyzeRow {
    p: String,
    avg_sentences: f64,
    avg_turns: f64,
    samples: usize,
    fallbacks: usize,
}

fn format_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        p.to_string()
    }
}

fn cmd_analyze(cmd: AnalyzeCmd) -> CliResult<()> {
    let setup = Setup::new(&cmd.common)?;
    let mut params = Vec::new();
    for p in cmd.ps.split(',').filter(|s| !s.trim().is_empty()) {
        let p = parse_threshold(p)?;
        params.push(setup.config.selection_params(Some(p), cmd.mode.as_deref(), cmd.k_fixed)?);
    }
    if params.is_empty() {
        return Err(CliError::usage("--ps needs at least one threshold"));
    }
    let clients = Resolved::new(&setup.config, &setup.flags)?.clients(false)?;
    let corpus = setup.dataset()?;
    let stats: Vec<SelectionStats> = selection_stats_multi(&corpus, &params, &clients)?;
    let rows: Vec<AnalyzeRow> = stats
        .iter()
        .map(|s| AnalyzeRow {
            p: format_p(s.p),
            avg_sentences: s.avg_sentences,
            avg_turns: s.avg_turns,
            samples: s.samples,
            fallbacks: s.fallbacks,
        })
        .collect();
    let mut out = setup.output()?;
    if cmd.json {
        let report = AnalyzeReport { split: cmd.split.as_deref(), rows };
        writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes")).map_err(write_err)?;
    } else {
        if let Some(split) = &cmd.split {
            writeln!(out, "# split: {split}  mode: {}", params[0].mode).map_err(write_err)?;
        }
        writeln!(out, "{:>8}  {:>10}  {:>10}  {:>8}  {:>9}", "p", "avg #S", "avg #P", "samples", "fallbacks")
            .map_err(write_err)?;
        for r in &rows {
            writeln!(
                out,
                "{:>8}  {:>10.2}  {:>10.2}  {:>8}  {:>9}",
                r.p, r.avg_sentences, r.avg_turns, r.samples, r.fallbacks
            )
            .map_err(write_err)?;
        }
    }
    out.flush().map_err(write_err)
}

fn cmd_prompt(cmd: PromptCmd) -> CliResult<()> {
    let setup = Setup::new(&cmd.common)?;
    let params = setup.params(&cmd.params)?;
    let clients = Resolved::new(&setup.config, &setup.flags)?.clients(false)?;
    let corpus = setup.dataset()?;
    let conv = corpus
        .iter()
        .find(|c| c.id == cmd.conversation)
        .ok_or_else(|| CliError::usage(format!("no conversation {:?} in dataset", cmd.conversation)))?;
    let task = TurnTask::from_conversation(conv, cmd.turn).map_err(|e| e.at_turn(&conv.id, cmd.turn))?;
    let prepared = prepare_prompt(&task, &params, &clients).map_err(|e| e.at_turn(&conv.id, cmd.turn))?;
    let mut out = setup.output()?;
    writeln!(out, "{}", prepared.prompt).map_err(write_err)?;
    out.flush().map_err(write_err)
}

fn cmd_pipeline(cmd: PipelineCmd) -> CliResult<()> {
    let setup = Setup::new(&cmd.common)?;
    let params = setup.params(&cmd.params)?;
    let flags = BackendFlags {
        embedder: cmd.common.embedder.clone(),
        generator: cmd.generator.clone(),
        qa: cmd.qa.clone(),
        extractor: cmd.extractor.clone(),
    };
    let clients = Resolved::new(&setup.config, &flags)?.clients(true)?;
    let (id, context) = match (&cmd.context, &cmd.conversation) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let id = cmd.id.clone().unwrap_or_else(|| {
                path.file_stem().map_or_else(|| "generated".into(), |s| s.to_string_lossy().into_owned())
            });
            (id, ContextDoc::new(text.trim_end())?)
        }
        (None, Some(conv_id)) => {
            let corpus = setup.dataset()?;
            let conv = corpus
                .into_iter()
                .find(|c| &c.id == conv_id)
                .ok_or_else(|| CliError::usage(format!("no conversation {conv_id:?} in dataset")))?;
            (cmd.id.clone().unwrap_or(conv.id), conv.context)
        }
        (None, None) => return Err(CliError::usage("pipeline needs --context or --dataset with --conversation")),
    };
    let max_turns = cmd.max_turns.or(setup.config.max_turns).unwrap_or(5);
    let opts = PipelineOptions { params, use_extractor: !cmd.no_ae, use_filter: !cmd.no_qf };
    let turns = run_conversation(&id, context.clone(), max_turns, &opts, &clients)?;
    let conv = Conversation::new(id, context, turns)?;
    let mut out = setup.output()?;
    let json = serde_json::to_string_pretty(&to_coqa_json(std::slice::from_ref(&conv))).expect("json");
    writeln!(out, "{json}").map_err(write_err)?;
    out.flush().map_err(write_err)
}

#[derive(Debug, Serialize)]
struct EvalJson {
    bleu1: f64,
    bleu2: f64,
    bleu3: f64,
    bleu4: f64,
    rouge_l: f64,
    brevity_penalty: f64,
    hypothesis_length: usize,
    reference_length: usize,
    segments: usize,
}

fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn cmd_eval(cmd: EvalCmd) -> CliResult<()> {
    let refs = read_lines(&cmd.references)?;
    let hyps = read_lines(&cmd.hypotheses)?;
    if refs.len() != hyps.len() {
        return Err(CliError::usage(format!("{} reference lines but {} hypothesis lines", refs.len(), hyps.len())));
    }
    let rep = evaluate(&refs, &hyps)?;
    let json = EvalJson {
        bleu1: rep.bleu.b(1),
        bleu2: rep.bleu.b(2),
        bleu3: rep.bleu.b(3),
        bleu4: rep.bleu.b(4),
        rouge_l: rep.rouge_l,
        brevity_penalty: rep.bleu.brevity_penalty,
        hypothesis_length: rep.bleu.hypothesis_length,
        reference_length: rep.bleu.reference_length,
        segments: rep.segments,
    };
    let mut out = open_output(cmd.out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&json).expect("json")).map_err(write_err)?;
    out.flush().map_err(write_err)
}

fn cmd_embed(cmd: EmbedCmd) -> CliResult<()> {
    let setup = Setup::new(&cmd.common)?;
    let clients = Resolved::new(&setup.config, &setup.flags)?.clients(false)?;
    let corpus = setup.dataset()?;
    let mut seen = std::collections::HashSet::new();
    let mut out = setup.output()?;
    for conv in &corpus {
        let mut texts = conv.context.sentence_texts();
        texts.extend(conv.turns.iter().map(|t| turn_text(&t.question, &t.answer)));
        texts.retain(|t| seen.insert(t.clone()));
        for (text, emb) in texts.iter().zip(clients.embed_batch(&texts)?) {
            let rec = EmbeddingRecord { id: text.clone(), vector: emb.into_vec() };
            writeln!(out, "{}", serde_json::to_string(&rec).expect("json")).map_err(write_err)?;
        }
    }
    out.flush().map_err(write_err)
}

fn cmd_serve(cmd: ServeCmd) -> CliResult<()> {
    let host = ServiceHost::start(&cmd.addr, make_stub_suite(cmd.seed))?;
    eprintln!("serving stub models (seed {}) on {}", cmd.seed, host.url());
    host.join();
    Ok(())
}
