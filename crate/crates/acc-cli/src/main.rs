//! `acc` — command-line front end for the trajectory-compilation toolkit.
//!
//! `compile` runs the full corpus pipeline; the remaining subcommands are
//! thin wrappers over one analysis each. Every run is deterministic given
//! its inputs and flags. Hard failures print a single JSON line to stderr
//! and exit 1; lenient-mode warnings (skipped or failed records, deferred
//! teacher calls, unverified examples, degenerate binning) exit 2 so
//! schedulers can tell the three outcomes apart.

mod teacher;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acc_core::attention::{
    attn_bin_means, delta_heatmap, tail_deltas, tail_deltas_csv, AttnDumpReader, DistanceBinning,
};
use acc_core::compile::{DistractorPolicy, DEFAULT_BUDGET};
use acc_core::dataset::{length_histogram, read_dataset};
use acc_core::decontam::{
    decontam_report, extract_question, read_embeddings, trigram_embedding, EmbeddingRecord,
    QuestionSource,
};
use acc_core::mask::{
    build_acc_mask, build_agent_mask, export_masks, parse_segmented_chats, MaskRecord,
    SegmentLabel,
};
use acc_core::pipeline::{compile_corpus, write_outputs, PipelineConfig};
use acc_core::routing::{expert_delta, expert_frequencies, RouterDump};
use acc_core::tokens::TokenCounter;
use acc_core::trajectory::{parse_trajectories, AgentType, ParseOptions, Strictness};
use acc_core::verify::{RetryPolicy, ScriptedTeacher, TeacherClient};

use teacher::HttpTeacher;

const EXIT_OK: u8 = 0;
const EXIT_WARNINGS: u8 = 2;

#[derive(Parser)]
#[command(
    name = "acc",
    version,
    about = "Compile agent trajectories into long-context QA records and analyze the results"
)]
struct Cli {
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a trajectory corpus into dataset, manifest, and histogram.
    Compile(CompileArgs),
    /// Summarize an emitted dataset: per-type counts and a length histogram.
    Stats(StatsArgs),
    /// Build supervision masks for segmented chats.
    Mask(MaskArgs),
    /// Compare two attention dumps: distance-binned means and tail deltas.
    AnalyzeAttn(AnalyzeAttnArgs),
    /// Compare two router dumps: expert selection-frequency deltas.
    AnalyzeExperts(AnalyzeExpertsArgs),
    /// Measure train/benchmark question overlap.
    Decontam(DecontamArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Trajectory JSONL input.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; writes dataset.jsonl, manifest.json, histogram.csv.
    #[arg(long)]
    out: PathBuf,
    /// Run seed; per-example seeds derive from it and each trajectory id.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Token budget per compiled example.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Distractor admission: keep, drop, or max:N.
    #[arg(long, default_value = "keep", value_parser = parse_policy)]
    distractor_policy: DistractorPolicy,
    /// Agent family expected of every record, or auto to accept each
    /// record's own.
    #[arg(long, default_value = "auto", value_parser = parse_agent_choice)]
    agent_type: AgentChoice,
    /// Render every record with this family's context template.
    #[arg(long, value_parser = parse_agent_type)]
    template: Option<AgentType>,
    /// Rationale source: an http(s) endpoint or stub:<script.jsonl>.
    #[arg(long)]
    teacher: Option<String>,
    /// Candidate rationales per example when a teacher is set.
    #[arg(long, default_value_t = 4)]
    n_candidates: u32,
    /// Bin count for the emitted length histogram.
    #[arg(long, default_value_t = 32)]
    bins: usize,
    /// Token-count sidecar JSONL with {"piece_id", "token_count"} rows.
    #[arg(long)]
    token_table: Option<PathBuf>,
    /// Recompute visited/opened/in-patch flags from each action log.
    #[arg(long)]
    derive_flags: bool,
    /// Abort on the first malformed or failing record instead of skipping.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Dataset JSONL emitted by `acc compile`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; writes histogram.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    bins: usize,
}

#[derive(Args)]
struct MaskArgs {
    /// Segmented-chat JSONL: {"example_id", "segments": [{"label", "turn", "len"}]}.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; writes masks.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeAttnArgs {
    /// Baseline-model attention dump.
    #[arg(long)]
    base: PathBuf,
    /// Fine-tuned-model attention dump.
    #[arg(long)]
    sft: PathBuf,
    /// Output directory; writes delta_heatmap.csv and tail_deltas.csv.
    #[arg(long)]
    out: PathBuf,
    /// Distance bin count.
    #[arg(long, default_value_t = 32)]
    bins: usize,
    /// Ranked tail-delta rows to keep.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Args)]
struct AnalyzeExpertsArgs {
    /// Baseline-model router dump.
    #[arg(long)]
    base: PathBuf,
    /// Fine-tuned-model router dump.
    #[arg(long)]
    sft: PathBuf,
    /// Output directory; writes expert_deltas.csv.
    #[arg(long)]
    out: PathBuf,
    /// Position-group count.
    #[arg(long, default_value_t = 32)]
    groups: usize,
    /// Layers to average (comma-separated; default all).
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    /// Ranked experts to keep.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Args)]
struct DecontamArgs {
    /// Training-side input: embedding JSONL ({"id","vec"}), trajectory
    /// JSONL, or dataset JSONL (detected from the first line).
    #[arg(long)]
    input: PathBuf,
    /// Benchmark side as name=path; repeatable. Same formats as --input.
    #[arg(long = "bench", value_parser = parse_bench, required = true)]
    bench: Vec<(String, PathBuf)>,
    /// Output directory; writes decontam.json.
    #[arg(long)]
    out: PathBuf,
}

/// Agent-family flag value with an explicit `auto` state.
#[derive(Clone, Copy)]
struct AgentChoice(Option<AgentType>);

fn parse_agent_choice(s: &str) -> Result<AgentChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        Ok(AgentChoice(None))
    } else {
        s.parse().map(|t| AgentChoice(Some(t)))
    }
}

fn parse_agent_type(s: &str) -> Result<AgentType, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<DistractorPolicy, String> {
    s.parse()
}

fn parse_bench(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected name=path, got {s:?}")),
    }
}

/// A failure that aborts the process: `kind` groups errors for schedulers,
/// `message` carries the cause.
struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, err: impl fmt::Display) -> Self {
        Self {
            kind,
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": err.message, "kind": err.kind})
            );
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::new("config", e))?;
    }
    match cli.command {
        Command::Compile(args) => cmd_compile(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Mask(args) => cmd_mask(args),
        Command::AnalyzeAttn(args) => cmd_analyze_attn(args),
        Command::AnalyzeExperts(args) => cmd_analyze_experts(args),
        Command::Decontam(args) => cmd_decontam(args),
    }
}

fn open_buf(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// compile
// ---------------------------------------------------------------------------

fn cmd_compile(args: CompileArgs) -> Result<u8, CliError> {
    let is_stub = args
        .teacher
        .as_deref()
        .is_some_and(|t| t.starts_with("stub:"));
    let config = PipelineConfig {
        seed: args.seed,
        budget: args.budget,
        policy: args.distractor_policy,
        template: args.template,
        agent_type_hint: args.agent_type.0,
        strictness: if args.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        },
        derive_flags: args.derive_flags,
        histogram_bins: args.bins,
        n_candidates: args.n_candidates,
        // A scripted stub cannot recover by waiting, so it gets one attempt.
        retry: if is_stub {
            RetryPolicy::none()
        } else {
            RetryPolicy::default()
        },
        ..PipelineConfig::default()
    };

    let counter = match &args.token_table {
        Some(path) => TokenCounter::from_sidecar(open_buf(path)?)
            .map_err(|e| CliError::new("tokens", format!("{}: {e}", path.display())))?,
        None => TokenCounter::approximate(),
    };

    let mut scripted: Option<ScriptedTeacher> = None;
    let mut remote: Option<HttpTeacher> = None;
    if let Some(endpoint) = args.teacher.as_deref() {
        if let Some(path) = endpoint.strip_prefix("stub:") {
            let script = ScriptedTeacher::from_reader(open_buf(Path::new(path))?)
                .map_err(|e| CliError::new("teacher", format!("{path}: {e}")))?;
            scripted = Some(script);
        } else if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            remote = Some(HttpTeacher::new(endpoint));
        } else {
            return Err(CliError::new(
                "config",
                format!("teacher must be an http(s) URL or stub:<script.jsonl>, got {endpoint:?}"),
            ));
        }
    }
    let teacher: Option<&mut dyn TeacherClient> = match (&mut scripted, &mut remote) {
        (Some(t), _) => Some(t),
        (_, Some(t)) => Some(t),
        _ => None,
    };

    let outcome = compile_corpus(open_buf(&args.input)?, &config, &counter, teacher)
        .map_err(|e| CliError::new("pipeline", e))?;
    write_outputs(&outcome, &config, &args.out).map_err(|e| CliError::new("pipeline", e))?;

    println!(
        "{}",
        serde_json::json!({
            "records": outcome.records.len(),
            "skipped": outcome.skipped.len(),
            "failures": outcome.failures.len(),
            "deferred": outcome.deferred.len(),
            "unverified": outcome.unverified.len(),
            "out": args.out.display().to_string(),
        })
    );
    // Unverified examples were silently excluded from the dataset, which a
    // scheduler should notice just like skips.
    let warned = outcome.has_warnings() || !outcome.unverified.is_empty();
    Ok(if warned { EXIT_WARNINGS } else { EXIT_OK })
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

fn cmd_stats(args: StatsArgs) -> Result<u8, CliError> {
    let records =
        read_dataset(open_buf(&args.input)?).map_err(|e| CliError::new("dataset", e))?;
    let csv = if records.is_empty() {
        String::from("agent_type,bin_start,bin_end,count\n")
    } else {
        length_histogram(&records, args.bins)
            .map_err(|e| CliError::new("dataset", e))?
            .to_csv()
    };
    write_out(&args.out, "histogram.csv", csv.as_bytes())?;

    let mut per_type: BTreeMap<String, u64> = BTreeMap::new();
    for record in &records {
        *per_type.entry(record.agent_type.to_string()).or_default() += 1;
    }
    println!(
        "{}",
        serde_json::json!({"records": records.len(), "per_type": per_type})
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// mask
// ---------------------------------------------------------------------------

fn cmd_mask(args: MaskArgs) -> Result<u8, CliError> {
    let chats =
        parse_segmented_chats(open_buf(&args.input)?).map_err(|e| CliError::new("mask", e))?;
    let mut records = Vec::with_capacity(chats.len());
    let mut agent_count = 0usize;
    for (id, chat) in &chats {
        // The layout grammar decides the mode: only compiled examples carry
        // a packed-context segment.
        let compiled = chat
            .segments()
            .iter()
            .any(|s| matches!(s.label, SegmentLabel::CompiledContext));
        let mask = if compiled {
            build_acc_mask(chat)
        } else {
            agent_count += 1;
            build_agent_mask(chat)
        }
        .map_err(|e| CliError::new("mask", format!("{id}: {e}")))?;
        records.push(MaskRecord::new(id.clone(), &mask));
    }
    let mut buffer = Vec::new();
    export_masks(&records, &mut buffer).map_err(|e| CliError::new("io", e))?;
    write_out(&args.out, "masks.jsonl", &buffer)?;
    println!(
        "{}",
        serde_json::json!({
            "masks": records.len(),
            "agent": agent_count,
            "acc": records.len() - agent_count,
        })
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// analyze-attn
// ---------------------------------------------------------------------------

fn cmd_analyze_attn(args: AnalyzeAttnArgs) -> Result<u8, CliError> {
    let attn_err = |path: &Path| {
        let shown = path.display().to_string();
        move |e: acc_core::attention::AttnError| CliError::new("attn", format!("{shown}: {e}"))
    };
    let mut base = AttnDumpReader::open(&args.base).map_err(attn_err(&args.base))?;
    let mut sft = AttnDumpReader::open(&args.sft).map_err(attn_err(&args.sft))?;

    let base_bins = DistanceBinning::new(base.header().seq_len as usize, args.bins)
        .map_err(|e| CliError::new("attn", e))?;
    let sft_bins = DistanceBinning::new(sft.header().seq_len as usize, args.bins)
        .map_err(|e| CliError::new("attn", e))?;
    let degenerate = base_bins.is_degenerate() || sft_bins.is_degenerate();

    let base_stats = attn_bin_means(&mut base, &base_bins).map_err(attn_err(&args.base))?;
    let sft_stats = attn_bin_means(&mut sft, &sft_bins).map_err(attn_err(&args.sft))?;

    let heat = delta_heatmap(&base_stats, &sft_stats).map_err(|e| CliError::new("attn", e))?;
    let mut tails = tail_deltas(&base_stats, &sft_stats).map_err(|e| CliError::new("attn", e))?;
    tails.truncate(args.top);

    write_out(&args.out, "delta_heatmap.csv", heat.to_csv().as_bytes())?;
    write_out(&args.out, "tail_deltas.csv", tail_deltas_csv(&tails).as_bytes())?;

    if degenerate {
        eprintln!(
            "{}",
            serde_json::json!({
                "warning": "more bins than token distances; empty bins are omitted",
                "kind": "attn",
            })
        );
    }
    println!(
        "{}",
        serde_json::json!({
            "layers": base_stats.n_layers,
            "heads": base_stats.n_heads,
            "bins": args.bins,
            "tail_rows": tails.len(),
        })
    );
    Ok(if degenerate { EXIT_WARNINGS } else { EXIT_OK })
}

// ---------------------------------------------------------------------------
// analyze-experts
// ---------------------------------------------------------------------------

fn cmd_analyze_experts(args: AnalyzeExpertsArgs) -> Result<u8, CliError> {
    let router_err = |path: &Path| {
        let shown = path.display().to_string();
        move |e: acc_core::routing::RouterError| CliError::new("router", format!("{shown}: {e}"))
    };
    let base = RouterDump::open(&args.base).map_err(router_err(&args.base))?;
    let sft = RouterDump::open(&args.sft).map_err(router_err(&args.sft))?;

    let base_table = expert_frequencies(&base, args.groups)
        .map_err(router_err(&args.base))?
        .table();
    let sft_table = expert_frequencies(&sft, args.groups)
        .map_err(router_err(&args.sft))?
        .table();

    let layers: Vec<usize> = if args.layers.is_empty() {
        (0..base_table.n_layers).collect()
    } else {
        args.layers.clone()
    };
    let delta = expert_delta(&base_table, &sft_table, &layers, args.top)
        .map_err(|e| CliError::new("router", e))?;
    write_out(&args.out, "expert_deltas.csv", delta.to_csv().as_bytes())?;

    println!(
        "{}",
        serde_json::json!({
            "layers": layers,
            "groups": args.groups,
            "experts_ranked": delta.rows.len(),
        })
    );
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// decontam
// ---------------------------------------------------------------------------

fn cmd_decontam(args: DecontamArgs) -> Result<u8, CliError> {
    let mut fallback_used = false;
    let train = load_embedding_side(&args.input, None, &mut fallback_used)?;
    let mut benches = BTreeMap::new();
    for (name, path) in &args.bench {
        let records = load_embedding_side(path, Some(name.as_str()), &mut fallback_used)?;
        benches.insert(name.clone(), records);
    }
    let label = if fallback_used {
        "hashed-char-trigram-256"
    } else {
        "precomputed"
    };
    let report =
        decontam_report(&train, &benches, label).map_err(|e| CliError::new("decontam", e))?;
    write_out(&args.out, "decontam.json", report.to_json_pretty().as_bytes())?;
    println!(
        "{}",
        serde_json::json!({
            "overall_auc": report.overall_auc,
            "benchmarks": report.benchmarks.len(),
        })
    );
    Ok(EXIT_OK)
}

/// Loads one side of the overlap comparison, detecting the input format
/// from its first non-empty line: embedding rows pass through unchanged,
/// trajectory or dataset rows go through question extraction plus the
/// trigram fallback encoder.
fn load_embedding_side(
    path: &Path,
    bench: Option<&str>,
    fallback_used: &mut bool,
) -> Result<Vec<EmbeddingRecord>, CliError> {
    let shown = path.display().to_string();
    let mut first = None;
    for line in open_buf(path)?.lines() {
        let line = line.map_err(|e| CliError::new("io", format!("{shown}: {e}")))?;
        if !line.trim().is_empty() {
            first = Some(line);
            break;
        }
    }
    let first =
        first.ok_or_else(|| CliError::new("decontam", format!("{shown}: empty input")))?;
    let probe: serde_json::Value = serde_json::from_str(&first)
        .map_err(|e| CliError::new("decontam", format!("{shown} line 1: {e}")))?;

    let source = || match bench {
        None => QuestionSource::Train,
        Some(name) => QuestionSource::Benchmark(name.to_string()),
    };
    let embed = |id: &str, text: &str| {
        extract_question(id, source(), text)
            .and_then(|q| trigram_embedding(&q.id, &q.text))
            .map_err(|e| CliError::new("decontam", format!("{shown}: {e}")))
    };

    if probe.get("vec").is_some() {
        read_embeddings(open_buf(path)?)
            .map_err(|e| CliError::new("decontam", format!("{shown}: {e}")))
    } else if probe.get("turns").is_some() {
        *fallback_used = true;
        let outcome = parse_trajectories(open_buf(path)?, &ParseOptions::default())
            .map_err(|e| CliError::new("parse", format!("{shown}: {e}")))?;
        outcome
            .trajectories
            .iter()
            .map(|t| embed(&t.id, &t.question))
            .collect()
    } else if probe.get("question").is_some() {
        *fallback_used = true;
        let records = read_dataset(open_buf(path)?)
            .map_err(|e| CliError::new("dataset", format!("{shown}: {e}")))?;
        records
            .iter()
            .map(|r| embed(&r.example_id, &r.question))
            .collect()
    } else {
        Err(CliError::new(
            "decontam",
            format!("{shown}: unrecognized input (expected embedding, trajectory, or dataset JSONL)"),
        ))
    }
}
