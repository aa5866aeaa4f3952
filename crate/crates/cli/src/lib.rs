//! The `diarasr` command line: scoring, chunk planning, mixture simulation
//! and prompt augmentation. Every command writes one JSON document (JSON
//! lines for `augment`) to standard output or to `--out`.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 for data errors,
//! with a single diagnostic line on standard error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{ArgAction, Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use diarasr_core::chunker::{chunk_coverage_check, plan_chunks, ChunkConfig, CoverageReport};
use diarasr_core::enrollment::{
    assemble_prompt, mean_pool_embedding, read_records, write_records, DEFAULT_FRAME_RATE,
    DEFAULT_INSTRUCTION,
};
use diarasr_core::formats::{parse_rttm, parse_seglst, parse_uem, serialize_seglst};
use diarasr_core::metrics::{
    cpwer, der, tcpwer, AlignmentReport, DerReport, ErrorCounts, Tokenizer,
};
use diarasr_core::simkit::{
    augment, calibrate_gap_range, derive_seed, donors_from_prompts, oracle_asr, simulate_mixture,
    synthetic_pool, AugmentConfig, MixtureConfig, Placement, UtterancePool,
};
use diarasr_core::{EmbeddingTable, Interval, SegmentList, SpeakerEmbedding};

#[derive(Parser, Debug)]
#[command(
    name = "diarasr",
    version,
    about = "Diarization-aware multi-speaker ASR toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a hypothesis against a reference.
    #[command(subcommand)]
    Score(ScoreCommand),
    /// Split diarization output into chunks with enrollment triplets.
    PlanChunks(PlanArgs),
    /// Simulate multi-speaker mixtures from an utterance pool.
    Simulate(SimulateArgs),
    /// Augment prompt records (JSON lines).
    Augment(AugmentArgs),
}

#[derive(Subcommand, Debug)]
enum ScoreCommand {
    /// Concatenated minimum-permutation WER.
    #[command(disable_help_flag = true)]
    Cpwer(WerArgs),
    /// Time-constrained cpWER.
    #[command(disable_help_flag = true)]
    Tcpwer(TcpwerArgs),
    /// Diarization error rate.
    #[command(disable_help_flag = true)]
    Der(DerArgs),
}

#[derive(Args, Debug)]
struct Pair {
    /// Reference segments (RTTM or SegLST JSON).
    #[arg(short = 'r', long = "ref")]
    reference: PathBuf,
    /// Hypothesis segments (RTTM or SegLST JSON).
    #[arg(short = 'h', long = "hyp")]
    hypothesis: PathBuf,
    /// Break results down by number of reference speakers.
    #[arg(long)]
    by_num_speakers: bool,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    #[arg(long, action = ArgAction::Help)]
    help: Option<bool>,
}

#[derive(Args, Debug)]
struct WerArgs {
    #[command(flatten)]
    pair: Pair,
    #[arg(long, default_value = "word", value_parser = parse_tokenizer)]
    tokenizer: Tokenizer,
}

#[derive(Args, Debug)]
struct TcpwerArgs {
    #[command(flatten)]
    pair: Pair,
    /// Seconds by which word times may disagree (`inf` for none).
    #[arg(long, default_value_t = 5.0, value_parser = parse_collar, allow_negative_numbers = true)]
    collar: f64,
    #[arg(long, default_value = "word", value_parser = parse_tokenizer)]
    tokenizer: Tokenizer,
}

#[derive(Args, Debug)]
struct DerArgs {
    #[command(flatten)]
    pair: Pair,
    /// Seconds excluded on both sides of every reference boundary.
    #[arg(long, default_value_t = 0.25, value_parser = parse_collar, allow_negative_numbers = true)]
    collar: f64,
    /// Scoring regions per session.
    #[arg(long)]
    uem: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Diarization segments (RTTM or SegLST JSON).
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    max_dur: f64,
    #[arg(long, default_value_t = ChunkConfig::ALIMEETING.max_total_segments)]
    max_segments: usize,
    #[arg(long, default_value_t = ChunkConfig::ALIMEETING.max_segments_per_speaker)]
    max_per_speaker: usize,
    /// JSON object mapping speaker labels to embedding vectors.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE)]
    frame_rate: f64,
    /// Also write one prompt record per chunk (JSON lines), labelled with
    /// the input's words when it has any.
    #[arg(long)]
    prompts_out: Option<PathBuf>,
    #[arg(long, default_value = "word", value_parser = parse_tokenizer)]
    tokenizer: Tokenizer,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Utterance pool (JSON); a synthetic pool is used when absent.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pool_speakers: usize,
    #[arg(long, default_value_t = 20)]
    pool_utterances: usize,
    #[arg(long, default_value_t = 16)]
    pool_dim: usize,
    #[arg(long, default_value_t = 2)]
    n_speakers: usize,
    /// Number of sessions to generate.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30.0)]
    max_dur: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    gap_min: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gap_max: f64,
    /// Calibrate the gap range to reach this mean overlap ratio.
    #[arg(long, conflicts_with_all = ["gap_min", "gap_max"])]
    target_overlap: Option<f64>,
    /// Also write every session's reference as SegLST to this file.
    #[arg(long)]
    reference_out: Option<PathBuf>,
    /// Also chunk every session and write prompt records (JSON lines) with
    /// oracle transcripts; enrollment embeddings are pool means per speaker.
    #[arg(long)]
    prompts_out: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    chunk_dur: f64,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Prompt records, one JSON object per line.
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    p_replace: f64,
    #[arg(long, default_value_t = 0.1)]
    p_drop: f64,
    #[arg(long, default_value_t = 0.2)]
    p_shuffle: f64,
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

fn parse_tokenizer(s: &str) -> Result<Tokenizer, String> {
    s.parse::<Tokenizer>().map_err(|e| e.to_string())
}

fn parse_collar(s: &str) -> Result<f64, String> {
    let c: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if c.is_nan() || c < 0.0 {
        return Err(format!("collar must be non-negative, got {s}"));
    }
    Ok(c)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let rendered = e.to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("usage error");
            let _ = writeln!(stderr, "{line}");
            return 2;
        }
    };
    match execute(cli.command, stderr) {
        Ok(output) => match emit(&output, stdout) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e:#}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

struct Output {
    text: String,
    path: Option<PathBuf>,
}

fn emit(output: &Output, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match &output.path {
        Some(p) => std::fs::write(p, &output.text).with_context(|| p.display().to_string()),
        None => stdout
            .write_all(output.text.as_bytes())
            .context("writing standard output"),
    }
}

fn document<T: Serialize>(value: &T, path: Option<PathBuf>) -> anyhow::Result<Output> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(Output { text, path })
}

fn execute(command: Command, stderr: &mut dyn Write) -> anyhow::Result<Output> {
    match command {
        Command::Score(ScoreCommand::Cpwer(a)) => score_wer(&a.pair, None, a.tokenizer),
        Command::Score(ScoreCommand::Tcpwer(a)) => score_wer(&a.pair, Some(a.collar), a.tokenizer),
        Command::Score(ScoreCommand::Der(a)) => score_der(&a),
        Command::PlanChunks(a) => plan(&a, stderr),
        Command::Simulate(a) => simulate(&a),
        Command::Augment(a) => augment_prompts(&a),
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| path.display().to_string())
}

/// RTTM or SegLST, by extension; other files are sniffed for a leading `[`.
pub fn read_segments(path: &Path) -> anyhow::Result<SegmentList> {
    let text = read_text(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let seglst = match ext.as_str() {
        "rttm" => false,
        "json" | "seglst" => true,
        _ => text.trim_start().starts_with('['),
    };
    let parsed = if seglst {
        parse_seglst(&text)
    } else {
        parse_rttm(&text)
    };
    parsed.with_context(|| path.display().to_string())
}

/// Sessions of both sides, paired up and in session-id order. A session
/// missing on one side is scored against an empty list.
fn paired_sessions(
    reference: &SegmentList,
    hypothesis: &SegmentList,
) -> Vec<(String, SegmentList, SegmentList)> {
    let mut r = reference.by_session();
    let mut h = hypothesis.by_session();
    let mut ids: Vec<String> = r.keys().chain(h.keys()).cloned().collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let rs = r.remove(&id).unwrap_or_default();
            let hs = h.remove(&id).unwrap_or_default();
            (id, rs, hs)
        })
        .collect()
}

fn collar_value(c: f64) -> Value {
    if c.is_finite() {
        json!(c)
    } else {
        json!("inf")
    }
}

#[derive(Serialize)]
struct WerSession {
    session_id: String,
    num_ref_speakers: usize,
    #[serde(flatten)]
    counts: ErrorCounts,
    errors: usize,
    rate: Option<f64>,
    speaker_mapping: BTreeMap<String, Option<String>>,
}

#[derive(Serialize)]
struct WerAggregate {
    sessions: usize,
    #[serde(flatten)]
    counts: ErrorCounts,
    errors: usize,
    rate: Option<f64>,
}

impl WerAggregate {
    fn of<'a>(sessions: impl Iterator<Item = &'a WerSession>) -> Self {
        let (n, counts) = sessions.fold((0, ErrorCounts::default()), |(n, c), s| {
            (n + 1, c + s.counts)
        });
        Self {
            sessions: n,
            counts,
            errors: counts.errors(),
            rate: counts.rate(),
        }
    }
}

fn score_wer(pair: &Pair, collar: Option<f64>, tokenizer: Tokenizer) -> anyhow::Result<Output> {
    let reference = read_segments(&pair.reference)?;
    let hypothesis = read_segments(&pair.hypothesis)?;
    let sessions = paired_sessions(&reference, &hypothesis);
    let scored: Vec<WerSession> = sessions
        .par_iter()
        .map(|(id, r, h)| {
            let report: AlignmentReport = match collar {
                None => cpwer(r, h, tokenizer),
                Some(c) => tcpwer(r, h, c, tokenizer),
            }
            .with_context(|| {
                format!(
                    "{} vs {}: session {id}",
                    pair.reference.display(),
                    pair.hypothesis.display()
                )
            })?;
            Ok(WerSession {
                session_id: id.clone(),
                num_ref_speakers: r.speakers().len(),
                counts: report.counts,
                errors: report.counts.errors(),
                rate: report.rate,
                speaker_mapping: report.speaker_mapping,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut parameters = json!({ "tokenizer": tokenizer.to_string() });
    if let Some(c) = collar {
        parameters["collar"] = collar_value(c);
    }
    let mut report = json!({
        "metric": if collar.is_some() { "tcpwer" } else { "cpwer" },
        "parameters": parameters,
        "sessions": scored,
        "aggregate": WerAggregate::of(scored.iter()),
    });
    if pair.by_num_speakers {
        let mut groups: BTreeMap<usize, Vec<&WerSession>> = BTreeMap::new();
        for s in &scored {
            groups.entry(s.num_ref_speakers).or_default().push(s);
        }
        let breakdown: BTreeMap<String, WerAggregate> = groups
            .into_iter()
            .map(|(k, v)| (k.to_string(), WerAggregate::of(v.into_iter())))
            .collect();
        report["by_num_speakers"] = serde_json::to_value(breakdown)?;
    }
    document(&report, pair.out.clone())
}

#[derive(Serialize)]
struct DerSession {
    session_id: String,
    num_ref_speakers: usize,
    #[serde(flatten)]
    report: DerReport,
}

#[derive(Serialize, Default)]
struct DerAggregate {
    sessions: usize,
    missed: f64,
    false_alarm: f64,
    confusion: f64,
    total_ref_speech: f64,
    scored_time: f64,
    der: Option<f64>,
}

impl DerAggregate {
    fn of<'a>(sessions: impl Iterator<Item = &'a DerSession>) -> Self {
        let mut agg = Self::default();
        for s in sessions {
            agg.sessions += 1;
            agg.missed += s.report.missed;
            agg.false_alarm += s.report.false_alarm;
            agg.confusion += s.report.confusion;
            agg.total_ref_speech += s.report.total_ref_speech;
            agg.scored_time += s.report.scored_time;
        }
        if agg.total_ref_speech > 0.0 {
            agg.der = Some((agg.missed + agg.false_alarm + agg.confusion) / agg.total_ref_speech);
        }
        agg
    }
}

fn score_der(args: &DerArgs) -> anyhow::Result<Output> {
    let pair = &args.pair;
    let reference = read_segments(&pair.reference)?;
    let hypothesis = read_segments(&pair.hypothesis)?;
    let uem: Option<BTreeMap<String, Vec<Interval>>> = match &args.uem {
        Some(p) => Some(parse_uem(&read_text(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };
    let sessions = paired_sessions(&reference, &hypothesis);
    let scored: Vec<DerSession> = sessions
        .par_iter()
        .map(|(id, r, h)| {
            let region = match &uem {
                None => None,
                Some(map) => Some(
                    map.get(id)
                        .map(Vec::as_slice)
                        .ok_or_else(|| anyhow!("session {id}: no UEM entry"))?,
                ),
            };
            let report = der(r, h, args.collar, region).with_context(|| {
                format!(
                    "{} vs {}: session {id}",
                    pair.reference.display(),
                    pair.hypothesis.display()
                )
            })?;
            Ok(DerSession {
                session_id: id.clone(),
                num_ref_speakers: r.speakers().len(),
                report,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut report = json!({
        "metric": "der",
        "parameters": { "collar": collar_value(args.collar), "uem": args.uem.is_some() },
        "sessions": scored,
        "aggregate": DerAggregate::of(scored.iter()),
    });
    if pair.by_num_speakers {
        let mut groups: BTreeMap<usize, Vec<&DerSession>> = BTreeMap::new();
        for s in &scored {
            groups.entry(s.num_ref_speakers).or_default().push(s);
        }
        let breakdown: BTreeMap<String, DerAggregate> = groups
            .into_iter()
            .map(|(k, v)| (k.to_string(), DerAggregate::of(v.into_iter())))
            .collect();
        report["by_num_speakers"] = serde_json::to_value(breakdown)?;
    }
    document(&report, pair.out.clone())
}

fn read_embeddings(path: &Path) -> anyhow::Result<EmbeddingTable> {
    let raw: BTreeMap<String, Vec<f64>> =
        serde_json::from_str(&read_text(path)?).with_context(|| path.display().to_string())?;
    raw.into_iter()
        .map(|(spk, v)| {
            let e = SpeakerEmbedding::new(v)
                .with_context(|| format!("{}: speaker {spk}", path.display()))?;
            Ok((spk, e))
        })
        .collect()
}

fn one_hot(speakers: &[String]) -> EmbeddingTable {
    speakers
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut values = vec![0.0; speakers.len()];
            values[i] = 1.0;
            (s.clone(), SpeakerEmbedding { values })
        })
        .collect()
}

#[derive(Serialize)]
struct PlannedTriplet<'a> {
    speaker: &'a str,
    start_norm: f64,
    end_norm: f64,
    start: f64,
    end: f64,
}

#[derive(Serialize)]
struct PlannedChunk<'a> {
    session_id: &'a str,
    window: Interval,
    segments: &'a [diarasr_core::Segment],
    triplets: Vec<PlannedTriplet<'a>>,
}

#[derive(Serialize)]
struct PlanReport<'a> {
    config: ChunkConfig,
    frame_rate: f64,
    chunks: Vec<PlannedChunk<'a>>,
    coverage: CoverageReport,
}

fn plan(args: &PlanArgs, stderr: &mut dyn Write) -> anyhow::Result<Output> {
    let segs = read_segments(&args.input)?;
    let cfg = ChunkConfig {
        max_chunk_duration: args.max_dur,
        max_total_segments: args.max_segments,
        max_segments_per_speaker: args.max_per_speaker,
    };
    let table = match &args.embeddings {
        Some(p) => read_embeddings(p)?,
        None => {
            writeln!(
                stderr,
                "warning: no --embeddings given; using one-hot speaker embeddings"
            )?;
            one_hot(&segs.speakers())
        }
    };
    let chunks = plan_chunks(&segs, &cfg, &table, args.frame_rate)?;
    let coverage = chunk_coverage_check(&segs, &chunks, cfg.max_chunk_duration);
    if !coverage.covered {
        bail!("chunk plan does not cover the input: {coverage:?}");
    }
    if let Some(p) = &args.prompts_out {
        let prompts = chunks
            .iter()
            .map(|c| {
                let labels = oracle_asr(c, &segs, args.tokenizer);
                assemble_prompt(DEFAULT_INSTRUCTION, c.triplets.clone(), labels)
            })
            .collect::<Result<Vec<_>, _>>()?;
        std::fs::write(p, write_records(&prompts)).with_context(|| p.display().to_string())?;
    }
    let planned = chunks
        .iter()
        .map(|c| PlannedChunk {
            session_id: &c.session_id,
            window: c.window,
            segments: &c.segments,
            triplets: c
                .triplets
                .iter()
                .map(|t| PlannedTriplet {
                    speaker: t.speaker(),
                    start_norm: t.start_norm,
                    end_norm: t.end_norm,
                    start: t.source_segment.start,
                    end: t.source_segment.end,
                })
                .collect(),
        })
        .collect();
    let report = PlanReport {
        config: cfg,
        frame_rate: args.frame_rate,
        chunks: planned,
        coverage,
    };
    document(&report, args.out.clone())
}

#[derive(Serialize)]
struct SimulatedSession {
    session_id: String,
    seed: u64,
    overlap_ratio: f64,
    placements: Vec<Placement>,
    reference: SegmentList,
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<Output> {
    let pool: UtterancePool = match &args.pool {
        Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| p.display().to_string())?,
        None => synthetic_pool(
            args.pool_speakers,
            args.pool_utterances,
            args.pool_dim,
            args.seed,
        ),
    };
    let cfg = match args.target_overlap {
        Some(target) => {
            let calibration: Vec<u64> = (0..50)
                .map(|i| derive_seed(args.seed ^ 0xca1b, i))
                .collect();
            calibrate_gap_range(
                &pool,
                args.n_speakers,
                args.max_dur,
                target,
                1.0,
                &calibration,
            )?
        }
        None => MixtureConfig {
            n_speakers: args.n_speakers,
            max_duration: args.max_dur,
            gap_min: args.gap_min,
            gap_max: args.gap_max,
        },
    };
    let sessions = (0..args.count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(args.seed, i);
            let plan = simulate_mixture(&pool, &cfg, seed)?;
            Ok(SimulatedSession {
                session_id: plan.session_id,
                seed,
                overlap_ratio: plan.overlap_ratio,
                placements: plan.placements,
                reference: plan.reference,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if let Some(p) = &args.reference_out {
        let all: SegmentList = sessions
            .iter()
            .flat_map(|s| s.reference.iter().cloned())
            .collect();
        std::fs::write(p, serialize_seglst(&all)).with_context(|| p.display().to_string())?;
    }
    if let Some(p) = &args.prompts_out {
        let table = pool_enrollment(&pool)?;
        let cfg = ChunkConfig {
            max_chunk_duration: args.chunk_dur,
            ..ChunkConfig::ALIMEETING
        };
        let mut prompts = Vec::new();
        for s in &sessions {
            for c in plan_chunks(&s.reference, &cfg, &table, DEFAULT_FRAME_RATE)? {
                let labels = oracle_asr(&c, &s.reference, Tokenizer::Word);
                prompts.push(assemble_prompt(DEFAULT_INSTRUCTION, c.triplets, labels)?);
            }
        }
        std::fs::write(p, write_records(&prompts)).with_context(|| p.display().to_string())?;
    }
    let mean = sessions.iter().map(|s| s.overlap_ratio).sum::<f64>() / sessions.len().max(1) as f64;
    let report = json!({
        "config": cfg,
        "mean_overlap_ratio": mean,
        "sessions": sessions,
    });
    document(&report, args.out.clone())
}

fn pool_enrollment(pool: &UtterancePool) -> anyhow::Result<EmbeddingTable> {
    pool.speakers()
        .into_iter()
        .map(|spk| {
            let utts: Vec<SpeakerEmbedding> = pool
                .utterances
                .iter()
                .filter(|u| u.speaker == spk)
                .map(|u| u.embedding.clone())
                .collect();
            Ok((spk, mean_pool_embedding(&utts)?))
        })
        .collect()
}

fn augment_prompts(args: &AugmentArgs) -> anyhow::Result<Output> {
    let base = AugmentConfig {
        p_replace: args.p_replace,
        p_drop: args.p_drop,
        p_shuffle: args.p_shuffle,
        seed: args.seed,
    };
    base.validate()?;
    let text = read_text(&args.input)?;
    let prompts = read_records(&text)
        .map_err(|(line, e)| anyhow!("{}: line {line}: {e}", args.input.display()))?;
    let donors = donors_from_prompts(&prompts);
    let augmented: Vec<_> = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cfg = AugmentConfig {
                seed: derive_seed(args.seed, i as u64),
                ..base
            };
            augment(p, &cfg, &donors)
        })
        .collect();
    Ok(Output {
        text: write_records(&augmented),
        path: args.out.clone(),
    })
}
