use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use stimkb::eval::{parse_eval_queries, parse_judgments, run_experiment, ExperimentConfig};
use stimkb::kb::{load_manifest, read_file, ErrorClass, KbError, KnowledgeBase};
use stimkb::retrieval::{filter_query, parse_query, ranked_query, Mode, Query, RankedResult};
use stimkb::sequence::{build_sequence, emit_schedule, schedule_to_tsv, SequenceParams};
use stimkb::similarity::{Measure, MeasureParams};

/// Query, rank and evaluate affectively annotated stimulus collections.
#[derive(Parser)]
#[command(name = "stimkb", version)]
struct Cli {
    /// Workspace manifest (flat key = value file).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Snapshot written by `ingest`.
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    /// Seed for candidate sampling; overrides the workspace seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// Human-readable output instead of TSV/JSON.
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Load every file named by the manifest and write a snapshot.
    Ingest,
    /// Check the manifest's files and report every invalid record.
    Validate,
    /// Run a filter or ranked query.
    Query {
        /// e.g. `concept:GroupOfPeople valence:[6.5,9] mode:filter`
        query: String,
    },
    /// Evaluate the measures on the workspace's queries and judgments.
    Eval(EvalArgs),
    /// Build a presentation sequence from a ranked query.
    Sequence(SequenceArgs),
    /// Corpus statistics.
    Stats,
}

#[derive(Args)]
struct EvalArgs {
    /// Judgments file; defaults to the workspace's.
    #[arg(long)]
    judgments: Option<PathBuf>,
    /// Queries file; defaults to the workspace's.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Comma-separated measure names.
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<Measure>>,
    /// Candidates sampled per query.
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long, default_value_t = 10)]
    max_retries: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SequenceArgs {
    /// Ranked query supplying the stimuli.
    query: String,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    duration_ms: u64,
    #[arg(long, default_value_t = 0)]
    isi_ms: u64,
    #[arg(long, default_value = "main")]
    track: String,
    /// Write sequence.json and schedule.tsv here instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<KbError> for Failure {
    fn from(e: KbError) -> Self {
        match e.class() {
            ErrorClass::Usage => Failure::Usage(e.to_string()),
            ErrorClass::Validation => Failure::Data(e.to_string()),
            ErrorClass::Internal => Failure::Internal(e.to_string()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("stimkb: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Ingest => ingest(cli),
        Command::Validate => validate(cli),
        Command::Query { query } => query_cmd(cli, query),
        Command::Eval(args) => eval(cli, args),
        Command::Sequence(args) => sequence(cli, args),
        Command::Stats => stats(cli),
    }
}

fn need_manifest(cli: &Cli) -> Result<&Path, Failure> {
    cli.manifest
        .as_deref()
        .ok_or_else(|| Failure::Usage("--manifest is required".into()))
}

/// Loads from `--snapshot` when given, otherwise ingests `--manifest`.
fn load(cli: &Cli) -> Result<KnowledgeBase, Failure> {
    if let Some(path) = &cli.snapshot {
        return Ok(KnowledgeBase::load_snapshot(path)?);
    }
    let Some(manifest) = &cli.manifest else {
        return Err(Failure::Usage(
            "one of --snapshot or --manifest is required".into(),
        ));
    };
    Ok(KnowledgeBase::ingest(&load_manifest(manifest)?)?.0)
}

fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn ingest(cli: &Cli) -> Outcome {
    let manifest_path = need_manifest(cli)?;
    let manifest = load_manifest(manifest_path)?;
    let (kb, summary) = KnowledgeBase::ingest(&manifest)?;
    let snapshot = cli
        .snapshot
        .clone()
        .unwrap_or_else(|| manifest_path.with_file_name("stimkb.snapshot.json"));
    kb.save_snapshot(&snapshot)?;
    if cli.human {
        return Ok(format!(
            "{} records, {} invalid\n{} concepts, {} keywords mapped, {} unmapped\nsnapshot written to {}\n",
            summary.records,
            summary.invalid,
            summary.concepts,
            summary.mapped_keywords,
            summary.unmapped_keywords,
            snapshot.display()
        ));
    }
    Ok(match cli.format {
        Format::Json => to_json(&json!({ "summary": summary, "snapshot": snapshot })),
        Format::Tsv => format!(
            "records\t{}\ninvalid\t{}\nconcepts\t{}\nmapped_keywords\t{}\nunmapped_keywords\t{}\nconcepts_added\t{}\nsnapshot\t{}\n",
            summary.records,
            summary.invalid,
            summary.concepts,
            summary.mapped_keywords,
            summary.unmapped_keywords,
            summary.concepts_added,
            snapshot.display()
        ),
    })
}

fn validate(cli: &Cli) -> Outcome {
    let manifest = load_manifest(need_manifest(cli)?)?;
    let (kb, summary) = KnowledgeBase::ingest(&manifest)?;
    Ok(match cli.format {
        Format::Json => to_json(&summary),
        Format::Tsv => format!("{} records, {} invalid\n", kb.corpus.len(), summary.invalid),
    })
}

fn parse_cli_query(text: &str) -> Result<Query, Failure> {
    parse_query(text).map_err(|e| Failure::Usage(format!("query: {e}\n{}", e.caret(text))))
}

fn retrieval_failure(e: stimkb::retrieval::RetrievalError) -> Failure {
    use stimkb::retrieval::RetrievalError as R;
    match e {
        R::Similarity(_) => Failure::Internal(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn run_ranked(kb: &KnowledgeBase, mut q: Query) -> Result<RankedResult, Failure> {
    if q.measure.is_none() {
        q.measure = kb.measure;
    }
    ranked_query(
        &kb.corpus,
        &kb.taxonomy,
        &kb.closure,
        &MeasureParams::default(),
        &q,
    )
    .map_err(retrieval_failure)
}

fn query_cmd(cli: &Cli, text: &str) -> Outcome {
    let q = parse_cli_query(text)?;
    let kb = load(cli)?;
    if q.mode == Mode::Filter {
        let hits =
            filter_query(&kb.corpus, &kb.taxonomy, &kb.closure, &q).map_err(retrieval_failure)?;
        return Ok(match cli.format {
            Format::Json => to_json(&hits),
            Format::Tsv => hits.iter().map(|s| format!("{s}\n")).collect(),
        });
    }
    let result = run_ranked(&kb, q)?;
    if cli.format == Format::Json {
        return Ok(to_json(&result));
    }
    let mut out = String::new();
    for (i, e) in result.entries.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{}\t{}\t{}",
            i + 1,
            e.score,
            e.stimulus,
            e.stimulus.db(),
            e.stimulus.local_id()
        );
    }
    Ok(out)
}

fn eval(cli: &Cli, args: &EvalArgs) -> Outcome {
    let kb = load(cli)?;
    let judgments = match &args.judgments {
        Some(p) => parse_judgments(&read_file(p)?)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => kb.judgments.clone().ok_or_else(|| {
            Failure::Usage("no judgments: pass --judgments or name them in the manifest".into())
        })?,
    };
    let queries = match &args.queries {
        Some(p) => parse_eval_queries(&read_file(p)?)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => kb.queries.clone().ok_or_else(|| {
            Failure::Usage("no queries: pass --queries or name them in the manifest".into())
        })?,
    };
    let mut config = ExperimentConfig {
        seed: cli.seed.unwrap_or(kb.seed),
        candidates: args.candidates.unwrap_or(kb.candidates),
        max_retries: args.max_retries,
        ..ExperimentConfig::default()
    };
    if let Some(measures) = &args.measures {
        config.measures = measures.clone();
    }
    if config.candidates == 0 {
        return Err(Failure::Usage("--candidates must be positive".into()));
    }
    let report = run_experiment(&kb.corpus, &kb.taxonomy, &queries, &judgments, &config)
        .map_err(|e| Failure::Internal(e.to_string()))?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    let text = match cli.format {
        Format::Json => to_json(&report),
        Format::Tsv => report.to_tsv(),
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn sequence(cli: &Cli, args: &SequenceArgs) -> Outcome {
    let q = parse_cli_query(&args.query)?;
    if q.mode != Mode::Rank {
        return Err(Failure::Usage("sequence needs a ranked query".into()));
    }
    let kb = load(cli)?;
    let result = run_ranked(&kb, q)?;
    let params = SequenceParams {
        count: args.count,
        duration_ms: args.duration_ms,
        isi_ms: args.isi_ms,
        track: args.track.clone(),
    };
    let seq = build_sequence(&result, &params).map_err(|e| Failure::Data(e.to_string()))?;
    let events = emit_schedule(&seq);
    let schedule = schedule_to_tsv(&events);
    if let Some(dir) = &args.out_dir {
        let write = |name: &str, text: &str| {
            std::fs::write(dir.join(name), text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", dir.join(name).display())))
        };
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        write("sequence.json", &(seq.to_json() + "\n"))?;
        write("schedule.tsv", &schedule)?;
        return Ok(format!(
            "{} items, {} ms, {} events\n",
            seq.items.len(),
            seq.total_ms,
            events.len()
        ));
    }
    Ok(match cli.format {
        Format::Json => to_json(&json!({ "sequence": seq, "schedule": events })),
        Format::Tsv => schedule,
    })
}

fn stats(cli: &Cli) -> Outcome {
    let s = load(cli)?.stats();
    if cli.human {
        return Ok(format!(
            "{} records, {} distinct concepts, {} distinct keywords\n",
            s.records, s.concepts, s.keywords
        ));
    }
    Ok(match cli.format {
        Format::Json => to_json(&s),
        Format::Tsv => format!(
            "records\t{}\nconcepts\t{}\nkeywords\t{}\ntaxonomy_concepts\t{}\nvocabularies\t{}\n",
            s.records, s.concepts, s.keywords, s.taxonomy_concepts, s.vocabularies
        ),
    })
}
