use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use recmind_core::harness::{
    make_instances, read_instances, write_instances, ExemplarConfig, ExemplarMode, InstanceConfig, TaskKind,
};
use recmind_core::memory::MemoryStore;
use recmind_core::planning::Strategy;
use recmind_core::report::ReportTable;
use recmind_core::runner::{self, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "recmind", version, about = "Tool-augmented LLM recommendation agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a JSONL dataset into the store.
    Ingest(IngestArgs),
    /// Generate a task instance set.
    MakeInstances(MakeInstancesArgs),
    /// Run an instance set and archive every episode.
    Run(RunArgs),
    /// Print one archived episode.
    Trace(TraceArgs),
    /// Render a results table from archives or a table file.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    domain: String,
    dataset: PathBuf,
}

#[derive(Args)]
struct MakeInstancesArgs {
    /// Read store, domain, task, seed and shots from a run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    /// Draw exemplars from this domain instead.
    #[arg(long)]
    transfer_from: Option<String>,
    #[arg(long, default_value_t = 99)]
    negatives: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    archive: PathBuf,
    /// Run at most this many pending instances; rerun to resume.
    #[arg(long)]
    stop_after: Option<usize>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// T: step completions per episode.
    #[arg(long)]
    step_budget: Option<u32>,
    #[arg(long)]
    max_calls: Option<u64>,
    #[arg(long)]
    failure_threshold: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    archive: PathBuf,
    episode_id: String,
}

#[derive(Args)]
struct ReportArgs {
    /// Finished run archives.
    archives: Vec<PathBuf>,
    /// A table in JSON form.
    #[arg(long, conflicts_with = "archives")]
    table: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn parse_task(s: &str) -> Result<TaskKind> {
    TaskKind::parse(s).ok_or_else(|| anyhow!("unknown task {s:?}"))
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    Strategy::parse(s).ok_or_else(|| anyhow!("unknown strategy {s:?}"))
}

fn ingest(args: IngestArgs) -> Result<()> {
    let store = MemoryStore::open(&args.store).with_context(|| format!("opening {}", args.store.display()))?;
    let stats = store.ingest(&args.dataset, &args.domain)?;
    println!("items: {} ({} new)", stats.items, stats.new_items);
    println!("interactions: {} ({} new)", stats.interactions, stats.new_interactions);
    println!("rejected: {}", stats.rejected);
    for (reason, n) in &stats.rejected_by_reason {
        println!("  {reason:?}: {n}");
    }
    if stats.new_rows() == 0 {
        println!("no new rows");
    }
    Ok(())
}

fn make(args: MakeInstancesArgs) -> Result<()> {
    let base = args.config.as_ref().map(RunConfig::load).transpose()?;
    let store_path = args
        .store
        .or_else(|| base.as_ref().map(|c| c.store.clone()))
        .ok_or_else(|| anyhow!("--store or --config is required"))?;
    let domain = args
        .domain
        .or_else(|| base.as_ref().map(|c| c.domain.clone()))
        .ok_or_else(|| anyhow!("--domain or --config is required"))?;
    let task = match (&args.task, &base) {
        (Some(t), _) => parse_task(t)?,
        (None, Some(c)) => c.task,
        (None, None) => bail!("--task or --config is required"),
    };
    let mut exemplars = base.as_ref().map(|c| c.shots.clone()).unwrap_or_default();
    if let Some(n) = args.shots {
        exemplars.shot_count = n;
    }
    if let Some(source) = args.transfer_from {
        exemplars = ExemplarConfig {
            mode: ExemplarMode::Transfer,
            source_domain: Some(source),
            ..exemplars
        };
    }
    let config = InstanceConfig {
        seed: args.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0),
        limit: args.limit,
        negatives: args.negatives,
        exemplars,
    };
    if !store_path.exists() {
        bail!("store {} does not exist", store_path.display());
    }
    let store = MemoryStore::open(&store_path)?;
    let set = make_instances(&store, task, &domain, &config)?;
    write_instances(&args.out, &set.instances)?;
    println!("instances: {}", set.instances.len());
    println!("users with short history: {}", set.insufficient_history);
    println!("missing text: {}", set.missing_text);
    println!("auto titles removed: {}", set.auto_titles);
    Ok(())
}

/// Returns true when failures stay within the threshold.
fn run(args: RunArgs) -> Result<bool> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(s) = &args.strategy {
        config.strategy = parse_strategy(s)?;
    }
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
    if let Some(t) = args.step_budget {
        config.budgets.step_budget = t;
    }
    if let Some(m) = args.max_calls {
        config.budgets.max_calls = m;
    }
    if let Some(f) = args.failure_threshold {
        config.failure_threshold = f;
    }
    let instances = read_instances(&args.instances)?;
    let options = RunOptions {
        stop_after: args.stop_after,
    };
    let outcome = runner::run(&config, &instances, &args.archive, &options)?;

    let mut table = ReportTable::for_task(config.task, vec![config.domain.clone()]);
    table.add_report(&config.method_label(), &config.domain, &outcome.report);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    } else {
        print!("{}", table.render_text());
    }
    eprintln!(
        "{}/{} instances archived ({} this run), {} failed",
        outcome.archived, outcome.total, outcome.ran, outcome.report.n_failed
    );
    if !outcome.is_complete() {
        eprintln!("run incomplete; rerun the same command to resume");
    }
    let ok = outcome.failure_rate() <= config.failure_threshold;
    if !ok {
        eprintln!(
            "failure rate {:.3} exceeds threshold {:.3}",
            outcome.failure_rate(),
            config.failure_threshold
        );
    }
    Ok(ok)
}

fn trace(args: TraceArgs) -> Result<()> {
    print!("{}", runner::trace_episode(&args.archive, &args.episode_id)?);
    Ok(())
}

fn report_table(archives: &[PathBuf]) -> Result<ReportTable> {
    let mut table: Option<ReportTable> = None;
    for dir in archives {
        let (config, report) =
            runner::load_archive_report(dir).with_context(|| format!("reading archive {}", dir.display()))?;
        let t = table.get_or_insert_with(|| ReportTable::for_task(config.task, Vec::new()));
        t.add_report(&config.method_label(), &config.domain, &report);
    }
    table.ok_or_else(|| anyhow!("give at least one archive or --table"))
}

fn load_table(path: &Path) -> Result<ReportTable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ReportTable::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn report(args: ReportArgs) -> Result<()> {
    let table = match &args.table {
        Some(path) => load_table(path)?,
        None => report_table(&args.archives)?,
    };
    if args.json {
        println!("{}", table.to_json());
    } else {
        print!("{}", table.render_text());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a).map(|_| true),
        Command::MakeInstances(a) => make(a).map(|_| true),
        Command::Run(a) => run(a),
        Command::Trace(a) => trace(a).map(|_| true),
        Command::Report(a) => report(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
