use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use proofpath_core::report::{write_stats_csv, RunResult};
use proofpath_core::theorem::{monte_carlo_p, sweep, Prob};
use proofpath_core::{
    bfs_search, dfs_search, run_search, write_trace, BackendFactory, BaselineVerdict, NodeOrder, RunConfig,
    SearchVerdict, SupportPosition, SyntheticBackend, SyntheticFactory, TraceBackend, TraceFactory,
};

const SEED_ENV: &str = "PROOFPATH_SEED";

#[derive(Parser)]
#[command(name = "proofpath", version, about = "Learned proof-path search over a pluggable prover backend")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learned search against the synthetic backend.
    Verify(RunArgs),
    /// Run the learned search against a recorded trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a depth-first or breadth-first baseline.
    Baseline(BaselineArgs),
    /// Check the supporting-child bound on random trees.
    TheoremCheck(TheoremArgs),
    /// Write the synthetic tree as a trace file.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        /// Fail if the export grows past this many records.
        #[arg(long, default_value_t = 1_000_000)]
        max_records: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Inspect the configuration.
    Config {
        /// Print every default as a configuration file.
        #[arg(long)]
        dump_defaults: bool,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Position {
    Random,
    First,
    Last,
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed (falls back to the config file, then PROOFPATH_SEED).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    train_steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Record real elapsed time in the CSV instead of zeros.
    #[arg(long)]
    record_wall_time: bool,
    #[arg(long)]
    backend_seed: Option<u64>,
    #[arg(long)]
    correct_depth: Option<usize>,
    #[arg(long)]
    branching: Option<usize>,
    #[arg(long)]
    decoy_delay: Option<usize>,
    #[arg(long)]
    decoys_per_node: Option<usize>,
    #[arg(long, value_enum)]
    supporting_position: Option<Position>,
    /// Turn the loop detector off.
    #[arg(long)]
    no_loop_detection: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Dfs,
    Bfs,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    /// Rank children by these rule prefixes instead of the listed order.
    #[arg(long = "rank-prefix")]
    rank_prefixes: Vec<String>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    max_time_ms: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Print one row per instance.
    #[arg(long)]
    verbose: bool,
}

fn load_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let (mut cfg, file_seed) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let has_seed = value.get("seed").is_some();
            (RunConfig::from_json(&text)?, has_seed)
        }
        None => (RunConfig::default(), false),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    } else if !file_seed {
        if let Ok(text) = std::env::var(SEED_ENV) {
            cfg.seed = text.trim().parse().with_context(|| format!("{SEED_ENV}={text:?} is not a seed"))?;
        }
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.search.workers, args.workers);
    set(&mut cfg.search.max_epochs, args.max_epochs);
    set(&mut cfg.dqn.train_steps, args.train_steps);
    set(&mut cfg.dqn.batch, args.batch);
    let syn = &mut cfg.backend.synthetic;
    set(&mut syn.correct_depth, args.correct_depth);
    set(&mut syn.branching, args.branching);
    set(&mut syn.decoy_delay, args.decoy_delay);
    set(&mut syn.decoys_per_node, args.decoys_per_node);
    if let Some(seed) = args.backend_seed {
        syn.seed = seed;
    }
    if let Some(pos) = args.supporting_position {
        syn.supporting_position = match pos {
            Position::Random => SupportPosition::Random,
            Position::First => SupportPosition::First,
            Position::Last => SupportPosition::Last,
        };
    }
    if args.record_wall_time {
        cfg.search.record_wall_time = true;
    }
    if args.no_loop_detection {
        cfg.loop_detector = proofpath_core::LoopDetectorConfig::disabled();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn cancel_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let handler = flag.clone();
    // A second handler cannot be installed; searches then simply run to completion.
    let _ = ctrlc::set_handler(move || handler.store(true, Ordering::Relaxed));
    flag
}

fn run_learned(cfg: &RunConfig, factory: &dyn BackendFactory) -> anyhow::Result<bool> {
    let cancel = cancel_flag();
    let outcome = run_search(&cfg.search_settings(), factory, Some(&cancel))?;
    let dir = &cfg.output_dir;
    write_stats_csv(&outcome.stats, create_file(dir, "epochs.csv")?)?;
    let verdict = match outcome.verdict {
        SearchVerdict::Found => "CorrectComplete",
        SearchVerdict::Exhausted => "Exhausted",
        SearchVerdict::Cancelled => "Cancelled",
    };
    let result = RunResult {
        verdict: verdict.into(),
        path: RunResult::path_entries(outcome.path.as_ref()),
        epochs: outcome.epochs,
        coverage: outcome.coverage(),
        acquired: Some(outcome.acquired()),
        backtracks: None,
    };
    result.write(create_file(dir, "result.json")?)?;
    let mut ck = create_file(dir, "checkpoint.json")?;
    serde_json::to_writer(&mut ck, &outcome.network.checkpoint(cfg.dqn.digest()))?;
    ck.flush()?;
    println!(
        "{verdict}: {} epochs, path length {}, coverage {}, acquired {}",
        outcome.epochs,
        result.path.len(),
        result.coverage,
        outcome.acquired()
    );
    Ok(outcome.verdict == SearchVerdict::Found)
}

fn baseline(args: &BaselineArgs) -> anyhow::Result<bool> {
    let mut cfg = load_config(&args.run)?;
    if !args.rank_prefixes.is_empty() {
        cfg.baseline.order = NodeOrder::StaticRank(args.rank_prefixes.clone());
    }
    if let Some(n) = args.max_nodes {
        cfg.baseline.limits.max_nodes = n;
    }
    if args.max_time_ms.is_some() {
        cfg.baseline.limits.max_time_ms = args.max_time_ms;
    }
    if let Some(t) = args.threads {
        cfg.baseline.threads = t;
    }
    let factory = SyntheticFactory::new(cfg.backend.synthetic.clone());
    let (name, result) = match args.algo {
        Algo::Dfs => ("dfs", dfs_search(&factory, &cfg.loop_detector, &cfg.baseline.order, cfg.baseline.limits)?),
        Algo::Bfs => ("bfs", bfs_search(&factory, &cfg.loop_detector, cfg.baseline.limits, cfg.baseline.threads)?),
    };
    let mut rows = result.rows.clone();
    if cfg.search.record_wall_time {
        if let Some(last) = rows.last_mut() {
            last.wall_ms = result.wall_ms;
        }
    }
    write_stats_csv(&rows, create_file(&cfg.output_dir, &format!("{name}.csv"))?)?;
    let verdict = match result.verdict {
        BaselineVerdict::Found => "found",
        BaselineVerdict::Exhausted => "exhausted",
        BaselineVerdict::TimedOut => "timed-out",
    };
    RunResult {
        verdict: verdict.into(),
        path: RunResult::path_entries(result.path.as_ref()),
        epochs: 0,
        coverage: result.coverage,
        acquired: None,
        backtracks: Some(result.backtracks),
    }
    .write(create_file(&cfg.output_dir, &format!("{name}.json"))?)?;
    println!("{name} {verdict}: coverage {}, backtracks {}", result.coverage, result.backtracks);
    Ok(result.verdict == BaselineVerdict::Found)
}

fn theorem_check(args: &TheoremArgs) -> anyhow::Result<bool> {
    if args.count == 0 || args.trials == 0 {
        bail!("--count and --trials must be positive");
    }
    let result = sweep(args.seed, args.count)?;
    let mut violations = 0;
    let mut identity_failures = 0;
    let mut disagreements = 0;
    let mut exact = 0;
    let mut max_identity = 0.0f64;
    if args.verbose {
        println!("{:>5} {:>3} {:>3} {:>3} {:>12} {:>8} {:>10} {:>9} {:>5}", "inst", "x", "y", "R", "p", "y/x", "mc", "stderr", "ok");
    }
    for inst in &result.instances {
        let r = &inst.report;
        let mc = monte_carlo_p(&inst.tree, r.node, args.trials, args.seed)?;
        let agrees = mc.agrees_with(r.p.value(), 3.0);
        let identity_ok = r.identity_error <= 1e-12;
        violations += usize::from(!r.holds);
        identity_failures += usize::from(!identity_ok);
        disagreements += usize::from(!agrees);
        exact += usize::from(matches!(r.p, Prob::Exact(_)));
        max_identity = max_identity.max(r.identity_error);
        if args.verbose {
            println!(
                "{:>5} {:>3} {:>3} {:>3} {:>12} {:>8} {:>10.6} {:>9.6} {:>5}",
                inst.index,
                r.x,
                r.y,
                r.r,
                r.p.to_string(),
                r.bound.to_string(),
                mc.estimate,
                mc.stderr,
                r.holds && agrees && identity_ok
            );
        }
    }
    let n = result.instances.len();
    println!("instances            {n}");
    println!("degenerate (skipped) {}", result.degenerate);
    println!("exact arithmetic     {exact}");
    println!("p < y/x              {}/{n}", n - violations);
    println!("identity within 1e-12 {}/{n} (max error {max_identity:.3e})", n - identity_failures);
    println!("monte carlo within 3 se {}/{n} ({} trials)", n - disagreements, args.trials);
    Ok(violations == 0 && identity_failures == 0 && disagreements == 0)
}

fn gen_synthetic(out: &Path, max_records: usize, run: &RunArgs) -> anyhow::Result<bool> {
    let cfg = load_config(run)?;
    let mut backend = SyntheticBackend::new(cfg.backend.synthetic.clone());
    let records = backend.export_trace(&cfg.loop_detector, max_records)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_trace(&records, BufWriter::new(file))?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(true)
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Verify(run) => {
            let cfg = load_config(&run)?;
            run_learned(&cfg, &SyntheticFactory::new(cfg.backend.synthetic.clone()))
        }
        Command::Replay { trace, run } => {
            let cfg = load_config(&run)?;
            let file = File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let backend = TraceBackend::from_reader(BufReader::new(file))?;
            run_learned(&cfg, &TraceFactory::new(backend))
        }
        Command::Baseline(args) => baseline(&args),
        Command::TheoremCheck(args) => theorem_check(&args),
        Command::GenSynthetic { out, max_records, run } => gen_synthetic(&out, max_records, &run),
        Command::Config { dump_defaults, run } => {
            let cfg = if dump_defaults { RunConfig::default() } else { load_config(&run)? };
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = writeln!(std::io::stdout().lock(), "{}", cfg.to_json());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
