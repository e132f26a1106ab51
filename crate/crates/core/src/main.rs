use clap::{Parser, Subcommand, ValueEnum};
use ring_rpq::dictionary::{ingest, ingest_with_dictionary, parse_id_map};
use ring_rpq::engine::{
    evaluate_with, EngineConfig, PruneMode, Report, Scratch, Solution, Status, VvStart,
};
use ring_rpq::index::Index;
use ring_rpq::persist;
use ring_rpq::syntax::{parse, pattern, Query, Term};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(
    name = "ring-rpq",
    version,
    about = "Regular path queries over a ring index"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a tab-separated triple file.
    Build {
        input: PathBuf,
        output: PathBuf,
        /// Sidecar fixing node and predicate ids.
        #[arg(long)]
        id_map: Option<PathBuf>,
    },
    /// Evaluate one query, or every line of a batch file.
    Query {
        index: PathBuf,
        query: Option<String>,
        #[arg(long, conflicts_with = "query")]
        batch: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        /// Print a statistics line per query to standard error.
        #[arg(long)]
        stats: bool,
        /// Worker threads for batch queries.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Time every query of a log and summarize per pattern.
    Bench {
        index: PathBuf,
        log: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Seconds per query; 0 disables the timeout.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 1_000_000)]
    limit: u64,
    #[arg(long, value_enum, default_value_t = PruneArg::Sound)]
    prune_mode: PruneArg,
    /// Which end of a variable-to-variable query is enumerated first.
    #[arg(long, value_enum, default_value_t = DirectionArg::Auto)]
    direction: DirectionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PruneArg {
    Sound,
    Eager,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Auto,
    Subjects,
    Objects,
}

impl RunArgs {
    fn config(&self) -> Result<EngineConfig, Failure> {
        if !(self.timeout >= 0.0 && self.timeout.is_finite()) {
            return Err(Failure::Usage(format!("invalid timeout {}", self.timeout)));
        }
        Ok(EngineConfig {
            timeout: (self.timeout > 0.0).then(|| Duration::from_secs_f64(self.timeout)),
            limit: self.limit,
            prune: match self.prune_mode {
                PruneArg::Sound => PruneMode::Sound,
                PruneArg::Eager => PruneMode::Eager,
            },
            vv_start: match self.direction {
                DirectionArg::Auto => VvStart::Auto,
                DirectionArg::Subjects => VvStart::Subjects,
                DirectionArg::Objects => VvStart::Objects,
            },
            ..EngineConfig::default()
        })
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build {
            input,
            output,
            id_map,
        } => build(&input, &output, id_map.as_deref()),
        Command::Query {
            index,
            query,
            batch,
            run,
            stats,
            parallel,
        } => query_cmd(&index, query, batch.as_deref(), &run, stats, parallel),
        Command::Bench { index, log, run } => bench(&index, &log, &run),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn build(input: &Path, output: &Path, id_map: Option<&Path>) -> Result<ExitCode, Failure> {
    let text = read(input)?;
    let graph = match id_map {
        Some(p) => {
            let dict = parse_id_map(&read(p)?).map_err(Failure::runtime)?;
            ingest_with_dictionary(&text, dict)
        }
        None => ingest(&text),
    }
    .map_err(|e| Failure::Runtime(format!("{}: {e}", input.display())))?;
    let index = Index::build(graph).map_err(Failure::runtime)?;
    let rep = persist::save(&index, output)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", output.display())))?;
    println!("triples\t{}", rep.triples);
    println!("nodes\t{}", index.dict.num_nodes());
    println!("predicates\t{}", index.dict.num_preds());
    println!("bytes\t{}", rep.total_bytes);
    println!("dictionary_bytes\t{}", rep.dictionary_bytes);
    println!("bytes_per_triple\t{:.2}", rep.bytes_per_triple());
    println!("payload_ratio\t{:.3}", rep.payload_ratio());
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<Index, Failure> {
    persist::load(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Output of one query: rows and the report line, or an error message.
struct Outcome {
    rows: String,
    report: Result<Report, String>,
}

fn run_one(index: &Index, query: &Query, config: &EngineConfig, scratch: &mut Scratch) -> Outcome {
    match evaluate_with(index, query, config, scratch) {
        Ok((sols, report)) => Outcome {
            rows: render(index, query, &sols),
            report: Ok(report),
        },
        Err(e) => Outcome {
            rows: String::new(),
            report: Err(e.to_string()),
        },
    }
}

fn render(index: &Index, query: &Query, sols: &[Solution]) -> String {
    let name = |id: u32| index.dict.node_name(id).unwrap_or("?");
    let same_var =
        matches!((&query.subject, &query.object), (Term::Var(a), Term::Var(b)) if a == b);
    let mut out = String::new();
    for s in sols {
        match (s.subject, s.object) {
            (None, None) => out.push_str("true\n"),
            (Some(x), Some(_)) if same_var => writeln!(out, "{}", name(x)).unwrap(),
            (Some(x), Some(y)) => writeln!(out, "{}\t{}", name(x), name(y)).unwrap(),
            (Some(x), None) | (None, Some(x)) => writeln!(out, "{}", name(x)).unwrap(),
        }
    }
    out
}

fn stats_line(label: &str, outcome: &Outcome) -> String {
    match &outcome.report {
        Ok(r) => format!(
            "{label}status={} solutions={} elapsed_ms={:.3} queue_pops={} part1_nodes={} part2_nodes={}",
            r.status.as_str(),
            r.solutions,
            r.elapsed.as_secs_f64() * 1e3,
            r.counters.queue_pops,
            r.counters.part1_nodes,
            r.counters.part2_nodes
        ),
        Err(e) => format!("{label}status=error message={e:?}"),
    }
}

fn query_cmd(
    path: &Path,
    query: Option<String>,
    batch: Option<&Path>,
    run: &RunArgs,
    stats: bool,
    parallel: usize,
) -> Result<ExitCode, Failure> {
    let config = run.config()?;
    if let Some(text) = query {
        let q = parse(&text).map_err(|e| Failure::Usage(e.to_string()))?;
        let index = load(path)?;
        let outcome = run_one(&index, &q, &config, &mut Scratch::new());
        print!("{}", outcome.rows);
        if stats {
            eprintln!("{}", stats_line("", &outcome));
        }
        return outcome
            .report
            .map(|_| ExitCode::SUCCESS)
            .map_err(Failure::Runtime);
    }
    let Some(batch) = batch else {
        return Err(Failure::Usage("a query or --batch file is required".into()));
    };
    let lines: Vec<String> = read(batch)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    let index = load(path)?;
    let parsed: Vec<Result<Query, String>> = lines
        .iter()
        .map(|l| parse(l).map_err(|e| e.to_string()))
        .collect();
    let outcomes = run_batch(&index, &parsed, &config, parallel.max(1));
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut code = ExitCode::SUCCESS;
    for (i, outcome) in outcomes.iter().enumerate() {
        for row in outcome.rows.lines() {
            writeln!(out, "{}\t{row}", i + 1).map_err(Failure::runtime)?;
        }
        if outcome.report.is_err() {
            code = ExitCode::from(if parsed[i].is_err() { 2 } else { 1 });
        }
        if stats || outcome.report.is_err() {
            eprintln!("{}", stats_line(&format!("query={} ", i + 1), outcome));
        }
    }
    Ok(code)
}

fn run_batch(
    index: &Index,
    queries: &[Result<Query, String>],
    config: &EngineConfig,
    workers: usize,
) -> Vec<Outcome> {
    let run = |q: &Result<Query, String>, scratch: &mut Scratch| match q {
        Ok(q) => run_one(index, q, config, scratch),
        Err(e) => Outcome {
            rows: String::new(),
            report: Err(e.clone()),
        },
    };
    if workers == 1 {
        let mut scratch = Scratch::new();
        return queries.iter().map(|q| run(q, &mut scratch)).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Outcome>> = (0..queries.len()).map(|_| None).collect();
    let done = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut scratch = Scratch::new();
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= queries.len() {
                            return mine;
                        }
                        mine.push((i, run(&queries[i], &mut scratch)));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect::<Vec<_>>()
    });
    for (i, o) in done {
        slots[i] = Some(o);
    }
    slots
        .into_iter()
        .map(|o| o.expect("every query ran"))
        .collect()
}

#[derive(Default)]
struct Bucket {
    times: Vec<f64>,
    timeouts: usize,
    errors: usize,
}

impl Bucket {
    fn row(&self, name: &str) -> String {
        let mut t = self.times.clone();
        t.sort_by(f64::total_cmp);
        let avg = if t.is_empty() {
            0.0
        } else {
            t.iter().sum::<f64>() / t.len() as f64
        };
        let median = match t.len() {
            0 => 0.0,
            k if k % 2 == 1 => t[k / 2],
            k => (t[k / 2 - 1] + t[k / 2]) / 2.0,
        };
        format!(
            "{name}\t{}\t{avg:.3}\t{median:.3}\t{}\t{}",
            t.len() + self.errors,
            self.timeouts,
            self.errors
        )
    }
}

fn bench(path: &Path, log: &Path, run: &RunArgs) -> Result<ExitCode, Failure> {
    let config = run.config()?;
    let text = read(log)?;
    let index = load(path)?;
    let mut scratch = Scratch::new();
    let mut buckets: BTreeMap<String, Bucket> = BTreeMap::new();
    let mut all = Bucket::default();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let (key, outcome) = match (pattern(line), parse(line)) {
            (Ok(p), Ok(q)) => (p, run_one(&index, &q, &config, &mut scratch)),
            (_, Err(e)) | (Err(e), _) => (
                "error".to_string(),
                Outcome {
                    rows: String::new(),
                    report: Err(e.to_string()),
                },
            ),
        };
        let bucket = buckets.entry(key).or_default();
        for b in [&mut *bucket, &mut all] {
            match &outcome.report {
                Ok(r) => {
                    b.times.push(r.elapsed.as_secs_f64() * 1e3);
                    b.timeouts += (r.status == Status::Timeout) as usize;
                }
                Err(_) => b.errors += 1,
            }
        }
    }
    println!("pattern\tqueries\tavg_ms\tmedian_ms\ttimeouts\terrors");
    if !buckets.is_empty() {
        for (name, b) in &buckets {
            println!("{}", b.row(name));
        }
        println!("{}", all.row("all"));
    }
    Ok(ExitCode::SUCCESS)
}
