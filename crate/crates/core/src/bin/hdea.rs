//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
//! 4 evaluation or protocol error, 5 statistics error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdea::harness::{self, ComparisonReport, ExperimentPlan, Grid, HarnessError, RunConfig};
use hdea::nk::NkLandscape;
use hdea::objective::mock::{serve_mock, MockMode, MockOptions, MockOutcome};
use hdea::objective::SurrogateParams;
use hdea::stats::{self, Alternative};

#[derive(Parser)]
#[command(name = "hdea", version, about = "Haploid-diploid evolutionary algorithm experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an NK landscape and write it as JSON.
    GenNk {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm once from a TOML run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an NK sweep from a TOML plan.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a budgeted comparison from a TOML plan.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Significance tests and summaries on CSV columns.
    Stats {
        #[command(subcommand)]
        test: StatsCommand,
    },
    /// Serve the evaluator protocol on stdin/stdout.
    EvalServer(EvalServerArgs),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Welch's unequal-variance t test.
    Welch(TwoSample),
    /// Wilcoxon signed-rank test on paired rows.
    Wilcoxon(TwoSample),
    /// Mean, SD, median, kurtosis, min and max of columns.
    Summary {
        #[arg(long)]
        input: PathBuf,
        /// Column to summarize; repeatable.
        #[arg(long, required = true)]
        column: Vec<String>,
        /// Summarize separately for each value of this column.
        #[arg(long)]
        group: Option<String>,
        /// Keep only rows where COLUMN=VALUE; repeatable.
        #[arg(long = "filter", value_name = "COLUMN=VALUE")]
        filters: Vec<String>,
    },
}

#[derive(Args)]
struct TwoSample {
    #[arg(long)]
    input: PathBuf,
    /// First sample: a column name, or a level of --group.
    #[arg(long)]
    x: String,
    /// Second sample: a column name, or a level of --group.
    #[arg(long)]
    y: String,
    /// Split --value by this column; --x and --y then name its levels.
    #[arg(long, requires = "value")]
    group: Option<String>,
    /// Value column used with --group.
    #[arg(long, requires = "group")]
    value: Option<String>,
    /// Keep only rows where COLUMN=VALUE; repeatable.
    #[arg(long = "filter", value_name = "COLUMN=VALUE")]
    filters: Vec<String>,
    #[arg(long, value_enum, default_value_t = AltArg::TwoSided)]
    alternative: AltArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AltArg {
    TwoSided,
    Greater,
    Less,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Constant,
    Echo,
    Surrogate,
    Garbage,
}

#[derive(Args)]
struct EvalServerArgs {
    /// Serve the bundled mock evaluator (the only evaluator shipped).
    #[arg(long)]
    mock: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Surrogate)]
    mode: ModeArg,
    /// Answer for --mode constant.
    #[arg(long, default_value_t = 0.0)]
    value: f64,
    /// Noise SD for --mode surrogate.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Protocol version to announce.
    #[arg(long, default_value_t = hdea::objective::external::PROTOCOL_VERSION)]
    protocol: u32,
    /// Dimension to announce instead of echoing the client's.
    #[arg(long)]
    dimension: Option<usize>,
    /// Exit abruptly after answering this many requests.
    #[arg(long)]
    exit_after: Option<u64>,
    /// Stop answering after this many requests.
    #[arg(long)]
    hang_after: Option<u64>,
}

enum Failure {
    Config(String),
    Io(String),
    Evaluation(String),
    Stats(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Evaluation(_) => 4,
            Failure::Stats(_) => 5,
        }
    }

    fn from_category(category: &str, message: String) -> Self {
        match category {
            "config" => Failure::Config(message),
            "io" => Failure::Io(message),
            _ => Failure::Evaluation(message),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::from_category(e.category(), e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            let (category, message) = match &f {
                Failure::Config(m) => ("config", m),
                Failure::Io(m) => ("io", m),
                Failure::Evaluation(m) => ("evaluation", m),
                Failure::Stats(m) => ("stats", m),
            };
            eprintln!("error [{category}]: {message}");
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::GenNk { n, k, seed, out } => {
            let landscape = NkLandscape::generate(n, k, seed).map_err(|e| Failure::Config(e.to_string()))?;
            fs::write(&out, landscape.to_json() + "\n").map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let run = harness::run_single(&cfg)?;
            harness::export_single(&run, &cfg, &out)?;
            let best = run.direction.to_raw(run.trace.final_best());
            println!("final best {best} after {} evaluations", run.trace.evaluations);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out } => {
            let plan = ExperimentPlan::load(&config)?;
            if !matches!(plan.grid, Grid::Nk { .. }) {
                return Err(Failure::Config(
                    "sweep needs an NK grid; use compare for budgeted plans".into(),
                ));
            }
            finish_report(harness::run_nk_sweep(&plan)?, &out)
        }
        Command::Compare { config, out } => {
            let plan = ExperimentPlan::load(&config)?;
            if !matches!(plan.grid, Grid::Budgeted { .. }) {
                return Err(Failure::Config(
                    "compare needs a budgeted grid; use sweep for NK plans".into(),
                ));
            }
            finish_report(harness::run_budgeted_compare(&plan)?, &out)
        }
        Command::Stats { test } => run_stats(test),
        Command::EvalServer(args) => eval_server(args),
    }
}

fn finish_report(report: ComparisonReport, out: &Path) -> Result<ExitCode, Failure> {
    harness::export_report(&report, out)?;
    let mut stdout = io::stdout().lock();
    for s in &report.summaries {
        let label = &report.cells[s.cell].label;
        match s.final_best {
            Some(b) => writeln!(
                stdout,
                "{label} {}: final best mean {} [min {}, max {}] over {} runs",
                s.algorithm, b.mean, b.min, b.max, s.runs
            ),
            None => writeln!(stdout, "{label} {}: incomplete", s.algorithm),
        }
        .ok();
    }
    for s in &report.significance {
        writeln!(
            stdout,
            "{} {} {} vs {} ({}, {}): p = {}",
            report.cells[s.cell].label,
            s.metric.name(),
            s.algorithm,
            s.reference,
            s.result.method.name(),
            s.pairing.name(),
            s.result.p_value
        )
        .ok();
    }
    match report.failures.first() {
        None => Ok(ExitCode::SUCCESS),
        Some(f) => Err(Failure::from_category(
            f.category,
            format!(
                "{} failed run(s), results written to {}; first: {}",
                report.failures.len(),
                out.display(),
                f.message
            ),
        )),
    }
}

type Rows = Vec<BTreeMap<String, String>>;

fn read_rows(path: &Path, filters: &[String]) -> Result<Rows, Failure> {
    let io_err = |e: csv::Error| Failure::Io(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(io_err)?;
    let header = reader.headers().map_err(io_err)?.clone();
    let filters: Vec<(String, String)> = filters
        .iter()
        .map(|f| {
            f.split_once('=')
                .map(|(c, v)| (c.to_string(), v.to_string()))
                .ok_or_else(|| Failure::Config(format!("filter {f:?} is not COLUMN=VALUE")))
        })
        .collect::<Result<_, _>>()?;
    for (c, _) in &filters {
        if !header.iter().any(|h| h == c) {
            return Err(Failure::Config(format!("no column {c:?} in {}", path.display())));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(io_err)?;
        let row: BTreeMap<String, String> = header
            .iter()
            .zip(record.iter())
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        if filters.iter().all(|(c, v)| row.get(c) == Some(v)) {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn column(rows: &Rows, name: &str, keep: impl Fn(&BTreeMap<String, String>) -> bool) -> Result<Vec<f64>, Failure> {
    rows.iter()
        .filter(|r| keep(r))
        .map(|r| {
            let cell = r
                .get(name)
                .ok_or_else(|| Failure::Config(format!("no column {name:?}")))?;
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Stats(format!("column {name:?}: {cell:?} is not a number")))
        })
        .collect()
}

fn two_samples(args: &TwoSample) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let rows = read_rows(&args.input, &args.filters)?;
    match (&args.group, &args.value) {
        (Some(group), Some(value)) => {
            let level = |l: &str| column(&rows, value, |r| r.get(group).map(String::as_str) == Some(l));
            Ok((level(&args.x)?, level(&args.y)?))
        }
        _ => Ok((column(&rows, &args.x, |_| true)?, column(&rows, &args.y, |_| true)?)),
    }
}

fn run_stats(test: StatsCommand) -> Result<ExitCode, Failure> {
    let stats_err = |e: stats::StatsError| Failure::Stats(e.to_string());
    let alt = |a: AltArg| match a {
        AltArg::TwoSided => Alternative::TwoSided,
        AltArg::Greater => Alternative::Greater,
        AltArg::Less => Alternative::Less,
    };
    let result = match &test {
        StatsCommand::Welch(args) => {
            let (xs, ys) = two_samples(args)?;
            Some((
                stats::welch_t_test(&xs, &ys, alt(args.alternative)).map_err(stats_err)?,
                xs.len(),
                ys.len(),
            ))
        }
        StatsCommand::Wilcoxon(args) => {
            let (xs, ys) = two_samples(args)?;
            Some((
                stats::wilcoxon_signed_rank(&xs, &ys, alt(args.alternative)).map_err(stats_err)?,
                xs.len(),
                ys.len(),
            ))
        }
        StatsCommand::Summary { .. } => None,
    };
    if let Some((r, nx, ny)) = result {
        println!("test,statistic,p_value,effect,n_x,n_y");
        println!(
            "{},{},{},{},{nx},{ny}",
            r.method.name(),
            r.statistic,
            r.p_value,
            r.effect
        );
        return Ok(ExitCode::SUCCESS);
    }
    let StatsCommand::Summary {
        input,
        column: columns,
        group,
        filters,
    } = test
    else {
        unreachable!()
    };
    let rows = read_rows(&input, &filters)?;
    let mut levels: Vec<Option<String>> = Vec::new();
    match &group {
        Some(g) => {
            for r in &rows {
                let l = r.get(g).cloned();
                if l.is_none() {
                    return Err(Failure::Config(format!("no column {g:?}")));
                }
                if !levels.contains(&l) {
                    levels.push(l);
                }
            }
        }
        None => levels.push(None),
    }
    println!("column,group,n,mean,sd,median,kurtosis,min,max");
    for name in &columns {
        for level in &levels {
            let xs = column(&rows, name, |r| match (&group, level) {
                (Some(g), Some(l)) => r.get(g) == Some(l),
                _ => true,
            })?;
            let s = stats::summarize(&xs).map_err(stats_err)?;
            println!(
                "{name},{},{},{},{},{},{},{},{}",
                level.as_deref().unwrap_or(""),
                s.n,
                s.mean,
                s.sd,
                s.median,
                s.kurtosis,
                s.min,
                s.max
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_server(args: EvalServerArgs) -> Result<ExitCode, Failure> {
    if !args.mock {
        return Err(Failure::Config(
            "only the mock evaluator is bundled; pass --mock or wire a real simulator through an adapter".into(),
        ));
    }
    let mode = match args.mode {
        ModeArg::Constant => MockMode::Constant(args.value),
        ModeArg::Echo => MockMode::Echo,
        ModeArg::Garbage => MockMode::Garbage,
        ModeArg::Surrogate => {
            let mut params = SurrogateParams::default();
            if let Some(sd) = args.noise_sd {
                params.noise_sd = sd;
            }
            params.validate().map_err(|e| Failure::Config(e.to_string()))?;
            MockMode::Surrogate(params)
        }
    };
    let opts = MockOptions {
        mode,
        protocol: args.protocol,
        dimension: args.dimension,
        exit_after: args.exit_after,
        hang_after: args.hang_after,
    };
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    match serve_mock(stdin, stdout, &opts) {
        Ok(MockOutcome::Shutdown) => Ok(ExitCode::SUCCESS),
        // A scripted crash: leave without a shutdown handshake.
        Ok(MockOutcome::Crash) => std::process::exit(70),
        Err(e) => Err(Failure::Io(e.to_string())),
    }
}
