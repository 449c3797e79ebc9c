use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pinsat::bench::{
    aggregate, duration_constrained, plot_data, read_records, run_suite, sample_suite, validate_records, write_records,
    BenchConfig, BenchError, PlannerId, RecordsHeader, StatsFilter, Suite,
};
use pinsat::trajopt::{compute_kmin, kmin_feasible, KminConfig};

#[derive(Parser)]
#[command(name = "pinsat", version, about = "Suite generation, planner runs and reporting for the bar-world benchmark")]
struct Cli {
    /// TOML file holding every numeric parameter; defaults to the bundled config.
    #[arg(long, global = true, env = "PINSAT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a problem suite and write it as JSON.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        problems: Option<usize>,
        /// Cap each problem's duration at the configured multiple of its
        /// free-space kinematic minimum.
        #[arg(long)]
        constrained: bool,
    },
    /// Run planners over a suite and write JSON-lines records.
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated planner ids.
        #[arg(long, value_delimiter = ',')]
        planners: Option<Vec<String>>,
        /// Comma-separated thread budgets.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        /// Per-run timeout in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        /// Only run the first N problems.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Aggregate records into a summary and optional plot data.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        summary: PathBuf,
        #[arg(long, value_enum, default_value_t = Filter::Common)]
        filter: Filter,
        /// Also write plot data (needs --suite).
        #[arg(long, requires = "suite")]
        plot_data: Option<PathBuf>,
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        max_trajectories: usize,
    },
    /// Re-check every stored successful trajectory against its problem.
    Validate {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        records: PathBuf,
        /// Multiple of the optimizer's validation sample count.
        #[arg(long, default_value_t = 10)]
        density: usize,
    },
    /// Print the minimum spline degree of the configured action primitives.
    Kmin,
}

#[derive(Clone, Copy, ValueEnum)]
enum Filter {
    /// Time and cost over problems solved by every planner and budget.
    Common,
    /// Time and cost over each group's own solved problems.
    Own,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(_) | BenchError::UnknownPlanner(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_suite(path: &Path) -> Result<Suite, CliError> {
    Ok(Suite::from_json(&read_text(path)?)?)
}

fn load_records(path: &Path) -> Result<(RecordsHeader, Vec<pinsat::bench::BenchmarkRecord>), CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_records(BufReader::new(f))?)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    match cli.command {
        Command::Generate {
            out,
            seed,
            problems,
            constrained,
        } => {
            if let Some(s) = seed {
                cfg.suite.seed = s;
            }
            if let Some(n) = problems {
                cfg.suite.problems = n;
            }
            let mut suite = sample_suite(&cfg)?;
            if constrained {
                suite = duration_constrained(&suite, cfg.constrained.t_max_factor)?;
            }
            write_text(&out, &suite.to_json())?;
            eprintln!("wrote {} problems to {}", suite.problems.len(), out.display());
        }
        Command::Run {
            suite,
            out,
            planners,
            budgets,
            timeout,
            limit,
            quiet,
        } => {
            if let Some(t) = timeout {
                cfg.run.timeout_s = t;
            }
            if let Some(b) = budgets {
                cfg.run.budgets = b;
            }
            if let Some(p) = planners {
                cfg.run.planners = p;
            }
            cfg.validate()?;
            let planners = cfg
                .run
                .planners
                .iter()
                .map(|p| PlannerId::parse(p))
                .collect::<Result<Vec<_>, _>>()?;
            let mut suite = load_suite(&suite)?;
            if let Some(n) = limit {
                suite.problems.truncate(n);
            }
            let records = run_suite(&suite, &cfg, &planners, &cfg.run.budgets, |r| {
                if !quiet {
                    eprintln!(
                        "problem {:>4} {:<22} threads {:>3} {:<9} {:>9.4}s",
                        r.problem_id, r.planner, r.threads, r.status, r.wall_time_s
                    );
                }
            })?;
            let f = File::create(&out).map_err(|e| io_err(&out, e))?;
            let mut w = BufWriter::new(f);
            write_records(&mut w, &RecordsHeader::for_suite(&suite), &records)?;
            w.flush().map_err(|e| io_err(&out, e))?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Report {
            records,
            summary,
            filter,
            plot_data: plot_path,
            suite,
            max_trajectories,
        } => {
            let (_, recs) = load_records(&records)?;
            let filter = match filter {
                Filter::Common => StatsFilter::CommonSolved,
                Filter::Own => StatsFilter::OwnSolved,
            };
            let s = aggregate(&recs, filter)?;
            write_text(&summary, &s.to_json())?;
            println!(
                "{:<22} {:>7} {:>9} {:>6} {:>20} {:>20}",
                "planner", "threads", "success%", "n", "time mean (std)", "cost mean (std)"
            );
            let fmt = |m: Option<pinsat::bench::MeanStd>| m.map_or("n/a".to_string(), |m| format!("{:.4} ({:.4})", m.mean, m.std));
            for r in &s.rows {
                println!(
                    "{:<22} {:>7} {:>9.1} {:>6} {:>20} {:>20}",
                    r.planner,
                    r.threads,
                    r.success_rate,
                    r.stats_problems,
                    fmt(r.time),
                    fmt(r.cost)
                );
            }
            if let (Some(p), Some(sp)) = (plot_path, suite) {
                let suite = load_suite(&sp)?;
                let data = plot_data(&suite, &recs, &s, max_trajectories)?;
                let mut text = serde_json::to_string_pretty(&data).map_err(|e| CliError::Runtime(e.to_string()))?;
                text.push('\n');
                write_text(&p, &text)?;
            }
        }
        Command::Validate { suite, records, density } => {
            let suite = load_suite(&suite)?;
            let (_, recs) = load_records(&records)?;
            let samples = cfg.optimizer.validation_samples * density.max(1);
            let reports = validate_records(&suite, &recs, samples)?;
            let bad: Vec<_> = reports.iter().filter(|(_, r)| !r.passed()).collect();
            for (i, r) in &bad {
                let rec = &recs[*i];
                println!(
                    "FAIL problem {} {} threads {}: {}",
                    rec.problem_id,
                    rec.planner,
                    rec.threads,
                    serde_json::to_string(r).unwrap_or_default()
                );
            }
            println!("{} trajectories checked, {} violations", reports.len(), bad.len());
            if !bad.is_empty() {
                return Err(CliError::Runtime(format!("{} trajectories failed validation", bad.len())));
            }
        }
        Command::Kmin => {
            let domain = cfg.domain.to_domain();
            let limits = cfg.limits.to_limits(2)?;
            let tunnels: Vec<_> = domain.actions.iter().map(|a| a.tunnel(domain.tunnel_half_width)).collect();
            let kcfg = KminConfig::default();
            for (a, t) in domain.actions.iter().zip(&tunnels) {
                let k = (1..=kcfg.max_degree).find(|&k| kmin_feasible(t, &limits, k));
                match k {
                    Some(k) => println!("action {:?}: k_min {k}", a.delta),
                    None => println!("action {:?}: infeasible up to degree {}", a.delta, kcfg.max_degree),
                }
            }
            let r = compute_kmin(&tunnels, &limits, &kcfg).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("point2d: k_min {} (planning degree {})", r.k_min, r.planning_degree);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
