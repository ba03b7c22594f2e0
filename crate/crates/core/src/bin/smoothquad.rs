use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smoothquad::sim::{
    compare_revenue, emit_figure_data, load_config, random_history, run_axiom_suite, run_scenario, trace_from_csv,
    write_outputs, FigureStyle,
};
use smoothquad::{Error, Ledger, Result};

/// Simulate and audit Smooth Quadratic prediction markets.
#[derive(Parser)]
#[command(name = "smoothquad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its trace, ledger and summary.
    Simulate {
        config: PathBuf,
        /// Output directory; defaults to the config's `output_dir`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Price one trade history under both payment rules.
    Compare {
        config: PathBuf,
        /// Replay the trades of a ledger file.
        #[arg(long, conflicts_with = "random")]
        history: Option<PathBuf>,
        /// Number of random trades with coordinates in [-1, 1].
        #[arg(long, default_value_t = 1000)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every trade as CSV instead of the totals.
        #[arg(long)]
        per_trade: bool,
    },
    /// Turn a trace CSV into plot-ready CSV.
    Figure {
        trace: PathBuf,
        /// simplex_path, gap_vs_t or envelope.
        #[arg(long)]
        style: FigureStyle,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized axiom check over softmax and sparsemax costs.
    Axioms {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let run = run_scenario(&cfg)?;
            let paths = write_outputs(&run, &dir)?;
            let s = run.summary();
            println!("scenario   {}", s.name);
            println!("rounds     {}", s.rounds_completed);
            println!("l1 gap     {:.3e}", s.final_l1_gap);
            println!("revenue    {:.6}", s.revenue);
            println!("worst loss {:.6}", s.worst_case_loss);
            println!("trace      {}", paths.trace.display());
            println!("ledger     {}", paths.ledger.display());
            println!("summary    {}", paths.summary.display());
            if let Some(p) = &paths.simplex_path {
                println!("simplex    {}", p.display());
            }
            run.into_result()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { config, history, random, seed, per_trade } => {
            let cfg = load_config(&config)?;
            let (q0, trades) = match history {
                Some(path) => {
                    let ledger = Ledger::from_jsonl(&std::fs::read_to_string(path)?)?;
                    let trades = ledger.records.into_iter().map(|r| r.bundle).collect::<Vec<_>>();
                    (ledger.initial_q, trades)
                }
                None => (cfg.q0.clone(), random_history(cfg.dim(), random, seed)),
            };
            let report = compare_revenue(&cfg, &q0, &trades)?;
            if per_trade {
                println!("index,dcfmm,smooth_quad,cumulative_dcfmm,cumulative_smooth_quad");
                for row in &report.rows {
                    println!(
                        "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                        row.index, row.dcfmm, row.smooth_quad, row.cumulative_dcfmm, row.cumulative_smooth_quad
                    );
                }
            } else {
                println!("trades            {}", report.rows.len());
                println!("revenue dcfmm     {:.9}", report.dcfmm.revenue);
                println!("revenue smoothq   {:.9}", report.smooth_quad.revenue);
                println!("worst loss dcfmm  {:.9}", report.dcfmm.worst_case_loss);
                println!("worst loss smooth {:.9}", report.smooth_quad.worst_case_loss);
                println!("dominance         {}", if report.dominates() { "holds" } else { "VIOLATED" });
            }
            if !report.dominates() {
                return Err(Error::Validation(format!(
                    "smooth quadratic payment below cost difference on trades {:?}",
                    report.dominance_violations
                )));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Figure { trace, style, out } => {
            let trace = trace_from_csv(&std::fs::read_to_string(trace)?)?;
            let data = emit_figure_data(&trace, style)?;
            match out {
                Some(path) => std::fs::write(path, data)?,
                None => print!("{data}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Axioms { samples, seed } => {
            let report = run_axiom_suite(samples, seed);
            for c in &report.checks {
                println!(
                    "{} {:<26} {:<9} d={} failures={}/{} worst_margin={:.3e}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.axiom,
                    c.family,
                    c.dim,
                    c.failures,
                    c.samples,
                    c.worst_margin
                );
            }
            println!("elapsed {:.3}s", report.elapsed_seconds);
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}
