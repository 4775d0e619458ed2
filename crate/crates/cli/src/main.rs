use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dgrecon::harness::config::SweepSpec;
use dgrecon::harness::output::{report_text, write_run, write_sweep};
use dgrecon::harness::sweep::{fit_series, group_series, run_sweep};
use dgrecon::harness::verify::run_checks;
use dgrecon::{reconstruct, RunConfig};

#[derive(Parser)]
#[command(name = "dgrecon", version, about = "Conductivity reconstruction by upwind DG transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct sigma for one example and print the metrics.
    Run(RunArgs),
    /// Run every configuration of a sweep file and write tables and plots.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in self checks.
    Verify,
}

/// Unset options fall back to the defaults of the chosen example.
#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    example: u32,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    data_n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k0: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Directory for the report, field CSVs and VTK dump.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::for_example(self.example)?;
        if let Some(n) = self.n {
            c.n = n;
            c.data_n = self.data_n.unwrap_or(n);
        } else if let Some(d) = self.data_n {
            c.data_n = d;
        }
        c.k = self.k.unwrap_or(c.k);
        c.k0 = self.k0.unwrap_or(c.k0);
        c.eps = self.eps.unwrap_or(c.eps);
        c.delta = self.delta.unwrap_or(c.delta);
        c.seed = self.seed.unwrap_or(c.seed);
        c.penalty = self.penalty.unwrap_or(c.penalty);
        c.tol = self.tol.unwrap_or(c.tol);
        c.out.clone_from(&self.out);
        Ok(c)
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let report = reconstruct(&cfg)?;
    print!("{}", report_text(&report));
    if let Some(dir) = &cfg.out {
        write_run(dir, &report).with_context(|| format!("writing {}", dir.display()))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn sweep(config: &PathBuf, out: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let configs = SweepSpec::parse(&text)?.expand()?;
    eprintln!("running {} configurations", configs.len());
    let rows = run_sweep(&configs);
    write_sweep(out, &rows).with_context(|| format!("writing {}", out.display()))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    for (label, metric, fit) in fit_series(&group_series(&rows)) {
        println!("{label}: {metric} slope {:.3} (r2 {:.4}, {} points)", fit.slope, fit.r2, fit.points);
    }
    println!("wrote {} rows to {} ({failed} failed)", rows.len(), out.display());
    if failed == rows.len() && !rows.is_empty() {
        bail!("every configuration failed; see errors.txt");
    }
    Ok(())
}

fn verify() -> bool {
    let mut ok = true;
    for c in run_checks() {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    ok
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { config, out } => sweep(config, out),
        Command::Verify => {
            if verify() {
                Ok(())
            } else {
                Err(anyhow::anyhow!("some checks failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
