use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bvmlab::experiments::results::{summary_path, write_summary};
use bvmlab::experiments::{check_conditions, read_results, run_experiment, summarize, write_results, ExperimentConfig, SummaryRow};
use bvmlab::Result;

#[derive(Parser)]
#[command(name = "bvmlab", version, about = "Sieve-prior Gaussian regression simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Base seed, replacing the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates per sample size, replacing the config value.
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Result file, replacing the config value.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result and summary files.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the finite-n condition ratios for every grid point.
    CheckConditions {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute the summary of an existing result file.
    Summarize {
        results: PathBuf,
        /// Summary file; defaults to `<results>.summary.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(r) = o.replicates {
        config.replicates = r;
    }
    if let Some(out) = &o.output {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn show(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.4}")
    }
}

fn print_summary(rows: &[SummaryRow], lambdas: &[f64]) {
    print!("{:>7} {:>5} {:>5} {:>16} {:>16} {:>12} {:>9} {:>10}", "n", "k", "reps", "tv (se)", "isup (se)", "freq isup", "coverage", "bias");
    for l in lambdas {
        print!(" {:>12}", format!("out@{l}"));
    }
    println!(" {:>7}", "flagged");
    for s in rows {
        print!(
            "{:>7} {:>5} {:>5} {:>16} {:>16} {:>12} {:>9} {:>10}",
            s.n,
            s.k,
            s.replicates,
            format!("{} ({})", show(s.tv.mean), show(s.tv.se)),
            format!("{} ({})", show(s.interval_sup.mean), show(s.interval_sup.se)),
            show(s.freq_interval_sup),
            show(s.coverage.mean),
            show(s.bias_term.mean),
        );
        for o in &s.outside {
            print!(" {:>12}", show(o.mean));
        }
        println!(" {:>7}", s.flagged);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let output = cfg.output.clone().unwrap_or_else(|| {
                let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
                PathBuf::from(format!("{stem}.csv"))
            });
            let result = run_experiment(&cfg, overrides.jobs)?;
            write_results(&result, &output)?;
            let summary = summarize(&result);
            let sp = summary_path(&output);
            write_summary(&summary, &result.lambdas, &sp)?;
            print_summary(&summary, &result.lambdas);
            println!("wrote {} and {}", output.display(), sp.display());
        }
        Command::CheckConditions { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            println!(
                "{:>7} {:>5} {:>10} {:>10} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
                "n", "k", "sigma", "M_n", "prior", "signal", "dimension", "bias/sigma", "b-ratio", "k/M"
            );
            for r in check_conditions(&cfg)? {
                let (b, d) = r
                    .functional
                    .map(|f| (format!("{:.4e}", f.b_ratio), format!("{:.4e}", f.dimension_ratio)))
                    .unwrap_or(("-".into(), "-".into()));
                println!(
                    "{:>7} {:>5} {:>10.4e} {:>10.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11} {:>11}",
                    r.n, r.k, r.sigma, r.m_n, r.prior.prior, r.prior.signal, r.prior.dimension, r.bias_to_noise, b, d
                );
            }
        }
        Command::Summarize { results, output } => {
            let result = read_results(&results)?;
            let summary = summarize(&result);
            let sp = output.unwrap_or_else(|| summary_path(&results));
            write_summary(&summary, &result.lambdas, &sp)?;
            print_summary(&summary, &result.lambdas);
            println!("wrote {}", sp.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
