use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stripmask_cli::bench::{render_summary, run_bench, BenchConfig};
use stripmask_cli::evaluate::{run_evaluate, to_json, EvaluateArgs};
use stripmask_cli::explain::{run_explain, ExplainArgs};
use stripmask_cli::render::{run_render, RenderArgs};
use stripmask_cli::CliResult;

/// Strip-mask saliency for black-box time-series models.
#[derive(Debug, Parser)]
#[command(name = "stripmask", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a synthetic benchmark sweep described by a TOML config.
    Bench {
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Find the strip mask of one input.
    Explain(ExplainArgs),
    /// Compute metrics of a saved mask.
    Evaluate(EvaluateArgs),
    /// Draw a mask as an SVG heatmap.
    Render(RenderArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Bench { config, out, workers } => {
            let mut cfg = BenchConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let report = run_bench(&cfg, workers)?;
            print!("{}", render_summary(&cfg, &report));
            if report.failures() > 0 {
                eprintln!(
                    "{} of {} runs failed; see {}",
                    report.failures(),
                    report.rows.len(),
                    report.output_dir.join("errors.csv").display()
                );
            }
        }
        Command::Explain(args) => println!("{}", run_explain(&args)?),
        Command::Evaluate(args) => println!("{}", to_json(&run_evaluate(&args)?)),
        Command::Render(args) => run_render(&args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
