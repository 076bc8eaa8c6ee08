use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ldpkit",
    about = "Small-noise large deviations toolkit: simulate, skeleton, minimize, sweep, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker thread count (results are identical for any value).
        #[arg(long)]
        threads: Option<usize>,
        /// Suppress the summary line.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            quiet,
        } => {
            if let Some(k) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                {
                    eprintln!("ldpkit: cannot configure {k} threads: {e}");
                    return ExitCode::from(1);
                }
            }
            let status = ldpkit::cli::run(&config, out.as_deref(), quiet);
            ExitCode::from(status.exit_code() as u8)
        }
    }
}
