use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deltaloop::experiments::{list_experiments, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "deltaloop", version, about = "Spectral experiments for magnetic operators with a δ-interaction on a loop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (defaults to the config's `output`, then `out/<experiment>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for sweeps.
        #[arg(long)]
        workers: Option<usize>,
        /// Treat unverified enclosure flags as failures.
        #[arg(long)]
        strict: bool,
    },
    /// List available experiments and their claims.
    List,
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in list_experiments() {
                println!("{:<20} {}", e.name, e.description);
                if !e.required.is_empty() {
                    println!("{:<20}   required: {}", "", e.required.join(", "));
                }
                println!("{:<20}   optional: {}", "", e.optional.join(", "));
                println!("{:<20}   claims:   {}", "", e.claims.join(", "));
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::load(&config).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => {
                println!("ok: {} ({})", c.experiment, c.digest());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid config: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, out, workers, strict } => {
            if let Some(k) = workers {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
                    eprintln!("cannot configure workers: {e}");
                    return ExitCode::from(2);
                }
            }
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("invalid config: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out
                .or_else(|| cfg.output.as_ref().map(|o| cfg.base_dir.join(o)))
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.experiment));
            match run(&cfg, &out, strict) {
                Ok(report) => {
                    print!("{}", report.summary());
                    println!("artifacts in {} ({:.1}s)", out.display(), report.wall_clock);
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
