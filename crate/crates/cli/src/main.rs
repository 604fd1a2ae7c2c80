use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use manifold_embed::{commands, configure_threads, CliError, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Extract patches, split train/test and fit band statistics
    Prepare,
    /// Split every class into sub-classes along its manifold
    Cluster,
    /// Train the network with the embedding loss
    Train,
    /// Score the test split, optionally against another run
    Evaluate,
    /// Render a classification map of every labelled pixel
    Map,
    /// Run the pipeline over a grid of settings and seeds
    Sweep,
}

#[derive(Debug, Parser)]
#[command(
    name = "manifold-embed",
    version,
    about = "Deep manifold embedding for hyperspectral classification"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// Run configuration (`key = value` lines)
    #[arg(long)]
    config: PathBuf,

    /// Run directory; overrides `out` in the config (default: ./run)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Overwrite existing outputs
    #[arg(long)]
    force: bool,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = RunConfig::load(&cli.config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("run"));
    let force = cli.force;
    match cli.command {
        Command::Prepare => println!("{}", commands::prepare(&cfg, &out, force)?),
        Command::Cluster => println!("{}", commands::cluster(&cfg, &out, force)?),
        Command::Train => println!("{}", commands::train(&cfg, &out, force)?),
        Command::Evaluate => println!("{}", commands::evaluate(&cfg, &out, force)?),
        Command::Map => println!("{}", commands::map(&cfg, &out, force)?),
        Command::Sweep => {
            let cells = commands::sweep(&cfg, &out, force)?;
            print!("{}", commands::sweep_csv(&cells));
            let failed: usize = cells.iter().map(|c| c.failures.len()).sum();
            if failed > 0 {
                eprintln!(
                    "{failed} run(s) failed; see {}",
                    out.join(commands::SWEEP_FAILURES).display()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
