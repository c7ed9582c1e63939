use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pqkd_cli::commands::{
    cmd_analyze, cmd_enumerate, cmd_simulate, cmd_sweep, AnalyzeOptions, EnumerateOptions, Overrides, SimulateOptions,
    SweepAxis, SweepOptions, DEFAULT_MU_GRID,
};

const DEFAULT_OUT: &str = "pqkd_out";

#[derive(Parser)]
#[command(name = "pqkd", version, about = "Pattern-based QKD simulator and analysis toolkit")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Session config file (key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of blocks (overrides the config file).
    #[arg(long, global = true)]
    blocks: Option<usize>,
    /// MQER abort threshold (overrides the config file).
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Fraction of sifted blocks disclosed for testing (overrides the config file).
    #[arg(long, global = true)]
    test_fraction: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the pattern table and count valid pattern sets.
    Enumerate {
        /// Also write sets.csv with every valid set.
        #[arg(long)]
        sets_csv: bool,
    },
    /// Print the closed-form security quantities.
    Analyze {
        /// Mean photon numbers for the PNS table.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mu: Option<Vec<f64>>,
        /// Secret set to analyse.
        #[arg(long, default_value_t = 0)]
        set_id: usize,
        /// Write the per-set chi table to this CSV file.
        #[arg(long)]
        chi_csv: Option<PathBuf>,
    },
    /// Run one session and write report, records and manifest.
    Simulate,
    /// Run one session per axis value and write sweep.csv.
    Sweep {
        /// distance_km, per_qubit_flip_prob, mean_photon_number (mu) or eve_knowledge (k).
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 0..)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides =
        Overrides { seed: cli.seed, blocks: cli.blocks, threshold: cli.threshold, test_fraction: cli.test_fraction };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let result = match cli.command {
        Command::Enumerate { sets_csv } => cmd_enumerate(&EnumerateOptions { out, sets_csv }),
        Command::Analyze { mu, set_id, chi_csv } => cmd_analyze(&AnalyzeOptions {
            mu: mu.unwrap_or_else(|| DEFAULT_MU_GRID.to_vec()),
            set_id,
            chi_csv,
            out: cli.out,
        }),
        Command::Simulate => cmd_simulate(&SimulateOptions { config: cli.config, out, overrides }),
        Command::Sweep { axis, values } => {
            cmd_sweep(&SweepOptions { config: cli.config, out, overrides, axis, values })
        }
    };
    match result {
        Ok(output) => {
            print!("{}", output.stdout);
            ExitCode::from(output.exit_code as u8)
        }
        Err(e) => {
            eprintln!("pqkd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
