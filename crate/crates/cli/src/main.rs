use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use geoscatter::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "geoscatter", version, about = "Scattering data of internal sources: forward runs, reconstruction, verification")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default: config `out` key, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config direction count.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Localize,
    Charts,
    Lens,
    Compare,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate a dataset: writes dataset.txt, truth.txt and lens.csv.
    Forward {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an inverse pipeline on a dataset. Exit status 0 iff it certifies.
    Reconstruct {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Forward model, needed by `charts` and used to check `lens`/refine `localize`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Second dataset for `compare`.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Boundary correspondence: identity | shift:<d> | reflect:<d>.
        #[arg(long, default_value = "identity")]
        phi: String,
        /// Query dataset for `localize` (e.g. off-grid sources).
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Overrides the certification threshold of the mode.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Interior chart lattice is n × n (`charts`).
        #[arg(long, default_value_t = 20)]
        chart_grid: usize,
        /// Boundary chart count (`charts`).
        #[arg(long, default_value_t = 32)]
        boundary_points: usize,
    },
    /// Run property suites: convexity | conservation | jacobi | hausdorff | i0 | all.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "all")]
        suite: String,
        /// Replaces every residual tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
}

pub struct Global {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
}

fn fail(code: &str, msg: &str) -> ExitCode {
    eprintln!("error[{code}]: {}", msg.replace('\n', " "));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("E_USAGE", first);
        }
    };
    if let Some(k) = cli.workers {
        if k == 0 {
            return fail("E_USAGE", "--workers must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            return fail("E_USAGE", &e.to_string());
        }
    }
    let _ = cli.format;
    let g = Global { out: cli.out, seed: cli.seed, grid: cli.grid };
    let result = match cli.cmd {
        Cmd::Forward { config } => commands::forward(&g, &config),
        Cmd::Reconstruct { dataset, mode, config, against, phi, queries, tolerance, chart_grid, boundary_points } => {
            commands::reconstruct(
                &g,
                &commands::ReconstructArgs {
                    dataset,
                    mode,
                    config,
                    against,
                    phi,
                    queries,
                    tolerance,
                    chart_grid,
                    boundary_points,
                },
            )
        }
        Cmd::Verify { config, suite, tolerance, samples } => commands::verify(&g, &config, &suite, tolerance, samples),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(e.code(), &e.to_string()),
    }
}

pub fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
