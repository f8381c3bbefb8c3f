//! conewedge: indicial roots, conormal-symbol asymptotics, extension checks,
//! resolvent probes, and a porous-medium run on the truncated wedge, driven
//! by one TOML config.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::CommandOutcome;
use config::RunConfig;
use report::Report;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conewedge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the cross-section spectrum (with the FD oracle cross-check).
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Indicial roots inside the weight window I_gamma.
    Indicial {
        #[arg(long)]
        config: PathBuf,
        /// Weight gamma; defaults to the configured weight.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Laurent data of g_ell and the asymptotics bases at sigma.
    Conormal {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        ell: usize,
    },
    /// Extension descriptor, pairing matrix, adjoint complement, and the
    /// extension-condition verdicts.
    Domain {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured delta.
        #[arg(long)]
        delta: Option<f64>,
        /// Run the three-condition extension check (exit 2 on failure).
        #[arg(long)]
        check_e3: bool,
    },
    /// Sectoriality probe: resolvent-norm estimates over the sampled sector.
    Probe {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ray arguments in degrees (default from config).
        #[arg(long)]
        rays: Option<String>,
        /// Largest |lambda| (default from config).
        #[arg(long)]
        lmax: Option<f64>,
    },
    /// Porous-medium run on the truncated wedge.
    Pme {
        #[arg(long)]
        config: PathBuf,
        /// Time horizon (default from config).
        #[arg(long = "T", value_name = "T")]
        t: Option<f64>,
        /// Trajectory CSV path (default <output.dir>/pme_trajectory.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn tolerances() -> serde_json::Value {
    json!({
        "root_tol": 1e-12,
        "rational_identity_tol": 1e-10,
        "rank_tol": 1e-10,
        "power_iteration": {"max_iters": 20, "rayleigh_tol": 1e-6},
        "fixed_point": {"max_iters": 5, "tol": 1e-8},
    })
}

fn run() -> Result<bool, conewedge_core::Error> {
    let cli = Cli::parse();
    let (config_path, name): (&PathBuf, &str) = match &cli.command {
        Command::Spectrum { config } => (config, "spectrum"),
        Command::Indicial { config, .. } => (config, "indicial"),
        Command::Conormal { config, .. } => (config, "conormal"),
        Command::Domain { config, .. } => (config, "domain"),
        Command::Probe { config, .. } => (config, "probe"),
        Command::Pme { config, .. } => (config, "pme"),
    };
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        conewedge_core::Error::Config(vec![format!("reading {}: {e}", config_path.display())])
    })?;
    let config = RunConfig::parse(&text)?;
    let out_dir = PathBuf::from(&config.output.dir);

    let outcome: CommandOutcome = match &cli.command {
        Command::Spectrum { .. } => commands::cmd_spectrum(&config)?,
        Command::Indicial { gamma, .. } => commands::cmd_indicial(&config, *gamma)?,
        Command::Conormal { sigma, ell, .. } => commands::cmd_conormal(&config, *sigma, *ell)?,
        Command::Domain { delta, check_e3, .. } => {
            commands::cmd_domain(&config, *delta, *check_e3)?
        }
        Command::Probe { rays, lmax, .. } => {
            let parsed_rays = match rays {
                None => None,
                Some(list) => {
                    let mut v = Vec::new();
                    for part in list.split(',') {
                        v.push(part.trim().parse::<f64>().map_err(|e| {
                            conewedge_core::Error::Config(vec![format!("bad ray {part:?}: {e}")])
                        })?);
                    }
                    Some(v)
                }
            };
            commands::cmd_probe(&config, parsed_rays, *lmax, &out_dir)?
        }
        Command::Pme { t, out, .. } => commands::cmd_pme(&config, *t, out.clone(), &out_dir)?,
    };

    let report = Report::new(&text, name, tolerances(), outcome.section);
    println!("{}", report.to_json());
    report
        .write(&out_dir)
        .map_err(|e| conewedge_core::Error::Numerical(format!("writing report: {e}")))?;
    Ok(outcome.verdict_pass)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
