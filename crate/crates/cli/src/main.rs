use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use spinlab::bounds::BoundKind;
use spinlab_cli::config::{load_configs, ExperimentConfig};
use spinlab_cli::pipeline::{verify_algebra, Outcome};
use spinlab_cli::{output_root, presets, render, run_batch, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "spinlab", version, about = "Spectral bounds for submanifold Dirac operators")]
struct Cli {
    /// Output root; one subdirectory per experiment.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Print the summary without writing files.
    #[arg(long, global = true)]
    no_write: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Clifford identities for every split with m + n ≤ max-dim.
    VerifyAlgebra {
        #[arg(long, default_value_t = 8)]
        max_dim: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Restricted parallel spinors on the round S² in R³.
    SphereEquality {
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Product of two circles in R⁴.
    Torus {
        #[arg(long, default_value_t = 1.0)]
        r1: f64,
        #[arg(long, default_value_t = 1.0)]
        r2: f64,
        /// Bound kinds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "energy-momentum", value_parser = parse_bound)]
        bound: Vec<BoundKind>,
        #[arg(short = 'K', long, default_value_t = 8)]
        truncation: usize,
        /// Keep only this many eigenpairs of smallest |λ|.
        #[arg(long)]
        eigenpairs: Option<usize>,
    },
    /// Clifford torus with the energy-momentum bound at K = 8.
    TorusBounds,
    /// Flat torus under the conformal factor u = 0.1 cos θ₁.
    ConformalCovariance,
    /// Auxiliary-bundle tori over holonomies {0, ½}² and three choices of f.
    AuxBundle {
        #[arg(short = 'K', long, default_value_t = 5)]
        truncation: usize,
    },
    /// Run experiments from a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_bound(s: &str) -> Result<BoundKind, String> {
    BoundKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = BoundKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown bound {s:?}; expected one of {}", names.join(", "))
    })
}

fn configs(cmd: &Command) -> Result<Vec<ExperimentConfig>> {
    Ok(match cmd {
        Command::VerifyAlgebra { .. } => Vec::new(),
        Command::SphereEquality { radius } => vec![presets::sphere_equality(*radius)],
        Command::Torus { r1, r2, bound, truncation, eigenpairs } => {
            let mut cfg = presets::torus(*r1, *r2, bound.clone(), *truncation);
            cfg.eigenpairs = *eigenpairs;
            vec![cfg]
        }
        Command::TorusBounds => vec![presets::torus_bounds()],
        Command::ConformalCovariance => vec![presets::conformal_covariance()],
        Command::AuxBundle { truncation } => presets::aux_bundle(*truncation),
        Command::Run { config } => load_configs(config)?,
    })
}

fn run(cli: &Cli) -> Result<bool> {
    let cfgs = configs(&cli.command)?;
    let outcomes: Vec<(Outcome, f64)> = match &cli.command {
        Command::VerifyAlgebra { max_dim, tol } => {
            if *max_dim < 2 {
                bail!("max-dim must be at least 2");
            }
            vec![(verify_algebra(*max_dim, *tol)?, 1e-9)]
        }
        _ => run_batch(&cfgs)?.into_iter().zip(cfgs.iter().map(|c| c.tolerances.margin)).collect(),
    };
    let mut ok = true;
    for (k, (outcome, margin_tol)) in outcomes.iter().enumerate() {
        print!("{}", render::summary(outcome, *margin_tol));
        println!();
        if !cli.no_write {
            let root = output_root(cli.out.as_deref(), cfgs.get(k));
            let dir = render::write_outcome(&root, outcome, *margin_tol)?;
            println!("wrote {}", dir.display());
            println!();
        }
        ok &= outcome.passed();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more invariants failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
