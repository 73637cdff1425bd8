use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use spherepol_cli::config::{BackendKind, RunConfig};
use spherepol_cli::experiments::{cmd_convergence, cmd_forces, cmd_nstudy, cmd_scaling, cmd_separation, cmd_solve};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "spherepol", version, about = "Induced charges and forces for polarizable dielectric spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, global = true)]
    lmax: Option<usize>,
    /// Relative GMRES residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    tree_depth: Option<u32>,
    #[arg(long, global = true)]
    tree_order: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Solve for the induced charge.
    Solve,
    /// Solve and compute per-sphere forces.
    Forces,
    /// Force and charge error against a high-degree reference over an lmax sweep.
    Convergence,
    /// Force error over a range of lattice sizes.
    Nstudy,
    /// Two-sphere force error as the gap closes.
    Separation,
    /// Wall-clock of solve plus forces over a range of lattice sizes.
    Scaling,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BackendArg {
    Direct,
    Tree,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    if let Some(b) = cli.backend {
        cfg.backend.kind = match b {
            BackendArg::Direct => BackendKind::Direct,
            BackendArg::Tree => BackendKind::Tree,
        };
    }
    // `scaling` keeps its own lmax, tolerance and tree parameters.
    let scaling = matches!(cli.command, Command::Scaling);
    if let Some(l) = cli.lmax {
        if scaling {
            cfg.scaling.lmax = l;
        } else {
            cfg.lmax = l;
        }
    }
    if let Some(t) = cli.tol {
        if scaling {
            cfg.scaling.tolerance = t;
        } else {
            cfg.solver.tolerance = t;
        }
    }
    if let Some(d) = cli.tree_depth {
        if scaling {
            cfg.scaling.tree_depth = Some(d);
        } else {
            cfg.backend.depth = Some(d);
        }
    }
    if let Some(p) = cli.tree_order {
        if scaling {
            cfg.scaling.tree_order = p;
        } else {
            cfg.backend.order = Some(p);
        }
    }
    cfg.validate()?;
    let files = match cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Forces => cmd_forces(&cfg),
        Command::Convergence => cmd_convergence(&cfg),
        Command::Nstudy => cmd_nstudy(&cfg),
        Command::Separation => cmd_separation(&cfg),
        Command::Scaling => cmd_scaling(&cfg),
    }
    .with_context(|| format!("{:?} failed", cli.command))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
