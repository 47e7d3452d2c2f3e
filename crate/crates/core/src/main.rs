use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use bulk_surface_ch::harness::{self, config::RunConfig, output, Experiment};

#[derive(Parser)]
#[command(name = "bsch", version, about = "Bulk-surface Cahn-Hilliard experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spatial convergence study on the manufactured disk problem.
    ConvergeSpace(Common),
    /// Temporal convergence study on the manufactured disk problem.
    ConvergeTime(Common),
    /// Phase-separation simulation on the unit square.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config, then `out/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the BDF order.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    q: Option<u8>,
    /// Overrides the random-scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Common, expected: Experiment) -> anyhow::Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&args.config)?;
    if cfg.experiment != expected {
        bail!("{} describes a {:?} experiment, not {:?}", args.config.display(), cfg.experiment, expected);
    }
    if let Some(q) = args.q {
        cfg.q = q as usize;
    }
    if let Some(seed) = args.seed {
        if let Some(sim) = cfg.simulate.as_mut() {
            sim.seed = seed;
        }
    }
    cfg.check()?;
    let out = args.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((cfg, out))
}

fn convergence(args: &Common, experiment: Experiment) -> anyhow::Result<()> {
    let (cfg, out) = load(args, experiment)?;
    let records = match experiment {
        Experiment::ConvergeSpace => harness::converge_space(&cfg)?,
        _ => harness::converge_time(&cfg)?,
    };
    let path = out.join("convergence.csv");
    output::write_convergence_csv(std::fs::File::create(&path)?, &records)?;
    for r in &records {
        let fmt = |e: Option<f64>| e.map(|v| format!("{v:5.2}")).unwrap_or_else(|| "    -".into());
        println!(
            "level {:2}  h {:.3e}  tau {:.3e}  dof {:6}  u_L2 {:.3e} ({})  u_H1 {:.3e} ({})  w_L2 {:.3e} ({})  w_H1 {:.3e} ({})",
            r.level,
            r.h,
            r.tau,
            r.dof,
            r.errors.u_l2,
            fmt(r.eoc[0]),
            r.errors.u_h1,
            fmt(r.eoc[1]),
            r.errors.w_l2,
            fmt(r.eoc[2]),
            r.errors.w_h1,
            fmt(r.eoc[3]),
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(args: &Common) -> anyhow::Result<()> {
    let (cfg, out) = load(args, Experiment::Simulate)?;
    let report = harness::simulate(&cfg, Some(&out))?;
    if let (Some(first), Some(last)) = (report.series.first(), report.series.last()) {
        println!(
            "steps {}..{}  mass {:.12e} -> {:.12e}  energy {:.6e} -> {:.6e}",
            first.step, last.step, first.mass, last.mass, first.energy, last.energy
        );
    }
    println!("wrote {} and {} snapshots", out.join("series.csv").display(), report.snapshots.len());
    if let Some(err) = report.aborted {
        return Err(err).context("simulation aborted; series.csv holds the partial record");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::ConvergeSpace(a) => convergence(&a, Experiment::ConvergeSpace),
        Command::ConvergeTime(a) => convergence(&a, Experiment::ConvergeTime),
        Command::Simulate(a) => simulate(&a),
    }
}
