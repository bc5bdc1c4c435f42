use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use cansat_core::descent::AirEnvironment;
use cansat_core::mission::{cmd_budget, cmd_decode, cmd_replay, cmd_simulate};
use cansat_core::parachute::{
    size_for_descent, validate_spec, DEFAULT_CANOPY_CD, GUIDELINE_SPILL_RATIO,
};
use clap::{Parser, Subcommand};

/// CanSat drop simulator and ground station.
#[derive(Parser)]
#[command(name = "cansat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly a full mission and write the ground-station artifacts.
    Simulate {
        /// Mission config; the built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides mission.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Size a spill-hole canopy for a target descent speed.
    #[command(allow_negative_numbers = true)]
    DesignChute {
        /// Suspended mass, kg.
        #[arg(long)]
        mass: f64,
        /// Target descent speed, m/s.
        #[arg(long)]
        target_v: f64,
        #[arg(long, default_value_t = DEFAULT_CANOPY_CD)]
        cd: f64,
        #[arg(long, default_value_t = GUIDELINE_SPILL_RATIO)]
        spill_ratio: f64,
    },
    /// Mass, volume and power report for the configured build.
    Budget {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Decode a raw capture into CSV, JSONL, error log and summary.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay the bundled flight record and check it against its envelope.
    Replay,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let o = cmd_simulate(config.as_deref(), &out, seed)?;
            let s = &o.summary;
            println!(
                "sent {} frames, received {}, {} decode errors, loss rate {:.4}",
                o.sent.len(),
                s.frame_count,
                s.error_count,
                s.loss_rate
            );
            for e in &o.events {
                match e.trigger_altitude {
                    Some(a) => println!("{:>8.2} s  {} -> {} at {a:.2} m", e.t, e.from, e.to),
                    None => println!("{:>8.2} s  {} -> {}", e.t, e.from, e.to),
                }
            }
            for b in &s.descent_rates {
                println!("band {}-{} m: {:.2} m/s over {} frames", b.upper, b.lower, b.rate, b.samples);
            }
            println!("artifacts in {}", out.display());
        }
        Command::DesignChute {
            mass,
            target_v,
            cd,
            spill_ratio,
        } => {
            let spec = size_for_descent(mass, target_v, cd, &AirEnvironment::default(), spill_ratio)?;
            println!("canopy diameter     {:.5} m", spec.canopy_diameter);
            println!("spill hole diameter {:.5} m", spec.spill_hole_diameter());
            println!("effective area      {:.6} m2", spec.effective_area());
            println!("cd                  {}", spec.cd);
            for v in validate_spec(&spec, true) {
                println!("warning: {v}");
            }
        }
        Command::Budget { config } => {
            let report = cmd_budget(config.as_deref())?;
            println!("{report}");
            if !report.passed() {
                bail!("budget check failed");
            }
        }
        Command::Decode { input, out } => {
            let (_, s) = cmd_decode(&input, &out)?;
            println!(
                "{} frames, {} errors, loss rate {:.4}; files in {}",
                s.frame_count,
                s.error_count,
                s.loss_rate,
                out.display()
            );
        }
        Command::Replay => {
            let (summary, checks) = cmd_replay();
            println!("{} frames", summary.frame_count);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                bail!("replay outside the recorded envelope");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
