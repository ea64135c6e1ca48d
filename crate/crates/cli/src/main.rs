//! `levitwin`: scenario-driven front end for the levitated-sensor digital twin.

mod commands;
mod error;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use error::CliError;
use output::OutDir;
use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "levitwin", version, about = "Digital twin of a feedback-cooled levitated sensor")]
struct Cli {
    /// Scenario file (TOML, SI units in every key).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; overrides `output_dir` in the scenario.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every gain point and emit trajectories, spectra and a report.
    Simulate,
    /// Evaluate minimum reachable temperatures.
    Limits,
    /// Run the closed-loop flux calibration.
    Calibrate,
    /// Bode data and resonances of the isolation chain.
    Isolation,
    /// Ensemble statistics over the gain schedule.
    SweepGain,
    /// List the built-in scenarios.
    Presets,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("", "--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime("thread pool", e))?;
    }
    if let Command::Presets = cli.command {
        for (name, _) in scenario::PRESETS {
            println!("{name}");
        }
        return Ok(());
    }

    let scenario = Scenario::load(cli.config.as_deref(), cli.preset.as_deref())?;
    let out_dir = cli
        .out
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("levitwin-out"));
    let ctx = Context {
        seed: cli.seed.unwrap_or(scenario.seed),
        seed_override: cli.seed,
        out: OutDir::create(&out_dir)?,
        scenario,
    };

    match cli.command {
        Command::Simulate => {
            let r = commands::simulate(&ctx)?;
            for p in &r.points {
                for m in &p.modes {
                    println!(
                        "point {} mode {}: T = {:.4e} K, a_rms = {:.4e} m, n = {:.4e} ({})",
                        p.index, m.label, m.t_mode_k, m.a_rms_m, m.n_ph, m.method
                    );
                }
            }
        }
        Command::Limits => {
            for s in commands::limits(&ctx)?.scenarios {
                println!("{}: T_min = {:.4e} K, n_min = {:.4e}", s.name, s.t_min_k, s.n_ph_min);
            }
        }
        Command::Calibrate => {
            let r = commands::calibrate(&ctx)?;
            let c = &r.calibration;
            println!(
                "beta^2 = {:.4e}, dPhi/dx = {:.4e} Wb/m, dV/dx = {:.4e} V/m, error {:+.3}%",
                c.beta_sq,
                c.dphi_dx_wb_per_m,
                c.dv_dx_v_per_m,
                c.relative_error * 100.0
            );
            for t in &r.targets {
                println!("target {:.4e} V/m: beta^2 = {:.4e}", t.dv_dx_v_per_m, t.beta_sq);
            }
        }
        Command::Isolation => {
            let r = commands::isolation(&ctx)?;
            println!(
                "{}–{} Hz attenuation {:.1}–{:.1} dB over {} stages",
                r.band_hz[0], r.band_hz[1], r.band_attenuation_min_db, r.band_attenuation_max_db, r.stages
            );
        }
        Command::SweepGain => {
            for row in commands::sweep(&ctx)?.points {
                println!(
                    "point {} mode {}: T_band = {:.4e} ± {:.1e} K (ideal {:.4e} K)",
                    row.index, row.mode, row.stats.t_band_k, row.stats.t_band_sem_k, row.stats.t_ideal_k
                );
            }
        }
        Command::Presets => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LEVITWIN_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
