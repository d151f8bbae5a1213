//! `uavchan`: stage-by-stage and end-to-end front end for the emulation pipeline.
//!
//! Stage subcommands exchange CSV files, so a chain such as
//! `simulate-wind | simulate-uav | emulate-arm | sound-channel | calibrate | analyze-doppler`
//! reproduces one sweep of `run-pipeline` bit for bit.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use uavchan_core::analysis::{doppler_spread, fit_path_loss};
use uavchan_core::config::CampaignConfig;
use uavchan_core::csvio;
use uavchan_core::pipeline::{self, SweepSeeds};

#[derive(Parser)]
#[command(
    name = "uavchan",
    version,
    about = "UAV hover emulation and 28 GHz channel analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Campaign configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the campaign seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Position of a single sweep inside the campaign, for seed derivation.
#[derive(Args)]
struct SweepAt {
    /// Distance index within the campaign.
    #[arg(long, default_value_t = 0)]
    distance_index: usize,
    /// Sweep index at that distance.
    #[arg(long, default_value_t = 0)]
    sweep: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Dryden turbulence series in body axes plus the NED wind.
    SimulateWind {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: SweepAt,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hover trajectory under a recorded wind series.
    SimulateUav {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        wind: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Arm tracking of a hover trajectory; writes the tool motion log.
    EmulateArm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// S21 synthesis from a motion log, measured through the moving cable.
    SoundChannel {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: SweepAt,
        #[arg(long)]
        motion: PathBuf,
        /// Nominal Tx/Rx separation (ft).
        #[arg(long)]
        distance: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also writes the channel before the cable.
        #[arg(long)]
        channel_out: Option<PathBuf>,
    },
    /// Short/open/load characterization and cable removal.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        at: SweepAt,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also writes the solved error terms.
        #[arg(long)]
        terms_out: Option<PathBuf>,
    },
    /// Doppler spectrum, peak and spread of an S21 file.
    AnalyzeDoppler {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threshold_db: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-distance fit of (distance_m, pg_db) points.
    FitPathloss {
        #[arg(long)]
        input: PathBuf,
        /// Reference distance (m).
        #[arg(long, default_value_t = 1.0)]
        d0: f64,
    },
    /// Full campaign over every distance and sweep.
    RunPipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Comma-separated distances (ft).
        #[arg(long, value_delimiter = ',')]
        distances: Option<Vec<f64>>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        threshold_db: Option<f64>,
        /// Validates the configuration and prints the plan without computing.
        #[arg(long)]
        dry_run: bool,
        /// Worker threads; 1 runs serially.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
}

fn load_config(common: &Common) -> Result<CampaignConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            CampaignConfig::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => CampaignConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn seeds(cfg: &CampaignConfig, at: &SweepAt) -> SweepSeeds {
    SweepSeeds::derive(cfg.seed, at.distance_index, at.sweep)
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SimulateWind { common, at, out } => {
            let cfg = load_config(&common)?;
            let duration = pipeline::motion_duration(&cfg);
            let wind = pipeline::stage_wind(&cfg, seeds(&cfg, &at).wind, duration)?;
            csvio::write_turbulence(&out, &wind)?;
            wrote(&out);
        }
        Command::SimulateUav { common, wind, out } => {
            let cfg = load_config(&common)?;
            let wind = csvio::read_turbulence(&wind)?;
            let traj = pipeline::stage_hover(&cfg, &wind, pipeline::motion_duration(&cfg))?;
            csvio::write_trajectory(&out, &traj)?;
            wrote(&out);
        }
        Command::EmulateArm {
            common,
            trajectory,
            out,
        } => {
            let cfg = load_config(&common)?;
            let arm = pipeline::stage_arm(&cfg, &csvio::read_trajectory(&trajectory)?)?;
            csvio::write_motion_log(&out, &arm)?;
            println!("peak tool speed {:.4} m/s", arm.peak_speed());
            wrote(&out);
        }
        Command::SoundChannel {
            common,
            at,
            motion,
            distance,
            out,
            channel_out,
        } => {
            let cfg = load_config(&common)?;
            let sd = seeds(&cfg, &at);
            let path = pipeline::rx_path(&cfg, &csvio::read_motion_log(&motion)?)?;
            let channel = pipeline::stage_channel(&cfg, &path, distance, &sd)?;
            let (_, run_cable) = pipeline::stage_cables(&cfg, &sd)?;
            csvio::write_s21(&out, &pipeline::stage_measure(&channel, &run_cable)?)?;
            wrote(&out);
            if let Some(p) = channel_out {
                csvio::write_s21(&p, &channel)?;
                wrote(&p);
            }
        }
        Command::Calibrate {
            common,
            at,
            input,
            out,
            terms_out,
        } => {
            let cfg = load_config(&common)?;
            let sd = seeds(&cfg, &at);
            let (cal_cable, _) = pipeline::stage_cables(&cfg, &sd)?;
            let (terms, clean) =
                pipeline::stage_calibrate(&cfg, &csvio::read_s21(&input)?, &cal_cable, &sd)?;
            csvio::write_s21(&out, &clean)?;
            wrote(&out);
            if let Some(p) = terms_out {
                csvio::write_error_terms(&p, &terms)?;
                wrote(&p);
            }
        }
        Command::AnalyzeDoppler {
            common,
            input,
            threshold_db,
            out,
        } => {
            let cfg = load_config(&common)?;
            let s21 = csvio::read_s21(&input)?;
            let spec = pipeline::stage_spectrum(&cfg, &s21)?;
            let threshold = threshold_db.unwrap_or(cfg.analysis.threshold_db);
            let spread = doppler_spread(&spec, threshold, cfg.analysis.threshold_mode);
            println!("peak {:.2} Hz", spec.peak_frequency());
            println!("peak power {:.2} dB", spec.peak_power_db());
            println!(
                "spread {:.2} Hz to {:.2} Hz at {threshold} dB",
                spread.f_neg, spread.f_pos
            );
            if let Some(p) = out {
                csvio::write_spectrum(&p, &spec)?;
                wrote(&p);
            }
        }
        Command::FitPathloss { input, d0 } => {
            let points = csvio::read_path_loss_points(&input)?;
            print!("{}", pipeline::fit_report(&fit_path_loss(&points, d0)?));
        }
        Command::RunPipeline {
            common,
            out_dir,
            distances,
            sweeps,
            threshold_db,
            dry_run,
            parallel,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = distances {
                cfg.distances_ft = d;
            }
            if let Some(s) = sweeps {
                cfg.sweeps = s;
            }
            if let Some(t) = threshold_db {
                cfg.analysis.threshold_db = t;
            }
            if parallel == 0 {
                bail!("--parallel must be at least 1");
            }
            cfg.validate()?;
            if dry_run {
                print!("{}", pipeline::plan(&cfg));
                return Ok(true);
            }
            let result = pipeline::run_campaign(&cfg, parallel)?;
            let files = pipeline::write_artifacts(&cfg, &result, &out_dir)?;
            for row in result.spread_table() {
                println!(
                    "{:5.1} ft: {:8.2} Hz {:8.2} Hz",
                    row.distance_ft, row.f_neg, row.f_pos
                );
            }
            if let Some((neg, pos)) = result.average_spread() {
                println!("average: {neg:8.2} Hz {pos:8.2} Hz");
            }
            match &result.path_loss {
                Ok(f) => print!("{}", pipeline::fit_report(f)),
                Err(e) => println!("path-loss fit failed: {e}"),
            }
            for (d, e) in result.failures() {
                eprintln!("{d} ft failed: {e}");
            }
            println!("result_hash = {}", result.result_hash);
            println!("wrote {} files under {}", files.len(), out_dir.display());
            return Ok(result.all_succeeded());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
