//! End-to-end campaign: wind → hover → arm → channel → cable → calibration →
//! analysis, for every distance × sweep.
//!
//! Each stage is a public function so the command-line tools can run them
//! one at a time through files. All randomness derives from the campaign
//! seed through [`crate::seed::derive_seed`], so a campaign is reproducible
//! regardless of thread count.

use nalgebra::Vector3;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{
    self, approach_velocities, detect_idle, doppler_spread, fit_path_loss, overlay_theoretical,
    velocity_pdf, DopplerSpectrum, DopplerSpread, Overlay, PathLossFit, SpectrumOptions,
    VelocityPdf,
};
use crate::arm::{forward_kinematics, track_trajectory, TrackingResult};
use crate::calibration::{
    deembed, embed_cable, measure_standards, solve_sol, transmission_from_terms, CableModel,
    ErrorTerms,
};
use crate::channel::{resample_path, synthesize_s21, ChannelParams, S21Series};
use crate::config::CampaignConfig;
use crate::csvio::{self, MotionLog, SpreadRow};
use crate::quadcopter::{simulate_hover, Trajectory, Waypoint};
use crate::seed::{derive_seed, Stage};
use crate::units::ft_to_m;
use crate::wind::{dryden_wind, TurbulenceSeries};
use crate::Error;

type Result<T> = std::result::Result<T, Error>;

/// Seeds of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepSeeds {
    pub wind: u64,
    pub channel: u64,
    /// Shared by all sweeps at a distance.
    pub shadowing: u64,
    pub cable: u64,
    pub cable_run: u64,
    pub sol: u64,
}

impl SweepSeeds {
    pub fn derive(campaign_seed: u64, distance: usize, sweep: usize) -> Self {
        let s = |stage| derive_seed(campaign_seed, stage, distance, sweep);
        Self {
            wind: s(Stage::Wind),
            channel: s(Stage::Channel),
            shadowing: derive_seed(campaign_seed, Stage::Shadowing, distance, 0),
            cable: s(Stage::Cable),
            cable_run: s(Stage::CableRun),
            sol: s(Stage::SolNoise),
        }
    }
}

/// Trajectory length needed so the arm covers a whole sweep (s).
pub fn motion_duration(cfg: &CampaignConfig) -> f64 {
    let sweep = cfg.sounder.sweep_duration();
    ((sweep - cfg.tracking.idle_lead).max(0.0) + 1.0).ceil()
}

/// Turbulence long enough for warm-up plus `duration` of export.
pub fn stage_wind(cfg: &CampaignConfig, seed: u64, duration: f64) -> Result<TurbulenceSeries> {
    let dt = cfg.wind.dt;
    let n = ((cfg.sim.warmup + duration) / dt).ceil() as usize + 2;
    Ok(dryden_wind(&cfg.wind.dryden(seed), &cfg.wind.mean, n)?)
}

pub fn stage_hover(
    cfg: &CampaignConfig,
    wind: &TurbulenceSeries,
    duration: f64,
) -> Result<Trajectory> {
    let wp = Waypoint::new(Vector3::zeros(), 0.0);
    Ok(simulate_hover(
        &cfg.quad, &cfg.gains, wind, &wp, duration, &cfg.sim,
    )?)
}

pub fn stage_arm(cfg: &CampaignConfig, traj: &Trajectory) -> Result<TrackingResult> {
    Ok(track_trajectory(&cfg.arm, traj, &cfg.tracking)?)
}

/// Transmitter location for a nominal separation: the receiver rest point
/// shifted along the base x axis.
pub fn tx_position(cfg: &CampaignConfig, distance_ft: f64) -> Result<Vector3<f64>> {
    let rest = forward_kinematics(&cfg.arm, &cfg.tracking.q_start)?.position;
    Ok(rest + Vector3::new(ft_to_m(distance_ft), 0.0, 0.0))
}

/// Receiver path resampled on the sounder time grid.
pub fn rx_path(cfg: &CampaignConfig, motion: &MotionLog) -> Result<Vec<Vector3<f64>>> {
    Ok(resample_path(
        &motion.t,
        &motion.position,
        &cfg.sounder.time_grid(),
    )?)
}

/// Channel-only sweep: line of sight with the per-distance shadowing draw.
pub fn stage_channel(
    cfg: &CampaignConfig,
    path: &[Vector3<f64>],
    distance_ft: f64,
    seeds: &SweepSeeds,
) -> Result<S21Series> {
    let shadow = if cfg.channel.shadow_sigma_db > 0.0 {
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::seed::rng(seeds.shadowing, 0);
        Normal::new(0.0, cfg.channel.shadow_sigma_db)
            .map_err(|e| crate::channel::ChannelError::InvalidParameter(e.to_string()))?
            .sample(&mut rng)
    } else {
        0.0
    };
    let ch = ChannelParams {
        pg_d0_db: cfg.channel.pg_d0_db + shadow,
        shadow_sigma_db: 0.0,
        ..cfg.channel.clone()
    };
    let tx = tx_position(cfg, distance_ft)?;
    Ok(synthesize_s21(
        path,
        &tx,
        &cfg.sounder,
        &ch,
        distance_ft,
        seeds.channel,
    )?)
}

/// Cable used while characterizing, and the cable of the measurement run.
pub fn stage_cables(cfg: &CampaignConfig, seeds: &SweepSeeds) -> Result<(CableModel, CableModel)> {
    let base = CableModel::generate(
        &cfg.cable,
        cfg.sounder.n_points,
        cfg.sounder.ts,
        seeds.cable,
    )?;
    let run = base.repeated_run(&cfg.cable, seeds.cable_run);
    Ok((base, run))
}

/// Measured sweep through the moving cable.
pub fn stage_measure(channel: &S21Series, run_cable: &CableModel) -> Result<S21Series> {
    Ok(embed_cable(channel, run_cable)?)
}

/// Characterizes the cable with short/open/load and removes it.
pub fn stage_calibrate(
    cfg: &CampaignConfig,
    measured: &S21Series,
    cal_cable: &CableModel,
    seeds: &SweepSeeds,
) -> Result<(ErrorTerms, S21Series)> {
    let m = measure_standards(cal_cable, cfg.cable.sol_noise_db, seeds.sol);
    let terms = solve_sol(&m.short, &m.open, &m.load, m.ts)?;
    let t = transmission_from_terms(&terms, cfg.cable.nominal_s21());
    let clean = deembed(measured, &t)?;
    Ok((terms, clean))
}

pub fn stage_spectrum(cfg: &CampaignConfig, s21: &S21Series) -> Result<DopplerSpectrum> {
    let opts = SpectrumOptions {
        policy: cfg.analysis.length_policy,
        window: cfg.analysis.window,
    };
    Ok(analysis::doppler_spectrum_with(s21, &opts)?)
}

/// Everything produced for one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep: usize,
    pub seeds: SweepSeeds,
    pub measured: S21Series,
    pub calibrated: S21Series,
    pub spectrum: DopplerSpectrum,
    pub spread: DopplerSpread,
    pub peak_hz: f64,
    /// Speed toward the transmitter on the sounder grid (m/s).
    pub approach_speed: Vec<f64>,
    /// Peak tool speed of the arm (m/s).
    pub arm_peak_speed: f64,
}

pub fn run_sweep(
    cfg: &CampaignConfig,
    d_index: usize,
    distance_ft: f64,
    sweep: usize,
) -> Result<SweepResult> {
    let seeds = SweepSeeds::derive(cfg.seed, d_index, sweep);
    let duration = motion_duration(cfg);
    let wind = stage_wind(cfg, seeds.wind, duration)?;
    let traj = stage_hover(cfg, &wind, duration)?;
    let arm = stage_arm(cfg, &traj)?;
    let motion = MotionLog::from_tracking(&arm);
    let path = rx_path(cfg, &motion)?;
    let channel = stage_channel(cfg, &path, distance_ft, &seeds)?;
    let (cal_cable, run_cable) = stage_cables(cfg, &seeds)?;
    let measured = stage_measure(&channel, &run_cable)?;
    let (_, calibrated) = stage_calibrate(cfg, &measured, &cal_cable, &seeds)?;
    let spectrum = stage_spectrum(cfg, &calibrated)?;
    let spread = doppler_spread(
        &spectrum,
        cfg.analysis.threshold_db,
        cfg.analysis.threshold_mode,
    );
    let tx = tx_position(cfg, distance_ft)?;
    Ok(SweepResult {
        sweep,
        seeds,
        peak_hz: spectrum.peak_frequency(),
        approach_speed: approach_velocities(&cfg.sounder.time_grid(), &path, &tx),
        arm_peak_speed: arm.peak_speed(),
        measured,
        calibrated,
        spectrum,
        spread,
    })
}

/// Results at one distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceResult {
    pub distance_ft: f64,
    pub sweeps: Vec<SweepResult>,
    /// Widest extent over the sweeps.
    pub spread: DopplerSpread,
    /// Mean idle-segment path gain over the appended sweeps (dB).
    pub idle_pg_db: f64,
    pub idle_runs: usize,
    pub pdf: VelocityPdf,
    pub overlay: Overlay,
}

pub fn run_distance(
    cfg: &CampaignConfig,
    d_index: usize,
    distance_ft: f64,
) -> Result<DistanceResult> {
    let sweeps = (0..cfg.sweeps)
        .map(|k| run_sweep(cfg, d_index, distance_ft, k))
        .collect::<Result<Vec<_>>>()?;
    let spread = sweeps.iter().fold(
        DopplerSpread {
            f_neg: 0.0,
            f_pos: 0.0,
            threshold_db: sweeps[0].spread.threshold_db,
        },
        |acc, s| DopplerSpread {
            f_neg: acc.f_neg.min(s.spread.f_neg),
            f_pos: acc.f_pos.max(s.spread.f_pos),
            threshold_db: acc.threshold_db.max(s.spread.threshold_db),
        },
    );
    let appended: Vec<_> = sweeps
        .iter()
        .flat_map(|s| s.calibrated.samples.iter().copied())
        .collect();
    let noise = cfg
        .sounder
        .noise_power()
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    let idle = detect_idle(
        &appended,
        noise,
        cfg.analysis.idle_window,
        cfg.analysis.idle_factor,
    )?;
    let speeds: Vec<f64> = sweeps
        .iter()
        .flat_map(|s| s.approach_speed.iter().copied())
        .collect();
    let pdf = velocity_pdf(&speeds, cfg.analysis.velocity_bin)?;
    let overlay = overlay_theoretical(&sweeps[0].spectrum, &pdf, cfg.sounder.f_c)?;
    Ok(DistanceResult {
        distance_ft,
        spread,
        idle_pg_db: idle.mean_pg_db,
        idle_runs: idle.runs.len(),
        pdf,
        overlay,
        sweeps,
    })
}

/// A distance that either completed or failed with a diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOutcome {
    pub index: usize,
    pub distance_ft: f64,
    pub result: std::result::Result<DistanceResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub seed: u64,
    pub config_hash: String,
    pub distances: Vec<DistanceOutcome>,
    pub path_loss: std::result::Result<PathLossFit, String>,
    /// SHA-256 over every numeric output.
    pub result_hash: String,
}

impl CampaignResult {
    pub fn succeeded(&self) -> impl Iterator<Item = &DistanceResult> {
        self.distances.iter().filter_map(|d| d.result.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (f64, &str)> {
        self.distances
            .iter()
            .filter_map(|d| d.result.as_ref().err().map(|e| (d.distance_ft, e.as_str())))
    }

    pub fn all_succeeded(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn spread_table(&self) -> Vec<SpreadRow> {
        self.succeeded()
            .map(|d| SpreadRow {
                distance_ft: d.distance_ft,
                f_neg: d.spread.f_neg,
                f_pos: d.spread.f_pos,
            })
            .collect()
    }

    /// Mean of the per-distance (f_neg, f_pos).
    pub fn average_spread(&self) -> Option<(f64, f64)> {
        let rows = self.spread_table();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|r| r.f_neg).sum::<f64>() / n,
            rows.iter().map(|r| r.f_pos).sum::<f64>() / n,
        ))
    }

    /// (distance m, idle path gain dB) per completed distance.
    pub fn path_loss_points(&self) -> Vec<(f64, f64)> {
        self.succeeded()
            .map(|d| (ft_to_m(d.distance_ft), d.idle_pg_db))
            .collect()
    }
}

fn hash_outputs(
    distances: &[DistanceOutcome],
    fit: &std::result::Result<PathLossFit, String>,
) -> String {
    let mut h = Sha256::new();
    let mut put = |x: f64| h.update(x.to_bits().to_le_bytes());
    for d in distances {
        put(d.distance_ft);
        match &d.result {
            Ok(r) => {
                for s in &r.sweeps {
                    for z in &s.calibrated.samples {
                        put(z.re);
                        put(z.im);
                    }
                    put(s.spread.f_neg);
                    put(s.spread.f_pos);
                    put(s.peak_hz);
                }
                put(r.idle_pg_db);
            }
            Err(_) => put(f64::NAN),
        }
    }
    if let Ok(f) = fit {
        put(f.n_exp);
        put(f.pg_d0_db);
        put(f.sigma_db);
    }
    hex::encode(h.finalize())
}

/// Runs every distance; `parallel` selects the rayon pool size (1 = serial).
pub fn run_campaign(cfg: &CampaignConfig, parallel: usize) -> Result<CampaignResult> {
    cfg.validate()?;
    let job = |(i, d): (usize, &f64)| DistanceOutcome {
        index: i,
        distance_ft: *d,
        result: run_distance(cfg, i, *d).map_err(|e| e.to_string()),
    };
    let distances: Vec<DistanceOutcome> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| crate::config::ConfigError::Invalid(e.to_string()))?;
        pool.install(|| cfg.distances_ft.par_iter().enumerate().map(job).collect())
    } else {
        cfg.distances_ft.iter().enumerate().map(job).collect()
    };
    let points: Vec<(f64, f64)> = distances
        .iter()
        .filter_map(|d| {
            d.result
                .as_ref()
                .ok()
                .map(|r| (ft_to_m(r.distance_ft), r.idle_pg_db))
        })
        .collect();
    let path_loss = fit_path_loss(&points, cfg.analysis.d0).map_err(|e| e.to_string());
    let result_hash = hash_outputs(&distances, &path_loss);
    Ok(CampaignResult {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        distances,
        path_loss,
        result_hash,
    })
}

/// Structured text for a path-loss fit.
pub fn fit_report(fit: &PathLossFit) -> String {
    format!(
        "n = {:.6}\nintercept_db = {:.6}\nsigma_db = {:.6}\nr2 = {:.6}\npoints = {}\n",
        fit.n_exp, fit.pg_d0_db, fit.sigma_db, fit.r2, fit.n_points
    )
}

fn distance_dir(d: f64) -> String {
    format!("d{:05.1}ft", d)
}

/// Human-readable plan for a dry run.
pub fn plan(cfg: &CampaignConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_hash = {}", cfg.hash());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(
        s,
        "sweep = {} points x {} s = {:.3} s, motion = {} s after {} s warm-up",
        cfg.sounder.n_points,
        cfg.sounder.ts,
        cfg.sounder.sweep_duration(),
        motion_duration(cfg),
        cfg.sim.warmup
    );
    for (i, d) in cfg.distances_ft.iter().enumerate() {
        for k in 0..cfg.sweeps {
            let sd = SweepSeeds::derive(cfg.seed, i, k);
            let _ = writeln!(
                s,
                "{} sweep {k}: wind {:016x} channel {:016x} cable {:016x}",
                distance_dir(*d),
                sd.wind,
                sd.channel,
                sd.cable
            );
        }
    }
    s
}

/// Writes every artifact below `out_dir` and returns the written paths.
pub fn write_artifacts(
    cfg: &CampaignConfig,
    result: &CampaignResult,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |p: PathBuf| {
        written.push(p.clone());
        p
    };
    for d in result.succeeded() {
        let dir = out_dir.join(distance_dir(d.distance_ft));
        for s in &d.sweeps {
            let k = s.sweep;
            csvio::write_s21(
                &put(dir.join(format!("sweep{k}_measured.csv"))),
                &s.measured,
            )?;
            csvio::write_s21(&put(dir.join(format!("sweep{k}_s21.csv"))), &s.calibrated)?;
            csvio::write_spectrum(
                &put(dir.join(format!("sweep{k}_spectrum.csv"))),
                &s.spectrum,
            )?;
        }
        csvio::write_velocity_pdf(&put(dir.join("velocity_pdf.csv")), &d.pdf)?;
        csvio::write_overlay(&put(dir.join("overlay.csv")), &d.overlay)?;
    }
    csvio::write_spread_table(
        &put(out_dir.join("spread_table.csv")),
        &result.spread_table(),
    )?;
    let sweep_rows = result.succeeded().flat_map(|d| {
        d.sweeps.iter().map(move |s| {
            vec![
                d.distance_ft,
                s.sweep as f64,
                s.spread.f_neg,
                s.spread.f_pos,
                s.peak_hz,
            ]
        })
    });
    csvio::write_table(
        &put(out_dir.join("spread_sweeps.csv")),
        &[],
        &["distance_ft", "sweep", "f_neg_hz", "f_pos_hz", "peak_hz"],
        sweep_rows,
    )?;
    csvio::write_path_loss_points(
        &put(out_dir.join("pathloss_points.csv")),
        &result.path_loss_points(),
    )?;
    let report = match &result.path_loss {
        Ok(f) => fit_report(f),
        Err(e) => format!("error = {e}\n"),
    };
    csvio::write_atomic(&put(out_dir.join("pathloss_fit.txt")), report.as_bytes())?;
    csvio::write_atomic(&put(out_dir.join("config.txt")), cfg.to_text().as_bytes())?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "config_hash = {}", result.config_hash);
    let _ = writeln!(manifest, "result_hash = {}", result.result_hash);
    let _ = writeln!(manifest, "seed = {}", result.seed);
    for d in &result.distances {
        match &d.result {
            Ok(r) => {
                for s in &r.sweeps {
                    let sd = s.seeds;
                    let _ = writeln!(
                        manifest,
                        "{} sweep {}: ok wind={} channel={} shadowing={} cable={} cable_run={} sol={}",
                        distance_dir(d.distance_ft),
                        s.sweep,
                        sd.wind,
                        sd.channel,
                        sd.shadowing,
                        sd.cable,
                        sd.cable_run,
                        sd.sol
                    );
                }
            }
            Err(e) => {
                let _ = writeln!(manifest, "{}: failed: {e}", distance_dir(d.distance_ft));
            }
        }
    }
    csvio::write_atomic(&put(out_dir.join("manifest.txt")), manifest.as_bytes())?;
    Ok(written)
}

/// Repeats one motion `runs` times through the moving cable, de-embeds each
/// run with a single characterization, and compares the result with the
/// noiseless channel.
pub fn repeatability_experiment(
    cfg: &CampaignConfig,
    distance_ft: f64,
    runs: usize,
) -> Result<crate::calibration::RepeatabilityBand> {
    let seeds = SweepSeeds::derive(cfg.seed, 0, 0);
    let duration = motion_duration(cfg);
    let wind = stage_wind(cfg, seeds.wind, duration)?;
    let traj = stage_hover(cfg, &wind, duration)?;
    let motion = MotionLog::from_tracking(&stage_arm(cfg, &traj)?);
    let path = rx_path(cfg, &motion)?;
    let mut quiet = cfg.clone();
    quiet.sounder.noise_floor_db = None;
    let reference = stage_channel(&quiet, &path, distance_ft, &seeds)?;
    let (cal_cable, _) = stage_cables(cfg, &seeds)?;
    let outputs = (0..runs)
        .map(|r| {
            let run_seeds = SweepSeeds::derive(cfg.seed, 0, r + 1);
            let channel = stage_channel(
                cfg,
                &path,
                distance_ft,
                &SweepSeeds {
                    shadowing: seeds.shadowing,
                    ..run_seeds
                },
            )?;
            let run_cable = cal_cable.repeated_run(&cfg.cable, run_seeds.cable_run);
            let measured = stage_measure(&channel, &run_cable)?;
            let (_, clean) = stage_calibrate(cfg, &measured, &cal_cable, &seeds)?;
            Ok(clean.samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::calibration::repeatability(
        &reference.samples,
        &outputs,
    )?)
}
