//! Campaign configuration.
//!
//! The file format is a flat key/value document split into `[sections]`.
//! Dimensioned values must carry a unit, which is converted to SI on read:
//!
//! ```text
//! [wind]
//! mean = 2, -1, 0 m/s
//! sigma2 = 0.53, 0.53, 0 m2/s2
//! L = 200, 200, 50 ft
//!
//! [campaign]
//! distances = 3.5 .. 23.5 step 2 ft
//! ```
//!
//! `#` starts a comment. Keys not present keep their defaults. The canonical
//! form written by [`CampaignConfig::to_text`] is SI throughout and parses
//! back to an identical value.

use nalgebra::Matrix3;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::analysis::{LengthPolicy, ThresholdMode, Window, IDLE_VARIANCE_FACTOR, IDLE_WINDOW};
use crate::arm::{ArmModel, TrackingConfig};
use crate::calibration::CableConfig;
use crate::channel::{ChannelParams, SounderConfig};
use crate::quadcopter::{HoverGains, HoverSimConfig, PidGains, QuadParams};
use crate::units::METERS_PER_FOOT;
use crate::wind::{DrydenParams, MeanWind};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: `{key}` needs a {expected} unit, got `{unit}`")]
    Unit {
        line: usize,
        key: String,
        unit: String,
        expected: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct WindConfig {
    pub mean: MeanWind,
    /// Turbulence variances (m²/s²).
    pub sigma2: [f64; 3],
    /// Turbulence scale lengths (m).
    pub scale_length: [f64; 3],
    /// Nominal airspeed (m/s).
    pub va0: f64,
    /// Turbulence sample period (s).
    pub dt: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        let mean = MeanWind::new(2.0, -1.0, 0.0);
        let d = DrydenParams::low_altitude(&mean, 0.01, 0);
        Self {
            mean,
            sigma2: [d.sigma_u2, d.sigma_v2, d.sigma_w2],
            scale_length: [d.l_u, d.l_v, d.l_w],
            va0: d.va0,
            dt: d.dt,
        }
    }
}

impl WindConfig {
    pub fn dryden(&self, seed: u64) -> DrydenParams {
        DrydenParams {
            sigma_u2: self.sigma2[0],
            sigma_v2: self.sigma2[1],
            sigma_w2: self.sigma2[2],
            l_u: self.scale_length[0],
            l_v: self.scale_length[1],
            l_w: self.scale_length[2],
            va0: self.va0,
            dt: self.dt,
            seed,
        }
    }

    /// Still air.
    pub fn calm() -> Self {
        Self {
            mean: MeanWind::new(0.0, 0.0, 0.0),
            sigma2: [0.0; 3],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub threshold_db: f64,
    pub threshold_mode: ThresholdMode,
    pub window: Window,
    pub length_policy: LengthPolicy,
    /// Velocity histogram bin width (m/s).
    pub velocity_bin: f64,
    pub idle_window: usize,
    pub idle_factor: f64,
    /// Reference distance of the path-loss fit (m).
    pub d0: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            threshold_db: -60.0,
            threshold_mode: ThresholdMode::Absolute,
            window: Window::Rectangular,
            length_policy: LengthPolicy::Strict,
            velocity_bin: 0.005,
            idle_window: IDLE_WINDOW,
            idle_factor: IDLE_VARIANCE_FACTOR,
            d0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub seed: u64,
    /// Tx–Rx separations (ft).
    pub distances_ft: Vec<f64>,
    pub sweeps: usize,
    pub wind: WindConfig,
    pub quad: QuadParams,
    pub gains: HoverGains,
    pub sim: HoverSimConfig,
    pub arm: ArmModel,
    pub tracking: TrackingConfig,
    pub sounder: SounderConfig,
    pub channel: ChannelParams,
    pub cable: CableConfig,
    pub analysis: AnalysisConfig,
}

pub fn default_distances_ft() -> Vec<f64> {
    (0..11).map(|i| 3.5 + 2.0 * i as f64).collect()
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            distances_ft: default_distances_ft(),
            sweeps: 3,
            wind: WindConfig::default(),
            quad: QuadParams::default(),
            gains: HoverGains::default(),
            sim: HoverSimConfig::default(),
            arm: ArmModel::sawyer_like(),
            tracking: TrackingConfig {
                idle_lead: 2.0,
                ..TrackingConfig::default()
            },
            sounder: SounderConfig::default(),
            channel: ChannelParams::default(),
            cable: CableConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Number,
    Length,
    Speed,
    Time,
    Frequency,
    Decibel,
    Angle,
    /// Angle kept in degrees.
    Degrees,
    Variance,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Number => "dimensionless",
            Dim::Length => "length (m, cm, mm, ft)",
            Dim::Speed => "speed (m/s, ft/s)",
            Dim::Time => "time (s, ms, us)",
            Dim::Frequency => "frequency (Hz, kHz, MHz, GHz)",
            Dim::Decibel => "decibel (dB)",
            Dim::Angle | Dim::Degrees => "angle (rad, deg)",
            Dim::Variance => "variance (m2/s2, ft2/s2)",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let f = METERS_PER_FOOT;
        match (self, unit) {
            (Dim::Number, "") => Some(1.0),
            (Dim::Length, "m") => Some(1.0),
            (Dim::Length, "cm") => Some(1e-2),
            (Dim::Length, "mm") => Some(1e-3),
            (Dim::Length, "ft") => Some(f),
            (Dim::Speed, "m/s") => Some(1.0),
            (Dim::Speed, "ft/s") => Some(f),
            (Dim::Time, "s") => Some(1.0),
            (Dim::Time, "ms") => Some(1e-3),
            (Dim::Time, "us") => Some(1e-6),
            (Dim::Frequency, "Hz") => Some(1.0),
            (Dim::Frequency, "kHz") => Some(1e3),
            (Dim::Frequency, "MHz") => Some(1e6),
            (Dim::Frequency, "GHz") => Some(1e9),
            (Dim::Decibel, "dB" | "dBi") => Some(1.0),
            (Dim::Angle, "rad") => Some(1.0),
            (Dim::Angle, "deg") => Some(std::f64::consts::PI / 180.0),
            (Dim::Degrees, "deg") => Some(1.0),
            (Dim::Degrees, "rad") => Some(180.0 / std::f64::consts::PI),
            (Dim::Variance, "m2/s2") => Some(1.0),
            (Dim::Variance, "ft2/s2") => Some(f * f),
            _ => None,
        }
    }
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    /// Splits a trailing unit token off the value.
    fn split_unit(&self) -> (&str, &str) {
        let v = self.value.trim();
        match v.rfind(|c: char| c.is_whitespace()) {
            Some(i) if v[i + 1..].starts_with(|c: char| c.is_ascii_alphabetic()) => {
                (v[..i].trim(), &v[i + 1..])
            }
            _ if v.starts_with(|c: char| c.is_ascii_alphabetic()) => ("", v),
            _ => (v, ""),
        }
    }

    fn numbers(&self, dim: Dim) -> Result<Vec<f64>> {
        let (body, unit) = self.split_unit();
        let scale = dim.scale(unit).ok_or_else(|| ConfigError::Unit {
            line: self.line,
            key: self.key.to_string(),
            unit: unit.to_string(),
            expected: dim.name(),
        })?;
        if body.is_empty() {
            return Err(self.err(format!("`{}` has no value", self.key)));
        }
        body.split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .map(|x| x * scale)
                    .map_err(|_| self.err(format!("`{t}` is not a number")))
            })
            .collect()
    }

    fn scalar(&self, dim: Dim) -> Result<f64> {
        match self.numbers(dim)?.as_slice() {
            [x] => Ok(*x),
            v => Err(self.err(format!("`{}` takes one value, got {}", self.key, v.len()))),
        }
    }

    fn triple(&self, dim: Dim) -> Result<[f64; 3]> {
        match self.numbers(dim)?.as_slice() {
            [a, b, c] => Ok([*a, *b, *c]),
            v => Err(self.err(format!(
                "`{}` takes three values, got {}",
                self.key,
                v.len()
            ))),
        }
    }

    fn integer(&self) -> Result<u64> {
        self.value.trim().parse::<u64>().map_err(|_| {
            self.err(format!(
                "`{}` is not a non-negative integer",
                self.value.trim()
            ))
        })
    }

    fn flag(&self) -> Result<bool> {
        match self.value.trim() {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.err(format!("`{v}` is not true/false"))),
        }
    }

    fn optional_db(&self) -> Result<Option<f64>> {
        if self.value.trim() == "none" {
            Ok(None)
        } else {
            self.scalar(Dim::Decibel).map(Some)
        }
    }

    fn gains(&self) -> Result<PidGains> {
        let [kp, ki, kd] = self.triple(Dim::Number)?;
        Ok(PidGains { kp, ki, kd })
    }

    fn pair(&self, dim: Dim) -> Result<(f64, f64)> {
        match self.numbers(dim)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            v => Err(self.err(format!("`{}` takes two values, got {}", self.key, v.len()))),
        }
    }

    /// `a .. b step s unit` or a comma list.
    fn distances_ft(&self) -> Result<Vec<f64>> {
        let (body, unit) = self.split_unit();
        let to_ft = Dim::Length.scale(unit).ok_or_else(|| ConfigError::Unit {
            line: self.line,
            key: self.key.to_string(),
            unit: unit.to_string(),
            expected: Dim::Length.name(),
        })? / METERS_PER_FOOT;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| self.err(format!("`{}` is not a number", t.trim())))
        };
        let ft: Vec<f64> = if let Some((a, rest)) = body.split_once("..") {
            let (b, s) = rest
                .split_once("step")
                .ok_or_else(|| self.err("range needs `step`"))?;
            let (a, b, s) = (num(a)?, num(b)?, num(s)?);
            if !(s > 0.0) || b < a {
                return Err(self.err("range must ascend with a positive step"));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize;
            (0..=n).map(|i| a + s * i as f64).collect()
        } else {
            body.split(',').map(num).collect::<Result<_>>()?
        };
        Ok(ft
            .into_iter()
            .map(|x| if unit == "ft" { x } else { x * to_ft })
            .collect())
    }

    fn word<'a>(&self, options: &[&'a str]) -> Result<&'a str> {
        let v = self.value.trim();
        options
            .iter()
            .find(|o| **o == v)
            .copied()
            .ok_or_else(|| self.err(format!("`{v}` is not one of {}", options.join(", "))))
    }
}

fn to_usize(e: &Entry, x: u64) -> Result<usize> {
    usize::try_from(x).map_err(|_| e.err("value too large"))
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(s) = content.strip_prefix('[') {
                let name = s.strip_suffix(']').ok_or(ConfigError::Parse {
                    line,
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Parse {
                line,
                message: "expected `key = value`".into(),
            })?;
            let e = Entry {
                line,
                key: key.trim(),
                value: value.trim(),
            };
            cfg.apply(&section, &e)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, e: &Entry) -> Result<()> {
        match (section, e.key) {
            ("campaign", "seed") => self.seed = e.integer()?,
            ("campaign", "distances") => self.distances_ft = e.distances_ft()?,
            ("campaign", "sweeps") => self.sweeps = to_usize(e, e.integer()?)?,

            ("wind", "mean") => {
                let [u, v, w] = e.triple(Dim::Speed)?;
                self.wind.mean = MeanWind::new(u, v, w);
            }
            ("wind", "sigma2") => self.wind.sigma2 = e.triple(Dim::Variance)?,
            ("wind", "L") => self.wind.scale_length = e.triple(Dim::Length)?,
            ("wind", "va0") => self.wind.va0 = e.scalar(Dim::Speed)?,
            ("wind", "dt") => self.wind.dt = e.scalar(Dim::Time)?,

            ("quad", "mass") => self.quad.mass = e.scalar(Dim::Number)?,
            ("quad", "inertia") => {
                [self.quad.jx, self.quad.jy, self.quad.jz] = e.triple(Dim::Number)?;
            }
            ("quad", "drag") => {
                let [a, b, c] = e.triple(Dim::Number)?;
                self.quad.cd = Matrix3::from_diagonal(&nalgebra::Vector3::new(a, b, c));
            }
            ("quad", "g") => self.quad.g = e.scalar(Dim::Number)?,
            ("quad", "step") => self.sim.step = e.scalar(Dim::Time)?,
            ("quad", "export_dt") => self.sim.export_dt = e.scalar(Dim::Time)?,
            ("quad", "warmup") => self.sim.warmup = e.scalar(Dim::Time)?,
            ("quad", "horizontal") => self.gains.horizontal = e.gains()?,
            ("quad", "vertical") => self.gains.vertical = e.gains()?,
            ("quad", "attitude") => self.gains.attitude = e.gains()?,
            ("quad", "yaw") => self.gains.yaw = e.gains()?,
            ("quad", "max_tilt") => self.gains.max_tilt = e.scalar(Dim::Angle)?,
            ("quad", "max_thrust_ratio") => self.gains.max_thrust_ratio = e.scalar(Dim::Number)?,
            ("quad", "max_moment") => self.gains.max_moment = e.scalar(Dim::Number)?,
            ("quad", "integral_limit") => self.gains.integral_limit = e.scalar(Dim::Number)?,
            ("quad", "integral_band") => self.gains.integral_band = e.scalar(Dim::Length)?,

            ("arm", "speed_cap") => self.arm.speed_cap = e.scalar(Dim::Speed)?,
            ("arm", "damping") => self.arm.lambda_dls = e.scalar(Dim::Number)?,
            ("arm", "kp") => self.tracking.kp = e.scalar(Dim::Number)?,
            ("arm", "kr") => self.tracking.kr = e.scalar(Dim::Number)?,
            ("arm", "tick") => self.tracking.tick = e.scalar(Dim::Time)?,
            ("arm", "scale") => self.tracking.scale = e.scalar(Dim::Number)?,
            ("arm", "track_orientation") => self.tracking.track_orientation = e.flag()?,
            ("arm", "idle_lead") => self.tracking.idle_lead = e.scalar(Dim::Time)?,
            ("arm", "workspace_tolerance") => {
                self.tracking.workspace_tolerance = e.scalar(Dim::Length)?
            }

            ("sounder", "f_c") => self.sounder.f_c = e.scalar(Dim::Frequency)?,
            ("sounder", "n_points") => self.sounder.n_points = to_usize(e, e.integer()?)?,
            ("sounder", "ts") => self.sounder.ts = e.scalar(Dim::Time)?,
            ("sounder", "if_bandwidth") => self.sounder.if_bandwidth = e.scalar(Dim::Frequency)?,
            ("sounder", "noise_floor") => self.sounder.noise_floor_db = e.optional_db()?,

            ("channel", "pg_d0") => self.channel.pg_d0_db = e.scalar(Dim::Decibel)?,
            ("channel", "n") => self.channel.n_exp = e.scalar(Dim::Number)?,
            ("channel", "shadow_sigma") => self.channel.shadow_sigma_db = e.scalar(Dim::Decibel)?,
            ("channel", "phi_0") => self.channel.phi_0 = e.scalar(Dim::Angle)?,
            ("channel", "d0") => self.channel.d0 = e.scalar(Dim::Length)?,

            ("cable", "insertion_loss") => self.cable.insertion_loss_db = e.scalar(Dim::Decibel)?,
            ("cable", "phase") => self.cable.electrical_phase_deg = e.scalar(Dim::Degrees)?,
            ("cable", "phase_wander") => self.cable.phase_wander_deg = e.scalar(Dim::Degrees)?,
            ("cable", "mag_wander") => self.cable.mag_wander_db = e.scalar(Dim::Decibel)?,
            ("cable", "wander_time_constant") => {
                self.cable.wander_time_constant = e.scalar(Dim::Time)?
            }
            ("cable", "reflection") => self.cable.reflection_mag = e.scalar(Dim::Number)?,
            ("cable", "run_phase_offset") => {
                self.cable.run_phase_offset_deg = e.pair(Dim::Degrees)?
            }
            ("cable", "run_flex_loss") => self.cable.run_flex_loss_db = e.pair(Dim::Decibel)?,
            ("cable", "sol_noise") => self.cable.sol_noise_db = e.optional_db()?,

            ("analysis", "threshold") => self.analysis.threshold_db = e.scalar(Dim::Decibel)?,
            ("analysis", "threshold_mode") => {
                self.analysis.threshold_mode = match e.word(&["absolute", "relative"])? {
                    "absolute" => ThresholdMode::Absolute,
                    _ => ThresholdMode::RelativeToPeak,
                }
            }
            ("analysis", "window") => {
                self.analysis.window = match e.word(&["rectangular", "hann"])? {
                    "hann" => Window::Hann,
                    _ => Window::Rectangular,
                }
            }
            ("analysis", "length_policy") => {
                self.analysis.length_policy = match e.word(&["strict", "zero-pad"])? {
                    "zero-pad" => LengthPolicy::ZeroPad,
                    _ => LengthPolicy::Strict,
                }
            }
            ("analysis", "velocity_bin") => self.analysis.velocity_bin = e.scalar(Dim::Speed)?,
            ("analysis", "idle_window") => self.analysis.idle_window = to_usize(e, e.integer()?)?,
            ("analysis", "idle_factor") => self.analysis.idle_factor = e.scalar(Dim::Number)?,
            ("analysis", "d0") => self.analysis.d0 = e.scalar(Dim::Length)?,

            _ => {
                return Err(ConfigError::UnknownKey {
                    line: e.line,
                    section: section.to_string(),
                    key: e.key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.distances_ft.is_empty() {
            return bad("distance list is empty".into());
        }
        if self
            .distances_ft
            .iter()
            .any(|d| !(*d > 0.0) || !d.is_finite())
        {
            return bad("distances must be positive".into());
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        self.wind
            .dryden(0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.quad
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.arm
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sounder
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.channel
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.cable
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let s = &self.sim;
        if !(s.step > 0.0 && s.export_dt >= s.step && s.warmup >= 0.0) {
            return bad(
                "quad step, export_dt and warmup must satisfy 0 < step <= export_dt".into(),
            );
        }
        let t = &self.tracking;
        if !(t.tick > 0.0
            && t.idle_lead >= 0.0
            && t.workspace_tolerance > 0.0
            && t.scale.is_finite())
        {
            return bad("arm tracking parameters out of range".into());
        }
        let a = &self.analysis;
        if !(a.velocity_bin > 0.0 && a.idle_window >= 2 && a.idle_factor > 0.0 && a.d0 > 0.0) {
            return bad("analysis parameters out of range".into());
        }
        Ok(())
    }

    /// Canonical SI text; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let t3 = |v: [f64; 3]| format!("{:?}, {:?}, {:?}", v[0], v[1], v[2]);
        let pid = |g: &PidGains| t3([g.kp, g.ki, g.kd]);
        let db = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:?} dB"));
        let dist = self
            .distances_ft
            .iter()
            .map(|d| format!("{d:?}"))
            .collect::<Vec<_>>()
            .join(", ");
        let w = &self.wind;
        let q = &self.quad;
        let g = &self.gains;
        let t = &self.tracking;
        let so = &self.sounder;
        let c = &self.channel;
        let cb = &self.cable;
        let a = &self.analysis;
        let _ = writeln!(
            s,
            "[campaign]\nseed = {}\ndistances = {dist} ft\nsweeps = {}\n",
            self.seed, self.sweeps
        );
        let _ = writeln!(
            s,
            "[wind]\nmean = {} m/s\nsigma2 = {} m2/s2\nL = {} m\nva0 = {:?} m/s\ndt = {:?} s\n",
            t3([w.mean.u_bar, w.mean.v_bar, w.mean.w_bar]),
            t3(w.sigma2),
            t3(w.scale_length),
            w.va0,
            w.dt
        );
        let _ = writeln!(
            s,
            "[quad]\nmass = {:?}\ninertia = {}\ndrag = {}\ng = {:?}\nstep = {:?} s\nexport_dt = {:?} s\nwarmup = {:?} s\n\
             horizontal = {}\nvertical = {}\nattitude = {}\nyaw = {}\nmax_tilt = {:?} rad\n\
             max_thrust_ratio = {:?}\nmax_moment = {:?}\nintegral_limit = {:?}\nintegral_band = {:?} m\n",
            q.mass,
            t3([q.jx, q.jy, q.jz]),
            t3([q.cd[(0, 0)], q.cd[(1, 1)], q.cd[(2, 2)]]),
            q.g,
            self.sim.step,
            self.sim.export_dt,
            self.sim.warmup,
            pid(&g.horizontal),
            pid(&g.vertical),
            pid(&g.attitude),
            pid(&g.yaw),
            g.max_tilt,
            g.max_thrust_ratio,
            g.max_moment,
            g.integral_limit,
            g.integral_band
        );
        let _ = writeln!(
            s,
            "[arm]\nspeed_cap = {:?} m/s\ndamping = {:?}\nkp = {:?}\nkr = {:?}\ntick = {:?} s\nscale = {:?}\n\
             track_orientation = {}\nidle_lead = {:?} s\nworkspace_tolerance = {:?} m\n",
            self.arm.speed_cap,
            self.arm.lambda_dls,
            t.kp,
            t.kr,
            t.tick,
            t.scale,
            t.track_orientation,
            t.idle_lead,
            t.workspace_tolerance
        );
        let _ = writeln!(
            s,
            "[sounder]\nf_c = {:?} Hz\nn_points = {}\nts = {:?} s\nif_bandwidth = {:?} Hz\nnoise_floor = {}\n",
            so.f_c,
            so.n_points,
            so.ts,
            so.if_bandwidth,
            db(so.noise_floor_db)
        );
        let _ = writeln!(
            s,
            "[channel]\npg_d0 = {:?} dB\nn = {:?}\nshadow_sigma = {:?} dB\nphi_0 = {:?} rad\nd0 = {:?} m\n",
            c.pg_d0_db, c.n_exp, c.shadow_sigma_db, c.phi_0, c.d0
        );
        let _ = writeln!(
            s,
            "[cable]\ninsertion_loss = {:?} dB\nphase = {:?} deg\nphase_wander = {:?} deg\nmag_wander = {:?} dB\n\
             wander_time_constant = {:?} s\nreflection = {:?}\nrun_phase_offset = {:?}, {:?} deg\n\
             run_flex_loss = {:?}, {:?} dB\nsol_noise = {}\n",
            cb.insertion_loss_db,
            cb.electrical_phase_deg,
            cb.phase_wander_deg,
            cb.mag_wander_db,
            cb.wander_time_constant,
            cb.reflection_mag,
            cb.run_phase_offset_deg.0,
            cb.run_phase_offset_deg.1,
            cb.run_flex_loss_db.0,
            cb.run_flex_loss_db.1,
            db(cb.sol_noise_db)
        );
        let _ = write!(
            s,
            "[analysis]\nthreshold = {:?} dB\nthreshold_mode = {}\nwindow = {}\nlength_policy = {}\n\
             velocity_bin = {:?} m/s\nidle_window = {}\nidle_factor = {:?}\nd0 = {:?} m\n",
            a.threshold_db,
            match a.threshold_mode {
                ThresholdMode::Absolute => "absolute",
                ThresholdMode::RelativeToPeak => "relative",
            },
            match a.window {
                Window::Rectangular => "rectangular",
                Window::Hann => "hann",
            },
            match a.length_policy {
                LengthPolicy::Strict => "strict",
                LengthPolicy::ZeroPad => "zero-pad",
            },
            a.velocity_bin,
            a.idle_window,
            a.idle_factor,
            a.d0
        );
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
