//! Emulation of UAV hover motion on a 7-DOF robotic arm and synthesis/analysis
//! of the 28 GHz CW channel sounding data the motion produces.
//!
//! The crate is organised along the measurement chain:
//!
//! * [`wind`]: Dryden turbulence filters and NED wind composition.
//! * [`quadcopter`]: 6-DOF quadcopter dynamics with a cascaded PID hover controller.
//! * [`arm`]: 7-DOF serial arm kinematics and pseudo-inverse joint velocity tracking.
//! * [`channel`]: single-path CW S21 synthesis from Tx/Rx geometry.
//! * [`calibration`]: moving-cable model, SOL error-term solve and de-embedding.
//! * [`analysis`]: Doppler spectrum/spread, velocity pdf overlays, idle detection, path-loss fit.
//! * [`pipeline`]: configuration, seed derivation, persistence and the campaign runner.

pub mod analysis;
pub mod arm;
pub mod calibration;
pub mod channel;
pub mod config;
pub mod csvio;
pub mod pipeline;
pub mod quadcopter;
pub mod seed;
pub mod units;
pub mod wind;

pub use num_complex::Complex64;

pub use analysis::{DopplerSpectrum, DopplerSpread, PathLossFit, VelocityPdf};
pub use arm::{ArmModel, ArmState, EndEffectorCommand};
pub use calibration::{CableModel, ErrorTerms};
pub use channel::{ChannelParams, S21Series, SounderConfig};
pub use config::CampaignConfig;
pub use pipeline::{run_campaign, CampaignResult};
pub use quadcopter::{ControlInput, QuadParams, QuadState, Trajectory};
pub use wind::{DigitalFilter, DrydenParams, MeanWind, TurbulenceSeries};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Top-level error, wrapping the per-stage error types.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Wind(#[from] wind::WindError),
    #[error(transparent)]
    Quad(#[from] quadcopter::QuadError),
    #[error(transparent)]
    Arm(#[from] arm::ArmError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Calibration(#[from] calibration::CalibrationError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Csv(#[from] csvio::CsvError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
