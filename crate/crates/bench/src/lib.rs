//! Shared inputs for the benchmarks.

use nalgebra::Vector3;
use uavchan_core::channel::{synthesize_s21, ChannelParams, S21Series, SounderConfig};
use uavchan_core::config::CampaignConfig;

/// Small campaign: one distance, one sweep, default sweep length.
pub fn single_sweep_config() -> CampaignConfig {
    let mut cfg = CampaignConfig::default();
    cfg.distances_ft = vec![9.5];
    cfg.sweeps = 1;
    cfg
}

/// Default-length sweep of a receiver receding at 0.6 m/s.
pub fn receding_sweep() -> S21Series {
    let cfg = SounderConfig::default();
    let tx = Vector3::new(3.0, 0.0, 0.0);
    let path: Vec<_> = cfg
        .time_grid()
        .iter()
        .map(|t| Vector3::new(-0.6 * t, 0.0, 0.0))
        .collect();
    synthesize_s21(&path, &tx, &cfg, &ChannelParams::default(), 9.8, 1).expect("valid geometry")
}
