//! Unit conversions used at the configuration and reporting boundaries.
//! Everything inside the crate is SI.

pub const METERS_PER_FOOT: f64 = 0.3048;

pub fn ft_to_m(ft: f64) -> f64 {
    ft * METERS_PER_FOOT
}

pub fn m_to_ft(m: f64) -> f64 {
    m / METERS_PER_FOOT
}

/// Power ratio to dB.
pub fn pow_db(p: f64) -> f64 {
    10.0 * p.max(f64::MIN_POSITIVE).log10()
}

/// Amplitude ratio to dB.
pub fn amp_db(a: f64) -> f64 {
    20.0 * a.max(f64::MIN_POSITIVE).log10()
}

pub fn db_to_pow(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn db_to_amp(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Wavelength (m) of a carrier at `f_c` Hz.
pub fn wavelength(f_c: f64) -> f64 {
    crate::SPEED_OF_LIGHT / f_c
}

/// Free-space path gain (dB) between isotropic antennas at `d` meters.
pub fn friis_gain_db(f_c: f64, d: f64) -> f64 {
    amp_db(wavelength(f_c) / (4.0 * std::f64::consts::PI * d))
}
