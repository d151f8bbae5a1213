//! Moving-cable emulation and its removal.
//!
//! The receive cable flexes with the arm, so its transmission wanders in
//! phase and magnitude over the sweep. The cable is characterized on the time
//! grid by terminating it in short, open and load standards and solving the
//! one-port error model
//!
//! ```text
//! Γ_meas = e00 + e10e01·Γ / (1 − e11·Γ)
//! ```
//!
//! sample by sample. For a reciprocal cable seen from a calibrated port,
//! `e00 = S11`, `e11 = S22` and `e10e01 = S21²`, so the cable transmission is
//! the branch-continuous square root of `e10e01`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::channel::S21Series;
use crate::units::db_to_amp;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CalibrationError {
    #[error("series length {got} does not match cable grid length {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("degenerate standard measurements at sample {index}")]
    Degenerate { index: usize },
    #[error("cable transmission {magnitude:.3e} below division guard at sample {index}")]
    DivisionGuard { index: usize, magnitude: f64 },
    #[error("invalid calibration parameter: {0}")]
    InvalidParameter(String),
}

type Result<T> = std::result::Result<T, CalibrationError>;

/// Smallest cable transmission magnitude accepted by [`deembed`].
pub const DIVISION_GUARD: f64 = 1e-6;

/// Short, open and load reflection coefficients.
pub const SOL_STANDARDS: [Complex64; 3] = [
    Complex64::new(-1.0, 0.0),
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 0.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CableConfig {
    /// Static insertion loss (dB, positive).
    pub insertion_loss_db: f64,
    /// Static electrical phase of the transmission (deg).
    pub electrical_phase_deg: f64,
    /// Peak motion-induced phase excursion over a sweep (deg).
    pub phase_wander_deg: f64,
    /// Peak motion-induced magnitude excursion over a sweep (dB).
    pub mag_wander_db: f64,
    /// Time constant of the wander band limit (s).
    pub wander_time_constant: f64,
    /// Port reflection magnitude.
    pub reflection_mag: f64,
    /// Range of the run-to-run phase offset of a repeated motion (deg).
    pub run_phase_offset_deg: (f64, f64),
    /// Range of the run-to-run extra flex loss of a repeated motion (dB, positive).
    pub run_flex_loss_db: (f64, f64),
    /// Noise power (dB) on each standard measurement; `None` for ideal standards.
    pub sol_noise_db: Option<f64>,
}

impl Default for CableConfig {
    fn default() -> Self {
        Self {
            insertion_loss_db: 1.5,
            electrical_phase_deg: -35.0,
            phase_wander_deg: 4.0,
            mag_wander_db: 0.04,
            wander_time_constant: 0.5,
            reflection_mag: 0.05,
            run_phase_offset_deg: (-3.0, -0.2),
            run_flex_loss_db: (0.012, 0.028),
            sol_noise_db: Some(-80.0),
        }
    }
}

impl CableConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.insertion_loss_db >= 0.0
            && self.phase_wander_deg >= 0.0
            && self.mag_wander_db >= 0.0
            && self.wander_time_constant > 0.0
            && (0.0..1.0).contains(&self.reflection_mag)
            && self.run_phase_offset_deg.0 <= self.run_phase_offset_deg.1
            && self.run_flex_loss_db.0 <= self.run_flex_loss_db.1
            && self.run_flex_loss_db.0 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(CalibrationError::InvalidParameter(
                "cable configuration out of range".into(),
            ))
        }
    }

    /// Transmission of the cable at rest.
    pub fn nominal_s21(&self) -> Complex64 {
        Complex64::from_polar(
            db_to_amp(-self.insertion_loss_db),
            self.electrical_phase_deg.to_radians(),
        )
    }
}

/// Cable S-parameters on the sounder grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CableModel {
    pub seed: u64,
    pub ts: f64,
    pub s21: Vec<Complex64>,
    pub s11: Vec<Complex64>,
    pub s22: Vec<Complex64>,
}

/// Band-limited random walk of `n` samples starting at 0 with peak |x| = `peak`.
fn wander(rng: &mut impl Rng, n: usize, ts: f64, tau: f64, peak: f64) -> Vec<f64> {
    let alpha = (-ts / tau).exp();
    let mut walk = 0.0;
    let mut smooth = 0.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let step: f64 = StandardNormal.sample(rng);
        walk += step;
        smooth = alpha * smooth + (1.0 - alpha) * walk;
        out.push(smooth);
    }
    let max = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max > 0.0 && peak > 0.0 {
        out.iter_mut().for_each(|x| *x *= peak / max);
    } else {
        out.iter_mut().for_each(|x| *x = 0.0);
    }
    out
}

impl CableModel {
    /// Motion-driven cable response for one sweep.
    pub fn generate(cfg: &CableConfig, n: usize, ts: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if n == 0 || !(ts > 0.0) {
            return Err(CalibrationError::InvalidParameter(
                "empty cable grid".into(),
            ));
        }
        let mut rng = crate::seed::rng(seed, 0);
        let tau = cfg.wander_time_constant;
        let phase = wander(&mut rng, n, ts, tau, cfg.phase_wander_deg);
        let mag = wander(&mut rng, n, ts, tau, cfg.mag_wander_db);
        let refl_phase = wander(&mut rng, n, ts, tau, 10.0);
        let base = cfg.nominal_s21();
        let s21 = phase
            .iter()
            .zip(&mag)
            .map(|(p, m)| base * Complex64::from_polar(db_to_amp(*m), p.to_radians()))
            .collect();
        let theta11: f64 = rng.random::<f64>() * 2.0 * PI;
        let theta22: f64 = rng.random::<f64>() * 2.0 * PI;
        let refl = |theta: f64| -> Vec<Complex64> {
            refl_phase
                .iter()
                .map(|p| Complex64::from_polar(cfg.reflection_mag, theta + p.to_radians()))
                .collect()
        };
        Ok(Self {
            seed,
            ts,
            s21,
            s11: refl(theta11),
            s22: refl(theta22),
        })
    }

    /// A lossless cable with unit transmission.
    pub fn ideal(n: usize, ts: f64) -> Self {
        Self {
            seed: 0,
            ts,
            s21: vec![Complex64::new(1.0, 0.0); n],
            s11: vec![Complex64::new(0.0, 0.0); n],
            s22: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.s21.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s21.is_empty()
    }

    /// The same motion repeated: the cable follows the same wander plus a
    /// run-level phase offset and flex loss drawn from the configured ranges.
    pub fn repeated_run(&self, cfg: &CableConfig, run_seed: u64) -> Self {
        let mut rng = crate::seed::rng(run_seed, 0);
        let (p0, p1) = cfg.run_phase_offset_deg;
        let (l0, l1) = cfg.run_flex_loss_db;
        let phase = p0 + (p1 - p0) * rng.random::<f64>();
        let loss = l0 + (l1 - l0) * rng.random::<f64>();
        let factor = Complex64::from_polar(db_to_amp(-loss), phase.to_radians());
        Self {
            seed: run_seed,
            s21: self.s21.iter().map(|s| s * factor).collect(),
            ..self.clone()
        }
    }

    /// One-port error terms seen through the cable from a calibrated port.
    pub fn error_terms(&self) -> ErrorTerms {
        ErrorTerms {
            ts: self.ts,
            terms: (0..self.len())
                .map(|i| OnePortTerms {
                    e00: self.s11[i],
                    e11: self.s22[i],
                    e10e01: self.s21[i] * self.s21[i],
                })
                .collect(),
        }
    }
}

/// 3-term one-port error model at one time sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePortTerms {
    /// Directivity.
    pub e00: Complex64,
    /// Source match.
    pub e11: Complex64,
    /// Reflection tracking.
    pub e10e01: Complex64,
}

impl OnePortTerms {
    pub const IDEAL: OnePortTerms = OnePortTerms {
        e00: Complex64::new(0.0, 0.0),
        e11: Complex64::new(0.0, 0.0),
        e10e01: Complex64::new(1.0, 0.0),
    };

    /// Measured reflection for an actual reflection `gamma`.
    pub fn measure(&self, gamma: Complex64) -> Complex64 {
        self.e00 + self.e10e01 * gamma / (Complex64::new(1.0, 0.0) - self.e11 * gamma)
    }
}

/// Error terms over the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTerms {
    pub ts: f64,
    pub terms: Vec<OnePortTerms>,
}

impl ErrorTerms {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Raw reflections of the three standards over time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolMeasurements {
    pub ts: f64,
    pub short: Vec<Complex64>,
    pub open: Vec<Complex64>,
    pub load: Vec<Complex64>,
}

/// Measures the short, open and load standards through `cable`, adding
/// complex noise of `noise_db` power when given.
pub fn measure_standards(cable: &CableModel, noise_db: Option<f64>, seed: u64) -> SolMeasurements {
    let terms = cable.error_terms();
    let mut rng = crate::seed::rng(seed, 0);
    let sd = noise_db.map(|db| (crate::units::db_to_pow(db) / 2.0).sqrt());
    let mut noisy = |x: Complex64| match sd {
        Some(sd) => {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            x + Complex64::new(sd * re, sd * im)
        }
        None => x,
    };
    let mut out = SolMeasurements {
        ts: cable.ts,
        short: Vec::with_capacity(cable.len()),
        open: Vec::with_capacity(cable.len()),
        load: Vec::with_capacity(cable.len()),
    };
    for t in &terms.terms {
        out.short.push(noisy(t.measure(SOL_STANDARDS[0])));
        out.open.push(noisy(t.measure(SOL_STANDARDS[1])));
        out.load.push(noisy(t.measure(SOL_STANDARDS[2])));
    }
    out
}

/// Solves the 3-term model from three standards of known reflection.
///
/// Rewriting the model as `Γ_m = e00 + Γ·Γ_m·e11 + Γ·Δ` with
/// `Δ = e10e01 − e00·e11` gives a linear system in `(e00, e11, Δ)`.
pub fn solve_one_port(
    standards: &[Complex64; 3],
    measured: &[Complex64; 3],
) -> Option<OnePortTerms> {
    let one = Complex64::new(1.0, 0.0);
    let a = Matrix3::from_fn(|r, c| match c {
        0 => one,
        1 => standards[r] * measured[r],
        _ => standards[r],
    });
    let scale = measured.iter().map(|m| m.norm()).fold(1.0, f64::max);
    let det = a.determinant();
    if det.norm() <= 1e-12 * scale * scale {
        return None;
    }
    let x = a.lu().solve(&Vector3::from_column_slice(measured))?;
    let (e00, e11, delta) = (x[0], x[1], x[2]);
    Some(OnePortTerms {
        e00,
        e11,
        e10e01: delta + e00 * e11,
    })
}

/// Per-sample short–open–load solve over time-swept measurements.
pub fn solve_sol(
    short: &[Complex64],
    open: &[Complex64],
    load: &[Complex64],
    ts: f64,
) -> Result<ErrorTerms> {
    if short.len() != open.len() || short.len() != load.len() {
        return Err(CalibrationError::GridMismatch {
            expected: short.len(),
            got: if open.len() != short.len() {
                open.len()
            } else {
                load.len()
            },
        });
    }
    let terms = (0..short.len())
        .map(|i| {
            solve_one_port(&SOL_STANDARDS, &[short[i], open[i], load[i]])
                .ok_or(CalibrationError::Degenerate { index: i })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTerms { ts, terms })
}

/// Cable transmission `√(e10e01)` with the root branch chosen for continuity,
/// starting from the root nearest `reference`.
pub fn transmission_from_terms(terms: &ErrorTerms, reference: Complex64) -> Vec<Complex64> {
    let mut prev = reference;
    terms
        .terms
        .iter()
        .map(|t| {
            let r = t.e10e01.sqrt();
            let pick = if (r - prev).norm() <= (-r - prev).norm() {
                r
            } else {
                -r
            };
            prev = pick;
            pick
        })
        .collect()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(CalibrationError::GridMismatch { expected, got });
    }
    Ok(())
}

/// Applies the cable transmission to a channel-only sweep.
pub fn embed_cable(s21: &S21Series, cable: &CableModel) -> Result<S21Series> {
    check_len(cable.len(), s21.len())?;
    Ok(S21Series {
        samples: s21
            .samples
            .iter()
            .zip(&cable.s21)
            .map(|(x, c)| x * c)
            .collect(),
        ..s21.clone()
    })
}

/// Divides out a characterized cable transmission.
pub fn deembed(s21: &S21Series, transmission: &[Complex64]) -> Result<S21Series> {
    check_len(transmission.len(), s21.len())?;
    let samples = s21
        .samples
        .iter()
        .zip(transmission)
        .enumerate()
        .map(|(i, (x, c))| {
            if c.norm() < DIVISION_GUARD {
                Err(CalibrationError::DivisionGuard {
                    index: i,
                    magnitude: c.norm(),
                })
            } else {
                Ok(x / c)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(S21Series {
        samples,
        ..s21.clone()
    })
}

/// Min/max of run-level deviations across repeated runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepeatabilityBand {
    pub phase_deg: (f64, f64),
    pub mag_db: (f64, f64),
}

impl RepeatabilityBand {
    pub fn within(&self, phase: (f64, f64), mag: (f64, f64)) -> bool {
        self.phase_deg.0 >= phase.0
            && self.phase_deg.1 <= phase.1
            && self.mag_db.0 >= mag.0
            && self.mag_db.1 <= mag.1
    }
}

/// Each run's deviation from `reference` is the mean complex ratio
/// `mean(run/reference)` expressed as phase (deg) and magnitude (dB).
pub fn repeatability(
    reference: &[Complex64],
    runs: &[Vec<Complex64>],
) -> Result<RepeatabilityBand> {
    if runs.is_empty() {
        return Err(CalibrationError::InvalidParameter("no runs".into()));
    }
    let mut phase = (f64::INFINITY, f64::NEG_INFINITY);
    let mut mag = (f64::INFINITY, f64::NEG_INFINITY);
    for run in runs {
        check_len(reference.len(), run.len())?;
        let mean = run
            .iter()
            .zip(reference)
            .map(|(r, x)| r / x)
            .sum::<Complex64>()
            / run.len() as f64;
        let p = mean.arg().to_degrees();
        let m = crate::units::amp_db(mean.norm());
        phase = (phase.0.min(p), phase.1.max(p));
        mag = (mag.0.min(m), mag.1.max(m));
    }
    Ok(RepeatabilityBand {
        phase_deg: phase,
        mag_db: mag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SounderConfig;

    fn series(samples: Vec<Complex64>) -> S21Series {
        S21Series {
            config: SounderConfig {
                n_points: samples.len(),
                ..Default::default()
            },
            samples,
            distance_ft: 3.5,
        }
    }

    fn ramp(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(0.02 + 1e-4 * i as f64, 0.37 * i as f64))
            .collect()
    }

    #[test]
    fn perfect_fixture() {
        let t = solve_one_port(&SOL_STANDARDS, &SOL_STANDARDS).unwrap();
        assert!((t.e00).norm() < 1e-15);
        assert!((t.e11).norm() < 1e-15);
        assert!((t.e10e01 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn load_measurement_is_directivity() {
        let t = OnePortTerms {
            e00: Complex64::new(0.03, -0.01),
            e11: Complex64::new(0.1, 0.2),
            e10e01: Complex64::new(0.7, -0.3),
        };
        assert_eq!(t.measure(Complex64::new(0.0, 0.0)), t.e00);
    }

    #[test]
    fn coincident_measurements_are_degenerate() {
        let m = vec![Complex64::new(0.2, 0.1); 4];
        assert_eq!(
            solve_sol(&m, &m, &m, 1e-3),
            Err(CalibrationError::Degenerate { index: 0 })
        );
    }

    #[test]
    fn ideal_cable_is_identity() {
        let s = series(ramp(64));
        let ideal = CableModel::ideal(64, 4.4e-3);
        assert_eq!(embed_cable(&s, &ideal).unwrap(), s);
        assert_eq!(deembed(&s, &ideal.s21).unwrap(), s);
    }

    #[test]
    fn phase_only_cable_shifts_phase() {
        let s = series(ramp(32));
        let mut cable = CableModel::ideal(32, 4.4e-3);
        cable.s21 = (0..32)
            .map(|i| Complex64::from_polar(1.0, 0.01 * i as f64))
            .collect();
        let out = embed_cable(&s, &cable).unwrap();
        for i in 0..32 {
            assert!((out.samples[i].norm() - s.samples[i].norm()).abs() < 1e-15);
            let dphi = (out.samples[i] / s.samples[i]).arg();
            assert!((dphi - 0.01 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn division_guard() {
        let s = series(ramp(4));
        let mut t = vec![Complex64::new(1.0, 0.0); 4];
        t[2] = Complex64::new(1e-7, 0.0);
        assert!(matches!(
            deembed(&s, &t),
            Err(CalibrationError::DivisionGuard { index: 2, .. })
        ));
        assert!(matches!(
            deembed(&s, &t[..3]),
            Err(CalibrationError::GridMismatch { .. })
        ));
    }

    #[test]
    fn generated_cable_respects_wander_bounds() {
        let cfg = CableConfig::default();
        let cable = CableModel::generate(&cfg, 4096, 4.4e-3, 5).unwrap();
        let base = cfg.nominal_s21();
        let mut peak_phase: f64 = 0.0;
        let mut peak_db: f64 = 0.0;
        let mut prev = 0.0;
        for (i, s) in cable.s21.iter().enumerate() {
            assert!(s.norm() <= 1.0);
            let r = s / base;
            let p = r.arg().to_degrees();
            if i > 0 {
                assert!((p - prev).abs() < 0.5, "phase jump at {i}");
            }
            prev = p;
            peak_phase = peak_phase.max(p.abs());
            peak_db = peak_db.max(crate::units::amp_db(r.norm()).abs());
        }
        assert!((peak_phase - cfg.phase_wander_deg).abs() < 1e-9);
        assert!((peak_db - cfg.mag_wander_db).abs() < 1e-9);
        assert!(cable
            .s11
            .iter()
            .all(|s| (s.norm() - cfg.reflection_mag).abs() < 1e-12));
    }

    #[test]
    fn characterization_recovers_cable_transmission() {
        let cfg = CableConfig {
            sol_noise_db: None,
            ..Default::default()
        };
        let cable = CableModel::generate(&cfg, 512, 4.4e-3, 9).unwrap();
        let meas = measure_standards(&cable, None, 0);
        let terms = solve_sol(&meas.short, &meas.open, &meas.load, meas.ts).unwrap();
        let t = transmission_from_terms(&terms, cfg.nominal_s21());
        for (a, b) in t.iter().zip(&cable.s21) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn branch_choice_follows_continuity() {
        // e10e01 circling the origin once ends on the opposite root
        let terms = ErrorTerms {
            ts: 1.0,
            terms: (0..200)
                .map(|i| OnePortTerms {
                    e10e01: Complex64::from_polar(1.0, 2.0 * PI * i as f64 / 199.0),
                    ..OnePortTerms::IDEAL
                })
                .collect(),
        };
        let t = transmission_from_terms(&terms, Complex64::new(1.0, 0.0));
        for w in t.windows(2) {
            assert!((w[1] - w[0]).norm() < 0.1);
        }
        assert!((t[199] - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn repeated_run_offsets_within_configured_range() {
        let cfg = CableConfig::default();
        let cable = CableModel::generate(&cfg, 256, 4.4e-3, 1).unwrap();
        for seed in 0..20 {
            let run = cable.repeated_run(&cfg, seed);
            let r = run.s21[10] / cable.s21[10];
            let p = r.arg().to_degrees();
            let l = -crate::units::amp_db(r.norm());
            assert!(
                p >= cfg.run_phase_offset_deg.0 - 1e-9 && p <= cfg.run_phase_offset_deg.1 + 1e-9
            );
            assert!(l >= cfg.run_flex_loss_db.0 - 1e-9 && l <= cfg.run_flex_loss_db.1 + 1e-9);
        }
    }
}
