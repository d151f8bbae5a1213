//! CW-mode channel sounding: complex S21 samples on the sounder time grid
//! synthesized from the Tx–Rx geometry.
//!
//! Each resolvable path contributes `α(t)·exp(−j(2π d(t)/λ + φ₀))` with the
//! log-distance amplitude `α = 10^{(PG(d₀) − 10 n log₁₀(d/d₀) + X_σ)/20}`.
//! Complex AWGN is added at the configured floor.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand_distr::{Distribution, Normal, StandardNormal};
use std::f64::consts::PI;

use crate::units::{db_to_amp, db_to_pow, friis_gain_db, wavelength};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChannelError {
    #[error("receiver path has {got} samples but the sounder grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("transmitter and receiver coincide at sample {index}")]
    Geometry { index: usize },
    #[error("motion log covers [{start:.4}, {end:.4}] s but the sounder grid needs [{need_start:.4}, {need_end:.4}] s")]
    Range {
        start: f64,
        end: f64,
        need_start: f64,
        need_end: f64,
    },
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
}

type Result<T> = std::result::Result<T, ChannelError>;

/// IF bandwidth at which `noise_floor_db` is specified.
pub const REFERENCE_IF_BANDWIDTH: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SounderConfig {
    /// Carrier (Hz).
    pub f_c: f64,
    /// Samples per sweep.
    pub n_points: usize,
    /// Sampling interval (s).
    pub ts: f64,
    /// IF bandwidth (Hz).
    pub if_bandwidth: f64,
    /// Average complex noise power (dB) at the reference IF bandwidth;
    /// `None` disables noise.
    pub noise_floor_db: Option<f64>,
}

impl Default for SounderConfig {
    fn default() -> Self {
        Self {
            f_c: 28e9,
            n_points: 4096,
            ts: 4.4e-3,
            if_bandwidth: 300.0,
            noise_floor_db: Some(-60.0),
        }
    }
}

impl SounderConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_points.is_power_of_two() {
            return Err(ChannelError::InvalidParameter(format!(
                "n_points must be a power of two, got {}",
                self.n_points
            )));
        }
        if !(self.ts > 0.0 && self.f_c > 0.0 && self.if_bandwidth > 0.0) {
            return Err(ChannelError::InvalidParameter(
                "Ts, carrier and IF bandwidth must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.f_c)
    }

    /// Sweep duration `n_points · Ts`.
    pub fn sweep_duration(&self) -> f64 {
        self.n_points as f64 * self.ts
    }

    pub fn time_grid(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| i as f64 * self.ts).collect()
    }

    /// Linear noise power after IF bandwidth scaling, if noise is enabled.
    pub fn noise_power(&self) -> Option<f64> {
        self.noise_floor_db
            .map(|db| db_to_pow(db) * self.if_bandwidth / REFERENCE_IF_BANDWIDTH)
    }
}

/// Doppler band `(−1/(2Ts), +1/(2Ts))` representable by the sampling grid.
pub fn doppler_capture_range(cfg: &SounderConfig) -> (f64, f64) {
    let half = 1.0 / (2.0 * cfg.ts);
    (-half, half)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Path gain at `d0` (dB), antenna gains included.
    pub pg_d0_db: f64,
    pub n_exp: f64,
    pub shadow_sigma_db: f64,
    /// Phase offset φ₀ (rad).
    pub phi_0: f64,
    /// Reference distance (m).
    pub d0: f64,
}

impl Default for ChannelParams {
    /// Free-space gain at 1 m for 28 GHz plus two 15 dBi horns; exponent 1.843.
    fn default() -> Self {
        Self {
            pg_d0_db: friis_gain_db(28e9, 1.0) + 2.0 * 15.0,
            n_exp: 1.843,
            shadow_sigma_db: 1.0,
            phi_0: 0.0,
            d0: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_exp > 0.0 && self.shadow_sigma_db >= 0.0 && self.d0 > 0.0) {
            return Err(ChannelError::InvalidParameter(
                "need n_exp > 0, shadow_sigma_db >= 0 and d0 > 0".into(),
            ));
        }
        Ok(())
    }

    /// Mean path gain (dB) at distance `d` (m).
    pub fn mean_path_gain_db(&self, d: f64) -> f64 {
        self.pg_d0_db - 10.0 * self.n_exp * (d / self.d0).log10()
    }
}

/// One sweep of complex S21 on the uniform sounder grid.
#[derive(Debug, Clone, PartialEq)]
pub struct S21Series {
    pub config: SounderConfig,
    pub samples: Vec<Complex64>,
    /// Nominal Tx–Rx distance (ft).
    pub distance_ft: f64,
}

impl S21Series {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.config.ts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `20·log₁₀|S21|` per sample.
    pub fn magnitude_db(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| crate::units::amp_db(s.norm()))
            .collect()
    }
}

/// Draws of the random parts of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepDraw {
    pub shadowing_db: f64,
}

/// Single line-of-sight synthesis. See [`synthesize_multipath`].
pub fn synthesize_s21(
    rx_path: &[Vector3<f64>],
    tx_pos: &Vector3<f64>,
    cfg: &SounderConfig,
    ch: &ChannelParams,
    distance_ft: f64,
    seed: u64,
) -> Result<S21Series> {
    synthesize_multipath(
        rx_path,
        std::slice::from_ref(tx_pos),
        cfg,
        ch,
        distance_ft,
        seed,
    )
    .map(|(s, _)| s)
}

/// Sum over paths whose sources are `sources` (the transmitter and any image
/// sources), each with its own distance and phase history.
///
/// Noise uses stream 0 and the per-sweep shadowing draw stream 1 of `seed`.
pub fn synthesize_multipath(
    rx_path: &[Vector3<f64>],
    sources: &[Vector3<f64>],
    cfg: &SounderConfig,
    ch: &ChannelParams,
    distance_ft: f64,
    seed: u64,
) -> Result<(S21Series, SweepDraw)> {
    cfg.validate()?;
    ch.validate()?;
    if rx_path.len() != cfg.n_points {
        return Err(ChannelError::GridMismatch {
            expected: cfg.n_points,
            got: rx_path.len(),
        });
    }
    if sources.is_empty() {
        return Err(ChannelError::InvalidParameter(
            "at least one path is required".into(),
        ));
    }
    let shadowing_db = if ch.shadow_sigma_db > 0.0 {
        let mut rng = crate::seed::rng(seed, 1);
        Normal::new(0.0, ch.shadow_sigma_db)
            .expect("validated sigma")
            .sample(&mut rng)
    } else {
        0.0
    };
    let lambda = cfg.wavelength();
    let mut samples = Vec::with_capacity(cfg.n_points);
    for (i, rx) in rx_path.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for src in sources {
            let d = (rx - src).norm();
            if d <= 0.0 {
                return Err(ChannelError::Geometry { index: i });
            }
            let amp = db_to_amp(ch.mean_path_gain_db(d) + shadowing_db);
            let phase = -(2.0 * PI * d / lambda + ch.phi_0);
            acc += Complex64::from_polar(amp, phase);
        }
        samples.push(acc);
    }
    if let Some(p) = cfg.noise_power() {
        let mut rng = crate::seed::rng(seed, 0);
        let sd = (p / 2.0).sqrt();
        for s in samples.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *s += Complex64::new(sd * re, sd * im);
        }
    }
    Ok((
        S21Series {
            config: cfg.clone(),
            samples,
            distance_ft,
        },
        SweepDraw { shadowing_db },
    ))
}

/// Not-a-knot cubic interpolating spline.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// `x` must be strictly increasing with at least two knots.
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(ChannelError::InvalidParameter(
                "spline needs matching knots (>= 2)".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ChannelError::InvalidParameter(
                "spline knots must increase strictly".into(),
            ));
        }
        let n = x.len() - 1;
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let m = match n {
            1 => vec![0.0, 0.0],
            2 => {
                let c = 2.0 * (slope[1] - slope[0]) / (x[2] - x[0]);
                vec![c; 3]
            }
            _ => {
                // Tridiagonal system in M_1..M_{n-1} with M_0 and M_n eliminated
                // through the not-a-knot conditions.
                let k = n - 1;
                let mut sub = vec![0.0; k];
                let mut diag = vec![0.0; k];
                let mut sup = vec![0.0; k];
                let mut rhs = vec![0.0; k];
                for r in 0..k {
                    let i = r + 1;
                    sub[r] = h[i - 1];
                    diag[r] = 2.0 * (h[i - 1] + h[i]);
                    sup[r] = h[i];
                    rhs[r] = 6.0 * (slope[i] - slope[i - 1]);
                }
                diag[0] += h[0] * (h[0] + h[1]) / h[1];
                sup[0] -= h[0] * h[0] / h[1];
                let (a, b) = (h[n - 2], h[n - 1]);
                diag[k - 1] += b * (a + b) / a;
                sub[k - 1] -= b * b / a;

                for r in 1..k {
                    let w = sub[r] / diag[r - 1];
                    diag[r] -= w * sup[r - 1];
                    rhs[r] -= w * rhs[r - 1];
                }
                let mut inner = vec![0.0; k];
                inner[k - 1] = rhs[k - 1] / diag[k - 1];
                for r in (0..k - 1).rev() {
                    inner[r] = (rhs[r] - sup[r] * inner[r + 1]) / diag[r];
                }
                let mut m = vec![0.0; n + 1];
                m[1..n].copy_from_slice(&inner);
                m[0] = ((h[0] + h[1]) * m[1] - h[0] * m[2]) / h[1];
                m[n] = ((a + b) * m[n - 1] - b * m[n - 2]) / a;
                m
            }
        };
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len() - 1;
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).expect("finite knots"))
        {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        };
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - xq;
        let b = xq - self.x[i];
        self.m[i] * a.powi(3) / (6.0 * h)
            + self.m[i + 1] * b.powi(3) / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }
}

/// Cubic-spline resampling of a position log onto `grid` (same time base).
pub fn resample_path(
    times: &[f64],
    positions: &[Vector3<f64>],
    grid: &[f64],
) -> Result<Vec<Vector3<f64>>> {
    if times.len() != positions.len() || times.is_empty() {
        return Err(ChannelError::InvalidParameter(
            "motion log is empty or ragged".into(),
        ));
    }
    let (start, end) = (times[0], times[times.len() - 1]);
    let (need_start, need_end) = match (grid.first(), grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Ok(Vec::new()),
    };
    let tol = 1e-9 * (1.0 + end.abs());
    if need_start < start - tol || need_end > end + tol {
        return Err(ChannelError::Range {
            start,
            end,
            need_start,
            need_end,
        });
    }
    if times.len() == 1 {
        return Ok(vec![positions[0]; grid.len()]);
    }
    let axis = |k: usize| -> Result<CubicSpline> {
        let ys: Vec<f64> = positions.iter().map(|p| p[k]).collect();
        CubicSpline::new(times, &ys)
    };
    let (sx, sy, sz) = (axis(0)?, axis(1)?, axis(2)?);
    Ok(grid
        .iter()
        .map(|&t| Vector3::new(sx.eval(t), sy.eval(t), sz.eval(t)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SounderConfig {
        SounderConfig {
            noise_floor_db: None,
            ..Default::default()
        }
    }

    fn exact_channel() -> ChannelParams {
        ChannelParams {
            shadow_sigma_db: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn capture_range() {
        let (lo, hi) = doppler_capture_range(&SounderConfig::default());
        assert!((hi - 113.636_363_636).abs() < 1e-6 && lo == -hi);
        let five = SounderConfig {
            ts: 5e-3,
            ..Default::default()
        };
        assert!((doppler_capture_range(&five).1 - 100.0).abs() < 1e-9);
        let one = SounderConfig {
            ts: 1e-3,
            ..Default::default()
        };
        assert!((doppler_capture_range(&one).1 - 500.0).abs() < 1e-9);
    }

    #[test]
    fn static_rx_at_reference_distance() {
        let cfg = quiet();
        let ch = exact_channel();
        let tx = Vector3::zeros();
        // one wavelength multiple so the carrier phase term vanishes too
        let d = cfg.wavelength() * (1.0 / cfg.wavelength()).round();
        let ch = ChannelParams { d0: d, ..ch };
        let path = vec![Vector3::new(d, 0.0, 0.0); cfg.n_points];
        let s = synthesize_s21(&path, &tx, &cfg, &ch, 3.28, 1).unwrap();
        let want = db_to_amp(ch.pg_d0_db);
        for x in &s.samples {
            assert!((x.norm() - want).abs() < 1e-12 * want.max(1.0));
            assert!((x - s.samples[0]).norm() < 1e-12);
        }
        assert!(s.samples[0].arg().abs() < 1e-6);
    }

    #[test]
    fn magnitude_follows_log_distance_law() {
        let cfg = quiet();
        let ch = exact_channel();
        let tx = Vector3::zeros();
        for d in [1.0668, 2.5, 7.1628] {
            let path = vec![Vector3::new(0.0, d, 0.0); cfg.n_points];
            let s = synthesize_s21(&path, &tx, &cfg, &ch, 0.0, 0).unwrap();
            let db = s.magnitude_db()[17];
            assert!((db - ch.mean_path_gain_db(d)).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_and_geometry_errors() {
        let cfg = quiet();
        let ch = exact_channel();
        let short = vec![Vector3::new(1.0, 0.0, 0.0); 10];
        assert!(matches!(
            synthesize_s21(&short, &Vector3::zeros(), &cfg, &ch, 0.0, 0),
            Err(ChannelError::GridMismatch {
                expected: 4096,
                got: 10
            })
        ));
        let mut path = vec![Vector3::new(1.0, 0.0, 0.0); cfg.n_points];
        path[5] = Vector3::zeros();
        assert_eq!(
            synthesize_s21(&path, &Vector3::zeros(), &cfg, &ch, 0.0, 0),
            Err(ChannelError::Geometry { index: 5 })
        );
    }

    #[test]
    fn noise_power_scales_with_if_bandwidth() {
        let cfg = SounderConfig {
            if_bandwidth: 3000.0,
            ..Default::default()
        };
        assert!((cfg.noise_power().unwrap() / 1e-5 - 1.0).abs() < 1e-12);
        assert!(quiet().noise_power().is_none());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = SounderConfig::default();
        let ch = ChannelParams::default();
        let path = vec![Vector3::new(2.0, 0.0, 0.0); cfg.n_points];
        let a = synthesize_s21(&path, &Vector3::zeros(), &cfg, &ch, 6.5, 99).unwrap();
        let b = synthesize_s21(&path, &Vector3::zeros(), &cfg, &ch, 6.5, 99).unwrap();
        let c = synthesize_s21(&path, &Vector3::zeros(), &cfg, &ch, 6.5, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn two_path_sum() {
        let cfg = quiet();
        let ch = exact_channel();
        let path = vec![Vector3::new(1.0, 0.0, 0.0); cfg.n_points];
        let srcs = [Vector3::zeros(), Vector3::new(3.0, 0.0, 0.0)];
        let (two, _) = synthesize_multipath(&path, &srcs, &cfg, &ch, 0.0, 0).unwrap();
        let a = synthesize_s21(&path, &srcs[0], &cfg, &ch, 0.0, 0).unwrap();
        let b = synthesize_s21(&path, &srcs[1], &cfg, &ch, 0.0, 0).unwrap();
        assert!((two.samples[0] - (a.samples[0] + b.samples[0])).norm() < 1e-15);
    }

    #[test]
    fn spline_reproduces_cubics() {
        let x: Vec<f64> = [0.0, 0.3, 0.5, 1.1, 1.6, 2.0, 2.9].to_vec();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t.powi(3);
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for k in 0..=100 {
            let t = 2.9 * k as f64 / 100.0;
            assert!((s.eval(t) - f(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn spline_small_knot_counts() {
        let s = CubicSpline::new(&[0.0, 1.0], &[1.0, 3.0]).unwrap();
        assert!((s.eval(0.25) - 1.5).abs() < 1e-15);
        let s = CubicSpline::new(&[0.0, 1.0, 3.0], &[0.0, 1.0, 9.0]).unwrap();
        assert!((s.eval(2.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn resample_constant_and_linear() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let grid: Vec<f64> = (0..400).map(|i| i as f64 * 4.4e-3).collect();
        let c = Vector3::new(0.3, -0.2, 1.1);
        let out = resample_path(&times, &vec![c; times.len()], &grid).unwrap();
        assert!(out.iter().all(|p| (p - c).norm() < 1e-12));

        let v = Vector3::new(0.3, 0.1, -0.05);
        let lin: Vec<_> = times.iter().map(|&t| c + v * t).collect();
        let out = resample_path(&times, &lin, &grid).unwrap();
        for (t, p) in grid.iter().zip(out) {
            assert!((p - (c + v * *t)).norm() < 1e-9);
        }
    }

    #[test]
    fn resample_needs_coverage() {
        let times = [0.0, 0.5, 1.0];
        let pos = [Vector3::zeros(); 3];
        assert!(matches!(
            resample_path(&times, &pos, &[0.0, 1.5]),
            Err(ChannelError::Range { .. })
        ));
    }
}
