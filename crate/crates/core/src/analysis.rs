//! Doppler spectra, spread extraction, velocity statistics, idle-segment path
//! gains and the log-distance path-loss fit.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::channel::S21Series;
use crate::units::{amp_db, pow_db};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("series length {n} is not a power of two")]
    Length { n: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("velocity pdf has no occupied bins inside the spectrum support")]
    EmptyPdf,
    #[error(
        "no idle segment: smallest window variance {min_variance:.3e} exceeds threshold {threshold:.3e}"
    )]
    NoIdle { min_variance: f64, threshold: f64 },
    #[error("path-loss fit needs at least two distinct distances")]
    RankDeficient,
    #[error("invalid analysis parameter: {0}")]
    InvalidParameter(String),
}

type Result<T> = std::result::Result<T, AnalysisError>;

/// Handling of series whose length is not a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthPolicy {
    #[default]
    Strict,
    /// Zero-pad to the next power of two.
    ZeroPad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    /// Hann taper normalized to unit coherent gain.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpectrumOptions {
    pub policy: LengthPolicy,
    pub window: Window,
}

/// Centered spectrum of a slow-time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerSpectrum {
    /// Bin frequencies (Hz), ascending from −fs/2.
    pub freqs: Vec<f64>,
    /// Per-bin power `20·log10|X[k]|` (dB).
    pub power_db: Vec<f64>,
    /// Complex bins in the same order; empty when built from power alone.
    pub bins: Vec<Complex64>,
    pub bin_width: f64,
    pub window: Window,
}

impl DopplerSpectrum {
    /// Spectrum known only by its power values, e.g. read back from a file.
    pub fn from_power(freqs: Vec<f64>, power_db: Vec<f64>) -> Result<Self> {
        if freqs.len() < 2 || freqs.len() != power_db.len() {
            return Err(AnalysisError::Empty("spectrum"));
        }
        let bin_width = freqs[1] - freqs[0];
        Ok(Self {
            freqs,
            power_db,
            bins: Vec::new(),
            bin_width,
            window: Window::Rectangular,
        })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Index of the strongest bin.
    pub fn peak_index(&self) -> usize {
        self.power_db
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &p)| {
                if p > bp {
                    (i, p)
                } else {
                    (bi, bp)
                }
            })
            .0
    }

    pub fn peak_power_db(&self) -> f64 {
        self.power_db[self.peak_index()]
    }

    /// Index of the bin nearest `f`, if inside the spectrum support.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let i = ((f - self.freqs[0]) / self.bin_width).round();
        (i >= 0.0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Peak frequency refined between bins.
    ///
    /// With complex rectangular-window bins the offset is Candan's
    /// bias-corrected three-bin estimator; otherwise a parabola is fitted to
    /// the dB values around the peak.
    pub fn peak_frequency(&self) -> f64 {
        let i = self.peak_index();
        if i == 0 || i + 1 >= self.len() {
            return self.freqs[i];
        }
        let delta = if self.bins.len() == self.len() && self.window == Window::Rectangular {
            let (xm, x0, xp) = (self.bins[i - 1], self.bins[i], self.bins[i + 1]);
            let den = 2.0 * x0 - xm - xp;
            if den.norm() == 0.0 {
                0.0
            } else {
                let n = self.len() as f64;
                let corr = (PI / n).tan() / (PI / n);
                corr * ((xm - xp) / den).re
            }
        } else {
            let (a, b, c) = (self.power_db[i - 1], self.power_db[i], self.power_db[i + 1]);
            let den = a - 2.0 * b + c;
            if den == 0.0 {
                0.0
            } else {
                0.5 * (a - c) / den
            }
        };
        self.freqs[i] + delta.clamp(-0.5, 0.5) * self.bin_width
    }
}

/// Forward DFT with `1/N` normalization.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Inverse of [`dft`].
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    buf
}

/// Moves the zero-frequency bin to the center.
pub fn fftshift<T: Clone>(x: &[T]) -> Vec<T> {
    let h = x.len() / 2;
    x[h..].iter().chain(&x[..h]).cloned().collect()
}

pub fn doppler_spectrum(s21: &S21Series) -> Result<DopplerSpectrum> {
    doppler_spectrum_with(s21, &SpectrumOptions::default())
}

pub fn doppler_spectrum_with(s21: &S21Series, opts: &SpectrumOptions) -> Result<DopplerSpectrum> {
    spectrum_of(&s21.samples, s21.config.ts, opts)
}

/// Spectrum of samples spaced `ts` seconds apart.
pub fn spectrum_of(
    samples: &[Complex64],
    ts: f64,
    opts: &SpectrumOptions,
) -> Result<DopplerSpectrum> {
    let n = samples.len();
    if n == 0 {
        return Err(AnalysisError::Empty("series"));
    }
    if !(ts > 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "sample period {ts}"
        )));
    }
    let mut x: Vec<Complex64> = match opts.window {
        Window::Rectangular => samples.to_vec(),
        Window::Hann => {
            // periodic Hann has mean 0.5
            samples
                .iter()
                .enumerate()
                .map(|(i, s)| s * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect()
        }
    };
    let len = match opts.policy {
        LengthPolicy::Strict if !n.is_power_of_two() => return Err(AnalysisError::Length { n }),
        LengthPolicy::Strict => n,
        LengthPolicy::ZeroPad => n.next_power_of_two(),
    };
    // padding keeps the amplitude scale of the original length
    x.resize(len, Complex64::new(0.0, 0.0));
    let mut bins = fftshift(&dft(&x));
    let pad = len as f64 / n as f64;
    bins.iter_mut().for_each(|b| *b *= pad);
    let df = 1.0 / (len as f64 * ts);
    let half = (len / 2) as f64;
    Ok(DopplerSpectrum {
        freqs: (0..len).map(|k| (k as f64 - half) * df).collect(),
        power_db: bins.iter().map(|b| amp_db(b.norm())).collect(),
        bins,
        bin_width: df,
        window: opts.window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// Threshold is an absolute power level.
    #[default]
    Absolute,
    /// Threshold is relative to the spectral peak.
    RelativeToPeak,
}

/// Extreme frequencies whose power exceeds a floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerSpread {
    pub f_neg: f64,
    pub f_pos: f64,
    /// Absolute floor that was applied (dB).
    pub threshold_db: f64,
}

impl DopplerSpread {
    pub fn width(&self) -> f64 {
        self.f_pos - self.f_neg
    }
}

pub fn doppler_spread(
    spec: &DopplerSpectrum,
    threshold_db: f64,
    mode: ThresholdMode,
) -> DopplerSpread {
    let floor = match mode {
        ThresholdMode::Absolute => threshold_db,
        ThresholdMode::RelativeToPeak => spec.peak_power_db() + threshold_db,
    };
    let mut f_neg = 0.0f64;
    let mut f_pos = 0.0f64;
    for (f, p) in spec.freqs.iter().zip(&spec.power_db) {
        if *p > floor {
            f_neg = f_neg.min(*f);
            f_pos = f_pos.max(*f);
        }
    }
    DopplerSpread {
        f_neg,
        f_pos,
        threshold_db: floor,
    }
}

/// `f_D = v·cos(θ)·f_c / c`.
pub fn theoretical_doppler(v: f64, theta: f64, f_c: f64) -> f64 {
    v * theta.cos() * f_c / crate::SPEED_OF_LIGHT
}

/// Speed toward `tx` from a sampled path, by central differences.
pub fn approach_velocities(
    times: &[f64],
    positions: &[nalgebra::Vector3<f64>],
    tx: &nalgebra::Vector3<f64>,
) -> Vec<f64> {
    let n = times.len().min(positions.len());
    let range: Vec<f64> = positions[..n].iter().map(|p| (p - tx).norm()).collect();
    (0..n)
        .map(|i| {
            if n < 2 {
                return 0.0;
            }
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            -(range[b] - range[a]) / (times[b] - times[a])
        })
        .collect()
}

/// Normalized velocity histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPdf {
    /// Bin edges (m/s); one more than `density`.
    pub edges: Vec<f64>,
    /// Probability density per bin (s/m).
    pub density: Vec<f64>,
    pub bin_width: f64,
}

impl VelocityPdf {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Probability mass per bin.
    pub fn mass(&self) -> Vec<f64> {
        self.density.iter().map(|d| d * self.bin_width).collect()
    }

    pub fn integral(&self) -> f64 {
        self.mass().iter().sum()
    }

    /// Center of the most populated bin.
    pub fn mode(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .fold(
                (0, -1.0),
                |(bi, bd), (i, &d)| if d > bd { (i, d) } else { (bi, bd) },
            )
            .0;
        0.5 * (self.edges[i] + self.edges[i + 1])
    }
}

/// Histogram on edges at integer multiples of `bin_width`.
pub fn velocity_pdf(velocities: &[f64], bin_width: f64) -> Result<VelocityPdf> {
    if velocities.is_empty() {
        return Err(AnalysisError::Empty("velocity log"));
    }
    if !(bin_width > 0.0) || velocities.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidParameter(
            "bin width or velocity".into(),
        ));
    }
    let idx = |v: f64| (v / bin_width).floor() as i64;
    let lo = velocities.iter().map(|&v| idx(v)).min().unwrap_or(0);
    let hi = velocities.iter().map(|&v| idx(v)).max().unwrap_or(0);
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &v in velocities {
        counts[(idx(v) - lo) as usize] += 1;
    }
    let norm = 1.0 / (velocities.len() as f64 * bin_width);
    Ok(VelocityPdf {
        edges: (lo..=hi + 1).map(|k| k as f64 * bin_width).collect(),
        density: counts.iter().map(|&c| c as f64 * norm).collect(),
        bin_width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayRow {
    pub freq: f64,
    pub measured_db: f64,
    /// Pdf mass in dB plus the fitted offset.
    pub theoretical_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub rows: Vec<OverlayRow>,
    pub offset_db: f64,
}

/// Maps each occupied speed bin to its Doppler frequency and fits a single dB
/// offset between pdf mass and the measured spectrum by least squares.
pub fn overlay_theoretical(spec: &DopplerSpectrum, pdf: &VelocityPdf, f_c: f64) -> Result<Overlay> {
    let mut pairs = Vec::new();
    for (v, m) in pdf.centers().into_iter().zip(pdf.mass()) {
        if m <= 0.0 {
            continue;
        }
        let f = theoretical_doppler(v, 0.0, f_c);
        if let Some(k) = spec.bin_of(f) {
            pairs.push((f, spec.power_db[k], pow_db(m)));
        }
    }
    if pairs.is_empty() {
        return Err(AnalysisError::EmptyPdf);
    }
    let offset_db = pairs.iter().map(|(_, meas, th)| meas - th).sum::<f64>() / pairs.len() as f64;
    Ok(Overlay {
        rows: pairs
            .into_iter()
            .map(|(freq, measured_db, th)| OverlayRow {
                freq,
                measured_db,
                theoretical_db: th + offset_db,
            })
            .collect(),
        offset_db,
    })
}

pub const IDLE_WINDOW: usize = 50;
pub const IDLE_VARIANCE_FACTOR: f64 = 3.0;

/// Idle samples of an appended sweep record.
#[derive(Debug, Clone, PartialEq)]
pub struct IdleSegments {
    pub flags: Vec<bool>,
    /// Half-open index ranges of contiguous idle samples.
    pub runs: Vec<(usize, usize)>,
    /// Mean path gain over idle samples with the noise power removed (dB).
    pub mean_pg_db: f64,
}

impl IdleSegments {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Flags samples covered by at least one `window`-long stretch whose complex
/// variance stays below `factor × noise_power`.
pub fn detect_idle(
    samples: &[Complex64],
    noise_power: f64,
    window: usize,
    factor: f64,
) -> Result<IdleSegments> {
    if window < 2 || !(factor > 0.0) || !(noise_power >= 0.0) {
        return Err(AnalysisError::InvalidParameter("idle window".into()));
    }
    if samples.len() < window {
        return Err(AnalysisError::Empty("sweep shorter than idle window"));
    }
    let threshold = factor * noise_power;
    let n = samples.len();
    // running sums over the window
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sq = 0.0;
    let mut flags = vec![false; n];
    let mut min_variance = f64::INFINITY;
    let mut cover_until = 0usize;
    for i in 0..n {
        sum += samples[i];
        sq += samples[i].norm_sqr();
        if i >= window {
            sum -= samples[i - window];
            sq -= samples[i - window].norm_sqr();
        }
        if i + 1 >= window {
            let w = window as f64;
            let var = (sq / w - (sum / w).norm_sqr()).max(0.0);
            min_variance = min_variance.min(var);
            if var < threshold {
                let start = (i + 1 - window).max(cover_until);
                flags[start..=i].iter_mut().for_each(|f| *f = true);
                cover_until = i + 1;
            }
        }
    }
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if runs.is_empty() {
        return Err(AnalysisError::NoIdle {
            min_variance,
            threshold,
        });
    }
    let (acc, cnt) = samples
        .iter()
        .zip(&flags)
        .filter(|(_, f)| **f)
        .fold((0.0, 0usize), |(a, c), (s, _)| (a + s.norm_sqr(), c + 1));
    let mean = acc / cnt as f64 - noise_power;
    Ok(IdleSegments {
        flags,
        runs,
        mean_pg_db: pow_db(mean),
    })
}

/// Log-distance regression result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossFit {
    pub n_exp: f64,
    /// Intercept at the reference distance (dB).
    pub pg_d0_db: f64,
    /// Residual standard deviation (dB).
    pub sigma_db: f64,
    pub r2: f64,
    pub n_points: usize,
}

impl PathLossFit {
    pub fn predict(&self, d: f64, d0: f64) -> f64 {
        self.pg_d0_db - 10.0 * self.n_exp * (d / d0).log10()
    }
}

/// Ordinary least squares of `pg_db` on `−10·log10(d/d0)`.
///
/// The residual deviation uses `m − 2` degrees of freedom and is zero for two
/// points.
pub fn fit_path_loss(points: &[(f64, f64)], d0: f64) -> Result<PathLossFit> {
    if !(d0 > 0.0) || points.iter().any(|(d, pg)| !(*d > 0.0) || !pg.is_finite()) {
        return Err(AnalysisError::InvalidParameter(
            "distances must be positive".into(),
        ));
    }
    let m = points.len();
    if m < 2 {
        return Err(AnalysisError::RankDeficient);
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|(d, _)| -10.0 * (d / d0).log10())
        .collect();
    let ys: Vec<f64> = points.iter().map(|(_, pg)| *pg).collect();
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) * m as f64 {
        return Err(AnalysisError::RankDeficient);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sigma_db = if m > 2 {
        (ssr / (m - 2) as f64).sqrt()
    } else {
        0.0
    };
    let r2 = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(PathLossFit {
        n_exp: slope,
        pg_d0_db: intercept,
        sigma_db,
        r2,
        n_points: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: f64 = 4.4e-3;

    fn tone(f: f64, amp: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(amp, 2.0 * PI * f * i as f64 * TS))
            .collect()
    }

    #[test]
    fn constant_signal_is_dc() {
        let x = vec![Complex64::new(1.0, 0.0); 64];
        let s = spectrum_of(&x, TS, &SpectrumOptions::default()).unwrap();
        let k0 = s.bin_of(0.0).unwrap();
        assert_eq!(s.freqs[k0], 0.0);
        assert!(s.power_db[k0].abs() < 1e-12);
        for (k, p) in s.power_db.iter().enumerate() {
            if k != k0 {
                assert!(*p < -250.0);
            }
        }
    }

    #[test]
    fn strict_policy_rejects_odd_lengths() {
        let x = vec![Complex64::new(1.0, 0.0); 100];
        assert_eq!(
            spectrum_of(&x, TS, &SpectrumOptions::default()),
            Err(AnalysisError::Length { n: 100 })
        );
        let opts = SpectrumOptions {
            policy: LengthPolicy::ZeroPad,
            ..Default::default()
        };
        let s = spectrum_of(&x, TS, &opts).unwrap();
        assert_eq!(s.len(), 128);
        assert!(s.power_db[s.bin_of(0.0).unwrap()].abs() < 1e-12);
    }

    #[test]
    fn tone_peak_is_refined() {
        let s = spectrum_of(&tone(56.0, 1.0, 4096), TS, &SpectrumOptions::default()).unwrap();
        assert!((s.bin_width - 1.0 / (4096.0 * TS)).abs() < 1e-15);
        assert!((s.freqs[s.peak_index()] - 56.0).abs() < s.bin_width);
        let f = s.peak_frequency();
        assert!((f - 56.0).abs() < 1e-3, "{f}");
    }

    #[test]
    fn hann_peak_is_refined() {
        let opts = SpectrumOptions {
            window: Window::Hann,
            ..Default::default()
        };
        let s = spectrum_of(&tone(-23.3, 1.0, 4096), TS, &opts).unwrap();
        assert!((s.peak_frequency() + 23.3).abs() < 0.01);
    }

    #[test]
    fn parseval() {
        let x: Vec<Complex64> = (0..256)
            .map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.11).cos() + 0.2))
            .collect();
        let xf = dft(&x);
        let time: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / 256.0;
        let freq: f64 = xf.iter().map(|v| v.norm_sqr()).sum();
        assert!((time - freq).abs() < 1e-12);
        let back = idft(&xf);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spread_of_two_tones() {
        let a = tone(30.0, 0.01, 4096);
        let b = tone(-30.0, 0.01, 4096);
        let x: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let s = spectrum_of(&x, TS, &SpectrumOptions::default()).unwrap();
        let sp = doppler_spread(&s, -60.0, ThresholdMode::Absolute);
        assert!(sp.f_neg <= 0.0 && sp.f_pos >= 0.0);
        // leakage of off-bin tones widens the skirt by a few bins
        assert!((sp.f_pos - 30.0).abs() < 4.0 * s.bin_width);
        assert!((sp.f_neg + 30.0).abs() < 4.0 * s.bin_width);
    }

    #[test]
    fn spread_of_silence() {
        let x = vec![Complex64::new(1e-5, 0.0); 64];
        let s = spectrum_of(&x, TS, &SpectrumOptions::default()).unwrap();
        let sp = doppler_spread(&s, -60.0, ThresholdMode::Absolute);
        assert_eq!((sp.f_neg, sp.f_pos), (0.0, 0.0));
        let rel = doppler_spread(&s, -60.0, ThresholdMode::RelativeToPeak);
        assert!((rel.threshold_db - (-100.0 - 60.0)).abs() < 1e-9);
    }

    #[test]
    fn doppler_law() {
        assert_eq!(theoretical_doppler(0.0, 0.3, 28e9), 0.0);
        assert!(theoretical_doppler(2.0, PI / 2.0, 28e9).abs() < 1e-12);
        let f = theoretical_doppler(0.64, 0.0, 28e9);
        assert!((f - 59.7).abs() < 0.1, "{f}");
    }

    #[test]
    fn constant_velocity_pdf() {
        let pdf = velocity_pdf(&[0.6; 100], 0.01).unwrap();
        let occupied: Vec<_> = pdf.density.iter().filter(|d| **d > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        assert!((occupied[0] - 100.0).abs() < 1e-9);
        assert!((pdf.integral() - 1.0).abs() < 1e-9);
        assert!(velocity_pdf(&[], 0.01).is_err());
    }

    #[test]
    fn approach_velocity_of_receding_path() {
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let pos: Vec<_> = times
            .iter()
            .map(|t| nalgebra::Vector3::new(-0.5 * t, 0.0, 0.0))
            .collect();
        let v = approach_velocities(&times, &pos, &nalgebra::Vector3::new(2.0, 0.0, 0.0));
        assert!(v.iter().all(|x| (x + 0.5).abs() < 1e-12));
    }

    #[test]
    fn delta_pdf_overlay_is_single_spike() {
        let s = spectrum_of(&tone(50.0, 1.0, 1024), TS, &SpectrumOptions::default()).unwrap();
        let pdf = velocity_pdf(&[0.5355; 10], 0.001).unwrap();
        let ov = overlay_theoretical(&s, &pdf, 28e9).unwrap();
        assert_eq!(ov.rows.len(), 1);
        let expected = theoretical_doppler(pdf.centers()[0], 0.0, 28e9);
        assert!((ov.rows[0].freq - expected).abs() < 1e-12);
        assert!((ov.rows[0].theoretical_db - ov.rows[0].measured_db).abs() < 1e-9);
        let far = velocity_pdf(&[100.0], 0.01).unwrap();
        assert_eq!(
            overlay_theoretical(&s, &far, 28e9),
            Err(AnalysisError::EmptyPdf)
        );
    }

    #[test]
    fn static_sweep_is_idle() {
        let x = vec![Complex64::new(0.01, 0.02); 300];
        let idle = detect_idle(&x, 1e-8, IDLE_WINDOW, IDLE_VARIANCE_FACTOR).unwrap();
        assert_eq!(idle.count(), 300);
        assert_eq!(idle.runs, vec![(0, 300)]);
        assert!((idle.mean_pg_db - pow_db(5e-4 - 1e-8)).abs() < 1e-9);
    }

    #[test]
    fn moving_sweep_has_no_idle() {
        let x = tone(20.0, 0.1, 500);
        assert!(matches!(
            detect_idle(&x, 1e-8, IDLE_WINDOW, IDLE_VARIANCE_FACTOR),
            Err(AnalysisError::NoIdle { .. })
        ));
    }

    #[test]
    fn exact_line_fit() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 7.0]
            .iter()
            .map(|&d| (d, -30.0 - 20.0 * f64::log10(d)))
            .collect();
        let fit = fit_path_loss(&pts, 1.0).unwrap();
        assert!((fit.n_exp - 2.0).abs() < 1e-9);
        assert!((fit.pg_d0_db + 30.0).abs() < 1e-9);
        assert!(fit.sigma_db < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rank_errors() {
        assert_eq!(
            fit_path_loss(&[(2.0, -40.0), (2.0, -41.0)], 1.0),
            Err(AnalysisError::RankDeficient)
        );
        assert_eq!(
            fit_path_loss(&[(2.0, -40.0)], 1.0),
            Err(AnalysisError::RankDeficient)
        );
    }
}
