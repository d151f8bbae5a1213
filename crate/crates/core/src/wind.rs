//! Dryden turbulence and NED wind composition.
//!
//! Turbulence is produced by passing three independent white-noise streams
//! through the Dryden shaping filters
//!
//! ```text
//! H_u(s) = σ_u √(2V/L_u) · 1 / (s + V/L_u)
//! H_v(s) = σ_v √(3V/L_v) · (s + V/(√3 L_v)) / (s + V/L_v)²
//! H_w(s) = σ_w √(3V/L_w) · (s + V/(√3 L_w)) / (s + V/L_w)²
//! ```
//!
//! discretized with a prewarped bilinear transform. The turbulence frame has
//! `u` along the horizontal mean wind, `w` down and `v` completing the
//! right-handed triad; [`compose_wind`] rotates it into NED and adds the mean.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::units::ft_to_m;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WindError {
    #[error("invalid wind parameter: {0}")]
    InvalidParameter(String),
    #[error("frame matrix is not a proper rotation (orthonormality residual {residual:.3e}, det {det:.6})")]
    NotRotation { residual: f64, det: f64 },
}

type Result<T> = std::result::Result<T, WindError>;

/// Turbulence component selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    U,
    V,
    W,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::U, Axis::V, Axis::W];

    fn index(self) -> usize {
        match self {
            Axis::U => 0,
            Axis::V => 1,
            Axis::W => 2,
        }
    }
}

/// Dryden model parameters. Length scales are stored in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DrydenParams {
    pub sigma_u2: f64,
    pub sigma_v2: f64,
    pub sigma_w2: f64,
    pub l_u: f64,
    pub l_v: f64,
    pub l_w: f64,
    /// Airspeed estimate (m/s).
    pub va0: f64,
    /// Sample interval (s).
    pub dt: f64,
    pub seed: u64,
}

impl DrydenParams {
    /// Low-altitude horizontal setting: σ² = (0.53, 0.53, 0), L = (200, 200, 50) ft,
    /// with `V_a0` taken as the speed of `mean`.
    pub fn low_altitude(mean: &MeanWind, dt: f64, seed: u64) -> Self {
        Self {
            sigma_u2: 0.53,
            sigma_v2: 0.53,
            sigma_w2: 0.0,
            l_u: ft_to_m(200.0),
            l_v: ft_to_m(200.0),
            l_w: ft_to_m(50.0),
            va0: mean.speed(),
            dt,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(WindError::InvalidParameter(what.to_string()));
        for (name, v) in [
            ("sigma_u2", self.sigma_u2),
            ("sigma_v2", self.sigma_v2),
            ("sigma_w2", self.sigma_w2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!(
                    "{name} must be a finite non-negative variance, got {v}"
                ));
            }
        }
        for (name, v) in [("L_u", self.l_u), ("L_v", self.l_v), ("L_w", self.l_w)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("length scale {name} must be positive, got {v}"));
            }
        }
        if !(self.va0 > 0.0 && self.va0.is_finite()) {
            return bad(&format!("airspeed V_a0 must be positive, got {}", self.va0));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(&format!(
                "sample interval dt must be positive, got {}",
                self.dt
            ));
        }
        Ok(())
    }

    fn axis(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::U => (self.sigma_u2, self.l_u),
            Axis::V => (self.sigma_v2, self.l_v),
            Axis::W => (self.sigma_w2, self.l_w),
        }
    }

    /// Continuous-time transfer function of `axis` as ascending-power
    /// numerator and denominator coefficients in `s`.
    pub fn transfer_function(&self, axis: Axis) -> (Vec<f64>, Vec<f64>) {
        let (var, l) = self.axis(axis);
        let sigma = var.sqrt();
        let a = self.va0 / l;
        match axis {
            Axis::U => {
                let k = sigma * (2.0 * self.va0 / l).sqrt();
                (vec![k], vec![a, 1.0])
            }
            Axis::V | Axis::W => {
                let k = sigma * (3.0 * self.va0 / l).sqrt();
                let zero = self.va0 / (3f64.sqrt() * l);
                (vec![k * zero, k], vec![a * a, 2.0 * a, 1.0])
            }
        }
    }
}

/// Mean wind in NED (m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanWind {
    pub u_bar: f64,
    pub v_bar: f64,
    pub w_bar: f64,
}

impl MeanWind {
    pub fn new(u_bar: f64, v_bar: f64, w_bar: f64) -> Self {
        Self {
            u_bar,
            v_bar,
            w_bar,
        }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.u_bar, self.v_bar, self.w_bar)
    }

    pub fn speed(&self) -> f64 {
        self.as_vector().norm()
    }
}

/// Discrete-time rational filter in transposed direct form II.
///
/// `b` and `a` hold ascending powers of `z⁻¹`; `a[0]` is always 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
}

impl DigitalFilter {
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a[0] == 0.0 {
            return Err(WindError::InvalidParameter(
                "filter denominator needs a non-zero leading coefficient".into(),
            ));
        }
        let a0 = a[0];
        let order = a.len().max(b.len()) - 1;
        let mut bn: Vec<f64> = b.iter().map(|x| x / a0).collect();
        let mut an: Vec<f64> = a.iter().map(|x| x / a0).collect();
        bn.resize(order + 1, 0.0);
        an.resize(order + 1, 0.0);
        Ok(Self {
            b: bn,
            a: an,
            state: vec![0.0; order],
        })
    }

    /// The filter whose output is identically zero.
    pub fn zero() -> Self {
        Self {
            b: vec![0.0],
            a: vec![1.0],
            state: Vec::new(),
        }
    }

    pub fn numerator(&self) -> &[f64] {
        &self.b
    }

    pub fn denominator(&self) -> &[f64] {
        &self.a
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(|&x| x == 0.0)
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.state.first().copied().unwrap_or(0.0);
        let n = self.state.len();
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = self.b[i + 1] * x - self.a[i + 1] * y + next;
        }
        y
    }

    /// Frequency response at `f` Hz for sample interval `dt`.
    pub fn response(&self, f: f64, dt: f64) -> Complex64 {
        let zinv = Complex64::from_polar(1.0, -2.0 * PI * f * dt);
        let eval = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &k| acc * zinv + k)
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Poles in the z-plane. Supports filters up to second order.
    pub fn poles(&self) -> Vec<Complex64> {
        match self.a.len() {
            0 | 1 => Vec::new(),
            2 => vec![Complex64::new(-self.a[1], 0.0)],
            3 => {
                let (p, q) = (self.a[1], self.a[2]);
                let disc = Complex64::new(p * p - 4.0 * q, 0.0).sqrt();
                vec![(-p + disc) / 2.0, (-p - disc) / 2.0]
            }
            _ => unimplemented!("pole extraction above second order"),
        }
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }
}

/// Half-angle `x = ω_p·dt/2` at which the bilinear map is prewarped.
///
/// Chosen so that `tan(x)/x` is the geometric mean of its values at 0 and at
/// `π/10` (i.e. `f = 1/(10·dt)`); the frequency-scale error of the map is then
/// within ±1.7% over that band.
fn prewarp_half_angle() -> f64 {
    let g = |x: f64| x.tan() / x;
    let target = g(PI / 10.0).sqrt();
    let (mut lo, mut hi) = (1e-6, PI / 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_pow(base: &[f64], k: usize) -> Vec<f64> {
    (0..k).fold(vec![1.0], |acc, _| poly_mul(&acc, base))
}

/// Bilinear transform `s = c·(1 − z⁻¹)/(1 + z⁻¹)` of a rational H(s) given in
/// ascending powers of `s`.
pub fn bilinear(num: &[f64], den: &[f64], c: f64) -> Result<DigitalFilter> {
    let order = den.len().saturating_sub(1);
    if order == 0 || num.len() > den.len() {
        return Err(WindError::InvalidParameter(
            "bilinear transform needs a proper transfer function".into(),
        ));
    }
    let map = |p: &[f64]| {
        let mut out = vec![0.0; order + 1];
        for (k, &coef) in p.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let term = poly_mul(
                &poly_pow(&[1.0, -1.0], k),
                &poly_pow(&[1.0, 1.0], order - k),
            );
            let scale = coef * c.powi(k as i32);
            for (o, t) in out.iter_mut().zip(term) {
                *o += scale * t;
            }
        }
        out
    };
    DigitalFilter::new(map(num), map(den))
}

/// Discretizes the Dryden shaping filter for `axis`.
pub fn discretize_dryden(params: &DrydenParams, axis: Axis) -> Result<DigitalFilter> {
    params.validate()?;
    let (var, _) = params.axis(axis);
    if var == 0.0 {
        return Ok(DigitalFilter::zero());
    }
    let (num, den) = params.transfer_function(axis);
    let x = prewarp_half_angle();
    let c = (2.0 / params.dt) * x / x.tan();
    let filt = bilinear(&num, &den, c)?;
    debug_assert!(filt.is_stable());
    Ok(filt)
}

/// Continuous-time response `H_axis(j2πf)`.
pub fn continuous_response(params: &DrydenParams, axis: Axis, f: f64) -> Complex64 {
    let (num, den) = params.transfer_function(axis);
    let s = Complex64::new(0.0, 2.0 * PI * f);
    let eval = |c: &[f64]| {
        c.iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &k| acc * s + k)
    };
    eval(&num) / eval(&den)
}

/// Time-indexed turbulence, optionally composed into NED wind.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceSeries {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// NED wind `V_w(t)`; `None` until [`compose_wind`] has run.
    pub vw: Option<Vec<Vector3<f64>>>,
}

impl TurbulenceSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn duration(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0) - self.t.first().copied().unwrap_or(0.0)
    }

    /// Zero turbulence of `n` samples.
    pub fn calm(n: usize, dt: f64) -> Self {
        Self {
            t: (0..n).map(|i| i as f64 * dt).collect(),
            u: vec![0.0; n],
            v: vec![0.0; n],
            w: vec![0.0; n],
            vw: None,
        }
    }

    /// NED wind at time `t`, linearly interpolated and held at the ends.
    /// Uncomposed series return the raw `(u, v, w)` sample.
    pub fn wind_at(&self, t: f64) -> Vector3<f64> {
        let get = |i: usize| match &self.vw {
            Some(vw) => vw[i],
            None => Vector3::new(self.u[i], self.v[i], self.w[i]),
        };
        let n = self.t.len();
        if n == 0 {
            return Vector3::zeros();
        }
        if n == 1 || t <= self.t[0] {
            return get(0);
        }
        if t >= self.t[n - 1] {
            return get(n - 1);
        }
        let pos = (t - self.t[0]) / self.dt();
        let i = (pos.floor() as usize).min(n - 2);
        let frac = pos - i as f64;
        get(i) * (1.0 - frac) + get(i + 1) * frac
    }
}

/// Filters three independent unit-variance Gaussian streams (scaled by
/// `1/√dt`) through `filters`. Stream `k` of ChaCha8 seeded with `seed` drives
/// axis `k`.
pub fn generate_turbulence(
    filters: &[DigitalFilter; 3],
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<TurbulenceSeries> {
    if n == 0 {
        return Err(WindError::InvalidParameter(
            "sample count must be at least 1".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WindError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let scale = 1.0 / dt.sqrt();
    let mut out: [Vec<f64>; 3] = Default::default();
    for axis in Axis::ALL {
        let k = axis.index();
        let mut filt = filters[k].clone();
        filt.reset();
        if filt.is_zero() {
            out[k] = vec![0.0; n];
            continue;
        }
        let mut rng = crate::seed::rng(seed, k as u64);
        out[k] = (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                filt.process(scale * x)
            })
            .collect();
    }
    let [u, v, w] = out;
    Ok(TurbulenceSeries {
        t: (0..n).map(|i| i as f64 * dt).collect(),
        u,
        v,
        w,
        vw: None,
    })
}

/// Rotation from the turbulence frame to NED: columns are the `u`, `v`, `w`
/// unit vectors expressed in NED. A calm horizontal mean wind aligns `u` with
/// north.
pub fn wind_frame_rotation(mean: &MeanWind) -> Matrix3<f64> {
    let horiz = Vector3::new(mean.u_bar, mean.v_bar, 0.0);
    let u_hat = if horiz.norm() > 1e-12 {
        horiz.normalize()
    } else {
        Vector3::x()
    };
    let w_hat = Vector3::z();
    let v_hat = w_hat.cross(&u_hat);
    Matrix3::from_columns(&[u_hat, v_hat, w_hat])
}

pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let residual = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if residual > 1e-9 || (det - 1.0).abs() > 1e-9 {
        return Err(WindError::NotRotation { residual, det });
    }
    Ok(())
}

/// `V_w(t) = mean + R·(u, v, w)(t)` over the whole grid.
pub fn compose_wind(
    mean: &MeanWind,
    turb: &TurbulenceSeries,
    r: &Matrix3<f64>,
) -> Result<TurbulenceSeries> {
    check_rotation(r)?;
    let m = mean.as_vector();
    let vw = (0..turb.len())
        .map(|i| m + r * Vector3::new(turb.u[i], turb.v[i], turb.w[i]))
        .collect();
    Ok(TurbulenceSeries {
        vw: Some(vw),
        ..turb.clone()
    })
}

/// Full Dryden wind: discretize, generate `n` samples and compose with the
/// default frame rotation.
pub fn dryden_wind(params: &DrydenParams, mean: &MeanWind, n: usize) -> Result<TurbulenceSeries> {
    let filters = [
        discretize_dryden(params, Axis::U)?,
        discretize_dryden(params, Axis::V)?,
        discretize_dryden(params, Axis::W)?,
    ];
    let turb = generate_turbulence(&filters, n, params.dt, params.seed)?;
    compose_wind(mean, &turb, &wind_frame_rotation(mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_params(dt: f64) -> DrydenParams {
        DrydenParams::low_altitude(&MeanWind::new(2.0, -1.0, 0.0), dt, 11)
    }

    #[test]
    fn airspeed_from_mean_wind() {
        let p = default_params(0.01);
        assert!((p.va0 - 5f64.sqrt()).abs() < 1e-12);
        assert!((p.va0 - 2.236).abs() < 1e-3);
    }

    #[test]
    fn zero_variance_axis_is_zero_filter() {
        let p = default_params(0.01);
        let mut f = discretize_dryden(&p, Axis::W).unwrap();
        assert!(f.is_zero());
        for x in [1.0, -3.0, 1e6] {
            assert_eq!(f.process(x), 0.0);
        }
    }

    #[test]
    fn dc_gain_of_u_filter() {
        let p = DrydenParams {
            sigma_u2: 1.0,
            sigma_v2: 1.0,
            sigma_w2: 1.0,
            l_u: 2.0,
            l_v: 2.0,
            l_w: 2.0,
            va0: 1.0,
            dt: 0.01,
            seed: 0,
        };
        let f = discretize_dryden(&p, Axis::U).unwrap();
        assert!((f.response(0.0, p.dt).re - 2.0).abs() < 1e-9);
        assert!(f.response(0.0, p.dt).im.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = default_params(0.01);
        p.l_v = 0.0;
        assert!(matches!(
            discretize_dryden(&p, Axis::V),
            Err(WindError::InvalidParameter(_))
        ));
        let mut p = default_params(0.01);
        p.va0 = -1.0;
        assert!(discretize_dryden(&p, Axis::U).is_err());
    }

    #[test]
    fn filters_are_stable_and_normalized() {
        for dt in [1e-3, 0.01, 0.1, 1.0] {
            let p = default_params(dt);
            for axis in [Axis::U, Axis::V] {
                let f = discretize_dryden(&p, axis).unwrap();
                assert_eq!(f.denominator()[0], 1.0);
                assert!(f.is_stable(), "{axis:?} at dt={dt}");
            }
        }
    }

    #[test]
    fn process_matches_direct_difference_equation() {
        let p = default_params(0.05);
        let mut f = discretize_dryden(&p, Axis::V).unwrap();
        let (b, a) = (f.numerator().to_vec(), f.denominator().to_vec());
        let xs: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut ys = Vec::new();
        for (n, &x) in xs.iter().enumerate() {
            let got = f.process(x);
            let mut want = b[0] * x;
            for k in 1..b.len() {
                if n >= k {
                    want += b[k] * xs[n - k] - a[k] * ys[n - k];
                }
            }
            ys.push(want);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn calm_composition_is_mean_wind() {
        let mean = MeanWind::new(2.0, -1.0, 0.0);
        let turb = TurbulenceSeries::calm(10, 0.1);
        let out = compose_wind(&mean, &turb, &wind_frame_rotation(&mean)).unwrap();
        for v in out.vw.unwrap() {
            assert_eq!(v, mean.as_vector());
        }
    }

    #[test]
    fn frame_rotation_alignment() {
        let mean = MeanWind::new(2.0, -1.0, 0.0);
        let r = wind_frame_rotation(&mean);
        check_rotation(&r).unwrap();
        let u_dir = r.column(0).into_owned();
        assert!((u_dir - Vector3::new(2.0, -1.0, 0.0).normalize()).norm() < 1e-12);
        assert_eq!(r.column(2).into_owned(), Vector3::z());
    }

    #[test]
    fn non_rotation_is_rejected() {
        let mean = MeanWind::new(0.0, 0.0, 0.0);
        let turb = TurbulenceSeries::calm(3, 0.1);
        let scaled = Matrix3::identity() * 2.0;
        assert!(matches!(
            compose_wind(&mean, &turb, &scaled),
            Err(WindError::NotRotation { .. })
        ));
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(compose_wind(&mean, &turb, &reflection).is_err());
    }

    #[test]
    fn wind_at_interpolates() {
        let mut s = TurbulenceSeries::calm(3, 1.0);
        s.u = vec![0.0, 1.0, 3.0];
        assert!((s.wind_at(0.5).x - 0.5).abs() < 1e-12);
        assert!((s.wind_at(1.5).x - 2.0).abs() < 1e-12);
        assert_eq!(s.wind_at(10.0).x, 3.0);
        assert_eq!(s.wind_at(-1.0).x, 0.0);
    }
}
