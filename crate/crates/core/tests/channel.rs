use nalgebra::Vector3;
use proptest::prelude::*;
use std::f64::consts::PI;
use uavchan_core::channel::{
    doppler_capture_range, resample_path, synthesize_multipath, synthesize_s21, ChannelParams,
    CubicSpline, SounderConfig,
};

fn quiet(n: usize) -> SounderConfig {
    SounderConfig {
        n_points: n,
        noise_floor_db: None,
        ..Default::default()
    }
}

fn exact() -> ChannelParams {
    ChannelParams {
        shadow_sigma_db: 0.0,
        ..Default::default()
    }
}

fn inst_freq(s: &[num_complex::Complex64], ts: f64) -> Vec<f64> {
    s.windows(2)
        .map(|w| (w[1] * w[0].conj()).arg() / (2.0 * PI * ts))
        .collect()
}

#[test]
fn phase_rate_equals_negative_range_rate_over_wavelength() {
    let cfg = quiet(1024);
    let tx = Vector3::new(3.0, 0.0, 0.0);
    for v in [-0.6, -0.2, 0.25, 0.6] {
        let path: Vec<_> = cfg
            .time_grid()
            .iter()
            .map(|t| Vector3::new(v * t, 0.0, 0.0))
            .collect();
        let s = synthesize_s21(&path, &tx, &cfg, &exact(), 10.0, 0).unwrap();
        let want = v / cfg.wavelength();
        for f in inst_freq(&s.samples, cfg.ts) {
            assert!((f - want).abs() < 1e-6, "v {v}: {f} vs {want}");
        }
    }
}

#[test]
fn oblique_motion_follows_projected_range_rate() {
    let cfg = quiet(512);
    let tx = Vector3::new(2.0, 1.0, 0.5);
    let vel = Vector3::new(0.2, -0.3, 0.1);
    let t = cfg.time_grid();
    let path: Vec<_> = t.iter().map(|&t| vel * t).collect();
    let s = synthesize_s21(&path, &tx, &cfg, &exact(), 10.0, 0).unwrap();
    for (i, f) in inst_freq(&s.samples, cfg.ts).into_iter().enumerate() {
        let mid = vel * (t[i] + 0.5 * cfg.ts);
        let d_dot = (mid - tx).normalize().dot(&vel);
        let want = -d_dot / cfg.wavelength();
        assert!((f - want).abs() < 1e-3, "{f} vs {want}");
    }
}

#[test]
fn added_noise_has_configured_power() {
    let cfg = SounderConfig {
        n_points: 1 << 16,
        noise_floor_db: Some(-60.0),
        ..Default::default()
    };
    let path = vec![Vector3::zeros(); cfg.n_points];
    let tx = Vector3::new(2.0, 0.0, 0.0);
    let noisy = synthesize_s21(&path, &tx, &cfg, &exact(), 6.0, 3).unwrap();
    let clean = synthesize_s21(&path, &tx, &quiet(cfg.n_points), &exact(), 6.0, 3).unwrap();
    let p: f64 = noisy
        .samples
        .iter()
        .zip(&clean.samples)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / cfg.n_points as f64;
    let want = cfg.noise_power().unwrap();
    assert!((p / want - 1.0).abs() < 0.03, "{p} vs {want}");
}

#[test]
fn shadowing_draws_have_configured_spread() {
    let cfg = quiet(8);
    let path = vec![Vector3::zeros(); 8];
    let tx = [Vector3::new(2.0, 0.0, 0.0)];
    let ch = ChannelParams::default();
    let draws: Vec<f64> = (0..4000)
        .map(|seed| {
            synthesize_multipath(&path, &tx, &cfg, &ch, 6.0, seed)
                .unwrap()
                .1
                .shadowing_db
        })
        .collect();
    let n = draws.len() as f64;
    let m = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(m.abs() < 0.06);
    assert!((sd - 1.0).abs() < 0.05);
}

#[test]
fn capture_range_is_half_sampling_rate() {
    let (lo, hi) = doppler_capture_range(&SounderConfig::default());
    assert!((hi - 1.0 / (2.0 * 4.4e-3)).abs() < 1e-9);
    assert_eq!(lo, -hi);
}

#[test]
fn resampled_smooth_motion_converges() {
    let f = |t: f64| Vector3::new((1.3 * t).sin(), (0.7 * t).cos(), 0.1 * t * t);
    let grid: Vec<f64> = (0..500).map(|i| i as f64 * 0.0173).collect();
    let mut errs = Vec::new();
    for dt in [0.1, 0.05] {
        let times: Vec<f64> = (0..=((9.0 / dt) as usize)).map(|i| i as f64 * dt).collect();
        let pos: Vec<_> = times.iter().map(|&t| f(t)).collect();
        let out = resample_path(&times, &pos, &grid).unwrap();
        errs.push(
            grid.iter()
                .zip(&out)
                .map(|(&t, p)| (p - f(t)).norm())
                .fold(0.0, f64::max),
        );
    }
    assert!(errs[0] < 1e-4, "{errs:?}");
    assert!(errs[0] / errs[1] > 10.0, "{errs:?}");
}

proptest! {
    #[test]
    fn static_magnitude_follows_log_distance_law(d in 0.3..20.0f64, n_exp in 1.0..4.0f64, pg in -60.0..-20.0f64) {
        let cfg = quiet(4);
        let ch = ChannelParams { pg_d0_db: pg, n_exp, ..exact() };
        let path = vec![Vector3::zeros(); 4];
        let s = synthesize_s21(&path, &Vector3::new(0.0, d, 0.0), &cfg, &ch, 1.0, 0).unwrap();
        let want = pg - 10.0 * n_exp * d.log10();
        for db in s.magnitude_db() {
            prop_assert!((db - want).abs() < 1e-9);
        }
    }

    #[test]
    fn spline_interpolates_knots_and_reproduces_cubics(
        gaps in prop::collection::vec(0.1..2.0f64, 4..20),
        c in prop::array::uniform4(-2.0..2.0f64),
    ) {
        let mut x = vec![0.0];
        for g in &gaps {
            x.push(x.last().unwrap() + g);
        }
        let p = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
        let y: Vec<f64> = x.iter().map(|&t| p(t)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for (&xi, &yi) in x.iter().zip(&y) {
            prop_assert!((s.eval(xi) - yi).abs() < 1e-9 * (1.0 + yi.abs()));
        }
        let end = *x.last().unwrap();
        for k in 0..50 {
            let t = end * k as f64 / 49.0;
            prop_assert!((s.eval(t) - p(t)).abs() < 1e-7 * (1.0 + p(t).abs()));
        }
    }
}
