//! Reference evaluators shared by the integration tests. Each one is written
//! from the governing equations without calling into the crate's solvers.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use uavchan_core::arm::{ArmModel, JointVector};
use uavchan_core::calibration::OnePortTerms;

/// Rigid-body state derivative with quadratic drag, written out in scalars.
/// `x` = (p_n, p_e, p_d, v_n, v_e, v_d, φ, θ, ψ, p, q, r), `u` = (F, τφ, τθ, τψ).
pub fn quad_rates(
    x: &[f64; 12],
    u: &[f64; 4],
    wind: &[f64; 3],
    m: f64,
    j: &[f64; 3],
    cd: &[[f64; 3]; 3],
    g: f64,
) -> [f64; 12] {
    let [_, _, _, vn, ve, vd, phi, th, psi, p, q, r] = *x;
    let [f, tp, tt, ts] = *u;
    let rel = [wind[0] - vn, wind[1] - ve, wind[2] - vd];
    let sq = [
        rel[0] * rel[0].abs(),
        rel[1] * rel[1].abs(),
        rel[2] * rel[2].abs(),
    ];
    let mut fd = [0.0; 3];
    for i in 0..3 {
        for k in 0..3 {
            fd[i] += cd[i][k] * sq[k];
        }
    }
    [
        vn,
        ve,
        vd,
        (-phi.cos() * th.sin() * psi.cos() - phi.sin() * psi.sin()) * f / m + fd[0] / m,
        (-phi.cos() * th.sin() * psi.sin() + phi.sin() * psi.cos()) * f / m + fd[1] / m,
        g - phi.cos() * th.cos() * f / m + fd[2] / m,
        p + phi.sin() * th.tan() * q + phi.cos() * th.tan() * r,
        phi.cos() * q - phi.sin() * r,
        phi.sin() / th.cos() * q + phi.cos() / th.cos() * r,
        (j[1] - j[2]) / j[0] * q * r + tp / j[0],
        (j[2] - j[0]) / j[1] * p * r + tt / j[1],
        (j[0] - j[1]) / j[2] * p * q + ts / j[2],
    ]
}

/// Short/open/load closed form: load reads e00 directly, and the short and
/// open offsets `a`, `b` satisfy `a(1 − e11) = b(1 + e11) = e10e01`.
pub fn sol_closed_form(short: Complex64, open: Complex64, load: Complex64) -> OnePortTerms {
    let e00 = load;
    let a = open - e00;
    let b = e00 - short;
    let e11 = (a - b) / (a + b);
    OnePortTerms {
        e00,
        e11,
        e10e01: a * 2.0 * b / (a + b),
    }
}

/// Error model with |e11| = 0.3 and arbitrary phases.
pub fn random_terms(rng: &mut ChaCha8Rng) -> OnePortTerms {
    let polar = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        Complex64::from_polar(rng.random_range(lo..hi), rng.random_range(-PI..PI))
    };
    OnePortTerms {
        e00: polar(rng, 0.0, 0.5),
        e11: Complex64::from_polar(0.3, rng.random_range(-PI..PI)),
        e10e01: polar(rng, 0.05, 1.0),
    }
}

/// Joint vector drawn from the inner 90% of each joint range.
pub fn random_q(model: &ArmModel, rng: &mut ChaCha8Rng) -> JointVector {
    JointVector::from_fn(|i, _| {
        let span = model.q_max[i] - model.q_min[i];
        model.q_min[i] + span * rng.random_range(0.05..0.95)
    })
}

pub fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}
