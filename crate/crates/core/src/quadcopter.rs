//! Rigid-body quadcopter with quadratic wind drag and a cascaded PID hover
//! controller.
//!
//! State layout for the 12-vector form: `[p_n, p_e, p_d, v_n, v_e, v_d, φ, θ, ψ, p, q, r]`.
//! Translational dynamics are in NED; the thrust acts along body `-z`.

use nalgebra::{Matrix3, SVector, Vector3};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::wind::TurbulenceSeries;

pub type StateVector = SVector<f64, 12>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QuadError {
    #[error("pitch {theta:.6} rad reached the ±π/2 attitude singularity")]
    Singularity { theta: f64 },
    #[error("invalid quadcopter parameter: {0}")]
    InvalidParameter(String),
    #[error("wind series covers {available:.3} s but {required:.3} s are required")]
    WindTooShort { available: f64, required: f64 },
}

type Result<T> = std::result::Result<T, QuadError>;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    pub mass: f64,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    /// Drag coefficient matrix (kg/m).
    pub cd: Matrix3<f64>,
    pub g: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            jx: 0.01,
            jy: 0.01,
            jz: 0.02,
            cd: Matrix3::identity() * 0.1,
            g: 9.81,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(QuadError::InvalidParameter(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        if !(self.jx > 0.0 && self.jy > 0.0 && self.jz > 0.0) {
            return Err(QuadError::InvalidParameter(
                "moments of inertia must be positive".into(),
            ));
        }
        if self.cd.iter().any(|&c| !(c >= 0.0)) {
            return Err(QuadError::InvalidParameter(
                "drag coefficients must be non-negative".into(),
            ));
        }
        if !(self.g.is_finite()) {
            return Err(QuadError::InvalidParameter("gravity must be finite".into()));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadState {
    pub p_n: f64,
    pub p_e: f64,
    pub p_d: f64,
    pub v_n: f64,
    pub v_e: f64,
    pub v_d: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub omega_p: f64,
    pub omega_q: f64,
    pub omega_r: f64,
}

impl QuadState {
    /// At rest at `position` with level attitude and heading `psi`.
    pub fn at_rest(position: Vector3<f64>, psi: f64) -> Self {
        Self {
            p_n: position.x,
            p_e: position.y,
            p_d: position.z,
            psi,
            ..Default::default()
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.p_n, self.p_e, self.p_d)
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.v_n, self.v_e, self.v_d)
    }

    pub fn attitude(&self) -> Vector3<f64> {
        Vector3::new(self.phi, self.theta, self.psi)
    }

    pub fn rates(&self) -> Vector3<f64> {
        Vector3::new(self.omega_p, self.omega_q, self.omega_r)
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[
            self.p_n,
            self.p_e,
            self.p_d,
            self.v_n,
            self.v_e,
            self.v_d,
            self.phi,
            self.theta,
            self.psi,
            self.omega_p,
            self.omega_q,
            self.omega_r,
        ])
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            p_n: x[0],
            p_e: x[1],
            p_d: x[2],
            v_n: x[3],
            v_e: x[4],
            v_d: x[5],
            phi: x[6],
            theta: x[7],
            psi: x[8],
            omega_p: x[9],
            omega_q: x[10],
            omega_r: x[11],
        }
    }

    /// Euler angle rates `(φ̇, θ̇, ψ̇)` from the body rates.
    pub fn euler_rates(&self) -> Result<Vector3<f64>> {
        check_pitch(self.theta)?;
        let (sphi, cphi) = self.phi.sin_cos();
        let (tth, cth) = (self.theta.tan(), self.theta.cos());
        let (p, q, r) = (self.omega_p, self.omega_q, self.omega_r);
        Ok(Vector3::new(
            p + sphi * tth * q + cphi * tth * r,
            cphi * q - sphi * r,
            sphi / cth * q + cphi / cth * r,
        ))
    }
}

fn check_pitch(theta: f64) -> Result<()> {
    if !(theta.abs() < FRAC_PI_2) || (FRAC_PI_2 - theta.abs()) < 1e-9 {
        return Err(QuadError::Singularity { theta });
    }
    Ok(())
}

/// Total thrust and body moments.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub thrust: f64,
    pub tau_phi: f64,
    pub tau_theta: f64,
    pub tau_psi: f64,
}

/// Quadratic drag `C_d·(rel ⊙ |rel|)` with `rel = V_w − ṗ`.
pub fn drag_force(cd: &Matrix3<f64>, wind: &Vector3<f64>, velocity: &Vector3<f64>) -> Vector3<f64> {
    let rel = wind - velocity;
    cd * rel.component_mul(&rel.abs())
}

/// Time derivative of the 12-state.
pub fn quad_derivatives(
    state: &QuadState,
    u: &ControlInput,
    wind: &Vector3<f64>,
    params: &QuadParams,
) -> Result<StateVector> {
    check_pitch(state.theta)?;
    let (sphi, cphi) = state.phi.sin_cos();
    let (sth, cth) = state.theta.sin_cos();
    let (spsi, cpsi) = state.psi.sin_cos();
    let f_m = u.thrust / params.mass;
    let fd = drag_force(&params.cd, wind, &state.velocity()) / params.mass;

    let acc = Vector3::new(
        (-cphi * sth * cpsi - sphi * spsi) * f_m + fd.x,
        (-cphi * sth * spsi + sphi * cpsi) * f_m + fd.y,
        params.g - cphi * cth * f_m + fd.z,
    );
    let euler = state.euler_rates()?;
    let (p, q, r) = (state.omega_p, state.omega_q, state.omega_r);
    let (jx, jy, jz) = (params.jx, params.jy, params.jz);
    let rate_dot = Vector3::new(
        (jy - jz) / jx * q * r + u.tau_phi / jx,
        (jz - jx) / jy * p * r + u.tau_theta / jy,
        (jx - jy) / jz * p * q + u.tau_psi / jz,
    );

    let mut d = StateVector::zeros();
    d.fixed_rows_mut::<3>(0).copy_from(&state.velocity());
    d.fixed_rows_mut::<3>(3).copy_from(&acc);
    d.fixed_rows_mut::<3>(6).copy_from(&euler);
    d.fixed_rows_mut::<3>(9).copy_from(&rate_dot);
    Ok(d)
}

/// One classical Runge–Kutta step with input and wind held over the step.
pub fn rk4_step(
    state: &QuadState,
    u: &ControlInput,
    wind: &Vector3<f64>,
    params: &QuadParams,
    h: f64,
) -> Result<QuadState> {
    if !(h > 0.0) {
        return Err(QuadError::InvalidParameter(format!(
            "step must be positive, got {h}"
        )));
    }
    let x0 = state.to_vector();
    let f = |x: &StateVector| quad_derivatives(&QuadState::from_vector(x), u, wind, params);
    let k1 = f(&x0)?;
    let k2 = f(&(x0 + k1 * (h / 2.0)))?;
    let k3 = f(&(x0 + k2 * (h / 2.0)))?;
    let k4 = f(&(x0 + k3 * h))?;
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let next = QuadState::from_vector(&x1);
    check_pitch(next.theta)?;
    Ok(next)
}

/// Hover target: NED position and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vector3<f64>,
    pub yaw: f64,
}

impl Waypoint {
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        Self { position, yaw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Gains and limits of the cascaded hover controller. Position gains act on
/// acceleration (m/s² per m); attitude gains act on angular acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct HoverGains {
    pub horizontal: PidGains,
    pub vertical: PidGains,
    pub attitude: PidGains,
    pub yaw: PidGains,
    pub max_tilt: f64,
    /// Thrust ceiling as a multiple of `m·g`.
    pub max_thrust_ratio: f64,
    pub max_moment: f64,
    /// Clamp on each integrator state (m·s).
    pub integral_limit: f64,
    /// Position error (m) beyond which an axis integrator holds its value.
    pub integral_band: f64,
}

impl Default for HoverGains {
    fn default() -> Self {
        Self {
            horizontal: PidGains {
                kp: 1.2,
                ki: 0.15,
                kd: 1.8,
            },
            vertical: PidGains {
                kp: 4.0,
                ki: 0.5,
                kd: 4.0,
            },
            attitude: PidGains {
                kp: 400.0,
                ki: 0.0,
                kd: 40.0,
            },
            yaw: PidGains {
                kp: 100.0,
                ki: 0.0,
                kd: 20.0,
            },
            max_tilt: 0.35,
            max_thrust_ratio: 2.0,
            max_moment: 1.0,
            integral_limit: 5.0,
            integral_band: 0.1,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Cascaded PID: position loops command thrust and tilt, attitude loops
/// command moments.
#[derive(Debug, Clone)]
pub struct HoverController {
    pub gains: HoverGains,
    params: QuadParams,
    integral: Vector3<f64>,
}

impl HoverController {
    pub fn new(params: QuadParams, gains: HoverGains) -> Self {
        Self {
            gains,
            params,
            integral: Vector3::zeros(),
        }
    }

    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    /// Control input for `state`; `dt` advances the integrators.
    pub fn command(&mut self, state: &QuadState, waypoint: &Waypoint, dt: f64) -> ControlInput {
        let g = &self.gains;
        let err = waypoint.position - state.position();
        let lim = g.integral_limit;
        let band = g.integral_band;
        for k in 0..3 {
            if err[k].abs() < band {
                self.integral[k] = (self.integral[k] + err[k] * dt).clamp(-lim, lim);
            }
        }
        let v = state.velocity();

        let pid = |k: &PidGains, e: f64, i: f64, rate: f64| k.kp * e + k.ki * i - k.kd * rate;
        let a_n = pid(&g.horizontal, err.x, self.integral.x, v.x);
        let a_e = pid(&g.horizontal, err.y, self.integral.y, v.y);
        let a_d = pid(&g.vertical, err.z, self.integral.z, v.z);

        let m = self.params.mass;
        let grav = self.params.g;
        let tilt = (state.phi.cos() * state.theta.cos()).max(0.5);
        let thrust = (m * (grav - a_d) / tilt).clamp(0.0, g.max_thrust_ratio * m * grav);

        let (spsi, cpsi) = state.psi.sin_cos();
        let a_x = a_n * cpsi + a_e * spsi;
        let a_y = -a_n * spsi + a_e * cpsi;
        let theta_cmd = (-a_x / grav).clamp(-g.max_tilt, g.max_tilt);
        let phi_cmd = (a_y / grav).clamp(-g.max_tilt, g.max_tilt);

        let att = &g.attitude;
        let yaw = &g.yaw;
        let mm = g.max_moment;
        let p = &self.params;
        ControlInput {
            thrust,
            tau_phi: (p.jx * (att.kp * (phi_cmd - state.phi) - att.kd * state.omega_p))
                .clamp(-mm, mm),
            tau_theta: (p.jy * (att.kp * (theta_cmd - state.theta) - att.kd * state.omega_q))
                .clamp(-mm, mm),
            tau_psi: (p.jz
                * (yaw.kp * wrap_angle(waypoint.yaw - state.psi) - yaw.kd * state.omega_r))
                .clamp(-mm, mm),
        }
    }
}

/// Single control evaluation from a fresh controller (no integral history).
pub fn pid_hover(
    state: &QuadState,
    waypoint: &Waypoint,
    params: &QuadParams,
    gains: &HoverGains,
) -> ControlInput {
    HoverController::new(params.clone(), gains.clone()).command(state, waypoint, 0.0)
}

/// One exported trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vector3<f64>,
    /// (φ, θ, ψ)
    pub attitude: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude_rate: Vector3<f64>,
}

/// Uniformly sampled NED/YPR trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Largest horizontal ground speed over the trajectory.
    pub fn peak_horizontal_speed(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.velocity.xy().norm())
            .fold(0.0, f64::max)
    }
}

/// Integration and export settings for [`simulate_hover`].
#[derive(Debug, Clone, PartialEq)]
pub struct HoverSimConfig {
    /// Internal integration step (s).
    pub step: f64,
    /// Export interval (s).
    pub export_dt: f64,
    /// Simulated time discarded before export starts (s).
    pub warmup: f64,
}

impl Default for HoverSimConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            export_dt: 0.1,
            warmup: 30.0,
        }
    }
}

/// Closed-loop hover under `wind`, starting at rest on the waypoint.
///
/// The exported trajectory covers `[0, duration]` measured after the warm-up,
/// sampled every `export_dt`. Wind is evaluated at `warmup + t`.
pub fn simulate_hover(
    params: &QuadParams,
    gains: &HoverGains,
    wind: &TurbulenceSeries,
    waypoint: &Waypoint,
    duration: f64,
    sim: &HoverSimConfig,
) -> Result<Trajectory> {
    params.validate()?;
    if !(sim.step > 0.0 && sim.export_dt >= sim.step && duration >= 0.0 && sim.warmup >= 0.0) {
        return Err(QuadError::InvalidParameter(
            "inconsistent simulation timing".into(),
        ));
    }
    let required = sim.warmup + duration;
    if wind.duration() + 1e-9 < required {
        return Err(QuadError::WindTooShort {
            available: wind.duration(),
            required,
        });
    }
    let per_export = (sim.export_dt / sim.step).round() as usize;
    let warm_steps = (sim.warmup / sim.step).round() as usize;
    let n_export = (duration / sim.export_dt).round() as usize + 1;
    let total_steps = warm_steps + (n_export - 1) * per_export;

    let mut ctrl = HoverController::new(params.clone(), gains.clone());
    let mut state = QuadState::at_rest(waypoint.position, waypoint.yaw);
    let mut samples = Vec::with_capacity(n_export);
    for k in 0..=total_steps {
        if k >= warm_steps && (k - warm_steps) % per_export == 0 {
            let d = k - warm_steps;
            samples.push(TrajectorySample {
                t: (d / per_export) as f64 * sim.export_dt,
                position: state.position(),
                attitude: state.attitude(),
                velocity: state.velocity(),
                attitude_rate: state.euler_rates()?,
            });
        }
        if k == total_steps {
            break;
        }
        let t = k as f64 * sim.step;
        let w = wind.wind_at(t);
        let u = ctrl.command(&state, waypoint, sim.step);
        state = rk4_step(&state, &u, &w, params, sim.step)?;
    }
    Ok(Trajectory {
        dt: sim.export_dt,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_state() -> QuadState {
        QuadState::at_rest(Vector3::new(0.0, 0.0, -1.5), 0.0)
    }

    #[test]
    fn hover_equilibrium_has_zero_derivative() {
        let p = QuadParams::default();
        let u = ControlInput {
            thrust: p.hover_thrust(),
            ..Default::default()
        };
        let d = quad_derivatives(&hover_state(), &u, &Vector3::zeros(), &p).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-15), "{d}");
    }

    #[test]
    fn drag_vanishes_when_moving_with_the_wind() {
        let w = Vector3::new(1.5, -0.4, 0.2);
        let cd = Matrix3::new(0.3, 0.1, 0.0, 0.0, 0.5, 0.2, 0.1, 0.0, 0.9);
        assert_eq!(drag_force(&cd, &w, &w), Vector3::zeros());
    }

    #[test]
    fn singularity_is_reported() {
        let p = QuadParams::default();
        let mut s = hover_state();
        s.theta = FRAC_PI_2;
        assert!(matches!(
            quad_derivatives(&s, &ControlInput::default(), &Vector3::zeros(), &p),
            Err(QuadError::Singularity { .. })
        ));
        s.theta = -2.0;
        assert!(quad_derivatives(&s, &ControlInput::default(), &Vector3::zeros(), &p).is_err());
    }

    #[test]
    fn hover_is_rk4_fixed_point() {
        let p = QuadParams::default();
        let u = ControlInput {
            thrust: p.hover_thrust(),
            ..Default::default()
        };
        let s0 = hover_state();
        let s1 = rk4_step(&s0, &u, &Vector3::zeros(), &p, 1e-3).unwrap();
        assert!((s1.to_vector() - s0.to_vector()).amax() < 1e-12);
    }

    #[test]
    fn free_fall_matches_closed_form() {
        let p = QuadParams {
            cd: Matrix3::zeros(),
            ..Default::default()
        };
        let mut s = QuadState::default();
        for _ in 0..1000 {
            s = rk4_step(&s, &ControlInput::default(), &Vector3::zeros(), &p, 1e-3).unwrap();
        }
        assert!((s.p_d - 0.5 * p.g).abs() < 1e-6);
    }

    #[test]
    fn controller_at_waypoint_commands_hover_thrust() {
        let p = QuadParams::default();
        let wp = Waypoint::new(Vector3::new(0.0, 0.0, -1.5), 0.0);
        let u = pid_hover(&hover_state(), &wp, &p, &HoverGains::default());
        assert!((u.thrust - p.hover_thrust()).abs() < 1e-12);
        assert!(u.tau_phi.abs() < 1e-12 && u.tau_theta.abs() < 1e-12 && u.tau_psi.abs() < 1e-12);
    }

    #[test]
    fn vertical_step_leaves_tilt_moments_zero() {
        let p = QuadParams::default();
        let wp = Waypoint::new(Vector3::new(0.0, 0.0, -2.0), 0.0);
        let u = pid_hover(&hover_state(), &wp, &p, &HoverGains::default());
        assert!(u.thrust > p.hover_thrust());
        assert!(u.tau_phi.abs() < 1e-12 && u.tau_theta.abs() < 1e-12);
    }

    #[test]
    fn thrust_is_saturated() {
        let p = QuadParams::default();
        let gains = HoverGains::default();
        let wp = Waypoint::new(Vector3::new(0.0, 0.0, -500.0), 0.0);
        let u = pid_hover(&hover_state(), &wp, &p, &gains);
        assert!((u.thrust - gains.max_thrust_ratio * p.hover_thrust()).abs() < 1e-12);
        let wp = Waypoint::new(Vector3::new(0.0, 0.0, 500.0), 0.0);
        assert_eq!(pid_hover(&hover_state(), &wp, &p, &gains).thrust, 0.0);
    }

    #[test]
    fn yaw_error_is_wrapped() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_wind_is_rejected() {
        let wind = TurbulenceSeries::calm(11, 0.1);
        let wp = Waypoint::new(Vector3::zeros(), 0.0);
        let err = simulate_hover(
            &QuadParams::default(),
            &HoverGains::default(),
            &wind,
            &wp,
            5.0,
            &HoverSimConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, QuadError::WindTooShort { .. }));
    }
}
