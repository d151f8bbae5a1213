//! Kinematic emulation of a 7-DOF serial arm carrying the receiver.
//!
//! The chain uses standard Denavit–Hartenberg links
//! (`T_i = Rz(θ_i)·Tz(d_i)·Tx(a_i)·Rx(α_i)`). [`ArmModel::sawyer_like`] gives a
//! geometry with the proportions of a Rethink Sawyer:
//!
//! | joint | a (m) | d (m)   | α     |
//! |-------|-------|---------|-------|
//! | 1     | 0.081 | 0.317   | −π/2  |
//! | 2     | 0     | 0.1925  | +π/2  |
//! | 3     | 0     | 0.400   | −π/2  |
//! | 4     | 0     | −0.1685 | +π/2  |
//! | 5     | 0     | 0.400   | −π/2  |
//! | 6     | 0     | 0.1363  | +π/2  |
//! | 7     | 0     | 0.2337  | 0     |
//!
//! The last link includes a 0.10 m antenna mount on the flange, so the tool
//! point lies on the joint-7 axis. Joint rates come from a singular-value
//! pseudo-inverse that only adds damping close to singular configurations.

use nalgebra::{
    Isometry3, Matrix3, Rotation3, SMatrix, SVector, Translation3, UnitQuaternion, Vector3, Vector6,
};
use std::f64::consts::FRAC_PI_2;

use crate::quadcopter::Trajectory;

pub const N_JOINTS: usize = 7;
pub type JointVector = SVector<f64, N_JOINTS>;
pub type Jacobian = SMatrix<f64, 6, N_JOINTS>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ArmError {
    #[error("joint {joint} angle {value:.6} rad outside [{min:.4}, {max:.4}]")]
    JointLimit {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid arm parameter: {0}")]
    InvalidParameter(String),
    #[error("workspace exceeded at t = {t:.3} s: position error {error:.4} m (tolerance {tolerance:.4} m)")]
    WorkspaceExceeded { t: f64, error: f64, tolerance: f64 },
}

type Result<T> = std::result::Result<T, ArmError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhLink {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    pub theta_offset: f64,
}

impl DhLink {
    fn transform(&self, q: f64) -> Isometry3<f64> {
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), q + self.theta_offset);
        let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        Isometry3::from_parts(Translation3::new(0.0, 0.0, self.d), rz)
            * Isometry3::from_parts(Translation3::new(self.a, 0.0, 0.0), rx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub links: [DhLink; N_JOINTS],
    pub q_min: JointVector,
    pub q_max: JointVector,
    pub qdot_max: JointVector,
    /// End-effector linear speed cap (m/s).
    pub speed_cap: f64,
    /// Damping scale of the pseudo-inverse.
    pub lambda_dls: f64,
}

impl ArmModel {
    pub fn sawyer_like() -> Self {
        let link = |a, d, alpha| DhLink {
            a,
            d,
            alpha,
            theta_offset: 0.0,
        };
        Self {
            links: [
                link(0.081, 0.317, -FRAC_PI_2),
                link(0.0, 0.1925, FRAC_PI_2),
                link(0.0, 0.400, -FRAC_PI_2),
                link(0.0, -0.1685, FRAC_PI_2),
                link(0.0, 0.400, -FRAC_PI_2),
                link(0.0, 0.1363, FRAC_PI_2),
                link(0.0, 0.2337, 0.0),
            ],
            q_min: JointVector::from_column_slice(&[
                -3.0503, -3.8095, -3.0426, -3.0439, -2.9761, -2.9761, -4.7124,
            ]),
            q_max: JointVector::from_column_slice(&[
                3.0503, 2.2736, 3.0426, 3.0439, 2.9761, 2.9761, 4.7124,
            ]),
            qdot_max: JointVector::from_column_slice(&[
                1.74, 1.328, 1.957, 1.957, 3.485, 3.485, 4.545,
            ]),
            speed_cap: 0.5,
            lambda_dls: 1e-3,
        }
    }

    /// Well-conditioned start configuration with the tool pointing forward.
    pub fn ready_pose() -> JointVector {
        JointVector::from_column_slice(&[0.0, -0.6, 0.0, 1.4, 0.0, 0.8, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        for j in 0..N_JOINTS {
            if !(self.q_min[j] < self.q_max[j]) {
                return Err(ArmError::InvalidParameter(format!(
                    "joint {} limits are not ordered",
                    j + 1
                )));
            }
            if !(self.qdot_max[j] > 0.0) {
                return Err(ArmError::InvalidParameter(format!(
                    "joint {} rate limit must be positive",
                    j + 1
                )));
            }
        }
        if !(self.speed_cap > 0.0 && self.lambda_dls >= 0.0) {
            return Err(ArmError::InvalidParameter(
                "speed cap and damping must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn check_limits(&self, q: &JointVector) -> Result<()> {
        for j in 0..N_JOINTS {
            if !(q[j] >= self.q_min[j] && q[j] <= self.q_max[j]) {
                return Err(ArmError::JointLimit {
                    joint: j + 1,
                    value: q[j],
                    min: self.q_min[j],
                    max: self.q_max[j],
                });
            }
        }
        Ok(())
    }

    /// Frames `0..=7` (base first) without limit checks.
    fn frames(&self, q: &JointVector) -> [Isometry3<f64>; N_JOINTS + 1] {
        let mut frames = [Isometry3::identity(); N_JOINTS + 1];
        for i in 0..N_JOINTS {
            frames[i + 1] = frames[i] * self.links[i].transform(q[i]);
        }
        frames
    }

    fn tool(&self, q: &JointVector) -> Isometry3<f64> {
        self.links
            .iter()
            .zip(q.iter())
            .fold(Isometry3::identity(), |acc, (l, &qi)| acc * l.transform(qi))
    }
}

/// End-effector pose: position (m) and orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    /// (roll φ, pitch θ, yaw ψ) with `R = Rz(ψ)·Ry(θ)·Rx(φ)`.
    pub fn ypr(&self) -> Vector3<f64> {
        let (r, p, y) = self.rotation.euler_angles();
        Vector3::new(r, p, y)
    }
}

/// Forward kinematics of the tool point.
pub fn forward_kinematics(model: &ArmModel, q: &JointVector) -> Result<Pose> {
    model.check_limits(q)?;
    let t = model.tool(q);
    Ok(Pose {
        position: t.translation.vector,
        rotation: t.rotation.to_rotation_matrix(),
    })
}

/// Geometric Jacobian: column `i` is the tool twist `[v; ω]` per unit rate of joint `i`.
pub fn jacobian(model: &ArmModel, q: &JointVector) -> Result<Jacobian> {
    model.check_limits(q)?;
    let frames = model.frames(q);
    let p_tool = frames[N_JOINTS].translation.vector;
    let mut j = Jacobian::zeros();
    for i in 0..N_JOINTS {
        let z = frames[i].rotation * Vector3::z();
        let o = frames[i].translation.vector;
        let lin = z.cross(&(p_tool - o));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    Ok(j)
}

/// Maps Euler rates `(φ̇, θ̇, ψ̇)` to angular velocity for the Z-Y-X convention.
pub fn euler_rate_matrix(ypr: &Vector3<f64>) -> Matrix3<f64> {
    let (st, ct) = ypr.y.sin_cos();
    let (sp, cp) = ypr.z.sin_cos();
    Matrix3::new(cp * ct, -sp, 0.0, sp * ct, cp, 0.0, -st, 0.0, 1.0)
}

/// Jacobian of `(x, y, z, φ, θ, ψ)` with respect to the joint angles.
pub fn analytic_jacobian(model: &ArmModel, q: &JointVector) -> Result<Jacobian> {
    let jg = jacobian(model, q)?;
    let ypr = forward_kinematics(model, q)?.ypr();
    let e_inv = euler_rate_matrix(&ypr).try_inverse().ok_or_else(|| {
        ArmError::InvalidParameter("Euler representation singular (|pitch| = π/2)".into())
    })?;
    let mut ja = jg;
    let ang = e_inv * jg.fixed_rows::<3>(3);
    ja.fixed_rows_mut::<3>(3).copy_from(&ang);
    Ok(ja)
}

/// Tool-frame linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EndEffectorCommand {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl EndEffectorCommand {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    /// Scales the linear part down to `cap` if it is faster.
    pub fn capped(mut self, cap: f64) -> Self {
        let speed = self.linear.norm();
        if speed > cap {
            self.linear *= cap / speed;
        }
        self
    }
}

/// Joint rates and conditioning diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointRates {
    pub qdot: JointVector,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Damping actually applied (0 when well conditioned).
    pub damping: f64,
}

impl JointRates {
    pub fn condition_number(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }
}

/// `Q = J⁺·V` via the SVD. Below `σ_min = 10·λ` the inverse is damped with a
/// factor that grows smoothly to `λ` at a singularity; above it the result is
/// the exact minimum-norm solution.
pub fn joint_velocities(j: &Jacobian, v: &EndEffectorCommand, lambda: f64) -> JointRates {
    let svd = j.svd(true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("V^T requested");
    let sig = svd.singular_values;
    let sigma_min = sig.min();
    let sigma_max = sig.max();
    let eps = 10.0 * lambda;
    let damping = if sigma_min >= eps || eps == 0.0 {
        0.0
    } else {
        lambda * (1.0 - (sigma_min / eps).powi(2)).sqrt()
    };
    let vv = v.to_vector();
    let mut qdot = JointVector::zeros();
    for i in 0..sig.len() {
        let s = sig[i];
        let w = s / (s * s + damping * damping);
        if !w.is_finite() || s == 0.0 && damping == 0.0 {
            continue;
        }
        let coeff = u.column(i).dot(&vv) * w;
        qdot += vt.row(i).transpose() * coeff;
    }
    JointRates {
        qdot,
        sigma_min,
        sigma_max,
        damping,
    }
}

/// Joint configuration and tool motion at one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub t: f64,
    pub q: JointVector,
    pub qdot: JointVector,
    pub pose: Pose,
    /// `[v; ω]` realized by `qdot` at `q`.
    pub twist: Vector6<f64>,
}

impl ArmState {
    pub fn linear_velocity(&self) -> Vector3<f64> {
        self.twist.fixed_rows::<3>(0).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingConfig {
    /// Position feedback gain (1/s).
    pub kp: f64,
    /// Orientation feedback gain (1/s).
    pub kr: f64,
    /// Control tick (s).
    pub tick: f64,
    /// Meters of end-effector motion per meter of UAV motion.
    pub scale: f64,
    pub track_orientation: bool,
    /// Time the arm holds its start pose before playback (s).
    pub idle_lead: f64,
    /// Position error that counts as leaving the workspace (m).
    pub workspace_tolerance: f64,
    pub q_start: JointVector,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            kp: 20.0,
            kr: 10.0,
            tick: 0.01,
            scale: 1.0,
            track_orientation: true,
            idle_lead: 0.0,
            workspace_tolerance: 0.05,
            q_start: ArmModel::ready_pose(),
        }
    }
}

/// Arm states over the tracking run, one per control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub states: Vec<ArmState>,
    /// Desired tool positions on the same ticks.
    pub desired: Vec<Vector3<f64>>,
}

impl TrackingResult {
    pub fn rms_position_error(&self) -> f64 {
        let n = self.states.len().max(1) as f64;
        (self
            .states
            .iter()
            .zip(&self.desired)
            .map(|(s, d)| (s.pose.position - d).norm_squared())
            .sum::<f64>()
            / n)
            .sqrt()
    }

    pub fn terminal_error(&self) -> Vector3<f64> {
        match (self.states.last(), self.desired.last()) {
            (Some(s), Some(d)) => s.pose.position - d,
            _ => Vector3::zeros(),
        }
    }

    pub fn peak_speed(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| (w[1].pose.position - w[0].pose.position).norm() / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }
}

/// NED to arm base frame (x forward = north, z up).
fn ned_to_base() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
}

fn rotation_log(r: &Rotation3<f64>) -> Vector3<f64> {
    UnitQuaternion::from_rotation_matrix(r).scaled_axis()
}

struct Reference<'a> {
    traj: &'a Trajectory,
    start: Pose,
    cfg: &'a TrackingConfig,
    c: Matrix3<f64>,
    att0: Rotation3<f64>,
}

impl Reference<'_> {
    fn at(&self, t: f64) -> (Vector3<f64>, Rotation3<f64>) {
        let s = &self.traj.samples;
        let tp = (t - self.cfg.idle_lead).max(0.0);
        if s.len() < 2 {
            return self.map(s[0].position, s[0].attitude);
        }
        let pos = (tp - s[0].t) / self.traj.dt;
        let i = (pos.floor().max(0.0) as usize).min(s.len() - 2);
        let frac = (pos - i as f64).min(1.0);
        let p = s[i].position * (1.0 - frac) + s[i + 1].position * frac;
        let a = s[i].attitude * (1.0 - frac) + s[i + 1].attitude * frac;
        self.map(p, a)
    }

    fn map(&self, p: Vector3<f64>, att: Vector3<f64>) -> (Vector3<f64>, Rotation3<f64>) {
        let p0 = self.traj.samples[0].position;
        let pos = self.start.position + self.c * (p - p0) * self.cfg.scale;
        let rot = if self.cfg.track_orientation {
            let delta = Rotation3::from_euler_angles(att.x, att.y, att.z) * self.att0.inverse();
            let delta_base =
                Rotation3::from_matrix_unchecked(self.c * delta.matrix() * self.c.transpose());
            delta_base * self.start.rotation
        } else {
            self.start.rotation
        };
        (pos, rot)
    }
}

/// Follows `traj` with velocity feed-forward plus proportional pose feedback,
/// at `cfg.tick` with linear interpolation between trajectory samples.
pub fn track_trajectory(
    model: &ArmModel,
    traj: &Trajectory,
    cfg: &TrackingConfig,
) -> Result<TrackingResult> {
    model.validate()?;
    if traj.is_empty() {
        return Err(ArmError::InvalidParameter("empty trajectory".into()));
    }
    if !(cfg.tick > 0.0 && cfg.kp >= 0.0 && cfg.kr >= 0.0 && cfg.scale.is_finite()) {
        return Err(ArmError::InvalidParameter(
            "invalid tracking gains or tick".into(),
        ));
    }
    let start = forward_kinematics(model, &cfg.q_start)?;
    let a0 = traj.samples[0].attitude;
    let reference = Reference {
        traj,
        start,
        cfg,
        c: ned_to_base(),
        att0: Rotation3::from_euler_angles(a0.x, a0.y, a0.z),
    };
    let total = cfg.idle_lead + traj.duration();
    let n_ticks = (total / cfg.tick).round() as usize + 1;
    let dt = cfg.tick;
    let cap = model.speed_cap;

    let mut q = cfg.q_start;
    let mut pose = start;
    let mut states = Vec::with_capacity(n_ticks);
    let mut desired = Vec::with_capacity(n_ticks);
    for k in 0..n_ticks {
        let t = k as f64 * dt;
        let (p_d, r_d) = reference.at(t);
        let (p_next, r_next) = reference.at(t + dt);
        let err = p_d - pose.position;
        if err.norm() > cfg.workspace_tolerance {
            return Err(ArmError::WorkspaceExceeded {
                t,
                error: err.norm(),
                tolerance: cfg.workspace_tolerance,
            });
        }
        let v_ff = (p_next - p_d) / dt;
        let w_ff = rotation_log(&(r_next * r_d.inverse())) / dt;
        let cmd = EndEffectorCommand::new(
            v_ff + err * cfg.kp,
            w_ff + rotation_log(&(r_d * pose.rotation.inverse())) * cfg.kr,
        )
        .capped(cap);

        let j = jacobian(model, &q)?;
        let mut qdot = joint_velocities(&j, &cmd, model.lambda_dls).qdot;
        let over = (0..N_JOINTS)
            .map(|i| qdot[i].abs() / model.qdot_max[i])
            .fold(0.0, f64::max);
        if over > 1.0 {
            qdot /= over;
        }
        let mut q_next = q + qdot * dt;
        let mut next_pose = forward_kinematics(model, &q_next)?;
        for _ in 0..8 {
            let realized = (next_pose.position - pose.position).norm() / dt;
            if realized <= cap {
                break;
            }
            qdot *= cap / realized * (1.0 - 1e-9);
            q_next = q + qdot * dt;
            next_pose = forward_kinematics(model, &q_next)?;
        }
        assert!(
            (next_pose.position - pose.position).norm() / dt <= cap,
            "end-effector speed cap violated"
        );

        states.push(ArmState {
            t,
            q,
            qdot,
            pose,
            twist: j * qdot,
        });
        desired.push(p_d);
        q = q_next;
        pose = next_pose;
    }
    Ok(TrackingResult { states, desired })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadcopter::TrajectorySample;

    fn model() -> ArmModel {
        ArmModel::sawyer_like()
    }

    fn still_trajectory(n: usize) -> Trajectory {
        Trajectory {
            dt: 0.1,
            samples: (0..n)
                .map(|i| TrajectorySample {
                    t: i as f64 * 0.1,
                    position: Vector3::new(0.0, 0.0, -1.5),
                    attitude: Vector3::zeros(),
                    velocity: Vector3::zeros(),
                    attitude_rate: Vector3::zeros(),
                })
                .collect(),
        }
    }

    #[test]
    fn wrist_roll_keeps_tool_position() {
        let m = model();
        let mut q = ArmModel::ready_pose();
        let p0 = forward_kinematics(&m, &q).unwrap().position;
        for a in [-2.0, -0.5, 1.0, 3.0] {
            q[6] = a;
            let p = forward_kinematics(&m, &q).unwrap().position;
            assert!((p - p0).norm() < 1e-12);
        }
    }

    #[test]
    fn limits_are_enforced() {
        let m = model();
        let mut q = ArmModel::ready_pose();
        q[1] = 2.5;
        assert!(matches!(
            forward_kinematics(&m, &q),
            Err(ArmError::JointLimit { joint: 2, .. })
        ));
        assert!(jacobian(&m, &q).is_err());
    }

    #[test]
    fn zero_command_gives_zero_rates() {
        let m = model();
        let j = jacobian(&m, &ArmModel::ready_pose()).unwrap();
        let r = joint_velocities(&j, &EndEffectorCommand::default(), m.lambda_dls);
        assert_eq!(r.qdot, JointVector::zeros());
        assert_eq!(r.damping, 0.0);
    }

    #[test]
    fn ready_pose_is_well_conditioned() {
        let m = model();
        let j = jacobian(&m, &ArmModel::ready_pose()).unwrap();
        let r = joint_velocities(&j, &EndEffectorCommand::default(), m.lambda_dls);
        assert!(r.sigma_min > 0.05, "{}", r.sigma_min);
    }

    #[test]
    fn singular_jacobian_is_damped() {
        let mut j = Jacobian::zeros();
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        let v = EndEffectorCommand::new(Vector3::new(0.1, 0.1, 0.1), Vector3::zeros());
        let r = joint_velocities(&j, &v, 1e-3);
        assert!(r.damping > 0.0);
        assert!(r.qdot.iter().all(|x| x.is_finite()));
        assert!((r.qdot[0] - 0.1).abs() < 1e-6 && (r.qdot[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn command_cap() {
        let c = EndEffectorCommand::new(Vector3::new(3.0, 4.0, 0.0), Vector3::z()).capped(0.5);
        assert!((c.linear.norm() - 0.5).abs() < 1e-12);
        assert_eq!(c.angular, Vector3::z());
    }

    #[test]
    fn stationary_trajectory_holds_pose() {
        let m = model();
        let res = track_trajectory(&m, &still_trajectory(50), &TrackingConfig::default()).unwrap();
        let p0 = res.states[0].pose.position;
        for s in &res.states {
            assert!((s.pose.position - p0).norm() < 1e-6);
        }
    }

    #[test]
    fn idle_lead_holds_start_pose() {
        let m = model();
        let mut traj = still_trajectory(20);
        for (i, s) in traj.samples.iter_mut().enumerate() {
            s.position.x = 0.01 * i as f64;
        }
        let cfg = TrackingConfig {
            idle_lead: 0.5,
            ..Default::default()
        };
        let res = track_trajectory(&m, &traj, &cfg).unwrap();
        let p0 = res.states[0].pose.position;
        for s in res.states.iter().take(50) {
            assert!((s.pose.position - p0).norm() < 1e-9);
        }
        assert!((res.states.last().unwrap().pose.position - p0).norm() > 0.15);
    }

    #[test]
    fn workspace_violation_is_reported() {
        let m = model();
        let mut traj = still_trajectory(20);
        traj.samples[10].position.x = 5.0;
        let err = track_trajectory(&m, &traj, &TrackingConfig::default()).unwrap_err();
        assert!(matches!(err, ArmError::WorkspaceExceeded { .. }));
    }
}
