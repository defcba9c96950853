use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::RobotParams;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    PI - (PI - angle).rem_euclid(TAU)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-pi, pi]`, counter-clockwise from +x.
    pub theta: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }
}

/// Normalised PWM duties, clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorCommand {
    left_duty: f64,
    right_duty: f64,
}

impl MotorCommand {
    pub fn new(left_duty: f64, right_duty: f64) -> Self {
        Self {
            left_duty: left_duty.clamp(-1.0, 1.0),
            right_duty: right_duty.clamp(-1.0, 1.0),
        }
    }

    pub fn left(&self) -> f64 {
        self.left_duty
    }

    pub fn right(&self) -> f64 {
        self.right_duty
    }
}

/// Optical encoder on one side. Counts whole slots passed since the last
/// reset, signed by direction of travel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encoder {
    angle: f64,
    ticks_per_rev: u32,
}

impl Encoder {
    pub fn new(ticks_per_rev: u32) -> Self {
        Self {
            angle: 0.0,
            ticks_per_rev,
        }
    }

    /// Wheel angle accumulated since the last reset, radians.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn ticks(&self) -> i64 {
        let slots = self.angle.abs() * self.ticks_per_rev as f64 / TAU;
        (slots.floor() as i64) * self.angle.signum() as i64
    }

    /// Adds `delta` radians and returns the change in ticks.
    pub fn advance(&mut self, delta: f64) -> i64 {
        let before = self.ticks();
        self.angle += delta;
        self.ticks() - before
    }

    pub fn reset(&mut self) {
        self.angle = 0.0;
    }
}

/// Pose plus both encoders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robot {
    pub pose: RobotPose,
    pub left: Encoder,
    pub right: Encoder,
}

impl Robot {
    pub fn new(pose: RobotPose, params: &RobotParams) -> Self {
        Self {
            pose,
            left: Encoder::new(params.ticks_per_rev),
            right: Encoder::new(params.ticks_per_rev),
        }
    }
}

/// Advances the robot by one `dt` of differential-drive kinematics and
/// returns the `(left, right)` tick deltas.
///
/// Wheel speed is `duty * max_wheel_speed * (1 + bias + noise)` with
/// `noise ~ N(0, speed_noise_std)` drawn independently per wheel.
pub fn physics_step<R: Rng + ?Sized>(
    robot: &mut Robot,
    cmd: MotorCommand,
    params: &RobotParams,
    rng: &mut R,
) -> (i64, i64) {
    let (noise_l, noise_r) = if params.speed_noise_std > 0.0 {
        let normal = Normal::new(0.0, params.speed_noise_std).expect("std is positive and finite");
        (normal.sample(rng), normal.sample(rng))
    } else {
        (0.0, 0.0)
    };
    let omega_l = cmd.left() * params.max_wheel_speed * (1.0 + params.left_bias + noise_l);
    let omega_r = cmd.right() * params.max_wheel_speed * (1.0 + params.right_bias + noise_r);
    let r = params.wheel_radius;
    let v = r * (omega_l + omega_r) / 2.0;
    let w = r * (omega_r - omega_l) / params.track_width;
    let dt = params.dt;

    let pose = &mut robot.pose;
    let dtheta = w * dt;
    if dtheta.abs() < 1e-12 {
        pose.x += v * dt * pose.theta.cos();
        pose.y += v * dt * pose.theta.sin();
    } else {
        // exact arc for constant wheel speeds over the step
        let radius = v / w;
        pose.x += radius * ((pose.theta + dtheta).sin() - pose.theta.sin());
        pose.y -= radius * ((pose.theta + dtheta).cos() - pose.theta.cos());
    }
    pose.theta = normalize_angle(pose.theta + dtheta);

    let dl = robot.left.advance(omega_l * dt);
    let dr = robot.right.advance(omega_r * dt);
    (dl, dr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn quiet() -> RobotParams {
        RobotParams {
            speed_noise_std: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((normalize_angle(-5.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        for k in -20..20 {
            let a = normalize_angle(k as f64 * 0.77);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn equal_duties_drive_straight() {
        let p = quiet();
        let mut rng = seeded_rng(0);
        let theta = 0.3;
        let mut robot = Robot::new(RobotPose::new(1.0, 2.0, theta), &p);
        physics_step(&mut robot, MotorCommand::new(0.5, 0.5), &p, &mut rng);
        let expected = p.wheel_radius * 0.5 * p.max_wheel_speed * p.dt;
        assert_eq!(robot.pose.theta, theta);
        assert!((robot.pose.x - 1.0 - expected * theta.cos()).abs() < 1e-12);
        assert!((robot.pose.y - 2.0 - expected * theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn opposite_duties_spin_in_place() {
        let p = quiet();
        let mut rng = seeded_rng(0);
        let mut robot = Robot::new(RobotPose::new(0.5, -0.5, 0.0), &p);
        for _ in 0..10 {
            physics_step(&mut robot, MotorCommand::new(-0.4, 0.4), &p, &mut rng);
        }
        assert!((robot.pose.x - 0.5).abs() < 1e-12);
        assert!((robot.pose.y + 0.5).abs() < 1e-12);
        assert!(robot.pose.theta > 0.0);
    }

    #[test]
    fn zero_duty_changes_nothing() {
        let p = RobotParams::default();
        let mut rng = seeded_rng(0);
        let start = RobotPose::new(0.1, 0.2, 0.3);
        let mut robot = Robot::new(start, &p);
        let ticks = physics_step(&mut robot, MotorCommand::new(0.0, 0.0), &p, &mut rng);
        assert_eq!(ticks, (0, 0));
        assert_eq!(robot.pose, start);
    }

    #[test]
    fn pivot_about_halted_wheel() {
        let p = quiet();
        let mut rng = seeded_rng(0);
        let mut robot = Robot::new(RobotPose::new(0.0, 0.0, 0.0), &p);
        // right wheel drives, left halted: rotation about the left wheel at (0, +track/2)
        for _ in 0..37 {
            physics_step(&mut robot, MotorCommand::new(0.0, 0.7), &p, &mut rng);
        }
        let dist = (robot.pose.x.powi(2) + (robot.pose.y - p.track_width / 2.0).powi(2)).sqrt();
        assert!((dist - p.track_width / 2.0).abs() < 1e-12);
    }

    #[test]
    fn encoder_counts_whole_slots_with_sign() {
        let mut enc = Encoder::new(20);
        let slot = TAU / 20.0;
        assert_eq!(enc.advance(slot * 0.5), 0);
        assert_eq!(enc.advance(slot * 0.6), 1);
        assert_eq!(enc.ticks(), 1);
        enc.reset();
        assert_eq!(enc.advance(-slot * 2.5), -2);
        assert_eq!(enc.ticks(), -2);
    }

    #[test]
    fn clamped_commands() {
        let c = MotorCommand::new(3.0, -7.0);
        assert_eq!((c.left(), c.right()), (1.0, -1.0));
    }
}
