//! Kinematic simulator of a four-wheel differential-drive robot.
//!
//! Wheel speeds follow PWM duties, optical encoders quantise wheel rotation
//! into ticks, and a PID loop trims the follower side so both encoders
//! advance together. Plans are decoded into [`MovePrimitive`]s and executed
//! open-loop against the grid: the robot has no obstacle sensing.

mod executor;
mod physics;
mod pid;

pub use executor::{
    execute_plan, execute_plan_with_updates, heading_angle, PlanRun, RunSummary, Simulator,
    TrajectorySample,
};
pub use physics::{normalize_angle, physics_step, Encoder, MotorCommand, Robot, RobotPose};
pub use pid::{pid_step, PidGains, PidState};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathcodec::MovePrimitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnMode {
    /// Both sides run opposed; the robot spins about its centre.
    #[default]
    InPlace,
    /// One side halts and the other drives; the robot swings about the halted side.
    Pivot,
}

impl std::str::FromStr for TurnMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_place" | "in-place" => Ok(Self::InPlace),
            "pivot" => Ok(Self::Pivot),
            other => Err(SimError::InvalidParams(format!("unknown turn mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    /// Metres.
    pub wheel_radius: f64,
    /// Metres between the left and right wheel pairs.
    pub track_width: f64,
    /// Metres between adjacent cell centres.
    pub cell_length: f64,
    pub ticks_per_rev: u32,
    /// Wheel rad/s at duty 1.0. Zero models a stalled drive.
    pub max_wheel_speed: f64,
    /// Relative std of the per-step multiplicative wheel-speed noise.
    pub speed_noise_std: f64,
    /// Constant relative speed offset of the left side.
    pub left_bias: f64,
    /// Constant relative speed offset of the right side.
    pub right_bias: f64,
    /// Seconds per simulation step.
    pub dt: f64,
    pub turn_mode: TurnMode,
    pub cruise_duty: f64,
    pub turn_duty: f64,
    /// Duty used for the final tick of every primitive.
    pub creep_duty: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            wheel_radius: 0.03,
            track_width: 0.12,
            cell_length: 0.30,
            ticks_per_rev: 20,
            max_wheel_speed: 10.0,
            speed_noise_std: 0.02,
            left_bias: 0.0,
            right_bias: 0.0,
            dt: 0.01,
            turn_mode: TurnMode::InPlace,
            cruise_duty: 0.5,
            turn_duty: 0.4,
            creep_duty: 0.1,
        }
    }
}

impl RobotParams {
    /// Wheel angle of one encoder slot.
    pub fn tick_angle(&self) -> f64 {
        TAU / self.ticks_per_rev as f64
    }

    /// Ground distance covered by one tick.
    pub fn tick_arc(&self) -> f64 {
        self.wheel_radius * self.tick_angle()
    }

    /// Ticks per wheel for one cell of travel.
    pub fn forward_target_ticks(&self) -> i64 {
        (self.cell_length / (TAU * self.wheel_radius) * self.ticks_per_rev as f64).round() as i64
    }

    /// Ticks on each driven wheel for a quarter turn in the configured mode.
    pub fn turn_target_ticks(&self) -> i64 {
        let lever = match self.turn_mode {
            TurnMode::InPlace => self.track_width / 2.0,
            TurnMode::Pivot => self.track_width,
        };
        let arc = lever * TAU / 4.0;
        (arc / (TAU * self.wheel_radius) * self.ticks_per_rev as f64).round() as i64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("wheel_radius", self.wheel_radius),
            ("track_width", self.track_width),
            ("cell_length", self.cell_length),
            ("dt", self.dt),
            ("cruise_duty", self.cruise_duty),
            ("turn_duty", self.turn_duty),
            ("creep_duty", self.creep_duty),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if self.ticks_per_rev == 0 {
            return Err(SimError::InvalidParams("ticks_per_rev must be positive".into()));
        }
        if !(self.max_wheel_speed.is_finite() && self.max_wheel_speed >= 0.0) {
            return Err(SimError::InvalidParams("max_wheel_speed must be non-negative".into()));
        }
        if !(self.speed_noise_std.is_finite() && self.speed_noise_std >= 0.0) {
            return Err(SimError::InvalidParams("speed_noise_std must be non-negative".into()));
        }
        for (name, bias) in [("left_bias", self.left_bias), ("right_bias", self.right_bias)] {
            if !(bias.is_finite() && bias.abs() < 1.0) {
                return Err(SimError::InvalidParams(format!("{name} must lie in (-1, 1)")));
            }
        }
        for (name, duty) in [
            ("cruise_duty", self.cruise_duty),
            ("turn_duty", self.turn_duty),
            ("creep_duty", self.creep_duty),
        ] {
            if duty > 1.0 {
                return Err(SimError::InvalidParams(format!("{name} must be at most 1")));
            }
        }
        let bias = self.left_bias.abs().max(self.right_bias.abs());
        let max_step_angle = self.max_wheel_speed * (1.0 + bias) * self.dt;
        if max_step_angle >= self.tick_angle() {
            return Err(SimError::InvalidParams(format!(
                "dt too large: {max_step_angle:.4} rad of wheel travel per step exceeds one tick ({:.4} rad)",
                self.tick_angle()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),
    #[error("invalid PID gains: at least one gain must be positive and none negative")]
    InvalidGains,
    #[error("primitive-stalled: {primitive} (primitive #{index}) did not finish within {limit_s:.1} s")]
    Stalled {
        primitive: MovePrimitive,
        index: usize,
        limit_s: f64,
    },
}
