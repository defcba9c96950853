use std::f64::consts::{FRAC_PI_2, PI};
use std::io;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::physics::{normalize_angle, physics_step, MotorCommand, Robot, RobotPose};
use super::pid::{pid_step, PidGains, PidState};
use super::{RobotParams, SimError, TurnMode};
use crate::gridworld::{Action, Cell, GridSpec};
use crate::pathcodec::{decode_moves, rotate, MovePrimitive, PathPlan};
use crate::{seeded_rng, SimRng};

/// Longest any single primitive may run, in simulated seconds.
const MAX_PRIMITIVE_SECONDS: f64 = 120.0;
const TIMEOUT_FACTOR: f64 = 10.0;

/// World heading of a grid direction. Rows grow downwards, so UP is +y.
pub fn heading_angle(action: Action) -> f64 {
    match action {
        Action::Right => 0.0,
        Action::Up => FRAC_PI_2,
        Action::Left => PI,
        Action::Down => -FRAC_PI_2,
    }
}

/// World position of a cell centre: `x = col * pitch`, `y = -row * pitch`.
fn cell_anchor(cell: Cell, pitch: f64) -> (f64, f64) {
    (cell.col as f64 * pitch, -(cell.row as f64) * pitch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Signed ticks accumulated over the whole run.
    pub left_ticks: i64,
    pub right_ticks: i64,
}

/// One robot plus its controller, clock and recorded trajectory.
///
/// Encoders are zeroed at the start of every primitive, so each primitive
/// counts from a slot edge; the run totals in the trajectory keep summing.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: RobotParams,
    pid: Option<PidGains>,
    robot: Robot,
    rng: SimRng,
    time: f64,
    left_total: i64,
    right_total: i64,
    primitives_done: usize,
    trajectory: Vec<TrajectorySample>,
}

impl Simulator {
    /// `pid = None` runs both sides open-loop.
    pub fn new(
        params: RobotParams,
        pid: Option<PidGains>,
        pose: RobotPose,
        seed: u64,
    ) -> Result<Self, SimError> {
        params.validate()?;
        if pid.is_some_and(|g| !g.is_valid()) {
            return Err(SimError::InvalidGains);
        }
        let mut sim = Self {
            params,
            pid,
            robot: Robot::new(pose, &params),
            rng: seeded_rng(seed),
            time: 0.0,
            left_total: 0,
            right_total: 0,
            primitives_done: 0,
            trajectory: Vec::new(),
        };
        sim.record();
        Ok(sim)
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn pose(&self) -> RobotPose {
        self.robot.pose
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn primitives_done(&self) -> usize {
        self.primitives_done
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Vec<TrajectorySample> {
        self.trajectory
    }

    fn record(&mut self) {
        let pose = self.robot.pose;
        self.trajectory.push(TrajectorySample {
            t: self.time,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            left_ticks: self.left_total,
            right_ticks: self.right_total,
        });
    }

    fn step(&mut self, cmd: MotorCommand) {
        let (dl, dr) = physics_step(&mut self.robot, cmd, &self.params, &mut self.rng);
        self.left_total += dl;
        self.right_total += dr;
        self.time += self.params.dt;
        self.record();
    }

    /// Drives until `control` returns `None` or the timeout elapses.
    /// `control` sees the per-primitive tick counts.
    fn run(
        &mut self,
        primitive: MovePrimitive,
        nominal_s: f64,
        mut control: impl FnMut(i64, i64) -> Option<MotorCommand>,
    ) -> Result<(), SimError> {
        self.robot.left.reset();
        self.robot.right.reset();
        let limit_s = (TIMEOUT_FACTOR * nominal_s).min(MAX_PRIMITIVE_SECONDS);
        let max_steps = (limit_s / self.params.dt).ceil() as u64;
        for _ in 0..max_steps {
            match control(self.robot.left.ticks(), self.robot.right.ticks()) {
                Some(cmd) => self.step(cmd),
                None => {
                    self.primitives_done += 1;
                    return Ok(());
                }
            }
        }
        if control(self.robot.left.ticks(), self.robot.right.ticks()).is_none() {
            self.primitives_done += 1;
            return Ok(());
        }
        Err(SimError::Stalled {
            primitive,
            index: self.primitives_done,
            limit_s,
        })
    }

    fn nominal_seconds(&self, ticks: i64, duty: f64) -> f64 {
        let angle = ticks as f64 * self.params.tick_angle();
        let nominal = angle / (duty * self.params.max_wheel_speed);
        if nominal.is_finite() {
            nominal
        } else {
            f64::INFINITY
        }
    }

    pub fn execute_primitive(&mut self, primitive: MovePrimitive) -> Result<(), SimError> {
        let p = self.params;
        let dt = p.dt;
        let gains = self.pid;
        let mut state = PidState::default();
        // follower correction from the tick error between the two sides
        let mut correct = move |lead: i64, follow: i64| {
            gains.map_or(0.0, |g| pid_step(&mut state, (lead - follow) as f64, dt, &g))
        };
        let duty_for = move |remaining: f64, cruise: f64| {
            if remaining <= 1.0 {
                p.creep_duty.min(cruise)
            } else {
                cruise
            }
        };

        match (primitive, p.turn_mode) {
            (MovePrimitive::Forward, _) => {
                let target = p.forward_target_ticks();
                let nominal = self.nominal_seconds(target, p.cruise_duty);
                self.run(primitive, nominal, |l, r| {
                    let mean = (l + r) as f64 / 2.0;
                    if mean >= target as f64 {
                        return None;
                    }
                    let duty = duty_for(target as f64 - mean, p.cruise_duty);
                    let right = (duty + correct(l, r)).clamp(0.0, 1.0);
                    Some(MotorCommand::new(duty, right))
                })
            }
            (MovePrimitive::TurnLeft | MovePrimitive::TurnRight, TurnMode::InPlace) => {
                // +1 spins counter-clockwise: left wheel back, right wheel forward
                let sign = if primitive == MovePrimitive::TurnLeft { 1.0 } else { -1.0 };
                let target = p.turn_target_ticks();
                let nominal = self.nominal_seconds(target, p.turn_duty);
                self.run(primitive, nominal, |l, r| {
                    let (l, r) = (l.abs(), r.abs());
                    let mean = (l + r) as f64 / 2.0;
                    if mean >= target as f64 {
                        return None;
                    }
                    let duty = duty_for(target as f64 - mean, p.turn_duty);
                    let right = (duty + correct(l, r)).clamp(0.0, 1.0);
                    Some(MotorCommand::new(-sign * duty, sign * right))
                })
            }
            (MovePrimitive::TurnLeft | MovePrimitive::TurnRight, TurnMode::Pivot) => {
                let left_turn = primitive == MovePrimitive::TurnLeft;
                let target = p.turn_target_ticks();
                let nominal = self.nominal_seconds(target, p.turn_duty);
                self.run(primitive, nominal, |l, r| {
                    let driven = if left_turn { r } else { l };
                    if driven >= target {
                        return None;
                    }
                    let duty = duty_for((target - driven) as f64, p.turn_duty);
                    Some(if left_turn {
                        MotorCommand::new(0.0, duty)
                    } else {
                        MotorCommand::new(duty, 0.0)
                    })
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRun {
    pub trajectory: Vec<TrajectorySample>,
    pub final_pose: RobotPose,
    /// Nearest cell centre, or `None` when the robot ended off the grid.
    pub final_cell: Option<Cell>,
    /// Grid direction the robot should be facing after the executed primitives.
    pub heading: Action,
    pub success: bool,
    pub primitives_executed: usize,
    pub plan_updates: usize,
    /// Set when a primitive timed out; the trajectory stops there.
    pub stall: Option<SimError>,
    pub wall_time: Duration,
}

impl PlanRun {
    /// Distance from the final pose to the centre of `cell`.
    pub fn position_error(&self, cell: Cell, pitch: f64) -> f64 {
        let (x, y) = cell_anchor(cell, pitch);
        ((self.final_pose.x - x).powi(2) + (self.final_pose.y - y).powi(2)).sqrt()
    }

    /// Absolute angle between the final pose and the expected grid heading.
    pub fn heading_error(&self) -> f64 {
        normalize_angle(self.final_pose.theta - heading_angle(self.heading)).abs()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            final_cell: self.final_cell,
            success: self.success,
            primitive_count: self.primitives_executed,
            plan_updates: self.plan_updates,
            wall_time_s: self.wall_time.as_secs_f64(),
            sim_time_s: self.trajectory.last().map_or(0.0, |s| s.t),
            final_pose: self.final_pose,
            stalled: self.stall.as_ref().map(|e| e.to_string()),
        }
    }

    /// Columns `t,x,y,theta,left_ticks,right_ticks`.
    pub fn write_trajectory_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        for sample in &self.trajectory {
            out.serialize(sample)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub final_cell: Option<Cell>,
    pub success: bool,
    pub primitive_count: usize,
    pub plan_updates: usize,
    pub wall_time_s: f64,
    pub sim_time_s: f64,
    pub final_pose: RobotPose,
    pub stalled: Option<String>,
}

/// Runs `plan` from `spec.start` facing `initial_heading` and reports where
/// the robot ended up.
pub fn execute_plan(
    spec: &GridSpec,
    plan: &PathPlan,
    initial_heading: Action,
    params: &RobotParams,
    gains: &PidGains,
    seed: u64,
) -> Result<PlanRun, SimError> {
    execute_plan_with_updates(spec, plan, initial_heading, params, gains, seed, || None)
}

/// Like [`execute_plan`], but polls `updates` between primitives. A new plan
/// replaces the remaining primitives and is decoded from the robot's current
/// cell and heading.
pub fn execute_plan_with_updates(
    spec: &GridSpec,
    plan: &PathPlan,
    initial_heading: Action,
    params: &RobotParams,
    gains: &PidGains,
    seed: u64,
    mut updates: impl FnMut() -> Option<PathPlan>,
) -> Result<PlanRun, SimError> {
    let started = Instant::now();
    let pitch = params.cell_length;
    let (x, y) = cell_anchor(spec.start, pitch);
    let pose = RobotPose::new(x, y, heading_angle(initial_heading));
    let mut sim = Simulator::new(*params, Some(*gains), pose, seed)?;

    let mut queue = decode_moves(plan, initial_heading).into_iter().collect::<Vec<_>>();
    queue.reverse();
    let mut heading = initial_heading;
    let mut stall = None;
    let mut plan_updates = 0;
    while let Some(primitive) = queue.pop() {
        if let Err(e) = sim.execute_primitive(primitive) {
            stall = Some(e);
            break;
        }
        heading = rotate(heading, primitive);
        if let Some(next) = updates() {
            plan_updates += 1;
            queue = decode_moves(&next, heading);
            queue.reverse();
        }
    }

    let final_pose = sim.pose();
    let col = (final_pose.x / pitch).round();
    let row = (-final_pose.y / pitch).round();
    let final_cell = (row >= 0.0 && col >= 0.0)
        .then(|| Cell::new(row as usize, col as usize))
        .filter(|c| spec.in_bounds(*c));
    let primitives_executed = sim.primitives_done();
    Ok(PlanRun {
        trajectory: sim.into_trajectory(),
        final_pose,
        final_cell,
        heading,
        success: stall.is_none() && final_cell == Some(spec.goal),
        primitives_executed,
        plan_updates,
        stall,
        wall_time: started.elapsed(),
    })
}
