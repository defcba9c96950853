mod common;

use std::f64::consts::{PI, TAU};

use gridpilot::gridworld::{random_spec, Action, Cell, GridSpec};
use gridpilot::pathcodec::{MovePrimitive, PathPlan};
use gridpilot::robotsim::{
    execute_plan, Encoder, PidGains, RobotParams, RobotPose, Simulator, TurnMode,
};
use gridpilot::seeded_rng;
use proptest::prelude::*;

fn quiet(ticks_per_rev: u32, dt: f64) -> RobotParams {
    RobotParams {
        ticks_per_rev,
        dt,
        speed_noise_std: 0.0,
        ..Default::default()
    }
}

fn forward_error(params: RobotParams) -> f64 {
    let mut sim = Simulator::new(params, Some(PidGains::default()), RobotPose::default(), 0).unwrap();
    sim.execute_primitive(MovePrimitive::Forward).unwrap();
    (sim.pose().x - params.cell_length).abs()
}

#[test]
fn forward_error_bounded_by_tick_arc_and_tightens() {
    let coarse = quiet(20, 0.01);
    let fine = quiet(200, 0.002);
    let coarse_err = forward_error(coarse);
    let fine_err = forward_error(fine);
    assert!(coarse_err < coarse.tick_arc(), "{coarse_err} vs {}", coarse.tick_arc());
    assert!(fine_err < fine.tick_arc(), "{fine_err} vs {}", fine.tick_arc());
    assert!(fine.tick_arc() < coarse.tick_arc() / 9.0);
}

#[test]
fn pid_reduces_drift_under_bias() {
    let params = RobotParams {
        left_bias: 0.02,
        right_bias: -0.02,
        ..Default::default()
    };
    for seed in 0..10 {
        let mut with = Simulator::new(params, Some(PidGains::default()), RobotPose::default(), seed).unwrap();
        with.execute_primitive(MovePrimitive::Forward).unwrap();
        let mut without = Simulator::new(params, None, RobotPose::default(), seed).unwrap();
        without.execute_primitive(MovePrimitive::Forward).unwrap();
        assert!(with.pose().theta.abs() < without.pose().theta.abs(), "seed {seed}");
    }
}

#[test]
fn zero_noise_execution_agrees_with_grid_replay() {
    let mut rng = seeded_rng(99);
    for _ in 0..40 {
        let spec = random_spec(4, 4, 3, &mut rng);
        let actions = common::random_walk(&spec, 10, &mut rng);
        let plan = PathPlan::new(actions.clone()).unwrap();
        let run = execute_plan(&spec, &plan, Action::Up, &quiet(20, 0.01), &PidGains::default(), 0).unwrap();
        assert_eq!(run.final_cell, Some(common::fold_cells(&spec, &actions)), "plan {plan}");
    }
}

#[test]
fn blind_execution_drives_through_obstacles() {
    let spec = GridSpec::new(1, 3, (0, 0), (0, 2), [Cell::new(0, 1)]);
    let plan = PathPlan::from_codes(&[2, 2]).unwrap();
    let run = execute_plan(&spec, &plan, Action::Right, &quiet(20, 0.01), &PidGains::default(), 0).unwrap();
    // the robot has no sensing and ends at the goal cell anyway
    assert_eq!(run.final_cell, Some(Cell::new(0, 2)));
    let replay = spec.replay(&plan, &Default::default()).unwrap();
    assert_eq!(*replay.last().unwrap(), Cell::new(0, 1));
}

#[test]
fn pivot_turns_leave_lateral_offset() {
    let params = RobotParams {
        turn_mode: TurnMode::Pivot,
        ..quiet(20, 0.01)
    };
    let spec = GridSpec::new(3, 3, (2, 0), (0, 2), []);
    let plan = PathPlan::from_codes(&[1, 1, 2, 2]).unwrap();
    let run = execute_plan(&spec, &plan, Action::Up, &params, &PidGains::default(), 0).unwrap();
    assert!(run.heading_error() < 0.05);
    // one pivot shifts the robot by half a track width along both axes
    let offset = run.position_error(spec.goal, params.cell_length);
    let expected = params.track_width / 2.0 * 2f64.sqrt();
    assert!((offset - expected).abs() < 0.02, "offset {offset}, expected about {expected}");
    assert_eq!(run.final_cell, Some(spec.goal));
}

#[test]
fn stalled_drive_reports_partial_run() {
    let params = RobotParams {
        max_wheel_speed: 0.0,
        ..quiet(20, 0.01)
    };
    let spec = GridSpec::new(1, 3, (0, 0), (0, 2), []);
    let plan = PathPlan::from_codes(&[2, 2]).unwrap();
    let run = execute_plan(&spec, &plan, Action::Right, &params, &PidGains::default(), 0).unwrap();
    assert!(!run.success);
    assert_eq!(run.primitives_executed, 0);
    assert!(run.stall.unwrap().to_string().starts_with("primitive-stalled"));
    assert!(!run.trajectory.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_stays_normalised(codes in prop::collection::vec(0u8..4, 1..8), seed in any::<u64>(), noise in 0.0f64..0.05) {
        let spec = GridSpec::new(9, 9, (4, 4), (0, 0), []);
        let plan = PathPlan::from_codes(&codes).unwrap();
        let params = RobotParams { speed_noise_std: noise, ..Default::default() };
        let run = execute_plan(&spec, &plan, Action::Up, &params, &PidGains::default(), seed).unwrap();
        for s in &run.trajectory {
            prop_assert!(s.theta > -PI && s.theta <= PI);
        }
    }

    #[test]
    fn encoder_magnitude_is_monotone(steps in prop::collection::vec(0.0f64..0.3, 1..200), backwards in any::<bool>()) {
        let mut enc = Encoder::new(20);
        let sign = if backwards { -1.0 } else { 1.0 };
        let mut last = 0;
        let mut total = 0.0;
        for s in steps {
            enc.advance(sign * s);
            total += s;
            let ticks = enc.ticks();
            prop_assert!(ticks.abs() >= last);
            prop_assert_eq!(ticks.abs(), (total * 20.0 / TAU).floor() as i64);
            prop_assert!(ticks == 0 || ticks.signum() as f64 == sign);
            last = ticks.abs();
        }
    }
}
