use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Symmetric clamp on the accumulated integral, in tick-seconds.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 0.8,
            ki: 0.1,
            kd: 0.05,
            integral_limit: 10.0,
        }
    }
}

impl PidGains {
    pub fn is_valid(&self) -> bool {
        let gains = [self.kp, self.ki, self.kd];
        gains.iter().all(|g| g.is_finite() && *g >= 0.0)
            && gains.iter().any(|g| *g > 0.0)
            && self.integral_limit >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

/// `kp*e + ki*integral + kd*de/dt`. The derivative is zero on the first call.
pub fn pid_step(state: &mut PidState, error: f64, dt: f64, gains: &PidGains) -> f64 {
    debug_assert!(dt > 0.0);
    state.integral = (state.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let derivative = state.prev_error.map_or(0.0, |prev| (error - prev) / dt);
    state.prev_error = Some(error);
    gains.kp * error + gains.ki * state.integral + gains.kd * derivative
}
