//! PID control law over irregularly spaced samples.
//!
//! The controller observes the queue length `W` only at event instants
//! (arrivals and worker pulls), so the integral and derivative terms are
//! discretised over the actual gap between consecutive samples:
//!
//! ```text
//! e        = W - T                      (or T - W, see SignConvention)
//! integral = clamp(integral + e * dt, -integral_clamp, integral_clamp)
//! deriv    = (e - e_prev) / dt          (0 on the first sample or dt == 0)
//! p_out    = kp * e + ki * integral + kd * deriv
//! P_w      = clamp(round(P + p_out), p_min, p_max)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation of the error signal.
///
/// Gains are stored as given. With [`SignConvention::ErrorIsWMinusT`] and
/// positive gains a queue above target yields a positive correction (scale
/// up). The same loop can be written with [`SignConvention::ErrorIsTMinusW`]
/// and negated gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignConvention {
    #[default]
    #[serde(rename = "w_minus_t")]
    ErrorIsWMinusT,
    #[serde(rename = "t_minus_w")]
    ErrorIsTMinusW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    /// Per second.
    pub ki: f64,
    /// Seconds.
    pub kd: f64,
    pub sign_convention: SignConvention,
    /// Bound on `|integral|`, in request-seconds.
    pub integral_clamp: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("gain {name} must be finite, got {v}")));
            }
        }
        if self.integral_clamp.is_nan() || self.integral_clamp < 0.0 {
            return Err(Error::invalid(format!(
                "integral_clamp must be >= 0, got {}",
                self.integral_clamp
            )));
        }
        Ok(())
    }
}

impl Default for PidGains {
    /// Magnitudes |Kp| = 0.9, Ki = 0, |Kd| = 0.2 with the scale-up-on-excess orientation.
    fn default() -> Self {
        Self {
            kp: 0.9,
            ki: 0.0,
            kd: 0.2,
            sign_convention: SignConvention::ErrorIsWMinusT,
            integral_clamp: 1000.0,
        }
    }
}

/// Memory carried between samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub prev_time: Option<f64>,
}

impl PidState {
    /// In-place variant of [`pid_step`].
    pub fn step(&mut self, gains: &PidGains, error: f64, now: f64) -> Result<f64> {
        let (next, p_out) = pid_step(self, gains, error, now)?;
        *self = next;
        Ok(p_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTarget {
    /// Desired queue length `T`.
    pub target_queue_length: f64,
    pub p_min: u32,
    pub p_max: u32,
}

impl ControlTarget {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_queue_length.is_finite() && self.target_queue_length >= 0.0) {
            return Err(Error::invalid(format!(
                "target queue length must be finite and >= 0, got {}",
                self.target_queue_length
            )));
        }
        if self.p_min > self.p_max {
            return Err(Error::invalid(format!(
                "p_min ({}) exceeds p_max ({})",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }
}

impl Default for ControlTarget {
    fn default() -> Self {
        Self {
            target_queue_length: 25.0,
            p_min: 1,
            p_max: 100,
        }
    }
}

pub fn compute_error(w: u64, target: &ControlTarget, gains: &PidGains) -> f64 {
    let w = w as f64;
    match gains.sign_convention {
        SignConvention::ErrorIsWMinusT => w - target.target_queue_length,
        SignConvention::ErrorIsTMinusW => target.target_queue_length - w,
    }
}

/// Advances the controller by one sample and returns the new state with the
/// real-valued correction `p_out`.
pub fn pid_step(state: &PidState, gains: &PidGains, error: f64, now: f64) -> Result<(PidState, f64)> {
    if !error.is_finite() {
        return Err(Error::invalid(format!("error signal must be finite, got {error}")));
    }
    if !now.is_finite() {
        return Err(Error::invalid(format!("sample time must be finite, got {now}")));
    }
    let dt = match state.prev_time {
        Some(prev) if now < prev => {
            return Err(Error::invalid(format!(
                "sample time went backwards: {now} < {prev}"
            )))
        }
        Some(prev) => now - prev,
        None => 0.0,
    };

    let clamp = gains.integral_clamp;
    let integral = (state.integral + error * dt).clamp(-clamp, clamp);
    let derivative = match state.prev_error {
        Some(prev) if dt > 0.0 => (error - prev) / dt,
        _ => 0.0,
    };

    let p_out = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let next = PidState {
        integral,
        prev_error: Some(error),
        prev_time: Some(now),
    };
    Ok((next, p_out))
}

/// `P_w = clamp(round(P + p_out), p_min, p_max)`, rounding half away from zero.
pub fn wanted_pool(p_current: u32, p_out: f64, target: &ControlTarget) -> u32 {
    let raw = (f64::from(p_current) + p_out).round();
    raw.clamp(f64::from(target.p_min), f64::from(target.p_max)) as u32
}
