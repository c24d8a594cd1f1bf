use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveShape {
    Sine,
    Cosine,
}

/// Per-joint reference `offset + amplitude·wave(frequency·t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub shape: [WaveShape; 2],
    pub amplitude: [f64; 2],
    pub frequency: [f64; 2],
    pub offset: [f64; 2],
}

impl TrajectorySpec {
    /// `q_d = [sin 2t, cos t]`.
    pub fn reference() -> Self {
        Self {
            shape: [WaveShape::Sine, WaveShape::Cosine],
            amplitude: [1.0, 1.0],
            frequency: [2.0, 1.0],
            offset: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = self.amplitude.iter().chain(&self.frequency).chain(&self.offset);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::invalid("trajectory", "parameters must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub qd: Vector2<f64>,
    pub qd_dot: Vector2<f64>,
    pub qd_ddot: Vector2<f64>,
}

pub fn desired_trajectory(spec: &TrajectorySpec, t: f64) -> TrajectorySample {
    let mut s = TrajectorySample { qd: Vector2::zeros(), qd_dot: Vector2::zeros(), qd_ddot: Vector2::zeros() };
    for i in 0..2 {
        let (a, w) = (spec.amplitude[i], spec.frequency[i]);
        let (sin, cos) = (w * t).sin_cos();
        let (v, d1) = match spec.shape[i] {
            WaveShape::Sine => (sin, cos),
            WaveShape::Cosine => (cos, -sin),
        };
        s.qd[i] = spec.offset[i] + a * v;
        s.qd_dot[i] = a * w * d1;
        s.qd_ddot[i] = -a * w * w * v;
    }
    s
}
