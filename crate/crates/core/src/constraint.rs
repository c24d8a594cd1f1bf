//! Deferred time-varying error constraints.
//!
//! The shifting function `γ(t)` ramps from 0 to 1 over `[0, T_c]`; the
//! transformed error `γ·Z₁` therefore starts at zero no matter how far the
//! initial state is from the bounds. A smooth zone barrier
//! `V = (1/2β)·ln(k²/(k² − z²))` keeps the transformed error inside `k(t)`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{BarrierViolation, ConfigError};

/// Smallest admissible `k² − z²` before a barrier is declared violated.
pub const BARRIER_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSample {
    pub gamma: f64,
    pub gamma_dot: f64,
}

/// Prescribed-time shifting function and its derivative.
pub fn shift(t: f64, tc: f64) -> Result<ShiftSample, ConfigError> {
    if !(tc.is_finite() && tc > 0.0) {
        return Err(ConfigError::invalid("constraint.tc", "must be strictly positive"));
    }
    if t >= tc {
        return Ok(ShiftSample { gamma: 1.0, gamma_dot: 0.0 });
    }
    let s = (tc - t) / tc;
    Ok(ShiftSample { gamma: 1.0 - s * s * s, gamma_dot: 3.0 * s * s / tc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    Constant,
    Sine,
    Cosine,
}

/// `offset + amplitude·sin(ω t)` (or `cos`, or just `offset`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundFunction {
    pub family: BoundFamily,
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
}

impl BoundFunction {
    pub fn constant(value: f64) -> Self {
        Self { family: BoundFamily::Constant, offset: value, amplitude: 0.0, omega: 0.0 }
    }

    pub fn sine(offset: f64, amplitude: f64, omega: f64) -> Self {
        Self { family: BoundFamily::Sine, offset, amplitude, omega }
    }

    pub fn cosine(offset: f64, amplitude: f64, omega: f64) -> Self {
        Self { family: BoundFamily::Cosine, offset, amplitude, omega }
    }

    /// Value and time derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let w = self.omega;
        match self.family {
            BoundFamily::Constant => (self.offset, 0.0),
            BoundFamily::Sine => (self.offset + self.amplitude * (w * t).sin(), self.amplitude * w * (w * t).cos()),
            BoundFamily::Cosine => (self.offset + self.amplitude * (w * t).cos(), -self.amplitude * w * (w * t).sin()),
        }
    }

    /// Infimum over all `t`.
    pub fn lower_envelope(&self) -> f64 {
        match self.family {
            BoundFamily::Constant => self.offset,
            _ => self.offset - self.amplitude.abs(),
        }
    }

    fn is_finite(&self) -> bool {
        self.offset.is_finite() && self.amplitude.is_finite() && self.omega.is_finite()
    }
}

/// How the per-joint error bounds are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorBounds {
    /// `k_{c,i}(t)` given directly.
    Direct([BoundFunction; 2]),
    /// `k_{c,i}(t) = min(k̄_i − q_{d,i}, q_{d,i} − k̲_i)`.
    Position { upper: [BoundFunction; 2], lower: [BoundFunction; 2] },
}

/// Whether each joint carries its own barrier or all joints share the
/// smallest bound with a norm-based denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMode {
    #[default]
    PerJoint,
    ScalarMin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub bounds: ErrorBounds,
    pub mode: BarrierMode,
    /// Activation time `T_c` (s).
    pub tc: f64,
    /// Barrier sharpness `β`.
    pub beta: f64,
}

impl ConstraintSpec {
    /// The two-link experiment: `k_{c1} = 0.5 + 0.1 sin(0.5t)`,
    /// `k_{c2} = 0.45 + 0.1 cos(0.5t)`, `T_c = 2`, `β = 10`.
    pub fn reference() -> Self {
        Self {
            bounds: ErrorBounds::Direct([BoundFunction::sine(0.5, 0.1, 0.5), BoundFunction::cosine(0.45, 0.1, 0.5)]),
            mode: BarrierMode::PerJoint,
            tc: 2.0,
            beta: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tc.is_finite() && self.tc > 0.0) {
            return Err(ConfigError::invalid("constraint.tc", "must be strictly positive"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(ConfigError::invalid("constraint.beta", "must be strictly positive"));
        }
        match &self.bounds {
            ErrorBounds::Direct(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    if !f.is_finite() {
                        return Err(ConfigError::invalid("constraint", format!("joint {} bound is not finite", i + 1)));
                    }
                    if f.lower_envelope() <= 0.0 {
                        return Err(ConfigError::invalid(
                            "constraint",
                            format!("joint {} error bound can reach {} <= 0", i + 1, f.lower_envelope()),
                        ));
                    }
                }
            }
            ErrorBounds::Position { upper, lower } => {
                if upper.iter().chain(lower.iter()).any(|f| !f.is_finite()) {
                    return Err(ConfigError::invalid("constraint", "position bounds must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Per-joint bounds and their time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSample {
    pub kc: Vector2<f64>,
    pub kc_dot: Vector2<f64>,
}

/// Evaluates `k_c(t)` and `k̇_c(t)`. In `ScalarMin` mode both entries hold the
/// smallest per-joint bound. `qd`/`qd_dot` are only used for position bounds.
pub fn error_bound(
    spec: &ConstraintSpec,
    t: f64,
    qd: &Vector2<f64>,
    qd_dot: &Vector2<f64>,
) -> Result<BoundSample, ConfigError> {
    let mut kc = Vector2::zeros();
    let mut kc_dot = Vector2::zeros();
    match &spec.bounds {
        ErrorBounds::Direct(fs) => {
            for i in 0..2 {
                (kc[i], kc_dot[i]) = fs[i].eval(t);
            }
        }
        ErrorBounds::Position { upper, lower } => {
            for i in 0..2 {
                let (hi, hi_dot) = upper[i].eval(t);
                let (lo, lo_dot) = lower[i].eval(t);
                if lo >= hi {
                    return Err(ConfigError::invalid(
                        "constraint",
                        format!("joint {} lower position bound {lo} is not below upper bound {hi} at t = {t}", i + 1),
                    ));
                }
                let to_upper = hi - qd[i];
                let to_lower = qd[i] - lo;
                // Derivative of the active branch of the min.
                if to_upper <= to_lower {
                    (kc[i], kc_dot[i]) = (to_upper, hi_dot - qd_dot[i]);
                } else {
                    (kc[i], kc_dot[i]) = (to_lower, qd_dot[i] - lo_dot);
                }
            }
        }
    }
    for i in 0..2 {
        if !(kc[i] > 0.0) {
            return Err(ConfigError::invalid(
                "constraint",
                format!("joint {} error bound is {} <= 0 at t = {t}", i + 1, kc[i]),
            ));
        }
    }
    if spec.mode == BarrierMode::ScalarMin {
        let j = if kc[0] <= kc[1] { 0 } else { 1 };
        kc = Vector2::repeat(kc[j]);
        kc_dot = Vector2::repeat(kc_dot[j]);
    }
    Ok(BoundSample { kc, kc_dot })
}

pub fn transformed_error(gamma: f64, z1: &Vector2<f64>) -> Vector2<f64> {
    z1 * gamma
}

fn gap(z: f64, k: f64) -> Result<f64, BarrierViolation> {
    let gap = k * k - z * z;
    if gap < BARRIER_GUARD || gap.is_nan() {
        Err(BarrierViolation { joint: 0, z_abs: z.abs(), bound: k })
    } else {
        Ok(gap)
    }
}

/// `ln(k²/(k² − z²))` computed without cancellation for small `z`.
fn log_barrier(z: f64, k: f64) -> f64 {
    -(-(z / k).powi(2)).ln_1p()
}

/// Smooth zone barrier value `(1/2β)·ln(k²/(k² − z²))`.
pub fn szblf_value(z: f64, kc: f64, beta: f64) -> Result<f64, BarrierViolation> {
    gap(z, kc)?;
    Ok(log_barrier(z, kc) / (2.0 * beta))
}

/// Barrier feedback `γ z / (β(k² − z²))`.
pub fn barrier_term(z: f64, kc: f64, beta: f64, gamma: f64) -> Result<f64, BarrierViolation> {
    let g = gap(z, kc)?;
    Ok(gamma * z / (beta * g))
}

/// `z²/(β(k² − z²)) − (1/2β)·ln(k²/(k² − z²))`, nonnegative on `|z| < k`.
pub fn lemma3_margin(xi: f64, k: f64, beta: f64) -> Result<f64, BarrierViolation> {
    let g = gap(xi, k)?;
    Ok(xi * xi / (beta * g) - log_barrier(xi, k) / (2.0 * beta))
}

impl BarrierMode {
    /// Denominator `k² − z²` seen by each joint's barrier.
    ///
    /// Per-joint mode uses `k_i² − z_i²`; scalar mode uses `k² − ‖z‖²` for
    /// every joint.
    pub fn gaps(self, z: &Vector2<f64>, kc: &Vector2<f64>) -> Result<Vector2<f64>, BarrierViolation> {
        match self {
            BarrierMode::PerJoint => {
                let mut out = Vector2::zeros();
                for i in 0..2 {
                    out[i] = gap(z[i], kc[i]).map_err(|v| BarrierViolation { joint: i, ..v })?;
                }
                Ok(out)
            }
            BarrierMode::ScalarMin => {
                let joint = if z[0].abs() >= z[1].abs() { 0 } else { 1 };
                let g = gap(z.norm(), kc[0]).map_err(|v| BarrierViolation { joint, ..v })?;
                Ok(Vector2::repeat(g))
            }
        }
    }

    /// Total barrier Lyapunov value `V₁`.
    pub fn szblf_total(self, z: &Vector2<f64>, kc: &Vector2<f64>, beta: f64) -> Result<f64, BarrierViolation> {
        match self {
            BarrierMode::PerJoint => {
                (0..2).map(|i| szblf_value(z[i], kc[i], beta).map_err(|v| BarrierViolation { joint: i, ..v })).sum()
            }
            BarrierMode::ScalarMin => szblf_value(z.norm(), kc[0], beta),
        }
    }
}
