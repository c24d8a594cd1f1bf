//! Backstepping errors, virtual control `α` and the torque law.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::constraint::{transformed_error, BarrierMode, BoundSample};
use crate::error::{BarrierViolation, ConfigError};

/// Feedback gains. `k2` is applied as `k2·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub k1: f64,
    pub k2: f64,
    /// Weight of the Young's-inequality robustness term in `α`.
    pub a: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { k1: 15.0, k2: 15.0, a: 1.0 }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.k1.is_finite() && self.k1 > 1.0) {
            return Err(ConfigError::invalid("controller.k1", "must exceed 1"));
        }
        if !(self.k2.is_finite() && self.k2 > 0.5) {
            return Err(ConfigError::invalid("controller.k2", "K2 - I/2 must be positive definite (k2 > 0.5)"));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(ConfigError::invalid("controller.a", "must be strictly positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    /// `q − q_d`
    pub z1: Vector2<f64>,
    /// `q̇ − α`
    pub z2: Vector2<f64>,
    /// `γ·Z₁`
    pub z1_gamma: Vector2<f64>,
}

pub fn compute_errors(
    q: &Vector2<f64>,
    qdot: &Vector2<f64>,
    qd: &Vector2<f64>,
    alpha: &Vector2<f64>,
    gamma: f64,
) -> ErrorPair {
    let z1 = q - qd;
    ErrorPair { z1, z2: qdot - alpha, z1_gamma: transformed_error(gamma, &z1) }
}

/// Stabilising function
/// `α = −K₁Z₁ − a·γ̇²·Z₁‖Z₁‖²/(β·gap) + q̇_d + (k̇_c/k_c)·Z₁`,
/// where `gap` is the barrier denominator for the selected mode.
#[allow(clippy::too_many_arguments)]
pub fn virtual_control(
    z1: &Vector2<f64>,
    z1_gamma: &Vector2<f64>,
    gamma_dot: f64,
    bounds: &BoundSample,
    qd_dot: &Vector2<f64>,
    mode: BarrierMode,
    beta: f64,
    cfg: &ControllerConfig,
) -> Result<Vector2<f64>, BarrierViolation> {
    let gaps = mode.gaps(z1_gamma, &bounds.kc)?;
    let z1_sq = z1.norm_squared();
    Ok(Vector2::from_fn(|i, _| {
        -cfg.k1 * z1[i] - cfg.a * gamma_dot * gamma_dot * z1[i] * z1_sq / (beta * gaps[i])
            + qd_dot[i]
            + bounds.kc_dot[i] / bounds.kc[i] * z1[i]
    }))
}

/// Barrier feedback `γ·Z₁^γ/(β·gap)` per joint.
pub fn barrier_contribution(
    z1_gamma: &Vector2<f64>,
    gamma: f64,
    kc: &Vector2<f64>,
    mode: BarrierMode,
    beta: f64,
) -> Result<Vector2<f64>, BarrierViolation> {
    let gaps = mode.gaps(z1_gamma, kc)?;
    Ok(Vector2::from_fn(|i, _| gamma * z1_gamma[i] / (beta * gaps[i])))
}

/// `τ = Ŵ_aᵀS_a − K₂Z₂ − γ·Z₁^γ/(β·gap)`.
#[allow(clippy::too_many_arguments)]
pub fn torque(
    actor_output: &Vector2<f64>,
    z2: &Vector2<f64>,
    z1_gamma: &Vector2<f64>,
    gamma: f64,
    kc: &Vector2<f64>,
    mode: BarrierMode,
    beta: f64,
    cfg: &ControllerConfig,
) -> Result<Vector2<f64>, BarrierViolation> {
    let barrier = barrier_contribution(z1_gamma, gamma, kc, mode, beta)?;
    Ok(actor_output - z2 * cfg.k2 - barrier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const BETA: f64 = 10.0;

    fn bounds(kc: [f64; 2], kc_dot: [f64; 2]) -> BoundSample {
        BoundSample { kc: Vector2::from(kc), kc_dot: Vector2::from(kc_dot) }
    }

    #[test]
    fn errors_vanish_on_target() {
        let q = Vector2::new(0.3, -0.2);
        let v = Vector2::new(1.0, 2.0);
        let e = compute_errors(&q, &v, &q, &v, 0.5);
        assert_eq!((e.z1, e.z2, e.z1_gamma), (Vector2::zeros(), Vector2::zeros(), Vector2::zeros()));
    }

    #[test]
    fn initial_errors_of_reference_experiment() {
        let e = compute_errors(
            &Vector2::new(0.60, 1.80),
            &Vector2::zeros(),
            &Vector2::new(0.0, 1.0),
            &Vector2::zeros(),
            0.0,
        );
        assert_relative_eq!(e.z1, Vector2::new(0.60, 0.80), epsilon = 1e-15);
        assert_eq!(e.z1_gamma, Vector2::zeros());
    }

    #[test]
    fn virtual_control_tracks_reference_velocity_at_zero_error() {
        let cfg = ControllerConfig::default();
        let qd_dot = Vector2::new(2.0, -0.3);
        let a = virtual_control(
            &Vector2::zeros(),
            &Vector2::zeros(),
            0.7,
            &bounds([0.5, 0.55], [0.05, -0.02]),
            &qd_dot,
            BarrierMode::PerJoint,
            BETA,
            &cfg,
        )
        .unwrap();
        assert_eq!(a, qd_dot);
    }

    #[test]
    fn virtual_control_after_activation() {
        let cfg = ControllerConfig::default();
        let z1 = Vector2::new(0.1, 0.0);
        let a = virtual_control(
            &z1,
            &z1,
            0.0,
            &bounds([0.5, 0.55], [0.0, 0.0]),
            &Vector2::new(0.2, 0.0),
            BarrierMode::PerJoint,
            BETA,
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(a, Vector2::new(-1.3, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn virtual_control_full_expression() {
        let cfg = ControllerConfig { k1: 4.0, k2: 3.0, a: 2.0 };
        let z1 = Vector2::new(0.3, -0.4);
        let gamma = 0.5;
        let z1g = z1 * gamma;
        let b = bounds([0.5, 0.6], [0.1, -0.2]);
        let a =
            virtual_control(&z1, &z1g, 0.6, &b, &Vector2::new(1.0, 0.5), BarrierMode::PerJoint, BETA, &cfg).unwrap();
        // Hand-composed: ‖Z1‖² = 0.25, gaps = [0.25 − 0.0225, 0.36 − 0.04].
        let e0 = -4.0 * 0.3 - 2.0 * 0.36 * 0.3 * 0.25 / (10.0 * 0.2275) + 1.0 + 0.1 / 0.5 * 0.3;
        let e1 = -4.0 * -0.4 - 2.0 * 0.36 * -0.4 * 0.25 / (10.0 * 0.32) + 0.5 + -0.2 / 0.6 * -0.4;
        assert_relative_eq!(a, Vector2::new(e0, e1), epsilon = 1e-14);
    }

    #[test]
    fn torque_terms() {
        let cfg = ControllerConfig::default();
        let kc = Vector2::new(0.5, 0.55);
        let zero = Vector2::zeros();
        assert_eq!(torque(&zero, &zero, &zero, 1.0, &kc, BarrierMode::PerJoint, BETA, &cfg).unwrap(), zero);
        let t = torque(&zero, &zero, &Vector2::new(0.3, 0.0), 1.0, &kc, BarrierMode::PerJoint, BETA, &cfg).unwrap();
        assert_relative_eq!(t[0], -0.1875, epsilon = 1e-15);
        assert_eq!(t[1], 0.0);
        // γ = 0 switches the barrier off entirely.
        let t = torque(&zero, &zero, &Vector2::new(0.3, 0.4), 0.0, &kc, BarrierMode::PerJoint, BETA, &cfg).unwrap();
        assert_eq!(t, zero);
    }

    #[test]
    fn torque_linear_in_z2() {
        let cfg = ControllerConfig::default();
        let kc = Vector2::new(0.5, 0.55);
        let zero = Vector2::zeros();
        for s in [-2.0, -0.1, 0.0, 0.7, 3.0] {
            let z2 = Vector2::new(s, -0.5 * s);
            let t = torque(&zero, &z2, &zero, 1.0, &kc, BarrierMode::PerJoint, BETA, &cfg).unwrap();
            assert_relative_eq!(t, -cfg.k2 * z2, epsilon = 1e-14);
        }
    }

    #[test]
    fn barrier_dominance() {
        let kc = Vector2::new(0.5, 0.55);
        let mut prev = 0.0;
        for k in 1..=999 {
            let z = Vector2::new(0.5 * k as f64 / 1000.0, 0.0);
            let b = barrier_contribution(&z, 1.0, &kc, BarrierMode::PerJoint, BETA).unwrap()[0];
            assert!(b > prev);
            prev = b;
        }
        assert!(prev > 50.0);
        assert!(barrier_contribution(&Vector2::new(0.5, 0.0), 1.0, &kc, BarrierMode::PerJoint, BETA).is_err());
    }

    #[test]
    fn scalar_mode_shares_denominator() {
        let kc = Vector2::repeat(0.5);
        let z = Vector2::new(0.3, 0.2);
        let b = barrier_contribution(&z, 1.0, &kc, BarrierMode::ScalarMin, BETA).unwrap();
        let gap = 0.25 - 0.13;
        assert_relative_eq!(b, Vector2::new(0.3 / (10.0 * gap), 0.2 / (10.0 * gap)), epsilon = 1e-14);
    }

    #[test]
    fn continuity_across_activation_time() {
        use crate::constraint::shift;
        let cfg = ControllerConfig::default();
        let z1 = Vector2::new(0.2, -0.1);
        let b = bounds([0.5, 0.55], [0.0, 0.0]);
        let eval = |t: f64| {
            let s = shift(t, 2.0).unwrap();
            let z1g = z1 * s.gamma;
            let a = virtual_control(&z1, &z1g, s.gamma_dot, &b, &Vector2::zeros(), BarrierMode::PerJoint, BETA, &cfg)
                .unwrap();
            let tau =
                torque(&Vector2::zeros(), &Vector2::zeros(), &z1g, s.gamma, &b.kc, BarrierMode::PerJoint, BETA, &cfg)
                    .unwrap();
            (a, tau)
        };
        let (a_lo, t_lo) = eval(2.0 - 1e-9);
        let (a_hi, t_hi) = eval(2.0);
        assert!((a_lo - a_hi).amax() < 1e-7);
        assert!((t_lo - t_hi).amax() < 1e-7);
    }

    #[test]
    fn gain_validation() {
        assert!(ControllerConfig::default().validate().is_ok());
        assert!(ControllerConfig { k1: 1.0, ..Default::default() }.validate().is_err());
        assert!(ControllerConfig { k2: 0.4, ..Default::default() }.validate().is_err());
        assert!(ControllerConfig { a: 0.0, ..Default::default() }.validate().is_err());
    }
}
