//! Two-link rigid manipulator in the vertical plane.
//!
//! Joint 1 is measured from the downward vertical, joint 2 relative to link 1,
//! so `q = 0` is the hanging equilibrium. The equations of motion are
//!
//! ```text
//! M(q) q̈ + C(q, q̇) q̇ + G(q) = τ + d
//! ```
//!
//! with `C` assembled from the Christoffel symbols of `M`, which makes
//! `Ṁ − 2C` skew-symmetric.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Physical parameters of the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
}

impl Default for ManipulatorParams {
    /// Unit-mass uniform rods of length 0.5 m.
    fn default() -> Self {
        let (m, l) = (1.0, 0.5);
        Self {
            m1: m,
            m2: m,
            l1: l,
            l2: l,
            lc1: l / 2.0,
            lc2: l / 2.0,
            i1: m * l * l / 12.0,
            i2: m * l * l / 12.0,
            g: 9.81,
        }
    }
}

impl ManipulatorParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("plant.m1", self.m1),
            ("plant.m2", self.m2),
            ("plant.l1", self.l1),
            ("plant.l2", self.l2),
            ("plant.lc1", self.lc1),
            ("plant.lc2", self.lc2),
            ("plant.i1", self.i1),
            ("plant.i2", self.i2),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(key, "must be finite and strictly positive"));
            }
        }
        if self.lc1 > self.l1 {
            return Err(ConfigError::invalid("plant.lc1", "must not exceed plant.l1"));
        }
        if self.lc2 > self.l2 {
            return Err(ConfigError::invalid("plant.lc2", "must not exceed plant.l2"));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(ConfigError::invalid("plant.g", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Configuration-independent part of `M11`.
    fn m11_const(&self) -> f64 {
        self.i1 + self.i2 + self.m1 * self.lc1.powi(2) + self.m2 * (self.l1.powi(2) + self.lc2.powi(2))
    }

    fn coupling(&self) -> f64 {
        self.m2 * self.l1 * self.lc2
    }

    /// Eigenvalue bounds `(μ₁, μ₂)` of `M(q)` over all configurations.
    ///
    /// `M` is affine in `cos q₂`; `λ_max` is convex and `λ_min` concave in it,
    /// so the extremes sit at `cos q₂ = ±1`.
    pub fn inertia_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for q2 in [0.0, std::f64::consts::PI] {
            let (a, b) = eigen_sym2(&inertia_matrix(self, &Vector2::new(0.0, q2)));
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }
}

/// Joint positions and velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
}

impl JointState {
    pub fn new(q: Vector2<f64>, qdot: Vector2<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    #[default]
    Zero,
    Sinusoidal,
}

/// External torque disturbance `d(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub mode: DisturbanceMode,
    /// Per-joint amplitude (N·m).
    pub amplitude: [f64; 2],
    /// Angular frequency (rad/s).
    pub frequency: f64,
}

impl DisturbanceSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.amplitude.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(ConfigError::invalid("disturbance.amplitude", "entries must be finite and nonnegative"));
        }
        if !self.frequency.is_finite() {
            return Err(ConfigError::invalid("disturbance.frequency", "must be finite"));
        }
        Ok(())
    }

    /// Upper bound on `‖d(t)‖₁` over all `t`.
    pub fn bound(&self) -> f64 {
        match self.mode {
            DisturbanceMode::Zero => 0.0,
            DisturbanceMode::Sinusoidal => self.amplitude.iter().sum(),
        }
    }
}

pub fn disturbance(spec: &DisturbanceSpec, t: f64) -> Vector2<f64> {
    match spec.mode {
        DisturbanceMode::Zero => Vector2::zeros(),
        DisturbanceMode::Sinusoidal => {
            let s = (spec.frequency * t).sin();
            Vector2::new(spec.amplitude[0] * s, spec.amplitude[1] * s)
        }
    }
}

pub fn inertia_matrix(p: &ManipulatorParams, q: &Vector2<f64>) -> Matrix2<f64> {
    let c2 = q[1].cos();
    let h = p.coupling();
    let m22 = p.i2 + p.m2 * p.lc2.powi(2);
    let m12 = m22 + h * c2;
    let m11 = p.m11_const() + 2.0 * h * c2;
    Matrix2::new(m11, m12, m12, m22)
}

/// Partial derivatives `∂M/∂q₁` and `∂M/∂q₂`.
pub fn inertia_partials(p: &ManipulatorParams, q: &Vector2<f64>) -> [Matrix2<f64>; 2] {
    let s2 = q[1].sin();
    let h = p.coupling();
    let d12 = -h * s2;
    [Matrix2::zeros(), Matrix2::new(2.0 * d12, d12, d12, 0.0)]
}

/// Coriolis/centrifugal matrix from the Christoffel symbols of the first kind,
/// `C_kj = Σ_i ½(∂M_kj/∂q_i + ∂M_ki/∂q_j − ∂M_ij/∂q_k) q̇_i`.
pub fn coriolis_matrix(p: &ManipulatorParams, q: &Vector2<f64>, qdot: &Vector2<f64>) -> Matrix2<f64> {
    let dm = inertia_partials(p, q);
    Matrix2::from_fn(|k, j| (0..2).map(|i| 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * qdot[i]).sum())
}

pub fn potential_energy(p: &ManipulatorParams, q: &Vector2<f64>) -> f64 {
    let y1 = -p.lc1 * q[0].cos();
    let y2 = -p.l1 * q[0].cos() - p.lc2 * (q[0] + q[1]).cos();
    p.g * (p.m1 * y1 + p.m2 * y2)
}

pub fn gravity_vector(p: &ManipulatorParams, q: &Vector2<f64>) -> Vector2<f64> {
    let s1 = q[0].sin();
    let s12 = (q[0] + q[1]).sin();
    let g2 = p.m2 * p.g * p.lc2 * s12;
    let g1 = (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * s1 + g2;
    Vector2::new(g1, g2)
}

/// Solves the equations of motion for `q̈`.
pub fn forward_dynamics(
    p: &ManipulatorParams,
    state: &JointState,
    tau: &Vector2<f64>,
    d: &Vector2<f64>,
) -> Result<Vector2<f64>, SingularInertia> {
    let m = inertia_matrix(p, &state.q);
    let rhs = tau + d - coriolis_matrix(p, &state.q, &state.qdot) * state.qdot - gravity_vector(p, &state.q);
    m.cholesky().map(|c| c.solve(&rhs)).ok_or(SingularInertia)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("inertia matrix is not positive definite; check the plant parameters")]
pub struct SingularInertia;

/// Eigenvalues `(λ_min, λ_max)` of a symmetric 2×2 matrix.
pub fn eigen_sym2(m: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let radius = half_diff.hypot(m[(0, 1)]);
    (mean - radius, mean + radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    /// Kinetic energy written directly from link geometry, independent of
    /// the closed-form inertia matrix.
    fn kinetic_energy(p: &ManipulatorParams, q: &Vector2<f64>, qd: &Vector2<f64>) -> f64 {
        let (a1, a12) = (q[0], q[0] + q[1]);
        let (w1, w12) = (qd[0], qd[0] + qd[1]);
        let v1 = Vector2::new(p.lc1 * a1.cos() * w1, p.lc1 * a1.sin() * w1);
        let v2 = Vector2::new(
            p.l1 * a1.cos() * w1 + p.lc2 * a12.cos() * w12,
            p.l1 * a1.sin() * w1 + p.lc2 * a12.sin() * w12,
        );
        0.5 * p.m1 * v1.norm_squared() + 0.5 * p.m2 * v2.norm_squared() + 0.5 * p.i1 * w1 * w1 + 0.5 * p.i2 * w12 * w12
    }

    fn inertia_from_energy(p: &ManipulatorParams, q: &Vector2<f64>) -> Matrix2<f64> {
        let h = 1e-3;
        Matrix2::from_fn(|i, j| {
            let e = |si: f64, sj: f64| {
                let mut v = Vector2::zeros();
                v[i] += si * h;
                v[j] += sj * h;
                kinetic_energy(p, q, &v)
            };
            (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * h * h)
        })
    }

    #[test]
    fn inertia_symmetric_and_positive() {
        let p = ManipulatorParams::default();
        let m = inertia_matrix(&p, &Vector2::new(0.3, -1.1));
        assert_eq!(m - m.transpose(), Matrix2::zeros());
        let (lo, hi) = eigen_sym2(&m);
        assert!(lo > 0.0 && hi >= lo);
    }

    #[test]
    fn inertia_at_right_angle_matches_energy_oracle() {
        let p = ManipulatorParams::default();
        let q = Vector2::new(0.0, FRAC_PI_2);
        let m = inertia_matrix(&p, &q);
        // Uniform rods: I = 1/48, so M11 = 2/48 + 1/16 + 1/4 + 1/16, M12 = M22 = 1/48 + 1/16.
        assert_relative_eq!(m[(0, 0)], 5.0 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(m[(0, 1)], 1.0 / 12.0, epsilon = 1e-12);
        assert_relative_eq!(m[(1, 1)], 1.0 / 12.0, epsilon = 1e-12);
        let oracle = inertia_from_energy(&p, &q);
        assert_relative_eq!(m, oracle, epsilon = 1e-8);
        for q in [Vector2::new(0.4, -2.0), Vector2::new(-1.0, 0.7)] {
            assert_relative_eq!(inertia_matrix(&p, &q), inertia_from_energy(&p, &q), epsilon = 1e-8);
        }
    }

    #[test]
    fn coriolis_vanishes_at_rest() {
        let p = ManipulatorParams::default();
        assert_eq!(coriolis_matrix(&p, &Vector2::new(0.7, 1.3), &Vector2::zeros()), Matrix2::zeros());
    }

    #[test]
    fn coriolis_matches_closed_form() {
        let p = ManipulatorParams::default();
        let q = Vector2::new(0.2, FRAC_PI_4);
        let qd = Vector2::new(1.0, 1.0);
        // Textbook form with h = -m2 l1 lc2 sin q2.
        let h = -p.m2 * p.l1 * p.lc2 * q[1].sin();
        let expected = Matrix2::new(h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0);
        let c = coriolis_matrix(&p, &q, &qd);
        assert_relative_eq!(c, expected, epsilon = 1e-15);
        assert_relative_eq!(c[(0, 0)], -0.125 * FRAC_PI_4.sin(), epsilon = 1e-15);
        assert_relative_eq!(c[(0, 1)], -0.25 * FRAC_PI_4.sin(), epsilon = 1e-15);
        assert_relative_eq!(c[(1, 0)], 0.125 * FRAC_PI_4.sin(), epsilon = 1e-15);
    }

    #[test]
    fn skew_symmetry_holds() {
        let p = ManipulatorParams::default();
        let q = Vector2::new(0.3, 1.2);
        let qd = Vector2::new(-0.8, 1.7);
        let h = 1e-6;
        let mdot = (inertia_matrix(&p, &(q + qd * h)) - inertia_matrix(&p, &(q - qd * h))) / (2.0 * h);
        let n = mdot - 2.0 * coriolis_matrix(&p, &q, &qd);
        for z in [Vector2::new(1.0, 0.0), Vector2::new(0.3, -0.9), Vector2::new(2.0, 5.0)] {
            assert!((z.transpose() * n * z)[0].abs() < 1e-9);
        }
    }

    #[test]
    fn gravity_zero_without_gravity() {
        let p = ManipulatorParams { g: 0.0, ..Default::default() };
        assert_eq!(gravity_vector(&p, &Vector2::new(1.0, 2.0)), Vector2::zeros());
    }

    #[test]
    fn gravity_matches_potential_gradient() {
        let p = ManipulatorParams::default();
        let fd = |q: Vector2<f64>| {
            let h = 1e-6;
            Vector2::from_fn(|i, _| {
                let mut e = Vector2::zeros();
                e[i] = h;
                (potential_energy(&p, &(q + e)) - potential_energy(&p, &(q - e))) / (2.0 * h)
            })
        };
        let horizontal = Vector2::new(FRAC_PI_2, 0.0);
        let g = gravity_vector(&p, &horizontal);
        assert_relative_eq!(g[0], 9.81, epsilon = 1e-12);
        assert_relative_eq!(g[1], 9.81 * 0.25, epsilon = 1e-12);
        assert_relative_eq!(g, fd(horizontal), max_relative = 1e-6);

        // Both links horizontal maximises |G1| over a sweep of q1 with q2 = 0.
        let peak = (0..=360)
            .map(|k| gravity_vector(&p, &Vector2::new(k as f64 * std::f64::consts::PI / 180.0, 0.0))[0].abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(peak, g[0].abs(), epsilon = 1e-12);
    }

    #[test]
    fn forward_dynamics_cancels_with_exact_torque() {
        let p = ManipulatorParams::default();
        let s = JointState::new(Vector2::new(0.4, -0.3), Vector2::new(1.1, 0.2));
        let tau = coriolis_matrix(&p, &s.q, &s.qdot) * s.qdot + gravity_vector(&p, &s.q);
        let qdd = forward_dynamics(&p, &s, &tau, &Vector2::zeros()).unwrap();
        assert!(qdd.norm() < 1e-12);
    }

    #[test]
    fn forward_dynamics_free_fall() {
        let p = ManipulatorParams::default();
        let s = JointState::new(Vector2::new(0.6, 1.8), Vector2::zeros());
        let qdd = forward_dynamics(&p, &s, &Vector2::zeros(), &Vector2::zeros()).unwrap();
        // Direct 2x2 inverse, no factorisation.
        let m = inertia_matrix(&p, &s.q);
        let g = gravity_vector(&p, &s.q);
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        let expected =
            Vector2::new(-(m[(1, 1)] * g[0] - m[(0, 1)] * g[1]) / det, -(-m[(1, 0)] * g[0] + m[(0, 0)] * g[1]) / det);
        assert_relative_eq!(qdd, expected, epsilon = 1e-12);
    }

    #[test]
    fn disturbance_modes() {
        let zero = DisturbanceSpec::default();
        assert_eq!(disturbance(&zero, 3.0), Vector2::zeros());
        let sin = DisturbanceSpec { mode: DisturbanceMode::Sinusoidal, amplitude: [0.1, 0.1], frequency: 2.0 };
        assert_eq!(disturbance(&sin, 0.0), Vector2::zeros());
        for k in 0..1000 {
            let d = disturbance(&sin, k as f64 * 0.01);
            assert!(d[0].abs() <= 0.1 && d[1].abs() <= 0.1);
            assert!(d.abs().sum() <= sin.bound());
        }
    }

    #[test]
    fn params_validation() {
        assert!(ManipulatorParams::default().validate().is_ok());
        let bad = ManipulatorParams { lc1: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ManipulatorParams { m2: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn inertia_bounds_enclose_samples() {
        let p = ManipulatorParams::default();
        let (lo, hi) = p.inertia_bounds();
        assert!(lo > 0.0);
        for k in 0..720 {
            let (a, b) = eigen_sym2(&inertia_matrix(&p, &Vector2::new(0.0, k as f64 * 0.00872664626)));
            assert!(a >= lo - 1e-12 && b <= hi + 1e-12);
        }
    }
}
