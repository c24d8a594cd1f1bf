//! Critic temporal-difference machinery and the actor/critic adaptation laws.
//!
//! Both laws are continuous-time: they return weight *rates* that the
//! simulator integrates alongside the plant.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    /// Learning rate `σ_c`.
    pub sigma: f64,
    /// Damping `η_c`.
    pub eta: f64,
    /// Discount horizon `ψ` (s).
    pub psi: f64,
    /// State cost on the stacked error `[Z₁; Z₂]`.
    pub q: DMatrix<f64>,
    /// Input cost on `τ`.
    pub r: DMatrix<f64>,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self { sigma: 50.0, eta: 0.5, psi: 1.0, q: DMatrix::identity(4, 4), r: DMatrix::identity(2, 2) * 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorConfig {
    /// Learning rate `σ_a`.
    pub sigma: f64,
    /// Damping `η_a`.
    pub eta: f64,
    /// Critic coupling gain `k_a`.
    pub ka: f64,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self { sigma: 50.0, eta: 0.01, ka: 0.01 }
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be finite and strictly positive"))
    }
}

fn check_psd(key: &str, m: &DMatrix<f64>, dim: usize) -> Result<(), ConfigError> {
    if m.shape() != (dim, dim) {
        return Err(ConfigError::invalid(key, format!("must be {dim}x{dim}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::invalid(key, "entries must be finite"));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(ConfigError::invalid(key, "must be symmetric"));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-12 * m.amax().max(1.0) {
        return Err(ConfigError::invalid(key, format!("must be positive semidefinite (min eigenvalue {min_eig})")));
    }
    Ok(())
}

impl CriticConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("critic.sigma", self.sigma)?;
        positive("critic.eta", self.eta)?;
        positive("critic.psi", self.psi)?;
        check_psd("critic.q", &self.q, 4)?;
        check_psd("critic.r", &self.r, 2)
    }
}

impl ActorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("actor.sigma", self.sigma)?;
        positive("actor.eta", self.eta)?;
        positive("actor.ka", self.ka)
    }

    /// Checks `η_c > 2·σ_a·k_a²·S̄_c` with `S̄_c = critic_neurons`, the upper
    /// bound of `‖S_c‖²`.
    pub fn check_stability(&self, critic: &CriticConfig, critic_neurons: usize) -> Result<(), ConfigError> {
        let rhs = 2.0 * self.sigma * self.ka * self.ka * critic_neurons as f64;
        if critic.eta > rhs {
            Ok(())
        } else {
            Err(ConfigError::invalid(
                "actor.ka",
                format!("stability requires critic.eta > 2*sigma_a*ka^2*neurons ({} <= {rhs})", critic.eta),
            ))
        }
    }
}

/// Estimated weights of both networks.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningState {
    /// `k_c × 1`
    pub wc: DVector<f64>,
    /// `k_a × n`
    pub wa: DMatrix<f64>,
}

impl LearningState {
    pub fn zeros(critic_neurons: usize, actor_neurons: usize, joints: usize) -> Self {
        Self { wc: DVector::zeros(critic_neurons), wa: DMatrix::zeros(actor_neurons, joints) }
    }

    pub fn is_finite(&self) -> bool {
        self.wc.iter().chain(self.wa.iter()).all(|v| v.is_finite())
    }
}

/// `r = ZᵀQZ + τᵀRτ`.
pub fn instantaneous_cost(z: &DVector<f64>, tau: &Vector2<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let tau = DVector::from_column_slice(tau.as_slice());
    z.dot(&(q * z)) + tau.dot(&(r * &tau))
}

/// `Ĵ = Ŵ_cᵀ S_c`.
pub fn critic_value(wc: &DVector<f64>, sc: &DVector<f64>) -> f64 {
    wc.dot(sc)
}

/// `Λ = −S_c/ψ + ∇S_c · Ż_c`.
pub fn lambda_vector(sc: &DVector<f64>, grad_sc: &DMatrix<f64>, zc_dot: &DVector<f64>, psi: f64) -> DVector<f64> {
    grad_sc * zc_dot - sc / psi
}

/// TD error `δ = r + Ŵ_cᵀΛ`.
pub fn td_error(r: f64, wc: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    r + wc.dot(lambda)
}

/// `Ẇ_c = −σ_c(r + Ŵ_cᵀΛ)Λ − σ_c η_c Ŵ_c`.
pub fn critic_rate(wc: &DVector<f64>, r: f64, lambda: &DVector<f64>, cfg: &CriticConfig) -> DVector<f64> {
    let delta = td_error(r, wc, lambda);
    lambda * (-cfg.sigma * delta) - wc * (cfg.sigma * cfg.eta)
}

/// Actor law, one column per joint:
/// `Ẇ_a,i = −σ_a(Ŵ_a,iᵀS_a + Z₂ᵢ/σ_a + k_aĴ)·S_a − σ_a η_a Ŵ_a,i`.
///
/// The scalar `k_aĴ` is broadcast to every joint.
pub fn actor_rate(
    wa: &DMatrix<f64>,
    sa: &DVector<f64>,
    z2: &Vector2<f64>,
    j_hat: f64,
    cfg: &ActorConfig,
) -> DMatrix<f64> {
    let estimate = wa.tr_mul(sa);
    let mut rate = wa * (-cfg.sigma * cfg.eta);
    for (i, mut col) in rate.column_iter_mut().enumerate() {
        let integrated = estimate[i] + z2[i] / cfg.sigma + cfg.ka * j_hat;
        col.axpy(-cfg.sigma * integrated, sa, 1.0);
    }
    rate
}
