//! Closed-loop simulation of the arm, controller and both networks.
//!
//! The augmented state `[q, q̇, vec(Ŵ_a), Ŵ_c]` is integrated with fixed-step
//! RK4. Each derivative evaluation runs, in order: shift/bounds, errors,
//! `α`, `Z₂`, network outputs, `τ`, forward dynamics, and the learning rates.

mod diagnostics;
mod integrator;
mod log;
mod monitor;
mod trajectory;

pub use diagnostics::{
    barrier_effort_split, lyapunov_diagnostics, steady_state_error, BarrierEffort, LyapunovDiagnostics, LyapunovEntry,
};
pub use integrator::rk4_step;
pub use log::{write_row, LogRow, RowExtras, SimLog, CSV_COLUMNS};
pub use monitor::{constraint_monitor, RunSummary, Violation, ViolationKind};
pub use trajectory::{desired_trajectory, TrajectorySample, TrajectorySpec, WaveShape};

use nalgebra::{DMatrix, DVector, Vector2};

use crate::constraint::{error_bound, shift, ConstraintSpec};
use crate::control::{barrier_contribution, compute_errors, torque, virtual_control, ControllerConfig};
use crate::error::{ConfigError, SimError};
use crate::learning::{
    actor_rate, critic_rate, critic_value, instantaneous_cost, lambda_vector, td_error, ActorConfig, CriticConfig,
    LearningState,
};
use crate::plant::{
    disturbance, eigen_sym2, forward_dynamics, inertia_matrix, DisturbanceSpec, JointState, ManipulatorParams,
};
use crate::rbf::RbfNetwork;

/// Actor input `(q, q̇, Z₁, Z₂)`.
pub const ACTOR_INPUTS: usize = 8;
/// Critic input `[Z₁; Z₂]`.
pub const CRITIC_INPUTS: usize = 4;
/// Largest `h·ρ` accepted for one RK4 substep; the real-axis stability
/// boundary of RK4 is about 2.785.
pub const STIFFNESS_LIMIT: f64 = 1.0;
/// Cap on the substeps taken within one logging step.
pub const MAX_SUBSTEPS: usize = 1 << 16;

/// Hidden-layer layout shared by actor and critic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSpec {
    pub neurons: usize,
    pub center_min: f64,
    pub center_max: f64,
    pub width: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { neurons: 10, center_min: -5.0, center_max: 5.0, width: 1.0 }
    }
}

impl NetworkSpec {
    pub fn build(&self, inputs: usize, outputs: usize) -> Result<RbfNetwork, ConfigError> {
        RbfNetwork::diagonal_lattice(self.neurons, inputs, outputs, self.center_min, self.center_max, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `log_every`-th step in the log.
    pub log_every: usize,
    /// Runs abort as divergent once `‖Ŵ_a‖` or `‖Ŵ_c‖` exceeds this.
    pub weight_ceiling: f64,
    /// Runs abort as divergent once `‖Z₂‖` exceeds this.
    pub z2_ceiling: f64,
    pub initial: JointState,
    pub trajectory: TrajectorySpec,
    pub plant: ManipulatorParams,
    pub constraint: ConstraintSpec,
    pub controller: ControllerConfig,
    pub critic: CriticConfig,
    pub actor: ActorConfig,
    pub network: NetworkSpec,
    pub disturbance: DisturbanceSpec,
}

impl SimConfig {
    /// The two-link experiment with its published gains and initial state.
    pub fn reference() -> Self {
        Self {
            dt: 1e-3,
            t_end: 20.0,
            log_every: 1,
            weight_ceiling: 1e6,
            z2_ceiling: 1e6,
            initial: JointState::new(Vector2::new(0.60, 1.80), Vector2::zeros()),
            trajectory: TrajectorySpec::reference(),
            plant: ManipulatorParams::default(),
            constraint: ConstraintSpec::reference(),
            controller: ControllerConfig::default(),
            critic: CriticConfig::default(),
            actor: ActorConfig::default(),
            network: NetworkSpec::default(),
            disturbance: DisturbanceSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::invalid("sim.dt", "must be strictly positive"));
        }
        if !(self.t_end.is_finite() && self.t_end > self.dt) {
            return Err(ConfigError::invalid("sim.t_end", "must exceed sim.dt"));
        }
        if self.log_every == 0 {
            return Err(ConfigError::invalid("sim.log_every", "must be at least 1"));
        }
        if !(self.weight_ceiling > 0.0) {
            return Err(ConfigError::invalid("sim.weight_ceiling", "must be strictly positive"));
        }
        if !(self.z2_ceiling > 0.0) {
            return Err(ConfigError::invalid("sim.z2_ceiling", "must be strictly positive"));
        }
        if !self.initial.is_finite() {
            return Err(ConfigError::invalid("initial", "state must be finite"));
        }
        self.trajectory.validate()?;
        self.plant.validate()?;
        self.constraint.validate()?;
        self.controller.validate()?;
        self.critic.validate()?;
        self.actor.validate()?;
        self.actor.check_stability(&self.critic, self.network.neurons)?;
        self.disturbance.validate()?;
        self.network.build(ACTOR_INPUTS, 2)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Every intermediate signal of one derivative evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Signals {
    pub t: f64,
    pub joints: JointState,
    pub reference: TrajectorySample,
    pub gamma: f64,
    pub gamma_dot: f64,
    pub kc: Vector2<f64>,
    pub kc_dot: Vector2<f64>,
    pub z1: Vector2<f64>,
    pub z2: Vector2<f64>,
    pub z1_gamma: Vector2<f64>,
    pub alpha: Vector2<f64>,
    pub alpha_dot: Vector2<f64>,
    pub actor_output: Vector2<f64>,
    pub barrier: Vector2<f64>,
    pub tau: Vector2<f64>,
    pub qddot: Vector2<f64>,
    pub cost: f64,
    pub td_error: f64,
    /// `Λ`
    pub lambda: DVector<f64>,
    pub j_hat: f64,
    pub critic_basis: DVector<f64>,
    pub actor_basis: DVector<f64>,
    pub weights: LearningState,
}

/// `α` at the previously accepted step, used for the backward difference `α̇`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaHistory {
    pub t: f64,
    pub alpha: Vector2<f64>,
}

/// Immutable per-run context: configuration plus the two network layouts.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimConfig,
    actor: RbfNetwork,
    critic: RbfNetwork,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let actor = config.network.build(ACTOR_INPUTS, 2)?;
        let critic = config.network.build(CRITIC_INPUTS, 1)?;
        Ok(Self { config, actor, critic })
    }

    pub fn actor_network(&self) -> &RbfNetwork {
        &self.actor
    }

    pub fn critic_network(&self) -> &RbfNetwork {
        &self.critic
    }

    pub fn state_len(&self) -> usize {
        4 + 2 * self.actor.neurons() + self.critic.neurons()
    }

    pub fn initial_state(&self) -> DVector<f64> {
        self.pack(&self.config.initial, &LearningState::zeros(self.critic.neurons(), self.actor.neurons(), 2))
    }

    pub fn pack(&self, joints: &JointState, w: &LearningState) -> DVector<f64> {
        let mut x = DVector::zeros(self.state_len());
        x.fixed_rows_mut::<2>(0).copy_from(&joints.q);
        x.fixed_rows_mut::<2>(2).copy_from(&joints.qdot);
        let na = 2 * self.actor.neurons();
        x.rows_mut(4, na).copy_from_slice(w.wa.as_slice());
        x.rows_mut(4 + na, self.critic.neurons()).copy_from(&w.wc);
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> (JointState, LearningState) {
        let joints = JointState::new(x.fixed_rows::<2>(0).into_owned(), x.fixed_rows::<2>(2).into_owned());
        let ka = self.actor.neurons();
        let wa = DMatrix::from_column_slice(ka, 2, x.rows(4, 2 * ka).as_slice());
        let wc = x.rows(4 + 2 * ka, self.critic.neurons()).into_owned();
        (joints, LearningState { wc, wa })
    }

    /// Evaluates the closed loop at `(t, x)` and returns the state derivative
    /// with every intermediate signal.
    pub fn augmented_derivative(
        &self,
        t: f64,
        x: &DVector<f64>,
        history: Option<&AlphaHistory>,
    ) -> Result<(DVector<f64>, Signals), SimError> {
        let cfg = &self.config;
        let (joints, weights) = self.unpack(x);
        let violation = |v| SimError::ConstraintViolation { time: t, violation: v };

        let reference = desired_trajectory(&cfg.trajectory, t);
        let sh = shift(t, cfg.constraint.tc)?;
        let bounds = error_bound(&cfg.constraint, t, &reference.qd, &reference.qd_dot)?;
        let mode = cfg.constraint.mode;
        let beta = cfg.constraint.beta;

        let z1 = joints.q - reference.qd;
        let z1_gamma = z1 * sh.gamma;
        let alpha =
            virtual_control(&z1, &z1_gamma, sh.gamma_dot, &bounds, &reference.qd_dot, mode, beta, &cfg.controller)
                .map_err(violation)?;
        let errors = compute_errors(&joints.q, &joints.qdot, &reference.qd, &alpha, sh.gamma);

        let actor_input = DVector::from_iterator(
            ACTOR_INPUTS,
            joints.q.iter().chain(joints.qdot.iter()).chain(errors.z1.iter()).chain(errors.z2.iter()).copied(),
        );
        let actor_basis = self.actor.basis(&actor_input);
        let est = weights.wa.tr_mul(&actor_basis);
        let actor_output = Vector2::new(est[0], est[1]);

        let barrier = barrier_contribution(&errors.z1_gamma, sh.gamma, &bounds.kc, mode, beta).map_err(violation)?;
        let tau =
            torque(&actor_output, &errors.z2, &errors.z1_gamma, sh.gamma, &bounds.kc, mode, beta, &cfg.controller)
                .map_err(violation)?;
        let d = disturbance(&cfg.disturbance, t);
        let qddot = forward_dynamics(&cfg.plant, &joints, &tau, &d)
            .map_err(|e| SimError::Divergence { time: t, detail: e.to_string() })?;

        let alpha_dot = match history {
            Some(h) if t > h.t => (alpha - h.alpha) / (t - h.t),
            _ => Vector2::zeros(),
        };
        let critic_input = DVector::from_iterator(CRITIC_INPUTS, errors.z1.iter().chain(errors.z2.iter()).copied());
        let critic_input_dot = DVector::from_iterator(
            CRITIC_INPUTS,
            (joints.qdot - reference.qd_dot).iter().chain((qddot - alpha_dot).iter()).copied(),
        );
        let (critic_basis, critic_grad) = self.critic.basis_with_jacobian(&critic_input);
        let j_hat = critic_value(&weights.wc, &critic_basis);
        let cost = instantaneous_cost(&critic_input, &tau, &cfg.critic.q, &cfg.critic.r);
        let lambda = lambda_vector(&critic_basis, &critic_grad, &critic_input_dot, cfg.critic.psi);
        let delta = td_error(cost, &weights.wc, &lambda);
        let wc_rate = critic_rate(&weights.wc, cost, &lambda, &cfg.critic);
        let wa_rate = actor_rate(&weights.wa, &actor_basis, &errors.z2, j_hat, &cfg.actor);

        let mut dx = DVector::zeros(self.state_len());
        dx.fixed_rows_mut::<2>(0).copy_from(&joints.qdot);
        dx.fixed_rows_mut::<2>(2).copy_from(&qddot);
        let na = wa_rate.len();
        dx.rows_mut(4, na).copy_from_slice(wa_rate.as_slice());
        dx.rows_mut(4 + na, wc_rate.len()).copy_from(&wc_rate);

        let signals = Signals {
            t,
            joints,
            reference,
            gamma: sh.gamma,
            gamma_dot: sh.gamma_dot,
            kc: bounds.kc,
            kc_dot: bounds.kc_dot,
            z1: errors.z1,
            z2: errors.z2,
            z1_gamma: errors.z1_gamma,
            alpha,
            alpha_dot,
            actor_output,
            barrier,
            tau,
            qddot,
            cost,
            td_error: delta,
            lambda,
            j_hat,
            critic_basis,
            actor_basis,
            weights,
        };
        Ok((dx, signals))
    }

    /// Advances the augmented state by one RK4 step.
    pub fn rk4_step(
        &self,
        x: &DVector<f64>,
        t: f64,
        dt: f64,
        history: Option<&AlphaHistory>,
    ) -> Result<DVector<f64>, SimError> {
        let next = rk4_step(x, t, dt, |s, y| self.augmented_derivative(s, y, history).map(|(dx, _)| dx))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Divergence { time: t + dt, detail: "non-finite state".into() });
        }
        Ok(next)
    }

    /// Builds the log row for an evaluated state.
    pub fn log_row(&self, s: &Signals) -> (LogRow, RowExtras) {
        let mut row = LogRow {
            t: s.t,
            q: s.joints.q,
            qdot: s.joints.qdot,
            qd: s.reference.qd,
            qd_dot: s.reference.qd_dot,
            z1: s.z1,
            z2: s.z2,
            z1_gamma: s.z1_gamma,
            gamma: s.gamma,
            kc: s.kc,
            alpha: s.alpha,
            tau: s.tau,
            r: s.cost,
            delta: s.td_error,
            j_hat: s.j_hat,
            wa_norm: s.weights.wa.norm(),
            wc_norm: s.weights.wc.norm(),
            ..Default::default()
        };
        let lyap = lyapunov_diagnostics(&row, &self.config);
        row.v1 = lyap.v1;
        row.vr = lyap.vr;
        row.vc = lyap.vc;
        row.va = lyap.va;
        let extras = RowExtras {
            critic_basis_sq: s.critic_basis.norm_squared(),
            actor_basis_sq: s.actor_basis.norm_squared(),
            inertia_max: eigen_sym2(&inertia_matrix(&self.config.plant, &s.joints.q)).1,
        };
        (row, extras)
    }

    fn check_ceilings(&self, s: &Signals) -> Result<(), SimError> {
        let cfg = &self.config;
        let checks = [
            ("actor weight norm", s.weights.wa.norm(), cfg.weight_ceiling),
            ("critic weight norm", s.weights.wc.norm(), cfg.weight_ceiling),
            ("|Z2|", s.z2.norm(), cfg.z2_ceiling),
        ];
        for (what, value, ceiling) in checks {
            if !(value <= ceiling) {
                return Err(SimError::Divergence {
                    time: s.t,
                    detail: format!("{what} = {value:e} exceeds ceiling {ceiling:e}"),
                });
            }
        }
        Ok(())
    }
}

/// A run that stopped early, with everything logged up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFailure {
    pub error: SimError,
    pub log: SimLog,
}

impl SimFailure {
    /// Plain-text failure report: kind, time, joint and the last valid row.
    pub fn report(&self) -> String {
        let mut out = format!("kind = {}\n", self.error.kind());
        match &self.error {
            SimError::ConstraintViolation { time, violation } => {
                out += &format!("time = {time:.16e}\njoint = {}\n", violation.joint + 1);
                out += &format!("abs_error = {:.16e}\nbound = {:.16e}\n", violation.z_abs, violation.bound);
            }
            SimError::Divergence { time, .. } => out += &format!("time = {time:.16e}\njoint = none\n"),
            SimError::Config(_) => out += "time = none\njoint = none\n",
        }
        out += &format!("message = {}\n", self.error);
        match self.log.last() {
            Some(row) => {
                out += &format!("last_row_columns = {}\nlast_row = ", CSV_COLUMNS.join(","));
                write_row(&mut out, row);
            }
            None => out += "last_row = none\n",
        }
        out
    }
}

/// Integrates from `t = 0` to `t_end`, logging every `log_every` steps.
pub fn run(config: &SimConfig) -> Result<SimLog, SimFailure> {
    let sim = Simulation::new(config.clone()).map_err(|e| SimFailure { error: e.into(), log: SimLog::default() })?;
    sim.run()
}

impl Simulation {
    /// Largest decay rate of the weight laws at the evaluated state,
    /// `σ_c(‖Λ‖² + η_c) + σ_a(‖S_a‖² + η_a)`.
    pub fn stiffness(&self, s: &Signals) -> f64 {
        let (c, a) = (&self.config.critic, &self.config.actor);
        c.sigma * (s.lambda.norm_squared() + c.eta) + a.sigma * (s.actor_basis.norm_squared() + a.eta)
    }

    /// Advances by one logging step `dt`.
    ///
    /// The step is split into `n` equal RK4 substeps so that every substep
    /// satisfies `h·ρ ≤ STIFFNESS_LIMIT`, where `ρ` is [`Simulation::stiffness`]
    /// at the substep start. If a substep finds the limit exceeded the whole
    /// step is redone with `n` doubled. `history` ends at the last substep.
    // `n` only changes right before restarting the attempt loop.
    #[allow(clippy::mut_range_bound)]
    pub fn advance(
        &self,
        x: &DVector<f64>,
        t: f64,
        start: &Signals,
        history: &mut Option<AlphaHistory>,
    ) -> Result<DVector<f64>, SimError> {
        let dt = self.config.dt;
        let mut n = ((dt * self.stiffness(start) / STIFFNESS_LIMIT).ceil() as usize).max(1);
        'attempt: loop {
            if n > MAX_SUBSTEPS {
                return Err(SimError::Divergence {
                    time: t,
                    detail: format!("weight dynamics need more than {MAX_SUBSTEPS} substeps per step"),
                });
            }
            let h = dt / n as f64;
            let mut y = x.clone();
            let mut hist = *history;
            for k in 0..n {
                let tk = t + k as f64 * h;
                let alpha = if k == 0 {
                    start.alpha
                } else {
                    let (_, s) = self.augmented_derivative(tk, &y, hist.as_ref())?;
                    if h * self.stiffness(&s) > STIFFNESS_LIMIT {
                        n *= 2;
                        continue 'attempt;
                    }
                    s.alpha
                };
                let next = self.rk4_step(&y, tk, h, hist.as_ref());
                hist = Some(AlphaHistory { t: tk, alpha });
                match next {
                    Ok(v) => y = v,
                    Err(SimError::Divergence { .. }) if n < MAX_SUBSTEPS => {
                        n *= 2;
                        continue 'attempt;
                    }
                    Err(e) => return Err(e),
                }
            }
            *history = hist;
            return Ok(y);
        }
    }

    pub fn run(&self) -> Result<SimLog, SimFailure> {
        let cfg = &self.config;
        let steps = cfg.steps();
        let mut log = SimLog::default();
        let mut x = self.initial_state();
        let mut history: Option<AlphaHistory> = None;
        for n in 0..=steps {
            let t = n as f64 * cfg.dt;
            let step = self.augmented_derivative(t, &x, history.as_ref()).and_then(|(_, s)| {
                self.check_ceilings(&s)?;
                Ok(s)
            });
            let signals = match step {
                Ok(s) => s,
                Err(error) => return Err(SimFailure { error, log }),
            };
            if n % cfg.log_every == 0 || n == steps {
                let (row, extras) = self.log_row(&signals);
                log.push(row, extras);
            }
            if n == steps {
                break;
            }
            match self.advance(&x, t, &signals, &mut history) {
                Ok(next) => x = next,
                Err(error) => return Err(SimFailure { error, log }),
            }
        }
        Ok(log)
    }
}
