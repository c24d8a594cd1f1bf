//! Lyapunov bookkeeping and the run-level statistics derived from a log.
//!
//! The ideal weights `W*` are unknown, so `V_c` and `V_a` use `Ŵ` and the
//! `w̄` bounds in `ι₂` are replaced by the largest observed `‖Ŵ‖²`. The
//! critic approximation error bound has no runtime value and enters `ι₂` as 0.

use std::fmt::Write as _;

use super::log::{LogRow, SimLog};
use super::SimConfig;
use crate::constraint::ConstraintSpec;
use crate::control::barrier_contribution;
use crate::plant::inertia_matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovEntry {
    pub v1: f64,
    pub vr: f64,
    pub vc: f64,
    pub va: f64,
    pub total: f64,
}

/// Evaluates `V₁`, `V_r`, `V_c`, `V_a` for one row. A row outside the barrier
/// domain gets `V₁ = ∞`.
pub fn lyapunov_diagnostics(row: &LogRow, config: &SimConfig) -> LyapunovEntry {
    let beta = config.constraint.beta;
    let v1 = config.constraint.mode.szblf_total(&row.z1_gamma, &row.kc, beta).unwrap_or(f64::INFINITY);
    let m = inertia_matrix(&config.plant, &row.q);
    let vr = v1 + 0.5 * row.z2.dot(&(m * row.z2));
    let vc = row.wc_norm * row.wc_norm / (2.0 * config.critic.sigma);
    let va = 0.5 * row.wa_norm * row.wa_norm;
    LyapunovEntry { v1, vr, vc, va, total: vr + vc + va }
}

/// Run-level constants of the ultimate-boundedness estimate `V̇ ≤ −ι₁V + ι₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovDiagnostics {
    /// Inertia eigenvalue bounds over all configurations.
    pub mu1: f64,
    pub mu2: f64,
    /// Observed extremes of `‖S_c‖²` and `‖S_a‖²`.
    pub sc_min: f64,
    pub sc_max: f64,
    pub sa_max: f64,
    /// Largest observed `‖Ŵ_c‖²` and `‖Ŵ_a‖²_F`.
    pub wc_sq_max: f64,
    pub wa_sq_max: f64,
    pub iota1: f64,
    pub iota2: f64,
    pub v_total_max: f64,
    pub v_total_final: f64,
    /// Every component of every row is nonnegative.
    pub nonnegative: bool,
}

impl LyapunovDiagnostics {
    pub fn from_log(log: &SimLog, config: &SimConfig) -> Self {
        let (mu1, mu2) = config.plant.inertia_bounds();
        let fold = |f: fn(&super::log::RowExtras) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
            log.extras.iter().map(f).fold(init, pick)
        };
        let sc_min = fold(|e| e.critic_basis_sq, f64::INFINITY, f64::min);
        let sc_max = fold(|e| e.critic_basis_sq, 0.0, f64::max);
        let sa_max = fold(|e| e.actor_basis_sq, 0.0, f64::max);
        let wc_sq_max = log.rows.iter().map(|r| r.wc_norm * r.wc_norm).fold(0.0, f64::max);
        let wa_sq_max = log.rows.iter().map(|r| r.wa_norm * r.wa_norm).fold(0.0, f64::max);

        let (ctl, critic, actor) = (&config.controller, &config.critic, &config.actor);
        let sc_lower = if sc_min.is_finite() { sc_min } else { 0.0 };
        let iota1 = [
            ctl.k1,
            2.0 * (ctl.k2 - 0.5) / mu2,
            (critic.eta - 2.0 * actor.sigma * actor.ka * actor.ka * sc_lower) / critic.sigma,
            actor.sigma * actor.eta,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        let iota2 = 0.5 * (critic.eta + 2.0 * actor.sigma * actor.ka * actor.ka * sc_max) * wc_sq_max
            + 0.5 * actor.sigma * (actor.eta + sa_max) * wa_sq_max;

        let mut v_total_max: f64 = 0.0;
        let mut v_total_final = 0.0;
        let mut nonnegative = true;
        for row in &log.rows {
            let e = lyapunov_diagnostics(row, config);
            nonnegative &= e.v1 >= 0.0 && e.vr >= 0.0 && e.vc >= 0.0 && e.va >= 0.0;
            v_total_max = v_total_max.max(e.total);
            v_total_final = e.total;
        }
        Self {
            mu1,
            mu2,
            sc_min: sc_lower,
            sc_max,
            sa_max,
            wc_sq_max,
            wa_sq_max,
            iota1,
            iota2,
            v_total_max,
            v_total_final,
            nonnegative,
        }
    }

    /// `ι₂/ι₁`, the asymptotic level the estimate allows `V` to settle at.
    pub fn ultimate_bound(&self) -> f64 {
        self.iota2 / self.iota1
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let fields = [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("sc_sq_min", self.sc_min),
            ("sc_sq_max", self.sc_max),
            ("sa_sq_max", self.sa_max),
            ("wc_sq_max", self.wc_sq_max),
            ("wa_sq_max", self.wa_sq_max),
            ("iota1", self.iota1),
            ("iota2", self.iota2),
            ("ultimate_bound", self.ultimate_bound()),
            ("v_total_max", self.v_total_max),
            ("v_total_final", self.v_total_final),
        ];
        for (k, v) in fields {
            let _ = writeln!(out, "{k} = {v:.16e}");
        }
        let _ = writeln!(out, "v_nonnegative = {}", self.nonnegative);
        out
    }
}

/// Mean magnitude of the barrier torque term over near-target and
/// near-boundary samples, one sample per joint per row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEffort {
    /// `|Z₁^γ| < 0.2·k_c`
    pub low_mean: f64,
    pub low_count: usize,
    /// `|Z₁^γ| > 0.8·k_c`
    pub high_mean: f64,
    pub high_count: usize,
}

impl BarrierEffort {
    /// `None` when either sample set is empty.
    pub fn ordered(&self) -> Option<bool> {
        (self.low_count > 0 && self.high_count > 0).then_some(self.low_mean < self.high_mean)
    }
}

pub fn barrier_effort_split(log: &SimLog, constraint: &ConstraintSpec) -> BarrierEffort {
    let (mut low, mut low_n, mut high, mut high_n) = (0.0, 0usize, 0.0, 0usize);
    for row in &log.rows {
        let Ok(b) = barrier_contribution(&row.z1_gamma, row.gamma, &row.kc, constraint.mode, constraint.beta) else {
            continue;
        };
        for i in 0..2 {
            let ratio = row.z1_gamma[i].abs() / row.kc[i];
            if ratio < 0.2 {
                low += b[i].abs();
                low_n += 1;
            } else if ratio > 0.8 {
                high += b[i].abs();
                high_n += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n > 0 { s / n as f64 } else { f64::NAN };
    BarrierEffort { low_mean: mean(low, low_n), low_count: low_n, high_mean: mean(high, high_n), high_count: high_n }
}

/// Mean of `‖Z₁‖₂` over rows with `t ≥ from`; NaN when there are none.
pub fn steady_state_error(log: &SimLog, from: f64) -> f64 {
    let norms: Vec<f64> = log.rows.iter().filter(|r| r.t >= from).map(|r| r.z1.norm()).collect();
    if norms.is_empty() {
        f64::NAN
    } else {
        norms.iter().sum::<f64>() / norms.len() as f64
    }
}

/// Largest `‖Z₂‖` in the log.
pub(crate) fn max_z2(log: &SimLog) -> f64 {
    log.rows.iter().map(|r| r.z2.norm()).fold(0.0, f64::max)
}
