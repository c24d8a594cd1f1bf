//! Post-hoc constraint checks and the run summary. Both read only the logged
//! columns, so they can be recomputed from a CSV file.

use std::fmt::Write as _;

use super::diagnostics::{max_z2, steady_state_error};
use super::log::SimLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `|Z₁ᵢ| ≥ k_{c,i}` after activation.
    Raw,
    /// `|Z₁^γᵢ| ≥ k_{c,i}` at any time.
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    /// Zero-based joint index.
    pub joint: usize,
    pub kind: ViolationKind,
    pub value: f64,
    pub bound: f64,
}

/// Lists every `(t, joint)` where a logged error reaches its bound. Raw errors
/// count from `t ≥ tc`; transformed errors count everywhere.
pub fn constraint_monitor(log: &SimLog, tc: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for row in &log.rows {
        for joint in 0..2 {
            let bound = row.kc[joint];
            let checks = [
                (ViolationKind::Transformed, row.z1_gamma[joint].abs(), true),
                (ViolationKind::Raw, row.z1[joint].abs(), row.t >= tc),
            ];
            for (kind, value, active) in checks {
                if active && !(value < bound) {
                    out.push(Violation { t: row.t, joint, kind, value, bound });
                }
            }
        }
    }
    out
}

/// Headline numbers for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub rows: usize,
    pub t_final: f64,
    pub violations: usize,
    pub raw_violations: usize,
    pub transformed_violations: usize,
    pub max_wa_norm: f64,
    pub max_wc_norm: f64,
    pub max_z2_norm: f64,
    /// Start of the steady-state window (last quarter of the run).
    pub steady_from: f64,
    /// Mean `‖Z₁‖₂` over the steady-state window.
    pub steady_error: f64,
    pub steady_error_max: f64,
    pub all_finite: bool,
}

impl RunSummary {
    pub fn from_log(log: &SimLog, tc: f64) -> Self {
        let violations = constraint_monitor(log, tc);
        let raw = violations.iter().filter(|v| v.kind == ViolationKind::Raw).count();
        let t_final = log.last().map_or(0.0, |r| r.t);
        let steady_from = 0.75 * t_final;
        let max = |f: fn(&super::LogRow) -> f64| log.rows.iter().map(f).fold(0.0, f64::max);
        Self {
            rows: log.len(),
            t_final,
            violations: violations.len(),
            raw_violations: raw,
            transformed_violations: violations.len() - raw,
            max_wa_norm: max(|r| r.wa_norm),
            max_wc_norm: max(|r| r.wc_norm),
            max_z2_norm: max_z2(log),
            steady_from,
            steady_error: steady_state_error(log, steady_from),
            steady_error_max: log.rows.iter().filter(|r| r.t >= steady_from).map(|r| r.z1.norm()).fold(0.0, f64::max),
            all_finite: log.rows.iter().all(|r| r.is_finite()),
        }
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rows = {}", self.rows);
        let _ = writeln!(out, "t_final = {:.16e}", self.t_final);
        let _ = writeln!(out, "violations = {}", self.violations);
        let _ = writeln!(out, "raw_violations = {}", self.raw_violations);
        let _ = writeln!(out, "transformed_violations = {}", self.transformed_violations);
        for (k, v) in [
            ("max_wa_norm", self.max_wa_norm),
            ("max_wc_norm", self.max_wc_norm),
            ("max_z2_norm", self.max_z2_norm),
            ("steady_from", self.steady_from),
            ("steady_error_mean", self.steady_error),
            ("steady_error_max", self.steady_error_max),
        ] {
            let _ = writeln!(out, "{k} = {v:.16e}");
        }
        let _ = writeln!(out, "all_finite = {}", self.all_finite);
        out
    }
}
