//! Experiment files: TOML with one table per module.
//!
//! A user file is layered over the bundled default, so it only needs the keys
//! it changes. Overrides are `key=value` strings where `key` is either
//! `section.key` or a bare key that names exactly one entry (case-insensitive).

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::constraint::{BarrierMode, BoundFamily, BoundFunction, ConstraintSpec, ErrorBounds};
use crate::control::ControllerConfig;
use crate::error::ConfigError;
use crate::learning::{ActorConfig, CriticConfig};
use crate::plant::{DisturbanceSpec, JointState, ManipulatorParams};
use crate::sim::{NetworkSpec, SimConfig, TrajectorySpec, WaveShape};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// Keys that hold integers; every other integer literal is read as a float.
const INTEGER_KEYS: [&str; 6] = [
    "sim.log_every",
    "network.neurons",
    "verify.seed",
    "verify.grid_points",
    "verify.random_samples",
    "verify.rbf_samples",
];

/// Keys accepted although the default file does not set them.
const OPTIONAL_KEYS: [&str; 8] = [
    "constraint.upper_family",
    "constraint.upper_offset",
    "constraint.upper_amplitude",
    "constraint.upper_omega",
    "constraint.lower_family",
    "constraint.lower_offset",
    "constraint.lower_amplitude",
    "constraint.lower_omega",
];

/// Sample counts, seed and tolerances for the property suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySettings {
    pub seed: u64,
    pub grid_points: usize,
    pub random_samples: usize,
    pub rbf_samples: usize,
    pub fd_step: f64,
    pub shift_tol: f64,
    pub barrier_tol: f64,
    pub skew_tol: f64,
    pub rbf_tol: f64,
    pub dynamics_tol: f64,
    pub td_tol: f64,
    pub rk4_ratio_min: f64,
    pub rk4_ratio_max: f64,
}

/// One config key varied over a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub key: String,
    pub values: Vec<Value>,
}

impl SweepSettings {
    /// The override string for each value, e.g. `controller.k1=5.0`.
    pub fn overrides(&self) -> Vec<String> {
        self.values.iter().map(|v| format!("{}={}", self.key, v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub sim: SimConfig,
    pub verify: VerifySettings,
    pub sweep: SweepSettings,
}

impl Experiment {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate()?;
        let v = &self.verify;
        for (key, n) in [
            ("verify.grid_points", v.grid_points),
            ("verify.random_samples", v.random_samples),
            ("verify.rbf_samples", v.rbf_samples),
        ] {
            if n < 2 {
                return Err(ConfigError::invalid(key, "must be at least 2"));
            }
        }
        for (key, x) in [
            ("verify.fd_step", v.fd_step),
            ("verify.shift_tol", v.shift_tol),
            ("verify.barrier_tol", v.barrier_tol),
            ("verify.skew_tol", v.skew_tol),
            ("verify.rbf_tol", v.rbf_tol),
            ("verify.dynamics_tol", v.dynamics_tol),
            ("verify.td_tol", v.td_tol),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(ConfigError::invalid(key, "must be finite and strictly positive"));
            }
        }
        if !(v.rk4_ratio_min < v.rk4_ratio_max) {
            return Err(ConfigError::invalid("verify.rk4_ratio_min", "must be below verify.rk4_ratio_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    dt: f64,
    t_end: f64,
    log_every: usize,
    weight_ceiling: f64,
    z2_ceiling: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    q: [f64; 2],
    qdot: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectorySection {
    shape: [WaveShape; 2],
    amplitude: [f64; 2],
    frequency: [f64; 2],
    offset: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BoundSource {
    Direct,
    Position,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    source: BoundSource,
    family: [BoundFamily; 2],
    offset: [f64; 2],
    amplitude: [f64; 2],
    omega: [f64; 2],
    mode: BarrierMode,
    tc: f64,
    beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper_family: Option<[BoundFamily; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper_offset: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper_amplitude: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper_omega: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_family: Option<[BoundFamily; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_offset: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_amplitude: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_omega: Option<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CriticSection {
    sigma: f64,
    eta: f64,
    psi: f64,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorSection {
    sigma: f64,
    eta: f64,
    ka: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    neurons: usize,
    center_min: f64,
    center_max: f64,
    width: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    sim: SimSection,
    initial: InitialSection,
    trajectory: TrajectorySection,
    plant: ManipulatorParams,
    disturbance: DisturbanceSpec,
    constraint: ConstraintSection,
    controller: ControllerConfig,
    critic: CriticSection,
    actor: ActorSection,
    network: NetworkSection,
    verify: VerifySettings,
    sweep: SweepSettings,
}

fn bound_functions(
    key: &str,
    family: [BoundFamily; 2],
    offset: [f64; 2],
    amplitude: [f64; 2],
    omega: [f64; 2],
) -> Result<[BoundFunction; 2], ConfigError> {
    let f = |i: usize| BoundFunction { family: family[i], offset: offset[i], amplitude: amplitude[i], omega: omega[i] };
    let out = [f(0), f(1)];
    if out.iter().any(|b| b.family == BoundFamily::Constant && b.amplitude != 0.0) {
        return Err(ConfigError::invalid(key, "constant bounds take amplitude 0"));
    }
    Ok(out)
}

fn matrix(key: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::invalid(key, "must be a square array of arrays"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ConfigFile {
    fn into_experiment(self) -> Result<Experiment, ConfigError> {
        let c = self.constraint;
        let bounds = match c.source {
            BoundSource::Direct => {
                ErrorBounds::Direct(bound_functions("constraint", c.family, c.offset, c.amplitude, c.omega)?)
            }
            BoundSource::Position => {
                let need = |name: &str| {
                    ConfigError::invalid(format!("constraint.{name}"), "required when constraint.source = \"position\"")
                };
                type Pair = Option<[f64; 2]>;
                let side = |prefix: &str,
                            fam: Option<[BoundFamily; 2]>,
                            off: Pair,
                            amp: Pair,
                            om: Pair|
                 -> Result<[BoundFunction; 2], ConfigError> {
                    bound_functions(
                        "constraint",
                        fam.ok_or_else(|| need(&format!("{prefix}_family")))?,
                        off.ok_or_else(|| need(&format!("{prefix}_offset")))?,
                        amp.ok_or_else(|| need(&format!("{prefix}_amplitude")))?,
                        om.ok_or_else(|| need(&format!("{prefix}_omega")))?,
                    )
                };
                ErrorBounds::Position {
                    upper: side("upper", c.upper_family, c.upper_offset, c.upper_amplitude, c.upper_omega)?,
                    lower: side("lower", c.lower_family, c.lower_offset, c.lower_amplitude, c.lower_omega)?,
                }
            }
        };
        let sim = SimConfig {
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            log_every: self.sim.log_every,
            weight_ceiling: self.sim.weight_ceiling,
            z2_ceiling: self.sim.z2_ceiling,
            initial: JointState::new(Vector2::from(self.initial.q), Vector2::from(self.initial.qdot)),
            trajectory: TrajectorySpec {
                shape: self.trajectory.shape,
                amplitude: self.trajectory.amplitude,
                frequency: self.trajectory.frequency,
                offset: self.trajectory.offset,
            },
            plant: self.plant,
            constraint: ConstraintSpec { bounds, mode: c.mode, tc: c.tc, beta: c.beta },
            controller: self.controller,
            critic: CriticConfig {
                sigma: self.critic.sigma,
                eta: self.critic.eta,
                psi: self.critic.psi,
                q: matrix("critic.q", &self.critic.q)?,
                r: matrix("critic.r", &self.critic.r)?,
            },
            actor: ActorConfig { sigma: self.actor.sigma, eta: self.actor.eta, ka: self.actor.ka },
            network: NetworkSpec {
                neurons: self.network.neurons,
                center_min: self.network.center_min,
                center_max: self.network.center_max,
                width: self.network.width,
            },
            disturbance: self.disturbance,
        };
        Ok(Experiment { sim, verify: self.verify, sweep: self.sweep })
    }

    fn from_experiment(e: &Experiment) -> Self {
        let s = &e.sim;
        let split = |fs: &[BoundFunction; 2]| {
            (
                [fs[0].family, fs[1].family],
                [fs[0].offset, fs[1].offset],
                [fs[0].amplitude, fs[1].amplitude],
                [fs[0].omega, fs[1].omega],
            )
        };
        let (source, direct, upper, lower) = match &s.constraint.bounds {
            ErrorBounds::Direct(fs) => (BoundSource::Direct, split(fs), None, None),
            ErrorBounds::Position { upper, lower } => {
                // The direct keys are unused in this mode; keep the defaults.
                let reference = match ConstraintSpec::reference().bounds {
                    ErrorBounds::Direct(fs) => fs,
                    ErrorBounds::Position { upper, .. } => upper,
                };
                (BoundSource::Position, split(&reference), Some(split(upper)), Some(split(lower)))
            }
        };
        let constraint = ConstraintSection {
            source,
            family: direct.0,
            offset: direct.1,
            amplitude: direct.2,
            omega: direct.3,
            mode: s.constraint.mode,
            tc: s.constraint.tc,
            beta: s.constraint.beta,
            upper_family: upper.map(|u| u.0),
            upper_offset: upper.map(|u| u.1),
            upper_amplitude: upper.map(|u| u.2),
            upper_omega: upper.map(|u| u.3),
            lower_family: lower.map(|l| l.0),
            lower_offset: lower.map(|l| l.1),
            lower_amplitude: lower.map(|l| l.2),
            lower_omega: lower.map(|l| l.3),
        };
        Self {
            sim: SimSection {
                dt: s.dt,
                t_end: s.t_end,
                log_every: s.log_every,
                weight_ceiling: s.weight_ceiling,
                z2_ceiling: s.z2_ceiling,
            },
            initial: InitialSection { q: s.initial.q.into(), qdot: s.initial.qdot.into() },
            trajectory: TrajectorySection {
                shape: s.trajectory.shape,
                amplitude: s.trajectory.amplitude,
                frequency: s.trajectory.frequency,
                offset: s.trajectory.offset,
            },
            plant: s.plant,
            disturbance: s.disturbance,
            constraint,
            controller: s.controller,
            critic: CriticSection {
                sigma: s.critic.sigma,
                eta: s.critic.eta,
                psi: s.critic.psi,
                q: rows(&s.critic.q),
                r: rows(&s.critic.r),
            },
            actor: ActorSection { sigma: s.actor.sigma, eta: s.actor.eta, ka: s.actor.ka },
            network: NetworkSection {
                neurons: s.network.neurons,
                center_min: s.network.center_min,
                center_max: s.network.center_max,
                width: s.network.width,
            },
            verify: e.verify,
            sweep: e.sweep.clone(),
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| ConfigError::Parse(format!("{origin}: {}", e.to_string().trim_end())))
}

fn default_table() -> Table {
    parse_table(DEFAULT_CONFIG, "bundled default").expect("bundled default config parses")
}

/// Every `section.key` the format accepts.
pub fn schema_keys() -> BTreeSet<String> {
    let mut keys: BTreeSet<String> = OPTIONAL_KEYS.iter().map(|k| k.to_string()).collect();
    for (section, body) in default_table() {
        if let Value::Table(t) = body {
            keys.extend(t.keys().map(|k| format!("{section}.{k}")));
        }
    }
    keys
}

/// Maps a user-supplied key onto exactly one schema key.
pub fn resolve_key(key: &str) -> Result<String, ConfigError> {
    let wanted = key.trim().to_ascii_lowercase();
    let keys = schema_keys();
    if keys.contains(&wanted) {
        return Ok(wanted);
    }
    let matches: Vec<&String> = if wanted.contains('.') {
        keys.iter().filter(|k| k.eq_ignore_ascii_case(&wanted)).collect()
    } else {
        keys.iter().filter(|k| k.rsplit('.').next() == Some(wanted.as_str())).collect()
    };
    match matches.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(ConfigError::UnknownKey(key.to_string())),
        many => Err(ConfigError::AmbiguousKey {
            key: key.to_string(),
            candidates: many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
        }),
    }
}

/// Splits `key=value` and reads the value as a TOML literal, falling back to
/// a plain string so that `mode=scalar_min` works unquoted.
pub fn parse_override(text: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = text.split_once('=').ok_or_else(|| ConfigError::MalformedOverride(text.to_string()))?;
    let (key, raw) = (key.trim(), raw.trim());
    if key.is_empty() || raw.is_empty() {
        return Err(ConfigError::MalformedOverride(text.to_string()));
    }
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((resolve_key(key)?, value))
}

fn check_keys(table: &Table, origin: &str) -> Result<(), ConfigError> {
    let keys = schema_keys();
    for (section, body) in table {
        let Value::Table(t) = body else {
            return Err(ConfigError::Parse(format!("{origin}: `{section}` must be a table")));
        };
        for k in t.keys() {
            let full = format!("{section}.{k}");
            if !keys.contains(&full) {
                return Err(ConfigError::UnknownKey(full));
            }
        }
    }
    Ok(())
}

fn to_float(v: Value) -> Value {
    match v {
        Value::Integer(i) => Value::Float(i as f64),
        Value::Array(items) => Value::Array(items.into_iter().map(to_float).collect()),
        other => other,
    }
}

fn coerce_numbers(table: &mut Table) {
    for (section, body) in table.iter_mut() {
        if section == "sweep" {
            continue;
        }
        if let Value::Table(t) = body {
            for (k, v) in t.iter_mut() {
                if !INTEGER_KEYS.contains(&format!("{section}.{k}").as_str()) {
                    *v = to_float(std::mem::replace(v, Value::Boolean(false)));
                }
            }
        }
    }
}

fn set(table: &mut Table, full_key: &str, value: Value) {
    let (section, key) = full_key.split_once('.').expect("schema keys are dotted");
    let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    if let Value::Table(t) = entry {
        t.insert(key.to_string(), value);
    }
}

/// Parses an experiment from text layered over the bundled default, then
/// applies overrides and validates.
pub fn parse_experiment(text: &str, origin: &str, overrides: &[String]) -> Result<Experiment, ConfigError> {
    let user = parse_table(text, origin)?;
    check_keys(&user, origin)?;
    let mut merged = default_table();
    for (section, body) in user {
        if let Value::Table(t) = body {
            for (k, v) in t {
                set(&mut merged, &format!("{section}.{k}"), v);
            }
        }
    }
    for o in overrides {
        let (key, value) = parse_override(o)?;
        set(&mut merged, &key, value);
    }
    coerce_numbers(&mut merged);
    let file: ConfigFile =
        Value::Table(merged).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(format!("{origin}: {e}")))?;
    let exp = file.into_experiment()?;
    exp.validate()?;
    Ok(exp)
}

pub fn load_experiment(path: &Path, overrides: &[String]) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_experiment(&text, &path.display().to_string(), overrides)
}

/// Loads and validates the simulation part of an experiment file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<SimConfig, ConfigError> {
    load_experiment(path, overrides).map(|e| e.sim)
}

/// The bundled default experiment with overrides applied.
pub fn default_experiment(overrides: &[String]) -> Result<Experiment, ConfigError> {
    parse_experiment("", "bundled default", overrides)
}

/// Writes a complete experiment file; parsing it back gives the same value.
pub fn serialize(exp: &Experiment) -> String {
    toml::to_string(&ConfigFile::from_experiment(exp)).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default() -> Experiment {
        default_experiment(&[]).unwrap()
    }

    #[test]
    fn bundled_default_is_the_reference_experiment() {
        let e = default();
        assert_eq!(e.sim, SimConfig::reference());
        assert_eq!(e.sim.controller.k1, 15.0);
        assert_eq!((e.sim.actor.sigma, e.sim.critic.sigma), (50.0, 50.0));
        assert_eq!((e.sim.actor.eta, e.sim.critic.eta), (0.01, 0.5));
        assert_eq!((e.sim.network.neurons, e.sim.network.width), (10, 1.0));
        assert_eq!(e.verify.grid_points, 10_000);
    }

    #[test]
    fn roundtrip() {
        let e = default();
        assert_eq!(parse_experiment(&serialize(&e), "rt", &[]).unwrap(), e);

        let mut p = e.clone();
        p.sim.constraint.bounds = ErrorBounds::Position {
            upper: [BoundFunction::constant(1.5), BoundFunction::sine(2.5, 0.1, 0.3)],
            lower: [BoundFunction::constant(-1.5), BoundFunction::cosine(-0.5, 0.2, 0.7)],
        };
        p.sim.constraint.mode = BarrierMode::ScalarMin;
        p.sim.critic.q *= 0.3;
        p.sim.dt = 1.0 / 3.0 * 1e-3;
        p.sweep.key = "k2".into();
        let text = serialize(&p);
        assert!(text.contains("upper_offset"));
        assert_eq!(parse_experiment(&text, "rt", &[]).unwrap(), p);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let e = parse_experiment("[controller]\nk1 = 20\n", "user", &[]).unwrap();
        assert_eq!(e.sim.controller.k1, 20.0);
        assert_eq!(e.sim.controller.k2, 15.0);
    }

    #[test]
    fn overrides_resolve_keys() {
        let e =
            default_experiment(&["K2=20".into(), "sim.t_end=1.5".into(), "constraint.mode=scalar_min".into()]).unwrap();
        assert_eq!(e.sim.controller.k2, 20.0);
        assert_eq!(e.sim.t_end, 1.5);
        assert_eq!(e.sim.constraint.mode, BarrierMode::ScalarMin);
        let e = default_experiment(&["initial.q=[0.1, 0.2]".into(), "neurons=12".into()]).unwrap();
        assert_eq!(e.sim.initial.q, Vector2::new(0.1, 0.2));
        assert_eq!(e.sim.network.neurons, 12);
    }

    #[test]
    fn override_errors() {
        assert!(matches!(default_experiment(&["K2=0.4".into()]), Err(ConfigError::Invalid { .. })));
        assert!(matches!(default_experiment(&["sigma=1".into()]), Err(ConfigError::AmbiguousKey { .. })));
        assert!(matches!(default_experiment(&["mode=zero".into()]), Err(ConfigError::AmbiguousKey { .. })));
        assert!(matches!(default_experiment(&["nope=1".into()]), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(default_experiment(&["k1".into()]), Err(ConfigError::MalformedOverride(_))));
        assert!(matches!(default_experiment(&["k1=".into()]), Err(ConfigError::MalformedOverride(_))));
        assert!(matches!(default_experiment(&["k1=fast".into()]), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn validation_names_the_key() {
        let err = default_experiment(&["controller.k1=0.5".into()]).unwrap_err();
        assert!(err.to_string().contains("controller.k1"), "{err}");
        let err = default_experiment(&["actor.ka=0.03".into()]).unwrap_err();
        assert!(err.to_string().contains("actor.ka"), "{err}");
    }

    #[test]
    fn syntax_errors_report_lines() {
        let err = parse_experiment("[sim]\ndt = 0.001\nt_end = = 3\n", "bad.toml", &[]).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(msg.contains("bad.toml") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(
            matches!(parse_experiment("[sim]\nsteps = 3\n", "u", &[]), Err(ConfigError::UnknownKey(k)) if k == "sim.steps")
        );
        assert!(matches!(parse_experiment("[extra]\nx = 1\n", "u", &[]), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn position_source_requires_both_sides() {
        let text = "[constraint]\nsource = \"position\"\nupper_family = [\"constant\", \"constant\"]\n";
        let err = parse_experiment(text, "u", &[]).unwrap_err();
        assert!(err.to_string().contains("upper_offset"), "{err}");
    }

    #[test]
    fn missing_file() {
        let err = load_config(Path::new("/nonexistent/armctl.toml"), &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }

    #[test]
    fn sweep_overrides() {
        let e = default();
        assert_eq!(e.sweep.overrides()[0], "controller.k1=5.0");
        assert_eq!(e.sweep.overrides().len(), 4);
    }
}
