//! Property suites that check the structural facts the controller relies on.
//!
//! Each suite reports the worst observed value against its tolerance, so a
//! failure says how far off it was and where.

use std::fmt;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, VerifySettings};
use crate::constraint::{lemma3_margin, shift};
use crate::learning::{critic_value, lambda_vector, td_error};
use crate::plant::{
    coriolis_matrix, eigen_sym2, forward_dynamics, gravity_vector, inertia_matrix, potential_energy, JointState,
    ManipulatorParams,
};
use crate::sim::{rk4_step, NetworkSpec, ACTOR_INPUTS, CRITIC_INPUTS};

/// `Λ(S_c, ∇S_c, Ż_c, ψ)`, injectable so a broken variant can be checked.
pub type LambdaFn = fn(&DVector<f64>, &DMatrix<f64>, &DVector<f64>, f64) -> DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl PropertyResult {
    fn new(name: &'static str, passed: bool, worst: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name, passed, worst, tolerance, detail: detail.into() }
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} worst={:.3e} tol={:.3e} {}", self.name, self.worst, self.tolerance, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub results: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Shifting function: endpoints, strict monotonicity, `0 ≤ γ̇ ≤ 3/T_c`, and
/// `γ̇ → 0` at `T_c` from both sides.
pub fn shift_properties(v: &VerifySettings, tc: f64) -> PropertyResult {
    let tol = v.shift_tol;
    let at = |t: f64| shift(t, tc).expect("tc validated");
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();

    let g0 = at(0.0).gamma;
    let g1 = at(tc).gamma;
    worst = worst.max(g0.abs()).max((g1 - 1.0).abs());
    if g0.abs() > tol {
        failures.push(format!("gamma(0) = {g0:e}"));
    }
    if (g1 - 1.0).abs() > tol {
        failures.push(format!("gamma(tc) = {g1}"));
    }

    let n = v.grid_points;
    let mut prev = at(0.0).gamma;
    let mut non_monotone = 0;
    for k in 1..n {
        let t = tc * k as f64 / (n - 1) as f64;
        let s = at(t);
        if !(s.gamma > prev) {
            non_monotone += 1;
        }
        prev = s.gamma;
        let excess = s.gamma_dot - 3.0 / tc;
        worst = worst.max(excess).max(-s.gamma_dot);
        if excess > tol || s.gamma_dot < -tol {
            failures.push(format!("gamma_dot({t}) = {}", s.gamma_dot));
        }
    }
    if non_monotone > 0 {
        failures.push(format!("{non_monotone} non-increasing grid steps"));
    }

    let left = at(tc * (1.0 - 1e-7)).gamma_dot;
    let right = at(tc * (1.0 + 1e-7)).gamma_dot;
    let jump = (left - right).abs().max(at(tc).gamma_dot.abs());
    worst = worst.max(jump);
    if jump > tol {
        failures.push(format!("gamma_dot jumps by {jump:e} at tc"));
    }

    failures.truncate(3);
    PropertyResult::new("shift_function", failures.is_empty(), worst, tol, failures.join("; "))
}

/// Barrier inequality `Ξ²/(β(k² − Ξ²)) ≥ (1/2β)ln(k²/(k² − Ξ²))` on
/// `|Ξ| ≤ 0.999k` for several `k` and `β`.
pub fn barrier_inequality(v: &VerifySettings) -> PropertyResult {
    let tol = v.barrier_tol;
    let n = v.grid_points;
    let mut worst = f64::INFINITY;
    let mut at = String::new();
    for k in [0.1, 0.5, 1.0, 5.0] {
        for beta in [1.0, 10.0, 100.0] {
            for i in 0..n {
                let xi = 0.999 * k * (-1.0 + 2.0 * i as f64 / (n - 1) as f64);
                let m = lemma3_margin(xi, k, beta).unwrap_or(f64::NEG_INFINITY);
                if m < worst {
                    worst = m;
                    at = format!("min margin at xi={xi:.6}, k={k}, beta={beta}");
                }
            }
        }
    }
    PropertyResult::new("barrier_inequality", worst >= -tol, worst, tol, at)
}

fn random_state(rng: &mut ChaCha8Rng) -> JointState {
    let pi = std::f64::consts::PI;
    JointState::new(
        Vector2::new(rng.random_range(-pi..pi), rng.random_range(-pi..pi)),
        Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
    )
}

/// `|zᵀ(Ṁ − 2C)z|` with `Ṁ` by central difference along `q̇`, plus
/// `μ₁ ≤ λ(M) ≤ μ₂` with `μ₁ > 0`.
pub fn skew_symmetry(v: &VerifySettings, p: &ManipulatorParams) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let (mu1, mu2) = p.inertia_bounds();
    let h = v.fd_step;
    let mut worst: f64 = 0.0;
    let mut eig_fail = 0;
    for _ in 0..v.random_samples {
        let s = random_state(&mut rng);
        let z = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let m_dot = (inertia_matrix(p, &(s.q + s.qdot * h)) - inertia_matrix(p, &(s.q - s.qdot * h))) / (2.0 * h);
        let n = m_dot - coriolis_matrix(p, &s.q, &s.qdot) * 2.0;
        worst = worst.max(z.dot(&(n * z)).abs());
        let (lo, hi) = eigen_sym2(&inertia_matrix(p, &s.q));
        let slack = 1e-12 * mu2;
        if !(lo > 0.0 && lo >= mu1 - slack && hi <= mu2 + slack) {
            eig_fail += 1;
        }
    }
    let passed = worst <= v.skew_tol && eig_fail == 0 && mu1 > 0.0;
    let detail = format!("mu1={mu1:.6e} mu2={mu2:.6e} eigen_failures={eig_fail}");
    PropertyResult::new("skew_symmetry_pd", passed, worst, v.skew_tol, detail)
}

/// Relative error of the analytic basis Jacobian against central differences
/// on the actor network, inputs drawn near the center diagonal.
pub fn rbf_gradient(v: &VerifySettings, spec: &NetworkSpec) -> PropertyResult {
    let net = match spec.build(ACTOR_INPUTS, 2) {
        Ok(n) => n,
        Err(e) => return PropertyResult::new("rbf_gradient", false, f64::NAN, v.rbf_tol, e.to_string()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed ^ 0x5bf0);
    let h = v.fd_step;
    let mut worst: f64 = 0.0;
    for _ in 0..v.rbf_samples {
        let along = rng.random_range(spec.center_min..=spec.center_max);
        let z = DVector::from_fn(net.inputs(), |_, _| along + rng.random_range(-spec.width..spec.width));
        let (_, jac) = net.basis_with_jacobian(&z);
        let mut fd = DMatrix::zeros(net.neurons(), net.inputs());
        for j in 0..net.inputs() {
            let mut plus = z.clone();
            let mut minus = z.clone();
            plus[j] += h;
            minus[j] -= h;
            fd.set_column(j, &((net.basis(&plus) - net.basis(&minus)) / (2.0 * h)));
        }
        let scale = jac.norm();
        if scale > 0.0 {
            worst = worst.max((jac - fd).norm() / scale);
        }
    }
    PropertyResult::new("rbf_gradient", worst <= v.rbf_tol, worst, v.rbf_tol, format!("{} inputs", v.rbf_samples))
}

/// Global error ratio of RK4 on `ẋ = −x` over `[0, 1]` for `dt = 0.1` and `0.05`.
pub fn rk4_order(v: &VerifySettings) -> PropertyResult {
    let solve = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        let mut x = DVector::from_element(1, 1.0);
        for n in 0..steps {
            x = rk4_step(&x, n as f64 * dt, dt, |_, y| Ok::<_, ()>(-y)).expect("infallible");
        }
        (x[0] - (-1.0f64).exp()).abs()
    };
    let ratio = solve(0.1) / solve(0.05);
    let passed = (v.rk4_ratio_min..=v.rk4_ratio_max).contains(&ratio);
    let detail = format!("accepted range [{}, {}]", v.rk4_ratio_min, v.rk4_ratio_max);
    PropertyResult::new("rk4_order", passed, ratio, v.rk4_ratio_max, detail)
}

/// `td_error(r, Ŵ_c, Λ)` against the Bellman form `r − Ĵ/ψ + Ŵ_cᵀ∇S_cŻ_c`
/// on random critic inputs.
pub fn td_consistency(v: &VerifySettings, spec: &NetworkSpec, psi: f64, lambda: LambdaFn) -> PropertyResult {
    let net = match spec.build(CRITIC_INPUTS, 1) {
        Ok(n) => n,
        Err(e) => return PropertyResult::new("td_consistency", false, f64::NAN, v.td_tol, e.to_string()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed ^ 0x7d);
    let mut worst: f64 = 0.0;
    for _ in 0..v.rbf_samples {
        let z = DVector::from_fn(CRITIC_INPUTS, |_, _| rng.random_range(-1.5..1.5));
        let z_dot = DVector::from_fn(CRITIC_INPUTS, |_, _| rng.random_range(-2.0..2.0));
        let wc = DVector::from_fn(net.neurons(), |_, _| rng.random_range(-2.0..2.0));
        let r = rng.random_range(0.0..3.0);
        let (sc, grad) = net.basis_with_jacobian(&z);
        let delta = td_error(r, &wc, &lambda(&sc, &grad, &z_dot, psi));
        let bellman = r - critic_value(&wc, &sc) / psi + wc.dot(&(&grad * &z_dot));
        worst = worst.max((delta - bellman).abs());
    }
    PropertyResult::new("td_consistency", worst <= v.td_tol, worst, v.td_tol, format!("psi={psi}"))
}

/// `‖M q̈ + C q̇ + G − τ − d‖` for `q̈` from the forward dynamics.
pub fn dynamics_residual(v: &VerifySettings, p: &ManipulatorParams) -> PropertyResult {
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed ^ 0xd1);
    let mut worst: f64 = 0.0;
    let mut singular = 0;
    for _ in 0..v.random_samples {
        let s = random_state(&mut rng);
        let tau = Vector2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let d = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        match forward_dynamics(p, &s, &tau, &d) {
            Ok(qdd) => {
                let res = inertia_matrix(p, &s.q) * qdd
                    + coriolis_matrix(p, &s.q, &s.qdot) * s.qdot
                    + gravity_vector(p, &s.q)
                    - tau
                    - d;
                worst = worst.max(res.norm());
            }
            Err(_) => singular += 1,
        }
    }
    let passed = worst <= v.dynamics_tol && singular == 0;
    PropertyResult::new("dynamics_residual", passed, worst, v.dynamics_tol, format!("singular={singular}"))
}

/// `G(q)` against the central-difference gradient of the potential energy,
/// relative to `max(‖G‖, 1)`.
pub fn gravity_gradient(v: &VerifySettings, p: &ManipulatorParams) -> PropertyResult {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed ^ 0x9);
    let h = v.fd_step;
    let mut worst: f64 = 0.0;
    for _ in 0..v.random_samples {
        let q = random_state(&mut rng).q;
        let fd = Vector2::from_fn(|i, _| {
            let e = Vector2::ith(i, h);
            (potential_energy(p, &(q + e)) - potential_energy(p, &(q - e))) / (2.0 * h)
        });
        let g = gravity_vector(p, &q);
        worst = worst.max((g - fd).norm() / g.norm().max(1.0));
    }
    PropertyResult::new("gravity_gradient", worst <= TOL, worst, TOL, "")
}

/// Runs every suite for the experiment's plant, network and constraint.
pub fn verify_all(exp: &Experiment) -> VerifyReport {
    let v = &exp.verify;
    let s = &exp.sim;
    VerifyReport {
        results: vec![
            shift_properties(v, s.constraint.tc),
            barrier_inequality(v),
            skew_symmetry(v, &s.plant),
            rbf_gradient(v, &s.network),
            rk4_order(v),
            td_consistency(v, &s.network, s.critic.psi, lambda_vector),
            dynamics_residual(v, &s.plant),
            gravity_gradient(v, &s.plant),
        ],
    }
}
