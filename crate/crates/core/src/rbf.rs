//! Gaussian radial-basis-function networks.

use nalgebra::{DMatrix, DVector};

use crate::error::ConfigError;

/// Single hidden layer of Gaussian bumps with a linear read-out `Ŵᵀ S(Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    /// `k × p`, one center per row.
    pub centers: DMatrix<f64>,
    pub width: f64,
    /// `k × m`.
    pub weights: DMatrix<f64>,
}

impl RbfNetwork {
    pub fn new(centers: DMatrix<f64>, width: f64, outputs: usize) -> Result<Self, ConfigError> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(ConfigError::invalid("network.neurons", "need at least one neuron and one input"));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(ConfigError::invalid("network.width", "must be strictly positive"));
        }
        let k = centers.nrows();
        Ok(Self { centers, width, weights: DMatrix::zeros(k, outputs) })
    }

    /// `neurons` centers spaced evenly along the diagonal of `[lo, hi]^inputs`;
    /// every coordinate of center `t` equals the `t`-th lattice value.
    pub fn diagonal_lattice(
        neurons: usize,
        inputs: usize,
        outputs: usize,
        lo: f64,
        hi: f64,
        width: f64,
    ) -> Result<Self, ConfigError> {
        if neurons == 0 {
            return Err(ConfigError::invalid("network.neurons", "must be at least 1"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ConfigError::invalid("network.center_min", "center range must satisfy min <= max"));
        }
        let value = |t: usize| {
            if neurons == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * t as f64 / (neurons - 1) as f64
            }
        };
        let centers = DMatrix::from_fn(neurons, inputs, |t, _| value(t));
        Self::new(centers, width, outputs)
    }

    pub fn neurons(&self) -> usize {
        self.centers.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.centers.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn offsets(&self, z: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(z.len(), self.inputs());
        DMatrix::from_fn(self.neurons(), self.inputs(), |t, j| z[j] - self.centers[(t, j)])
    }

    /// Activations `S_t(Z) = exp(−‖Z − μ_t‖² / η²)`.
    pub fn basis(&self, z: &DVector<f64>) -> DVector<f64> {
        let w2 = self.width * self.width;
        let off = self.offsets(z);
        DVector::from_fn(self.neurons(), |t, _| (-off.row(t).norm_squared() / w2).exp())
    }

    /// `∂S/∂Z`, row `t` equal to `−(2/η²)·S_t·(Z − μ_t)ᵀ`.
    pub fn basis_jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        self.basis_with_jacobian(z).1
    }

    /// Activations and Jacobian in one pass.
    pub fn basis_with_jacobian(&self, z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let w2 = self.width * self.width;
        let mut jac = self.offsets(z);
        let mut s = DVector::zeros(self.neurons());
        for (t, mut row) in jac.row_iter_mut().enumerate() {
            s[t] = (-row.norm_squared() / w2).exp();
            row *= -2.0 * s[t] / w2;
        }
        (s, jac)
    }

    /// `Ŵᵀ S(Z)`.
    pub fn output(&self, z: &DVector<f64>) -> DVector<f64> {
        self.output_from_basis(&self.basis(z))
    }

    pub fn output_from_basis(&self, s: &DVector<f64>) -> DVector<f64> {
        self.weights.tr_mul(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(k: usize, p: usize, m: usize) -> RbfNetwork {
        RbfNetwork::diagonal_lattice(k, p, m, -5.0, 5.0, 1.0).unwrap()
    }

    #[test]
    fn lattice_layout() {
        let n = net(10, 8, 2);
        assert_eq!(n.centers.shape(), (10, 8));
        assert_eq!(n.weights, DMatrix::zeros(10, 2));
        assert_eq!(n.centers[(0, 3)], -5.0);
        assert_eq!(n.centers[(9, 7)], 5.0);
        assert_relative_eq!(n.centers[(1, 0)], -5.0 + 10.0 / 9.0, epsilon = 1e-15);
        let single = RbfNetwork::diagonal_lattice(1, 3, 1, -5.0, 5.0, 1.0).unwrap();
        assert_eq!(single.centers[(0, 0)], 0.0);
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(RbfNetwork::diagonal_lattice(0, 2, 1, -1.0, 1.0, 1.0).is_err());
        assert!(RbfNetwork::diagonal_lattice(3, 2, 1, -1.0, 1.0, 0.0).is_err());
        assert!(RbfNetwork::diagonal_lattice(3, 2, 1, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn basis_peak_and_width() {
        let n = net(10, 4, 1);
        let at_center = DVector::from_element(4, n.centers[(3, 0)]);
        assert_eq!(n.basis(&at_center)[3], 1.0);
        // Unit offset along one axis from center 3 sits exactly one width away.
        let mut z = at_center.clone();
        z[2] += 1.0;
        assert_relative_eq!(n.basis(&z)[3], (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(n.basis(&z)[3], 0.367879, epsilon = 1e-6);
        let far = DVector::from_element(4, 1e3);
        assert!(n.basis(&far).iter().all(|&s| (0.0..1e-100).contains(&s)));
    }

    #[test]
    fn jacobian_zero_at_peak() {
        let n = net(10, 4, 1);
        let z = DVector::from_element(4, n.centers[(6, 0)]);
        assert!(n.basis_jacobian(&z).row(6).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let n = net(10, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let t = rng.random_range(0..10);
            let z = DVector::from_fn(8, |j, _| n.centers[(t, j)] + rng.random_range(-0.8..0.8));
            let jac = n.basis_jacobian(&z);
            let h = 1e-6;
            let fd = DMatrix::from_fn(10, 8, |r, c| {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[c] += h;
                zm[c] -= h;
                (n.basis(&zp)[r] - n.basis(&zm)[r]) / (2.0 * h)
            });
            assert!((&jac - &fd).norm() / jac.norm() <= 1e-5);
            let (s, j2) = n.basis_with_jacobian(&z);
            assert_eq!(s, n.basis(&z));
            assert_eq!(j2, jac);
        }
    }

    #[test]
    fn jacobian_width_scaling() {
        // Same normalised offset (Z−μ)/η: doubling η² scales the gradient by 1/√2.
        let narrow = RbfNetwork::new(DMatrix::zeros(1, 2), 1.0, 1).unwrap();
        let wide = RbfNetwork::new(DMatrix::zeros(1, 2), 2f64.sqrt(), 1).unwrap();
        let u = DVector::from_vec(vec![0.3, -0.4]);
        let g_narrow = narrow.basis_jacobian(&u).norm();
        let g_wide = wide.basis_jacobian(&(&u * 2f64.sqrt())).norm();
        assert_relative_eq!(g_wide / g_narrow, 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        // Fixed offset: the factor 2/η² halves and the Gaussian changes.
        let g_fixed = wide.basis_jacobian(&u).norm();
        let expected = g_narrow * 0.5 * ((-0.25f64 / 2.0).exp() / (-0.25f64).exp());
        assert_relative_eq!(g_fixed, expected, epsilon = 1e-14);
    }

    #[test]
    fn output_evaluation() {
        let mut n = net(3, 2, 2);
        let z = DVector::from_vec(vec![0.1, -0.2]);
        assert_eq!(n.output(&z), DVector::zeros(2));

        let mut single = RbfNetwork::new(DMatrix::from_row_slice(1, 2, &[0.5, 0.5]), 1.0, 1).unwrap();
        single.weights[(0, 0)] = 2.5;
        assert_eq!(single.output(&DVector::from_vec(vec![0.5, 0.5]))[0], 2.5);

        n.weights = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.25, 3.0, 0.0]);
        let s = n.basis(&z);
        let out = n.output(&z);
        for j in 0..2 {
            let dot: f64 = (0..3).map(|t| n.weights[(t, j)] * s[t]).sum();
            assert_relative_eq!(out[j], dot, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn basis_bounded(z in proptest::collection::vec(-8.0f64..8.0, 4)) {
            let n = net(10, 4, 1);
            let s = n.basis(&DVector::from_vec(z));
            prop_assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(s.norm_squared() <= 10.0);
        }

        #[test]
        fn output_linear_in_weights(
            w1 in proptest::collection::vec(-3.0f64..3.0, 20),
            w2 in proptest::collection::vec(-3.0f64..3.0, 20),
            z in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let mut a = net(10, 3, 2);
            let mut b = a.clone();
            let mut sum = a.clone();
            a.weights = DMatrix::from_vec(10, 2, w1);
            b.weights = DMatrix::from_vec(10, 2, w2);
            sum.weights = &a.weights + &b.weights;
            let z = DVector::from_vec(z);
            let lhs = sum.output(&z);
            let rhs = a.output(&z) + b.output(&z);
            prop_assert!((lhs - rhs).amax() <= 1e-12);
        }
    }
}
