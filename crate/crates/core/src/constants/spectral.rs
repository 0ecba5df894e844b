//! Power iteration for the top eigenvalue of a symmetric PSD operator.

use serde::{Deserialize, Serialize};

use crate::rng;
use crate::scalar::{dot, Scalar};

/// A symmetric operator available only through products `out = M v`.
pub trait SymmetricOperator<F: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[F], out: &mut [F]);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    /// Stop once `|λ_{t+1} − λ_t| ≤ tol · λ_{t+1}`.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random unit start vector.
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

impl PowerIteration {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate<F> {
    pub value: F,
    pub iterations: usize,
    pub converged: bool,
}

impl<F: Scalar> NormEstimate<F> {
    fn exact(value: F) -> Self {
        Self {
            value,
            iterations: 0,
            converged: true,
        }
    }

    pub fn scaled(self, factor: F) -> Self {
        Self {
            value: self.value * factor,
            ..self
        }
    }
}

/// Spectral norm of a symmetric PSD operator by power iteration with a
/// Rayleigh-quotient estimate. When `max_iter` is exhausted the last estimate
/// is returned with `converged = false`.
pub fn operator_norm<F: Scalar, O: SymmetricOperator<F> + ?Sized>(op: &O, cfg: &PowerIteration) -> NormEstimate<F> {
    let dim = op.dim();
    if dim == 0 {
        return NormEstimate::exact(F::zero());
    }
    let mut v: Vec<F> = rng::unit_vector(dim, cfg.seed).into_iter().map(F::of).collect();
    let mut w = vec![F::zero(); dim];
    let tol = F::of(cfg.tol);
    let mut lambda = F::zero();

    for it in 1..=cfg.max_iter.max(1) {
        op.apply(&v, &mut w);
        let next = dot(&v, &w);
        let norm = dot(&w, &w).sqrt();
        if norm == F::zero() {
            return NormEstimate {
                value: F::zero(),
                iterations: it,
                converged: true,
            };
        }
        if it > 1 && (next - lambda).abs() <= tol * next.abs() {
            return NormEstimate {
                value: next,
                iterations: it,
                converged: true,
            };
        }
        lambda = next;
        for (vi, &wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    NormEstimate {
        value: lambda,
        iterations: cfg.max_iter.max(1),
        converged: false,
    }
}

/// Dense symmetric matrix in row-major order; used for small operators and tests.
pub struct DenseSymmetric<F> {
    dim: usize,
    data: Vec<F>,
}

impl<F: Scalar> DenseSymmetric<F> {
    pub fn new(dim: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), dim * dim, "dense operator must be dim × dim");
        Self { dim, data }
    }
}

impl<F: Scalar> SymmetricOperator<F> for DenseSymmetric<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[F], out: &mut [F]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks(self.dim)) {
            *o = dot(row, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_examples() {
        let cfg = PowerIteration::default().with_tol(1e-12);
        let diag = DenseSymmetric::new(3, vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let est = operator_norm(&diag, &cfg);
        assert!(est.converged);
        assert_relative_eq!(est.value, 3.0, max_relative = 1e-9);

        let zero = DenseSymmetric::new(2, vec![0.0f64; 4]);
        assert_eq!(operator_norm(&zero, &cfg).value, 0.0);

        let pair = DenseSymmetric::new(2, vec![2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(operator_norm(&pair, &cfg).value, 3.0, max_relative = 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        // nearly degenerate top pair converges slowly
        let op = DenseSymmetric::new(2, vec![1.0, 0.0, 0.0, 0.999_999]);
        let est = operator_norm(&op, &PowerIteration::default().with_tol(1e-16).with_max_iter(3));
        assert!(!est.converged);
        assert_eq!(est.iterations, 3);
        assert!(est.value <= 1.0 + 1e-12);
    }

    #[test]
    fn never_exceeds_norm() {
        let data = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0];
        let exact = nalgebra::DMatrix::from_row_slice(3, 3, &data)
            .symmetric_eigenvalues()
            .max();
        let op = DenseSymmetric::new(3, data);
        for seed in 0..20 {
            let est = operator_norm(&op, &PowerIteration::default().with_seed(seed));
            assert!(est.value <= exact * (1.0 + 1e-12));
            assert_relative_eq!(est.value, exact, max_relative = 1e-5);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let op = DenseSymmetric::new(2, vec![2.0f32, 1.0, 1.0, 2.0]);
        let est = operator_norm(&op, &PowerIteration::default().with_tol(1e-5));
        assert!((est.value - 3.0).abs() < 1e-4);
    }
}
