use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LfmError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::functional::default_fd_step;
use super::{Validate, Violation, VALIDATION_SEED};

pub type FieldFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;
pub type DecayBound<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

/// Vector field `k: E → E`, evaluated on truncations `ℝⁿ → ℝⁿ` for any `n`.
#[derive(Clone)]
pub struct VectorFieldSpec<T> {
    evaluator: FieldFn<T>,
    jacobian: Option<JacobianFn<T>>,
    allow_finite_differences: bool,
    fd_step: T,
    trace_class_decay: Option<DecayBound<T>>,
    validation_dim: usize,
}

impl<T: Real> fmt::Debug for VectorFieldSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldSpec")
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("fd_step", &self.fd_step)
            .field("trace_class_decay", &self.trace_class_decay.is_some())
            .finish()
    }
}

impl<T: Real> VectorFieldSpec<T> {
    pub fn new(evaluator: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(evaluator),
            jacobian: None,
            allow_finite_differences: true,
            fd_step: default_fd_step(),
            trace_class_decay: None,
            validation_dim: 4,
        }
    }

    pub fn with_jacobian(mut self, j: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// Bound on `|⟨k′(x)eⱼ, eⱼ⟩|` for `j ≥ 1`, used for truncation tails.
    pub fn with_trace_decay(mut self, bound: impl Fn(usize) -> T + Send + Sync + 'static) -> Self {
        self.trace_class_decay = Some(Arc::new(bound));
        self
    }

    pub fn with_fd_step(mut self, h: T) -> Self {
        self.fd_step = h;
        self
    }

    /// Forbid the finite-difference fallback (a field with no usable Jacobian).
    pub fn without_finite_differences(mut self) -> Self {
        self.allow_finite_differences = false;
        self
    }

    pub fn with_validation_dim(mut self, n: usize) -> Self {
        self.validation_dim = n.max(1);
        self
    }

    /// Constant field `k(x) = h` (padded with zeros past `h.len()`).
    pub fn constant(h: Vec<T>) -> Self {
        let h1 = h.clone();
        Self::new(move |x| (0..x.len()).map(|i| h1.get(i).copied().unwrap_or(T::zero())).collect())
            .with_jacobian(|x| Matrix::zeros(x.len(), x.len()))
            .with_trace_decay(|_| T::zero())
    }

    /// Diagonal linear field `k(x)ⱼ = a(j)·xⱼ`, `j` counted from 1.
    pub fn diagonal(a: impl Fn(usize) -> T + Send + Sync + 'static) -> Self {
        let a = Arc::new(a);
        let (a1, a2, a3) = (a.clone(), a.clone(), a);
        Self::new(move |x| x.iter().enumerate().map(|(i, &v)| a1(i + 1) * v).collect())
            .with_jacobian(move |x| {
                let d: Vec<T> = (1..=x.len()).map(|j| a2(j)).collect();
                Matrix::from_diagonal(&d)
            })
            .with_trace_decay(move |j| a3(j).abs())
    }

    /// Rank-one field `k(x) = ⟨v, x⟩ u`; `u(j)`, `v(j)` give components.
    pub fn rank_one(
        u: impl Fn(usize) -> T + Send + Sync + 'static,
        v: impl Fn(usize) -> T + Send + Sync + 'static,
    ) -> Self {
        let (u, v) = (Arc::new(u), Arc::new(v));
        let (u1, v1, u2, v2, u3, v3) = (u.clone(), v.clone(), u.clone(), v.clone(), u, v);
        Self::new(move |x| {
            let s: T = x.iter().enumerate().map(|(i, &xi)| v1(i + 1) * xi).sum();
            (1..=x.len()).map(|j| u1(j) * s).collect()
        })
        .with_jacobian(move |x| Matrix::from_fn(x.len(), x.len(), |i, j| u2(i + 1) * v2(j + 1)))
        .with_trace_decay(move |j| (u3(j) * v3(j)).abs())
    }

    /// Linear field `k(x) = A x` for a fixed matrix; only defined on `ℝ^{dim A}`.
    pub fn linear(a: Matrix<T>) -> Self {
        let n = a.rows();
        let (a1, a2) = (a.clone(), a);
        Self::new(move |x| a1.matvec(x)).with_jacobian(move |_| a2.clone()).with_validation_dim(n)
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        (self.evaluator)(x)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn trace_bound(&self, j: usize) -> Option<T> {
        self.trace_class_decay.as_ref().map(|b| b(j))
    }

    /// `k′(x)`: analytic when supplied, else central differences.
    pub fn jacobian(&self, x: &[T]) -> Result<Matrix<T>> {
        match (&self.jacobian, self.allow_finite_differences) {
            (Some(j), _) => Ok(j(x)),
            (None, true) => Ok(self.fd_jacobian(x)),
            (None, false) => Err(LfmError::NoJacobian),
        }
    }

    /// Diagonal of `k′(x)`; the finite-difference route costs `2n` field
    /// evaluations instead of a full Jacobian.
    pub fn jacobian_diagonal(&self, x: &[T]) -> Result<Vec<T>> {
        match (&self.jacobian, self.allow_finite_differences) {
            (Some(j), _) => Ok(j(x).diagonal()),
            (None, true) => {
                let h = self.fd_step;
                let mut probe = x.to_vec();
                Ok((0..x.len())
                    .map(|i| {
                        let orig = probe[i];
                        probe[i] = orig + h;
                        let fp = (self.evaluator)(&probe)[i];
                        probe[i] = orig - h;
                        let fm = (self.evaluator)(&probe)[i];
                        probe[i] = orig;
                        (fp - fm) / (h + h)
                    })
                    .collect())
            }
            (None, false) => Err(LfmError::NoJacobian),
        }
    }

    pub fn fd_jacobian(&self, x: &[T]) -> Matrix<T> {
        let n = x.len();
        let h = self.fd_step;
        let mut m = Matrix::zeros(n, n);
        let mut probe = x.to_vec();
        for j in 0..n {
            let orig = probe[j];
            probe[j] = orig + h;
            let fp = (self.evaluator)(&probe);
            probe[j] = orig - h;
            let fm = (self.evaluator)(&probe);
            probe[j] = orig;
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (h + h);
            }
        }
        m
    }
}

impl<T: Real> Validate for VectorFieldSpec<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.validation_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let tol = T::lit(10.0) * self.fd_step * self.fd_step;
        for _ in 0..8 {
            let x: Vec<T> = (0..n).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
            let k = self.eval(&x);
            if k.len() != n || k.iter().any(|v| !v.is_finite()) {
                out.push(Violation::new("field is not a finite n-vector on sampled inputs"));
                break;
            }
            if let Some(j) = &self.jacobian {
                let analytic = j(&x);
                let fd = self.fd_jacobian(&x);
                let bad = (0..n).any(|r| {
                    (0..n).any(|c| {
                        let a = analytic[(r, c)];
                        (a - fd[(r, c)]).abs() > tol * a.abs().max(T::one())
                    })
                });
                if bad {
                    out.push(Violation::new("analytic Jacobian disagrees with finite differences"));
                    break;
                }
            }
        }
        if self.jacobian.is_none() && !self.allow_finite_differences {
            out.push(Violation::new("no Jacobian available"));
        }
        out
    }
}
