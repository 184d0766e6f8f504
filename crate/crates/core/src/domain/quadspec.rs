use crate::error::{LfmError, Result};
use crate::scalar::Real;

use super::{Validate, Violation};

/// Tensor-node budget used when `LFMKIT_NODE_BUDGET` is unset.
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

pub const DEFAULT_EPSILON_SCHEDULE: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    TensorGaussHermite,
    GaussianImportanceMc,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::TensorGaussHermite => "tensor_gauss_hermite",
            Scheme::GaussianImportanceMc => "gaussian_importance_mc",
        }
    }
}

/// Everything that controls one evaluation of the finite-dimensional
/// functional.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSpec<T> {
    pub scheme: Scheme,
    pub nodes_per_dim: usize,
    pub sample_count: usize,
    pub rng_seed: u64,
    /// Weight of the `exp(−ε|x|²)` regulariser for oscillatory integrands.
    pub damping_epsilon: T,
    /// Decreasing damping values extrapolated to `ε → 0`.
    pub epsilon_schedule: Option<Vec<T>>,
    pub node_budget: usize,
    /// Switch to Monte Carlo instead of failing when the budget is exceeded.
    pub mc_fallback: bool,
    /// Width of the reference Gaussian the nodes (or samples) are drawn for.
    pub node_scale: T,
    /// Also integrate with a coarser rule to estimate the error.
    pub estimate_error: bool,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self::tensor(20)
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn tensor(nodes_per_dim: usize) -> Self {
        Self {
            scheme: Scheme::TensorGaussHermite,
            nodes_per_dim,
            sample_count: 100_000,
            rng_seed: 0,
            damping_epsilon: T::zero(),
            epsilon_schedule: None,
            node_budget: env_node_budget(),
            mc_fallback: true,
            node_scale: T::one(),
            estimate_error: true,
        }
    }

    pub fn monte_carlo(sample_count: usize, seed: u64) -> Self {
        Self { scheme: Scheme::GaussianImportanceMc, sample_count, rng_seed: seed, ..Self::tensor(20) }
    }

    pub fn with_damping(mut self, epsilon: T) -> Self {
        self.damping_epsilon = epsilon;
        self
    }

    pub fn with_epsilon_schedule(mut self, schedule: Vec<T>) -> Self {
        self.epsilon_schedule = Some(schedule);
        self
    }

    pub fn with_default_schedule(self) -> Self {
        let s = DEFAULT_EPSILON_SCHEDULE.iter().map(|&e| T::lit(e)).collect();
        self.with_epsilon_schedule(s)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn with_mc_fallback(mut self, on: bool) -> Self {
        self.mc_fallback = on;
        self
    }

    pub fn with_node_scale(mut self, scale: T) -> Self {
        self.node_scale = scale;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    pub fn without_error_estimate(mut self) -> Self {
        self.estimate_error = false;
        self
    }

    /// Node count of the tensor rule on `dim` coordinates, as a float so that
    /// huge products do not overflow.
    pub fn tensor_node_count(&self, dim: usize) -> f64 {
        (self.nodes_per_dim as f64).powi(dim as i32)
    }

    pub fn check_budget(&self, dim: usize) -> Result<()> {
        let required = self.tensor_node_count(dim);
        if required > self.node_budget as f64 {
            Err(LfmError::BudgetExceeded { required, budget: self.node_budget })
        } else {
            Ok(())
        }
    }
}

/// `LFMKIT_NODE_BUDGET` if set and parseable, else [`DEFAULT_NODE_BUDGET`].
pub fn env_node_budget() -> usize {
    std::env::var("LFMKIT_NODE_BUDGET")
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| *v >= 1.0)
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_NODE_BUDGET)
}

impl<T: Real> Validate for QuadratureSpec<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.nodes_per_dim == 0 {
            out.push(Violation::new("nodes_per_dim must be positive"));
        }
        if self.scheme == Scheme::GaussianImportanceMc && self.sample_count < 2 {
            out.push(Violation::new("sample_count must be at least 2"));
        }
        if !(self.damping_epsilon >= T::zero()) {
            out.push(Violation::new("damping_epsilon must be non-negative"));
        }
        if !(self.node_scale > T::zero()) {
            out.push(Violation::new("node_scale must be positive"));
        }
        if let Some(s) = &self.epsilon_schedule {
            if s.is_empty() || s.iter().any(|&e| !(e > T::zero())) || s.windows(2).any(|w| w[1] >= w[0]) {
                out.push(Violation::new("epsilon_schedule must be positive and strictly decreasing"));
            }
        }
        out
    }
}
