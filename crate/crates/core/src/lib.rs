//! Numerics for finite-dimensional Lebesgue–Feynman functionals: cylinder
//! integration, flow Jacobians and determinants, change-of-variables and
//! anomaly checks, time-sliced propagators and a split-step reference solver.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anomaly;
pub mod domain;
pub mod error;
pub mod feynman;
pub mod flows;
pub mod kernel;
pub mod lfm;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod suite;

pub use anomaly::{
    anomaly_report, anomaly_report_with, discrete_action, flagship_flow, gaussian_probe, verify_change_of_variables,
    AnomalyOptions, AnomalyReport, ChangeOfVariables, DetStats, FlagshipFlow, PathFamily, Verdict,
};
pub use domain::*;
pub use error::{LfmError, Result};
pub use feynman::{
    kernel_quadratic_chain, kernel_quadratic_exact, propagate_hamiltonian_ordered, propagate_hamiltonian_weyl,
    propagate_lagrangian, propagate_lagrangian_with_rule, HamiltonianSymbol, PotentialRule, PropagatorResult,
    SliceMethod, SymbolOrdering,
};
pub use flows::{
    flow_logdet, jacobian_trace, measure_derivative_pairing, shift_invariance_check, LogdetComparison, PairingGap,
    TraceEstimate,
};
pub use kernel::GaussianKernel;
pub use lfm::{dimension_sweep, integrate_lfm, integrate_lfm_centered, normalization_check, DimensionSweep, LfmValue};
pub use linalg::Matrix;
pub use num_complex::Complex;
pub use oracle::{compare, exact_propagator, solve_schrodinger, Comparison, PropagatorKind};
pub use scalar::Real;

pub type Complex64 = Complex<f64>;
pub type CylinderFunctional64 = CylinderFunctional<f64>;
pub type QuadratureSpec64 = QuadratureSpec<f64>;
pub type LfmValue64 = LfmValue<f64>;
pub type Matrix64 = Matrix<f64>;
pub type PropagatorResult64 = PropagatorResult<f64>;
pub type AnomalyReport64 = AnomalyReport<f64>;
pub type WaveFunction64 = WaveFunction<f64>;
