//! Domain types shared by every algorithmic module: time grids and paths,
//! cylinder functionals, vector fields, flows, quadrature settings and wave
//! functions. Nothing here integrates or propagates; constructors check
//! shapes and [`Validate`] reports the numerical invariants.

mod field;
mod flow;
mod functional;
mod grid;
mod potential;
mod quadspec;
mod wave;

use std::fmt;

pub use field::VectorFieldSpec;
pub use flow::FlowSpec;
pub use functional::{CylinderFunctional, Decay, DecayClass, Tail, TailFn};
pub use grid::{BasisKind, DiscretePath, FiniteSubspace, PhaseNorm, PhasePath, TimeGrid};
pub use potential::{Mode, PotentialSpec, Smoothness};
pub use quadspec::{QuadratureSpec, Scheme, DEFAULT_EPSILON_SCHEDULE, DEFAULT_NODE_BUDGET};
pub use wave::{SpatialGrid, WaveFunction};

/// One violated invariant, as a short human-readable message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation(pub String);

impl Violation {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.0.contains(needle)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Checks the numerical invariants of a constructed object. An empty list
/// means every invariant holds at the type's configured tolerance.
pub trait Validate {
    fn validate(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Seed for the spot-check samples drawn by `validate` implementations.
pub(crate) const VALIDATION_SEED: u64 = 0x005e_ed1f;
