use std::fmt;
use std::sync::Arc;

use crate::scalar::Real;

use super::{SpatialGrid, Validate, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    /// Polynomial of degree at most two.
    Quadratic,
    Smooth,
    /// Continuous with kinks or jumps in a derivative.
    Rough,
}

/// Real time `i∂ₜφ = Hφ` or imaginary time `∂ₜφ = −Hφ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    RealTime,
    ImaginaryTime,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::RealTime => "real_time",
            Mode::ImaginaryTime => "imaginary_time",
        }
    }
}

/// Potential `V(q)` on the real line.
#[derive(Clone)]
pub struct PotentialSpec<T> {
    evaluator: Arc<dyn Fn(T) -> T + Send + Sync>,
    smoothness: Smoothness,
    /// `b` when `V(q) = ½·b·q²` exactly.
    harmonic_coefficient: Option<T>,
}

impl<T: Real> fmt::Debug for PotentialSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("smoothness", &self.smoothness)
            .field("harmonic_coefficient", &self.harmonic_coefficient)
            .finish()
    }
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(smoothness: Smoothness, v: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self { evaluator: Arc::new(v), smoothness, harmonic_coefficient: None }
    }

    pub fn free() -> Self {
        Self::harmonic_with_coefficient(T::zero())
    }

    /// `½ω²q²`.
    pub fn harmonic(omega: T) -> Self {
        Self::harmonic_with_coefficient(omega * omega)
    }

    fn harmonic_with_coefficient(b: T) -> Self {
        Self {
            evaluator: Arc::new(move |q| b * q * q * T::lit(0.5)),
            smoothness: Smoothness::Quadratic,
            harmonic_coefficient: Some(b),
        }
    }

    pub fn eval(&self, q: T) -> T {
        (self.evaluator)(q)
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn harmonic_coefficient(&self) -> Option<T> {
        self.harmonic_coefficient
    }

    pub fn max_abs_on(&self, grid: &SpatialGrid<T>) -> T {
        grid.points().into_iter().fold(T::zero(), |m, q| m.max(self.eval(q).abs()))
    }
}

impl<T: Real> Validate for PotentialSpec<T> {
    fn validate(&self) -> Vec<Violation> {
        let grid = SpatialGrid::standard();
        if grid.points().into_iter().all(|q| self.eval(q).is_finite()) {
            Vec::new()
        } else {
            vec![Violation::new("potential is not finite on the spatial grid")]
        }
    }
}
