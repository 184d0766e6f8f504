//! Kernels of the form `K(q, q′) = exp(c + α q² + β q q′ + γ q′²)` with
//! complex coefficients: free and harmonic propagators in both time modes.

use num_complex::Complex;
use rayon::prelude::*;

use crate::domain::WaveFunction;
use crate::error::{LfmError, Result};
use crate::scalar::{compensated_sum_complex, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel<T> {
    pub log_prefactor: Complex<T>,
    pub alpha: Complex<T>,
    pub beta: Complex<T>,
    pub gamma: Complex<T>,
}

/// Largest phase change of the kernel between neighbouring grid points that
/// dense quadrature accepts (half the Nyquist limit).
pub const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_2;

impl<T: Real> GaussianKernel<T> {
    pub fn eval(&self, q: T, qp: T) -> Complex<T> {
        (self.log_prefactor + self.alpha * (q * q) + self.beta * (q * qp) + self.gamma * (qp * qp)).exp()
    }

    /// `∫ self(q, s)·first(s, q′) ds`: the kernel of `first` followed by
    /// `self`. Fails when the `s`-integral has a vanishing quadratic form.
    pub fn after(&self, first: &Self) -> Result<Self> {
        let a = -(self.gamma + first.alpha);
        let scale = self.gamma.norm().max(first.alpha.norm()).max(T::one());
        if a.norm() <= T::lit(1e-12) * scale {
            return Err(LfmError::DegenerateSlice { slice: 0 });
        }
        if a.re < -T::lit(1e-12) * scale {
            return Err(LfmError::NonIntegrable("composed kernel grows in the intermediate variable".into()));
        }
        // ∫ exp(−a s² + b s) ds = (π/a)^{1/2} exp(b²/4a), b = β₂q + β₁q′
        let inv4a = (a * T::lit(4.0)).inv();
        let pi = Complex::new(T::PI(), T::zero());
        Ok(Self {
            log_prefactor: self.log_prefactor + first.log_prefactor + (pi / a).ln() * T::lit(0.5),
            alpha: self.alpha + self.beta * self.beta * inv4a,
            beta: self.beta * first.beta * inv4a * T::lit(2.0),
            gamma: first.gamma + first.beta * first.beta * inv4a,
        })
    }

    /// Largest `|∂_{q′} arg K|·h` over the grid rows and the support of `phi`.
    pub fn phase_step(&self, phi: &WaveFunction<T>) -> T {
        let grid = phi.grid;
        let h = grid.spacing();
        let peak = phi.values.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        let cutoff = peak * T::lit(1e-13);
        let support: Vec<T> =
            phi.values.iter().enumerate().filter(|(_, v)| v.norm() > cutoff).map(|(j, _)| grid.point(j)).collect();
        if support.is_empty() {
            return T::zero();
        }
        let (lo, hi) = (support[0], support[support.len() - 1]);
        let (b, g2) = (self.beta.im, self.gamma.im * T::lit(2.0));
        let mut worst = T::zero();
        for q in [grid.x_min, grid.x_max] {
            for s in [lo, hi] {
                worst = worst.max((b * q + g2 * s).abs());
            }
        }
        worst * h
    }

    /// `Σⱼ K(qᵢ, qⱼ) φ(qⱼ) h` on the grid of `phi`.
    pub fn apply(&self, phi: &WaveFunction<T>) -> Result<WaveFunction<T>> {
        let step = self.phase_step(phi);
        if step > T::lit(MAX_PHASE_STEP) {
            return Err(LfmError::UnresolvedKernel { phase_step: step.to_f64_lossy() });
        }
        let grid = phi.grid;
        let h = grid.spacing();
        let pts = grid.points();
        let values = pts
            .par_iter()
            .map(|&q| compensated_sum_complex(pts.iter().zip(&phi.values).map(|(&s, &v)| self.eval(q, s) * v)) * h)
            .collect();
        WaveFunction::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpatialGrid;

    fn heat(t: f64) -> GaussianKernel<f64> {
        let c = |v: f64| Complex::new(v, 0.0);
        GaussianKernel {
            log_prefactor: c(-0.5 * (2.0 * std::f64::consts::PI * t).ln()),
            alpha: c(-0.5 / t),
            beta: c(1.0 / t),
            gamma: c(-0.5 / t),
        }
    }

    #[test]
    fn heat_kernels_compose() {
        let k = heat(0.7).after(&heat(0.4)).unwrap();
        let direct = heat(1.1);
        for (q, qp) in [(0.0, 0.0), (1.0, -0.5), (2.0, 0.3)] {
            assert!((k.eval(q, qp) - direct.eval(q, qp)).norm() < 1e-14);
        }
    }

    #[test]
    fn apply_preserves_mass_of_heat_kernel() {
        let g = SpatialGrid::<f64>::standard();
        let phi = WaveFunction::from_fn(g, |x| Complex::new((-x * x).exp(), 0.0));
        let out = heat(0.5).apply(&phi).unwrap();
        let mass = |w: &WaveFunction<f64>| w.values.iter().map(|v| v.re).sum::<f64>();
        assert!((mass(&out) - mass(&phi)).abs() < 1e-12 * mass(&phi));
    }

    #[test]
    fn steep_phase_is_rejected() {
        let g = SpatialGrid::<f64>::standard();
        let phi = WaveFunction::gaussian_packet(g, 0.0, 1.0, 0.0);
        let t = 0.01;
        let k = GaussianKernel {
            log_prefactor: Complex::new(0.0, 0.0),
            alpha: Complex::new(0.0, 0.5 / t),
            beta: Complex::new(0.0, -1.0 / t),
            gamma: Complex::new(0.0, 0.5 / t),
        };
        assert!(matches!(k.apply(&phi), Err(LfmError::UnresolvedKernel { .. })));
    }
}
