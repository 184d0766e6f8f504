use num_complex::Complex;

use crate::error::{LfmError, Result};
use crate::scalar::{real, Real};

use super::{Validate, Violation};

/// Uniform 1-D grid `x_j = x_min + j·h`, `h = (x_max − x_min)/n_points`,
/// `j = 0..n_points`. The right endpoint is excluded so the same grid serves
/// as a periodic cell for spectral methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialGrid<T> {
    pub x_min: T,
    pub x_max: T,
    pub n_points: usize,
}

impl<T: Real> SpatialGrid<T> {
    pub fn new(x_min: T, x_max: T, n_points: usize) -> Result<Self> {
        if !(x_max > x_min) || n_points < 8 {
            return Err(LfmError::InvalidInput(format!(
                "spatial grid needs x_max > x_min and at least 8 points (got [{x_min}, {x_max}], {n_points})"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    /// `[−12, 12]` with 1024 points.
    pub fn standard() -> Self {
        Self { x_min: T::lit(-12.0), x_max: T::lit(12.0), n_points: 1024 }
    }

    pub fn spacing(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize_lossy(self.n_points)
    }

    pub fn length(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn point(&self, j: usize) -> T {
        self.x_min + T::from_usize_lossy(j) * self.spacing()
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n_points).map(|j| self.point(j)).collect()
    }

    /// Index of the grid point nearest to `x` (clamped).
    pub fn nearest_index(&self, x: T) -> usize {
        let j = ((x - self.x_min) / self.spacing()).round();
        j.max(T::zero()).min(T::from_usize_lossy(self.n_points - 1)).to_usize().unwrap_or(0)
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.n_points;
        let dk = T::lit(2.0) * T::PI() / self.length();
        (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                T::lit(m) * dk
            })
            .collect()
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= T::epsilon() * T::lit(16.0) * self.length()
            && (self.x_max - other.x_max).abs() <= T::epsilon() * T::lit(16.0) * self.length()
    }
}

/// Complex samples of a wave function on a [`SpatialGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction<T> {
    pub grid: SpatialGrid<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> WaveFunction<T> {
    pub fn new(grid: SpatialGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(LfmError::GridMismatch(format!("{} values for a {}-point grid", values.len(), grid.n_points)));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values }
    }

    /// Normalised packet `(πσ²)^{-1/4} exp(−(x−c)²/(2σ²) + i p x)`.
    pub fn gaussian_packet(grid: SpatialGrid<T>, center: T, width: T, momentum: T) -> Self {
        let norm = (T::PI() * width * width).powf(T::lit(-0.25));
        Self::from_fn(grid, |x| {
            let d = (x - center) / width;
            Complex::from_polar(norm * (-(d * d) * T::lit(0.5)).exp(), momentum * x)
        })
    }

    /// Grid delta at the node nearest `x0`: `1/h` there, zero elsewhere.
    /// Propagating it yields the kernel column `K(·, x0)`.
    pub fn discrete_delta(grid: SpatialGrid<T>, x0: T) -> Self {
        let j0 = grid.nearest_index(x0);
        let mut values = vec![Complex::new(T::zero(), T::zero()); grid.n_points];
        values[j0] = real(T::one() / grid.spacing());
        Self { grid, values }
    }

    pub fn zeros(grid: SpatialGrid<T>) -> Self {
        Self { grid, values: vec![Complex::new(T::zero(), T::zero()); grid.n_points] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(Σ|φ|² h)^{1/2}`: the trapezoid rule on the periodic cell.
    pub fn norm_l2(&self) -> T {
        let h = self.grid.spacing();
        (self.values.iter().map(|z| z.norm_sqr()).sum::<T>() * h).sqrt()
    }

    /// `⟨self, other⟩ = Σ conj(self)·other·h`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        self.check_grid(other)?;
        let h = self.grid.spacing();
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex<T>>() * h)
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(LfmError::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| v * s).collect() }
    }

    /// Six-point Lagrange interpolation; zero outside the grid.
    pub fn interpolate(&self, x: T) -> Complex<T> {
        let h = self.grid.spacing();
        let s = (x - self.grid.x_min) / h;
        let n = self.grid.n_points as isize;
        let base = s.floor().to_isize().unwrap_or(isize::MIN / 2);
        if base < -1 || base > n {
            return Complex::new(T::zero(), T::zero());
        }
        let frac = s - T::lit(base as f64);
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in -2isize..=3 {
            let idx = base + k;
            if idx < 0 || idx >= n {
                continue;
            }
            let mut w = T::one();
            for m in -2isize..=3 {
                if m != k {
                    w = w * (frac - T::lit(m as f64)) / T::lit((k - m) as f64);
                }
            }
            acc += self.values[idx as usize] * w;
        }
        acc
    }

    /// `|φ|²`-weighted mean of `x`.
    pub fn mean_position(&self) -> T {
        let pts = self.grid.points();
        let w: T = self.values.iter().map(|z| z.norm_sqr()).sum();
        self.values.iter().zip(&pts).map(|(z, &x)| z.norm_sqr() * x).sum::<T>() / w
    }

    /// `|φ|²`-weighted variance of `x`.
    pub fn position_variance(&self) -> T {
        let pts = self.grid.points();
        let w: T = self.values.iter().map(|z| z.norm_sqr()).sum();
        let m = self.mean_position();
        self.values.iter().zip(&pts).map(|(z, &x)| z.norm_sqr() * (x - m) * (x - m)).sum::<T>() / w
    }

    /// Fraction of `‖φ‖²` within `fraction·length` of either grid edge.
    pub fn edge_mass(&self, fraction: T) -> T {
        let pts = self.grid.points();
        let band = fraction * self.grid.length();
        let total: T = self.values.iter().map(|z| z.norm_sqr()).sum();
        let edge: T = self
            .values
            .iter()
            .zip(&pts)
            .filter(|(_, &x)| x < self.grid.x_min + band || x > self.grid.x_max - band)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        if total > T::zero() {
            edge / total
        } else {
            T::zero()
        }
    }
}

impl<T: Real> Validate for WaveFunction<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.values.len() != self.grid.n_points {
            out.push(Violation::new("value count differs from grid size"));
        }
        if !self.norm_l2().is_finite() {
            out.push(Violation::new("L2 norm is not finite"));
        }
        out
    }
}
