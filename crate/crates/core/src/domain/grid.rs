use crate::error::{LfmError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

use super::{Validate, Violation};

/// Uniform slicing of `[0, t_final]` into `n_slices` intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    t_final: T,
    n_slices: usize,
    delta: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_final: T, n_slices: usize) -> Result<Self> {
        if !(t_final > T::zero()) || !t_final.is_finite() {
            return Err(LfmError::InvalidInput(format!("t_final must be positive, got {t_final}")));
        }
        if n_slices == 0 {
            return Err(LfmError::InvalidInput("n_slices must be at least 1".into()));
        }
        Ok(Self { t_final, n_slices, delta: t_final / T::from_usize_lossy(n_slices) })
    }

    pub fn t_final(&self) -> T {
        self.t_final
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// Time of node `j` (`0 ..= n_slices`).
    pub fn node_time(&self, j: usize) -> T {
        T::from_usize_lossy(j) * self.delta
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self::new(self.t_final, self.n_slices * factor).expect("refinement of a valid grid")
    }
}

impl<T: Real> Validate for TimeGrid<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = T::from_usize_lossy(self.n_slices);
        let tol = T::lit(4.0) * T::epsilon() * self.t_final;
        if (self.delta * n - self.t_final).abs() > tol {
            out.push(Violation::new("delta * n_slices differs from t_final"));
        }
        if (self.node_time(self.n_slices) - self.t_final).abs() > tol {
            out.push(Violation::new("last node does not sit at t_final"));
        }
        out
    }
}

/// Time-sliced path pinned to zero at `t = 0`; `values` holds nodes
/// `1 ..= n_slices`, each a `dim_q`-vector stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath<T> {
    grid: TimeGrid<T>,
    dim_q: usize,
    values: Vec<T>,
}

impl<T: Real> DiscretePath<T> {
    pub fn new(grid: TimeGrid<T>, dim_q: usize, values: Vec<T>) -> Result<Self> {
        if dim_q == 0 || values.len() != grid.n_slices() * dim_q {
            return Err(LfmError::DimensionMismatch(format!(
                "path needs {} x {} values, got {}",
                grid.n_slices(),
                dim_q,
                values.len()
            )));
        }
        Ok(Self { grid, dim_q, values })
    }

    /// One-dimensional path sampled from a function of time.
    pub fn from_fn(grid: TimeGrid<T>, f: impl Fn(T) -> T) -> Self {
        let values = (1..=grid.n_slices()).map(|j| f(grid.node_time(j))).collect();
        Self { grid, dim_q: 1, values }
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn dim_q(&self) -> usize {
        self.dim_q
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Value at node `j` (node 0 is the pinned origin).
    pub fn node(&self, j: usize) -> Vec<T> {
        if j == 0 {
            vec![T::zero(); self.dim_q]
        } else {
            self.values[(j - 1) * self.dim_q..j * self.dim_q].to_vec()
        }
    }

    /// Discrete `‖ξ̇‖²_{L²} = Σ |ξⱼ − ξⱼ₋₁|² / Δ`.
    pub fn sobolev_norm_sq(&self) -> T {
        self.increment_coordinates().iter().map(|&x| x * x).sum()
    }

    /// Coordinates in the orthonormal increment basis: `(ξⱼ − ξⱼ₋₁)/√Δ`.
    pub fn increment_coordinates(&self) -> Vec<T> {
        let d = self.dim_q;
        let inv_sqrt = T::one() / self.grid.delta().sqrt();
        (0..self.values.len())
            .map(|i| {
                let prev = if i < d { T::zero() } else { self.values[i - d] };
                (self.values[i] - prev) * inv_sqrt
            })
            .collect()
    }

    /// Inverse of [`Self::increment_coordinates`].
    pub fn from_increment_coordinates(grid: TimeGrid<T>, dim_q: usize, coords: &[T]) -> Result<Self> {
        let sqrt_delta = grid.delta().sqrt();
        let mut values = Vec::with_capacity(coords.len());
        for (i, &x) in coords.iter().enumerate() {
            let prev = if i < dim_q { T::zero() } else { values[i - dim_q] };
            values.push(prev + x * sqrt_delta);
        }
        Self::new(grid, dim_q, values)
    }

    /// Piecewise-linear refinement onto a grid with twice as many slices.
    pub fn refine(&self) -> Self {
        let grid = self.grid.refined(2);
        let d = self.dim_q;
        let mut values = Vec::with_capacity(self.values.len() * 2);
        let half = T::lit(0.5);
        for j in 1..=self.grid.n_slices() {
            let prev = self.node(j - 1);
            let cur = self.node(j);
            values.extend(prev.iter().zip(&cur).map(|(&a, &b)| half * (a + b)));
            values.extend_from_slice(&cur);
        }
        debug_assert_eq!(values.len(), grid.n_slices() * d);
        Self { grid, dim_q: d, values }
    }
}

impl<T: Real> Validate for DiscretePath<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = self.grid.validate();
        if self.values.len() != self.grid.n_slices() * self.dim_q {
            out.push(Violation::new("path length differs from n_slices"));
        }
        let norm = self.sobolev_norm_sq();
        if !norm.is_finite() || norm < T::zero() {
            out.push(Violation::new("Sobolev norm is not finite"));
        }
        out
    }
}

/// Which discrete norm a phase-space path reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseNorm {
    /// `Σ|Δq|²/Δ + Σ|p|²Δ`, the displayed `‖q̇‖² + ‖p‖²`.
    VelocityQ,
    /// `Σ|q|²Δ + Σ|p|²Δ`, the `L²` reading of the `q` component.
    L2Q,
}

/// Phase-space path: `q` at slice midpoints, `p` at nodes `1 ..= n_slices`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePath<T> {
    grid: TimeGrid<T>,
    q_values: Vec<T>,
    p_values: Vec<T>,
}

impl<T: Real> PhasePath<T> {
    pub fn new(grid: TimeGrid<T>, q_values: Vec<T>, p_values: Vec<T>) -> Result<Self> {
        let n = grid.n_slices();
        if q_values.len() != n || p_values.len() != n {
            return Err(LfmError::DimensionMismatch(format!(
                "phase path needs {n} q and {n} p values, got {} and {}",
                q_values.len(),
                p_values.len()
            )));
        }
        Ok(Self { grid, q_values, p_values })
    }

    pub fn q_values(&self) -> &[T] {
        &self.q_values
    }

    pub fn p_values(&self) -> &[T] {
        &self.p_values
    }

    pub fn norm_sq(&self, which: PhaseNorm) -> T {
        let dt = self.grid.delta();
        let p_part: T = self.p_values.iter().map(|&p| p * p * dt).sum();
        let q_part: T = match which {
            PhaseNorm::VelocityQ => self.q_values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0]) / dt).sum(),
            PhaseNorm::L2Q => self.q_values.iter().map(|&q| q * q * dt).sum(),
        };
        q_part + p_part
    }
}

impl<T: Real> Validate for PhasePath<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = self.grid.validate();
        for which in [PhaseNorm::VelocityQ, PhaseNorm::L2Q] {
            let v = self.norm_sq(which);
            if !v.is_finite() || v < T::zero() {
                out.push(Violation::new(format!("{which:?} norm is not finite")));
            }
        }
        out
    }
}

/// Orthonormal family spanning `E_n`.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisKind<T> {
    /// Abstract coordinate basis of `ℝⁿ`.
    Coordinate,
    /// Increment functions on a time grid: `ėⱼ = Δ^{-1/2}` on slice `j`, zero
    /// elsewhere. Orthonormal for `‖f‖ = ‖ḟ‖_{L²}`.
    PathIncrements(TimeGrid<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSubspace<T> {
    dim: usize,
    basis: BasisKind<T>,
}

impl<T: Real> FiniteSubspace<T> {
    pub fn coordinate(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LfmError::InvalidInput("subspace dimension must be at least 1".into()));
        }
        Ok(Self { dim, basis: BasisKind::Coordinate })
    }

    /// Span of the first `dim` increment functions of `grid`.
    pub fn path_increments(grid: TimeGrid<T>, dim: usize) -> Result<Self> {
        if dim == 0 || dim > grid.n_slices() {
            return Err(LfmError::InvalidInput(format!(
                "path subspace dimension {dim} outside 1..={}",
                grid.n_slices()
            )));
        }
        Ok(Self { dim, basis: BasisKind::PathIncrements(grid) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &BasisKind<T> {
        &self.basis
    }

    /// Gram matrix of the basis, computed from the basis vectors themselves.
    pub fn gram(&self) -> Matrix<T> {
        match &self.basis {
            BasisKind::Coordinate => Matrix::from_fn(self.dim, self.dim, |i, j| {
                let ei = unit::<T>(self.dim, i);
                let ej = unit::<T>(self.dim, j);
                ei.iter().zip(&ej).map(|(&a, &b)| a * b).sum()
            }),
            BasisKind::PathIncrements(grid) => {
                let paths: Vec<DiscretePath<T>> = (0..self.dim).map(|j| increment_basis_path(*grid, j)).collect();
                Matrix::from_fn(self.dim, self.dim, |i, j| sobolev_inner(&paths[i], &paths[j]))
            }
        }
    }
}

impl<T: Real> Validate for FiniteSubspace<T> {
    fn validate(&self) -> Vec<Violation> {
        let gram = self.gram();
        let err = gram.sub(&Matrix::identity(self.dim)).max_abs();
        if err > T::lit(1e-12) {
            vec![Violation::new(format!("Gram matrix deviates from identity by {err}"))]
        } else {
            Vec::new()
        }
    }
}

fn unit<T: Real>(n: usize, i: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[i] = T::one();
    v
}

/// Node values of the `j`-th (0-based) increment basis function.
pub(crate) fn increment_basis_path<T: Real>(grid: TimeGrid<T>, j: usize) -> DiscretePath<T> {
    let s = grid.delta().sqrt();
    let values = (1..=grid.n_slices()).map(|node| if node > j { s } else { T::zero() }).collect();
    DiscretePath::new(grid, 1, values).expect("shape matches grid")
}

fn sobolev_inner<T: Real>(a: &DiscretePath<T>, b: &DiscretePath<T>) -> T {
    let dt = a.grid().delta();
    (1..=a.grid().n_slices())
        .map(|j| {
            let da = a.node(j)[0] - a.node(j - 1)[0];
            let db = b.node(j)[0] - b.node(j - 1)[0];
            da * db / dt
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_example_is_valid() {
        let g = TimeGrid::new(1.0_f64, 4).unwrap();
        assert_eq!(g.delta(), 0.25);
        assert!(g.validate().is_empty());
        assert_eq!(g.node_time(2), 0.5);
    }

    #[test]
    fn time_grid_rejects_bad_input() {
        assert!(TimeGrid::new(0.0_f64, 4).is_err());
        assert!(TimeGrid::new(1.0_f64, 0).is_err());
    }

    #[test]
    fn increment_coordinates_roundtrip_and_norm() {
        let g = TimeGrid::new(2.0_f64, 8).unwrap();
        let p = DiscretePath::from_fn(g, |t| (t * 1.3).sin());
        let x = p.increment_coordinates();
        let back = DiscretePath::from_increment_coordinates(g, 1, &x).unwrap();
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let norm_direct: f64 = (1..=8).map(|j| (p.node(j)[0] - p.node(j - 1)[0]).powi(2) / g.delta()).sum();
        assert!((p.sobolev_norm_sq() - norm_direct).abs() < 1e-13);
    }

    #[test]
    fn path_increment_basis_is_orthonormal() {
        let g = TimeGrid::new(1.5_f64, 12).unwrap();
        let s = FiniteSubspace::path_increments(g, 12).unwrap();
        assert!(s.validate().is_empty());
        assert!(FiniteSubspace::<f64>::coordinate(5).unwrap().validate().is_empty());
    }

    #[test]
    fn phase_path_reports_both_norms() {
        let g = TimeGrid::new(1.0_f64, 2).unwrap();
        let pp = PhasePath::new(g, vec![1.0, 2.0], vec![0.5, -0.5]).unwrap();
        assert!((pp.norm_sq(PhaseNorm::VelocityQ) - (2.0 + 0.25)).abs() < 1e-15);
        assert!((pp.norm_sq(PhaseNorm::L2Q) - (2.5 + 0.25)).abs() < 1e-15);
        assert!(pp.validate().is_empty());
    }
}
