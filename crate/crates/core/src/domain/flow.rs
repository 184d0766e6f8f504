use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;
use crate::scalar::Real;

use super::field::VectorFieldSpec;
use super::functional::default_fd_step;
use super::{Validate, Violation, VALIDATION_SEED};

pub type MapFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>;
pub type MatFn<T> = Arc<dyn Fn(T, &[T]) -> Matrix<T> + Send + Sync>;

/// One-parameter family of diffeomorphisms `F(t, ·)` of `ℝⁿ` with
/// `F(0, x) = x`, its inverse and the partial derivatives the transformation
/// law needs.
#[derive(Clone)]
pub struct FlowSpec<T> {
    dim: usize,
    forward: MapFn<T>,
    inverse: MapFn<T>,
    space_jacobian: MatFn<T>,
    time_derivative: Option<MapFn<T>>,
    mixed_jacobian: Option<MatFn<T>>,
    t_max: T,
}

impl<T: Real> fmt::Debug for FlowSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowSpec")
            .field("dim", &self.dim)
            .field("analytic_time_derivative", &self.time_derivative.is_some())
            .field("analytic_mixed_jacobian", &self.mixed_jacobian.is_some())
            .field("t_max", &self.t_max)
            .finish()
    }
}

impl<T: Real> FlowSpec<T> {
    pub fn new(
        dim: usize,
        forward: impl Fn(T, &[T]) -> Vec<T> + Send + Sync + 'static,
        inverse: impl Fn(T, &[T]) -> Vec<T> + Send + Sync + 'static,
        space_jacobian: impl Fn(T, &[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            space_jacobian: Arc::new(space_jacobian),
            time_derivative: None,
            mixed_jacobian: None,
            t_max: T::one(),
        }
    }

    /// `∂ₜF(t, x)`.
    pub fn with_time_derivative(mut self, f: impl Fn(T, &[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.time_derivative = Some(Arc::new(f));
        self
    }

    /// `∂ₜ∂ₓF(t, x)`.
    pub fn with_mixed_jacobian(mut self, f: impl Fn(T, &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.mixed_jacobian = Some(Arc::new(f));
        self
    }

    /// Upper end of the time range sampled by `validate`.
    pub fn with_t_max(mut self, t_max: T) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, |_, x| x.to_vec(), |_, x| x.to_vec(), move |_, x| Matrix::identity(x.len()))
            .with_time_derivative(|_, x| vec![T::zero(); x.len()])
            .with_mixed_jacobian(|_, x| Matrix::zeros(x.len(), x.len()))
    }

    /// `F(t, x) = x + t·h`.
    pub fn translation(h: Vec<T>) -> Self {
        let dim = h.len();
        let (h1, h2, h3) = (h.clone(), h.clone(), h);
        Self::new(
            dim,
            move |t, x| x.iter().zip(&h1).map(|(&a, &b)| a + t * b).collect(),
            move |t, x| x.iter().zip(&h2).map(|(&a, &b)| a - t * b).collect(),
            |_, x| Matrix::identity(x.len()),
        )
        .with_time_derivative(move |_, _| h3.clone())
        .with_mixed_jacobian(|_, x| Matrix::zeros(x.len(), x.len()))
    }

    /// `F(t, x) = e^{tA} x`.
    pub fn linear(a: Matrix<T>) -> Self {
        let dim = a.rows();
        let (a1, a2, a3, a4, a5) = (a.clone(), a.clone(), a.clone(), a.clone(), a);
        Self::new(
            dim,
            move |t, x| a1.scale(t).expm().matvec(x),
            move |t, x| a2.scale(-t).expm().matvec(x),
            move |t, _| a3.scale(t).expm(),
        )
        .with_time_derivative(move |t, x| a4.matmul(&a4.scale(t).expm()).matvec(x))
        .with_mixed_jacobian(move |t, _| a5.matmul(&a5.scale(t).expm()))
    }

    /// `F(t, x) = e^{t} x`.
    pub fn scaling(dim: usize) -> Self {
        Self::new(
            dim,
            |t, x| x.iter().map(|&v| v * t.exp()).collect(),
            |t, x| x.iter().map(|&v| v * (-t).exp()).collect(),
            |t, x| Matrix::identity(x.len()).scale(t.exp()),
        )
        .with_time_derivative(|t, x| x.iter().map(|&v| v * t.exp()).collect())
        .with_mixed_jacobian(|t, x| Matrix::identity(x.len()).scale(t.exp()))
    }

    /// `F(t, x) = (I + tM) x`.
    pub fn affine(m: Matrix<T>) -> Self {
        let dim = m.rows();
        let (m1, m2, m3, m4, m5) = (m.clone(), m.clone(), m.clone(), m.clone(), m);
        let shifted = move |mm: &Matrix<T>, t: T| Matrix::identity(mm.rows()).add(&mm.scale(t));
        Self::new(
            dim,
            move |t, x| shifted(&m1, t).matvec(x),
            move |t, x| match shifted(&m2, t).lu() {
                Ok(lu) => lu.solve(x),
                Err(_) => vec![T::nan(); x.len()],
            },
            move |t, _| shifted(&m3, t),
        )
        .with_time_derivative(move |_, x| m4.matvec(x))
        .with_mixed_jacobian(move |_, _| m5.clone())
    }

    /// `F(t, x) = x + t·k(x)`; the inverse is found by Newton iteration.
    pub fn along_field(k: VectorFieldSpec<T>, dim: usize) -> Self {
        let (k1, k2, k3, k4, k5) = (k.clone(), k.clone(), k.clone(), k.clone(), k);
        Self::new(
            dim,
            move |t, x| x.iter().zip(k1.eval(x)).map(|(&a, b)| a + t * b).collect(),
            move |t, y| newton_inverse(&k2, t, y),
            move |t, x| {
                let j = k3.jacobian(x).unwrap_or_else(|_| k3.fd_jacobian(x));
                Matrix::identity(x.len()).add(&j.scale(t))
            },
        )
        .with_time_derivative(move |_, x| k4.eval(x))
        .with_mixed_jacobian(move |_, x| k5.jacobian(x).unwrap_or_else(|_| k5.fd_jacobian(x)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn forward(&self, t: T, x: &[T]) -> Vec<T> {
        (self.forward)(t, x)
    }

    pub fn inverse(&self, t: T, x: &[T]) -> Vec<T> {
        (self.inverse)(t, x)
    }

    /// `F₂′(t, x) = ∂ₓF(t, x)`.
    pub fn space_jacobian(&self, t: T, x: &[T]) -> Matrix<T> {
        (self.space_jacobian)(t, x)
    }

    /// `F₁′(t, x)`, analytic or by central differences in `t`.
    pub fn time_derivative(&self, t: T, x: &[T]) -> Vec<T> {
        match &self.time_derivative {
            Some(f) => f(t, x),
            None => {
                let h = default_fd_step::<T>() * (T::one() + t.abs());
                let fp = self.forward(t + h, x);
                let fm = self.forward(t - h, x);
                fp.iter().zip(&fm).map(|(&a, &b)| (a - b) / (h + h)).collect()
            }
        }
    }

    /// `F₁₂″(t, x) = ∂ₜ F₂′(t, x)`, analytic or by central differences in `t`.
    pub fn mixed_jacobian(&self, t: T, x: &[T]) -> Matrix<T> {
        match &self.mixed_jacobian {
            Some(f) => f(t, x),
            None => {
                let h = default_fd_step::<T>() * (T::one() + t.abs());
                let jp = self.space_jacobian(t + h, x);
                let jm = self.space_jacobian(t - h, x);
                jp.sub(&jm).scale(T::one() / (h + h))
            }
        }
    }

    pub fn fd_space_jacobian(&self, t: T, x: &[T]) -> Matrix<T> {
        let n = x.len();
        let h = default_fd_step::<T>();
        let mut m = Matrix::zeros(n, n);
        let mut probe = x.to_vec();
        for j in 0..n {
            let orig = probe[j];
            probe[j] = orig + h;
            let fp = self.forward(t, &probe);
            probe[j] = orig - h;
            let fm = self.forward(t, &probe);
            probe[j] = orig;
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (h + h);
            }
        }
        m
    }
}

fn newton_inverse<T: Real>(k: &VectorFieldSpec<T>, t: T, y: &[T]) -> Vec<T> {
    let mut x: Vec<T> = y.iter().zip(k.eval(y)).map(|(&a, b)| a - t * b).collect();
    let scale = T::one() + y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for _ in 0..60 {
        let r: Vec<T> = x.iter().zip(k.eval(&x)).zip(y).map(|((&xi, ki), &yi)| xi + t * ki - yi).collect();
        let rmax = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if rmax <= T::lit(4.0) * T::epsilon() * scale {
            break;
        }
        let jac = k.jacobian(&x).unwrap_or_else(|_| k.fd_jacobian(&x));
        let j = Matrix::identity(x.len()).add(&jac.scale(t));
        match j.lu() {
            Ok(lu) => {
                let dx = lu.solve(&r);
                x.iter_mut().zip(dx).for_each(|(xi, d)| *xi -= d);
            }
            Err(_) => return vec![T::nan(); x.len()],
        }
    }
    x
}

impl<T: Real> Validate for FlowSpec<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let samples: Vec<Vec<T>> =
            (0..6).map(|_| (0..n).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect()).collect();
        let times = [T::lit(0.25), T::lit(0.5), T::one()].map(|s| s * self.t_max);
        let max_dev = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()));

        if samples.iter().any(|x| max_dev(&self.forward(T::zero(), x), x) > T::lit(1e-12)) {
            out.push(Violation::new("F(0, x) differs from x"));
        }
        let inv_tol = T::lit(1e-9).max(T::epsilon().sqrt());
        let inverse_bad = samples.iter().any(|x| {
            times.iter().any(|&t| {
                let back = self.forward(t, &self.inverse(t, x));
                !(max_dev(&back, x) <= inv_tol * (T::one() + x.iter().fold(T::zero(), |m, v| m.max(v.abs()))))
            })
        });
        if inverse_bad {
            out.push(Violation::new("inverse mismatch: F(t, F^-1(t, x)) differs from x"));
        }
        let jac_tol = T::lit(1e-6).max(T::epsilon().cbrt() * T::lit(10.0));
        let jac_bad = samples.iter().any(|x| {
            times.iter().any(|&t| {
                let a = self.space_jacobian(t, x);
                let fd = self.fd_space_jacobian(t, x);
                a.rows() != n || !((a.sub(&fd).max_abs()) <= jac_tol * (T::one() + a.max_abs()))
            })
        });
        if jac_bad {
            out.push(Violation::new("space Jacobian disagrees with finite differences of F"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_flow_is_valid() {
        assert!(FlowSpec::<f64>::identity(3).validate().is_empty());
    }

    #[test]
    fn inconsistent_inverse_is_reported() {
        let f = FlowSpec::<f64>::new(
            2,
            |t, x| x.iter().map(|v| v + t).collect(),
            |_, x| x.to_vec(),
            |_, x| Matrix::identity(x.len()),
        );
        let v = f.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].mentions("inverse mismatch"));
    }

    #[test]
    fn shipped_flows_validate() {
        let a = Matrix::from_rows(&[vec![0.1, 0.4], vec![-0.3, 0.2]]);
        let k = VectorFieldSpec::new(|x: &[f64]| vec![0.5 * x[1].sin(), 0.3 * x[0].tanh()]);
        let flows = vec![
            FlowSpec::translation(vec![1.0, -0.5]),
            FlowSpec::linear(a.clone()),
            FlowSpec::affine(a),
            FlowSpec::scaling(2),
            FlowSpec::along_field(k, 2).with_t_max(0.5),
        ];
        for f in &flows {
            assert!(f.validate().is_empty(), "{f:?}: {:?}", f.validate());
        }
    }

    #[test]
    fn fd_mixed_jacobian_matches_analytic() {
        let a = Matrix::from_rows(&[vec![0.1, 0.4], vec![-0.3, 0.2]]);
        let analytic = FlowSpec::linear(a.clone());
        let bare = FlowSpec::new(
            2,
            {
                let a = a.clone();
                move |t, x: &[f64]| a.scale(t).expm().matvec(x)
            },
            {
                let a = a.clone();
                move |t, x: &[f64]| a.scale(-t).expm().matvec(x)
            },
            move |t, _| a.scale(t).expm(),
        );
        let x = [0.3, -0.2];
        let d = analytic.mixed_jacobian(0.7, &x).sub(&bare.mixed_jacobian(0.7, &x)).max_abs();
        assert!(d < 1e-9, "{d}");
        let v = analytic.time_derivative(0.7, &x);
        let w = bare.time_derivative(0.7, &x);
        assert!((v[0] - w[0]).abs() < 1e-9 && (v[1] - w[1]).abs() < 1e-9);
    }
}
