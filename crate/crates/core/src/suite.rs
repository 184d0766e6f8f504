//! Shipped fields, test functionals and flows used by the experiments and
//! the acceptance checks.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{CylinderFunctional, Decay, FlowSpec, VectorFieldSpec};
use crate::flows::nystrom_matrix;
use crate::linalg::Matrix;
use crate::scalar::Real;

fn pow2<T: Real>(j: usize) -> T {
    T::lit(0.5).powi(j as i32)
}

/// Trace-class vector fields, each defined on every truncation.
pub fn trace_class_fields<T: Real>() -> Vec<(&'static str, VectorFieldSpec<T>)> {
    let sine_diag =
        VectorFieldSpec::new(|x: &[T]| x.iter().enumerate().map(|(i, &v)| pow2::<T>(i + 1) * v.sin()).collect())
            .with_jacobian(|x: &[T]| {
                let d: Vec<T> = x.iter().enumerate().map(|(i, &v)| pow2::<T>(i + 1) * v.cos()).collect();
                Matrix::from_diagonal(&d)
            })
            .with_trace_decay(pow2::<T>);
    let third = |j: usize| T::lit(1.0 / 3.0).powi(j as i32);
    let coupled = VectorFieldSpec::new(move |x: &[T]| {
        let n = x.len();
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { x[i + 1].sin() } else { T::zero() };
                third(i + 1) * x[i] + pow2::<T>(i + 1) * next
            })
            .collect()
    })
    .with_jacobian(move |x: &[T]| {
        let n = x.len();
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                third(i + 1)
            } else if j == i + 1 {
                pow2::<T>(i + 1) * x[j].cos()
            } else {
                T::zero()
            }
        })
    })
    .with_trace_decay(third);
    let h: Vec<T> = (1..=8).map(|j| pow2::<T>(j) * if j % 2 == 1 { T::one() } else { -T::one() }).collect();
    vec![
        ("diagonal-geometric", VectorFieldSpec::diagonal(pow2::<T>)),
        (
            "diagonal-alternating",
            VectorFieldSpec::diagonal(|j| {
                let s = if j % 2 == 0 { T::one() } else { -T::one() };
                s / T::from_usize_lossy(j * j)
            }),
        ),
        ("rank-one", VectorFieldSpec::rank_one(pow2::<T>, |j| T::one() / T::from_usize_lossy(j))),
        ("constant", VectorFieldSpec::constant(h)),
        ("sine-diagonal", sine_diag),
        ("coupled-sine", coupled),
    ]
}

/// Test functionals with Gaussian tails.
pub fn test_functionals<T: Real>() -> Vec<(&'static str, CylinderFunctional<T>)> {
    let half = T::lit(0.5);
    let cosine = CylinderFunctional::new(1, Decay::gaussian(T::one(), half), move |x: &[T]| {
        Complex::new(x[0].cos() * (-x[0] * x[0] * half).exp(), T::zero())
    })
    .with_gradient(move |x: &[T]| {
        let g = (-x[0] * x[0] * half).exp();
        vec![Complex::new(-(x[0].sin() + x[0] * x[0].cos()) * g, T::zero())]
    });
    let phase = CylinderFunctional::new(1, Decay::gaussian(T::one(), half), move |x: &[T]| {
        Complex::from_polar((-x[0] * x[0] * half).exp(), x[0] * half)
    });
    vec![
        ("gaussian", CylinderFunctional::gaussian()),
        (
            "quadratic-gaussian",
            CylinderFunctional::polynomial_gaussian(2, |x: &[T]| T::one() + x[0] * x[0] - x[0] * x[1]),
        ),
        (
            "cubic-gaussian",
            CylinderFunctional::polynomial_gaussian(3, |x: &[T]| {
                T::one() + x[0] * x[1] * x[2] + x[0] * x[0] * x[0] / T::lit(3.0)
            }),
        ),
        ("cosine-gaussian", cosine),
        ("phase-gaussian", phase),
    ]
}

/// Seeded matrix with standard normal entries times `scale`.
pub fn seeded_matrix<T: Real>(n: usize, scale: T, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, n, |_, _| T::lit(Distribution::<f64>::sample(&StandardNormal, &mut rng)) * scale)
}

/// `count` seeded points in `dim` dimensions with entries drawn from N(0, scale²).
pub fn seeded_points<T: Real>(dim: usize, count: usize, scale: T, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| T::lit(Distribution::<f64>::sample(&StandardNormal, &mut rng)) * scale).collect())
        .collect()
}

/// Flows whose Jacobian determinant is compared by two routes, with the
/// dimension each acts on.
pub fn determinant_flows<T: Real>(seed: u64) -> Vec<(&'static str, FlowSpec<T>)> {
    let shear = VectorFieldSpec::new(|x: &[T]| {
        let mut out = vec![T::zero(); x.len()];
        out[0] = T::lit(0.5) * x[0].sin() + x[1].tanh();
        out[1] = T::lit(0.2) * x[1].cos();
        out[2] = T::lit(0.3) * x[0].sin() + T::lit(0.25) * x[2];
        out
    });
    vec![
        ("exp-linear-2", FlowSpec::linear(seeded_matrix(2, T::lit(0.5), seed))),
        ("exp-linear-4", FlowSpec::linear(seeded_matrix(4, T::lit(0.4), seed + 1))),
        ("exp-linear-8", FlowSpec::linear(seeded_matrix(8, T::lit(0.3), seed + 2))),
        ("affine-6", FlowSpec::affine(seeded_matrix(6, T::lit(0.1), seed + 3))),
        ("shear-3", FlowSpec::along_field(shear, 3)),
        ("fredholm-gaussian-40", fredholm_flow(40)),
    ]
}

/// `F(t, x) = (I + tK)x` for the Nyström matrix of the kernel
/// `exp(−(s − σ)²)` on `(0, 1)` with `m` nodes.
pub fn fredholm_flow<T: Real>(m: usize) -> FlowSpec<T> {
    FlowSpec::affine(fredholm_matrix(m))
}

pub fn fredholm_matrix<T: Real>(m: usize) -> Matrix<T> {
    nystrom_matrix(|s: T, u: T| (-(s - u) * (s - u)).exp(), m, T::zero(), T::one())
}

/// `F(t, (x₁, x₂)) = (x₁ + t·tanh x₂, x₂)`.
pub fn shear_flow<T: Real>() -> FlowSpec<T> {
    let field = VectorFieldSpec::new(|x: &[T]| vec![x[1].tanh(), T::zero()]).with_jacobian(|x: &[T]| {
        let c = x[1].cosh();
        Matrix::from_rows(&[vec![T::zero(), T::one() / (c * c)], vec![T::zero(), T::zero()]])
    });
    FlowSpec::along_field(field, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Validate;

    #[test]
    fn shipped_items_validate() {
        for (name, k) in trace_class_fields::<f64>() {
            assert!(k.validate().is_empty(), "{name}: {:?}", k.validate());
        }
        for (name, f) in test_functionals::<f64>() {
            assert!(f.validate().is_empty(), "{name}: {:?}", f.validate());
        }
        for (name, f) in determinant_flows::<f64>(3) {
            assert!(f.validate().is_empty(), "{name}: {:?}", f.validate());
        }
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let x = [0.3, -0.7, 1.1, 0.2];
        for (name, k) in trace_class_fields::<f64>() {
            let a = k.jacobian(&x).unwrap();
            let d = k.fd_jacobian(&x);
            assert!(a.sub(&d).max_abs() < 1e-8, "{name}");
        }
    }
}
