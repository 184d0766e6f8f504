//! Derivatives of the functional along vector fields and the determinant
//! transformation law, on finite truncations.

use num_complex::Complex;
use rayon::prelude::*;

use crate::domain::{CylinderFunctional, Decay, DecayClass, FlowSpec, QuadratureSpec, VectorFieldSpec};
use crate::error::{LfmError, Result};
use crate::lfm::{integrate_lfm, integrate_lfm_centered};
use crate::linalg::Matrix;
use crate::quadrature::GaussLegendre;
use crate::scalar::{compensated_sum, Real};

/// Pivot ratio below which a Jacobian counts as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Truncated trace `Σ_{j≤n} ⟨k′(x)eⱼ, eⱼ⟩` and an estimate of what the
/// remaining terms contribute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEstimate<T> {
    pub value: T,
    pub tail_estimate: T,
}

pub fn jacobian_trace<T: Real>(k: &VectorFieldSpec<T>, x: &[T], n: usize) -> Result<TraceEstimate<T>> {
    if x.len() != n || n == 0 {
        return Err(LfmError::DimensionMismatch(format!("x has {} entries, n = {n}", x.len())));
    }
    let diag = k.jacobian_diagonal(x)?;
    let value = compensated_sum(diag.iter().copied());
    let tail_estimate = if k.trace_bound(1).is_some() { decay_tail(k, n) } else { diag[n - 1].abs() };
    Ok(TraceEstimate { value, tail_estimate })
}

fn decay_tail<T: Real>(k: &VectorFieldSpec<T>, n: usize) -> T {
    let mut sum = T::zero();
    let mut quiet = 0;
    for j in (n + 1)..(n + 100_000) {
        let b = k.trace_bound(j).unwrap_or(T::zero()).abs();
        sum += b;
        if b <= T::epsilon() * sum.max(T::min_positive_value()) {
            quiet += 1;
            if quiet >= 8 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    sum
}

/// Central-difference slope of `t ↦ log det(I + t·k′(x))` at zero: the
/// first-order link between the determinant and the trace.
pub fn logdet_slope<T: Real>(k: &VectorFieldSpec<T>, x: &[T], h: T) -> Result<T> {
    let j = k.jacobian(x)?;
    let id = Matrix::identity(x.len());
    let plus = id.add(&j.scale(h)).det();
    let minus = id.sub(&j.scale(h)).det();
    if !(plus > T::zero() && minus > T::zero()) {
        return Err(LfmError::SingularJacobian { tau: h.to_f64_lossy() });
    }
    Ok((plus.ln() - minus.ln()) / (h + h))
}

/// Both sides of the derivative identity `−(ν, φ′k) = (ν, tr(k′)·φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairingGap<T> {
    pub lhs: Complex<T>,
    pub rhs: Complex<T>,
    pub gap: T,
    /// Larger of the two quadrature error estimates.
    pub quadrature_error: T,
}

impl<T: Real> PairingGap<T> {
    /// `gap < max(floor, 10·quadrature_error)`.
    pub fn holds(&self, floor: T) -> bool {
        self.gap < floor.max(T::lit(10.0) * self.quadrature_error)
    }
}

pub fn measure_derivative_pairing<T: Real>(
    k: &VectorFieldSpec<T>,
    phi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
) -> Result<PairingGap<T>> {
    if n < phi.dim() {
        return Err(LfmError::DimensionMismatch(format!("φ reads {} coordinates, n = {n}", phi.dim())));
    }
    let decay = integrand_decay(phi.decay());
    // Reject fields without any usable Jacobian before integrating.
    k.jacobian_diagonal(&vec![T::zero(); n])?;
    let base = phi.lifted(n);
    let (b1, k1) = (base.clone(), k.clone());
    let directional = CylinderFunctional::new(n, decay, move |x: &[T]| {
        let g = b1.gradient(x);
        let kx = k1.eval(x);
        g.iter().zip(&kx).fold(Complex::new(T::zero(), T::zero()), |acc, (&gi, &ki)| acc + gi * ki)
    });
    let (b2, k2) = (base, k.clone());
    let weighted = CylinderFunctional::new(n, decay, move |x: &[T]| {
        let tr = k2.jacobian_diagonal(x).map(|d| compensated_sum(d)).unwrap_or(T::nan());
        b2.eval(x) * tr
    });
    let l = integrate_lfm(&directional, n, quad)?;
    let r = integrate_lfm(&weighted, n, quad)?;
    let lhs = -l.value;
    Ok(PairingGap {
        lhs,
        rhs: r.value,
        gap: (lhs - r.value).norm(),
        quadrature_error: l.quadrature_error_estimate.max(r.quadrature_error_estimate),
    })
}

fn integrand_decay<T: Real>(d: Decay<T>) -> Decay<T> {
    match d.class {
        DecayClass::OscillatoryDamped => d,
        _ => Decay::polynomial_gaussian(d.rate),
    }
}

/// Determinant of `F₂′(t, x)` by two independent routes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogdetComparison<T> {
    /// `exp ∫₀ᵗ tr(F₁₂″(τ,x)·F₂′(τ,x)⁻¹) dτ`.
    pub via_trace: T,
    /// LU determinant of the truncated Jacobian.
    pub via_direct: T,
    /// `|via_trace − via_direct| / |via_direct|`.
    pub gap: T,
    /// The integrated trace itself.
    pub log_via_trace: T,
}

pub const DEFAULT_ODE_STEPS: usize = 64;

pub fn flow_logdet<T: Real>(
    flow: &FlowSpec<T>,
    t: T,
    x: &[T],
    n: usize,
    ode_steps: usize,
) -> Result<LogdetComparison<T>> {
    if x.len() != n || flow.dim() != n {
        return Err(LfmError::DimensionMismatch(format!(
            "flow acts on ℝ^{}, x has {} entries, n = {n}",
            flow.dim(),
            x.len()
        )));
    }
    if ode_steps < 8 {
        return Err(LfmError::InvalidInput(format!("ode_steps must be at least 8 (got {ode_steps})")));
    }
    let rate = |tau: T| -> Result<T> {
        let j = flow.space_jacobian(tau, x);
        let lu = j.lu().map_err(|_| LfmError::SingularJacobian { tau: tau.to_f64_lossy() })?;
        if lu.pivot_ratio < T::lit(SINGULAR_PIVOT_RATIO) {
            return Err(LfmError::SingularJacobian { tau: tau.to_f64_lossy() });
        }
        let inv = lu.inverse()?;
        Ok(trace_of_product(&flow.mixed_jacobian(tau, x), &inv))
    };
    // Fixed-step RK4 on y′ = g(τ); for a right-hand side independent of y
    // each step is Simpson's rule.
    let h = t / T::from_usize_lossy(ode_steps);
    let mut integral = Vec::with_capacity(ode_steps);
    let mut g0 = rate(T::zero())?;
    for s in 0..ode_steps {
        let tau = h * T::from_usize_lossy(s);
        let gm = rate(tau + h * T::lit(0.5))?;
        let g1 = rate(tau + h)?;
        integral.push(h * (g0 + T::lit(4.0) * gm + g1) / T::lit(6.0));
        g0 = g1;
    }
    let log_via_trace = compensated_sum(integral);
    let via_trace = log_via_trace.exp();
    let j = flow.space_jacobian(t, x);
    let lu = j.lu().map_err(|_| LfmError::SingularJacobian { tau: t.to_f64_lossy() })?;
    let via_direct = lu.det();
    let gap = (via_trace - via_direct).abs() / via_direct.abs().max(T::min_positive_value());
    Ok(LogdetComparison { via_trace, via_direct, gap, log_via_trace })
}

/// [`flow_logdet`] at many points, in parallel; results keep input order.
pub fn flow_logdet_batch<T: Real>(
    flow: &FlowSpec<T>,
    t: T,
    points: &[Vec<T>],
    ode_steps: usize,
) -> Result<Vec<LogdetComparison<T>>> {
    points.par_iter().map(|x| flow_logdet(flow, t, x, flow.dim(), ode_steps)).collect()
}

fn trace_of_product<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    let n = a.rows();
    compensated_sum((0..n).flat_map(|i| (0..n).map(move |k| a[(i, k)] * b[(k, i)])))
}

/// `|(ν, φ(·+h)) − (ν, φ)|`. The shifted pairing is evaluated on nodes
/// re-centred at `−h`, which keeps the Gaussian factorisation exact.
pub fn shift_invariance_check<T: Real>(
    h: &[T],
    phi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
) -> Result<T> {
    if h.len() > n {
        return Err(LfmError::DimensionMismatch(format!("shift has {} entries, n = {n}", h.len())));
    }
    if h.iter().all(|&v| v == T::zero()) {
        return Ok(T::zero());
    }
    let shifted = phi.shifted(h);
    let center: Vec<T> = h.iter().map(|&v| -v).collect();
    let a = integrate_lfm_centered(&shifted, n, quad, Some(&center))?;
    let b = integrate_lfm(phi, n, quad)?;
    Ok((a.value - b.value).norm())
}

/// Symmetric Nyström matrix `W^{1/2} K W^{1/2}` of an integral operator with
/// kernel `kernel(s, σ)` on `(a, b)`, using `m` Gauss–Legendre nodes.
pub fn nystrom_matrix<T: Real>(kernel: impl Fn(T, T) -> T, m: usize, a: T, b: T) -> Matrix<T> {
    let gl = GaussLegendre::new(m, a, b);
    let sw: Vec<T> = gl.weights.iter().map(|w| w.sqrt()).collect();
    Matrix::from_fn(m, m, |i, j| sw[i] * kernel(gl.nodes[i], gl.nodes[j]) * sw[j])
}

/// `Π(1 + t·λⱼ)` over the eigenvalues of a symmetric matrix.
pub fn eigenvalue_determinant<T: Real>(m: &Matrix<T>, t: T) -> T {
    let (eig, _) = m.symmetric_eigen();
    eig.iter().fold(T::one(), |acc, &l| acc * (T::one() + t * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Validate;

    fn gauss_moment_oracle(a: &[f64]) -> f64 {
        // φ′k = −Σ aⱼxⱼ²·gauss, and (ν, xⱼ²·gauss) = 1
        a.iter().sum()
    }

    #[test]
    fn geometric_trace() {
        let k = VectorFieldSpec::<f64>::diagonal(|j| 0.5f64.powi(j as i32 - 1));
        let x = vec![0.3; 10];
        let tr = jacobian_trace(&k, &x, 10).unwrap();
        assert!((tr.value - (2.0 - 2f64.powi(-9))).abs() < 1e-15);
        assert!((tr.tail_estimate - 2f64.powi(-9)).abs() < 1e-15);
    }

    #[test]
    fn rank_one_trace_is_inner_product() {
        let k = VectorFieldSpec::<f64>::rank_one(|j| 1.0 / j as f64, |j| 0.5f64.powi(j as i32));
        let x = vec![1.0; 12];
        let tr = jacobian_trace(&k, &x, 12).unwrap();
        let inner: f64 = (1..=12).map(|j| 0.5f64.powi(j) / j as f64).sum();
        assert!((tr.value - inner).abs() < 1e-15);
    }

    #[test]
    fn nonlinear_trace_matches_finite_differences() {
        let k = VectorFieldSpec::<f64>::new(|x| {
            x.iter().enumerate().map(|(i, &v)| v.sin() / 2f64.powi(i as i32 + 1)).collect()
        });
        let x = vec![0.0; 8];
        let tr = jacobian_trace(&k, &x, 8).unwrap();
        let oracle: f64 = (1..=8).map(|j| 2f64.powi(-j)).sum();
        assert!((tr.value - oracle).abs() < 1e-10);
        assert!((tr.tail_estimate - 2f64.powi(-8)).abs() < 1e-10);
    }

    #[test]
    fn missing_jacobian_is_reported() {
        let k = VectorFieldSpec::<f64>::new(|x| x.to_vec()).without_finite_differences();
        assert_eq!(jacobian_trace(&k, &[0.0], 1), Err(LfmError::NoJacobian));
    }

    #[test]
    fn pairing_with_diagonal_field() {
        let a = [0.7, -0.3, 1.1];
        let k = VectorFieldSpec::<f64>::diagonal(move |j| a[j - 1]);
        let phi = CylinderFunctional::<f64>::gaussian();
        let p = measure_derivative_pairing(&k, &phi, 3, &QuadratureSpec::tensor(12)).unwrap();
        let oracle = gauss_moment_oracle(&a);
        assert!((p.lhs.re - oracle).abs() < 1e-12, "lhs {:?}", p.lhs);
        assert!((p.rhs.re - oracle).abs() < 1e-12);
        assert!(p.gap < 1e-9);
    }

    #[test]
    fn constant_field_pairs_to_zero() {
        let k = VectorFieldSpec::<f64>::constant(vec![1.0, -2.0]);
        let phi = CylinderFunctional::<f64>::polynomial_gaussian(2, |x| 1.0 + x[0] * x[1]);
        let p = measure_derivative_pairing(&k, &phi, 2, &QuadratureSpec::tensor(16)).unwrap();
        assert!(p.lhs.norm() < 1e-13 && p.rhs.norm() == 0.0);
        let zero = VectorFieldSpec::<f64>::constant(vec![]);
        let p = measure_derivative_pairing(&zero, &phi, 2, &QuadratureSpec::tensor(16)).unwrap();
        assert_eq!((p.lhs.norm(), p.rhs.norm(), p.gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn matrix_exponential_determinant() {
        let a = Matrix::from_rows(&[vec![0.1_f64, 0.4], vec![-0.2, 0.3]]);
        let f = FlowSpec::linear(a.clone());
        let c = flow_logdet(&f, 0.7, &[0.5, -1.0], 2, 64).unwrap();
        let oracle = (0.7 * a.trace()).exp();
        assert!((c.via_direct - oracle).abs() < 1e-13);
        assert!(c.gap < 1e-12);
        let z = flow_logdet(&f, 0.0, &[0.5, -1.0], 2, 64).unwrap();
        assert_eq!((z.via_trace, z.via_direct), (1.0, 1.0));
    }

    #[test]
    fn singular_jacobian_reports_time() {
        // det(I + tM) = 1 − t vanishes at t = 1
        let m = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 0.0]]);
        let f = FlowSpec::affine(m);
        match flow_logdet(&f, 1.0, &[0.1, 0.2], 2, 16) {
            Err(LfmError::SingularJacobian { tau }) => assert!((tau - 1.0).abs() < 1e-12),
            other => panic!("expected a singular Jacobian, got {other:?}"),
        }
    }

    #[test]
    fn fredholm_determinant_by_both_routes() {
        let m = nystrom_matrix(|s: f64, r: f64| (-(s - r) * (s - r)).exp(), 40, 0.0, 1.0);
        let f = FlowSpec::affine(m.clone());
        let x = vec![0.0; 40];
        let c = flow_logdet(&f, 1.0, &x, 40, 64).unwrap();
        let oracle = eigenvalue_determinant(&m, 1.0);
        assert!(((c.via_direct - oracle) / oracle).abs() < 1e-12);
        assert!(c.gap < 1e-6, "gap {}", c.gap);
    }

    #[test]
    fn logdet_slope_matches_trace() {
        let k = VectorFieldSpec::<f64>::new(|x| vec![x[0].tanh() + 0.3 * x[1], 0.5 * (x[0] * x[1]).sin()]);
        let x = [0.4, -0.8];
        let slope = logdet_slope(&k, &x, 1e-4).unwrap();
        let tr = jacobian_trace(&k, &x, 2).unwrap().value;
        assert!(((slope - tr) / tr).abs() < 1e-5);
    }

    #[test]
    fn shifted_gaussian_keeps_its_value() {
        let q = QuadratureSpec::tensor(20);
        let phi = CylinderFunctional::<f64>::gaussian();
        assert_eq!(shift_invariance_check(&[0.0; 4], &phi, 4, &q).unwrap(), 0.0);
        assert!(shift_invariance_check(&[1.0], &phi, 4, &q).unwrap() < 1e-10);
        let sq = CylinderFunctional::<f64>::polynomial_gaussian(1, |x| x[0] * x[0]);
        assert!(shift_invariance_check(&[1.5, -0.5], &sq, 3, &q).unwrap() < 1e-9);
    }

    #[test]
    fn nystrom_matrix_is_symmetric() {
        let m = nystrom_matrix(|s: f64, r: f64| (-(s - r) * (s - r)).exp(), 10, 0.0, 1.0);
        assert!(m.sub(&m.transpose()).max_abs() < 1e-16);
        assert!(FlowSpec::affine(m).is_valid());
    }
}
