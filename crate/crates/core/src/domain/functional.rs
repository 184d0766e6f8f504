use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{LfmError, Result};
use crate::scalar::{real, Real};

use super::{Validate, Violation, VALIDATION_SEED};

pub type Evaluator<T> = Arc<dyn Fn(&[T]) -> Complex<T> + Send + Sync>;
pub type GradientFn<T> = Arc<dyn Fn(&[T]) -> Vec<Complex<T>> + Send + Sync>;
pub type TailFn<T> = Arc<dyn Fn(usize, T) -> Complex<T> + Send + Sync>;

/// Step for central differences: `1e-5` in double precision, widened to
/// `ε^{1/3}` for coarser scalars.
pub fn default_fd_step<T: Real>() -> T {
    T::lit(1e-5).max(T::epsilon().cbrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayClass {
    GaussianDominated,
    PolynomialTimesGaussian,
    OscillatoryDamped,
}

/// Envelope `|ψ(x)| ≤ constant · exp(−rate·|x|²)` over the coordinates the
/// functional reads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decay<T> {
    pub class: DecayClass,
    pub constant: T,
    pub rate: T,
}

impl<T: Real> Decay<T> {
    pub fn gaussian(constant: T, rate: T) -> Self {
        Self { class: DecayClass::GaussianDominated, constant, rate }
    }

    /// Polynomial prefactor: the envelope is only asserted in its rate.
    pub fn polynomial_gaussian(rate: T) -> Self {
        Self { class: DecayClass::PolynomialTimesGaussian, constant: T::infinity(), rate }
    }

    pub fn oscillatory(rate: T) -> Self {
        Self { class: DecayClass::OscillatoryDamped, constant: T::infinity(), rate }
    }

    fn worst(a: Self, b: Self) -> Self {
        let class = match (a.class, b.class) {
            (DecayClass::OscillatoryDamped, _) | (_, DecayClass::OscillatoryDamped) => DecayClass::OscillatoryDamped,
            (DecayClass::PolynomialTimesGaussian, _) | (_, DecayClass::PolynomialTimesGaussian) => {
                DecayClass::PolynomialTimesGaussian
            }
            _ => DecayClass::GaussianDominated,
        };
        Self { class, constant: a.constant + b.constant, rate: a.rate.min(b.rate) }
    }
}

/// Factor applied to every coordinate beyond the functional's own `dim`.
#[derive(Clone)]
pub enum Tail<T> {
    /// `exp(−x²/2)` on each remaining coordinate.
    Gaussian,
    /// Coordinate-dependent factor `f(j, x)`, `j` counted from 1.
    Factor(TailFn<T>),
}

impl<T: Real> Tail<T> {
    pub fn factor(&self, j: usize, x: T) -> Complex<T> {
        match self {
            Tail::Gaussian => real((-(x * x) * T::lit(0.5)).exp()),
            Tail::Factor(f) => f(j, x),
        }
    }

    fn derivative(&self, j: usize, x: T) -> Complex<T> {
        match self {
            Tail::Gaussian => real(-x * (-(x * x) * T::lit(0.5)).exp()),
            Tail::Factor(f) => {
                let h = default_fd_step::<T>();
                (f(j, x + h) - f(j, x - h)) / (h + h)
            }
        }
    }

    fn is_gaussian(&self) -> bool {
        matches!(self, Tail::Gaussian)
    }
}

/// Test function on `E` that depends on its first `dim` coordinates through
/// `evaluator` and on every later coordinate `j` through the separable
/// [`Tail`] factor. On `E_n` it reads
/// `ψ(x₁..xₙ) = evaluator(x₁..x_dim) · Π_{j>dim} tail(j, xⱼ)`.
#[derive(Clone)]
pub struct CylinderFunctional<T> {
    dim: usize,
    evaluator: Evaluator<T>,
    gradient: Option<GradientFn<T>>,
    tail: Tail<T>,
    decay: Decay<T>,
}

impl<T: Real> fmt::Debug for CylinderFunctional<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunctional")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("gaussian_tail", &self.tail.is_gaussian())
            .field("decay", &self.decay)
            .finish()
    }
}

impl<T: Real> CylinderFunctional<T> {
    pub fn new(dim: usize, decay: Decay<T>, evaluator: impl Fn(&[T]) -> Complex<T> + Send + Sync + 'static) -> Self {
        Self { dim, evaluator: Arc::new(evaluator), gradient: None, tail: Tail::Gaussian, decay }
    }

    /// The canonical Gaussian `exp(−|x|²/2)` on every `E_n`.
    pub fn gaussian() -> Self {
        Self::new(0, Decay::gaussian(T::one(), T::lit(0.5)), |_| real(T::one()))
    }

    /// `p(x₁..x_dim) · exp(−|x|²/2)` for a real polynomial-like prefactor.
    pub fn polynomial_gaussian(dim: usize, prefactor: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self::new(dim, Decay::polynomial_gaussian(T::lit(0.5)), move |x| {
            let r2: T = x.iter().map(|&v| v * v).sum();
            real(prefactor(x) * (-r2 * T::lit(0.5)).exp())
        })
    }

    pub fn with_gradient(mut self, g: impl Fn(&[T]) -> Vec<Complex<T>> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_tail(mut self, tail: Tail<T>) -> Self {
        self.tail = tail;
        self
    }

    pub fn with_decay(mut self, decay: Decay<T>) -> Self {
        self.decay = decay;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decay(&self) -> Decay<T> {
        self.decay
    }

    pub fn tail(&self) -> &Tail<T> {
        &self.tail
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Evaluator on its own coordinates; `x.len()` must equal `dim`.
    pub fn eval_core(&self, x: &[T]) -> Complex<T> {
        (self.evaluator)(x)
    }

    /// Value on `E_n` with `n = x.len() ≥ dim`.
    pub fn eval(&self, x: &[T]) -> Complex<T> {
        debug_assert!(x.len() >= self.dim);
        let mut v = (self.evaluator)(&x[..self.dim]);
        for (j, &xj) in x.iter().enumerate().skip(self.dim) {
            v *= self.tail.factor(j + 1, xj);
        }
        v
    }

    /// Gradient on `E_n`, analytic where available and central differences
    /// otherwise.
    pub fn gradient(&self, x: &[T]) -> Vec<Complex<T>> {
        let n = x.len();
        let d = self.dim;
        let core = (self.evaluator)(&x[..d]);
        let tails: Vec<Complex<T>> = (d..n).map(|j| self.tail.factor(j + 1, x[j])).collect();
        let tail_prod = tails.iter().fold(real(T::one()), |a, &b| a * b);
        let mut grad = Vec::with_capacity(n);
        match &self.gradient {
            Some(g) => grad.extend(g(&x[..d]).into_iter().map(|c| c * tail_prod)),
            None => {
                let h = default_fd_step::<T>();
                let mut probe = x[..d].to_vec();
                for i in 0..d {
                    let orig = probe[i];
                    probe[i] = orig + h;
                    let fp = (self.evaluator)(&probe);
                    probe[i] = orig - h;
                    let fm = (self.evaluator)(&probe);
                    probe[i] = orig;
                    grad.push((fp - fm) / (h + h) * tail_prod);
                }
            }
        }
        for j in d..n {
            let others = tails.iter().enumerate().filter(|&(k, _)| k + d != j).fold(real(T::one()), |a, (_, &b)| a * b);
            grad.push(core * others * self.tail.derivative(j + 1, x[j]));
        }
        grad
    }

    /// Same functional viewed with `n ≥ dim` explicit coordinates.
    pub fn lifted(&self, n: usize) -> Self {
        if n <= self.dim {
            return self.clone();
        }
        let base = self.clone();
        let gbase = self.clone();
        // The base gradient differentiates tails analytically and falls back
        // to differences only on the original core coordinates.
        let gradient: Option<GradientFn<T>> = Some(Arc::new(move |x: &[T]| gbase.gradient(x)));
        Self {
            dim: n,
            evaluator: Arc::new(move |x: &[T]| base.eval(x)),
            gradient,
            tail: self.tail.clone(),
            decay: self.decay,
        }
    }

    /// `x ↦ ψ(x + h)`.
    pub fn shifted(&self, h: &[T]) -> Self {
        let m = self.dim.max(h.len());
        let lifted = self.lifted(m);
        let mut shift = h.to_vec();
        shift.resize(m, T::zero());
        let shift = Arc::new(shift);
        let (ev, s1) = (lifted.clone(), shift.clone());
        let evaluator = move |x: &[T]| {
            let y: Vec<T> = x.iter().zip(s1.iter()).map(|(&a, &b)| a + b).collect();
            ev.eval(&y)
        };
        let gradient = lifted.gradient.as_ref().map(|_| {
            let (gv, s2) = (lifted.clone(), shift.clone());
            Arc::new(move |x: &[T]| {
                let y: Vec<T> = x.iter().zip(s2.iter()).map(|(&a, &b)| a + b).collect();
                gv.gradient(&y)
            }) as GradientFn<T>
        });
        Self { dim: m, evaluator: Arc::new(evaluator), gradient, tail: self.tail.clone(), decay: self.decay }
    }

    /// Pointwise product with a function of the first `n` coordinates.
    /// The result reads `max(dim, n)` coordinates and has no analytic gradient.
    pub fn times(&self, n: usize, g: impl Fn(&[T]) -> Complex<T> + Send + Sync + 'static) -> Self {
        let m = self.dim.max(n);
        let lifted = self.lifted(m);
        let evaluator = move |x: &[T]| lifted.eval(x) * g(&x[..n]);
        Self { dim: m, evaluator: Arc::new(evaluator), gradient: None, tail: self.tail.clone(), decay: self.decay }
    }

    /// `x ↦ ψ(map(x))` on `E_n`, where `map: ℝⁿ → ℝⁿ`.
    pub fn composed(&self, n: usize, map: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        let base = self.lifted(n);
        let evaluator = move |x: &[T]| base.eval(&map(x));
        Self {
            dim: n.max(self.dim),
            evaluator: Arc::new(evaluator),
            gradient: None,
            tail: self.tail.clone(),
            decay: self.decay,
        }
    }

    /// `Σ aₖ ψₖ`. All terms must carry the Gaussian tail so that the sum is
    /// again a cylinder functional of the same form.
    pub fn linear_combination(terms: &[(Complex<T>, &Self)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(LfmError::InvalidInput("empty linear combination".into()));
        }
        if terms.iter().any(|(_, f)| !f.tail.is_gaussian()) {
            return Err(LfmError::InvalidInput("linear combinations need functionals with the Gaussian tail".into()));
        }
        let m = terms.iter().map(|(_, f)| f.dim).max().unwrap_or(0);
        let parts: Vec<(Complex<T>, Self)> = terms.iter().map(|(a, f)| (*a, f.lifted(m))).collect();
        let decay = terms
            .iter()
            .map(|(a, f)| Decay { constant: f.decay.constant * a.norm(), ..f.decay })
            .reduce(Decay::worst)
            .expect("non-empty");
        let evaluator =
            move |x: &[T]| parts.iter().fold(Complex::new(T::zero(), T::zero()), |acc, (a, f)| acc + *a * f.eval(x));
        Ok(Self { dim: m, evaluator: Arc::new(evaluator), gradient: None, tail: Tail::Gaussian, decay })
    }
}

impl<T: Real> Validate for CylinderFunctional<T> {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let d = self.dim;
        let mut not_finite = false;
        let mut bound_broken = false;
        for _ in 0..64 {
            let x: Vec<T> =
                (0..d).map(|_| T::lit(2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng))).collect();
            let v = (self.evaluator)(&x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                not_finite = true;
            }
            if self.decay.class == DecayClass::GaussianDominated {
                let r2: T = x.iter().map(|&v| v * v).sum();
                let bound = self.decay.constant * (-self.decay.rate * r2).exp();
                if v.norm() > bound * (T::one() + T::lit(1e-12)) + T::min_positive_value() {
                    bound_broken = true;
                }
            }
        }
        if not_finite {
            out.push(Violation::new("evaluator is not finite on sampled inputs"));
        }
        if bound_broken {
            out.push(Violation::new("Gaussian decay bound violated on sampled inputs"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_tail_product() {
        let g = CylinderFunctional::<f64>::gaussian();
        let x = [0.3, -1.2, 2.0];
        let expect = (-(0.09 + 1.44 + 4.0) / 2.0_f64).exp();
        assert!((g.eval(&x).re - expect).abs() < 1e-15);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn gradient_matches_analytic_for_gaussian() {
        let g = CylinderFunctional::<f64>::gaussian();
        let x = [0.3, -1.2];
        let grad = g.gradient(&x);
        let v = g.eval(&x).re;
        assert!((grad[0].re + 0.3 * v).abs() < 1e-14);
        assert!((grad[1].re - 1.2 * v).abs() < 1e-14);
    }

    #[test]
    fn fd_gradient_on_core_coordinates() {
        let f = CylinderFunctional::<f64>::polynomial_gaussian(1, |x| x[0] * x[0]);
        let x = [0.7, 0.2];
        let grad = f.gradient(&x);
        let g0 = (-(0.49 + 0.04) / 2.0_f64).exp();
        let exact0 = (2.0 * 0.7 - 0.7 * 0.49) * g0;
        assert!((grad[0].re - exact0).abs() < 1e-9);
        let exact1 = -0.2 * 0.49 * g0;
        assert!((grad[1].re - exact1).abs() < 1e-14);
    }

    #[test]
    fn shifted_reads_shifted_point() {
        let f = CylinderFunctional::<f64>::polynomial_gaussian(1, |x| x[0]);
        let s = f.shifted(&[0.5, 0.0, -1.0]);
        let x = [0.1, 0.2, 0.3];
        let y = [0.6, 0.2, -0.7];
        assert!((s.eval(&x) - f.eval(&y)).norm() < 1e-15);
    }

    #[test]
    fn linear_combination_is_pointwise() {
        let a = CylinderFunctional::<f64>::gaussian();
        let b = CylinderFunctional::<f64>::polynomial_gaussian(2, |x| x[0] * x[1]);
        let c = CylinderFunctional::linear_combination(&[(real(2.0), &a), (Complex::new(0.0, 1.0), &b)]).unwrap();
        let x = [0.4, -0.3, 1.1];
        let expect = a.eval(&x) * 2.0 + b.eval(&x) * Complex::new(0.0, 1.0);
        assert!((c.eval(&x) - expect).norm() < 1e-15);
    }

    #[test]
    fn validate_flags_broken_bound() {
        let liar = CylinderFunctional::<f64>::new(1, Decay::gaussian(1.0, 0.5), |x| real(1.0 + x[0] * x[0]));
        let v = liar.validate();
        assert!(v.iter().any(|m| m.mentions("decay bound")));
        let nan = CylinderFunctional::<f64>::new(1, Decay::oscillatory(0.0), |_| real(f64::NAN));
        assert!(nan.validate().iter().any(|m| m.mentions("not finite")));
    }
}
