//! The normalised Lebesgue–Feynman functional on cylinder functionals.
//!
//! On `E_n = span{e₁..eₙ}` the functional is
//! `(ν, ψ) ≈ (2π)^{-n/2} ∫_{E_n} ψ(x₁..xₙ) dx₁..dxₙ`, normalised so that the
//! canonical Gaussian `exp(−|x|²/2)` has value one on every `E_n`. The tensor
//! Gauss–Hermite scheme factors that Gaussian out of the integrand, so the
//! normalisation cancels exactly; the Monte Carlo scheme draws from the same
//! Gaussian.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::{CylinderFunctional, DecayClass, QuadratureSpec, Scheme, Validate};
use crate::error::{LfmError, Result};
use crate::quadrature::{neville, GaussHermite};
use crate::scalar::{compensated_sum, compensated_sum_complex, real, Real};

const CHUNK: usize = 4096;

/// One evaluation of `(ν, ψ)` on `E_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LfmValue<T> {
    pub value: Complex<T>,
    pub dim: usize,
    pub quadrature_error_estimate: T,
    /// Damping weight of the last evaluation (smallest schedule entry when
    /// extrapolated).
    pub epsilon_used: T,
    pub extrapolated: bool,
    pub scheme_used: Scheme,
    /// Set when the tensor budget was exceeded and Monte Carlo took over.
    pub switched_to_mc: bool,
}

/// `(ν, ψ)` on `E_n`.
pub fn integrate_lfm<T: Real>(psi: &CylinderFunctional<T>, n: usize, quad: &QuadratureSpec<T>) -> Result<LfmValue<T>> {
    integrate_lfm_centered(psi, n, quad, None)
}

/// `(ν, ψ)` with the quadrature nodes re-centred at `center` (padded with
/// zeros to `n`). Shifted integrands keep their Gaussian factorisation when
/// the nodes follow the shift.
pub fn integrate_lfm_centered<T: Real>(
    psi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
    center: Option<&[T]>,
) -> Result<LfmValue<T>> {
    if let Some(v) = quad.validate().into_iter().next() {
        return Err(LfmError::InvalidInput(v.0));
    }
    if n < psi.dim() {
        return Err(LfmError::DimensionMismatch(format!(
            "functional reads {} coordinates but E_n has n = {n}",
            psi.dim()
        )));
    }
    let mut c = vec![T::zero(); n];
    if let Some(center) = center {
        if center.len() > n {
            return Err(LfmError::DimensionMismatch(format!("center has {} > n = {n} entries", center.len())));
        }
        c[..center.len()].copy_from_slice(center);
    }
    let oscillatory = psi.decay().class == DecayClass::OscillatoryDamped;
    match &quad.epsilon_schedule {
        Some(schedule) => {
            let evals: Vec<LfmValue<T>> =
                schedule.iter().map(|&eps| integrate_at_epsilon(psi, n, quad, &c, eps)).collect::<Result<_>>()?;
            let ys: Vec<Complex<T>> = evals.iter().map(|v| v.value).collect();
            let (value, change) = neville(schedule, &ys, T::zero());
            let quad_err = evals.iter().fold(T::zero(), |m, v| m.max(v.quadrature_error_estimate));
            let last = evals.last().expect("non-empty schedule");
            Ok(LfmValue {
                value,
                dim: n,
                quadrature_error_estimate: change.norm() + quad_err,
                epsilon_used: *schedule.last().expect("non-empty"),
                extrapolated: true,
                scheme_used: last.scheme_used,
                switched_to_mc: evals.iter().any(|v| v.switched_to_mc),
            })
        }
        None => {
            if oscillatory && quad.damping_epsilon == T::zero() && psi.decay().rate == T::zero() {
                return Err(LfmError::NonIntegrable(
                    "oscillatory integrand needs damping_epsilon > 0 or an epsilon schedule".into(),
                ));
            }
            integrate_at_epsilon(psi, n, quad, &c, quad.damping_epsilon)
        }
    }
}

fn integrate_at_epsilon<T: Real>(
    psi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
    center: &[T],
    eps: T,
) -> Result<LfmValue<T>> {
    let decay = psi.decay();
    let sigma = if decay.class == DecayClass::OscillatoryDamped {
        let total = decay.rate + eps;
        if total > T::zero() {
            quad.node_scale / (T::lit(2.0) * total).sqrt()
        } else {
            quad.node_scale
        }
    } else {
        quad.node_scale
    };
    let d = psi.dim();
    let use_mc = match quad.scheme {
        Scheme::GaussianImportanceMc => true,
        Scheme::TensorGaussHermite => match quad.check_budget(d) {
            Ok(()) => false,
            Err(e) if !quad.mc_fallback => return Err(e),
            Err(_) => true,
        },
    };
    let (value, err) =
        if use_mc { monte_carlo(psi, n, quad, center, sigma, eps) } else { tensor(psi, n, quad, center, sigma, eps) };
    Ok(LfmValue {
        value,
        dim: n,
        quadrature_error_estimate: err,
        epsilon_used: eps,
        extrapolated: false,
        scheme_used: if use_mc { Scheme::GaussianImportanceMc } else { Scheme::TensorGaussHermite },
        switched_to_mc: use_mc && quad.scheme == Scheme::TensorGaussHermite,
    })
}

/// Nodes `c + σy`, weights `σ·w·exp(y²/2)`: the rule for `(2π)^{-1/2}∫ f dx`.
struct ShiftedRule<T> {
    y: Vec<T>,
    w: Vec<T>,
    sigma: T,
}

impl<T: Real> ShiftedRule<T> {
    fn new(m: usize, sigma: T) -> Self {
        let gh = GaussHermite::<T>::new(m);
        let w = gh.nodes.iter().zip(&gh.weights).map(|(&y, &w)| w * sigma * (y * y * T::lit(0.5)).exp()).collect();
        Self { y: gh.nodes, w, sigma }
    }

    fn integrate_1d(&self, c: T, f: impl Fn(T) -> Complex<T>) -> Complex<T> {
        compensated_sum_complex(self.y.iter().zip(&self.w).map(|(&y, &w)| f(c + self.sigma * y) * w))
    }
}

fn coarse_count(m: usize) -> usize {
    m.saturating_sub((m / 4).max(1)).max(1)
}

fn tensor<T: Real>(
    psi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
    center: &[T],
    sigma: T,
    eps: T,
) -> (Complex<T>, T) {
    let m = quad.nodes_per_dim;
    let fine = ShiftedRule::new(m, sigma);
    let coarse = quad.estimate_error.then(|| ShiftedRule::new(coarse_count(m), sigma));
    let d = psi.dim();
    let damp = |x: T| (-eps * x * x).exp();

    let core = |rule: &ShiftedRule<T>| tensor_core(psi, rule, &center[..d], eps);
    let core_fine = core(&fine);
    let core_err = coarse.as_ref().map_or(T::zero(), |r| (core(r) - core_fine).norm());

    let mut value = core_fine;
    let mut rel_err = if core_fine.norm() > T::zero() { core_err / core_fine.norm() } else { core_err };
    for j in d..n {
        let f = |x: T| psi.tail().factor(j + 1, x) * damp(x);
        let t_fine = fine.integrate_1d(center[j], f);
        if let Some(r) = &coarse {
            let t_coarse = r.integrate_1d(center[j], f);
            if t_fine.norm() > T::zero() {
                rel_err += (t_fine - t_coarse).norm() / t_fine.norm();
            }
        }
        value *= t_fine;
    }
    let err = if core_fine.norm() > T::zero() { rel_err * value.norm() } else { core_err };
    (value, err)
}

fn tensor_core<T: Real>(psi: &CylinderFunctional<T>, rule: &ShiftedRule<T>, center: &[T], eps: T) -> Complex<T> {
    let d = center.len();
    if d == 0 {
        return psi.eval_core(&[]);
    }
    let m = rule.y.len();
    let total = m.pow(d as u32);
    let chunks = total.div_ceil(CHUNK);
    let partials: Vec<Complex<T>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut idx = vec![0usize; d];
            let mut rem = start;
            for slot in idx.iter_mut().rev() {
                *slot = rem % m;
                rem /= m;
            }
            let mut x = vec![T::zero(); d];
            let mut terms = Vec::with_capacity(end - start);
            for _ in start..end {
                let mut w = T::one();
                let mut r2 = T::zero();
                for k in 0..d {
                    let xv = center[k] + rule.sigma * rule.y[idx[k]];
                    x[k] = xv;
                    w *= rule.w[idx[k]];
                    r2 += xv * xv;
                }
                let damping = if eps > T::zero() { (-eps * r2).exp() } else { T::one() };
                terms.push(psi.eval_core(&x) * (w * damping));
                for k in (0..d).rev() {
                    idx[k] += 1;
                    if idx[k] < m {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            compensated_sum_complex(terms)
        })
        .collect();
    compensated_sum_complex(partials)
}

fn monte_carlo<T: Real>(
    psi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
    center: &[T],
    sigma: T,
    eps: T,
) -> (Complex<T>, T) {
    let total = quad.sample_count;
    let chunks = total.div_ceil(CHUNK);
    let sigma_n = sigma.powi(n as i32);
    let partials: Vec<(Complex<T>, T)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(quad.rng_seed);
            rng.set_stream(chunk as u64);
            let count = CHUNK.min(total - chunk * CHUNK);
            let mut x = vec![T::zero(); n];
            let mut sum = Vec::with_capacity(count);
            let mut sum_sq = Vec::with_capacity(count);
            for _ in 0..count {
                let mut z2 = T::zero();
                let mut r2 = T::zero();
                for k in 0..n {
                    let z = T::lit(StandardNormal.sample(&mut rng));
                    let xv = center[k] + sigma * z;
                    x[k] = xv;
                    z2 += z * z;
                    r2 += xv * xv;
                }
                let ratio = sigma_n * (z2 * T::lit(0.5) - eps * r2).exp();
                let v = psi.eval(&x) * ratio;
                sum.push(v);
                sum_sq.push(v.norm_sqr());
            }
            (compensated_sum_complex(sum), compensated_sum(sum_sq))
        })
        .collect();
    let s = compensated_sum_complex(partials.iter().map(|p| p.0));
    let s2 = compensated_sum(partials.iter().map(|p| p.1));
    let nn = T::from_usize_lossy(total);
    let mean = s / nn;
    let var = (s2 / nn - mean.norm_sqr()).max(T::zero());
    (mean, (var / nn).sqrt())
}

/// `|(ν, exp(−|x|²/2)) − 1|` on `E_n`.
pub fn normalization_check<T: Real>(n: usize, quad: &QuadratureSpec<T>) -> Result<T> {
    if n == 0 {
        return Err(LfmError::InvalidInput("n must be at least 1".into()));
    }
    let v = integrate_lfm(&CylinderFunctional::gaussian(), n, quad)?;
    Ok((v.value - real(T::one())).norm())
}

/// Values of a family `ψₙ` on `E_1 .. E_{n_max}` with successive differences.
#[derive(Clone, Debug)]
pub struct DimensionSweep<T> {
    pub values: Vec<LfmValue<T>>,
    /// `|vₙ − vₙ₋₁|` for `n = 2..=n_max`.
    pub differences: Vec<T>,
    /// Differences did not decrease over the last three terms.
    pub non_cauchy: bool,
}

pub fn dimension_sweep<T: Real>(
    family: impl Fn(usize) -> CylinderFunctional<T>,
    n_max: usize,
    quad: &QuadratureSpec<T>,
) -> Result<DimensionSweep<T>> {
    if n_max == 0 {
        return Err(LfmError::InvalidInput("n_max must be at least 1".into()));
    }
    let values: Vec<LfmValue<T>> = (1..=n_max).map(|n| integrate_lfm(&family(n), n, quad)).collect::<Result<_>>()?;
    let differences: Vec<T> = values.windows(2).map(|w| (w[1].value - w[0].value).norm()).collect();
    let floor = T::epsilon() * T::lit(64.0);
    let non_cauchy = differences.len() >= 3 && {
        let tail = &differences[differences.len() - 3..];
        tail[2] > floor && !(tail[0] >= tail[1] && tail[1] >= tail[2])
    };
    Ok(DimensionSweep { values, differences, non_cauchy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Decay;
    use crate::scalar::cis;

    #[test]
    fn gaussian_is_normalised_on_e5() {
        let v = integrate_lfm(&CylinderFunctional::<f64>::gaussian(), 5, &QuadratureSpec::tensor(20)).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-14 && v.value.im == 0.0);
    }

    #[test]
    fn odd_moment_vanishes() {
        let psi = CylinderFunctional::<f64>::polynomial_gaussian(1, |x| x[0]);
        let v = integrate_lfm(&psi, 3, &QuadratureSpec::tensor(20)).unwrap();
        assert!(v.value.norm() < 1e-15);
    }

    #[test]
    fn second_moment_is_one() {
        // (2π)^{-1/2} ∫ x² e^{-x²/2} dx = 1
        let psi = CylinderFunctional::<f64>::polynomial_gaussian(1, |x| x[0] * x[0]);
        let v = integrate_lfm(&psi, 2, &QuadratureSpec::tensor(20)).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fourier_transform_of_gaussian() {
        let psi =
            CylinderFunctional::<f64>::new(1, Decay::gaussian(1.0, 0.5), |x| cis(x[0]) * (-x[0] * x[0] / 2.0).exp());
        let v = integrate_lfm(&psi, 1, &QuadratureSpec::tensor(30)).unwrap();
        assert!((v.value - real((-0.5f64).exp())).norm() < 1e-14);
    }

    #[test]
    fn undamped_oscillatory_is_rejected() {
        let psi = CylinderFunctional::<f64>::new(1, Decay::oscillatory(0.0), |x| cis(x[0] * x[0] / 2.0));
        let err = integrate_lfm(&psi, 1, &QuadratureSpec::tensor(30)).unwrap_err();
        assert!(matches!(err, LfmError::NonIntegrable(_)));
    }

    #[test]
    fn budget_error_without_fallback() {
        let psi = CylinderFunctional::<f64>::polynomial_gaussian(6, |x| x[0]);
        let q = QuadratureSpec::tensor(20).with_budget(1000).with_mc_fallback(false);
        assert!(matches!(integrate_lfm(&psi, 6, &q), Err(LfmError::BudgetExceeded { .. })));
        let q = QuadratureSpec::tensor(20).with_budget(1000).with_samples(20_000);
        let v = integrate_lfm(&psi, 6, &q).unwrap();
        assert!(v.switched_to_mc && v.scheme_used == Scheme::GaussianImportanceMc);
        assert!(v.value.norm() < 5.0 * v.quadrature_error_estimate + 1e-3);
    }

    #[test]
    fn dimension_below_functional_is_rejected() {
        let psi = CylinderFunctional::<f64>::polynomial_gaussian(3, |x| x[2]);
        assert!(matches!(integrate_lfm(&psi, 2, &QuadratureSpec::tensor(4)), Err(LfmError::DimensionMismatch(_))));
    }

    #[test]
    fn non_cauchy_flag() {
        let q = QuadratureSpec::tensor(10);
        let sweep = dimension_sweep(|_| CylinderFunctional::<f64>::gaussian(), 6, &q).unwrap();
        assert!(!sweep.non_cauchy);
        // growing values: ψₙ = n·gauss
        let grow = dimension_sweep(
            |n| {
                let s = (n * n) as f64;
                CylinderFunctional::<f64>::polynomial_gaussian(0, move |_| s)
            },
            6,
            &q,
        )
        .unwrap();
        assert!(grow.non_cauchy);
    }

    #[test]
    fn single_precision_normalisation() {
        let e = normalization_check::<f32>(4, &QuadratureSpec::tensor(16)).unwrap();
        assert!(e < 1e-5);
    }
}
