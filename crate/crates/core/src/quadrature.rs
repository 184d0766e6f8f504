//! One-dimensional Gauss rules and the small extrapolation helpers used by
//! the damping schedule and convergence-order measurements.

use crate::scalar::Real;

/// Gauss–Hermite rule for the standard normal weight.
///
/// Nodes integrate against `(2π)^{-1/2} exp(-x²/2)`, so the weights sum to one
/// and `Σ wᵢ p(xᵢ)` is exact for polynomials of degree `< 2m`.
#[derive(Clone, Debug)]
pub struct GaussHermite<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    /// Panics if `m == 0`.
    pub fn new(m: usize) -> Self {
        assert!(m > 0, "Gauss-Hermite rule needs at least one node");
        let (mut x, mut w) = hermite_physicists(m);
        x.reverse();
        w.reverse();
        let sqrt2 = std::f64::consts::SQRT_2;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        Self {
            nodes: x.iter().map(|&z| T::lit(z * sqrt2)).collect(),
            weights: w.iter().map(|&v| T::lit(v * inv_sqrt_pi)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Expectation of `f` under the standard normal.
    pub fn expectation(&self, f: impl Fn(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

// Newton iteration on orthonormal Hermite polynomials, weight exp(-x^2).
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre rule on `[a, b]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(m: usize, a: T, b: T) -> Self {
        assert!(m > 0, "Gauss-Legendre rule needs at least one node");
        let (x, w) = legendre_unit(m);
        let (af, bf) = (a.to_f64_lossy(), b.to_f64_lossy());
        let mid = 0.5 * (af + bf);
        let half = 0.5 * (bf - af);
        Self {
            nodes: x.iter().map(|&z| T::lit(mid + half * z)).collect(),
            weights: w.iter().map(|&v| T::lit(half * v)).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Value at `target` of the interpolating polynomial through `(xs, ys)`
/// (Neville's scheme). Also returns the change contributed by the last
/// point, a cheap error indicator.
pub fn neville<T: Real, Y>(xs: &[T], ys: &[Y], target: T) -> (Y, Y)
where
    Y: Copy + std::ops::Sub<Output = Y> + std::ops::Add<Output = Y> + std::ops::Mul<T, Output = Y>,
{
    assert!(!xs.is_empty() && xs.len() == ys.len());
    let n = xs.len();
    let mut p: Vec<Y> = ys.to_vec();
    let mut previous_top = p[0];
    for level in 1..n {
        previous_top = p[0];
        for i in 0..(n - level) {
            let (xi, xj) = (xs[i], xs[i + level]);
            let a = (target - xj) / (xi - xj);
            let b = (xi - target) / (xi - xj);
            p[i] = p[i] * a + p[i + 1] * b;
        }
    }
    let top = p[0];
    (top, top - previous_top)
}

/// Least-squares slope of `log(error)` against `log(1/n)`: the observed
/// convergence order of a sequence of errors at resolutions `ns`.
pub fn convergence_order(ns: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(ns.len(), errors.len());
    let xs: Vec<f64> = ns.iter().map(|n| -n.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_sum_to_one_and_moments_exact() {
        for m in [1, 2, 5, 20, 60, 150] {
            let gh = GaussHermite::<f64>::new(m);
            let total: f64 = gh.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-13, "m={m} sum={total}");
            if m >= 3 {
                // E[x^4] = 3 for the standard normal
                let m4 = gh.expectation(|x| x.powi(4));
                assert!((m4 - 3.0).abs() < 1e-12, "m={m} m4={m4}");
            }
        }
    }

    #[test]
    fn hermite_nodes_sorted_and_symmetric() {
        let gh = GaussHermite::<f64>::new(31);
        assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
        for i in 0..31 {
            assert!((gh.nodes[i] + gh.nodes[30 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_characteristic_function() {
        // E[cos(x)] = exp(-1/2)
        let gh = GaussHermite::<f64>::new(30);
        let v = gh.expectation(f64::cos);
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn legendre_integrates_polynomials_and_exp() {
        let gl = GaussLegendre::<f64>::new(10, 0.0, 2.0);
        assert!((gl.integrate(|x| x.powi(7)) - 2f64.powi(8) / 8.0).abs() < 1e-12);
        assert!((gl.integrate(f64::exp) - (2f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn neville_recovers_polynomial_at_zero() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x - 3.0 * x * x + 0.5 * x * x * x).collect();
        let (v, _) = neville(&xs, &ys, 0.0);
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn order_of_power_law_is_exponent() {
        let ns = [32.0, 64.0, 128.0, 256.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 / (n * n)).collect();
        assert!((convergence_order(&ns, &errs) - 2.0).abs() < 1e-12);
    }
}
