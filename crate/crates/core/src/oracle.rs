//! Reference solutions the time-sliced propagators are checked against: a
//! Strang split-step spectral solver and closed-form free and harmonic
//! kernels.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::domain::{Mode, PotentialSpec, WaveFunction};
use crate::error::{LfmError, Result};
use crate::kernel::GaussianKernel;
use crate::scalar::{cis, real, Real};

/// Default number of split steps per evolution.
pub const DEFAULT_STEPS: usize = 2048;

/// Fraction of the grid length at each edge whose mass counts as leakage.
pub const EDGE_BAND: f64 = 0.025;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Step size; `t / 2048` when absent.
    pub dt: Option<T>,
    /// Largest mass fraction allowed in the edge bands at the final time;
    /// `None` for genuinely periodic data.
    pub leak_tolerance: Option<T>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { dt: None, leak_tolerance: Some(T::lit(1e-10)) }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn periodic(mut self) -> Self {
        self.leak_tolerance = None;
        self
    }

    pub fn with_leak_tolerance(mut self, tol: T) -> Self {
        self.leak_tolerance = Some(tol);
        self
    }
}

/// Evolves `phi0` to time `t` with `dt` (or the default step).
pub fn solve_schrodinger<T: Real>(
    v: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    t: T,
    mode: Mode,
    dt: Option<T>,
) -> Result<WaveFunction<T>> {
    solve_schrodinger_with(v, phi0, t, mode, &SolverOptions { dt, ..SolverOptions::default() })
}

pub fn solve_schrodinger_with<T: Real>(
    v: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    t: T,
    mode: Mode,
    opts: &SolverOptions<T>,
) -> Result<WaveFunction<T>> {
    if !(t >= T::zero()) {
        return Err(LfmError::InvalidInput(format!("evolution time must be non-negative (got {t})")));
    }
    if phi0.values.len() != phi0.grid.n_points {
        return Err(LfmError::GridMismatch("wave function does not match its grid".into()));
    }
    if t == T::zero() {
        return Ok(phi0.clone());
    }
    let dt_req = opts.dt.unwrap_or(t / T::from_usize_lossy(DEFAULT_STEPS));
    if !(dt_req > T::zero()) {
        return Err(LfmError::InvalidInput(format!("dt must be positive (got {dt_req})")));
    }
    let steps = (t / dt_req).ceil().to_usize().unwrap_or(1).max(1);
    let dt = t / T::from_usize_lossy(steps);
    let grid = phi0.grid;
    let vmax = v.max_abs_on(&grid);
    if !vmax.is_finite() || dt * vmax > T::PI() {
        return Err(LfmError::UnstableStep(format!("dt·max|V| = {} exceeds π", (dt * vmax).to_f64_lossy())));
    }

    let n = grid.n_points;
    let half = dt * T::lit(0.5);
    type Factors<T> = Vec<Complex<T>>;
    let (potential_half, potential_full, kinetic): (Factors<T>, Factors<T>, Factors<T>) = {
        let factor = |x: T| match mode {
            Mode::RealTime => cis(-x),
            Mode::ImaginaryTime => real((-x).exp()),
        };
        let vs: Vec<T> = grid.points().into_iter().map(|q| v.eval(q)).collect();
        let inv_n = T::one() / T::from_usize_lossy(n);
        (
            vs.iter().map(|&vq| factor(vq * half)).collect(),
            vs.iter().map(|&vq| factor(vq * dt)).collect(),
            grid.wavenumbers().into_iter().map(|k| factor(k * k * half) * inv_n).collect(),
        )
    };

    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut psi = phi0.values.clone();
    let mul = |a: &mut [Complex<T>], b: &[Complex<T>]| a.iter_mut().zip(b).for_each(|(x, y)| *x *= *y);

    mul(&mut psi, &potential_half);
    for step in 0..steps {
        forward.process(&mut psi);
        mul(&mut psi, &kinetic);
        inverse.process(&mut psi);
        if step + 1 < steps {
            mul(&mut psi, &potential_full);
        }
    }
    mul(&mut psi, &potential_half);

    if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LfmError::UnstableStep("non-finite values after evolution".into()));
    }
    let out = WaveFunction::new(grid, psi)?;
    if let Some(tol) = opts.leak_tolerance {
        let leak = out.edge_mass(T::lit(EDGE_BAND));
        if leak > tol {
            return Err(LfmError::BoundaryLeak { mass: leak.to_f64_lossy(), tolerance: tol.to_f64_lossy() });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PropagatorKind<T> {
    Free,
    Harmonic { omega: T },
}

/// Closed-form kernel `K(q, q′, t)`.
///
/// Imaginary time: the heat kernel and the Mehler kernel. Real time: the
/// free kernel `(2πit)^{-1/2} e^{i(q−q′)²/2t}` and the harmonic kernel with
/// its Maslov phase `e^{−iπm/2}`, `m = ⌊ωt/π⌋`.
pub fn exact_propagator<T: Real>(kind: PropagatorKind<T>, t: T, mode: Mode) -> Result<GaussianKernel<T>> {
    if !(t > T::zero()) {
        return Err(LfmError::InvalidInput(format!("kernel time must be positive (got {t})")));
    }
    let half = T::lit(0.5);
    let two_pi = T::lit(2.0) * T::PI();
    let c = |re: T, im: T| Complex::new(re, im);
    match (kind, mode) {
        (PropagatorKind::Harmonic { omega }, _) if omega == T::zero() => {
            exact_propagator(PropagatorKind::Free, t, mode)
        }
        (PropagatorKind::Free, Mode::ImaginaryTime) => Ok(GaussianKernel {
            log_prefactor: c(-half * (two_pi * t).ln(), T::zero()),
            alpha: c(-half / t, T::zero()),
            beta: c(T::one() / t, T::zero()),
            gamma: c(-half / t, T::zero()),
        }),
        (PropagatorKind::Free, Mode::RealTime) => Ok(GaussianKernel {
            log_prefactor: c(-half * (two_pi * t).ln(), -T::FRAC_PI_4()),
            alpha: c(T::zero(), half / t),
            beta: c(T::zero(), -T::one() / t),
            gamma: c(T::zero(), half / t),
        }),
        (PropagatorKind::Harmonic { omega }, Mode::ImaginaryTime) => {
            let (s, ch) = ((omega * t).sinh(), (omega * t).cosh());
            Ok(GaussianKernel {
                log_prefactor: c(half * (omega / (two_pi * s)).ln(), T::zero()),
                alpha: c(-half * omega * ch / s, T::zero()),
                beta: c(omega / s, T::zero()),
                gamma: c(-half * omega * ch / s, T::zero()),
            })
        }
        (PropagatorKind::Harmonic { omega }, Mode::RealTime) => {
            let (s, co) = ((omega * t).sin(), (omega * t).cos());
            if s.abs() < T::lit(1e-9) {
                return Err(LfmError::Caustic { t: t.to_f64_lossy() });
            }
            let m = (omega * t / T::PI()).floor();
            Ok(GaussianKernel {
                log_prefactor: c(half * (omega / (two_pi * s.abs())).ln(), -T::FRAC_PI_4() - T::FRAC_PI_2() * m),
                alpha: c(T::zero(), half * omega * co / s),
                beta: c(T::zero(), -omega / s),
                gamma: c(T::zero(), half * omega * co / s),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison<T> {
    pub l2: T,
    pub linf: T,
    /// `min_θ ‖a − e^{iθ} b‖`.
    pub phase_aligned_l2: T,
}

pub fn compare<T: Real>(a: &WaveFunction<T>, b: &WaveFunction<T>) -> Result<Comparison<T>> {
    a.check_grid(b)?;
    let h = a.grid.spacing();
    let mut l2 = T::zero();
    let mut linf = T::zero();
    for (x, y) in a.values.iter().zip(&b.values) {
        let d = (x - y).norm();
        l2 += d * d;
        linf = linf.max(d);
    }
    // the minimising phase aligns b with a: e^{iθ} = ⟨b, a⟩/|⟨b, a⟩|
    let overlap = b.inner(a)?;
    let rotation = if overlap.norm() > T::zero() { overlap / overlap.norm() } else { real(T::one()) };
    let aligned: T = a.values.iter().zip(&b.values).map(|(x, y)| (x - y * rotation).norm_sqr()).sum();
    Ok(Comparison { l2: (l2 * h).sqrt(), linf, phase_aligned_l2: (aligned * h).sqrt() })
}
