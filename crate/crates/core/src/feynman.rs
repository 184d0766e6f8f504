//! Time-sliced propagators: iterated one-slice pairings in configuration
//! space (Lagrangian form) and in phase space (Weyl-ordered Hamiltonian
//! form).
//!
//! Conventions: real time carries the phase `e^{iS}`, `S = Σ[(Δξ)²/2Δ − VΔ]`,
//! and solves `iφ̇ = −½φ″ + Vφ`; imaginary time carries `e^{−S_E}` and solves
//! `φ̇ = ½φ″ − Vφ`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::domain::{Mode, PotentialSpec, QuadratureSpec, SpatialGrid, TimeGrid, Validate, Violation, WaveFunction};
use crate::error::{LfmError, Result};
use crate::kernel::GaussianKernel;
use crate::quadrature::{neville, GaussHermite};
use crate::scalar::{cis, compensated_sum_complex, real, Real};

/// Kernel band half-width in units of the slice's Gaussian width.
const BAND_WIDTHS: f64 = 12.0;

/// Momentum nodes for phase-space slices.
pub const MOMENTUM_NODES: usize = 150;

/// Where the potential is sampled inside a slice from `q′` (earlier) to `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialRule {
    /// `V(q′)`: the path's right endpoint.
    Endpoint,
    /// `V((q + q′)/2)`.
    Midpoint,
    /// `(V(q) + V(q′))/2`.
    Symmetric,
}

impl PotentialRule {
    /// Global convergence order in the number of slices.
    ///
    /// The midpoint rule is first order for a scalar potential: relative to
    /// the exact short-time kernel it misses a `Δ²V″/8` term per slice,
    /// which the symmetric rule cancels.
    pub fn order(self) -> u32 {
        match self {
            PotentialRule::Endpoint | PotentialRule::Midpoint => 1,
            PotentialRule::Symmetric => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PotentialRule::Endpoint => "endpoint",
            PotentialRule::Midpoint => "midpoint",
            PotentialRule::Symmetric => "symmetric",
        }
    }

    /// Weights of `(q², q·q′, q′²)` in the sampled `q²`.
    fn quadratic_weights<T: Real>(self) -> (T, T, T) {
        let (z, q, h, o) = (T::zero(), T::lit(0.25), T::lit(0.5), T::one());
        match self {
            PotentialRule::Endpoint => (z, z, o),
            PotentialRule::Midpoint => (q, h, q),
            PotentialRule::Symmetric => (h, z, h),
        }
    }

    fn sample<T: Real>(self, v: &PotentialSpec<T>, q: T, qp: T) -> T {
        match self {
            PotentialRule::Endpoint => v.eval(qp),
            PotentialRule::Midpoint => v.eval((q + qp) * T::lit(0.5)),
            PotentialRule::Symmetric => (v.eval(q) + v.eval(qp)) * T::lit(0.5),
        }
    }
}

/// How a propagation was carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceMethod {
    /// Banded grid quadrature of each slice kernel.
    BandedQuadrature,
    /// Closed-form chaining of Gaussian slice kernels, applied once.
    ExactChain,
    /// Damped slice kernels applied spectrally, extrapolated in the damping.
    DampedSpectral,
    /// Slices whose momentum integral is a delta function.
    Transport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorResult<T> {
    pub wave: WaveFunction<T>,
    pub mode: Mode,
    pub n_slices: usize,
    /// `‖φₙ − φ_{n/2}‖/(2^p − 1)` for a rule of order `p`, or the
    /// extrapolation change for damped runs.
    pub error_estimate: Option<T>,
    pub norm_before: T,
    pub norm_after: T,
    pub method: SliceMethod,
}

fn check_wave<T: Real>(phi0: &WaveFunction<T>) -> Result<()> {
    if phi0.values.len() != phi0.grid.n_points {
        return Err(LfmError::GridMismatch(format!(
            "{} values on a {}-point grid",
            phi0.values.len(),
            phi0.grid.n_points
        )));
    }
    Ok(())
}

/// [`propagate_lagrangian_with_rule`] with the endpoint rule.
pub fn propagate_lagrangian<T: Real>(
    v: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    mode: Mode,
    quad: &QuadratureSpec<T>,
) -> Result<PropagatorResult<T>> {
    propagate_lagrangian_with_rule(v, phi0, grid, mode, quad, PotentialRule::Endpoint)
}

/// Configuration-space slicing.
///
/// Imaginary time applies the slice kernel by banded grid quadrature. Real
/// time chains the slice kernels exactly when `V` is quadratic and no
/// damping is requested; otherwise it needs `quad.damping_epsilon > 0` or an
/// epsilon schedule, applies the damped kernels spectrally and extrapolates
/// to zero damping.
pub fn propagate_lagrangian_with_rule<T: Real>(
    v: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    mode: Mode,
    quad: &QuadratureSpec<T>,
    rule: PotentialRule,
) -> Result<PropagatorResult<T>> {
    check_wave(phi0)?;
    let damped = quad.damping_epsilon > T::zero() || quad.epsilon_schedule.is_some();
    let run = |n: usize| -> Result<(WaveFunction<T>, SliceMethod, Option<T>)> {
        let g = TimeGrid::new(grid.t_final(), n)?;
        match mode {
            Mode::ImaginaryTime => {
                let kernel = BandedKernel::lagrangian(v, &phi0.grid, g.delta(), rule);
                Ok((kernel.iterate(phi0, n), SliceMethod::BandedQuadrature, None))
            }
            Mode::RealTime => match (v.harmonic_coefficient(), damped) {
                (Some(b), false) => {
                    let k = quadratic_chain(T::one(), b, &g, Mode::RealTime, rule.quadratic_weights())?;
                    Ok((k.apply(phi0)?, SliceMethod::ExactChain, None))
                }
                (_, true) => {
                    let (w, change) = damped_spectral(v, phi0, &g, quad, rule)?;
                    Ok((w, SliceMethod::DampedSpectral, change))
                }
                (None, false) => Err(LfmError::NonIntegrable(
                    "real-time slicing of a non-quadratic potential needs damping_epsilon > 0 or an epsilon schedule"
                        .into(),
                )),
            },
        }
    };
    let n = grid.n_slices();
    let (wave, method, change) = run(n)?;
    let error_estimate = match change {
        Some(c) => Some(c),
        None if quad.estimate_error && n >= 2 => {
            let (coarse, _, _) = run(n / 2)?;
            let diff = l2_distance(&wave, &coarse);
            Some(diff / (T::lit(2.0).powi(rule.order() as i32) - T::one()))
        }
        None => None,
    };
    Ok(PropagatorResult {
        norm_before: phi0.norm_l2(),
        norm_after: wave.norm_l2(),
        wave,
        mode,
        n_slices: n,
        error_estimate,
        method,
    })
}

fn l2_distance<T: Real>(a: &WaveFunction<T>, b: &WaveFunction<T>) -> T {
    let h = a.grid.spacing();
    (a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum::<T>() * h).sqrt()
}

fn band_for<T: Real>(grid: &SpatialGrid<T>, width: T) -> usize {
    let n = grid.n_points;
    (T::lit(BAND_WIDTHS) * width / grid.spacing()).ceil().to_usize().unwrap_or(n).clamp(1, n - 1)
}

/// Slice kernel stored as a band around the diagonal: row `i` holds
/// `K(qᵢ, qⱼ)` for `|i − j| ≤ band`.
struct BandedKernel<T> {
    band: usize,
    rows: Vec<Vec<Complex<T>>>,
    h: T,
}

impl<T: Real> BandedKernel<T> {
    fn build(grid: &SpatialGrid<T>, width: T, entry: impl Fn(usize, usize) -> Complex<T> + Sync) -> Self {
        let n = grid.n_points;
        let h = grid.spacing();
        let band = band_for(grid, width);
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..=2 * band)
                    .map(|d| {
                        let j = i as isize + d as isize - band as isize;
                        if j < 0 || j >= n as isize {
                            Complex::new(T::zero(), T::zero())
                        } else {
                            entry(i, j as usize)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { band, rows, h }
    }

    /// `(2πΔ)^{-1/2} exp(−(q−q′)²/2Δ − Δ·V)` with `V` sampled by `rule`.
    fn lagrangian(v: &PotentialSpec<T>, grid: &SpatialGrid<T>, delta: T, rule: PotentialRule) -> Self {
        let pts = grid.points();
        let norm = (T::lit(2.0) * T::PI() * delta).sqrt().recip();
        Self::build(grid, delta.sqrt(), |i, j| {
            let (q, qp) = (pts[i], pts[j]);
            let u = q - qp;
            real(norm * (-(u * u) / (delta + delta) - delta * rule.sample(v, q, qp)).exp())
        })
    }

    fn apply(&self, phi: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = phi.len();
        let band = self.band;
        self.rows
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(n - 1);
                let terms = (lo..=hi).map(|j| row[j + band - i] * phi[j]);
                compensated_sum_complex(terms) * self.h
            })
            .collect()
    }

    fn iterate(&self, phi0: &WaveFunction<T>, n: usize) -> WaveFunction<T> {
        let mut values = phi0.values.clone();
        for _ in 0..n {
            values = self.apply(&values);
        }
        WaveFunction { grid: phi0.grid, values }
    }
}

/// Relative size below which a chained quadratic form counts as singular.
const DEGENERATE_FORM: f64 = 1e-3;
/// Largest `|β|·t/a` of the chained kernel before it counts as a caustic.
const CAUSTIC_COUPLING: f64 = 1e3;

/// Closed-form real-time kernel of `n_slices` Gaussian slices for the
/// action `Σ[a(Δξ)²/2Δ − ½bξ²Δ]`, the potential sampled at the endpoint.
pub fn kernel_quadratic_exact<T: Real>(a: T, b: T, grid: &TimeGrid<T>) -> Result<GaussianKernel<T>> {
    kernel_quadratic_chain(a, b, grid, Mode::RealTime, PotentialRule::Endpoint)
}

/// [`kernel_quadratic_exact`] for either time mode and potential rule.
pub fn kernel_quadratic_chain<T: Real>(
    a: T,
    b: T,
    grid: &TimeGrid<T>,
    mode: Mode,
    rule: PotentialRule,
) -> Result<GaussianKernel<T>> {
    quadratic_chain(a, b, grid, mode, rule.quadratic_weights())
}

fn quadratic_chain<T: Real>(
    a: T,
    b: T,
    grid: &TimeGrid<T>,
    mode: Mode,
    weights: (T, T, T),
) -> Result<GaussianKernel<T>> {
    if !(a > T::zero()) {
        return Err(LfmError::InvalidInput(format!("kinetic coefficient must be positive (got {a})")));
    }
    let delta = grid.delta();
    let half = T::lit(0.5);
    // exponent of one slice: ι·[a u²/2Δ − ½bΔ(w₁q² + w₂qq′ + w₃q′²)]
    // with ι = i in real time and ι = −1 in imaginary time
    let iota = match mode {
        Mode::RealTime => Complex::new(T::zero(), T::one()),
        Mode::ImaginaryTime => Complex::new(-T::one(), T::zero()),
    };
    let kin = a / delta;
    let pot = half * b * delta;
    let (w1, w2, w3) = weights;
    let log_norm = match mode {
        Mode::RealTime => Complex::new(half * (kin / (T::lit(2.0) * T::PI())).ln(), -T::FRAC_PI_4()),
        Mode::ImaginaryTime => real(half * (kin / (T::lit(2.0) * T::PI())).ln()),
    };
    let slice = GaussianKernel {
        log_prefactor: log_norm,
        alpha: iota * (half * kin - pot * w1),
        beta: iota * (-kin - pot * w2),
        gamma: iota * (half * kin - pot * w3),
    };
    let mut chain = slice;
    for k in 1..grid.n_slices() {
        let form = -(slice.gamma + chain.alpha);
        if form.norm() * delta / a < T::lit(DEGENERATE_FORM) {
            return Err(LfmError::DegenerateSlice { slice: k });
        }
        chain = slice.after(&chain).map_err(|e| match e {
            LfmError::DegenerateSlice { .. } => LfmError::DegenerateSlice { slice: k },
            other => other,
        })?;
    }
    if chain.beta.norm() * grid.t_final() / a > T::lit(CAUSTIC_COUPLING) {
        return Err(LfmError::DegenerateSlice { slice: grid.n_slices() });
    }
    Ok(chain)
}

/// Damped real-time slices applied spectrally, then extrapolated to zero
/// damping along the schedule (or evaluated at `damping_epsilon`). Returns
/// the wave and the extrapolation change.
fn damped_spectral<T: Real>(
    v: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    quad: &QuadratureSpec<T>,
    rule: PotentialRule,
) -> Result<(WaveFunction<T>, Option<T>)> {
    if rule == PotentialRule::Midpoint {
        return Err(LfmError::InvalidInput(
            "damped real-time slicing applies kernels spectrally and supports the endpoint and symmetric rules".into(),
        ));
    }
    let schedule = match &quad.epsilon_schedule {
        Some(s) => s.clone(),
        None => vec![quad.damping_epsilon],
    };
    let runs: Vec<Vec<Complex<T>>> =
        schedule.iter().map(|&eps| damped_run(v, phi0, grid, eps, rule)).collect::<Result<_>>()?;
    if runs.len() == 1 {
        let w = WaveFunction::new(phi0.grid, runs.into_iter().next().expect("one run"))?;
        return Ok((w, None));
    }
    let n = phi0.grid.n_points;
    let mut values = Vec::with_capacity(n);
    let mut change = T::zero();
    let mut ys = vec![Complex::new(T::zero(), T::zero()); runs.len()];
    for j in 0..n {
        for (y, r) in ys.iter_mut().zip(&runs) {
            *y = r[j];
        }
        let (val, dv) = neville(&schedule, &ys, T::zero());
        values.push(val);
        change += dv.norm_sqr();
    }
    let w = WaveFunction::new(phi0.grid, values)?;
    Ok((w, Some((change * phi0.grid.spacing()).sqrt())))
}

fn damped_run<T: Real>(
    v: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    eps: T,
    rule: PotentialRule,
) -> Result<Vec<Complex<T>>> {
    let sg = phi0.grid;
    let n = sg.n_points;
    let delta = grid.delta();
    // unit-mass kernel ∝ exp(−(ε − i/2)u²/Δ) has multiplier
    // exp(−k²Δ(ε + i/2)/(1 + 4ε²))
    let denom = T::one() + T::lit(4.0) * eps * eps;
    let inv_n = T::one() / T::from_usize_lossy(n);
    let multiplier: Vec<Complex<T>> = sg
        .wavenumbers()
        .into_iter()
        .map(|k| {
            let s = k * k * delta / denom;
            Complex::from_polar((-s * eps).exp() * inv_n, -s * T::lit(0.5))
        })
        .collect();
    let pts = sg.points();
    let (before, after): (Vec<Complex<T>>, Option<Vec<Complex<T>>>) = match rule {
        PotentialRule::Symmetric => {
            let f: Vec<Complex<T>> = pts.iter().map(|&q| cis(-delta * T::lit(0.5) * v.eval(q))).collect();
            (f.clone(), Some(f))
        }
        _ => (pts.iter().map(|&q| cis(-delta * v.eval(q))).collect(), None),
    };
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut psi = phi0.values.clone();
    for _ in 0..grid.n_slices() {
        psi.iter_mut().zip(&before).for_each(|(x, f)| *x *= *f);
        fwd.process(&mut psi);
        psi.iter_mut().zip(&multiplier).for_each(|(x, m)| *x *= *m);
        inv.process(&mut psi);
        if let Some(a) = &after {
            psi.iter_mut().zip(a).for_each(|(x, f)| *x *= *f);
        }
    }
    if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LfmError::UnstableStep("non-finite values in damped slicing".into()));
    }
    Ok(psi)
}

pub type SymbolFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;
pub type CoefficientFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
enum SymbolForm<T> {
    General,
    /// `½·a·p² + V(q)` with constant `a > 0`.
    KineticPotential {
        a: T,
        potential: PotentialSpec<T>,
    },
    /// `B(q)·p + C(q)`.
    Transport {
        drift: CoefficientFn<T>,
        potential: PotentialSpec<T>,
    },
}

/// Classical Hamiltonian `ℋ(q, p)`.
#[derive(Clone)]
pub struct HamiltonianSymbol<T> {
    evaluator: SymbolFn<T>,
    separable: bool,
    form: SymbolForm<T>,
}

impl<T: Real> fmt::Debug for HamiltonianSymbol<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match &self.form {
            SymbolForm::General => "general",
            SymbolForm::KineticPotential { .. } => "kinetic_potential",
            SymbolForm::Transport { .. } => "transport",
        };
        f.debug_struct("HamiltonianSymbol").field("separable", &self.separable).field("form", &form).finish()
    }
}

impl<T: Real> HamiltonianSymbol<T> {
    pub fn new(separable: bool, h: impl Fn(T, T) -> T + Send + Sync + 'static) -> Self {
        Self { evaluator: Arc::new(h), separable, form: SymbolForm::General }
    }

    /// `T(p) + V(q)`.
    pub fn separable(kinetic: impl Fn(T) -> T + Send + Sync + 'static, potential: PotentialSpec<T>) -> Self {
        let v = potential.clone();
        Self::new(true, move |q, p| kinetic(p) + v.eval(q))
    }

    /// `p²/2 + V(q)`.
    pub fn kinetic_plus(potential: PotentialSpec<T>) -> Self {
        Self::with_mass_inverse(T::one(), potential)
    }

    /// `a·p²/2 + V(q)`.
    pub fn with_mass_inverse(a: T, potential: PotentialSpec<T>) -> Self {
        let v = potential.clone();
        Self {
            evaluator: Arc::new(move |q, p| a * p * p * T::lit(0.5) + v.eval(q)),
            separable: true,
            form: SymbolForm::KineticPotential { a, potential },
        }
    }

    /// `B(q)·p + C(q)`.
    pub fn transport(drift: impl Fn(T) -> T + Send + Sync + 'static, potential: PotentialSpec<T>) -> Self {
        let drift: CoefficientFn<T> = Arc::new(drift);
        let (b, v) = (drift.clone(), potential.clone());
        Self {
            evaluator: Arc::new(move |q, p| b(q) * p + v.eval(q)),
            separable: false,
            form: SymbolForm::Transport { drift, potential },
        }
    }

    /// The dilation generator `q·p`.
    pub fn dilation() -> Self {
        Self::transport(|q| q, PotentialSpec::free())
    }

    pub fn eval(&self, q: T, p: T) -> T {
        (self.evaluator)(q, p)
    }

    pub fn is_separable(&self) -> bool {
        self.separable
    }

    /// `∂²ℋ/∂p²` at `(q, 0)`.
    fn momentum_curvature(&self, q: T) -> T {
        match &self.form {
            SymbolForm::KineticPotential { a, .. } => *a,
            SymbolForm::Transport { .. } => T::zero(),
            SymbolForm::General => {
                let d = T::lit(1e-3);
                (self.eval(q, d) - T::lit(2.0) * self.eval(q, T::zero()) + self.eval(q, -d)) / (d * d)
            }
        }
    }
}

impl<T: Real> Validate for HamiltonianSymbol<T> {
    fn validate(&self) -> Vec<Violation> {
        let pts = [-3.0, -1.0, -0.25, 0.0, 0.5, 2.0];
        let finite = pts.iter().all(|&q| pts.iter().all(|&p| self.eval(T::lit(q), T::lit(p)).is_finite()));
        if finite {
            Vec::new()
        } else {
            vec![Violation::new("symbol is not finite on sampled phase points")]
        }
    }
}

/// Which point of a slice the symbol's `q` argument is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolOrdering {
    /// `(q + q′)/2`: Weyl ordering.
    Weyl,
    /// `q`, the later point: standard (`q̂` left of `p̂`) ordering.
    Standard,
}

/// [`propagate_hamiltonian_ordered`] with Weyl ordering.
pub fn propagate_hamiltonian_weyl<T: Real>(
    h: &HamiltonianSymbol<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    mode: Mode,
    quad: &QuadratureSpec<T>,
) -> Result<PropagatorResult<T>> {
    propagate_hamiltonian_ordered(h, phi0, grid, mode, quad, SymbolOrdering::Weyl)
}

/// Phase-space slicing: each slice integrates
/// `(2π)^{-1}∫dp exp(ip(q − q′) − ι·Δ·ℋ(q̄, p))` with `q̄` set by `ordering`.
///
/// Imaginary time integrates `p` with Gauss–Hermite nodes scaled to the
/// momentum curvature of `ℋ`. Real time supports `½a·p² + V(q)` (the
/// momentum integral is Fresnel and the slices chain like configuration
/// slices) and `B(q)·p + C(q)` (the momentum integral is a delta function).
pub fn propagate_hamiltonian_ordered<T: Real>(
    h: &HamiltonianSymbol<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    mode: Mode,
    quad: &QuadratureSpec<T>,
    ordering: SymbolOrdering,
) -> Result<PropagatorResult<T>> {
    check_wave(phi0)?;
    let rule = match ordering {
        SymbolOrdering::Weyl => PotentialRule::Midpoint,
        SymbolOrdering::Standard => PotentialRule::Endpoint,
    };
    match (mode, &h.form) {
        (Mode::RealTime, SymbolForm::KineticPotential { a, potential }) if ordering == SymbolOrdering::Weyl => {
            if *a == T::one() {
                propagate_lagrangian_with_rule(potential, phi0, grid, mode, quad, rule)
            } else {
                let b = potential.harmonic_coefficient().ok_or_else(|| {
                    LfmError::NonIntegrable("real-time slicing with a ≠ 1 needs a quadratic potential".into())
                })?;
                let k = quadratic_chain(a.recip(), b, grid, mode, rule.quadratic_weights())?;
                let wave = k.apply(phi0)?;
                Ok(PropagatorResult {
                    norm_before: phi0.norm_l2(),
                    norm_after: wave.norm_l2(),
                    wave,
                    mode,
                    n_slices: grid.n_slices(),
                    error_estimate: None,
                    method: SliceMethod::ExactChain,
                })
            }
        }
        (Mode::RealTime, SymbolForm::Transport { drift, potential }) => {
            let wave = transport(drift, potential, phi0, grid, ordering)?;
            Ok(PropagatorResult {
                norm_before: phi0.norm_l2(),
                norm_after: wave.norm_l2(),
                wave,
                mode,
                n_slices: grid.n_slices(),
                error_estimate: None,
                method: SliceMethod::Transport,
            })
        }
        (Mode::RealTime, _) => Err(LfmError::NonIntegrable(
            "real-time phase-space slicing supports Weyl-ordered a·p²/2 + V(q) and B(q)·p + C(q) symbols".into(),
        )),
        (Mode::ImaginaryTime, SymbolForm::Transport { .. }) => {
            Err(LfmError::NonIntegrable("imaginary-time momentum integral diverges for a symbol linear in p".into()))
        }
        (Mode::ImaginaryTime, _) => {
            let run = |n: usize| -> Result<WaveFunction<T>> {
                let g = TimeGrid::new(grid.t_final(), n)?;
                let kernel = phase_space_kernel(h, &phi0.grid, g.delta(), ordering)?;
                Ok(kernel.iterate(phi0, n))
            };
            let n = grid.n_slices();
            let wave = run(n)?;
            let error_estimate =
                if quad.estimate_error && n >= 2 { Some(l2_distance(&wave, &run(n / 2)?)) } else { None };
            Ok(PropagatorResult {
                norm_before: phi0.norm_l2(),
                norm_after: wave.norm_l2(),
                wave,
                mode,
                n_slices: n,
                error_estimate,
                method: SliceMethod::BandedQuadrature,
            })
        }
    }
}

/// Imaginary-time slice kernel
/// `K(q, q′) = (2πΔκ)^{-1/2} E_z[exp(ipu − Δ(ℋ(q̄,p) − κp²/2))]`,
/// `p = z/√(Δκ)`, `u = q − q′`, with `z` standard normal.
fn phase_space_kernel<T: Real>(
    h: &HamiltonianSymbol<T>,
    grid: &SpatialGrid<T>,
    delta: T,
    ordering: SymbolOrdering,
) -> Result<BandedKernel<T>> {
    let pts = grid.points();
    let kappa_at = |q: T| h.momentum_curvature(q);
    let kappa_ref = kappa_at(T::zero());
    let kappa_max = pts.iter().fold(kappa_ref, |m, &q| m.max(kappa_at(q)));
    if !(pts.iter().all(|&q| kappa_at(q) > T::zero())) {
        return Err(LfmError::NonIntegrable("imaginary-time slicing needs ∂²ℋ/∂p² > 0 on the grid".into()));
    }
    let gh = GaussHermite::<T>::new(MOMENTUM_NODES);
    let two_pi = T::lit(2.0) * T::PI();
    let qbar = |q: T, qp: T| match ordering {
        SymbolOrdering::Weyl => (q + qp) * T::lit(0.5),
        SymbolOrdering::Standard => q,
    };
    // momentum integral at slice point `c` and separation `u`
    let entry = |c: T, u: T| -> Complex<T> {
        let kappa = kappa_at(c);
        let s = (delta * kappa).sqrt();
        let terms = gh.nodes.iter().zip(&gh.weights).map(|(&z, &w)| {
            let p = z / s;
            let excess = h.eval(c, p) - kappa * p * p * T::lit(0.5);
            Complex::from_polar(w * (-delta * excess).exp(), p * u)
        });
        compensated_sum_complex(terms) / (two_pi * delta * kappa).sqrt()
    };
    let width = (delta * kappa_max).sqrt();
    if h.is_separable() {
        // ℋ = T(p) + V(q): the momentum integral depends on u alone
        let v_rel = |q: T| h.eval(q, T::zero()) - h.eval(T::zero(), T::zero());
        let step = grid.spacing();
        let band = band_for(grid, width);
        let by_offset: Vec<Complex<T>> =
            (0..=2 * band).map(|d| entry(T::zero(), step * T::lit(d as f64 - band as f64))).collect();
        Ok(BandedKernel::build(grid, width, |i, j| {
            let d = (i as isize - j as isize + band as isize) as usize;
            by_offset[d] * (-delta * v_rel(qbar(pts[i], pts[j]))).exp()
        }))
    } else {
        Ok(BandedKernel::build(grid, width, |i, j| entry(qbar(pts[i], pts[j]), pts[i] - pts[j])))
    }
}

/// Real-time slices of `ℋ = B(q)p + C(q)`: the momentum integral is
/// `δ(q − q′ − ΔB(q̄))`, so each slice is `φ(q′*)·e^{−iΔC(q̄)}/|∂(q − q′ − ΔB)/∂q′|`.
fn transport<T: Real>(
    drift: &CoefficientFn<T>,
    potential: &PotentialSpec<T>,
    phi0: &WaveFunction<T>,
    grid: &TimeGrid<T>,
    ordering: SymbolOrdering,
) -> Result<WaveFunction<T>> {
    let delta = grid.delta();
    let pts = phi0.grid.points();
    let half = T::lit(0.5);
    let fd = T::lit(1e-5);
    let mut wave = phi0.clone();
    for _ in 0..grid.n_slices() {
        let values = pts
            .par_iter()
            .map(|&q| -> Result<Complex<T>> {
                let (qp, qbar, jac) = match ordering {
                    SymbolOrdering::Weyl => {
                        let mut qp = q - delta * drift(q);
                        for _ in 0..50 {
                            let c = (q + qp) * half;
                            let r = q - qp - delta * drift(c);
                            let db = (drift(c + fd) - drift(c - fd)) / (fd + fd);
                            let dr = -T::one() - delta * db * half;
                            let next = qp - r / dr;
                            let done = (next - qp).abs() <= T::lit(4.0) * T::epsilon() * (T::one() + q.abs());
                            qp = next;
                            if done {
                                break;
                            }
                        }
                        let c = (q + qp) * half;
                        let db = (drift(c + fd) - drift(c - fd)) / (fd + fd);
                        (qp, c, (T::one() + delta * db * half).abs())
                    }
                    SymbolOrdering::Standard => (q - delta * drift(q), q, T::one()),
                };
                if !(jac > T::zero()) {
                    return Err(LfmError::SingularJacobian { tau: 0.0 });
                }
                Ok(wave.interpolate(qp) * cis(-delta * potential.eval(qbar)) / jac)
            })
            .collect::<Result<Vec<_>>>()?;
        wave = WaveFunction::new(phi0.grid, values)?;
    }
    Ok(wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Smoothness;
    use crate::oracle::{compare, exact_propagator, solve_schrodinger, PropagatorKind};

    fn grid() -> SpatialGrid<f64> {
        SpatialGrid::standard()
    }

    fn rel_err(a: &WaveFunction<f64>, exact: &WaveFunction<f64>) -> f64 {
        compare(a, exact).unwrap().l2 / exact.norm_l2()
    }

    #[test]
    fn heat_kernel_from_discrete_delta() {
        let g = grid();
        let x0 = 0.0;
        let delta = WaveFunction::discrete_delta(g, x0);
        let tg = TimeGrid::new(1.0, 256).unwrap();
        let q = QuadratureSpec::tensor(1).without_error_estimate();
        let r = propagate_lagrangian(&PotentialSpec::free(), &delta, &tg, Mode::ImaginaryTime, &q).unwrap();
        let k = exact_propagator(PropagatorKind::Free, 1.0, Mode::ImaginaryTime).unwrap();
        let exact = WaveFunction::from_fn(g, |x| k.eval(x, g.point(g.nearest_index(x0))));
        assert!(rel_err(&r.wave, &exact) < 1e-10);
    }

    #[test]
    fn mehler_kernel_for_each_rule() {
        let g = grid();
        let delta = WaveFunction::discrete_delta(g, 0.5);
        let x0 = g.point(g.nearest_index(0.5));
        let tg = TimeGrid::new(1.0, 256).unwrap();
        let q = QuadratureSpec::tensor(1).without_error_estimate();
        let k = exact_propagator(PropagatorKind::Harmonic { omega: 1.0 }, 1.0, Mode::ImaginaryTime).unwrap();
        let exact = WaveFunction::from_fn(g, |x| k.eval(x, x0));
        for rule in [PotentialRule::Endpoint, PotentialRule::Midpoint, PotentialRule::Symmetric] {
            let r = propagate_lagrangian_with_rule(
                &PotentialSpec::harmonic(1.0),
                &delta,
                &tg,
                Mode::ImaginaryTime,
                &q,
                rule,
            )
            .unwrap();
            assert!(rel_err(&r.wave, &exact) < 1e-3, "{rule:?}");
        }
    }

    #[test]
    fn free_real_time_chain_is_slice_independent() {
        let one = kernel_quadratic_exact(1.0, 0.0, &TimeGrid::new(1.0, 1).unwrap()).unwrap();
        let many = kernel_quadratic_exact(1.0, 0.0, &TimeGrid::new(1.0, 64).unwrap()).unwrap();
        let exact = exact_propagator(PropagatorKind::<f64>::Free, 1.0, Mode::RealTime).unwrap();
        for (q, qp) in [(0.0, 0.0), (1.0, -2.0), (3.0, 0.5)] {
            assert!((one.eval(q, qp) - many.eval(q, qp)).norm() < 1e-12);
            assert!((one.eval(q, qp) - exact.eval(q, qp)).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_chain_hits_a_caustic() {
        let r = kernel_quadratic_exact(1.0, 1.0, &TimeGrid::new(std::f64::consts::PI, 256).unwrap());
        assert!(matches!(r, Err(LfmError::DegenerateSlice { .. })), "{r:?}");
    }

    #[test]
    fn real_time_free_propagation_is_unitary() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, -1.0, 1.0, 1.0);
        let tg = TimeGrid::new(1.0, 16).unwrap();
        let q = QuadratureSpec::tensor(1);
        let r = propagate_lagrangian(&PotentialSpec::free(), &phi0, &tg, Mode::RealTime, &q).unwrap();
        assert_eq!(r.method, SliceMethod::ExactChain);
        assert!((r.norm_after - r.norm_before).abs() < 1e-10);
        let oracle = solve_schrodinger(&PotentialSpec::free(), &phi0, 1.0, Mode::RealTime, None).unwrap();
        assert!(compare(&r.wave, &oracle).unwrap().l2 < 1e-8);
    }

    #[test]
    fn undamped_anharmonic_real_time_is_rejected() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.0, 1.0, 0.0);
        let v = PotentialSpec::new(Smoothness::Smooth, |q: f64| 0.1 * q.powi(4));
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let r = propagate_lagrangian(&v, &phi0, &tg, Mode::RealTime, &QuadratureSpec::tensor(1));
        assert!(matches!(r, Err(LfmError::NonIntegrable(_))));
    }

    #[test]
    fn damped_real_time_extrapolates_to_the_oracle() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.5, 1.0, 0.0);
        let v = PotentialSpec::new(Smoothness::Smooth, |q: f64| 0.05 * q.powi(4));
        let tg = TimeGrid::new(1.0, 256).unwrap();
        let q = QuadratureSpec::tensor(1).with_epsilon_schedule(vec![0.04, 0.02, 0.01, 0.005]);
        let r = propagate_lagrangian_with_rule(&v, &phi0, &tg, Mode::RealTime, &q, PotentialRule::Symmetric).unwrap();
        let oracle = solve_schrodinger(&v, &phi0, 1.0, Mode::RealTime, None).unwrap();
        let gap = compare(&r.wave, &oracle).unwrap().phase_aligned_l2;
        assert!(gap < 5e-3, "gap {gap}");
    }

    #[test]
    fn short_time_is_close_to_identity() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.0, 3.0, 0.0);
        let tg = TimeGrid::new(1e-3, 1).unwrap();
        let q = QuadratureSpec::tensor(1);
        let r = propagate_lagrangian(&PotentialSpec::free(), &phi0, &tg, Mode::ImaginaryTime, &q).unwrap();
        assert!(compare(&r.wave, &phi0).unwrap().l2 < 1e-4);
    }

    #[test]
    fn phase_space_reduces_to_configuration_slicing() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.3, 0.8, 0.0);
        let tg = TimeGrid::new(0.5, 32).unwrap();
        let q = QuadratureSpec::tensor(1).without_error_estimate();
        let v = PotentialSpec::new(Smoothness::Smooth, |x: f64| 0.2 * x * x + 0.1 * x.cos());
        let h = HamiltonianSymbol::kinetic_plus(v.clone());
        let a = propagate_hamiltonian_weyl(&h, &phi0, &tg, Mode::ImaginaryTime, &q).unwrap();
        let b =
            propagate_lagrangian_with_rule(&v, &phi0, &tg, Mode::ImaginaryTime, &q, PotentialRule::Midpoint).unwrap();
        assert!(compare(&a.wave, &b.wave).unwrap().l2 < 1e-10);
    }

    #[test]
    fn dilation_is_weyl_ordered() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.4, 1.0, 0.7);
        let q = QuadratureSpec::tensor(1);
        let h = HamiltonianSymbol::dilation();
        let pts = g.points();
        let step = g.spacing();
        // −i·Ĥφ with Ĥ = −i(q∂ + ½)
        let deriv: Vec<Complex<f64>> = (0..g.n_points)
            .map(|j| {
                let at = |k: isize| phi0.values[(j as isize + k).clamp(0, g.n_points as isize - 1) as usize];
                (at(-3) * -1.0 + at(-2) * 9.0 - at(-1) * 45.0 + at(1) * 45.0 - at(2) * 9.0 + at(3)) / (60.0 * step)
            })
            .collect();
        let generator: Vec<Complex<f64>> =
            (0..g.n_points).map(|j| -(deriv[j] * pts[j] + phi0.values[j] * 0.5)).collect();
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&t| {
                let r =
                    propagate_hamiltonian_weyl(&h, &phi0, &TimeGrid::new(t, 1).unwrap(), Mode::RealTime, &q).unwrap();
                let lin = WaveFunction {
                    grid: g,
                    values: phi0.values.iter().zip(&generator).map(|(&p, &d)| p + d * t).collect(),
                };
                compare(&r.wave, &lin).unwrap().l2
            })
            .collect();
        let slope = crate::quadrature::convergence_order(&[25.0, 50.0, 100.0], &errs);
        assert!((slope - 2.0).abs() < 0.3, "slope {slope} errs {errs:?}");
    }

    fn mehler_errors(rule: PotentialRule) -> Vec<f64> {
        let g = grid();
        let delta = WaveFunction::discrete_delta(g, 0.0);
        let k = exact_propagator(PropagatorKind::Harmonic { omega: 1.0 }, 1.0, Mode::ImaginaryTime).unwrap();
        let exact = WaveFunction::from_fn(g, |x| k.eval(x, g.point(g.nearest_index(0.0))));
        let q = QuadratureSpec::tensor(1).without_error_estimate();
        [32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let tg = TimeGrid::new(1.0, n).unwrap();
                let v = PotentialSpec::harmonic(1.0);
                let r = propagate_lagrangian_with_rule(&v, &delta, &tg, Mode::ImaginaryTime, &q, rule).unwrap();
                rel_err(&r.wave, &exact)
            })
            .collect()
    }

    #[test]
    fn trotter_slopes_match_rule_orders() {
        for rule in [PotentialRule::Endpoint, PotentialRule::Midpoint, PotentialRule::Symmetric] {
            let errs = mehler_errors(rule);
            let slope = crate::quadrature::convergence_order(&[32.0, 64.0, 128.0, 256.0], &errs);
            assert!((slope - rule.order() as f64).abs() < 0.3, "{rule:?}: slope {slope} errs {errs:?}");
        }
    }

    #[test]
    fn standard_ordering_of_dilation_is_first_order() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.4, 1.0, 0.7);
        let q = QuadratureSpec::tensor(1);
        let h = HamiltonianSymbol::dilation();
        let weyl_step = |t: f64| {
            let tg = TimeGrid::new(t, 1).unwrap();
            propagate_hamiltonian_weyl(&h, &phi0, &tg, Mode::RealTime, &q).unwrap().wave
        };
        // distance between the two orderings grows linearly in t
        let gaps: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&t| {
                let tg = TimeGrid::new(t, 1).unwrap();
                let s = propagate_hamiltonian_ordered(&h, &phi0, &tg, Mode::RealTime, &q, SymbolOrdering::Standard)
                    .unwrap();
                compare(&s.wave, &weyl_step(t)).unwrap().l2
            })
            .collect();
        let slope = crate::quadrature::convergence_order(&[25.0, 50.0, 100.0], &gaps);
        assert!((slope - 1.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn imaginary_time_transport_is_rejected() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 0.0, 1.0, 0.0);
        let tg = TimeGrid::new(0.1, 4).unwrap();
        let r = propagate_hamiltonian_weyl(
            &HamiltonianSymbol::dilation(),
            &phi0,
            &tg,
            Mode::ImaginaryTime,
            &QuadratureSpec::tensor(1),
        );
        assert!(matches!(r, Err(LfmError::NonIntegrable(_))));
    }

    #[test]
    fn weyl_harmonic_real_time_matches_oracle() {
        let g = grid();
        let phi0 = WaveFunction::gaussian_packet(g, 1.0, 1.0, 0.0);
        let tg = TimeGrid::new(1.0, 512).unwrap();
        let h = HamiltonianSymbol::kinetic_plus(PotentialSpec::harmonic(1.0));
        let q = QuadratureSpec::tensor(1);
        let r = propagate_hamiltonian_weyl(&h, &phi0, &tg, Mode::RealTime, &q).unwrap();
        let oracle = solve_schrodinger(&PotentialSpec::harmonic(1.0), &phi0, 1.0, Mode::RealTime, None).unwrap();
        assert!(compare(&r.wave, &oracle).unwrap().l2 < 1e-3);
    }
}
