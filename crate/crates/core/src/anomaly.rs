//! Change of variables under a flow, and the anomaly mechanism: a flow can
//! leave the action unchanged while its Jacobian determinant differs from
//! one, which changes the density `φ·ν` even though the integral values
//! agree.
//!
//! "The dynamics" is operationalised as the pairing of the full density
//! `probe·e^{iS}` against the functional, with and without the determinant
//! factor.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::{CylinderFunctional, Decay, DiscretePath, FlowSpec, PotentialSpec, QuadratureSpec, TimeGrid};
use crate::error::{LfmError, Result};
use crate::lfm::{integrate_lfm, integrate_lfm_centered};
use crate::linalg::{orthonormalize_columns, Matrix};
use crate::scalar::{cis, compensated_sum, Real};

/// Seed for the points at which integrability and the Jacobian are probed.
const PROBE_SEED: u64 = 0xc0_de;
const PROBE_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangeOfVariables<T> {
    /// `(ν, φ∘F⁻¹)`.
    pub lhs: Complex<T>,
    /// `(ν, φ·det F′)`.
    pub rhs: Complex<T>,
    pub gap: T,
    /// Sum of both sides' quadrature error estimates.
    pub quadrature_error: T,
}

impl<T: Real> ChangeOfVariables<T> {
    /// `gap < max(floor, 10 × quadrature error)`.
    pub fn holds(&self, floor: T) -> bool {
        self.gap < floor.max(T::lit(10.0) * self.quadrature_error)
    }
}

fn standard_normal<T: Real>(rng: &mut ChaCha8Rng) -> T {
    T::lit(Distribution::<f64>::sample(&StandardNormal, rng))
}

fn probe_points<T: Real>(n: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..PROBE_POINTS).map(|_| (0..n).map(|_| standard_normal(&mut rng)).collect()).collect()
}

/// Largest singular value of a square matrix.
fn spectral_norm<T: Real>(m: &Matrix<T>) -> T {
    let (eig, _) = m.transpose().matmul(m).symmetric_eigen();
    eig.into_iter().fold(T::zero(), T::max).sqrt()
}

/// Both sides of `∫φ(F⁻¹(t,x)) ν(dx) = ∫φ(x)·det F′(t,x) ν(dx)` on `E_n`,
/// integrated independently. The left side's nodes follow the flow: they
/// are centred at `F(t, 0)` and stretched by the largest singular value of
/// `F′(t, 0)`.
pub fn verify_change_of_variables<T: Real>(
    flow: &FlowSpec<T>,
    t: T,
    phi: &CylinderFunctional<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
) -> Result<ChangeOfVariables<T>> {
    if flow.dim() != n || phi.dim() > n {
        return Err(LfmError::DimensionMismatch(format!(
            "flow acts on ℝ^{}, functional reads {} coordinates, n = {n}",
            flow.dim(),
            phi.dim()
        )));
    }
    let inverse_flow = flow.clone();
    let pulled = phi.composed(n, move |x| inverse_flow.inverse(t, x));
    let jac_flow = flow.clone();
    let weighted = phi.times(n, move |x| Complex::new(jac_flow.space_jacobian(t, x).det().abs(), T::zero()));

    for x in probe_points::<T>(n, PROBE_SEED) {
        let lu = flow.space_jacobian(t, &x).lu().map_err(|_| LfmError::SingularJacobian { tau: t.to_f64_lossy() })?;
        if lu.pivot_ratio < T::lit(1e-13) {
            return Err(LfmError::SingularJacobian { tau: t.to_f64_lossy() });
        }
        let finite = |z: Complex<T>| z.re.is_finite() && z.im.is_finite();
        if !finite(pulled.eval(&x)) || !finite(weighted.eval(&x)) {
            return Err(LfmError::NonIntegrable("transformed integrand is not finite on probe points".into()));
        }
    }

    let origin = vec![T::zero(); n];
    let center = flow.forward(t, &origin);
    let stretch = spectral_norm(&flow.space_jacobian(t, &origin));
    let lhs_quad = quad.clone().with_node_scale(quad.node_scale * stretch);
    let lhs = integrate_lfm_centered(&pulled, n, &lhs_quad, Some(&center))?;
    let rhs = integrate_lfm(&weighted, n, quad)?;
    Ok(ChangeOfVariables {
        lhs: lhs.value,
        rhs: rhs.value,
        gap: (lhs.value - rhs.value).norm(),
        quadrature_error: lhs.quadrature_error_estimate + rhs.quadrature_error_estimate,
    })
}

/// Discrete action `Σⱼ[(ξⱼ − ξⱼ₋₁)²/2Δ − V(ξⱼ)Δ]` of the one-dimensional
/// path whose increment coordinates are `z` (so the kinetic part is
/// `|z|²/2`).
pub fn discrete_action<T: Real>(v: &PotentialSpec<T>, grid: &TimeGrid<T>, z: &[T]) -> Result<T> {
    if z.len() != grid.n_slices() {
        return Err(LfmError::DimensionMismatch(format!(
            "{} increment coordinates for {} slices",
            z.len(),
            grid.n_slices()
        )));
    }
    let path = DiscretePath::from_increment_coordinates(*grid, 1, z)?;
    let kinetic = compensated_sum(z.iter().map(|&x| x * x)) * T::lit(0.5);
    let potential = compensated_sum(path.values().iter().map(|&q| v.eval(q))) * grid.delta();
    Ok(kinetic - potential)
}

/// Where the paths on which action invariance is tested come from.
#[derive(Clone, Debug, PartialEq)]
pub enum PathFamily<T> {
    /// Standard normal increment coordinates.
    Gaussian,
    /// Standard normal combinations of the given vectors.
    Span(Vec<Vec<T>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyOptions<T> {
    pub t: T,
    pub samples: usize,
    pub seed: u64,
    pub family: PathFamily<T>,
    /// Largest action change still counted as invariant.
    pub action_tolerance: T,
    /// Smallest `|det − 1|` counted as a determinant change.
    pub det_tolerance: T,
}

impl<T: Real> Default for AnomalyOptions<T> {
    fn default() -> Self {
        Self {
            t: T::one(),
            samples: 256,
            seed: 20_240_917,
            family: PathFamily::Gaussian,
            action_tolerance: T::lit(1e-6),
            det_tolerance: T::lit(1e-3),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Invariant,
    Anomalous,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Invariant => "invariant",
            Verdict::Anomalous => "anomalous",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetStats<T> {
    pub min: T,
    pub max: T,
    pub mean: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyReport<T> {
    /// `max |S(F(t,ξ)) − S(ξ)|` over the sampled paths.
    pub action_gap: T,
    pub det_field_stats: DetStats<T>,
    /// `|(ν, density·det F′) − (ν, density)|` for `density = probe·e^{iS}`.
    pub pairing_gap: T,
    /// `max |det F′ − 1|` over the sampled paths: how far the density ratio
    /// `φ·det·ν / φ·ν` is from one.
    pub density_ratio_deviation: T,
    /// The change-of-variables identity for the same density.
    pub change_of_variables: ChangeOfVariables<T>,
    pub verdict: Verdict,
    pub sample_paths: Vec<Vec<T>>,
    pub sample_dets: Vec<T>,
}

/// [`anomaly_report_with`] under default options.
pub fn anomaly_report<T: Real>(
    flow: &FlowSpec<T>,
    v: &PotentialSpec<T>,
    grid: &TimeGrid<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
    probe: &CylinderFunctional<T>,
) -> Result<AnomalyReport<T>> {
    anomaly_report_with(flow, v, grid, n, quad, probe, &AnomalyOptions::default())
}

/// Action invariance, determinant field and density change of `flow` on
/// paths with `n` increment coordinates.
pub fn anomaly_report_with<T: Real>(
    flow: &FlowSpec<T>,
    v: &PotentialSpec<T>,
    grid: &TimeGrid<T>,
    n: usize,
    quad: &QuadratureSpec<T>,
    probe: &CylinderFunctional<T>,
    opts: &AnomalyOptions<T>,
) -> Result<AnomalyReport<T>> {
    if flow.dim() != n || grid.n_slices() != n {
        return Err(LfmError::DimensionMismatch(format!(
            "flow acts on ℝ^{}, grid has {} slices, n = {n}",
            flow.dim(),
            grid.n_slices()
        )));
    }
    if opts.samples == 0 {
        return Err(LfmError::InvalidInput("anomaly report needs at least one sample path".into()));
    }
    let t = opts.t;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sample_paths: Vec<Vec<T>> = (0..opts.samples)
        .map(|_| match &opts.family {
            PathFamily::Gaussian => (0..n).map(|_| standard_normal(&mut rng)).collect(),
            PathFamily::Span(basis) => {
                let mut z = vec![T::zero(); n];
                for b in basis {
                    let a: T = standard_normal(&mut rng);
                    z.iter_mut().zip(b).for_each(|(zi, &bi)| *zi += a * bi);
                }
                z
            }
        })
        .collect();

    let per_path: Vec<(T, T)> = sample_paths
        .par_iter()
        .map(|z| -> Result<(T, T)> {
            let moved = flow.forward(t, z);
            let gap = (discrete_action(v, grid, &moved)? - discrete_action(v, grid, z)?).abs();
            Ok((gap, flow.space_jacobian(t, z).det()))
        })
        .collect::<Result<_>>()?;
    let action_gap = per_path.iter().fold(T::zero(), |m, &(g, _)| m.max(g));
    let sample_dets: Vec<T> = per_path.iter().map(|&(_, d)| d).collect();
    let det_field_stats = DetStats {
        min: sample_dets.iter().copied().fold(T::infinity(), T::min),
        max: sample_dets.iter().copied().fold(T::neg_infinity(), T::max),
        mean: compensated_sum(sample_dets.iter().copied()) / T::from_usize_lossy(sample_dets.len()),
    };
    let density_ratio_deviation = sample_dets.iter().fold(T::zero(), |m, &d| m.max((d - T::one()).abs()));

    let (v1, g1) = (v.clone(), *grid);
    let density = probe.times(n, move |z| match discrete_action(&v1, &g1, z) {
        Ok(s) => cis(s),
        Err(_) => Complex::new(T::nan(), T::nan()),
    });
    let jac_flow = flow.clone();
    let with_det = density.times(n, move |z| Complex::new(jac_flow.space_jacobian(t, z).det(), T::zero()));
    let plain = integrate_lfm(&density, n, quad)?;
    let weighted = integrate_lfm(&with_det, n, quad)?;
    let pairing_gap = (weighted.value - plain.value).norm();
    let change_of_variables = verify_change_of_variables(flow, t, &density, n, quad)?;

    let verdict = if density_ratio_deviation > opts.det_tolerance && action_gap < opts.action_tolerance {
        Verdict::Anomalous
    } else {
        Verdict::Invariant
    };
    Ok(AnomalyReport {
        action_gap,
        det_field_stats,
        pairing_gap,
        density_ratio_deviation,
        change_of_variables,
        verdict,
        sample_paths,
        sample_dets,
    })
}

/// How closely a constructed flow meets its constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstructionResiduals<T> {
    /// `‖P(G + Gᵀ)P‖_F`: the generator's symmetric part on the path span,
    /// which would change the free action there.
    pub symmetric_on_span: T,
    /// `‖(I − P)GP‖_F`: generator output leaving the span.
    pub leakage: T,
    /// `|t·tr G − target log det|`.
    pub log_det_error: T,
}

#[derive(Clone)]
pub struct FlagshipFlow<T> {
    pub flow: FlowSpec<T>,
    pub generator: Matrix<T>,
    /// Orthonormal basis of the span of the reference paths.
    pub path_basis: Vec<Vec<T>>,
    pub grid: TimeGrid<T>,
    pub t: T,
    pub residuals: ConstructionResiduals<T>,
}

impl<T: Real> std::fmt::Debug for FlagshipFlow<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlagshipFlow")
            .field("generator", &self.generator)
            .field("t", &self.t)
            .field("residuals", &self.residuals)
            .finish()
    }
}

/// Entry scale of the seeded matrix the generator is cut from. Keeps
/// `‖exp(tG)‖` moderate so the pulled-back integrand stays resolved.
const GENERATOR_SCALE: f64 = 0.3;

/// A linear flow `e^{tG}` on `n` increment coordinates that leaves the free
/// action unchanged on the span `W` of two seeded reference paths while
/// `det e^{tG} = e^{log_det}`.
///
/// A seeded random generator is projected onto the action's tangent null
/// space along `W`: its compression to `W` is replaced by its skew part and
/// its `W`-to-complement and complement-to-`W` blocks are removed. The
/// remaining block on the complement has its trace reset so that
/// `t·tr G = log_det`.
pub fn flagship_flow<T: Real>(n: usize, t_final: T, log_det: T, seed: u64) -> Result<FlagshipFlow<T>> {
    if n < 3 {
        return Err(LfmError::InvalidInput(format!("flagship flow needs n ≥ 3 (got {n})")));
    }
    if !(t_final > T::zero()) {
        return Err(LfmError::InvalidInput("flagship flow needs a positive time".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = Matrix::from_fn(n, n, |_, _| standard_normal::<T>(&mut rng) * T::lit(GENERATOR_SCALE));
    let refs: Vec<Vec<T>> = (0..2).map(|_| (0..n).map(|_| standard_normal(&mut rng)).collect()).collect();
    let path_basis = orthonormalize_columns(&refs, &Matrix::identity(n));
    if path_basis.len() != 2 {
        return Err(LfmError::InvalidInput("reference paths are linearly dependent".into()));
    }
    let span = Matrix::from_fn(n, n, |i, j| path_basis.iter().map(|b| b[i] * b[j]).sum());
    let rest = Matrix::identity(n).sub(&span);
    let on_span = span.matmul(&g0).matmul(&span);
    let skew = on_span.sub(&on_span.transpose()).scale(T::lit(0.5));
    let off = rest.matmul(&g0).matmul(&rest);
    let complement_dim = T::from_usize_lossy(n - 2);
    let trace_shift = (log_det / t_final - off.trace()) / complement_dim;
    let generator = skew.add(&off).add(&rest.scale(trace_shift));

    let sym = span.matmul(&generator.add(&generator.transpose())).matmul(&span);
    let residuals = ConstructionResiduals {
        symmetric_on_span: sym.frobenius(),
        leakage: rest.matmul(&generator).matmul(&span).frobenius(),
        log_det_error: (generator.trace() * t_final - log_det).abs(),
    };
    Ok(FlagshipFlow {
        flow: FlowSpec::linear(generator.clone()),
        generator,
        path_basis,
        grid: TimeGrid::new(t_final, n)?,
        t: t_final,
        residuals,
    })
}

/// `exp(−rate·|x|²)` on the first `n` coordinates.
pub fn gaussian_probe<T: Real>(n: usize, rate: T) -> CylinderFunctional<T> {
    CylinderFunctional::new(n, Decay::gaussian(T::one(), rate), move |x| {
        let r2: T = x.iter().map(|&v| v * v).sum();
        Complex::new((-rate * r2).exp(), T::zero())
    })
}
