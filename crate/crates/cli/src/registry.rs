//! Built-in experiments in their stable listing order.

use serde_json::Value;

use crate::config::{ParamKind, ParamSpec, ParamValue, Params};
use crate::experiments as exp;

/// What an experiment reports. `tolerance` names every bound `pass` used.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub outputs: Value,
    pub tolerance: Value,
    pub pass: bool,
    /// Plot-ready table, header line first.
    pub csv: Option<String>,
}

pub type RunFn = fn(&Params, u64) -> lfmkit::Result<Outcome>;

pub struct ExperimentDef {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [ParamSpec],
    pub run: RunFn,
}

impl std::fmt::Debug for ExperimentDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperimentDef").field("name", &self.name).finish()
    }
}

macro_rules! p {
    ($name:literal, Int, $v:expr, $doc:literal) => {
        ParamSpec { name: $name, kind: ParamKind::Int, default: || ParamValue::Int($v), doc: $doc }
    };
    ($name:literal, Float, $v:expr, $doc:literal) => {
        ParamSpec { name: $name, kind: ParamKind::Float, default: || ParamValue::Float($v), doc: $doc }
    };
    ($name:literal, IntList, [$($v:expr),*], $doc:literal) => {
        ParamSpec { name: $name, kind: ParamKind::IntList, default: || ParamValue::IntList(vec![$($v),*]), doc: $doc }
    };
    ($name:literal, FloatList, [$($v:expr),*], $doc:literal) => {
        ParamSpec { name: $name, kind: ParamKind::FloatList, default: || ParamValue::FloatList(vec![$($v),*]), doc: $doc }
    };
    ($name:literal, StrList, [$($v:expr),*], $doc:literal) => {
        ParamSpec {
            name: $name,
            kind: ParamKind::StrList,
            default: || ParamValue::StrList(vec![$($v.to_owned()),*]),
            doc: $doc,
        }
    };
}

pub static EXPERIMENTS: &[ExperimentDef] = &[
    ExperimentDef {
        name: "normalization",
        description: "(ν, exp(−|x|²/2)) = 1 on E_n for n = 1..n_max",
        params: &[
            p!("n_max", Int, 8, "largest dimension"),
            p!("nodes", Int, 20, "Gauss–Hermite nodes per dimension"),
            p!("tolerance", Float, 1e-10, "largest accepted |value − 1|"),
        ],
        run: exp::normalization,
    },
    ExperimentDef {
        name: "dimension-sweep",
        description: "values of exp(−Σ(1 + 2^{-j})xⱼ²/2) as n grows, against the partial products",
        params: &[
            p!("n_max", Int, 8, "largest dimension"),
            p!("nodes", Int, 20, "Gauss–Hermite nodes per dimension"),
            p!("tolerance", Float, 1e-10, "largest accepted gap to the partial product"),
        ],
        run: exp::dimension_sweep,
    },
    ExperimentDef {
        name: "thm1-trace",
        description: "−(ν, φ′k) = (ν, tr(k′)φ) over the shipped fields and functionals",
        params: &[
            p!("dims", IntList, [2, 3, 4], "truncation dimensions"),
            p!("nodes", IntList, [24, 20, 16], "Gauss–Hermite nodes per dimension, one per entry of dims"),
            p!("floor", Float, 1e-8, "absolute gap floor; the bound is max(floor, 10 × quadrature error)"),
        ],
        run: exp::thm1_trace,
    },
    ExperimentDef {
        name: "shift-invariance",
        description: "(ν, φ(· + h)) = (ν, φ) for the shipped functionals",
        params: &[
            p!("n", Int, 3, "truncation dimension"),
            p!("nodes", Int, 20, "Gauss–Hermite nodes per dimension"),
            p!("shift", FloatList, [0.3, -0.5, 0.2], "shift vector h"),
            p!("tolerance", Float, 1e-10, "largest accepted gap"),
        ],
        run: exp::shift_invariance,
    },
    ExperimentDef {
        name: "thm3-logdet",
        description: "det F′ by integrated trace against direct determinant, plus the Fredholm eigenvalue product",
        params: &[
            p!("t", Float, 1.0, "flow time"),
            p!("points", Int, 4, "seeded evaluation points per flow"),
            p!("ode_steps", Int, 64, "Simpson steps for the trace integral"),
            p!("tolerance", Float, 1e-6, "largest accepted relative gap"),
        ],
        run: exp::thm3_logdet,
    },
    ExperimentDef {
        name: "thm4-cov",
        description: "∫φ(F⁻¹x)ν(dx) = ∫φ(x)det F′(x)ν(dx) for translation, scaling and a nonlinear shear",
        params: &[
            p!("cases", StrList, ["translation", "scaling", "shear"], "subset of translation, scaling, shear"),
            p!("t", Float, 0.5, "flow time"),
            p!("nodes", Int, 24, "Gauss–Hermite nodes per dimension"),
            p!("floor", Float, 1e-7, "absolute gap floor; the bound is max(floor, 10 × quadrature error)"),
        ],
        run: exp::thm4_cov,
    },
    ExperimentDef {
        name: "feynman-vs-oracle",
        description: "time-sliced kernels and packets against closed-form and split-step references",
        params: &[
            p!("n_slices", Int, 256, "time slices"),
            p!("t", Float, 1.0, "final time"),
            p!("omega", Float, 1.0, "oscillator frequency"),
            p!("tolerance", Float, 1e-3, "largest accepted relative L² error"),
        ],
        run: exp::feynman_vs_oracle,
    },
    ExperimentDef {
        name: "trotter-order",
        description: "convergence slope of the imaginary-time oscillator kernel for each potential rule",
        params: &[
            p!("slices", IntList, [32, 64, 128, 256], "slice counts"),
            p!("t", Float, 1.0, "final time"),
            p!("omega", Float, 1.0, "oscillator frequency"),
            p!("slope_tolerance", Float, 0.3, "largest accepted |slope − order|"),
        ],
        run: exp::trotter_order,
    },
    ExperimentDef {
        name: "weyl-reduction",
        description: "phase-space slicing of p²/2 + V(q) against configuration slicing",
        params: &[
            p!("n_slices", Int, 32, "time slices"),
            p!("t", Float, 0.5, "final time"),
            p!("tolerance", Float, 1e-10, "largest accepted L² gap"),
        ],
        run: exp::weyl_reduction,
    },
    ExperimentDef {
        name: "weyl-dilation",
        description: "one slice of the symbol qp against the symmetrised operator, Weyl and standard ordering",
        params: &[
            p!("times", FloatList, [0.04, 0.02, 0.01], "slice lengths"),
            p!("slope_tolerance", Float, 0.3, "largest accepted |slope − order|"),
        ],
        run: exp::weyl_dilation,
    },
    ExperimentDef {
        name: "anomaly-flagship",
        description: "action-preserving flow with det ≠ 1: action gap, determinant, change of variables, density ratio",
        params: &[
            p!("n", Int, 4, "increment coordinates"),
            p!("log_det", Float, 0.1, "target log det of the flow"),
            p!("samples", Int, 256, "sampled paths"),
            p!("nodes", Int, 20, "Gauss–Hermite nodes per dimension"),
            p!("node_scale", Float, 0.5, "node spread"),
            p!("probe_rate", Float, 2.0, "probe exp(−rate·|x|²)"),
            p!("action_tolerance", Float, 1e-6, "largest accepted action gap"),
            p!("det_deviation", Float, 1e-2, "smallest required |det − 1|"),
            p!("cov_floor", Float, 1e-7, "change-of-variables gap floor"),
            p!("density_deviation", Float, 1e-3, "smallest required density ratio deviation"),
        ],
        run: exp::anomaly_flagship,
    },
    ExperimentDef {
        name: "anomaly-cases",
        description: "identity, translation and Fredholm flows: verdicts and determinant cross-checks",
        params: &[
            p!("samples", Int, 32, "sampled paths"),
            p!("fredholm_nodes", Int, 40, "Nyström nodes"),
            p!("mc_samples", Int, 4096, "Monte Carlo samples for the Fredholm case"),
            p!("tolerance", Float, 1e-9, "largest accepted determinant gap"),
        ],
        run: exp::anomaly_cases,
    },
];

pub fn find(name: &str) -> Option<&'static ExperimentDef> {
    EXPERIMENTS.iter().find(|d| d.name == name)
}

/// `(name, description)` in listing order.
pub fn list() -> Vec<(&'static str, &'static str)> {
    EXPERIMENTS.iter().map(|d| (d.name, d.description)).collect()
}
