//! Bodies of the built-in experiments.

use lfmkit::quadrature::convergence_order;
use lfmkit::suite::{
    determinant_flows, fredholm_flow, fredholm_matrix, seeded_points, shear_flow, test_functionals, trace_class_fields,
};
use lfmkit::{
    anomaly_report_with, compare, exact_propagator, flagship_flow, flow_logdet, gaussian_probe,
    measure_derivative_pairing, propagate_hamiltonian_ordered, propagate_hamiltonian_weyl,
    propagate_lagrangian_with_rule, shift_invariance_check, solve_schrodinger, verify_change_of_variables,
    AnomalyOptions, Complex64, CylinderFunctional, FlowSpec, HamiltonianSymbol, Mode, PathFamily, PotentialRule,
    PotentialSpec, PropagatorKind, QuadratureSpec, Smoothness, SpatialGrid, SymbolOrdering, Tail, TimeGrid, Verdict,
    WaveFunction,
};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::config::Params;
use crate::registry::Outcome;

type Res = lfmkit::Result<Outcome>;

fn cplx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> Option<String> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Some(out)
}

pub fn normalization(p: &Params, _seed: u64) -> Res {
    let tol = p.float("tolerance");
    let quad = QuadratureSpec::tensor(p.usize("nodes"));
    let mut rows = Vec::new();
    let mut pass = true;
    for n in 1..=p.usize("n_max") {
        let v = lfmkit::integrate_lfm::<f64>(&CylinderFunctional::gaussian(), n, &quad)?;
        let deviation = (v.value - Complex64::new(1.0, 0.0)).norm();
        pass &= deviation < tol;
        rows.push((n, v.value.re, deviation));
    }
    Ok(Outcome {
        outputs: json!({ "rows": rows.iter().map(|(n, v, d)| json!({"n": n, "value": v, "deviation": d})).collect::<Vec<_>>() }),
        tolerance: json!({ "deviation": tol }),
        pass,
        csv: csv("n,value,deviation", rows.iter().map(|(n, v, d)| format!("{n},{v:e},{d:e}"))),
    })
}

fn sweep_weight(j: usize) -> f64 {
    1.0 + 0.5_f64.powi(j as i32)
}

pub fn dimension_sweep(p: &Params, _seed: u64) -> Res {
    let tol = p.float("tolerance");
    let quad = QuadratureSpec::tensor(p.usize("nodes"));
    let tail: lfmkit::TailFn<f64> = Arc::new(|j, x| Complex64::new((-0.5 * sweep_weight(j) * x * x).exp(), 0.0));
    let psi = CylinderFunctional::gaussian().with_tail(Tail::Factor(tail));
    let family = |_: usize| psi.clone();
    let sweep = lfmkit::dimension_sweep(family, p.usize("n_max"), &quad)?;
    let mut partial = 1.0;
    let mut rows = Vec::new();
    let mut pass = !sweep.non_cauchy;
    for (i, v) in sweep.values.iter().enumerate() {
        partial /= sweep_weight(i + 1).sqrt();
        let gap = (v.value.re - partial).abs() + v.value.im.abs();
        pass &= gap < tol;
        let diff = if i == 0 { None } else { Some(sweep.differences[i - 1]) };
        rows.push((i + 1, v.value.re, partial, gap, diff));
    }
    let limit: f64 = (1..=200).map(|j| 1.0 / sweep_weight(j).sqrt()).product();
    Ok(Outcome {
        outputs: json!({
            "rows": rows.iter().map(|(n, v, e, g, d)| json!({"n": n, "value": v, "partial_product": e, "gap": g, "difference": d})).collect::<Vec<_>>(),
            "non_cauchy": sweep.non_cauchy,
            "limit": limit,
        }),
        tolerance: json!({ "gap": tol }),
        pass,
        csv: csv("n,value,partial_product,gap", rows.iter().map(|(n, v, e, g, _)| format!("{n},{v:e},{e:e},{g:e}"))),
    })
}

pub fn thm1_trace(p: &Params, _seed: u64) -> Res {
    let dims = p.ints("dims");
    let nodes = p.ints("nodes");
    if dims.len() != nodes.len() {
        return Err(lfmkit::LfmError::InvalidInput("dims and nodes must have the same length".into()));
    }
    let floor = p.float("floor");
    let mut rows = Vec::new();
    let mut pass = true;
    let mut csv_rows = Vec::new();
    for (&n, &m) in dims.iter().zip(&nodes) {
        let quad = QuadratureSpec::tensor(m);
        for (fname, k) in trace_class_fields::<f64>() {
            for (pname, phi) in test_functionals::<f64>() {
                if phi.dim() > n {
                    continue;
                }
                let r = measure_derivative_pairing(&k, &phi, n, &quad)?;
                let ok = r.holds(floor);
                pass &= ok;
                csv_rows.push(format!("{fname},{pname},{n},{:e},{:e}", r.gap, r.quadrature_error));
                rows.push(json!({
                    "field": fname, "functional": pname, "n": n,
                    "lhs": cplx(r.lhs), "rhs": cplx(r.rhs), "gap": r.gap,
                    "quadrature_error": r.quadrature_error, "pass": ok,
                }));
            }
        }
    }
    Ok(Outcome {
        outputs: json!({ "rows": rows }),
        tolerance: json!({ "floor": floor, "quadrature_error_factor": 10.0 }),
        pass,
        csv: csv("field,functional,n,gap,quadrature_error", csv_rows),
    })
}

pub fn shift_invariance(p: &Params, _seed: u64) -> Res {
    let tol = p.float("tolerance");
    let n = p.usize("n");
    let h = p.floats("shift");
    let quad = QuadratureSpec::tensor(p.usize("nodes"));
    let mut rows = Vec::new();
    let mut pass = true;
    for (name, phi) in test_functionals::<f64>() {
        if phi.dim() > n {
            continue;
        }
        let gap = shift_invariance_check(h, &phi, n, &quad)?;
        pass &= gap < tol;
        rows.push(json!({ "functional": name, "gap": gap }));
    }
    Ok(Outcome { outputs: json!({ "rows": rows }), tolerance: json!({ "gap": tol }), pass, csv: None })
}

pub fn thm3_logdet(p: &Params, seed: u64) -> Res {
    let tol = p.float("tolerance");
    let t = p.float("t");
    let steps = p.usize("ode_steps");
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (name, flow) in determinant_flows::<f64>(seed) {
        for (i, x) in seeded_points(flow.dim(), p.usize("points"), 0.5, seed ^ 0x7d).iter().enumerate() {
            let c = flow_logdet(&flow, t, x, flow.dim(), steps)?;
            pass &= c.gap < tol;
            worst = worst.max(c.gap);
            rows.push(
                json!({ "flow": name, "point": i, "via_trace": c.via_trace, "via_direct": c.via_direct, "gap": c.gap }),
            );
        }
    }
    let m = fredholm_matrix::<f64>(40);
    let eig = lfmkit::flows::eigenvalue_determinant(&m, t);
    let direct = flow_logdet(&fredholm_flow(40), t, &vec![0.0; 40], 40, steps)?;
    let fredholm_gap = (eig - direct.via_trace).abs() / eig.abs();
    pass &= fredholm_gap < tol;
    Ok(Outcome {
        outputs: json!({
            "rows": rows,
            "worst_gap": worst,
            "fredholm": { "eigenvalue_product": eig, "via_trace": direct.via_trace, "gap": fredholm_gap },
        }),
        tolerance: json!({ "relative_gap": tol }),
        pass,
        csv: None,
    })
}

pub fn thm4_cov(p: &Params, _seed: u64) -> Res {
    let t = p.float("t");
    let floor = p.float("floor");
    let quad = QuadratureSpec::tensor(p.usize("nodes"));
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    let mut pass = true;
    for case in p.strings("cases") {
        let (flow, phi, n, oracle): (FlowSpec<f64>, CylinderFunctional<f64>, usize, Option<f64>) = match case.as_str() {
            "translation" => (
                FlowSpec::translation(vec![0.3, -0.2, 0.1]),
                CylinderFunctional::polynomial_gaussian(2, |x: &[f64]| 1.0 + x[0] * x[1]),
                3,
                None,
            ),
            // (2π)^{-1}∫exp(−|e^{−t}x|²/2)dx = e^{2t}
            "scaling" => (FlowSpec::scaling(2), CylinderFunctional::gaussian(), 2, Some((2.0 * t).exp())),
            "shear" => (
                shear_flow(),
                CylinderFunctional::polynomial_gaussian(2, |x: &[f64]| 1.0 + x[0] * x[1] + x[0] * x[0]),
                2,
                None,
            ),
            other => return Err(lfmkit::LfmError::InvalidInput(format!("unknown change-of-variables case {other}"))),
        };
        let r = verify_change_of_variables(&flow, t, &phi, n, &quad)?;
        let mut ok = r.holds(floor);
        let oracle_gap = oracle.map(|o| (r.lhs.re - o).abs().max((r.rhs.re - o).abs()));
        if let Some(g) = oracle_gap {
            ok &= g < floor.max(10.0 * r.quadrature_error);
        }
        pass &= ok;
        csv_rows.push(format!("{case},{:e},{:e},{:e},{:e},{:e}", r.lhs.re, r.lhs.im, r.rhs.re, r.rhs.im, r.gap));
        rows.push(json!({
            "case": case, "n": n, "lhs": cplx(r.lhs), "rhs": cplx(r.rhs), "gap": r.gap,
            "quadrature_error": r.quadrature_error, "oracle": oracle, "oracle_gap": oracle_gap, "pass": ok,
        }));
    }
    Ok(Outcome {
        outputs: json!({ "rows": rows }),
        tolerance: json!({ "floor": floor, "quadrature_error_factor": 10.0 }),
        pass,
        csv: csv("case,lhs_re,lhs_im,rhs_re,rhs_im,gap", csv_rows),
    })
}

fn kernel_error(
    v: &PotentialSpec<f64>,
    kind: PropagatorKind<f64>,
    t: f64,
    n: usize,
    rule: PotentialRule,
) -> lfmkit::Result<f64> {
    let g = SpatialGrid::standard();
    let x0 = g.point(g.nearest_index(0.0));
    let delta = WaveFunction::discrete_delta(g, x0);
    let quad = QuadratureSpec::tensor(1).without_error_estimate();
    let r = propagate_lagrangian_with_rule(v, &delta, &TimeGrid::new(t, n)?, Mode::ImaginaryTime, &quad, rule)?;
    let k = exact_propagator(kind, t, Mode::ImaginaryTime)?;
    let exact = WaveFunction::from_fn(g, |x| k.eval(x, x0));
    Ok(compare(&r.wave, &exact)?.l2 / exact.norm_l2())
}

pub fn feynman_vs_oracle(p: &Params, _seed: u64) -> Res {
    let tol = p.float("tolerance");
    let (n, t, omega) = (p.usize("n_slices"), p.float("t"), p.float("omega"));
    let harmonic = PotentialSpec::harmonic(omega);
    let mut rows = Vec::new();
    let mut push = |case: &str, err: f64| {
        rows.push(json!({ "case": case, "relative_error": err, "pass": err < tol }));
        err < tol
    };
    let mut pass =
        push("heat-kernel", kernel_error(&PotentialSpec::free(), PropagatorKind::Free, t, n, PotentialRule::Endpoint)?);
    for rule in [PotentialRule::Endpoint, PotentialRule::Midpoint, PotentialRule::Symmetric] {
        let err = kernel_error(&harmonic, PropagatorKind::Harmonic { omega }, t, n, rule)?;
        pass &= push(&format!("mehler-kernel-{}", rule.name()), err);
    }
    let g = SpatialGrid::standard();
    let packet = WaveFunction::gaussian_packet(g, 1.0, 1.0, 0.5);
    let quad = QuadratureSpec::tensor(1).without_error_estimate();
    let tg = TimeGrid::new(t, n)?;
    for (case, v) in [("free-packet-real-time", PotentialSpec::free()), ("harmonic-packet-real-time", harmonic.clone())]
    {
        let r = propagate_lagrangian_with_rule(&v, &packet, &tg, Mode::RealTime, &quad, PotentialRule::Symmetric)?;
        let oracle = solve_schrodinger(&v, &packet, t, Mode::RealTime, None)?;
        pass &= push(case, compare(&r.wave, &oracle)?.l2 / oracle.norm_l2());
    }
    Ok(Outcome {
        outputs: json!({ "n_slices": n, "rows": rows }),
        tolerance: json!({ "relative_error": tol }),
        pass,
        csv: None,
    })
}

pub fn trotter_order(p: &Params, _seed: u64) -> Res {
    let slices = p.ints("slices");
    let (t, omega, tol) = (p.float("t"), p.float("omega"), p.float("slope_tolerance"));
    let harmonic = PotentialSpec::harmonic(omega);
    let ns: Vec<f64> = slices.iter().map(|&n| n as f64).collect();
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    let mut pass = true;
    for rule in [PotentialRule::Endpoint, PotentialRule::Midpoint, PotentialRule::Symmetric] {
        let errors: Vec<f64> = slices
            .iter()
            .map(|&n| kernel_error(&harmonic, PropagatorKind::Harmonic { omega }, t, n, rule))
            .collect::<lfmkit::Result<_>>()?;
        let slope = convergence_order(&ns, &errors);
        let order = rule.order() as f64;
        let ok = (slope - order).abs() <= tol;
        pass &= ok;
        csv_rows.extend(slices.iter().zip(&errors).map(|(n, e)| format!("{},{n},{e:e}", rule.name())));
        rows.push(json!({ "rule": rule.name(), "errors": errors, "slope": slope, "nominal_order": order, "pass": ok }));
    }
    Ok(Outcome {
        outputs: json!({ "slices": slices, "rows": rows }),
        tolerance: json!({ "slope": tol }),
        pass,
        csv: csv("rule,n_slices,relative_error", csv_rows),
    })
}

pub fn weyl_reduction(p: &Params, _seed: u64) -> Res {
    let tol = p.float("tolerance");
    let tg = TimeGrid::new(p.float("t"), p.usize("n_slices"))?;
    let g = SpatialGrid::standard();
    let phi0 = WaveFunction::gaussian_packet(g, 0.3, 0.8, 0.0);
    let quad = QuadratureSpec::tensor(1).without_error_estimate();
    let cases = [
        ("harmonic", PotentialSpec::harmonic(1.0)),
        ("anharmonic", PotentialSpec::new(Smoothness::Smooth, |q: f64| 0.2 * q * q + 0.1 * q.cos())),
    ];
    let mut rows = Vec::new();
    let mut pass = true;
    for (name, v) in cases {
        let h = HamiltonianSymbol::kinetic_plus(v.clone());
        let a = propagate_hamiltonian_weyl(&h, &phi0, &tg, Mode::ImaginaryTime, &quad)?;
        let b = propagate_lagrangian_with_rule(&v, &phi0, &tg, Mode::ImaginaryTime, &quad, PotentialRule::Midpoint)?;
        let gap = compare(&a.wave, &b.wave)?.l2;
        pass &= gap < tol;
        rows.push(json!({ "potential": name, "mode": Mode::ImaginaryTime.name(), "gap": gap }));
    }
    Ok(Outcome { outputs: json!({ "rows": rows }), tolerance: json!({ "gap": tol }), pass, csv: None })
}

/// `−i·Ĥφ` for `Ĥ = −i(q∂ + ½)`, with a sixth-order central difference.
fn dilation_generator(phi: &WaveFunction<f64>) -> Vec<Complex64> {
    let g = phi.grid;
    let h = g.spacing();
    let n = g.n_points as isize;
    let at = |j: isize| phi.values[j.clamp(0, n - 1) as usize];
    (0..n)
        .map(|j| {
            let d = (at(j - 3) * -1.0 + at(j - 2) * 9.0 - at(j - 1) * 45.0 + at(j + 1) * 45.0 - at(j + 2) * 9.0
                + at(j + 3))
                / (60.0 * h);
            -(d * g.point(j as usize) + at(j) * 0.5)
        })
        .collect()
}

pub fn weyl_dilation(p: &Params, _seed: u64) -> Res {
    let times = p.floats("times").to_vec();
    let tol = p.float("slope_tolerance");
    let g = SpatialGrid::standard();
    let phi0 = WaveFunction::gaussian_packet(g, 0.4, 1.0, 0.7);
    let gen = dilation_generator(&phi0);
    let quad = QuadratureSpec::tensor(1);
    let h = HamiltonianSymbol::dilation();
    let ns: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
    let mut rows = Vec::new();
    let mut pass = true;
    for (ordering, name, order) in [(SymbolOrdering::Weyl, "weyl", 2.0), (SymbolOrdering::Standard, "standard", 1.0)] {
        let errors: Vec<f64> = times
            .iter()
            .map(|&t| -> lfmkit::Result<f64> {
                let r =
                    propagate_hamiltonian_ordered(&h, &phi0, &TimeGrid::new(t, 1)?, Mode::RealTime, &quad, ordering)?;
                let linear = WaveFunction::new(g, phi0.values.iter().zip(&gen).map(|(&a, &d)| a + d * t).collect())?;
                Ok(compare(&r.wave, &linear)?.l2)
            })
            .collect::<lfmkit::Result<_>>()?;
        let slope = convergence_order(&ns, &errors);
        let ok = (slope - order).abs() <= tol;
        pass &= ok;
        rows.push(json!({ "ordering": name, "errors": errors, "slope": slope, "nominal_order": order, "pass": ok }));
    }
    Ok(Outcome {
        outputs: json!({ "times": times, "rows": rows }),
        tolerance: json!({ "slope": tol }),
        pass,
        csv: None,
    })
}

pub fn anomaly_flagship(p: &Params, seed: u64) -> Res {
    let n = p.usize("n");
    let f = flagship_flow::<f64>(n, 1.0, p.float("log_det"), seed)?;
    let opts = AnomalyOptions {
        t: f.t,
        samples: p.usize("samples"),
        seed,
        family: PathFamily::Span(f.path_basis.clone()),
        action_tolerance: p.float("action_tolerance"),
        det_tolerance: p.float("det_deviation"),
    };
    let quad = QuadratureSpec::tensor(p.usize("nodes")).with_node_scale(p.float("node_scale"));
    let probe = gaussian_probe(n, p.float("probe_rate"));
    let r = anomaly_report_with(&f.flow, &PotentialSpec::free(), &f.grid, n, &quad, &probe, &opts)?;
    let det_dev = (r.det_field_stats.min - 1.0).abs().min((r.det_field_stats.max - 1.0).abs());
    let clauses = json!({
        "action_invariant": r.action_gap < opts.action_tolerance,
        "det_changed": det_dev > opts.det_tolerance,
        "change_of_variables_holds": r.change_of_variables.holds(p.float("cov_floor")),
        "density_changed": r.density_ratio_deviation > p.float("density_deviation"),
    });
    let pass = clauses.as_object().is_some_and(|m| m.values().all(|v| v == &Value::Bool(true)))
        && r.verdict == Verdict::Anomalous;
    Ok(Outcome {
        outputs: json!({
            "generator": (0..n).map(|i| f.generator.row(i).to_vec()).collect::<Vec<_>>(),
            "residuals": {
                "symmetric_on_span": f.residuals.symmetric_on_span,
                "leakage": f.residuals.leakage,
                "log_det_error": f.residuals.log_det_error,
            },
            "action_gap": r.action_gap,
            "det": { "min": r.det_field_stats.min, "max": r.det_field_stats.max, "mean": r.det_field_stats.mean },
            "pairing_gap": r.pairing_gap,
            "density_ratio_deviation": r.density_ratio_deviation,
            "change_of_variables": {
                "lhs": cplx(r.change_of_variables.lhs),
                "rhs": cplx(r.change_of_variables.rhs),
                "gap": r.change_of_variables.gap,
                "quadrature_error": r.change_of_variables.quadrature_error,
            },
            "verdict": r.verdict.name(),
            "clauses": clauses,
        }),
        tolerance: json!({
            "action_gap": opts.action_tolerance,
            "det_deviation": opts.det_tolerance,
            "change_of_variables_floor": p.float("cov_floor"),
            "density_deviation": p.float("density_deviation"),
        }),
        pass,
        csv: None,
    })
}

pub fn anomaly_cases(p: &Params, seed: u64) -> Res {
    let tol = p.float("tolerance");
    let samples = p.usize("samples");
    let probe_quad = QuadratureSpec::tensor(12).with_node_scale(0.5);
    let mut rows = Vec::new();
    let mut pass = true;

    let n = 3;
    let grid = TimeGrid::new(1.0, n)?;
    let base = AnomalyOptions { samples, seed, ..AnomalyOptions::default() };
    let id = anomaly_report_with(
        &FlowSpec::identity(n),
        &PotentialSpec::free(),
        &grid,
        n,
        &probe_quad,
        &gaussian_probe(n, 2.0),
        &AnomalyOptions { t: 0.0, ..base.clone() },
    )?;
    let ok = id.verdict == Verdict::Invariant && id.action_gap == 0.0 && id.pairing_gap == 0.0;
    pass &= ok;
    rows.push(json!({ "case": "identity", "verdict": id.verdict.name(), "action_gap": id.action_gap, "pairing_gap": id.pairing_gap, "pass": ok }));

    let tr = anomaly_report_with(
        &FlowSpec::translation(vec![0.2, 0.1, -0.3]),
        &PotentialSpec::free(),
        &grid,
        n,
        &probe_quad,
        &gaussian_probe(n, 2.0),
        &base,
    )?;
    let ok = tr.verdict == Verdict::Invariant && tr.density_ratio_deviation == 0.0;
    pass &= ok;
    rows.push(json!({ "case": "translation", "verdict": tr.verdict.name(), "action_gap": tr.action_gap, "density_ratio_deviation": tr.density_ratio_deviation, "pass": ok }));

    let m = p.usize("fredholm_nodes");
    let t = 0.5;
    let flow = fredholm_flow::<f64>(m);
    let mc = QuadratureSpec::monte_carlo(p.usize("mc_samples"), seed).with_node_scale(0.5);
    let fr = anomaly_report_with(
        &flow,
        &PotentialSpec::free(),
        &TimeGrid::new(1.0, m)?,
        m,
        &mc,
        &gaussian_probe(m, 2.0),
        &AnomalyOptions { t, ..base },
    )?;
    let oracle = lfmkit::flows::eigenvalue_determinant(&fredholm_matrix(m), t);
    let det_gap = (fr.det_field_stats.mean - oracle).abs() / oracle;
    let mut trace_gap: f64 = 0.0;
    for (z, d) in fr.sample_paths.iter().zip(&fr.sample_dets).take(4) {
        let c = flow_logdet(&flow, t, z, m, lfmkit::flows::DEFAULT_ODE_STEPS)?;
        trace_gap = trace_gap.max((c.via_trace - d).abs() / d.abs());
    }
    let ok = fr.verdict == Verdict::Invariant && det_gap < tol && trace_gap < tol && fr.pairing_gap > 0.0;
    pass &= ok;
    rows.push(json!({
        "case": "fredholm", "verdict": fr.verdict.name(), "action_gap": fr.action_gap,
        "det_mean": fr.det_field_stats.mean, "eigenvalue_product": oracle, "det_gap": det_gap,
        "trace_route_gap": trace_gap, "pairing_gap": fr.pairing_gap,
        "change_of_variables_gap": fr.change_of_variables.gap, "pass": ok,
    }));
    Ok(Outcome { outputs: json!({ "rows": rows }), tolerance: json!({ "det_gap": tol }), pass, csv: None })
}
