//! Acceptance criteria, one line each. Tolerances and runtime limits are
//! pinned here rather than taken from experiment defaults.

use std::path::Path;
use std::time::{Duration, Instant};

use lfmkit_cli::{config, run_config, RunOptions};
use serde_json::Value;

const SEED: u64 = 20_240_917;

struct Check {
    pass: bool,
    detail: String,
}

fn run(cfg: &str, dir: &Path) -> Vec<(bool, Value)> {
    let cfg = config::parse(cfg).expect("acceptance config parses");
    let opts = RunOptions { output_dir: Some(dir.to_path_buf()), seed: Some(SEED), jobs: 1 };
    run_config(&cfg, &opts)
        .expect("results are written")
        .into_iter()
        .map(|s| {
            let doc = serde_json::from_str(&std::fs::read_to_string(&s.result_file).unwrap()).unwrap();
            (s.pass, doc)
        })
        .collect()
}

fn rows(doc: &Value) -> &Vec<Value> {
    doc["outputs"]["rows"].as_array().expect("rows")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn normalization(dir: &Path) -> Check {
    let r = run("[normalization]\nn_max = 8\nnodes = 20\ntolerance = 1e-10\n", dir);
    let worst = rows(&r[0].1).iter().map(|x| f(&x["deviation"])).fold(0.0, f64::max);
    Check { pass: r[0].0 && rows(&r[0].1).len() == 8 && worst < 1e-10, detail: format!("worst deviation {worst:.2e}") }
}

fn trace_identity(dir: &Path) -> Check {
    let r = run("[thm1-trace]\ndims = [2, 3, 4]\nnodes = [24, 20, 16]\nfloor = 1e-8\n", dir);
    let rs = rows(&r[0].1);
    let mut fields: Vec<&str> = rs.iter().filter_map(|x| x["field"].as_str()).collect();
    let mut functionals: Vec<&str> = rs.iter().filter_map(|x| x["functional"].as_str()).collect();
    fields.sort();
    fields.dedup();
    functionals.sort();
    functionals.dedup();
    let ok = rs.iter().all(|x| f(&x["gap"]) < 1e-8f64.max(10.0 * f(&x["quadrature_error"])));
    let worst = rs.iter().map(|x| f(&x["gap"])).fold(0.0, f64::max);
    Check {
        pass: r[0].0 && ok && fields.len() >= 5 && functionals.len() >= 4,
        detail: format!(
            "{} fields x {} functionals, {} pairings, worst gap {worst:.2e}",
            fields.len(),
            functionals.len(),
            rs.len()
        ),
    }
}

fn determinant_routes(dir: &Path) -> Check {
    let r = run("[thm3-logdet]\nt = 1.0\npoints = 4\node_steps = 64\ntolerance = 1e-6\n", dir);
    let out = &r[0].1["outputs"];
    let worst = f(&out["worst_gap"]);
    let fredholm = f(&out["fredholm"]["gap"]);
    let has_fredholm = rows(&r[0].1).iter().any(|x| x["flow"] == "fredholm-gaussian-40");
    Check {
        pass: r[0].0 && has_fredholm && worst < 1e-6 && fredholm < 1e-6,
        detail: format!("worst relative gap {worst:.2e}, Nyström n = 40 vs eigenvalues {fredholm:.2e}"),
    }
}

fn change_of_variables(dir: &Path) -> Check {
    let r =
        run("[thm4-cov]\ncases = [\"translation\", \"scaling\", \"shear\"]\nt = 0.5\nnodes = 24\nfloor = 1e-7\n", dir);
    let rs = rows(&r[0].1);
    let ok = rs.len() == 3 && rs.iter().all(|x| f(&x["gap"]) < 1e-7f64.max(10.0 * f(&x["quadrature_error"])));
    let gaps: Vec<String> =
        rs.iter().map(|x| format!("{} {:.1e}", x["case"].as_str().unwrap_or("?"), f(&x["gap"]))).collect();
    Check { pass: r[0].0 && ok, detail: gaps.join(", ") }
}

fn time_slicing(dir: &Path) -> Check {
    let r = run(
        "[feynman-vs-oracle]\nn_slices = 256\nt = 1.0\nomega = 1.0\ntolerance = 1e-3\n\
         [trotter-order]\nslices = [32, 64, 128, 256]\nt = 1.0\nomega = 1.0\nslope_tolerance = 0.3\n",
        dir,
    );
    let kernels: Vec<&Value> =
        rows(&r[0].1).iter().filter(|x| x["case"].as_str().is_some_and(|c| c.contains("kernel"))).collect();
    let worst = kernels.iter().map(|x| f(&x["relative_error"])).fold(0.0, f64::max);
    let slopes: Vec<String> = rows(&r[1].1)
        .iter()
        .map(|x| format!("{} {:.2}/{}", x["rule"].as_str().unwrap_or("?"), f(&x["slope"]), f(&x["nominal_order"])))
        .collect();
    let slopes_ok = rows(&r[1].1).iter().all(|x| (f(&x["slope"]) - f(&x["nominal_order"])).abs() <= 0.3);
    Check {
        pass: r[0].0 && r[1].0 && worst < 1e-3 && slopes_ok,
        detail: format!("worst kernel error {worst:.1e}; slopes {}", slopes.join(", ")),
    }
}

fn phase_space(dir: &Path) -> Check {
    let r = run(
        "[weyl-reduction]\nn_slices = 32\nt = 0.5\ntolerance = 1e-10\n\
         [weyl-dilation]\ntimes = [0.04, 0.02, 0.01]\nslope_tolerance = 0.3\n",
        dir,
    );
    let gap = rows(&r[0].1).iter().map(|x| f(&x["gap"])).fold(0.0, f64::max);
    let weyl = rows(&r[1].1).iter().find(|x| x["ordering"] == "weyl").map(|x| f(&x["slope"])).unwrap_or(f64::NAN);
    Check {
        pass: r[0].0 && r[1].0 && gap < 1e-10 && (weyl - 2.0).abs() <= 0.3,
        detail: format!("reduction gap {gap:.1e}, dilation slope {weyl:.3}"),
    }
}

fn anomaly(dir: &Path) -> Check {
    let r = run(
        "[anomaly-flagship]\nn = 4\nlog_det = 0.1\nsamples = 256\naction_tolerance = 1e-6\n\
         det_deviation = 1e-2\ncov_floor = 1e-7\ndensity_deviation = 1e-3\n",
        dir,
    );
    let out = &r[0].1["outputs"];
    let action = f(&out["action_gap"]);
    let det_dev = (f(&out["det"]["min"]) - 1.0).abs().min((f(&out["det"]["max"]) - 1.0).abs());
    let cov = &out["change_of_variables"];
    let cov_ok = f(&cov["gap"]) < 1e-7f64.max(10.0 * f(&cov["quadrature_error"]));
    let density = f(&out["density_ratio_deviation"]);
    Check {
        pass: r[0].0 && action < 1e-6 && det_dev > 1e-2 && cov_ok && density > 1e-3,
        detail: format!(
            "action gap {action:.1e}, |det - 1| {det_dev:.3e}, cov gap {:.1e}, density deviation {density:.2e}, verdict {}",
            f(&cov["gap"]),
            out["verdict"].as_str().unwrap_or("?")
        ),
    }
}

fn determinism(dir: &Path) -> Check {
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/full_suite.cfg")).unwrap();
    let cfg = config::parse(&text).unwrap();
    let (a, b) = (dir.join("a"), dir.join("b"));
    let first = run_config(&cfg, &RunOptions { output_dir: Some(a.clone()), seed: Some(SEED), jobs: 1 }).unwrap();
    run_config(&cfg, &RunOptions { output_dir: Some(b.clone()), seed: Some(SEED), jobs: 4 }).unwrap();
    let mut files: Vec<_> =
        std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).filter(|n| n != "timings.json").collect();
    files.sort();
    let differing: Vec<String> = files
        .iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    Check {
        pass: differing.is_empty() && files.len() >= first.len(),
        detail: if differing.is_empty() {
            format!("{} files identical across a sequential and a 4-job run", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    }
}

type Criterion = (&'static str, Duration, fn(&Path) -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 normalization", Duration::from_secs(10), normalization),
        ("2 trace identity", Duration::from_secs(60), trace_identity),
        ("3 determinant routes", Duration::from_secs(30), determinant_routes),
        ("4 change of variables", Duration::from_secs(60), change_of_variables),
        ("5 time slicing", Duration::from_secs(300), time_slicing),
        ("6 phase-space slicing", Duration::from_secs(120), phase_space),
        ("7 anomaly", Duration::from_secs(120), anomaly),
        ("8 determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let c = check(dir.path());
        let elapsed = start.elapsed();
        let pass = c.pass && elapsed < limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name:<24} {:>7.2}s (limit {}s)  {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            c.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
