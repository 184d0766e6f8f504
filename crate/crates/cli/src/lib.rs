//! Batch runner behind the `lfmkit` binary.

pub mod config;
pub mod experiments;
pub mod registry;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

pub use config::{ConfigError, ExperimentConfig, RunConfig};
pub use registry::{find, list, Outcome, EXPERIMENTS};

pub const DEFAULT_SEED: u64 = 20_240_917;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: usize,
}

/// Status of one finished experiment.
#[derive(Clone, Debug)]
pub struct ExperimentStatus {
    pub label: String,
    pub experiment: &'static str,
    pub pass: bool,
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub result_file: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_FAILED,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

/// Writes through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or_default()));
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Result document for one experiment. `wall_time_s` is null so that
/// identical inputs give identical bytes; timings go to `timings.json`.
pub fn result_json(exp: &ExperimentConfig, seed: u64, outcome: &Outcome, error: Option<&str>) -> Value {
    let mut m = Map::new();
    m.insert("experiment".into(), json!(exp.def.name));
    if exp.label != exp.def.name {
        m.insert("label".into(), json!(exp.label));
    }
    m.insert("inputs".into(), exp.params.to_json());
    m.insert("outputs".into(), outcome.outputs.clone());
    m.insert("tolerance".into(), outcome.tolerance.clone());
    m.insert("pass".into(), json!(outcome.pass));
    if let Some(e) = error {
        m.insert("error".into(), json!(e));
    }
    m.insert("wall_time_s".into(), Value::Null);
    m.insert("seed".into(), json!(seed));
    Value::Object(m)
}

fn execute(exp: &ExperimentConfig, seed: u64, dir: &Path) -> Result<ExperimentStatus, RunError> {
    let start = Instant::now();
    let (outcome, error) = match (exp.def.run)(&exp.params, seed) {
        Ok(o) => (o, None),
        Err(e) => {
            (Outcome { outputs: Value::Null, tolerance: Value::Null, pass: false, csv: None }, Some(e.to_string()))
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let doc = result_json(exp, seed, &outcome, error.as_deref());
    let mut text = serde_json::to_string_pretty(&doc).expect("result documents serialize");
    text.push('\n');
    let path = dir.join(format!("{}.json", exp.label));
    write_atomic(&path, text.as_bytes())?;
    if let Some(csv) = &outcome.csv {
        write_atomic(&dir.join(format!("{}.csv", exp.label)), csv.as_bytes())?;
    }
    Ok(ExperimentStatus {
        label: exp.label.clone(),
        experiment: exp.def.name,
        pass: outcome.pass,
        error,
        wall_time_s: wall,
        result_file: path,
    })
}

/// Runs every experiment of a parsed configuration.
/// The seed is `options.seed`, else the config's, else [`DEFAULT_SEED`].
pub fn run_config(cfg: &RunConfig, options: &RunOptions) -> Result<Vec<ExperimentStatus>, RunError> {
    let seed = options.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let dir = options.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let statuses: Vec<ExperimentStatus> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(options.jobs).build().expect("thread pool");
        pool.install(|| cfg.experiments.par_iter().map(|e| execute(e, seed, &dir)).collect::<Result<_, _>>())?
    } else {
        cfg.experiments.iter().map(|e| execute(e, seed, &dir)).collect::<Result<_, _>>()?
    };
    let timings: Map<String, Value> = statuses.iter().map(|s| (s.label.clone(), json!(s.wall_time_s))).collect();
    let mut text = serde_json::to_string_pretty(&Value::Object(timings)).expect("timings serialize");
    text.push('\n');
    write_atomic(&dir.join("timings.json"), text.as_bytes())?;
    Ok(statuses)
}

pub fn run(config_path: &Path, options: &RunOptions) -> Result<Vec<ExperimentStatus>, RunError> {
    let cfg = config::load(config_path)?;
    run_config(&cfg, options)
}

pub fn exit_code(statuses: &[ExperimentStatus]) -> i32 {
    if statuses.iter().all(|s| s.pass) {
        EXIT_OK
    } else {
        EXIT_FAILED
    }
}

/// The `list-experiments` table.
pub fn experiment_table() -> String {
    let width = EXPERIMENTS.iter().map(|d| d.name.len()).max().unwrap_or(0);
    EXPERIMENTS.iter().map(|d| format!("{:width$}  {}\n", d.name, d.description)).collect()
}
