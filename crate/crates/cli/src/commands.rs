use crate::fixtures;
use crate::report::{digest, Counts, RunReport};
use crate::suite::{run_suite, Scope, SuiteParams};
use boxcast::assemblages::{
    is_unsteerable, is_urns, steering_ub_lhs, steering_ub_urns, Assemblage, FeasibilityConfig, FeasibilityStatus,
    FwConfig,
};
use boxcast::behaviors::Behavior;
use boxcast::divergence::{relative_entropy_nl, ElrConfig};
use boxcast::polytopes::{local_deterministic_vertices, lrns_vertices_broadcast_222, membership, VertexCatalogue};
use boxcast::Error;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CheckKind {
    Ns,
    Local,
    Lrns,
    Unsteerable,
    Urns,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Check { path: PathBuf, kind: CheckKind },
    Elr { path: PathBuf, witness: Option<PathBuf> },
    Steering { path: PathBuf, witness: Option<PathBuf> },
    VerifySuite { scope: Scope, quick: bool, inject: Option<String> },
    GenFixtures { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Options {
    pub seed: u64,
    pub tol: Option<f64>,
    pub iters: Option<usize>,
    pub timing: bool,
}

#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
}

/// A command that produced no report.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid input (exit 2).
    Input(String),
    /// A solver or optimizer gave up (exit 3).
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Solver { .. } | Error::Optimization { .. } | Error::Numeric(_) | Error::Conditioning { .. } => {
                Failure::Numeric(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, Failure> {
    serde_json::from_slice(bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn to_value(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn execute(cmd: &Command, opts: &Options) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let (name, digest_of, results, counts, exit_code) = match cmd {
        Command::Check { path, kind } => {
            let bytes = read(path)?;
            let (results, inside) = check(path, &bytes, *kind, opts)?;
            ("check", digest(&bytes), results, None, if inside { 0 } else { 1 })
        }
        Command::Elr { path, witness } => {
            let bytes = read(path)?;
            ("elr", digest(&bytes), elr(path, &bytes, witness.as_deref(), opts)?, None, 0)
        }
        Command::Steering { path, witness } => {
            let bytes = read(path)?;
            ("steering", digest(&bytes), steering(path, &bytes, witness.as_deref(), opts)?, None, 0)
        }
        Command::VerifySuite { scope, quick, inject } => {
            let params = SuiteParams { seed: opts.seed, quick: *quick, inject: inject.clone() };
            let checks = run_suite(*scope, &params);
            let passed = checks.iter().filter(|c| c.passed).count();
            let counts = Counts { passed, failed: checks.len() - passed };
            let inputs = json!({ "scope": scope, "params": params });
            let results = json!({ "scope": scope, "quick": quick, "checks": checks });
            let code = if counts.failed == 0 { 0 } else { 1 };
            ("verify-suite", digest(inputs.to_string().as_bytes()), results, Some(counts), code)
        }
        Command::GenFixtures { dir } => {
            let written = fixtures::write_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
            let results = json!({ "dir": dir.display().to_string(), "files": written });
            ("gen-fixtures", digest(dir.display().to_string().as_bytes()), results, None, 0)
        }
    };
    let report = RunReport {
        command: name.to_string(),
        inputs_digest: digest_of,
        seed: opts.seed,
        results,
        counts,
        wall_time_s: opts.timing.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(Outcome { report, exit_code })
}

fn box_catalogue(b: &Behavior<f64>) -> Result<VertexCatalogue<f64>, Failure> {
    let lrns = lrns_vertices_broadcast_222::<f64>();
    if b.scenario() == lrns.scenario() {
        Ok(lrns)
    } else {
        Ok(local_deterministic_vertices(b.scenario())?)
    }
}

fn feasibility(opts: &Options) -> FeasibilityConfig {
    let d = FeasibilityConfig::default();
    FeasibilityConfig { max_iters: opts.iters.unwrap_or(d.max_iters), accept_tol: opts.tol.unwrap_or(d.accept_tol), ..d }
}

fn check(path: &Path, bytes: &[u8], kind: CheckKind, opts: &Options) -> Result<(Value, bool), Failure> {
    match kind {
        CheckKind::Ns | CheckKind::Local | CheckKind::Lrns => {
            let b: Behavior<f64> = parse(path, bytes)?;
            if kind == CheckKind::Ns {
                let r = b.is_fully_nonsignalling();
                let inside = r.max_violation <= opts.tol.unwrap_or(1e-9);
                return Ok((json!({ "kind": "ns", "inside": inside, "max_violation": r.max_violation }), inside));
            }
            let cat = if kind == CheckKind::Local {
                local_deterministic_vertices(b.scenario())?
            } else {
                let lrns = lrns_vertices_broadcast_222::<f64>();
                if b.scenario() != lrns.scenario() {
                    return Err(Failure::Input("LR_ns membership needs the (2,2,2) broadcast scenario".into()));
                }
                lrns
            };
            let m = membership(&b, &cat, opts.tol.unwrap_or(1e-9))?;
            let residual = match &m.weights {
                Some(w) => Some(cat.combine(w)?.max_abs_diff(&b)?),
                None => None,
            };
            let kind = if kind == CheckKind::Local { "local" } else { "lrns" };
            let results = json!({
                "kind": kind,
                "inside": m.inside,
                "catalogue_size": cat.len(),
                "margin": m.margin,
                "residual": residual,
                "certificate": m.weights,
                "functional": m.separation,
            });
            Ok((results, m.inside))
        }
        CheckKind::Unsteerable | CheckKind::Urns => {
            let a: Assemblage<f64> = parse(path, bytes)?;
            let cfg = feasibility(opts);
            let r = if kind == CheckKind::Urns { is_urns(&a, &cfg)? } else { is_unsteerable(&a, &cfg)? };
            let inside = r.status == FeasibilityStatus::ModelFound;
            let kind = if kind == CheckKind::Urns { "urns" } else { "unsteerable" };
            let results = json!({
                "kind": kind,
                "inside": inside,
                "status": r.status,
                "residual": r.residual,
                "iterations": r.iterations,
                "corroborated": r.corroborated,
                "violation": r.functional.as_ref().map(|f| f.evaluate(a.elements()) - f.bound),
                "certificate": r.model,
                "functional": r.functional,
            });
            Ok((results, inside))
        }
    }
}

fn elr(path: &Path, bytes: &[u8], witness: Option<&Path>, opts: &Options) -> Result<Value, Failure> {
    let b: Behavior<f64> = parse(path, bytes)?;
    let cat = box_catalogue(&b)?;
    let d = ElrConfig::default();
    let cfg = ElrConfig {
        seed: Some(opts.seed),
        iterations: opts.iters.unwrap_or(d.iterations),
        gap_tol: opts.tol.unwrap_or(d.gap_tol),
        ..d
    };
    let r = relative_entropy_nl(&b, &cat, &cfg)?;
    if let Some(w) = witness {
        write_json(w, &to_value(&r.witness))?;
    }
    Ok(json!({
        "value": r.value,
        "setting": r.setting,
        "lower_bound": r.gap_certificate,
        "converged": r.converged,
        "catalogue_size": cat.len(),
        "witness_weights": r.weights,
        "ladder": r.ladder,
    }))
}

fn steering(path: &Path, bytes: &[u8], witness: Option<&Path>, opts: &Options) -> Result<Value, Failure> {
    let a: Assemblage<f64> = parse(path, bytes)?;
    let d = FwConfig::default();
    let cfg = FwConfig { seed: Some(opts.seed), iterations: opts.iters.unwrap_or(d.iterations), ..d };
    let broadcast = a.wings().is_some();
    let r = if broadcast { steering_ub_urns(&a, &cfg)? } else { steering_ub_lhs(&a, &cfg)? };
    if let Some(w) = witness {
        write_json(w, &r.witness_assemblage(&a)?.to_json())?;
    }
    Ok(json!({
        "upper_bound": r.upper_bound,
        "free_set": if broadcast { "urns" } else { "lhs" },
        "per_input": r.per_input,
        "fw_gap": r.fw_gap,
        "iterations": r.iterations,
    }))
}
