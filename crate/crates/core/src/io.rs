//! System files in, reports out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::AnalysisConfig;
use crate::expr::ExprAst;
use crate::field::{CompactInterval, ExprMatrix, DEFAULT_GRID};
use crate::synthesis::{ControlSchedule, SteeringReport};
use crate::system::EnsembleSystem;
use crate::verdict::Verdict;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: {message} (offset {offset})")]
    Expression { pointer: String, offset: usize, message: String },
}

impl LoadError {
    fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn pointer(&self) -> Option<&str> {
        match self {
            Self::Schema { pointer, .. } | Self::Expression { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

/// The parsed contents of a system file, before sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub parameter: String,
    pub interval: [f64; 2],
    pub grid: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<String>>,
    #[serde(rename = "xF", default, skip_serializing_if = "Option::is_none")]
    pub xf: Option<Vec<String>>,
    pub config: AnalysisConfig,
}

/// A validated, sampled system together with its analysis settings.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub spec: SystemSpec,
    pub system: EnsembleSystem<f64>,
    pub config: AnalysisConfig,
    /// SHA-256 of the raw file bytes, hex.
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json_error(e: serde_json::Error) -> LoadError {
    LoadError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn read_json(path: &Path) -> Result<(Value, Vec<u8>), LoadError> {
    let bytes = std::fs::read(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let value = serde_json::from_slice(&bytes).map_err(json_error)?;
    Ok((value, bytes))
}

fn object<'a>(v: &'a Value, pointer: &str) -> Result<&'a Map<String, Value>, LoadError> {
    v.as_object().ok_or_else(|| LoadError::schema(pointer, "expected an object"))
}

fn reject_unknown(obj: &Map<String, Value>, pointer: &str, known: &[&str]) -> Result<(), LoadError> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(LoadError::schema(format!("{pointer}/{k}"), "unknown key")),
        None => Ok(()),
    }
}

fn expr_string(v: &Value, pointer: &str) -> Result<String, LoadError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(LoadError::schema(pointer, "expected an expression string")),
    }
}

fn check_expr(text: &str, param: &str, pointer: &str) -> Result<(), LoadError> {
    ExprAst::parse(text, param)
        .map(|_| ())
        .map_err(|e| LoadError::Expression {
            pointer: pointer.to_string(),
            offset: e.offset(),
            message: e.to_string(),
        })
}

fn matrix(v: &Value, pointer: &str, param: &str) -> Result<Vec<Vec<String>>, LoadError> {
    let rows = v
        .as_array()
        .ok_or_else(|| LoadError::schema(pointer, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(LoadError::schema(pointer, "matrix has no rows"));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{pointer}/{i}");
        let cells = row.as_array().ok_or_else(|| LoadError::schema(&rp, "expected an array"))?;
        let mut r = Vec::with_capacity(cells.len());
        for (j, c) in cells.iter().enumerate() {
            let cp = format!("{rp}/{j}");
            let s = expr_string(c, &cp)?;
            check_expr(&s, param, &cp)?;
            r.push(s);
        }
        out.push(r);
    }
    let cols = out[0].len();
    if cols == 0 || out.iter().any(|r| r.len() != cols) {
        return Err(LoadError::schema(pointer, "rows must be non-empty and of equal length"));
    }
    Ok(out)
}

fn vector(v: &Value, pointer: &str, param: &str, n: usize) -> Result<Vec<String>, LoadError> {
    let items = v
        .as_array()
        .ok_or_else(|| LoadError::schema(pointer, "expected an array of expressions"))?;
    if items.len() != n {
        return Err(LoadError::schema(
            pointer,
            format!("expected {n} entries, got {}", items.len()),
        ));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let cp = format!("{pointer}/{i}");
            let s = expr_string(c, &cp)?;
            check_expr(&s, param, &cp)?;
            Ok(s)
        })
        .collect()
}

fn interval_end(v: &Value, pointer: &str) -> Result<f64, LoadError> {
    let x = match v {
        Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
        Value::String(s) => {
            let e = ExprAst::parse(s, "beta").map_err(|e| LoadError::Expression {
                pointer: pointer.to_string(),
                offset: e.offset(),
                message: e.to_string(),
            })?;
            if !e.is_constant() {
                return Err(LoadError::schema(pointer, "interval endpoint must be constant"));
            }
            e.evaluate::<f64>(0.0)
                .map_err(|e| LoadError::schema(pointer, e.to_string()))?
        }
        _ => return Err(LoadError::schema(pointer, "expected a number or constant expression")),
    };
    if !x.is_finite() {
        return Err(LoadError::schema(pointer, "endpoint must be finite"));
    }
    Ok(x)
}

fn positive(v: &Value, pointer: &str) -> Result<f64, LoadError> {
    match v.as_f64() {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(LoadError::schema(pointer, "expected a positive finite number")),
    }
}

fn count(v: &Value, pointer: &str, min: u64) -> Result<usize, LoadError> {
    match v.as_u64() {
        Some(x) if x >= min => Ok(x as usize),
        _ => Err(LoadError::schema(pointer, format!("expected an integer >= {min}"))),
    }
}

fn tolerances(v: &Value, cfg: &mut AnalysisConfig) -> Result<(), LoadError> {
    let p = "/tolerances";
    let obj = object(v, p)?;
    for (k, v) in obj {
        let kp = format!("{p}/{k}");
        match k.as_str() {
            "eta_samples" => cfg.eta_samples = count(v, &kp, 1)?,
            "eta_per_channel" => cfg.eta_per_channel = count(v, &kp, 1)?,
            "seed" => cfg.seed = v.as_u64().ok_or_else(|| LoadError::schema(&kp, "expected an unsigned integer"))?,
            "tol_rank" => cfg.tol_rank = positive(v, &kp)?,
            "tol_mono" => cfg.tol_mono = positive(v, &kp)?,
            "tol_merge" => cfg.tol_merge = Some(positive(v, &kp)?),
            "tol_val" => cfg.tol_val = positive(v, &kp)?,
            "tol_vanish" => cfg.tol_vanish = positive(v, &kp)?,
            "cond_max" => cfg.cond_max = positive(v, &kp)?,
            "tol_recon" => cfg.tol_recon = positive(v, &kp)?,
            "stability_check" => {
                cfg.stability_check = v.as_bool().ok_or_else(|| LoadError::schema(&kp, "expected a boolean"))?
            }
            _ => return Err(LoadError::schema(kp, "unknown tolerance")),
        }
    }
    Ok(())
}

/// Validates a parsed system file.
pub fn parse_spec(v: &Value) -> Result<SystemSpec, LoadError> {
    let root = object(v, "")?;
    reject_unknown(root, "", &["parameter", "A", "B", "x0", "xF", "tolerances"])?;

    let pv = root.get("parameter").ok_or_else(|| LoadError::schema("/parameter", "missing"))?;
    let pobj = object(pv, "/parameter")?;
    reject_unknown(pobj, "/parameter", &["name", "interval", "grid"])?;
    let name = match pobj.get("name") {
        None => "beta".to_string(),
        Some(Value::String(s)) if is_identifier(s) => s.clone(),
        Some(_) => return Err(LoadError::schema("/parameter/name", "expected an identifier")),
    };
    let iv = pobj
        .get("interval")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| LoadError::schema("/parameter/interval", "expected [lo, hi]"))?;
    let lo = interval_end(&iv[0], "/parameter/interval/0")?;
    let hi = interval_end(&iv[1], "/parameter/interval/1")?;
    if lo > hi {
        return Err(LoadError::schema("/parameter/interval", "lo must not exceed hi"));
    }
    let grid = match pobj.get("grid") {
        None => DEFAULT_GRID,
        Some(g) => count(g, "/parameter/grid", 2)?,
    };

    let a = matrix(root.get("A").ok_or_else(|| LoadError::schema("/A", "missing"))?, "/A", &name)?;
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(LoadError::schema("/A", format!("A must be square, got {}x{}", n, a[0].len())));
    }
    let b = matrix(root.get("B").ok_or_else(|| LoadError::schema("/B", "missing"))?, "/B", &name)?;
    if b.len() != n {
        return Err(LoadError::schema("/B", format!("B must have {n} rows, got {}", b.len())));
    }
    let x0 = root.get("x0").map(|v| vector(v, "/x0", &name, n)).transpose()?;
    let xf = root.get("xF").map(|v| vector(v, "/xF", &name, n)).transpose()?;

    let mut config = AnalysisConfig {
        grid,
        ..AnalysisConfig::default()
    };
    if let Some(t) = root.get("tolerances") {
        tolerances(t, &mut config)?;
    }
    Ok(SystemSpec {
        parameter: name,
        interval: [lo, hi],
        grid,
        a,
        b,
        x0,
        xf,
        config,
    })
}

fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

impl SystemSpec {
    /// Samples the system on `grid` points.
    pub fn build(&self, grid: usize) -> Result<EnsembleSystem<f64>, LoadError> {
        let column = |v: &Vec<String>| v.iter().map(|s| vec![s.clone()]).collect::<Vec<_>>();
        let targets = |v: &Option<Vec<String>>| {
            v.as_ref()
                .map(|v| ExprMatrix::parse(&column(v), &self.parameter).map_err(|(_, _, e)| e.to_string()))
                .transpose()
        };
        let iv = CompactInterval::new(self.interval[0], self.interval[1])
            .map_err(|e| LoadError::schema("/parameter/interval", e.to_string()))?;
        let ae = ExprMatrix::parse(&self.a, &self.parameter).map_err(|(i, j, e)| LoadError::Expression {
            pointer: format!("/A/{i}/{j}"),
            offset: e.offset(),
            message: e.to_string(),
        })?;
        let be = ExprMatrix::parse(&self.b, &self.parameter).map_err(|(i, j, e)| LoadError::Expression {
            pointer: format!("/B/{i}/{j}"),
            offset: e.offset(),
            message: e.to_string(),
        })?;
        let sys = EnsembleSystem::new(self.parameter.clone(), iv, grid, ae, be).map_err(|e| {
            let ptr = match &e {
                crate::system::SystemError::DriftShape { .. } => "/A",
                crate::system::SystemError::Field { name, .. }
                    if *name == "A" => {
                        "/A"
                    }
                _ => "/B",
            };
            LoadError::schema(ptr, e.to_string())
        })?;
        let x0 = targets(&self.x0).map_err(|m| LoadError::schema("/x0", m))?;
        let xf = targets(&self.xf).map_err(|m| LoadError::schema("/xF", m))?;
        sys.with_targets(x0, xf).map_err(|e| {
            let ptr = match &e {
                crate::system::SystemError::TargetShape { name, .. } | crate::system::SystemError::Field { name, .. } => {
                    format!("/{name}")
                }
                _ => String::new(),
            };
            LoadError::schema(ptr, e.to_string())
        })
    }
}

pub fn load_system_value(v: &Value, raw: &[u8]) -> Result<LoadedSystem, LoadError> {
    let spec = parse_spec(v)?;
    let system = spec.build(spec.grid)?;
    Ok(LoadedSystem {
        config: spec.config.clone(),
        spec,
        system,
        digest: digest(raw),
    })
}

pub fn load_system(path: impl AsRef<Path>) -> Result<LoadedSystem, LoadError> {
    let (v, raw) = read_json(path.as_ref())?;
    load_system_value(&v, &raw)
}

/// Accepts a bare schedule or a report carrying one under `/synthesis/schedule`.
pub fn load_schedule(path: impl AsRef<Path>) -> Result<ControlSchedule<f64>, LoadError> {
    let (v, _) = read_json(path.as_ref())?;
    let (node, pointer) = match v.pointer("/synthesis/schedule") {
        Some(s) => (s.clone(), "/synthesis/schedule"),
        None => (v, ""),
    };
    let raw: ControlSchedule<f64> =
        serde_json::from_value(node).map_err(|e| LoadError::schema(pointer, e.to_string()))?;
    ControlSchedule::new(raw.horizon, raw.values).map_err(|e| LoadError::schema(pointer, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub parameter: String,
    pub interval: [f64; 2],
    pub grid: usize,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<String>>,
}

impl SystemSummary {
    pub fn of(spec: &SystemSpec, grid: usize) -> Self {
        Self {
            parameter: spec.parameter.clone(),
            interval: spec.interval,
            grid,
            n: spec.a.len(),
            m: spec.b[0].len(),
            a: spec.a.clone(),
            b: spec.b.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSection {
    pub schedule: ControlSchedule<f64>,
    pub report: SteeringReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub horizon: f64,
    pub steps_per_segment: usize,
    pub grid: Vec<f64>,
    /// `x(T, β_g)` per grid point.
    pub final_state: Vec<Vec<f64>>,
    /// Uniform distance to `xF`, when the system has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool_version: String,
    pub command: String,
    pub input_digest: String,
    pub system: SystemSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
}

impl ReportFile {
    pub fn new(command: &str, loaded: &LoadedSystem) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            input_digest: loaded.digest.clone(),
            system: SystemSummary::of(&loaded.spec, loaded.system.grid()),
            verdict: None,
            synthesis: None,
            simulation: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        serde_json::from_str(text).map_err(json_error)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), LoadError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| LoadError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
