//! Command line, JSON config documents and their merge.
//!
//! Precedence, lowest first: built-in defaults, the `--config` document,
//! command-line flags.

use crate::error::CliError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "qsplab",
    version,
    about = "Experiments on the quadrature-sign parity bosonic qubit encoding"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out", global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Dense,
    Trajectory,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulated vs analytic initialization infidelity of displaced thermal states.
    InitFidelity(InitFidelityArgs),
    /// CPhase logic table, process fidelity and basis-index independence.
    GateCheck(GateCheckArgs),
    /// Runs a graph pattern and compares with the qubit-level oracle.
    MbqcRun(MbqcArgs),
    /// Sphere-averaged fidelity of dephased cat qubits, cat vs QSP readout.
    DephasingBench(DephasingArgs),
    /// Dephasing strength at which the X information drops below a level.
    ThresholdScan(ThresholdArgs),
    /// Truncation budget and per-level defects of the series parity gate.
    TruncationStudy(TruncationArgs),
    /// Homodyne samples of a displaced thermal state with sign readout.
    HomodyneSample(HomodyneArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::InitFidelity(_) => "init-fidelity",
            Command::GateCheck(_) => "gate-check",
            Command::MbqcRun(_) => "mbqc-run",
            Command::DephasingBench(_) => "dephasing-bench",
            Command::ThresholdScan(_) => "threshold-scan",
            Command::TruncationStudy(_) => "truncation-study",
            Command::HomodyneSample(_) => "homodyne-sample",
        }
    }

    /// Flags given on the command line, as a JSON object.
    pub fn flag_params(&self) -> Value {
        let v = match self {
            Command::InitFidelity(a) => serde_json::to_value(a),
            Command::GateCheck(a) => serde_json::to_value(a),
            Command::MbqcRun(a) => serde_json::to_value(a),
            Command::DephasingBench(a) => serde_json::to_value(a),
            Command::ThresholdScan(a) => serde_json::to_value(a),
            Command::TruncationStudy(a) => serde_json::to_value(a),
            Command::HomodyneSample(a) => serde_json::to_value(a),
        };
        v.expect("flag structs serialize")
    }
}

macro_rules! flag_struct {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, Args, Serialize)]
        pub struct $name {
            $(
                $(#[$fm])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

flag_struct!(InitFidelityArgs {
    /// Values: list `0,0.5`, range `a..b[:step]`, or `lin:a:b:n` / `log:a:b:n`.
    n_bar: String,
    alpha: String,
    /// Fixed cutoff instead of the per-state default policy.
    cutoff: usize,
});

flag_struct!(GateCheckArgs {
    alpha: f64,
    n_bar: String,
    cutoff: usize,
    /// `all` or `basis` (the `{0, +}` products only).
    inputs: String,
});

flag_struct!(MbqcArgs {
    /// `wire`, `cluster`, or a path to a pattern JSON file.
    pattern: String,
    /// Measurement angle of the built-in wire.
    theta: f64,
    alpha: f64,
    n_bar: f64,
    cutoff: usize,
    /// Dense backend: `sample`, `enumerate` or `postselect:<bits>`.
    selection: String,
});

flag_struct!(DephasingArgs {
    alpha: f64,
    cutoff: usize,
    kt_grid: String,
    theta_nodes: usize,
    phi_nodes: usize,
});

flag_struct!(ThresholdArgs {
    alpha: String,
    drop_level: f64,
});

flag_struct!(TruncationArgs {
    n_bar: f64,
    tol: f64,
    theta: f64,
    /// Displacement of the test state; defaults to `sqrt(3 (n_bar + 1/2))`.
    alpha: f64,
    cutoff: usize,
});

flag_struct!(HomodyneArgs {
    alpha: f64,
    n_bar: f64,
    /// Rotation angle in the X-Y plane before the homodyne readout.
    theta: f64,
    shots: usize,
    cutoff: usize,
});

/// The JSON config document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_trajectories() -> usize {
    qsplab_core::mbqc::DEFAULT_TRAJECTORIES
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed: 0,
            output_dir: default_output_dir(),
            backend: BackendKind::default(),
            trajectories: default_trajectories(),
            params: empty_object(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form, with the output directory left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Deserializes `params`, rejecting unknown keys, and writes the fully
    /// defaulted block back so the recorded config is complete.
    pub fn typed_params<T: DeserializeOwned + Serialize>(&mut self) -> Result<T, CliError> {
        let p: T = serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::Invalid(format!("{} params: {e}", self.experiment)))?;
        self.params = serde_json::to_value(&p).expect("params serialize");
        Ok(p)
    }
}

/// Builds the effective config from an optional document plus flags.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let name = cli.command.name();
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            if cfg.experiment != name {
                return Err(CliError::Invalid(format!(
                    "config is for '{}' but the subcommand is '{name}'",
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(name),
    };
    let c = &cli.common;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(b) = c.backend {
        cfg.backend = b;
    }
    if let Some(t) = c.trajectories {
        cfg.trajectories = t;
    }
    if cfg.trajectories == 0 {
        return Err(CliError::Invalid("trajectories must be positive".into()));
    }
    let Value::Object(flags) = cli.command.flag_params() else {
        unreachable!("flag structs are objects")
    };
    let Value::Object(params) = &mut cfg.params else {
        return Err(CliError::Invalid("params must be a JSON object".into()));
    };
    for (k, v) in flags {
        params.insert(k, v);
    }
    Ok(cfg)
}

/// A list of real values: a JSON array, one number, or a string spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    One(f64),
    Spec(String),
}

impl Values {
    pub fn list(v: &[f64]) -> Self {
        Values::List(v.to_vec())
    }

    /// Expands to concrete values.
    ///
    /// Accepted specs: `0,0.5,1`; `a..b` (step 0.5) or `a..b:step`, both ends
    /// included; `lin:a:b:n`; `log:a:b:n`.
    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        let bad = |s: &str| CliError::Invalid(format!("cannot parse value list '{s}'"));
        let num = |t: &str, s: &str| t.trim().parse::<f64>().map_err(|_| bad(s));
        let out = match self {
            Values::List(v) => v.clone(),
            Values::One(x) => vec![*x],
            Values::Spec(s) => {
                let t = s.trim();
                if let Some(rest) = t.strip_prefix("lin:").or_else(|| t.strip_prefix("log:")) {
                    let parts: Vec<&str> = rest.split(':').collect();
                    if parts.len() != 3 {
                        return Err(bad(s));
                    }
                    let (a, b) = (num(parts[0], s)?, num(parts[1], s)?);
                    let n: usize = parts[2].trim().parse().map_err(|_| bad(s))?;
                    if n == 0 {
                        return Err(bad(s));
                    }
                    if t.starts_with("log:") {
                        if !(a > 0.0 && b > 0.0) {
                            return Err(CliError::Invalid(format!(
                                "log grid needs positive ends: '{s}'"
                            )));
                        }
                        qsplab_core::noise::log_grid(a, b, n)
                    } else if n == 1 {
                        vec![a]
                    } else {
                        (0..n)
                            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                            .collect()
                    }
                } else if let Some((a, rest)) = t.split_once("..") {
                    let (b, step) = match rest.split_once(':') {
                        Some((b, st)) => (num(b, s)?, num(st, s)?),
                        None => (num(rest, s)?, 0.5),
                    };
                    let a = num(a, s)?;
                    if !(step > 0.0) || b < a {
                        return Err(bad(s));
                    }
                    let n = ((b - a) / step + 1e-9).floor() as usize;
                    (0..=n).map(|i| a + step * i as f64).collect()
                } else {
                    t.split(',').map(|x| num(x, s)).collect::<Result<_, _>>()?
                }
            }
        };
        if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Invalid(
                "value list is empty or not finite".into(),
            ));
        }
        Ok(out)
    }
}
