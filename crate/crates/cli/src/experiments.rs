//! The experiment runners. Each one turns a typed parameter block into a
//! [`Report`]; nothing here touches the filesystem except pattern loading.

use crate::config::{BackendKind, ExperimentConfig, Values};
use crate::error::CliError;
use crate::output::{Cell, Report, Table};
use qsplab_core::encoding::{
    logical_fidelity, logical_qubit, logical_state_ensemble, LogicalState,
};
use qsplab_core::fock::{conjugate, FockSpace, QGrid};
use qsplab_core::gates::{
    cphase_check, max_trace_distance, naive_parity_series, truncated_parity_gate,
    truncation_budget, CphaseCheck, LogicalPrep,
};
use qsplab_core::mbqc::{
    build_cluster, default_inputs, qubit_oracle, run_pattern, Backend, DenseSelection, GraphPattern,
};
use qsplab_core::measurement::{homodyne_samples_q, prob_plus_x, Basis};
use qsplab_core::noise::{
    fidelity_curves, threshold_scan, CatParams, Code, SphereQuadrature, DEFAULT_CAT_CUTOFF,
};
use qsplab_core::states::{
    displaced_thermal, init_infidelity_analytic, sample_coherent_ensemble, ThermalParams,
};
use qsplab_core::{Execution, QspError, RandomStream};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::FRAC_PI_4;

/// Runs the experiment named in `cfg`, completing `cfg.params` with defaults.
pub fn execute(cfg: &mut ExperimentConfig, exec: Execution) -> Result<Report, CliError> {
    match cfg.experiment.as_str() {
        "init-fidelity" => init_fidelity(cfg, exec),
        "gate-check" => gate_check(cfg),
        "mbqc-run" => mbqc_run(cfg, exec),
        "dephasing-bench" => dephasing_bench(cfg, exec),
        "threshold-scan" => threshold_scan_exp(cfg, exec),
        "truncation-study" => truncation_study(cfg),
        "homodyne-sample" => homodyne_sample(cfg),
        other => Err(CliError::Invalid(format!("unknown experiment '{other}'"))),
    }
}

fn space(d: usize) -> Result<FockSpace, CliError> {
    Ok(FockSpace::new(d)?)
}

fn expand(v: &mut Values) -> Result<Vec<f64>, CliError> {
    let out = v.expand()?;
    *v = Values::List(out.clone());
    Ok(out)
}

fn non_negative(name: &str, xs: &[f64]) -> Result<(), CliError> {
    match xs.iter().find(|x| **x < 0.0) {
        Some(x) => Err(CliError::Invalid(format!("{name} must be >= 0, got {x}"))),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------- init-fidelity

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitFidelityParams {
    #[serde(default = "InitFidelityParams::default_n_bar")]
    pub n_bar: Values,
    #[serde(default = "InitFidelityParams::default_alpha")]
    pub alpha: Values,
    #[serde(default)]
    pub cutoff: Option<usize>,
}

impl InitFidelityParams {
    fn default_n_bar() -> Values {
        Values::list(&[0.0, 0.5, 1.0, 2.0])
    }

    fn default_alpha() -> Values {
        Values::list(&[0.5, 1.0, 2.0, 3.0])
    }
}

fn init_fidelity(cfg: &mut ExperimentConfig, exec: Execution) -> Result<Report, CliError> {
    let mut p: InitFidelityParams = cfg.typed_params()?;
    let n_bars = expand(&mut p.n_bar)?;
    let alphas = expand(&mut p.alpha)?;
    non_negative("n_bar", &n_bars)?;
    cfg.params = serde_json::to_value(&p).expect("params serialize");
    let mut rng = RandomStream::new(cfg.seed);
    let mut table = Table::new(&[
        "n_bar",
        "alpha",
        "cutoff",
        "x_mean",
        "x_std_error",
        "infidelity_sim",
        "infidelity_analytic",
        "abs_diff",
        "x_squared_defect",
    ]);
    let mut worst = 0.0_f64;
    let mut worst_defect = 0.0_f64;
    for &n_bar in &n_bars {
        for &alpha in &alphas {
            let params = ThermalParams::new(n_bar, alpha);
            let d = p.cutoff.unwrap_or_else(|| params.default_cutoff());
            let s = space(d)?;
            let l = match cfg.backend {
                BackendKind::Dense => logical_qubit(&displaced_thermal(&params, s)?, 0)?,
                BackendKind::Trajectory => {
                    let ens =
                        sample_coherent_ensemble(&params, s, &mut rng, cfg.trajectories, exec)?;
                    logical_state_ensemble(&ens, &[0], exec)?
                }
            };
            let x = l.bloch()?[0];
            let se = l
                .diagnostics()
                .pauli_std_errors
                .as_ref()
                .map_or(0.0, |e| e[1]);
            let sim = 0.5 * (1.0 - x);
            let analytic = init_infidelity_analytic(n_bar, alpha);
            let diff = (sim - analytic).abs();
            let defect = l.diagnostics().x_squared_defect;
            worst = worst.max(diff);
            worst_defect = worst_defect.max(defect);
            table.push(vec![
                n_bar.into(),
                alpha.into(),
                d.into(),
                x.into(),
                se.into(),
                sim.into(),
                analytic.into(),
                diff.into(),
                defect.into(),
            ]);
        }
    }
    Ok(Report {
        table,
        summary: json!({
            "max_abs_diff": worst,
            "max_x_squared_defect": worst_defect,
        }),
    })
}

// ---------------------------------------------------------------- gate-check

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCheckParams {
    #[serde(default = "GateCheckParams::default_alpha")]
    pub alpha: f64,
    #[serde(default = "GateCheckParams::default_n_bar")]
    pub n_bar: Values,
    #[serde(default)]
    pub cutoff: Option<usize>,
    /// `all` (16 products, with a process fidelity) or `basis` (`{0, +}` products).
    #[serde(default = "GateCheckParams::default_inputs")]
    pub inputs: String,
}

impl GateCheckParams {
    fn default_inputs() -> String {
        "all".into()
    }

    fn default_alpha() -> f64 {
        3.0
    }

    fn default_n_bar() -> Values {
        Values::list(&[0.0, 0.5, 1.0])
    }
}

/// Smallest cutoff the gate check accepts.
pub const GATE_CHECK_MIN_CUTOFF: usize = 60;

/// Trace distances restricted to these inputs (the `{0, +}` products).
const BASIS_INPUTS: [&str; 4] = ["00", "0+", "+0", "++"];

fn restricted_distance(a: &CphaseCheck, b: &CphaseCheck, inputs: &[&str]) -> Result<f64, CliError> {
    let mut worst = 0.0_f64;
    for label in inputs {
        let (Some(x), Some(y)) = (a.trial(label), b.trial(label)) else {
            return Err(CliError::Invalid(format!("input {label} missing")));
        };
        worst = worst.max(x.logical_out.trace_distance(&y.logical_out)?);
    }
    Ok(worst)
}

fn gate_check(cfg: &mut ExperimentConfig) -> Result<Report, CliError> {
    let mut p: GateCheckParams = cfg.typed_params()?;
    let n_bars = expand(&mut p.n_bar)?;
    non_negative("n_bar", &n_bars)?;
    let needed = n_bars
        .iter()
        .map(|n| ThermalParams::new(*n, p.alpha).default_cutoff())
        .max()
        .unwrap_or(0)
        .max(GATE_CHECK_MIN_CUTOFF);
    let d = p.cutoff.unwrap_or(needed);
    cfg.params = serde_json::to_value(&p).expect("params serialize");
    let preps: &[LogicalPrep] = match p.inputs.as_str() {
        "all" => &LogicalPrep::ALL,
        "basis" => &[LogicalPrep::Zero, LogicalPrep::Plus],
        other => {
            return Err(CliError::Invalid(format!(
                "inputs must be 'all' or 'basis', got '{other}'"
            )))
        }
    };
    let s = space(d)?;
    let checks: Vec<CphaseCheck> = n_bars
        .iter()
        .map(|n| cphase_check(&ThermalParams::new(*n, p.alpha), s, preps))
        .collect::<Result<_, QspError>>()?;
    let first = &checks[0];
    let mut table = Table::new(&[
        "n_bar",
        "input",
        "ideal_fidelity",
        "trace_distance_vs_first",
    ]);
    for (n, c) in n_bars.iter().zip(&checks) {
        for t in &c.trials {
            let other = first.trial(&t.input).expect("same inputs");
            let td = t.logical_out.trace_distance(&other.logical_out)?;
            table.push(vec![
                (*n).into(),
                t.input.clone().into(),
                t.ideal_fidelity.into(),
                td.into(),
            ]);
        }
    }
    let mut per = Vec::new();
    for (n, c) in n_bars.iter().zip(&checks) {
        per.push(json!({
            "n_bar": n,
            "process_fidelity": c.process_fidelity,
            "min_ideal_fidelity": c.trials.iter().map(|t| t.ideal_fidelity).fold(f64::INFINITY, f64::min),
            "max_trace_distance_vs_first_basis_inputs": restricted_distance(c, first, &BASIS_INPUTS)?,
            "max_trace_distance_vs_first_all_inputs": max_trace_distance(c, first)?,
        }));
    }
    Ok(Report {
        table,
        summary: json!({ "alpha": p.alpha, "cutoff": d, "per_n_bar": per }),
    })
}

// ---------------------------------------------------------------- mbqc-run

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MbqcParams {
    #[serde(default = "MbqcParams::default_pattern")]
    pub pattern: String,
    #[serde(default = "MbqcParams::default_theta")]
    pub theta: f64,
    #[serde(default = "MbqcParams::default_alpha")]
    pub alpha: f64,
    #[serde(default = "MbqcParams::default_n_bar")]
    pub n_bar: f64,
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default = "MbqcParams::default_selection")]
    pub selection: String,
}

impl MbqcParams {
    fn default_pattern() -> String {
        "wire".into()
    }

    fn default_theta() -> f64 {
        FRAC_PI_4
    }

    fn default_alpha() -> f64 {
        3.0
    }

    fn default_n_bar() -> f64 {
        0.5
    }

    fn default_selection() -> String {
        "sample".into()
    }
}

fn parse_selection(s: &str) -> Result<DenseSelection, CliError> {
    match s {
        "sample" => Ok(DenseSelection::Sample),
        "enumerate" => Ok(DenseSelection::Enumerate),
        _ => {
            let bits = s
                .strip_prefix("postselect:")
                .ok_or_else(|| CliError::Invalid(format!("unknown selection '{s}'")))?;
            bits.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(CliError::Invalid(format!("bad outcome bits '{bits}'"))),
                })
                .collect::<Result<_, _>>()
                .map(DenseSelection::PostSelect)
        }
    }
}

fn load_pattern(name: &str, theta: f64) -> Result<GraphPattern, CliError> {
    match name {
        "wire" => Ok(GraphPattern::wire(theta)),
        "cluster" => Ok(GraphPattern::cluster_pair()),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Invalid(format!("cannot read pattern {path}: {e}")))?;
            Ok(GraphPattern::from_json(&text)?)
        }
    }
}

fn mbqc_run(cfg: &mut ExperimentConfig, exec: Execution) -> Result<Report, CliError> {
    let p: MbqcParams = cfg.typed_params()?;
    let pattern = load_pattern(&p.pattern, p.theta)?;
    let selection = parse_selection(&p.selection)?;
    let params = ThermalParams::new(p.n_bar, p.alpha);
    params.validate()?;
    let d = p.cutoff.unwrap_or_else(|| params.default_cutoff());
    let s = space(d)?;
    let backend = match cfg.backend {
        BackendKind::Dense => Backend::Dense,
        BackendKind::Trajectory => Backend::Trajectory {
            trajectories: cfg.trajectories,
        },
    };
    let mut rng = RandomStream::new(cfg.seed);
    let state = build_cluster(&pattern, &params, s, backend, &mut rng)?;
    let run = run_pattern(&state, &pattern, &selection, &mut rng, exec)?;
    let oracle = qubit_oracle(&pattern, &default_inputs(&pattern))?;
    // a single post-selected branch is compared with the same oracle branch
    let reference: LogicalState = match (&selection, cfg.backend) {
        (DenseSelection::PostSelect(bits), BackendKind::Dense) => oracle
            .branch(bits)
            .ok_or_else(|| CliError::Invalid("post-selected branch has zero probability".into()))?
            .corrected()?,
        _ => oracle.corrected.clone(),
    };
    let fidelity = logical_fidelity(&run.output, &reference)?;

    let mut table = Table::new(&[
        "shot_id",
        "mode",
        "basis",
        "theta",
        "raw_x",
        "logical_bit",
        "weight",
    ]);
    let steps = pattern.schedule.len();
    let mut plus = vec![0.0; steps];
    let total_weight: f64 = run.shots.iter().map(|s| s.weight).sum();
    for (i, shot) in run.shots.iter().enumerate() {
        for (k, r) in shot.records.iter().enumerate() {
            if r.logical_bit > 0 {
                plus[k] += shot.weight;
            }
            table.push(vec![
                i.into(),
                r.mode.into(),
                r.basis.label().into(),
                r.basis.theta().into(),
                r.raw_x.map_or(Cell::S(String::new()), Cell::F),
                (r.logical_bit as i64).into(),
                shot.weight.into(),
            ]);
        }
    }
    let plus_fraction: Vec<f64> = plus.iter().map(|w| w / total_weight).collect();
    Ok(Report {
        table,
        summary: json!({
            "pattern": pattern,
            "cutoff": d,
            "shots": run.shots.len(),
            "output": run.output,
            "oracle": reference,
            "oracle_fidelity": fidelity,
            "plus_fraction": plus_fraction,
        }),
    })
}

// ---------------------------------------------------------------- dephasing-bench

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingParams {
    #[serde(default = "DephasingParams::default_alpha")]
    pub alpha: f64,
    #[serde(default = "DephasingParams::default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "DephasingParams::default_grid")]
    pub kt_grid: Values,
    #[serde(default = "DephasingParams::default_nodes")]
    pub theta_nodes: usize,
    #[serde(default = "DephasingParams::default_nodes")]
    pub phi_nodes: usize,
}

impl DephasingParams {
    fn default_alpha() -> f64 {
        2.0
    }

    fn default_cutoff() -> usize {
        DEFAULT_CAT_CUTOFF
    }

    fn default_grid() -> Values {
        Values::Spec("log:0.01:2:25".into())
    }

    fn default_nodes() -> usize {
        SphereQuadrature::default().theta_nodes
    }
}

/// Dephasing strength at which the QSP average is compared with its asymptote.
pub const ASYMPTOTE_KT: f64 = 50.0;

fn dephasing_bench(cfg: &mut ExperimentConfig, exec: Execution) -> Result<Report, CliError> {
    let mut p: DephasingParams = cfg.typed_params()?;
    let grid = expand(&mut p.kt_grid)?;
    non_negative("kt_grid", &grid)?;
    cfg.params = serde_json::to_value(&p).expect("params serialize");
    let cat = CatParams::new(p.alpha, p.cutoff)?;
    let quad = SphereQuadrature {
        theta_nodes: p.theta_nodes,
        phi_nodes: p.phi_nodes,
    };
    let (cs, qsp) = fidelity_curves(&grid, &cat, quad, exec)?;
    let mut table = Table::new(&["kappa_t", "f_avg_cs", "f_avg_qsp", "quad_error"]);
    for i in 0..grid.len() {
        table.push(vec![
            grid[i].into(),
            cs.fidelity[i].into(),
            qsp.fidelity[i].into(),
            cs.quad_error[i].max(qsp.quad_error[i]).into(),
        ]);
    }
    let ends = fidelity_curves(&[0.0, ASYMPTOTE_KT], &cat, quad, exec)?;
    Ok(Report {
        table,
        summary: json!({
            "alpha": p.alpha,
            "cutoff": p.cutoff,
            "theta_nodes": p.theta_nodes,
            "phi_nodes": p.phi_nodes,
            "cat_tail": cat.tail(),
            "f_avg_cs_at_zero": ends.0.fidelity[0],
            "f_avg_qsp_at_zero": ends.1.fidelity[0],
            "f_avg_qsp_at_asymptote": ends.1.fidelity[1],
            "asymptote_kappa_t": ASYMPTOTE_KT,
        }),
    })
}

// ---------------------------------------------------------------- threshold-scan

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    #[serde(default = "ThresholdParams::default_alpha")]
    pub alpha: Values,
    #[serde(default = "ThresholdParams::default_drop")]
    pub drop_level: f64,
}

impl ThresholdParams {
    fn default_alpha() -> Values {
        Values::list(&[1.5, 2.0, 3.0])
    }

    fn default_drop() -> f64 {
        0.9
    }
}

fn threshold_scan_exp(cfg: &mut ExperimentConfig, exec: Execution) -> Result<Report, CliError> {
    let mut p: ThresholdParams = cfg.typed_params()?;
    let alphas = expand(&mut p.alpha)?;
    cfg.params = serde_json::to_value(&p).expect("params serialize");
    let jobs: Vec<(f64, Code)> = alphas
        .iter()
        .flat_map(|a| [(*a, Code::Cs), (*a, Code::Qsp)])
        .collect();
    let drop = p.drop_level;
    let found = qsplab_core::par::try_map_indexed(exec, jobs.len(), |i| {
        let (alpha, code) = jobs[i];
        let cat = CatParams::with_default_cutoff(alpha)?;
        threshold_scan(code, &cat, drop)
    })?;
    let mut table = Table::new(&[
        "alpha",
        "code",
        "kappa_t_star",
        "kappa_t_star_alpha_sq",
        "bracket",
    ]);
    for t in &found {
        table.push(vec![
            t.alpha.into(),
            t.code.label().into(),
            t.kappa_t.into(),
            (t.kappa_t * t.alpha * t.alpha).into(),
            t.bracket.into(),
        ]);
    }
    let spread = |code: Code, scaled: bool| {
        let v: Vec<f64> = found
            .iter()
            .filter(|t| t.code == code)
            .map(|t| {
                if scaled {
                    t.kappa_t * t.alpha * t.alpha
                } else {
                    t.kappa_t
                }
            })
            .collect();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        (max, min)
    };
    let (cs_max, cs_min) = spread(Code::Cs, true);
    let (q_max, q_min) = spread(Code::Qsp, false);
    Ok(Report {
        table,
        summary: json!({
            "drop_level": drop,
            "cs_kappa_t_alpha_sq_ratio": cs_max / cs_min,
            "qsp_kappa_t_relative_spread": (q_max - q_min) / q_min,
        }),
    })
}

// ---------------------------------------------------------------- truncation-study

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationParams {
    #[serde(default = "TruncationParams::default_n_bar")]
    pub n_bar: f64,
    #[serde(default = "TruncationParams::default_tol")]
    pub tol: f64,
    #[serde(default = "TruncationParams::default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub cutoff: Option<usize>,
}

impl TruncationParams {
    fn default_n_bar() -> f64 {
        0.5
    }

    fn default_tol() -> f64 {
        0.01
    }

    fn default_theta() -> f64 {
        FRAC_PI_4
    }
}

/// Displacement of the truncation test state: `|alpha|^2 = 3 (n_bar + 1/2)`.
pub fn truncation_alpha(n_bar: f64) -> f64 {
    (3.0 * (n_bar + 0.5)).sqrt()
}

fn truncation_study(cfg: &mut ExperimentConfig) -> Result<Report, CliError> {
    let mut p: TruncationParams = cfg.typed_params()?;
    let budget = truncation_budget(p.n_bar, p.tol)?;
    let alpha = *p.alpha.get_or_insert_with(|| truncation_alpha(p.n_bar));
    let params = ThermalParams::new(p.n_bar, alpha);
    let d = *p
        .cutoff
        .get_or_insert_with(|| params.default_cutoff().max(budget.r_max));
    cfg.params = serde_json::to_value(&p).expect("params serialize");
    let rho = displaced_thermal(&params, space(d)?)?;
    let pops = rho.populations(0)?;
    let (_, report) = truncated_parity_gate(&budget, p.theta, rho.space(), &pops)?;
    let mut table = Table::new(&[
        "n",
        "population",
        "defect",
        "naive_defect",
        "weighted_error",
    ]);
    for r in &report.rows {
        let exact = if r.n % 2 == 0 { 1.0 } else { -1.0 };
        let naive = (naive_parity_series(r.n, budget.k_max) - exact).norm();
        table.push(vec![
            r.n.into(),
            r.population.into(),
            r.defect.into(),
            naive.into(),
            r.weighted_error.into(),
        ]);
    }
    Ok(Report {
        table,
        summary: json!({
            "budget": budget,
            "alpha": alpha,
            "cutoff": d,
            "theta": p.theta,
            "weighted_gate_error": report.weighted_gate_error,
            "max_series_error": report.max_series_error,
        }),
    })
}

// ---------------------------------------------------------------- homodyne-sample

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneParams {
    #[serde(default = "HomodyneParams::default_alpha")]
    pub alpha: f64,
    #[serde(default = "HomodyneParams::default_n_bar")]
    pub n_bar: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "HomodyneParams::default_shots")]
    pub shots: usize,
    #[serde(default)]
    pub cutoff: Option<usize>,
}

impl HomodyneParams {
    fn default_alpha() -> f64 {
        1.0
    }

    fn default_n_bar() -> f64 {
        0.5
    }

    fn default_shots() -> usize {
        1000
    }
}

fn homodyne_sample(cfg: &mut ExperimentConfig) -> Result<Report, CliError> {
    let p: HomodyneParams = cfg.typed_params()?;
    if p.shots == 0 {
        return Err(CliError::Invalid("shots must be positive".into()));
    }
    let params = ThermalParams::new(p.n_bar, p.alpha);
    params.validate()?;
    let d = p.cutoff.unwrap_or_else(|| params.default_cutoff());
    let s = space(d)?;
    let mut rho = displaced_thermal(&params, s)?;
    if p.theta != 0.0 {
        rho = conjugate(&qsplab_core::gates::parity_rotation(p.theta / 2.0, s), &rho)?;
    }
    let p_plus = prob_plus_x(&rho, 0)?;
    let mut rng = RandomStream::new(cfg.seed);
    let xs = homodyne_samples_q(&rho, 0, &mut rng, &QGrid::default_for(s), p.shots)?;
    let basis = if p.theta == 0.0 {
        Basis::X
    } else {
        Basis::XY(p.theta)
    };
    let mut table = Table::new(&[
        "shot_id",
        "mode",
        "basis",
        "theta",
        "raw_x",
        "logical_bit",
        "weight",
    ]);
    let mut n_plus = 0usize;
    for (i, x) in xs.iter().enumerate() {
        let bit: i64 = if *x >= 0.0 { 1 } else { -1 };
        n_plus += (bit > 0) as usize;
        let w = if bit > 0 { p_plus } else { 1.0 - p_plus };
        table.push(vec![
            i.into(),
            0usize.into(),
            basis.label().into(),
            p.theta.into(),
            (*x).into(),
            bit.into(),
            w.into(),
        ]);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(Report {
        table,
        summary: json!({
            "cutoff": d,
            "prob_plus": p_plus,
            "sampled_plus_fraction": n_plus as f64 / xs.len() as f64,
            "mean_x": mean,
        }),
    })
}
