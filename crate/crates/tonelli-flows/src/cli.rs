//! Scenario-driven frontend: TOML configuration, experiment orchestration,
//! and machine-readable artifacts (`summary.json`, `series.csv`).
//!
//! Exit codes: 0 — experiment ran and all asserted invariants passed;
//! 1 — experiment failure (non-convergence, blow-up, violated check);
//! 2 — configuration or I/O error.

use crate::flow::{self, FlowState, IntegrateOptions};
use crate::group::GroupElement;
use crate::lagrangian::{self, LagrangianSpec};
use crate::mane::{self, TopoClass};
use crate::metric::InertiaOperator;
use crate::spectral;
use crate::variational::{self, SolverOptions};
use crate::AlgebraVector;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A scalar or a list — group elements and algebra vectors are scalars on
/// U(1), 3-vectors on SO(3), and coefficient lists on Diff(S¹).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeffs {
    Scalar(f64),
    List(Vec<f64>),
}

impl Default for Coeffs {
    fn default() -> Coeffs {
        Coeffs::Scalar(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// "u1" | "so3" | "diff_s1"
    pub variant: String,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    /// Sobolev order s of the Diff(S¹) inertia operator.
    #[serde(default = "default_order")]
    pub order: f64,
    /// Principal moments for SO(3).
    #[serde(default = "default_inertia")]
    pub inertia: [f64; 3],
    /// Mass for U(1).
    #[serde(default = "default_mass")]
    pub mass: f64,
}

fn default_n_modes() -> usize {
    64
}
fn default_order() -> f64 {
    1.0
}
fn default_inertia() -> [f64; 3] {
    [1.0, 2.0, 3.0]
}
fn default_mass() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LagrangianConfig {
    #[serde(default)]
    pub theta: Coeffs,
    #[serde(default)]
    pub v0: f64,
    #[serde(default = "default_potential_sign")]
    pub potential_sign: f64,
    /// Quartic kinetic perturbation strength ε.
    #[serde(default)]
    pub quartic: f64,
    /// Constant magnetic 2-form coefficients (SO(3) only).
    #[serde(default)]
    pub magnetic_form: Option<[f64; 3]>,
}

fn default_potential_sign() -> f64 {
    -1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub u0: Coeffs,
    #[serde(default = "default_order")]
    pub sobolev_shift: f64,
    /// Pass/fail bound on the relative energy drift.
    #[serde(default = "default_energy_drift_tol")]
    pub energy_drift_tol: f64,
    /// Pass/fail ceiling on the regularity-norm ratio (Diff(S¹)).
    #[serde(default = "default_regularity_ceiling")]
    pub regularity_ceiling: f64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    10.0
}
fn default_energy_drift_tol() -> f64 {
    1e-6
}
fn default_regularity_ceiling() -> f64 {
    10.0
}

impl Default for FlowConfig {
    fn default() -> FlowConfig {
        FlowConfig {
            dt: default_dt(),
            horizon: default_horizon(),
            u0: Coeffs::default(),
            sobolev_shift: default_order(),
            energy_drift_tol: default_energy_drift_tol(),
            regularity_ceiling: default_regularity_ceiling(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectConfig {
    #[serde(default)]
    pub p: Coeffs,
    #[serde(default)]
    pub q: Coeffs,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    0.5
}

impl Default for ConnectConfig {
    fn default() -> ConnectConfig {
        ConnectConfig { p: Coeffs::default(), q: Coeffs::default(), kappa: default_kappa() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeConfig {
    #[serde(default = "default_slack")]
    pub slack: f64,
}

fn default_slack() -> f64 {
    1e-3
}

impl Default for ManeConfig {
    fn default() -> ManeConfig {
        ManeConfig { slack: default_slack() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100
}

impl Default for CheckConfig {
    fn default() -> CheckConfig {
        CheckConfig { samples: default_samples() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_conv_dt")]
    pub dt: f64,
    #[serde(default = "default_conv_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub u0: Coeffs,
    #[serde(default = "default_order_floor")]
    pub order_floor: f64,
}

fn default_conv_dt() -> f64 {
    4e-3
}
fn default_conv_horizon() -> f64 {
    1.0
}
fn default_order_floor() -> f64 {
    3.8
}

impl Default for ConvergenceConfig {
    fn default() -> ConvergenceConfig {
        ConvergenceConfig {
            dt: default_conv_dt(),
            horizon: default_conv_horizon(),
            u0: Coeffs::default(),
            order_floor: default_order_floor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_multistarts")]
    pub multistarts: usize,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    #[serde(default = "default_constraint_tol")]
    pub constraint_tol: f64,
    #[serde(default = "default_el_residual_tol")]
    pub el_residual_tol: f64,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
}

fn default_n_nodes() -> usize {
    33
}
fn default_multistarts() -> usize {
    4
}
fn default_max_outer() -> usize {
    20
}
fn default_max_inner() -> usize {
    300
}
fn default_constraint_tol() -> f64 {
    1e-8
}
fn default_el_residual_tol() -> f64 {
    1e-6
}
fn default_energy_tol() -> f64 {
    1e-4
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            n_nodes: default_n_nodes(),
            multistarts: default_multistarts(),
            max_outer: default_max_outer(),
            max_inner: default_max_inner(),
            constraint_tol: default_constraint_tol(),
            el_residual_tol: default_el_residual_tol(),
            energy_tol: default_energy_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory for `summary.json` and `series.csv`; defaults to
    /// the current directory.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// One experiment scenario, as parsed from the TOML config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub group: GroupConfig,
    #[serde(default)]
    pub lagrangian: LagrangianConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub connect: ConnectConfig,
    #[serde(default)]
    pub mane: ManeConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Base RNG seed; `TONELLI_SEED` or `--seed` override it.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Flow,
    Connect,
    Mane,
    Check,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Flow => "flow",
            Experiment::Connect => "connect",
            Experiment::Mane => "mane",
            Experiment::Check => "check",
            Experiment::Convergence => "convergence",
        }
    }
}

/// Targeted flag overrides on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub kappa: Option<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

fn build_vector(cfg: &GroupConfig, c: &Coeffs, what: &str) -> Result<AlgebraVector, String> {
    match cfg.variant.as_str() {
        "u1" => match c {
            Coeffs::Scalar(x) => Ok(AlgebraVector::U1(*x)),
            Coeffs::List(l) if l.len() == 1 => Ok(AlgebraVector::U1(l[0])),
            _ => Err(format!("{what}: u1 expects a scalar")),
        },
        "so3" => match c {
            Coeffs::List(l) if l.len() == 3 => Ok(AlgebraVector::So3([l[0], l[1], l[2]])),
            Coeffs::Scalar(x) => Ok(AlgebraVector::So3([0.0, 0.0, *x])),
            _ => Err(format!("{what}: so3 expects 3 components")),
        },
        "diff_s1" => {
            let len = spectral::coeff_len(cfg.n_modes);
            let mut coeffs = vec![0.0; len];
            match c {
                Coeffs::Scalar(x) => coeffs[0] = *x,
                Coeffs::List(l) => {
                    if l.len() > len {
                        return Err(format!(
                            "{what}: at most {len} coefficients for n_modes = {}",
                            cfg.n_modes
                        ));
                    }
                    coeffs[..l.len()].copy_from_slice(l);
                }
            }
            Ok(AlgebraVector::DiffS1 { n_modes: cfg.n_modes, coeffs })
        }
        other => Err(format!("unknown group variant '{other}'")),
    }
}

fn build_element(cfg: &GroupConfig, c: &Coeffs, what: &str) -> Result<GroupElement, String> {
    let v = build_vector(cfg, c, what)?;
    Ok(match v {
        AlgebraVector::U1(x) => GroupElement::U1(x),
        AlgebraVector::So3(w) => GroupElement::So3(crate::group::Quat::from_rotation_vector(w)),
        AlgebraVector::DiffS1 { n_modes, coeffs } => GroupElement::DiffS1 { n_modes, coeffs },
    })
}

fn build_spec(cfg: &ScenarioConfig) -> Result<LagrangianSpec, String> {
    let inertia = match cfg.group.variant.as_str() {
        "u1" => InertiaOperator::u1(cfg.group.mass),
        "so3" => InertiaOperator::so3(cfg.group.inertia),
        "diff_s1" => InertiaOperator::diff_s1(cfg.group.n_modes, cfg.group.order),
        other => return Err(format!("unknown group variant '{other}'")),
    };
    let theta = build_vector(&cfg.group, &cfg.lagrangian.theta, "lagrangian.theta")?;
    let mut spec = LagrangianSpec::electromagnetic(inertia, theta, cfg.lagrangian.v0);
    spec.potential_sign = cfg.lagrangian.potential_sign;
    if cfg.lagrangian.quartic != 0.0 {
        spec = spec.with_quartic(cfg.lagrangian.quartic);
    }
    if let Some(b) = cfg.lagrangian.magnetic_form {
        if cfg.group.variant != "so3" {
            return Err("lagrangian.magnetic_form requires the so3 variant".into());
        }
        spec = spec.with_magnetic_form(b);
    }
    Ok(spec)
}

fn validate(cfg: &ScenarioConfig) -> Result<(), String> {
    let positives = [
        ("flow.dt", cfg.flow.dt),
        ("flow.horizon", cfg.flow.horizon),
        ("flow.energy_drift_tol", cfg.flow.energy_drift_tol),
        ("flow.regularity_ceiling", cfg.flow.regularity_ceiling),
        ("mane.slack", cfg.mane.slack),
        ("convergence.dt", cfg.convergence.dt),
        ("convergence.horizon", cfg.convergence.horizon),
        ("solver.constraint_tol", cfg.solver.constraint_tol),
        ("solver.el_residual_tol", cfg.solver.el_residual_tol),
        ("solver.energy_tol", cfg.solver.energy_tol),
    ];
    for (name, v) in positives {
        if !(v > 0.0) {
            return Err(format!("{name} must be positive (got {v})"));
        }
    }
    if cfg.solver.n_nodes < 8 {
        return Err("solver.n_nodes must be at least 8".into());
    }
    if cfg.check.samples == 0 {
        return Err("check.samples must be positive".into());
    }
    Ok(())
}

fn resolve_seed(cfg: &ScenarioConfig, ov: &Overrides) -> u64 {
    ov.seed
        .or_else(|| std::env::var("TONELLI_SEED").ok().and_then(|s| s.parse().ok()))
        .or(cfg.seed)
        .unwrap_or(0)
}

fn solver_options(cfg: &ScenarioConfig, seed: u64) -> SolverOptions {
    SolverOptions {
        n_nodes: cfg.solver.n_nodes,
        multistarts: cfg.solver.multistarts,
        seed,
        max_outer: cfg.solver.max_outer,
        max_inner: cfg.solver.max_inner,
        constraint_tol: cfg.solver.constraint_tol,
        el_residual_tol: cfg.solver.el_residual_tol,
        energy_tol: cfg.solver.energy_tol,
        ..SolverOptions::default()
    }
}

/// One row of `series.csv`; columns that do not apply to the experiment are
/// left empty.
type CsvRow = Vec<String>;

struct Artifacts {
    /// Experiment-specific results, merged into the summary.
    results: serde_json::Value,
    series_header: Vec<&'static str>,
    series: Vec<CsvRow>,
    /// All asserted invariants passed.
    passed: bool,
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn run_flow(spec: &LagrangianSpec, cfg: &ScenarioConfig, ov: &Overrides) -> Result<Artifacts, String> {
    let dt = ov.dt.unwrap_or(cfg.flow.dt);
    let horizon = ov.horizon.unwrap_or(cfg.flow.horizon);
    let u0 = build_vector(&cfg.group, &cfg.flow.u0, "flow.u0")?;
    let state0 = FlowState::from_velocity(spec, u0);
    let opts = IntegrateOptions { dt, sobolev_shift: cfg.flow.sobolev_shift, ..IntegrateOptions::with_dt(dt) };
    let (path, diag) = match flow::integrate_opts(spec, &state0, horizon, &opts) {
        Ok(r) => r,
        Err(e) => return Err(format!("flow failed: {e}")),
    };
    let drift = diag.relative_energy_drift();
    let reg = flow::regularity_monitor(&diag, cfg.flow.regularity_ceiling);
    let passed = drift <= cfg.flow.energy_drift_tol && !reg.flagged;

    let mut series = Vec::with_capacity(diag.times.len());
    for (i, t) in diag.times.iter().enumerate() {
        series.push(vec![
            fmt(*t),
            fmt(diag.energy[i]),
            diag.casimir.get(i).map(|c| fmt(*c)).unwrap_or_default(),
            diag.sobolev.get(i).map(|s| fmt(*s)).unwrap_or_default(),
            diag.step_sizes.get(i).map(|s| fmt(*s)).unwrap_or_default(),
        ]);
    }
    Ok(Artifacts {
        results: serde_json::json!({
            "relative_energy_drift": drift,
            "max_speed": diag.max_speed,
            "regularity": {
                "initial": reg.initial,
                "max": reg.max,
                "ratio": reg.ratio,
                "flagged": reg.flagged,
            },
            "terminal_time": path.last().map(|s| s.t),
            "stored_states": path.len(),
        }),
        series_header: vec!["time", "energy", "casimir", "sobolev_norm", "step_size"],
        series,
        passed,
    })
}

fn run_connect(
    spec: &LagrangianSpec,
    cfg: &ScenarioConfig,
    ov: &Overrides,
    seed: u64,
) -> Result<Artifacts, String> {
    let kappa = ov.kappa.unwrap_or(cfg.connect.kappa);
    let p = build_element(&cfg.group, &cfg.connect.p, "connect.p")?;
    let q = build_element(&cfg.group, &cfg.connect.q, "connect.q")?;
    let opts = solver_options(cfg, seed);
    let (report, passed) = match variational::connect(spec, &p, &q, kappa, &opts) {
        Ok(r) => (r, true),
        Err(variational::SolveError::NotConverged { best, .. }) => (*best, false),
        Err(e) => return Err(format!("connect failed: {e}")),
    };
    let t = report.path.period;
    let series: Vec<CsvRow> = report
        .path
        .xi
        .iter()
        .enumerate()
        .map(|(j, xi)| {
            let s = j as f64 / (report.path.n_nodes() - 1) as f64;
            let v = xi.scale(1.0 / t);
            vec![fmt(s), fmt(v.l2_norm()), fmt(lagrangian::energy(spec, &v))]
        })
        .collect();
    Ok(Artifacts {
        results: serde_json::json!({
            "kappa": kappa,
            "action": report.action,
            "period": report.path.period,
            "constraint_defect": report.constraint_defect,
            "el_residual": report.el_residual,
            "energy_defect": report.energy_defect,
            "iterations": report.iterations,
            "converged": report.converged,
        }),
        series_header: vec!["s", "speed_l2", "energy"],
        series,
        passed,
    })
}

fn run_mane(spec: &LagrangianSpec, cfg: &ScenarioConfig, seed: u64) -> Result<Artifacts, String> {
    let opts = SolverOptions { seed, ..solver_options_mane(cfg, seed) };
    let estimate = |class| match mane::estimate_c(spec, class, &opts) {
        Ok(e) => e,
        Err(mane::ManeError::NotConverged { estimate }) => *estimate,
        Err(e) => unreachable!("estimate_c only fails with NotConverged: {e}"),
    };
    let c_u = estimate(TopoClass::Contractible);
    let c_0 = estimate(TopoClass::NullHomologous);
    let c = estimate(TopoClass::Any);
    let chain = mane::verify_chain(spec, &c_u, &c_0, &c, cfg.mane.slack);
    let (chain_ok, chain_values) = match &chain {
        Ok(r) => (r.ok, r.values.to_vec()),
        Err(_) => (false, vec![]),
    };
    let passed = chain_ok && c_u.converged && c_0.converged && c.converged;

    let t = c.loop_path.period;
    let series: Vec<CsvRow> = c
        .loop_path
        .xi
        .iter()
        .enumerate()
        .map(|(j, xi)| {
            let s = j as f64 / (c.loop_path.n_nodes() - 1) as f64;
            vec![fmt(s), fmt(xi.scale(1.0 / t).l2_norm())]
        })
        .collect();
    let est_json = |e: &mane::ManeEstimate| {
        serde_json::json!({
            "value": e.value,
            "winding": e.winding,
            "mean_action": e.mean_action,
            "closure_defect": e.closure_defect,
            "period": e.loop_path.period,
            "converged": e.converged,
        })
    };
    Ok(Artifacts {
        results: serde_json::json!({
            "e0": mane::e0(spec),
            "c": est_json(&c),
            "c0": est_json(&c_0),
            "c_u": est_json(&c_u),
            "chain": { "ok": chain_ok, "values": chain_values, "slack": cfg.mane.slack },
        }),
        series_header: vec!["s", "speed_l2"],
        series,
        passed,
    })
}

fn solver_options_mane(cfg: &ScenarioConfig, seed: u64) -> SolverOptions {
    SolverOptions {
        t_bracket: (1e-2, 1e3),
        multistarts: cfg.solver.multistarts.min(2),
        ..solver_options(cfg, seed)
    }
}

fn run_check(spec: &LagrangianSpec, cfg: &ScenarioConfig, seed: u64) -> Result<Artifacts, String> {
    let samples = cfg.check.samples;
    let (m_hat, big_m_hat) = match lagrangian::check_tonelli(spec, samples, seed) {
        Ok(pair) => pair,
        Err(e) => return Err(format!("tonelli check failed: {e}")),
    };
    let b_hat = lagrangian::check_growth(spec, m_hat, big_m_hat, samples, seed.wrapping_add(1));
    let passed = m_hat > 0.0 && big_m_hat.is_finite() && b_hat.is_finite();

    // series: inertia Rayleigh quotients along the coordinate directions
    let zero = spec.zero_velocity();
    let dims = match &zero {
        AlgebraVector::U1(_) => 1,
        AlgebraVector::So3(_) => 3,
        AlgebraVector::DiffS1 { coeffs, .. } => coeffs.len(),
    };
    let mut series = Vec::with_capacity(dims);
    for i in 0..dims {
        let v = coordinate_direction(&zero, i);
        let rayleigh = crate::metric::inner(&spec.inertia, &v, &v) / v.l2_pairing(&v);
        series.push(vec![i.to_string(), fmt(rayleigh)]);
    }
    Ok(Artifacts {
        results: serde_json::json!({
            "m_hat": m_hat,
            "M_hat": big_m_hat,
            "b_hat": b_hat,
            "samples": samples,
        }),
        series_header: vec!["direction", "rayleigh"],
        series,
        passed,
    })
}

fn coordinate_direction(like: &AlgebraVector, i: usize) -> AlgebraVector {
    match like {
        AlgebraVector::U1(_) => AlgebraVector::U1(1.0),
        AlgebraVector::So3(_) => {
            let mut w = [0.0; 3];
            w[i] = 1.0;
            AlgebraVector::So3(w)
        }
        AlgebraVector::DiffS1 { n_modes, coeffs } => {
            let mut c = vec![0.0; coeffs.len()];
            c[i] = 1.0;
            AlgebraVector::DiffS1 { n_modes: *n_modes, coeffs: c }
        }
    }
}

fn run_convergence(
    spec: &LagrangianSpec,
    cfg: &ScenarioConfig,
    ov: &Overrides,
) -> Result<Artifacts, String> {
    let dt = ov.dt.unwrap_or(cfg.convergence.dt);
    let horizon = ov.horizon.unwrap_or(cfg.convergence.horizon);
    let u0 = build_vector(&cfg.group, &cfg.convergence.u0, "convergence.u0")?;
    let state0 = FlowState::from_velocity(spec, u0);
    let mut terminals = Vec::new();
    let mut dts = Vec::new();
    for k in 0..3 {
        let dtk = dt / 2f64.powi(k);
        let (path, _) = flow::integrate(spec, &state0, horizon, dtk)
            .map_err(|e| format!("convergence run at dt = {dtk} failed: {e}"))?;
        terminals.push(path.last().expect("nonempty path").clone());
        dts.push(dtk);
    }
    let err = |a: &FlowState, b: &FlowState| a.u.sub(&b.u).l2_norm();
    let e1 = err(&terminals[0], &terminals[2]);
    let e2 = err(&terminals[1], &terminals[2]);
    // e(dt → dt/4) / e(dt/2 → dt/4) = (4^p − 1)/(2^p − 1) = 2^p + 1;
    // for RK4 the ratio is ≈ 17
    let ratio = e1 / e2.max(1e-300);
    let observed_order = (ratio - 1.0).max(1.0 + 1e-12).log2();
    let passed = observed_order >= cfg.convergence.order_floor;
    let series = vec![
        vec![fmt(dts[0]), fmt(e1)],
        vec![fmt(dts[1]), fmt(e2)],
    ];
    Ok(Artifacts {
        results: serde_json::json!({
            "dt_base": dt,
            "horizon": horizon,
            "error_coarse": e1,
            "error_fine": e2,
            "observed_order": observed_order,
            "order_floor": cfg.convergence.order_floor,
        }),
        series_header: vec!["dt", "terminal_error"],
        series,
        passed,
    })
}

fn write_artifacts(
    dir: &Path,
    experiment: Experiment,
    cfg: &ScenarioConfig,
    seed: u64,
    art: &Artifacts,
) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let summary = serde_json::json!({
        "experiment": experiment.name(),
        "seed": seed,
        "passed": art.passed,
        "config": serde_json::to_value(cfg).map_err(|e| e.to_string())?,
        "results": art.results,
    });
    let json_path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(|e| format!("cannot write {}: {e}", json_path.display()))?;

    let csv_path = dir.join("series.csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;
    w.write_record(&art.series_header).map_err(|e| e.to_string())?;
    for row in &art.series {
        w.write_record(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;
    Ok(())
}

/// Execute one experiment from a config file. Returns the process exit
/// code: 0 on success, 1 on experiment failure, 2 on config errors.
pub fn run(experiment: Experiment, config_path: &Path, overrides: &Overrides) -> i32 {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return 2;
        }
    };
    let cfg: ScenarioConfig = match toml::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            // the toml error message carries line/column information
            eprintln!("error: {}: {e}", config_path.display());
            return 2;
        }
    };
    if let Err(e) = validate(&cfg) {
        eprintln!("error: invalid config: {e}");
        return 2;
    }
    let spec = match build_spec(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return 2;
        }
    };
    let seed = resolve_seed(&cfg, overrides);

    let outcome = match experiment {
        Experiment::Flow => run_flow(&spec, &cfg, overrides),
        Experiment::Connect => run_connect(&spec, &cfg, overrides, seed),
        Experiment::Mane => run_mane(&spec, &cfg, seed),
        Experiment::Check => run_check(&spec, &cfg, seed),
        Experiment::Convergence => run_convergence(&spec, &cfg, overrides),
    };
    let art = match outcome {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = write_artifacts(&dir, experiment, &cfg, seed, &art) {
        eprintln!("error: {e}");
        return 2;
    }
    if art.passed {
        0
    } else {
        eprintln!("experiment '{}' completed with failed invariants", experiment.name());
        1
    }
}
