//! Config-driven scenario runner: parse a TOML scenario, validate it against
//! the model schema, sweep a parameter grid across the requested solver
//! backends, and emit one CSV per `(representation, observable)` along with
//! a JSON run manifest. The named presets package the application studies at
//! desk scale.
//!
//! Config grammar (TOML):
//!
//! ```toml
//! model = "gsb"                  # gsb | nesb | qar | dqd | chain
//! representations = ["bmr", "rc", "eff"]
//!
//! [parameters]                   # numbers (decimal or scientific)
//! delta = 1.0
//! theta = 0.7853981633974483
//!
//! [[sweep]]                      # one or more; grids combine cartesian
//! parameter = "lambda"
//! grid = [0.5, 1.0, 2.0]        # or start/stop/points for a linear grid
//!
//! [outputs]
//! observables = ["population", "coherence"]
//!
//! [run]                          # optional
//! workers = 1
//! out_dir = "results"
//! ```

use crate::equilibrium::{gibbs, gsb_mfgs_closed_form, mfgs_rc_converged, population_coherence};
use crate::models::{
    cooling_window, dqd, dqd_number_operator, effective_splitting, gsb,
    nesb, qar, sigma_theta, spin_chain, thermoelectric_efficiency, BrownianBathSpec, ChainSpec,
    DqdSpec, GsbSpec, ModelError, NesbSpec, QarSpec, WeakBathSpec,
};
use crate::operators::{OperatorMatrix, Pauli};
use crate::redfield::{build_liouvillian_limited, fill_charge_currents, steady_state};
use crate::transforms::Representation;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RCPT_OUT_DIR";

/// Exit code for configuration/schema errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for solver failures.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error ({key}): {message}")]
    Schema { key: String, message: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } => EXIT_CONFIG,
            Self::Solver(_) | Self::Io(_) => EXIT_SOLVER,
        }
    }
}

// ---------------------------------------------------------------------------
// Config surface
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ScenarioConfig {
    pub model: String,
    pub representations: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, toml::Value>,
    #[serde(default)]
    pub sweep: Vec<SweepConfig>,
    pub outputs: OutputConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SweepConfig {
    pub parameter: String,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct OutputConfig {
    pub observables: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct RunConfig {
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gsb,
    Nesb,
    Qar,
    Dqd,
    Chain,
}

impl ModelKind {
    fn parse(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "gsb" => Ok(Self::Gsb),
            "nesb" => Ok(Self::Nesb),
            "qar" => Ok(Self::Qar),
            "dqd" => Ok(Self::Dqd),
            "chain" => Ok(Self::Chain),
            other => Err(ScenarioError::schema(
                "model",
                format!("unknown model `{other}` (expect gsb|nesb|qar|dqd|chain)"),
            )),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Self::Gsb => "gsb",
            Self::Nesb => "nesb",
            Self::Qar => "qar",
            Self::Dqd => "dqd",
            Self::Chain => "chain",
        }
    }

    /// `(key, default)` pairs; `None` means the key must be supplied either
    /// in `[parameters]` or by a sweep.
    fn schema(&self) -> &'static [(&'static str, Option<f64>)] {
        match self {
            Self::Gsb => &[
                ("delta", Some(1.0)),
                ("theta", None),
                ("lambda", None),
                ("gamma", Some(0.0071)),
                ("omega", Some(20.0)),
                ("cutoff", Some(1000.0)),
                ("temperature", Some(0.5)),
                ("rc_levels", Some(0.0)),
            ],
            Self::Nesb => &[
                ("delta", Some(1.0)),
                ("lambda", None),
                ("gamma", Some(0.0071)),
                ("omega", Some(20.0)),
                ("cutoff", Some(1000.0)),
                ("t_left", Some(1.0)),
                ("t_right", Some(0.5)),
                ("rc_levels", Some(0.0)),
            ],
            Self::Qar => &[
                ("delta", None),
                ("lambda_c", None),
                ("omega_c", Some(20.0)),
                ("gamma_c", Some(0.0071)),
                ("t_c", Some(0.25)),
                ("t_h", Some(0.5)),
                ("t_w", Some(1.5)),
                ("gamma_h", Some(0.0071)),
                ("gamma_w", Some(0.0071)),
                ("cutoff", Some(1000.0)),
                ("rc_levels", Some(0.0)),
            ],
            Self::Dqd => &[
                ("eps_left", Some(0.0)),
                ("eps_right", Some(2.0)),
                ("coulomb", Some(500.0)),
                ("gamma_left", Some(0.1)),
                ("gamma_right", Some(0.1)),
                ("t_left", Some(10.0)),
                ("t_right", Some(1.0)),
                ("mu_left", Some(-0.3)),
                ("mu_right", Some(-0.2)),
                ("lambda", None),
                ("omega", Some(100.0)),
                ("gamma_ph", Some(0.15915494309189535)),
                ("t_ph", Some(1.0)),
                ("cutoff", Some(1000.0)),
                ("rc_levels", Some(0.0)),
            ],
            Self::Chain => &[
                ("sites", Some(2.0)),
                ("delta", Some(1.0)),
                ("j_x", None),
                ("j_y", Some(0.0)),
                ("j_z", Some(0.0)),
                ("lambda", None),
                ("omega", Some(10.0)),
                ("gamma", Some(0.0071)),
                ("t_left", Some(0.5)),
                ("t_right", Some(0.5)),
                ("cutoff", Some(1000.0)),
                ("rc_levels", Some(0.0)),
            ],
        }
    }

    fn observables(&self) -> &'static [&'static str] {
        match self {
            Self::Gsb => &[
                "population",
                "coherence",
                "mfgs_population",
                "mfgs_coherence",
                "gap_ratio",
                "gap_ratio_analytic",
                "splitting",
            ],
            Self::Nesb => &["heat_current_left", "heat_current_right"],
            Self::Qar => &["cooling_current", "cooling", "cooling_analytic"],
            Self::Dqd => &[
                "charge_current",
                "energy_current_left",
                "heat_current_left",
                "power",
                "efficiency",
            ],
            Self::Chain => &["magnetization", "heat_current_left", "heat_current_right"],
        }
    }
}

fn parse_representation(name: &str) -> Result<Representation, ScenarioError> {
    match name {
        "bmr" => Ok(Representation::Original),
        "rc" => Ok(Representation::RcExtended),
        "eff" => Ok(Representation::Effective),
        other => Err(ScenarioError::schema(
            "representations",
            format!("unknown representation `{other}` (expect bmr|rc|eff)"),
        )),
    }
}

fn representation_tag(repr: Representation) -> &'static str {
    match repr {
        Representation::Original => "bmr",
        Representation::RcExtended => "rc",
        Representation::Effective => "eff",
    }
}

/// A validated scenario, ready to execute.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub model: ModelKind,
    pub representations: Vec<Representation>,
    pub parameters: BTreeMap<String, f64>,
    pub sweeps: Vec<(String, Vec<f64>)>,
    pub observables: Vec<String>,
    pub workers: usize,
    pub out_dir: Option<String>,
    pub config_toml: String,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    toml::from_str(text).map_err(|e| ScenarioError::schema("<config>", e.to_string()))
}

/// Validate a parsed config against the model schema: every parameter key
/// must be known and numeric, every sweep grid strictly monotone and
/// non-empty, every observable and representation recognized, and every
/// required key supplied by `[parameters]` or a sweep.
pub fn validate(config: &ScenarioConfig, config_toml: &str) -> Result<ResolvedScenario, ScenarioError> {
    let model = ModelKind::parse(&config.model)?;
    if config.representations.is_empty() {
        return Err(ScenarioError::schema(
            "representations",
            "at least one representation required",
        ));
    }
    let mut representations = Vec::new();
    for r in &config.representations {
        representations.push(parse_representation(r)?);
    }

    let schema = model.schema();
    let known: Vec<&str> = schema.iter().map(|&(k, _)| k).collect();
    let mut parameters: BTreeMap<String, f64> = BTreeMap::new();
    for &(key, default) in schema {
        if let Some(v) = default {
            parameters.insert(key.to_string(), v);
        }
    }
    for (key, value) in &config.parameters {
        if !known.contains(&key.as_str()) {
            return Err(ScenarioError::schema(
                key,
                format!("unknown parameter for model `{}`", model.as_str()),
            ));
        }
        let num = match value {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            toml::Value::Boolean(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
            other => {
                return Err(ScenarioError::schema(
                    key,
                    format!("expected a number, got `{other}`"),
                ))
            }
        };
        parameters.insert(key.clone(), num);
    }

    let mut sweeps = Vec::new();
    for sw in &config.sweep {
        if !known.contains(&sw.parameter.as_str()) {
            return Err(ScenarioError::schema(
                &sw.parameter,
                format!("unknown sweep parameter for model `{}`", model.as_str()),
            ));
        }
        let grid: Vec<f64> = match (&sw.grid, sw.start, sw.stop, sw.points) {
            (Some(g), None, None, None) => g.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n < 1 {
                    return Err(ScenarioError::schema(&sw.parameter, "points must be >= 1"));
                }
                if n == 1 {
                    vec![a]
                } else {
                    (0..n)
                        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                        .collect()
                }
            }
            _ => {
                return Err(ScenarioError::schema(
                    &sw.parameter,
                    "give either `grid` or all of `start`, `stop`, `points`",
                ))
            }
        };
        if grid.is_empty() {
            return Err(ScenarioError::schema(&sw.parameter, "sweep grid is empty"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScenarioError::schema(
                &sw.parameter,
                "sweep grid must be strictly increasing",
            ));
        }
        sweeps.push((sw.parameter.clone(), grid));
    }

    // Required keys must come from parameters or a sweep.
    for &(key, default) in schema {
        if default.is_none()
            && !parameters.contains_key(key)
            && !sweeps.iter().any(|(k, _)| k == key)
        {
            return Err(ScenarioError::schema(
                key,
                "required parameter missing (set it in [parameters] or sweep it)",
            ));
        }
    }

    let allowed_obs = model.observables();
    for obs in &config.outputs.observables {
        if !allowed_obs.contains(&obs.as_str()) {
            return Err(ScenarioError::schema(
                obs,
                format!(
                    "unknown observable for model `{}` (expect one of {:?})",
                    model.as_str(),
                    allowed_obs
                ),
            ));
        }
    }

    Ok(ResolvedScenario {
        model,
        representations,
        parameters,
        sweeps,
        observables: config.outputs.observables.clone(),
        workers: config.run.workers.unwrap_or(1).max(1),
        out_dir: config.run.out_dir.clone(),
        config_toml: config_toml.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Point evaluation
// ---------------------------------------------------------------------------

/// Values produced at one grid point: named columns, in emission order.
type PointValues = Vec<(String, f64)>;

#[derive(Debug, Clone, Default)]
struct PointDiagnostics {
    rc_levels: Vec<usize>,
    residual: f64,
    min_eigenvalue: f64,
}

fn solver_err(e: impl std::fmt::Display) -> String {
    format!("solver: {e}")
}

struct Evaluation {
    values: PointValues,
    diagnostics: PointDiagnostics,
}

fn evaluate_point(
    model: ModelKind,
    repr: Representation,
    params: &BTreeMap<String, f64>,
    observables: &[String],
) -> Result<Evaluation, String> {
    match model {
        ModelKind::Gsb => evaluate_gsb(repr, params, observables),
        ModelKind::Nesb => evaluate_nesb(repr, params, observables),
        ModelKind::Qar => evaluate_qar(repr, params, observables),
        ModelKind::Dqd => evaluate_dqd(repr, params, observables),
        ModelKind::Chain => evaluate_chain(repr, params, observables),
    }
}

fn get(params: &BTreeMap<String, f64>, key: &str) -> f64 {
    *params
        .get(key)
        .unwrap_or_else(|| panic!("validated parameter `{key}` missing"))
}

fn levels_option(params: &BTreeMap<String, f64>) -> Option<usize> {
    let m = get(params, "rc_levels");
    if m >= 2.0 {
        Some(m as usize)
    } else {
        None
    }
}

fn steady_state_of(
    model: &crate::transforms::OpenSystemModel,
) -> Result<(crate::redfield::Liouvillian, crate::redfield::SteadyStateResult), String> {
    let liou = build_liouvillian_limited(model, crate::redfield::DEFAULT_DIM_LIMIT)
        .map_err(solver_err)?;
    let ss = steady_state(&liou).map_err(solver_err)?;
    Ok((liou, ss))
}

fn diag_of(model: &crate::transforms::OpenSystemModel, ss: &crate::redfield::SteadyStateResult) -> PointDiagnostics {
    PointDiagnostics {
        rc_levels: model.rc_meta.iter().filter_map(|m| m.levels).collect(),
        residual: ss.residual,
        min_eigenvalue: ss.min_eigenvalue,
    }
}

fn evaluate_gsb(
    repr: Representation,
    params: &BTreeMap<String, f64>,
    observables: &[String],
) -> Result<Evaluation, String> {
    let delta = get(params, "delta");
    let theta = get(params, "theta");
    let lambda = get(params, "lambda");
    let omega = get(params, "omega");
    let temperature = get(params, "temperature");
    let beta = 1.0 / temperature;
    let spec = GsbSpec {
        delta,
        theta,
        bath: BrownianBathSpec {
            lambda,
            omega,
            gamma: get(params, "gamma"),
            temperature,
            cutoff: get(params, "cutoff"),
        },
        rc_levels: levels_option(params),
    };
    let h_bare = OperatorMatrix::pauli(Pauli::Z).scale_re(delta);

    let needs_qme = observables
        .iter()
        .any(|o| o == "population" || o == "coherence");
    let mut values = Vec::new();
    let mut diagnostics = PointDiagnostics::default();

    let mut qme_state: Option<(f64, f64)> = None;
    if needs_qme {
        let model = gsb(&spec, repr).map_err(solver_err)?;
        let (_liou, ss) = steady_state_of(&model)?;
        diagnostics = diag_of(&model, &ss);
        let reduced = if repr == Representation::RcExtended {
            ss.rho_ss.partial_trace(&[0]).map_err(solver_err)?
        } else {
            ss.rho_ss.clone()
        };
        qme_state = Some(population_coherence(&reduced, &h_bare).map_err(solver_err)?);
    }

    for obs in observables {
        match obs.as_str() {
            "population" => values.push((obs.clone(), qme_state.unwrap().0)),
            "coherence" => values.push((obs.clone(), qme_state.unwrap().1)),
            "mfgs_population" | "mfgs_coherence" => {
                let rho = match repr {
                    Representation::Original => gibbs(&h_bare, beta).map_err(solver_err)?,
                    Representation::RcExtended => {
                        let s = sigma_theta(theta);
                        let (rho, m) =
                            mfgs_rc_converged(&h_bare, &s, lambda, omega, beta, 11, 64, 1e-9)
                                .map_err(solver_err)?;
                        if diagnostics.rc_levels.is_empty() {
                            diagnostics.rc_levels.push(m);
                        }
                        rho
                    }
                    Representation::Effective => {
                        gsb_mfgs_closed_form(delta, theta, lambda, omega, beta)
                    }
                };
                let (p, c) = population_coherence(&rho, &h_bare).map_err(solver_err)?;
                let v = if obs == "mfgs_population" { p } else { c };
                values.push((obs.clone(), v));
            }
            "gap_ratio" => {
                let ratio = match repr {
                    Representation::RcExtended => {
                        let m = spec.rc_levels.unwrap_or(40).max(40);
                        let gap = |l: f64| -> Result<f64, String> {
                            let s = GsbSpec {
                                bath: BrownianBathSpec {
                                    lambda: l,
                                    ..spec.bath.clone()
                                },
                                rc_levels: Some(m),
                                ..spec.clone()
                            };
                            let ext = gsb(&s, Representation::RcExtended).map_err(solver_err)?;
                            let es = ext.h_s.eigensystem().map_err(solver_err)?;
                            Ok(es.values[1] - es.values[0])
                        };
                        gap(lambda)? / gap(1e-12)?
                    }
                    _ => {
                        effective_splitting(delta, theta, lambda, omega)
                            / effective_splitting(delta, theta, 0.0, omega)
                    }
                };
                values.push((obs.clone(), ratio));
            }
            "gap_ratio_analytic" => {
                let ratio = effective_splitting(delta, theta, lambda, omega)
                    / effective_splitting(delta, theta, 0.0, omega);
                values.push((obs.clone(), ratio));
            }
            "splitting" => {
                values.push((obs.clone(), effective_splitting(delta, theta, lambda, omega)))
            }
            _ => unreachable!("validated observable"),
        }
    }
    Ok(Evaluation {
        values,
        diagnostics,
    })
}

fn evaluate_nesb(
    repr: Representation,
    params: &BTreeMap<String, f64>,
    observables: &[String],
) -> Result<Evaluation, String> {
    let lambda = get(params, "lambda");
    let omega = get(params, "omega");
    let gamma = get(params, "gamma");
    let cutoff = get(params, "cutoff");
    let spec = NesbSpec {
        delta: get(params, "delta"),
        left: BrownianBathSpec {
            lambda,
            omega,
            gamma,
            temperature: get(params, "t_left"),
            cutoff,
        },
        right: BrownianBathSpec {
            lambda,
            omega,
            gamma,
            temperature: get(params, "t_right"),
            cutoff,
        },
        rc_levels: levels_option(params),
    };
    let model = nesb(&spec, repr).map_err(solver_err)?;
    let (_liou, ss) = steady_state_of(&model)?;
    let diagnostics = diag_of(&model, &ss);
    let mut values = Vec::new();
    for obs in observables {
        let v = match obs.as_str() {
            "heat_current_left" => ss.heat_currents[0],
            "heat_current_right" => ss.heat_currents[1],
            _ => unreachable!("validated observable"),
        };
        values.push((obs.clone(), v));
    }
    Ok(Evaluation {
        values,
        diagnostics,
    })
}

fn evaluate_qar(
    repr: Representation,
    params: &BTreeMap<String, f64>,
    observables: &[String],
) -> Result<Evaluation, String> {
    let delta = get(params, "delta");
    let lambda_c = get(params, "lambda_c");
    let omega_c = get(params, "omega_c");
    let (t_c, t_h, t_w) = (get(params, "t_c"), get(params, "t_h"), get(params, "t_w"));
    let cutoff = get(params, "cutoff");
    let spec = QarSpec {
        delta,
        cold: BrownianBathSpec {
            lambda: lambda_c,
            omega: omega_c,
            gamma: get(params, "gamma_c"),
            temperature: t_c,
            cutoff,
        },
        hot: WeakBathSpec {
            gamma: get(params, "gamma_h"),
            temperature: t_h,
            cutoff,
        },
        work: WeakBathSpec {
            gamma: get(params, "gamma_w"),
            temperature: t_w,
            cutoff,
        },
        rc_levels: levels_option(params),
    };
    let needs_qme = observables
        .iter()
        .any(|o| o == "cooling_current" || o == "cooling");
    let mut diagnostics = PointDiagnostics::default();
    let mut j_cold = None;
    if needs_qme {
        let model = qar(&spec, repr).map_err(solver_err)?;
        let (_liou, ss) = steady_state_of(&model)?;
        diagnostics = diag_of(&model, &ss);
        j_cold = Some(ss.heat_currents[0]);
    }
    let mut values = Vec::new();
    for obs in observables {
        let v = match obs.as_str() {
            "cooling_current" => j_cold.unwrap(),
            "cooling" => {
                if j_cold.unwrap() > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            "cooling_analytic" => {
                if cooling_window(delta, lambda_c, omega_c, 1.0 / t_c, 1.0 / t_h, 1.0 / t_w) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => unreachable!("validated observable"),
        };
        values.push((obs.clone(), v));
    }
    Ok(Evaluation {
        values,
        diagnostics,
    })
}

fn evaluate_dqd(
    repr: Representation,
    params: &BTreeMap<String, f64>,
    observables: &[String],
) -> Result<Evaluation, String> {
    let mu_left = get(params, "mu_left");
    let mu_right = get(params, "mu_right");
    let spec = DqdSpec {
        eps_left: get(params, "eps_left"),
        eps_right: get(params, "eps_right"),
        coulomb: get(params, "coulomb"),
        gamma_left: get(params, "gamma_left"),
        gamma_right: get(params, "gamma_right"),
        t_left: get(params, "t_left"),
        t_right: get(params, "t_right"),
        mu_left,
        mu_right,
        phonon: BrownianBathSpec {
            lambda: get(params, "lambda"),
            omega: get(params, "omega"),
            gamma: get(params, "gamma_ph"),
            temperature: get(params, "t_ph"),
            cutoff: get(params, "cutoff"),
        },
        rc_levels: levels_option(params),
    };
    let model = dqd(&spec, repr).map_err(solver_err)?;
    let (liou, mut ss) = steady_state_of(&model)?;
    let n_op = match repr {
        Representation::RcExtended => {
            let levels = model.rc_meta.last().and_then(|m| m.levels).unwrap_or(2);
            OperatorMatrix::kron(&dqd_number_operator(), &OperatorMatrix::identity(levels))
        }
        _ => dqd_number_operator(),
    };
    fill_charge_currents(&liou, &mut ss, &n_op).map_err(solver_err)?;
    let diagnostics = diag_of(&model, &ss);
    let j_e = ss.charge_currents[0].unwrap_or(0.0);
    let j_u = ss.heat_currents[0];
    let mut values = Vec::new();
    for obs in observables {
        let v = match obs.as_str() {
            "charge_current" => j_e,
            "energy_current_left" => j_u,
            "heat_current_left" => j_u - mu_left * j_e,
            "power" => j_e * (mu_right - mu_left),
            "efficiency" => match thermoelectric_efficiency(&ss, 0, mu_left, mu_right) {
                Ok(eta) => eta,
                Err(ModelError::UndefinedEfficiency(_)) => f64::NAN,
                Err(e) => return Err(solver_err(e)),
            },
            _ => unreachable!("validated observable"),
        };
        values.push((obs.clone(), v));
    }
    Ok(Evaluation {
        values,
        diagnostics,
    })
}

fn evaluate_chain(
    repr: Representation,
    params: &BTreeMap<String, f64>,
    observables: &[String],
) -> Result<Evaluation, String> {
    let n = get(params, "sites") as usize;
    let delta = get(params, "delta");
    let lambda = get(params, "lambda");
    let (t_left, t_right) = (get(params, "t_left"), get(params, "t_right"));
    let site = |k: usize| {
        let frac = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
        (
            delta,
            BrownianBathSpec {
                lambda,
                omega: get(params, "omega"),
                gamma: get(params, "gamma"),
                temperature: t_left + (t_right - t_left) * frac,
                cutoff: get(params, "cutoff"),
            },
        )
    };
    let spec = ChainSpec {
        sites: (0..n).map(site).collect(),
        j_x: get(params, "j_x"),
        j_y: get(params, "j_y"),
        j_z: get(params, "j_z"),
        rc_levels: levels_option(params),
    };
    let model = spin_chain(&spec, repr).map_err(solver_err)?;
    let (_liou, ss) = steady_state_of(&model)?;
    let diagnostics = diag_of(&model, &ss);
    // Reduce to the spin factors for magnetization.
    let spins = if repr == Representation::RcExtended {
        let keep: Vec<usize> = (0..n).collect();
        ss.rho_ss.partial_trace(&keep).map_err(solver_err)?
    } else {
        ss.rho_ss.clone()
    };
    let mut values = Vec::new();
    for obs in observables {
        match obs.as_str() {
            "magnetization" => {
                for site_idx in 0..n {
                    let sz = crate::models::site_operator(
                        &OperatorMatrix::pauli(Pauli::Z),
                        site_idx,
                        n,
                    );
                    let m = spins.matmul(&sz).trace().re;
                    values.push((format!("magnetization_site_{site_idx}"), m));
                }
            }
            "heat_current_left" => values.push((obs.clone(), ss.heat_currents[0])),
            "heat_current_right" => values.push((obs.clone(), ss.heat_currents[n - 1])),
            _ => unreachable!("validated observable"),
        }
    }
    Ok(Evaluation {
        values,
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// Sweep execution and output
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RepresentationReport {
    pub representation: String,
    pub rc_levels: Vec<usize>,
    pub max_residual: f64,
    pub min_eigenvalue: f64,
    pub failed_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub preset: Option<String>,
    pub model: String,
    pub representations: Vec<String>,
    pub resolved_parameters: BTreeMap<String, f64>,
    pub sweeps: Vec<(String, Vec<f64>)>,
    pub observables: Vec<String>,
    pub diagnostics: Vec<RepresentationReport>,
    pub notes: Vec<String>,
    pub wall_time_seconds: f64,
    pub config_toml: String,
}

pub struct RunArtifacts {
    pub csv_paths: Vec<PathBuf>,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

fn format_float(x: f64) -> String {
    // 17 significant digits round-trips f64 exactly.
    format!("{x:.16e}")
}

fn grid_points(sweeps: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (name, grid) in sweeps {
        let mut next = Vec::with_capacity(points.len() * grid.len());
        for base in &points {
            for &x in grid {
                let mut p = base.clone();
                p.push((name.clone(), x));
                next.push(p);
            }
        }
        points = next;
    }
    points
}

/// Execute a validated scenario: evaluate every grid point under every
/// representation, write one CSV per `(representation, observable)` plus a
/// gnuplot helper script each, and a JSON manifest.
pub fn run_scenario(
    scenario: &ResolvedScenario,
    out_dir: &Path,
    preset: Option<&str>,
    mut notes: Vec<String>,
) -> Result<RunArtifacts, ScenarioError> {
    let started = std::time::Instant::now();
    std::fs::create_dir_all(out_dir)?;

    let points = grid_points(&scenario.sweeps);
    let sweep_names: Vec<String> = scenario.sweeps.iter().map(|(n, _)| n.clone()).collect();

    if scenario.model == ModelKind::Dqd {
        let gamma_ph = scenario.parameters.get("gamma_ph").copied().unwrap_or(0.0);
        notes.push(format!(
            "phonon peak width gamma_ph = {gamma_ph:.6} (from 2*pi*gamma*Omega = 100 at Omega = 100)"
        ));
        let warn_spec = DqdSpec {
            eps_left: get(&scenario.parameters, "eps_left"),
            eps_right: get(&scenario.parameters, "eps_right"),
            coulomb: get(&scenario.parameters, "coulomb"),
            gamma_left: get(&scenario.parameters, "gamma_left"),
            gamma_right: get(&scenario.parameters, "gamma_right"),
            t_left: get(&scenario.parameters, "t_left"),
            t_right: get(&scenario.parameters, "t_right"),
            mu_left: get(&scenario.parameters, "mu_left"),
            mu_right: get(&scenario.parameters, "mu_right"),
            phonon: BrownianBathSpec {
                lambda: 0.0,
                omega: get(&scenario.parameters, "omega"),
                gamma: get(&scenario.parameters, "gamma_ph"),
                temperature: get(&scenario.parameters, "t_ph"),
                cutoff: get(&scenario.parameters, "cutoff"),
            },
            rc_levels: None,
        };
        notes.extend(warn_spec.warnings());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.workers)
        .build()
        .map_err(|e| ScenarioError::Solver(e.to_string()))?;

    let mut csv_paths = Vec::new();
    let mut reports = Vec::new();

    for &repr in &scenario.representations {
        let tag = representation_tag(repr);
        // Evaluate all points (deterministic order restored by index).
        let results: Vec<Result<Evaluation, String>> = pool.install(|| {
            points
                .par_iter()
                .map(|assignments| {
                    let mut params = scenario.parameters.clone();
                    for (k, v) in assignments {
                        params.insert(k.clone(), *v);
                    }
                    evaluate_point(scenario.model, repr, &params, &scenario.observables)
                })
                .collect()
        });

        let mut report = RepresentationReport {
            representation: tag.to_string(),
            rc_levels: Vec::new(),
            max_residual: 0.0,
            min_eigenvalue: f64::INFINITY,
            failed_points: 0,
        };
        for r in results.iter().flatten() {
            for &m in &r.diagnostics.rc_levels {
                if !report.rc_levels.contains(&m) {
                    report.rc_levels.push(m);
                }
            }
            report.max_residual = report.max_residual.max(r.diagnostics.residual);
            report.min_eigenvalue = report.min_eigenvalue.min(r.diagnostics.min_eigenvalue);
        }
        report.failed_points = results.iter().filter(|r| r.is_err()).count();
        if report.min_eigenvalue == f64::INFINITY {
            report.min_eigenvalue = f64::NAN;
        }

        if scenario.observables.is_empty() {
            // Vacuous request: a single header-only CSV.
            let path = out_dir.join(format!("{tag}_results.csv"));
            let mut file = std::fs::File::create(&path)?;
            writeln!(file, "{}", sweep_names.join(","))?;
            csv_paths.push(path);
        }

        for obs in &scenario.observables {
            let path = out_dir.join(format!("{tag}_{obs}.csv"));
            let mut file = std::fs::File::create(&path)?;
            // Column names come from the first successful row; fall back to
            // the observable name.
            let value_columns: Vec<String> = results
                .iter()
                .flatten()
                .next()
                .map(|ev| {
                    ev.values
                        .iter()
                        .filter(|(name, _)| name.starts_with(obs.as_str()))
                        .map(|(name, _)| name.clone())
                        .collect()
                })
                .unwrap_or_else(|| vec![obs.clone()]);
            let mut header: Vec<String> = sweep_names.clone();
            header.extend(value_columns.iter().cloned());
            header.push("status".into());
            writeln!(file, "{}", header.join(","))?;
            for (point, result) in points.iter().zip(results.iter()) {
                let mut row: Vec<String> = point.iter().map(|(_, v)| format_float(*v)).collect();
                match result {
                    Ok(ev) => {
                        for col in &value_columns {
                            let v = ev
                                .values
                                .iter()
                                .find(|(name, _)| name == col)
                                .map(|&(_, v)| v)
                                .unwrap_or(f64::NAN);
                            row.push(format_float(v));
                        }
                        row.push("ok".into());
                    }
                    Err(msg) => {
                        for _ in &value_columns {
                            row.push(String::new());
                        }
                        row.push(format!("error: {}", msg.replace([',', '\n'], ";")));
                    }
                }
                writeln!(file, "{}", row.join(","))?;
            }
            write_gnuplot_helper(out_dir, tag, obs, &sweep_names)?;
            csv_paths.push(path);
        }
        reports.push(report);
    }

    let manifest = RunManifest {
        preset: preset.map(|s| s.to_string()),
        model: scenario.model.as_str().to_string(),
        representations: scenario
            .representations
            .iter()
            .map(|&r| representation_tag(r).to_string())
            .collect(),
        resolved_parameters: scenario.parameters.clone(),
        sweeps: scenario.sweeps.clone(),
        observables: scenario.observables.clone(),
        diagnostics: reports,
        notes,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        config_toml: scenario.config_toml.clone(),
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
    )?;

    Ok(RunArtifacts {
        csv_paths,
        manifest_path,
        manifest,
    })
}

fn write_gnuplot_helper(
    out_dir: &Path,
    tag: &str,
    obs: &str,
    sweep_names: &[String],
) -> Result<(), ScenarioError> {
    let path = out_dir.join(format!("{tag}_{obs}.gp"));
    let mut file = std::fs::File::create(&path)?;
    let x = sweep_names.len().max(1);
    writeln!(file, "set datafile separator ','")?;
    writeln!(file, "set key autotitle columnhead")?;
    writeln!(file, "set xlabel '{}'", sweep_names.last().map(String::as_str).unwrap_or("index"))?;
    writeln!(file, "set ylabel '{obs}'")?;
    writeln!(file, "plot '{tag}_{obs}.csv' using {x}:{} with linespoints", x + 1)?;
    Ok(())
}

/// Resolve the output directory: explicit flag, then `[run] out_dir`, then
/// the `RCPT_OUT_DIR` environment variable, then `./rcpt-out`.
pub fn resolve_out_dir(flag: Option<&str>, scenario: &ResolvedScenario) -> PathBuf {
    if let Some(dir) = flag {
        return PathBuf::from(dir);
    }
    if let Some(dir) = &scenario.out_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("rcpt-out")
}

/// Load a scenario from a config path. A `.json` file is treated as a run
/// manifest and its embedded config is re-parsed, so a manifest re-runs
/// bit-identically.
pub fn load_scenario(path: &Path) -> Result<ResolvedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let toml_text = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        let manifest: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ScenarioError::schema("<manifest>", e.to_string()))?;
        manifest
            .get("config_toml")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ScenarioError::schema("<manifest>", "missing config_toml field"))?
            .to_string()
    } else {
        text
    };
    let config = parse_config(&toml_text)?;
    validate(&config, &toml_text)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: &'static str,
}

/// Named desk-scale studies. Parameter blocks pin the published operating
/// points; grid resolutions and RC truncations are sized for a small
/// machine and recorded in the manifest.
pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig3-spectrum",
        description: "spin-boson spectrum dressing: extended-model gap ratio vs closed form, three coupling angles",
        config: r#"
model = "gsb"
representations = ["rc", "eff"]

[parameters]
delta = 1.0
omega = 20.0
gamma = 0.0071
temperature = 0.5
cutoff = 1000.0
rc_levels = 40

[[sweep]]
parameter = "theta"
grid = [0.0, 0.5235987755982988, 0.7853981633974483, 1.5707963267948966]

[[sweep]]
parameter = "lambda"
start = 0.0
stop = 30.0
points = 13

[outputs]
observables = ["gap_ratio", "gap_ratio_analytic"]
"#,
    },
    Preset {
        name: "fig4-thermalization",
        description: "spin-boson thermalization at theta = pi/4: QME steady state vs mean-force family",
        config: r#"
model = "gsb"
representations = ["bmr", "rc", "eff"]

[parameters]
delta = 1.0
theta = 0.7853981633974483
gamma = 0.0071
omega = 20.0
cutoff = 1000.0
temperature = 0.5

[[sweep]]
parameter = "lambda"
grid = [0.25, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0]

[outputs]
observables = ["population", "coherence", "mfgs_population", "mfgs_coherence"]
"#,
    },
    Preset {
        name: "fig5-nesb",
        description: "nonequilibrium spin-boson heat current turnover, Omega in {10, 20}",
        config: r#"
model = "nesb"
representations = ["rc", "eff"]

[parameters]
delta = 1.0
t_left = 1.0
t_right = 0.5
gamma = 0.0071
cutoff = 1000.0
rc_levels = 5

[[sweep]]
parameter = "omega"
grid = [10.0, 20.0]

[[sweep]]
parameter = "lambda"
grid = [0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 8.0, 10.0]

[outputs]
observables = ["heat_current_left", "heat_current_right"]
"#,
    },
    Preset {
        name: "fig6-cooling-window",
        description: "absorption refrigerator cooling window over (Delta, lambda_c), analytic boundary vs RC solver",
        config: r#"
model = "qar"
representations = ["rc", "eff"]

[parameters]
t_c = 0.25
t_h = 0.5
t_w = 1.5
gamma_c = 0.0071
gamma_h = 0.0071
gamma_w = 0.0071
omega_c = 20.0
cutoff = 1000.0
rc_levels = 8

[[sweep]]
parameter = "delta"
start = 0.05
stop = 1.0
points = 12

[[sweep]]
parameter = "lambda_c"
start = 0.5
stop = 10.0
points = 12

[outputs]
observables = ["cooling_current", "cooling", "cooling_analytic"]
"#,
    },
    Preset {
        name: "fig7-dqd-current",
        description: "phonon-assisted double-dot charge current vs electron-phonon coupling",
        config: r#"
model = "dqd"
representations = ["bmr", "rc", "eff"]

[parameters]
eps_left = 0.0
eps_right = 2.0
coulomb = 500.0
t_left = 10.0
t_right = 1.0
t_ph = 1.0
omega = 100.0
mu_left = -0.3
mu_right = -0.2
gamma_left = 0.1
gamma_right = 0.1
gamma_ph = 0.15915494309189535
cutoff = 1000.0
rc_levels = 10

[[sweep]]
parameter = "lambda"
grid = [1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0]

[outputs]
observables = ["charge_current"]
"#,
    },
    Preset {
        name: "fig8-thermoelectric",
        description: "double-dot thermoelectric generator vs voltage at lambda = 17.3: currents, power, efficiency",
        config: r#"
model = "dqd"
representations = ["bmr", "rc", "eff"]

[parameters]
eps_left = 0.0
eps_right = 2.0
coulomb = 500.0
t_left = 10.0
t_right = 1.0
t_ph = 1.0
omega = 100.0
mu_left = -0.3
lambda = 17.3
gamma_left = 0.1
gamma_right = 0.1
gamma_ph = 0.15915494309189535
cutoff = 1000.0
rc_levels = 10

[[sweep]]
parameter = "mu_right"
start = -0.29
stop = 0.02
points = 16

[outputs]
observables = ["charge_current", "energy_current_left", "heat_current_left", "power", "efficiency"]
"#,
    },
    Preset {
        name: "fig9-chain-magnetization",
        description: "two-qubit chain equilibrium magnetization over the (J, lambda) plane",
        config: r#"
model = "chain"
representations = ["rc"]

[parameters]
sites = 2
delta = 1.0
omega = 10.0
gamma = 0.0071
t_left = 0.5
t_right = 0.5
j_y = 0.0
j_z = 0.0
cutoff = 1000.0
rc_levels = 3

[[sweep]]
parameter = "j_x"
grid = [0.2, 0.8, 1.4, 2.0]

[[sweep]]
parameter = "lambda"
grid = [0.5, 2.0, 4.0, 6.0]

[outputs]
observables = ["magnetization"]
"#,
    },
    Preset {
        name: "fig10-chain-current",
        description: "two-qubit chain steady-state heat current over the (J, lambda) plane",
        config: r#"
model = "chain"
representations = ["rc"]

[parameters]
sites = 2
delta = 1.0
omega = 10.0
gamma = 0.0071
t_left = 0.5
t_right = 1.0
j_y = 0.0
j_z = 0.0
cutoff = 1000.0
rc_levels = 3

[[sweep]]
parameter = "j_x"
grid = [0.2, 0.8, 1.4, 2.0]

[[sweep]]
parameter = "lambda"
grid = [0.5, 2.0, 4.0, 6.0]

[outputs]
observables = ["heat_current_left", "heat_current_right"]
"#,
    },
];

/// Find a preset by name (`fig9/10-chain` maps onto the two chain presets'
/// shared prefix and is accepted for either).
pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).or_else(|| {
        if name == "fig9/10-chain" || name == "fig9-10-chain" {
            PRESETS.iter().find(|p| p.name == "fig9-chain-magnetization")
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "gsb"
representations = ["eff"]

[parameters]
theta = 0.7853981633974483
lambda = 2.0

[outputs]
observables = ["splitting"]
"#;

    #[test]
    fn minimal_config_validates_with_defaults() {
        let config = parse_config(MINIMAL).unwrap();
        let scenario = validate(&config, MINIMAL).unwrap();
        assert_eq!(scenario.model, ModelKind::Gsb);
        assert_eq!(scenario.parameters["delta"], 1.0);
        assert_eq!(scenario.parameters["omega"], 20.0);
        assert_eq!(scenario.parameters["lambda"], 2.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_offending_key() {
        let bad = MINIMAL.replace("lambda = 2.0", "lambda = 2.0\nbananas = 1.0");
        let config = parse_config(&bad).unwrap();
        match validate(&config, &bad) {
            Err(ScenarioError::Schema { key, .. }) => assert_eq!(key, "bananas"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_parameter_is_rejected() {
        let bad = MINIMAL.replace("theta = 0.7853981633974483\n", "");
        let config = parse_config(&bad).unwrap();
        match validate(&config, &bad) {
            Err(ScenarioError::Schema { key, .. }) => assert_eq!(key, "theta"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn sweep_grid_must_increase() {
        let bad = format!(
            "{MINIMAL}\n[[sweep]]\nparameter = \"lambda\"\ngrid = [2.0, 1.0]\n"
        );
        let config = parse_config(&bad).unwrap();
        assert!(matches!(
            validate(&config, &bad),
            Err(ScenarioError::Schema { .. })
        ));
    }

    #[test]
    fn unknown_observable_is_rejected() {
        let bad = MINIMAL.replace("splitting", "entropy");
        let config = parse_config(&bad).unwrap();
        match validate(&config, &bad) {
            Err(ScenarioError::Schema { key, .. }) => assert_eq!(key, "entropy"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn linear_sweep_expansion() {
        let text = format!(
            "{MINIMAL}\n[[sweep]]\nparameter = \"lambda\"\nstart = 0.0\nstop = 1.0\npoints = 5\n"
        );
        let config = parse_config(&text).unwrap();
        let scenario = validate(&config, &text).unwrap();
        assert_eq!(scenario.sweeps[0].1, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn cartesian_grid_order_is_row_major() {
        let sweeps = vec![
            ("a".to_string(), vec![1.0, 2.0]),
            ("b".to_string(), vec![10.0, 20.0]),
        ];
        let points = grid_points(&sweeps);
        let flat: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p[0].1, p[1].1))
            .collect();
        assert_eq!(flat, vec![(1.0, 10.0), (1.0, 20.0), (2.0, 10.0), (2.0, 20.0)]);
    }

    #[test]
    fn all_presets_parse_and_validate() {
        for preset in PRESETS {
            let config = parse_config(preset.config)
                .unwrap_or_else(|e| panic!("{}: {e}", preset.name));
            validate(&config, preset.config).unwrap_or_else(|e| panic!("{}: {e}", preset.name));
        }
        assert!(find_preset("fig9/10-chain").is_some());
        assert!(find_preset("nope").is_none());
    }

    #[test]
    fn float_format_has_seventeen_significant_digits() {
        let s = format_float(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }
}
