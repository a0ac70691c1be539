//! Run configuration: TOML on disk, dot-path overrides, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikelab_core::problem::{CoefficientField, DomainSpec, ProblemData};
use spikelab_core::profiles::InnerProduct;
use spikelab_core::reduction::{CorrectionMode, ReductionOptions};
use spikelab_core::solver::{validate_ladder, SolveParams};
use toml::Value;

/// Bad configuration; the message always names the key at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemData,
    pub numerics: Numerics,
    pub experiment: Experiment,
    /// Output directory, or file for single-table subcommands.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerProductName {
    Energy,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionModeName {
    ProjectedNewton,
    Contraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Nodes per axis.
    pub resolution: Vec<usize>,
    pub ground_state_tol: f64,
    pub newton_tol: f64,
    pub max_iters: usize,
    pub min_damping: f64,
    /// Single-ε runs.
    pub eps: f64,
    pub eps_ladder: Vec<f64>,
    pub correction_tol: f64,
    pub correction_max_iters: usize,
    pub tangent_step: f64,
    pub grad_step: Option<f64>,
    pub inner_product: InnerProductName,
    pub correction_mode: CorrectionModeName,
    pub allow_unresolved: bool,
    pub critical_tol: f64,
    /// Write grid and operator dumps beside the outputs.
    pub debug_dump: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    /// Continuation start; the lowest Γ minimum when absent.
    pub q0: Option<Vec<f64>>,
    /// Reduction center.
    pub q: Option<Vec<f64>>,
    /// Points per axis for Γ scans and expansion lattices.
    pub lattice: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemData {
                dim: 2,
                exponent: 3.0,
                j: CoefficientField::constant(1.0),
                v: CoefficientField::QuadraticWell { base: 1.0, center: vec![0.5, 0.5], curvature: 1.0 },
                domain: DomainSpec::unit_box(2),
            },
            numerics: Numerics::default(),
            experiment: Experiment::default(),
            output: None,
        }
    }
}

impl Default for Numerics {
    fn default() -> Self {
        let solve = SolveParams::default();
        let red = ReductionOptions::default();
        Numerics {
            resolution: vec![128, 128],
            ground_state_tol: 1e-10,
            newton_tol: solve.newton_tol,
            max_iters: solve.max_iters,
            min_damping: solve.min_damping,
            eps: solve.eps,
            eps_ladder: solve.ladder,
            correction_tol: red.tol,
            correction_max_iters: red.max_iters,
            tangent_step: red.tangent_step,
            grad_step: red.grad_step,
            inner_product: InnerProductName::Energy,
            correction_mode: CorrectionModeName::ProjectedNewton,
            allow_unresolved: false,
            critical_tol: 1e-10,
            debug_dump: false,
        }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment { q0: None, q: None, lattice: 8, seed: 0 }
    }
}

impl RunConfig {
    /// Read `path` (or start from defaults), apply `overrides` in order, validate.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut doc = match Value::try_from(RunConfig::default()) {
            Ok(Value::Table(t)) => t,
            _ => unreachable!("defaults serialize to a table"),
        };
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| err("config", format!("{}: {e}", p.display())))?;
            let file = text.parse::<toml::Table>().map_err(|e| err("config", e.message()))?;
            merge(&mut doc, file);
        }
        for (key, value) in overrides {
            set_path(&mut doc, key, parse_value(value))?;
        }
        precheck(&doc)?;
        let cfg: RunConfig = Value::Table(doc).try_into().map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem.validate().map_err(|e| err("problem", e))?;
        let n = &self.numerics;
        validate_ladder(&n.eps_ladder).map_err(|e| err("numerics.eps_ladder", e))?;
        if n.resolution.len() != self.problem.dim {
            return Err(err("numerics.resolution", format!("expected {} entries, got {}", self.problem.dim, n.resolution.len())));
        }
        if n.resolution.iter().any(|&k| k < 8) {
            return Err(err("numerics.resolution", "need at least 8 nodes per axis"));
        }
        for (key, v) in [
            ("numerics.ground_state_tol", n.ground_state_tol),
            ("numerics.newton_tol", n.newton_tol),
            ("numerics.eps", n.eps),
            ("numerics.correction_tol", n.correction_tol),
            ("numerics.tangent_step", n.tangent_step),
            ("numerics.critical_tol", n.critical_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(key, format!("must be positive, got {v}")));
            }
        }
        if !(n.min_damping > 0.0 && n.min_damping <= 1.0) {
            return Err(err("numerics.min_damping", "must lie in (0, 1]"));
        }
        if let Some(h) = n.grad_step {
            if !(h > 0.0) {
                return Err(err("numerics.grad_step", "must be positive"));
            }
        }
        for (key, q) in [("experiment.q0", &self.experiment.q0), ("experiment.q", &self.experiment.q)] {
            if let Some(q) = q {
                if q.len() != self.problem.dim {
                    return Err(err(key, format!("expected {} coordinates", self.problem.dim)));
                }
                if !self.problem.domain.contains(q) {
                    return Err(err(key, format!("{q:?} is outside the domain")));
                }
            }
        }
        if self.experiment.lattice < 2 {
            return Err(err("experiment.lattice", "need at least 2 points per axis"));
        }
        Ok(())
    }

    pub fn solve_params(&self) -> SolveParams {
        let n = &self.numerics;
        SolveParams {
            eps: n.eps,
            newton_tol: n.newton_tol,
            max_iters: n.max_iters,
            min_damping: n.min_damping,
            ladder: n.eps_ladder.clone(),
            allow_unresolved: n.allow_unresolved,
        }
    }

    pub fn reduction_options(&self) -> ReductionOptions {
        let n = &self.numerics;
        ReductionOptions {
            inner: match n.inner_product {
                InnerProductName::Energy => InnerProduct::Energy,
                InnerProductName::L2 => InnerProduct::L2,
            },
            mode: match n.correction_mode {
                CorrectionModeName::ProjectedNewton => CorrectionMode::ProjectedNewton,
                CorrectionModeName::Contraction => CorrectionMode::Contraction,
            },
            tol: n.correction_tol,
            max_iters: n.correction_max_iters,
            tangent_step: n.tangent_step,
            grad_step: n.grad_step,
            allow_unresolved: n.allow_unresolved,
        }
    }

    /// The resolved config as TOML, headed by the version string.
    pub fn to_toml(&self, version: &str) -> String {
        let body = toml::to_string(self).expect("config serializes");
        format!("# {version}\n{body}")
    }
}

// Deep merge, except that tagged tables (coefficient fields, domains) are
// replaced whole so their variant-specific keys never mix.
fn merge(base: &mut toml::Table, incoming: toml::Table) {
    for (k, v) in incoming {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) if !t.contains_key("kind") && !t.contains_key("shape") => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `KEY=VALUE` with a dot-path key.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(err("override", format!("expected KEY=VALUE, got {s:?}"))),
    }
}

/// A TOML literal if it parses as one, else a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(doc: &mut toml::Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(err(key, "malformed key"));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let slot = table.entry(part.to_string()).or_insert_with(|| Value::Table(toml::Table::new()));
        table = match slot {
            Value::Table(t) => t,
            _ => return Err(err(key, format!("{part} is not a table"))),
        };
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

// Shape checks that serde would report without naming the key.
fn precheck(doc: &toml::Table) -> Result<(), ConfigError> {
    let numerics = doc.get("numerics").and_then(Value::as_table);
    if let Some(v) = numerics.and_then(|t| t.get("eps_ladder")) {
        let ok = v.as_array().is_some_and(|a| a.iter().all(|x| x.is_float() || x.is_integer()));
        if !ok {
            return Err(err("numerics.eps_ladder", "must be an array of numbers"));
        }
    }
    Ok(())
}

/// Comma-separated reals, as given on the command line.
pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| err(key, format!("cannot parse {t:?} as a number"))))
        .collect()
}

/// Render a list as a TOML array literal for the override machinery.
pub fn toml_array(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}
