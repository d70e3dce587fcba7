//! Run configuration in flat `section.key = value` form.
//!
//! ```text
//! # comments start with '#'
//! grid.dim = 1
//! grid.half_width = 20
//! grid.nodes_per_axis = 1025
//! params.sigma1 = 1
//! params.sigma2 = 1
//! params.omega = 1
//! params.lambda = 1
//! params.p = 3
//! solver.max_iters = 100000
//! sweep.lambdas = 0.5, 1, 2
//! ```
//!
//! The `grid` and `params` sections are required; every other key has a
//! default. Unknown and duplicate keys are rejected, and every error names
//! the offending key. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::energy::PhysParams;
use crate::error::{NlsError, Result};
use crate::grid::GridSpec;
use crate::minimize::{Bump, InitialGuess, SolveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    GaussianPair,
    CustomFields,
}

impl InitKind {
    fn as_str(self) -> &'static str {
        match self {
            InitKind::GaussianPair => "gaussian-pair",
            InitKind::CustomFields => "custom-fields",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub init_kind: InitKind,
    /// Field file (`solution.csv` layout) read when `init_kind` is
    /// `custom-fields`.
    pub init_file: Option<PathBuf>,
    /// Always holds Gaussian bumps; custom fields are attached at run time.
    pub solve: SolveConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveSection {
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
    /// Optional field file to evolve instead of a freshly solved state.
    pub input: Option<PathBuf>,
    pub modulus_tol: f64,
    pub mass_tol: f64,
    pub phase_tol: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            dt: 1e-3,
            steps: 1000,
            sample_every: 100,
            input: None,
            modulus_tol: 1e-3,
            mass_tol: 1e-10,
            phase_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl OutputSection {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub params: PhysParams,
    pub solver: SolverSection,
    pub evolve: EvolveSection,
    pub sweep_lambdas: Vec<f64>,
    pub output: OutputSection,
}

/// Configuration used when no file is given: the symmetric cubic benchmark.
pub const DEFAULT_CONFIG: &str = "\
grid.dim = 1
grid.half_width = 20
grid.nodes_per_axis = 513
params.sigma1 = 1
params.sigma2 = 1
params.omega = 1
params.lambda = 1
params.p = 3
";

const KEYS: &[&str] = &[
    "grid.dim",
    "grid.half_width",
    "grid.nodes_per_axis",
    "params.sigma1",
    "params.sigma2",
    "params.omega",
    "params.lambda",
    "params.p",
    "solver.init_kind",
    "solver.init_file",
    "solver.center_u",
    "solver.center_v",
    "solver.width_u",
    "solver.width_v",
    "solver.amplitude_u",
    "solver.amplitude_v",
    "solver.rng_seed",
    "solver.jitter",
    "solver.step0",
    "solver.armijo_shrink",
    "solver.armijo_slope",
    "solver.min_step",
    "solver.max_iters",
    "solver.grad_tol",
    "solver.energy_tol",
    "solver.stagnation_window",
    "solver.restarts",
    "solver.projection_tol",
    "evolve.dt",
    "evolve.steps",
    "evolve.sample_every",
    "evolve.input",
    "evolve.modulus_tol",
    "evolve.mass_tol",
    "evolve.phase_tol",
    "sweep.lambdas",
    "output.directory",
    "output.formats",
];

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| NlsError::config(key, "required key is missing"))
    }

    fn real(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match (self.raw(key), default) {
            (Some(text), _) => parse_real(key, text),
            (None, Some(d)) => Ok(d),
            (None, None) => parse_real(key, self.required(key)?),
        }
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let value = self.real(key, default)?;
        if value > 0.0 {
            Ok(value)
        } else {
            Err(NlsError::config(key, format!("must be > 0, got {value}")))
        }
    }

    fn count(&self, key: &str, default: Option<u64>) -> Result<u64> {
        let text = match (self.raw(key), default) {
            (Some(text), _) => text,
            (None, Some(d)) => return Ok(d),
            (None, None) => self.required(key)?,
        };
        text.parse::<u64>()
            .map_err(|_| NlsError::config(key, format!("malformed non-negative integer `{text}`")))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|text| {
                text.split(',')
                    .map(|item| parse_real(key, item.trim()))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()
    }
}

fn parse_real(key: &str, text: &str) -> Result<f64> {
    let value: f64 = text
        .parse()
        .map_err(|_| NlsError::config(key, format!("malformed number `{text}`")))?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NlsError::config(key, format!("number must be finite, got `{text}`")))
    }
}

fn in_unit_interval(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(NlsError::config(key, format!("must lie in (0, 1), got {value}")))
    }
}

fn split_entries(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            NlsError::config(line, format!("line {}: expected `section.key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(NlsError::config(key, "unknown key"));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(NlsError::config(key, "duplicate key"));
        }
    }
    Ok(Entries(map))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let e = split_entries(text)?;

    let dim = e.count("grid.dim", None)? as usize;
    if !(1..=2).contains(&dim) {
        return Err(NlsError::config("grid.dim", format!("must be 1 or 2, got {dim}")));
    }
    let half_width = e.positive("grid.half_width", None)?;
    let nodes = e.count("grid.nodes_per_axis", None)? as usize;
    if nodes < 3 {
        return Err(NlsError::config("grid.nodes_per_axis", format!("must be at least 3, got {nodes}")));
    }
    let grid = GridSpec::new(dim, half_width, nodes).map_err(|err| NlsError::config("grid", err.to_string()))?;

    let sigma1 = e.positive("params.sigma1", None)?;
    let sigma2 = e.positive("params.sigma2", None)?;
    let omega = e.positive("params.omega", None)?;
    let lambda = e.positive("params.lambda", None)?;
    let p = e.real("params.p", None)?;
    if p <= 1.0 {
        return Err(NlsError::config("params.p", format!("must satisfy p > 1, got {p}")));
    }
    let params = PhysParams::new(sigma1, sigma2, omega, lambda, p)
        .map_err(|err| NlsError::config("params", err.to_string()))?;

    let defaults = SolveConfig::default();
    let init_kind = match e.raw("solver.init_kind").unwrap_or("gaussian-pair") {
        "gaussian-pair" => InitKind::GaussianPair,
        "custom-fields" => InitKind::CustomFields,
        other => {
            return Err(NlsError::config(
                "solver.init_kind",
                format!("expected `gaussian-pair` or `custom-fields`, got `{other}`"),
            ))
        }
    };
    let init_file = e.raw("solver.init_file").map(PathBuf::from);
    if init_kind == InitKind::CustomFields && init_file.is_none() {
        return Err(NlsError::config("solver.init_file", "required when solver.init_kind = custom-fields"));
    }
    let bump = |suffix: &str| -> Result<Bump> {
        let center_key = format!("solver.center_{suffix}");
        let center = e.list(&center_key)?.unwrap_or_else(|| vec![0.0]);
        if center.len() != 1 && center.len() != dim {
            return Err(NlsError::config(
                center_key,
                format!("expected 1 or {dim} coordinates, got {}", center.len()),
            ));
        }
        let width = e.positive(&format!("solver.width_{suffix}"), Some(1.0))?;
        let amp_key = format!("solver.amplitude_{suffix}");
        let amplitude = e.real(&amp_key, Some(1.0))?;
        if amplitude < 0.0 {
            return Err(NlsError::config(amp_key, format!("must be >= 0, got {amplitude}")));
        }
        Ok(Bump { center, width, amplitude })
    };
    let (bu, bv) = (bump("u")?, bump("v")?);
    if init_kind == InitKind::GaussianPair && bu.amplitude == 0.0 && bv.amplitude == 0.0 {
        return Err(NlsError::config(
            "solver.amplitude_u",
            "both amplitudes are zero; the initial state must be nonzero",
        ));
    }
    let jitter = e.real("solver.jitter", Some(defaults.jitter))?;
    if !(0.0..1.0).contains(&jitter) {
        return Err(NlsError::config("solver.jitter", format!("must lie in [0, 1), got {jitter}")));
    }
    let restarts = e.count("solver.restarts", Some(defaults.restarts as u64))? as usize;
    if restarts == 0 {
        return Err(NlsError::config("solver.restarts", "must be at least 1"));
    }
    let stagnation_window = e.count("solver.stagnation_window", Some(defaults.stagnation_window as u64))? as usize;
    if stagnation_window == 0 {
        return Err(NlsError::config("solver.stagnation_window", "must be at least 1"));
    }
    let solve = SolveConfig {
        init: InitialGuess::GaussianPair { u: bu, v: bv },
        rng_seed: e.count("solver.rng_seed", Some(defaults.rng_seed))?,
        jitter,
        step0: e.positive("solver.step0", Some(defaults.step0))?,
        armijo_shrink: in_unit_interval(
            "solver.armijo_shrink",
            e.real("solver.armijo_shrink", Some(defaults.armijo_shrink))?,
        )?,
        armijo_slope: in_unit_interval(
            "solver.armijo_slope",
            e.real("solver.armijo_slope", Some(defaults.armijo_slope))?,
        )?,
        min_step: e.positive("solver.min_step", Some(defaults.min_step))?,
        max_iters: e.count("solver.max_iters", Some(defaults.max_iters as u64))? as usize,
        grad_tol: e.positive("solver.grad_tol", Some(defaults.grad_tol))?,
        energy_tol: e.positive("solver.energy_tol", Some(defaults.energy_tol))?,
        stagnation_window,
        restarts,
        projection_tol: e.positive("solver.projection_tol", Some(defaults.projection_tol))?,
    };

    let ed = EvolveSection::default();
    let sample_every = e.count("evolve.sample_every", Some(ed.sample_every as u64))? as usize;
    if sample_every == 0 {
        return Err(NlsError::config("evolve.sample_every", "must be at least 1"));
    }
    let evolve = EvolveSection {
        dt: e.positive("evolve.dt", Some(ed.dt))?,
        steps: e.count("evolve.steps", Some(ed.steps as u64))? as usize,
        sample_every,
        input: e.raw("evolve.input").map(PathBuf::from),
        modulus_tol: e.positive("evolve.modulus_tol", Some(ed.modulus_tol))?,
        mass_tol: e.positive("evolve.mass_tol", Some(ed.mass_tol))?,
        phase_tol: e.positive("evolve.phase_tol", Some(ed.phase_tol))?,
    };

    let sweep_lambdas = e.list("sweep.lambdas")?.unwrap_or_else(|| vec![lambda]);
    if sweep_lambdas.is_empty() || sweep_lambdas.iter().any(|l| *l <= 0.0) {
        return Err(NlsError::config("sweep.lambdas", "must be a nonempty list of positive numbers"));
    }

    let od = OutputSection::default();
    let formats = match e.raw("output.formats") {
        Some(text) => text.split(',').map(|f| f.trim().to_string()).collect::<Vec<_>>(),
        None => od.formats,
    };
    if let Some(bad) = formats.iter().find(|f| !matches!(f.as_str(), "csv" | "json")) {
        return Err(NlsError::config("output.formats", format!("unsupported format `{bad}`")));
    }
    let output = OutputSection {
        directory: e.raw("output.directory").map(PathBuf::from).unwrap_or(od.directory),
        formats,
    };

    Ok(RunConfig {
        grid,
        params,
        solver: SolverSection { init_kind, init_file, solve },
        evolve,
        sweep_lambdas,
        output,
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Every key with its effective value, in the order of the key table.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.solver.solve;
        let (bu, bv) = match &s.init {
            InitialGuess::GaussianPair { u, v } => (u.clone(), v.clone()),
            InitialGuess::Custom(_) => unreachable!("run config always stores gaussian bumps"),
        };
        let mut out = vec![
            ("grid.dim", self.grid.dim().to_string()),
            ("grid.half_width", self.grid.half_width().to_string()),
            ("grid.nodes_per_axis", self.grid.nodes_per_axis().to_string()),
            ("params.sigma1", self.params.sigma1.to_string()),
            ("params.sigma2", self.params.sigma2.to_string()),
            ("params.omega", self.params.omega.to_string()),
            ("params.lambda", self.params.lambda.to_string()),
            ("params.p", self.params.p.to_string()),
            ("solver.init_kind", self.solver.init_kind.as_str().to_string()),
        ];
        if let Some(path) = &self.solver.init_file {
            out.push(("solver.init_file", path.display().to_string()));
        }
        out.extend([
            ("solver.center_u", join(&bu.center)),
            ("solver.center_v", join(&bv.center)),
            ("solver.width_u", bu.width.to_string()),
            ("solver.width_v", bv.width.to_string()),
            ("solver.amplitude_u", bu.amplitude.to_string()),
            ("solver.amplitude_v", bv.amplitude.to_string()),
            ("solver.rng_seed", s.rng_seed.to_string()),
            ("solver.jitter", s.jitter.to_string()),
            ("solver.step0", s.step0.to_string()),
            ("solver.armijo_shrink", s.armijo_shrink.to_string()),
            ("solver.armijo_slope", s.armijo_slope.to_string()),
            ("solver.min_step", s.min_step.to_string()),
            ("solver.max_iters", s.max_iters.to_string()),
            ("solver.grad_tol", s.grad_tol.to_string()),
            ("solver.energy_tol", s.energy_tol.to_string()),
            ("solver.stagnation_window", s.stagnation_window.to_string()),
            ("solver.restarts", s.restarts.to_string()),
            ("solver.projection_tol", s.projection_tol.to_string()),
            ("evolve.dt", self.evolve.dt.to_string()),
            ("evolve.steps", self.evolve.steps.to_string()),
            ("evolve.sample_every", self.evolve.sample_every.to_string()),
        ]);
        if let Some(path) = &self.evolve.input {
            out.push(("evolve.input", path.display().to_string()));
        }
        out.extend([
            ("evolve.modulus_tol", self.evolve.modulus_tol.to_string()),
            ("evolve.mass_tol", self.evolve.mass_tol.to_string()),
            ("evolve.phase_tol", self.evolve.phase_tol.to_string()),
            ("sweep.lambdas", join(&self.sweep_lambdas)),
            ("output.directory", self.output.directory.display().to_string()),
            ("output.formats", self.output.formats.join(", ")),
        ]);
        out
    }

    /// Renders the configuration so that `parse_config` reproduces it.
    pub fn serialize(&self) -> String {
        let mut text = String::new();
        for (key, value) in self.entries() {
            writeln!(text, "{key} = {value}").expect("writing to a String cannot fail");
        }
        text
    }
}
