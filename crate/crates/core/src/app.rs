//! Subcommand orchestration for the `nehari` binary.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 non-convergence,
//! 3 invariant violation. Every run writes `report.json` into the output
//! directory, failures included.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{parse_config, InitKind, RunConfig, DEFAULT_CONFIG};
use crate::energy::{self, PhysParams, StatePair};
use crate::error::{NlsError, Result};
use crate::evolve::{self, EvolutionSummary};
use crate::io;
use crate::minimize::{self, InitialGuess, SolveConfig, SolveReport};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Evolve,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Evolve => "evolve",
            Command::Sweep => "sweep",
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| NlsError::config("--config", format!("cannot read {}: {e}", p.display())))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &overrides.out {
        cfg.output.directory = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.solver.solve.rng_seed = seed;
    }
    Ok(cfg)
}

fn exit_code_for(err: &NlsError) -> i32 {
    match err {
        NlsError::Config { .. } | NlsError::Io(_) | NlsError::FieldFile(_) | NlsError::Json(_) => EXIT_USAGE,
        _ => EXIT_NOT_CONVERGED,
    }
}

fn error_kind(err: &NlsError) -> &'static str {
    match err {
        NlsError::NumericalInput(_) => "numerical-input",
        NlsError::GridMismatch(_) => "grid-mismatch",
        NlsError::Domain(_) => "domain",
        NlsError::Config { .. } => "config",
        NlsError::Integrator { .. } => "integrator",
        NlsError::FieldFile(_) => "field-file",
        NlsError::Io(_) => "io",
        NlsError::Json(_) => "json",
    }
}

pub fn error_entry(err: &NlsError) -> Value {
    json!({ "kind": error_kind(err), "message": err.to_string() })
}

fn config_echo(cfg: &RunConfig) -> Value {
    Value::Object(
        cfg.entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect::<Map<_, _>>(),
    )
}

struct Output<'a> {
    cfg: &'a RunConfig,
}

impl Output<'_> {
    fn dir(&self) -> &Path {
        &self.cfg.output.directory
    }

    fn fields(&self, name: &str, s: &StatePair) -> Result<()> {
        if self.cfg.output.wants("csv") {
            io::write_fields(&self.dir().join(name), s)?;
        }
        Ok(())
    }

    fn trace(&self, report: &SolveReport) -> Result<()> {
        if self.cfg.output.wants("csv") {
            fs::write(self.dir().join("trace.csv"), io::trace_to_csv(&report.trace))?;
        }
        Ok(())
    }

    fn report(&self, command: Command, body: Map<String, Value>) -> Result<()> {
        let mut root = Map::new();
        root.insert("command".into(), Value::String(command.name().into()));
        root.insert("config".into(), config_echo(self.cfg));
        root.extend(body);
        let mut text = serde_json::to_string_pretty(&Value::Object(root))?;
        text.push('\n');
        fs::write(self.dir().join("report.json"), text)?;
        Ok(())
    }
}

/// Resolves the solver configuration, loading custom initial fields.
pub fn solve_config(cfg: &RunConfig) -> Result<SolveConfig> {
    let mut solve = cfg.solver.solve.clone();
    if cfg.solver.init_kind == InitKind::CustomFields {
        let path = cfg.solver.init_file.as_ref().expect("validated at parse time");
        solve.init = InitialGuess::Custom(io::read_fields(path, &cfg.grid)?);
    }
    Ok(solve)
}

/// Runs one subcommand and returns the process exit code. Errors are
/// written into `report.json` when the output directory is usable.
pub fn run(command: Command, cfg: &RunConfig) -> i32 {
    if let Err(err) = fs::create_dir_all(&cfg.output.directory) {
        eprintln!("error: cannot create {}: {err}", cfg.output.directory.display());
        return EXIT_USAGE;
    }
    let out = Output { cfg };
    let result = match command {
        Command::Solve => run_solve(&out),
        Command::Verify => run_verify(&out),
        Command::Evolve => run_evolve(&out),
        Command::Sweep => run_sweep(&out),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let mut body = Map::new();
            body.insert("error".into(), error_entry(&err));
            if let Err(write_err) = out.report(command, body) {
                eprintln!("error: cannot write report: {write_err}");
            }
            exit_code_for(&err)
        }
    }
}

/// The `solve` object of `report.json`: the report fields plus the
/// functional breakdown of the returned state.
pub fn solve_report_value(report: &SolveReport, s: &StatePair, prm: &PhysParams) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    v["breakdown"] = serde_json::to_value(energy::breakdown(s, prm)?)?;
    Ok(v)
}

fn solve_body(report: &SolveReport, s: &StatePair, cfg: &RunConfig) -> Result<Value> {
    solve_report_value(report, s, &cfg.params)
}

fn run_solve(out: &Output) -> Result<i32> {
    let cfg = out.cfg;
    let (state, report) = minimize::solve_ground_state(&cfg.grid, &cfg.params, &solve_config(cfg)?)?;
    eprintln!(
        "solve: {} iterations, I0 = {:.12}, grad = {:.3e}, {:?} ({:.2?})",
        report.iterations, report.i0_estimate, report.grad_norm, report.stop_reason, report.wall_time
    );
    out.fields("solution.csv", &state)?;
    out.trace(&report)?;
    let mut body = Map::new();
    body.insert("solve".into(), solve_body(&report, &state, cfg)?);
    out.report(Command::Solve, body)?;
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_verify(out: &Output) -> Result<i32> {
    let cfg = out.cfg;
    let outcome = verify::run_invariant_suite(&cfg.grid, &cfg.params, &solve_config(cfg)?)?;
    for c in &outcome.checks {
        eprintln!(
            "{} {} (cases {}, worst {:.3e}, threshold {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.worst,
            c.threshold
        );
    }
    out.fields("solution.csv", &outcome.state)?;
    out.trace(&outcome.solve)?;
    let mut body = Map::new();
    body.insert("checks".into(), serde_json::to_value(&outcome.checks)?);
    body.insert("solve".into(), solve_body(&outcome.solve, &outcome.state, cfg)?);
    body.insert("passed".into(), Value::Bool(outcome.all_passed()));
    out.report(Command::Verify, body)?;
    Ok(if !outcome.all_passed() {
        EXIT_INVARIANT
    } else if !outcome.solve.converged {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    })
}

fn evolution_passes(summary: &EvolutionSummary, cfg: &RunConfig) -> bool {
    summary.max_modulus_drift <= cfg.evolve.modulus_tol
        && summary.max_mass_drift <= cfg.evolve.mass_tol
        && summary.max_phase_drift <= cfg.evolve.phase_tol
}

fn run_evolve(out: &Output) -> Result<i32> {
    let cfg = out.cfg;
    let mut body = Map::new();
    let (state, converged) = match &cfg.evolve.input {
        Some(path) => (io::read_fields(path, &cfg.grid)?, true),
        None => {
            let (state, report) = minimize::solve_ground_state(&cfg.grid, &cfg.params, &solve_config(cfg)?)?;
            out.fields("solution.csv", &state)?;
            out.trace(&report)?;
            body.insert("solve".into(), solve_body(&report, &state, cfg)?);
            (state, report.converged)
        }
    };
    let ev = evolve::evolve_state(&state, &cfg.params, cfg.evolve.dt, cfg.evolve.steps, cfg.evolve.sample_every)?;
    let passed = evolution_passes(&ev.summary, cfg);
    eprintln!(
        "evolve: modulus drift {:.3e}, mass drift {:.3e}, phase drift {:.3e}",
        ev.summary.max_modulus_drift, ev.summary.max_mass_drift, ev.summary.max_phase_drift
    );
    body.insert("evolution".into(), serde_json::to_value(&ev.summary)?);
    body.insert("passed".into(), Value::Bool(passed));
    out.report(Command::Evolve, body)?;
    Ok(if !passed {
        EXIT_INVARIANT
    } else if !converged {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    })
}

fn run_sweep(out: &Output) -> Result<i32> {
    let cfg = out.cfg;
    let results = minimize::lambda_sweep(&cfg.grid, &cfg.params, &cfg.sweep_lambdas, &solve_config(cfg)?)?;
    let mut entries = Vec::new();
    let mut all_converged = true;
    let mut last_state = None;
    for (lambda, result) in &results {
        match result {
            Ok((state, report)) => {
                eprintln!("sweep: lambda = {lambda}, I0 = {:.12}, {:?}", report.i0_estimate, report.stop_reason);
                all_converged &= report.converged;
                let mut params = cfg.params;
                params.lambda = *lambda;
                let v = solve_report_value(report, state, &params)?;
                entries.push(json!({ "lambda": lambda, "solve": v }));
                last_state = Some(state);
            }
            Err(err) => {
                all_converged = false;
                entries.push(json!({ "lambda": lambda, "error": error_entry(err) }));
            }
        }
    }
    if let Some(state) = last_state {
        out.fields("solution.csv", state)?;
    }
    let mut body = Map::new();
    body.insert("sweep".into(), Value::Array(entries));
    out.report(Command::Sweep, body)?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
