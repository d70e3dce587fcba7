//! Ground states by projected gradient descent on the Nehari manifold.
//!
//! Each iteration takes a gradient step, replaces the trial pair by its
//! componentwise modulus, rescales it back onto the manifold and accepts the
//! result under an Armijo test on `I`. Every accepted iterate is therefore
//! nonnegative, lies on the manifold and has lower energy than its
//! predecessor.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{self, Evaluation, PhysParams, StatePair};
use crate::error::{NlsError, Result};
use crate::grid::{Field, GridSpec};
use crate::nehari::{self, DEFAULT_PROJECTION_TOLERANCE};

/// Parameters of one Gaussian bump `a * exp(-|x - c|^2 / (2 w^2))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bump {
    /// Center per axis; a single entry is broadcast to every axis.
    pub center: Vec<f64>,
    pub width: f64,
    /// Zero seeds the channel with the zero field.
    pub amplitude: f64,
}

impl Bump {
    fn center_at(&self, axis: usize) -> f64 {
        match self.center.len() {
            0 => 0.0,
            1 => self.center[0],
            _ => self.center[axis],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    GaussianPair { u: Bump, v: Bump },
    Custom(StatePair),
}

impl InitialGuess {
    pub fn kind(&self) -> &'static str {
        match self {
            InitialGuess::GaussianPair { .. } => "gaussian-pair",
            InitialGuess::Custom(_) => "custom-fields",
        }
    }
}

impl Default for InitialGuess {
    fn default() -> Self {
        let bump = Bump {
            center: vec![0.0],
            width: 1.0,
            amplitude: 1.0,
        };
        InitialGuess::GaussianPair {
            u: bump.clone(),
            v: bump,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub init: InitialGuess,
    pub rng_seed: u64,
    /// Relative spread of the seeded amplitude and width perturbation,
    /// shared by both channels.
    pub jitter: f64,
    pub step0: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub min_step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub stagnation_window: usize,
    pub restarts: usize,
    pub projection_tol: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            init: InitialGuess::default(),
            rng_seed: 0,
            jitter: 0.1,
            step0: 1.0,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            min_step: 1e-12,
            max_iters: 500_000,
            grad_tol: 1e-6,
            energy_tol: 1e-20,
            stagnation_window: 5,
            restarts: 1,
            projection_tol: DEFAULT_PROJECTION_TOLERANCE,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step0", self.step0),
            ("min_step", self.min_step),
            ("grad_tol", self.grad_tol),
            ("energy_tol", self.energy_tol),
            ("projection_tol", self.projection_tol),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(NlsError::Domain(format!("{name} must be > 0, got {value}")));
            }
        }
        for (name, value) in [("armijo_shrink", self.armijo_shrink), ("armijo_slope", self.armijo_slope)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(NlsError::Domain(format!("{name} must lie in (0, 1), got {value}")));
            }
        }
        if !(self.jitter.is_finite() && (0.0..1.0).contains(&self.jitter)) {
            return Err(NlsError::Domain(format!("jitter must lie in [0, 1), got {}", self.jitter)));
        }
        if self.restarts == 0 {
            return Err(NlsError::Domain("restarts must be at least 1".into()));
        }
        if self.stagnation_window == 0 {
            return Err(NlsError::Domain("stagnation_window must be at least 1".into()));
        }
        if let InitialGuess::GaussianPair { u, v } = &self.init {
            for (name, b) in [("u", u), ("v", v)] {
                if !(b.width.is_finite() && b.width > 0.0) {
                    return Err(NlsError::Domain(format!("{name} bump width must be > 0")));
                }
                if !(b.amplitude.is_finite() && b.amplitude >= 0.0) {
                    return Err(NlsError::Domain(format!("{name} bump amplitude must be >= 0")));
                }
                if b.center.iter().any(|c| !c.is_finite()) {
                    return Err(NlsError::Domain(format!("{name} bump center must be finite")));
                }
            }
            if u.amplitude == 0.0 && v.amplitude == 0.0 {
                return Err(NlsError::Domain(
                    "both bump amplitudes are zero; the Nehari manifold excludes the zero state".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    EnergyStagnation,
    MaxIterations,
    LineSearchFailed,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    /// Gradient norm at the state the step started from.
    pub grad_norm: f64,
    pub t0: f64,
    pub step: f64,
    pub nehari_residual: f64,
    pub min_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    #[serde(rename = "I0_estimate")]
    pub i0_estimate: f64,
    pub grad_norm: f64,
    /// `|F| / L` at the returned state.
    pub nehari_residual: f64,
    pub pde_residual_max: f64,
    pub t0_history: Vec<f64>,
    pub seed: u64,
    /// Final energy of every restart, in seed order.
    pub restart_energies: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

pub fn initial_guess(grid: &GridSpec, cfg: &SolveConfig) -> Result<StatePair> {
    seeded_guess(grid, cfg, cfg.rng_seed)
}

fn seeded_guess(grid: &GridSpec, cfg: &SolveConfig, seed: u64) -> Result<StatePair> {
    cfg.validate()?;
    match &cfg.init {
        InitialGuess::Custom(s) => {
            if s.grid() != grid {
                return Err(NlsError::GridMismatch("custom initial fields".into()));
            }
            if s.is_zero() {
                return Err(NlsError::Domain("custom initial state is zero".into()));
            }
            Ok(s.clone())
        }
        InitialGuess::GaussianPair { u, v } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amp_scale = 1.0 + cfg.jitter * rng.random_range(-1.0..=1.0);
            let width_scale = 1.0 + cfg.jitter * rng.random_range(-1.0..=1.0);
            let sample = |b: &Bump| -> Field {
                let (a, w) = (b.amplitude * amp_scale, b.width * width_scale);
                Field::from_fn(*grid, |x| {
                    let r2: f64 = (0..grid.dim()).map(|k| (x[k] - b.center_at(k)).powi(2)).sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
            };
            let state = StatePair::new(sample(u), sample(v))?;
            if state.is_zero() {
                return Err(NlsError::Domain(
                    "initial bumps vanish on every interior node".into(),
                ));
            }
            Ok(state)
        }
    }
}

fn check_iterate(eval: &Evaluation) -> Result<()> {
    let b = &eval.breakdown;
    if b.quadratic <= 0.0 || (b.power <= 0.0 && b.coupling <= 0.0) {
        return Err(NlsError::Domain(format!(
            "iterate collapsed to the zero state (L = {}, Mp = {}, Nlam = {})",
            b.quadratic, b.power, b.coupling
        )));
    }
    Ok(())
}

struct Run {
    state: StatePair,
    report: SolveReport,
}

fn descend(
    start: StatePair,
    prm: &PhysParams,
    cfg: &SolveConfig,
    seed: u64,
) -> Result<Run> {
    let clock = Instant::now();
    let first = nehari::project(&start, prm, cfg.projection_tol)?;
    let mut t0_history = vec![first.t0];
    let mut state = first.state;
    let mut eval = energy::evaluate(&state, prm)?;
    check_iterate(&eval)?;

    let mut trace = Vec::new();
    let mut alpha = cfg.step0;
    let mut stagnant = 0;
    let mut iterations = 0;
    let stop_reason = loop {
        let grad_norm = eval.gradient.l2_norm()?;
        if grad_norm <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        let target_slope = cfg.armijo_slope * grad_norm * grad_norm;
        let mut trial_alpha = if iterations == 0 { cfg.step0 } else { (2.0 * alpha).min(cfg.step0) };

        let accepted = loop {
            let trial = state.add_scaled(-trial_alpha, &eval.gradient)?.abs();
            let trial_bd = energy::plain_breakdown(&trial, prm)?;
            let root = nehari::fiber_root(&trial_bd, prm.p, cfg.projection_tol).map_err(|e| {
                NlsError::Domain(format!("iteration {iterations}: trial step collapsed ({e})"))
            })?;
            let candidate = trial.scaled(root.t0);
            let cand_eval = energy::evaluate(&candidate, prm)?;
            let decrease = cand_eval.energy_decrease_from(&eval);
            if decrease >= trial_alpha * target_slope {
                break Some((candidate, cand_eval, root.t0, decrease));
            }
            trial_alpha *= cfg.armijo_shrink;
            if trial_alpha < cfg.min_step {
                break None;
            }
        };
        let Some((candidate, cand_eval, t0, decrease)) = accepted else {
            break StopReason::LineSearchFailed;
        };
        check_iterate(&cand_eval)?;
        let change = decrease.abs() / eval.breakdown.energy.abs().max(f64::MIN_POSITIVE);
        iterations += 1;
        alpha = trial_alpha;
        state = candidate;
        eval = cand_eval;
        t0_history.push(t0);
        trace.push(TraceRow {
            iter: iterations,
            energy: eval.breakdown.energy,
            grad_norm,
            t0,
            step: alpha,
            nehari_residual: eval.breakdown.relative_nehari_residual(),
            min_value: state.min_value(),
        });

        if change <= cfg.energy_tol {
            stagnant += 1;
            if stagnant >= cfg.stagnation_window {
                break StopReason::EnergyStagnation;
            }
        } else {
            stagnant = 0;
        }
    };

    let grad_norm = eval.gradient.l2_norm()?;
    let nehari_residual = eval.breakdown.relative_nehari_residual();
    let report = SolveReport {
        converged: grad_norm <= cfg.grad_tol && nehari_residual <= cfg.projection_tol,
        stop_reason,
        iterations,
        i0_estimate: eval.breakdown.energy,
        grad_norm,
        nehari_residual,
        pde_residual_max: eval.gradient.max_abs(),
        t0_history,
        seed,
        restart_energies: Vec::new(),
        wall_time: clock.elapsed(),
        trace,
    };
    Ok(Run { state, report })
}

/// Minimizes `I` over the Nehari manifold. With `restarts > 1`, seeds
/// `rng_seed, rng_seed + 1, ...` run concurrently and the lowest-energy run
/// is returned.
pub fn solve_ground_state(
    grid: &GridSpec,
    prm: &PhysParams,
    cfg: &SolveConfig,
) -> Result<(StatePair, SolveReport)> {
    prm.validate()?;
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.restarts as u64).map(|k| cfg.rng_seed.wrapping_add(k)).collect();
    let runs: Vec<Result<Run>> = if seeds.len() == 1 {
        vec![seeded_guess(grid, cfg, seeds[0]).and_then(|s| descend(s, prm, cfg, seeds[0]))]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    scope.spawn(move || {
                        seeded_guess(grid, cfg, seed).and_then(|s| descend(s, prm, cfg, seed))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        })
    };
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let energies: Vec<f64> = runs.iter().map(|r| r.report.i0_estimate).collect();
    let best = energies
        .iter()
        .enumerate()
        .fold(0, |best, (k, &e)| if e < energies[best] { k } else { best });
    let mut run = runs.swap_remove(best);
    run.report.restart_energies = energies;
    Ok((run.state, run.report))
}

/// One sweep entry: the coupling and the outcome of its solve.
pub type SweepEntry = (f64, Result<(StatePair, SolveReport)>);

/// Solves for each coupling in order, warm-starting from the last successful
/// solution. A failed entry is reported in place and does not stop the sweep.
pub fn lambda_sweep(
    grid: &GridSpec,
    base: &PhysParams,
    lambdas: &[f64],
    cfg: &SolveConfig,
) -> Result<Vec<SweepEntry>> {
    if lambdas.is_empty() {
        return Err(NlsError::Domain("lambda list is empty".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(NlsError::Domain(format!("lambda must be > 0, got {bad}")));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut warm: Option<StatePair> = None;
    for &lambda in lambdas {
        let result = base.with_lambda(lambda).and_then(|prm| {
            let mut entry_cfg = cfg.clone();
            if let Some(s) = &warm {
                entry_cfg.init = InitialGuess::Custom(s.clone());
            }
            solve_ground_state(grid, &prm, &entry_cfg)
        });
        if let Ok((state, _)) = &result {
            warm = Some(state.clone());
        }
        out.push((lambda, result));
    }
    Ok(out)
}
