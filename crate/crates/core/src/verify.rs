//! Invariant suite behind the `verify` subcommand.
//!
//! Checks the variational identities on randomized states, then solves the
//! configured problem and audits every accepted iterate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{self, PhysParams, StatePair};
use crate::error::Result;
use crate::grid::{self, Field, GridSpec};
use crate::minimize::{self, SolveConfig, SolveReport, TraceRow};
use crate::nehari;

pub const P_VALUES: [f64; 5] = [1.5, 2.0, 3.0, 4.0, 5.0];
pub const LAMBDA_VALUES: [f64; 3] = [0.5, 1.0, 2.0];
const RANDOM_STATES: usize = 200;
const GRADIENT_SAMPLES: usize = 50;
const FD_STEP: f64 = 1e-6;
/// Random states use at most this many nodes per axis.
const MAX_RANDOM_AXIS: usize = 33;
/// Relative rounding allowance in the coercivity bound, which is attained
/// with equality at p = 3.
const COERCIVITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
}

impl Check {
    fn new(name: &str, threshold: f64) -> Self {
        Check {
            name: name.to_string(),
            passed: true,
            cases: 0,
            worst: 0.0,
            threshold,
        }
    }

    /// Records a quantity that must stay at or below the threshold.
    fn at_most(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.threshold {
            self.passed = false;
        }
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
    }

    /// Records a boolean condition; `worst` counts failures.
    fn holds(&mut self, ok: bool) {
        self.cases += 1;
        if !ok {
            self.passed = false;
            self.worst += 1.0;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub checks: Vec<Check>,
    pub solve: SolveReport,
    #[serde(skip)]
    pub state: StatePair,
}

impl VerifyOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Smooth positive random state: a few Gaussian bumps per channel plus a
/// small positive floor on interior nodes.
pub fn random_positive_state(rng: &mut ChaCha8Rng, grid: &GridSpec) -> StatePair {
    let hw = grid.half_width();
    let channel = |rng: &mut ChaCha8Rng| {
        let bumps: Vec<(f64, [f64; 2], f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.1..3.0),
                    [rng.random_range(-0.5 * hw..0.5 * hw), rng.random_range(-0.5 * hw..0.5 * hw)],
                    rng.random_range(0.05 * hw..0.4 * hw),
                )
            })
            .collect();
        let floor = rng.random_range(1e-3..1e-1);
        Field::from_fn(*grid, |x| {
            floor
                + bumps
                    .iter()
                    .map(|(a, c, w)| {
                        let r2: f64 = (0..grid.dim()).map(|k| (x[k] - c[k]).powi(2)).sum();
                        a * (-r2 / (2.0 * w * w)).exp()
                    })
                    .sum::<f64>()
        })
    };
    let u = channel(rng);
    let v = channel(rng);
    StatePair::new(u, v).expect("same grid")
}

fn random_signed_state(rng: &mut ChaCha8Rng, grid: &GridSpec) -> StatePair {
    let u = Field::from_fn(*grid, |_| rng.random_range(-1.0..1.0));
    let v = Field::from_fn(*grid, |_| rng.random_range(-1.0..1.0));
    StatePair::new(u, v).expect("same grid")
}

/// Audits the trace of an accepted-iterate sequence.
pub fn audit_trace(trace: &[TraceRow], initial_energy: f64, checks: &mut Vec<Check>) {
    let mut descent = Check::new("solve: monotone descent", 0.0);
    let mut positivity = Check::new("solve: componentwise nonnegative iterates", 0.0);
    let mut manifold = Check::new("solve: |F|/L on accepted iterates", 1e-10);
    let mut floor = Check::new("solve: I > 0 on accepted iterates", 0.0);
    let mut last = initial_energy;
    for row in trace {
        descent.at_most((row.energy - last).max(0.0));
        positivity.at_most((-row.min_value).max(0.0));
        manifold.at_most(row.nehari_residual);
        floor.holds(row.energy > 0.0);
        last = row.energy;
    }
    checks.extend([descent, positivity, manifold, floor]);
}

pub fn run_invariant_suite(grid: &GridSpec, prm: &PhysParams, cfg: &SolveConfig) -> Result<VerifyOutcome> {
    let sample_grid = GridSpec::new(grid.dim(), grid.half_width(), grid.nodes_per_axis().min(MAX_RANDOM_AXIS))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut checks = Vec::new();

    let mut membership = Check::new("nehari: |F|/L after projection", 1e-10);
    let mut idempotence = Check::new("nehari: |t0 - 1| on re-projection", 1e-10);
    let mut decomposition = Check::new("nehari: on-manifold decomposition (relative)", 1e-10);
    let mut coercivity = Check::new("nehari: regime-wise coercivity and I > 0", 0.0);
    let mut literal_max = Check::new("nehari: literal max-constant bound (informational)", f64::INFINITY);
    let mut constraint = Check::new("energy: d/dt F(t s) vs 2L-(p+1)Mp-8Nlam (relative)", 1e-8);
    let mut constraint_sign = Check::new("energy: d/dt F(t s) < 0 on the manifold", 0.0);
    for k in 0..RANDOM_STATES {
        let p = P_VALUES[k % P_VALUES.len()];
        let lambda = LAMBDA_VALUES[(k / P_VALUES.len()) % LAMBDA_VALUES.len()];
        let local = PhysParams::new(prm.sigma1, prm.sigma2, prm.omega, lambda, p)?;
        let s = random_positive_state(&mut rng, &sample_grid);
        let proj = nehari::project(&s, &local, cfg.projection_tol)?;
        let b = energy::breakdown(&proj.state, &local)?;
        membership.at_most(b.nehari.abs() / b.quadratic);
        idempotence.at_most((nehari::project(&proj.state, &local, cfg.projection_tol)?.t0 - 1.0).abs());
        decomposition.at_most(rel(nehari::manifold_energy(&b, p), b.energy));
        coercivity.holds(b.energy >= nehari::coercivity_constant(p) * b.quadratic * (1.0 - COERCIVITY_SLACK) && b.energy > 0.0);
        let max_constant = ((p - 1.0) / (2.0 * (p + 1.0))).max(0.25);
        literal_max.holds(b.energy >= max_constant * b.quadratic * (1.0 - COERCIVITY_SLACK));
        let f = |t: f64| energy::eval_f(&s.scaled(t), &local);
        let fd = (f(1.0 + FD_STEP)? - f(1.0 - FD_STEP)?) / (2.0 * FD_STEP);
        constraint.at_most(rel(fd, nehari::constraint_derivative(&energy::breakdown(&s, &local)?, p)));
        constraint_sign.holds(nehari::constraint_derivative(&b, p) < 0.0);
    }
    // failures of the literal reading are expected for p in (1, 3); they are
    // reported, not enforced
    literal_max.passed = true;
    checks.extend([membership, idempotence, decomposition, coercivity, literal_max, constraint, constraint_sign]);

    let mut gradient = Check::new("energy: grad_I pairing vs central difference (relative)", 1e-6);
    let mut fiber = Check::new("energy: F vs d/dt I(t s) (relative)", 1e-8);
    let mut parity = Check::new("energy: I(|u|,|v|) <= I(u,v)", 0.0);
    let mut sbp = Check::new("grid: summation by parts (relative)", 1e-12);
    for _ in 0..GRADIENT_SAMPLES {
        let s = random_signed_state(&mut rng, &sample_grid);
        let d = random_signed_state(&mut rng, &sample_grid);
        let analytic = energy::grad_i(&s, prm)?.l2_inner(&d)?;
        let fd = (energy::eval_i(&s.add_scaled(FD_STEP, &d)?, prm)?
            - energy::eval_i(&s.add_scaled(-FD_STEP, &d)?, prm)?)
            / (2.0 * FD_STEP);
        gradient.at_most(rel(analytic, fd));
        let i = |t: f64| energy::eval_i(&s.scaled(t), prm);
        let fd_t = (i(1.0 + FD_STEP)? - i(1.0 - FD_STEP)?) / (2.0 * FD_STEP);
        fiber.at_most(rel(energy::eval_f(&s, prm)?, fd_t));
        parity.holds(energy::eval_i(&s.abs(), prm)? <= energy::eval_i(&s, prm)?);
        let lap = grid::laplacian(s.u())?;
        let pairing: f64 = s.u().values().iter().zip(lap.values()).map(|(a, b)| a * b).sum::<f64>()
            * sample_grid.cell_volume();
        sbp.at_most(rel(-pairing, grid::dirichlet_energy(s.u())?));
    }
    checks.extend([gradient, fiber, parity, sbp]);

    let start = minimize::initial_guess(grid, cfg)?;
    let initial_energy = nehari::project(&start, prm, cfg.projection_tol)?.breakdown.energy;
    let (state, solve) = minimize::solve_ground_state(grid, prm, cfg)?;
    audit_trace(&solve.trace, initial_energy, &mut checks);
    let b = energy::breakdown(&state, prm)?;
    let mut final_state = Check::new("solve: final state on manifold with I0 > 0", 1e-10);
    final_state.at_most(if b.energy > 0.0 && state.min_value() >= 0.0 {
        b.relative_nehari_residual()
    } else {
        f64::INFINITY
    });
    checks.push(final_state);

    Ok(VerifyOutcome { checks, solve, state })
}
