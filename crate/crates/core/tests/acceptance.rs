//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! when any criterion fails.
//!
//! Run with `cargo test -p nehari-core --test acceptance`. The grid
//! benchmarks are solved once and shared by the criteria that need them.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nehari_core::energy::{self, PhysParams, StatePair};
use nehari_core::evolve::{self, steady_state_residual};
use nehari_core::grid::{Field, GridSpec};
use nehari_core::minimize::{self, InitialGuess, SolveConfig, SolveReport};
use nehari_core::nehari;
use nehari_core::verify::{self, random_positive_state, LAMBDA_VALUES, P_VALUES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HALF_WIDTH: f64 = 20.0;
const RANDOM_STATES: usize = 200;
const GRADIENT_SAMPLES: usize = 50;
const FD_STEP: f64 = 1e-6;
/// Relative rounding allowance for the coercivity inequality, which holds
/// with equality at p = 3.
const COERCIVITY_SLACK: f64 = 1e-12;
/// Accepted band for a "falls about 4x" refinement ratio.
const RATIO_BAND: (f64, f64) = (3.5, 4.5);

struct Outcome {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn in_band(ratio: f64) -> bool {
    (RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn unit_params(lambda: f64) -> PhysParams {
    PhysParams::new(1.0, 1.0, 1.0, lambda, 3.0).unwrap()
}

/// A solved 1D benchmark together with what the criteria need from it.
struct Bench {
    grid: GridSpec,
    params: PhysParams,
    state: StatePair,
    report: SolveReport,
    initial_energy: f64,
    wall: Duration,
}

fn solve_bench(nodes: usize, params: PhysParams, cfg: SolveConfig) -> Bench {
    let grid = GridSpec::new(1, HALF_WIDTH, nodes).unwrap();
    let start = minimize::initial_guess(&grid, &cfg).unwrap();
    let initial_energy = nehari::project(&start, &params, cfg.projection_tol).unwrap().breakdown.energy;
    let clock = Instant::now();
    let (state, report) = minimize::solve_ground_state(&grid, &params, &cfg).unwrap();
    Bench {
        grid,
        params,
        state,
        report,
        initial_energy,
        wall: clock.elapsed(),
    }
}

fn decoupled_config() -> SolveConfig {
    let mut cfg = SolveConfig::default();
    if let InitialGuess::GaussianPair { v, .. } = &mut cfg.init {
        v.amplitude = 0.0;
    }
    cfg
}

/// Max-norm distance of a channel to `amplitude * sech(x)`.
fn sech_error(field: &Field, amplitude: f64) -> f64 {
    let g = field.grid();
    (0..g.node_count())
        .map(|k| (field.values()[k] - amplitude / g.position(k)[0].cosh()).abs())
        .fold(0.0, f64::max)
}

/// Every other node of a 1D field, as a field on the grid of spacing `2h`.
fn subsample(s: &StatePair) -> StatePair {
    let g = s.grid();
    let coarse = GridSpec::new(1, g.half_width(), g.nodes_per_axis().div_ceil(2)).unwrap();
    let pick = |f: &Field| Field::from_values(coarse, f.values().iter().step_by(2).copied().collect()).unwrap();
    StatePair::new(pick(s.u()), pick(s.v())).unwrap()
}

/// Continuous energy of `u = v = a sech(x)` on `[-w, w]` by composite
/// Simpson quadrature of the analytic integrand.
fn sech_pair_energy(amplitude: f64, lambda: f64, p: f64, w: f64) -> f64 {
    let density = |x: f64| {
        let s = amplitude / x.cosh();
        let ds = -s * x.tanh();
        // two identical channels
        2.0 * 0.5 * (ds * ds + s * s) - 2.0 * s.abs().powf(p + 1.0) / (p + 1.0) - 0.5 * lambda * s.powi(4)
    };
    let n = 200_000;
    let h = 2.0 * w / n as f64;
    let mut acc = density(-w) + density(w);
    for k in 1..n {
        let x = -w + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * density(x);
    }
    acc * h / 3.0
}

fn criteria_1_to_3() -> Vec<Outcome> {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grids = [GridSpec::new(1, 10.0, 257).unwrap(), GridSpec::new(2, 6.0, 33).unwrap()];
    let (mut worst_f, mut worst_t0, mut worst_dec) = (0.0f64, 0.0f64, 0.0f64);
    let (mut coercive_fail, mut positive_fail) = (0usize, 0usize);
    let mut worst_margin = f64::INFINITY;
    for k in 0..RANDOM_STATES {
        let p = P_VALUES[k % P_VALUES.len()];
        let lambda = LAMBDA_VALUES[(k / P_VALUES.len()) % LAMBDA_VALUES.len()];
        let prm = PhysParams::new(1.0, 1.0, 1.0, lambda, p).unwrap();
        let s = random_positive_state(&mut rng, &grids[k % 2]);
        let proj = nehari::project(&s, &prm, nehari::DEFAULT_PROJECTION_TOLERANCE).unwrap();
        let b = energy::breakdown(&proj.state, &prm).unwrap();
        worst_f = worst_f.max(b.nehari.abs() / b.quadratic);
        let again = nehari::project(&proj.state, &prm, nehari::DEFAULT_PROJECTION_TOLERANCE).unwrap();
        worst_t0 = worst_t0.max((again.t0 - 1.0).abs());
        worst_dec = worst_dec.max(rel(nehari::manifold_energy(&b, p), b.energy));
        let bound = nehari::coercivity_constant(p) * b.quadratic;
        if b.energy < bound * (1.0 - COERCIVITY_SLACK) {
            coercive_fail += 1;
        }
        worst_margin = worst_margin.min((b.energy - bound) / b.quadratic);
        if b.energy <= 0.0 {
            positive_fail += 1;
        }
    }
    let elapsed = clock.elapsed();
    vec![
        Outcome {
            id: 1,
            title: "Nehari membership and idempotence",
            passed: worst_f <= 1e-10 && worst_t0 <= 1e-10 && elapsed < Duration::from_secs(10),
            detail: format!(
                "{RANDOM_STATES} states: max |F|/L = {worst_f:.2e}, max |t0-1| = {worst_t0:.2e} (limit 1e-10), {elapsed:.2?}"
            ),
        },
        Outcome {
            id: 2,
            title: "on-manifold decomposition",
            passed: worst_dec <= 1e-10,
            detail: format!("max relative error {worst_dec:.2e} (limit 1e-10)"),
        },
        Outcome {
            id: 3,
            title: "regime-wise coercivity and I > 0",
            passed: coercive_fail == 0 && positive_fail == 0,
            detail: format!(
                "{coercive_fail} bound violations, {positive_fail} non-positive energies, \
                 min (I - c L)/L = {worst_margin:.2e}"
            ),
        },
    ]
}

fn criteria_4_and_5() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = GridSpec::new(1, 10.0, 129).unwrap();
    let (mut worst_grad, mut worst_fiber) = (0.0f64, 0.0f64);
    for k in 0..GRADIENT_SAMPLES {
        let prm = PhysParams::new(1.0, 0.8, 1.2, LAMBDA_VALUES[k % 3], P_VALUES[k % 5]).unwrap();
        let s = random_positive_state(&mut rng, &grid);
        let d = StatePair::new(
            Field::from_fn(grid, |_| rng.random_range(-1.0..1.0)),
            Field::from_fn(grid, |_| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let analytic = energy::grad_i(&s, &prm).unwrap().l2_inner(&d).unwrap();
        let i = |w: &StatePair| energy::eval_i(w, &prm).unwrap();
        let fd = (i(&s.add_scaled(FD_STEP, &d).unwrap()) - i(&s.add_scaled(-FD_STEP, &d).unwrap())) / (2.0 * FD_STEP);
        worst_grad = worst_grad.max(rel(analytic, fd));
        let fd_t = (i(&s.scaled(1.0 + FD_STEP)) - i(&s.scaled(1.0 - FD_STEP))) / (2.0 * FD_STEP);
        worst_fiber = worst_fiber.max(rel(energy::eval_f(&s, &prm).unwrap(), fd_t));
    }

    let (mut worst_cd, mut max_on_manifold) = (0.0f64, f64::NEG_INFINITY);
    for k in 0..RANDOM_STATES {
        let p = P_VALUES[k % P_VALUES.len()];
        let prm = PhysParams::new(1.0, 1.0, 1.0, LAMBDA_VALUES[(k / 5) % 3], p).unwrap();
        let s = random_positive_state(&mut rng, &grid);
        let f = |t: f64| energy::eval_f(&s.scaled(t), &prm).unwrap();
        let fd = (f(1.0 + FD_STEP) - f(1.0 - FD_STEP)) / (2.0 * FD_STEP);
        let formula = nehari::constraint_derivative(&energy::breakdown(&s, &prm).unwrap(), p);
        worst_cd = worst_cd.max(rel(fd, formula));
        let proj = nehari::project(&s, &prm, nehari::DEFAULT_PROJECTION_TOLERANCE).unwrap();
        let on = nehari::constraint_derivative(&proj.breakdown, p) / proj.breakdown.quadratic;
        max_on_manifold = max_on_manifold.max(on);
    }
    vec![
        Outcome {
            id: 4,
            title: "gradient consistency",
            passed: worst_grad <= 1e-6 && worst_fiber <= 1e-8,
            detail: format!(
                "{GRADIENT_SAMPLES} samples: directional {worst_grad:.2e} (limit 1e-6), \
                 F vs dI(ts)/dt {worst_fiber:.2e} (limit 1e-8)"
            ),
        },
        Outcome {
            id: 5,
            title: "constraint-derivative audit",
            passed: worst_cd <= 1e-8 && max_on_manifold < 0.0,
            detail: format!(
                "dF(ts)/dt vs 2L-(p+1)Mp-8Nlam {worst_cd:.2e} (limit 1e-8), \
                 max on-manifold value / L = {max_on_manifold:.3e} (must be < 0)"
            ),
        },
    ]
}

fn closed_form(id: usize, title: &'static str, coarse: &Bench, fine: &Bench, amplitude: [f64; 2]) -> Outcome {
    let error = |b: &Bench| sech_error(b.state.u(), amplitude[0]).max(sech_error(b.state.v(), amplitude[1]));
    let (e1, e2) = (error(coarse), error(fine));
    let ratio = e1 / e2;
    let wall = coarse.wall + fine.wall;
    Outcome {
        id,
        title,
        passed: e1 <= 5e-3 && in_band(ratio) && wall <= Duration::from_secs(60),
        detail: format!(
            "max error {e1:.3e} at {} nodes (limit 5e-3), {e2:.3e} at {} nodes, ratio {ratio:.2}, solve time {wall:.2?}",
            coarse.grid.nodes_per_axis(),
            fine.grid.nodes_per_axis()
        ),
    }
}

fn criterion_7(coarse: &Bench, fine: &Bench) -> Outcome {
    let mut out = closed_form(7, "closed-form recovery, coupled symmetric", coarse, fine, [1.0, 1.0]);
    let oracle = sech_pair_energy(1.0, 1.0, 3.0, HALF_WIDTH);
    let energy_err = rel(coarse.report.i0_estimate, oracle);
    out.passed &= energy_err <= 1e-3;
    out.detail
        .push_str(&format!("; I0 = {:.8} vs oracle {oracle:.8}, relative {energy_err:.2e} (limit 1e-3)", coarse.report.i0_estimate));
    out
}

fn criterion_8(ladder: &[&Bench]) -> Outcome {
    let residuals: Vec<f64> = ladder
        .iter()
        .map(|b| steady_state_residual(&subsample(&b.state), &b.params).unwrap().2)
        .collect();
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    Outcome {
        id: 8,
        title: "PDE residual refinement",
        passed: ratios.iter().all(|&r| in_band(r)),
        detail: format!(
            "residual on spacing 2h for nodes {:?}: {}; ratios {}",
            ladder.iter().map(|b| b.grid.nodes_per_axis()).collect::<Vec<_>>(),
            residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn criterion_9(b: &Bench) -> Outcome {
    let run = |dt: f64| evolve::evolve_state(&b.state, &b.params, dt, (1.0 / dt).round() as usize, 50).unwrap().summary;
    let (a, h) = (run(1e-3), run(5e-4));
    let ratio = a.max_modulus_drift / h.max_modulus_drift;
    Outcome {
        id: 9,
        title: "evolution of the ground state",
        passed: a.max_modulus_drift <= 1e-3 && a.max_mass_drift <= 1e-10 && in_band(ratio),
        detail: format!(
            "{} nodes, t = 1: modulus drift {:.3e} (limit 1e-3), mass drift {:.3e} (limit 1e-10); \
             dt/2 modulus drift {:.3e}, ratio {ratio:.2}",
            b.grid.nodes_per_axis(),
            a.max_modulus_drift,
            a.max_mass_drift,
            h.max_modulus_drift
        ),
    }
}

fn criterion_10(benches: &[&Bench]) -> Outcome {
    let mut failures = Vec::new();
    let mut rows = 0;
    for b in benches {
        let mut checks = Vec::new();
        verify::audit_trace(&b.report.trace, b.initial_energy, &mut checks);
        rows += b.report.trace.len();
        failures.extend(checks.into_iter().filter(|c| !c.passed).map(|c| c.name));
    }
    let default_cfg = nehari_core::config::parse_config(nehari_core::config::DEFAULT_CONFIG).unwrap();
    let suite = verify::run_invariant_suite(&default_cfg.grid, &default_cfg.params, &default_cfg.solver.solve).unwrap();
    failures.extend(suite.checks.into_iter().filter(|c| !c.passed).map(|c| format!("verify: {}", c.name)));
    Outcome {
        id: 10,
        title: "descent, positivity and manifold membership of iterates",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{rows} accepted iterates over {} benchmark runs, default verify suite clean", benches.len())
        } else {
            format!("violations: {}", failures.join("; "))
        },
    }
}

fn main() -> ExitCode {
    let clock = Instant::now();
    let tight = SolveConfig {
        grad_tol: 1e-10,
        energy_tol: 1e-30,
        ..SolveConfig::default()
    };
    let mut outcomes = criteria_1_to_3();
    outcomes.extend(criteria_4_and_5());
    // Solved one after another so that each recorded solve time is its own.
    let decoupled = [1025, 2049].map(|n| solve_bench(n, unit_params(1.0), decoupled_config()));
    let coupled = [257, 513, 1025, 2049].map(|n| solve_bench(n, unit_params(1.0), SolveConfig::default()));
    let evolution = solve_bench(257, unit_params(1.0), tight);

    outcomes.push(closed_form(6, "closed-form recovery, decoupled", &decoupled[0], &decoupled[1], [2f64.sqrt(), 0.0]));
    outcomes.push(criterion_7(&coupled[2], &coupled[3]));
    outcomes.push(criterion_8(&coupled.iter().collect::<Vec<_>>()));
    outcomes.push(criterion_9(&evolution));
    let all: Vec<&Bench> = decoupled.iter().chain(&coupled).chain([&evolution]).collect();
    outcomes.push(criterion_10(&all));

    outcomes.sort_by_key(|o| o.id);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        println!("{} [{}] {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.title, o.detail);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1?}",
        outcomes.len() - failed,
        outcomes.len(),
        clock.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
