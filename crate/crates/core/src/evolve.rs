//! Time evolution of the coupled system
//!
//! ```text
//! i u_t + sigma1 lap u + (|u|^(p-1) + lambda |v|^2) u = 0
//! i v_t + sigma2 lap v + (|v|^(p-1) + lambda |u|^2) v = 0
//! ```
//!
//! by Strang splitting: an exact pointwise phase rotation for the nonlinear
//! part around a Crank-Nicolson step for the linear part. In two dimensions
//! the linear step is the product of one Crank-Nicolson factor per axis; the
//! axis Laplacians commute, and each factor is a Cayley transform of a real
//! symmetric matrix, so the step stays unitary.
//!
//! Used to check that a real ground state `(u, v)` evolves as
//! `e^{i omega t} (u, v)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::energy::{PhysParams, Power, StatePair};
use crate::error::{NlsError, Result};
use crate::grid::{self, ensure_same_grid, Field, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_real(f: &Field) -> Self {
        ComplexField {
            grid: *f.grid(),
            values: f.values().iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(NlsError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NlsError::NumericalInput("non-finite complex value".into()));
        }
        if (0..values.len()).any(|i| grid.is_boundary(i) && values[i] != Complex64::new(0.0, 0.0)) {
            return Err(NlsError::Domain("complex field must vanish on the boundary".into()));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `integral |z|^2` with the node quadrature.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Residual of the steady-state system,
/// `R_u = -omega u + sigma1 lap u + (|u|^(p-1) + lambda v^2) u` and the
/// symmetric `R_v`, plus the max-norm over both channels.
pub fn steady_state_residual(s: &StatePair, prm: &PhysParams) -> Result<(Field, Field, f64)> {
    let pw = Power::new(prm.p - 1.0);
    let lap_u = grid::laplacian(s.u())?;
    let lap_v = grid::laplacian(s.v())?;
    let grid = *s.grid();
    let (u, v) = (s.u().values(), s.v().values());
    let mut ru = vec![0.0; u.len()];
    let mut rv = vec![0.0; u.len()];
    for k in 0..u.len() {
        if grid.is_boundary(k) {
            continue;
        }
        let (a, b) = (u[k], v[k]);
        ru[k] = -prm.omega * a + prm.sigma1 * lap_u.values()[k] + (pw.abs_pow(a) + prm.lambda * b * b) * a;
        rv[k] = -prm.omega * b + prm.sigma2 * lap_v.values()[k] + (pw.abs_pow(b) + prm.lambda * a * a) * b;
    }
    let ru = Field::from_values(grid, ru)?;
    let rv = Field::from_values(grid, rv)?;
    let max = ru.max_abs().max(rv.max_abs());
    Ok((ru, rv, max))
}

/// Factored `I - i a D` for the interior nodes of one grid line, `D` the
/// 3-point second difference.
#[derive(Debug, Clone)]
struct LineSolver {
    /// `a / h^2`.
    coupling: f64,
    upper: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl LineSolver {
    fn new(interior: usize, a: f64, h: f64) -> Self {
        let r = a / (h * h);
        let diag = Complex64::new(1.0, 2.0 * r);
        let off = Complex64::new(0.0, -r);
        let mut upper = vec![Complex64::new(0.0, 0.0); interior];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); interior];
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..interior {
            let pivot = diag - off * prev;
            inv_pivot[i] = pivot.inv();
            prev = off * inv_pivot[i];
            upper[i] = prev;
        }
        LineSolver {
            coupling: r,
            upper,
            inv_pivot,
        }
    }

    /// Applies `(I - i a D)^{-1} (I + i a D)` in place to the line
    /// `values[start + k * stride]`, `k = 0..n`, whose end points are
    /// Dirichlet zeros.
    fn apply(&self, values: &mut [Complex64], start: usize, stride: usize, scratch: &mut Vec<Complex64>) {
        let m = self.upper.len();
        let at = |k: usize| start + k * stride;
        let ir = Complex64::new(0.0, self.coupling);
        let off = Complex64::new(0.0, -self.coupling);
        scratch.clear();
        for k in 1..=m {
            let (l, c, r) = (values[at(k - 1)], values[at(k)], values[at(k + 1)]);
            scratch.push(c + ir * (l - 2.0 * c + r));
        }
        // forward sweep
        let mut prev = Complex64::new(0.0, 0.0);
        for (x, inv) in scratch.iter_mut().zip(&self.inv_pivot) {
            prev = (*x - off * prev) * inv;
            *x = prev;
        }
        // back substitution
        for i in (0..m.saturating_sub(1)).rev() {
            scratch[i] = scratch[i] - self.upper[i] * scratch[i + 1];
        }
        for (i, x) in scratch.iter().enumerate() {
            values[at(i + 1)] = *x;
        }
    }
}

/// One Strang step: nonlinear half step, linear step, nonlinear half step.
/// Negative `dt` integrates backward; a step with `-dt` inverts a step with
/// `dt` up to rounding.
#[derive(Debug, Clone)]
pub struct SplitStepIntegrator {
    grid: GridSpec,
    prm: PhysParams,
    dt: f64,
    lines_u: LineSolver,
    lines_v: LineSolver,
    saturation: Power,
}

impl SplitStepIntegrator {
    pub fn new(grid: GridSpec, prm: PhysParams, dt: f64) -> Result<Self> {
        prm.validate()?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(NlsError::Domain(format!("time step must be finite and nonzero, got {dt}")));
        }
        let h = grid.spacing();
        let interior = grid.nodes_per_axis() - 2;
        Ok(SplitStepIntegrator {
            grid,
            prm,
            dt,
            lines_u: LineSolver::new(interior, 0.5 * prm.sigma1 * dt, h),
            lines_v: LineSolver::new(interior, 0.5 * prm.sigma2 * dt, h),
            saturation: Power::new(prm.p - 1.0),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn nonlinear(&self, u: &mut ComplexField, v: &mut ComplexField, tau: f64) {
        let lambda = self.prm.lambda;
        for (a, b) in u.values.iter_mut().zip(v.values.iter_mut()) {
            let (ma, mb) = (a.norm(), b.norm());
            let (ma2, mb2) = (ma * ma, mb * mb);
            let ga = self.saturation.abs_pow(ma) + lambda * mb2;
            let gb = self.saturation.abs_pow(mb) + lambda * ma2;
            *a *= Complex64::from_polar(1.0, ga * tau);
            *b *= Complex64::from_polar(1.0, gb * tau);
        }
    }

    fn linear(&self, f: &mut ComplexField, lines: &LineSolver) {
        let n = self.grid.nodes_per_axis();
        let mut scratch = Vec::with_capacity(n);
        match self.grid.dim() {
            1 => lines.apply(&mut f.values, 0, 1, &mut scratch),
            _ => {
                for i in 1..n - 1 {
                    lines.apply(&mut f.values, i * n, 1, &mut scratch);
                }
                for j in 1..n - 1 {
                    lines.apply(&mut f.values, j, n, &mut scratch);
                }
            }
        }
    }

    pub fn step(&self, u: &mut ComplexField, v: &mut ComplexField) {
        let half = 0.5 * self.dt;
        self.nonlinear(u, v, half);
        self.linear(u, &self.lines_u);
        self.linear(v, &self.lines_v);
        self.nonlinear(u, v, half);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionSummary {
    pub steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub mass_u: Vec<f64>,
    pub mass_v: Vec<f64>,
    /// Max over samples and nodes of `||u(t)| - |u(0)||`, both channels.
    pub max_modulus_drift: f64,
    /// Max relative deviation of either channel's mass from its initial value.
    pub max_mass_drift: f64,
    /// Max deviation of `arg(u(t) / u(0))` from `omega t`, over nodes with
    /// `|u(0)| > 0.1 max |u(0)|`.
    pub max_phase_drift: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub summary: EvolutionSummary,
    pub u: ComplexField,
    pub v: ComplexField,
}

const PHASE_FLOOR: f64 = 0.1;

struct Tracker {
    modulus0: [Vec<f64>; 2],
    initial: [ComplexField; 2],
    mass0: [f64; 2],
    omega: f64,
    summary: EvolutionSummary,
}

impl Tracker {
    fn new(u: &ComplexField, v: &ComplexField, dt: f64, steps: usize, omega: f64) -> Self {
        Tracker {
            modulus0: [u.modulus(), v.modulus()],
            initial: [u.clone(), v.clone()],
            mass0: [u.mass(), v.mass()],
            omega,
            summary: EvolutionSummary {
                steps,
                dt,
                times: Vec::new(),
                mass_u: Vec::new(),
                mass_v: Vec::new(),
                max_modulus_drift: 0.0,
                max_mass_drift: 0.0,
                max_phase_drift: 0.0,
            },
        }
    }

    fn sample(&mut self, t: f64, u: &ComplexField, v: &ComplexField) {
        let s = &mut self.summary;
        s.times.push(t);
        let masses = [u.mass(), v.mass()];
        s.mass_u.push(masses[0]);
        s.mass_v.push(masses[1]);
        for (ch, field) in [u, v].into_iter().enumerate() {
            if self.mass0[ch] > 0.0 {
                s.max_mass_drift = s.max_mass_drift.max((masses[ch] / self.mass0[ch] - 1.0).abs());
            }
            let m0 = &self.modulus0[ch];
            let floor = PHASE_FLOOR * m0.iter().fold(0.0, |a: f64, &b| a.max(b));
            let expected = Complex64::from_polar(1.0, self.omega * t);
            for (k, z) in field.values.iter().enumerate() {
                s.max_modulus_drift = s.max_modulus_drift.max((z.norm() - m0[k]).abs());
                if floor > 0.0 && m0[k] > floor {
                    // phase of z / z0 relative to e^{i omega t}, wrapped into (-pi, pi]
                    let rel = z * self.initial[ch].values[k].conj() * expected.conj();
                    s.max_phase_drift = s.max_phase_drift.max(rel.arg().abs());
                }
            }
        }
    }
}

/// Evolves `init` for `steps` steps of size `dt`, sampling diagnostics at
/// `t = 0` and every `sample_every` steps (and at the final step).
pub fn evolve_split_step(
    init: (ComplexField, ComplexField),
    prm: &PhysParams,
    dt: f64,
    steps: usize,
    sample_every: usize,
) -> Result<Evolution> {
    let (mut u, mut v) = init;
    ensure_same_grid(&u.grid, &v.grid)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(NlsError::Domain(format!("dt must be > 0, got {dt}")));
    }
    if sample_every == 0 {
        return Err(NlsError::Domain("sample_every must be at least 1".into()));
    }
    let integrator = SplitStepIntegrator::new(u.grid, *prm, dt)?;
    let mut tracker = Tracker::new(&u, &v, dt, steps, prm.omega);
    tracker.sample(0.0, &u, &v);
    for step in 1..=steps {
        integrator.step(&mut u, &mut v);
        if step % sample_every == 0 || step == steps {
            if !(u.is_finite() && v.is_finite()) {
                return Err(NlsError::Integrator {
                    step,
                    message: "solution became non-finite".into(),
                });
            }
            tracker.sample(step as f64 * dt, &u, &v);
        }
    }
    Ok(Evolution {
        summary: tracker.summary,
        u,
        v,
    })
}

/// Evolves a real steady state `s` under the `e^{i omega t}` ansatz check.
pub fn evolve_state(
    s: &StatePair,
    prm: &PhysParams,
    dt: f64,
    steps: usize,
    sample_every: usize,
) -> Result<Evolution> {
    evolve_split_step(
        (ComplexField::from_real(s.u()), ComplexField::from_real(s.v())),
        prm,
        dt,
        steps,
        sample_every,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::grad_i;

    fn unit() -> PhysParams {
        PhysParams::new(1.0, 1.0, 1.0, 1.0, 3.0).unwrap()
    }

    fn sech_state(nodes: usize) -> StatePair {
        let g = GridSpec::new(1, 30.0, nodes).unwrap();
        let u = Field::from_fn(g, |x| 2f64.sqrt() / x[0].cosh());
        StatePair::new(u, Field::zeros(g)).unwrap()
    }

    #[test]
    fn residual_examples() {
        let g = GridSpec::new(1, 1.0, 3).unwrap();
        let z = StatePair::zeros(g);
        assert_eq!(steady_state_residual(&z, &unit()).unwrap().2, 0.0);
        let s = StatePair::new(Field::from_values(g, vec![0.0, 1.0, 0.0]).unwrap(), Field::zeros(g)).unwrap();
        let (ru, _, max) = steady_state_residual(&s, &unit()).unwrap();
        assert_eq!(ru.values()[1], -2.0);
        assert_eq!(max, 2.0);
    }

    #[test]
    fn residual_is_negative_gradient() {
        let g = GridSpec::new(2, 2.0, 9).unwrap();
        let prm = PhysParams::new(0.7, 1.3, 1.1, 0.9, 2.5).unwrap();
        let s = StatePair::new(
            Field::from_fn(g, |x| (x[0] - 0.3 * x[1]).cos()),
            Field::from_fn(g, |x| x[0] * x[1] - 0.2),
        )
        .unwrap();
        let (ru, rv, _) = steady_state_residual(&s, &prm).unwrap();
        let gr = grad_i(&s, &prm).unwrap();
        for k in 0..g.node_count() {
            assert!((ru.values()[k] + gr.u().values()[k]).abs() < 1e-12);
            assert!((rv.values()[k] + gr.v().values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn sech_profile_residual_is_second_order() {
        let coarse = steady_state_residual(&sech_state(2049), &unit()).unwrap().2;
        let fine = steady_state_residual(&sech_state(4097), &unit()).unwrap().2;
        assert!(coarse <= 1e-3, "{coarse}");
        let ratio = coarse / fine;
        assert!((3.8..4.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = GridSpec::new(2, 3.0, 9).unwrap();
        let s = StatePair::zeros(g);
        let ev = evolve_state(&s, &unit(), 1e-2, 20, 5).unwrap();
        assert!(ev.u.values().iter().all(|z| z.norm() == 0.0));
        assert_eq!(ev.summary.max_modulus_drift, 0.0);
    }

    fn wavy(g: GridSpec) -> (ComplexField, ComplexField) {
        let u = Field::from_fn(g, |x| (-(x[0] - 0.5).powi(2) - x[1] * x[1]).exp());
        let v = Field::from_fn(g, |x| 0.7 * (-(x[0] + 0.5).powi(2) - 0.5 * x[1] * x[1]).exp());
        let mut cu = ComplexField::from_real(&u);
        // give u a momentum so the linear part does real work
        for (k, z) in cu.values.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, 2.0 * g.position(k)[0]);
        }
        (cu, ComplexField::from_real(&v))
    }

    #[test]
    fn mass_is_conserved() {
        for dim in [1, 2] {
            let g = GridSpec::new(dim, 6.0, 49).unwrap();
            let prm = PhysParams::new(1.0, 0.5, 1.0, 1.5, 2.5).unwrap();
            let ev = evolve_split_step(wavy(g), &prm, 1e-2, 1000, 100).unwrap();
            assert!(ev.summary.max_mass_drift <= 1e-10, "{}", ev.summary.max_mass_drift);
        }
    }

    #[test]
    fn nonlinear_substep_preserves_modulus() {
        let g = GridSpec::new(1, 6.0, 65).unwrap();
        let integ = SplitStepIntegrator::new(g, unit(), 0.37).unwrap();
        let (mut u, mut v) = wavy(g);
        let before: Vec<f64> = u.values.iter().map(|z| z.norm_sqr()).collect();
        integ.nonlinear(&mut u, &mut v, 0.37);
        for (z, b) in u.values.iter().zip(&before) {
            assert!((z.norm_sqr() - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let g = GridSpec::new(2, 5.0, 33).unwrap();
        let prm = unit();
        let (u0, v0) = wavy(g);
        let (mut u, mut v) = (u0.clone(), v0.clone());
        let fwd = SplitStepIntegrator::new(g, prm, 1e-2).unwrap();
        let bwd = SplitStepIntegrator::new(g, prm, -1e-2).unwrap();
        for _ in 0..50 {
            fwd.step(&mut u, &mut v);
        }
        for _ in 0..50 {
            bwd.step(&mut u, &mut v);
        }
        let err = u
            .values
            .iter()
            .zip(&u0.values)
            .chain(v.values.iter().zip(&v0.values))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = GridSpec::new(1, 5.0, 17).unwrap();
        let s = StatePair::zeros(g);
        assert!(evolve_state(&s, &unit(), 0.0, 10, 1).is_err());
        assert!(evolve_state(&s, &unit(), 1e-3, 10, 0).is_err());
        let other = ComplexField::from_real(&Field::zeros(GridSpec::new(1, 5.0, 9).unwrap()));
        let mismatched = (ComplexField::from_real(s.u()), other);
        assert!(matches!(
            evolve_split_step(mismatched, &unit(), 1e-3, 1, 1),
            Err(NlsError::GridMismatch(_))
        ));
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let g = GridSpec::new(1, 5.0, 17).unwrap();
        let huge = Field::from_fn(g, |_| 1e200);
        let s = StatePair::new(huge.clone(), huge).unwrap();
        match evolve_state(&s, &unit(), 1e-3, 10, 1) {
            Err(NlsError::Integrator { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected integrator error, got {other:?}"),
        }
    }
}
