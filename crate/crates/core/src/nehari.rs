//! Fiber analysis along rays `t -> t * (u, v)` and projection onto the
//! Nehari manifold `{ s != 0 : F(s) = 0 }`.
//!
//! Along a ray, `H(t) = I(t s)` and `H'(t) = t K(t)` with
//! `K(t) = L - t^(p-1) Mp - 2 t^2 Nlam`. `K` is strictly decreasing from
//! `K(0+) = L > 0` to `-inf`, so its positive root `t0` is unique and the
//! scaled state `t0 * s` lies on the manifold.

use crate::energy::{self, FunctionalBreakdown, PhysParams, StatePair};
use crate::error::{NlsError, Result};

pub const DEFAULT_PROJECTION_TOLERANCE: f64 = 1e-12;
const MAX_BISECTIONS: usize = 60;
const MAX_BRACKET_STEPS: usize = 2048;

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub state: StatePair,
    pub t0: f64,
    /// `F` at the projected state.
    pub residual: f64,
    pub breakdown: FunctionalBreakdown,
    pub iterations: usize,
}

pub fn fiber_k(t: f64, b: &FunctionalBreakdown, p: f64) -> f64 {
    b.quadratic - t.powf(p - 1.0) * b.power - 2.0 * t * t * b.coupling
}

pub fn fiber_h(t: f64, b: &FunctionalBreakdown, p: f64) -> f64 {
    let t2 = t * t;
    0.5 * t2 * b.quadratic - t.powf(p + 1.0) / (p + 1.0) * b.power - 0.5 * t2 * t2 * b.coupling
}

/// Positive root of `K` for the given breakdown.
#[derive(Debug, Clone, Copy)]
pub struct FiberRoot {
    pub t0: f64,
    pub iterations: usize,
}

/// Brackets the root by doubling (or halving) from `t = 1`, then bisects.
pub fn fiber_root(b: &FunctionalBreakdown, p: f64, tol: f64) -> Result<FiberRoot> {
    if !(b.quadratic.is_finite() && b.power.is_finite() && b.coupling.is_finite()) {
        return Err(NlsError::NumericalInput("non-finite breakdown".into()));
    }
    if b.quadratic <= 0.0 {
        return Err(NlsError::Domain("L must be positive (zero state?)".into()));
    }
    if b.power <= 0.0 && b.coupling <= 0.0 {
        return Err(NlsError::Domain(
            "Mp and Nlam vanish: the ray never meets the Nehari manifold".into(),
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(NlsError::Domain(format!("projection tolerance must be > 0, got {tol}")));
    }
    let k = |t: f64| fiber_k(t, b, p);

    let (mut lo, mut hi) = (1.0, 1.0);
    let mut steps = 0;
    if k(1.0) > 0.0 {
        while k(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
                return Err(NlsError::Domain("failed to bracket the fiber root".into()));
            }
        }
    } else {
        while k(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            steps += 1;
            if steps > MAX_BRACKET_STEPS || lo == 0.0 {
                return Err(NlsError::Domain("failed to bracket the fiber root".into()));
            }
        }
    }

    // The Nehari residual grows like (p + 3) times the relative root error,
    // so the bracket is tightened past `tol`.
    let width_target = tol / (p + 3.0);
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS && (hi - lo) > width_target * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if k(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mid = 0.5 * (lo + hi);
    Ok(FiberRoot {
        t0: mid,
        iterations: steps + iterations,
    })
}

/// Projects a nonzero state onto the Nehari manifold.
pub fn project(s: &StatePair, prm: &PhysParams, tol: f64) -> Result<ProjectionResult> {
    if s.is_zero() {
        return Err(NlsError::Domain("cannot project the zero state".into()));
    }
    let b = energy::breakdown(s, prm)?;
    let root = fiber_root(&b, prm.p, tol)?;
    let state = s.scaled(root.t0);
    let projected = energy::breakdown(&state, prm)?;
    Ok(ProjectionResult {
        state,
        t0: root.t0,
        residual: projected.nehari,
        breakdown: projected,
        iterations: root.iterations,
    })
}

/// On-manifold decomposition `I = (p-1)/(2(p+1)) L + (3-p)/(2(p+1)) Nlam`.
pub fn manifold_energy(b: &FunctionalBreakdown, p: f64) -> f64 {
    (p - 1.0) / (2.0 * (p + 1.0)) * b.quadratic + (3.0 - p) / (2.0 * (p + 1.0)) * b.coupling
}

/// Proven coercivity constant on the manifold: `(p-1)/(2(p+1))` for
/// `p <= 3`, `1/4` above.
pub fn coercivity_constant(p: f64) -> f64 {
    if p <= 3.0 {
        (p - 1.0) / (2.0 * (p + 1.0))
    } else {
        0.25
    }
}

/// `d/dt F(t s)` at `t = 1`: `2 L - (p+1) Mp - 8 Nlam`.
pub fn constraint_derivative(b: &FunctionalBreakdown, p: f64) -> f64 {
    2.0 * b.quadratic - (p + 1.0) * b.power - 8.0 * b.coupling
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bd(l: f64, mp: f64, nl: f64, p: f64) -> FunctionalBreakdown {
        FunctionalBreakdown::from_parts(l, mp, nl, p)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn fiber_examples() {
        let b = bd(3.0, 1.0, 0.0, 3.0);
        assert_eq!(fiber_k(1e-300, &b, 3.0), 3.0);
        assert!(fiber_k(3f64.sqrt(), &b, 3.0).abs() < 1e-15);
        assert_eq!(fiber_h(0.0, &b, 3.0), 0.0);
        assert_eq!(fiber_h(1.0, &b, 3.0), b.energy);
    }

    #[test]
    fn fiber_h_derivative_is_t_times_k() {
        let b = bd(2.3, 0.7, 0.4, 2.6);
        let (t, h) = (1.3, 1e-6);
        let fd = (fiber_h(t + h, &b, 2.6) - fiber_h(t - h, &b, 2.6)) / (2.0 * h);
        assert!(rel(fd, t * fiber_k(t, &b, 2.6)) <= 1e-8);
    }

    #[test]
    fn k_is_strictly_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = rng.random_range(1.05..6.0);
            let b = bd(
                rng.random_range(0.1..10.0),
                rng.random_range(0.0..5.0),
                rng.random_range(0.01..5.0),
                p,
            );
            let t1 = rng.random_range(0.01..3.0);
            let t2 = t1 + rng.random_range(0.01..3.0);
            assert!(fiber_k(t1, &b, p) > fiber_k(t2, &b, p));
        }
    }

    #[test]
    fn closed_form_roots() {
        let r = fiber_root(&bd(3.0, 1.0, 0.0, 3.0), 3.0, 1e-12).unwrap();
        assert!(rel(r.t0, 3f64.sqrt()) < 1e-12);
        let r = fiber_root(&bd(3.0, 1.0, 1.0, 3.0), 3.0, 1e-12).unwrap();
        assert!(rel(r.t0, 1.0) < 1e-12);
        // 3 - t - 2 t^2 = 0  ->  t = (-1 + sqrt(1 + 24)) / 4
        let r = fiber_root(&bd(3.0, 1.0, 1.0, 2.0), 2.0, 1e-12).unwrap();
        assert!(rel(r.t0, (-1.0 + 25f64.sqrt()) / 4.0) < 1e-12);
    }

    #[test]
    fn tiny_and_huge_roots_are_bracketed() {
        // t0 = sqrt(L / Mp) for p = 3, Nlam = 0.
        for (l, mp) in [(1e-20, 1.0), (1e20, 1.0), (1.0, 1e-30)] {
            let r = fiber_root(&bd(l, mp, 0.0, 3.0), 3.0, 1e-12).unwrap();
            assert!(rel(r.t0, (l / mp).sqrt()) < 1e-11, "{l} {mp}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fiber_root(&bd(0.0, 1.0, 1.0, 3.0), 3.0, 1e-12), Err(NlsError::Domain(_))));
        assert!(matches!(fiber_root(&bd(1.0, 0.0, 0.0, 3.0), 3.0, 1e-12), Err(NlsError::Domain(_))));
        let g = GridSpec::new(1, 1.0, 5).unwrap();
        let prm = PhysParams::new(1.0, 1.0, 1.0, 1.0, 3.0).unwrap();
        assert!(matches!(project(&StatePair::zeros(g), &prm, 1e-12), Err(NlsError::Domain(_))));
    }

    fn random_positive(rng: &mut ChaCha8Rng, g: GridSpec) -> StatePair {
        let amp = rng.random_range(0.01..20.0);
        StatePair::new(
            Field::from_fn(g, |_| amp * rng.random_range(0.01..1.0)),
            Field::from_fn(g, |_| amp * rng.random_range(0.01..1.0)),
        )
        .unwrap()
    }

    #[test]
    fn projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = GridSpec::new(1, 5.0, 41).unwrap();
        for p in [1.5, 2.0, 3.0, 4.0, 5.0] {
            let prm = PhysParams::new(1.0, 0.5, 1.0, 1.0, p).unwrap();
            for _ in 0..10 {
                let s = random_positive(&mut rng, g);
                let r = project(&s, &prm, DEFAULT_PROJECTION_TOLERANCE).unwrap();
                assert!(r.t0 > 0.0);
                assert!(r.residual.abs() <= DEFAULT_PROJECTION_TOLERANCE * r.breakdown.quadratic);
                // sign change across the bracket
                let b = energy::breakdown(&s, &prm).unwrap();
                let tol = 1e-12;
                assert!(fiber_k(r.t0 * (1.0 - tol), &b, p) > 0.0);
                assert!(fiber_k(r.t0 * (1.0 + tol), &b, p) < 0.0);
                // idempotence
                let again = project(&r.state, &prm, DEFAULT_PROJECTION_TOLERANCE).unwrap();
                assert!((again.t0 - 1.0).abs() <= DEFAULT_PROJECTION_TOLERANCE);
                // fiber maximum
                let h0 = fiber_h(r.t0, &b, p);
                assert!(h0 >= fiber_h(r.t0 / 2.0, &b, p));
                assert!(h0 >= fiber_h(2.0 * r.t0, &b, p));
                // decomposition and coercivity
                let pb = r.breakdown;
                assert!(rel(manifold_energy(&pb, p), pb.energy) <= 1e-10);
                assert!(pb.energy >= coercivity_constant(p) * pb.quadratic * (1.0 - 1e-12));
                assert!(pb.energy > 0.0);
            }
        }
    }

    #[test]
    fn closed_form_cross_check_for_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = GridSpec::new(2, 2.0, 9).unwrap();
        let prm = PhysParams::new(1.0, 1.0, 1.0, 2.0, 3.0).unwrap();
        for _ in 0..10 {
            let s = random_positive(&mut rng, g);
            let b = energy::breakdown(&s, &prm).unwrap();
            let exact = (b.quadratic / (b.power + 2.0 * b.coupling)).sqrt();
            let r = project(&s, &prm, 1e-12).unwrap();
            assert!(rel(r.t0, exact) <= 1e-12);
        }
    }

    #[test]
    fn constraint_derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = GridSpec::new(1, 3.0, 25).unwrap();
        let h = 1e-6;
        for p in [1.5, 3.0, 4.5] {
            let prm = PhysParams::new(1.0, 1.0, 1.0, 1.0, p).unwrap();
            let s = random_positive(&mut rng, g);
            let b = energy::breakdown(&s, &prm).unwrap();
            let f = |t: f64| energy::eval_f(&s.scaled(t), &prm).unwrap();
            let fd = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
            assert!(rel(fd, constraint_derivative(&b, p)) <= 1e-8);
            let on = project(&s, &prm, 1e-12).unwrap().breakdown;
            let d = constraint_derivative(&on, p);
            assert!(d < 0.0);
            // On the manifold the derivative reduces to (1-p) Mp - 4 Nlam.
            let reduced = (1.0 - p) * on.power - 4.0 * on.coupling;
            assert!(rel(d, reduced) <= 1e-9);
        }
    }
}
