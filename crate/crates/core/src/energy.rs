//! Energy functional of the coupled system and its derivatives.
//!
//! With `L = sigma1 |grad u|^2 + sigma2 |grad v|^2 + omega (u^2 + v^2)`,
//! `Mp = |u|^(p+1) + |v|^(p+1)` and `Nlam = lambda u^2 v^2` (all integrated),
//!
//! ```text
//! I = L/2 - Mp/(p+1) - Nlam/2
//! F = <I'(u,v), (u,v)> = L - Mp - 2 Nlam
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::exact::DoubleDouble;
use crate::grid::{self, ensure_same_grid, Field, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub omega: f64,
    pub lambda: f64,
    pub p: f64,
}

impl PhysParams {
    pub fn new(sigma1: f64, sigma2: f64, omega: f64, lambda: f64, p: f64) -> Result<Self> {
        let prm = PhysParams {
            sigma1,
            sigma2,
            omega,
            lambda,
            p,
        };
        prm.validate()?;
        Ok(prm)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("omega", self.omega),
            ("lambda", self.lambda),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(NlsError::Domain(format!("{name} must be > 0, got {value}")));
            }
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(NlsError::Domain(format!("p must be > 1, got {}", self.p)));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        PhysParams::new(self.sigma1, self.sigma2, self.omega, lambda, self.p)
    }
}

/// The pair `(u, v)`; both fields live on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    u: Field,
    v: Field,
}

impl StatePair {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        ensure_same_grid(u.grid(), v.grid())?;
        Ok(StatePair { u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        StatePair {
            u: Field::zeros(grid),
            v: Field::zeros(grid),
        }
    }

    pub fn u(&self) -> &Field {
        &self.u
    }

    pub fn v(&self) -> &Field {
        &self.v
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn into_fields(self) -> (Field, Field) {
        (self.u, self.v)
    }

    pub fn scaled(&self, t: f64) -> StatePair {
        StatePair {
            u: self.u.scaled(t),
            v: self.v.scaled(t),
        }
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &StatePair) -> Result<StatePair> {
        Ok(StatePair {
            u: self.u.add_scaled(a, &other.u)?,
            v: self.v.add_scaled(a, &other.v)?,
        })
    }

    pub fn abs(&self) -> StatePair {
        StatePair {
            u: self.u.abs(),
            v: self.v.abs(),
        }
    }

    pub fn swapped(&self) -> StatePair {
        StatePair {
            u: self.v.clone(),
            v: self.u.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    pub fn min_value(&self) -> f64 {
        self.u
            .values()
            .iter()
            .chain(self.v.values())
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.max_abs())
    }

    /// Quadrature pairing `integral(u1 u2 + v1 v2)`.
    pub fn l2_inner(&self, other: &StatePair) -> Result<f64> {
        ensure_same_grid(self.grid(), other.grid())?;
        let dot = |a: &Field, b: &Field| -> f64 {
            a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>()
        };
        let value = (dot(&self.u, &other.u) + dot(&self.v, &other.v)) * self.grid().cell_volume();
        if value.is_finite() {
            Ok(value)
        } else {
            Err(NlsError::NumericalInput("l2 pairing is not finite".into()))
        }
    }

    pub fn l2_norm(&self) -> Result<f64> {
        Ok(self.l2_inner(self)?.sqrt())
    }
}

/// Values of the functionals at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBreakdown {
    #[serde(rename = "L")]
    pub quadratic: f64,
    #[serde(rename = "Mp")]
    pub power: f64,
    #[serde(rename = "Nlam")]
    pub coupling: f64,
    #[serde(rename = "I")]
    pub energy: f64,
    #[serde(rename = "F")]
    pub nehari: f64,
}

impl FunctionalBreakdown {
    pub fn from_parts(quadratic: f64, power: f64, coupling: f64, p: f64) -> Self {
        FunctionalBreakdown {
            quadratic,
            power,
            coupling,
            energy: 0.5 * quadratic - power / (p + 1.0) - 0.5 * coupling,
            nehari: quadratic - power - 2.0 * coupling,
        }
    }

    /// Breakdown of `t * state`, from the homogeneity degrees 2, p+1 and 4.
    pub fn scaled(&self, t: f64, p: f64) -> Self {
        let t2 = t * t;
        FunctionalBreakdown::from_parts(
            t2 * self.quadratic,
            t.powf(p + 1.0) * self.power,
            t2 * t2 * self.coupling,
            p,
        )
    }

    /// `|F| / L`, the relative distance to the Nehari manifold.
    pub fn relative_nehari_residual(&self) -> f64 {
        if self.quadratic > 0.0 {
            self.nehari.abs() / self.quadratic
        } else {
            self.nehari.abs()
        }
    }
}

/// `|x|^q` with a multiplication fast path for integral exponents.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Power {
    Int(i32),
    Real(f64),
}

impl Power {
    pub(crate) fn new(q: f64) -> Self {
        if q.fract() == 0.0 && q.abs() < 64.0 {
            Power::Int(q as i32)
        } else {
            Power::Real(q)
        }
    }

    #[inline]
    pub(crate) fn abs_pow(self, x: f64) -> f64 {
        match self {
            Power::Int(k) => x.abs().powi(k),
            Power::Real(q) => x.abs().powf(q),
        }
    }
}

fn check_pair(s1: &StatePair, s2: &StatePair) -> Result<()> {
    ensure_same_grid(s1.grid(), s2.grid())
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NlsError::NumericalInput(format!("{what} is not finite")))
    }
}

pub fn eval_l(s: &StatePair, prm: &PhysParams) -> Result<f64> {
    h_inner(s, s, prm)
}

pub fn eval_mp(s: &StatePair, prm: &PhysParams) -> Result<f64> {
    let pw = Power::new(prm.p + 1.0);
    let acc: f64 = s
        .u
        .values()
        .iter()
        .zip(s.v.values())
        .map(|(&a, &b)| pw.abs_pow(a) + pw.abs_pow(b))
        .sum();
    finite(acc * s.grid().cell_volume(), "Mp")
}

pub fn eval_nlam(s: &StatePair, prm: &PhysParams) -> Result<f64> {
    let acc: f64 = s
        .u
        .values()
        .iter()
        .zip(s.v.values())
        .map(|(&a, &b)| (a * a) * (b * b))
        .sum();
    finite(prm.lambda * acc * s.grid().cell_volume(), "Nlam")
}

pub fn breakdown(s: &StatePair, prm: &PhysParams) -> Result<FunctionalBreakdown> {
    let mut bd = plain_breakdown(s, prm)?;
    bd.energy = accurate_energy(s, prm)?.hi();
    Ok(bd)
}

/// Breakdown with `I` combined from the `f64` parts; enough for locating
/// the fiber maximum.
pub(crate) fn plain_breakdown(s: &StatePair, prm: &PhysParams) -> Result<FunctionalBreakdown> {
    Ok(FunctionalBreakdown::from_parts(eval_l(s, prm)?, eval_mp(s, prm)?, eval_nlam(s, prm)?, prm.p))
}

/// `I(s)` accumulated in double-double arithmetic. Edge differences,
/// squares and integral powers are formed without rounding, so the result
/// is the energy of the stored state to far below `f64` resolution; a
/// non-integral exponent contributes one `powf` rounding per node.
///
/// The line search compares energies whose difference falls below the
/// rounding level of a plain sum long before the gradient is small.
pub(crate) fn accurate_energy(s: &StatePair, prm: &PhysParams) -> Result<DoubleDouble> {
    let grid = *s.grid();
    let (u, v) = (s.u.values(), s.v.values());
    let (mut kin_u, mut kin_v) = (DoubleDouble::ZERO, DoubleDouble::ZERO);
    grid::for_each_forward_edge(&grid, |i, j| {
        kin_u += DoubleDouble::diff(u[j], u[i]).square();
        kin_v += DoubleDouble::diff(v[j], v[i]).square();
    });
    let exponent = Power::new(prm.p + 1.0);
    let power_of = |x: f64| match exponent {
        Power::Int(k) => DoubleDouble::from_f64(x.abs()).powi(k.unsigned_abs()),
        Power::Real(q) => DoubleDouble::from_f64(x.abs().powf(q)),
    };
    let (mut mass, mut power, mut coupling) = (DoubleDouble::ZERO, DoubleDouble::ZERO, DoubleDouble::ZERO);
    for (&a, &b) in u.iter().zip(v) {
        let (a2, b2) = (DoubleDouble::product(a, a), DoubleDouble::product(b, b));
        mass += a2 + b2;
        power += power_of(a) + power_of(b);
        coupling += a2 * b2;
    }
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let kinetic = (kin_u * prm.sigma1 + kin_v * prm.sigma2) * (vol / (h * h));
    let quadratic = kinetic + mass * (prm.omega * vol);
    let energy = quadratic * 0.5 - power * (vol / (prm.p + 1.0)) - coupling * (0.5 * prm.lambda * vol);
    if !energy.is_finite() {
        return Err(NlsError::NumericalInput("energy is not finite".into()));
    }
    Ok(energy)
}

pub fn eval_i(s: &StatePair, prm: &PhysParams) -> Result<f64> {
    Ok(breakdown(s, prm)?.energy)
}

pub fn eval_f(s: &StatePair, prm: &PhysParams) -> Result<f64> {
    Ok(breakdown(s, prm)?.nehari)
}

/// Discrete H inner product
/// `sigma1 <grad u, grad phi> + omega <u, phi> + sigma2 <grad v, grad psi> + omega <v, psi>`.
pub fn h_inner(s1: &StatePair, s2: &StatePair, prm: &PhysParams) -> Result<f64> {
    check_pair(s1, s2)?;
    let vol = s1.grid().cell_volume();
    let node = |a: &Field, b: &Field| -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() * vol
    };
    // Grouped so that swapping the channels is exact when sigma1 == sigma2.
    let value = (prm.sigma1 * grid::edge_inner(&s1.u, &s2.u)?
        + prm.sigma2 * grid::edge_inner(&s1.v, &s2.v)?)
        + prm.omega * (node(&s1.u, &s2.u) + node(&s1.v, &s2.v));
    finite(value, "H inner product")
}

/// Strong-form residual pair `G` with `integral(G . d) = I'(s) d` for every
/// interior-supported direction `d`:
///
/// ```text
/// G_u = -sigma1 lap u + omega u - |u|^(p-1) u - lambda v^2 u
/// G_v = -sigma2 lap v + omega v - |v|^(p-1) v - lambda u^2 v
/// ```
pub fn grad_i(s: &StatePair, prm: &PhysParams) -> Result<StatePair> {
    let eval = evaluate(s, prm)?;
    Ok(eval.gradient)
}

/// Breakdown and gradient computed from one Laplacian pass per channel.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: FunctionalBreakdown,
    pub gradient: StatePair,
    accurate_energy: DoubleDouble,
}

impl Evaluation {
    /// `I(earlier) - I(self)`, resolved below `f64` rounding of either value.
    pub fn energy_decrease_from(&self, earlier: &Evaluation) -> f64 {
        (earlier.accurate_energy - self.accurate_energy).hi()
    }
}

pub fn evaluate(s: &StatePair, prm: &PhysParams) -> Result<Evaluation> {
    let grid = *s.grid();
    let vol = grid.cell_volume();
    let pw = Power::new(prm.p);
    let lap_u = grid::laplacian_unchecked(&s.u);
    let lap_v = grid::laplacian_unchecked(&s.v);
    let (u, v) = (s.u.values(), s.v.values());
    let n = u.len();
    let mut gu = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let (mut mass, mut power, mut coupling) = (Compensated::default(), Compensated::default(), Compensated::default());
    let (mut kin_u, mut kin_v) = (Compensated::default(), Compensated::default());
    for k in 0..n {
        let (a, b) = (u[k], v[k]);
        let (pa, pb) = (pw.abs_pow(a), pw.abs_pow(b));
        mass.add(a * a + b * b);
        power.add(pa * a.abs() + pb * b.abs());
        coupling.add((a * a) * (b * b));
        kin_u.add(-a * lap_u.values()[k]);
        kin_v.add(-b * lap_v.values()[k]);
        if !grid.is_boundary(k) {
            gu[k] = -prm.sigma1 * lap_u.values()[k] + prm.omega * a
                - pa.copysign(a)
                - prm.lambda * b * b * a;
            gv[k] = -prm.sigma2 * lap_v.values()[k] + prm.omega * b
                - pb.copysign(b)
                - prm.lambda * a * a * b;
        }
    }
    // By summation by parts the kinetic part of L equals -integral(f lap f).
    let quadratic =
        ((prm.sigma1 * kin_u.value() + prm.sigma2 * kin_v.value()) + prm.omega * mass.value()) * vol;
    let mut bd = FunctionalBreakdown::from_parts(
        quadratic,
        power.value() * vol,
        prm.lambda * coupling.value() * vol,
        prm.p,
    );
    let accurate = accurate_energy(s, prm)?;
    bd.energy = accurate.hi();
    let ok = [bd.quadratic, bd.power, bd.coupling].iter().all(|x| x.is_finite())
        && gu.iter().chain(&gv).all(|x| x.is_finite());
    if !ok {
        return Err(NlsError::NumericalInput("state evaluation not finite".into()));
    }
    Ok(Evaluation {
        breakdown: bd,
        gradient: StatePair {
            u: Field::from_raw(grid, gu),
            v: Field::from_raw(grid, gv),
        },
        accurate_energy: accurate,
    })
}

/// Neumaier-compensated running sum. The solver compares energies whose
/// difference approaches the rounding level of a plain sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
