//! Truncated box discretization and the discrete calculus built on it.
//!
//! The box `[-half_width, half_width]^dim` carries `nodes_per_axis` nodes per
//! axis, boundary nodes included. Fields vanish on the boundary (homogeneous
//! Dirichlet). Node order is row-major with axis 0 (`x`) slowest.
//!
//! The stencils are chosen so that summation by parts holds exactly:
//! `-sum(f * laplacian(f)) * h^dim == dirichlet_energy(f)` for every field
//! that vanishes on the boundary. All reductions run sequentially in node
//! order, so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};

/// Grid descriptor. Cheap to copy; fields carry their own copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(NlsError::Domain(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(NlsError::Domain(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        if nodes_per_axis < 3 {
            return Err(NlsError::Domain(format!(
                "nodes_per_axis must be at least 3, got {nodes_per_axis}"
            )));
        }
        Ok(GridSpec {
            dim,
            half_width,
            nodes_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes_per_axis - 1) as f64
    }

    /// Quadrature weight of a single node, `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn coordinate(&self, axis_index: usize) -> f64 {
        -self.half_width + axis_index as f64 * self.spacing()
    }

    /// Per-axis indices of a flat node index.
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let n = self.nodes_per_axis;
        match self.dim {
            1 => [node, 0],
            _ => [node / n, node % n],
        }
    }

    /// Physical coordinates of a node; unused trailing entries are 0.
    pub fn position(&self, node: usize) -> [f64; 2] {
        let idx = self.multi_index(node);
        match self.dim {
            1 => [self.coordinate(idx[0]), 0.0],
            _ => [self.coordinate(idx[0]), self.coordinate(idx[1])],
        }
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        let idx = self.multi_index(node);
        idx[..self.dim].iter().any(|&i| i == 0 || i == last)
    }

    /// Halves the spacing: `nodes -> 2 * nodes - 1` on the same box.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            nodes_per_axis: 2 * self.nodes_per_axis - 1,
            ..*self
        }
    }
}

/// Real scalar field on grid nodes, zero on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    /// Samples `f` at interior nodes; boundary nodes are set to zero.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|node| {
                if grid.is_boundary(node) {
                    0.0
                } else {
                    f(grid.position(node))
                }
            })
            .collect();
        Field { grid, values }
    }

    /// Wraps externally supplied values after checking length, finiteness
    /// and the boundary condition.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(NlsError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(NlsError::NumericalInput(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| grid.is_boundary(i) && values[i] != 0.0) {
            return Err(NlsError::Domain(format!(
                "boundary node {i} holds {} (must be 0)",
                values[i]
            )));
        }
        Ok(Field { grid, values })
    }

    /// Builds a field from values known to satisfy the invariants.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Field { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise map. Boundary zeros are kept only if `f(0) == 0`, which is
    /// the caller's responsibility.
    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    pub fn scaled(&self, t: f64) -> Field {
        self.map(|x| t * x)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Result<Field> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }
}

pub(crate) fn ensure_same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(NlsError::GridMismatch(format!("{a:?} vs {b:?}")))
    }
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(NlsError::NumericalInput(format!("{what} is not finite")))
    }
}

/// Sum of `f(i) * h^dim` over all nodes. A finite sum implies every term
/// was finite, so the result is checked instead of each value.
pub fn quad_integral(f: &Field) -> Result<f64> {
    finite(f.grid.cell_volume() * sum(&f.values), "quadrature")
}

pub(crate) fn sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// `sum over forward edges of (f(next) - f(cur))^2 / h^2 * h^dim`.
pub fn dirichlet_energy(f: &Field) -> Result<f64> {
    finite(edge_inner_unchecked(f, f), "dirichlet energy")
}

/// Discrete `integral of grad f . grad g` over forward edges.
pub fn edge_inner(f: &Field, g: &Field) -> Result<f64> {
    ensure_same_grid(&f.grid, &g.grid)?;
    finite(edge_inner_unchecked(f, g), "edge inner product")
}

fn edge_inner_unchecked(f: &Field, g: &Field) -> f64 {
    let h = f.grid.spacing();
    let (a, b) = (&f.values, &g.values);
    let mut acc = 0.0;
    for_each_forward_edge(&f.grid, |i, j| acc += (a[j] - a[i]) * (b[j] - b[i]));
    acc * f.grid.cell_volume() / (h * h)
}

/// Calls `visit(from, to)` for every forward edge, in node order of `from`
/// and axis order within a node.
pub(crate) fn for_each_forward_edge(grid: &GridSpec, mut visit: impl FnMut(usize, usize)) {
    let n = grid.nodes_per_axis;
    match grid.dim {
        1 => {
            for i in 0..n - 1 {
                visit(i, i + 1);
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    if i + 1 < n {
                        visit(k, k + n);
                    }
                    if j + 1 < n {
                        visit(k, k + 1);
                    }
                }
            }
        }
    }
}

/// Central second-order Laplacian on interior nodes, zero on the boundary.
pub fn laplacian(f: &Field) -> Result<Field> {
    let out = laplacian_unchecked(f);
    if out.values.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(NlsError::NumericalInput("laplacian input not finite".into()))
    }
}

pub(crate) fn laplacian_unchecked(f: &Field) -> Field {
    let grid = f.grid;
    let n = grid.nodes_per_axis;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let a = &f.values;
    let mut out = vec![0.0; a.len()];
    match grid.dim {
        1 => {
            for i in 1..n - 1 {
                out[i] = (a[i - 1] - 2.0 * a[i] + a[i + 1]) * inv_h2;
            }
        }
        _ => {
            for i in 1..n - 1 {
                for j in 1..n - 1 {
                    let k = i * n + j;
                    out[k] = (a[k - n] + a[k + n] + a[k - 1] + a[k + 1] - 4.0 * a[k]) * inv_h2;
                }
            }
        }
    }
    Field::from_raw(grid, out)
}
