//! Node-centered box grids, scalar fields, trapezoidal quadrature and the
//! two second-order Laplacian stencils.
//!
//! Nodes include the boundary. Flat storage is row-major with the last axis
//! fastest, so axis 0 (`x₁`) has the largest stride. All quadrature uses the
//! tensor-product trapezoid rule, and both Laplacians are self-adjoint with
//! respect to the induced weighted inner product
//! `⟨f, g⟩ = Σ wᵢ fᵢ gᵢ` on their natural subspaces.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Uniform node-centered discretization of `[0,L₁]×…×[0,L_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lengths: Vec<f64>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    weights: Vec<f64>,
}

impl GridSpec {
    pub fn new(lengths: &[f64], nodes: &[usize]) -> Result<Arc<Self>> {
        let dim = lengths.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if nodes.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} lengths but {} node counts",
                dim,
                nodes.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("length {l} is not positive")));
        }
        if let Some(n) = nodes.iter().find(|n| **n < 3) {
            return Err(Error::InvalidGrid(format!("{n} nodes per axis, need at least 3")));
        }
        let spacing: Vec<f64> = lengths
            .iter()
            .zip(nodes)
            .map(|(l, n)| l / (*n as f64 - 1.0))
            .collect();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * nodes[a + 1];
        }
        let total: usize = nodes.iter().product();
        let mut grid = GridSpec {
            lengths: lengths.to_vec(),
            nodes: nodes.to_vec(),
            spacing,
            strides,
            weights: Vec::new(),
        };
        grid.weights = (0..total)
            .map(|flat| {
                let idx = grid.multi_index(flat);
                (0..dim).map(|a| grid.axis_weight(a, idx[a])).product()
            })
            .collect();
        Ok(Arc::new(grid))
    }

    /// Same length and node count on every axis.
    pub fn cube(dim: usize, length: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(&vec![length; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// |Ω| = Π Lᵢ.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoid weights, one per node; they sum to |Ω|.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One-dimensional trapezoid weight of index `i` on `axis`.
    pub fn axis_weight(&self, axis: usize, i: usize) -> f64 {
        let h = self.spacing[axis];
        if i == 0 || i + 1 == self.nodes[axis] {
            0.5 * h
        } else {
            h
        }
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.dim() {
            idx[a] = (flat / self.strides[a]) % self.nodes[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of a node; entries past `dim()` are zero.
    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = idx[a] as f64 * self.spacing[a];
        }
        x
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim()).any(|a| idx[a] == 0 || idx[a] + 1 == self.nodes[a])
    }

    /// Nodes at least `layers` index steps away from every face.
    pub fn is_deep_interior(&self, flat: usize, layers: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim()).all(|a| idx[a] >= layers && idx[a] + layers < self.nodes[a])
    }

    pub fn faces(&self) -> impl Iterator<Item = Face> + '_ {
        (0..2 * self.dim()).map(Face::from_id)
    }

    /// Flat indices of the nodes on a face, in row-major order over the
    /// remaining axes.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let fixed = match face.side {
            Side::Low => 0,
            Side::High => self.nodes[face.axis] - 1,
        };
        (0..self.node_count())
            .filter(|&flat| self.multi_index(flat)[face.axis] == fixed)
            .collect()
    }

    /// Surface quadrature weights for the nodes of `face`, in `face_nodes`
    /// order. In one dimension every face is a single point of weight one.
    pub fn face_weights(&self, face: Face) -> Vec<f64> {
        self.face_nodes(face)
            .into_iter()
            .map(|flat| {
                let idx = self.multi_index(flat);
                (0..self.dim())
                    .filter(|&a| a != face.axis)
                    .map(|a| self.axis_weight(a, idx[a]))
                    .product()
            })
            .collect()
    }

    fn header(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "# dim={} n={} L={}",
            self.dim(),
            join(self.nodes.iter().map(|n| n.to_string()).collect()),
            join(self.lengths.iter().map(|l| format!("{l}")).collect())
        )
    }

    fn parse_header(line: &str) -> Result<Arc<Self>> {
        let bad = || Error::Io(format!("malformed field header `{line}`"));
        let body = line.strip_prefix('#').ok_or_else(bad)?;
        let (mut dim, mut nodes, mut lengths) = (None, None, None);
        for tok in body.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(bad)?;
            match k {
                "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
                "n" => {
                    nodes = Some(
                        v.split(',')
                            .map(|s| s.parse::<usize>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| bad())?,
                    )
                }
                "L" => {
                    lengths = Some(
                        v.split(',')
                            .map(|s| s.parse::<f64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| bad())?,
                    )
                }
                _ => return Err(bad()),
            }
        }
        let (dim, nodes, lengths) = (dim.ok_or_else(bad)?, nodes.ok_or_else(bad)?, lengths.ok_or_else(bad)?);
        if nodes.len() != dim {
            return Err(bad());
        }
        GridSpec::new(&lengths, &nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

/// One of the `2·d` faces of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn id(self) -> usize {
        2 * self.axis + usize::from(self.side == Side::High)
    }

    pub fn from_id(id: usize) -> Self {
        Face {
            axis: id / 2,
            side: if id % 2 == 0 { Side::Low } else { Side::High },
        }
    }

    /// Config-style name: `x0`, `x1`, `y0`, …
    pub fn name(self) -> String {
        let axis = ["x", "y", "z"][self.axis];
        format!("{axis}{}", self.id() % 2)
    }

    pub fn parse(name: &str) -> Option<Self> {
        let (axis, side) = match name.as_bytes() {
            [a, s] => (*a, *s),
            _ => return None,
        };
        let axis = match axis {
            b'x' => 0,
            b'y' => 1,
            b'z' => 2,
            _ => return None,
        };
        let side = match side {
            b'0' => Side::Low,
            b'1' => Side::High,
            _ => return None,
        };
        Some(Face { axis, side })
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Real values on every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(ScalarField { grid, values })
    }

    /// Unchecked constructor for values produced by finite arithmetic.
    pub(crate) fn from_vec(grid: Arc<GridSpec>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        ScalarField { grid, values }
    }

    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<GridSpec>, c: f64) -> Self {
        let n = grid.node_count();
        ScalarField::from_vec(grid, vec![c; n])
    }

    /// Evaluates `f` at node coordinates (slice of length `dim`).
    pub fn from_fn(grid: Arc<GridSpec>, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.node_count())
            .map(|flat| f(&grid.coords(flat)[..d]))
            .collect();
        ScalarField::from_vec(grid, values)
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField::from_vec(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.same_grid(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::from_vec(self.grid.clone(), values)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    /// Trapezoidal ∫_Ω f.
    pub fn integrate(&self) -> f64 {
        weighted_dot(self.grid.weights(), &self.values, None)
    }

    /// Quadrature inner product ∫_Ω f g.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        weighted_dot(self.grid.weights(), &self.values, Some(&other.values))
    }

    /// (∫ f²)^{1/2}
    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.integrate() / self.grid.volume()
    }

    /// f − mean(f)
    pub fn mean_projected(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_boundary(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.grid.is_boundary(i))
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    /// Copy with boundary nodes set to zero.
    pub fn with_zero_boundary(&self) -> Self {
        let mut out = self.clone();
        for i in 0..out.len() {
            if self.grid.is_boundary(i) {
                out.values[i] = 0.0;
            }
        }
        out
    }

    /// Discrete Dirichlet energy ∫|∇f|², summed over grid edges with forward
    /// differences. Equals `−⟨Δ_N f, f⟩` for the zero-flux Neumann stencil.
    pub fn gradient_energy(&self) -> f64 {
        let grid = &*self.grid;
        let f = &self.values;
        let w = grid.weights();
        let mut total = 0.0;
        for a in 0..grid.dim() {
            let (n, s, h) = (grid.nodes[a], grid.strides[a], grid.spacing[a]);
            for flat in 0..f.len() {
                let i = (flat / s) % n;
                if i + 1 == n {
                    continue;
                }
                let d = f[flat + s] - f[flat];
                total += d * d / (h * h) * w[flat] * h / grid.axis_weight(a, i);
            }
        }
        total
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{}", self.grid.header())?;
        for v in &self.values {
            writeln!(out, "{v:e}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Io(format!("{}: empty file", path.display())))??;
        let grid = GridSpec::parse_header(header.trim())?;
        let mut values = Vec::with_capacity(grid.node_count());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|_| Error::Io(format!("{}: bad value `{t}`", path.display())))?,
            );
        }
        ScalarField::new(grid, values)
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: Option<&[f64]>) -> f64 {
    match b {
        Some(b) => w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum(),
        None => w.iter().zip(a).map(|(w, a)| w * a).sum(),
    }
}

/// Per-face values on boundary nodes (normal fluxes, surface data).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    grid: Arc<GridSpec>,
    faces: Vec<Vec<f64>>,
}

impl BoundaryData {
    pub fn zeros(grid: Arc<GridSpec>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<GridSpec>, c: f64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    /// `f(face, x)` evaluated at every node of every face.
    pub fn from_fn(grid: Arc<GridSpec>, f: impl Fn(Face, &[f64]) -> f64) -> Self {
        let d = grid.dim();
        let faces = grid
            .faces()
            .map(|face| {
                grid.face_nodes(face)
                    .into_iter()
                    .map(|flat| f(face, &grid.coords(flat)[..d]))
                    .collect()
            })
            .collect();
        BoundaryData { grid, faces }
    }

    /// Explicit values, indexed by `Face::id` and then `face_nodes` order.
    pub fn from_face_values(grid: Arc<GridSpec>, faces: Vec<Vec<f64>>) -> Result<Self> {
        if faces.len() != 2 * grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} faces for a {}-d grid",
                faces.len(),
                grid.dim()
            )));
        }
        for face in grid.faces() {
            let expected = grid.face_nodes(face).len();
            let got = faces[face.id()].len();
            if got != expected {
                return Err(Error::ShapeMismatch(format!(
                    "face {face}: {got} values for {expected} nodes"
                )));
            }
        }
        if faces.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary data"));
        }
        Ok(BoundaryData { grid, faces })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn face(&self, face: Face) -> &[f64] {
        &self.faces[face.id()]
    }

    pub fn is_zero(&self) -> bool {
        self.faces.iter().flatten().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.faces.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ∮_{∂Ω} b ds as the sum of per-face trapezoid rules. In one dimension
    /// this is counting measure on the two endpoints.
    pub fn integrate(&self) -> f64 {
        self.grid
            .faces()
            .map(|face| {
                let w = self.grid.face_weights(face);
                weighted_dot(&w, self.face(face), None)
            })
            .sum()
    }
}

/// Free-function form of [`ScalarField::integrate`].
pub fn integrate(f: &ScalarField) -> f64 {
    f.integrate()
}

/// Free-function form of [`BoundaryData::integrate`].
pub fn boundary_integrate(b: &BoundaryData) -> f64 {
    b.integrate()
}

/// Zero-flux Neumann Laplacian (mirror ghosts), accumulated into `out`.
pub(crate) fn neumann_laplacian_add(grid: &GridSpec, f: &[f64], out: &mut [f64]) {
    for a in 0..grid.dim() {
        let (n, s, h) = (grid.nodes[a], grid.strides[a], grid.spacing[a]);
        let inv_h2 = 1.0 / (h * h);
        for flat in 0..f.len() {
            let i = (flat / s) % n;
            let c = f[flat];
            let second = if i == 0 {
                2.0 * (f[flat + s] - c)
            } else if i + 1 == n {
                2.0 * (f[flat - s] - c)
            } else {
                f[flat + s] - 2.0 * c + f[flat - s]
            };
            out[flat] += second * inv_h2;
        }
    }
}

/// Contribution of a prescribed outward flux to the Neumann stencil: the
/// ghost value `inner + 2h·g` adds `2g/h` at each face node.
pub(crate) fn neumann_flux_add(flux: &BoundaryData, out: &mut [f64]) {
    let grid = flux.grid();
    for face in grid.faces() {
        let h = grid.spacing[face.axis];
        for (flat, g) in grid.face_nodes(face).into_iter().zip(flux.face(face)) {
            out[flat] += 2.0 * g / h;
        }
    }
}

/// Dirichlet Laplacian on interior nodes (boundary values treated as given,
/// normally zero); boundary outputs are zero.
pub(crate) fn dirichlet_laplacian(grid: &GridSpec, f: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..grid.dim() {
        let (s, h) = (grid.strides[a], grid.spacing[a]);
        let inv_h2 = 1.0 / (h * h);
        for flat in 0..f.len() {
            if grid.is_boundary(flat) {
                continue;
            }
            out[flat] += (f[flat + s] - 2.0 * f[flat] + f[flat - s]) * inv_h2;
        }
    }
}

/// Δf for fields vanishing on the boundary (within 1e−12).
pub fn apply_laplacian_dirichlet(f: &ScalarField) -> Result<ScalarField> {
    let max_abs = f.max_abs_boundary();
    if max_abs > 1e-12 {
        return Err(Error::NonzeroBoundary { max_abs });
    }
    let mut out = vec![0.0; f.len()];
    dirichlet_laplacian(f.grid(), f.values(), &mut out);
    Ok(ScalarField::from_vec(f.grid().clone(), out))
}

/// Δf with outward normal derivative `flux` imposed through mirror ghosts.
pub fn apply_laplacian_neumann(f: &ScalarField, flux: &BoundaryData) -> ScalarField {
    let mut out = vec![0.0; f.len()];
    neumann_laplacian_add(f.grid(), f.values(), &mut out);
    neumann_flux_add(flux, &mut out);
    ScalarField::from_vec(f.grid().clone(), out)
}
