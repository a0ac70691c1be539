//! Node-centered finite-volume discretization of `-ε² div(J ∇u) + V u` with
//! zero-flux (homogeneous Neumann) boundary faces.
//!
//! Every node owns the dual cell `[x - h/2, x + h/2]` clipped to the domain.
//! Fluxes live on the faces between neighbouring dual cells; no face is ever
//! created on `∂Ω`, which is how the Neumann condition enters. Ball domains use
//! the same lattice with cut-cell volume and face fractions.

use std::io::Write;
use std::ops::{Deref, DerefMut};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, SymbolicCache};
use crate::par;
use crate::problem::{dist2, DomainSpec, ProblemData};

/// Nodal values on a [`DomainGrid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteField(pub Vec<f64>);

impl DiscreteField {
    pub fn zeros(n: usize) -> Self {
        DiscreteField(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `(index, value)` of the largest entry; first index on ties.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        self.0.iter().cloned().enumerate().fold(None, |best, (i, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
    }

    pub fn max(&self) -> f64 {
        par::max(self.0.len(), |i| self.0[i])
    }

    pub fn min(&self) -> f64 {
        -par::max(self.0.len(), |i| -self.0[i])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for DiscreteField {
    fn from(v: Vec<f64>) -> Self {
        DiscreteField(v)
    }
}

impl Deref for DiscreteField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DiscreteField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Interior face between two nodes along `axis`; `coef` is face measure / spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub axis: usize,
    pub coef: f64,
}

#[derive(Debug)]
pub struct DomainGrid {
    pub spec: DomainSpec,
    pub counts: Vec<usize>,
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
    coords: Vec<f64>,
    /// Quadrature weight (dual-cell measure) per node.
    pub weights: Vec<f64>,
    /// Outward unit normal for nodes whose dual cell touches `∂Ω`.
    pub normals: Vec<Option<Vec<f64>>>,
    pub faces: Vec<Face>,
    lattice_of: Vec<usize>,
    node_of: Vec<usize>,
    node_faces_ptr: Vec<usize>,
    node_faces: Vec<usize>,
    pattern: OnceLock<CsrMatrix>,
    symbolic: SymbolicCache,
}

const INACTIVE: usize = usize::MAX;

impl DomainGrid {
    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn coord(&self, node: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[node * d..(node + 1) * d]
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Sum of quadrature weights.
    pub fn measure(&self) -> f64 {
        par::sum(self.n_nodes(), |i| self.weights[i])
    }

    pub fn lattice_index(&self, node: usize) -> Vec<usize> {
        let mut flat = self.lattice_of[node];
        self.counts
            .iter()
            .map(|c| {
                let i = flat % c;
                flat /= c;
                i
            })
            .collect()
    }

    pub fn node_at(&self, idx: &[usize]) -> Option<usize> {
        let mut flat = 0;
        let mut stride = 1;
        for (i, c) in idx.iter().zip(&self.counts) {
            if i >= c {
                return None;
            }
            flat += i * stride;
            stride *= c;
        }
        let n = self.node_of[flat];
        (n != INACTIVE).then_some(n)
    }

    /// Neighbouring node one lattice step along `axis` (`forward` = +).
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut idx = self.lattice_index(node);
        if forward {
            idx[axis] += 1;
        } else {
            idx[axis] = idx[axis].checked_sub(1)?;
        }
        self.node_at(&idx)
    }

    /// Faces incident to `node`.
    pub fn faces_of(&self, node: usize) -> impl Iterator<Item = &Face> {
        self.node_faces[self.node_faces_ptr[node]..self.node_faces_ptr[node + 1]]
            .iter()
            .map(|&f| &self.faces[f])
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.normals[node].is_some()
    }

    /// Sparsity pattern shared by every operator on this grid (diagonal always present).
    pub(crate) fn pattern(&self) -> &CsrMatrix {
        self.pattern.get_or_init(|| {
            let n = self.n_nodes();
            let rows = par::map_collect(n, |i| {
                let mut cols: Vec<usize> = self.faces_of(i).map(|f| if f.a == i { f.b } else { f.a }).collect();
                cols.push(i);
                cols.sort_unstable();
                cols
            });
            CsrMatrix::from_rows(n, rows.into_iter().map(|r| r.into_iter().map(|c| (c, 0.0)).collect()))
        })
    }

    pub fn symbolic_cache(&self) -> &SymbolicCache {
        &self.symbolic
    }

    /// Write node coordinates, weights and boundary flags as whitespace-separated columns.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# node coords... weight boundary")?;
        for i in 0..self.n_nodes() {
            write!(out, "{i}")?;
            for x in self.coord(i) {
                write!(out, " {x}")?;
            }
            writeln!(out, " {} {}", self.weights[i], u8::from(self.is_boundary(i)))?;
        }
        Ok(())
    }
}

fn trapezoid_weights(count: usize, h: f64) -> Vec<f64> {
    (0..count)
        .map(|i| if i == 0 || i + 1 == count { 0.5 * h } else { h })
        .collect()
}

/// Measure of `[lo, hi] ∩ ball`; axes with `lo == hi` are held fixed and
/// dropped from the measure. One free axis is integrated exactly (chord
/// length), the remaining free axes by a midpoint rule.
fn measure_in_ball(center: &[f64], radius: f64, lo: &[f64], hi: &[f64]) -> f64 {
    const SUB: usize = 16;
    let free: Vec<usize> = (0..lo.len()).filter(|&d| hi[d] > lo[d]).collect();
    match free.len() {
        0 => {
            if dist2(lo, center) < radius * radius {
                1.0
            } else {
                0.0
            }
        }
        1 => {
            let d = free[0];
            let mut r2 = radius * radius;
            for e in 0..lo.len() {
                if e != d {
                    r2 -= (lo[e] - center[e]).powi(2);
                }
            }
            if r2 <= 0.0 {
                return 0.0;
            }
            let half = r2.sqrt();
            let a = lo[d].max(center[d] - half);
            let b = hi[d].min(center[d] + half);
            (b - a).max(0.0)
        }
        _ => {
            let d = free[0];
            let width = (hi[d] - lo[d]) / SUB as f64;
            let mut total = 0.0;
            let mut l = lo.to_vec();
            let mut h = hi.to_vec();
            for k in 0..SUB {
                let x = lo[d] + (k as f64 + 0.5) * width;
                l[d] = x;
                h[d] = x;
                total += width * measure_in_ball(center, radius, &l, &h);
            }
            total
        }
    }
}

/// Build a node-centered grid with `counts[d]` nodes along axis `d`.
pub fn build_grid(spec: &DomainSpec, counts: &[usize]) -> Result<DomainGrid> {
    spec.validate()?;
    let dim = spec.dim();
    if counts.len() != dim {
        return Err(Error::InvalidInput(format!("{} node counts for a {dim}-dimensional domain", counts.len())));
    }
    if counts.iter().any(|&c| c < 8) {
        return Err(Error::InvalidInput("at least 8 nodes per axis are required".into()));
    }
    let (lower, upper) = spec.bounding_box();
    let spacing: Vec<f64> = (0..dim).map(|d| (upper[d] - lower[d]) / (counts[d] - 1) as f64).collect();
    let total: usize = counts.iter().product();
    let lattice_coord = |mut flat: usize| -> (Vec<usize>, Vec<f64>) {
        let mut idx = Vec::with_capacity(dim);
        let mut x = Vec::with_capacity(dim);
        for d in 0..dim {
            let i = flat % counts[d];
            flat /= counts[d];
            idx.push(i);
            x.push(if i + 1 == counts[d] { upper[d] } else { lower[d] + i as f64 * spacing[d] });
        }
        (idx, x)
    };
    let tw: Vec<Vec<f64>> = (0..dim).map(|d| trapezoid_weights(counts[d], spacing[d])).collect();
    // dual-cell extent along each axis, clipped to the bounding box
    let dual = |d: usize, i: usize, x: f64| -> (f64, f64) {
        let lo = if i == 0 { x } else { x - 0.5 * spacing[d] };
        let hi = if i + 1 == counts[d] { x } else { x + 0.5 * spacing[d] };
        (lo, hi)
    };

    // weight and boundary normal per lattice point
    let per_lattice = par::map_collect(total, |flat| {
        let (idx, x) = lattice_coord(flat);
        match spec {
            DomainSpec::Box { .. } => {
                let w: f64 = (0..dim).map(|d| tw[d][idx[d]]).product();
                let mut normal = vec![0.0; dim];
                let mut on_boundary = false;
                for d in 0..dim {
                    if idx[d] == 0 {
                        normal[d] -= 1.0;
                        on_boundary = true;
                    } else if idx[d] + 1 == counts[d] {
                        normal[d] += 1.0;
                        on_boundary = true;
                    }
                }
                let normal = on_boundary.then(|| {
                    let n = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                    normal.iter().map(|v| v / n).collect()
                });
                (w, normal)
            }
            DomainSpec::Ball { center, radius } => {
                let (lo, hi): (Vec<f64>, Vec<f64>) = (0..dim).map(|d| dual(d, idx[d], x[d])).unzip();
                let w = measure_in_ball(center, *radius, &lo, &hi);
                let full: f64 = (0..dim).map(|d| hi[d] - lo[d]).product();
                let normal = (w < full * (1.0 - 1e-12)).then(|| {
                    let r = dist2(&x, center).sqrt().max(f64::MIN_POSITIVE);
                    x.iter().zip(center).map(|(x, c)| (x - c) / r).collect()
                });
                (w, normal)
            }
        }
    });

    let full_cell: f64 = spacing.iter().product();
    let mut node_of = vec![INACTIVE; total];
    let mut lattice_of = Vec::new();
    let mut weights = Vec::new();
    let mut normals = Vec::new();
    let mut coords = Vec::new();
    for (flat, (w, normal)) in per_lattice.into_iter().enumerate() {
        if w > 1e-6 * full_cell {
            node_of[flat] = lattice_of.len();
            lattice_of.push(flat);
            weights.push(w);
            normals.push(normal);
            coords.extend(lattice_coord(flat).1);
        }
    }
    if weights.is_empty() {
        return Err(Error::UnsupportedShape("grid has no active nodes".into()));
    }

    let n_nodes = weights.len();
    let stride: Vec<usize> = (0..dim).map(|d| counts[..d].iter().product()).collect();
    let face_lists = par::map_collect(n_nodes, |a| {
        let flat = lattice_of[a];
        let (idx, x) = lattice_coord(flat);
        let mut out = Vec::new();
        for axis in 0..dim {
            if idx[axis] + 1 >= counts[axis] {
                continue;
            }
            let b = node_of[flat + stride[axis]];
            if b == INACTIVE {
                continue;
            }
            let coef = match spec {
                DomainSpec::Box { .. } => {
                    (0..dim).filter(|&d| d != axis).map(|d| tw[d][idx[d]]).product::<f64>() / spacing[axis]
                }
                DomainSpec::Ball { center, radius } => {
                    let mut lo = Vec::with_capacity(dim);
                    let mut hi = Vec::with_capacity(dim);
                    for d in 0..dim {
                        if d == axis {
                            let m = x[d] + 0.5 * spacing[d];
                            lo.push(m);
                            hi.push(m);
                        } else {
                            let (l, h) = dual(d, idx[d], x[d]);
                            lo.push(l);
                            hi.push(h);
                        }
                    }
                    measure_in_ball(center, *radius, &lo, &hi) / spacing[axis]
                }
            };
            if coef > 0.0 {
                out.push(Face { a, b, axis, coef });
            }
        }
        out
    });
    let faces: Vec<Face> = face_lists.into_iter().flatten().collect();

    let mut degree = vec![0usize; n_nodes];
    for f in &faces {
        degree[f.a] += 1;
        degree[f.b] += 1;
    }
    let mut node_faces_ptr = vec![0usize; n_nodes + 1];
    for i in 0..n_nodes {
        node_faces_ptr[i + 1] = node_faces_ptr[i] + degree[i];
    }
    let mut fill = node_faces_ptr.clone();
    let mut node_faces = vec![0usize; node_faces_ptr[n_nodes]];
    for (k, f) in faces.iter().enumerate() {
        node_faces[fill[f.a]] = k;
        fill[f.a] += 1;
        node_faces[fill[f.b]] = k;
        fill[f.b] += 1;
    }

    Ok(DomainGrid {
        spec: spec.clone(),
        counts: counts.to_vec(),
        lower,
        spacing,
        coords,
        weights,
        normals,
        faces,
        lattice_of,
        node_of,
        node_faces_ptr,
        node_faces,
        pattern: OnceLock::new(),
        symbolic: SymbolicCache::default(),
    })
}

/// Discrete form `a(u,v) = ∫ ε² J ∇u·∇v + ∫ V u v` and the lumped mass.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub eps: f64,
    /// `ε² J` flux part; rows sum to zero.
    pub flux: CsrMatrix,
    /// Lumped `∫ V u v`: weight times `V` at the node.
    pub potential: Vec<f64>,
    /// Lumped mass (the quadrature weights).
    pub mass: Vec<f64>,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// `A u`
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.flux.matvec(u);
        par::fill_add(&mut out, |i| self.potential[i] * u[i]);
        out
    }

    /// `uᵀ A v`
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let av = self.apply(v);
        par::dot(u, &av)
    }

    /// `∫ u v` with the lumped mass.
    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        par::sum(u.len(), |i| self.mass[i] * u[i] * v[i])
    }

    /// Full matrix `flux + diag(potential)` as `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.flux.nnz());
        for row in 0..self.n() {
            for (col, val) in self.flux.row(row) {
                let v = if col == row { val + self.potential[row] } else { val };
                out.push((row, col, v));
            }
        }
        out
    }

    /// Plain-text `row col value` dump, one entry per line.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# row col value")?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v}")?;
        }
        Ok(())
    }
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Assemble the operator for the given `ε` on `grid`.
pub fn assemble(grid: &DomainGrid, data: &ProblemData, eps: f64) -> Result<OperatorMatrix> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {eps}")));
    }
    if data.dim != grid.dim() {
        return Err(Error::InvalidInput("grid and problem dimensions differ".into()));
    }
    let n = grid.n_nodes();
    let jv = par::map_collect(n, |i| data.coefficients_at(grid.coord(i)));
    let mut j = Vec::with_capacity(n);
    let mut potential = Vec::with_capacity(n);
    for (i, c) in jv.into_iter().enumerate() {
        let (ji, vi) = c?;
        j.push(ji);
        potential.push(grid.weights[i] * vi);
    }
    let eps2 = eps * eps;
    let face_values = par::map_collect(grid.faces.len(), |k| {
        let f = &grid.faces[k];
        eps2 * harmonic_mean(j[f.a], j[f.b]) * f.coef
    });
    let pattern = grid.pattern();
    let rows = par::map_collect(n, |i| {
        let mut diag = 0.0;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for &fk in &grid.node_faces[grid.node_faces_ptr[i]..grid.node_faces_ptr[i + 1]] {
            let f = &grid.faces[fk];
            let other = if f.a == i { f.b } else { f.a };
            diag += face_values[fk];
            entries.push((other, -face_values[fk]));
        }
        entries.push((i, diag));
        entries.sort_unstable_by_key(|e| e.0);
        entries
    });
    let flux = CsrMatrix::from_rows(n, rows);
    debug_assert_eq!(flux.row_ptr, pattern.row_ptr);
    Ok(OperatorMatrix {
        eps,
        flux,
        potential,
        mass: grid.weights.clone(),
    })
}
