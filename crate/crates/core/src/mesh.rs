//! Conforming triangulations of polygonal domains with oriented edge topology.
//!
//! Cells are stored counterclockwise. Local edge `i` of a cell is the edge
//! opposite local vertex `i`. Every edge carries one global unit normal: on
//! interior edges it points out of the adjacent cell with the lower index, on
//! boundary edges it points out of the domain. `cell_edge_signs` records
//! whether the global normal agrees (+1) with the cell's outward normal.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 2];

/// Marker for the missing second neighbour of a boundary edge.
pub const NO_CELL: usize = usize::MAX;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0)
    }

    /// The square `(-1/2, 1/2)^2`.
    pub fn centered_unit() -> Self {
        Self::new(-0.5, 0.5, -0.5, 0.5)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Per-cell affine geometry. All quantities are constant on the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub vertices: [Point; 3],
    /// Columns are `a_1 - a_0` and `a_2 - a_0`.
    pub jacobian: [[f64; 2]; 2],
    /// Signed determinant of the jacobian (twice the signed area).
    pub det: f64,
    pub area: f64,
    pub grad_lambda: [Point; 3],
    /// Diameter `h_K` (longest edge).
    pub diameter: f64,
    /// Diameter of the inscribed circle.
    pub inball_diameter: f64,
    pub edge_lengths: [f64; 3],
    /// Outward unit normal of local edge `i`.
    pub normals: [Point; 3],
    pub centroid: Point,
}

impl CellGeometry {
    pub fn new(a: [Point; 3]) -> Self {
        let jac = [[a[1][0] - a[0][0], a[2][0] - a[0][0]], [a[1][1] - a[0][1], a[2][1] - a[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let mut edge_lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        let mut grad_lambda = [[0.0; 2]; 3];
        for i in 0..3 {
            let p = a[(i + 1) % 3];
            let q = a[(i + 2) % 3];
            let t = [q[0] - p[0], q[1] - p[1]];
            let len = t[0].hypot(t[1]);
            edge_lengths[i] = len;
            normals[i] = [t[1] / len, -t[0] / len];
            // grad lambda_i = -|e_i| n_i / (2|K|), with the signed area
            grad_lambda[i] = [-t[1] / det, t[0] / det];
        }
        let perimeter: f64 = edge_lengths.iter().sum();
        let area = 0.5 * det.abs();
        Self {
            vertices: a,
            jacobian: jac,
            det,
            area,
            grad_lambda,
            diameter: edge_lengths.iter().cloned().fold(0.0, f64::max),
            inball_diameter: 4.0 * area / perimeter,
            edge_lengths,
            normals,
            centroid: [
                (a[0][0] + a[1][0] + a[2][0]) / 3.0,
                (a[0][1] + a[1][1] + a[2][1]) / 3.0,
            ],
        }
    }

    /// Physical point with the given barycentric coordinates.
    pub fn point(&self, bary: [f64; 3]) -> Point {
        let a = &self.vertices;
        [
            bary[0] * a[0][0] + bary[1] * a[1][0] + bary[2] * a[2][0],
            bary[0] * a[0][1] + bary[1] * a[1][1] + bary[2] * a[2][1],
        ]
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let a0 = self.vertices[0];
        let d = [x[0] - a0[0], x[1] - a0[1]];
        let j = &self.jacobian;
        let l1 = (j[1][1] * d[0] - j[0][1] * d[1]) / self.det;
        let l2 = (-j[1][0] * d[0] + j[0][0] * d[1]) / self.det;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn shape_ratio(&self) -> f64 {
        self.diameter / self.inball_diameter
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    /// Vertex pairs, stored with the smaller index first.
    edges: Vec<[usize; 2]>,
    /// `[lower, higher]` adjacent cell; `higher == NO_CELL` on the boundary.
    edge_cells: Vec<[usize; 2]>,
    edge_normals: Vec<Point>,
    edge_lengths: Vec<f64>,
    cell_edges: Vec<[usize; 3]>,
    cell_edge_signs: Vec<[f64; 3]>,
    boundary_edges: Vec<bool>,
    boundary_vertices: Vec<bool>,
    geometry: Vec<CellGeometry>,
}

impl Mesh {
    /// Builds the edge topology and geometry cache. Cells must be
    /// counterclockwise with positive area, and every edge may be shared by at
    /// most two cells.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self> {
        if cells.is_empty() {
            return invalid("mesh has no cells");
        }
        let nv = vertices.len();
        let mut geometry = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            if c.iter().any(|&v| v >= nv) {
                return invalid(format!("cell {k} references a vertex out of range"));
            }
            let g = CellGeometry::new([vertices[c[0]], vertices[c[1]], vertices[c[2]]]);
            if !(g.det > 0.0) {
                return invalid(format!("cell {k} is not counterclockwise or is degenerate"));
            }
            geometry.push(g);
        }

        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(cells.len() * 2);
        let mut edges = Vec::new();
        let mut edge_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            let mut cs = [0.0; 3];
            for i in 0..3 {
                let a = c[(i + 1) % 3];
                let b = c[(i + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                match lookup.get(&key) {
                    Some(&e) => {
                        if edge_cells[e][1] != NO_CELL {
                            return invalid(format!("edge {key:?} is shared by more than two cells"));
                        }
                        edge_cells[e][1] = k;
                        ce[i] = e;
                        cs[i] = -1.0;
                    }
                    None => {
                        let e = edges.len();
                        lookup.insert(key, e);
                        edges.push(key);
                        edge_cells.push([k, NO_CELL]);
                        ce[i] = e;
                        cs[i] = 1.0;
                    }
                }
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
        }

        let mut edge_normals = vec![[0.0; 2]; edges.len()];
        let mut edge_lengths = vec![0.0; edges.len()];
        for (k, ce) in cell_edges.iter().enumerate() {
            for i in 0..3 {
                if cell_edge_signs[k][i] > 0.0 {
                    edge_normals[ce[i]] = geometry[k].normals[i];
                    edge_lengths[ce[i]] = geometry[k].edge_lengths[i];
                }
            }
        }
        let boundary_edges: Vec<bool> = edge_cells.iter().map(|c| c[1] == NO_CELL).collect();
        let mut boundary_vertices = vec![false; nv];
        for (e, &b) in boundary_edges.iter().enumerate() {
            if b {
                boundary_vertices[edges[e][0]] = true;
                boundary_vertices[edges[e][1]] = true;
            }
        }
        Ok(Self {
            vertices,
            cells,
            edges,
            edge_cells,
            edge_normals,
            edge_lengths,
            cell_edges,
            cell_edge_signs,
            boundary_edges,
            boundary_vertices,
            geometry,
        })
    }

    /// Uniform `n x n` grid of squares, each split into two right triangles
    /// along the diagonal from its lower-left to its upper-right corner.
    pub fn uniform_square(n: usize, domain: Rect) -> Result<Self> {
        if n == 0 {
            return invalid("cells per side must be at least 1");
        }
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
            return invalid("degenerate domain");
        }
        let dx = (domain.x1 - domain.x0) / n as f64;
        let dy = (domain.y1 - domain.y0) / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let x = if i == n { domain.x1 } else { domain.x0 + i as f64 * dx };
                let y = if j == n { domain.y1 } else { domain.y0 + j as f64 * dy };
                vertices.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(vertices, cells)
    }

    /// Red refinement: every triangle is split into four similar children
    /// through its edge midpoints.
    pub fn refine_uniform(&self) -> Result<Self> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for e in &self.edges {
            let a = self.vertices[e[0]];
            let b = self.vertices[e[1]];
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (k, c) in self.cells.iter().enumerate() {
            let m = self.cell_edges[k].map(|e| nv + e);
            cells.push([c[0], m[2], m[1]]);
            cells.push([m[2], c[1], m[0]]);
            cells.push([m[1], m[0], c[2]]);
            cells.push([m[0], m[1], m[2]]);
        }
        Self::new(vertices, cells)
    }

    /// Moves every interior vertex by up to `magnitude` times the length of
    /// its shortest incident edge, in a direction drawn from a seeded RNG.
    /// A move that would invert or nearly collapse an adjacent cell is retried
    /// with half the displacement.
    pub fn perturb_interior_vertices(&self, magnitude: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.3).contains(&magnitude) {
            return invalid(format!("perturbation magnitude {magnitude} outside [0, 0.3)"));
        }
        let mut vertices = self.vertices.clone();
        if magnitude == 0.0 {
            return Self::new(vertices, self.cells.clone());
        }
        let nv = vertices.len();
        let mut vertex_cells: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (k, c) in self.cells.iter().enumerate() {
            for &v in c {
                vertex_cells[v].push(k);
            }
        }
        let mut local_h = vec![f64::INFINITY; nv];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            local_h[a] = local_h[a].min(self.edge_lengths[e]);
            local_h[b] = local_h[b].min(self.edge_lengths[e]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in 0..nv {
            // Draw for every vertex so the stream does not depend on topology.
            let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let radius: f64 = rng.random::<f64>().sqrt();
            if self.boundary_vertices[v] {
                continue;
            }
            let mut scale = magnitude * local_h[v] * radius;
            let origin = vertices[v];
            for _ in 0..20 {
                let trial = [origin[0] + scale * angle.cos(), origin[1] + scale * angle.sin()];
                vertices[v] = trial;
                let ok = vertex_cells[v].iter().all(|&k| {
                    let c = self.cells[k];
                    let g = CellGeometry::new([vertices[c[0]], vertices[c[1]], vertices[c[2]]]);
                    g.det > 0.25 * self.geometry[k].det
                });
                if ok {
                    break;
                }
                vertices[v] = origin;
                scale *= 0.5;
            }
        }
        Self::new(vertices, self.cells.clone())
    }

    /// `max_K h_K / rho_K`, with `rho_K` the inscribed-circle diameter.
    pub fn shape_regularity(&self) -> f64 {
        self.geometry.iter().map(CellGeometry::shape_ratio).fold(0.0, f64::max)
    }

    /// Mesh size `h = max_K h_K`.
    pub fn h_max(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_cells(&self, e: usize) -> [usize; 2] {
        self.edge_cells[e]
    }

    pub fn edge_normal(&self, e: usize) -> Point {
        self.edge_normals[e]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_lengths[e]
    }

    pub fn cell_edges(&self, k: usize) -> [usize; 3] {
        self.cell_edges[k]
    }

    pub fn cell_edge_signs(&self, k: usize) -> [f64; 3] {
        self.cell_edge_signs[k]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edges[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices[v]
    }

    pub fn num_boundary_vertices(&self) -> usize {
        self.boundary_vertices.iter().filter(|&&b| b).count()
    }

    pub fn geometry(&self, k: usize) -> &CellGeometry {
        &self.geometry[k]
    }

    pub fn geometries(&self) -> &[CellGeometry] {
        &self.geometry
    }

    /// Writes the plain-text node/element format: a header line with vertex
    /// and cell counts, one `x y` line per vertex, then one 1-based
    /// `i j k` line per cell.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.vertices.len(), self.cells.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0] + 1, c[1] + 1, c[2] + 1)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_to`]. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
        let fmt_err = |line: usize, message: &str| Error::MeshFormat { line, message: message.to_string() };

        let (ln, header) = lines.next().ok_or_else(|| fmt_err(0, "missing header"))?;
        let header = header?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| fmt_err(ln, "header must hold two counts")))
            .collect::<Result<_>>()?;
        if counts.len() != 2 {
            return Err(fmt_err(ln, "header must hold two counts"));
        }
        let (nv, nc) = (counts[0], counts[1]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| fmt_err(0, "unexpected end of file in vertex block"))?;
            let l = l?;
            let xs: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| fmt_err(ln, "bad coordinate")))
                .collect::<Result<_>>()?;
            if xs.len() != 2 {
                return Err(fmt_err(ln, "vertex line needs two coordinates"));
            }
            vertices.push([xs[0], xs[1]]);
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (ln, l) = lines.next().ok_or_else(|| fmt_err(0, "unexpected end of file in cell block"))?;
            let l = l?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| fmt_err(ln, "bad vertex index")))
                .collect::<Result<_>>()?;
            if ids.len() != 3 || ids.iter().any(|&i| i == 0 || i > nv) {
                return Err(fmt_err(ln, "cell line needs three 1-based vertex indices"));
            }
            cells.push([ids[0] - 1, ids[1] - 1, ids[2] - 1]);
        }
        Self::new(vertices, cells)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }
}
