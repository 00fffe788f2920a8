//! Global DOF numbering for the velocity, pressure and H(div) spaces.
//!
//! Velocity numbering: nodal DOFs `2 * node + component` (vertices, then edge
//! midpoints for k = 2), followed by the bubble block (`2 nv + e` for the face
//! bubbles, `2 (nv + ne) + 2 K + c` for the cell bubbles).

use crate::basis::{CellFrame, RtOrder, VelocityElementKind};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{gauss_legendre_unit, triangle_rule, ASSEMBLY_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Every velocity component vanishes on the boundary.
    Full,
    /// Only the normal component vanishes (axis-aligned boundaries).
    NoPenetration,
}

#[derive(Debug, Clone)]
pub struct VelocitySpace {
    pub kind: VelocityElementKind,
    num_nodes: usize,
    num_bubbles: usize,
    cell_dofs: Vec<usize>,
    node_points: Vec<Point>,
}

impl VelocitySpace {
    pub fn num_dofs(&self) -> usize {
        self.num_nodal() + self.num_bubbles
    }

    pub fn num_nodal(&self) -> usize {
        2 * self.num_nodes
    }

    pub fn num_bubbles(&self) -> usize {
        self.num_bubbles
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn is_nodal(&self, dof: usize) -> bool {
        dof < self.num_nodal()
    }

    pub fn node_point(&self, node: usize) -> Point {
        self.node_points[node]
    }

    pub fn cell_dofs(&self, k: usize) -> &[usize] {
        let n = self.kind.num_local_dofs();
        &self.cell_dofs[k * n..(k + 1) * n]
    }

    pub fn all_cell_dofs(&self) -> &[usize] {
        &self.cell_dofs
    }
}

#[derive(Debug, Clone)]
pub struct PressureSpace {
    pub kind: VelocityElementKind,
    num_cells: usize,
    mean_weights: Vec<f64>,
}

impl PressureSpace {
    pub fn local_dofs(&self) -> usize {
        self.kind.num_local_pressure()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_cells * self.local_dofs()
    }

    pub fn cell_dofs(&self, k: usize) -> std::ops::Range<usize> {
        k * self.local_dofs()..(k + 1) * self.local_dofs()
    }

    pub fn all_cell_dofs(&self) -> Vec<usize> {
        (0..self.num_dofs()).collect()
    }

    /// Row vector `m` with `m . p = int_Omega p_h`.
    pub fn mean_weights(&self) -> &[f64] {
        &self.mean_weights
    }

    /// Coefficients of the constant pressure `1`.
    pub fn constant_mode(&self) -> Vec<f64> {
        let nl = self.local_dofs();
        (0..self.num_dofs()).map(|d| if d % nl == 0 { 1.0 } else { 0.0 }).collect()
    }
}

/// Global RT DOFs: edge moments `e * edge_dofs + q`, then interior moments
/// `num_edges * edge_dofs + 2 K + c`. Local functionals are defined with the
/// global edge orientation, so shared DOFs carry no extra sign.
#[derive(Debug, Clone)]
pub struct HdivSpace {
    pub order: RtOrder,
    num_edges: usize,
    num_cells: usize,
    cell_dofs: Vec<usize>,
}

impl HdivSpace {
    pub fn num_dofs(&self) -> usize {
        self.num_edges * self.order.edge_dofs() + self.num_cells * self.order.interior_dofs()
    }

    pub fn cell_dofs(&self, k: usize) -> &[usize] {
        let n = self.order.local_dofs();
        &self.cell_dofs[k * n..(k + 1) * n]
    }
}

/// A mesh together with its velocity, pressure and H(div) spaces.
#[derive(Debug, Clone)]
pub struct Spaces {
    mesh: Mesh,
    pub velocity: VelocitySpace,
    pub pressure: PressureSpace,
    pub hdiv: HdivSpace,
    frames: Vec<CellFrame>,
}

impl Spaces {
    pub fn new(mesh: &Mesh, kind: VelocityElementKind) -> Self {
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let nc = mesh.num_cells();
        let (num_nodes, num_bubbles) = match kind {
            VelocityElementKind::BernardiRaugel => (nv, ne),
            VelocityElementKind::P2Bubble => (nv + ne, 2 * nc),
        };
        let mut node_points = mesh.vertices().to_vec();
        if kind == VelocityElementKind::P2Bubble {
            for &[a, b] in mesh.edges() {
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                node_points.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            }
        }
        let mut cell_dofs = Vec::with_capacity(nc * kind.num_local_dofs());
        for k in 0..nc {
            let cell = mesh.cells()[k];
            let edges = mesh.cell_edges(k);
            let nodes: Vec<usize> = match kind {
                VelocityElementKind::BernardiRaugel => cell.to_vec(),
                VelocityElementKind::P2Bubble => cell.iter().copied().chain(edges.iter().map(|e| nv + e)).collect(),
            };
            for n in nodes {
                cell_dofs.push(2 * n);
                cell_dofs.push(2 * n + 1);
            }
            match kind {
                VelocityElementKind::BernardiRaugel => cell_dofs.extend(edges.iter().map(|e| 2 * nv + e)),
                VelocityElementKind::P2Bubble => {
                    let base = 2 * num_nodes + 2 * k;
                    cell_dofs.extend([base, base + 1]);
                }
            }
        }

        let npl = kind.num_local_pressure();
        let mut mean_weights = Vec::with_capacity(nc * npl);
        for g in mesh.geometries() {
            // exact integrals of the monomials 1, x, y
            let w = [g.area, g.area * g.centroid[0], g.area * g.centroid[1]];
            mean_weights.extend_from_slice(&w[..npl]);
        }

        let order = kind.rt_order();
        let mut rt_dofs = Vec::with_capacity(nc * order.local_dofs());
        for k in 0..nc {
            for e in mesh.cell_edges(k) {
                rt_dofs.extend((0..order.edge_dofs()).map(|q| e * order.edge_dofs() + q));
            }
            let base = ne * order.edge_dofs() + order.interior_dofs() * k;
            rt_dofs.extend(base..base + order.interior_dofs());
        }

        let frames = (0..nc).map(|k| CellFrame::new(mesh, k)).collect();
        Self {
            mesh: mesh.clone(),
            velocity: VelocitySpace { kind, num_nodes, num_bubbles, cell_dofs, node_points },
            pressure: PressureSpace { kind, num_cells: nc, mean_weights },
            hdiv: HdivSpace { order, num_edges: ne, num_cells: nc, cell_dofs: rt_dofs },
            frames,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn kind(&self) -> VelocityElementKind {
        self.velocity.kind
    }

    pub fn frame(&self, k: usize) -> &CellFrame {
        &self.frames[k]
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    /// Sorted list of velocity DOFs fixed by the boundary condition.
    pub fn constrained_dofs(&self, mode: BoundaryMode) -> Result<Vec<usize>> {
        let mesh = &self.mesh;
        let nv = mesh.num_vertices();
        let mut fixed = vec![false; self.velocity.num_dofs()];
        // per scalar node: which components are normal to the boundary
        let mut normal_comp = vec![[false; 2]; self.velocity.num_nodes()];
        for e in (0..mesh.num_edges()).filter(|&e| mesh.is_boundary_edge(e)) {
            let n = mesh.edge_normal(e);
            let comps = match mode {
                BoundaryMode::Full => [true, true],
                BoundaryMode::NoPenetration => {
                    if n[1].abs() < 1e-12 {
                        [true, false]
                    } else if n[0].abs() < 1e-12 {
                        [false, true]
                    } else {
                        return Err(Error::Unsupported(format!(
                            "no-penetration constraint on boundary edge {e} with non-axis-aligned normal {n:?}"
                        )));
                    }
                }
            };
            let [a, b] = mesh.edges()[e];
            let mut nodes = vec![a, b];
            if self.kind() == VelocityElementKind::P2Bubble {
                nodes.push(nv + e);
            } else {
                fixed[2 * nv + e] = true;
            }
            for node in nodes {
                for c in 0..2 {
                    normal_comp[node][c] |= comps[c];
                }
            }
        }
        for (node, comps) in normal_comp.iter().enumerate() {
            for c in 0..2 {
                if comps[c] {
                    fixed[2 * node + c] = true;
                }
            }
        }
        Ok((0..fixed.len()).filter(|&i| fixed[i]).collect())
    }

    /// Interpolant `I_h^V u`: nodal values at the Lagrange nodes; face bubble
    /// coefficients reproduce the edge flux `int_e u . n_e`, cell bubble
    /// coefficients reproduce the cell mean of `u`.
    pub fn interpolate(&self, u: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let mesh = &self.mesh;
        let vs = &self.velocity;
        let mut out = vec![0.0; vs.num_dofs()];
        for node in 0..vs.num_nodes() {
            let v = u(vs.node_point(node));
            out[2 * node] = v[0];
            out[2 * node + 1] = v[1];
        }
        let nv = mesh.num_vertices();
        match self.kind() {
            VelocityElementKind::BernardiRaugel => {
                let (gx, gw) = gauss_legendre_unit(6);
                for (e, &[a, b]) in mesh.edges().iter().enumerate() {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    let n = mesh.edge_normal(e);
                    let len = mesh.edge_length(e);
                    let mut flux = 0.0;
                    for (t, w) in gx.iter().zip(&gw) {
                        let v = u([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                        flux += w * len * (v[0] * n[0] + v[1] * n[1]);
                    }
                    let nodal_flux = 0.5
                        * len
                        * ((out[2 * a] + out[2 * b]) * n[0] + (out[2 * a + 1] + out[2 * b + 1]) * n[1]);
                    out[2 * nv + e] = (flux - nodal_flux) / (len / 6.0);
                }
            }
            VelocityElementKind::P2Bubble => {
                let rule = triangle_rule(ASSEMBLY_DEGREE).expect("tabulated rule");
                for k in 0..mesh.num_cells() {
                    let g = mesh.geometry(k);
                    let dofs = vs.cell_dofs(k);
                    let mut mean = [0.0; 2];
                    for (p, w) in rule.iter() {
                        let v = u(g.point(*p));
                        mean[0] += w * g.area * v[0];
                        mean[1] += w * g.area * v[1];
                    }
                    for c in 0..2 {
                        // vertex P2 functions have zero mean, midpoint ones |K|/3
                        let nodal: f64 = (3..6).map(|i| out[dofs[2 * i + c]]).sum::<f64>() * g.area / 3.0;
                        out[dofs[12 + c]] = (mean[c] - nodal) / (g.area / 60.0);
                    }
                }
            }
        }
        out
    }
}
