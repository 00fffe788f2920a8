//! Local shape functions for the velocity, pressure and H(div) families.
//!
//! Velocity local DOF order: nodal DOFs first (node-major, component-minor;
//! vertices then edge midpoints for k = 2), then bubble DOFs (one face bubble
//! per local edge for k = 1, the two components of the cell bubble for k = 2).

use nalgebra::{DMatrix, DVector};

use crate::mesh::{CellGeometry, Mesh, Point};
use crate::quadrature::{gauss_legendre_unit, triangle_rule, QuadratureRule, ASSEMBLY_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VelocityElementKind {
    /// `[P1]^2` plus one normal face bubble per edge (k = 1).
    BernardiRaugel,
    /// `[P2 + b_K P0]^2` (k = 2).
    P2Bubble,
}

impl std::str::FromStr for VelocityElementKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "br" | "bernardi-raugel" | "bernardi_raugel" => Ok(Self::BernardiRaugel),
            "p2b" | "p2bubble" | "p2-bubble" => Ok(Self::P2Bubble),
            _ => Err(crate::error::Error::InvalidArgument(format!("unknown element '{s}'"))),
        }
    }
}

impl VelocityElementKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BernardiRaugel => "br",
            Self::P2Bubble => "p2b",
        }
    }

    pub fn order(self) -> usize {
        match self {
            Self::BernardiRaugel => 1,
            Self::P2Bubble => 2,
        }
    }

    /// Scalar Lagrange nodes per cell.
    pub fn num_scalar_nodes(self) -> usize {
        match self {
            Self::BernardiRaugel => 3,
            Self::P2Bubble => 6,
        }
    }

    pub fn num_local_nodal(self) -> usize {
        2 * self.num_scalar_nodes()
    }

    pub fn num_local_bubbles(self) -> usize {
        match self {
            Self::BernardiRaugel => 3,
            Self::P2Bubble => 2,
        }
    }

    pub fn num_local_dofs(self) -> usize {
        self.num_local_nodal() + self.num_local_bubbles()
    }

    pub fn rt_order(self) -> RtOrder {
        match self {
            Self::BernardiRaugel => RtOrder::Rt0,
            Self::P2Bubble => RtOrder::Rt1,
        }
    }

    /// Pressure DOFs per cell (discontinuous `P^{k-1}`).
    pub fn num_local_pressure(self) -> usize {
        match self {
            Self::BernardiRaugel => 1,
            Self::P2Bubble => 3,
        }
    }

    /// Barycentric coordinates of the scalar Lagrange nodes.
    pub fn scalar_nodes(self) -> &'static [[f64; 3]] {
        const P1: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        const P2: [[f64; 3]; 6] = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ];
        match self {
            Self::BernardiRaugel => &P1,
            Self::P2Bubble => &P2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RtOrder {
    Rt0,
    Rt1,
}

impl RtOrder {
    pub fn edge_dofs(self) -> usize {
        match self {
            Self::Rt0 => 1,
            Self::Rt1 => 2,
        }
    }

    pub fn interior_dofs(self) -> usize {
        match self {
            Self::Rt0 => 0,
            Self::Rt1 => 2,
        }
    }

    pub fn local_dofs(self) -> usize {
        3 * self.edge_dofs() + self.interior_dofs()
    }
}

/// Global orientation data of a cell's three local edges.
#[derive(Debug, Clone)]
pub struct CellFrame {
    pub geometry: CellGeometry,
    /// Global unit normal of each local edge.
    pub edge_normals: [Point; 3],
    /// Endpoints of each local edge ordered by global vertex index.
    pub edge_ends: [[Point; 2]; 3],
}

impl CellFrame {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let edges = mesh.cell_edges(k);
        Self {
            geometry: mesh.geometry(k).clone(),
            edge_normals: edges.map(|e| mesh.edge_normal(e)),
            edge_ends: edges.map(|e| {
                let [a, b] = mesh.edges()[e];
                [mesh.vertices()[a], mesh.vertices()[b]]
            }),
        }
    }

    /// A lone cell whose global normals are its outward normals.
    pub fn standalone(geometry: CellGeometry) -> Self {
        let a = geometry.vertices;
        Self {
            edge_normals: geometry.normals,
            edge_ends: [[a[1], a[2]], [a[2], a[0]], [a[0], a[1]]],
            geometry,
        }
    }
}

/// Value and gradient (`grad[a][b] = d v_a / d x_b`) of a vector function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VectorJet {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

/// Scalar Lagrange basis (P1 or P2) values and gradients.
pub fn scalar_lagrange(kind: VelocityElementKind, geom: &CellGeometry, l: [f64; 3]) -> Vec<(f64, Point)> {
    let gl = &geom.grad_lambda;
    match kind {
        VelocityElementKind::BernardiRaugel => (0..3).map(|i| (l[i], gl[i])).collect(),
        VelocityElementKind::P2Bubble => {
            let mut out = Vec::with_capacity(6);
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out.push((l[i] * (2.0 * l[i] - 1.0), [s * gl[i][0], s * gl[i][1]]));
            }
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                out.push((
                    4.0 * l[j] * l[k],
                    [4.0 * (l[j] * gl[k][0] + l[k] * gl[j][0]), 4.0 * (l[j] * gl[k][1] + l[k] * gl[j][1])],
                ));
            }
            out
        }
    }
}

/// All local velocity basis functions at a barycentric point. Face bubbles
/// are `l_j l_k n_e` with `n_e` the global normal of the edge, so they agree
/// on both sides of an interior edge.
pub fn eval_velocity_basis(kind: VelocityElementKind, frame: &CellFrame, l: [f64; 3]) -> Vec<VectorJet> {
    let geom = &frame.geometry;
    let gl = &geom.grad_lambda;
    let mut out = Vec::with_capacity(kind.num_local_dofs());
    for (v, g) in scalar_lagrange(kind, geom, l) {
        for c in 0..2 {
            let mut jet = VectorJet::default();
            jet.value[c] = v;
            jet.grad[c] = g;
            out.push(jet);
        }
    }
    match kind {
        VelocityElementKind::BernardiRaugel => {
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                let n = frame.edge_normals[i];
                let s = l[j] * l[k];
                let ds = [l[j] * gl[k][0] + l[k] * gl[j][0], l[j] * gl[k][1] + l[k] * gl[j][1]];
                out.push(VectorJet {
                    value: [s * n[0], s * n[1]],
                    grad: [[n[0] * ds[0], n[0] * ds[1]], [n[1] * ds[0], n[1] * ds[1]]],
                });
            }
        }
        VelocityElementKind::P2Bubble => {
            let b = l[0] * l[1] * l[2];
            let db = [0, 1].map(|d| l[1] * l[2] * gl[0][d] + l[0] * l[2] * gl[1][d] + l[0] * l[1] * gl[2][d]);
            for c in 0..2 {
                let mut jet = VectorJet::default();
                jet.value[c] = b;
                jet.grad[c] = db;
                out.push(jet);
            }
        }
    }
    out
}

/// Pressure basis on a cell: `[1]` for k = 1, monomials `[1, x, y]` in
/// physical coordinates for k = 2.
pub fn eval_pressure_basis(kind: VelocityElementKind, x: Point) -> Vec<f64> {
    match kind {
        VelocityElementKind::BernardiRaugel => vec![1.0],
        VelocityElementKind::P2Bubble => vec![1.0, x[0], x[1]],
    }
}

/// Local Raviart-Thomas basis on one cell, dual to the DOF functionals
///
/// * edge moments `int_e psi . n_e q ds` with `q = 1` (and `q = 2t - 1` for
///   RT1, `t` running from the lower to the higher global vertex of `e`),
/// * for RT1, interior moments `int_K psi . e_c dx`.
///
/// The basis is expanded in monomials of `(x - centroid) / h_K`; the
/// coefficient matrix is the inverse of the DOF matrix of those monomials.
#[derive(Debug, Clone)]
pub struct RtLocalBasis {
    pub order: RtOrder,
    center: Point,
    scale: f64,
    /// `coeffs[(a, r)]`: coefficient of monomial field `a` in basis function `r`.
    coeffs: DMatrix<f64>,
}

fn rt_monomials(order: RtOrder, xi: Point, inv_h: f64) -> Vec<([f64; 2], f64)> {
    let [s, t] = xi;
    match order {
        RtOrder::Rt0 => vec![([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0), ([s, t], 2.0 * inv_h)],
        RtOrder::Rt1 => vec![
            ([1.0, 0.0], 0.0),
            ([s, 0.0], inv_h),
            ([t, 0.0], 0.0),
            ([0.0, 1.0], 0.0),
            ([0.0, s], 0.0),
            ([0.0, t], inv_h),
            ([s * s, s * t], 3.0 * s * inv_h),
            ([s * t, t * t], 3.0 * t * inv_h),
        ],
    }
}

/// Edge Gauss points used for RT edge moments (exact for degree 11).
const EDGE_POINTS: usize = 6;

/// Applies the RT DOF functionals to a vector field on the cell.
pub fn rt_functionals(order: RtOrder, frame: &CellFrame, rule: &QuadratureRule, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(order.local_dofs());
    let (gx, gw) = gauss_legendre_unit(EDGE_POINTS);
    for i in 0..3 {
        let [a, b] = frame.edge_ends[i];
        let n = frame.edge_normals[i];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let mut m = [0.0; 2];
        for (t, w) in gx.iter().zip(&gw) {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let v = f(x);
            let vn = v[0] * n[0] + v[1] * n[1];
            m[0] += w * len * vn;
            m[1] += w * len * vn * (2.0 * t - 1.0);
        }
        out.extend_from_slice(&m[..order.edge_dofs()]);
    }
    if order.interior_dofs() > 0 {
        let g = &frame.geometry;
        let mut m = [0.0; 2];
        for (p, w) in rule.iter() {
            let v = f(g.point(*p));
            m[0] += w * g.area * v[0];
            m[1] += w * g.area * v[1];
        }
        out.extend_from_slice(&m);
    }
    out
}

impl RtLocalBasis {
    pub fn new(order: RtOrder, frame: &CellFrame) -> Self {
        let rule = triangle_rule(ASSEMBLY_DEGREE).expect("tabulated rule");
        Self::with_rule(order, frame, &rule)
    }

    pub fn with_rule(order: RtOrder, frame: &CellFrame, rule: &QuadratureRule) -> Self {
        let g = &frame.geometry;
        let center = g.centroid;
        let scale = g.diameter;
        let n = order.local_dofs();
        let mut dofs = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            let col = rt_functionals(order, frame, rule, |x| {
                let xi = [(x[0] - center[0]) / scale, (x[1] - center[1]) / scale];
                rt_monomials(order, xi, 1.0 / scale)[a].0
            });
            for r in 0..n {
                dofs[(r, a)] = col[r];
            }
        }
        let coeffs = dofs.try_inverse().expect("RT DOF matrix of a non-degenerate cell is invertible");
        Self { order, center, scale, coeffs }
    }

    /// Values and divergences of all local basis functions at `x`.
    pub fn eval(&self, x: Point) -> Vec<([f64; 2], f64)> {
        let xi = [(x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale];
        let mono = rt_monomials(self.order, xi, 1.0 / self.scale);
        let n = mono.len();
        (0..n)
            .map(|r| {
                let mut v = [0.0; 2];
                let mut d = 0.0;
                for (a, (m, dm)) in mono.iter().enumerate() {
                    let c = self.coeffs[(a, r)];
                    v[0] += c * m[0];
                    v[1] += c * m[1];
                    d += c * dm;
                }
                (v, d)
            })
            .collect()
    }

    /// Evaluates `sum_r coeffs[r] psi_r(x)`.
    pub fn combine(&self, coeffs: &DVector<f64>, x: Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (r, (v, _)) in self.eval(x).into_iter().enumerate() {
            out[0] += coeffs[r] * v[0];
            out[1] += coeffs[r] * v[1];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    fn skewed_frame() -> CellFrame {
        CellFrame::standalone(CellGeometry::new([[0.1, -0.2], [1.3, 0.1], [0.4, 0.9]]))
    }

    const KINDS: [VelocityElementKind; 2] = [VelocityElementKind::BernardiRaugel, VelocityElementKind::P2Bubble];

    #[test]
    fn face_bubble_at_barycenter() {
        let f = skewed_frame();
        let b = eval_velocity_basis(VelocityElementKind::BernardiRaugel, &f, [1.0 / 3.0; 3]);
        for i in 0..3 {
            let v = b[6 + i].value;
            let n = f.geometry.normals[i];
            assert!((v[0] - n[0] / 9.0).abs() < 1e-15 && (v[1] - n[1] / 9.0).abs() < 1e-15);
        }
        // b_0 vanishes on edges 1 and 2
        for t in [0.0, 0.3, 0.8] {
            for l in [[t, 0.0, 1.0 - t], [t, 1.0 - t, 0.0]] {
                let v = eval_velocity_basis(VelocityElementKind::BernardiRaugel, &f, l)[6].value;
                assert_eq!(v, [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn cell_bubble_at_barycenter() {
        let f = skewed_frame();
        let b = eval_velocity_basis(VelocityElementKind::P2Bubble, &f, [1.0 / 3.0; 3]);
        assert!((b[12].value[0] - 1.0 / 27.0).abs() < 1e-16 && b[12].value[1] == 0.0);
        assert!((b[13].value[1] - 1.0 / 27.0).abs() < 1e-16 && b[13].value[0] == 0.0);
    }

    #[test]
    fn pressure_basis() {
        assert_eq!(eval_pressure_basis(VelocityElementKind::BernardiRaugel, [0.3, 0.7]), vec![1.0]);
        let g = skewed_frame().geometry;
        let c = g.centroid;
        assert_eq!(eval_pressure_basis(VelocityElementKind::P2Bubble, c), vec![1.0, c[0], c[1]]);
        // mass matrix of {1, x, y} on the reference triangle is SPD
        let r = triangle_rule(4).unwrap();
        let refg = CellGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let mut m = DMatrix::<f64>::zeros(3, 3);
        for (p, w) in r.iter() {
            let q = eval_pressure_basis(VelocityElementKind::P2Bubble, refg.point(*p));
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] += w * refg.area * q[i] * q[j];
                }
            }
        }
        assert!((m.clone() - m.transpose()).amax() < 1e-16);
        assert!(m.cholesky().is_some());
    }

    #[test]
    fn partition_of_unity_and_nodal_identity() {
        let f = skewed_frame();
        for kind in KINDS {
            for l in [[0.2, 0.3, 0.5], [0.7, 0.1, 0.2], [1.0 / 3.0; 3]] {
                let s: f64 = scalar_lagrange(kind, &f.geometry, l).iter().map(|(v, _)| v).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
            for (a, node) in kind.scalar_nodes().iter().enumerate() {
                let vals = scalar_lagrange(kind, &f.geometry, *node);
                for (b, (v, _)) in vals.iter().enumerate() {
                    assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
                // bubbles vanish at every nodal point
                let full = eval_velocity_basis(kind, &f, *node);
                for jet in &full[kind.num_local_nodal()..] {
                    assert_eq!(jet.value, [0.0, 0.0]);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let f = skewed_frame();
        let g = &f.geometry;
        let h = 1e-5;
        for kind in KINDS {
            for l in [[0.2, 0.3, 0.5], [0.6, 0.25, 0.15]] {
                let x = g.point(l);
                let jets = eval_velocity_basis(kind, &f, l);
                for d in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[d] += h;
                    xm[d] -= h;
                    let jp = eval_velocity_basis(kind, &f, g.barycentric(xp));
                    let jm = eval_velocity_basis(kind, &f, g.barycentric(xm));
                    for i in 0..jets.len() {
                        for a in 0..2 {
                            let fd = (jp[i].value[a] - jm[i].value[a]) / (2.0 * h);
                            assert!((fd - jets[i].grad[a][d]).abs() < 1e-6, "{kind:?} dof {i}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rt_duality() {
        let f = skewed_frame();
        let rule = triangle_rule(8).unwrap();
        for order in [RtOrder::Rt0, RtOrder::Rt1] {
            let basis = RtLocalBasis::new(order, &f);
            let n = order.local_dofs();
            for r in 0..n {
                let dofs = rt_functionals(order, &f, &rule, |x| basis.eval(x)[r].0);
                for s in 0..n {
                    assert!((dofs[s] - if r == s { 1.0 } else { 0.0 }).abs() < 1e-12, "{order:?} {r} {s}");
                }
            }
        }
    }

    #[test]
    fn rt0_divergence_theorem() {
        // int_K div psi_i = flux through edge i with outward orientation = 1
        let f = skewed_frame();
        let basis = RtLocalBasis::new(RtOrder::Rt0, &f);
        for i in 0..3 {
            let div = basis.eval(f.geometry.centroid)[i].1;
            assert!((div * f.geometry.area - 1.0).abs() < 1e-13);
            // constant divergence
            let d2 = basis.eval(f.geometry.point([0.7, 0.2, 0.1]))[i].1;
            assert!((div - d2).abs() < 1e-12);
        }
    }

    #[test]
    fn rt_normal_traces_match_across_edges() {
        let m = Mesh::uniform_square(2, Rect::unit()).unwrap().perturb_interior_vertices(0.2, 4).unwrap();
        for order in [RtOrder::Rt0, RtOrder::Rt1] {
            let ne = order.edge_dofs();
            for e in 0..m.num_edges() {
                let [k1, k2] = m.edge_cells(e);
                if k2 == crate::mesh::NO_CELL {
                    continue;
                }
                let (f1, f2) = (CellFrame::new(&m, k1), CellFrame::new(&m, k2));
                let (b1, b2) = (RtLocalBasis::new(order, &f1), RtLocalBasis::new(order, &f2));
                let i1 = m.cell_edges(k1).iter().position(|&x| x == e).unwrap();
                let i2 = m.cell_edges(k2).iter().position(|&x| x == e).unwrap();
                let [a, b] = f1.edge_ends[i1];
                let n = m.edge_normal(e);
                for t in [0.1, 0.5, 0.77] {
                    let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let v1 = b1.eval(x);
                    let v2 = b2.eval(x);
                    for q in 0..ne {
                        let n1 = v1[i1 * ne + q].0[0] * n[0] + v1[i1 * ne + q].0[1] * n[1];
                        let n2 = v2[i2 * ne + q].0[0] * n[0] + v2[i2 * ne + q].0[1] * n[1];
                        assert!((n1 - n2).abs() < 1e-11);
                    }
                }
            }
        }
    }
}
