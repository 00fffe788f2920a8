//! Divergence-free reconstruction `Pi_h = I_h + Pi_RT (1 - I_h)`.
//!
//! `I_h` keeps the nodal block of a velocity vector and drops its bubbles;
//! `Pi_RT` maps the bubble remainder into the Raviart-Thomas space through
//! the RT DOF functionals. The image is stored as a [`ReconstructedField`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{rt_functionals, scalar_lagrange, eval_pressure_basis, eval_velocity_basis, RtLocalBasis};
use crate::dofspace::Spaces;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::{triangle_rule, QuadratureRule, ASSEMBLY_DEGREE};
use crate::sparse::SparseMatrix;

/// A member of the reconstruction target: continuous `[P^k]^2` nodal part
/// plus an RT part.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedField {
    pub nodal: Vec<f64>,
    pub rt: Vec<f64>,
}

/// Local reconstruction data of one cell.
#[derive(Debug, Clone)]
pub struct CellReconstruction {
    pub rt_basis: RtLocalBasis,
    /// `matrix[(r, a)]`: RT functional `r` of local velocity basis function `a`.
    pub matrix: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionOperators {
    spaces: Spaces,
    cells: Vec<CellReconstruction>,
    /// Nodal block selector, `num_nodal x num_dofs`.
    pub p1: SparseMatrix,
    /// `Pi_RT (1 - I_h)`, `num_rt x num_dofs`.
    pub pr: SparseMatrix,
    rule: QuadratureRule,
}

/// Values at one point of the plain, nodal and reconstructed parts of a
/// vector field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointData {
    pub v: [f64; 2],
    /// `grad[a][b] = d v_a / d x_b`.
    pub grad: [[f64; 2]; 2],
    pub div: f64,
    pub curl: f64,
    /// `Pi^1 v` and its gradient.
    pub p1: [f64; 2],
    pub p1g: [[f64; 2]; 2],
    /// `Pi^R v`.
    pub pr: [f64; 2],
    /// `Pi v = Pi^1 v + Pi^R v`.
    pub pi: [f64; 2],
    /// `div Pi v`.
    pub pi_div: f64,
}

impl PointData {
    pub fn scaled_add(&mut self, s: f64, o: &PointData) {
        for a in 0..2 {
            self.v[a] += s * o.v[a];
            self.p1[a] += s * o.p1[a];
            self.pr[a] += s * o.pr[a];
            self.pi[a] += s * o.pi[a];
            for b in 0..2 {
                self.grad[a][b] += s * o.grad[a][b];
                self.p1g[a][b] += s * o.p1g[a][b];
            }
        }
        self.div += s * o.div;
        self.curl += s * o.curl;
        self.pi_div += s * o.pi_div;
    }
}

impl ReconstructionOperators {
    pub fn new(spaces: &Spaces) -> Self {
        let rule = triangle_rule(ASSEMBLY_DEGREE).expect("tabulated rule");
        let kind = spaces.kind();
        let nloc = kind.num_local_dofs();
        let nnodal = kind.num_local_nodal();
        let order = spaces.hdiv.order;
        let cells: Vec<CellReconstruction> = (0..spaces.num_cells())
            .into_par_iter()
            .map(|k| {
                let frame = spaces.frame(k);
                let rt_basis = RtLocalBasis::with_rule(order, frame, &rule);
                let mut matrix = DMatrix::zeros(order.local_dofs(), nloc);
                for a in nnodal..nloc {
                    let f = rt_functionals(order, frame, &rule, |x| {
                        eval_velocity_basis(kind, frame, frame.geometry.barycentric(x))[a].value
                    });
                    for (r, v) in f.into_iter().enumerate() {
                        matrix[(r, a)] = v;
                    }
                }
                CellReconstruction { rt_basis, matrix }
            })
            .collect();

        let vs = &spaces.velocity;
        let p1_trip: Vec<_> = (0..vs.num_nodal()).map(|i| (i, i, 1.0)).collect();
        let p1 = SparseMatrix::from_triplets(vs.num_nodal(), vs.num_dofs(), &p1_trip);

        // shared edge moments are computed identically by both cells; keep one copy
        let mut seen = std::collections::HashSet::new();
        let mut pr_trip = Vec::new();
        for (k, cell) in cells.iter().enumerate() {
            let vd = vs.cell_dofs(k);
            let rd = spaces.hdiv.cell_dofs(k);
            for a in nnodal..nloc {
                for (r, &gr) in rd.iter().enumerate() {
                    let v = cell.matrix[(r, a)];
                    if v.abs() > 1e-300 && seen.insert((gr, vd[a])) {
                        pr_trip.push((gr, vd[a], v));
                    }
                }
            }
        }
        let pr = SparseMatrix::from_triplets(spaces.hdiv.num_dofs(), vs.num_dofs(), &pr_trip);
        Self { spaces: spaces.clone(), cells, p1, pr, rule }
    }

    pub fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    pub fn cell(&self, k: usize) -> &CellReconstruction {
        &self.cells[k]
    }

    /// Per-local-DOF point data of every velocity basis function of cell `k`.
    pub fn basis_point_data(&self, k: usize, l: [f64; 3]) -> Vec<PointData> {
        let s = &self.spaces;
        let kind = s.kind();
        let frame = s.frame(k);
        let x = frame.geometry.point(l);
        let jets = eval_velocity_basis(kind, frame, l);
        let cell = &self.cells[k];
        let rt = cell.rt_basis.eval(x);
        let nnodal = kind.num_local_nodal();
        jets.iter()
            .enumerate()
            .map(|(a, jet)| {
                let mut d = PointData {
                    v: jet.value,
                    grad: jet.grad,
                    div: jet.grad[0][0] + jet.grad[1][1],
                    curl: jet.grad[1][0] - jet.grad[0][1],
                    ..Default::default()
                };
                if a < nnodal {
                    d.p1 = jet.value;
                    d.p1g = jet.grad;
                    d.pi_div = d.div;
                } else {
                    for (r, (psi, dpsi)) in rt.iter().enumerate() {
                        let c = cell.matrix[(r, a)];
                        d.pr[0] += c * psi[0];
                        d.pr[1] += c * psi[1];
                        d.pi_div += c * dpsi;
                    }
                }
                d.pi = [d.p1[0] + d.pr[0], d.p1[1] + d.pr[1]];
                d
            })
            .collect()
    }

    /// Point data of the field with global coefficients `coeffs`.
    pub fn field_point_data(&self, coeffs: &[f64], k: usize, l: [f64; 3]) -> PointData {
        let mut out = PointData::default();
        for (d, &g) in self.basis_point_data(k, l).iter().zip(self.spaces.velocity.cell_dofs(k)) {
            out.scaled_add(coeffs[g], d);
        }
        out
    }

    pub fn reconstruct(&self, v: &[f64]) -> Result<ReconstructedField> {
        let n = self.spaces.velocity.num_dofs();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        Ok(ReconstructedField { nodal: self.p1.mul_vec(v), rt: self.pr.mul_vec(v) })
    }

    /// `Pi_h` applied to an arbitrary continuous field by the same formula
    /// `I_h u + Pi_RT (u - I_h u)`.
    pub fn reconstruct_function(&self, u: impl Fn(Point) -> [f64; 2] + Sync) -> ReconstructedField {
        let s = &self.spaces;
        let vs = &s.velocity;
        let mut nodal = vec![0.0; vs.num_nodal()];
        for node in 0..vs.num_nodes() {
            let v = u(vs.node_point(node));
            nodal[2 * node] = v[0];
            nodal[2 * node + 1] = v[1];
        }
        let kind = s.kind();
        let mut rt = vec![0.0; s.hdiv.num_dofs()];
        let local: Vec<Vec<f64>> = (0..s.num_cells())
            .into_par_iter()
            .map(|k| {
                let frame = s.frame(k);
                let dofs = vs.cell_dofs(k);
                rt_functionals(s.hdiv.order, frame, &self.rule, |x| {
                    let l = frame.geometry.barycentric(x);
                    let mut r = u(x);
                    for (i, (phi, _)) in scalar_lagrange(kind, &frame.geometry, l).into_iter().enumerate() {
                        r[0] -= phi * nodal[dofs[2 * i]];
                        r[1] -= phi * nodal[dofs[2 * i + 1]];
                    }
                    r
                })
            })
            .collect();
        for (k, f) in local.into_iter().enumerate() {
            for (&g, v) in s.hdiv.cell_dofs(k).iter().zip(f) {
                rt[g] = v;
            }
        }
        ReconstructedField { nodal, rt }
    }

    /// Value and divergence of a reconstructed field at a point of cell `k`.
    pub fn evaluate(&self, field: &ReconstructedField, k: usize, l: [f64; 3]) -> ([f64; 2], f64) {
        let s = &self.spaces;
        let frame = s.frame(k);
        let dofs = s.velocity.cell_dofs(k);
        let mut v = [0.0; 2];
        let mut div = 0.0;
        for (i, (phi, g)) in scalar_lagrange(s.kind(), &frame.geometry, l).into_iter().enumerate() {
            let (a, b) = (field.nodal[dofs[2 * i]], field.nodal[dofs[2 * i + 1]]);
            v[0] += phi * a;
            v[1] += phi * b;
            div += a * g[0] + b * g[1];
        }
        let x = frame.geometry.point(l);
        for ((psi, dpsi), &g) in self.cells[k].rt_basis.eval(x).iter().zip(s.hdiv.cell_dofs(k)) {
            v[0] += field.rt[g] * psi[0];
            v[1] += field.rt[g] * psi[1];
            div += field.rt[g] * dpsi;
        }
        (v, div)
    }

    /// `|||v|||_*^2 = sum_K h_K^{-2} ||Pi^R v||_K^2`, returned as the square root.
    pub fn seminorm_star(&self, v: &[f64]) -> Result<f64> {
        let field = self.reconstruct(v)?;
        let s = &self.spaces;
        let total: f64 = (0..s.num_cells())
            .into_par_iter()
            .map(|k| {
                let g = &s.frame(k).geometry;
                let dofs = s.hdiv.cell_dofs(k);
                let mut acc = 0.0;
                for (p, w) in self.rule.iter() {
                    let mut r = [0.0; 2];
                    for ((psi, _), &gd) in self.cells[k].rt_basis.eval(g.point(*p)).iter().zip(dofs) {
                        r[0] += field.rt[gd] * psi[0];
                        r[1] += field.rt[gd] * psi[1];
                    }
                    acc += w * g.area * (r[0] * r[0] + r[1] * r[1]);
                }
                acc / (g.diameter * g.diameter)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        Ok(total.sqrt())
    }
}

/// Cellwise L2 projection `P_h` onto the discontinuous pressure space.
pub fn l2_project_divergence(spaces: &Spaces, g: impl Fn(usize, Point) -> f64 + Sync) -> Vec<f64> {
    let rule = triangle_rule(ASSEMBLY_DEGREE).expect("tabulated rule");
    let kind = spaces.kind();
    let np = kind.num_local_pressure();
    let local: Vec<Vec<f64>> = (0..spaces.num_cells())
        .into_par_iter()
        .map(|k| {
            let geom = &spaces.frame(k).geometry;
            // solved in monomials centered at the centroid and scaled by sqrt(area), then mapped back
            let c = geom.point([1.0 / 3.0; 3]);
            let s = geom.area.sqrt();
            let mut m = DMatrix::<f64>::zeros(np, np);
            let mut rhs = DVector::<f64>::zeros(np);
            for (p, w) in rule.iter() {
                let x = geom.point(*p);
                let q = eval_pressure_basis(kind, [(x[0] - c[0]) / s, (x[1] - c[1]) / s]);
                let gx = g(k, x);
                for i in 0..np {
                    rhs[i] += w * gx * q[i];
                    for j in 0..np {
                        m[(i, j)] += w * q[i] * q[j];
                    }
                }
            }
            let mut a: Vec<f64> = m.lu().solve(&rhs).expect("pressure mass matrix is SPD").iter().copied().collect();
            if np == 3 {
                a = vec![a[0] - (a[1] * c[0] + a[2] * c[1]) / s, a[1] / s, a[2] / s];
            }
            a
        })
        .collect();
    local.into_iter().flatten().collect()
}

/// Evaluates a pressure coefficient vector at a point of cell `k`.
pub fn evaluate_pressure(spaces: &Spaces, p: &[f64], k: usize, x: Point) -> f64 {
    let q = eval_pressure_basis(spaces.kind(), x);
    spaces.pressure.cell_dofs(k).zip(q).map(|(d, qi)| p[d] * qi).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::VelocityElementKind;
    use crate::mesh::{Mesh, Rect};

    const KINDS: [VelocityElementKind; 2] = [VelocityElementKind::BernardiRaugel, VelocityElementKind::P2Bubble];

    fn setup(kind: VelocityElementKind, n: usize, perturb: f64) -> ReconstructionOperators {
        let m = Mesh::uniform_square(n, Rect::unit()).unwrap().perturb_interior_vertices(perturb, 11).unwrap();
        ReconstructionOperators::new(&Spaces::new(&m, kind))
    }

    #[test]
    fn operator_structure() {
        for kind in KINDS {
            let ops = setup(kind, 2, 0.2);
            let vs = &ops.spaces().velocity;
            for i in 0..vs.num_nodal() {
                assert_eq!(ops.p1.get(i, i), 1.0);
                assert!(ops.pr.mul_vec(&unit_vec(vs.num_dofs(), i)).iter().all(|&x| x == 0.0));
            }
            assert_eq!(ops.p1.nnz(), vs.num_nodal());
        }
    }

    fn unit_vec(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn face_bubble_reconstruction_coefficient() {
        let ops = setup(VelocityElementKind::BernardiRaugel, 2, 0.25);
        let m = ops.spaces().mesh();
        let nv = m.num_vertices();
        for e in 0..m.num_edges() {
            let col = ops.pr.mul_vec(&unit_vec(ops.spaces().velocity.num_dofs(), 2 * nv + e));
            for (r, v) in col.iter().enumerate() {
                let expected = if r == e { m.edge_length(e) / 6.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-14, "edge {e} rt {r}: {v}");
            }
        }
    }

    #[test]
    fn cell_bubble_reconstruction_coefficient() {
        let ops = setup(VelocityElementKind::P2Bubble, 2, 0.25);
        let s = ops.spaces();
        let ne = s.mesh().num_edges();
        for k in 0..s.num_cells() {
            let area = s.mesh().geometry(k).area;
            for c in 0..2 {
                let col = ops.pr.mul_vec(&unit_vec(s.velocity.num_dofs(), s.velocity.cell_dofs(k)[12 + c]));
                for (r, v) in col.iter().enumerate() {
                    let expected = if r == 2 * ne + 2 * k + c { area / 60.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn linear_fields_are_reproduced() {
        for kind in KINDS {
            let ops = setup(kind, 3, 0.2);
            let s = ops.spaces();
            for f in [|_x: Point| [1.0, 0.0], |x: Point| [-x[1], x[0]]] {
                let c = s.interpolate(f);
                let field = ops.reconstruct(&c).unwrap();
                assert!(field.rt.iter().all(|r| r.abs() < 1e-13));
                for k in 0..s.num_cells() {
                    let l = [0.1, 0.3, 0.6];
                    let (v, _) = ops.evaluate(&field, k, l);
                    let e = f(s.mesh().geometry(k).point(l));
                    assert!((v[0] - e[0]).abs() < 1e-13 && (v[1] - e[1]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let ops = setup(VelocityElementKind::BernardiRaugel, 1, 0.0);
        assert!(matches!(ops.reconstruct(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projection_properties() {
        for kind in KINDS {
            let ops = setup(kind, 3, 0.2);
            let s = ops.spaces();
            let c = l2_project_divergence(s, |_, _| 2.5);
            for k in 0..s.num_cells() {
                let x = s.mesh().geometry(k).centroid;
                assert!((evaluate_pressure(s, &c, k, x) - 2.5).abs() < 1e-12);
            }
            // idempotent on members of W_h
            let q: Vec<f64> = (0..s.pressure.num_dofs()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let pq = l2_project_divergence(s, |k, x| evaluate_pressure(s, &q, k, x));
            for (a, b) in q.iter().zip(&pq) {
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn commuting_diagram_for_bubbles() {
        // div (Pi_RT b) = P_h (div b) cellwise
        for kind in KINDS {
            let ops = setup(kind, 2, 0.25);
            let s = ops.spaces();
            let vs = &s.velocity;
            for j in vs.num_nodal()..vs.num_dofs() {
                let coeffs = unit_vec(vs.num_dofs(), j);
                let ph = l2_project_divergence(s, |k, x| {
                    ops.field_point_data(&coeffs, k, s.mesh().geometry(k).barycentric(x)).div
                });
                for k in 0..s.num_cells() {
                    for l in [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]] {
                        let x = s.mesh().geometry(k).point(l);
                        let pd = ops.field_point_data(&coeffs, k, l);
                        assert!((pd.pi_div - evaluate_pressure(s, &ph, k, x)).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn seminorm_star_examples() {
        let ops = setup(VelocityElementKind::BernardiRaugel, 2, 0.2);
        let s = ops.spaces();
        let n = s.velocity.num_dofs();
        let nodal = s.interpolate(|x| [x[0] * x[1], 1.0 - x[0]]);
        let mut nodal_only = nodal.clone();
        nodal_only[s.velocity.num_nodal()..].iter_mut().for_each(|b| *b = 0.0);
        assert_eq!(ops.seminorm_star(&nodal_only).unwrap(), 0.0);

        // a boundary bubble lives on one cell: |||b|||_* = h_K^{-1} ||Pi_RT b||_K
        let m = s.mesh();
        let e = (0..m.num_edges()).find(|&e| m.is_boundary_edge(e)).unwrap();
        let k = m.edge_cells(e)[0];
        let b = unit_vec(n, 2 * m.num_vertices() + e);
        let g = m.geometry(k);
        let rule = triangle_rule(10).unwrap();
        let local = m.cell_edges(k).iter().position(|&x| x == e).unwrap();
        let brute: f64 = rule
            .iter()
            .map(|(p, w)| {
                let psi = ops.cell(k).rt_basis.eval(g.point(*p))[local].0;
                let s = m.edge_length(e) / 6.0;
                w * g.area * s * s * (psi[0] * psi[0] + psi[1] * psi[1])
            })
            .sum();
        let star = ops.seminorm_star(&b).unwrap();
        assert!((star - brute.sqrt() / g.diameter).abs() < 1e-13 * star);
        let scaled: Vec<f64> = nodal.iter().map(|x| -3.0 * x).collect();
        let (a, c) = (ops.seminorm_star(&nodal).unwrap(), ops.seminorm_star(&scaled).unwrap());
        assert!((c - 3.0 * a).abs() < 1e-13 * c.max(1e-300));
    }

    #[test]
    fn reconstruct_function_matches_coefficient_path() {
        // for members of V_h both formulas coincide
        for kind in KINDS {
            let ops = setup(kind, 2, 0.2);
            let s = ops.spaces();
            let c = s.interpolate(|x| [(3.0 * x[0]).sin(), x[1] * x[0].exp()]);
            let via_coeffs = ops.reconstruct(&c).unwrap();
            let via_fn = ops.reconstruct_function(|x| {
                let k = (0..s.num_cells())
                    .find(|&k| s.mesh().geometry(k).barycentric(x).iter().all(|&l| l > -1e-12))
                    .unwrap();
                ops.field_point_data(&c, k, s.mesh().geometry(k).barycentric(x)).v
            });
            for (a, b) in via_coeffs.rt.iter().zip(&via_fn.rt) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
