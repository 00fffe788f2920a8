//! Assembly of the bilinear and trilinear forms.
//!
//! Matrix convention: row `i` is the test function, column `j` the trial
//! function. Trilinear forms `t(a, v, w)` are linearized in the advecting slot
//! `a`, so `N(beta)_{ij} = t(beta, phi_j, phi_i)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::basis::eval_pressure_basis;
use crate::dofspace::Spaces;
use crate::error::{invalid, Error, Result};
use crate::mesh::Point;
use crate::quadrature::{triangle_rule, QuadratureRule, ASSEMBLY_DEGREE};
use crate::reconstruct::{PointData, ReconstructionOperators};
use crate::sparse::{CellPattern, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvectionForm {
    /// `((a . grad) v, w)`.
    Classical,
    /// Classical plus `1/2 ((div a) v, w)`.
    Skew,
    /// `2 (D(v) a, w) + ((div v) a, w)`, `D` the symmetric gradient.
    Emac,
    /// `((a . grad) v, Pi w)`.
    ConvReco,
    /// `((curl a) x Pi v, Pi w)`.
    RotReco,
    /// `c(Pi a, Pi^1 v, Pi w) - c(Pi a, Pi^1 w, Pi^R v)`.
    Emapr,
}

impl ConvectionForm {
    pub const ALL: [ConvectionForm; 6] = [
        ConvectionForm::Classical,
        ConvectionForm::Skew,
        ConvectionForm::Emac,
        ConvectionForm::ConvReco,
        ConvectionForm::RotReco,
        ConvectionForm::Emapr,
    ];

    /// Reconstructed forms pair the time derivative and the load with
    /// reconstructed test functions.
    pub fn is_reconstructed(self) -> bool {
        matches!(self, Self::ConvReco | Self::RotReco | Self::Emapr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Classical => "classical",
            Self::Skew => "skew",
            Self::Emac => "emac",
            Self::ConvReco => "convreco",
            Self::RotReco => "rotreco",
            Self::Emapr => "emapr",
        }
    }
}

impl fmt::Display for ConvectionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConvectionForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown convection form '{s}'")))
    }
}

#[inline]
fn advect(a: [f64; 2], g: &[[f64; 2]; 2], w: [f64; 2]) -> f64 {
    // ((a . grad) v) . w with grad v = g
    (0..2).map(|c| w[c] * (a[0] * g[c][0] + a[1] * g[c][1])).sum()
}

/// Integrand of `t(a, v, w)` at one point.
#[inline]
pub fn trilinear(form: ConvectionForm, a: &PointData, v: &PointData, w: &PointData) -> f64 {
    match form {
        ConvectionForm::Classical => advect(a.v, &v.grad, w.v),
        ConvectionForm::Skew => advect(a.v, &v.grad, w.v) + 0.5 * a.div * (v.v[0] * w.v[0] + v.v[1] * w.v[1]),
        ConvectionForm::Emac => {
            let g = &v.grad;
            let mut s = 0.0;
            for c in 0..2 {
                for b in 0..2 {
                    s += w.v[c] * (g[c][b] + g[b][c]) * a.v[b];
                }
            }
            s + v.div * (a.v[0] * w.v[0] + a.v[1] * w.v[1])
        }
        ConvectionForm::ConvReco => advect(a.v, &v.grad, w.pi),
        ConvectionForm::RotReco => a.curl * (v.pi[0] * w.pi[1] - v.pi[1] * w.pi[0]),
        ConvectionForm::Emapr => advect(a.pi, &v.p1g, w.pi) - advect(a.pi, &w.p1g, v.pr),
    }
}

/// Builds every matrix of the scheme on one set of spaces.
#[derive(Debug, Clone)]
pub struct FormAssembler {
    ops: ReconstructionOperators,
    vv: CellPattern,
    pv: CellPattern,
    rule: QuadratureRule,
}

impl FormAssembler {
    pub fn new(spaces: &Spaces) -> Self {
        let ops = ReconstructionOperators::new(spaces);
        let vs = &spaces.velocity;
        let nloc = spaces.kind().num_local_dofs();
        let vv = CellPattern::new(vs.num_dofs(), vs.num_dofs(), vs.all_cell_dofs(), nloc, vs.all_cell_dofs(), nloc);
        let ps = &spaces.pressure;
        let pv = CellPattern::new(ps.num_dofs(), vs.num_dofs(), &ps.all_cell_dofs(), ps.local_dofs(), vs.all_cell_dofs(), nloc);
        Self { ops, vv, pv, rule: triangle_rule(ASSEMBLY_DEGREE).expect("tabulated rule") }
    }

    pub fn spaces(&self) -> &Spaces {
        self.ops.spaces()
    }

    pub fn ops(&self) -> &ReconstructionOperators {
        &self.ops
    }

    /// Zero matrix with the velocity-velocity pattern shared by all
    /// velocity operators.
    pub fn velocity_pattern(&self) -> SparseMatrix {
        self.vv.zeros()
    }

    fn assemble_vv<F>(&self, integrand: F) -> SparseMatrix
    where
        F: Fn(usize, &[PointData], f64, &mut [f64]) + Sync,
    {
        let nloc = self.spaces().kind().num_local_dofs();
        self.vv.assemble(|k| {
            let g = &self.spaces().frame(k).geometry;
            let mut local = vec![0.0; nloc * nloc];
            for (p, w) in self.rule.iter() {
                let data = self.ops.basis_point_data(k, *p);
                integrand(k, &data, w * g.area, &mut local);
            }
            local
        })
    }

    fn pairwise(&self, f: impl Fn(&PointData, &PointData) -> f64 + Sync) -> SparseMatrix {
        self.assemble_vv(|_, data, jw, local| {
            let n = data.len();
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += jw * f(&data[i], &data[j]);
                }
            }
        })
    }

    /// `a(u, v) = (grad u, grad v)`.
    pub fn gradgrad(&self) -> SparseMatrix {
        self.pairwise(|a, b| {
            a.grad[0][0] * b.grad[0][0] + a.grad[0][1] * b.grad[0][1] + a.grad[1][0] * b.grad[1][0] + a.grad[1][1] * b.grad[1][1]
        })
    }

    /// Plain `L^2` velocity mass.
    pub fn plain_mass(&self) -> SparseMatrix {
        self.pairwise(|a, b| a.v[0] * b.v[0] + a.v[1] * b.v[1])
    }

    /// `d_h(u, v) = (Pi u, Pi v) + alpha (Pi^R u, Pi^R v)`.
    pub fn dh_mass(&self, alpha: f64) -> Result<SparseMatrix> {
        if !(alpha >= 0.0) {
            return invalid(format!("stabilization parameter must be non-negative, got {alpha}"));
        }
        Ok(self.pairwise(|a, b| a.pi[0] * b.pi[0] + a.pi[1] * b.pi[1] + alpha * (a.pr[0] * b.pr[0] + a.pr[1] * b.pr[1])))
    }

    /// Mass matrix paired with the time derivative for `form`.
    pub fn mass_for(&self, form: ConvectionForm, alpha: f64) -> Result<SparseMatrix> {
        if form.is_reconstructed() {
            self.dh_mass(alpha)
        } else {
            Ok(self.plain_mass())
        }
    }

    fn assemble_pv(&self, div: impl Fn(&PointData) -> f64 + Sync) -> SparseMatrix {
        let kind = self.spaces().kind();
        let nloc = kind.num_local_dofs();
        let np = kind.num_local_pressure();
        self.pv.assemble(|k| {
            let g = &self.spaces().frame(k).geometry;
            let mut local = vec![0.0; np * nloc];
            for (p, w) in self.rule.iter() {
                let data = self.ops.basis_point_data(k, *p);
                let q = eval_pressure_basis(kind, g.point(*p));
                for (i, qi) in q.iter().enumerate() {
                    for (j, d) in data.iter().enumerate() {
                        local[i * nloc + j] += w * g.area * qi * div(d);
                    }
                }
            }
            local
        })
    }

    /// `B[q, j] = b(phi_j, q_q) = (div phi_j, q_q)`.
    pub fn divergence(&self) -> SparseMatrix {
        self.assemble_pv(|d| d.div)
    }

    /// `b(Pi phi_j, q_q)`.
    pub fn divergence_reconstructed(&self) -> SparseMatrix {
        self.assemble_pv(|d| d.pi_div)
    }

    fn field_data(&self, coeffs: &[f64], k: usize, basis: &[PointData]) -> PointData {
        let mut out = PointData::default();
        for (d, &g) in basis.iter().zip(self.spaces().velocity.cell_dofs(k)) {
            out.scaled_add(coeffs[g], d);
        }
        out
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        let n = self.spaces().velocity.num_dofs();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        Ok(())
    }

    /// `N(beta)_{ij} = t(beta, phi_j, phi_i)`.
    pub fn convection(&self, form: ConvectionForm, beta: &[f64]) -> Result<SparseMatrix> {
        self.check_len(beta)?;
        Ok(self.assemble_vv(|k, data, jw, local| {
            let a = self.field_data(beta, k, data);
            let n = data.len();
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += jw * trilinear(form, &a, &data[j], &data[i]);
                }
            }
        }))
    }

    /// Derivative in the advecting slot: `G(w)_{ij} = t(phi_j, w, phi_i)`.
    /// The Newton Jacobian of `x -> N(x) x` at `w` is `N(w) + G(w)`.
    pub fn convection_advecting_derivative(&self, form: ConvectionForm, w: &[f64]) -> Result<SparseMatrix> {
        self.check_len(w)?;
        Ok(self.assemble_vv(|k, data, jw, local| {
            let v = self.field_data(w, k, data);
            let n = data.len();
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += jw * trilinear(form, &data[j], &v, &data[i]);
                }
            }
        }))
    }

    /// Load vector `(f, phi_i)` or `(f, Pi phi_i)`.
    pub fn rhs(&self, f: impl Fn(Point) -> [f64; 2] + Sync, reconstructed: bool) -> Vec<f64> {
        let s = self.spaces();
        let nloc = s.kind().num_local_dofs();
        let local: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..s.num_cells())
                .into_par_iter()
                .map(|k| {
                    let g = &s.frame(k).geometry;
                    let mut out = vec![0.0; nloc];
                    for (p, w) in self.rule.iter() {
                        let fx = f(g.point(*p));
                        if fx == [0.0, 0.0] {
                            continue;
                        }
                        for (i, d) in self.ops.basis_point_data(k, *p).iter().enumerate() {
                            let t = if reconstructed { d.pi } else { d.v };
                            out[i] += w * g.area * (fx[0] * t[0] + fx[1] * t[1]);
                        }
                    }
                    out
                })
                .collect()
        };
        let mut rhs = vec![0.0; s.velocity.num_dofs()];
        for (k, l) in local.iter().enumerate() {
            for (&g, v) in s.velocity.cell_dofs(k).iter().zip(l) {
                rhs[g] += v;
            }
        }
        rhs
    }

    /// Load vector `(G, grad phi_i)` for a matrix-valued field `G`.
    pub fn rhs_gradient(&self, g: impl Fn(Point) -> [[f64; 2]; 2] + Sync) -> Vec<f64> {
        let s = self.spaces();
        let nloc = s.kind().num_local_dofs();
        let local: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..s.num_cells())
                .into_par_iter()
                .map(|k| {
                    let geom = &s.frame(k).geometry;
                    let mut out = vec![0.0; nloc];
                    for (p, w) in self.rule.iter() {
                        let gx = g(geom.point(*p));
                        for (i, d) in self.ops.basis_point_data(k, *p).iter().enumerate() {
                            let mut v = 0.0;
                            for a in 0..2 {
                                for b in 0..2 {
                                    v += gx[a][b] * d.grad[a][b];
                                }
                            }
                            out[i] += w * geom.area * v;
                        }
                    }
                    out
                })
                .collect()
        };
        let mut rhs = vec![0.0; s.velocity.num_dofs()];
        for (k, l) in local.iter().enumerate() {
            for (&g, v) in s.velocity.cell_dofs(k).iter().zip(l) {
                rhs[g] += v;
            }
        }
        rhs
    }

    /// Basis of the discretely divergence-free subspace with the given DOFs
    /// fixed to zero, as columns over all velocity DOFs, together with the rank
    /// of `B` restricted to the free DOFs. Dense; intended for small meshes.
    pub fn divergence_free_basis(&self, constrained: &[usize]) -> (DMatrix<f64>, usize) {
        let b = self.divergence().to_dense();
        let n = b.ncols();
        let mut is_fixed = vec![false; n];
        constrained.iter().for_each(|&d| is_fixed[d] = true);
        let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        let bf = b.select_columns(&free);
        // zero-padded to square so the SVD returns a full set of right singular vectors
        let m = free.len().max(bf.nrows());
        let mut padded = DMatrix::zeros(m, free.len());
        padded.rows_mut(0, bf.nrows()).copy_from(&bf);
        let svd = padded.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors requested");
        let scale = svd.singular_values.amax().max(1e-300);
        let null: Vec<usize> = (0..free.len()).filter(|&i| svd.singular_values[i] <= 1e-10 * scale).collect();
        let rank = free.len() - null.len();
        let mut basis = DMatrix::zeros(n, null.len());
        for (c, &i) in null.iter().enumerate() {
            for (r, &f) in free.iter().enumerate() {
                basis[(f, c)] = vt[(i, r)];
            }
        }
        (basis, rank)
    }
}
