//! Conserved quantities, error norms against exact solutions, and rates.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{CellGeometry, Mesh, Point};
use crate::quadrature::{triangle_rule, QuadratureRule, ASSEMBLY_DEGREE, VERIFICATION_DEGREE};
use crate::reconstruct::{evaluate_pressure, l2_project_divergence, PointData, ReconstructionOperators};

pub use crate::problems::ExactSolution;

/// Energy, reconstructed energy, momentum and angular momentum of a field.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConservedQuantities {
    /// `E = 1/2 ||v||^2`.
    pub energy: f64,
    /// `E_d = 1/2 d_h(u, u)`; equals `energy` for a plain field.
    pub energy_d: f64,
    pub momentum: [f64; 2],
    /// Third component of `int v x x`, that is `int v_1 y - v_2 x`.
    pub angular_momentum: f64,
}

impl ConservedQuantities {
    pub fn momentum_sum(&self) -> f64 {
        self.momentum[0] + self.momentum[1]
    }
}

fn sum_cells<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send, zero: T, add: impl Fn(T, T) -> T) -> T {
    // cell results are reduced in index order so the sum is reproducible
    (0..n).into_par_iter().map(f).collect::<Vec<_>>().into_iter().fold(zero, add)
}

fn add4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// Quantities of `Pi_h u` when `reconstructed`, otherwise of `u` itself.
pub fn conserved_quantities(ops: &ReconstructionOperators, u: &[f64], alpha: f64, reconstructed: bool) -> Result<ConservedQuantities> {
    let s = ops.spaces();
    if u.len() != s.velocity.num_dofs() {
        return Err(Error::DimensionMismatch { expected: s.velocity.num_dofs(), got: u.len() });
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("stabilization parameter must be non-negative, got {alpha}")));
    }
    let rule = triangle_rule(ASSEMBLY_DEGREE)?;
    // [|v|^2, alpha |Pi^R v|^2, v_1 y - v_2 x, unused] and momentum
    let (acc, mom) = sum_cells(
        s.num_cells(),
        |k| {
            let g = &s.frame(k).geometry;
            let mut acc = [0.0; 4];
            let mut mom = [0.0; 2];
            for (p, w) in rule.iter() {
                let d = ops.field_point_data(u, k, *p);
                let x = g.point(*p);
                let jw = w * g.area;
                let v = if reconstructed { d.pi } else { d.v };
                acc[0] += jw * (v[0] * v[0] + v[1] * v[1]);
                if reconstructed {
                    acc[1] += jw * alpha * (d.pr[0] * d.pr[0] + d.pr[1] * d.pr[1]);
                }
                acc[2] += jw * (v[0] * x[1] - v[1] * x[0]);
                mom[0] += jw * v[0];
                mom[1] += jw * v[1];
            }
            (acc, mom)
        },
        ([0.0; 4], [0.0; 2]),
        |a, b| (add4(a.0, b.0), [a.1[0] + b.1[0], a.1[1] + b.1[1]]),
    );
    Ok(ConservedQuantities {
        energy: 0.5 * acc[0],
        energy_d: 0.5 * (acc[0] + acc[1]),
        momentum: mom,
        angular_momentum: acc[2],
    })
}

/// Barycentric vertices of the `m^2` congruent sub-triangles of the reference cell.
fn sub_triangles(m: usize) -> Vec<[[f64; 3]; 3]> {
    let h = 1.0 / m as f64;
    let b = |i: usize, j: usize| [1.0 - (i + j) as f64 * h, i as f64 * h, j as f64 * h];
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m - i {
            out.push([b(i, j), b(i + 1, j), b(i, j + 1)]);
            if i + j + 1 < m {
                out.push([b(i + 1, j), b(i + 1, j + 1), b(i, j + 1)]);
            }
        }
    }
    out
}

/// `int_Omega f` by a composite rule: every cell split into `subdivisions^2`
/// sub-triangles, each integrated with `rule`.
pub fn integrate_over_mesh<const N: usize>(
    mesh: &Mesh,
    rule: &QuadratureRule,
    subdivisions: usize,
    f: impl Fn(Point) -> [f64; N] + Sync,
) -> Result<[f64; N]> {
    if subdivisions == 0 {
        return Err(Error::InvalidArgument("subdivisions must be positive".into()));
    }
    let subs = sub_triangles(subdivisions);
    let scale = 1.0 / (subdivisions * subdivisions) as f64;
    Ok(sum_cells(
        mesh.num_cells(),
        |k| {
            let g = mesh.geometry(k);
            let mut acc = [0.0; N];
            for sub in &subs {
                for (p, w) in rule.iter() {
                    let mut l = [0.0; 3];
                    for (v, &pv) in sub.iter().zip(p.iter()) {
                        for c in 0..3 {
                            l[c] += pv * v[c];
                        }
                    }
                    let fx = f(g.point(l));
                    for c in 0..N {
                        acc[c] += w * scale * g.area * fx[c];
                    }
                }
            }
            acc
        },
        [0.0; N],
        |mut a, b| {
            for c in 0..N {
                a[c] += b[c];
            }
            a
        },
    ))
}

/// Quantities of a continuous field by composite mesh quadrature.
pub fn field_quantities(mesh: &Mesh, u: impl Fn(Point) -> [f64; 2] + Sync, subdivisions: usize) -> Result<ConservedQuantities> {
    let rule = triangle_rule(VERIFICATION_DEGREE)?;
    let [e, m0, m1, mx] = integrate_over_mesh(mesh, &rule, subdivisions, |x| {
        let v = u(x);
        [0.5 * (v[0] * v[0] + v[1] * v[1]), v[0], v[1], v[0] * x[1] - v[1] * x[0]]
    })?;
    Ok(ConservedQuantities { energy: e, energy_d: e, momentum: [m0, m1], angular_momentum: mx })
}

/// Error norms of a discrete solution against an exact one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    /// `||u - u_h||`.
    pub l2_u: f64,
    /// `||u - Pi_h u_h||`.
    pub l2_pu: f64,
    /// `||grad (u - u_h)||`.
    pub h1_u: f64,
    /// `||p - p_h||`, absent without an exact pressure.
    pub l2_p: Option<f64>,
    /// `||P_h p - p_h||`.
    pub l2_php: Option<f64>,
}

/// Errors at velocity time `t` and pressure time `t_pressure` (they differ
/// for midpoint schemes), using a rule of the given degree.
pub fn error_norms_with_degree(
    ops: &ReconstructionOperators,
    u: &[f64],
    p: &[f64],
    exact: &dyn ExactSolution,
    t: f64,
    t_pressure: f64,
    degree: usize,
) -> Result<ErrorNorms> {
    let s = ops.spaces();
    if u.len() != s.velocity.num_dofs() {
        return Err(Error::DimensionMismatch { expected: s.velocity.num_dofs(), got: u.len() });
    }
    if p.len() != s.pressure.num_dofs() {
        return Err(Error::DimensionMismatch { expected: s.pressure.num_dofs(), got: p.len() });
    }
    let rule = triangle_rule(degree)?;
    let has_p = exact.pressure_is_reference() && exact.pressure(t_pressure, s.frame(0).geometry.centroid).is_some();
    let php = if has_p {
        Some(l2_project_divergence(s, |_, x| exact.pressure(t_pressure, x).unwrap_or(0.0)))
    } else {
        None
    };
    let acc = sum_cells(
        s.num_cells(),
        |k| {
            let g: &CellGeometry = &s.frame(k).geometry;
            let mut acc = [0.0; 5];
            for (l, w) in rule.iter() {
                let d: PointData = ops.field_point_data(u, k, *l);
                let x = g.point(*l);
                let jw = w * g.area;
                let ue = exact.velocity(t, x);
                let ge = exact.velocity_gradient(t, x);
                for c in 0..2 {
                    acc[0] += jw * (ue[c] - d.v[c]).powi(2);
                    acc[1] += jw * (ue[c] - d.pi[c]).powi(2);
                    for b in 0..2 {
                        acc[2] += jw * (ge[c][b] - d.grad[c][b]).powi(2);
                    }
                }
                if let Some(php) = &php {
                    let ph = evaluate_pressure(s, p, k, x);
                    let pe = exact.pressure(t_pressure, x).unwrap_or(0.0);
                    acc[3] += jw * (pe - ph).powi(2);
                    acc[4] += jw * (evaluate_pressure(s, php, k, x) - ph).powi(2);
                }
            }
            acc
        },
        [0.0; 5],
        |mut a, b| {
            for c in 0..5 {
                a[c] += b[c];
            }
            a
        },
    );
    Ok(ErrorNorms {
        l2_u: acc[0].sqrt(),
        l2_pu: acc[1].sqrt(),
        h1_u: acc[2].sqrt(),
        l2_p: php.as_ref().map(|_| acc[3].sqrt()),
        l2_php: php.as_ref().map(|_| acc[4].sqrt()),
    })
}

/// [`error_norms_with_degree`] at the verification degree.
pub fn error_norms(
    ops: &ReconstructionOperators,
    u: &[f64],
    p: &[f64],
    exact: &dyn ExactSolution,
    t: f64,
    t_pressure: f64,
) -> Result<ErrorNorms> {
    error_norms_with_degree(ops, u, p, exact, t, t_pressure, VERIFICATION_DEGREE)
}

/// `rate_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`; the first entry, and any
/// entry involving a non-positive value, is absent.
pub fn eoc(levels: &[(f64, f64)]) -> Vec<Option<f64>> {
    let mut out = vec![None; levels.len()];
    for i in 1..levels.len() {
        let (h0, e0) = levels[i - 1];
        let (h1, e1) = levels[i];
        if e0 > 0.0 && e1 > 0.0 && h0 > 0.0 && h1 > 0.0 && h0 != h1 && e0.is_finite() && e1.is_finite() {
            out[i] = Some((e0 / e1).ln() / (h0 / h1).ln());
        }
    }
    out
}

/// One row of a diagnostics time series.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub quantities: ConservedQuantities,
    pub errors: Option<ErrorNorms>,
    pub seminorm_star: f64,
}

pub const CSV_HEADER: [&str; 11] =
    ["t", "E", "E_d", "M_sum", "M_x", "err_L2_u", "err_L2_Pu", "err_H1_u", "err_L2_p", "err_L2_Php", "seminorm_star"];

fn fmt(v: Option<f64>) -> String {
    // round-trip exact formatting; absent values are empty cells
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl DiagnosticsRecord {
    pub fn csv_fields(&self) -> [String; 11] {
        let q = &self.quantities;
        let e = self.errors;
        [
            fmt(Some(self.t)),
            fmt(Some(q.energy)),
            fmt(Some(q.energy_d)),
            fmt(Some(q.momentum_sum())),
            fmt(Some(q.angular_momentum)),
            fmt(e.map(|e| e.l2_u)),
            fmt(e.map(|e| e.l2_pu)),
            fmt(e.map(|e| e.h1_u)),
            fmt(e.and_then(|e| e.l2_p)),
            fmt(e.and_then(|e| e.l2_php)),
            fmt(Some(self.seminorm_star)),
        ]
    }
}

pub fn write_records<W: Write>(w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record(r.csv_fields())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_records_path(path: impl AsRef<Path>, records: &[DiagnosticsRecord]) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_records(std::io::BufWriter::new(file), records)
}
