//! Saddle-point solves and nonlinear iteration drivers.
//!
//! The coupled system for velocity `u`, pressure `p` and the mean-value
//! multiplier `lambda` is
//!
//! ```text
//! [  K  -B^T  0 ] [u]        [f]
//! [ -B   0    m ] [p]      = [g]
//! [  0   e^T  0 ] [lambda]   [0]
//! ```
//!
//! where `e` selects one coefficient of the constant pressure mode `c`. The
//! solved pressure is shifted along `c` to zero mean afterwards. A dense
//! `m^T` row would make the column elimination graph dense in the pressure
//! block; the dense `m` column costs only one trailing row.
//!
//! Constrained velocity DOFs are eliminated symmetrically: their rows and
//! columns become identity and the known values move to the right-hand side.
//! The sparsity pattern never changes, so one symbolic factorization serves
//! every solve.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::Mat;

use crate::error::{invalid, Error, Result};
use crate::forms::{ConvectionForm, FormAssembler};
use crate::sparse::SparseMatrix;

/// Relative residual accepted after a linear solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multiplier: f64,
    pub relative_residual: f64,
}

/// Factorization cache for saddle systems sharing one velocity pattern, one
/// divergence matrix and one mean functional.
pub struct SaddleSolver {
    nv: usize,
    np: usize,
    velocity_pattern: SparseMatrix,
    symbolic: SymbolicSparseColMat<usize>,
    /// Column of every stored entry.
    entry_col: Vec<usize>,
    k_pos: Vec<usize>,
    b_pos: Vec<usize>,
    bt_pos: Vec<usize>,
    m_pos: Vec<usize>,
    pin_pos: usize,
    b_values: Vec<f64>,
    m: Vec<f64>,
    constant: Vec<f64>,
    lu_symbolic: Option<SymbolicLu<usize>>,
}

impl std::fmt::Debug for SaddleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSolver").field("nv", &self.nv).field("np", &self.np).finish_non_exhaustive()
    }
}

impl SaddleSolver {
    /// `m` is the mean functional and `constant` the coefficients of the
    /// constant pressure.
    pub fn new(velocity_pattern: &SparseMatrix, b: &SparseMatrix, m: &[f64], constant: &[f64]) -> Result<Self> {
        let nv = velocity_pattern.nrows();
        let np = b.nrows();
        if velocity_pattern.ncols() != nv || b.ncols() != nv {
            return Err(Error::DimensionMismatch { expected: nv, got: b.ncols() });
        }
        if m.len() != np {
            return Err(Error::DimensionMismatch { expected: np, got: m.len() });
        }
        if constant.len() != np {
            return Err(Error::DimensionMismatch { expected: np, got: constant.len() });
        }
        let pin = constant.iter().position(|c| *c != 0.0).ok_or_else(|| Error::InvalidArgument("zero constant pressure mode".into()))?;
        let n = nv + np + 1;
        // (row, col) of every stored entry, grouped by source block
        let mut entries: Vec<(usize, usize)> = Vec::new();
        for r in 0..nv {
            entries.extend(velocity_pattern.row(r).map(|(c, _)| (r, c)));
        }
        let nk = entries.len();
        for q in 0..np {
            entries.extend(b.row(q).map(|(c, _)| (nv + q, c)));
        }
        let nb = entries.len();
        for q in 0..np {
            entries.extend(b.row(q).map(|(c, _)| (c, nv + q)));
        }
        let nbt = entries.len();
        entries.extend((0..np).map(|q| (nv + q, n - 1)));
        entries.push((n - 1, nv + pin));

        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&i| (entries[i].1, entries[i].0));
        let mut pos = vec![0usize; entries.len()];
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut entry_col = Vec::with_capacity(entries.len());
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
            let (r, c) = entries[i];
            col_ptr[c + 1] += 1;
            row_idx.push(r);
            entry_col.push(c);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Ok(Self {
            nv,
            np,
            velocity_pattern: velocity_pattern.clone(),
            symbolic,
            entry_col,
            k_pos: pos[..nk].to_vec(),
            b_pos: pos[nk..nb].to_vec(),
            bt_pos: pos[nb..nbt].to_vec(),
            m_pos: pos[nbt..nbt + np].to_vec(),
            pin_pos: pos[nbt + np],
            b_values: b.values().to_vec(),
            m: m.to_vec(),
            constant: constant.to_vec(),
            lu_symbolic: None,
        })
    }

    pub fn size(&self) -> usize {
        self.nv + self.np + 1
    }

    /// Solves with velocity block `k`, momentum load `f` and the velocity
    /// DOFs `constrained[i]` fixed to `values[i]`.
    pub fn solve(&mut self, k: &SparseMatrix, f: &[f64], constrained: &[usize], values: &[f64]) -> Result<SaddleSolution> {
        if !k.same_pattern(&self.velocity_pattern) {
            return invalid("velocity block does not share the solver's sparsity pattern");
        }
        if f.len() != self.nv {
            return Err(Error::DimensionMismatch { expected: self.nv, got: f.len() });
        }
        if constrained.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: constrained.len(), got: values.len() });
        }
        let n = self.size();
        let mut vals = vec![0.0; self.symbolic.row_idx().len()];
        for (p, v) in self.k_pos.iter().zip(k.values()) {
            vals[*p] = *v;
        }
        for (i, v) in self.b_values.iter().enumerate() {
            vals[self.b_pos[i]] = -v;
            vals[self.bt_pos[i]] = -v;
        }
        for q in 0..self.np {
            vals[self.m_pos[q]] = self.m[q];
        }
        vals[self.pin_pos] = 1.0;
        let mut rhs = vec![0.0; n];
        rhs[..self.nv].copy_from_slice(f);

        let mut fixed = vec![None; n];
        for (&d, &g) in constrained.iter().zip(values) {
            if d >= self.nv {
                return invalid(format!("constrained DOF {d} is not a velocity DOF"));
            }
            fixed[d] = Some(g);
        }
        let rows = self.symbolic.row_idx();
        for (p, v) in vals.iter_mut().enumerate() {
            let (r, c) = (rows[p], self.entry_col[p]);
            match (fixed[r], fixed[c]) {
                (None, None) => {}
                (None, Some(g)) => {
                    rhs[r] -= *v * g;
                    *v = 0.0;
                }
                _ => *v = if r == c { 1.0 } else { 0.0 },
            }
        }
        for (&d, &g) in constrained.iter().zip(values) {
            rhs[d] = g;
        }

        let mat = SparseColMatRef::new(self.symbolic.as_ref(), &vals);
        if self.lu_symbolic.is_none() {
            self.lu_symbolic = Some(SymbolicLu::try_new(self.symbolic.as_ref()).map_err(|e| Error::Solver(format!("{e:?}")))?);
        }
        let sym = self.lu_symbolic.clone().expect("set above");
        let lu = Lu::try_new_with_symbolic(sym, mat).map_err(|e| Error::Solver(format!("factorization failed: {e:?}")))?;

        let rhs_norm = norm(&rhs);
        let mut x = vec![0.0; n];
        let mut residual = rhs.clone();
        let mut rel = f64::INFINITY;
        // one solve plus up to two refinement steps
        for _ in 0..3 {
            let mut col = Mat::<f64>::from_fn(n, 1, |i, _| residual[i]);
            lu.solve_in_place(col.as_mut());
            for i in 0..n {
                x[i] += col[(i, 0)];
            }
            residual = self.residual(&vals, &x, &rhs);
            rel = norm(&residual) / rhs_norm.max(f64::MIN_POSITIVE);
            if rel <= 1e-13 || rhs_norm == 0.0 {
                break;
            }
        }
        if !rel.is_finite() || (rhs_norm > 0.0 && rel > RESIDUAL_TOLERANCE) {
            return Err(Error::Solver(format!("relative residual {rel:.3e} exceeds {RESIDUAL_TOLERANCE:.0e}")));
        }
        let mut pressure = x[self.nv..self.nv + self.np].to_vec();
        let shift = dot(&self.m, &pressure) / dot(&self.m, &self.constant);
        for (p, c) in pressure.iter_mut().zip(&self.constant) {
            *p -= shift * c;
        }
        Ok(SaddleSolution {
            velocity: x[..self.nv].to_vec(),
            pressure,
            multiplier: x[n - 1],
            relative_residual: if rhs_norm > 0.0 { rel } else { 0.0 },
        })
    }

    fn residual(&self, vals: &[f64], x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mut r = rhs.to_vec();
        let rows = self.symbolic.row_idx();
        for (p, v) in vals.iter().enumerate() {
            r[rows[p]] -= v * x[self.entry_col[p]];
        }
        r
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearMethod {
    /// Fixed-point iteration with the advecting field frozen.
    Picard,
    /// Exact Jacobian in both trilinear slots.
    Newton,
    /// One linear solve with a caller-supplied advecting field.
    Extrapolated,
}

impl std::str::FromStr for NonlinearMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "picard" => Ok(Self::Picard),
            "newton" => Ok(Self::Newton),
            "extrapolated" => Ok(Self::Extrapolated),
            _ => Err(Error::InvalidArgument(format!("unknown nonlinear method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSettings {
    pub method: NonlinearMethod,
    /// Bound on the `H^1` norm of the velocity increment.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NonlinearSettings {
    fn default() -> Self {
        Self { method: NonlinearMethod::Picard, tolerance: 1e-6, max_iterations: 50 }
    }
}

impl NonlinearSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return invalid(format!("nonlinear tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be at least 1");
        }
        Ok(())
    }
}

/// One time-discrete step
///
/// `c_m M x + theta (nu A + N(w)) x + (1 - theta) (nu A + N(w)) u_old - B^T p = r_hist`
///
/// with `w = theta x + (1 - theta) u_old`, `-B x = 0` and `x` fixed on the
/// constrained DOFs.
pub struct StepProblem<'a> {
    pub assembler: &'a FormAssembler,
    pub form: ConvectionForm,
    pub mass: &'a SparseMatrix,
    pub mass_coeff: f64,
    pub stiffness: &'a SparseMatrix,
    pub nu: f64,
    pub theta: f64,
    pub u_old: &'a [f64],
    pub history_rhs: &'a [f64],
    pub constrained: &'a [usize],
    pub boundary_values: &'a [f64],
    /// `M_plain + A`, defines the `H^1` increment norm.
    pub h1_matrix: &'a SparseMatrix,
}

#[derive(Debug, Clone)]
pub struct NonlinearOutcome {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub iterations: usize,
    /// `H^1` norm of each increment.
    pub increments: Vec<f64>,
    pub max_relative_residual: f64,
}

impl StepProblem<'_> {
    fn operator(&self, n_w: &SparseMatrix) -> SparseMatrix {
        SparseMatrix::combination(&[(self.mass_coeff, self.mass), (self.theta * self.nu, self.stiffness), (self.theta, n_w)])
    }

    fn picard_rhs(&self, n_w: &SparseMatrix) -> Vec<f64> {
        let mut rhs = self.history_rhs.to_vec();
        if self.theta < 1.0 {
            let explicit = SparseMatrix::combination(&[(self.nu, self.stiffness), (1.0, n_w)]).mul_vec(self.u_old);
            for (r, e) in rhs.iter_mut().zip(explicit) {
                *r -= (1.0 - self.theta) * e;
            }
        }
        rhs
    }

    fn midpoint(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.u_old).map(|(a, b)| self.theta * a + (1.0 - self.theta) * b).collect()
    }

    /// Single linear solve with the advecting field `beta`.
    pub fn solve_linearized(&self, solver: &mut SaddleSolver, beta: &[f64]) -> Result<NonlinearOutcome> {
        let n_b = self.assembler.convection(self.form, beta)?;
        let sol = solver.solve(&self.operator(&n_b), &self.picard_rhs(&n_b), self.constrained, self.boundary_values)?;
        let delta: Vec<f64> = sol.velocity.iter().zip(self.u_old).map(|(a, b)| a - b).collect();
        Ok(NonlinearOutcome {
            increments: vec![self.h1_matrix.bilinear(&delta, &delta).max(0.0).sqrt()],
            velocity: sol.velocity,
            pressure: sol.pressure,
            iterations: 1,
            max_relative_residual: sol.relative_residual,
        })
    }

    /// Picard or Newton iteration from `initial`. `Extrapolated` performs one
    /// solve with `initial` as the advecting field.
    pub fn solve_nonlinear(&self, solver: &mut SaddleSolver, settings: &NonlinearSettings, initial: &[f64]) -> Result<NonlinearOutcome> {
        settings.validate()?;
        if settings.method == NonlinearMethod::Extrapolated {
            return self.solve_linearized(solver, initial);
        }
        let mut x = initial.to_vec();
        for (&d, &g) in self.constrained.iter().zip(self.boundary_values) {
            x[d] = g;
        }
        let mut increments = Vec::new();
        let mut max_res: f64 = 0.0;
        for it in 1..=settings.max_iterations {
            let w = self.midpoint(&x);
            let n_w = self.assembler.convection(self.form, &w)?;
            let mut op = self.operator(&n_w);
            let mut rhs = self.picard_rhs(&n_w);
            if settings.method == NonlinearMethod::Newton {
                let g = self.assembler.convection_advecting_derivative(self.form, &w)?;
                let gx = g.mul_vec(&x);
                op.axpy_same_pattern(self.theta, &g);
                for (r, v) in rhs.iter_mut().zip(gx) {
                    *r += self.theta * v;
                }
            }
            let sol = solver.solve(&op, &rhs, self.constrained, self.boundary_values)?;
            max_res = max_res.max(sol.relative_residual);
            let delta: Vec<f64> = sol.velocity.iter().zip(&x).map(|(a, b)| a - b).collect();
            let inc = self.h1_matrix.bilinear(&delta, &delta).max(0.0).sqrt();
            increments.push(inc);
            x = sol.velocity;
            if inc < settings.tolerance {
                return Ok(NonlinearOutcome { velocity: x, pressure: sol.pressure, iterations: it, increments, max_relative_residual: max_res });
            }
            if !inc.is_finite() {
                break;
            }
        }
        Err(Error::NonConvergence {
            iterations: increments.len(),
            last_increment: increments.last().copied().unwrap_or(f64::NAN),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::VelocityElementKind;
    use crate::dofspace::{BoundaryMode, Spaces};
    use crate::mesh::{Mesh, Rect};
    use crate::reconstruct::evaluate_pressure;

    struct Fixture {
        f: FormAssembler,
        a: SparseMatrix,
        mp: SparseMatrix,
        h1: SparseMatrix,
        fixed: Vec<usize>,
    }

    impl Fixture {
        fn solver(&self) -> SaddleSolver {
            let s = self.f.spaces();
            SaddleSolver::new(&self.f.velocity_pattern(), &self.f.divergence(), s.pressure.mean_weights(), &s.pressure.constant_mode()).unwrap()
        }
    }

    fn fixture(kind: VelocityElementKind, n: usize) -> Fixture {
        let m = Mesh::uniform_square(n, Rect::unit()).unwrap().perturb_interior_vertices(0.15, 2).unwrap();
        let s = Spaces::new(&m, kind);
        let f = FormAssembler::new(&s);
        let a = f.gradgrad();
        let mp = f.plain_mass();
        let h1 = SparseMatrix::combination(&[(1.0, &mp), (1.0, &a)]);
        let fixed = s.constrained_dofs(BoundaryMode::Full).unwrap();
        Fixture { f, a, mp, h1, fixed }
    }

    #[test]
    fn stokes_reproduces_linear_solution() {
        for kind in [VelocityElementKind::BernardiRaugel, VelocityElementKind::P2Bubble] {
            let fx = fixture(kind, 3);
            let s = fx.f.spaces();
            let exact = s.interpolate(|x| [x[1], x[0]]);
            let values: Vec<f64> = fx.fixed.iter().map(|&d| exact[d]).collect();
            let rhs = vec![0.0; s.velocity.num_dofs()];
            let sol = fx.solver().solve(&fx.a, &rhs, &fx.fixed, &values).unwrap();
            for (a, b) in sol.velocity.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-11, "{kind:?}");
            }
            assert!(sol.pressure.iter().all(|p| p.abs() < 1e-10));
            assert!(sol.relative_residual <= RESIDUAL_TOLERANCE);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let fx = fixture(VelocityElementKind::BernardiRaugel, 2);
        let n = fx.f.spaces().velocity.num_dofs();
        let sol = fx.solver().solve(&fx.a, &vec![0.0; n], &fx.fixed, &vec![0.0; fx.fixed.len()]).unwrap();
        assert!(sol.velocity.iter().chain(&sol.pressure).all(|&v| v == 0.0));
    }

    #[test]
    fn pressure_has_zero_mean() {
        for kind in [VelocityElementKind::BernardiRaugel, VelocityElementKind::P2Bubble] {
            let fx = fixture(kind, 3);
            let s = fx.f.spaces();
            let rhs = fx.f.rhs(|x| [x[0] * x[1] + 1.0, (5.0 * x[0]).sin()], false);
            let sol = fx.solver().solve(&fx.a, &rhs, &fx.fixed, &vec![0.0; fx.fixed.len()]).unwrap();
            let mean: f64 = s.pressure.mean_weights().iter().zip(&sol.pressure).map(|(a, b)| a * b).sum();
            assert!(mean.abs() < 1e-12);
            // gradient forcing ends up in the pressure: f = grad(x^2 y) gives p = x^2 y - 1/6
            let rhs = fx.f.rhs(|x| [2.0 * x[0] * x[1], x[0] * x[0]], false);
            let sol = fx.solver().solve(&fx.a, &rhs, &fx.fixed, &vec![0.0; fx.fixed.len()]).unwrap();
            if kind == VelocityElementKind::P2Bubble {
                let k = 4;
                let x = s.mesh().geometry(k).centroid;
                let p = evaluate_pressure(s, &sol.pressure, k, x);
                assert!((p - (x[0] * x[0] * x[1] - 1.0 / 6.0)).abs() < 0.05);
            }
        }
    }

    #[test]
    fn pattern_mismatch_is_rejected() {
        let fx = fixture(VelocityElementKind::BernardiRaugel, 1);
        let n = fx.f.spaces().velocity.num_dofs();
        let bad = SparseMatrix::identity(n);
        assert!(fx.solver().solve(&bad, &vec![0.0; n], &[], &[]).is_err());
    }

    fn problem<'a>(fx: &'a Fixture, form: ConvectionForm, u_old: &'a [f64], hist: &'a [f64], values: &'a [f64]) -> StepProblem<'a> {
        StepProblem {
            assembler: &fx.f,
            form,
            mass: &fx.mp,
            mass_coeff: 10.0,
            stiffness: &fx.a,
            nu: 0.1,
            theta: 1.0,
            u_old,
            history_rhs: hist,
            constrained: &fx.fixed,
            boundary_values: values,
            h1_matrix: &fx.h1,
        }
    }

    #[test]
    fn linearized_step_is_one_solve() {
        let fx = fixture(VelocityElementKind::BernardiRaugel, 2);
        let n = fx.f.spaces().velocity.num_dofs();
        let u_old = vec![0.0; n];
        let hist = fx.f.rhs(|x| [x[1], -x[0]], false);
        let values = vec![0.0; fx.fixed.len()];
        let beta = fx.f.spaces().interpolate(|x| [x[1] - 0.5, 0.5 - x[0]]);
        let mut solver = fx.solver();
        let p = problem(&fx, ConvectionForm::Classical, &u_old, &hist, &values);
        let settings = NonlinearSettings { method: NonlinearMethod::Extrapolated, ..Default::default() };
        let out = p.solve_nonlinear(&mut solver, &settings, &beta).unwrap();
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn picard_and_newton_agree_and_newton_contracts_faster() {
        let fx = fixture(VelocityElementKind::BernardiRaugel, 4);
        let s = fx.f.spaces();
        let n = s.velocity.num_dofs();
        let u_old = vec![0.0; n];
        let hist = fx.f.rhs(|x| [40.0 * (x[1] - 0.5), -40.0 * (x[0] - 0.5)], false);
        let values = vec![0.0; fx.fixed.len()];
        let mut solver = fx.solver();
        let p = problem(&fx, ConvectionForm::Skew, &u_old, &hist, &values);
        let tight = |method| NonlinearSettings { method, tolerance: 1e-10, max_iterations: 60 };
        let picard = p.solve_nonlinear(&mut solver, &tight(NonlinearMethod::Picard), &u_old).unwrap();
        let newton = p.solve_nonlinear(&mut solver, &tight(NonlinearMethod::Newton), &u_old).unwrap();
        assert!(newton.iterations < picard.iterations, "{} vs {}", newton.iterations, picard.iterations);
        for (a, b) in picard.velocity.iter().zip(&newton.velocity) {
            assert!((a - b).abs() < 1e-8);
        }
        // quadratic contraction: the increment ratio shrinks
        let inc = &newton.increments;
        assert!(inc.len() >= 3);
        let r1 = inc[1] / inc[0];
        let r2 = inc[2] / inc[1];
        assert!(r2 < r1, "{inc:?}");
    }

    #[test]
    fn non_convergence_is_reported() {
        let fx = fixture(VelocityElementKind::BernardiRaugel, 2);
        let n = fx.f.spaces().velocity.num_dofs();
        let u_old = vec![0.0; n];
        let hist = fx.f.rhs(|x| [x[1] - 0.5, 0.5 - x[0]], false);
        let values = vec![0.0; fx.fixed.len()];
        let mut solver = fx.solver();
        let p = problem(&fx, ConvectionForm::Classical, &u_old, &hist, &values);
        let settings = NonlinearSettings { method: NonlinearMethod::Picard, tolerance: 1e-300, max_iterations: 2 };
        match p.solve_nonlinear(&mut solver, &settings, &u_old) {
            Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
        let bad = NonlinearSettings { tolerance: 0.0, ..Default::default() };
        assert!(p.solve_nonlinear(&mut solver, &bad, &u_old).is_err());
    }
}
