//! BDF2 and Crank-Nicolson time stepping.
//!
//! Dirichlet data are imposed strongly: at every time level the exact
//! velocity is interpolated and its values on the constrained DOFs are fixed,
//! so only the homogeneous remainder is solved for.

use crate::diagnostics::{conserved_quantities, error_norms, DiagnosticsRecord, ExactSolution};
use crate::dofspace::BoundaryMode;
use crate::error::{invalid, Error, Result};
use crate::forms::{ConvectionForm, FormAssembler};
use crate::solver::{NonlinearMethod, NonlinearOutcome, NonlinearSettings, SaddleSolver, StepProblem};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Bdf2,
    CrankNicolson,
}

impl TimeScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bdf2 => "bdf2",
            Self::CrankNicolson => "cn",
        }
    }
}

impl std::str::FromStr for TimeScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bdf2" => Ok(Self::Bdf2),
            "cn" | "crank-nicolson" | "crank_nicolson" => Ok(Self::CrankNicolson),
            _ => Err(Error::InvalidArgument(format!("unknown time scheme '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialCondition {
    /// Interpolation of the exact initial velocity.
    #[default]
    Interpolation,
    /// Discrete Stokes projection of the exact initial velocity.
    StokesProjection,
}

impl std::str::FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interpolation" => Ok(Self::Interpolation),
            "stokes" | "stokes_projection" | "stokes-projection" => Ok(Self::StokesProjection),
            _ => Err(Error::InvalidArgument(format!("unknown initial condition '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub scheme: TimeScheme,
    pub dt: f64,
    pub t_end: f64,
    pub form: ConvectionForm,
    pub alpha: f64,
    pub boundary: BoundaryMode,
    pub nonlinear: NonlinearSettings,
    pub initial: InitialCondition,
}

impl TimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt) {
            return invalid(format!("final time {} is smaller than the time step {}", self.t_end, self.dt));
        }
        if !(self.alpha >= 0.0) {
            return invalid(format!("stabilization parameter must be non-negative, got {}", self.alpha));
        }
        self.nonlinear.validate()
    }

    /// Number of steps to reach `t_end`, rounding to the nearest integer.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Solution levels of a running simulation.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub scheme: TimeScheme,
    pub u_now: Vec<f64>,
    /// Previous level; present after the first step.
    pub u_prev: Option<Vec<f64>>,
    pub p_now: Vec<f64>,
    /// Time level of `p_now`: `t` for BDF2, `t - dt/2` for Crank-Nicolson.
    pub p_time: f64,
}

/// Solver statistics of one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub max_relative_residual: f64,
}

/// Assembled operators and solver for one problem, form and mesh.
pub struct Simulation<'a> {
    assembler: &'a FormAssembler,
    problem: &'a dyn ExactSolution,
    config: TimeConfig,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    h1: SparseMatrix,
    solver: SaddleSolver,
    constrained: Vec<usize>,
    steady_load: Option<Vec<f64>>,
}

impl<'a> Simulation<'a> {
    pub fn new(assembler: &'a FormAssembler, problem: &'a dyn ExactSolution, config: TimeConfig) -> Result<Self> {
        config.validate()?;
        let s = assembler.spaces();
        let mass = assembler.mass_for(config.form, config.alpha)?;
        let stiffness = assembler.gradgrad();
        let h1 = SparseMatrix::combination(&[(1.0, &assembler.plain_mass()), (1.0, &stiffness)]);
        let solver = SaddleSolver::new(
            &assembler.velocity_pattern(),
            &assembler.divergence(),
            s.pressure.mean_weights(),
            &s.pressure.constant_mode(),
        )?;
        let constrained = s.constrained_dofs(config.boundary)?;
        let steady_load = problem
            .steady_forcing()
            .then(|| assembler.rhs(|x| problem.forcing(0.0, x), config.form.is_reconstructed()));
        Ok(Self { assembler, problem, config, mass, stiffness, h1, solver, constrained, steady_load })
    }

    pub fn config(&self) -> &TimeConfig {
        &self.config
    }

    pub fn assembler(&self) -> &FormAssembler {
        self.assembler
    }

    /// Mass matrix paired with the time derivative.
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    fn load(&self, t: f64) -> Vec<f64> {
        match &self.steady_load {
            Some(l) => l.clone(),
            None => self.assembler.rhs(|x| self.problem.forcing(t, x), self.config.form.is_reconstructed()),
        }
    }

    fn boundary_values(&self, t: f64) -> Vec<f64> {
        let g = self.assembler.spaces().interpolate(|x| self.problem.velocity(t, x));
        self.constrained.iter().map(|&d| g[d]).collect()
    }

    /// Initial state at `t = 0` according to the configured initializer.
    pub fn initial_state(&mut self) -> Result<SimulationState> {
        let s = self.assembler.spaces();
        let np = s.pressure.num_dofs();
        let (u0, p0) = match self.config.initial {
            InitialCondition::Interpolation => (s.interpolate(|x| self.problem.velocity(0.0, x)), vec![0.0; np]),
            InitialCondition::StokesProjection => {
                let u = self.stokes_projection(0.0)?;
                (u, vec![0.0; np])
            }
        };
        Ok(SimulationState {
            step: 0,
            t: 0.0,
            dt: self.config.dt,
            scheme: self.config.scheme,
            u_now: u0,
            u_prev: None,
            p_now: p0,
            p_time: 0.0,
        })
    }

    /// `a(u_h, v) - b(v, p_h) = a(u(t), v)` for all `v`, `b(u_h, q) = 0`.
    pub fn stokes_projection(&mut self, t: f64) -> Result<Vec<f64>> {
        let rhs = self.assembler.rhs_gradient(|x| self.problem.velocity_gradient(t, x));
        let values = self.boundary_values(t);
        Ok(self.solver.solve(&self.stiffness, &rhs, &self.constrained, &values)?.velocity)
    }

    /// The step problem together with the solver, borrowed disjointly.
    fn step_problem<'b>(
        &'b mut self,
        mass_coeff: f64,
        theta: f64,
        u_old: &'b [f64],
        history_rhs: &'b [f64],
        values: &'b [f64],
    ) -> (StepProblem<'b>, &'b mut SaddleSolver) {
        let problem = StepProblem {
            assembler: self.assembler,
            form: self.config.form,
            mass: &self.mass,
            mass_coeff,
            stiffness: &self.stiffness,
            nu: self.problem.nu(),
            theta,
            u_old,
            history_rhs,
            constrained: &self.constrained,
            boundary_values: values,
            h1_matrix: &self.h1,
        };
        (problem, &mut self.solver)
    }

    fn commit(state: &mut SimulationState, out: NonlinearOutcome, p_time: f64) -> StepReport {
        let u_new = out.velocity;
        state.u_prev = Some(std::mem::replace(&mut state.u_now, u_new));
        state.p_now = out.pressure;
        state.step += 1;
        state.t = state.step as f64 * state.dt;
        state.p_time = p_time;
        StepReport { iterations: out.iterations, increments: out.increments, max_relative_residual: out.max_relative_residual }
    }

    /// One Crank-Nicolson step. With the extrapolated method and a previous
    /// level available the advecting field is `(3 u^n - u^{n-1}) / 2`;
    /// otherwise the step is solved by Picard or Newton iteration.
    pub fn crank_nicolson_advance(&mut self, state: &mut SimulationState) -> Result<StepReport> {
        let dt = state.dt;
        let t_new = (state.step + 1) as f64 * dt;
        let t_half = (state.step as f64 + 0.5) * dt;
        let mut hist = self.mass.mul_vec(&state.u_now);
        hist.iter_mut().for_each(|v| *v /= dt);
        for (h, f) in hist.iter_mut().zip(self.load(t_half)) {
            *h += f;
        }
        let values = self.boundary_values(t_new);
        let settings = self.config.nonlinear;
        let out = {
            let (problem, solver) = self.step_problem(1.0 / dt, 0.5, &state.u_now, &hist, &values);
            match (&state.u_prev, settings.method) {
                (Some(prev), NonlinearMethod::Extrapolated) => {
                    let beta: Vec<f64> = state.u_now.iter().zip(prev).map(|(a, b)| 1.5 * a - 0.5 * b).collect();
                    problem.solve_linearized(solver, &beta)?
                }
                (None, NonlinearMethod::Extrapolated) => {
                    let picard = NonlinearSettings { method: NonlinearMethod::Picard, ..settings };
                    problem.solve_nonlinear(solver, &picard, &state.u_now)?
                }
                _ => problem.solve_nonlinear(solver, &settings, &state.u_now)?,
            }
        };
        Ok(Self::commit(state, out, t_half))
    }

    /// One BDF2 step; the first step of a run is a Crank-Nicolson step.
    pub fn bdf2_advance(&mut self, state: &mut SimulationState) -> Result<StepReport> {
        let Some(prev) = state.u_prev.clone() else {
            let mut report = self.crank_nicolson_advance(state)?;
            // the startup pressure lives at the midpoint
            report.iterations = report.iterations.max(1);
            return Ok(report);
        };
        let dt = state.dt;
        let t_new = (state.step + 1) as f64 * dt;
        let combo: Vec<f64> = state.u_now.iter().zip(&prev).map(|(a, b)| (4.0 * a - b) / (2.0 * dt)).collect();
        let mut hist = self.mass.mul_vec(&combo);
        for (h, f) in hist.iter_mut().zip(self.load(t_new)) {
            *h += f;
        }
        let values = self.boundary_values(t_new);
        let beta: Vec<f64> = state.u_now.iter().zip(&prev).map(|(a, b)| 2.0 * a - b).collect();
        let settings = self.config.nonlinear;
        let out = {
            let (problem, solver) = self.step_problem(1.5 / dt, 1.0, &state.u_now, &hist, &values);
            match settings.method {
                NonlinearMethod::Extrapolated => problem.solve_linearized(solver, &beta)?,
                _ => problem.solve_nonlinear(solver, &settings, &beta)?,
            }
        };
        Ok(Self::commit(state, out, t_new))
    }

    pub fn advance(&mut self, state: &mut SimulationState) -> Result<StepReport> {
        match state.scheme {
            TimeScheme::Bdf2 => self.bdf2_advance(state),
            TimeScheme::CrankNicolson => self.crank_nicolson_advance(state),
        }
    }

    /// Diagnostics of the current state. Quantities are taken of `Pi_h u_h`
    /// for reconstructed forms and of `u_h` otherwise. Pressure errors are
    /// omitted at `t = 0`, where no discrete pressure exists.
    pub fn record(&self, state: &SimulationState) -> Result<DiagnosticsRecord> {
        let ops = self.assembler.ops();
        let reconstructed = self.config.form.is_reconstructed();
        let quantities = conserved_quantities(ops, &state.u_now, self.config.alpha, reconstructed)?;
        let mut errors = error_norms(ops, &state.u_now, &state.p_now, self.problem, state.t, state.p_time)?;
        if state.step == 0 {
            errors.l2_p = None;
            errors.l2_php = None;
        }
        Ok(DiagnosticsRecord { t: state.t, quantities, errors: Some(errors), seminorm_star: ops.seminorm_star(&state.u_now)? })
    }

    /// Runs to the final time, recording every `record_every` steps and at
    /// the final step. `observe` sees every state after it is recorded.
    pub fn run(
        &mut self,
        record_every: usize,
        mut observe: impl FnMut(&SimulationState, &StepReport),
    ) -> Result<(SimulationState, Vec<DiagnosticsRecord>)> {
        let every = record_every.max(1);
        let mut state = self.initial_state()?;
        let mut records = vec![self.record(&state)?];
        let n = self.config.num_steps();
        for step in 1..=n {
            let report = self.advance(&mut state)?;
            if step % every == 0 || step == n {
                records.push(self.record(&state)?);
            }
            observe(&state, &report);
        }
        Ok((state, records))
    }
}
