//! Benchmark configuration and runners for the potential flow, Gresho
//! vortex, lattice vortex and manufactured problems.
//!
//! Configuration files hold one `key = value` pair per line; `#` starts a
//! comment. The `problem` key selects the defaults every other key
//! overrides. Keys:
//!
//! | key | meaning |
//! |---|---|
//! | `problem` | `potential_flow`, `gresho`, `lattice_vortex`, `manufactured` |
//! | `element` | `br` or `p2b` |
//! | `form` | `classical`, `skew`, `emac`, `convreco`, `rotreco`, `emapr` |
//! | `scheme` | `bdf2` or `cn` |
//! | `alpha`, `nu`, `dt`, `T` | stabilization, viscosity, step, final time |
//! | `n` | cells per side of the uniform mesh |
//! | `levels` | comma-separated `n` values of a convergence study, or `none` |
//! | `mesh_file`, `refinements` | mesh file and its uniform refinements |
//! | `perturbation`, `seed` | random interior vertex displacement |
//! | `nonlinear`, `tolerance`, `max_iterations` | `picard`, `newton` or `extrapolated` |
//! | `forcing_amplitude` | `c` in `f = c grad chi` (potential flow) |
//! | `initial` | `interpolation` or `stokes` |
//! | `record_every` | diagnostics cadence in steps |
//! | `output_dir`, `dat` | output location, extra gnuplot `.dat` files |

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::basis::VelocityElementKind;
use crate::diagnostics::{eoc, write_records_path, DiagnosticsRecord, ErrorNorms, CSV_HEADER};
use crate::dofspace::{BoundaryMode, Spaces};
use crate::error::{Error, Result};
use crate::forms::{ConvectionForm, FormAssembler};
use crate::mesh::{Mesh, Rect};
use crate::problems::{ExactSolution, Gresho, LatticeVortex, Manufactured, PotentialFlow};
use crate::solver::{NonlinearMethod, NonlinearSettings};
use crate::timeloop::{InitialCondition, Simulation, SimulationState, StepReport, TimeConfig, TimeScheme};

/// Environment variable overriding the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "EMAPR_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    PotentialFlow,
    Gresho,
    LatticeVortex,
    Manufactured,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::PotentialFlow => "potential_flow",
            Self::Gresho => "gresho",
            Self::LatticeVortex => "lattice_vortex",
            Self::Manufactured => "manufactured",
        }
    }

    pub fn domain(self) -> Rect {
        match self {
            Self::Gresho => Rect::centered_unit(),
            _ => Rect::unit(),
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "potential_flow" => Ok(Self::PotentialFlow),
            "gresho" => Ok(Self::Gresho),
            "lattice_vortex" => Ok(Self::LatticeVortex),
            "manufactured" => Ok(Self::Manufactured),
            _ => Err(Error::InvalidArgument(format!("unknown problem '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub n: usize,
    pub file: Option<PathBuf>,
    pub refinements: usize,
    pub perturbation: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub problem: ProblemKind,
    pub element: VelocityElementKind,
    pub alpha: f64,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub mesh: MeshSpec,
    /// Uniform `n` of a convergence study.
    pub levels: Vec<usize>,
    pub form: ConvectionForm,
    pub scheme: TimeScheme,
    pub nonlinear: NonlinearSettings,
    pub forcing_amplitude: f64,
    pub initial: InitialCondition,
    pub record_every: usize,
    pub output_dir: PathBuf,
    pub dat: bool,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for key '{key}'"))),
    }
}

fn parse_with<T>(key: &str, value: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<T> {
    f(value.trim()).map_err(|e| Error::Config(format!("key '{key}': {e}")))
}

impl BenchmarkConfig {
    /// Reference parameters of `problem`.
    pub fn defaults(problem: ProblemKind) -> Self {
        let mesh = |n| MeshSpec { n, file: None, refinements: 0, perturbation: 0.0, seed: 0 };
        let nl = |method, tolerance| NonlinearSettings { method, tolerance, max_iterations: 50 };
        let base = Self {
            problem,
            element: VelocityElementKind::BernardiRaugel,
            alpha: 0.0,
            nu: 0.0,
            dt: 0.01,
            t_end: 1.0,
            mesh: mesh(16),
            levels: Vec::new(),
            form: ConvectionForm::Emapr,
            scheme: TimeScheme::CrankNicolson,
            nonlinear: nl(NonlinearMethod::Picard, 1e-10),
            forcing_amplitude: 0.0,
            initial: InitialCondition::Interpolation,
            record_every: 1,
            output_dir: PathBuf::from("output"),
            dat: false,
        };
        match problem {
            ProblemKind::PotentialFlow => Self {
                nu: 5e-4,
                dt: 1e-3,
                t_end: 0.1,
                mesh: mesh(8),
                levels: vec![8, 16, 32, 64],
                scheme: TimeScheme::Bdf2,
                nonlinear: nl(NonlinearMethod::Extrapolated, 1e-10),
                record_every: 100,
                ..base
            },
            // the interpolant is in V_h^0 only up to edge quadrature; the projection is exactly
            ProblemKind::Gresho => Self { t_end: 10.0, mesh: mesh(48), initial: InitialCondition::StokesProjection, ..base },
            ProblemKind::LatticeVortex => Self {
                element: VelocityElementKind::P2Bubble,
                alpha: 1.0,
                nu: 1e-5,
                dt: 1e-3,
                t_end: 10.0,
                mesh: mesh(64),
                nonlinear: nl(NonlinearMethod::Extrapolated, 1e-10),
                record_every: 100,
                ..base
            },
            ProblemKind::Manufactured => Self {
                nu: 0.1,
                mesh: mesh(16),
                scheme: TimeScheme::Bdf2,
                nonlinear: nl(NonlinearMethod::Picard, 1e-10),
                record_every: 10,
                ..base
            },
        }
    }

    /// Overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => {
                let p: ProblemKind = parse_with(key, value, str::parse)?;
                if p != self.problem {
                    return Err(Error::Config(format!("problem is '{}', cannot change it to '{}'", self.problem.name(), p.name())));
                }
            }
            "element" => self.element = parse_with(key, value, str::parse)?,
            "alpha" => self.alpha = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "T" | "t_end" => self.t_end = parse(key, value)?,
            "n" => self.mesh.n = parse(key, value)?,
            "levels" => {
                self.levels = match value.trim() {
                    "" | "none" => Vec::new(),
                    list => list.split(',').map(|v| parse(key, v)).collect::<Result<_>>()?,
                };
            }
            "mesh_file" => self.mesh.file = Some(PathBuf::from(value.trim())),
            "refinements" => self.mesh.refinements = parse(key, value)?,
            "perturbation" => self.mesh.perturbation = parse(key, value)?,
            "seed" => self.mesh.seed = parse(key, value)?,
            "form" => self.form = parse_with(key, value, str::parse)?,
            "scheme" => self.scheme = parse_with(key, value, str::parse)?,
            "nonlinear" => self.nonlinear.method = parse_with(key, value, str::parse)?,
            "tolerance" => self.nonlinear.tolerance = parse(key, value)?,
            "max_iterations" => self.nonlinear.max_iterations = parse(key, value)?,
            "forcing_amplitude" => self.forcing_amplitude = parse(key, value)?,
            "initial" => self.initial = parse_with(key, value, str::parse)?,
            "record_every" => self.record_every = parse(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "dat" => self.dat = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Builds a configuration from ordered pairs; `problem` is required and
    /// the remaining keys apply over its defaults in order.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().map(|(k, v)| (k.trim(), v.trim())).collect();
        let problem = pairs
            .iter()
            .rev()
            .find(|(k, _)| *k == "problem")
            .ok_or_else(|| Error::Config("missing key 'problem'".into()))?
            .1;
        let mut cfg = Self::defaults(parse_with("problem", problem, str::parse)?);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// `key = value` lines of a configuration file.
    pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
            if k.trim().is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = Self::parse_pairs(text)?;
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0) {
            return fail(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.nu >= 0.0) {
            return fail(format!("nu must be non-negative, got {}", self.nu));
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt) {
            return fail(format!("T = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if self.mesh.n == 0 || self.levels.contains(&0) {
            return fail("mesh sizes must be positive".into());
        }
        if !(0.0..0.5).contains(&self.mesh.perturbation) {
            return fail(format!("perturbation must lie in [0, 0.5), got {}", self.mesh.perturbation));
        }
        if self.record_every == 0 {
            return fail("record_every must be positive".into());
        }
        if self.problem == ProblemKind::Gresho && self.nu != 0.0 {
            return fail("the Gresho vortex is an inviscid benchmark; set nu = 0".into());
        }
        self.nonlinear.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn exact_solution(&self) -> Box<dyn ExactSolution> {
        match self.problem {
            ProblemKind::PotentialFlow => Box::new(PotentialFlow { nu: self.nu, forcing_amplitude: self.forcing_amplitude }),
            ProblemKind::Gresho => Box::new(Gresho),
            ProblemKind::LatticeVortex => Box::new(LatticeVortex { nu: self.nu }),
            ProblemKind::Manufactured => Box::new(Manufactured { nu: self.nu }),
        }
    }

    /// No-penetration for the Gresho vortex, full Dirichlet data otherwise.
    pub fn boundary_mode(&self) -> BoundaryMode {
        match self.problem {
            ProblemKind::Gresho => BoundaryMode::NoPenetration,
            _ => BoundaryMode::Full,
        }
    }

    pub fn time_config(&self) -> TimeConfig {
        TimeConfig {
            scheme: self.scheme,
            dt: self.dt,
            t_end: self.t_end,
            form: self.form,
            alpha: self.alpha,
            boundary: self.boundary_mode(),
            nonlinear: self.nonlinear,
            initial: self.initial,
        }
    }

    fn finish_mesh(&self, m: Mesh) -> Result<Mesh> {
        if self.mesh.perturbation > 0.0 {
            m.perturb_interior_vertices(self.mesh.perturbation, self.mesh.seed)
        } else {
            Ok(m)
        }
    }

    /// The mesh file refined `refinements` times, or the uniform `n x n` mesh.
    pub fn build_mesh(&self) -> Result<Mesh> {
        let mut m = match &self.mesh.file {
            Some(path) => Mesh::read_path(path)?,
            None => Mesh::uniform_square(self.mesh.n, self.problem.domain())?,
        };
        for _ in 0..self.mesh.refinements {
            m = m.refine_uniform()?;
        }
        self.finish_mesh(m)
    }

    /// Meshes of a convergence study: the mesh file and its successive
    /// refinements, or the uniform `levels` (falling back to `n`).
    pub fn build_levels(&self) -> Result<Vec<Mesh>> {
        if let Some(path) = &self.mesh.file {
            let mut m = Mesh::read_path(path)?;
            let mut out = vec![self.finish_mesh(m.clone())?];
            for _ in 0..self.mesh.refinements {
                m = m.refine_uniform()?;
                out.push(self.finish_mesh(m.clone())?);
            }
            return Ok(out);
        }
        let levels = if self.levels.is_empty() { vec![self.mesh.n] } else { self.levels.clone() };
        levels.iter().map(|&n| self.finish_mesh(Mesh::uniform_square(n, self.problem.domain())?)).collect()
    }

    /// File stem identifying the run.
    pub fn label(&self) -> String {
        format!("{}_{}_{}_a{}", self.problem.name(), self.element.name(), self.form.name(), self.alpha)
    }
}

/// Output directory: the environment override when set, else the configured one.
pub fn resolve_output_dir(configured: &Path, env_override: Option<&str>) -> PathBuf {
    match env_override {
        Some(dir) if !dir.trim().is_empty() => PathBuf::from(dir),
        _ => configured.to_path_buf(),
    }
}

/// Diagnostics of one time-dependent run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub label: String,
    pub records: Vec<DiagnosticsRecord>,
    pub num_cells: usize,
    pub h: f64,
    pub total_iterations: usize,
}

/// Runs the configured time loop on `mesh`; `observe` sees every step.
pub fn run_time_series_on(
    config: &BenchmarkConfig,
    mesh: &Mesh,
    mut observe: impl FnMut(&SimulationState, &StepReport),
) -> Result<TimeSeries> {
    config.validate()?;
    let spaces = Spaces::new(mesh, config.element);
    let assembler = FormAssembler::new(&spaces);
    let exact = config.exact_solution();
    let mut sim = Simulation::new(&assembler, exact.as_ref(), config.time_config())?;
    let mut total = 0;
    let (_, records) = sim.run(config.record_every, |s, r| {
        total += r.iterations;
        observe(s, r)
    })?;
    Ok(TimeSeries { label: config.label(), records, num_cells: mesh.num_cells(), h: mesh.h_max(), total_iterations: total })
}

pub fn run_time_series(config: &BenchmarkConfig) -> Result<TimeSeries> {
    run_time_series_on(config, &config.build_mesh()?, |_, _| {})
}

fn expect_problem(config: &BenchmarkConfig, want: ProblemKind) -> Result<()> {
    if config.problem != want {
        return Err(Error::Config(format!("expected problem '{}', got '{}'", want.name(), config.problem.name())));
    }
    Ok(())
}

/// Conservation time series of the Gresho vortex.
pub fn run_gresho(config: &BenchmarkConfig) -> Result<TimeSeries> {
    expect_problem(config, ProblemKind::Gresho)?;
    run_time_series(config)
}

/// Error-growth time series of the lattice vortex.
pub fn run_lattice_vortex(config: &BenchmarkConfig) -> Result<TimeSeries> {
    expect_problem(config, ProblemKind::LatticeVortex)?;
    run_time_series(config)
}

/// Errors at the final time on one mesh of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub num_cells: usize,
    pub h: f64,
    pub errors: ErrorNorms,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

pub const CONVERGENCE_COLUMNS: [&str; 5] = ["err_L2_u", "err_L2_Pu", "err_H1_u", "err_L2_p", "err_L2_Php"];

impl ConvergenceTable {
    fn column(&self, c: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| {
                let e = r.errors;
                let v = [Some(e.l2_u), Some(e.l2_pu), Some(e.h1_u), e.l2_p, e.l2_php][c];
                (r.h, v.unwrap_or(f64::NAN))
            })
            .collect()
    }

    /// Rates of column `c` of [`CONVERGENCE_COLUMNS`].
    pub fn rates(&self, c: usize) -> Vec<Option<f64>> {
        eoc(&self.column(c))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["cells".to_string(), "h".to_string()];
        for c in CONVERGENCE_COLUMNS {
            header.push(c.to_string());
            header.push(format!("eoc_{}", &c[4..]));
        }
        out.write_record(&header)?;
        let rates: Vec<Vec<Option<f64>>> = (0..CONVERGENCE_COLUMNS.len()).map(|c| self.rates(c)).collect();
        for (i, r) in self.rows.iter().enumerate() {
            let mut row = vec![r.num_cells.to_string(), format!("{:e}", r.h)];
            for (c, rate) in rates.iter().enumerate() {
                let v = self.column(c)[i].1;
                row.push(if v.is_nan() { String::new() } else { format!("{v:e}") });
                row.push(rate[i].map(|x| format!("{x:.4}")).unwrap_or_default());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Convergence study of the potential flow: final-time errors on every level.
pub fn run_potential_flow(config: &BenchmarkConfig) -> Result<ConvergenceTable> {
    expect_problem(config, ProblemKind::PotentialFlow)?;
    let mut rows = Vec::new();
    for mesh in config.build_levels()? {
        let series = run_time_series_on(config, &mesh, |_, _| {})?;
        let last = series.records.last().and_then(|r| r.errors).ok_or_else(|| Error::Config("empty run".into()))?;
        rows.push(ConvergenceRow { num_cells: series.num_cells, h: series.h, errors: last });
    }
    Ok(ConvergenceTable { rows })
}

/// One run per form on a shared mesh.
pub fn run_comparison(config: &BenchmarkConfig, forms: &[ConvectionForm]) -> Result<Vec<TimeSeries>> {
    let mesh = config.build_mesh()?;
    forms
        .iter()
        .map(|&form| run_time_series_on(&BenchmarkConfig { form, ..config.clone() }, &mesh, |_, _| {}))
        .collect()
}

/// Whitespace-separated copy of a diagnostics series for gnuplot.
pub fn write_records_dat<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "# {}", CSV_HEADER.join(" "))?;
    for r in records {
        let fields: Vec<String> = r.csv_fields().into_iter().map(|f| if f.is_empty() { "nan".into() } else { f }).collect();
        writeln!(w, "{}", fields.join(" "))?;
    }
    Ok(())
}

/// Writes `<label>.csv` (and `.dat` when enabled) into `dir`; returns the CSV path.
pub fn write_series(dir: &Path, series: &TimeSeries, dat: bool) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", series.label));
    write_records_path(&csv_path, &series.records)?;
    if dat {
        let f = std::fs::File::create(dir.join(format!("{}.dat", series.label)))?;
        write_records_dat(std::io::BufWriter::new(f), &series.records)?;
    }
    Ok(csv_path)
}

/// Rate table of every `err_*` column of a CSV with an `h` column (or an
/// `n` column, read as `h = 1/n`).
pub fn eoc_table<R: Read>(input: R) -> Result<String> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let h_col = headers.iter().position(|h| h == "h");
    let n_col = headers.iter().position(|h| h == "n");
    if h_col.is_none() && n_col.is_none() {
        return Err(Error::Config("input needs an 'h' or 'n' column".into()));
    }
    let err_cols: Vec<usize> = headers.iter().enumerate().filter(|(_, h)| h.starts_with("err_")).map(|(i, _)| i).collect();
    if err_cols.is_empty() {
        return Err(Error::Config("input has no 'err_*' columns".into()));
    }
    let num = |s: &str| s.trim().parse::<f64>().unwrap_or(f64::NAN);
    let mut hs = Vec::new();
    let mut cols = vec![Vec::new(); err_cols.len()];
    for rec in reader.records() {
        let rec = rec?;
        let h = match h_col {
            Some(c) => num(&rec[c]),
            None => 1.0 / num(&rec[n_col.unwrap_or(0)]),
        };
        hs.push(h);
        for (j, &c) in err_cols.iter().enumerate() {
            cols[j].push(num(&rec[c]));
        }
    }
    let rates: Vec<Vec<Option<f64>>> =
        cols.iter().map(|col| eoc(&hs.iter().copied().zip(col.iter().copied()).collect::<Vec<_>>())).collect();
    let mut out = String::new();
    let _ = write!(out, "{:>12}", "h");
    for &c in &err_cols {
        let _ = write!(out, " {:>14} {:>6}", &headers[c], "eoc");
    }
    out.push('\n');
    for (i, h) in hs.iter().enumerate() {
        let _ = write!(out, "{h:>12.4e}");
        for (j, col) in cols.iter().enumerate() {
            let rate = rates[j][i].map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into());
            let _ = write!(out, " {:>14.4e} {rate:>6}", col[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_experiments() {
        let pf = BenchmarkConfig::defaults(ProblemKind::PotentialFlow);
        assert_eq!((pf.nu, pf.dt, pf.t_end), (5e-4, 1e-3, 0.1));
        assert_eq!(pf.levels, vec![8, 16, 32, 64]);
        assert_eq!(pf.scheme, TimeScheme::Bdf2);
        let g = BenchmarkConfig::defaults(ProblemKind::Gresho);
        assert_eq!((g.nu, g.dt, g.t_end, g.mesh.n), (0.0, 0.01, 10.0, 48));
        assert_eq!(g.boundary_mode(), BoundaryMode::NoPenetration);
        let lv = BenchmarkConfig::defaults(ProblemKind::LatticeVortex);
        assert_eq!((lv.nu, lv.alpha, lv.element), (1e-5, 1.0, VelocityElementKind::P2Bubble));
        for p in [ProblemKind::PotentialFlow, ProblemKind::Gresho, ProblemKind::LatticeVortex, ProblemKind::Manufactured] {
            assert!(BenchmarkConfig::defaults(p).validate().is_ok());
            assert_eq!(p.name().parse::<ProblemKind>().unwrap(), p);
        }
    }

    #[test]
    fn parses_config_text() {
        let text = "# Gresho run\nproblem = gresho\nelement = p2b\nalpha = 1 # stabilized\nT = 0.5\nform = classical\n\nlevels = 4, 8\n";
        let cfg = BenchmarkConfig::from_text(text).unwrap();
        assert_eq!(cfg.element, VelocityElementKind::P2Bubble);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.t_end, 0.5);
        assert_eq!(cfg.form, ConvectionForm::Classical);
        assert_eq!(cfg.levels, vec![4, 8]);
        assert_eq!(cfg.label(), "gresho_p2b_classical_a1");
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "element = br",
            "problem = gresho\nfoo = 1",
            "problem = gresho\nalpha = -1",
            "problem = gresho\ndt = 0",
            "problem = gresho\nnu = 0.1",
            "problem = gresho\nT = 0.001",
            "problem = gresho\nform = upwind",
            "problem = gresho\nnot a pair",
            "problem = vortex",
        ] {
            assert!(matches!(BenchmarkConfig::from_text(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn later_pairs_override_earlier_ones() {
        let cfg = BenchmarkConfig::from_pairs([("problem", "manufactured"), ("n", "4"), ("n", "6")]).unwrap();
        assert_eq!(cfg.mesh.n, 6);
    }

    #[test]
    fn output_dir_override() {
        let p = Path::new("out");
        assert_eq!(resolve_output_dir(p, None), PathBuf::from("out"));
        assert_eq!(resolve_output_dir(p, Some("")), PathBuf::from("out"));
        assert_eq!(resolve_output_dir(p, Some("/tmp/x")), PathBuf::from("/tmp/x"));
    }

    #[test]
    fn eoc_table_from_csv() {
        let csv = "n,err_L2_u,err_H1_u\n8,1e-2,1e-1\n16,2.5e-3,5e-2\n";
        let t = eoc_table(csv.as_bytes()).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains("2.00") && lines[2].contains("1.00"), "{t}");
        assert!(eoc_table("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn small_runs_and_outputs() {
        let mut cfg = BenchmarkConfig::defaults(ProblemKind::PotentialFlow);
        cfg.levels = vec![2, 4];
        cfg.t_end = 0.004;
        let table = run_potential_flow(&cfg).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows[1].errors.l2_u < table.rows[0].errors.l2_u);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cells,h,err_L2_u,eoc_L2_u"));
        assert!(eoc_table(text.as_bytes()).is_ok());
        assert!(run_gresho(&cfg).is_err());

        let mut g = BenchmarkConfig::defaults(ProblemKind::Gresho);
        g.mesh.n = 4;
        g.t_end = 0.02;
        let runs = run_comparison(&g, &[ConvectionForm::Emapr, ConvectionForm::Emac]).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].records.len(), 3);
        assert_ne!(runs[0].label, runs[1].label);
        let dir = std::env::temp_dir().join(format!("emapr-bench-test-{}", std::process::id()));
        let path = write_series(&dir, &runs[0], true).unwrap();
        let written = std::fs::read_to_string(&path).unwrap();
        assert!(written.starts_with(&CSV_HEADER.join(",")));
        assert!(dir.join(format!("{}.dat", runs[0].label)).exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
