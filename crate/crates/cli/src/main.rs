use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emapr_core::benchmarks::{
    eoc_table, resolve_output_dir, run_comparison, run_potential_flow, run_time_series, write_series, OUTPUT_DIR_ENV,
};
use emapr_core::{BenchmarkConfig, ConvectionForm, Error, ProblemKind};

#[derive(Parser)]
#[command(name = "emapr", version, about = "Reconstruction finite element benchmarks for 2D incompressible flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print mesh statistics as CSV, one row per configured mesh.
    Mesh {
        #[command(flatten)]
        config: ConfigArgs,
        /// One row per convergence level instead of the single run mesh.
        #[arg(long)]
        all_levels: bool,
    },
    /// Run the configured benchmark and write its CSV output.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print a convergence-rate table of a CSV with `h` (or `n`) and `err_*` columns.
    Eoc {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run several convection forms on one shared mesh; one CSV per form.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated form names.
        #[arg(long, value_delimiter = ',', required = true)]
        forms: Vec<String>,
    },
}

/// Configuration sources; flags override the file.
#[derive(Args)]
struct ConfigArgs {
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    element: Option<String>,
    #[arg(long)]
    form: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "T")]
    t_end: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    mesh_file: Option<String>,
    #[arg(long)]
    refinements: Option<String>,
    #[arg(long)]
    perturbation: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    nonlinear: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    max_iterations: Option<String>,
    #[arg(long)]
    forcing_amplitude: Option<String>,
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    /// Also write whitespace-separated `.dat` files.
    #[arg(long)]
    dat: bool,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> emapr_core::Result<BenchmarkConfig> {
        let mut pairs = match &self.config {
            Some(path) => BenchmarkConfig::parse_pairs(&std::fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        let flags = [
            ("problem", &self.problem),
            ("element", &self.element),
            ("form", &self.form),
            ("scheme", &self.scheme),
            ("alpha", &self.alpha),
            ("nu", &self.nu),
            ("dt", &self.dt),
            ("T", &self.t_end),
            ("n", &self.n),
            ("levels", &self.levels),
            ("mesh_file", &self.mesh_file),
            ("refinements", &self.refinements),
            ("perturbation", &self.perturbation),
            ("seed", &self.seed),
            ("nonlinear", &self.nonlinear),
            ("tolerance", &self.tolerance),
            ("max_iterations", &self.max_iterations),
            ("forcing_amplitude", &self.forcing_amplitude),
            ("initial", &self.initial),
            ("record_every", &self.record_every),
            ("output_dir", &self.output_dir),
        ];
        pairs.extend(flags.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        if self.dat {
            pairs.push(("dat".into(), "true".into()));
        }
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut config = BenchmarkConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        config.output_dir = resolve_output_dir(&config.output_dir, std::env::var(OUTPUT_DIR_ENV).ok().as_deref());
        Ok(config)
    }
}

fn mesh_stats(config: &BenchmarkConfig, all_levels: bool) -> emapr_core::Result<()> {
    let meshes = if all_levels { config.build_levels()? } else { vec![config.build_mesh()?] };
    println!("cells,vertices,edges,h,shape_regularity");
    for m in meshes {
        println!("{},{},{},{:e},{:e}", m.num_cells(), m.num_vertices(), m.num_edges(), m.h_max(), m.shape_regularity());
    }
    Ok(())
}

fn run(config: &BenchmarkConfig) -> emapr_core::Result<()> {
    let dir = &config.output_dir;
    if config.problem == ProblemKind::PotentialFlow && !config.levels.is_empty() {
        let table = run_potential_flow(config)?;
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_convergence.csv", config.label()));
        table.write_csv(BufWriter::new(File::create(&path)?))?;
        print!("{}", eoc_table(File::open(&path)?)?);
        println!("wrote {}", path.display());
    } else {
        let series = run_time_series(config)?;
        let path = write_series(dir, &series, config.dat)?;
        println!("wrote {} ({} records, {} cells)", path.display(), series.records.len(), series.num_cells);
    }
    Ok(())
}

fn compare(config: &BenchmarkConfig, forms: &[String]) -> emapr_core::Result<()> {
    let forms: Vec<ConvectionForm> = forms.iter().map(|f| f.parse()).collect::<emapr_core::Result<_>>()?;
    for series in run_comparison(config, &forms)? {
        let path = write_series(&config.output_dir, &series, config.dat)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn eoc(input: &Path) -> emapr_core::Result<()> {
    print!("{}", eoc_table(File::open(input)?)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mesh { config, all_levels } => config.resolve().and_then(|c| mesh_stats(&c, *all_levels)),
        Command::Run { config } => config.resolve().and_then(|c| run(&c)),
        Command::Eoc { input } => eoc(input),
        Command::Compare { config, forms } => config.resolve().and_then(|c| compare(&c, forms)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_))) => {
            eprintln!("emapr: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("emapr: {e}");
            ExitCode::FAILURE
        }
    }
}
