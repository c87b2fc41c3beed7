use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use geoscatter::datasets::ShapeClass;
use geoscatter::filterbank::{filter_csv, FilterBank, SpectralWindow};
use geoscatter::mesh::off::{load_off, read_off, to_off_string};
use geoscatter::mesh::{icosphere, regular_tetrahedron, torus, ValidationReport};
use geoscatter::pipeline::{parse_signal_csv, run_mnist_demo, run_shapes_demo, MnistDemo, RunConfig, ShapesDemo};
use geoscatter::scattering::{config_json, scatter_nonwindowed, scatter_windowed, PathRule};
use geoscatter::spectral::{
    cotangent_stiffness, eigenbasis_with, load_basis, lumped_mass, save_basis, EigenSolver, SpectralBasis,
};
use geoscatter::verify::{run_verify, Sabotage, VerifyOptions};
use geoscatter::Error;

#[derive(Parser)]
#[command(
    name = "geoscatter",
    version,
    about = "Geometric wavelet scattering on triangle meshes"
)]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Compute and cache Laplace-Beltrami eigenpairs.
    #[command(subcommand)]
    Basis(BasisCommand),
    /// Scattering coefficients of vertex signals.
    Scatter(ScatterArgs),
    /// Export filter responses.
    #[command(subcommand)]
    Filters(FiltersCommand),
    /// Run the invariant suite.
    Verify(VerifyArgs),
    /// Classification demos.
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a generated mesh as OFF.
    Gen(GenArgs),
    /// Check a mesh file against every mesh invariant.
    Validate { path: PathBuf },
}

#[derive(Args)]
#[command(group(ArgGroup::new("shape").required(true).args(["icosphere", "torus", "tetrahedron"])))]
struct GenArgs {
    /// Icosphere with this many subdivisions.
    #[arg(long, value_name = "S")]
    icosphere: Option<u32>,
    #[arg(long, default_value_t = 1.0, requires = "icosphere")]
    radius: f64,
    /// Torus grid and radii.
    #[arg(long, num_args = 4, value_names = ["N_MAJOR", "N_MINOR", "R", "r"])]
    torus: Option<Vec<f64>>,
    /// Regular tetrahedron.
    #[arg(long)]
    tetrahedron: bool,
    #[arg(long, default_value_t = 1.0, requires = "tetrahedron")]
    edge: f64,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BasisCommand {
    /// Solve for the K smallest eigenpairs and write a GSB1 cache.
    Compute(BasisArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Args)]
struct BasisArgs {
    /// OFF mesh.
    mesh: PathBuf,
    /// Number of eigenpairs (clamped to the vertex count).
    #[arg(long, default_value_t = 512)]
    k: usize,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    solver: SolverArg,
    /// Rescale the mesh about its centroid to unit surface area first.
    #[arg(long)]
    unit_area: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Exp,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathRuleArg {
    All,
    NonincreasingFrequency,
}

#[derive(Args)]
struct ScatterArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Basis cache.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Signal CSV: one row per vertex, one column per signal.
    #[arg(long)]
    signal: Option<PathBuf>,
    /// Coefficient CSV; with several signals, one file per column
    /// (`stem_name.csv`). The configuration is echoed to `stem.json`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Low-pass scale.
    #[arg(long = "J", allow_hyphen_values = true)]
    j_max: Option<i32>,
    /// Depth.
    #[arg(long = "L")]
    depth: Option<usize>,
    /// Finest scale (default min(−8, J)).
    #[arg(long = "jmin", allow_hyphen_values = true)]
    j_min: Option<i32>,
    /// Eigenpairs used (default: all in the cache).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    #[arg(long, value_enum)]
    path_rule: Option<PathRuleArg>,
    #[arg(long)]
    path_cap: Option<u64>,
    /// `S̄ f(p) = ‖U[p] f‖₁` instead of the windowed transform.
    #[arg(long)]
    nonwindowed: bool,
}

#[derive(Subcommand)]
enum FiltersCommand {
    /// Write one CSV (k, lambda, hhat) per filter.
    Dump(DumpArgs),
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    basis: PathBuf,
    #[arg(long = "J", default_value_t = 0, allow_hyphen_values = true)]
    j_max: i32,
    #[arg(long = "jmin", allow_hyphen_values = true)]
    j_min: Option<i32>,
    #[arg(long, value_enum, default_value_t = WindowArg::Exp)]
    window: WindowArg,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SabotageArg {
    Telescope,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inject a fault to check that the suite detects it.
    #[arg(long, value_enum)]
    sabotage: Option<SabotageArg>,
    /// Run only the named checks.
    #[arg(long)]
    only: Vec<String>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Synthetic shape classes, depth cross-validated.
    Shapes(ShapesArgs),
    /// Spherical digits against the averaged low-pass baseline.
    Mnist(MnistArgs),
}

#[derive(Args)]
struct ShapesArgs {
    #[arg(long, value_delimiter = ',', default_value = "sphere,torus,bumpy")]
    classes: Vec<String>,
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    /// Largest depth; 0..=L are cross-validated.
    #[arg(long = "L", default_value_t = 2)]
    depth: usize,
    #[arg(long = "J", default_value_t = 0, allow_hyphen_values = true)]
    j_max: i32,
    #[arg(long = "jmin", default_value_t = -8, allow_hyphen_values = true)]
    j_min: i32,
    #[arg(long, default_value_t = 512)]
    k: usize,
    /// Keep each mesh's own scale instead of rescaling to unit area.
    #[arg(long)]
    keep_scale: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MnistArgs {
    #[arg(long, default_value = "data/mnist5k-images-idx3-ubyte")]
    images: PathBuf,
    #[arg(long, default_value = "data/mnist5k-labels-idx1-ubyte")]
    labels: PathBuf,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Apply a random rotation to every digit.
    #[arg(long)]
    rotated: bool,
    #[arg(long = "J", default_value_t = -2, allow_hyphen_values = true)]
    j_max: i32,
    #[arg(long = "L", default_value_t = 2)]
    depth: usize,
    #[arg(long = "jmin", default_value_t = -8, allow_hyphen_values = true)]
    j_min: i32,
    /// Sample points per coefficient function (default 4^(1−J)).
    #[arg(long)]
    samples: Option<usize>,
    /// Keep digit 6 (removed by default).
    #[arg(long)]
    keep_six: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Failures with an exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Parse { .. } | Error::NonTriangleFace { .. } | Error::Format(_) => 3,
            Error::UnexpectedEof => 3,
            Error::Config(_) | Error::InvalidWindow(_) | Error::ScaleOutOfRange { .. } | Error::Dimension(_) => 4,
            Error::PathCapExceeded { .. } => 5,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn write_out(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?,
    }
    Ok(())
}

fn mesh_gen(args: &GenArgs) -> CliResult {
    let mesh = if let Some(s) = args.icosphere {
        icosphere(s, args.radius)?
    } else if let Some(t) = &args.torus {
        let count = |x: f64, what: &str| -> Result<usize, Failure> {
            if x.fract() != 0.0 || x < 1.0 {
                return Err(Error::Config(format!("{what} must be a positive integer, got {x}")).into());
            }
            Ok(x as usize)
        };
        torus(count(t[0], "N_MAJOR")?, count(t[1], "N_MINOR")?, t[2], t[3])?
    } else {
        regular_tetrahedron(args.edge)?
    };
    eprintln!("{} vertices, {} faces", mesh.num_vertices(), mesh.num_faces());
    write_out(args.output.as_deref(), &to_off_string(&mesh))
}

fn mesh_validate(path: &Path) -> CliResult {
    let raw = read_off(path)?;
    let report = ValidationReport::check(&raw.vertices, &raw.faces);
    println!(
        "{}: {} vertices, {} faces",
        path.display(),
        report.num_vertices,
        report.num_faces
    );
    for c in &report.checks {
        if c.passed {
            println!("PASS {}", c.name);
        } else {
            println!("FAIL {}: {}", c.name, c.detail);
        }
    }
    match report.first_failure() {
        None => Ok(()),
        Some(c) => Err(Failure {
            code: 2,
            message: format!("mesh validation failed ({}): {}", c.name, c.detail),
        }),
    }
}

fn basis_compute(args: &BasisArgs) -> CliResult {
    let mut mesh = load_off(&args.mesh)?;
    if args.unit_area {
        mesh = mesh.scaled_to_unit_area();
    }
    let n = mesh.num_vertices();
    let k = if args.k > n {
        eprintln!("warning: --k {} exceeds the {n} vertices; using K = {n}", args.k);
        n
    } else {
        args.k
    };
    let solver = match args.solver {
        SolverArg::Auto => EigenSolver::Auto,
        SolverArg::Dense => EigenSolver::Dense,
        SolverArg::Lanczos => EigenSolver::Lanczos,
    };
    let start = Instant::now();
    let s = cotangent_stiffness(&mesh)?;
    let basis = eigenbasis_with(&s, &lumped_mass(&mesh), k, solver)?.with_mesh_name(mesh.name());
    let residual = basis.residuals(&s).into_iter().fold(0.0, f64::max);
    save_basis(&basis, &args.output)?;
    let ev = basis.eigenvalues();
    println!("mesh {} ({n} vertices, area {:.6})", mesh.name(), mesh.surface_area());
    println!("K = {k}, lambda in [{:.6e}, {:.6e}]", ev[0], ev[k - 1]);
    println!("first eigenvalues: {:?}", &ev[..k.min(10)]);
    println!("max relative residual {residual:.3e}");
    println!(
        "solved in {:.2}s, written to {}",
        start.elapsed().as_secs_f64(),
        args.output.display()
    );
    Ok(())
}

fn scatter(args: &ScatterArgs, threads: Option<usize>) -> CliResult {
    let flags = RunConfig {
        j_max: args.j_max,
        depth: args.depth,
        j_min: args.j_min,
        k: args.k,
        window: args.window.map(|_| SpectralWindow::Exp),
        path_rule: args.path_rule.map(|r| match r {
            PathRuleArg::All => PathRule::All,
            PathRuleArg::NonincreasingFrequency => PathRule::NonincreasingFrequency,
        }),
        path_cap: args.path_cap,
        nonwindowed: args.nonwindowed.then_some(true),
        basis: args.basis.clone(),
        signal: args.signal.clone(),
        output: args.output.clone(),
        seed: None,
        threads,
    };
    let run = match &args.config {
        Some(p) => flags.or(RunConfig::load(p)?),
        None => flags,
    };
    set_threads(run.threads)?;
    run.check_inputs()?;
    let basis_path = run
        .basis
        .as_ref()
        .ok_or_else(|| Error::Config("no basis cache given (--basis or \"basis\")".into()))?;
    let signal_path = run
        .signal
        .as_ref()
        .ok_or_else(|| Error::Config("no signal given (--signal or \"signal\")".into()))?;
    let full = load_basis(basis_path)?;
    let config = run.scattering(full.len())?;
    let basis = if config.k < full.len() {
        full.truncated(config.k)?
    } else {
        full
    };
    let text = fs::read_to_string(signal_path).map_err(|e| Error::Io {
        path: signal_path.clone(),
        source: e,
    })?;
    let (names, signals) = parse_signal_csv(&text)?;
    let fb = config.filterbank(&basis)?;
    let nonwindowed = run.nonwindowed.unwrap_or(false);
    let mut outputs = Vec::new();
    for (name, f) in names.iter().zip(&signals) {
        if f.len() != basis.num_vertices() {
            return Err(Error::Dimension(format!(
                "signal {name} has {} values, the basis has {} vertices",
                f.len(),
                basis.num_vertices()
            ))
            .into());
        }
        eprintln!(
            "{name}: captured energy fraction {:.6}",
            basis.captured_energy_fraction(f)
        );
        let csv = if nonwindowed {
            scatter_nonwindowed(&basis, &fb, f, &config)?.to_csv()
        } else {
            scatter_windowed(&basis, &fb, f, &config)?.to_csv()
        };
        outputs.push((name, csv));
    }
    let mut echo: serde_json::Value = serde_json::from_str(&config_json(&config)).expect("config is JSON");
    echo["nonwindowed"] = nonwindowed.into();
    echo["basis"] = basis_path.display().to_string().into();
    echo["signal"] = signal_path.display().to_string().into();
    echo["signals"] = names.clone().into();
    let echo = serde_json::to_string_pretty(&echo).expect("JSON serializes");
    match &run.output {
        None => {
            for (name, csv) in &outputs {
                if outputs.len() > 1 {
                    println!("# signal {name}");
                }
                print!("{csv}");
            }
            eprintln!("{echo}");
        }
        Some(out) => {
            if outputs.len() == 1 {
                write_out(Some(out), &outputs[0].1)?;
            } else {
                let stem = out.file_stem().unwrap_or_default().to_string_lossy();
                for (name, csv) in &outputs {
                    write_out(Some(&out.with_file_name(format!("{stem}_{name}.csv"))), csv)?;
                }
            }
            write_out(Some(&out.with_extension("json")), &(echo + "\n"))?;
        }
    }
    Ok(())
}

fn filters_dump(args: &DumpArgs) -> CliResult {
    let basis: SpectralBasis = load_basis(&args.basis)?;
    let window = match args.window {
        WindowArg::Exp => SpectralWindow::Exp,
    };
    let j_min = args.j_min.unwrap_or(args.j_max.min(-8));
    let fb = FilterBank::build(&window, args.j_max, j_min, basis.eigenvalues())?;
    fs::create_dir_all(&args.output).map_err(|e| Error::Io {
        path: args.output.clone(),
        source: e,
    })?;
    for (name, h) in fb.all_filters() {
        let file = args.output.join(format!("{name}.csv"));
        write_out(Some(&file), &filter_csv(basis.eigenvalues(), h))?;
        eprintln!("wrote {}", file.display());
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> CliResult {
    let options = VerifyOptions {
        seed: args.seed,
        sabotage: args.sabotage.map(|_| Sabotage::Telescope),
        only: args.only.clone(),
    };
    let start = Instant::now();
    let report = run_verify(&options)?;
    for line in report.lines() {
        println!("{line}");
    }
    let failed = report.results.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} checks passed in {:.1}s",
        report.results.len() - failed,
        report.results.len(),
        start.elapsed().as_secs_f64()
    );
    if let Some(p) = &args.json {
        write_out(
            Some(p),
            &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        )?;
    }
    if failed > 0 {
        return Err(Failure {
            code: 2,
            message: format!("{failed} check(s) failed"),
        });
    }
    Ok(())
}

fn demo_shapes(args: &ShapesArgs) -> CliResult {
    let classes = args
        .classes
        .iter()
        .map(|c| c.parse::<ShapeClass>())
        .collect::<Result<Vec<_>, _>>()?;
    let demo = ShapesDemo {
        classes,
        per_class: args.per_class,
        depth: args.depth,
        j_max: args.j_max,
        j_min: args.j_min,
        k: args.k,
        unit_area: !args.keep_scale,
        seed: args.seed,
    };
    let start = Instant::now();
    let report = run_shapes_demo(&demo)?;
    eprintln!(
        "shapes: accuracy {:.3} (depth 0 baseline {:.3}) in {:.1}s",
        report.mean_accuracy,
        report.baseline_accuracy,
        start.elapsed().as_secs_f64()
    );
    write_out(args.output.as_deref(), &(report.to_json() + "\n"))
}

fn demo_mnist(args: &MnistArgs) -> CliResult {
    if args.per_class == 0 {
        return Err(Error::Config("--per-class must be at least 1".into()).into());
    }
    let demo = MnistDemo {
        images: args.images.clone(),
        labels: args.labels.clone(),
        per_class: args.per_class,
        rotated: args.rotated,
        j_max: args.j_max,
        depth: args.depth,
        j_min: args.j_min,
        samples: args.samples,
        drop_digit: (!args.keep_six).then_some(6),
        subdivisions: 3,
        seed: args.seed,
    };
    let start = Instant::now();
    let report = run_mnist_demo(&demo)?;
    eprintln!(
        "mnist: accuracy {:.3} (depth 0 baseline {:.3}) in {:.1}s",
        report.mean_accuracy,
        report.baseline_accuracy,
        start.elapsed().as_secs_f64()
    );
    write_out(args.output.as_deref(), &(report.to_json() + "\n"))
}

fn set_threads(threads: Option<usize>) -> CliResult {
    let n = threads.unwrap_or(1);
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()).into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")).into())
}

fn run(cli: Cli) -> CliResult {
    if !matches!(cli.command, Command::Scatter(_)) {
        set_threads(cli.threads)?;
    }
    match &cli.command {
        Command::Mesh(MeshCommand::Gen(a)) => mesh_gen(a),
        Command::Mesh(MeshCommand::Validate { path }) => mesh_validate(path),
        Command::Basis(BasisCommand::Compute(a)) => basis_compute(a),
        Command::Scatter(a) => scatter(a, cli.threads),
        Command::Filters(FiltersCommand::Dump(a)) => filters_dump(a),
        Command::Verify(a) => verify(a),
        Command::Demo(DemoCommand::Shapes(a)) => demo_shapes(a),
        Command::Demo(DemoCommand::Mnist(a)) => demo_mnist(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
