use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idest::stats::fmt_real;
use idest::{
    build_neighbor_table, correlation_dimension, generate, load_csv, run_method, save_csv, sweep,
    DedupPolicy, GammaSchedule, GeneratorSpec, HeaderMode, Init, ManifoldKind, Method,
    MethodOptions, SweepConfig, UpdateOrder,
};

#[derive(Parser)]
#[command(
    name = "idest",
    version,
    about = "Intrinsic dimension estimation for point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic manifold and write it as CSV
    Gen(GenArgs),
    /// Run one estimator at one neighbor count
    Estimate(EstimateArgs),
    /// Run several estimators over a range of neighbor counts
    Sweep(SweepArgs),
    /// Run the built-in consistency checks
    Selftest,
}

#[derive(Args)]
struct GenArgs {
    /// gaussian, helix3d, curve2d, singular-curve, composite, s-curve,
    /// swiss-roll or uniform-cube
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Standard deviation of isotropic Gaussian noise added to every coordinate
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Ambient dimension (gaussian, uniform-cube)
    #[arg(long)]
    dim: Option<usize>,
    /// Intrinsic dimension (uniform-cube)
    #[arg(long)]
    intrinsic: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV, one point per row
    file: PathBuf,
    /// Whether the first row is a header
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    header: HeaderArg,
    /// Drop exact duplicate points instead of rejecting the file
    #[arg(long)]
    dedup: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeaderArg {
    Auto,
    Yes,
    No,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    /// Start from the pointwise likelihood estimates
    Lb,
    /// Start from uniform draws on [0, d]
    Uniform,
}

#[derive(Args)]
struct MethodFlags {
    /// Lower end of the lb-mle averaging range
    #[arg(long, requires = "k2")]
    k1: Option<usize>,
    /// Upper end of the lb-mle averaging range
    #[arg(long, requires = "k1")]
    k2: Option<usize>,
    /// Lower end of the knn-reg fit range (default: max(2, ceil(k/2)))
    #[arg(long)]
    knn_k1: Option<usize>,

    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma_cap: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = InitArg::Lb)]
    init: InitArg,
    /// Seed for --init uniform
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    #[arg(long)]
    m_floor: Option<f64>,
    #[arg(long)]
    m_ceiling: Option<f64>,
    /// Update all points from the previous sweep's values
    #[arg(long)]
    jacobi: bool,
    /// Grow gamma as max(gamma (1 + epsilon), cap) instead of capping it
    #[arg(long)]
    literal_max: bool,

    /// Number of radii for corr-dim
    #[arg(long)]
    radii: Option<usize>,
    /// Start of the corr-dim fit window, as a fraction of the radius grid
    #[arg(long)]
    fit_lo: Option<f64>,
    /// End of the corr-dim fit window, as a fraction of the radius grid
    #[arg(long)]
    fit_hi: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    method: Method,
    /// Neighbor count (not used by corr-dim)
    #[arg(long)]
    k: Option<usize>,
    /// Write pointwise estimates as CSV (point_index,estimate)
    #[arg(long)]
    per_point: Option<PathBuf>,
    #[command(flatten)]
    flags: MethodFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated method names
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    #[arg(long)]
    k_min: usize,
    #[arg(long)]
    k_max: usize,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write run metadata and per-cell diagnostics as JSON
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[command(flatten)]
    flags: MethodFlags,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<idest::Error> for Failure {
    fn from(e: idest::Error) -> Self {
        Failure {
            code: if e.is_estimator_failure() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        idest::Error::from(e).into()
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn parse_kind(args: &GenArgs) -> Result<ManifoldKind, Failure> {
    let need_dim = || {
        args.dim
            .ok_or_else(|| invalid(format!("{} needs --dim", args.kind)))
    };
    let kind = match args.kind.replace('_', "-").as_str() {
        "gaussian" => ManifoldKind::Gaussian { dim: need_dim()? },
        "helix3d" | "helix" => ManifoldKind::Helix3d,
        "curve2d" => ManifoldKind::Curve2d,
        "singular-curve" => ManifoldKind::SingularCurve,
        "composite" => ManifoldKind::Composite,
        "s-curve" => ManifoldKind::SCurve,
        "swiss-roll" => ManifoldKind::SwissRoll,
        "uniform-cube" => ManifoldKind::UniformCube {
            intrinsic: args
                .intrinsic
                .ok_or_else(|| invalid("uniform-cube needs --intrinsic"))?,
            ambient: need_dim()?,
        },
        other => return Err(invalid(format!("unknown dataset kind {other:?}"))),
    };
    Ok(kind)
}

fn method_options(flags: &MethodFlags, dim: usize) -> MethodOptions {
    let mut opts = MethodOptions::new(dim);
    opts.lb_range = flags.k1.zip(flags.k2);
    opts.knn_k1 = flags.knn_k1;

    let reg = &mut opts.reg;
    if let Some(v) = flags.gamma0 {
        reg.gamma0 = v;
    }
    if let Some(v) = flags.epsilon {
        reg.epsilon = v;
    }
    if let Some(v) = flags.gamma_cap {
        reg.gamma_cap = v;
    }
    if let Some(v) = flags.max_iter {
        reg.max_iter = v;
    }
    if let Some(v) = flags.tol {
        reg.tol = v;
    }
    if let Some(v) = flags.m_floor {
        reg.m_floor = v;
    }
    if let Some(v) = flags.m_ceiling {
        reg.m_ceiling = v;
    }
    reg.init = match flags.init {
        InitArg::Lb => Init::LbWarmStart,
        InitArg::Uniform => Init::SeededUniform {
            seed: flags.init_seed,
        },
    };
    if flags.jacobi {
        reg.order = UpdateOrder::Jacobi;
    }
    if flags.literal_max {
        reg.schedule = GammaSchedule::LiteralMax;
    }

    if let Some(v) = flags.radii {
        opts.corr.num_radii = v;
    }
    if let Some(v) = flags.fit_lo {
        opts.corr.fit_lo_quantile = v;
    }
    if let Some(v) = flags.fit_hi {
        opts.corr.fit_hi_quantile = v;
    }
    opts
}

fn load(input: &InputArgs) -> Result<idest::PointCloud, Failure> {
    let header = match input.header {
        HeaderArg::Auto => HeaderMode::Auto,
        HeaderArg::Yes => HeaderMode::Yes,
        HeaderArg::No => HeaderMode::No,
    };
    load_csv(&input.file, header).map_err(|e| invalid(format!("{}: {e}", input.file.display())))
}

fn dedup_policy(input: &InputArgs) -> DedupPolicy {
    if input.dedup {
        DedupPolicy::DropDuplicates
    } else {
        DedupPolicy::Error
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let spec = GeneratorSpec {
        noise_sigma: args.noise,
        ..GeneratorSpec::new(parse_kind(args)?, args.n, args.seed)
    };
    let cloud = generate(&spec)?;
    save_csv(&cloud, &args.output)?;
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let method = args.method;
    if args.per_point.is_some() && matches!(method, Method::CorrDim | Method::KnnReg) {
        return Err(invalid(format!("{method} has no pointwise estimates")));
    }
    let cloud = load(&args.input)?;
    let opts = method_options(&args.flags, cloud.dim());

    let (k_field, outcome, sources) = if method.uses_k() {
        let k = args
            .k
            .ok_or_else(|| invalid(format!("{method} needs --k")))?;
        let table_k = opts.table_k(method, k).max(k);
        let table = build_neighbor_table(&cloud, table_k, dedup_policy(&args.input))?;
        let outcome = run_method(method, &cloud, &table, k, &opts)?;
        (k.to_string(), outcome, table.source_index().to_vec())
    } else {
        let aggregate = correlation_dimension(&cloud, opts.corr)?;
        let outcome = idest::Outcome {
            aggregate,
            per_point: None,
            converged: true,
        };
        (String::new(), outcome, Vec::new())
    };

    if !outcome.converged {
        eprintln!("idest: warning: {method} stopped at the iteration limit before converging");
    }
    if let (Some(path), Some(values)) = (&args.per_point, &outcome.per_point) {
        let mut out = create(path)?;
        writeln!(out, "point_index,estimate")?;
        for (src, v) in sources.iter().zip(values) {
            writeln!(out, "{src},{}", fmt_real(*v))?;
        }
        out.flush()?;
    }
    println!("{method},{k_field},{}", fmt_real(outcome.aggregate));
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let cloud = load(&args.input)?;
    let cfg = SweepConfig {
        methods: args.methods.clone(),
        k_min: args.k_min,
        k_max: args.k_max,
        options: method_options(&args.flags, cloud.dim()),
        dedup: dedup_policy(&args.input),
    };
    let result = sweep(&cloud, &cfg, &args.input.file.display().to_string())?;
    for row in &result.rows {
        if let Some(e) = &row.error {
            let k = row.k.map(|k| format!(" k={k}")).unwrap_or_default();
            eprintln!("idest: warning: {}{k} failed: {e}", row.method);
        }
    }
    let mut out = create(&args.output)?;
    result.write_csv(&mut out)?;
    if let Some(path) = &args.metadata {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &result)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_selftest() -> Result<(), Failure> {
    let checks = idest::selftest::run_selftest();
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure {
            code: 2,
            message: format!("{failed} of {} checks failed", checks.len()),
        });
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("IDEST_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        invalid(format!(
            "IDEST_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| invalid(format!("cannot start thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Selftest => cmd_selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("idest: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("idest: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
