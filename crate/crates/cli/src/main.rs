use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layercloth::geometry::io::load_mesh;
use layercloth::metrics::{chamfer_distance, intersection_ratio, normal_consistency, LayerMetrics, MetricReport};
use layercloth::pipeline::{
    artifacts, run_pipeline, validate_manifest, write_fixture, FixtureOptions, Manifest, MaskOptions, Stage,
    StageRange,
};
use layercloth::synthgen::{make_fixture, FixtureSpec};
use layercloth::{Error, Result};

const EXIT_VALIDATION: u8 = 1;
const EXIT_STAGE: u8 = 2;
const EXIT_IO: u8 = 3;

/// Layered garment reconstruction from per-layer body scans.
#[derive(Parser)]
#[command(name = "layercloth", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "LAYERCLOTH_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest and every file it references.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run a range of pipeline stages.
    Run(RunArgs),
    /// Score meshes: rerun the metrics stage of a manifest, or compare a
    /// single garment against a reference.
    Metrics(MetricsArgs),
    /// Write a synthetic body with garment layers and its manifest.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Stage range such as `canonicalize..penetration`, `udf..` or `extract`.
    #[arg(long, default_value = "labels..metrics")]
    stages: String,
    /// Overrides the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the manifest output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long, conflicts_with_all = ["mesh", "reference"])]
    manifest: Option<PathBuf>,
    /// Output directory of the run to score (manifest mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Garment to score (single-mesh mode).
    #[arg(long, requires = "reference")]
    mesh: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Inner surfaces for the intersection ratio (single-mesh mode).
    #[arg(long)]
    inner: Vec<PathBuf>,
    #[arg(long, default_value_t = layercloth::metrics::DEFAULT_METRIC_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = layercloth::metrics::DEFAULT_IR_RESOLUTION)]
    resolution: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write the fixture into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixture parameters as JSON; the built-in default otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Coarse body (for quick trials).
    #[arg(long, conflicts_with = "spec")]
    small: bool,
    /// Emit turntable garment masks instead of embedded labels.
    #[arg(long)]
    masks: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { .. } => EXIT_STAGE,
        Error::Io { .. } | Error::Image(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn rayon_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Usage(format!("cannot start {n} worker threads: {e}")))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Validate { manifest } => {
            let m = validate_manifest(&manifest)?;
            println!("{}: ok ({} layers)", manifest.display(), m.layers.len());
            Ok(())
        }
        Command::Run(args) => run(args),
        Command::Metrics(args) => metrics(args),
        Command::Synth(args) => synth(args),
    }
}

fn load_checked(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Manifest> {
    let mut m = validate_manifest(path)?;
    if let Some(s) = seed {
        m.seed = s;
    }
    if let Some(o) = out {
        // Relative to the working directory, like any other command-line path.
        m.output_dir = std::path::absolute(&o).map_err(|e| Error::Io { path: o, source: e })?;
    }
    Ok(m)
}

fn run(args: RunArgs) -> Result<()> {
    let range: StageRange = args.stages.parse()?;
    let m = load_checked(&args.manifest, args.seed, args.out)?;
    let record = run_pipeline(&m, range)?;
    for w in record.warnings() {
        eprintln!("warning: {w}");
    }
    for s in record.stages.iter().filter(|s| range.contains(s.stage)) {
        println!("{:<13} {:>8.2}s  {} files", s.stage.name(), s.wall_seconds, s.outputs.len());
    }
    if range.contains(Stage::Metrics) {
        print_report(&m.output_dir().join(artifacts::report()))?;
    }
    Ok(())
}

fn print_report(path: &Path) -> Result<()> {
    let report = MetricReport::load_json(path)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<()> {
    if let Some(manifest) = &args.manifest {
        let m = load_checked(manifest, None, args.out)?;
        run_pipeline(&m, StageRange { first: Stage::Metrics, last: Stage::Metrics })?;
        return print_report(&m.output_dir().join(artifacts::report()));
    }
    let (Some(mesh), Some(reference)) = (&args.mesh, &args.reference) else {
        return Err(Error::Usage("give either --manifest or --mesh with --reference".into()));
    };
    let garment = load_mesh(mesh)?;
    let reference = load_mesh(reference)?;
    let inner = args.inner.iter().map(load_mesh).collect::<Result<Vec<_>>>()?;
    let inner_refs: Vec<_> = inner.iter().collect();
    let ir = if inner.is_empty() {
        None
    } else {
        match intersection_ratio(&garment, &inner_refs, args.resolution) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(msg)) => {
                eprintln!("warning: {msg}");
                None
            }
            Err(e) => return Err(e),
        }
    };
    let layer = LayerMetrics {
        layer: 1,
        chamfer_mm: Some(chamfer_distance(&garment, &reference, args.samples, args.seed)?),
        normal_consistency: Some(normal_consistency(&garment, &reference, args.samples, args.seed)?),
        intersection_ratio_percent: ir,
    };
    let report = MetricReport::from_layers(vec![layer], args.samples, args.resolution, args.seed);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: p.clone(),
                line: e.line(),
                msg: e.to_string(),
            })?
        }
        None if args.small => FixtureSpec::small(),
        None => FixtureSpec::default(),
    };
    spec.seed = args.seed;
    let fixture = make_fixture(&spec)?;
    let options = FixtureOptions {
        seed: args.seed,
        masks: args.masks.then(MaskOptions::default),
        ..FixtureOptions::default()
    };
    let m = write_fixture(&fixture, &args.out, &options)?;
    println!(
        "{}: {} layers, {} body vertices",
        args.out.join("manifest.json").display(),
        m.layers.len(),
        fixture.body.body.mesh.vertex_count()
    );
    Ok(())
}
