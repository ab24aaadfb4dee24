use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use patchwarp::dataset::write_dataset;
use patchwarp::geometry::ImageSize;
use patchwarp::metrics::fid_from_files;
use patchwarp::pipeline::ColorSpace;
use patchwarp::raster::VisibilityConfig;
use patchwarp::toy::toy_dataset;
use patchwarp_cli::{emit_pairs, encode_png, CliError, EmitConfig, Engine, EngineOptions, Output, RenderRequest, SamplerChoice};

#[derive(Parser)]
#[command(name = "patchwarp", version, about = "Warp annotated photos of objects to new viewpoints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one sample from a new viewpoint.
    Render(RenderArgs),
    /// Write self-supervised training pairs for a dataset.
    EmitPairs(EmitArgs),
    /// Frechet distance between two feature files (CSV or binary).
    Fid { a: PathBuf, b: PathBuf },
    /// Serve the HTTP render API.
    Serve(ServeArgs),
    /// Generate a synthetic vehicle dataset.
    ToyDataset(ToyArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Dataset root (contains manifest.json).
    #[arg(long)]
    data: PathBuf,
    /// Working image size in pixels.
    #[arg(long, default_value_t = 128)]
    size: u32,
    #[arg(long, default_value_t = 0.5)]
    threshold_visibility: f64,
    /// Patch layout JSON; defaults to the built-in layout of the dataset class.
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl EngineArgs {
    fn load(&self, symmetry: bool) -> Result<Engine, CliError> {
        let options = EngineOptions {
            size: self.size,
            visibility: VisibilityConfig {
                threshold: self.threshold_visibility,
                ..VisibilityConfig::default()
            },
            symmetry,
        };
        Engine::load(&self.data, self.spec.as_deref(), options)
    }
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    sample: String,
    /// CAD used for the sketch; defaults to the sample's own.
    #[arg(long)]
    cad: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    azimuth: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    elevation: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_enum, default_value_t = Output::All)]
    output: Output,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_symmetry: bool,
}

#[derive(Args)]
struct EmitArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    limit: Option<usize>,
    /// Store color planes in 8-bit CIELAB.
    #[arg(long)]
    lab: bool,
    #[arg(long, value_enum, default_value_t = SamplerChoice::Empirical)]
    sampler: SamplerChoice,
    /// Fill patches lost at the intermediate view from their mirror partner.
    #[arg(long)]
    symmetry: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 24)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    size: u32,
}

fn save_png(img: &image::DynamicImage, path: &Path) -> Result<(), CliError> {
    fs::write(path, encode_png(img)?)?;
    Ok(())
}

fn render(args: RenderArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let engine = args.engine.load(!args.no_symmetry)?;
    let load_ms = start.elapsed().as_secs_f64() * 1e3;
    let req = RenderRequest {
        cad_id: args.cad,
        azimuth_deg: args.azimuth,
        elevation_deg: args.elevation,
        radius: args.radius,
        output: args.output,
        ..RenderRequest::new(args.sample)
    };
    let out = engine.render(&req)?;
    fs::create_dir_all(&args.out)?;
    let layers: &[(Output, &str)] = match args.output {
        Output::All => &[(Output::Composite, "composite"), (Output::Sketch, "sketch"), (Output::Patches, "patches")],
        Output::Composite => &[(Output::Composite, "composite")],
        Output::Sketch => &[(Output::Sketch, "sketch")],
        Output::Patches => &[(Output::Patches, "patches")],
    };
    for (layer, name) in layers {
        save_png(&out.layer(*layer), &args.out.join(format!("{name}.png")))?;
    }
    if args.output == Output::All {
        save_png(&out.prior(), &args.out.join("prior.png"))?;
    }
    let report = json!({
        "sample_id": req.sample_id,
        "cad_id": out.cad_id,
        "pose": out.pose,
        "dropped_patches": out.synthesis.patches.dropped_names(),
        "load_ms": load_ms,
        "timings_ms": out.synthesis.timings,
    });
    println!("{report}");
    Ok(())
}

fn emit(args: EmitArgs) -> Result<(), CliError> {
    let engine = args.engine.load(args.symmetry)?;
    let config = EmitConfig {
        seed: args.seed,
        limit: args.limit,
        color_space: if args.lab { ColorSpace::Lab } else { ColorSpace::Rgb },
        sampler: args.sampler,
        symmetry: args.symmetry,
    };
    let start = Instant::now();
    let summary = emit_pairs(&engine, &args.out, &config)?;
    let secs = start.elapsed().as_secs_f64();
    println!(
        "{}",
        json!({
            "emitted": summary.emitted,
            "failed": summary.failed.len(),
            "seconds": secs,
            "pairs_per_second": summary.emitted as f64 / secs.max(1e-9),
        })
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let engine = Arc::new(args.engine.load(true)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.bind).await?;
        log::info!("listening on {}", listener.local_addr()?);
        patchwarp_cli::server::serve(listener, engine).await
    })?;
    Ok(())
}

fn toy(args: ToyArgs) -> Result<(), CliError> {
    if args.size < 10 {
        return Err(CliError::invalid("--size must be at least 10"));
    }
    let (catalog, samples) = toy_dataset(args.count, args.seed, ImageSize::square(args.size));
    write_dataset(&args.out, &catalog, &samples)?;
    println!("{}", json!({"samples": samples.len(), "cads": catalog.len()}));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Render(a) => render(a),
        Command::EmitPairs(a) => emit(a),
        Command::Fid { a, b } => {
            println!("{}", fid_from_files(a, b)?);
            Ok(())
        }
        Command::Serve(a) => serve(a),
        Command::ToyDataset(a) => toy(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::invalid(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code())
        }
    }
}
