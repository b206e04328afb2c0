use std::collections::BTreeSet;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use octoplace::bundle::{load_depth_scene, load_intrinsics, load_obj, load_scene_image, BundleError};
use octoplace::core::evaluation::{
    build_schedule, default_object_list, random_placement, usable_pairs, usable_set, Comparison,
    PlacementRecord, ScheduleSizes,
};
use octoplace::core::geometry::{place3d, SceneModel};
use octoplace::core::scene::Placement3D;
use octoplace::pipeline::{place, ConfigError, PipelineConfig};
use octoplace::service::{self, StudyService};
use octoplace::study::{read_annotations, read_log, read_schedule, write_annotations, write_schedule, Report};
use serde_json::json;

#[derive(Parser)]
#[command(name = "octoplace", version, about = "Open-vocabulary virtual object placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose a placement pixel (and optionally a 3D point) for an object.
    Place(PlaceArgs),
    /// Pairwise human evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Args)]
struct PlaceArgs {
    /// Scene image (PNG).
    image: PathBuf,
    /// Name of the object to place.
    object: String,
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write the full trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Scene bundle directory with depth.png and intrinsics.json.
    #[arg(long, conflicts_with = "mesh")]
    scene: Option<PathBuf>,
    /// Scene mesh (OBJ); needs --intrinsics.
    #[arg(long, requires = "intrinsics")]
    mesh: Option<PathBuf>,
    /// Camera intrinsics for --mesh.
    #[arg(long, requires = "mesh")]
    intrinsics: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Build a blinded pairwise schedule from annotations.
    Schedule(ScheduleArgs),
    /// Generate random-baseline annotation rows for a directory of images.
    Random(RandomArgs),
    /// Serve the judgment API.
    Serve(ServeArgs),
    /// Summarize a judgment log.
    Report(ReportArgs),
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override a comparison's size, e.g. `octopus-vs-natural=100`.
    #[arg(long = "pairs", value_name = "COMPARISON=N", value_parser = parse_size)]
    pairs: Vec<(Comparison, usize)>,
}

#[derive(Args)]
struct RandomArgs {
    /// Directory of PNG scene images.
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated objects; defaults to the study's object list.
    #[arg(long, value_delimiter = ',')]
    objects: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Append-only judgment log; created if missing.
    #[arg(long)]
    log: PathBuf,
    /// Directory holding `<image_id>.png`.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, env = "OCTO_PORT", default_value_t = service::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(Comparison, usize), String> {
    let (c, n) = s.split_once('=').ok_or("expected COMPARISON=N")?;
    let comparison = c.parse::<Comparison>().map_err(|e| e.to_string())?;
    let n = n.parse().map_err(|_| format!("bad count {n:?}"))?;
    Ok((comparison, n))
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

const EXIT_BAD_PATH: u8 = 2;
const EXIT_BACKEND: u8 = 3;

fn bad_path(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_BAD_PATH,
        error: e.into(),
    }
}

fn bundle(e: BundleError) -> Failure {
    if e.is_io() {
        bad_path(e)
    } else {
        e.into()
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(bad_path)
}

fn cmd_place(args: PlaceArgs) -> Result<(), Failure> {
    let config = PipelineConfig::load(&args.config).map_err(|e| match e {
        ConfigError::Io { .. } => bad_path(e),
        other => other.into(),
    })?;
    let backends = config.build_backends().map_err(bad_path)?;
    let image = load_scene_image(&args.image).map_err(bundle)?;
    let depth = args.scene.as_deref().map(load_depth_scene).transpose().map_err(bundle)?;
    let mesh = match (&args.mesh, &args.intrinsics) {
        (Some(m), Some(i)) => Some((load_obj(m).map_err(bundle)?, load_intrinsics(i).map_err(bundle)?)),
        _ => None,
    };
    if let Some(d) = &depth {
        if (d.width(), d.height()) != (image.width(), image.height()) {
            return Err(anyhow!(
                "scene depth is {}x{} but the image is {}x{}",
                d.width(),
                d.height(),
                image.width(),
                image.height()
            )
            .into());
        }
    }

    let mut trace = match place(&backends, &image, &args.object, &config.options) {
        Ok(t) => t,
        Err(e) => {
            if let Some(path) = &args.trace {
                write_file(path, &serde_json::to_string_pretty(&e.trace)?)?;
            }
            let code = if e.is_backend() { EXIT_BACKEND } else { 1 };
            return Err(Failure { code, error: e.into() });
        }
    };
    let model = match (&depth, &mesh) {
        (Some(d), _) => Some(SceneModel::Depth(d)),
        (None, Some((mesh, intrinsics))) => Some(SceneModel::Mesh { mesh, intrinsics }),
        _ => None,
    };
    let point: Option<Result<Placement3D, _>> = model.map(|m| place3d(m, &trace.placement));
    trace.placement_3d = point.as_ref().and_then(|p| p.as_ref().ok().copied());
    if let Some(path) = &args.trace {
        write_file(path, &trace.to_json())?;
    }
    if let Some(Err(e)) = point {
        return Err(anyhow!(e).context("3D placement failed").into());
    }
    let mut out = json!({ "placement_2d": trace.placement });
    if let Some(p) = trace.placement_3d {
        out["placement_3d"] = json!(p);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_schedule(args: ScheduleArgs) -> Result<(), Failure> {
    let records = read_annotations(&args.annotations).map_err(|e| if e.is_io() { bad_path(e) } else { e.into() })?;
    let counts = usable_pairs(&records)?;
    let pairs = usable_set(&records)?;
    let sizes = args
        .pairs
        .iter()
        .fold(ScheduleSizes::default(), |s, &(c, n)| s.with(c, n));
    let tasks = build_schedule(&pairs, &sizes, args.seed)?;
    write_schedule(&args.out, &tasks)?;
    let per_method: Vec<String> = counts.iter().map(|(m, n)| format!("{m}={n}")).collect();
    eprintln!(
        "{} usable pairs ({}); wrote {} tasks to {}",
        pairs.len(),
        per_method.join(", "),
        tasks.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_random(args: RandomArgs) -> Result<(), Failure> {
    let mut images: Vec<PathBuf> = std::fs::read_dir(&args.images)
        .with_context(|| format!("cannot list {}", args.images.display()))
        .map_err(bad_path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    images.sort();
    let objects = if args.objects.is_empty() { default_object_list() } else { args.objects };
    let unique: BTreeSet<&String> = objects.iter().collect();
    if unique.len() != objects.len() {
        return Err(anyhow!("objects must be distinct").into());
    }
    let mut records: Vec<PlacementRecord> = Vec::new();
    for path in &images {
        let image = load_scene_image(path).map_err(bundle)?;
        for object in &objects {
            let seed = args.seed.wrapping_add(records.len() as u64);
            records.push(random_placement(&image, object, seed));
        }
    }
    write_annotations(&args.out, &records)?;
    eprintln!("wrote {} random placements to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<(), Failure> {
    let service = Arc::new(StudyService::open(&args.schedule, &args.log, &args.images)?);
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = service::bind(addr).await?;
        eprintln!(
            "serving {} tasks on http://{}",
            service.task_count(),
            listener.local_addr()?
        );
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        service::serve(listener, service, shutdown).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let path_err = |e: octoplace::study::StudyError| if e.is_io() { bad_path(e) } else { e.into() };
    let tasks = read_schedule(&args.schedule).map_err(path_err)?;
    let records = read_log(&args.log).map_err(path_err)?;
    let report = Report::build(&records, &tasks)?;
    let aggregate = match report.at_least_as_natural {
        Some(v) => format!("at_least_as_natural: {v:?}"),
        None => "at_least_as_natural: n/a (no octopus-vs-natural judgments)".to_string(),
    };
    match &args.out {
        Some(path) => {
            write_file(path, &report.to_csv())?;
            println!("{aggregate}");
        }
        None => {
            print!("{}", report.to_csv());
            eprintln!("{aggregate}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Place(args) => cmd_place(args),
        Command::Eval(EvalCommand::Schedule(args)) => cmd_schedule(args),
        Command::Eval(EvalCommand::Random(args)) => cmd_random(args),
        Command::Eval(EvalCommand::Serve(args)) => cmd_serve(args),
        Command::Eval(EvalCommand::Report(args)) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
