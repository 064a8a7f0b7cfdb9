use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tokio::sync::oneshot;

use scenepaint_client::Client;
use scenepaint_core::io::{build_scene, export_mesh, load_project, save_project, Project, SceneSpec};
use scenepaint_core::pipeline::{EditCommand, PipelineConfig};
use scenepaint_core::room::generate_empty_room;
use scenepaint_core::scene::{CeilingStyle, Opening, RoomSpec};
use scenepaint_service::api::{JobPhase, TextureRequest};
use scenepaint_service::{bind, serve, Service};

#[derive(Parser)]
#[command(name = "scenepaint", version, about = "Texture indoor scenes through the scenepaint service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an empty room mesh as PLY.
    GenerateRoom(GenerateRoom),
    /// Create a project directory from a scene description.
    Init(Init),
    /// Texture the scene.
    Texture(Texture),
    /// Apply an edit command read from a JSON file.
    Edit(Edit),
    /// Export the point cloud and panoramas.
    Export(Export),
    /// Serve a project over HTTP.
    Serve(Serve),
}

#[derive(Args)]
struct GenerateRoom {
    #[arg(long)]
    width: f64,
    #[arg(long)]
    depth: f64,
    #[arg(long)]
    height: f64,
    #[arg(long)]
    baseboard: bool,
    /// wall:offset:width:height, walls numbered 0-3 from -y counterclockwise.
    #[arg(long, value_parser = parse_door)]
    door: Vec<Opening>,
    /// wall:offset:width:height:sill
    #[arg(long, value_parser = parse_window)]
    window: Vec<Opening>,
    /// flat, star-inset, diamond-inset or coffered.
    #[arg(long, default_value = "flat")]
    ceiling: CeilingStyle,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct Init {
    /// Scene description (JSON); mesh paths resolve against its directory.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    project: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pipeline settings (JSON); omitted fields keep their defaults.
    #[arg(long)]
    pipeline: Option<PathBuf>,
    /// Replace an existing project.
    #[arg(long)]
    force: bool,
}

/// A running service, or a project directory served in-process.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    #[arg(long)]
    server: Option<String>,
    #[arg(long)]
    project: Option<PathBuf>,
}

#[derive(Args)]
struct Texture {
    #[command(flatten)]
    target: Target,
    /// `mock` or the backend base URL.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from the stored checkpoint.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct Edit {
    #[command(flatten)]
    target: Target,
    /// JSON edit command.
    #[arg(long)]
    command: PathBuf,
    /// Fail unless the scene is still at this revision.
    #[arg(long)]
    if_revision: Option<u64>,
}

#[derive(Args)]
struct Export {
    #[command(flatten)]
    target: Target,
    #[arg(long)]
    ply: Option<PathBuf>,
    /// Limit the PLY to one owner (`room` or an object id).
    #[arg(long, requires = "ply")]
    owner: Option<String>,
    #[arg(long)]
    panorama: Option<PathBuf>,
    #[arg(long)]
    empty_panorama: Option<PathBuf>,
}

#[derive(Args)]
struct Serve {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long)]
    project: PathBuf,
}

fn opening(s: &str, fields: usize) -> Result<Opening, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != fields {
        return Err(format!("expected {fields} colon-separated fields"));
    }
    let wall = parts[0].parse::<u8>().map_err(|e| format!("wall: {e}"))?;
    let nums = parts[1..]
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| format!("{p}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Opening {
        wall,
        offset: nums[0],
        width: nums[1],
        height: nums[2],
        sill: nums.get(3).copied().unwrap_or(0.0),
    })
}

fn parse_door(s: &str) -> Result<Opening, String> {
    opening(s, 4)
}

fn parse_window(s: &str) -> Result<Opening, String> {
    opening(s, 5)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A client plus, for project targets, the in-process server behind it.
struct Session {
    client: Client,
    local: Option<(oneshot::Sender<()>, tokio::task::JoinHandle<std::io::Result<()>>)>,
}

impl Session {
    async fn open(target: &Target) -> Result<Session> {
        if let Some(url) = &target.server {
            return Ok(Session {
                client: Client::new(url.clone()),
                local: None,
            });
        }
        let dir = target.project.as_ref().expect("clap requires a target");
        let project = load_project(dir).with_context(|| format!("loading project {}", dir.display()))?;
        let service = Service::start(project, Some(dir.clone()));
        let listener = bind("127.0.0.1:0".parse()?).await?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel();
        let task = tokio::spawn(serve(service, listener, async {
            let _ = stopped.await;
        }));
        Ok(Session {
            client: Client::new(format!("http://{addr}")),
            local: Some((stop, task)),
        })
    }

    async fn close(self) -> Result<()> {
        if let Some((stop, task)) = self.local {
            let _ = stop.send(());
            task.await??;
        }
        Ok(())
    }
}

async fn texture(args: Texture) -> Result<()> {
    let session = Session::open(&args.target).await?;
    let client = &session.client;
    let request = TextureRequest {
        seed: args.seed,
        resume: args.resume,
        backend: args.backend,
    };
    let job = client.texture(&request).await?.job_id;
    let status = client
        .wait(job, Duration::from_millis(250), |s| {
            let at = match (&s.object_id, s.view_index) {
                (Some(o), Some(v)) => format!(" {o} view {v}"),
                (Some(o), None) => format!(" {o}"),
                _ => String::new(),
            };
            eprintln!("[{:5.1}%] {:?}{at}", s.percent, s.phase);
        })
        .await?;
    if status.phase == JobPhase::Failed {
        session.close().await?;
        bail!("texturing failed: {}", status.error.unwrap_or_default());
    }
    let scene = client.scene().await?;
    println!("revision {} with {} points", scene.revision, scene.total_points);
    for o in &scene.objects {
        println!("  {:<16} {:>10} points", o.id, o.points);
    }
    session.close().await
}

async fn edit(args: Edit) -> Result<()> {
    let command: EditCommand = read_json(&args.command)?;
    let session = Session::open(&args.target).await?;
    let done = session.client.edit(&command, args.if_revision).await;
    session.close().await?;
    let done = done?;
    println!(
        "revision {}: removed {} points, added {}{}",
        done.revision,
        done.outcome.removed,
        done.outcome.added,
        if done.outcome.noop { " (nothing changed)" } else { "" }
    );
    Ok(())
}

async fn export(args: Export) -> Result<()> {
    if args.ply.is_none() && args.panorama.is_none() && args.empty_panorama.is_none() {
        bail!("nothing to export; pass --ply, --panorama or --empty-panorama");
    }
    let session = Session::open(&args.target).await?;
    let client = &session.client;
    let outcome = async {
        if let Some(path) = &args.ply {
            let bytes = client.download_cloud(path, args.owner.as_deref()).await?;
            println!("wrote {} ({bytes} bytes)", path.display());
        }
        for (path, empty) in [(&args.panorama, false), (&args.empty_panorama, true)] {
            if let Some(path) = path {
                let png = client.panorama(empty).await?;
                std::fs::write(path, png).with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
        }
        anyhow::Ok(())
    }
    .await;
    session.close().await?;
    outcome
}

fn generate_room(args: GenerateRoom) -> Result<()> {
    let mut room = RoomSpec::new(args.width, args.depth, args.height);
    room.baseboard = args.baseboard;
    room.doors = args.door;
    room.windows = args.window;
    room.ceiling = args.ceiling;
    let mesh = generate_empty_room(&room)?;
    export_mesh(&args.out, &mesh)?;
    println!("wrote {} ({} triangles)", args.out.display(), mesh.triangles().len());
    Ok(())
}

fn init(args: Init) -> Result<()> {
    if args.project.join(scenepaint_core::io::project::PROJECT_FILE).exists() && !args.force {
        bail!("{} already holds a project; pass --force to replace it", args.project.display());
    }
    let spec: SceneSpec = read_json(&args.scene)?;
    let base = args.scene.parent().unwrap_or(Path::new("."));
    let mut project = Project::new(build_scene(&spec, base)?, args.seed);
    if let Some(p) = &args.pipeline {
        project.pipeline = read_json::<PipelineConfig>(p)?;
    }
    save_project(&project, &args.project)?;
    println!(
        "created {} with {} objects",
        args.project.display(),
        project.scene.objects().len()
    );
    Ok(())
}

async fn run_server(args: Serve) -> Result<()> {
    let project = load_project(&args.project).with_context(|| format!("loading project {}", args.project.display()))?;
    let service: Arc<Service> = Service::start(project, Some(args.project.clone()));
    let listener = bind(args.bind).await?;
    println!("listening on http://{}", listener.local_addr()?);
    serve(service, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::GenerateRoom(a) => generate_room(a),
        Command::Init(a) => init(a),
        other => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                match other {
                    Command::Texture(a) => texture(a).await,
                    Command::Edit(a) => edit(a).await,
                    Command::Export(a) => export(a).await,
                    Command::Serve(a) => run_server(a).await,
                    Command::GenerateRoom(_) | Command::Init(_) => unreachable!(),
                }
            })
        }
    }
}
