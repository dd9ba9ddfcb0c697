use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdadapt::bdf2::{Level, TimeHistory};
use rdadapt::driver::{
    adapt_once, compare_artifacts, estimate_from_artifacts, output::log_to_string, run, write_artifact, NoObserver, RunConfig,
};
use rdadapt::fem::{read_fields, write_fields};
use rdadapt::mesh::{generate_uniform_mesh, read_mesh, write_mesh};
use rdadapt::{Error, Rect};

#[derive(Parser)]
#[command(name = "rdadapt", version, about = "Space-time adaptive P1/BDF2 solver for reaction-diffusion and monodomain problems")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let (mut text, path) = match &self.config {
            Some(p) => (std::fs::read_to_string(p)?, p.clone()),
            None => (String::new(), PathBuf::from("<command line>")),
        };
        for o in &self.overrides {
            if !o.contains('=') {
                return Err(Error::Config(format!("--set expects KEY=VALUE, got `{o}`")));
            }
            text.push('\n');
            text.push_str(o);
        }
        RunConfig::parse(&text, &path)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a uniform triangulation of the configured domain.
    MeshGen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// `x0,y0,x1,y1`.
        #[arg(long)]
        domain: Option<String>,
        /// Output mesh file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured problem.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt a mesh once to stored levels.
    AdaptOnce {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        mesh: PathBuf,
        /// Levels newest first: `u` columns, then as many `w` columns for the
        /// monodomain model.
        #[arg(long)]
        fields: PathBuf,
        /// Step between the stored levels.
        #[arg(long)]
        tau: f64,
        /// Output directory for the adapted mesh and the transferred levels.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the estimators of a run from its artifacts.
    Estimate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a run with a finer reference run (both stored with
    /// `artifact_stride = 1`).
    Compare {
        #[arg(long)]
        coarse: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Comma-separated snapshot times.
        #[arg(long, default_value = "")]
        times: String,
        /// Directory for `comparison.txt`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::InvalidArgument(format!("{what}: cannot parse `{t}`"))))
        .collect()
}

fn mesh_gen(cfg: &ConfigArgs, nx: Option<usize>, ny: Option<usize>, domain: Option<&str>, out: &Path) -> Result<(), Error> {
    let c = cfg.load()?;
    let r = match domain {
        Some(d) => match parse_list(d, "domain")?[..] {
            [x0, y0, x1, y1] => Rect::new(x0, y0, x1, y1),
            _ => return Err(Error::InvalidArgument(format!("domain needs four numbers, got `{d}`"))),
        },
        None => c.domain,
    };
    let mesh = generate_uniform_mesh(nx.unwrap_or(c.mesh_nx), ny.unwrap_or(c.mesh_ny), r)?;
    write_mesh(&mesh, out)?;
    log::info!("{} vertices, {} triangles", mesh.num_vertices(), mesh.num_triangles());
    Ok(())
}

fn run_cmd(cfg: &ConfigArgs, out: &Path) -> Result<(), Error> {
    let c = cfg.load()?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.txt"), c.to_text())?;
    let r = run(&c, Some(out), &mut NoObserver)?;
    log::info!("{}", r.summary.to_text().trim_end());
    Ok(())
}

fn adapt_cmd(cfg: &ConfigArgs, mesh: &Path, fields: &Path, tau: f64, out: &Path) -> Result<(), Error> {
    let c = cfg.load()?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let m = read_mesh(mesh)?;
    let mut cols = read_fields(fields)?;
    let mono = c.physics.is_monodomain();
    if mono && cols.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!("monodomain fields need u and w columns, got {}", cols.len())));
    }
    let k = if mono { cols.len() / 2 } else { cols.len() };
    let ws: Vec<Option<Vec<f64>>> = if mono { cols.split_off(k).into_iter().map(Some).collect() } else { vec![None; k] };
    let mut levels: Vec<Level> =
        cols.into_iter().zip(ws).enumerate().map(|(j, (u, w))| Level { t: (k - 1 - j) as f64 * tau, u, w }).collect();
    let oldest = levels.pop().ok_or(Error::History { needed: 2, available: 0 })?;
    let mut h = TimeHistory::new(oldest, m.generation(), 6);
    while let Some(l) = levels.pop() {
        h.push(l);
    }
    let (new, h) = adapt_once(&c, m, &h)?;
    std::fs::create_dir_all(out)?;
    write_mesh(&new, &out.join("adapted.mesh"))?;
    let mut cols: Vec<&[f64]> = h.levels().map(|l| &l.u[..]).collect();
    if mono {
        cols.extend(h.levels().map(|l| l.w.as_deref().unwrap_or_default()));
    }
    write_fields(&cols, &out.join("adapted.fields"))?;
    write_artifact(out, &new, &h)?;
    log::info!("{} triangles", new.num_triangles());
    Ok(())
}

fn estimate_cmd(cfg: &ConfigArgs, out: &Path) -> Result<(), Error> {
    let c = cfg.load()?;
    let r = estimate_from_artifacts(&c, out)?;
    std::fs::write(out.join("estimate.csv"), log_to_string(&r.rows))?;
    println!("checked {} steps, {} mismatched", r.checked, r.mismatched.len());
    if !r.mismatched.is_empty() {
        return Err(Error::Alignment(format!("estimates differ from the log at steps {:?}", r.mismatched)));
    }
    Ok(())
}

fn compare_cmd(coarse: &Path, reference: &Path, times: &str, out: &Path) -> Result<(), Error> {
    let cmp = compare_artifacts(coarse, reference, &parse_list(times, "times")?)?;
    std::fs::create_dir_all(out)?;
    let text = cmp.to_text();
    std::fs::write(out.join("comparison.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" | "invalid-argument" => 2,
        "io" => 3,
        "parse" => 4,
        "stagnation" | "restart-limit" => 5,
        "step-failure" | "solver" => 6,
        "alignment" => 7,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    let result = match &cli.command {
        Command::MeshGen { cfg, nx, ny, domain, out } => mesh_gen(cfg, *nx, *ny, domain.as_deref(), out),
        Command::Run { cfg, out } => run_cmd(cfg, out),
        Command::AdaptOnce { cfg, mesh, fields, tau, out } => adapt_cmd(cfg, mesh, fields, *tau, out),
        Command::Estimate { cfg, out } => estimate_cmd(cfg, out),
        Command::Compare { coarse, reference, times, out } => compare_cmd(coarse, reference, times, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
