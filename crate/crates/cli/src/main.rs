mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::scenario::{parse_grid, Loaded, Overrides};

#[derive(Parser)]
#[command(name = "drillrig", version, about = "Drill-rotation diagnostics and planar Cosserat shell relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental forms, normals and mean curvature per node.
    Geometry(Common),
    /// Integrability gate and reconstruction of m from Q∇y0.
    Compat(Common),
    /// Drill residual, classification, obstruction and rigidity reports.
    DrillVerify(Common),
    /// Catenoid-to-helicoid associate family checks.
    Associate(Common),
    /// Shell energy relaxation.
    Minimize(Common),
    /// Drill energy under uniform superposed drill and its spring constant.
    ProbeSpring(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output` or `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Node counts, e.g. 41x41.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numeric(String),
    Stall(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Validation(_) => 2,
            Self::Numeric(_) => 3,
            Self::Stall(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "invalid input: {m}"),
            Self::Numeric(m) => write!(f, "numerical failure: {m}"),
            Self::Stall(m) => write!(f, "optimizer stalled: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<drillrig::Error> for Failure {
    fn from(e: drillrig::Error) -> Self {
        use drillrig::Error as E;
        match e {
            E::NonUnitAxis { .. }
            | E::OutsideDomain { .. }
            | E::UnknownKind(_)
            | E::InvalidSurface(_)
            | E::GridTooSmall { .. }
            | E::GridMismatch
            | E::DomainMismatch
            | E::InvalidMask(_)
            | E::InvalidParams(_)
            | E::Parse(_)
            | E::Format(_) => Self::Validation(e.to_string()),
            E::NotSkew { .. }
            | E::AxisMismatch { .. }
            | E::NotRotation { .. }
            | E::Singular { .. }
            | E::Degenerate { .. }
            | E::Incompatible { .. }
            | E::NonIsometric { .. }
            | E::NormalMismatch { .. }
            | E::FrameDegenerate { .. } => Self::Numeric(e.to_string()),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DRILLRIG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Validation(format!("DRILLRIG_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Validation(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    let (name, common, cmd): (&'static str, Common, fn(&Ctx) -> Result<(), Failure>) = match cli.command {
        Command::Geometry(c) => ("geometry", c, commands::geometry),
        Command::Compat(c) => ("compat", c, commands::compat),
        Command::DrillVerify(c) => ("drill-verify", c, commands::drill_verify),
        Command::Associate(c) => ("associate", c, commands::associate),
        Command::Minimize(c) => ("minimize", c, commands::minimize_cmd),
        Command::ProbeSpring(c) => ("probe-spring", c, commands::probe_spring),
    };
    let loaded = Loaded::read(
        &common.scenario,
        Overrides {
            grid: common.grid,
            tol: common.tol,
            seed: common.seed,
        },
    )?;
    let out = common
        .out
        .or_else(|| loaded.scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cmd(&Ctx {
        loaded: &loaded,
        out,
        command: name,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drillrig: {e}");
            ExitCode::from(e.code())
        }
    }
}
