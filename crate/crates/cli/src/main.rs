mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Optimal transport with sub-Riemannian costs.
#[derive(Debug, Parser)]
#[command(name = "srot", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Sub-Riemannian distance between two points, or a table of distances.
    Distance(DistanceArgs),
    /// Integrate the Hamiltonian flow from an initial state and covector.
    Flow(FlowArgs),
    /// Solve the discrete Kantorovich problem between two measures.
    Transport(TransportArgs),
    /// Displacement interpolation frames and an SVG overlay.
    Interpolate(InterpolateArgs),
    /// Check the maximum principle along an extremal.
    PmpCheck(PmpArgs),
    /// Lie brackets of the frame and the two-step rank at a point.
    Brackets(BracketArgs),
    /// Check the growth and convexity conditions of the running cost.
    ValidateLagrangian(LagrangianArgs),
    /// Re-run the command recorded in a manifest.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Closed form where available, shooting otherwise.
    Auto,
    ClosedForm,
    Shooting,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Directory for artifacts and the manifest.
    #[arg(long, default_value = "srot-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ShootArgs {
    /// Multistart seeds for geodesic shooting.
    #[arg(long, default_value_t = 24)]
    pub starts: usize,
    /// Boundary tolerance for shooting.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Integrator step.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Offset into the deterministic seed sequence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DistanceArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    /// Target point; required unless `--table` is given.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<String>,
    /// Distance table from `--from` over a lattice `lo:hi:n` per axis,
    /// comma separated, e.g. `-1:1:5,-1:1:5`.
    #[arg(long, allow_hyphen_values = true)]
    pub table: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    #[command(flatten)]
    pub shoot: ShootArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FlowArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    /// Initial state.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Initial covector.
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TransportArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    /// Source measure (CSV `x1,...,xn,weight` or JSON).
    #[arg(long)]
    pub mu: PathBuf,
    /// Target measure.
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    #[command(flatten)]
    pub shoot: ShootArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InterpolateArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    /// Source measure; defaults to ten points on a circle of radius 0.8.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    /// Transport everything to a unit mass at this point.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "nu")]
    pub delta_target: Option<String>,
    /// Discrete target measure.
    #[arg(long)]
    pub nu: Option<PathBuf>,
    /// Comma-separated times in [0, 1].
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub times: String,
    /// Potential grid spacing.
    #[arg(long, default_value_t = 1.0 / 128.0)]
    pub grid_h: f64,
    /// Potential grid box `lo1,...,lon,hi1,...,hin`; defaults to the source
    /// support with margin `--grid-margin`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_box: Option<String>,
    #[arg(long, default_value_t = 0.125)]
    pub grid_margin: f64,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    pub method: Method,
    #[command(flatten)]
    pub shoot: ShootArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PmpArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Initial covector of the extremal to check.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "to")]
    pub p: Option<String>,
    /// Shoot to this point and check the resulting extremal instead.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "p")]
    pub to: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Half-width of the control grid for the maximum condition.
    #[arg(long, default_value_t = 4.0)]
    pub grid_radius: f64,
    /// Control grid points per axis.
    #[arg(long, default_value_t = 81)]
    pub grid_points: usize,
    /// Residual tolerance for the pass/fail verdict.
    #[arg(long, default_value_t = 1e-6)]
    pub check_tol: f64,
    #[command(flatten)]
    pub shoot: ShootArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BracketArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Singular-value threshold for the rank.
    #[arg(long, default_value_t = 1e-9)]
    pub rank_tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LagrangianArgs {
    #[arg(long, default_value = "grushin")]
    pub system: String,
    /// Half-width of the state sample cube.
    #[arg(long, default_value_t = 2.0)]
    pub half_width: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

/// A bad command line or input file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<srot::Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(srot::Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = commands::output_dir(&cli.command);
    match commands::execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("error: {err:#}");
            if code == 3 {
                let diagnostic = serde_json::json!({
                    "status": "numerical-failure",
                    "error": format!("{err:#}"),
                    "debug": format!("{:?}", err.root_cause()),
                });
                eprintln!("{diagnostic}");
                if std::fs::create_dir_all(&out).is_ok() {
                    let _ = std::fs::write(out.join("diagnostic.json"), format!("{diagnostic:#}\n"));
                }
            }
            ExitCode::from(code)
        }
    }
}
