use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigenorient::orientation::ORTHONORMAL_TOL;
use eigenorient::synth::ReflectionParity;
use eigenorient::{Execution, Method};

use crate::error::{invalid, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "eigenorient",
    version,
    about = "Orient, stabilize and classify evolving eigensystems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orient every snapshot and write bases, angles and reflections.
    Orient(OrientArgs),
    /// Filter oriented bases over time; optionally zero the noise-mode angles.
    Stabilize(StabilizeArgs),
    /// Split each spectrum into informative and noise modes.
    Classify(ClassifyArgs),
    /// Rebuild correlation matrices and report their dispersion.
    Corr(CorrArgs),
    /// Write a deterministic synthetic fixture.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Arcsin,
    Arctan2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Arcsin => Method::Arcsin,
            MethodArg::Arctan2 => Method::Arctan2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParityArg {
    Even,
    Odd,
}

impl From<ParityArg> for ReflectionParity {
    fn from(p: ParityArg) -> Self {
        match p {
            ParityArg::Even => ReflectionParity::Even,
            ParityArg::Odd => ReflectionParity::Odd,
        }
    }
}

/// Where snapshots come from and where results go.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Series directory (with manifest.json) or a records x features panel CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
    /// Rolling window length in records, for panel input.
    #[arg(long)]
    pub window: Option<usize>,
    /// Records between successive windows.
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    /// Orthonormality tolerance for declared eigensystems.
    #[arg(long, default_value_t = ORTHONORMAL_TOL)]
    pub orthonormal_tol: f64,
    /// Process snapshots on one thread.
    #[arg(long)]
    pub sequential: bool,
}

impl InputArgs {
    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.window == Some(0) {
            return invalid("--window must be positive");
        }
        if self.step == 0 {
            return invalid("--step must be positive");
        }
        if !(self.orthonormal_tol > 0.0 && self.orthonormal_tol.is_finite()) {
            return invalid("--orthonormal-tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct OrientationArgs {
    #[arg(long, value_enum, default_value = "arctan2")]
    pub method: MethodArg,
    /// Force each first eigenvector into the first orthant.
    #[arg(long)]
    pub first_orthant: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OrientArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub orientation: OrientationArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StabilizeArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub orientation: OrientationArgs,
    /// Filter weights, newest sample first; normalized to unit sum.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, required = true)]
    pub kernel: Vec<f64>,
    /// Keep the angles of this many leading modes and zero the rest.
    #[arg(long)]
    pub informative: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub io: InputArgs,
    /// Records behind each spectrum; defaults to the manifest or window length.
    #[arg(long)]
    pub records: Option<usize>,
    /// Scale applied to the noise edge before comparing.
    #[arg(long, default_value_t = 1.0)]
    pub edge_multiplier: f64,
    /// Write this many density samples of the final noise model per snapshot.
    #[arg(long)]
    pub density_samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[command(flatten)]
    pub orientation: OrientationArgs,
    /// Informative modes excluded from shrinkage.
    #[arg(long)]
    pub informative: Option<usize>,
    /// Shrinkage weight on the empirical noise block.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Series to compare dispersion against, matched by timestamp.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 7)]
    pub dim: usize,
    /// Modes whose first angle wobbles around a fixed direction.
    #[arg(long, default_value_t = 3)]
    pub directed: usize,
    /// Standard deviation of the wobble, radians.
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 40)]
    pub length: usize,
    #[arg(long, value_enum, default_value = "even")]
    pub parity: ParityArg,
    /// Also write a spiked Gaussian panel with this many records.
    #[arg(long)]
    pub panel_records: Option<usize>,
    /// Population spike variances of the panel.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub spikes: Vec<f64>,
}

impl Command {
    /// Checks flag consistency before any file is touched.
    pub fn validate(&self) -> CliResult<()> {
        match self {
            Command::Orient(a) => a.io.validate(),
            Command::Stabilize(a) => {
                a.io.validate()?;
                if a.kernel.is_empty() {
                    return invalid("--kernel needs at least one weight");
                }
                if a.kernel.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
                    return invalid("--kernel weights must be positive");
                }
                Ok(())
            }
            Command::Classify(a) => {
                a.io.validate()?;
                if !(a.edge_multiplier > 0.0 && a.edge_multiplier.is_finite()) {
                    return invalid("--edge-multiplier must be positive");
                }
                if matches!(a.density_samples, Some(n) if n < 2) {
                    return invalid("--density-samples must be at least 2");
                }
                Ok(())
            }
            Command::Corr(a) => {
                a.io.validate()?;
                match (a.alpha, a.informative) {
                    (Some(alpha), Some(_)) if !(0.0..=1.0).contains(&alpha) => {
                        invalid("--alpha must lie in [0, 1]")
                    }
                    (Some(_), None) | (None, Some(_)) => {
                        invalid("--alpha and --informative must be given together")
                    }
                    _ => Ok(()),
                }
            }
            Command::Synth(a) => {
                if a.dim < 2 {
                    return invalid("--dim must be at least 2");
                }
                if a.length == 0 {
                    return invalid("--length must be positive");
                }
                if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
                    return invalid("--sigma must be nonnegative");
                }
                if a.panel_records.is_none() && !a.spikes.is_empty() {
                    return invalid("--spikes needs --panel-records");
                }
                Ok(())
            }
        }
    }
}
