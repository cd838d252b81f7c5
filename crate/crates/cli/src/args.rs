use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dpm", version, about = "Dynamic point map toolkit: generate, solve, evaluate")]
pub struct Cli {
    /// Worker threads; falls back to DPM_THREADS, then to all cores.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic ground-truth archives.
    Generate(GenerateArgs),
    /// Add seeded Gaussian noise to every valid point and drop ground truth.
    Perturb(PerturbArgs),
    /// Check an archive's structure and NaN policy.
    Validate {
        archive: PathBuf,
    },
    /// Solve a downstream task from an archive.
    Solve {
        #[command(subcommand)]
        task: SolveTask,
    },
    /// Score a prediction archive against a ground-truth archive.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<String>,
    /// TOML scene description.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Scene seed; defaults to 0 for presets and to the spec's own seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of pairs; pair i uses seed + i and gets a `_NNN` suffix.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=10000))]
    pub pairs: u32,
    /// Omit the input-swapped quad.
    #[arg(long)]
    pub no_swapped: bool,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    pub input: PathBuf,
    /// Noise standard deviation in scene units.
    #[arg(long, conflicts_with = "sigma_frac", required_unless_present = "sigma_frac")]
    pub sigma: Option<f64>,
    /// Noise standard deviation as a fraction of the median point norm of P11.
    #[arg(long)]
    pub sigma_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    Gt,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Joint,
    PerMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignArg {
    None,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlowArg {
    #[value(name = "SF-F")]
    SfF,
    #[value(name = "SF-B")]
    SfB,
    #[value(name = "OF-F")]
    OfF,
    #[value(name = "OF-B")]
    OfB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlyArg {
    Ascii,
    Binary,
}

/// A motion threshold: `auto` or a non-negative number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eps {
    Auto,
    Value(f64),
}

pub fn parse_eps(s: &str) -> Result<Eps, String> {
    if s == "auto" {
        return Ok(Eps::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(Eps::Value(v)),
        _ => Err(format!("expected `auto` or a non-negative number, got `{s}`")),
    }
}

#[derive(Debug, Subcommand)]
pub enum SolveTask {
    /// Focal length of image 1 from P11.
    Focal {
        archive: PathBuf,
        /// Principal point x; defaults to the ground-truth camera or the image centre.
        #[arg(long, requires = "cy")]
        cx: Option<f64>,
        #[arg(long, requires = "cx")]
        cy: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative camera motion from static structure; needs the swapped quad.
    Camera {
        archive: PathBuf,
        #[arg(long, value_enum, default_value_t = MaskArg::Gt)]
        mask: MaskArg,
        /// Threshold for `--mask auto`.
        #[arg(long, value_parser = parse_eps, default_value = "auto")]
        eps: Eps,
        /// Estimate a similarity instead of a rigid motion. Defaults to true
        /// for predicted archives and false for ground-truth ones.
        #[arg(long, value_name = "BOOL")]
        with_scale: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rigid motion of objects between the two timestamps.
    Object {
        archive: PathBuf,
        /// Object id; all objects seen in image 1 when omitted.
        #[arg(long)]
        id: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Motion masks of both images.
    Segment {
        archive: PathBuf,
        #[arg(long, value_parser = parse_eps, default_value = "auto")]
        eps: Eps,
        /// Archive whose dynamic masks the prediction is scored against; the
        /// input's own masks are used when it carries ground truth.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Copy of the archive with the predicted masks as its dynamic masks.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest-neighbour correspondences from image 1 to image 2.
    Match {
        archive: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Object flows, and scene flows with `--sf`.
    Flow {
        archive: PathBuf,
        #[arg(long)]
        sf: bool,
        /// Flow to export as PLY arrows.
        #[arg(long, value_enum, default_value_t = FlowArg::OfF)]
        kind: FlowArg,
        #[arg(long, value_enum, default_value_t = PlyArg::Ascii)]
        format: PlyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both images' points at one timestamp as a single cloud.
    Fuse {
        archive: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        time: u8,
        #[arg(long, value_enum, default_value_t = PlyArg::Ascii)]
        format: PlyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    Pointmap,
    Flow,
    Pose,
    Depth,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub kind: EvalKind,
    pub pred: PathBuf,
    pub gt: PathBuf,
    /// Normalisation of the relative point error.
    #[arg(long, value_enum, default_value_t = NormArg::PerMap)]
    pub norm: NormArg,
    #[arg(long, value_enum, default_value_t = AlignArg::None)]
    pub align: AlignArg,
    /// Compute predicted flows from the quad even when the archive stores flows.
    #[arg(long)]
    pub recompute: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
