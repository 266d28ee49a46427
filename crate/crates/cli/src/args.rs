use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sidemark::bench::CancelMode;
use sidemark::spread::CarrierMode;

/// Side-informed spread-spectrum watermarking with inter-symbol
/// interference cancellation.
///
/// Exit codes: 0 ok, 2 configuration error, 3 infeasible distortion
/// budget, 4 I/O error.
#[derive(Debug, Parser)]
#[command(name = "sidemark", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed a message into a PGM image or a synthetic Gaussian host.
    Embed(EmbedArgs),
    /// Decode a marked (possibly attacked) signal using its sidecar.
    Extract(ExtractArgs),
    /// Attack a marked signal and write a sidecar recording the attack.
    Attack(AttackArgs),
    /// Solve the embedding/attack game and print the parameters.
    Solve(SolveArgs),
    /// Sweep an attack over several levels and write CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    /// Additive white Gaussian noise; --level is the noise power.
    Awgn,
    /// DCT quantization surrogate; --quality in 1..=100 (scale 5000/q below
    /// 50, 200-2q above).
    Jpeg,
    /// Game-optimal scaling plus noise; --level is the weighted distortion.
    Optimal,
}

#[derive(Debug, Args)]
pub struct HostArgs {
    /// Host image (binary PGM).
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Use an i.i.d. Gaussian host with this many samples.
    #[arg(long, value_name = "M")]
    pub synthetic: Option<usize>,
    /// Standard deviation of the synthetic host.
    #[arg(long, default_value_t = 10.0)]
    pub sigma_x: f64,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub host: HostArgs,
    /// Marked output: PGM for images, raw little-endian f64 for synthetic hosts.
    #[arg(long)]
    pub out: PathBuf,
    /// Sidecar path [default: <out>.sidecar].
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Message as hex, first bit most significant [default: random from --seed].
    #[arg(long)]
    pub message_hex: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    /// Code rate; only 1/2 is available.
    #[arg(long, default_value = "1/2")]
    pub rate: String,
    /// Embedding distortion budget.
    #[arg(long, default_value_t = 7.0)]
    pub dxy: f64,
    /// Attack distortion the embedding is designed against.
    #[arg(long, default_value_t = 20.0)]
    pub dxyp: f64,
    /// none | decoder | embedder | both.
    #[arg(long, default_value = "embedder")]
    pub cancel: CancelMode,
    /// dense | orthogonal.
    #[arg(long, default_value = "dense")]
    pub carriers: CarrierMode,
    /// Leave the solved parameters out of the sidecar; extraction then
    /// estimates weights from the received signal and cannot cancel
    /// interference.
    #[arg(long)]
    pub blind: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Sidecar path [default: <input>.sidecar].
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Decoder-side cancellation: none | decoder | embedder | both
    /// [default: as embedded].
    #[arg(long)]
    pub cancel: Option<CancelMode>,
    /// Ignore the solved parameters in the sidecar.
    #[arg(long)]
    pub blind: bool,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Sidecar of the marked signal [default: <input>.sidecar].
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub attack: AttackKind,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub quality: Option<u8>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Sidecar for the attacked signal [default: <out>.sidecar].
    #[arg(long)]
    pub sidecar_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub host: HostArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value = "1/2")]
    pub rate: String,
    #[arg(long, default_value_t = 7.0)]
    pub dxy: f64,
    #[arg(long, default_value_t = 20.0)]
    pub dxyp: f64,
    #[arg(long, default_value = "dense")]
    pub carriers: CarrierMode,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Host; without --input the sweep runs on synthetic Gaussian hosts
    /// (2^16 samples unless --synthetic is given).
    #[command(flatten)]
    pub host: HostArgs,
    #[arg(long, value_enum, default_value = "awgn")]
    pub attack: AttackKind,
    /// Comma-separated attack levels (JPEG: qualities). Synthetic sweeps
    /// default to 0.25·2^j, j = 0..10.
    #[arg(long)]
    pub levels: Option<String>,
    /// Single cancellation mode [default: all four].
    #[arg(long)]
    pub cancel: Option<CancelMode>,
    #[arg(long, default_value = "dense")]
    pub carriers: CarrierMode,
    /// Number of seeds averaged per point.
    #[arg(long, default_value_t = 4)]
    pub seeds: usize,
    /// First seed; seeds are consecutive.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    /// Uniform watermark standard deviation for synthetic sweeps.
    #[arg(long, default_value_t = 2.5)]
    pub sigma_w: f64,
    /// Image sweeps: embedding distortion budget.
    #[arg(long, default_value_t = 7.0)]
    pub dxy: f64,
    /// Image sweeps: attack distortion the embedding is designed against.
    #[arg(long, default_value_t = 20.0)]
    pub dxyp: f64,
    /// Synthetic preset: 512² host, n = 162, k = 64, σ_X = 10, σ_W = 2.5.
    #[arg(long, conflicts_with_all = ["input", "synthetic", "k", "sigma_w"])]
    pub fig4: bool,
    /// CSV output [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
