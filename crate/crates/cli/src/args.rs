//! Argument surface of the `tbg` binary.

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "tbg",
    version,
    about = "Spectral toolkit for magic angles of the chiral twisted-bilayer-graphene model"
)]
pub struct Cli {
    /// Worker threads (default: TBG_THREADS env var, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<String>,

    /// Output format.
    #[arg(long, global = true, default_value = "json")]
    pub format: Format,

    /// Seed for randomized sampling (echoed into the output header).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct PotentialArgs {
    /// Potential preset: `std` or `mu=<float>`.
    #[arg(long, default_value = "std")]
    pub potential: String,

    /// JSON file with {"coeffs": {"1": [re, im], ...}} (overrides --potential).
    #[arg(long)]
    pub potential_file: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct KArgs {
    /// Momentum in dual coordinates `k1,k2` (k = (ω²k₁ − ωk₂)/√3).
    #[arg(long)]
    pub k: Option<String>,

    /// Momentum as a complex number `re,im` (e.g. the probe point k*).
    #[arg(long)]
    pub k_complex: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Resonant/magic set from the compact transfer operator.
    Magic {
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        k: KArgs,
        /// Fourier cutoff N.
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Number of largest-magnitude eigenvalues to convert.
        #[arg(long, default_value_t = 60)]
        count: usize,
    },
    /// Band energies E_j(k, α) along a momentum path.
    Bands {
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        k: KArgs,
        #[arg(long, default_value_t = 5.0)]
        alpha: f64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Number of bands per momentum.
        #[arg(long, default_value_t = 8)]
        count: usize,
        /// Path parameter `t0:t1:steps` along k = t·ω/√3 (used when no --k).
        #[arg(long, default_value = "-0.5:0.5:33")]
        kpath: String,
    },
    /// ln ‖(D(α) − k)⁻¹‖ over an α grid.
    ResolventScan {
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        k: KArgs,
        /// Scan range `lo:hi:step`.
        #[arg(long, default_value = "0:3:0.02")]
        alpha_range: String,
        #[arg(long, default_value_t = 24)]
        n: usize,
    },
    /// Level-set data of k ↦ ‖(D(α) − k)⁻¹‖ on a momentum window.
    Pseudospectrum {
        #[command(flatten)]
        potential: PotentialArgs,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Window `re_lo:re_hi:im_lo:im_hi` in the complex k plane.
        #[arg(long, default_value = "-0.7:0.7:-0.7:0.7")]
        window: String,
        #[arg(long, default_value_t = 24)]
        resolution: usize,
        /// Resolvent-norm threshold marking a point.
        #[arg(long, default_value_t = 1e2)]
        levels: f64,
        #[arg(long, default_value_t = 12)]
        n: usize,
    },
    /// Trace identities of the transfer operator: exact vs truncated.
    TraceCheck {
        #[arg(long, default_value_t = 4)]
        power: u32,
        /// Smaller truncation; the run also evaluates 2N for extrapolation.
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Direct lattice-sum radius for the tr A² cross-check.
        #[arg(long, default_value_t = 2000)]
        radius: i64,
    },
    /// Certified truncation size for a magic angle, optionally re-verified.
    Certify {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        target: usize,
        /// Probe truncation for the resolvent estimate.
        #[arg(long, default_value_t = 16)]
        probe_n: usize,
        /// Re-run the chain at the certified size.
        #[arg(long, default_value_t = false)]
        verify: bool,
    },
    /// Kernel eigenfunction magnitude on a position grid (optionally Bloch-
    /// shifted to momentum k).
    Eigenfunction {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[command(flatten)]
        k: KArgs,
        /// Grid resolution per axis.
        #[arg(long, default_value_t = 60)]
        grid: usize,
    },
    /// E₀(k, α) against the envelope c₀e^{−c₁α}.
    SqueezeCheck {
        #[command(flatten)]
        potential: PotentialArgs,
        #[command(flatten)]
        k: KArgs,
        /// Comma-separated α list.
        #[arg(long, default_value = "2,3,4,5,6")]
        alphas: String,
        #[arg(long, default_value_t = 48)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        c0: f64,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
    },
    /// |Im(V̄^{1/2} ∂_z V)| on a position grid.
    BracketField {
        #[command(flatten)]
        potential: PotentialArgs,
        /// Window `x_lo:x_hi:y_lo:y_hi` in the z plane.
        #[arg(long, default_value = "-4:4:-4:4")]
        window: String,
        #[arg(long, default_value_t = 80)]
        grid: usize,
    },
}
