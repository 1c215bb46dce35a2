use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "specden", version, about = "Kernel estimation of limiting spectral densities of sample covariance matrices")]
pub struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    /// Cap on worker threads for parallel loops.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file with one table per subcommand; keys are flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw eigenvalues of A_n = (1/n) T^{1/2} X Xᵀ T^{1/2}.
    Simulate(SimulateArgs),
    /// Tabulate the limiting density f_{c,H}.
    Density(DensityArgs),
    /// Evaluate f_n, F_n and their targets on a grid from one eigenvalue file.
    Estimate(EstimateArgs),
    /// Compute the CLT variance σ² of a kernel.
    Sigma2(Sigma2Args),
    /// Leading-order MISE and the optimal bandwidth h*.
    Bandwidth(BandwidthArgs),
    /// Monte Carlo CLT experiment for f_n or F_n.
    Clt(CltArgs),
    /// Scan the contour conditions for (c, H, n, h).
    CheckConditions(ConditionArgs),
    /// Run the kernel admissibility checks.
    CheckKernel(KernelArgs),
    /// Replay a manifest and compare output digests.
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Density(_) => "density",
            Command::Estimate(_) => "estimate",
            Command::Sigma2(_) => "sigma2",
            Command::Bandwidth(_) => "bandwidth",
            Command::Clt(_) => "clt",
            Command::CheckConditions(_) => "check-conditions",
            Command::CheckKernel(_) => "check-kernel",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dist {
    /// Standard normal entries.
    Normal,
    /// Symmetric four-point law with mean 0, variance 1, E x⁴ = 3.
    Rademacher4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Density,
    Cdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// (1/h)∫K((x-y)/h) dF^{c_n,H_n}(y).
    SmoothedTarget,
    /// f_{c_n,H_n}(x).
    LimitDensity,
    /// ∫ 𝒦((x-y)/h) dF^{c_n,H_n}(y).
    SmoothedCdf,
    /// F^{c_n,H_n}(x); reported only.
    LimitCdf,
    /// Replication mean of the estimator; reported only.
    SelfCentered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingArg {
    /// Multiply the deviation by p.
    Dimension,
    /// Multiply the deviation by n.
    SampleSize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Sample size n (columns of X).
    #[arg(long)]
    pub n: usize,
    /// Dimension p (rows of X); must satisfy p < n.
    #[arg(long)]
    pub p: usize,
    /// Law of the i.i.d. entries of X.
    #[arg(long, value_enum, default_value = "normal")]
    pub dist: Dist,
    /// JSON population spectrum H, {"atoms": [{"t": .., "w": ..}]}; default δ₁ (T = I).
    #[arg(long)]
    pub t_spectrum: Option<PathBuf>,
    /// Base seed; replication r uses the stream (seed, r).
    #[arg(long, env = "SPECDEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of independent replications.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Output directory for eig_<r>.csv files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    /// Ratio c = lim p/n, in (0, 1).
    #[arg(long)]
    pub c: f64,
    /// JSON population spectrum H; default δ₁.
    #[arg(long)]
    pub t_spectrum: Option<PathBuf>,
    /// Evaluation grid a:b:step.
    #[arg(long)]
    pub grid: String,
    /// Distance ε above the real axis for f = (1/π) Im m(x + iε); default scales with the support.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output CSV with columns x, f.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// CSV of eigenvalues with a `lambda` column.
    #[arg(long)]
    pub eig: PathBuf,
    /// Kernel K: gaussian, epanechnikov or biweight.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Bandwidth h; overrides --n and --h-exponent.
    #[arg(long)]
    pub h: Option<f64>,
    /// Sample size n; gives h = n^{-α} and, without --c, c = p/n.
    #[arg(long)]
    pub n: Option<usize>,
    /// Exponent α in h = n^{-α}.
    #[arg(long, default_value_t = 0.37)]
    pub h_exponent: f64,
    /// Evaluation grid a:b:step.
    #[arg(long)]
    pub grid: String,
    /// Ratio c of the centring law F^{c,H}; enables smoothed_target and f_limit.
    #[arg(long)]
    pub c: Option<f64>,
    /// JSON population spectrum H of the centring law; default δ₁.
    #[arg(long)]
    pub t_spectrum: Option<PathBuf>,
    /// Density grid points per support interval of the centring law; default resolves h/10.
    #[arg(long)]
    pub law_grid_points: Option<usize>,
    /// Output CSV with columns x, fn, Fn, smoothed_target, f_limit.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct Sigma2Args {
    /// Kernel K: gaussian, epanechnikov or biweight.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Relative tolerance for σ² = -(2/π²)∫₀^∞ ln s ∫K′(u)K′(u-s) du ds.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BandwidthArgs {
    /// Sample size n in L(h) = (c₁h²)² + σ²(b-a)/(n²h²).
    #[arg(long)]
    pub n: usize,
    /// Ratio c, in (0, 1).
    #[arg(long)]
    pub c: f64,
    /// JSON population spectrum H; default δ₁.
    #[arg(long)]
    pub t_spectrum: Option<PathBuf>,
    /// Kernel K: gaussian, epanechnikov or biweight.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Point x₀ for c₁ = ½ f″(x₀) ∫u²K(u)du; default the support midpoint.
    #[arg(long)]
    pub x0: Option<f64>,
    /// Points of the sampled MISE curve on a log grid over [1/n, 1].
    #[arg(long, default_value_t = 2001)]
    pub curve_points: usize,
    /// Output directory for bandwidth.json and mise_curve.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CltArgs {
    /// Statistic: density f_n (scaled by h) or distribution F_n (scaled by 1/√ln(1/h)).
    #[arg(long, value_enum, default_value = "density")]
    pub mode: Mode,
    /// Sample size n.
    #[arg(long)]
    pub n: usize,
    /// Dimension p < n.
    #[arg(long)]
    pub p: usize,
    /// Replications R.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Kernel K: gaussian, epanechnikov or biweight.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Exponent α in h = n^{-α}; default 0.37 (density) or 0.3 (cdf).
    #[arg(long)]
    pub h_exponent: Option<f64>,
    /// Bandwidth h; overrides --h-exponent.
    #[arg(long)]
    pub h: Option<f64>,
    /// Evaluation points x₁,…,x_J, ascending and more than 5h apart.
    #[arg(long, value_delimiter = ',', required = true)]
    pub points: Vec<f64>,
    /// Base seed; replication r uses the stream (seed, r).
    #[arg(long, env = "SPECDEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Law of the i.i.d. entries of X.
    #[arg(long, value_enum, default_value = "normal")]
    pub dist: Dist,
    /// JSON population spectrum H; default δ₁.
    #[arg(long)]
    pub t_spectrum: Option<PathBuf>,
    /// Centring of Z; default smoothed-target (density) or smoothed-cdf (cdf).
    #[arg(long, value_enum)]
    pub target: Option<Target>,
    /// Multiplier of the estimator deviation.
    #[arg(long, value_enum, default_value = "dimension")]
    pub scaling: ScalingArg,
    /// Mean verdict: |mean| within this many standard errors.
    #[arg(long)]
    pub mean_se: Option<f64>,
    /// Lower end of the allowed var / reference-variance window.
    #[arg(long)]
    pub var_ratio_lo: Option<f64>,
    /// Upper end of the allowed var / reference-variance window.
    #[arg(long)]
    pub var_ratio_hi: Option<f64>,
    /// Largest allowed |corr(Z_i, Z_j)| for i ≠ j.
    #[arg(long)]
    pub corr_slack: Option<f64>,
    /// Skewness and excess kurtosis bounds as multiples of √(6/R), √(24/R).
    #[arg(long)]
    pub moment_se: Option<f64>,
    /// Density grid points per support interval of the centring law F^{c_n,H_n}.
    #[arg(long, default_value_t = 4001)]
    pub law_grid_points: usize,
    /// Output JSON result; z_matrix.csv is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ConditionArgs {
    /// Ratio c, in (0, 1).
    #[arg(long)]
    pub c: f64,
    /// JSON population spectrum H; default δ₁.
    #[arg(long)]
    pub t_spectrum: Option<PathBuf>,
    /// Sample size n.
    #[arg(long)]
    pub n: usize,
    /// Bandwidth h; overrides --h-exponent.
    #[arg(long)]
    pub h: Option<f64>,
    /// Exponent α in h = n^{-α}.
    #[arg(long, default_value_t = 0.37)]
    pub h_exponent: f64,
    /// Contour height v = v₀h.
    #[arg(long, default_value_t = 1.0)]
    pub v0: f64,
    /// Sample points per contour side.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// M in the bounds ∫ dH/|1 + t m̲|⁴ < M.
    #[arg(long, default_value_t = specden::clt::DEFAULT_INTEGRAL_BOUND)]
    pub bound: f64,
    /// Gaussian replications estimating E m̲_n; 0 substitutes m̲⁰.
    #[arg(long, default_value_t = 0)]
    pub expectation_reps: usize,
    /// Seed for the E m̲_n replications.
    #[arg(long, env = "SPECDEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output JSON report; contour.csv is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelArgs {
    /// Kernel K: gaussian, epanechnikov or biweight.
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
    /// Quadrature tolerance for the moment integrals.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RerunArgs {
    /// manifest.json written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the replayed outputs.
    #[arg(long)]
    pub out_dir: PathBuf,
}
