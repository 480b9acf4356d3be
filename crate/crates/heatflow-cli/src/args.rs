//! Flag parsing shared by all subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

#[derive(Parser, Debug)]
#[command(name = "heatflow", version, about = "Zeros of heat-evolved polynomial powers and their limit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Spec file: {"lambdas": [[re, im], ...], "alphas": [...], "n": ...}
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Heat time as "re,im", "mag@deg" or a real number
    #[arg(long, global = true, default_value = "1,0", value_parser = parse_complex, allow_hyphen_values = true)]
    pub t: Complex64,
    /// Replace the power n of the spec
    #[arg(long = "n-override", visible_alias = "n", global = true)]
    pub n_override: Option<u32>,
    /// MPFR precision in bits (≥ 64); defaults to HEATFLOW_PRECISION or max(128, 2.5N)
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(64..))]
    pub precision: Option<u32>,
    /// Flood-fill grid resolution (≥ 64)
    #[arg(long, global = true, default_value_t = 128, value_parser = clap::value_parser!(u32).range(64..))]
    pub resolution: u32,
    /// Region "cx,cy,r"
    #[arg(long, global = true, value_parser = parse_region, allow_hyphen_values = true)]
    pub region: Option<(Complex64, f64)>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Output formats
    #[arg(long, global = true, value_delimiter = ',', default_value = "json,csv,svg")]
    pub format: Vec<Format>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Small,
    Large,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Coefficients of P_t^n
    Evolve,
    /// Zeros of P_t^n
    Zeros,
    /// Saddle fan and relevance certificate at z
    Saddles {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Branch locus
    BranchPoints,
    /// Traced support with densities
    Support {
        /// Overlay the zeros at the spec's n
        #[arg(long)]
        with_zeros: bool,
        /// Relevance-field lattice size for extra seeds (0 disables)
        #[arg(long, default_value_t = 0)]
        field_cells: usize,
    },
    /// Density of the limit measure at the support point nearest z
    Density {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Logarithmic potential U_t(z)
    Potential {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Stieltjes transform m_t(z)
    Stieltjes {
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Complex64,
    },
    /// Zero trajectories from t0 to Re t
    Trajectories {
        /// Start time; defaults to 1e-3·δ²
        #[arg(long)]
        t0: Option<f64>,
    },
    /// Small- or large-time asymptotic checks
    Asymptotics {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Residual suites
    Verify {
        /// Run the full fixed suite in addition to spec checks
        #[arg(long)]
        all: bool,
    },
}

/// "re,im", "mag@deg" or a plain real.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("invalid number {x:?}: {e}"));
    let z = if let Some((m, d)) = s.split_once('@') {
        Complex64::from_polar(num(m)?, num(d)?.to_radians())
    } else if let Some((a, b)) = s.split_once(',') {
        Complex64::new(num(a)?, num(b)?)
    } else {
        Complex64::new(num(s)?, 0.0)
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(format!("non-finite value {s:?}"))
    }
}

/// "cx,cy,r" with r > 0.
pub fn parse_region(s: &str) -> Result<(Complex64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("region needs cx,cy,r, got {s:?}"));
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|e| format!("invalid number {p:?}: {e}"))).collect::<Result<_, _>>()?;
    if !(v[2] > 0.0) || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("region radius must be positive and finite, got {s:?}"));
    }
    Ok((Complex64::new(v[0], v[1]), v[2]))
}
