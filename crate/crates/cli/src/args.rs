use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmpa::params::{DetuningSign, Scheme};

#[derive(Debug, Parser)]
#[command(
    name = "dmpa",
    version,
    about = "Conditional dynamics of a continuously monitored parametric oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Oscillator and measurement parameters. Rates are in units of gamma unless
/// `--absolute` is set; a config file sits between built-in defaults and
/// explicit flags.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Damping rate (must stay 1 unless --absolute is set)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Parametric drive strength
    #[arg(long)]
    pub chi: Option<f64>,
    /// Detuning; an explicit value wins over --detuning-sign
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Measurement strength
    #[arg(long)]
    pub mu: Option<f64>,
    /// Detection efficiency in [0, 1]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Thermal occupation of the bath
    #[arg(long = "N")]
    pub n_th: Option<f64>,
    /// Spurious backaction occupation leaking into the evaded quadrature
    #[arg(long = "n-bad")]
    pub n_bad: Option<f64>,
    /// Readout scheme
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Put delta on the amplification line: delta = -chi (minus) or +chi
    #[arg(long = "detuning-sign", value_enum)]
    pub detuning_sign: Option<SignArg>,
    /// Read parameters from a key = value file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Interpret rates as raw numbers instead of multiples of gamma
    #[arg(long)]
    pub absolute: bool,
}

/// Output destination; the format is inferred from the file extension when
/// `--format` is absent.
#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output file (.csv, .json, or .svg)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the inferred output format
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Dmpa,
    Bae,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Dmpa => Scheme::Dmpa,
            SchemeArg::Bae => Scheme::Bae,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Minus,
    Plus,
}

impl From<SignArg> for DetuningSign {
    fn from(s: SignArg) -> DetuningSign {
        match s {
            SignArg::Minus => DetuningSign::Minus,
            SignArg::Plus => DetuningSign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepVar {
    Mu,
    Chi,
    Delta,
    Eta,
    NTh,
    NBad,
}

impl SweepVar {
    pub fn key(self) -> &'static str {
        match self {
            SweepVar::Mu => "mu",
            SweepVar::Chi => "chi",
            SweepVar::Delta => "delta",
            SweepVar::Eta => "eta",
            SweepVar::NTh => "n-th",
            SweepVar::NBad => "n-bad",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check parameter ranges and drift stability
    Validate {
        #[command(flatten)]
        params: ParamArgs,
        /// Mechanical quality factor; enables rotating-frame validity warnings
        #[arg(long)]
        quality: Option<f64>,
    },
    /// Stationary conditional covariance and derived scalars
    Steady {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Relaxation horizon for path outputs, in units of 1/gamma
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
    },
    /// One stochastic conditional trajectory
    Trajectory {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise stream index; (seed, stream) fixes the realization
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Duration in units of 1/gamma
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        /// Time step in units of 1/gamma; a stable default is chosen if absent
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Symmetrized spectra of the unconditional stationary state
    Spectrum {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Half-width of the frequency grid, in units of gamma
        #[arg(long, default_value_t = 10.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Measurement rate minimizing the stationary squeezed variance
    #[command(name = "mu-opt")]
    MuOpt {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Resources required per squeezing target, for both readout schemes
    #[command(name = "figure1")]
    Figure1 {
        #[command(flatten)]
        out: OutArgs,
        /// Detection efficiency
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Thermal occupation of the bath
        #[arg(long = "N", default_value_t = 10.0)]
        n_th: f64,
        /// Comma-separated squeezed-variance targets in (0, 0.5)
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
    /// Effective measurement-strength enhancement across monitoring regimes
    #[command(name = "figure2")]
    Figure2 {
        #[command(flatten)]
        out: OutArgs,
        /// Comma-separated drive strengths chi/gamma, one trace each
        #[arg(long = "chi-prime", value_delimiter = ',', default_values_t = vec![1.0, 10.0, 100.0])]
        chi_prime: Vec<f64>,
        /// Lower bound of the snr/chi'^2 grid
        #[arg(long, default_value_t = 1e-6)]
        x_min: f64,
        /// Upper bound of the snr/chi'^2 grid
        #[arg(long, default_value_t = 1e2)]
        x_max: f64,
        #[arg(long, default_value_t = 81)]
        points: usize,
    },
    /// Sweep one parameter and tabulate stationary observables
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Parameter to sweep
        #[arg(long, value_enum)]
        var: SweepVar,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Space the grid logarithmically (bounds must be positive)
        #[arg(long)]
        log: bool,
        /// Keep delta on the amplification line while sweeping chi
        #[arg(long)]
        track_qnd: bool,
    },
}
