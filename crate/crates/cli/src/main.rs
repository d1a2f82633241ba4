use axbq_cli::commands::{
    self, ConvergenceArgs, IdentityArgs, InequalityArgs, LpAnalyzeArgs, ProfileKind,
};
use axbq_cli::EXIT_CONFIG;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "axbq",
    version,
    about = "Axisymmetric Boussinesq laboratory: simulate, verify, analyze"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation described by a key-value config file
    Simulate {
        /// Path to the config (see reference.cfg at the repository root)
        config: PathBuf,
    },
    /// Cross-check u^r/r between the periodic-box identity and the meridian
    /// streamfunction route
    VerifyIdentity {
        /// Box modes per axis (power of two)
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Box side length
        #[arg(long, default_value_t = 16.0)]
        box_size: f64,
        /// Ring width
        #[arg(long, default_value_t = 1.2)]
        sigma: f64,
        /// Radial nodes of the meridian solve (default 32·n)
        #[arg(long)]
        meridian_nr: Option<usize>,
        /// Pass threshold on the relative L2 gap between the routes
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Ring profile
        #[arg(long, value_enum, default_value_t = ProfileArg::MomentFree)]
        profile: ProfileArg,
    },
    /// Sample the functional-inequality harnesses at n and 2n and demand
    /// finite, refinement-stable constants
    VerifyInequalities {
        /// Coarse box modes per axis (doubled for the stability gate)
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Random fields per family
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// `all`, `velocity`, or one family label
        #[arg(long, default_value = "all")]
        which: String,
        /// Directory for the per-sample ratio CSVs
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the dyadic bank: partition, orthogonality, Bernstein bands,
    /// heat decay, interpolation
    LpAnalyze {
        /// Box modes per axis (power of two)
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        /// Random fields for the interpolation sweep
        #[arg(long, default_value_t = 100)]
        fields: usize,
    },
    /// Run a convergence study and fit the observed order
    Convergence {
        /// Study name (`mms` is the only study)
        #[arg(default_value = "mms")]
        study: String,
        /// Square grid resolutions, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![32usize, 64, 128])]
        resolutions: Vec<usize>,
        /// Required observed order on the finest pair
        #[arg(long, default_value_t = 1.9)]
        min_order: f64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Cnab2)]
        scheme: SchemeArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    /// Moment-cancelled ring with a closed-form velocity (convergent check)
    MomentFree,
    /// Plain Gaussian ring (periodic-tail plateau; kept as a measured record)
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cnab2,
    Rk3,
}

fn main() {
    match commands::thread_cap() {
        Ok(None) => {}
        Ok(Some(cap)) => eprintln!("thread cap {cap} accepted (kernels are single-threaded)"),
        Err(why) => {
            eprintln!("{why}");
            std::process::exit(EXIT_CONFIG);
        }
    }

    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Simulate { config } => commands::cmd_simulate(&config),
        Cmd::VerifyIdentity {
            n,
            box_size,
            sigma,
            meridian_nr,
            tol,
            profile,
        } => commands::cmd_verify_identity(&IdentityArgs {
            n,
            box_size,
            sigma,
            meridian_nr,
            tol,
            profile: match profile {
                ProfileArg::MomentFree => ProfileKind::MomentFree,
                ProfileArg::Gaussian => ProfileKind::Gaussian,
            },
        }),
        Cmd::VerifyInequalities {
            n,
            samples,
            seed,
            which,
            out,
        } => commands::cmd_verify_inequalities(&InequalityArgs {
            n,
            samples,
            seed,
            which,
            out_dir: out,
        }),
        Cmd::LpAnalyze { n, seed, fields } => {
            commands::cmd_lp_analyze(&LpAnalyzeArgs { n, seed, fields })
        }
        Cmd::Convergence {
            study,
            resolutions,
            min_order,
            scheme,
        } => commands::cmd_convergence(&ConvergenceArgs {
            study,
            resolutions,
            min_order,
            scheme: match scheme {
                SchemeArg::Cnab2 => axbq::solver::Scheme::Cnab2,
                SchemeArg::Rk3 => axbq::solver::Scheme::Rk3Imex,
            },
        }),
    };
    std::process::exit(code);
}
