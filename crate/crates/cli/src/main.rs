//! `msmf`: mean-shift manifold fitting driver.
//!
//! Subcommands: `fit` (file-driven estimation), `sweep` (sigma/N/seed
//! experiment grids writing result CSVs), `oracle` (population quadrature
//! checks). Exit codes: 0 success, 1 oracle check failed, 2 config or
//! parse error, 3 more than half of the fit queries had empty
//! neighborhoods.

use clap::{Args, Parser, Subcommand, ValueEnum};
use msmf_cli::{
    run_fit, run_oracle, run_sweep, write_sweep_csv, EngineError, FitConfig, OracleConfig,
    SweepConfig,
};
use msmf_core::geometry::AnalyticManifold;
use msmf_core::kernel::Cutoff;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "msmf", about = "Curvature-driven manifold fitting by local mean shift")]
struct Cli {
    /// Worker threads (fallback: MSMF_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate F at test points read from files.
    Fit(FitArgs),
    /// Run a (sigma, N, seed) experiment grid and write a result CSV.
    Sweep(SweepArgs),
    /// Run the population-oracle checks on a circle.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CutoffArg {
    Hard,
    Smooth,
}

fn cutoff_of(c: CutoffArg, rho0: f64) -> Cutoff {
    match c {
        CutoffArg::Hard => Cutoff::Hard,
        CutoffArg::Smooth => Cutoff::SmoothChi { rho0 },
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ManifoldArg {
    Circle,
    Sphere,
    Torus,
    Quartic,
}

#[derive(Args)]
struct FitArgs {
    /// Observed (noisy) point cloud file.
    #[arg(long)]
    cloud: PathBuf,
    /// Test points file.
    #[arg(long)]
    test: PathBuf,
    /// Noise level sigma (the bandwidth is r = c_D sigma).
    #[arg(long)]
    sigma: f64,
    /// Output file for the estimated points.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "hard")]
    cutoff: CutoffArg,
    /// Inner plateau of the smooth cutoff.
    #[arg(long, default_value_t = 0.9)]
    rho0: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    manifold: ManifoldArg,
    /// Circle/sphere radius.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Torus major radius.
    #[arg(long, default_value_t = 2.0)]
    major: f64,
    /// Torus minor radius.
    #[arg(long, default_value_t = 1.0)]
    minor: f64,
    /// Noise level; repeat for a sigma sweep.
    #[arg(long, required = true)]
    sigma: Vec<f64>,
    /// Sample size; repeat for an N sweep.
    #[arg(long, required = true)]
    n: Vec<usize>,
    /// Test points per cell.
    #[arg(long, default_value_t = 100)]
    n0: usize,
    /// Number of independent seeds per (sigma, n) cell.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Base seed for all derived streams.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "hard")]
    cutoff: CutoffArg,
    #[arg(long, default_value_t = 0.9)]
    rho0: f64,
    /// Tube constant C in the sigma_0 bound.
    #[arg(long, default_value_t = 2.0)]
    tube_c: f64,
    /// eps in the sigma_0 bound, as a fraction of the reach.
    #[arg(long, default_value_t = 0.5)]
    tube_eps_frac: f64,
    /// Place test points on the manifold instead of the [sigma/2, 2sigma]
    /// band (bias-law measurements).
    #[arg(long, default_value_t = false)]
    test_on_manifold: bool,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "circle")]
    manifold: ManifoldArg,
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Base quadrature resolution (auto-escalates to resolve sigma).
    #[arg(long, default_value_t = 512)]
    resolution: usize,
}

const EXIT_OK: u8 = 0;
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TOO_MANY_EMPTY: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("MSMF_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("msmf: cannot configure {t} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn fail(e: &EngineError) -> ExitCode {
    eprintln!("msmf: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn cmd_fit(args: FitArgs) -> ExitCode {
    let cfg = FitConfig {
        cloud_path: args.cloud,
        test_path: args.test,
        sigma: args.sigma,
        out_path: args.out,
        cutoff: cutoff_of(args.cutoff, args.rho0),
    };
    match run_fit(&cfg) {
        Ok(s) => {
            println!(
                "fit: processed {} test points (r = {:.6}), wrote {} estimates, {} empty neighborhoods, {} ms",
                s.processed, s.r, s.written, s.empty, s.wall_ms
            );
            if 2 * s.empty > s.processed {
                eprintln!("msmf: more than half of the queries had empty neighborhoods (undersampled cloud)");
                ExitCode::from(EXIT_TOO_MANY_EMPTY)
            } else {
                ExitCode::from(EXIT_OK)
            }
        }
        Err(e) => fail(&e),
    }
}

fn manifold_of(args: &SweepArgs) -> Result<AnalyticManifold, EngineError> {
    let m = match args.manifold {
        ManifoldArg::Circle => AnalyticManifold::circle(args.radius),
        ManifoldArg::Sphere => AnalyticManifold::sphere(args.radius),
        ManifoldArg::Torus => {
            if args.major <= args.minor || args.minor <= 0.0 {
                return Err(EngineError::Config(format!(
                    "torus requires major > minor > 0, got major={} minor={}",
                    args.major, args.minor
                )));
            }
            AnalyticManifold::torus(args.major, args.minor)
        }
        ManifoldArg::Quartic => AnalyticManifold::FermatQuartic,
    };
    Ok(m)
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let manifold = match manifold_of(&args) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    let cfg = SweepConfig {
        manifold,
        sigmas: args.sigma.clone(),
        ns: args.n.clone(),
        n0: args.n0,
        seeds: args.seeds,
        base_seed: args.seed,
        cutoff: cutoff_of(args.cutoff, args.rho0),
        tube_c: args.tube_c,
        eps_frac: args.tube_eps_frac,
        test_on_manifold: args.test_on_manifold,
    };
    match run_sweep(&cfg).and_then(|out| {
        write_sweep_csv(&args.out, &out)?;
        Ok(out)
    }) {
        Ok(out) => {
            println!(
                "sweep: wrote {} rows to {}",
                out.rows.len(),
                args.out.display()
            );
            for c in &out.comments {
                println!("{c}");
            }
            ExitCode::from(EXIT_OK)
        }
        Err(e) => fail(&e),
    }
}

fn cmd_oracle(args: OracleArgs) -> ExitCode {
    if !matches!(args.manifold, ManifoldArg::Circle) {
        return fail(&EngineError::Config(
            "oracle checks run on the circle".into(),
        ));
    }
    let cfg = OracleConfig {
        radius: args.radius,
        sigma: args.sigma,
        resolution: args.resolution,
    };
    match run_oracle(&cfg) {
        Ok(checks) => {
            let mut all_ok = true;
            for c in &checks {
                println!(
                    "oracle {}: {} ({})",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.detail
                );
                all_ok &= c.passed;
            }
            if all_ok {
                ExitCode::from(EXIT_OK)
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) => fail(&e),
    }
}
