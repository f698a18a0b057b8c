use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emth_cli::pipeline::{self, to_json, DarbouxRequest};
use emth_cli::scenario::{self, LatticeSpec, Scenario, StateSpec};
use emth_cli::{default_out_dir, resolve_output, write_artifact, CliError, Exit};
use emth_core::{catalog, SuiteConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "emth", version, about = "Extended multi-component Toda hierarchy laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct LatticeArgs {
    /// Matrix size.
    #[arg(long = "N", default_value_t = 2)]
    dim: usize,
    /// Coarse cells.
    #[arg(long = "M", default_value_t = 16)]
    sites: usize,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    refine: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and print a JSON report.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Truncation order of the dressing series.
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long = "tol-scale", default_value_t = 1.0)]
        tol_scale: f64,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// n-fold Darboux transformation of the vacuum; writes the field table.
    Darboux {
        /// Number of wave functions.
        #[arg(long)]
        order: usize,
        /// Spectral parameters, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<f64>,
        #[arg(long = "N", default_value_t = 2)]
        dim: usize,
        #[arg(long = "M", default_value_t = 16)]
        sites: usize,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Vacuum value of `v`.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Seed of the companion amplitudes.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Diagonal companion amplitudes.
        #[arg(long)]
        diagonal: bool,
        /// Value of the time t_{1,1}.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[arg(long, default_value = "darboux.csv")]
        out: PathBuf,
    },
    /// Integrate one flow with RK4; writes the trajectory table.
    Evolve {
        /// `t,j,k`, `tbar,j,k` or `s,j`.
        #[arg(long, default_value = "t,1,1")]
        flow: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long = "record-every", default_value_t = 10)]
        record_every: usize,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Periodic)]
        boundary: BoundaryArg,
        #[arg(long, value_enum, default_value_t = StateArg::Vacuum)]
        state: StateArg,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
    },
    /// Execute a TOML scenario.
    Run {
        scenario: PathBuf,
        /// Artifact directory; overrides the scenario and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the catalog of verifiable claims.
    ListClaims {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Decaying,
}

#[derive(Clone, Copy, ValueEnum)]
enum StateArg {
    Vacuum,
    Random,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit() as u8)
        }
    }
}

fn execute(command: Command) -> Result<Exit, CliError> {
    match command {
        Command::Verify { suite, lattice, order, seed, tol_scale, out } => {
            let suites = scenario::suite(&suite).map_err(|e| CliError::config("--suite", e))?;
            let config = SuiteConfig {
                dim: lattice.dim,
                sites: lattice.sites,
                eps: lattice.eps,
                refine: lattice.refine,
                order,
                seed,
                tol_scale,
            };
            let report = pipeline::verify(&suites, &config)?;
            let text = to_json(&report);
            if let Some(path) = out {
                write_artifact(&resolve_output(&path), &text)?;
            }
            print!("{text}");
            Ok(if report.passed { Exit::Pass } else { Exit::VerificationFailure })
        }
        Command::Darboux { order, z, dim, sites, eps, c, seed, diagonal, time, out } => {
            if z.len() != order {
                return Err(CliError::config("--z", format!("{} spectral parameters for order {order}", z.len())));
            }
            let result = DarbouxRequest { dim, sites, eps, c, z, seed, diagonal, time }.run()?;
            let path = resolve_output(&out);
            let hash = write_artifact(&path, &result.to_csv())?;
            let summary = json!({
                "order": order,
                "kernel_residual": result.kernel_residual,
                "max_condition": result.max_condition,
                "path": path,
                "sha256": hash,
            });
            println!("{summary}");
            Ok(Exit::Pass)
        }
        Command::Evolve { flow, dt, steps, record_every, lattice, boundary, state, order, seed, out } => {
            let spec = LatticeSpec {
                sites: lattice.sites,
                eps: lattice.eps,
                refine: lattice.refine,
                boundary: match boundary {
                    BoundaryArg::Periodic => scenario::BoundarySpec::Periodic,
                    BoundaryArg::Decaying => scenario::BoundarySpec::Decaying,
                },
                dim: lattice.dim,
                order,
            };
            let flow = scenario::flow(&flow, lattice.dim).map_err(|e| CliError::config("--flow", e))?;
            let state = match state {
                StateArg::Vacuum => StateSpec::Vacuum { c: 1.0 },
                StateArg::Random => StateSpec::Random { seed, amplitude: 0.3 },
            };
            let initial = pipeline::build_state(&state, &spec)?;
            let traj = pipeline::evolve(&initial, flow, dt, steps, record_every, order)?;
            let path = resolve_output(&out);
            let hash = write_artifact(&path, &traj.to_csv())?;
            let summary = json!({
                "flow": flow.to_string(),
                "steps": steps,
                "dt": dt,
                "trace_drift": traj.drift(),
                "max_change": pipeline::max_change(&traj),
                "path": path,
                "sha256": hash,
            });
            println!("{summary}");
            Ok(Exit::Pass)
        }
        Command::Run { scenario, out } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| CliError::config(&scenario.display().to_string(), e))?;
            let sc = Scenario::parse(&text)?;
            let dir = out.or_else(|| sc.output.dir.clone().map(|d| resolve_output(&d))).unwrap_or_else(default_out_dir);
            let manifest = pipeline::run(&sc, &dir)?;
            println!("{}", json!({ "dir": dir, "artifacts": manifest.artifacts, "verification_passed": manifest.verification_passed }));
            Ok(match manifest.verification_passed {
                Some(false) => Exit::VerificationFailure,
                _ => Exit::Pass,
            })
        }
        Command::ListClaims { json } => {
            if json {
                print!("{}", to_json(&catalog()));
            } else {
                for c in catalog() {
                    println!("{:<30} {:<13} {}", c.id, c.suite.name(), c.statement);
                }
            }
            Ok(Exit::Pass)
        }
    }
}
