use clap::{Parser, Subcommand};
use kinetic_harris::config::ScenarioConfig;
use kinetic_harris::experiment::{self, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};
use kinetic_harris::numerics::QuadratureConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kinetic-harris",
    version,
    about = "Kinetic particle simulations with convergence certificates"
)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "KINETIC_HARRIS_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify, simulate, estimate distances and write outputs.
    Run {
        config: PathBuf,
        /// Overrides output_dir from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check drift constants, kernel, Lyapunov inequality and binning without simulating.
    Validate { config: PathBuf },
    /// Print the certificate audit only.
    Certificate { config: PathBuf },
}

fn load(path: &Path) -> Result<ScenarioConfig, i32> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}

fn main_inner(cli: Cli) -> i32 {
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return EXIT_CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    }
    let quad = QuadratureConfig::default();
    match cli.command {
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let report = experiment::validate(&cfg, &quad);
            print!("{}", report.render());
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_CONFIG
            }
        }
        Command::Certificate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match experiment::certificate(&cfg) {
                Ok(r) => {
                    print!("{}", r.render());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    experiment::exit_code(&e)
                }
            }
        }
        Command::Run { config, output_dir } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let outcome = match experiment::run(&cfg, &quad) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return experiment::exit_code(&e);
                }
            };
            let dir = output_dir.unwrap_or_else(|| cfg.output_dir.clone());
            match outcome.write(&cfg, &dir) {
                Ok(files) => {
                    for f in files {
                        eprintln!("wrote {}", f.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_FAILURE;
                }
            }
            print!("{}", outcome.summary(&cfg));
            outcome.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let code = main_inner(Cli::parse());
    ExitCode::from(code as u8)
}
