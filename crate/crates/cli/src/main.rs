use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lyapbound::pipeline::{self, SweepParam, EXIT_ERROR, EXIT_K_NOT_CERTIFIED, EXIT_OK};
use lyapbound::simulate::DEFAULT_POPULATION_CAP;
use lyapbound::{orbits, Error, RunConfig, SimConfig};

/// Certified Lyapunov-exponent bounds for branching processes in expanding
/// circle-map environments.
#[derive(Parser, Debug)]
#[command(name = "lyapbound", version)]
struct Cli {
    /// JSON run configuration; `-` reads standard input. Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and print the bounds report as JSON.
    Bounds,
    /// Run the pipeline over a range of one model parameter; CSV output.
    Sweep {
        #[arg(long, default_value = "lambda")]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        /// Number of points, both ends included.
        #[arg(long)]
        steps: u32,
    },
    /// Try to certify sup q <= C.
    VerifyK {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        nmax: u32,
    },
    /// Lower and upper bounds on q over a uniform grid; CSV output.
    Qbounds {
        #[arg(long)]
        grid: u32,
        #[arg(long)]
        n: usize,
    },
    /// Enclosures of all primitive periodic orbits up to period M.
    Orbits,
    /// Monte-Carlo extinction frequency.
    Simulate {
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        gens: u32,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_POPULATION_CAP)]
        cap: u64,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Error> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::Config(format!("stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    RunConfig::from_json(&text)
}

/// Output text and exit code.
fn execute(cli: &Cli, cfg: &RunConfig) -> Result<(String, i32), Error> {
    Ok(match &cli.command {
        Command::Bounds => {
            let report = pipeline::run_pipeline(cfg)?;
            (report.to_json() + "\n", report.exit_code())
        }
        Command::Sweep { param, from, to, steps } => {
            let param: SweepParam = param.parse()?;
            let values = pipeline::sweep_values(*from, *to, *steps)?;
            let rows = pipeline::sweep(cfg, param, &values)?;
            (pipeline::sweep_csv(param, &rows), EXIT_OK)
        }
        Command::VerifyK { c, nmax } => {
            let cert = pipeline::verify_k(cfg, *c, *nmax)?;
            let code = if cert.certified { EXIT_OK } else { EXIT_K_NOT_CERTIFIED };
            (pipeline::verify_k_json(&cert) + "\n", code)
        }
        Command::Qbounds { grid, n } => {
            let (_, rows) = pipeline::qbounds(cfg, *grid, *n)?;
            (pipeline::qbounds_csv(&rows), EXIT_OK)
        }
        Command::Orbits => {
            let map = cfg.map.build()?;
            let found = orbits::find_periodic_orbits(&map, cfg.orbit.m, cfg.orbit.epsilon)?;
            (pipeline::orbit_lines(&found), EXIT_OK)
        }
        Command::Simulate { x0, gens, trials, seed, cap } => {
            let sim = SimConfig {
                population_cap: *cap,
                ..SimConfig::new(*x0, *gens, *trials, *seed)
            };
            let out = pipeline::simulate(cfg, &sim)?;
            (pipeline::simulate_json(&out) + "\n", EXIT_OK)
        }
    })
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let cfg = load_config(cli.config.as_ref())?;
    let threads = cfg.effective_threads()?;
    let (text, code) = pipeline::with_threads(threads, || execute(cli, &cfg))??;
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Config(format!("stdout: {e}")))?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
