//! Command-line runner for grazing-core: configuration, parallel sweeps and file outputs.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod systems;

pub use config::RunConfig;
pub use error::CliError;

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(a), Ok(b)) => Ok([a, b]),
            _ => Err(format!("expected two numbers, got {s:?}")),
        },
        _ => Err(format!("expected X,Y, got {s:?}")),
    }
}

#[derive(Parser, Debug)]
#[command(name = "grazing", version, about = "Grazing-sliding bifurcations of symmetric planar Filippov systems")]
struct Cli {
    /// TOML config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved config (defaults included) and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// thompson_hunt, circle, parabola or polynomial.
    #[arg(long, global = true)]
    system: Option<String>,
    /// Thompson–Hunt `a`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Thompson–Hunt `b`; omitted means `ϑ(a)`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, global = true, value_name = "A1,A2", value_parser = parse_pair, allow_hyphen_values = true)]
    alpha: Option<[f64; 2]>,
    #[arg(long, global = true, value_name = "B1,B2", value_parser = parse_pair, allow_hyphen_values = true)]
    beta: Option<[f64; 2]>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Hybrid trajectory to CSV.
    Simulate {
        #[arg(long, value_name = "X,Y", value_parser = parse_pair, allow_hyphen_values = true)]
        from: Option<[f64; 2]>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Folds, sliding segments and pseudo-equilibria on the boundary.
    Tangencies,
    /// Intrinsic quantities of the grazing cycle with identity residuals.
    Quantities,
    /// Objects of the phase portrait at one parameter point.
    Portrait,
    /// Traced boundary curves with coefficient fits.
    Boundary {
        #[arg(long)]
        curve: Option<String>,
    },
    /// Curves, region samples and the census check.
    Diagram,
    /// Locus, quantities and diagram for the Thompson–Hunt family, with a report.
    Example,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Tangencies => "tangencies",
            Command::Quantities => "quantities",
            Command::Portrait => "portrait",
            Command::Boundary { .. } => "boundary",
            Command::Diagram => "diagram",
            Command::Example => "example",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &cli.system {
        cfg.system.id = s.clone();
    }
    if let Some(a) = cli.a {
        cfg.system.a = a;
    }
    if cli.b.is_some() {
        cfg.system.b = cli.b;
    }
    if let Some(a) = cli.alpha {
        cfg.params.alpha = a;
    }
    if cli.beta.is_some() {
        cfg.params.beta = cli.beta;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.run.jobs = j;
    }
    match &cli.command {
        Some(Command::Simulate { from, t }) => {
            if let Some(f) = from {
                cfg.simulate.from = *f;
            }
            if let Some(t) = t {
                cfg.simulate.t = *t;
            }
        }
        Some(Command::Boundary { curve: Some(c) }) => cfg.boundary.curve = c.clone(),
        Some(Command::Example) => {
            cfg.system.id = "thompson_hunt".into();
            cfg.system.upper = None;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<String, CliError> {
    let mut out = output::Output::create(cmd.name(), cfg)?;
    let text = match cmd {
        Command::Simulate { .. } => commands::simulate(cfg, &mut out),
        Command::Tangencies => commands::tangencies(cfg, &mut out),
        Command::Quantities => commands::quantities(cfg, &mut out),
        Command::Portrait => commands::portrait(cfg, &mut out),
        Command::Boundary { .. } => commands::boundary(cfg, &mut out),
        Command::Diagram => commands::diagram(cfg, &mut out),
        Command::Example => commands::example(cfg, &mut out),
    };
    out.finish()?;
    text
}

/// Runs the tool on `args` (program name first); returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let fail = |stderr: &mut dyn Write, e: CliError| {
        let _ = writeln!(stderr, "{}", e.to_json());
        e.exit_code()
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            return fail(stderr, CliError::config(e.to_string().trim().to_string()));
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => return fail(stderr, e),
    };
    if cli.print_config {
        let _ = write!(stdout, "{}", cfg.to_toml());
        return 0;
    }
    let Some(cmd) = cli.command.clone() else {
        return fail(stderr, CliError::config("no command given; see --help"));
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.run.jobs).build() {
        Ok(p) => p,
        Err(e) => return fail(stderr, CliError::config(format!("thread pool: {e}"))),
    };
    match pool.install(|| dispatch(&cmd, &cfg)) {
        Ok(text) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Err(e) => fail(stderr, e),
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
