use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use conegauss::inequality::{sharpness_sweep, CheckOptions, SweepChecker, SweepFamily};
use conegauss::report::{inputs, run_timed, to_csv, to_json, RunConfig, RunReport, Suite};
use conegauss::spectral::GalerkinSystem;
use conegauss::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "conegauss",
    version,
    about = "Verify functional inequalities for weighted Gaussian measures on cones"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Checker {
    Poincare,
    Lsi,
    Beckner,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the default relative tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Overrides the quadrature and sampling seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Prints per-suite wall time to stderr.
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured suite and emit the report.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Perturbative sweeps `1 + ε·u` around the constants, one per configured field.
    Sharpness {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "poincare")]
        checker: Checker,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05, 0.025])]
        eps: Vec<f64>,
        /// Evaluate the configured fields as a family of candidate extremals instead.
        #[arg(long)]
        extremal: bool,
    },
    /// Spectral suite only: eigenvalues, gap and convergence.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Write the stiffness matrix as CSV instead of the report.
        #[arg(long)]
        stiffness: bool,
    },
    /// CSV summary of a run, or of a saved JSON report.
    Report {
        #[arg(long, conflicts_with = "from", required_unless_present = "from")]
        config: Option<PathBuf>,
        /// Saved JSON report to summarize.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => Failure::Io(m),
            e => Failure::Config(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(t) = common.tolerance {
        cfg.tolerances.default = t;
    }
    if let Some(s) = common.seed {
        cfg.quadrature.seed = s;
        cfg.options.seed = s;
    }
    Ok(cfg)
}

fn emit(out: Option<&Path>, bytes: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn output_path(common: &Common, cfg: &RunConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from))
}

fn render(report: &RunReport, format: Format) -> Result<String, Failure> {
    Ok(match format {
        Format::Json => to_json(report)?,
        Format::Csv => to_csv(report),
    })
}

fn execute(cfg: &RunConfig, timings: bool) -> Result<RunReport, Failure> {
    let (report, times) = run_timed(cfg)?;
    if timings {
        for (s, d) in times {
            eprintln!("{s:?}: {:.3} s", d.as_secs_f64());
        }
    }
    for s in &report.suites {
        for e in &s.errors {
            eprintln!("{:?}: {e}", s.suite);
        }
    }
    Ok(report)
}

fn verdict(pass: bool) -> u8 {
    if pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Verify { common, format } => {
            let cfg = load(&common)?;
            let report = execute(&cfg, common.timings)?;
            emit(output_path(&common, &cfg).as_deref(), &render(&report, format)?)?;
            Ok(verdict(report.pass))
        }
        Command::Spectrum { common, stiffness } => {
            let mut cfg = load(&common)?;
            let out = output_path(&common, &cfg);
            if stiffness {
                let (mu, _) = inputs(&cfg)?;
                let sys = GalerkinSystem::build(&mu, cfg.options.spectral_max_degree, None)?;
                emit(out.as_deref(), &sys.stiffness_csv())?;
                return Ok(0);
            }
            cfg.suites = vec![Suite::Spectral];
            let report = execute(&cfg, common.timings)?;
            emit(out.as_deref(), &to_json(&report)?)?;
            Ok(verdict(report.pass))
        }
        Command::Sharpness {
            common,
            checker,
            p,
            q,
            eps,
            extremal,
        } => {
            let cfg = load(&common)?;
            let (mu, fields) = inputs(&cfg)?;
            let checker = match checker {
                Checker::Poincare => SweepChecker::Poincare,
                Checker::Lsi => SweepChecker::Lsi,
                Checker::Beckner => SweepChecker::Beckner { p, q },
            };
            let opts = CheckOptions {
                tolerance: cfg.tolerances.default,
            };
            let mut text = String::new();
            if extremal {
                let family = SweepFamily::Extremal { members: fields };
                text.push_str(&sharpness_sweep(checker, &family, &mu, &opts)?.to_csv());
            } else {
                for (label, u) in fields {
                    let family = SweepFamily::Perturbation {
                        direction: u,
                        eps: eps.clone(),
                    };
                    let table = sharpness_sweep(checker, &family, &mu, &opts)?;
                    text.push_str(&format!("# direction: {label}\n"));
                    text.push_str(&table.to_csv());
                }
            }
            emit(output_path(&common, &cfg).as_deref(), &text)?;
            Ok(0)
        }
        Command::Report {
            config,
            from,
            out,
            format,
        } => {
            let report: RunReport = match (config, from) {
                (_, Some(path)) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str(&text)
                        .map_err(|e| Failure::Config(format!("{} is not a report: {e}", path.display())))?
                }
                (Some(config), None) => {
                    let common = Common {
                        config,
                        out: None,
                        tolerance: None,
                        seed: None,
                        timings: false,
                    };
                    execute(&load(&common)?, false)?
                }
                (None, None) => return Err(Failure::Config("either --config or --from is required".into())),
            };
            emit(out.as_deref(), &render(&report, format)?)?;
            Ok(verdict(report.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}
