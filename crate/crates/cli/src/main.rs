use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use s4gauge::energy::Quadrature;
use s4gauge::Quaternion;
use s4gauge_cli::commands::{self, parse_alpha, parse_center, parse_lambda, parse_lambda_grid, parse_positive, CliError};
use s4gauge_cli::config::SuiteConfig;
use s4gauge_cli::suite::run_suite_with;

/// Yang-Mills α-energy numerics on the round four-sphere.
#[derive(Parser)]
#[command(name = "s4gauge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite and write a JSON report.
    Verify {
        /// Flat key = value config file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. --set seed=7.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// YM_{α,λ} of an ADHM instanton as JSON.
    Energy {
        #[arg(long, value_parser = parse_alpha)]
        alpha: f64,
        /// Center (one number or w,x,y,z) and scale of the instanton.
        #[arg(long, num_args = 2, value_names = ["CENTER", "SCALE"], default_values = ["0", "1"])]
        adhm: Vec<String>,
        /// Dilation weight of the energy; 1 gives YM_α.
        #[arg(long, value_parser = parse_lambda, default_value = "1")]
        lambda: f64,
        #[arg(long, value_parser = parse_positive, default_value = "1e-8")]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topological charge and self-dual part of an ADHM instanton as JSON.
    Charge {
        #[arg(long, num_args = 2, value_names = ["CENTER", "SCALE"], default_values = ["0", "1"])]
        adhm: Vec<String>,
        #[arg(long, value_parser = parse_positive, default_value = "1e-8")]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dilation profile of the basic connection as CSV.
    Profile {
        #[arg(long, value_parser = parse_alpha)]
        alpha: f64,
        /// start:end:count, evenly spaced.
        #[arg(long, value_parser = lambda_grid)]
        lambda_grid: LambdaGrid,
        #[arg(long, value_parser = parse_positive, default_value = "1e-10")]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// α-flow of a seeded radial perturbation of the basic connection; trajectory CSV.
    Flow {
        #[arg(long, value_parser = parse_alpha)]
        alpha: f64,
        /// Size of the perturbation coefficients.
        #[arg(long, default_value = "0.05")]
        perturb: f64,
        #[arg(long, default_value = "1")]
        seed: u64,
        #[arg(long, default_value = "16")]
        nodes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coulomb projection of a seeded gauge decoration of the basic connection; iteration CSV.
    Gaugefix {
        /// Size of the gauge decoration.
        #[arg(long, default_value = "0.6")]
        amplitude: f64,
        #[arg(long, default_value = "1")]
        seed: u64,
        #[arg(long, default_value = "12")]
        nodes: usize,
        #[arg(long, value_parser = parse_positive, default_value = "1e-9")]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug)]
struct LambdaGrid(Vec<f64>);

fn lambda_grid(s: &str) -> Result<LambdaGrid, String> {
    parse_lambda_grid(s).map(LambdaGrid)
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(out: &Option<PathBuf>, v: &T) -> Result<(), CliError> {
    let mut w = sink(out)?;
    writeln!(w, "{}", serde_json::to_string_pretty(v).expect("serializable output"))?;
    w.flush()?;
    Ok(())
}

fn adhm_args(cmd: &str, v: &[String]) -> (Quaternion, f64) {
    let parsed = parse_center(&v[0]).and_then(|c| parse_positive(&v[1]).map(|s| (c, s)));
    parsed.unwrap_or_else(|e| {
        use clap::CommandFactory;
        let mut app = Cli::command();
        let mut sub = app.find_subcommand_mut(cmd).expect("known subcommand").clone();
        sub.error(clap::error::ErrorKind::ValueValidation, format!("invalid --adhm: {e}")).exit()
    })
}

fn verify(config: Option<&Path>, overrides: &[String], out: &Option<PathBuf>) -> Result<bool, CliError> {
    let cfg = match config {
        Some(p) => SuiteConfig::load(p, overrides)?,
        None => SuiteConfig::from_str_with_overrides("", overrides)?,
    };
    let report = run_suite_with(&cfg, |n, checks| {
        let failed = checks.iter().filter(|c| !c.pass).count();
        eprintln!("criterion {n}: {} ({} checks, {failed} failed)", if failed == 0 { "PASS" } else { "FAIL" }, checks.len());
    });
    let mut w = sink(out)?;
    w.write_all(report.to_json().as_bytes())?;
    w.flush()?;
    for c in report.failed() {
        eprintln!("failed {}: computed {:e}, {:?} {:e} ± {:e}{}", c.id, c.computed, c.comparison, c.target, c.tol, c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default());
    }
    Ok(report.pass)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify { config, overrides, out } => return verify(config.as_deref(), &overrides, &out),
        Command::Energy { alpha, adhm, lambda, tol, out } => {
            let (c, s) = adhm_args("energy", &adhm);
            write_json(&out, &commands::energy(alpha, c, s, lambda, &Quadrature::with_tol(tol))?)?;
        }
        Command::Charge { adhm, tol, out } => {
            let (c, s) = adhm_args("charge", &adhm);
            write_json(&out, &commands::charge(c, s, &Quadrature::with_tol(tol))?)?;
        }
        Command::Profile { alpha, lambda_grid, tol, out } => {
            let mut w = sink(&out)?;
            commands::profile(&mut w, alpha, &lambda_grid.0, &s4gauge::dilation::ProfileQuadrature::with_tol(tol))?;
            w.flush()?;
        }
        Command::Flow { alpha, perturb, seed, nodes, out } => {
            let mut w = sink(&out)?;
            commands::flow(&mut w, alpha, perturb, seed, nodes, &Quadrature::default())?;
            w.flush()?;
        }
        Command::Gaugefix { amplitude, seed, nodes, tol, out } => {
            let mut w = sink(&out)?;
            commands::gaugefix(&mut w, amplitude, seed, nodes, tol)?;
            w.flush()?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
