use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nljm_cli::commands::{cmd_basis_check, cmd_scan, cmd_stability_scan, cmd_table, parse_orders, Report};
use nljm_cli::config::RunConfig;
use nljm_cli::{presets, CliError};

#[derive(Parser)]
#[command(name = "nljm", version, about = "Nonlinear J-matrix scattering calculations with CSV output")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<String>,
    /// Bundled configuration (table1..table4, fig1, fig2, fig3b, fig4b, fig5, fig6).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output file; `-` or absent writes to stdout.
    #[arg(long, global = true)]
    output: Option<String>,
    /// Worker threads for energy scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Allow a quadrature order below (n+1)N−n.
    #[arg(long, global = true)]
    override_quadrature_bound: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve every grid energy and emit one CSV row per energy.
    Scan,
    /// |1 − S_m| with rows m and columns E.
    Table {
        /// Orders to show, e.g. `0-12` or `0,2,4`.
        #[arg(long, default_value = "0-12")]
        orders: String,
    },
    /// Reconstruct the free reference solutions and compare with Bessel targets.
    BasisCheck,
    /// Diagonal diagnostics over a (λ, N) grid.
    StabilityScan {
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        /// Comma-separated basis sizes.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let (src, origin) = match (&common.config, &common.preset) {
        (Some(path), _) => (fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?, path.clone()),
        (None, Some(name)) => {
            let src = presets::preset(name).ok_or_else(|| {
                CliError::Config(format!("unknown preset '{name}' (available: {})", presets::names().collect::<Vec<_>>().join(", ")))
            })?;
            (src.to_string(), format!("preset:{name}"))
        }
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
    };
    RunConfig::parse(&src, &origin, common.override_quadrature_bound)
}

fn run(cli: Cli) -> Result<Report, CliError> {
    if let Some(k) = cli.common.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = load(&cli.common)?;
    match cli.verb {
        Verb::Scan => cmd_scan(&cfg),
        Verb::Table { orders } => cmd_table(&cfg, &parse_orders(&orders)?),
        Verb::BasisCheck => cmd_basis_check(&cfg),
        Verb::StabilityScan { lambda_grid, n_grid } => cmd_stability_scan(&cfg, lambda_grid.as_deref(), n_grid.as_deref()),
    }
}

fn emit(report: &Report, output: Option<&str>) -> Result<(), CliError> {
    match output {
        None | Some("-") => {
            let mut out = std::io::stdout().lock();
            out.write_all(report.body.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))
        }
        Some(path) => fs::write(path, &report.body).map_err(|e| CliError::Io(format!("{path}: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = cli.common.output.clone();
    let result = run(cli).and_then(|report| {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        emit(&report, output.as_deref())?;
        if report.failed > 0 {
            return Err(CliError::Numerical(format!("{} grid point(s) failed", report.failed)));
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
