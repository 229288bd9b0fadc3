use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvmbqc::cache::{self, plan_for};
use cvmbqc::error::{CliError, Result};
use cvmbqc::optimize::{merge, optimize};
use cvmbqc::sweep::{self, round_db, SweepSpec};
use cvmbqc::verify;
use cvmbqc_core::gates::{BasisTable, GateId};
use cvmbqc_core::lattice::Lattice;
use cvmbqc_core::optimizer::OptimizerConfig;
use cvmbqc_core::oracle::VERIFY_TOL;

#[derive(Debug, Parser)]
#[command(name = "cvmbqc", version, about = "Gate noise and GKP error probabilities on 2D cluster-state lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Grid {
    #[arg(long, default_value_t = SweepSpec::DEFAULT_MIN)]
    db_min: f64,
    #[arg(long, default_value_t = SweepSpec::DEFAULT_MAX)]
    db_max: f64,
    #[arg(long, default_value_t = SweepSpec::DEFAULT_STEP)]
    db_step: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Lattices, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["DBSL", "BSL", "MBSL", "QRL"])]
    lattice: Vec<Lattice>,
    /// Gates, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["I", "F", "P1", "FFCZ"])]
    gate: Vec<GateId>,
    #[command(flatten)]
    grid: Grid,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SweepArgs {
    fn spec(&self) -> Result<SweepSpec> {
        SweepSpec::new(self.grid.db_min, self.grid.db_max, self.grid.db_step, self.lattice.clone(), self.gate.clone())
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Added noise per output quadrature, in dB relative to the vacuum.
    NoiseCurve(SweepArgs),
    /// GKP error probability per gate, with zero-gate-noise baseline rows.
    ErrorCurve(SweepArgs),
    /// Controlled-Z error probability relative to the DBSL.
    Compare {
        #[arg(long, value_delimiter = ',', default_values = ["BSL", "MBSL", "QRL"])]
        lattice: Vec<Lattice>,
        /// Also compare the DBSL with an optimized control angle.
        #[arg(long)]
        variable_theta_c: bool,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search controlled-Z bases and store them in the basis table.
    Optimize {
        #[arg(long)]
        lattice: Lattice,
        #[arg(long)]
        variable_theta_c: bool,
        /// Squeezing points, comma separated; the grid flags apply otherwise.
        #[arg(long, value_delimiter = ',')]
        db: Vec<f64>,
        #[command(flatten)]
        grid: Grid,
        /// Optimizer settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of random restarts per point.
        #[arg(long)]
        restarts: Option<usize>,
        /// Table to merge into; defaults to the cache directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle checks of every cataloged plan; exits 1 on any failure.
    Verify {
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints a gate plan (graphs, bases, expected gate) as JSON.
    DumpGraph {
        #[arg(long)]
        lattice: Lattice,
        #[arg(long, default_value = "I")]
        gate: GateId,
        #[arg(long, default_value_t = 15.0)]
        db: f64,
        #[arg(long, default_value_t = 0)]
        parity: u8,
        #[arg(long)]
        variable_theta_c: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Json { context: "report".into(), source: e })?;
    text.push('\n');
    let mut out = output(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}

fn load_config(path: Option<&Path>) -> Result<OptimizerConfig> {
    let Some(p) = path else { return Ok(OptimizerConfig::default()) };
    let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json { context: p.display().to_string(), source: e })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::NoiseCurve(args) => {
            let (table, _) = cache::load()?;
            let rows = sweep::noise_curve(&args.spec()?, &table)?;
            sweep::write_csv(&rows, output(args.out.as_deref())?)
        }
        Command::ErrorCurve(args) => {
            let (table, _) = cache::load()?;
            let rows = sweep::error_curve(&args.spec()?, &table)?;
            sweep::write_csv(&rows, output(args.out.as_deref())?)
        }
        Command::Compare { lattice, variable_theta_c, grid, out } => {
            let (table, _) = cache::load()?;
            let spec = SweepSpec::new(grid.db_min, grid.db_max, grid.db_step, lattice, vec![GateId::Ffcz])?;
            let rows = sweep::compare(&spec, &table, variable_theta_c)?;
            sweep::write_csv(&rows, output(out.as_deref())?)
        }
        Command::Optimize { lattice, variable_theta_c, db, grid, config, seed, restarts, out } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = restarts {
                cfg.restarts = n;
            }
            let dbs: Vec<f64> = if db.is_empty() {
                SweepSpec::new(grid.db_min, grid.db_max, grid.db_step, vec![lattice], vec![GateId::Ffcz])?.grid()
            } else {
                db.iter().map(|&d| round_db(d)).collect()
            };
            let path = out.or_else(cache::cache_path).ok_or_else(|| {
                CliError::Usage(format!("give --out or set {} to choose where the table goes", cache::CACHE_ENV))
            })?;
            let mut table = if path.exists() { cache::load_file(&path)? } else { BasisTable::new() };
            // the bundled table seeds the search but is never rewritten
            let mut seeds = cache::bundled()?;
            for row in &table.rows {
                seeds.upsert(row.clone());
            }
            let report = optimize(lattice, &dbs, variable_theta_c, &cfg, &seeds)?;
            for p in &report.points {
                let status = if p.accepted { "accepted" } else { "INFEASIBLE" };
                eprintln!(
                    "{lattice} {:>9.4} dB  perr {:.6e}  residual {:.2e}  {status}{}",
                    p.squeezing_db,
                    p.perr,
                    p.residual,
                    p.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                );
            }
            merge(&mut table, &report);
            cache::save(&table, &path)?;
            eprintln!("{} of {} points stored in {}", report.rows.len(), report.points.len(), path.display());
            Ok(())
        }
        Command::Verify { tol, out } => {
            let (table, _) = cache::load()?;
            let summary = verify::run(&table, tol)?;
            write_json(&summary, None)?;
            if let Some(p) = out.as_deref() {
                write_json(&summary, Some(p))?;
            }
            if summary.pass {
                Ok(())
            } else {
                Err(CliError::VerificationFailed(summary.failures))
            }
        }
        Command::DumpGraph { lattice, gate, db, parity, variable_theta_c, out } => {
            if parity > 1 {
                return Err(CliError::Usage(format!("parity must be 0 or 1, got {parity}")));
            }
            if !sweep::supported(lattice, gate) {
                return Err(CliError::Usage(format!("gate {gate} is not available on {lattice}")));
            }
            let (table, _) = cache::load()?;
            let plan = plan_for(&table, lattice, gate, round_db(db), parity, variable_theta_c)?;
            write_json(&plan, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
