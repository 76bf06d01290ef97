//! Command-line front end: `run`, `sweep`, `infill` and `list-cases`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};

use gradopt::bench::{named_case, run_sweep_with, Mode, CASE_NAMES};
use gradopt::io::{infill_map, load_config, write_outputs, write_sweep_csv, FieldDump, RunWriter};
use gradopt::opt::{IterationRecord, RunRecord, Termination};
use gradopt::Error;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER_FAILURE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gradopt", version, about = "Phase-field topology optimization with graded infill")]
pub struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimization described by a configuration file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory of the configuration
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named case once per value of one parameter
    Sweep {
        #[arg(long)]
        case: String,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Scale the mesh resolution, e.g. 0.5 for a half-resolution sweep
        #[arg(long)]
        mesh_scale: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Write sweep.csv and one result directory per value here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map a grading field dump onto a grid of perforated cells
    Infill {
        #[arg(long)]
        field: PathBuf,
        /// Cell side in mm
        #[arg(long)]
        cell: f64,
        /// CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the names of the built-in benchmark cases
    ListCases,
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_SUCCESS };
        }
    };
    init_logging(cli.verbose);
    execute(&cli.command, &mut std::io::stdout().lock())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Runs a parsed command, writing regular output to `out` and diagnostics to stderr.
pub fn execute(command: &Command, out: &mut dyn Write) -> i32 {
    let result = match command {
        Command::Run { config, out: dir } => cmd_run(config, dir.as_deref(), out),
        Command::Sweep {
            case,
            axis,
            values,
            mesh_scale,
            max_iter,
            out: dir,
        } => cmd_sweep(case, axis, values, *mesh_scale, *max_iter, dir.as_deref(), out),
        Command::Infill { field, cell, out: dest } => cmd_infill(field, *cell, dest.as_deref(), out),
        Command::ListCases => cmd_list(out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_status(&e)
        }
    }
}

pub fn error_status(e: &Error) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER_FAILURE
    } else {
        EXIT_VALIDATION
    }
}

pub fn termination_status(record: &RunRecord) -> i32 {
    match record.termination {
        Termination::Converged => EXIT_SUCCESS,
        Termination::SolverFailure => EXIT_SOLVER_FAILURE,
        Termination::MaxIterations => EXIT_NOT_CONVERGED,
    }
}

fn write_line(out: &mut dyn Write, line: &str) -> gradopt::Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn cmd_run(config: &Path, dir: Option<&Path>, out: &mut dyn Write) -> gradopt::Result<i32> {
    let cfg = load_config(config)?;
    for w in &cfg.warnings {
        warn!("{}: {w}", config.display());
    }
    cfg.case.validate()?;
    let dir = dir.unwrap_or(&cfg.output.directory);
    let mesh = cfg.case.mesh()?;
    let mut writer = RunWriter::create(dir, cfg.output.dump_every, &mesh)?;
    let mut observer = |row: &IterationRecord, phi: &[f64], chi: Option<&[f64]>| {
        info!(
            "iter {}: compliance {:.6e}, volume {:.4}, delta_phi {:.3e}",
            row.iter, row.compliance, row.volume, row.delta_phi
        );
        writer.observe(row, phi, chi);
    };
    let record = cfg.case.run(Some(&mut observer))?;
    writer.finish(&record)?;

    let code = termination_status(&record);
    let status = match record.termination {
        Termination::Converged => "converged",
        Termination::MaxIterations => "not converged (max_iter reached)",
        Termination::SolverFailure => "solver failure",
    };
    write_line(
        out,
        &format!(
            "{}: {status} after {} iterations, compliance {:.6}, volume {:.4}, m_chi {:.4}",
            cfg.case.name,
            record.iterations(),
            record.final_compliance,
            record.final_volume(),
            record.final_m_chi()
        ),
    )?;
    if let Some(msg) = &record.failure {
        eprintln!("error: {msg}");
    }
    write_line(out, &format!("results written to {}", dir.display()))?;
    Ok(code)
}

fn cmd_sweep(
    case: &str,
    axis: &str,
    values: &[f64],
    mesh_scale: Option<f64>,
    max_iter: Option<usize>,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> gradopt::Result<i32> {
    let mut template = named_case(case)?;
    if let Some(f) = mesh_scale {
        template = template.with_mesh_scale(f)?;
    }
    if let Some(n) = max_iter {
        template.optimizer.max_iter = n;
    }
    template.validate()?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let sweep = run_sweep_with(&template, axis, values, |value, case, record| {
        if let Some(dir) = dir {
            let run_dir = dir.join(format!("{axis}_{value}"));
            let written = case.mesh().and_then(|mesh| write_outputs(&run_dir, &mesh, record));
            if let Err(e) = written {
                warn!("{}: {e}", run_dir.display());
            }
        }
    })?;

    let mut table = Vec::new();
    write_sweep_csv(&mut table, &sweep).map_err(|e| Error::invalid(format!("cannot render sweep table: {e}")))?;
    out.write_all(&table).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(dir) = dir {
        let path = dir.join("sweep.csv");
        fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    }
    for row in &sweep.rows {
        if let Some(msg) = &row.error {
            eprintln!("{axis} = {}: {msg}", row.value);
        }
    }
    Ok(EXIT_SUCCESS)
}

fn cmd_infill(field: &Path, cell: f64, dest: Option<&Path>, out: &mut dyn Write) -> gradopt::Result<i32> {
    let dump = FieldDump::read(field)?;
    let grid = infill_map(&dump, cell)?;
    match dest {
        Some(path) => {
            grid.write_csv(path)?;
            write_line(
                out,
                &format!(
                    "{} x {} cells, solid fraction {:.4}, written to {}",
                    grid.cells_x,
                    grid.cells_y,
                    grid.solid_fraction(),
                    path.display()
                ),
            )?;
        }
        None => {
            grid.write_csv_to(&mut *out)
                .map_err(|e| Error::invalid(format!("cannot write infill table: {e}")))?;
            eprintln!("solid fraction {:.4}", grid.solid_fraction());
        }
    }
    Ok(EXIT_SUCCESS)
}

fn cmd_list(out: &mut dyn Write) -> gradopt::Result<i32> {
    for name in CASE_NAMES {
        let case = named_case(name)?;
        let mode = match case.mode {
            Mode::Single => "single",
            Mode::Graded => "graded",
        };
        write_line(
            out,
            &format!("{name:<22} {mode:<7} {}x{} mesh, {} x {} mm", case.nx, case.ny, case.lx, case.ly),
        )?;
    }
    Ok(EXIT_SUCCESS)
}
