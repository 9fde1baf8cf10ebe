//! Command-line front end.
//!
//! Exit codes: 0 success, 1 parse or usage error, 2 mathematical
//! precondition failure, 3 a selected check failed.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::parallel;
use crate::pipeline::{self, CheckName, SimulateParams};
use crate::report::{self, Report};
use crate::walkspec::Walk;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rwalk", version, about = "Spectral radius, tilting and recurrence checks for random walks on groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute theta*, rho, R and the gradient norm at the minimizer.
    Analyze {
        spec: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the tilted walk R * phi * v as a new spec file.
    Tilt {
        spec: PathBuf,
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run numerical identity checks, one line per check.
    Verify {
        spec: PathBuf,
        /// `all` or a comma-separated subset of eq1,eq17,dual,measure,eq12,corollary2.
        #[arg(long, default_value = "all")]
        paper_checks: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Exact return series, growth heuristic and Monte Carlo return fraction.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Target set, e.g. `0`, `1,0;0,1`, or `all` on a finite group. Defaults to the identity.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the return series (n, p_n, log_p_n, r_pow_n_p_n, partial_sum) here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Parses `args`, runs the command with the worker count from
/// `RWALK_THREADS`, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let workers = parallel::configured_workers();
    let mut buf = Vec::new();
    let result = parallel::with_workers(workers, || execute(cli.command, &mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn write_report(report: &Report, path: &Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) => report.write_json(p),
        None => Ok(()),
    }
}

fn line(out: &mut Vec<u8>, text: String) {
    out.extend_from_slice(text.as_bytes());
    out.push(b'\n');
}

fn execute(command: Command, out: &mut Vec<u8>) -> Result<i32> {
    match command {
        Command::Analyze { spec, report } => {
            let walk = Walk::load(&spec)?;
            let r = pipeline::analyze(&walk)?;
            let s = &r.spectral.as_ref().unwrap().result;
            line(out, format!("group         = {}", walk.group()));
            line(out, format!("theta_star    = {}", pipeline::format_vector(&s.theta_star)));
            line(out, format!("rho           = {}", s.rho));
            line(out, format!("R             = {}", s.r));
            line(out, format!("gradient_norm = {:e}", s.gradient_norm));
            line(out, format!("iterations    = {}", s.iterations));
            write_report(&r, &report)?;
            Ok(EXIT_OK)
        }
        Command::Tilt { spec, out: path, report } => {
            let walk = Walk::load(&spec)?;
            let (tilted, r) = pipeline::tilt(&walk)?;
            std::fs::write(&path, tilted.to_toml()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let t = r.tilt.as_ref().unwrap();
            for a in &t.atoms {
                line(out, format!("{} {}", a.element, a.prob));
            }
            line(out, format!("eq17_residual = {:e}", t.eq17_residual));
            write_report(&r, &report)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            spec,
            paper_checks,
            report,
        } => {
            let checks = CheckName::parse_list(&paper_checks)?;
            let walk = Walk::load(&spec)?;
            let r = pipeline::verify(&walk, &checks)?;
            for c in &r.checks {
                line(out, c.render());
            }
            write_report(&r, &report)?;
            Ok(if r.all_checks_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Simulate {
            spec,
            trajectories,
            horizon,
            seed,
            target,
            report,
            csv,
        } => {
            if trajectories == Some(0) {
                return Err(Error::Usage("--trajectories must be at least 1".into()));
            }
            let walk = Walk::load(&spec)?;
            let target = target.map(|t| pipeline::parse_target(&walk, &t)).transpose()?;
            let params = SimulateParams::resolve(&walk, trajectories, horizon, seed, target);
            let (r, data) = pipeline::simulate(&walk, &params)?;
            let rec = r.recurrence.as_ref().unwrap();
            let mc = rec.mc.as_ref().unwrap();
            line(out, format!("trajectories    = {}", mc.result.trajectories));
            line(out, format!("horizon         = {}", mc.result.horizon));
            line(out, format!("seed            = {}", mc.result.seed));
            line(out, format!("return_fraction = {}", mc.result.return_fraction));
            line(out, format!("ci_halfwidth    = {}", mc.result.ci_halfwidth));
            if !mc.result.mean_displacement.is_empty() {
                line(out, format!("mean_displacement = {}", pipeline::format_vector(&mc.result.mean_displacement)));
            }
            for v in &r.verdicts {
                line(out, format!("verdict {} = {} (value {})", v.name, v.outcome, v.value));
            }
            for n in &r.notes {
                line(out, format!("note: {n}"));
            }
            if let Some(path) = &csv {
                let data = data.ok_or_else(|| Error::Usage("no series to write: the growth test did not run".into()))?;
                let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                report::write_series_csv(file, &data.log_values, data.r, &data.partial_sums)?;
            }
            write_report(&r, &report)?;
            Ok(EXIT_OK)
        }
    }
}
