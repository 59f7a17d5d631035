use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irslab::analytic::FormulaMode;
use irslab::experiments::{compare, compare_dir, run_and_write, ExperimentSpec, Report, BUILTIN_NAMES};

#[derive(Parser)]
#[command(name = "irslab", version, about = "IRS-assisted cell-free link experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in spec (fig2..fig5) or a JSON spec file.
    Run {
        spec: String,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: results/<spec name>].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["as-printed", "rederived"])]
        mode: Option<String>,
        /// Run cases concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Re-check a result directory written by `run`.
    Compare { dir: PathBuf },
    /// Print a built-in spec as JSON.
    Spec { name: String },
}

fn load_spec(arg: &str) -> irslab::Result<ExperimentSpec> {
    match ExperimentSpec::builtin(arg) {
        Some(spec) => Ok(spec),
        None => {
            let path = Path::new(arg);
            if !path.exists() {
                return Err(irslab::Error::invalid(
                    "spec",
                    format!("`{arg}` is neither a built-in ({}) nor a file", BUILTIN_NAMES.join(", ")),
                ));
            }
            ExperimentSpec::load(path)
        }
    }
}

fn print_report(report: &Report) {
    for note in &report.notes {
        println!("note: {note}");
    }
    for (criterion, passed, total) in report.summary() {
        let verdict = if passed == total { "PASS" } else { "FAIL" };
        println!("{verdict} {criterion}: {passed}/{total}");
    }
    for c in report.failures() {
        match c.x {
            Some(x) => println!(
                "  {} {} at x = {x}: delta {:.3e} > tolerance {:.3e}",
                c.criterion, c.case, c.delta, c.tolerance
            ),
            None => println!(
                "  {} {}: delta {:.3e} > tolerance {:.3e}",
                c.criterion, c.case, c.delta, c.tolerance
            ),
        }
    }
}

fn run(cli: Cli) -> irslab::Result<bool> {
    match cli.command {
        Command::Run {
            spec,
            trials,
            seed,
            out,
            mode,
            parallel,
        } => {
            let mut spec = load_spec(&spec)?;
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(m) = mode {
                spec.mode = m.parse::<FormulaMode>()?;
            }
            spec.validate()?;
            let dir = out.unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
            let output = run_and_write(&spec, &dir, parallel)?;
            println!(
                "{}: {} series written to {} ({} trials, seed {}, {} mode)",
                spec.name,
                output.series.len(),
                dir.display(),
                spec.trials,
                spec.seed,
                spec.mode
            );
            let has_mc = output.series.iter().any(|s| s.meta.output.montecarlo());
            let has_analytic = output.series.iter().any(|s| s.meta.output.analytic());
            if !(has_mc && has_analytic) {
                println!("no analytic/Monte-Carlo pairs to compare");
                return Ok(true);
            }
            let paired: Vec<_> = output
                .series
                .into_iter()
                .filter(|s| s.meta.output.montecarlo() && s.meta.output.analytic())
                .collect();
            let report = compare(spec.kind, &paired)?;
            print_report(&report);
            Ok(report.passed())
        }
        Command::Compare { dir } => {
            let report = compare_dir(&dir)?;
            print_report(&report);
            Ok(report.passed())
        }
        Command::Spec { name } => {
            let spec = ExperimentSpec::builtin(&name).ok_or_else(|| {
                irslab::Error::invalid("name", format!("unknown built-in; choose one of {}", BUILTIN_NAMES.join(", ")))
            })?;
            println!("{}", spec.to_json()?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
