use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geocontact::scenario::{self, Scenario, SummaryMetrics};
use geocontact::Error;

/// Run rolling-contact scenarios and write trajectory logs.
#[derive(Parser)]
#[command(name = "geocontact", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled scenario by name) and write CSV logs
    /// plus a JSON summary.
    Run {
        scenario: String,
        /// Output directory; overrides GEOCONTACT_OUT_DIR and the file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Integrator step in seconds.
        #[arg(long)]
        step: Option<f64>,
        /// Seed for randomized initial slip.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: String },
    /// List the bundled scenarios.
    ListBuiltin,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn load(arg: &str) -> Result<Scenario, Error> {
    let path = Path::new(arg);
    if !path.exists() && scenario::builtin_names().any(|n| n == arg) {
        return scenario::builtin(arg);
    }
    scenario::load_scenario(path)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "never".to_string(), |x| format!("{x:.4} s"))
}

fn print_summary(s: &SummaryMetrics) {
    println!("scenario {} ({:?}), {} samples per contact", s.scenario, s.mode, s.samples);
    for c in &s.contacts {
        print!(
            "  contact {}: max |v_rel| {:.3e} m/s, rejection {}",
            c.index,
            c.max_v_rel,
            fmt_opt(c.rejection_time)
        );
        if let Some(f) = &c.forces {
            print!(
                ", max |f_t| {:.4} N, saturated samples {}, cone violations {}",
                f.max_tangential_force, f.saturated_samples, f.cone_violations
            );
        }
        if let Some(k) = &c.corollary {
            print!(", geodesic residual {:.3e}", k.max_geodesic_residual);
            if let Some(p) = k.max_plane_deviation {
                print!(", plane deviation {p:.3e} m");
            }
        }
        println!();
    }
    if s.contraction_warnings > 0 {
        println!("  warning: contraction condition failed at {} evaluations", s.contraction_warnings);
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { scenario: arg, out, step, seed } => {
            let mut sc = load(&arg)?;
            if let Some(step) = step {
                sc.integrator.step = step;
            }
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            sc.validate()?;
            let result = scenario::run(&sc)?;
            let dir = scenario::resolve_output_dir(out.as_deref(), &sc);
            let written = scenario::write_outputs(&sc, &result, &dir)?;
            print_summary(&result.summary);
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Validate { scenario: arg } => {
            let sc = load(&arg)?;
            println!("{}: ok ({:?}, {} contacts)", sc.name, sc.mode, sc.contacts.len());
        }
        Command::ListBuiltin => {
            for name in scenario::builtin_names() {
                let sc = scenario::builtin(name)?;
                let first = sc.description.lines().next().unwrap_or_default();
                println!("{name:<28} {first}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL })
        }
    }
}
