use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use finslerb_cli::config::{load_config, ReportFormat};
use finslerb_cli::suites::{run_suite, Suite};

/// Verification runner for Finsler bundle-metric geometry: loads a model and
/// a six-profile bundle metric from a config file, runs the named check
/// suite on deterministic samples and emits a machine-readable report.
/// Exit code 0 means every pass/fail check passed.
#[derive(Parser)]
#[command(name = "finslerb", version, about)]
struct Args {
    /// tensors | axioms | levi_civita | incompressibility | fibers |
    /// symmetry | liouville | all
    suite: String,

    /// Path to the TOML configuration
    #[arg(long)]
    config: PathBuf,

    /// Override the sampling seed from the config
    #[arg(long)]
    seed: Option<u64>,

    /// Report format: json | text (overrides the config)
    #[arg(long)]
    format: Option<String>,

    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let Some(suite) = Suite::parse(&args.suite) else {
        eprintln!(
            "unknown suite '{}'; expected tensors, axioms, levi_civita, incompressibility, \
             fibers, symmetry, liouville or all",
            args.suite
        );
        return ExitCode::from(2);
    };
    let mut cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match args.format.as_deref() {
        None => {}
        Some("json") => cfg.format = ReportFormat::Json,
        Some("text") => cfg.format = ReportFormat::Text,
        Some(other) => {
            eprintln!("unknown format '{other}'");
            return ExitCode::from(2);
        }
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.display().to_string());
    }

    let report = match run_suite(&cfg, suite) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let rendered = match cfg.format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Text => report.to_text(),
    };
    if let Some(path) = &cfg.out {
        if let Err(e) = std::fs::write(path, &rendered) {
            eprintln!("cannot write {path}: {e}");
            return ExitCode::from(2);
        }
    } else {
        print!("{rendered}");
    }
    if report.failed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
