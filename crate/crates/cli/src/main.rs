use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsgeom::check::Verdict;
use tsverify::manifest::{parse_ab, ModeName};
use tsverify::{
    classify, classify_json, emit_json, emit_markdown, load_manifest, run, table1_markdown, ConfigError, Manifest,
    Overrides, Sampling, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS,
};

#[derive(Parser)]
#[command(name = "tsverify", version, about = "Numerical verifier for Hermitian structures on products of trans-Sasakian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a manifest and print the JSON report.
    Verify {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a manifest and print the report in the chosen format.
    Report {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Reproduce the particular-cases table on the (a, b) grid.
    Table1 {
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Fit (α, β) for every factor of a manifest and assign its class.
    Classify {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    #[value(alias = "markdown")]
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Jet,
    Fd,
}

#[derive(Args)]
struct Common {
    /// Pass tolerance (fail above 100 tol).
    #[arg(long)]
    tol: Option<f64>,
    /// Number of sample points.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Base step of the finite-difference mode.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Replace the (a, b) grid; repeatable.
    #[arg(long = "ab", value_name = "A,B", allow_hyphen_values = true, value_parser = parse_ab)]
    ab: Vec<(f64, f64)>,
    /// Evaluate at this single point instead of sampling.
    #[arg(long, value_name = "X1,X2,...", allow_hyphen_values = true, value_delimiter = ',')]
    at: Option<Vec<f64>>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Leave the wall-time object out of the JSON report.
    #[arg(long)]
    no_timings: bool,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol: self.tol,
            samples: self.samples,
            seed: self.seed,
            mode: self.mode.map(|m| match m {
                Mode::Jet => ModeName::Jet,
                Mode::Fd => ModeName::Fd,
            }),
            fd_step: self.fd_step,
            grid: self.ab.clone(),
        }
    }

    fn sampling(&self) -> Sampling {
        self.at.clone().map(Sampling::At).unwrap_or_default()
    }
}

fn config_error(e: &ConfigError) -> ExitCode {
    eprintln!("configuration error {e}");
    ExitCode::from(EXIT_CONFIG as u8)
}

fn load(path: Option<&PathBuf>, common: &Common) -> Result<Manifest, ConfigError> {
    let mut m = match path {
        Some(p) => load_manifest(p)?,
        None => Manifest::table1(),
    };
    m.apply(&common.overrides())?;
    Ok(m)
}

fn write(common: &Common, text: &str) -> Result<(), ConfigError> {
    match &common.output {
        Some(p) => std::fs::write(p, text).map_err(|e| ConfigError::new("", format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (manifest, common, format) = match &cli.command {
        Command::Verify { manifest, common } => (Some(manifest), common, Format::Json),
        Command::Report {
            manifest,
            format,
            common,
        } => (Some(manifest), common, *format),
        Command::Table1 { format, common } => (None, common, *format),
        Command::Classify { manifest, common } => (Some(manifest), common, Format::Json),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure the thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let m = match load(manifest, common) {
        Ok(m) => m,
        Err(e) => return config_error(&e),
    };
    let (text, pass) = if let Command::Classify { .. } = cli.command {
        let cs = classify(&m, &common.sampling());
        let pass = cs.iter().all(|c| c.verdict == Verdict::Pass);
        (classify_json(&m, &cs), pass)
    } else {
        let r = run(&m, &common.sampling());
        let text = match (format, &cli.command, &r.table1) {
            (Format::Md, Command::Table1 { .. }, Some(t)) => table1_markdown(t),
            (Format::Md, _, _) => emit_markdown(&r),
            (Format::Json, _, _) => emit_json(&r, !common.no_timings),
        };
        (text, r.exit_code() == EXIT_PASS)
    };
    if let Err(e) = write(common, &text) {
        return config_error(&e);
    }
    ExitCode::from(if pass { EXIT_PASS } else { EXIT_FAIL } as u8)
}
