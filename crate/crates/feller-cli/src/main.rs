use clap::{Args, Parser, Subcommand, ValueEnum};
use feller_cli::config::ConfigFile;
use feller_cli::runner::{run_experiment, RunError};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

/// Numerical laboratory for Markov-Feller semigroup regularity.
#[derive(Parser)]
#[command(name = "feller", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo dual curve `t -> P_t f(x)`.
    Dual(RunArgs),
    /// Regularity moduli (e / eventual-e / eventual-continuity /
    /// strong-continuity / mixing) with verdicts.
    Modulus(RunArgs),
    /// Measure decomposition with telescoping-identity verification.
    Decompose(RunArgs),
    /// Cesaro convergence toward the ergodic measure.
    Cesaro(RunArgs),
    /// Wasserstein-1 stability curves between two starts.
    Stability(RunArgs),
    /// Bundle of sub-experiments from one config.
    Report(RunArgs),
}

impl Command {
    fn experiment_kind(&self) -> &'static str {
        match self {
            Command::Dual(_) => "dual",
            Command::Modulus(_) => "modulus",
            Command::Decompose(_) => "decompose",
            Command::Cesaro(_) => "cesaro",
            Command::Stability(_) => "stability",
            Command::Report(_) => "report-bundle",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Dual(a)
            | Command::Modulus(a)
            | Command::Decompose(a)
            | Command::Cesaro(a)
            | Command::Stability(a)
            | Command::Report(a) => a,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output base path; `.csv` / `.json` are appended. Falls back to the
    /// config's [output].path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; falls back to the config's [output].format, then csv.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Seed override (the config seed is used otherwise; one of the two
    /// must be present).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent grid cells.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Both,
}

fn fail(err: RunError) -> ExitCode {
    eprintln!("feller: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.experiment_kind();
    let args = cli.command.args();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(RunError::Io(e)),
    };
    let mut config = match ConfigFile::parse(&text) {
        Ok(c) => c,
        Err(e) => return fail(RunError::Schema(e)),
    };

    // the subcommand names the experiment; a conflicting config is a
    // schema error, an absent one inherits the subcommand
    match &config.experiment {
        Some(k) if k != kind => {
            return fail(RunError::Schema(format!(
                "config experiment {k:?} does not match subcommand {kind:?}"
            )))
        }
        _ => config.experiment = Some(kind.to_string()),
    }

    let seed = match args.seed.or(config.seed) {
        Some(s) => s,
        None => {
            return fail(RunError::Schema(
                "seed is mandatory (config `seed` or --seed)".into(),
            ))
        }
    };

    let out_base: PathBuf = match args
        .out
        .clone()
        .or_else(|| config.output.as_ref().and_then(|o| o.path.clone().map(Into::into)))
    {
        Some(p) => p,
        None => {
            return fail(RunError::Schema(
                "output path is mandatory (--out or [output].path)".into(),
            ))
        }
    };
    let format = args.format.unwrap_or_else(|| {
        match config
            .output
            .as_ref()
            .and_then(|o| o.format.as_deref())
            .unwrap_or("csv")
        {
            "json" => OutputFormat::Json,
            "both" => OutputFormat::Both,
            _ => OutputFormat::Csv,
        }
    });

    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(RunError::Schema(format!("thread pool: {e}")));
        }
    }

    let bundle = match run_experiment(&config, seed) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };

    if let Some(dir) = out_base.parent() {
        if !dir.as_os_str().is_empty() {
            if let Err(e) = std::fs::create_dir_all(dir) {
                return fail(RunError::Io(e));
            }
        }
    }
    let now_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let write = |fmt: OutputFormat| -> Result<(), RunError> {
        match fmt {
            OutputFormat::Csv => bundle
                .write_csv(&out_base.with_extension("csv"))
                .map_err(RunError::Io),
            OutputFormat::Json => bundle
                .write_json(&out_base.with_extension("json"), now_ms)
                .map_err(RunError::Io),
            OutputFormat::Both => {
                bundle
                    .write_csv(&out_base.with_extension("csv"))
                    .map_err(RunError::Io)?;
                bundle
                    .write_json(&out_base.with_extension("json"), now_ms)
                    .map_err(RunError::Io)
            }
        }
    };
    if let Err(e) = write(format) {
        return fail(e);
    }

    let n_rows: usize = bundle.experiments.iter().map(|e| e.rows.len()).sum();
    println!(
        "wrote {} experiment(s), {} row(s) to {}.*",
        bundle.experiments.len(),
        n_rows,
        out_base.display()
    );
    ExitCode::SUCCESS
}
