use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use peierls_lab::scenario::report::OutputDir;
use peierls_lab::scenario::{self, Command, ScenarioConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    /// Euler-Lagrange residual and normal hyperbolicity at a background.
    ElCheck,
    /// Impulse response of a Green operator, with an optional dense kernel dump.
    Green,
    /// Peierls bracket of two configured functionals.
    Bracket,
    /// The invariant suite; exits 2 if any criterion fails.
    Verify,
    /// Convergence table of a quantity under halving of the spacing.
    Converge,
    /// Wave-map bracket scenarios.
    Wavemap,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::ElCheck => Command::ElCheck,
            Sub::Green => Command::Green,
            Sub::Bracket => Command::Bracket,
            Sub::Verify => Command::Verify,
            Sub::Converge => Command::Converge,
            Sub::Wavemap => Command::Wavemap,
        }
    }
}

/// Discrete Peierls-bracket workbench.
#[derive(Debug, Parser)]
#[command(name = "peierls-lab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out_dir` (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random data; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides CFT_THREADS and `run.threads`.
    #[arg(long)]
    threads: Option<usize>,
}

fn threads(cli: Option<usize>, cfg: Option<usize>) -> anyhow::Result<Option<usize>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match std::env::var("CFT_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("CFT_THREADS: not a thread count: `{v}`"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(cfg),
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let mut cfg = ScenarioConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(n) = threads(cli.threads, cfg.run.threads)? {
        if n == 0 {
            anyhow::bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let out_path = cli
        .out
        .or_else(|| cfg.run.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let out = OutputDir::create(&out_path)?;
    let outcome = scenario::run(cli.command.into(), &cfg, &out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!(
        "{}: {} (report in {})",
        Command::from(cli.command).name(),
        if outcome.passed { "pass" } else { "FAIL" },
        out_path.display()
    );
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
