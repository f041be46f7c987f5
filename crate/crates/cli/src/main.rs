use std::path::PathBuf;
use std::process::ExitCode;

use banknet::scenario::{self, Experiment, FamilyName, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

/// Interbank contagion and allocation experiments.
#[derive(Parser)]
#[command(name = "banknet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and manifest.
    Run(Overrides),
    /// Check a scenario and print any problems.
    Validate(Overrides),
}

/// Flags override values from `--config`.
#[derive(Args)]
struct Overrides {
    /// Scenario TOML file (a previous run's manifest also works).
    #[arg(long, env = "BANKNET_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "BANKNET_EXPERIMENT")]
    experiment: Option<Experiment>,
    /// Reference network `a`..`h`, `complete:N`, `star:N` or `empty:N`.
    #[arg(long, env = "BANKNET_TOPOLOGY")]
    topology: Option<String>,
    /// Edge-list file: bank count on the first line, then `i j` per link.
    #[arg(long, env = "BANKNET_EDGES")]
    edges: Option<PathBuf>,
    /// Stand-alone failure probability of a single-asset bank.
    #[arg(long, env = "BANKNET_P")]
    p: Option<f64>,
    /// Cost exponent.
    #[arg(long, env = "BANKNET_S")]
    s: Option<f64>,
    /// Correlation of assets 1-5 with the diversified asset.
    #[arg(long, env = "BANKNET_RHO")]
    rho: Option<f64>,
    /// `normal` or `student_t`.
    #[arg(long, env = "BANKNET_FAMILY")]
    family: Option<FamilyName>,
    /// Degrees of freedom for `student_t`.
    #[arg(long, env = "BANKNET_V")]
    v: Option<f64>,
    #[arg(long, env = "BANKNET_DRAWS")]
    draws: Option<usize>,
    #[arg(long, env = "BANKNET_SEED")]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "BANKNET_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "BANKNET_OUT")]
    out: Option<PathBuf>,
}

impl Overrides {
    fn config(&self) -> Result<ScenarioConfig, scenario::ScenarioError> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($dst:expr => $src:expr),* $(,)?) => {
                $(if let Some(v) = $src.clone() { $dst = Some(v); })*
            };
        }
        set!(
            cfg.experiment => self.experiment,
            cfg.topology => self.topology,
            cfg.edges => self.edges,
            cfg.universe.p => self.p,
            cfg.cost.s => self.s,
            cfg.universe.rho => self.rho,
            cfg.universe.family => self.family,
            cfg.universe.v => self.v,
            cfg.draws => self.draws,
            cfg.seed => self.seed,
            cfg.out_dir => self.out,
        );
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run) = match &cli.command {
        Command::Run(a) => (a, true),
        Command::Validate(a) => (a, false),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if !run {
        let problems = scenario::validate(&cfg);
        if problems.is_empty() {
            println!("ok");
            return ExitCode::SUCCESS;
        }
        for d in &problems {
            eprintln!("{d}");
        }
        return ExitCode::FAILURE;
    }
    match scenario::run(&cfg) {
        Ok(out) => {
            println!("{}", out.csv.display());
            println!("{}", out.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
