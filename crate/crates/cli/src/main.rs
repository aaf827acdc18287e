//! `swmc`: simulate, learn, filter and check linear Gaussian state-space models.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swmc::io::RunConfig;

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "swmc", version, about = "Sliding-window MCMC for linear Gaussian state-space models")]
struct Cli {
    /// Key-value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Draw a synthetic series as CSV.
    Simulate(Opts),
    /// Run the self-tuning learning phase and write the fitted surrogate.
    Learn(Opts),
    /// Stream a series through the sliding-window estimator.
    Filter(Opts),
    /// Tabulate delayed-acceptance efficiency over a grid of step scales.
    Sweep(Opts),
    /// Compare the recursive moments and likelihoods with dense conditionals.
    Oracle(Opts),
    /// Autocorrelation and effective sample size of a chain CSV.
    Diagnose(Opts),
}

/// Settings shared by every verb. Each maps to the config key of the same name.
#[derive(Args, Debug, Default)]
struct Opts {
    /// linear | ou1d | ou2d
    #[arg(long)]
    model: Option<String>,
    /// Input CSV (observations, or a chain for `diagnose`).
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    axes: Option<String>,
    /// constant:DT or ig:ALPHA,BETA
    #[arg(long)]
    lags: Option<String>,
    /// All parameter values, comma separated, on the original scale.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long)]
    tau2: Option<String>,
    #[arg(long)]
    sigma2: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    lambda2: Option<String>,
    #[arg(long)]
    xi2: Option<String>,
    /// Surrogate file written by `learn`.
    #[arg(long)]
    surrogate: Option<String>,
    #[arg(long)]
    chain_out: Option<String>,
    /// Where `simulate` writes the hidden path.
    #[arg(long)]
    truth_out: Option<String>,
    #[arg(long)]
    init_position: Option<String>,
    #[arg(long)]
    init_velocity: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    phase1_iters: Option<String>,
    #[arg(long)]
    phase2_iters: Option<String>,
    #[arg(long)]
    n_mixture: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    eps_grid: Option<String>,
    #[arg(long)]
    sweep_iters: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Continue after a halt instead of stopping.
    #[arg(long)]
    resume: bool,
    /// Any other config key, as KEY=VALUE.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    set: Vec<String>,
}

impl Opts {
    fn pairs(&self) -> CliResult<Vec<(String, String)>> {
        let named = [
            ("model", &self.model),
            ("input", &self.input),
            ("n", &self.n),
            ("axes", &self.axes),
            ("lags", &self.lags),
            ("theta", &self.theta),
            ("phi", &self.phi),
            ("tau2", &self.tau2),
            ("sigma2", &self.sigma2),
            ("gamma", &self.gamma),
            ("lambda2", &self.lambda2),
            ("xi2", &self.xi2),
            ("surrogate", &self.surrogate),
            ("chain_out", &self.chain_out),
            ("truth_out", &self.truth_out),
            ("init_position", &self.init_position),
            ("init_velocity", &self.init_velocity),
            ("window", &self.window),
            ("threshold", &self.threshold),
            ("cutoff", &self.cutoff),
            ("phase1_iters", &self.phase1_iters),
            ("phase2_iters", &self.phase2_iters),
            ("n_mixture", &self.n_mixture),
            ("eps", &self.eps),
            ("horizon", &self.horizon),
            ("eps_grid", &self.eps_grid),
            ("sweep_iters", &self.sweep_iters),
            ("trials", &self.trials),
        ];
        let mut out: Vec<(String, String)> = Vec::new();
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        out.extend(named.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        if self.resume {
            out.push(("resume".into(), "true".into()));
        }
        Ok(out)
    }
}

fn resolve(cli: &Cli, opts: &Opts) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in opts.pairs()? {
        cfg.set(&k, &v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult {
    let opts = match &cli.verb {
        Verb::Simulate(o) | Verb::Learn(o) | Verb::Filter(o) | Verb::Sweep(o) | Verb::Oracle(o) | Verb::Diagnose(o) => o,
    };
    let cfg = resolve(&cli, opts)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.verb {
        Verb::Simulate(_) => commands::simulate(&cfg),
        Verb::Learn(_) => commands::learn(&cfg),
        Verb::Filter(_) => commands::filter(&cfg),
        Verb::Sweep(_) => commands::sweep(&cfg),
        Verb::Oracle(_) => commands::oracle(&cfg),
        Verb::Diagnose(_) => commands::diagnose(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("swmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
