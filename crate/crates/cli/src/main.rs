mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::*;
use output::{Format, RunManifest};

/// Seed used when neither `--seed` nor the environment sets one.
const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "cascade-boot", version, about = "Bootstrapped random matrix products and their correlations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed for every random draw.
    #[arg(long, global = true, env = "CASCADE_BOOT_SEED")]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Output directory (a file for `pool gen`); a manifest is written alongside.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Count permutations by K.
    Enumerate(EnumerateArgs),
    /// K and the cycles of sigma for one permutation.
    Kvalue(KvalueArgs),
    /// Closed-form covariance between the ordered and permuted products.
    Covariance(CovarianceArgs),
    /// Monte Carlo estimate of the total covariance.
    McCov(McCovArgs),
    /// Run the dual-pool pipeline from a config file.
    Simulate(SimulateArgs),
    /// Matrix generations and products per approach.
    Cost(CostArgs),
    /// Measure the bias of the sample mean.
    BiasDemo(BiasArgs),
    /// Predict the estimator variance from a set of sequences.
    PredictVar(PredictArgs),
    /// Generate or inspect matrix pools.
    #[command(subcommand)]
    Pool(PoolCommand),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Enumerate(_) => "enumerate",
            Command::Kvalue(_) => "kvalue",
            Command::Covariance(_) => "covariance",
            Command::McCov(_) => "mc-cov",
            Command::Simulate(_) => "simulate",
            Command::Cost(_) => "cost",
            Command::BiasDemo(_) => "bias-demo",
            Command::PredictVar(_) => "predict-var",
            Command::Pool(PoolCommand::Gen(_)) => "pool gen",
            Command::Pool(PoolCommand::Info(_)) => "pool info",
            Command::Verify(_) => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let started = output::unix_now();
    let common = cli.common;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let seed = common.seed.unwrap_or(DEFAULT_SEED);
    let name = cli.command.name();
    let (report, config, uses_seed) = match cli.command {
        Command::Enumerate(a) => (enumerate(&a)?, serde_json::to_value(&a)?, false),
        Command::Kvalue(a) => (kvalue(&a)?, serde_json::to_value(&a)?, false),
        Command::Covariance(a) => (covariance(&a)?, serde_json::to_value(&a)?, false),
        Command::McCov(a) => (mc_cov(&a, seed)?, serde_json::to_value(&a)?, true),
        Command::Simulate(a) => {
            let (report, config) = simulate(&a, common.seed)?;
            (report, config, true)
        }
        Command::Cost(a) => (cost(&a)?, serde_json::to_value(&a)?, false),
        Command::BiasDemo(a) => (bias_demo(&a, seed)?, serde_json::to_value(&a)?, true),
        Command::PredictVar(a) => (predict_var(&a)?, serde_json::to_value(&a)?, false),
        Command::Pool(PoolCommand::Gen(a)) => {
            let path = common.out.clone().context("pool gen needs --out FILE")?;
            let report = pool_gen(&a, seed, &path)?;
            print!("{}", report.render(common.format));
            let manifest = RunManifest {
                command_line: std::env::args().collect(),
                subcommand: name.to_string(),
                config: serde_json::to_value(&a)?,
                master_seed: Some(seed),
                workers: rayon::current_num_threads(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix: started,
                finished_unix: output::unix_now(),
                outputs: vec![output::digest(&path)?],
            };
            let mut manifest_path = path.into_os_string();
            manifest_path.push(".manifest.json");
            output::write_manifest(&PathBuf::from(manifest_path), &manifest)?;
            return Ok(report.ok);
        }
        Command::Pool(PoolCommand::Info(a)) => (pool_info(&a)?, serde_json::to_value(&a)?, false),
        Command::Verify(a) => (verify(&a), serde_json::to_value(&a)?, false),
    };
    let seed_used = uses_seed.then(|| report.json["seed"].as_u64().unwrap_or(seed));
    print!("{}", report.render(common.format));
    if let Some(dir) = &common.out {
        let written = output::write_outputs(dir, &report, common.format)?;
        let manifest = RunManifest {
            command_line: std::env::args().collect(),
            subcommand: name.to_string(),
            config,
            master_seed: seed_used,
            workers: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: started,
            finished_unix: output::unix_now(),
            outputs: written.iter().map(|p| output::digest(p)).collect::<Result<_>>()?,
        };
        output::write_manifest(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(report.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
