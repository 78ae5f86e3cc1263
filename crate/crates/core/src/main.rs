use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracdtn::cache::{default_cache_dir, FactorizationCache};
use fracdtn::config::ScenarioConfig;
use fracdtn::experiment::{run_experiment, RunOptions};
use fracdtn::Error;

#[derive(Parser)]
#[command(name = "fracdtn", version, about = "Fractional exterior DtN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment declared in a JSON config.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "fracdtn-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Recompute the spectral factorization instead of using the cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Manage the factorization cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print the cache directory.
    Path,
    List,
    Clear,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    faer::set_global_parallelism(faer::Par::Seq);
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run { config, out, threads, seed, no_cache } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let cache = (!no_cache).then(FactorizationCache::from_env);
            let summary = run_experiment(&cfg, &RunOptions { out: out.clone(), threads, seed, cache })?;
            println!("{}: wrote {} and {} artifact(s)", summary.result["experiment"].as_str().unwrap_or(""), out.join("result.json").display(), summary.files.len());
            Ok(0)
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let diagnostics = cfg.validate();
            if diagnostics.is_empty() {
                println!("{}: ok ({})", config.display(), cfg.experiment.name());
                return Ok(0);
            }
            for d in &diagnostics {
                eprintln!("{}: {}", d.path, d.message);
            }
            Ok(2)
        }
        Command::Cache { action } => {
            let cache = FactorizationCache::new(default_cache_dir());
            match action {
                CacheAction::Path => println!("{}", cache.dir().display()),
                CacheAction::List => {
                    for e in cache.list()? {
                        let m = &e.metadata;
                        println!("{}  n={} m={} R={} size={} bytes={}", m.key, m.dim, m.nodes_per_axis, m.half_width, m.size, e.bytes);
                    }
                }
                CacheAction::Clear => println!("removed {} cache entries", cache.clear()?),
            }
            Ok(0)
        }
    }
}
