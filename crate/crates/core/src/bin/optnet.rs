use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optnet::error::{Error, Result};
use optnet::experiment::{cmd_grc, cmd_optimize, cmd_validate, PartialConfig};
use optnet::instances::{builtin, generate_leaf, LeafSpec};

/// Optimal transport networks: loops, trees, and hierarchy.
#[derive(Parser)]
#[command(name = "optnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo spanning-tree optimization for each γ.
    Optimize(ExperimentArgs),
    /// GRC statistics per γ, written to grc.json and grc.csv.
    Grc(ExperimentArgs),
    /// Compare the tree search with the convex optimum at γ = 1.
    Validate(ValidateArgs),
    /// Write a builtin instance as network JSON.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Network JSON file or `builtin:<name>`.
    #[arg(long)]
    instance: Option<String>,
    /// Comma-separated exponents in (0, 1].
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out")]
    output_dir: Option<PathBuf>,
    /// TOML file with the same keys; command-line values take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: String,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Write validation.json here instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// `leaf122` or a canonical test instance name.
    #[arg(long)]
    builtin: String,
    #[arg(long)]
    out: PathBuf,
    /// Leaf geometry overrides.
    #[arg(long)]
    semi_major: Option<f64>,
    #[arg(long)]
    semi_minor: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    jitter_seed: Option<u64>,
}

impl ExperimentArgs {
    fn resolve(self) -> Result<optnet::experiment::ExperimentConfig> {
        let file = match &self.config {
            Some(path) => PartialConfig::from_toml_file(path)?,
            None => PartialConfig::default(),
        };
        PartialConfig {
            instance: self.instance,
            gammas: self.gammas,
            runs: self.runs,
            nu: self.nu,
            seed: self.seed,
            output_dir: self.output_dir,
            threads: self.threads,
        }
        .over(file)
        .resolve()
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Optimize(args) => {
            for path in cmd_optimize(&args.resolve()?)? {
                println!("{}", path.display());
            }
        }
        Command::Grc(args) => {
            let out = cmd_grc(&args.resolve()?)?;
            println!("gamma,grc_best,grc_std");
            for e in out.entries {
                println!("{},{},{}", e.gamma, e.grc_best, e.grc_std);
            }
        }
        Command::Validate(args) => {
            let v = cmd_validate(&args.instance, args.runs, args.seed, args.nu, args.threads)?;
            let json = serde_json::to_string_pretty(&v)? + "\n";
            match &args.out {
                Some(path) => write(path, &json)?,
                None => print!("{json}"),
            }
            eprintln!(
                "convex {:.12} best {:.12} exact {:.4} within 1% {:.4}",
                v.convex_energy, v.best_tree_energy, v.exact_fraction, v.within_1pct_fraction
            );
            if !v.consistent {
                eprintln!("error: a spanning tree undercuts the convex optimum");
                return Ok(false);
            }
        }
        Command::Generate(args) => {
            let net = if args.builtin == "leaf122" {
                let d = LeafSpec::default();
                let spec = LeafSpec {
                    semi_major: args.semi_major.unwrap_or(d.semi_major),
                    semi_minor: args.semi_minor.unwrap_or(d.semi_minor),
                    jitter: args.jitter.unwrap_or(d.jitter),
                    jitter_seed: args.jitter_seed.unwrap_or(d.jitter_seed),
                    ..d
                };
                generate_leaf(&spec)?.network
            } else {
                builtin(&args.builtin)
                    .ok_or_else(|| Error::Config(format!("unknown builtin {:?}", args.builtin)))?
            };
            write(&args.out, &(serde_json::to_string_pretty(&net)? + "\n"))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
