//! Experiment orchestration behind the command-line interface: γ-sweeps,
//! hierarchy statistics, the γ = 1 validation, and result files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::centrality::{flux_grc, run_grc_values};
use crate::convex::{extract_tree_support, minimize_convex, support_energy, GradientConfig, TreeSupport};
use crate::descent::{mean_std, monte_carlo, DescentConfig, McSummary};
use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::graph::{tree_fluxes, validate_network, Network, SpanningTree};
use crate::instances::builtin;
use crate::render::{to_dot, to_svg};

pub const DEFAULT_GAMMAS: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const DEFAULT_RUNS: usize = 1000;

/// Relative gap to the convex optimum counted as an exact hit.
pub const EXACT_GAP: f64 = 1e-9;
/// Relative gap counted as a near hit.
pub const NEAR_GAP: f64 = 0.01;
/// A tree may undercut the convex optimum by at most this relative amount.
pub const CONVEX_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// File path, or `builtin:<name>`.
    pub instance: String,
    pub gammas: Vec<f64>,
    pub runs: usize,
    pub nu: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Partial settings read from a TOML config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub instance: Option<String>,
    pub gammas: Option<Vec<f64>>,
    pub runs: Option<usize>,
    pub nu: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl PartialConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fills unset fields from `lower`.
    pub fn over(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            instance: self.instance.or(lower.instance),
            gammas: self.gammas.or(lower.gammas),
            runs: self.runs.or(lower.runs),
            nu: self.nu.or(lower.nu),
            seed: self.seed.or(lower.seed),
            output_dir: self.output_dir.or(lower.output_dir),
            threads: self.threads.or(lower.threads),
        }
    }

    /// Applies defaults; `instance` and `seed` have none.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            instance: self
                .instance
                .ok_or_else(|| Error::Config("an instance is required".into()))?,
            gammas: self.gammas.unwrap_or_else(|| DEFAULT_GAMMAS.to_vec()),
            runs: self.runs.unwrap_or(DEFAULT_RUNS),
            nu: self.nu.unwrap_or(1.0),
            seed: self
                .seed
                .ok_or_else(|| Error::Config("a seed is required for experiments".into()))?,
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            threads: self.threads,
        };
        cfg.check()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::Config("at least one gamma is required".into()));
        }
        for &g in &self.gammas {
            ModelParams::new(g, self.nu).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

/// Loads `builtin:<name>` or a network JSON file and validates it.
pub fn load_instance(spec: &str) -> Result<Network> {
    let net = if let Some(name) = spec.strip_prefix("builtin:") {
        builtin(name).ok_or_else(|| Error::Config(format!("unknown builtin instance {name:?}")))?
    } else {
        let path = Path::new(spec);
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)?
    };
    validate_network(&net).into_result()?;
    Ok(net)
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// File name label for a γ value: `0.1`, `1.0`, ...
pub fn gamma_label(gamma: f64) -> String {
    format!("{gamma:?}")
}

/// Persisted Monte-Carlo results for one γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub gamma: f64,
    pub nu: f64,
    pub seed: u64,
    pub runs: usize,
    pub best_run: usize,
    pub best_energy: f64,
    pub worst_energy: f64,
    pub energy_std: f64,
    pub best_tree_edges: Vec<[usize; 2]>,
    pub energies: Vec<f64>,
    pub swaps_accepted: Vec<usize>,
    pub grc_values: Option<Vec<f64>>,
}

impl SummaryFile {
    pub fn from_summary(net: &Network, params: &ModelParams, seed: u64, s: &McSummary) -> Self {
        SummaryFile {
            gamma: params.gamma(),
            nu: params.nu(),
            seed,
            runs: s.run_count(),
            best_run: s.best_index,
            best_energy: s.best_energy,
            worst_energy: s.worst_energy,
            energy_std: s.energy_std,
            best_tree_edges: s
                .best_run()
                .final_tree
                .edge_pairs(net)
                .into_iter()
                .map(|(i, j)| [i, j])
                .collect(),
            energies: s.energies(),
            swaps_accepted: s.runs.iter().map(|r| r.swaps_accepted).collect(),
            grc_values: s.grc_values.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Best tree rebuilt against `net`.
    pub fn best_tree(&self, net: &Network) -> Result<SpanningTree> {
        let edges = self
            .best_tree_edges
            .iter()
            .map(|&[i, j]| {
                net.find_edge(i, j)
                    .ok_or_else(|| Error::Usage(format!("summary edge ({i},{j}) not in network")))
            })
            .collect::<Result<Vec<_>>>()?;
        SpanningTree::new(net, edges)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Monte-Carlo descent for one γ with per-run GRC attached.
pub fn run_gamma(net: &Network, gamma: f64, cfg: &ExperimentConfig) -> Result<(ModelParams, McSummary)> {
    let params = ModelParams::new(gamma, cfg.nu)?;
    let dcfg = DescentConfig::new(params, cfg.seed);
    let mut summary = with_threads(cfg.threads, || monte_carlo(net, &dcfg, cfg.runs))??;
    summary.grc_values = Some(run_grc_values(net, &summary)?);
    Ok((params, summary))
}

/// For each γ writes `summary_<γ>.json`, `network_<γ>.dot` and, when the
/// network has coordinates, `network_<γ>.svg`. Returns the written paths.
pub fn cmd_optimize(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.check()?;
    let net = load_instance(&cfg.instance)?;
    ensure_dir(&cfg.output_dir)?;
    let mut written = Vec::new();
    for &gamma in &cfg.gammas {
        let (params, summary) = run_gamma(&net, gamma, cfg)?;
        let file = SummaryFile::from_summary(&net, &params, cfg.seed, &summary);
        let label = gamma_label(gamma);
        let q = tree_fluxes(&net, &summary.best_run().final_tree)?;

        let path = cfg.output_dir.join(format!("summary_{label}.json"));
        write_file(&path, &file.to_json()?)?;
        written.push(path);
        let path = cfg.output_dir.join(format!("network_{label}.dot"));
        write_file(&path, &to_dot(&net, &q))?;
        written.push(path);
        if let Some(svg) = to_svg(&net, &q) {
            let path = cfg.output_dir.join(format!("network_{label}.svg"));
            write_file(&path, &svg)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrcEntry {
    pub gamma: f64,
    /// GRC of the lowest-energy network.
    pub grc_best: f64,
    pub grc_mean: f64,
    pub grc_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrcFile {
    pub instance: String,
    pub entries: Vec<GrcEntry>,
}

/// GRC statistics per γ, from existing summaries in the output directory
/// when they match the configuration, otherwise computed inline.
/// Writes `grc.json` and `grc.csv` (`gamma,grc_best,grc_std`).
pub fn cmd_grc(cfg: &ExperimentConfig) -> Result<GrcFile> {
    cfg.check()?;
    let net = load_instance(&cfg.instance)?;
    ensure_dir(&cfg.output_dir)?;
    let mut entries = Vec::new();
    for &gamma in &cfg.gammas {
        let path = cfg
            .output_dir
            .join(format!("summary_{}.json", gamma_label(gamma)));
        let stored = if path.exists() {
            Some(SummaryFile::read(&path)?)
        } else {
            None
        };
        let file = match stored {
            Some(f) if f.seed == cfg.seed && f.runs == cfg.runs && f.nu == cfg.nu && f.grc_values.is_some() => f,
            _ => {
                let (params, summary) = run_gamma(&net, gamma, cfg)?;
                SummaryFile::from_summary(&net, &params, cfg.seed, &summary)
            }
        };
        let best = file.best_tree(&net)?;
        let grc_best = flux_grc(&net, &tree_fluxes(&net, &best)?)?.grc;
        let values = file
            .grc_values
            .as_ref()
            .ok_or_else(|| Error::Usage("summary lacks per-run GRC values".into()))?;
        let (grc_mean, grc_std) = mean_std(values);
        entries.push(GrcEntry {
            gamma,
            grc_best,
            grc_mean,
            grc_std,
        });
    }
    let out = GrcFile {
        instance: cfg.instance.clone(),
        entries,
    };
    let mut json = serde_json::to_string_pretty(&out)?;
    json.push('\n');
    write_file(&cfg.output_dir.join("grc.json"), &json)?;
    let mut csv = String::from("gamma,grc_best,grc_std\n");
    for e in &out.entries {
        csv.push_str(&format!("{},{},{}\n", gamma_label(e.gamma), e.grc_best, e.grc_std));
    }
    write_file(&cfg.output_dir.join("grc.csv"), &csv)?;
    Ok(out)
}

/// Outcome of comparing the tree search with the convex optimum at γ = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub runs: usize,
    pub seed: u64,
    pub nu: f64,
    pub convex_energy: f64,
    pub convex_iterations: usize,
    /// Whether the convex minimizer's support (`C > 1e-6·max C`) is a spanning tree.
    pub convex_support_is_tree: bool,
    pub best_tree_energy: f64,
    /// `(E_run − E_convex) / E_convex` per run.
    pub gaps: Vec<f64>,
    pub exact_fraction: f64,
    pub within_1pct_fraction: f64,
    /// False if some tree undercuts the convex optimum by more than [`CONVEX_SLACK`].
    pub consistent: bool,
}

/// Runs the convex baseline and `runs` descents at γ = 1 and compares them.
pub fn cmd_validate(
    instance: &str,
    runs: usize,
    seed: u64,
    nu: f64,
    threads: Option<usize>,
) -> Result<ValidationSummary> {
    let net = load_instance(instance)?;
    validate_network_at_gamma_one(&net, runs, seed, nu, threads)
}

/// [`cmd_validate`] on an already loaded network.
pub fn validate_network_at_gamma_one(
    net: &Network,
    runs: usize,
    seed: u64,
    nu: f64,
    threads: Option<usize>,
) -> Result<ValidationSummary> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let convex = minimize_convex(net, &GradientConfig::with_nu(nu))?;
    let cmax = convex.conductivities.values().iter().fold(0.0f64, |m, &c| m.max(c));
    let support = extract_tree_support(&convex.conductivities, net, 1e-6 * cmax);
    let convex_support_is_tree = match &support {
        TreeSupport::Tree(t) => {
            // a tree support must reproduce the optimum it came from
            let e = support_energy(net, t, nu)?;
            (e - convex.energy).abs() <= 1e-6 * convex.energy
        }
        TreeSupport::NotATree { .. } => false,
    };

    let params = ModelParams::new(1.0, nu)?;
    let dcfg = DescentConfig::new(params, seed);
    let summary = with_threads(threads, || monte_carlo(net, &dcfg, runs))??;
    let gaps: Vec<f64> = summary
        .energies()
        .iter()
        .map(|e| (e - convex.energy) / convex.energy)
        .collect();
    let frac = |limit: f64| gaps.iter().filter(|&&g| g <= limit).count() as f64 / runs as f64;
    Ok(ValidationSummary {
        runs,
        seed,
        nu,
        convex_energy: convex.energy,
        convex_iterations: convex.iterations,
        convex_support_is_tree,
        best_tree_energy: summary.best_energy,
        exact_fraction: frac(EXACT_GAP),
        within_1pct_fraction: frac(NEAR_GAP),
        consistent: gaps.iter().all(|&g| g >= -CONVEX_SLACK),
        gaps,
    })
}
