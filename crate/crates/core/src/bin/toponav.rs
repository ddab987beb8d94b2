use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use toponav::agent::{AblationMode, HierarchicalPolicy};
use toponav::bench::{
    check_reachability_bound, estimate_edge_success, estimate_path_success, export_map, export_results, import_map,
    run_benchmark, train_edge_controller, train_seed, BenchmarkConfig, EdgeTraining,
};
use toponav::topo_graph::{NodeId, TopoMap};
use toponav::world::ScenarioKind;
use toponav::{ConfigError, Error};

const SEED_ENV: &str = "TOPONAV_SEED";

#[derive(Parser)]
#[command(name = "toponav", version, about = "Topological map navigation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every seed, then write episodes.jsonl and summary.json.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Estimate per-edge and whole-path success along a map path.
    VerifyReachability {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Node ids of the path; defaults to the longest shortest path from node 0 (at most 3 edges).
        #[arg(long, value_delimiter = ',')]
        path_nodes: Option<Vec<NodeId>>,
        #[arg(long, default_value_t = 2000)]
        trials: u32,
        /// Use a saved map instead of training one on the first seed.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Train on the first seed and write the resulting map.
    ExportMap {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "map.json")]
        out: PathBuf,
    },
    /// Print the effective configuration after defaults and overrides.
    PrintConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<ScenarioKind>,
    #[arg(long)]
    size: Option<i32>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Training episodes per seed.
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long)]
    ablation: Option<AblationMode>,
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    let n: u8 = s.parse().map_err(|_| format!("scenario must be 1, 2 or 3, got `{s}`"))?;
    ScenarioKind::try_from(n)
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(format!("{SEED_ENV}=`{s}`: {e}")))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<BenchmarkConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let doc = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                BenchmarkConfig::parse(&doc)?
            }
            None => BenchmarkConfig::default(),
        };
        if let Some(s) = self.scenario {
            cfg.scenario = s;
        }
        if let Some(n) = self.size {
            cfg.size = n;
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(n) = self.episodes {
            cfg.train_episodes = n;
        }
        if let Some(m) = self.ablation {
            cfg.ablation = m;
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seeds = parse_seed_list(&v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn trained_map(cfg: &BenchmarkConfig) -> Result<(TopoMap, toponav::world::GridWorld), Error> {
    let (agent, world, _) = train_seed(cfg, cfg.seeds[0], None)?;
    Ok((agent.map().clone(), world))
}

/// Longest of the shortest paths out of node 0, cut to at most three edges.
fn default_path(map: &TopoMap) -> Result<Vec<NodeId>, Error> {
    let mut best: Vec<NodeId> = Vec::new();
    for b in map.node_ids().skip(1) {
        if let Some((p, _)) = map.shortest_path(0, b)? {
            if p.len() > best.len() {
                best = p;
            }
        }
    }
    best.truncate(4);
    if best.len() < 2 {
        return Err(Error::Invalid("map has no path with at least one edge; pass --path-nodes".into()));
    }
    Ok(best)
}

fn verify(cfg: &BenchmarkConfig, path: Option<Vec<NodeId>>, trials: u32, map_file: Option<&Path>) -> Result<(), Error> {
    let seed = cfg.seeds[0];
    let (map, world) = match map_file {
        Some(p) => (
            import_map(p, cfg.tau_sim, cfg.world.feature_dim)?,
            toponav::bench::build_world(cfg, seed)?,
        ),
        None => trained_map(cfg)?,
    };
    let path = match path {
        Some(p) => p,
        None => default_path(&map)?,
    };
    if path.len() < 2 {
        return Err(Error::Invalid("--path-nodes needs at least two nodes".into()));
    }
    for n in &path {
        map.node(*n)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut policy = HierarchicalPolicy::new(cfg.agent.learning(), false);
    for n in &path[1..] {
        train_edge_controller(&world, &map, &mut policy, *n, &EdgeTraining::default(), &mut rng)?;
    }
    let max_steps = cfg.agent.max_steps_subgoal;
    let edges = path
        .windows(2)
        .map(|w| estimate_edge_success(&world, &map, &policy, (w[0], w[1]), trials, max_steps, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let empirical = estimate_path_success(&world, &map, &policy, &path, trials, max_steps, &mut rng)?;
    let report = check_reachability_bound(&edges, empirical, trials);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { cfg, out } => {
            let cfg = cfg.resolve()?;
            let report = run_benchmark(&cfg)?;
            let (episodes, summary) = export_results(&report, &out)?;
            let e = &report.summary.eval;
            println!(
                "{} seeds, ablation {}: success {:.3} ± {:.3}, steps {:.1}, trajectory {:.1}, coverage {:.3}",
                cfg.seeds.len(),
                cfg.ablation,
                e.success.mean,
                e.success.std,
                e.steps.mean,
                e.trajectory_length.mean,
                e.coverage.mean
            );
            println!("wrote {} and {}", episodes.display(), summary.display());
        }
        Command::VerifyReachability {
            cfg,
            path_nodes,
            trials,
            map,
        } => {
            let cfg = cfg.resolve()?;
            verify(&cfg, path_nodes, trials, map.as_deref())?;
        }
        Command::ExportMap { cfg, out } => {
            let cfg = cfg.resolve()?;
            let (map, _) = trained_map(&cfg)?;
            export_map(&map, &out)?;
            println!("wrote {} ({} nodes, {} edges)", out.display(), map.len(), map.edges().len());
        }
        Command::PrintConfig { cfg } => print!("{}", cfg.resolve()?.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
