use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BenchmarkConfig;
use crate::agent::{Agent, EpisodeResult, PolicySnapshot};
use crate::error::Result;
use crate::reward::RewardBreakdown;
use crate::topo_graph::TopoMap;
use crate::world::{make_scenario_with, GridWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Eval,
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub phase: Phase,
    pub episode: u32,
    pub success: bool,
    pub steps: u32,
    pub trajectory_length: u32,
    pub coverage: f64,
    pub map_nodes: usize,
    pub map_edges: usize,
    pub subgoals_reached: u32,
    pub overflows: u32,
    pub meta_selections: u32,
    #[serde(flatten)]
    pub reward: RewardBreakdown,
}

impl EpisodeRecord {
    fn new(seed: u64, phase: Phase, episode: u32, r: &EpisodeResult) -> Self {
        Self {
            seed,
            phase,
            episode,
            success: r.success,
            steps: r.steps,
            trajectory_length: r.trajectory_length,
            coverage: r.coverage,
            map_nodes: r.map_nodes,
            map_edges: r.map_edges,
            subgoals_reached: r.subgoals_reached,
            overflows: r.overflows,
            meta_selections: r.meta_selections,
            reward: r.reward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation across seeds; 0 for a single seed.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Stat { mean: 0.0, std: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Per-seed means of the four navigation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub success: f64,
    pub steps: f64,
    pub trajectory_length: f64,
    pub coverage: f64,
    pub intrinsic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub success: Stat,
    pub steps: Stat,
    pub trajectory_length: Stat,
    pub coverage: Stat,
    /// Mixed-in intrinsic reward per episode.
    pub intrinsic: Stat,
    pub per_seed: Vec<SeedMetrics>,
}

impl Aggregate {
    /// Seed-level means, then mean and spread across seeds, for the records
    /// of one phase. Seeds appear in `seeds` order.
    pub fn from_records(records: &[EpisodeRecord], seeds: &[u64], phase: Phase) -> Self {
        let per_seed: Vec<SeedMetrics> = seeds
            .iter()
            .map(|&seed| {
                let rs: Vec<&EpisodeRecord> = records.iter().filter(|r| r.seed == seed && r.phase == phase).collect();
                let n = rs.len().max(1) as f64;
                let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
                SeedMetrics {
                    seed,
                    success: mean(&|r| if r.success { 1.0 } else { 0.0 }),
                    steps: mean(&|r| f64::from(r.steps)),
                    trajectory_length: mean(&|r| f64::from(r.trajectory_length)),
                    coverage: mean(&|r| r.coverage),
                    intrinsic: mean(&|r| r.reward.intrinsic()),
                }
            })
            .collect();
        let col = |f: fn(&SeedMetrics) -> f64| Stat::of(&per_seed.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            success: col(|m| m.success),
            steps: col(|m| m.steps),
            trajectory_length: col(|m| m.trajectory_length),
            coverage: col(|m| m.coverage),
            intrinsic: col(|m| m.intrinsic),
            per_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: BenchmarkConfig,
    pub train: Aggregate,
    pub eval: Aggregate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub records: Vec<EpisodeRecord>,
    pub summary: Summary,
}

pub fn build_world(cfg: &BenchmarkConfig, seed: u64) -> Result<GridWorld> {
    make_scenario_with(cfg.scenario, cfg.size, seed, &cfg.world)
}

pub fn build_agent(cfg: &BenchmarkConfig) -> Agent {
    Agent::new(
        cfg.ablation,
        cfg.agent,
        cfg.reward,
        cfg.selection,
        TopoMap::new(cfg.tau_sim, cfg.world.feature_dim),
    )
}

/// RNG for one seed's agent. The world generator uses the raw seed, so the
/// agent draws from a separate stream.
pub fn agent_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains a fresh agent on one seed's world and returns it with its
/// training records.
pub fn train_seed(cfg: &BenchmarkConfig, seed: u64, init: Option<&PolicySnapshot>) -> Result<(Agent, GridWorld, Vec<EpisodeRecord>)> {
    let world = build_world(cfg, seed)?;
    let mut agent = build_agent(cfg);
    if let Some(snap) = init {
        agent.load_snapshot(snap)?;
    }
    let mut rng = agent_rng(seed);
    let mut records = Vec::with_capacity(cfg.train_episodes as usize);
    for ep in 0..cfg.train_episodes {
        let r = agent.run_episode(&world, true, &mut rng)?;
        records.push(EpisodeRecord::new(seed, Phase::Train, ep, &r));
    }
    Ok((agent, world, records))
}

fn run_seed(cfg: &BenchmarkConfig, seed: u64, init: Option<&PolicySnapshot>) -> Result<Vec<EpisodeRecord>> {
    let (agent, world, mut records) = train_seed(cfg, seed, init)?;
    let mut rng = agent_rng(seed);
    rng.set_stream(2);
    for ep in 0..cfg.eval_episodes {
        let r = agent.evaluate(&world, &mut rng)?;
        records.push(EpisodeRecord::new(seed, Phase::Eval, ep, &r));
    }
    Ok(records)
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    run_benchmark_with(cfg, None)
}

/// Runs every seed (in parallel), optionally starting each agent from a
/// saved policy.
pub fn run_benchmark_with(cfg: &BenchmarkConfig, init: Option<&PolicySnapshot>) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let per_seed: Vec<Vec<EpisodeRecord>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed, init))
        .collect::<Result<_>>()?;
    let records: Vec<EpisodeRecord> = per_seed.into_iter().flatten().collect();
    let summary = Summary {
        config: cfg.clone(),
        train: Aggregate::from_records(&records, &cfg.seeds, Phase::Train),
        eval: Aggregate::from_records(&records, &cfg.seeds, Phase::Eval),
    };
    Ok(BenchmarkReport { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of(&[7.0]).std, 0.0);
    }

    #[test]
    fn records_cover_all_episodes() {
        let cfg = BenchmarkConfig {
            size: 10,
            seeds: vec![4, 2],
            train_episodes: 3,
            eval_episodes: 2,
            ..BenchmarkConfig::default()
        };
        let rep = run_benchmark(&cfg).unwrap();
        assert_eq!(rep.records.len(), 10);
        assert_eq!(rep.summary.eval.per_seed[0].seed, 4);
        for r in &rep.records {
            assert!((0.0..=1.0).contains(&r.coverage));
            assert!(r.trajectory_length <= r.steps);
        }
    }
}
