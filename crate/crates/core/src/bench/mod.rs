//! Benchmark harness: configuration, seeded runs over ablation modes,
//! result export and the reachability check.

mod config;
mod export;
mod reachability;
mod runner;

pub use config::BenchmarkConfig;
pub use export::{export_map, export_results, import_map, read_episodes, read_summary, EPISODES_FILE, SUMMARY_FILE};
pub use reachability::{
    check_reachability_bound, estimate_edge_success, estimate_path_success, train_edge_controller, EdgeEstimate,
    EdgePolicy, EdgeTraining, ReachabilityReport, EMPIRICAL_TOLERANCE,
};
pub use runner::{
    agent_rng, build_agent, build_world, run_benchmark, run_benchmark_with, train_seed, Aggregate, BenchmarkReport,
    EpisodeRecord, Phase, SeedMetrics, Stat, Summary,
};
