//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_path, chain2, grid9, ring5, value_iteration, Mdp};
use toponav::agent::{AblationMode, AgentConfig, HierarchicalPolicy, LearningParams, QFunction, Transition};
use toponav::bench::{
    build_agent, check_reachability_bound, estimate_edge_success, estimate_path_success, run_benchmark,
    train_edge_controller, BenchmarkConfig, EdgeTraining, EdgeEstimate,
};
use toponav::landmark::{goal_directedness, novelty, select_landmark, Landmark, SelectionConfig};
use toponav::reward::{
    extrinsic_reward, intrinsic_reward, penalty_reward, total_reward, ExplorationState, IntrinsicTerms, PenaltyTerms,
    RewardConfig, StepEvents,
};
use toponav::topo_graph::{descriptor_distance, descriptor_similarity, TopoMap};
use toponav::world::{make_scenario, Cell, GridWorld, ScenarioKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---- 1. formula unit suite ----

fn zero_reward_cfg() -> RewardConfig {
    RewardConfig {
        lambda_fe: 0.0,
        lambda_ep: 0.0,
        lambda_ue: 0.0,
        lambda_p: 0.0,
        lambda_sd: 0.0,
        lambda_te: 0.0,
        r_sg_bonus: 0.0,
        ..RewardConfig::default()
    }
}

fn visited(n: u32) -> (Cell, ExplorationState) {
    let s = Cell::new(2, 3);
    let mut e = ExplorationState::new(100);
    for _ in 0..n {
        e.arrive(s);
    }
    (s, e)
}

fn lm(id: usize, pos: [f64; 2], visits: u32) -> Landmark {
    Landmark {
        id,
        position: pos,
        feature: vec![id as f64],
        visits,
    }
}

fn formula_suite() -> Outcome {
    let mut checked = 0;
    let mut tick = || checked += 1;

    // descriptors and map insertion
    ensure!(descriptor_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap() == 0.0, "distance identity");
    ensure!(descriptor_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap() == 5.0, "distance 3-4-5");
    ensure!(descriptor_distance(&[0.0], &[0.0, 1.0]).is_err(), "distance dimension mismatch");
    ensure!(descriptor_similarity(&[0.3, 0.7], &[0.3, 0.7]).unwrap() == 1.0, "similarity identity");
    ensure!(close(descriptor_similarity(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), (-5.0f64).exp(), 1e-9), "similarity exp(-5)");
    ensure!(close((-5.0f64).exp(), 0.00674, 1e-5), "exp(-5) reference value");
    let mut map = TopoMap::new(0.5, 2);
    ensure!(map.match_or_insert(&[0.0, 0.0], [0.0, 0.0]).unwrap() == (0, true), "empty map inserts id 0");
    ensure!(map.match_or_insert(&[0.0, 0.0], [1.0, 1.0]).unwrap() == (0, false), "exact feature matches");
    ensure!(map.node(0).unwrap().visits >= 1, "match bumps visits");
    let sim = descriptor_similarity(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
    ensure!(close(sim, (-2.0f64).exp(), 1e-9) && sim < 0.5, "similarity exp(-2) below tau");
    ensure!(map.match_or_insert(&[2.0, 0.0], [3.0, 4.0]).unwrap() == (1, true), "dissimilar feature inserts");
    ensure!(close(map.add_edge(0, 1).unwrap().cost, 5.0, 1e-12), "edge cost 5");
    map.add_edge(1, 0).unwrap();
    ensure!(map.edges().len() == 1, "duplicate edge ignored");
    ensure!(map.add_edge(1, 1).is_err(), "self edge rejected");
    tick();

    // selection
    ensure!(novelty(0, 0.5) == 1.0, "novelty visits 0");
    ensure!(close(novelty(1, 0.5), 0.6065306597126334, 1e-9), "novelty e^-0.5");
    ensure!(close(goal_directedness([0.0, 0.0], [2.0, 2.0], [5.0, 5.0]), 1.0, 1e-12), "gd collinear");
    ensure!(close(goal_directedness([0.0, 0.0], [-1.0, 0.0], [4.0, 0.0]), -1.0, 1e-12), "gd opposite");
    ensure!(close(goal_directedness([0.0, 0.0], [0.0, 3.0], [4.0, 0.0]), 0.0, 1e-12), "gd perpendicular");
    let cfg = SelectionConfig {
        lambda_decay: 1.0,
        w_n: 0.5,
        w_gd: 0.5,
    };
    let only = [lm(4, [1.0, 1.0], 3)];
    ensure!(select_landmark(&only, [0.0, 0.0], [5.0, 0.0], &cfg).map(|l| l.id) == Some(4), "single landmark");
    let ab = [lm(0, [0.0, 2.0], 0), lm(1, [2.0, 0.0], 2)];
    let b_score = 0.5 * (-2.0f64).exp() + 0.5;
    ensure!(close(b_score, 0.5677, 1e-4), "B score 0.568");
    ensure!(select_landmark(&ab, [0.0, 0.0], [5.0, 0.0], &cfg).map(|l| l.id) == Some(1), "B selected");
    let tie = [lm(7, [0.0, 1.0], 0), lm(3, [0.0, -1.0], 0)];
    ensure!(select_landmark(&tie, [0.0, 0.0], [5.0, 0.0], &cfg).map(|l| l.id) == Some(3), "tie to lower id");
    ensure!(select_landmark(&[], [0.0, 0.0], [1.0, 0.0], &cfg).is_none(), "empty selection");
    tick();

    // extrinsic
    let rc = RewardConfig::default();
    let goal_ev = StepEvents {
        reached_goal: true,
        ..Default::default()
    };
    let ms_ev = StepEvents {
        reached_milestone: true,
        ..Default::default()
    };
    ensure!(extrinsic_reward(&goal_ev, &rc) == 100.0, "r_ex goal");
    ensure!(extrinsic_reward(&ms_ev, &rc) == 10.0, "r_ex milestone");
    ensure!(extrinsic_reward(&StepEvents::default(), &rc) == 0.0, "r_ex none");

    // intrinsic: r_in, r_sg, r_fe, r_ep, r_ue
    let z = zero_reward_cfg();
    let none = StepEvents::default();
    let (s, e) = visited(1);
    let first = intrinsic_reward(s, &none, &e, &z).unwrap();
    ensure!(first.sum() == 1.0 && first.r_in == 1.0, "first visit intrinsic 1.0");
    let (s, e) = visited(4);
    ensure!(intrinsic_reward(s, &none, &e, &z).unwrap().r_in == 0.5, "N = 4 gives r_in 0.5");
    let (s, mut e) = visited(1);
    e.frontier_new = 1;
    e.node_total = 4;
    let fe = RewardConfig { lambda_fe: 1.0, ..z };
    ensure!(intrinsic_reward(s, &none, &e, &fe).unwrap().r_fe == 0.25, "r_fe 1/4");
    e.node_total = 0;
    ensure!(intrinsic_reward(s, &none, &e, &fe).is_err(), "frontier on empty map is an error");
    let sg = StepEvents {
        new_subgoal_discovered: true,
        ..Default::default()
    };
    let (s, e) = visited(1);
    ensure!(intrinsic_reward(s, &sg, &e, &RewardConfig { r_sg_bonus: 1.0, ..z }).unwrap().r_sg == 1.0, "r_sg bonus");
    let mut e2 = ExplorationState::new(4);
    e2.arrive(s);
    let ep = intrinsic_reward(s, &none, &e2, &RewardConfig { lambda_ep: 1.0, ..z }).unwrap();
    ensure!(close(ep.r_ep, 0.25, 1e-12), "r_ep one new cell of four");
    let unc = StepEvents {
        uncertainty: 0.5,
        ..Default::default()
    };
    ensure!(intrinsic_reward(s, &unc, &e, &RewardConfig { lambda_ue: 1.0, ..z }).unwrap().r_ue == 0.5, "r_ue");

    // penalties: r_p, r_sd, r_te, r_ob
    let (s, e) = visited(1);
    ensure!(penalty_reward(s, None, 0, &none, &e, &z).unwrap().r_p == 0.0, "r_p first visit");
    let (s, e) = visited(4);
    let p1 = RewardConfig { lambda_p: 1.0, ..z };
    ensure!(penalty_reward(s, None, 0, &none, &e, &p1).unwrap().r_p == -1.5, "r_p N = 4");
    let (s, mut e) = visited(1);
    e.subgoal_history.push(vec![0.5, 0.5]);
    let sd = RewardConfig { lambda_sd: 2.0, ..z };
    ensure!(penalty_reward(s, Some(&[0.5, 0.5]), 0, &none, &e, &sd).unwrap().r_sd == -2.0, "r_sd repeated subgoal");
    let mut e = visited(1).1;
    e.t_last_exp = 4;
    let te = RewardConfig { lambda_te: 0.01, ..z };
    ensure!(close(penalty_reward(s, None, 10, &none, &e, &te).unwrap().r_te, -0.06, 1e-12), "r_te");
    let hit = StepEvents {
        hit_obstacle: true,
        ..Default::default()
    };
    ensure!(penalty_reward(s, None, 10, &hit, &e, &z).unwrap().r_ob == z.r_obstacle, "r_ob");
    tick();

    // total
    let zero = total_reward(0.0, &IntrinsicTerms::default(), &PenaltyTerms::default(), &rc);
    ensure!(zero.total == 0.0, "total zero");
    let only_ex = RewardConfig {
        alpha: 1.0,
        beta: 0.0,
        gamma_pen: 0.0,
        ..rc
    };
    let intr = IntrinsicTerms {
        r_in: 0.4,
        r_sg: 0.6,
        ..Default::default()
    };
    let pen = PenaltyTerms {
        r_p: -0.2,
        r_te: -0.3,
        ..Default::default()
    };
    ensure!(total_reward(100.0, &intr, &pen, &only_ex).total == 100.0, "only extrinsic survives");
    let half = RewardConfig {
        alpha: 1.0,
        beta: 0.5,
        gamma_pen: 0.5,
        ..rc
    };
    ensure!(close(total_reward(0.0, &intr, &pen, &half).total, 0.25, 1e-9), "mixed total 0.25");
    tick();

    // q_update
    let mut q: QFunction<u8> = QFunction::new(0.5, 0.9);
    q.update(&[Transition::new(0u8, 1, 1.0, 1u8, true)], 2);
    ensure!(q.value(&0, 1) == 0.5, "single step 0.5");
    let mut q: QFunction<u8> = QFunction::new(1.0, 0.9);
    q.set(1, 0, 50.0);
    q.update(&[Transition::new(0u8, 0, 2.0, 1u8, true)], 2);
    ensure!(q.value(&0, 0) == 2.0, "terminal target is r");
    q.update(&[Transition::new(0u8, 1, 2.0, 1u8, false)], 2);
    ensure!(close(q.value(&0, 1), 2.0 + 0.9 * 50.0, 1e-12), "bootstrap target");
    tick();

    // path-composition arithmetic
    let est = |p: f64| EdgeEstimate {
        a: 0,
        b: 1,
        success: p,
        trials: 1,
    };
    let r = check_reachability_bound(&[est(0.9), est(0.9), est(0.9)], 0.729, 1);
    ensure!(close(r.product, 0.729, 1e-9) && close(r.bound, 0.7, 1e-9) && r.product_ge_bound, "three edges at 0.9");
    let r = check_reachability_bound(&[est(0.83)], 0.83, 1);
    ensure!(r.product == 0.83 && r.bound == 0.83, "single edge");
    tick();

    Ok(format!("{checked} operation groups"))
}

// ---- 2. oracle equivalence ----

/// Sweeps every (s, a) transition through `q_update` until nothing moves.
fn train_tabular(m: &Mdp) -> QFunction<usize> {
    let mut q = QFunction::new(0.5, m.discount);
    let batch: Vec<Transition<usize>> = (0..m.states())
        .filter(|s| !m.terminal[*s])
        .flat_map(|s| {
            (0..m.actions()).map(move |a| Transition::new(s, a, m.reward[s][a], m.next[s][a], m.terminal[m.next[s][a]]))
        })
        .collect();
    for _ in 0..100_000 {
        let before: Vec<f64> = batch.iter().map(|t| q.value(&t.s, t.choice)).collect();
        toponav::agent::q_update(&mut q, &batch, m.actions());
        let moved = batch
            .iter()
            .zip(&before)
            .map(|(t, b)| (q.value(&t.s, t.choice) - b).abs())
            .fold(0.0, f64::max);
        if moved < 1e-14 {
            break;
        }
    }
    q
}

fn random_map(rng: &mut ChaCha8Rng) -> TopoMap {
    let n = rng.gen_range(2..=8);
    let mut map = TopoMap::new(0.5, 1);
    for i in 0..n {
        let pos = [rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)];
        map.match_or_insert(&[10.0 * i as f64], pos).unwrap();
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.4) {
                map.add_edge(a, b).unwrap();
                if rng.gen_bool(0.15) {
                    map.set_traversable(a, b, false).unwrap();
                }
            }
        }
    }
    map
}

fn oracle_equivalence() -> Outcome {
    for (name, m) in [("chain2", chain2()), ("ring5", ring5()), ("grid9", grid9())] {
        ensure!(m.states() <= 10, "{name} too large");
        let vi = value_iteration(&m);
        let q = train_tabular(&m);
        for s in (0..m.states()).filter(|s| !m.terminal[*s]) {
            for (a, want) in vi[s].iter().enumerate() {
                let got = q.value(&s, a);
                ensure!(close(got, *want, 1e-6), "{name} Q({s},{a}) = {got}, value iteration {want}");
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pairs = 0;
    for k in 0..50 {
        let map = random_map(&mut rng);
        for a in 0..map.len() {
            for b in 0..map.len() {
                let got = map.shortest_path(a, b).unwrap();
                let want = brute_force_path(&map, a, b);
                match (got, want) {
                    (None, None) => {}
                    (Some((p, c)), Some((wc, _))) => {
                        ensure!(close(c, wc, 1e-9), "map {k} {a}->{b}: cost {c}, brute force {wc}");
                        ensure!(p.first() == Some(&a) && p.last() == Some(&b), "map {k} {a}->{b}: endpoints");
                        let sum: f64 = p
                            .windows(2)
                            .map(|w| map.edge(w[0], w[1]).filter(|e| e.traversable).map_or(f64::INFINITY, |e| e.cost))
                            .sum();
                        ensure!(close(sum, c, 1e-9), "map {k} {a}->{b}: path does not add up to its cost");
                    }
                    (g, w) => return Err(format!("map {k} {a}->{b}: dijkstra {g:?}, brute force {w:?}")),
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("3 MDPs within 1e-6 of value iteration; {pairs} node pairs on 50 maps"))
}

// ---- 3 and 4. ablation runs ----

fn eval_means(base: &BenchmarkConfig, mode: AblationMode, seeds: std::ops::Range<u64>) -> Result<(f64, f64), String> {
    let cfg = BenchmarkConfig {
        ablation: mode,
        seeds: seeds.collect(),
        ..base.clone()
    };
    let rep = run_benchmark(&cfg).map_err(|e| e.to_string())?;
    Ok((rep.summary.eval.success.mean, rep.summary.eval.coverage.mean))
}

fn ablation_ordering() -> Outcome {
    let base = BenchmarkConfig {
        scenario: ScenarioKind::ComplexTerrain,
        size: 20,
        train_episodes: 200,
        ..BenchmarkConfig::default()
    };
    let seeds = 0..30;
    let (s_full, c_full) = eval_means(&base, AblationMode::Full, seeds.clone())?;
    let (s_ntm, _) = eval_means(&base, AblationMode::NoTopoMap, seeds.clone())?;
    let (s_nh, _) = eval_means(&base, AblationMode::NoHierarchy, seeds.clone())?;
    let (_, c_ni) = eval_means(&base, AblationMode::NoIntrinsic, seeds)?;
    let detail = format!(
        "success full {s_full:.3} / no_topo_map {s_ntm:.3} / no_hierarchy {s_nh:.3}; coverage full {c_full:.3} / no_intrinsic {c_ni:.3}"
    );
    let ok = s_full - s_ntm >= 0.05 && s_full - s_nh >= 0.05 && c_full - c_ni >= 0.05;
    if ok {
        Ok(detail)
    } else {
        Err(format!("{detail} (each gap must be >= 0.05)"))
    }
}

fn sparse_reward_learning() -> Outcome {
    let base = BenchmarkConfig {
        scenario: ScenarioKind::FeatureBased,
        size: 20,
        train_episodes: 200,
        ..BenchmarkConfig::default()
    };
    let mut ratios = Vec::new();
    let mut parts = Vec::new();
    for run in 0..3u64 {
        let seeds = run * 30..run * 30 + 30;
        let (full, _) = eval_means(&base, AblationMode::Full, seeds.clone())?;
        let (sparse, _) = eval_means(&base, AblationMode::NoIntrinsic, seeds)?;
        let ratio = if sparse > 0.0 { full / sparse } else { f64::INFINITY };
        parts.push(format!("run {run}: full {full:.3} / beta=0 {sparse:.3} = {ratio:.2}"));
        ratios.push(ratio);
    }
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let detail = format!("{}; mean ratio {mean:.2}, worst {worst:.2}", parts.join(", "));
    if mean >= 1.5 && worst > 1.2 {
        Ok(detail)
    } else {
        Err(format!("{detail} (need mean >= 1.5 and worst > 1.2)"))
    }
}

// ---- 5. path composition ----

/// 13x7 world with a three-edge route A(1,1) -> B(9,1) -> C(9,5) -> D(1,5)
/// around an interior wall.
fn three_edge_world() -> (GridWorld, TopoMap) {
    let wall: Vec<Cell> = (2..=8).map(|x| Cell::new(x, 3)).collect();
    let cells = [Cell::new(1, 1), Cell::new(9, 1), Cell::new(9, 5), Cell::new(1, 5)];
    let world = GridWorld::new(13, 7, wall, Vec::new(), cells[0], cells[3], 4.0, 0.1).unwrap();
    let mut map = TopoMap::new(0.5, 1);
    for (i, c) in cells.iter().enumerate() {
        map.match_or_insert(&[10.0 * i as f64], c.position()).unwrap();
    }
    for i in 0..3 {
        map.add_edge(i, i + 1).unwrap();
    }
    (world, map)
}

fn path_composition() -> Outcome {
    let (world, map) = three_edge_world();
    let path = [0, 1, 2, 3];
    let params = LearningParams {
        learning_rate: 0.2,
        ..AgentConfig::default().learning()
    };
    let mut policy = HierarchicalPolicy::new(params, false);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in &path[1..] {
        train_edge_controller(&world, &map, &mut policy, *n, &EdgeTraining::default(), &mut rng).map_err(|e| e.to_string())?;
    }
    // tight budget: each edge is 8 or 4 moves long, so slips can exhaust it
    let budget = 10;
    let trials = 2000;
    let edges = path
        .windows(2)
        .map(|w| estimate_edge_success(&world, &map, &policy, (w[0], w[1]), trials, budget, &mut rng))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let empirical = estimate_path_success(&world, &map, &policy, &path, trials, budget, &mut rng).map_err(|e| e.to_string())?;
    let r = check_reachability_bound(&edges, empirical, trials);
    let per_edge: Vec<String> = r.edges.iter().map(|e| format!("{:.3}", e.success)).collect();
    let detail = format!(
        "edges [{}], product {:.4}, bound {:.4}, empirical {:.4}",
        per_edge.join(", "),
        r.product,
        r.bound,
        r.empirical
    );
    if r.product_ge_bound && r.within_tolerance {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- 6. map growth ----

fn map_growth() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 24,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (any::<u64>(), prop::sample::select(vec![ScenarioKind::FeatureBased, ScenarioKind::ComplexTerrain]));
    runner
        .run(&strategy, |(seed, kind)| {
            let world = make_scenario(kind, 16, seed).unwrap();
            let cfg = BenchmarkConfig {
                scenario: kind,
                size: 16,
                ..BenchmarkConfig::default()
            };
            let mut agent = build_agent(&cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while agent.total_steps() < 500 {
                agent.run_episode(&world, true, &mut rng).unwrap();
            }
            let map = agent.map();
            prop_assert!(map.audit().is_ok(), "{:?}", map.audit());
            for i in 0..map.len() {
                for j in i + 1..map.len() {
                    let s = descriptor_similarity(&map.node(i).unwrap().feature, &map.node(j).unwrap().feature).unwrap();
                    prop_assert!(s < map.tau_sim());
                }
            }
            for e in map.edges() {
                prop_assert!(e.a < map.len() && e.b < map.len());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("24 seeded runs of >= 500 steps audited".into())
}

// ---- 7. determinism ----

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_toponav");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "scenario = 3\nsize = 12\ntrain_episodes = 15\neval_episodes = 3\n").map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin)
            .arg("run")
            .arg("--config")
            .arg(&cfg)
            .args(["--seeds", "4,9,1"])
            .arg("--out")
            .arg(&out)
            .env_remove("TOPONAV_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(status.status.success(), "run {run} failed: {}", String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(out.join("episodes.jsonl")).map_err(|e| e.to_string())?);
    }
    ensure!(!outputs[0].is_empty(), "empty episode file");
    ensure!(outputs[0] == outputs[1], "episode files differ");
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 formula unit suite", formula_suite, Some(Duration::from_secs(5))),
        ("2 oracle equivalence", oracle_equivalence, Some(Duration::from_secs(30))),
        ("3 ablation ordering", ablation_ordering, Some(Duration::from_secs(15 * 60))),
        ("4 sparse-reward learning", sparse_reward_learning, None),
        ("5 path composition bound", path_composition, Some(Duration::from_secs(60))),
        ("6 map-growth invariant", map_growth, None),
        ("7 CLI determinism", cli_determinism, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let res = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = t.elapsed();
        let res = match (res, limit) {
            (Ok(d), Some(l)) if took > l => Err(format!("{d}; took {took:.1?}, limit {l:?}")),
            (r, _) => r,
        };
        match res {
            Ok(d) => println!("PASS  criterion {name} [{took:.1?}]: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  criterion {name} [{took:.1?}]: {d}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
