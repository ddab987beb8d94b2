#![allow(dead_code)]

use toponav::topo_graph::{NodeId, TopoMap};

/// Deterministic finite MDP: `next[s][a]`, `reward[s][a]`, terminal flags.
pub struct Mdp {
    pub next: Vec<Vec<usize>>,
    pub reward: Vec<Vec<f64>>,
    pub terminal: Vec<bool>,
    pub discount: f64,
}

impl Mdp {
    pub fn states(&self) -> usize {
        self.next.len()
    }

    pub fn actions(&self) -> usize {
        self.next[0].len()
    }
}

/// Q* by value iteration until the largest change falls below 1e-13.
pub fn value_iteration(m: &Mdp) -> Vec<Vec<f64>> {
    let (ns, na) = (m.states(), m.actions());
    let mut v = vec![0.0f64; ns];
    loop {
        let mut delta = 0.0f64;
        for s in 0..ns {
            if m.terminal[s] {
                continue;
            }
            let best = (0..na)
                .map(|a| m.reward[s][a] + m.discount * v[m.next[s][a]])
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-13 {
            break;
        }
    }
    (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| {
                    if m.terminal[s] {
                        0.0
                    } else {
                        m.reward[s][a] + m.discount * v[m.next[s][a]]
                    }
                })
                .collect()
        })
        .collect()
}

/// Two states; action 0 stays (reward 0), action 1 advances, and advancing
/// from state 1 reaches the terminal state with reward 1.
pub fn chain2() -> Mdp {
    Mdp {
        next: vec![vec![0, 1], vec![1, 2], vec![2, 2]],
        reward: vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
        terminal: vec![false, false, true],
        discount: 0.9,
    }
}

/// Five-state ring with a shortcut and a small distracting loop reward.
pub fn ring5() -> Mdp {
    Mdp {
        next: vec![vec![1, 2, 0], vec![2, 0, 1], vec![3, 4, 2], vec![4, 0, 3], vec![5, 5, 4], vec![5, 5, 5]],
        reward: vec![
            vec![0.0, -0.5, 0.1],
            vec![0.0, 0.0, 0.1],
            vec![-0.2, -1.0, 0.0],
            vec![0.0, 0.0, 0.2],
            vec![5.0, 2.0, 0.0],
            vec![0.0; 3],
        ],
        terminal: vec![false, false, false, false, false, true],
        discount: 0.95,
    }
}

/// 3x3 grid, four moves, step cost -1, goal corner terminal with +10, one
/// pit cell with -5 that also ends the episode.
pub fn grid9() -> Mdp {
    let idx = |x: i32, y: i32| (y * 3 + x) as usize;
    let mut next = Vec::new();
    let mut reward = Vec::new();
    let goal = idx(2, 2);
    let pit = idx(1, 1);
    for y in 0..3 {
        for x in 0..3 {
            let mut n = Vec::new();
            let mut r = Vec::new();
            for (dx, dy) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                let (nx, ny) = (x + dx, y + dy);
                let t = if (0..3).contains(&nx) && (0..3).contains(&ny) { idx(nx, ny) } else { idx(x, y) };
                n.push(t);
                r.push(if t == goal { 10.0 } else if t == pit { -5.0 } else { -1.0 });
            }
            next.push(n);
            reward.push(r);
        }
    }
    let mut terminal = vec![false; 9];
    terminal[goal] = true;
    terminal[pit] = true;
    Mdp {
        next,
        reward,
        terminal,
        discount: 0.9,
    }
}

/// Cheapest simple path by exhaustive depth-first enumeration, as
/// (cost, path). Returns `None` when `b` is unreachable.
pub fn brute_force_path(map: &TopoMap, a: NodeId, b: NodeId) -> Option<(f64, Vec<NodeId>)> {
    fn dfs(map: &TopoMap, cur: NodeId, b: NodeId, cost: f64, path: &mut Vec<NodeId>, best: &mut Option<(f64, Vec<NodeId>)>) {
        if cur == b {
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        let next: Vec<(NodeId, f64)> = map
            .neighbors(cur)
            .filter(|e| e.traversable)
            .map(|e| (if e.a == cur { e.b } else { e.a }, e.cost))
            .collect();
        for (n, c) in next {
            if !path.contains(&n) {
                path.push(n);
                dfs(map, n, b, cost + c, path, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    dfs(map, a, b, 0.0, &mut vec![a], &mut best);
    best
}
