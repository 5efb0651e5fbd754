//! Successive shortest paths on the network
//!
//! ```text
//! source -(1, 0)-> individual i -(1, -w_ir)-> resource r -(c_r, 0)-> sink
//! ```
//!
//! After `m` augmentations along shortest paths the flow has minimum cost
//! among all flows of value `m`, i.e. it is a maximum-weight matching of
//! cardinality exactly `m`. Flows are integral by construction. Dijkstra runs
//! on reduced costs; the initial potentials are exact because the network
//! starts out acyclic.

use super::{MatchInstance, Matching, ScoreMatrix, Scores};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: u32,
    cost: f64,
    rev: usize,
}

struct Network {
    adj: Vec<Vec<Edge>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u32, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge {
            to,
            cap,
            cost,
            rev: rev_from,
        });
        self.adj[to].push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
            rev: rev_to,
        });
    }

    /// Pushes `amount` units one shortest path at a time.
    fn augment(&mut self, source: usize, sink: usize, amount: usize, potential: &mut [f64]) -> bool {
        let nodes = self.adj.len();
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
        let mut done = vec![false; nodes];
        for _ in 0..amount {
            dist.fill(f64::INFINITY);
            prev.fill(None);
            done.fill(false);
            dist[source] = 0.0;
            // Dense Dijkstra; the network has at most a few hundred nodes.
            loop {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..nodes {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for (ei, e) in self.adj[u].iter().enumerate() {
                    if e.cap == 0 || done[e.to] {
                        continue;
                    }
                    let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                    let cand = dist[u] + reduced;
                    if cand < dist[e.to] {
                        dist[e.to] = cand;
                        prev[e.to] = Some((u, ei));
                    }
                }
            }
            if !dist[sink].is_finite() {
                return false;
            }
            for v in 0..nodes {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut v = sink;
            while let Some((u, ei)) = prev[v] {
                let rev = self.adj[u][ei].rev;
                self.adj[u][ei].cap -= 1;
                self.adj[v][rev].cap += 1;
                v = u;
            }
        }
        true
    }
}

/// Maximum-weight matching of exactly `cardinality` pairs between the
/// individuals in `rows` and resources with the given capacities.
///
/// Returned pairs use the row indices of `weights` and are sorted by
/// individual.
pub fn max_weight_matching(
    weights: &ScoreMatrix,
    rows: &[usize],
    capacities: &[u32],
    cardinality: usize,
) -> Result<Matching> {
    let k = capacities.len();
    if weights.cols() != k {
        return Err(Error::DimensionMismatch {
            expected_rows: weights.rows(),
            expected_cols: k,
            rows: weights.rows(),
            cols: weights.cols(),
        });
    }
    if let Some(&i) = rows.iter().find(|&&i| i >= weights.rows()) {
        return Err(Error::InvalidInstance(format!("individual {i} out of range")));
    }
    let capacity: usize = capacities.iter().map(|&c| c as usize).sum();
    let reachable = capacity.min(rows.len());
    if cardinality > reachable {
        return Err(Error::Infeasible {
            required: cardinality,
            capacity: reachable,
        });
    }
    if cardinality == 0 {
        return Ok(Matching::empty());
    }

    let m = rows.len();
    let source = 0;
    let sink = m + k + 1;
    let res_node = |r: usize| m + 1 + r;
    let mut net = Network::new(m + k + 2);
    for (local, &i) in rows.iter().enumerate() {
        net.add_edge(source, local + 1, 1, 0.0);
        for (r, &c) in capacities.iter().enumerate() {
            if c > 0 {
                net.add_edge(local + 1, res_node(r), 1, -weights.get(i, r));
            }
        }
    }
    for (r, &c) in capacities.iter().enumerate() {
        if c > 0 {
            net.add_edge(res_node(r), sink, c, 0.0);
        }
    }

    // Shortest distances from the source in the initial acyclic network.
    let mut potential = vec![0.0; m + k + 2];
    let mut sink_pot = f64::INFINITY;
    for r in 0..k {
        if capacities[r] == 0 {
            continue;
        }
        let d = rows
            .iter()
            .map(|&i| -weights.get(i, r))
            .fold(f64::INFINITY, f64::min);
        potential[res_node(r)] = d;
        sink_pot = sink_pot.min(d);
    }
    potential[sink] = sink_pot;

    if !net.augment(source, sink, cardinality, &mut potential) {
        // Unreachable given the capacity check above.
        return Err(Error::Infeasible {
            required: cardinality,
            capacity: reachable,
        });
    }

    let mut pairs = Vec::with_capacity(cardinality);
    for (local, &i) in rows.iter().enumerate() {
        for e in &net.adj[local + 1] {
            if e.to > m && e.to < sink && e.cap == 0 {
                pairs.push((i, e.to - m - 1));
            }
        }
    }
    debug_assert_eq!(pairs.len(), cardinality);
    Ok(Matching::from_pairs(pairs, weights))
}

/// The algorithmic policy for deferral count `b`: an optimal matching of
/// `max(n - b, 0)` individuals under the chosen scores.
pub fn solve_imperfect_matching(instance: &MatchInstance, which: Scores, b: usize) -> Result<Matching> {
    let weights = instance.scores(which)?;
    let n = instance.n();
    let cardinality = n.saturating_sub(b);
    let capacity = instance.resources().total_capacity();
    if cardinality > capacity {
        return Err(Error::Infeasible {
            required: cardinality,
            capacity,
        });
    }
    let rows: Vec<usize> = (0..n).collect();
    max_weight_matching(weights, &rows, instance.resources().capacities(), cardinality)
}
