//! Combinatorial horoballs over finite unit-length graphs.
//!
//! The horoball over Γ has vertex set V(Γ) × {0..depth}, vertical edges of
//! length 1 between consecutive levels, and horizontal edges of length e⁻ⁿ
//! at level n wherever Γ has an edge. Distances have a closed form: climb to
//! a transit level, cross, climb back down. The scan machinery measures how
//! far the logarithmic estimate 2·ln(d_Γ·e^(−min)+1)+|m−n| drifts from the
//! exact distance.

use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{GraphBuilder, MetricOracle, WeightedGraph};

pub struct HoroballGraph {
    graph: WeightedGraph,
    base_n: u32,
    depth: u32,
}

impl HoroballGraph {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn base_count(&self) -> u32 {
        self.base_n
    }

    /// Vertex id of base vertex `v` at level `n`. Level slices are contiguous.
    pub fn vertex(&self, v: u32, n: u32) -> u32 {
        debug_assert!(v < self.base_n && n <= self.depth);
        n * self.base_n + v
    }

    pub fn level_of(&self, id: u32) -> u32 {
        id / self.base_n
    }

    pub fn base_of(&self, id: u32) -> u32 {
        id % self.base_n
    }

    /// Writes the graph file plus a `.levels` sidecar (one level per line).
    pub fn write_files(&self, path: &std::path::Path) -> Result<()> {
        self.graph.write_file(path)?;
        let mut out = String::new();
        for id in 0..self.graph.vertex_count() as u32 {
            out.push_str(&self.level_of(id).to_string());
            out.push('\n');
        }
        std::fs::write(path.with_extension("levels"), out)?;
        Ok(())
    }
}

/// Builds the horoball over a connected unit-length graph.
pub fn build_horoball(base: &WeightedGraph, depth: u32) -> Result<HoroballGraph> {
    for &(_, _, w) in base.edges() {
        if w != 1.0 {
            return Err(RelhypError::Precondition(format!(
                "horoball base must have unit edges, found length {w}"
            )));
        }
    }
    if !base.is_connected() {
        return Err(RelhypError::Precondition("horoball base must be connected".into()));
    }
    let n = base.vertex_count() as u32;
    let mut builder = GraphBuilder::new((n as usize) * (depth as usize + 1));
    for level in 0..=depth {
        let scale = (-(level as f64)).exp();
        for &(u, v, _) in base.edges() {
            builder.add_edge(level * n + u, level * n + v, scale);
        }
        if level < depth {
            for v in 0..n {
                builder.add_edge(level * n + v, (level + 1) * n + v, 1.0);
            }
        }
    }
    Ok(HoroballGraph {
        graph: builder.build()?,
        base_n: n,
        depth,
    })
}

/// The logarithmic distance estimate.
pub fn horo_estimate(d_gamma: f64, m: u32, n: u32) -> f64 {
    let min = m.min(n) as f64;
    2.0 * (d_gamma * (-min).exp() + 1.0).ln() + (m as f64 - n as f64).abs()
}

/// Exact horoball distance between (x,m) and (y,n) with base distance
/// `d_gamma`, truncated at `depth`: minimize (t−m)+(t−n)+e⁻ᵗ·d_Γ over the
/// transit level t. Returns the distance, the optimal level, and whether the
/// truncation was active (the untruncated optimum lies beyond `depth`).
pub fn horo_exact(d_gamma: f64, m: u32, n: u32, depth: u32) -> (f64, u32, bool) {
    let lo = m.max(n);
    debug_assert!(lo <= depth);
    let mut best = f64::INFINITY;
    let mut best_t = lo;
    for t in lo..=depth {
        let cost = (t - m) as f64 + (t - n) as f64 + (-(t as f64)).exp() * d_gamma;
        if cost < best {
            best = cost;
            best_t = t;
        }
    }
    // one more level would still improve: truncation is biting
    let next = (depth + 1 - m) as f64 + (depth + 1 - n) as f64 + (-(depth as f64 + 1.0)).exp() * d_gamma;
    let truncated = best_t == depth && next < best;
    (best, best_t, truncated)
}

/// Depth beyond which truncation never bites for the given base diameter.
pub fn sufficient_depth(base_diameter: f64) -> u32 {
    if base_diameter <= 1.0 {
        return 2;
    }
    base_diameter.ln().ceil() as u32 + 2
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorScanReport {
    pub graph_id: String,
    pub depth: u32,
    pub max_error: f64,
    pub argmax_pair: ((u32, u32), (u32, u32)),
    /// Max error over pairs with min level l, indexed by l.
    pub per_level_max: Vec<f64>,
    pub truncated_pairs: u64,
    pub pair_count: u64,
}

/// Exhaustive |exact − estimate| scan over all vertex pairs of the horoball.
pub fn estimate_error_scan(base: &WeightedGraph, depth: u32, graph_id: &str) -> Result<ErrorScanReport> {
    let n = base.vertex_count() as u32;
    let oracle = MetricOracle::new(base);
    let mut max_error = 0.0f64;
    let mut argmax = ((0, 0), (0, 0));
    let mut per_level_max = vec![0.0f64; depth as usize + 1];
    let mut truncated_pairs = 0u64;
    let mut pair_count = 0u64;
    for x in 0..n {
        let row = oracle.row(x);
        for y in x..n {
            let d_gamma = row[y as usize];
            if !d_gamma.is_finite() {
                return Err(RelhypError::Precondition("base graph disconnected".into()));
            }
            for m in 0..=depth {
                for nn in m..=depth {
                    if x == y && m == nn {
                        continue;
                    }
                    pair_count += 1;
                    let (exact, _, truncated) = horo_exact(d_gamma, m, nn, depth);
                    if truncated {
                        truncated_pairs += 1;
                    }
                    let err = (exact - horo_estimate(d_gamma, m, nn)).abs();
                    let lvl = m.min(nn) as usize;
                    if err > per_level_max[lvl] {
                        per_level_max[lvl] = err;
                    }
                    if err > max_error {
                        max_error = err;
                        argmax = ((x, m), (y, nn));
                    }
                }
            }
        }
    }
    Ok(ErrorScanReport {
        graph_id: graph_id.to_string(),
        depth,
        max_error,
        argmax_pair: argmax,
        per_level_max,
        truncated_pairs,
        pair_count,
    })
}
