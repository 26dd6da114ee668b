//! The projection complex over a coset family, the quasi-tree of spaces
//! glued from per-coset pieces along projection bridges, and a bottleneck
//! certificate standing in for "quasi-isometric to a tree" on finite graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{GraphBuilder, WeightedGraph};
use crate::groups::{Ball, CosetId, CosetTable};
use crate::projections::ProjectionTable;

/// Complex on the table's coset family: X and Z are joined when every other
/// family coset sees them at projection distance at most K.
pub struct ProjectionComplex {
    k: f64,
    graph: WeightedGraph,
    family: Vec<CosetId>,
}

impl ProjectionComplex {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn family(&self) -> &[CosetId] {
        &self.family
    }
}

pub fn build_projection_complex(table: &ProjectionTable, k: f64) -> Result<ProjectionComplex> {
    if k <= 0.0 {
        return Err(RelhypError::Precondition("complex threshold must be positive".into()));
    }
    let n = table.family().len();
    let mut builder = GraphBuilder::new(n);
    for x in 0..n {
        for z in (x + 1)..n {
            let blocked = (0..n)
                .filter(|&y| y != x && y != z)
                .any(|y| table.proj_distance(y, x, z) > k);
            if !blocked {
                builder.add_edge(x as u32, z as u32, 1.0);
            }
        }
    }
    Ok(ProjectionComplex {
        k,
        graph: builder.build()?,
        family: table.family().to_vec(),
    })
}

/// Per-family-coset pieces: a graph for each coset plus the map from member
/// position (index into the coset's ball vertices) to piece vertex.
pub struct PieceSet {
    pub graphs: Vec<WeightedGraph>,
    pub member_map: Vec<Vec<u32>>,
}

/// Pieces that are the coset subgraphs themselves: induced Cayley edges on
/// the coset's ball vertices.
pub fn coset_pieces(ball: &Ball, cosets: &CosetTable, table: &ProjectionTable) -> PieceSet {
    let mut graphs = Vec::with_capacity(table.family().len());
    let mut member_map = Vec::with_capacity(table.family().len());
    for &c in table.family() {
        let members = cosets.members(c);
        let mut b = GraphBuilder::new(members.len());
        for (i, &v) in members.iter().enumerate() {
            for (u, w) in ball.graph().neighbors(v) {
                if u > v {
                    if let Ok(j) = members.binary_search(&u) {
                        b.add_edge(i as u32, j as u32, w);
                    }
                }
            }
        }
        graphs.push(b.build().expect("piece graph"));
        member_map.push((0..members.len() as u32).collect());
    }
    PieceSet { graphs, member_map }
}

/// Disjoint union of the pieces plus a unit bridge for every complex edge,
/// connecting the image of π_X(Z) in X's piece to the image of π_Z(X) in
/// Z's piece.
pub struct QuasiTree {
    graph: WeightedGraph,
    piece_offset: Vec<u32>,
    bridges: Vec<(u32, u32)>,
}

impl QuasiTree {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn bridges(&self) -> &[(u32, u32)] {
        &self.bridges
    }

    pub fn piece_count(&self) -> usize {
        self.piece_offset.len() - 1
    }

    /// Global vertex of a piece-local vertex.
    pub fn piece_vertex(&self, piece: usize, local: u32) -> u32 {
        debug_assert!(self.piece_offset[piece] + local < self.piece_offset[piece + 1]);
        self.piece_offset[piece] + local
    }

    pub fn into_graph(self) -> WeightedGraph {
        self.graph
    }
}

pub fn build_quasitree_of_spaces(
    ball: &Ball,
    cosets: &CosetTable,
    table: &ProjectionTable,
    complex: &ProjectionComplex,
    pieces: &PieceSet,
) -> Result<QuasiTree> {
    let n = table.family().len();
    assert_eq!(pieces.graphs.len(), n);
    let mut piece_offset = Vec::with_capacity(n + 1);
    let mut total = 0u32;
    for g in &pieces.graphs {
        piece_offset.push(total);
        total += g.vertex_count() as u32;
    }
    piece_offset.push(total);
    let mut builder = GraphBuilder::new(total as usize);
    for (p, g) in pieces.graphs.iter().enumerate() {
        let off = piece_offset[p];
        for &(u, v, w) in g.edges() {
            builder.add_edge(off + u, off + v, w);
        }
    }
    let image = |from: usize, to: usize| -> Result<u32> {
        let gv = table.gate_vertex(ball, cosets, from, to);
        let members = cosets.members(table.family()[from]);
        let pos = members
            .binary_search(&gv)
            .map_err(|_| RelhypError::EmptySet("projection image outside the piece".into()))?;
        Ok(piece_offset[from] + pieces.member_map[from][pos])
    };
    let mut bridges = Vec::new();
    for &(x, z, _) in complex.graph.edges() {
        let (xi, zi) = (x as usize, z as usize);
        let bx = image(xi, zi)?;
        let bz = image(zi, xi)?;
        builder.add_edge(bx, bz, 1.0);
        bridges.push((bx, bz));
    }
    Ok(QuasiTree {
        graph: builder.build()?,
        piece_offset,
        bridges,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BottleneckReport {
    pub delta: f64,
    pub pair_count: u64,
    /// Pairs that still fail at the largest grid value (0 when delta is
    /// taken from the grid).
    pub failures: u64,
    /// A pair attaining delta, or the first pair off the grid.
    pub witness: Option<(u32, u32)>,
}

/// Smallest grid Δ such that every sampled pair either has d ≤ 2Δ or is
/// disconnected by deleting the closed Δ-ball around each near-midpoint of
/// each shortest path (deleting an endpoint counts as disconnecting).
pub fn bottleneck_check(g: &WeightedGraph, pairs: &[(u32, u32)], grid: &[f64]) -> BottleneckReport {
    let n = g.vertex_count();
    let mut worst = 0.0f64;
    let mut worst_pair = None;
    let mut failures = 0u64;
    let mut fail_pair = None;
    for &(x, y) in pairs {
        let dx = g.dijkstra(x);
        let d = dx[y as usize];
        if !d.is_finite() {
            failures += 1;
            fail_pair.get_or_insert((x, y));
            continue;
        }
        let dy = g.dijkstra(y);
        let midpoints: Vec<u32> = (0..n as u32)
            .filter(|&m| {
                let (a, b) = (dx[m as usize], dy[m as usize]);
                (a + b - d).abs() < 1e-9 && (a - d / 2.0).abs() <= 1.0 + 1e-9
            })
            .collect();
        let mid_rows: Vec<Vec<f64>> = midpoints.iter().map(|&m| g.dijkstra(m)).collect();
        let mut pair_delta = None;
        'grid: for &delta in grid {
            if d <= 2.0 * delta + 1e-9 {
                pair_delta = Some(delta);
                break;
            }
            for row in &mid_rows {
                let deleted: Vec<bool> = row.iter().map(|&dm| dm <= delta + 1e-9).collect();
                if g.connected_excluding(&deleted, x, y) {
                    continue 'grid;
                }
            }
            pair_delta = Some(delta);
            break;
        }
        match pair_delta {
            Some(delta) => {
                if delta > worst || worst_pair.is_none() {
                    worst = worst.max(delta);
                    worst_pair = Some((x, y));
                }
            }
            None => {
                failures += 1;
                fail_pair.get_or_insert((x, y));
            }
        }
    }
    BottleneckReport {
        delta: worst,
        pair_count: pairs.len() as u64,
        failures,
        witness: fail_pair.or(worst_pair),
    }
}

/// Deterministic pair sample: seeded random pairs plus the lexicographically
/// first farthest pair found from the sampled sources.
pub fn sample_pairs(g: &WeightedGraph, count: usize, seed: u64) -> Vec<(u32, u32)> {
    let n = g.vertex_count() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count + 1);
    let mut far_pair = (0u32, 0u32);
    let mut far = -1.0f64;
    while pairs.len() < count {
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        if x == y {
            continue;
        }
        let p = (x.min(y), x.max(y));
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    for &(x, _) in pairs.iter().take(4) {
        let row = g.dijkstra(x);
        for v in 0..n {
            if row[v as usize].is_finite() && row[v as usize] > far {
                far = row[v as usize];
                far_pair = (x.min(v), x.max(v));
            }
        }
    }
    if far > 0.0 && !pairs.contains(&far_pair) {
        pairs.push(far_pair);
    }
    pairs
}

/// Default Δ grid: integers from 0 to half the largest sampled distance,
/// plus one.
pub fn default_grid(upper: f64) -> Vec<f64> {
    (0..=(upper / 2.0).ceil() as u64 + 1).map(|k| k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cycle_graph, path_graph, MetricOracle};
    use crate::groups::{configured_cap, PeripheralMode, RelHypSpec};
    use crate::projections::{verify_axioms, AuditLevel, ProjectionTable};
    use crate::words::FactorSpec;

    fn f2(radius: u32, family_radius: u32) -> (Ball, CosetTable, ProjectionTable) {
        let spec = RelHypSpec::new(
            vec![FactorSpec::FreeAbelian(1), FactorSpec::FreeAbelian(1)],
            PeripheralMode::AllFactors,
        )
        .unwrap();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let cosets = CosetTable::build(&spec, &ball);
        let table = ProjectionTable::build(&spec, &ball, &cosets, family_radius).unwrap();
        (ball, cosets, table)
    }

    #[test]
    fn large_threshold_gives_complete_complex() {
        let (_, _, table) = f2(4, 2);
        let n = table.family().len();
        let complex = build_projection_complex(&table, 100.0).unwrap();
        assert_eq!(complex.graph().edges().len(), n * (n - 1) / 2);
    }

    #[test]
    fn complex_is_monotone_in_k() {
        let (_, _, table) = f2(5, 2);
        let mut prev: Option<usize> = None;
        for k in [1.0, 2.0, 4.0, 8.0] {
            let complex = build_projection_complex(&table, k).unwrap();
            let count = complex.graph().edges().len();
            if let Some(p) = prev {
                assert!(count >= p);
            }
            // containment, not just counts
            prev = Some(count);
        }
    }

    #[test]
    fn complex_edges_nest_between_thresholds() {
        let (_, _, table) = f2(5, 2);
        let small = build_projection_complex(&table, 1.0).unwrap();
        let large = build_projection_complex(&table, 3.0).unwrap();
        let large_set: std::collections::HashSet<(u32, u32)> =
            large.graph().edges().iter().map(|&(u, v, _)| (u, v)).collect();
        for &(u, v, _) in small.graph().edges() {
            assert!(large_set.contains(&(u, v)));
        }
    }

    #[test]
    fn rejects_nonpositive_threshold() {
        let (_, _, table) = f2(4, 2);
        assert!(build_projection_complex(&table, 0.0).is_err());
    }

    #[test]
    fn f2_complex_at_probe_threshold_is_connected() {
        let (ball, cosets, table) = f2(6, 3);
        let report = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
        let complex = build_projection_complex(&table, report.xi3 + 1.0).unwrap();
        assert!(complex.graph().is_connected());
    }

    #[test]
    fn quasitree_respects_pieces_and_connects() {
        let (ball, cosets, table) = f2(6, 3);
        let complex = build_projection_complex(&table, 1.0).unwrap();
        let pieces = coset_pieces(&ball, &cosets, &table);
        let qt = build_quasitree_of_spaces(&ball, &cosets, &table, &complex, &pieces).unwrap();
        assert!(qt.graph().is_connected());
        assert_eq!(qt.piece_count(), table.family().len());
        // piece-internal distances survive when no bridge shortcut exists:
        // neighbors inside the identity ⟨a⟩ piece stay at distance 1
        let c = table.family_index(cosets.coset_of(0, 0)).unwrap();
        let oracle = MetricOracle::new(qt.graph());
        let members = cosets.members(table.family()[c]);
        let pg = &pieces.graphs[c];
        let po = MetricOracle::new(pg);
        for i in 0..members.len() as u32 {
            for j in 0..members.len() as u32 {
                let dq = oracle.dist(qt.piece_vertex(c, i), qt.piece_vertex(c, j));
                let dp = po.dist(i, j);
                assert!(dq <= dp + 1e-9);
                if dp == 1.0 {
                    assert_eq!(dq, 1.0);
                }
            }
        }
        assert!(!qt.bridges().is_empty());
    }

    #[test]
    fn bridge_endpoints_realize_small_projection_distances() {
        let (_ball, _cosets, table) = f2(6, 3);
        let complex = build_projection_complex(&table, 1.0).unwrap();
        for &(x, z, _) in complex.graph().edges() {
            let n = table.family().len();
            for y in 0..n {
                if y != x as usize && y != z as usize {
                    assert!(table.proj_distance(y, x as usize, z as usize) <= 1.0);
                }
            }
        }
    }

    #[test]
    fn bottleneck_of_path_is_zero() {
        let g = path_graph(16);
        let pairs = vec![(0u32, 16u32), (2, 9)];
        let report = bottleneck_check(&g, &pairs, &default_grid(16.0));
        assert_eq!(report.delta, 0.0);
        assert_eq!(report.failures, 0);
    }

    #[test]
    fn bottleneck_of_cycles_grows() {
        let g = cycle_graph(24);
        let pairs = vec![(0u32, 12u32), (3, 15), (1, 13)];
        let report = bottleneck_check(&g, &pairs, &default_grid(12.0));
        assert!(report.delta >= 5.0, "C24 delta {}", report.delta);
        let g12 = cycle_graph(12);
        let pairs12 = vec![(0u32, 6u32), (2, 8)];
        let r12 = bottleneck_check(&g12, &pairs12, &default_grid(6.0));
        assert!(r12.delta >= 12.0 / 4.0 - 1.0);
        assert!(r12.delta < report.delta);
    }

    #[test]
    fn quasitree_bottleneck_is_small_and_radius_stable() {
        let mut deltas = Vec::new();
        for (radius, fam) in [(4u32, 2u32), (6, 3)] {
            let (ball, cosets, table) = f2(radius, fam);
            let report = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
            let complex = build_projection_complex(&table, report.xi3 + 1.0).unwrap();
            let pieces = coset_pieces(&ball, &cosets, &table);
            let qt = build_quasitree_of_spaces(&ball, &cosets, &table, &complex, &pieces).unwrap();
            let pairs = sample_pairs(qt.graph(), 24, 5);
            let report = bottleneck_check(qt.graph(), &pairs, &default_grid(24.0));
            assert_eq!(report.failures, 0);
            deltas.push(report.delta);
        }
        assert!(deltas[1] <= deltas[0] + 1.0, "deltas {deltas:?}");
    }

    #[test]
    fn pair_sampling_is_deterministic() {
        let g = cycle_graph(30);
        assert_eq!(sample_pairs(&g, 10, 3), sample_pairs(&g, 10, 3));
    }
}
