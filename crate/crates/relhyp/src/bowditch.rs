//! Cusped-space balls: a Cayley ball with a combinatorial horoball glued
//! onto every peripheral coset.
//!
//! Two constructions are provided. [`build_cusped`] materializes the whole
//! space (all horoball levels) and is meant for small radii and for
//! validating the second construction. [`build_compressed`] keeps only the
//! level-0 vertices and replaces each horoball by shortcut edges carrying
//! the exact transit distance; level-0 distances agree with the full space
//! pair for pair, at a fraction of the memory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{GraphBuilder, WeightedGraph};
use crate::groups::{Ball, CosetId, CosetTable, PeripheralMode, RelHypSpec};
use crate::horoball::horo_exact;
use crate::words::{letter_gen, letter_is_inverse, Alphabet, FactorSpec, Word};

/// Factor distance at which a horoball transit first beats the level-0 path.
const SHORTCUT_MIN_DIST: u32 = 4;

pub struct BowditchBall {
    graph: WeightedGraph,
    depth: u32,
    level0: u32,
    /// Prefix sums of coset member counts; block c of the upper-level id
    /// space spans `depth * (prefix[c]..prefix[c+1])`.
    member_prefix: Vec<u32>,
}

impl BowditchBall {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn level0_count(&self) -> u32 {
        self.level0
    }

    /// Id of the k-th member of coset `c` at `level >= 1`. Level 0 ids are
    /// the ball vertex ids themselves.
    pub fn upper_vertex(&self, c: CosetId, level: u32, k: u32) -> u32 {
        debug_assert!(level >= 1 && level <= self.depth);
        let base = self.member_prefix[c as usize];
        let count = self.member_prefix[c as usize + 1] - base;
        debug_assert!(k < count);
        self.level0 + self.depth * base + (level - 1) * count + k
    }
}

/// Orbit order of a cyclic coset's members: walk rep·w^k both ways while the
/// points stay in the ball. Membership is contiguous along the orbit because
/// word length is V-shaped around the shortlex-minimal point.
fn coset_orbit_order(ab: &Alphabet, ball: &Ball, rep: &Word, w: &Word) -> Result<Vec<u32>> {
    let w_inv = ab.inverse(w);
    let rep_id = ball
        .index_of(rep)
        .ok_or_else(|| RelhypError::InvalidGraph("coset representative outside ball".into()))?;
    let mut forward = Vec::new();
    let mut cur = rep.clone();
    loop {
        cur = ab.mul(&cur, w);
        match ball.index_of(&cur) {
            Some(v) => forward.push(v),
            None => break,
        }
    }
    let mut backward = Vec::new();
    let mut cur = rep.clone();
    loop {
        cur = ab.mul(&cur, &w_inv);
        match ball.index_of(&cur) {
            Some(v) => backward.push(v),
            None => break,
        }
    }
    backward.reverse();
    backward.push(rep_id);
    backward.extend(forward);
    Ok(backward)
}

/// Members of each coset in horoball base order together with the unit base
/// edges (as member-index pairs). For factor cosets the base is the induced
/// Cayley graph; for a cyclic peripheral it is the orbit path.
fn coset_bases(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
) -> Result<Vec<(Vec<u32>, Vec<(u32, u32)>)>> {
    let ab = ball.alphabet();
    let mut bases = Vec::with_capacity(cosets.cosets().len());
    match spec.mode() {
        PeripheralMode::AllFactors => {
            for c in 0..cosets.cosets().len() {
                bases.push((cosets.members(c as CosetId).to_vec(), Vec::new()));
            }
            // every Cayley edge multiplies by one factor letter, so it lies
            // in exactly one peripheral coset
            for &(u, v, _) in ball.graph().edges() {
                let step = ab.mul(&ab.inverse(ball.word(u)), ball.word(v));
                debug_assert_eq!(step.len(), 1);
                let factor = crate::words::letter_factor(step[0]) as usize;
                let c = cosets.coset_of(u, factor);
                debug_assert_eq!(c, cosets.coset_of(v, factor));
                let members = &bases[c as usize].0;
                let ku = members.binary_search(&u).expect("member index") as u32;
                let kv = members.binary_search(&v).expect("member index") as u32;
                bases[c as usize].1.push((ku, kv));
            }
        }
        PeripheralMode::CyclicSubgroup(w) => {
            for c in 0..cosets.cosets().len() as CosetId {
                let order = coset_orbit_order(ab, ball, &cosets.coset(c).rep, w)?;
                if order.len() != cosets.members(c).len() {
                    return Err(RelhypError::InvalidGraph(format!(
                        "orbit walk of coset {c} found {} of {} members",
                        order.len(),
                        cosets.members(c).len()
                    )));
                }
                let edges = (1..order.len() as u32).map(|k| (k - 1, k)).collect();
                bases.push((order, edges));
            }
        }
    }
    Ok(bases)
}

/// Builds the full cusped ball: level 0 is the Cayley ball, and every
/// peripheral coset carries a horoball over its base, glued along level 0.
pub fn build_cusped(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
    depth: u32,
) -> Result<BowditchBall> {
    let bases = coset_bases(spec, ball, cosets)?;
    let level0 = ball.graph().vertex_count() as u32;
    let mut member_prefix = Vec::with_capacity(bases.len() + 1);
    member_prefix.push(0u32);
    for (members, _) in &bases {
        member_prefix.push(member_prefix.last().unwrap() + members.len() as u32);
    }
    let total = level0 as usize + depth as usize * *member_prefix.last().unwrap() as usize;
    let mut builder = GraphBuilder::new(total);
    for &(u, v, w) in ball.graph().edges() {
        builder.add_edge(u, v, w);
    }
    let upper = |c: usize, level: u32, k: u32| {
        let base = member_prefix[c];
        let count = member_prefix[c + 1] - base;
        level0 + depth * base + (level - 1) * count + k
    };
    for (c, (members, base_edges)) in bases.iter().enumerate() {
        let id = |level: u32, k: u32| {
            if level == 0 {
                members[k as usize]
            } else {
                upper(c, level, k)
            }
        };
        for &(ku, kv) in base_edges {
            for level in 0..=depth {
                builder.add_edge(id(level, ku), id(level, kv), (-(level as f64)).exp());
            }
        }
        for k in 0..members.len() as u32 {
            for level in 0..depth {
                builder.add_edge(id(level, k), id(level + 1, k), 1.0);
            }
        }
    }
    Ok(BowditchBall {
        graph: builder.build()?,
        depth,
        level0,
        member_prefix,
    })
}

/// ℓ¹ coordinates of a single-syllable word in a free abelian factor.
fn abelian_coords(h: &[u8], rank: usize) -> Vec<i32> {
    let mut coords = vec![0i32; rank];
    for &l in h {
        let g = letter_gen(l) as usize;
        coords[g] += if letter_is_inverse(l) { -1 } else { 1 };
    }
    coords
}

/// Base distances within one coset, reported as shortcut candidates
/// (pairs of member indices at base distance >= 4).
fn shortcut_pairs(
    ab: &Alphabet,
    ball: &Ball,
    peripheral: u32,
    rep_len: usize,
    members: &[u32],
    cyclic: bool,
) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    let m = members.len();
    if cyclic {
        for i in 0..m {
            for j in (i + SHORTCUT_MIN_DIST as usize)..m {
                out.push((i as u32, j as u32, (j - i) as u32));
            }
        }
        return out;
    }
    let factor = ab.factors()[peripheral as usize];
    match factor {
        FactorSpec::FreeAbelian(rank) => {
            let coords: Vec<Vec<i32>> = members
                .iter()
                .map(|&v| abelian_coords(&ball.word(v)[rep_len..], rank as usize))
                .collect();
            for i in 0..m {
                for j in (i + 1)..m {
                    let d: u32 = coords[i]
                        .iter()
                        .zip(&coords[j])
                        .map(|(a, b)| a.abs_diff(*b))
                        .sum();
                    if d >= SHORTCUT_MIN_DIST {
                        out.push((i as u32, j as u32, d));
                    }
                }
            }
        }
        _ => {
            let parts: Vec<&[u8]> = members.iter().map(|&v| &ball.word(v)[rep_len..]).collect();
            let inverses: Vec<Word> = parts.iter().map(|h| ab.inverse(h)).collect();
            for i in 0..m {
                for j in (i + 1)..m {
                    let d = ab.word_length(&ab.mul(&inverses[i], parts[j])) as u32;
                    if d >= SHORTCUT_MIN_DIST {
                        out.push((i as u32, j as u32, d));
                    }
                }
            }
        }
    }
    out
}

/// Level-0 compression of the cusped ball: Cayley edges, horoball base
/// edges, and one shortcut per coset pair at base distance >= 4 carrying the
/// exact transit cost min_t (2t + e⁻ᵗ·d), clipped at `depth`.
pub fn build_compressed(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
    depth: u32,
) -> Result<WeightedGraph> {
    let ab = ball.alphabet();
    let cyclic = matches!(spec.mode(), PeripheralMode::CyclicSubgroup(_));
    let mut builder = GraphBuilder::new(ball.graph().vertex_count());
    for &(u, v, w) in ball.graph().edges() {
        builder.add_edge(u, v, w);
    }
    for c in 0..cosets.cosets().len() as CosetId {
        let coset = cosets.coset(c);
        let members: Vec<u32> = if cyclic {
            coset_orbit_order(ab, ball, &coset.rep, match spec.mode() {
                PeripheralMode::CyclicSubgroup(w) => w,
                PeripheralMode::AllFactors => unreachable!(),
            })?
        } else {
            cosets.members(c).to_vec()
        };
        if cyclic {
            for pair in members.windows(2) {
                builder.add_edge(pair[0], pair[1], 1.0);
            }
        }
        for (ki, kj, d) in shortcut_pairs(ab, ball, coset.peripheral, coset.rep.len(), &members, cyclic)
        {
            let (cost, _, _) = horo_exact(d as f64, 0, 0, depth);
            builder.add_edge(members[ki as usize], members[kj as usize], cost);
        }
    }
    builder.build()
}

/// Gromov product (y|z)_x from the three pairwise distances.
pub fn gromov_product(d_xy: f64, d_xz: f64, d_yz: f64) -> f64 {
    (d_xy + d_xz - d_yz) / 2.0
}

/// Visual quasi-metric seen from the basepoint: e^(−ε·(y|z)_x).
pub fn visual_quasimetric(eps: f64, product: f64) -> f64 {
    (-eps * product).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub argmax: [u32; 4],
    pub quadruple_count: u64,
    pub source_count: usize,
}

/// Four-point hyperbolicity estimate over a source pool: one shortest-path
/// tree per source, then the defect over sampled source quadruples. With
/// C(n,4) at most `quad_cap` the scan is exhaustive, otherwise a seeded
/// sample of `quad_cap` quadruples is used.
pub fn delta_estimate(g: &WeightedGraph, sources: &[u32], quad_cap: u64, seed: u64) -> DeltaReport {
    let n = sources.len();
    assert!(n >= 4, "need at least 4 sources");
    let rows: Vec<Vec<f64>> = sources.iter().map(|&s| g.dijkstra(s)).collect();
    let d = |i: usize, j: usize| rows[i][sources[j] as usize];
    let exhaustive_count = (n as u64) * (n as u64 - 1) * (n as u64 - 2) * (n as u64 - 3) / 24;
    let mut delta = 0.0f64;
    let mut argmax = [0u32; 4];
    let mut consider = |q: [usize; 4]| {
        let [a, b, c, e] = q;
        let s1 = d(a, b) + d(c, e);
        let s2 = d(a, c) + d(b, e);
        let s3 = d(a, e) + d(b, c);
        let defect = crate::graph::quad_defect(s1, s2, s3);
        if defect > delta {
            delta = defect;
            argmax = [sources[a], sources[b], sources[c], sources[e]];
        }
    };
    let quadruple_count;
    if exhaustive_count <= quad_cap {
        quadruple_count = exhaustive_count;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for e in c + 1..n {
                        consider([a, b, c, e]);
                    }
                }
            }
        }
    } else {
        quadruple_count = quad_cap;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drawn = 0u64;
        while drawn < quad_cap {
            let mut q = [0usize; 4];
            for slot in q.iter_mut() {
                *slot = rng.gen_range(0..n);
            }
            q.sort_unstable();
            if q[0] == q[1] || q[1] == q[2] || q[2] == q[3] {
                continue;
            }
            drawn += 1;
            consider(q);
        }
    }
    DeltaReport {
        delta,
        argmax,
        quadruple_count,
        source_count: n,
    }
}

/// Deterministic source pool: evenly spaced boundary-sphere vertices plus
/// seeded random ball vertices, deduplicated and sorted.
pub fn source_pool(ball: &Ball, sphere_count: usize, random_count: usize, seed: u64) -> Vec<u32> {
    let mut pool = Vec::new();
    let sphere = ball.sphere(ball.radius());
    let len = sphere.len();
    if len > 0 && sphere_count > 0 {
        for k in 0..sphere_count.min(len) {
            pool.push(sphere.start + ((k * len) / sphere_count.min(len)) as u32);
        }
    }
    let n = ball.graph().vertex_count() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut added = 0;
    while added < random_count {
        let v = rng.gen_range(0..n);
        if !pool.contains(&v) {
            pool.push(v);
            added += 1;
        }
    }
    pool.sort_unstable();
    pool.dedup();
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cycle_graph, path_graph, MetricOracle};
    use crate::groups::{configured_cap, Ball, CosetTable, RelHypSpec};
    use crate::words::FactorSpec;

    fn z2z2(radius: u32) -> (RelHypSpec, Ball, CosetTable) {
        let spec = RelHypSpec::new(
            vec![FactorSpec::FreeAbelian(2), FactorSpec::FreeAbelian(2)],
            PeripheralMode::AllFactors,
        )
        .unwrap();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let table = CosetTable::build(&spec, &ball);
        (spec, ball, table)
    }

    fn f2_cyclic(radius: u32) -> (RelHypSpec, Ball, CosetTable) {
        let spec = RelHypSpec::new(
            vec![FactorSpec::Free(2)],
            PeripheralMode::CyclicSubgroup(vec![
                crate::words::letter(0, 0, false),
                crate::words::letter(0, 1, false),
                crate::words::letter(0, 0, true),
                crate::words::letter(0, 1, true),
            ]),
        )
        .unwrap();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let table = CosetTable::build(&spec, &ball);
        (spec, ball, table)
    }

    #[test]
    fn depth_zero_is_the_cayley_ball() {
        let (spec, ball, table) = z2z2(3);
        let cusped = build_cusped(&spec, &ball, &table, 0).unwrap();
        assert_eq!(cusped.graph().vertex_count(), ball.graph().vertex_count());
        let a = MetricOracle::new(cusped.graph());
        let b = MetricOracle::new(ball.graph());
        for src in [0u32, 7, 100] {
            let (ra, rb) = (a.row(src), b.row(src));
            for v in 0..ball.graph().vertex_count() {
                assert_eq!(ra[v], rb[v]);
            }
        }
    }

    #[test]
    fn vertex_count_is_ball_plus_depth_times_memberships() {
        let (spec, ball, table) = z2z2(2);
        let depth = 2;
        let cusped = build_cusped(&spec, &ball, &table, depth).unwrap();
        let total_members: usize = (0..table.cosets().len())
            .map(|c| table.members(c as CosetId).len())
            .sum();
        // every vertex lies in one coset per factor
        assert_eq!(total_members, 2 * ball.graph().vertex_count());
        assert_eq!(
            cusped.graph().vertex_count(),
            ball.graph().vertex_count() + depth as usize * total_members
        );
        assert_eq!(cusped.graph().vertex_count(), 57 * 5);
    }

    #[test]
    fn compressed_matches_full_on_level_zero() {
        let (spec, ball, table) = z2z2(3);
        let depth = 3;
        let full = build_cusped(&spec, &ball, &table, depth).unwrap();
        let compressed = build_compressed(&spec, &ball, &table, depth).unwrap();
        let n = ball.graph().vertex_count();
        let fo = MetricOracle::new(full.graph());
        let co = MetricOracle::new(&compressed);
        for src in [0u32, 3, 50, n as u32 - 1] {
            let (rf, rc) = (fo.row(src), co.row(src));
            for v in 0..n {
                assert!(
                    (rf[v] - rc[v]).abs() < 1e-9,
                    "level-0 mismatch from {src} to {v}: {} vs {}",
                    rf[v],
                    rc[v]
                );
            }
        }
    }

    #[test]
    fn cyclic_mode_builds_and_compresses_consistently() {
        let (spec, ball, table) = f2_cyclic(4);
        let depth = 3;
        let full = build_cusped(&spec, &ball, &table, depth).unwrap();
        let compressed = build_compressed(&spec, &ball, &table, depth).unwrap();
        let n = ball.graph().vertex_count();
        let fo = MetricOracle::new(full.graph());
        let co = MetricOracle::new(&compressed);
        for src in [0u32, 1, n as u32 / 2] {
            let (rf, rc) = (fo.row(src), co.row(src));
            for v in 0..n {
                assert!((rf[v] - rc[v]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cyclic_orbit_edges_shorten_the_w_direction() {
        let (spec, ball, table) = f2_cyclic(4);
        let compressed = build_compressed(&spec, &ball, &table, 3).unwrap();
        let w = ball.index_of(&spec.parse_word("abAB").unwrap()).unwrap();
        let d = compressed.dijkstra(0);
        assert_eq!(d[w as usize], 1.0);
    }

    #[test]
    fn delta_on_twelve_cycle_matches_exhaustive() {
        let g = cycle_graph(12);
        let pool: Vec<u32> = (0..12).collect();
        let report = delta_estimate(&g, &pool, 1_000_000, 7);
        assert_eq!(report.delta, 3.0);
        assert_eq!(report.quadruple_count, 495);
    }

    #[test]
    fn delta_on_path_is_zero() {
        let g = path_graph(9);
        let pool: Vec<u32> = (0..10).collect();
        let report = delta_estimate(&g, &pool, 1_000_000, 7);
        assert_eq!(report.delta, 0.0);
    }

    #[test]
    fn delta_sampling_is_deterministic() {
        let g = cycle_graph(12);
        let pool: Vec<u32> = (0..12).collect();
        let a = delta_estimate(&g, &pool, 100, 11);
        let b = delta_estimate(&g, &pool, 100, 11);
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.argmax, b.argmax);
    }

    #[test]
    fn gromov_product_and_visual_scale() {
        assert_eq!(gromov_product(3.0, 4.0, 5.0), 1.0);
        let near = visual_quasimetric(0.2, 10.0);
        let far = visual_quasimetric(0.2, 2.0);
        assert!(near < far);
        assert!((near - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn source_pool_is_deterministic_and_in_range() {
        let (_, ball, _) = z2z2(3);
        let a = source_pool(&ball, 8, 8, 42);
        let b = source_pool(&ball, 8, 8, 42);
        assert_eq!(a, b);
        assert!(a.len() >= 14 && a.len() <= 16);
        assert!(a.iter().all(|&v| (v as usize) < ball.graph().vertex_count()));
        let sphere = ball.sphere(3);
        assert!(a.iter().filter(|&&v| sphere.contains(&v)).count() >= 8);
    }
}
