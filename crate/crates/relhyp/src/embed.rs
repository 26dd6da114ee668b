//! Tree embeddings of the peripheral factors, the composed map into a
//! product of quasi-trees with a coned-off coordinate, the free-product
//! joining of factor embeddings into honest trees, and distortion fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{path_graph, GraphBuilder, MetricOracle, WeightedGraph};
use crate::groups::{coned_dist, configured_cap, Ball, CosetId, CosetTable, RelHypSpec};
use crate::projections::{canonical_coset, fit_rows, ProjectionTable};
use crate::quasitree::{build_quasitree_of_spaces, PieceSet, ProjectionComplex};
use crate::words::{letter_factor, letter_gen, letter_is_inverse, Alphabet, FactorSpec, Letter};

fn is_tree(g: &WeightedGraph) -> bool {
    g.edges().len() == g.vertex_count() - 1 && g.is_connected()
}

/// A certified tree together with the map from domain vertices into it.
pub struct TreeTarget {
    pub graph: WeightedGraph,
    pub map: Vec<u32>,
}

impl TreeTarget {
    pub fn new(graph: WeightedGraph, map: Vec<u32>) -> Result<Self> {
        if !is_tree(&graph) {
            return Err(RelhypError::InvalidGraph(
                "tree target has a cycle or is disconnected".into(),
            ));
        }
        let n = graph.vertex_count() as u32;
        if map.iter().any(|&t| t >= n) {
            return Err(RelhypError::InvalidGraph("coordinate map leaves the tree".into()));
        }
        Ok(TreeTarget { graph, map })
    }
}

/// How many tree coordinates a factor needs.
pub fn tree_count(factor: FactorSpec) -> usize {
    match factor {
        FactorSpec::FreeAbelian(n) => n as usize,
        FactorSpec::Free(_) | FactorSpec::Cyclic(_) => 1,
    }
}

fn signed_count(w: &[Letter], gen: u32) -> i64 {
    w.iter()
        .filter(|&&l| letter_gen(l) == gen)
        .map(|&l| if letter_is_inverse(l) { -1 } else { 1 })
        .sum()
}

/// Tree embeddings of one factor over its own ball: free-abelian factors
/// go component-wise to coordinate lines, free factors keep their Cayley
/// tree, finite cyclic factors collapse to a point.
pub fn peripheral_embedding(factor: FactorSpec, radius: u32) -> Result<Vec<TreeTarget>> {
    let ab = Alphabet::new(vec![factor])?;
    let ball = Ball::build_raw(ab, radius, configured_cap())?;
    let n = ball.graph().vertex_count();
    match factor {
        FactorSpec::FreeAbelian(rank) => (0..rank)
            .map(|i| {
                let r = radius as i64;
                let line = path_graph(2 * radius as usize);
                let map = (0..n as u32)
                    .map(|v| (signed_count(ball.word(v), i) + r) as u32)
                    .collect();
                TreeTarget::new(line, map)
            })
            .collect(),
        FactorSpec::Free(_) => {
            let mut b = GraphBuilder::new(n);
            for &(u, v, w) in ball.graph().edges() {
                b.add_edge(u, v, w);
            }
            Ok(vec![TreeTarget::new(b.build()?, (0..n as u32).collect())?])
        }
        FactorSpec::Cyclic(_) => Ok(vec![TreeTarget::new(path_graph(0), vec![0; n])?]),
    }
}

/// One coordinate of a product embedding: a target graph plus the map from
/// domain positions into it.
pub struct CoordinateMap {
    pub graph: WeightedGraph,
    pub map: Vec<u32>,
    pub tree: bool,
}

/// Point coordinate: maps the whole domain to a single vertex.
pub fn point_coordinate(domain_len: usize) -> CoordinateMap {
    CoordinateMap {
        graph: path_graph(0),
        map: vec![0; domain_len],
        tree: true,
    }
}

/// Map into a product of coordinate graphs, with an optional coned-off
/// final coordinate evaluated algebraically from ball words. The product
/// metric is the sum of the coordinates.
pub struct ProductEmbedding {
    domain: Vec<u32>,
    coords: Vec<CoordinateMap>,
    coned_final: bool,
}

impl ProductEmbedding {
    /// Ball vertices the map is defined on, ascending.
    pub fn domain(&self) -> &[u32] {
        &self.domain
    }

    pub fn coords(&self) -> &[CoordinateMap] {
        &self.coords
    }

    pub fn has_coned_final(&self) -> bool {
        self.coned_final
    }

    pub fn domain_index(&self, v: u32) -> Option<usize> {
        self.domain.binary_search(&v).ok()
    }

    pub fn certified_tree_count(&self) -> usize {
        self.coords.iter().filter(|c| c.tree).count()
    }

    pub fn push_coordinate(&mut self, coord: CoordinateMap) {
        assert_eq!(coord.map.len(), self.domain.len());
        self.coords.push(coord);
    }

    pub fn write_csv(&self, ball: &Ball, mut out: impl std::io::Write) -> Result<()> {
        write!(out, "vertex")?;
        for k in 0..self.coords.len() {
            write!(out, ",t{k}")?;
        }
        writeln!(out)?;
        for (i, &v) in self.domain.iter().enumerate() {
            write!(out, "{}", ball.alphabet().render(ball.word(v)))?;
            for c in &self.coords {
                write!(out, ",{}", c.map[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Exact tree distances via Euler-tour LCA; O(1) per query after O(n log n)
/// setup, so big joins stay cheap.
pub struct TreeMetric {
    depth: Vec<f64>,
    first: Vec<u32>,
    euler: Vec<u32>,
    sparse: Vec<Vec<u32>>,
}

impl TreeMetric {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        if !is_tree(g) {
            return Err(RelhypError::InvalidGraph("metric requires a tree".into()));
        }
        let n = g.vertex_count();
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in g.edges() {
            adj[u as usize].push((v, w));
            adj[v as usize].push((u, w));
        }
        let mut depth = vec![0.0f64; n];
        let mut first = vec![u32::MAX; n];
        let mut euler = Vec::with_capacity(2 * n);
        let mut stack: Vec<(u32, u32, usize)> = vec![(0, u32::MAX, 0)];
        while let Some(&mut (v, parent, ref mut next)) = stack.last_mut() {
            if *next == 0 {
                first[v as usize] = euler.len() as u32;
            }
            euler.push(v);
            let mut advanced = false;
            while *next < adj[v as usize].len() {
                let (u, w) = adj[v as usize][*next];
                *next += 1;
                if u != parent {
                    depth[u as usize] = depth[v as usize] + w;
                    stack.push((u, v, 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                stack.pop();
                if stack.is_empty() {
                    break;
                }
            }
        }
        let m = euler.len();
        let levels = (usize::BITS - m.leading_zeros()) as usize;
        let mut sparse = Vec::with_capacity(levels);
        sparse.push(euler.clone());
        let mut span = 1;
        while 2 * span <= m {
            let prev = sparse.last().unwrap();
            let row: Vec<u32> = (0..=m - 2 * span)
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + span]);
                    if depth[a as usize] <= depth[b as usize] {
                        a
                    } else {
                        b
                    }
                })
                .collect();
            sparse.push(row);
            span *= 2;
        }
        Ok(TreeMetric {
            depth,
            first,
            euler,
            sparse,
        })
    }

    fn lca(&self, u: u32, v: u32) -> u32 {
        let (mut l, mut r) = (self.first[u as usize], self.first[v as usize]);
        if l > r {
            std::mem::swap(&mut l, &mut r);
        }
        let len = (r - l + 1) as usize;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        if k == 0 {
            return self.euler[l as usize];
        }
        let a = self.sparse[k][l as usize];
        let b = self.sparse[k][r as usize + 1 - (1 << k)];
        if self.depth[a as usize] <= self.depth[b as usize] {
            a
        } else {
            b
        }
    }

    pub fn dist(&self, u: u32, v: u32) -> f64 {
        if u == v {
            return 0.0;
        }
        let l = self.lca(u, v);
        self.depth[u as usize] + self.depth[v as usize] - 2.0 * self.depth[l as usize]
    }
}

/// Image of one coset under its factor's `coord`-th tree: a line read off a
/// free-abelian coordinate, the coset subgraph for a free factor, a point
/// otherwise (including padding coordinates).
fn coset_copy(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
    c: CosetId,
    coord: usize,
) -> (WeightedGraph, Vec<u32>) {
    let cs = cosets.coset(c);
    let members = cosets.members(c);
    let rep_len = cs.rep.len();
    let factor = spec.alphabet().factors()[cs.peripheral as usize];
    match factor {
        FactorSpec::FreeAbelian(rank) if coord < rank as usize => {
            let coords: Vec<i64> = members
                .iter()
                .map(|&v| signed_count(&ball.word(v)[rep_len..], coord as u32))
                .collect();
            let lo = *coords.iter().min().expect("coset has members");
            let hi = *coords.iter().max().expect("coset has members");
            let line = path_graph((hi - lo) as usize);
            let map = coords.iter().map(|&x| (x - lo) as u32).collect();
            (line, map)
        }
        FactorSpec::Free(_) if coord == 0 => {
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
            (b.build().expect("coset subgraph"), (0..members.len() as u32).collect())
        }
        _ => (path_graph(0), vec![0; members.len()]),
    }
}

/// Pieces for the quasi-tree 𝐓ᵢ: each family coset contributes the image of
/// its `coord`-th factor tree.
pub fn tree_pieces(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
    table: &ProjectionTable,
    coord: usize,
) -> PieceSet {
    let mut graphs = Vec::with_capacity(table.family().len());
    let mut member_map = Vec::with_capacity(table.family().len());
    for &c in table.family() {
        let (g, map) = coset_copy(spec, ball, cosets, c, coord);
        graphs.push(g);
        member_map.push(map);
    }
    PieceSet { graphs, member_map }
}

/// The composed map f = ∏pᵢ × c: coordinate i sends x to the image of
/// π_{Y(x)}(x) in piece Y(x) of the quasi-tree built over the i-th factor
/// trees; the final coordinate is the coned-off inclusion. Domain: every
/// ball vertex whose canonical coset has a registered piece.
pub fn compose_embedding(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
    table: &ProjectionTable,
    complex: &ProjectionComplex,
) -> Result<ProductEmbedding> {
    let m = spec
        .alphabet()
        .factors()
        .iter()
        .map(|&f| tree_count(f))
        .max()
        .expect("spec has factors");
    let n = ball.graph().vertex_count() as u32;
    let mut domain = Vec::new();
    let mut piece_of = Vec::new();
    for v in 0..n {
        if let Some(fi) = table.family_index(canonical_coset(cosets, v)) {
            domain.push(v);
            piece_of.push(fi);
        }
    }
    if domain.is_empty() {
        return Err(RelhypError::EmptySet("no vertex has a registered coset".into()));
    }
    let mut coords = Vec::with_capacity(m);
    for i in 0..m {
        let pieces = tree_pieces(spec, ball, cosets, table, i);
        let qt = build_quasitree_of_spaces(ball, cosets, table, complex, &pieces)?;
        let map = domain
            .iter()
            .zip(&piece_of)
            .map(|(&v, &fi)| {
                let pos = cosets
                    .members(table.family()[fi])
                    .binary_search(&v)
                    .expect("domain vertex lies in its coset");
                qt.piece_vertex(fi, pieces.member_map[fi][pos])
            })
            .collect();
        let graph = qt.into_graph();
        let tree = is_tree(&graph);
        coords.push(CoordinateMap { graph, map, tree });
    }
    Ok(ProductEmbedding {
        domain,
        coords,
        coned_final: true,
    })
}

/// Joins the factor tree embeddings of a two-factor free product into
/// max(n₁, n₂) honest trees: per coordinate, one copy of the factor tree
/// image per coset, glued by a unit edge at each group element between its
/// two cosets. x maps into the coset of its trailing syllable's factor.
pub fn free_product_join(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
) -> Result<ProductEmbedding> {
    let factors = spec.alphabet().factors();
    if factors.len() != 2 || cosets.peripheral_count() != 2 {
        return Err(RelhypError::Precondition(
            "join needs a two-factor free product with both factors peripheral".into(),
        ));
    }
    let m = tree_count(factors[0]).max(tree_count(factors[1]));
    let n = ball.graph().vertex_count() as u32;
    let domain: Vec<u32> = (0..n).collect();
    let home: Vec<CosetId> = (0..n)
        .map(|v| {
            let w = ball.word(v);
            let f = w.last().map_or(0, |&l| letter_factor(l));
            cosets.coset_of(v, f)
        })
        .collect();
    let mut coords = Vec::with_capacity(m);
    for k in 0..m {
        let mut copies = Vec::with_capacity(cosets.cosets().len());
        let mut offset = Vec::with_capacity(cosets.cosets().len() + 1);
        let mut total = 0u32;
        for c in 0..cosets.cosets().len() as CosetId {
            let copy = coset_copy(spec, ball, cosets, c, k);
            offset.push(total);
            total += copy.0.vertex_count() as u32;
            copies.push(copy);
        }
        offset.push(total);
        let image = |v: u32, c: CosetId| -> u32 {
            let pos = cosets
                .members(c)
                .binary_search(&v)
                .expect("element lies in its coset");
            offset[c as usize] + copies[c as usize].1[pos]
        };
        let mut b = GraphBuilder::new(total as usize);
        for (c, (g, _)) in copies.iter().enumerate() {
            for &(u, v, w) in g.edges() {
                b.add_edge(offset[c] + u, offset[c] + v, w);
            }
        }
        for v in 0..n {
            b.add_edge(image(v, cosets.coset_of(v, 0)), image(v, cosets.coset_of(v, 1)), 1.0);
        }
        let graph = b.build()?;
        if !graph.is_connected() {
            return Err(RelhypError::InvalidGraph("join coordinate is disconnected".into()));
        }
        if !is_tree(&graph) {
            return Err(RelhypError::InvalidGraph("join coordinate has a cycle".into()));
        }
        let map = (0..n).map(|v| image(v, home[v as usize])).collect();
        coords.push(CoordinateMap {
            graph,
            map,
            tree: true,
        });
    }
    Ok(ProductEmbedding {
        domain,
        coords,
        coned_final: false,
    })
}

enum CoordOracle<'a> {
    Tree(TreeMetric),
    Rows(MetricOracle<'a>),
}

impl CoordOracle<'_> {
    fn dist(&self, u: u32, v: u32) -> f64 {
        match self {
            CoordOracle::Tree(t) => t.dist(u, v),
            CoordOracle::Rows(o) => o.dist(u, v),
        }
    }
}

fn oracles<'a>(emb: &'a ProductEmbedding) -> Result<Vec<CoordOracle<'a>>> {
    emb.coords
        .iter()
        .map(|c| {
            Ok(if c.tree {
                CoordOracle::Tree(TreeMetric::new(&c.graph)?)
            } else {
                CoordOracle::Rows(MetricOracle::new(&c.graph))
            })
        })
        .collect()
}

/// (group distance, product distance) per pair of domain indices.
pub fn pair_rows(
    emb: &ProductEmbedding,
    ball: &Ball,
    pairs: &[(u32, u32)],
) -> Result<Vec<(f64, f64)>> {
    let oracles = oracles(emb)?;
    let ab = ball.alphabet();
    Ok(pairs
        .iter()
        .map(|&(i, j)| {
            let (x, y) = (emb.domain[i as usize], emb.domain[j as usize]);
            let mut prod: f64 = emb
                .coords
                .iter()
                .zip(&oracles)
                .map(|(c, o)| o.dist(c.map[i as usize], c.map[j as usize]))
                .sum();
            if emb.coned_final {
                prod += coned_dist(ab, ball.word(x), ball.word(y)) as f64;
            }
            (ball.dist(x, y) as f64, prod)
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstPair {
    pub x: String,
    pub y: String,
    pub dist: f64,
    pub image_dist: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub lambda: f64,
    pub mu: f64,
    pub pair_count: u64,
    pub worst: Vec<WorstPair>,
}

/// Lexicographically minimal (λ, μ) with d/λ − μ ≤ d_prod ≤ λd + μ over the
/// given pairs of domain indices.
pub fn distortion_report(
    emb: &ProductEmbedding,
    ball: &Ball,
    pairs: &[(u32, u32)],
) -> Result<DistortionReport> {
    if pairs.is_empty() {
        return Err(RelhypError::EmptySet("distortion fit needs pairs".into()));
    }
    let rows = pair_rows(emb, ball, pairs)?;
    let (lambda, mu) = fit_rows(&rows);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = ((rows[a].0 - rows[a].1).abs(), (rows[b].0 - rows[b].1).abs());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let ab = ball.alphabet();
    let worst = order
        .into_iter()
        .take(12)
        .map(|t| {
            let (i, j) = pairs[t];
            let (x, y) = (emb.domain[i as usize], emb.domain[j as usize]);
            WorstPair {
                x: ab.render(ball.word(x)),
                y: ab.render(ball.word(y)),
                dist: rows[t].0,
                image_dist: rows[t].1,
                residual: rows[t].1 - rows[t].0,
            }
        })
        .collect();
    Ok(DistortionReport {
        lambda,
        mu,
        pair_count: pairs.len() as u64,
        worst,
    })
}

/// Largest violation of d/λ − μ − slack ≤ d_prod over the pairs; ≤ 0 means
/// the stated lower bound holds.
pub fn lower_bound_excess(
    emb: &ProductEmbedding,
    ball: &Ball,
    pairs: &[(u32, u32)],
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    let rows = pair_rows(emb, ball, pairs)?;
    Ok(rows
        .iter()
        .map(|&(d, prod)| d / lambda - mu - prod)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// All domain-index pairs whose ball distance is exact at this radius.
pub fn exact_domain_pairs(emb: &ProductEmbedding, ball: &Ball) -> Vec<(u32, u32)> {
    let n = emb.domain.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if ball.exact_pair(emb.domain[i], emb.domain[j]) {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}

/// All exact ball-vertex pairs, enumerated by sphere so the quadratic scan
/// never touches pairs that are too deep. For embeddings whose domain is
/// the whole ball these double as domain-index pairs.
pub fn exact_ball_pairs(ball: &Ball, radius: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for x in 0..ball.graph().vertex_count() as u32 {
        let lx = ball.word_len(x);
        if lx > radius {
            break;
        }
        let limit = (radius - lx).min(lx);
        for y in 0..ball.sphere(limit).end {
            let ly = ball.word_len(y);
            if ly < lx || (ly == lx && y < x) {
                out.push((y, x));
            }
        }
    }
    out
}

/// Deterministic sample of exact domain pairs.
pub fn sample_exact_pairs(
    emb: &ProductEmbedding,
    ball: &Ball,
    count: usize,
    seed: u64,
) -> Vec<(u32, u32)> {
    let n = emb.domain.len() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while out.len() < count && attempts < 64 * count as u64 {
        attempts += 1;
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i < j && ball.exact_pair(emb.domain[i as usize], emb.domain[j as usize]) {
            out.push((i, j));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RestrictionReport {
    pub coset_count: u64,
    pub pair_count: u64,
    /// Largest per-coordinate gap between the join restricted to a coset
    /// and that factor's own tree embedding.
    pub max_error: f64,
}

/// Exhaustive per-coset comparison of a join embedding against the factor
/// tree distances it is supposed to restrict to.
pub fn restriction_check(
    spec: &RelHypSpec,
    ball: &Ball,
    cosets: &CosetTable,
    emb: &ProductEmbedding,
) -> Result<RestrictionReport> {
    let metrics: Vec<TreeMetric> = emb
        .coords
        .iter()
        .map(|c| TreeMetric::new(&c.graph))
        .collect::<Result<_>>()?;
    let ab = spec.alphabet();
    let mut pair_count = 0u64;
    let mut max_error = 0.0f64;
    for c in 0..cosets.cosets().len() as CosetId {
        let cs = cosets.coset(c);
        let members = cosets.members(c);
        let rep_len = cs.rep.len();
        let factor = ab.factors()[cs.peripheral as usize];
        for (a, &x) in members.iter().enumerate() {
            let hx = &ball.word(x)[rep_len..];
            let ix = emb.domain_index(x).expect("join domain is the ball");
            for &y in &members[a + 1..] {
                let hy = &ball.word(y)[rep_len..];
                let iy = emb.domain_index(y).expect("join domain is the ball");
                pair_count += 1;
                for (k, (coord, metric)) in emb.coords.iter().zip(&metrics).enumerate() {
                    let factor_d = match factor {
                        FactorSpec::FreeAbelian(rank) if k < rank as usize => {
                            (signed_count(hx, k as u32) - signed_count(hy, k as u32)).abs() as f64
                        }
                        FactorSpec::Free(_) if k == 0 => {
                            ab.word_length(&ab.mul(&ab.inverse(hx), hy)) as f64
                        }
                        _ => 0.0,
                    };
                    let join_d = metric.dist(coord.map[ix], coord.map[iy]);
                    max_error = max_error.max((join_d - factor_d).abs());
                }
            }
        }
    }
    Ok(RestrictionReport {
        coset_count: cosets.cosets().len() as u64,
        pair_count,
        max_error,
    })
}
