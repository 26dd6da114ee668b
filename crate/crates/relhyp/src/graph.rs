//! Weighted graphs with exact shortest-path metrics.
//!
//! Everything downstream (horoballs, cusped spaces, projection scans) reduces
//! to questions about finite positively-weighted graphs, so this module keeps
//! the representation dumb and the metric exact: CSR adjacency, binary-heap
//! Dijkstra, cached single-source rows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{RelhypError, Result};

/// Dense vertex handle, stable for the lifetime of its graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Version tag written into every serialized graph and report.
pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// Edge-list builder; `build` validates and freezes into CSR form.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    n: usize,
    edges: Vec<(u32, u32, f64)>,
}

impl GraphBuilder {
    pub fn new(n_vertices: usize) -> Self {
        GraphBuilder {
            n: n_vertices,
            edges: Vec::new(),
        }
    }

    #[inline]
    pub fn add_edge(&mut self, u: u32, v: u32, length: f64) {
        self.edges.push((u, v, length));
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Validates lengths and endpoints, drops self-loops, collapses parallel
    /// edges to the minimum length, and freezes the adjacency.
    pub fn build(mut self) -> Result<WeightedGraph> {
        let n = self.n;
        for &(u, v, len) in &self.edges {
            if u as usize >= n || v as usize >= n {
                return Err(RelhypError::InvalidGraph(format!(
                    "edge ({u},{v}) out of range for {n} vertices"
                )));
            }
            if !(len > 0.0) || !len.is_finite() {
                return Err(RelhypError::InvalidGraph(format!(
                    "edge ({u},{v}) has non-positive length {len}"
                )));
            }
        }
        // Normalize to (min,max) endpoints, sort, collapse parallels to min length.
        for e in &mut self.edges {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        self.edges.retain(|e| e.0 != e.1);
        self.edges
            .sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        self.edges.dedup_by(|next, kept| {
            // keeps the first (minimal-length) copy of each parallel class
            next.0 == kept.0 && next.1 == kept.1
        });

        let mut degree = vec![0u32; n];
        for &(u, v, _) in &self.edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0u64;
        offsets.push(0u64);
        for d in &degree {
            acc += u64::from(*d);
            offsets.push(acc);
        }
        let mut targets = vec![0u32; acc as usize];
        let mut weights = vec![0f64; acc as usize];
        let mut cursor: Vec<u64> = offsets[..n].to_vec();
        for &(u, v, w) in &self.edges {
            let cu = cursor[u as usize];
            targets[cu as usize] = v;
            weights[cu as usize] = w;
            cursor[u as usize] += 1;
            let cv = cursor[v as usize];
            targets[cv as usize] = u;
            weights[cv as usize] = w;
            cursor[v as usize] += 1;
        }
        Ok(WeightedGraph {
            n,
            offsets,
            targets,
            weights,
            edges: self.edges,
            labels: None,
        })
    }
}

/// Finite graph with positive edge lengths. Parallel edges are collapsed and
/// self-loops are absent by construction.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    n: usize,
    offsets: Vec<u64>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    edges: Vec<(u32, u32, f64)>,
    labels: Option<Vec<String>>,
}

pub fn build_graph(edges: &[(u32, u32, f64)], n_vertices: usize) -> Result<WeightedGraph> {
    let mut b = GraphBuilder::new(n_vertices);
    for &(u, v, w) in edges {
        b.add_edge(u, v, w);
    }
    b.build()
}

impl WeightedGraph {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Undirected edges after normalization, sorted by endpoints.
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.offsets[v as usize] as usize;
        let hi = self.offsets[v as usize + 1] as usize;
        self.targets[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    pub fn degree(&self, v: u32) -> usize {
        (self.offsets[v as usize + 1] - self.offsets[v as usize]) as usize
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.n {
            return Err(RelhypError::InvalidGraph(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Component id per vertex, ids in order of first appearance.
    pub fn components(&self) -> Vec<u32> {
        let mut comp = vec![u32::MAX; self.n];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for s in 0..self.n as u32 {
            if comp[s as usize] != u32::MAX {
                continue;
            }
            comp[s as usize] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for (w, _) in self.neighbors(v) {
                    if comp[w as usize] == u32::MAX {
                        comp[w as usize] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().iter().all(|&c| c == 0)
    }

    /// Single-source exact distances; unreachable vertices get `f64::INFINITY`.
    pub fn dijkstra(&self, source: u32) -> Vec<f64> {
        self.dijkstra_masked(source, None)
    }

    /// Distances to the nearest of several sources.
    pub fn dijkstra_multi(&self, sources: &[u32]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n];
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        for &s in sources {
            dist[s as usize] = 0.0;
            heap.push(HeapEntry { dist: 0.0, v: s });
        }
        while let Some(HeapEntry { dist: d, v }) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            for (w, len) in self.neighbors(v) {
                let nd = d + len;
                if nd < dist[w as usize] {
                    dist[w as usize] = nd;
                    heap.push(HeapEntry { dist: nd, v: w });
                }
            }
        }
        dist
    }

    /// Subgraph induced on `verts` (sorted, deduped ids); vertex i of the
    /// result is verts[i].
    pub fn induced_subgraph(&self, verts: &[u32]) -> Result<WeightedGraph> {
        debug_assert!(verts.windows(2).all(|w| w[0] < w[1]));
        let mut b = GraphBuilder::new(verts.len());
        for (i, &v) in verts.iter().enumerate() {
            for (u, w) in self.neighbors(v) {
                if u > v {
                    if let Ok(j) = verts.binary_search(&u) {
                        b.add_edge(i as u32, j as u32, w);
                    }
                }
            }
        }
        b.build()
    }

    /// Shortest-path tree from `source`: distances plus, per vertex, the
    /// smallest-id neighbor that realizes the distance (source maps to
    /// itself, unreachable vertices to u32::MAX).
    pub fn shortest_path_tree(&self, source: u32) -> (Vec<f64>, Vec<u32>) {
        let dist = self.dijkstra(source);
        let mut parent = vec![u32::MAX; self.n];
        parent[source as usize] = source;
        for v in 0..self.n as u32 {
            if v == source || dist[v as usize].is_infinite() {
                continue;
            }
            for (u, w) in self.neighbors(v) {
                if (dist[u as usize] + w - dist[v as usize]).abs() <= 1e-9
                    && u < parent[v as usize]
                {
                    parent[v as usize] = u;
                }
            }
        }
        (dist, parent)
    }

    /// Dijkstra skipping vertices marked `true` in `deleted` (if given).
    pub fn dijkstra_masked(&self, source: u32, deleted: Option<&[bool]>) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n];
        if let Some(del) = deleted {
            if del[source as usize] {
                return dist;
            }
        }
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        dist[source as usize] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            v: source,
        });
        while let Some(HeapEntry { dist: d, v }) = heap.pop() {
            if d > dist[v as usize] {
                continue;
            }
            for (w, len) in self.neighbors(v) {
                if let Some(del) = deleted {
                    if del[w as usize] {
                        continue;
                    }
                }
                let nd = d + len;
                if nd < dist[w as usize] {
                    dist[w as usize] = nd;
                    heap.push(HeapEntry { dist: nd, v: w });
                }
            }
        }
        dist
    }

    /// True when `from` still reaches `to` after deleting the marked vertices.
    /// Deleting either endpoint counts as disconnecting them.
    pub fn connected_excluding(&self, deleted: &[bool], from: u32, to: u32) -> bool {
        if deleted[from as usize] || deleted[to as usize] {
            return false;
        }
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        seen[from as usize] = true;
        while let Some(v) = stack.pop() {
            for (w, _) in self.neighbors(v) {
                if seen[w as usize] || deleted[w as usize] {
                    continue;
                }
                if w == to {
                    return true;
                }
                seen[w as usize] = true;
                stack.push(w);
            }
        }
        false
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{} {}", self.n, self.edges.len())?;
        for &(u, v, w) in &self.edges {
            writeln!(out, "{} {} {:?}", u, v, w)?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)?;
        if let Some(labels) = &self.labels {
            let side = path.with_extension("labels");
            let mut f = std::fs::File::create(side)?;
            for (i, l) in labels.iter().enumerate() {
                writeln!(f, "{} {}", i, l)?;
            }
        }
        Ok(())
    }
}

struct HeapEntry {
    dist: f64,
    v: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap by distance, vertex id as deterministic tie-break
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.v.cmp(&self.v))
    }
}

/// Reads the text format: header `V E`, then `E` lines `u v length`.
pub fn read_graph(input: impl std::io::Read) -> Result<WeightedGraph> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| RelhypError::Parse("empty graph file".into()))??;
    let mut hp = header.split_whitespace();
    let n: usize = parse_tok(hp.next(), "vertex count")?;
    let e: usize = parse_tok(hp.next(), "edge count")?;
    let mut b = GraphBuilder::new(n);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut p = line.split_whitespace();
        let u: u32 = parse_tok(p.next(), "edge endpoint")?;
        let v: u32 = parse_tok(p.next(), "edge endpoint")?;
        let w: f64 = parse_tok(p.next(), "edge length")?;
        if i >= e {
            return Err(RelhypError::Parse(format!(
                "more than {e} edge lines in graph file"
            )));
        }
        b.add_edge(u, v, w);
    }
    if b.edge_count() != e {
        return Err(RelhypError::Parse(format!(
            "header promises {e} edges, file has {}",
            b.edge_count()
        )));
    }
    b.build()
}

pub fn read_graph_file(path: &Path) -> Result<WeightedGraph> {
    let f = std::fs::File::open(path)?;
    let mut g = read_graph(f)?;
    let side = path.with_extension("labels");
    if side.exists() {
        let mut labels = vec![String::new(); g.vertex_count()];
        for line in BufReader::new(std::fs::File::open(side)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut p = line.splitn(2, ' ');
            let v: usize = parse_tok(p.next(), "label vertex")?;
            let lab = p
                .next()
                .ok_or_else(|| RelhypError::Parse("label line missing text".into()))?;
            if v >= labels.len() {
                return Err(RelhypError::Parse(format!("label vertex {v} out of range")));
            }
            labels[v] = lab.to_string();
        }
        g.set_labels(labels)?;
    }
    Ok(g)
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| RelhypError::Parse(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| RelhypError::Parse(format!("bad {what}: {tok:?}")))
}

/// Distance oracle over a graph, caching full Dijkstra rows per source.
pub struct MetricOracle<'g> {
    graph: &'g WeightedGraph,
    rows: std::cell::RefCell<HashMap<u32, std::rc::Rc<Vec<f64>>>>,
}

impl<'g> MetricOracle<'g> {
    pub fn new(graph: &'g WeightedGraph) -> Self {
        MetricOracle {
            graph,
            rows: std::cell::RefCell::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn row(&self, source: u32) -> std::rc::Rc<Vec<f64>> {
        if let Some(r) = self.rows.borrow().get(&source) {
            return r.clone();
        }
        let r = std::rc::Rc::new(self.graph.dijkstra(source));
        self.rows.borrow_mut().insert(source, r.clone());
        r
    }

    /// Exact shortest-path distance; `INFINITY` across components.
    pub fn dist(&self, u: u32, v: u32) -> f64 {
        if u == v {
            return 0.0;
        }
        self.row(u)[v as usize]
    }

    /// Max pairwise distance over a vertex subset (0 for fewer than 2 vertices).
    pub fn subset_diameter(&self, subset: &[u32]) -> f64 {
        let mut best = 0.0f64;
        for (i, &u) in subset.iter().enumerate() {
            let row = self.row(u);
            for &v in &subset[i + 1..] {
                let d = row[v as usize];
                if d > best {
                    best = d;
                }
            }
        }
        best
    }
}

/// Largest-minus-middle-halved defect of the three pairwise sums, maximized
/// over the given quadruples. Trees give 0.
pub fn four_point_delta<F: FnMut(u32, u32) -> f64>(mut d: F, quads: &[[u32; 4]]) -> f64 {
    let mut worst = 0.0f64;
    for &[w, x, y, z] in quads {
        let s1 = d(w, x) + d(y, z);
        let s2 = d(w, y) + d(x, z);
        let s3 = d(w, z) + d(x, y);
        worst = worst.max(quad_defect(s1, s2, s3));
    }
    worst
}

#[inline]
pub fn quad_defect(s1: f64, s2: f64, s3: f64) -> f64 {
    let mut a = [s1, s2, s3];
    a.sort_unstable_by(f64::total_cmp);
    (a[2] - a[1]) / 2.0
}

/// All 4-subsets of `verts`, in lexicographic index order.
pub fn all_quadruples(verts: &[u32]) -> Vec<[u32; 4]> {
    let n = verts.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    out.push([verts[a], verts[b], verts[c], verts[d]]);
                }
            }
        }
    }
    out
}

/// Path with `n_edges` unit edges; vertex i sits at position i.
pub fn path_graph(n_edges: usize) -> WeightedGraph {
    let mut b = GraphBuilder::new(n_edges + 1);
    for i in 0..n_edges {
        b.add_edge(i as u32, i as u32 + 1, 1.0);
    }
    b.build().expect("path graph is always valid")
}

/// Cycle with `n` unit edges.
pub fn cycle_graph(n: usize) -> WeightedGraph {
    assert!(n >= 3);
    let mut b = GraphBuilder::new(n);
    for i in 0..n {
        b.add_edge(i as u32, ((i + 1) % n) as u32, 1.0);
    }
    b.build().expect("cycle graph is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent all-pairs oracle: Floyd-Warshall on the dense matrix.
    pub fn floyd_warshall(g: &WeightedGraph) -> Vec<Vec<f64>> {
        let n = g.vertex_count();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(u, v, w) in g.edges() {
            let (u, v) = (u as usize, v as usize);
            if w < d[u][v] {
                d[u][v] = w;
                d[v][u] = w;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn dijkstra_matches_floyd_warshall_on_weighted_graph() {
        let edges = [
            (0, 1, 1.0),
            (1, 2, 0.5),
            (2, 3, 2.0),
            (3, 0, 0.25),
            (1, 3, 1.1),
            (2, 4, 0.7),
        ];
        let g = build_graph(&edges, 5).unwrap();
        let fw = floyd_warshall(&g);
        for u in 0..5u32 {
            let row = g.dijkstra(u);
            for v in 0..5usize {
                assert!((row[v] - fw[u as usize][v]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parallel_edges_collapse_to_min_and_self_loops_drop() {
        let g = build_graph(&[(0, 1, 3.0), (1, 0, 1.5), (0, 0, 9.0)], 2).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.5)]);
    }

    #[test]
    fn bad_edges_are_rejected() {
        assert!(build_graph(&[(0, 5, 1.0)], 2).is_err());
        assert!(build_graph(&[(0, 1, 0.0)], 2).is_err());
        assert!(build_graph(&[(0, 1, -2.0)], 2).is_err());
    }

    #[test]
    fn disconnected_pairs_are_infinite() {
        let g = build_graph(&[(0, 1, 1.0), (2, 3, 1.0)], 4).unwrap();
        let oracle = MetricOracle::new(&g);
        assert!(oracle.dist(0, 2).is_infinite());
        assert_eq!(g.components(), vec![0, 0, 1, 1]);
        assert!(!g.is_connected());
    }

    #[test]
    fn tree_quadruples_have_zero_defect() {
        // star with 4 leaves plus a path tail
        let g = build_graph(
            &[
                (0, 1, 1.0),
                (0, 2, 1.0),
                (0, 3, 1.0),
                (0, 4, 1.0),
                (4, 5, 1.0),
            ],
            6,
        )
        .unwrap();
        let oracle = MetricOracle::new(&g);
        let verts: Vec<u32> = (0..6).collect();
        let quads = all_quadruples(&verts);
        let delta = four_point_delta(|u, v| oracle.dist(u, v), &quads);
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn twelve_cycle_exhaustive_defect() {
        // Frozen from the brute-force scan below: the even quadruple
        // (0,3,6,9) realizes sums (6,12,6), defect 3.
        let g = cycle_graph(12);
        let oracle = MetricOracle::new(&g);
        let verts: Vec<u32> = (0..12).collect();
        let quads = all_quadruples(&verts);
        let delta = four_point_delta(|u, v| oracle.dist(u, v), &quads);
        assert_eq!(delta, 3.0);
    }

    #[test]
    fn graph_roundtrip_through_text_format() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 0.125)], 3).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let g2 = read_graph(&buf[..]).unwrap();
        assert_eq!(g.edges(), g2.edges());
        assert_eq!(g2.vertex_count(), 3);
    }

    #[test]
    fn subset_diameter_on_path() {
        let g = path_graph(10);
        let oracle = MetricOracle::new(&g);
        assert_eq!(oracle.subset_diameter(&[0, 3, 10]), 10.0);
        assert_eq!(oracle.subset_diameter(&[4]), 0.0);
        assert_eq!(oracle.subset_diameter(&[]), 0.0);
    }

    #[test]
    fn connected_excluding_respects_deletions() {
        let g = cycle_graph(6);
        let mut del = vec![false; 6];
        del[1] = true;
        assert!(g.connected_excluding(&del, 0, 3));
        del[5] = true;
        assert!(!g.connected_excluding(&del, 0, 3));
        assert!(!g.connected_excluding(&del, 5, 0));
    }
}
