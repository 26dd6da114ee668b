//! HNN extensions over a cyclic edge subgroup: Cayley balls in normal form,
//! the dual graph K of the Bass-Serre tree, the projection π, the separating
//! spheres D_R, and the banded partition of the K₁ side, with exhaustive
//! in-ball verification of the two separation lemmas.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{GraphBuilder, MetricOracle, WeightedGraph};
use crate::words::FactorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StableAction {
    Identity,
    Inversion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ModelKind {
    /// A = Z = C, t acting trivially: the lattice Z².
    LineIdentity,
    /// A = Z = C, t inverting: the Klein bottle group.
    LineInversion,
    /// A = Z², C = first factor, identity action: the edge generator a is
    /// central and b, t generate a free group, so G = Z × F₂.
    TreeCentral,
}

#[derive(Debug, Clone)]
pub struct HnnSpec {
    base: FactorSpec,
    edge_gens: Vec<u32>,
    action: StableAction,
    kind: ModelKind,
}

impl HnnSpec {
    pub fn new(base: FactorSpec, edge_gens: Vec<u32>, action: StableAction) -> Result<Self> {
        let kind = match (base, edge_gens.as_slice(), action) {
            (FactorSpec::FreeAbelian(1), [0], StableAction::Identity) => ModelKind::LineIdentity,
            (FactorSpec::FreeAbelian(1), [0], StableAction::Inversion) => ModelKind::LineInversion,
            (FactorSpec::FreeAbelian(2), [0], StableAction::Identity) => ModelKind::TreeCentral,
            _ => {
                return Err(RelhypError::InvalidSpec(
                    "supported HNN models: Z over itself (identity or inversion), \
                     Z² over its first factor (identity)"
                        .into(),
                ))
            }
        };
        Ok(HnnSpec {
            base,
            edge_gens,
            action,
            kind,
        })
    }

    pub fn id(&self) -> String {
        match self.kind {
            ModelKind::LineIdentity => "hnn-z-id".into(),
            ModelKind::LineInversion => "hnn-z-inv".into(),
            ModelKind::TreeCentral => "hnn-z2-factor".into(),
        }
    }

    pub fn base(&self) -> FactorSpec {
        self.base
    }

    pub fn action(&self) -> StableAction {
        self.action
    }

    pub fn edge_gens(&self) -> &[u32] {
        &self.edge_gens
    }

    /// True when the dual graph branches (edge subgroup of infinite index).
    pub fn branched(&self) -> bool {
        self.kind == ModelKind::TreeCentral
    }

    fn generator_count(&self) -> usize {
        match self.kind {
            ModelKind::LineIdentity | ModelKind::LineInversion => 4,
            ModelKind::TreeCentral => 6,
        }
    }
}

/// Normal form a^m · (rest). Line models keep the stable-letter exponent in
/// `t`; the tree model keeps a reduced word over b, t in `w` (1 = b,
/// -1 = b⁻¹, 2 = t, -2 = t⁻¹) and leaves `t` at zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Elem {
    a: i64,
    t: i64,
    w: Vec<i8>,
}

impl Elem {
    fn identity() -> Self {
        Elem {
            a: 0,
            t: 0,
            w: Vec::new(),
        }
    }
}

fn word_append(w: &mut Vec<i8>, s: i8) {
    if w.last() == Some(&-s) {
        w.pop();
    } else {
        w.push(s);
    }
}

fn word_inverse(w: &[i8]) -> Vec<i8> {
    w.iter().rev().map(|&s| -s).collect()
}

fn word_concat(x: &[i8], y: &[i8]) -> Vec<i8> {
    let mut out = x.to_vec();
    for &s in y {
        word_append(&mut out, s);
    }
    out
}

fn common_prefix(x: &[i8], y: &[i8]) -> usize {
    x.iter().zip(y).take_while(|(a, b)| a == b).count()
}

fn sigma(n: i64) -> i64 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

impl HnnSpec {
    fn mul(&self, x: &Elem, y: &Elem) -> Elem {
        match self.kind {
            ModelKind::LineIdentity => Elem {
                a: x.a + y.a,
                t: x.t + y.t,
                w: Vec::new(),
            },
            ModelKind::LineInversion => Elem {
                a: x.a + sigma(x.t) * y.a,
                t: x.t + y.t,
                w: Vec::new(),
            },
            ModelKind::TreeCentral => Elem {
                a: x.a + y.a,
                t: 0,
                w: word_concat(&x.w, &y.w),
            },
        }
    }

    fn inv(&self, x: &Elem) -> Elem {
        match self.kind {
            ModelKind::LineIdentity => Elem {
                a: -x.a,
                t: -x.t,
                w: Vec::new(),
            },
            ModelKind::LineInversion => Elem {
                a: -sigma(x.t) * x.a,
                t: -x.t,
                w: Vec::new(),
            },
            ModelKind::TreeCentral => Elem {
                a: -x.a,
                t: 0,
                w: word_inverse(&x.w),
            },
        }
    }

    fn len(&self, x: &Elem) -> u64 {
        x.a.unsigned_abs() + x.t.unsigned_abs() + x.w.len() as u64
    }

    fn dist(&self, x: &Elem, y: &Elem) -> u64 {
        match self.kind {
            ModelKind::LineIdentity => (y.a - x.a).unsigned_abs() + (y.t - x.t).unsigned_abs(),
            ModelKind::LineInversion => self.len(&self.mul(&self.inv(x), y)),
            ModelKind::TreeCentral => {
                let lcp = common_prefix(&x.w, &y.w);
                (y.a - x.a).unsigned_abs() + (x.w.len() + y.w.len() - 2 * lcp) as u64
            }
        }
    }

    /// Right multiplication by the i-th generator: a± first, then (for the
    /// tree model) b±, then t±.
    fn step(&self, x: &Elem, gen: usize) -> Elem {
        match self.kind {
            ModelKind::LineIdentity | ModelKind::LineInversion => {
                let y = match gen {
                    0 => Elem {
                        a: 1,
                        t: 0,
                        w: Vec::new(),
                    },
                    1 => Elem {
                        a: -1,
                        t: 0,
                        w: Vec::new(),
                    },
                    2 => Elem {
                        a: 0,
                        t: 1,
                        w: Vec::new(),
                    },
                    _ => Elem {
                        a: 0,
                        t: -1,
                        w: Vec::new(),
                    },
                };
                self.mul(x, &y)
            }
            ModelKind::TreeCentral => match gen {
                0 | 1 => Elem {
                    a: x.a + if gen == 0 { 1 } else { -1 },
                    t: 0,
                    w: x.w.clone(),
                },
                _ => {
                    let s = [1i8, -1, 2, -2][gen - 2];
                    let mut w = x.w.clone();
                    word_append(&mut w, s);
                    Elem { a: x.a, t: 0, w }
                }
            },
        }
    }
}

pub struct HnnBall {
    spec: HnnSpec,
    elems: Vec<Elem>,
    graph: WeightedGraph,
    radius: u32,
}

impl HnnBall {
    /// Breadth-first enumeration of the radius-`radius` ball in normal form.
    pub fn build(spec: &HnnSpec, radius: u32, cap: usize) -> Result<HnnBall> {
        let mut elems = vec![Elem::identity()];
        let mut index: HashMap<Elem, u32> = HashMap::new();
        index.insert(Elem::identity(), 0u32);
        let mut frontier_start = 0usize;
        for _ in 0..radius {
            let frontier_end = elems.len();
            for v in frontier_start..frontier_end {
                let x = elems[v].clone();
                for gen in 0..spec.generator_count() {
                    let y = spec.step(&x, gen);
                    if !index.contains_key(&y) {
                        if elems.len() >= cap {
                            return Err(RelhypError::CapExceeded {
                                predicted: (elems.len() + 1) as u64,
                                cap: cap as u64,
                            });
                        }
                        index.insert(y.clone(), elems.len() as u32);
                        elems.push(y);
                    }
                }
            }
            frontier_start = frontier_end;
        }
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for (v, x) in elems.iter().enumerate() {
            for gen in 0..spec.generator_count() {
                if let Some(&id) = index.get(&spec.step(x, gen)) {
                    if (v as u32) < id {
                        edges.push((v as u32, id));
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut b = GraphBuilder::new(elems.len());
        for (u, v) in edges {
            b.add_edge(u, v, 1.0);
        }
        let graph = b.build()?;
        Ok(HnnBall {
            spec: spec.clone(),
            elems,
            graph,
            radius,
        })
    }

    pub fn spec(&self) -> &HnnSpec {
        &self.spec
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn vertex_count(&self) -> usize {
        self.elems.len()
    }

    pub fn word_len(&self, v: u32) -> u64 {
        self.spec.len(&self.elems[v as usize])
    }

    /// Exact word metric, computed algebraically.
    pub fn dist(&self, x: u32, y: u32) -> u64 {
        self.spec
            .dist(&self.elems[x as usize], &self.elems[y as usize])
    }

    pub fn label(&self, v: u32) -> String {
        let e = &self.elems[v as usize];
        let mut out = String::new();
        if e.a != 0 {
            out.push_str(&format!("a^{} ", e.a));
        }
        if e.t != 0 {
            out.push_str(&format!("t^{} ", e.t));
        }
        for &s in &e.w {
            out.push(match s {
                1 => 'b',
                -1 => 'B',
                2 => 't',
                _ => 'T',
            });
        }
        let out = out.trim_end().to_string();
        if out.is_empty() {
            "e".into()
        } else {
            out
        }
    }
}

/// A coset gC of the edge subgroup, keyed by what survives of the normal
/// form once the a-part is quotiented away.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CosetKey {
    Line(i64),
    Tree(Vec<i8>),
}

pub struct DualGraphK {
    verts: Vec<CosetKey>,
    index: HashMap<CosetKey, u32>,
    graph: WeightedGraph,
    base: u32,
    levels: Vec<u32>,
}

impl DualGraphK {
    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn key(&self, u: u32) -> &CosetKey {
        &self.verts[u as usize]
    }

    pub fn vertex(&self, key: &CosetKey) -> Option<u32> {
        self.index.get(key).copied()
    }

    /// Simplicial distance from the base vertex.
    pub fn level(&self, u: u32) -> u32 {
        self.levels[u as usize]
    }

    /// The half containing the stable-letter edge at the base, plus the base
    /// itself: nonnegative stable exponent for the line models, leading
    /// letter t for the tree model.
    pub fn in_k1(&self, u: u32) -> bool {
        match &self.verts[u as usize] {
            CosetKey::Line(n) => *n >= 0,
            CosetKey::Tree(w) => w.first().map_or(true, |&s| s == 2),
        }
    }

    /// v lies on the geodesic from the base to u.
    pub fn leq(&self, v: u32, u: u32) -> bool {
        match (&self.verts[v as usize], &self.verts[u as usize]) {
            (CosetKey::Line(a), CosetKey::Line(b)) => {
                *a == 0 || (a.signum() == b.signum() && a.abs() <= b.abs())
            }
            (CosetKey::Tree(x), CosetKey::Tree(y)) => {
                x.len() <= y.len() && common_prefix(x, y) == x.len()
            }
            _ => unreachable!("mixed coset keys"),
        }
    }

    /// u's own stable-letter edge leads away from the base. A tree coset
    /// whose word ends in t⁻¹ has its t-edge pointing backwards.
    pub fn t_edge_outward(&self, u: u32) -> bool {
        match &self.verts[u as usize] {
            CosetKey::Line(n) => *n >= 0,
            CosetKey::Tree(w) => w.last() != Some(&-2),
        }
    }

    /// u′ lies in the translate g_u K₁ minus u itself: the component of
    /// K ∖ {u} reached through u's own stable-letter edge.
    pub fn beyond_through_t(&self, u: u32, u2: u32) -> bool {
        match (&self.verts[u as usize], &self.verts[u2 as usize]) {
            (CosetKey::Line(a), CosetKey::Line(b)) => b > a,
            (CosetKey::Tree(x), CosetKey::Tree(y)) => {
                if x.last() == Some(&-2) {
                    !(y.len() >= x.len() && common_prefix(x, y) == x.len())
                } else {
                    y.len() > x.len() && common_prefix(x, y) == x.len() && y[x.len()] == 2
                }
            }
            _ => unreachable!("mixed coset keys"),
        }
    }
}

fn coset_key(spec: &HnnSpec, e: &Elem) -> CosetKey {
    match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => CosetKey::Line(e.t),
        ModelKind::TreeCentral => CosetKey::Tree(e.w.clone()),
    }
}

fn key_rep(spec: &HnnSpec, key: &CosetKey) -> Elem {
    match (spec.kind, key) {
        (ModelKind::TreeCentral, CosetKey::Tree(w)) => Elem {
            a: 0,
            t: 0,
            w: w.clone(),
        },
        (_, CosetKey::Line(n)) => Elem {
            a: 0,
            t: *n,
            w: Vec::new(),
        },
        _ => unreachable!("mixed coset keys"),
    }
}

/// Builds K on the cosets met by the ball and audits the unique-geodesic
/// hypothesis: K must come out a tree, else the model is rejected.
pub fn dual_graph(ball: &HnnBall) -> Result<DualGraphK> {
    let spec = &ball.spec;
    let verts: Vec<CosetKey> = ball
        .elems
        .iter()
        .map(|e| coset_key(spec, e))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<CosetKey, u32> = verts
        .iter()
        .enumerate()
        .map(|(i, k)| (k.clone(), i as u32))
        .collect();
    let mut b = GraphBuilder::new(verts.len());
    for (i, key) in verts.iter().enumerate() {
        let rep = key_rep(spec, key);
        for gen in 0..spec.generator_count() {
            let n = coset_key(spec, &spec.step(&rep, gen));
            if let Some(&j) = index.get(&n) {
                if (i as u32) < j {
                    b.add_edge(i as u32, j, 1.0);
                }
            }
        }
    }
    let graph = b.build()?;
    if !graph.is_connected() || graph.edges().len() != verts.len() - 1 {
        return Err(RelhypError::ModelRejected(format!(
            "dual graph is not a tree ({} vertices, {} edges): geodesics not unique",
            verts.len(),
            graph.edges().len()
        )));
    }
    let base = index[&coset_key(spec, &Elem::identity())];
    let levels: Vec<u32> = graph.dijkstra(base).iter().map(|&d| d as u32).collect();
    Ok(DualGraphK {
        verts,
        index,
        graph,
        base,
        levels,
    })
}

/// π(x) = xC as a K-vertex.
pub fn dual_projection(ball: &HnnBall, k: &DualGraphK, x: u32) -> u32 {
    k.index[&coset_key(&ball.spec, &ball.elems[x as usize])]
}

/// Exhaustive check that π contracts every Cayley edge to at most one
/// K-edge.
pub fn lipschitz_audit(ball: &HnnBall, k: &DualGraphK) -> Result<()> {
    let oracle = MetricOracle::new(k.graph());
    for &(x, y, _) in ball.graph.edges() {
        let (px, py) = (dual_projection(ball, k, x), dual_projection(ball, k, y));
        if px != py && oracle.dist(px, py) > 1.0 + 1e-9 {
            return Err(RelhypError::InvalidGraph(format!(
                "projection stretches edge {x}-{y}"
            )));
        }
    }
    Ok(())
}

fn dr_member(spec: &HnnSpec, h: &Elem, big_r: u32) -> bool {
    match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => h.t == big_r as i64,
        ModelKind::TreeCentral => h.w.len() == big_r as usize && (big_r == 0 || h.w[0] == 2),
    }
}

/// D^u_R: the in-ball part of g_u · ({d(·, C) = R} ∩ π⁻¹(K₁)).
pub fn compute_dr(ball: &HnnBall, k: &DualGraphK, big_r: u32, u: u32) -> Result<Vec<u32>> {
    if !k.in_k1(u) {
        return Err(RelhypError::Precondition(format!(
            "coset vertex {u} lies outside K₁"
        )));
    }
    let spec = &ball.spec;
    let g_inv = spec.inv(&key_rep(spec, k.key(u)));
    let mut out = Vec::new();
    for (i, e) in ball.elems.iter().enumerate() {
        if dr_member(spec, &spec.mul(&g_inv, e), big_r) {
            out.push(i as u32);
        }
    }
    Ok(out)
}

/// The unique outward coset u with e ∈ D^u_R, if any. Inverts membership
/// without a per-coset scan: for an outward u nothing cancels between g_u
/// and the sphere tail, so e's own normal form carries u as a prefix. Only
/// valid for sweeps over outward cosets; a t⁻¹-ending coset's sphere sits
/// under a shorter prefix and is never reported here.
fn dr_candidate(spec: &HnnSpec, k: &DualGraphK, e: &Elem, big_r: u32) -> Option<u32> {
    let key = match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => CosetKey::Line(e.t - big_r as i64),
        ModelKind::TreeCentral => {
            let l = e.w.len().checked_sub(big_r as usize)?;
            if big_r > 0 && e.w[l] != 2 {
                return None;
            }
            CosetKey::Tree(e.w[..l].to_vec())
        }
    };
    k.vertex(&key)
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeControl {
    pub description: String,
    pub separated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub lemma: String,
    pub checked: u64,
    pub failures: u64,
    pub min_distance: Option<f64>,
    pub flagged: bool,
    pub negative_control: Option<NegativeControl>,
}

/// Connectivity test with D^u_R deleted; no hypothesis gating.
pub fn separation_raw(
    ball: &HnnBall,
    k: &DualGraphK,
    v: u32,
    u: u32,
    u2: u32,
    big_r: u32,
) -> Result<bool> {
    let dr = compute_dr(ball, k, big_r, u)?;
    let mut deleted = vec![false; ball.vertex_count()];
    for &d in &dr {
        deleted[d as usize] = true;
    }
    let mut queue: Vec<u32> = Vec::new();
    let mut seen = vec![false; ball.vertex_count()];
    let mut any_source = false;
    let mut any_target = false;
    for x in 0..ball.vertex_count() as u32 {
        let p = dual_projection(ball, k, x);
        if p == v && !deleted[x as usize] {
            seen[x as usize] = true;
            queue.push(x);
            any_source = true;
        }
        if p == u2 {
            any_target = true;
        }
    }
    if !any_source || !any_target {
        return Err(RelhypError::EmptySet(
            "a fiber misses the ball interior".into(),
        ));
    }
    while let Some(x) = queue.pop() {
        if dual_projection(ball, k, x) == u2 {
            return Ok(false);
        }
        for (y, _) in ball.graph.neighbors(x) {
            if !seen[y as usize] && !deleted[y as usize] {
                seen[y as usize] = true;
                queue.push(y);
            }
        }
    }
    Ok(true)
}

/// Does D^u_R block every ball path from π⁻¹(v) to π⁻¹(u′)? Hypotheses are
/// validated up front: u in K₁, v outside u's stable-letter branch, u′
/// beyond u through that branch by more than R.
pub fn separation_check(
    ball: &HnnBall,
    k: &DualGraphK,
    v: u32,
    u: u32,
    u2: u32,
    big_r: u32,
) -> Result<bool> {
    if v == u || k.beyond_through_t(u, v) {
        return Err(RelhypError::Precondition(
            "v must lie outside u's stable-letter branch".into(),
        ));
    }
    if !k.beyond_through_t(u, u2) {
        return Err(RelhypError::Precondition(
            "u′ must extend u through its stable-letter side".into(),
        ));
    }
    if k.level(u2) <= k.level(u) + big_r {
        return Err(RelhypError::Precondition("level gap must exceed R".into()));
    }
    separation_raw(ball, k, v, u, u2, big_r)
}

/// Component sweep of the first separation lemma: for each scoped u, delete
/// D^u_R once and demand that no surviving component meets both a
/// qualifying v-fiber and a qualifying u′-fiber. Equivalent to checking
/// every qualifying triple (v, u, u′) one by one.
pub fn tech1_scan(
    ball: &HnnBall,
    k: &DualGraphK,
    big_r: u32,
    u_scope: &[u32],
) -> Result<SeparationReport> {
    let proj: Vec<u32> = (0..ball.vertex_count() as u32)
        .map(|x| dual_projection(ball, k, x))
        .collect();
    // one pass collects every scoped sphere when the scope is all-outward;
    // mixed scopes fall back to the per-coset scan
    let spec = &ball.spec;
    let scope_pos: HashMap<u32, usize> =
        u_scope.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut dr_sets: Vec<Vec<u32>> = vec![Vec::new(); u_scope.len()];
    if u_scope.iter().all(|&u| k.t_edge_outward(u)) {
        for &u in u_scope {
            if !k.in_k1(u) {
                return Err(RelhypError::Precondition(format!(
                    "coset vertex {u} lies outside K₁"
                )));
            }
        }
        for (i, e) in ball.elems.iter().enumerate() {
            if let Some(u) = dr_candidate(spec, k, e, big_r) {
                if let Some(&pos) = scope_pos.get(&u) {
                    dr_sets[pos].push(i as u32);
                }
            }
        }
    } else {
        for (pos, &u) in u_scope.iter().enumerate() {
            dr_sets[pos] = compute_dr(ball, k, big_r, u)?;
        }
    }
    let mut checked = 0u64;
    let mut failures = 0u64;
    let mut deleted = vec![false; ball.vertex_count()];
    let mut comp = vec![u32::MAX; ball.vertex_count()];
    let mut queue: Vec<u32> = Vec::new();
    for (pos, &u) in u_scope.iter().enumerate() {
        let dr = &dr_sets[pos];
        if dr.is_empty() {
            continue;
        }
        deleted.iter_mut().for_each(|d| *d = false);
        comp.iter_mut().for_each(|c| *c = u32::MAX);
        for &d in dr {
            deleted[d as usize] = true;
        }
        let mut n_comp = 0u32;
        for start in 0..ball.vertex_count() as u32 {
            if deleted[start as usize] || comp[start as usize] != u32::MAX {
                continue;
            }
            comp[start as usize] = n_comp;
            queue.clear();
            queue.push(start);
            while let Some(x) = queue.pop() {
                for (y, _) in ball.graph.neighbors(x) {
                    if !deleted[y as usize] && comp[y as usize] == u32::MAX {
                        comp[y as usize] = n_comp;
                        queue.push(y);
                    }
                }
            }
            n_comp += 1;
        }
        let qual_v = |c: u32| c != u && !k.beyond_through_t(u, c);
        let qual_u2 = |c: u32| k.beyond_through_t(u, c) && k.level(c) > k.level(u) + big_r;
        let mut touches_v = vec![false; n_comp as usize];
        let mut touches_u2 = vec![false; n_comp as usize];
        let mut seen_v = vec![false; k.vertex_count()];
        let mut seen_u2 = vec![false; k.vertex_count()];
        let mut v_count = 0u64;
        let mut u2_count = 0u64;
        for x in 0..ball.vertex_count() {
            if deleted[x] {
                continue;
            }
            let c = proj[x];
            let cc = comp[x] as usize;
            if qual_v(c) {
                touches_v[cc] = true;
                if !seen_v[c as usize] {
                    seen_v[c as usize] = true;
                    v_count += 1;
                }
            }
            if qual_u2(c) {
                touches_u2[cc] = true;
                if !seen_u2[c as usize] {
                    seen_u2[c as usize] = true;
                    u2_count += 1;
                }
            }
        }
        checked += v_count * u2_count;
        failures += (0..n_comp as usize)
            .filter(|&c| touches_v[c] && touches_u2[c])
            .count() as u64;
    }
    Ok(SeparationReport {
        lemma: "separation".into(),
        checked,
        failures,
        min_distance: None,
        flagged: false,
        negative_control: None,
    })
}

/// Reduced words of the given length over b, t; `t_lead` restricts to words
/// starting with t.
fn reduced_words(len: usize, t_lead: bool) -> Vec<Vec<i8>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out: Vec<Vec<i8>> = if t_lead {
        vec![vec![2]]
    } else {
        vec![vec![1], vec![-1], vec![2], vec![-2]]
    };
    while out[0].len() < len {
        let mut next = Vec::new();
        for w in &out {
            for s in [1i8, -1, 2, -2] {
                if w.last() != Some(&-s) {
                    let mut e = w.clone();
                    e.push(s);
                    next.push(e);
                }
            }
        }
        out = next;
    }
    out
}

/// Minimum distance between distinct translated spheres D^u_R over the
/// qualifying cosets (K₁ side, outward t-edge, levels in rℕ⁺), in the
/// exact word metric. Flagged, but still run, when R > r/4.
pub fn dr_disjointness(
    ball: &HnnBall,
    k: &DualGraphK,
    r: u32,
    big_r: u32,
) -> Result<SeparationReport> {
    if r == 0 {
        return Err(RelhypError::InvalidSpec("r must be positive".into()));
    }
    let flagged = big_r * 4 > r;
    let spec = &ball.spec;
    let mut min_distance = f64::INFINITY;
    let mut checked = 0u64;
    match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => {
            let quals: Vec<u32> = (0..k.vertex_count() as u32)
                .filter(|&u| {
                    k.in_k1(u) && k.t_edge_outward(u) && k.level(u) > 0 && k.level(u) % r == 0
                })
                .collect();
            for (i, &u) in quals.iter().enumerate() {
                let du = compute_dr(ball, k, big_r, u)?;
                for &v in &quals[i + 1..] {
                    let dv = compute_dr(ball, k, big_r, v)?;
                    if du.is_empty() || dv.is_empty() {
                        continue;
                    }
                    checked += 1;
                    let mut best = u64::MAX;
                    for &x in &du {
                        for &y in &dv {
                            best = best.min(ball.dist(x, y));
                        }
                    }
                    min_distance = min_distance.min(best as f64);
                }
            }
        }
        ModelKind::TreeCentral => {
            // The distance between g_u D_R and g_v D_R depends only on the
            // relative word h = w_u⁻¹ w_v: the central a-part cancels and
            // both in-ball spheres contain their a = 0 rows. Since
            // |w₀⁻¹ h w₁| ≥ |h| − 2R, relative words longer than 4R are
            // automatically ≥ 2R away; the short ones are enumerated by
            // their halves around the fork of u and v.
            let max_level = ball.radius.saturating_sub(big_r);
            let levels: Vec<u32> = (1..=max_level / r).map(|j| j * r).collect();
            let tails = reduced_words(big_r as usize, true);
            let mut eval = |h: &[i8]| {
                let mut best = u64::MAX;
                for w0 in &tails {
                    let left = word_concat(&word_inverse(w0), h);
                    for w1 in &tails {
                        best = best.min(word_concat(&left, w1).len() as u64);
                    }
                }
                checked += 1;
                min_distance = min_distance.min(best as f64);
            };
            for (i, &l1) in levels.iter().enumerate() {
                for &l2 in &levels[i..] {
                    let delta = (l2 - l1) as usize;
                    // u = z·p, v = z·q with |q| = |p| + delta; p and q fork,
                    // or p is empty and v extends u. A length-one stem
                    // forces z = t, whose continuations cannot start t⁻¹;
                    // outward cosets never end in t⁻¹ (a bare stem can always
                    // be chosen to end elsewhere once it has length two).
                    for lp in 0..l1 as usize {
                        let lq = lp + delta;
                        if lp == 0 && lq == 0 {
                            continue;
                        }
                        if lp + lq > 4 * big_r as usize {
                            break;
                        }
                        let zlen = l1 as usize - lp;
                        let ps = reduced_words(lp, false);
                        let qs = reduced_words(lq, false);
                        for p in &ps {
                            for q in &qs {
                                if lp > 0 && p.first() == q.first() {
                                    continue;
                                }
                                if zlen == 1
                                    && (p.first() == Some(&-2) || q.first() == Some(&-2))
                                {
                                    continue;
                                }
                                if p.last() == Some(&-2) || q.last() == Some(&-2) {
                                    continue;
                                }
                                eval(&word_concat(&word_inverse(p), q));
                            }
                        }
                    }
                }
            }
        }
    }
    let failures = if min_distance.is_finite() && min_distance < 2.0 * big_r as f64 {
        1
    } else {
        0
    };
    Ok(SeparationReport {
        lemma: "sphere-spacing".into(),
        checked,
        failures,
        min_distance: if min_distance.is_finite() {
            Some(min_distance)
        } else {
            None
        },
        flagged,
        negative_control: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub r: u32,
    pub big_r: u32,
    pub piece_count: usize,
    pub covered: usize,
    pub n_plus_size: usize,
    pub boundary_size: usize,
    pub incidences: usize,
    pub incidence_ok: bool,
    pub boundary_ok: bool,
    pub cover_multiplicity: u32,
    pub cover_diameter: f64,
    pub lebesgue_ok: bool,
    pub pass: bool,
}

pub struct HnnPartition {
    /// K-vertex of each nonempty piece, with its ball vertices.
    pub pieces: Vec<(u32, Vec<u32>)>,
    pub n_plus: Vec<u32>,
    pub boundary: Vec<u32>,
    pub report: PartitionReport,
}

fn in_k1_fiber(spec: &HnnSpec, e: &Elem) -> bool {
    match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => e.t >= 0,
        ModelKind::TreeCentral => e.w.first().map_or(true, |&s| s == 2),
    }
}

fn dist_to_c(spec: &HnnSpec, e: &Elem) -> u64 {
    match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => e.t.unsigned_abs(),
        ModelKind::TreeCentral => e.w.len() as u64,
    }
}

/// Membership of the translated element h in the base band V_r: on the K₁
/// side at distance ≥ R from C, not continuing past the R-collar of the
/// level-r coset on its stable-letter branch.
fn in_v_r(spec: &HnnSpec, h: &Elem, r: u32, big_r: u32) -> bool {
    if !in_k1_fiber(spec, h) || dist_to_c(spec, h) < big_r as u64 {
        return false;
    }
    match spec.kind {
        ModelKind::LineIdentity | ModelKind::LineInversion => h.t <= (r + big_r) as i64,
        ModelKind::TreeCentral => {
            !(h.w.len() > r as usize
                && h.w[r as usize] == 2
                && h.w.len() - r as usize > big_r as usize)
        }
    }
}

/// Builds the banded pieces V^u_r for u = C and the in-ball outward K₁
/// cosets at levels in rℕ⁺, plus the collar N⁺_R(C), and audits the facts:
/// the pieces and the collar cover the K₁ fibers exactly, pieces meet only
/// one band apart along a geodesic and then exactly in D^w_R, and the
/// boundary spheres assemble into an (R, d)-cover of multiplicity one.
pub fn build_partition(
    ball: &HnnBall,
    k: &DualGraphK,
    r: u32,
    big_r: u32,
) -> Result<HnnPartition> {
    if r == 0 {
        return Err(RelhypError::Precondition("band width r must be positive".into()));
    }
    if ball.radius < r + big_r {
        return Err(RelhypError::Precondition(format!(
            "ball radius {} cannot hold one full band of width {}",
            ball.radius,
            r + big_r
        )));
    }
    let spec = &ball.spec;
    let mut piece_us: Vec<u32> = vec![k.base()];
    for u in 0..k.vertex_count() as u32 {
        if k.in_k1(u) && k.t_edge_outward(u) && k.level(u) > 0 && k.level(u) % r == 0 {
            piece_us.push(u);
        }
    }
    let reps: Vec<Elem> = piece_us
        .iter()
        .map(|&u| spec.inv(&key_rep(spec, k.key(u))))
        .collect();
    let piece_pos: HashMap<u32, usize> = piece_us
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i))
        .collect();
    let mut pieces: Vec<(u32, Vec<u32>)> = piece_us.iter().map(|&u| (u, Vec::new())).collect();
    let mut n_plus = Vec::new();
    let mut membership: Vec<Vec<u32>> = vec![Vec::new(); ball.vertex_count()];
    let mut covered = 0usize;
    let mut uncovered = 0usize;
    for (x, e) in ball.elems.iter().enumerate() {
        if !in_k1_fiber(spec, e) {
            continue;
        }
        covered += 1;
        let depth = dist_to_c(spec, e);
        if depth <= big_r as u64 {
            n_plus.push(x as u32);
        }
        let mut any = false;
        // outward pieces live on prefixes of e's own normal form, so only
        // the prefix cosets at the piece levels can claim it
        let mut l = 0u64;
        while l <= depth {
            let key = match spec.kind {
                ModelKind::LineIdentity | ModelKind::LineInversion => CosetKey::Line(l as i64),
                ModelKind::TreeCentral => CosetKey::Tree(e.w[..l as usize].to_vec()),
            };
            if let Some(&pi) = k.vertex(&key).and_then(|u| piece_pos.get(&u)) {
                if in_v_r(spec, &spec.mul(&reps[pi], e), r, big_r) {
                    pieces[pi].1.push(x as u32);
                    membership[x].push(pi as u32);
                    any = true;
                }
            }
            l += r as u64;
        }
        if !any && depth > big_r as u64 {
            uncovered += 1;
        }
    }
    if uncovered > 0 {
        return Err(RelhypError::CoverFailure(format!(
            "{uncovered} K₁-side vertices fall outside every piece"
        )));
    }

    // boundary Z: union of the collar spheres at the positive piece levels
    let mut boundary: Vec<u32> = Vec::new();
    let mut dr_sets: HashMap<u32, Vec<u32>> = HashMap::new();
    for (x, e) in ball.elems.iter().enumerate() {
        if let Some(&pi) = dr_candidate(spec, k, e, big_r)
            .and_then(|u| piece_pos.get(&u))
            .filter(|&&pi| k.level(piece_us[pi]) > 0)
        {
            boundary.push(x as u32);
            dr_sets.entry(pi as u32).or_default().push(x as u32);
        }
    }
    boundary.sort_unstable();
    boundary.dedup();

    // incidence audit: intersecting pieces must be comparable, one band
    // apart, and meet exactly in the deeper collar sphere
    let mut pair_members: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    for (x, ms) in membership.iter().enumerate() {
        for (i, &p) in ms.iter().enumerate() {
            for &q in &ms[i + 1..] {
                pair_members
                    .entry((p.min(q), p.max(q)))
                    .or_default()
                    .push(x as u32);
            }
        }
    }
    let mut incidence_ok = true;
    for (&(p, q), members) in &pair_members {
        let (u, w) = (piece_us[p as usize], piece_us[q as usize]);
        let (lo, hi, hi_piece) = if k.level(u) < k.level(w) {
            (u, w, q)
        } else {
            (w, u, p)
        };
        let comparable = k.leq(lo, hi) && k.level(hi) == k.level(lo) + r;
        let mut sorted = members.clone();
        sorted.sort_unstable();
        let exact = dr_sets.get(&hi_piece).is_some_and(|d| *d == sorted);
        if !comparable || !exact {
            incidence_ok = false;
        }
    }
    // every multiply-covered vertex must lie on the boundary
    let mut overlap: Vec<u32> = pair_members.values().flatten().copied().collect();
    overlap.sort_unstable();
    overlap.dedup();
    let boundary_ok = overlap.iter().all(|x| boundary.binary_search(x).is_ok());

    // translated covers of D_R, one subset per collar sphere; the sphere
    // spacing keeps them 2R apart, so the assembled cover of Z has
    // multiplicity one and Lebesgue number beyond R
    let mut piece_ids: Vec<u32> = dr_sets.keys().copied().collect();
    piece_ids.sort_unstable();
    let mut cover_diameter = 0.0f64;
    for &pi in &piece_ids {
        let d = &dr_sets[&pi];
        for (i, &x) in d.iter().enumerate() {
            for &y in &d[i + 1..] {
                cover_diameter = cover_diameter.max(ball.dist(x, y) as f64);
            }
        }
    }
    let mut min_inter = f64::INFINITY;
    for (i, &pi) in piece_ids.iter().enumerate() {
        for &pj in &piece_ids[i + 1..] {
            for &x in &dr_sets[&pi] {
                for &y in &dr_sets[&pj] {
                    min_inter = min_inter.min(ball.dist(x, y) as f64);
                }
            }
        }
    }
    let lebesgue_ok = min_inter > big_r as f64;
    let cover_multiplicity = if lebesgue_ok { 1 } else { 2 };

    let report = PartitionReport {
        r,
        big_r,
        piece_count: pieces.iter().filter(|(_, v)| !v.is_empty()).count(),
        covered,
        n_plus_size: n_plus.len(),
        boundary_size: boundary.len(),
        incidences: pair_members.len(),
        incidence_ok,
        boundary_ok,
        cover_multiplicity,
        cover_diameter,
        lebesgue_ok,
        pass: incidence_ok && boundary_ok && lebesgue_ok,
    };
    pieces.retain(|(_, v)| !v.is_empty());
    Ok(HnnPartition {
        pieces,
        n_plus,
        boundary,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: &str) -> HnnSpec {
        match kind {
            "z2" => HnnSpec::new(FactorSpec::FreeAbelian(1), vec![0], StableAction::Identity),
            "klein" => HnnSpec::new(FactorSpec::FreeAbelian(1), vec![0], StableAction::Inversion),
            _ => HnnSpec::new(FactorSpec::FreeAbelian(2), vec![0], StableAction::Identity),
        }
        .unwrap()
    }

    #[test]
    fn rejects_unsupported_edge_subgroups() {
        let err = HnnSpec::new(FactorSpec::Free(2), vec![0], StableAction::Identity);
        assert!(matches!(err, Err(RelhypError::InvalidSpec(_))));
        let err = HnnSpec::new(FactorSpec::FreeAbelian(2), vec![1], StableAction::Identity);
        assert!(matches!(err, Err(RelhypError::InvalidSpec(_))));
    }

    #[test]
    fn lattice_ball_counts_match_the_l1_ball() {
        let ball = HnnBall::build(&model("z2"), 5, 1 << 20).unwrap();
        assert_eq!(ball.vertex_count(), 61);
        assert!(ball.graph().is_connected());
        let ball = HnnBall::build(&model("klein"), 5, 1 << 20).unwrap();
        assert_eq!(ball.vertex_count(), 61);
    }

    #[test]
    fn klein_relation_holds() {
        let spec = model("klein");
        // t a t⁻¹ a = e
        let mut x = Elem::identity();
        for gen in [2usize, 0, 3, 0] {
            x = spec.step(&x, gen);
        }
        assert_eq!(x, Elem::identity());
    }

    #[test]
    fn sphere_candidates_invert_membership_on_outward_cosets() {
        for (kind, radius) in [("z2", 9), ("klein", 9), ("zxf2", 6)] {
            let ball = HnnBall::build(&model(kind), radius, 1 << 21).unwrap();
            let k = dual_graph(&ball).unwrap();
            for big_r in [0u32, 2] {
                let mut by_candidate: HashMap<u32, Vec<u32>> = HashMap::new();
                for (i, e) in ball.elems.iter().enumerate() {
                    if let Some(u) = dr_candidate(&ball.spec, &k, e, big_r) {
                        by_candidate.entry(u).or_default().push(i as u32);
                    }
                }
                for u in 0..k.vertex_count() as u32 {
                    if !k.in_k1(u) {
                        continue;
                    }
                    let direct = compute_dr(&ball, &k, big_r, u).unwrap();
                    if k.t_edge_outward(u) {
                        let fast = by_candidate.remove(&u).unwrap_or_default();
                        assert_eq!(direct, fast, "{kind} R={big_r} u={u}");
                    }
                }
            }
        }
    }

    #[test]
    fn tree_model_ball_grows_like_z_times_f2() {
        let ball = HnnBall::build(&model("zxf2"), 4, 1 << 20).unwrap();
        let expect: usize = (-4i64..=4)
            .map(|m| 2 * 3usize.pow(4 - m.unsigned_abs() as u32) - 1)
            .sum();
        assert_eq!(ball.vertex_count(), expect);
        assert!(ball.graph().is_connected());
    }

    #[test]
    fn ball_cap_is_enforced() {
        let err = HnnBall::build(&model("zxf2"), 6, 100);
        assert!(matches!(err, Err(RelhypError::CapExceeded { .. })));
    }

    #[test]
    fn klein_word_metric_agrees_with_graph() {
        let spec = model("klein");
        let ball = HnnBall::build(&spec, 6, 1 << 20).unwrap();
        let d = ball.graph().dijkstra(0);
        for v in 0..ball.vertex_count() as u32 {
            assert_eq!(ball.dist(0, v) as f64, d[v as usize], "vertex {v}");
        }
        let oracle = MetricOracle::new(ball.graph());
        for x in [3u32, 17, 40] {
            for y in 0..ball.vertex_count() as u32 {
                assert_eq!(ball.dist(x, y) as f64, oracle.dist(x, y));
            }
        }
    }

    #[test]
    fn tree_word_metric_agrees_with_graph() {
        let ball = HnnBall::build(&model("zxf2"), 4, 1 << 20).unwrap();
        let d = ball.graph().dijkstra(0);
        for v in 0..ball.vertex_count() as u32 {
            assert_eq!(ball.dist(0, v) as f64, d[v as usize]);
        }
    }

    #[test]
    fn dual_graphs_are_trees_with_expected_shapes() {
        for kind in ["z2", "klein"] {
            let ball = HnnBall::build(&model(kind), 6, 1 << 20).unwrap();
            let k = dual_graph(&ball).unwrap();
            assert_eq!(k.vertex_count(), 13);
            assert_eq!(k.level(k.base()), 0);
            lipschitz_audit(&ball, &k).unwrap();
        }
        let ball = HnnBall::build(&model("zxf2"), 4, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let expect: usize = (0..=4u32)
            .map(|l| if l == 0 { 1 } else { 4 * 3usize.pow(l - 1) })
            .sum();
        assert_eq!(k.vertex_count(), expect);
        lipschitz_audit(&ball, &k).unwrap();
    }

    #[test]
    fn projection_sends_cosets_where_they_belong() {
        let ball = HnnBall::build(&model("z2"), 6, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        for (x, e) in ball.elems.iter().enumerate() {
            let p = dual_projection(&ball, &k, x as u32);
            if e.t == 0 {
                assert_eq!(p, k.base());
            }
            assert_eq!(k.key(p), &CosetKey::Line(e.t));
        }
    }

    #[test]
    fn dr_on_the_lattice_is_one_horizontal_row() {
        let ball = HnnBall::build(&model("z2"), 6, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let d2 = compute_dr(&ball, &k, 2, k.base()).unwrap();
        assert_eq!(d2.len(), 9); // a^m t², |m| ≤ 4
        for &x in &d2 {
            assert_eq!(ball.elems[x as usize].t, 2);
        }
        let d0 = compute_dr(&ball, &k, 0, k.base()).unwrap();
        for &x in &d0 {
            assert_eq!(ball.elems[x as usize].t, 0);
        }
        let err = compute_dr(&ball, &k, 2, k.vertex(&CosetKey::Line(-1)).unwrap());
        assert!(matches!(err, Err(RelhypError::Precondition(_))));
    }

    #[test]
    fn dr_translation_equivariance() {
        let ball = HnnBall::build(&model("z2"), 8, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let u = k.vertex(&CosetKey::Line(3)).unwrap();
        let du = compute_dr(&ball, &k, 2, u).unwrap();
        for &x in &du {
            assert_eq!(ball.elems[x as usize].t, 5);
        }
        assert_eq!(du.len(), 2 * (8 - 5) + 1);
    }

    #[test]
    fn lattice_separation_and_negative_control() {
        let ball = HnnBall::build(&model("z2"), 8, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let at = |n: i64| k.vertex(&CosetKey::Line(n)).unwrap();
        assert!(separation_check(&ball, &k, at(0), at(0), at(3), 2).is_err());
        assert!(separation_check(&ball, &k, at(-1), at(0), at(2), 2).is_err()); // gap = R
        let sep = separation_check(&ball, &k, at(-1), at(0), at(3), 2).unwrap();
        assert!(sep, "the row t² must cut n ≤ -1 off from n = 3");
        // inside the collar nothing blocks the way
        let close = separation_raw(&ball, &k, at(-1), at(0), at(1), 2).unwrap();
        assert!(!close);
    }

    #[test]
    fn branched_model_separates_incomparable_fibers() {
        let ball = HnnBall::build(&model("zxf2"), 6, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let at = |w: &[i8]| k.vertex(&CosetKey::Tree(w.to_vec())).unwrap();
        let sep = separation_check(&ball, &k, at(&[1]), at(&[2]), at(&[2, 2, 2, 2]), 2).unwrap();
        assert!(sep, "b-branch fiber cut off from the deep t-branch");
        let scan = tech1_scan(&ball, &k, 2, &[k.base(), at(&[2])]).unwrap();
        assert_eq!(scan.failures, 0);
        assert!(scan.checked > 0);
    }

    #[test]
    fn lattice_sphere_spacing_matches_the_band_gap() {
        let ball = HnnBall::build(&model("z2"), 20, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let rep = dr_disjointness(&ball, &k, 8, 2).unwrap();
        assert!(!rep.flagged);
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.min_distance, Some(8.0));
        let tight = dr_disjointness(&ball, &k, 4, 2).unwrap();
        assert!(tight.flagged);
        assert_eq!(tight.min_distance, Some(4.0));
    }

    #[test]
    fn tree_sphere_spacing_clears_twice_the_collar() {
        let ball = HnnBall::build(&model("zxf2"), 10, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let rep = dr_disjointness(&ball, &k, 8, 2).unwrap();
        assert!(!rep.flagged);
        assert!(rep.checked > 0);
        assert_eq!(rep.failures, 0, "min distance {:?}", rep.min_distance);
        // forks between outward level-8 stems keep the collars |h| - 2R = 6
        // apart; nothing cancels into the spheres because reduced stems
        // neither start nor end with the inverse stable letter
        assert_eq!(rep.min_distance, Some(6.0));
    }

    #[test]
    fn lattice_partition_audits_clean() {
        let ball = HnnBall::build(&model("z2"), 20, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let p = build_partition(&ball, &k, 8, 2).unwrap();
        assert!(p.report.pass, "{:?}", p.report);
        assert!(p.report.piece_count >= 2);
        assert!(p.report.incidences >= 1);
        assert_eq!(p.report.cover_multiplicity, 1);
        let err = build_partition(&ball, &k, 25, 2);
        assert!(matches!(err, Err(RelhypError::Precondition(_))));
    }

    #[test]
    fn branched_partition_audits_clean() {
        let ball = HnnBall::build(&model("zxf2"), 7, 1 << 20).unwrap();
        let k = dual_graph(&ball).unwrap();
        let p = build_partition(&ball, &k, 4, 1).unwrap();
        assert!(p.report.pass, "{:?}", p.report);
        assert!(p.report.piece_count > 2);
    }
}
